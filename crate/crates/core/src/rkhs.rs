//! Regularized least squares in the RKHS of an operator-valued kernel.
//!
//! The minimizer of `Σᵢ ‖yᵢ − H(uᵢ)‖² + γ‖H‖²` is `Ĥ = Σⱼ K(·, uⱼ) cⱼ` where the
//! stacked coefficients solve `(G + γI) c̄ = ȳ`. Stacking is trajectory-major,
//! then time, then channel, so Gram block `(i, j)` is the matrix of `K(uᵢ, uⱼ)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{shape, Error, Result};
use crate::kernels::{OperatorKernel, OutputWeight};
use crate::linalg;
use crate::signals::{Dataset, Signal, SignalOperator};

/// Default cap on the side length `n (τ+1) p` of a dense Gram matrix.
pub const DEFAULT_DENSE_CAP: usize = 4096;
/// Required relative residual of the normal equations.
pub const SOLVE_REL_TOL: f64 = 1e-10;
/// Relative bracket width at which γ bisection stops.
pub const GAMMA_REL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LayoutPolicy {
    /// Kronecker layout whenever the kernel is separable.
    #[default]
    Auto,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub layout: LayoutPolicy,
    pub dense_cap: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { layout: LayoutPolicy::Auto, dense_cap: DEFAULT_DENSE_CAP }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GramLayout {
    Dense(DMatrix<f64>),
    /// `K_scalar ⊗ (I_{τ+1} ⊗ W)`.
    Kronecker { scalar: DMatrix<f64>, weight: DMatrix<f64> },
}

/// The Gram operator on 𝒴ⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct GramOperator {
    layout: GramLayout,
    n: usize,
    samples: usize,
    p: usize,
}

/// `(k, W)` when `K(u, v) = k(u, v) W` with a fixed `W`.
fn separable_parts(kernel: &OperatorKernel, p: usize) -> Option<(crate::kernels::ScalarKernel, DMatrix<f64>)> {
    let weight_matrix = |w: &OutputWeight| match w {
        OutputWeight::ScaledIdentity(c) => DMatrix::identity(p, p) * *c,
        OutputWeight::Matrix(m) => m.clone(),
    };
    match kernel {
        OperatorKernel::Separable(b) => Some((b.scalar, weight_matrix(&b.weight))),
        OperatorKernel::Conjugated { weight, child } => {
            let (s, inner) = separable_parts(child, p)?;
            let r = weight_matrix(weight);
            Some((s, &r * inner * r.transpose()))
        }
        _ => None,
    }
}

fn check_inputs(inputs: &[Signal]) -> Result<()> {
    let first = inputs.first().ok_or_else(|| shape("at least one input is required"))?;
    for u in inputs {
        first.check_compatible(u)?;
    }
    Ok(())
}

impl GramOperator {
    /// Assembles the Gram operator, choosing the layout per `options`.
    pub fn build(kernel: &OperatorKernel, inputs: &[Signal], p: usize, options: FitOptions) -> Result<Self> {
        check_inputs(inputs)?;
        if let Some(kp) = kernel.output_dim() {
            if kp != p {
                return Err(shape(format!("kernel acts on {kp} output channels, data has {p}")));
            }
        }
        if options.layout == LayoutPolicy::Auto {
            if let Some((scalar, weight)) = separable_parts(kernel, p) {
                let n = inputs.len();
                let mut k = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in i..n {
                        let v = scalar.eval(&inputs[i], &inputs[j])?;
                        k[(i, j)] = v;
                        k[(j, i)] = v;
                    }
                }
                return Ok(Self {
                    layout: GramLayout::Kronecker { scalar: k, weight },
                    n,
                    samples: inputs[0].grid().len(),
                    p,
                });
            }
        }
        Self::build_dense_capped(kernel, inputs, p, options.dense_cap)
    }

    /// Dense layout regardless of kernel structure.
    pub fn build_dense(kernel: &OperatorKernel, inputs: &[Signal], p: usize) -> Result<Self> {
        Self::build_dense_capped(kernel, inputs, p, DEFAULT_DENSE_CAP)
    }

    fn build_dense_capped(kernel: &OperatorKernel, inputs: &[Signal], p: usize, cap: usize) -> Result<Self> {
        check_inputs(inputs)?;
        let n = inputs.len();
        let samples = inputs[0].grid().len();
        let block = samples * p;
        let size = n * block;
        if size > cap {
            return Err(Error::MemoryCap { size, cap });
        }
        let mut g = DMatrix::zeros(size, size);
        for i in 0..n {
            for j in i..n {
                let b = kernel.eval(&inputs[i], &inputs[j])?.to_dense(p)?;
                g.view_mut((i * block, j * block), (block, block)).copy_from(&b);
                if i != j {
                    g.view_mut((j * block, i * block), (block, block)).copy_from(&b.transpose());
                }
            }
        }
        Ok(Self { layout: GramLayout::Dense(g), n, samples, p })
    }

    pub fn layout(&self) -> &GramLayout {
        &self.layout
    }

    pub fn is_kronecker(&self) -> bool {
        matches!(self.layout, GramLayout::Kronecker { .. })
    }

    /// Side length `n (τ+1) p`.
    pub fn size(&self) -> usize {
        self.n * self.samples * self.p
    }

    pub fn trace(&self) -> f64 {
        match &self.layout {
            GramLayout::Dense(g) => g.trace(),
            GramLayout::Kronecker { scalar, weight } => scalar.trace() * weight.trace() * self.samples as f64,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.layout {
            GramLayout::Dense(g) => g.clone(),
            GramLayout::Kronecker { scalar, weight } => {
                let block = self.samples * self.p;
                let mut g = DMatrix::zeros(self.size(), self.size());
                for i in 0..self.n {
                    for j in 0..self.n {
                        for t in 0..self.samples {
                            let at = (i * block + t * self.p, j * block + t * self.p);
                            g.view_mut(at, (self.p, self.p)).copy_from(&(weight * scalar[(i, j)]));
                        }
                    }
                }
                g
            }
        }
    }

    /// `G c̄`.
    pub fn apply(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.size() {
            return Err(shape(format!("vector of length {} for Gram of size {}", c.len(), self.size())));
        }
        match &self.layout {
            GramLayout::Dense(g) => Ok((g * DVector::from_column_slice(c)).as_slice().to_vec()),
            GramLayout::Kronecker { scalar, weight } => {
                let (n, s, p) = (self.n, self.samples, self.p);
                // first W on every sample, then mix trajectories
                let mut wc = vec![0.0; c.len()];
                for j in 0..n {
                    for t in 0..s {
                        let base = (j * s + t) * p;
                        for a in 0..p {
                            wc[base + a] = (0..p).map(|b| weight[(a, b)] * c[base + b]).sum();
                        }
                    }
                }
                let block = s * p;
                let mut out = vec![0.0; c.len()];
                for i in 0..n {
                    for j in 0..n {
                        let k = scalar[(i, j)];
                        if k == 0.0 {
                            continue;
                        }
                        for x in 0..block {
                            out[i * block + x] += k * wc[j * block + x];
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Solves `(G + γI) c̄ = ȳ`.
    pub fn solve(&self, gamma: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        if rhs.len() != self.size() {
            return Err(shape(format!("right-hand side of length {} for Gram of size {}", rhs.len(), self.size())));
        }
        match &self.layout {
            GramLayout::Dense(g) => {
                let mut a = g.clone();
                for i in 0..a.nrows() {
                    a[(i, i)] += gamma;
                }
                match a.cholesky() {
                    Some(ch) => Ok(ch.solve(&DVector::from_column_slice(rhs)).as_slice().to_vec()),
                    None => Err(Error::Numerical(format!(
                        "G + gamma I is not positive definite (min eigenvalue of G {:.3e})",
                        linalg::min_eigenvalue(g)
                    ))),
                }
            }
            GramLayout::Kronecker { scalar, weight } => self.solve_kronecker(scalar, weight, gamma, rhs),
        }
    }

    /// Per-eigenmode solve: with `K = Q Λ Qᵀ` and `W = P M Pᵀ`, the system
    /// diagonalizes with entries `λₐ μ_b + γ`.
    fn solve_kronecker(&self, scalar: &DMatrix<f64>, weight: &DMatrix<f64>, gamma: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let (n, s, p) = (self.n, self.samples, self.p);
        let (lam, q) = linalg::sorted_symmetric_eigen(scalar);
        let (mu, pm) = linalg::sorted_symmetric_eigen(weight);
        let scale = lam.amax() * mu.amax();
        let floor = -crate::kernels::GRAM_PSD_REL_TOL * scale;
        if lam.min() * mu.amax().max(0.0) < floor || mu.min() * lam.amax().max(0.0) < floor {
            return Err(Error::Numerical(format!(
                "Gram is not positive semidefinite (scalar min eigenvalue {:.3e}, weight min eigenvalue {:.3e})",
                lam.min(),
                mu.min()
            )));
        }
        let idx = |i: usize, t: usize, c: usize| (i * s + t) * p + c;
        // forward transform: (Qᵀ ⊗ I ⊗ Pᵀ) ȳ
        let mut tmp = vec![0.0; rhs.len()];
        for i in 0..n {
            for t in 0..s {
                for b in 0..p {
                    tmp[idx(i, t, b)] = (0..p).map(|c| pm[(c, b)] * rhs[idx(i, t, c)]).sum();
                }
            }
        }
        let mut hat = vec![0.0; rhs.len()];
        for a in 0..n {
            for t in 0..s {
                for b in 0..p {
                    let v: f64 = (0..n).map(|i| q[(i, a)] * tmp[idx(i, t, b)]).sum();
                    let denom = lam[a] * mu[b] + gamma;
                    if denom <= 0.0 {
                        return Err(Error::Numerical(format!("nonpositive eigenmode {denom:.3e}")));
                    }
                    hat[idx(a, t, b)] = v / denom;
                }
            }
        }
        // back transform: (Q ⊗ I ⊗ P)
        for i in 0..n {
            for t in 0..s {
                for b in 0..p {
                    tmp[idx(i, t, b)] = (0..n).map(|a| q[(i, a)] * hat[idx(a, t, b)]).sum();
                }
            }
        }
        let mut out = vec![0.0; rhs.len()];
        for i in 0..n {
            for t in 0..s {
                for c in 0..p {
                    out[idx(i, t, c)] = (0..p).map(|b| pm[(c, b)] * tmp[idx(i, t, b)]).sum();
                }
            }
        }
        Ok(out)
    }

    /// `√⟨c̄, G c̄⟩`.
    pub fn norm_of(&self, c: &[f64]) -> Result<f64> {
        let gc = self.apply(c)?;
        let q: f64 = c.iter().zip(&gc).map(|(a, b)| a * b).sum();
        Ok(q.max(0.0).sqrt())
    }
}

/// The estimate `Ĥ(·) = Σⱼ K(·, uⱼ) cⱼ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedOperator {
    kernel: OperatorKernel,
    centers: Vec<Signal>,
    coefficients: Vec<Signal>,
    gamma: f64,
    rkhs_norm: f64,
}

impl FittedOperator {
    /// Assembles a model from explicit coefficients and computes its RKHS norm.
    pub fn from_parts(kernel: OperatorKernel, centers: Vec<Signal>, coefficients: Vec<Signal>, gamma: f64) -> Result<Self> {
        if centers.len() != coefficients.len() || centers.is_empty() {
            return Err(shape(format!("{} centers for {} coefficients", centers.len(), coefficients.len())));
        }
        let p = coefficients[0].dim();
        for c in &coefficients {
            if c.dim() != p || c.grid() != coefficients[0].grid() {
                return Err(shape("coefficients disagree in shape"));
            }
        }
        if coefficients[0].grid() != centers[0].grid() {
            return Err(shape("coefficients and centers live on different grids"));
        }
        let gram = GramOperator::build(&kernel, &centers, p, FitOptions::default())?;
        let stacked: Vec<f64> = coefficients.iter().flat_map(|c| c.values().iter().copied()).collect();
        let rkhs_norm = gram.norm_of(&stacked)?;
        Ok(Self { kernel, centers, coefficients, gamma, rkhs_norm })
    }

    pub fn kernel(&self) -> &OperatorKernel {
        &self.kernel
    }

    pub fn centers(&self) -> &[Signal] {
        &self.centers
    }

    pub fn coefficients(&self) -> &[Signal] {
        &self.coefficients
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `‖Ĥ‖_ℋ = √⟨c̄, G c̄⟩`.
    pub fn rkhs_norm(&self) -> f64 {
        self.rkhs_norm
    }

    pub fn input_dim(&self) -> usize {
        self.centers[0].dim()
    }

    pub fn output_dim(&self) -> usize {
        self.coefficients[0].dim()
    }

    pub fn stacked_coefficients(&self) -> Vec<f64> {
        self.coefficients.iter().flat_map(|c| c.values().iter().copied()).collect()
    }

    /// `Ĥ(u)`.
    pub fn evaluate(&self, u: &Signal) -> Result<Signal> {
        let grid = *self.coefficients[0].grid();
        let p = self.output_dim();
        let mut acc = vec![0.0; grid.len() * p];
        for (center, coef) in self.centers.iter().zip(&self.coefficients) {
            let term = self.kernel.apply(u, center, coef)?;
            for (a, x) in acc.iter_mut().zip(term.values()) {
                *a += x;
            }
        }
        Signal::new(grid, p, acc)
    }

    /// Relative residual `‖(G + γI) c̄ − ȳ‖ / ‖ȳ‖` against the given targets.
    pub fn linear_system_residual(&self, targets: &[Signal]) -> Result<f64> {
        if targets.len() != self.centers.len() {
            return Err(shape("one target per center is required"));
        }
        let gram = GramOperator::build(&self.kernel, &self.centers, self.output_dim(), FitOptions::default())?;
        let c = self.stacked_coefficients();
        let gc = gram.apply(&c)?;
        let y: Vec<f64> = targets.iter().flat_map(|s| s.values().iter().copied()).collect();
        if y.len() != c.len() {
            return Err(shape("targets do not match coefficient shapes"));
        }
        let res: f64 = gc.iter().zip(&c).zip(&y).map(|((g, c), y)| (g + self.gamma * c - y).powi(2)).sum();
        let scale: f64 = y.iter().map(|v| v * v).sum();
        Ok(if scale > 0.0 { (res / scale).sqrt() } else { res.sqrt() })
    }
}

impl SignalOperator for FittedOperator {
    fn apply(&self, u: &Signal) -> Result<Signal> {
        self.evaluate(u)
    }
}

/// Gram operator and stacked targets of one dataset; solves for any γ.
#[derive(Debug, Clone)]
pub struct RegularizedProblem {
    kernel: OperatorKernel,
    centers: Vec<Signal>,
    targets: Vec<Signal>,
    gram: GramOperator,
    rhs: Vec<f64>,
}

impl RegularizedProblem {
    pub fn new(kernel: &OperatorKernel, data: &Dataset, options: FitOptions) -> Result<Self> {
        let gram = GramOperator::build(kernel, data.inputs(), data.output_dim(), options)?;
        Ok(Self {
            kernel: kernel.clone(),
            centers: data.inputs().to_vec(),
            targets: data.outputs().to_vec(),
            gram,
            rhs: data.stacked_outputs(),
        })
    }

    pub fn gram(&self) -> &GramOperator {
        &self.gram
    }

    pub fn targets(&self) -> &[f64] {
        &self.rhs
    }

    pub fn fit(&self, gamma: f64) -> Result<FittedOperator> {
        let c = self.gram.solve(gamma, &self.rhs)?;
        let gc = self.gram.apply(&c)?;
        let res: f64 = gc.iter().zip(&c).zip(&self.rhs).map(|((g, c), y)| (g + gamma * c - y).powi(2)).sum();
        let scale: f64 = self.rhs.iter().map(|v| v * v).sum();
        if res > (SOLVE_REL_TOL * SOLVE_REL_TOL) * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Numerical(format!(
                "normal equations solved with relative residual {:.3e}",
                (res / scale.max(f64::MIN_POSITIVE)).sqrt()
            )));
        }
        let norm_sq: f64 = c.iter().zip(&gc).map(|(a, b)| a * b).sum();
        let grid = *self.targets[0].grid();
        let p = self.targets[0].dim();
        let block = grid.len() * p;
        let coefficients = c
            .chunks_exact(block)
            .map(|chunk| Signal::new(grid, p, chunk.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(FittedOperator {
            kernel: self.kernel.clone(),
            centers: self.centers.clone(),
            coefficients,
            gamma,
            rkhs_norm: norm_sq.max(0.0).sqrt(),
        })
    }
}

/// Fits `Ĥ` at a fixed `γ > 0`.
pub fn fit(kernel: &OperatorKernel, data: &Dataset, gamma: f64) -> Result<FittedOperator> {
    fit_with(kernel, data, gamma, FitOptions::default())
}

pub fn fit_with(kernel: &OperatorKernel, data: &Dataset, gamma: f64, options: FitOptions) -> Result<FittedOperator> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    RegularizedProblem::new(kernel, data, options)?.fit(gamma)
}

/// `Σᵢ ‖yᵢ − Ĥ(uᵢ)‖²`.
pub fn empirical_risk(model: &FittedOperator, data: &Dataset) -> Result<f64> {
    let mut risk = 0.0;
    for (u, y) in data.pairs() {
        risk += model.evaluate(u)?.distance_sq(y)?;
    }
    Ok(risk)
}

#[derive(Debug, Clone)]
pub struct TunedFit {
    pub gamma: f64,
    pub model: FittedOperator,
    /// Fits evaluated during bracketing and bisection.
    pub evaluations: usize,
    /// True when even the smallest bracketed γ met the target.
    pub at_floor: bool,
}

/// Smallest γ (to relative precision 1e-3) whose fit has RKHS norm ≤ `rho`.
///
/// Brackets by doubling/halving from `γ₀ = trace(G) / (n (τ+1) p)` using the
/// monotone decrease of the norm in γ, then bisects geometrically.
pub fn tune_gamma(kernel: &OperatorKernel, data: &Dataset, rho: f64) -> Result<TunedFit> {
    tune_gamma_with(kernel, data, rho, FitOptions::default())
}

pub fn tune_gamma_with(kernel: &OperatorKernel, data: &Dataset, rho: f64, options: FitOptions) -> Result<TunedFit> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidParameter(format!("rho must lie in (0, 1], got {rho}")));
    }
    let problem = RegularizedProblem::new(kernel, data, options)?;
    let size = problem.gram.size() as f64;
    let mut gamma0 = problem.gram.trace() / size;
    if !(gamma0 > 0.0 && gamma0.is_finite()) {
        gamma0 = 1.0;
    }
    let mut evaluations = 0;
    let mut eval = |g: f64| {
        evaluations += 1;
        problem.fit(g)
    };

    const MAX_STEPS: usize = 200;
    let floor = gamma0 * 2f64.powi(-60);
    // zero targets give a zero fit for every γ; halving would run to the floor
    if problem.rhs.iter().all(|&y| y == 0.0) {
        let model = eval(floor)?;
        return Ok(TunedFit { gamma: floor, model, evaluations: 1, at_floor: true });
    }

    let first = eval(gamma0)?;
    let (mut lo, mut hi, mut hi_model);
    if first.rkhs_norm() <= rho {
        hi = gamma0;
        hi_model = first;
        loop {
            let g = hi / 2.0;
            if g < floor {
                return Ok(TunedFit { gamma: hi, model: hi_model, evaluations, at_floor: true });
            }
            let m = eval(g)?;
            if m.rkhs_norm() > rho {
                lo = g;
                break;
            }
            hi = g;
            hi_model = m;
        }
    } else {
        lo = gamma0;
        let mut steps = 0;
        loop {
            let g = lo * 2.0;
            let m = eval(g)?;
            if m.rkhs_norm() <= rho {
                hi = g;
                hi_model = m;
                break;
            }
            lo = g;
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::Numerical(format!("could not reach RKHS norm {rho} by increasing gamma")));
            }
        }
    }
    while hi / lo - 1.0 > GAMMA_REL_TOL {
        let mid = (lo * hi).sqrt();
        let m = eval(mid)?;
        if m.rkhs_norm() <= rho {
            hi = mid;
            hi_model = m;
        } else {
            lo = mid;
        }
    }
    Ok(TunedFit { gamma: hi, model: hi_model, evaluations, at_floor: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub gamma: f64,
    pub rkhs_norm: f64,
    pub empirical_risk: f64,
}

/// Norm and empirical risk over a list of γ values, reusing one Gram operator.
pub fn sweep_gamma(kernel: &OperatorKernel, data: &Dataset, gammas: &[f64]) -> Result<Vec<SweepPoint>> {
    let problem = RegularizedProblem::new(kernel, data, FitOptions::default())?;
    gammas
        .iter()
        .map(|&gamma| {
            let model = problem.fit(gamma)?;
            Ok(SweepPoint { gamma, rkhs_norm: model.rkhs_norm(), empirical_risk: empirical_risk(&model, data)? })
        })
        .collect()
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}
