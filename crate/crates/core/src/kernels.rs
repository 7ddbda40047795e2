//! Scalar and operator-valued kernels on sampled signals, with structural
//! certificates for nonexpansiveness, causality and boundedness.
//!
//! Every operator-valued kernel shipped here is block-diagonal in time: the
//! value `K(u, v)` acts on an output trajectory `y` sample by sample,
//! `(K(u, v) y)(t) = B_t y(t)` with a symmetric `p × p` block `B_t`. Separable
//! and conjugated kernels use the same block at every `t`; causal-diagonal
//! kernels use `B_t = k_t(P_t u, P_t v) R_t`.
//!
//! Certificates are derived from structure alone and are never read from files.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::linalg;
use crate::signals::Signal;

/// Slack for comparing kernel parameters against certificate thresholds.
const CERT_SLACK: f64 = 1e-12;
/// Relative PSD tolerance for Gram matrices.
pub const GRAM_PSD_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    Proven,
    Unknown,
}

impl Certificate {
    pub fn is_proven(self) -> bool {
        self == Certificate::Proven
    }

    fn from_bool(b: bool) -> Self {
        if b {
            Certificate::Proven
        } else {
            Certificate::Unknown
        }
    }
}

/// Scalar kernel catalog. Radial kernels use the ℓ₂ distance, bilinear and
/// polynomial kernels the ℓ₂ inner product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarKernel {
    /// `⟨u, v⟩`
    Bilinear,
    /// `(c + ⟨u, v⟩)^d`
    Polynomial { c: f64, d: u32 },
    /// `exp(−‖u − v‖² / σ²)`
    Gaussian { sigma: f64 },
    /// `exp(−‖u − v‖ / σ)`
    Laplacian { sigma: f64 },
    /// `(1 + ‖u − v‖) exp(−‖u − v‖)`
    ScaledLaplacian,
    /// `(c + ‖u − v‖²)^(−d)`
    InversePower { c: f64, d: f64 },
    /// `exp(−β max(u, v))` on scalar points of ℝ⁺.
    StableSpline { beta: f64 },
}

impl ScalarKernel {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            ScalarKernel::Polynomial { c, .. } if !(c >= 0.0 && c.is_finite()) => bad(format!("polynomial c must be >= 0, got {c}")),
            ScalarKernel::Gaussian { sigma } | ScalarKernel::Laplacian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                bad(format!("sigma must be > 0, got {sigma}"))
            }
            ScalarKernel::InversePower { c, d } if !(c > 0.0 && c.is_finite() && d > 0.0 && d.is_finite()) => {
                bad(format!("inverse power needs c > 0 and d > 0, got c = {c}, d = {d}"))
            }
            ScalarKernel::StableSpline { beta } if !(beta > 0.0 && beta.is_finite()) => bad(format!("beta must be > 0, got {beta}")),
            _ => Ok(()),
        }
    }

    /// `k(u, v)`.
    pub fn eval(&self, u: &Signal, v: &Signal) -> Result<f64> {
        self.validate()?;
        u.check_compatible(v)?;
        if let ScalarKernel::StableSpline { .. } = self {
            check_spline_point(u)?;
            check_spline_point(v)?;
        }
        let inner = u.inner(v, crate::signals::Quadrature::Sequence)?;
        let dist = u.distance_sq(v)?;
        Ok(self.eval_parts(inner, dist, u.values()[0], v.values()[0]))
    }

    /// Evaluates from precomputed `⟨u, v⟩` and `‖u − v‖²`; the first samples
    /// are only read by the stable spline.
    pub(crate) fn eval_parts(&self, inner: f64, dist_sq: f64, u0: f64, v0: f64) -> f64 {
        let dist_sq = dist_sq.max(0.0);
        match *self {
            ScalarKernel::Bilinear => inner,
            ScalarKernel::Polynomial { c, d } => (c + inner).powi(d as i32),
            ScalarKernel::Gaussian { sigma } => (-dist_sq / (sigma * sigma)).exp(),
            ScalarKernel::Laplacian { sigma } => (-dist_sq.sqrt() / sigma).exp(),
            ScalarKernel::ScaledLaplacian => {
                let r = dist_sq.sqrt();
                (1.0 + r) * (-r).exp()
            }
            ScalarKernel::InversePower { c, d } => (c + dist_sq).powf(-d),
            ScalarKernel::StableSpline { beta } => (-beta * u0.max(v0)).exp(),
        }
    }

    /// Structural nonexpansiveness certificate for the scalar catalog.
    pub fn certify_nonexpansive(&self) -> Certificate {
        if self.validate().is_err() {
            return Certificate::Unknown;
        }
        Certificate::from_bool(match *self {
            ScalarKernel::Bilinear | ScalarKernel::ScaledLaplacian => true,
            ScalarKernel::Gaussian { sigma } => sigma * sigma >= 2.0 * (1.0 - CERT_SLACK),
            ScalarKernel::InversePower { c, d } => 2.0 * d <= c.powf(d + 1.0) * (1.0 + CERT_SLACK),
            _ => false,
        })
    }
}

fn check_spline_point(u: &Signal) -> Result<()> {
    if u.dim() != 1 || u.grid().tau() != 0 {
        return Err(Error::InvalidParameter(
            "stable spline kernel is defined only on scalar single-sample inputs".into(),
        ));
    }
    if u.values()[0] < 0.0 {
        return Err(Error::InvalidParameter("stable spline inputs must be nonnegative".into()));
    }
    Ok(())
}

/// A linear map on ℝ^p applied at every sample: either `c·I` (any `p`) or an explicit matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputWeight {
    ScaledIdentity(f64),
    Matrix(DMatrix<f64>),
}

impl OutputWeight {
    pub fn identity() -> Self {
        OutputWeight::ScaledIdentity(1.0)
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        match self {
            OutputWeight::ScaledIdentity(c) => c.abs(),
            OutputWeight::Matrix(m) => linalg::spectral_norm(m),
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            OutputWeight::ScaledIdentity(_) => None,
            OutputWeight::Matrix(m) => Some(m.nrows()),
        }
    }

    fn check_square(&self) -> Result<()> {
        match self {
            OutputWeight::Matrix(m) if !m.is_square() || m.is_empty() => Err(shape("output weight must be a nonempty square matrix")),
            OutputWeight::ScaledIdentity(c) if !c.is_finite() => Err(Error::InvalidParameter("output weight must be finite".into())),
            _ => Ok(()),
        }
    }

    /// Errors unless the weight is symmetric positive semidefinite.
    fn check_psd(&self) -> Result<()> {
        self.check_square()?;
        match self {
            OutputWeight::ScaledIdentity(c) if *c < 0.0 => Err(Error::InvalidParameter(format!("output weight {c}·I is not positive"))),
            OutputWeight::Matrix(m) => {
                if !linalg::is_symmetric(m, 1e-12) {
                    return Err(Error::InvalidParameter("output weight is not symmetric".into()));
                }
                let min = linalg::min_eigenvalue(m);
                let scale = linalg::symmetric_spectral_norm(m);
                if min < -1e-12 * scale {
                    return Err(Error::InvalidParameter(format!("output weight has negative eigenvalue {min:.3e}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum WeightRepr {
    Name(String),
    Scale(f64),
    Rows(Vec<f64>),
}

impl TryFrom<WeightRepr> for OutputWeight {
    type Error = Error;
    fn try_from(r: WeightRepr) -> Result<Self> {
        match r {
            WeightRepr::Name(n) if n == "identity" => Ok(OutputWeight::identity()),
            WeightRepr::Name(n) => Err(Error::Format(format!("unknown output weight {n:?}"))),
            WeightRepr::Scale(c) => Ok(OutputWeight::ScaledIdentity(c)),
            WeightRepr::Rows(rows) => Ok(OutputWeight::Matrix(linalg::square_from_row_major(&rows)?)),
        }
    }
}

impl From<&OutputWeight> for WeightRepr {
    fn from(w: &OutputWeight) -> Self {
        match w {
            OutputWeight::ScaledIdentity(c) if *c == 1.0 => WeightRepr::Name("identity".into()),
            OutputWeight::ScaledIdentity(c) => WeightRepr::Scale(*c),
            OutputWeight::Matrix(m) => WeightRepr::Rows(linalg::to_row_major(m)),
        }
    }
}

/// A scalar kernel times a fixed symmetric PSD output weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableBlock {
    pub scalar: ScalarKernel,
    pub weight: OutputWeight,
}

/// Per-time blocks of a causal-diagonal kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeBlocks {
    Shared(SeparableBlock),
    PerTime(Vec<SeparableBlock>),
}

/// An operator-valued kernel `K(u, v) ∈ B(𝒴)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub enum OperatorKernel {
    /// `k(u, v) R`.
    Separable(SeparableBlock),
    /// `Σ αᵢ Kᵢ(u, v)`.
    Sum { weights: Vec<f64>, children: Vec<OperatorKernel> },
    /// `R L(u, v) Rᵀ`.
    Conjugated { weight: OutputWeight, child: Box<OperatorKernel> },
    /// `(K(u, v) y)(t) = k_t(P_t u, P_t v) R_t y(t)`.
    CausalDiagonal(TimeBlocks),
}

/// A symmetric per-sample block `a·I + B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub identity_scale: f64,
    pub matrix: Option<DMatrix<f64>>,
}

impl Block {
    fn scaled(weight: &OutputWeight, k: f64) -> Self {
        match weight {
            OutputWeight::ScaledIdentity(c) => Block { identity_scale: k * c, matrix: None },
            OutputWeight::Matrix(m) => Block { identity_scale: 0.0, matrix: Some(m * k) },
        }
    }

    fn axpy(&mut self, a: f64, other: &Block) {
        self.identity_scale += a * other.identity_scale;
        if let Some(om) = &other.matrix {
            match &mut self.matrix {
                Some(m) => *m += om * a,
                None => self.matrix = Some(om * a),
            }
        }
    }

    fn conjugate(&self, weight: &OutputWeight) -> Block {
        match weight {
            OutputWeight::ScaledIdentity(c) => Block {
                identity_scale: c * c * self.identity_scale,
                matrix: self.matrix.as_ref().map(|m| m * (c * c)),
            },
            OutputWeight::Matrix(r) => {
                let mut out = r * r.transpose() * self.identity_scale;
                if let Some(m) = &self.matrix {
                    out += r * m * r.transpose();
                }
                Block { identity_scale: 0.0, matrix: Some(out) }
            }
        }
    }

    fn dim(&self) -> Option<usize> {
        self.matrix.as_ref().map(|m| m.nrows())
    }

    pub fn to_matrix(&self, p: usize) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::identity(p, p) * self.identity_scale;
        if let Some(m) = &self.matrix {
            if m.nrows() != p {
                return Err(shape(format!("kernel block is {}x{}, output dimension is {p}", m.nrows(), m.ncols())));
            }
            out += m;
        }
        Ok(out)
    }

    pub fn spectral_norm(&self) -> f64 {
        match &self.matrix {
            None => self.identity_scale.abs(),
            Some(m) => {
                let shifted = m + DMatrix::identity(m.nrows(), m.ncols()) * self.identity_scale;
                linalg::symmetric_spectral_norm(&shifted)
            }
        }
    }

    fn apply(&self, y: &[f64], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(y) {
            *o = self.identity_scale * x;
        }
        if let Some(m) = &self.matrix {
            for (r, o) in out.iter_mut().enumerate() {
                *o += (0..y.len()).map(|c| m[(r, c)] * y[c]).sum::<f64>();
            }
        }
    }
}

/// The value `K(u, v)`: one block per sample, or a single block shared by all samples.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelValue {
    blocks: Vec<Block>,
    samples: usize,
}

impl KernelValue {
    fn uniform(block: Block, samples: usize) -> Self {
        Self { blocks: vec![block], samples }
    }

    pub fn block(&self, t: usize) -> &Block {
        if self.blocks.len() == 1 {
            &self.blocks[0]
        } else {
            &self.blocks[t]
        }
    }

    pub fn is_uniform(&self) -> bool {
        self.blocks.len() == 1
    }

    fn zero_like(samples: usize) -> Self {
        Self::uniform(Block { identity_scale: 0.0, matrix: None }, samples)
    }

    fn axpy(&mut self, a: f64, other: &KernelValue) {
        if other.blocks.len() > 1 && self.blocks.len() == 1 {
            self.blocks = vec![self.blocks[0].clone(); other.blocks.len()];
        }
        if self.blocks.len() == 1 {
            let b = other.block(0).clone();
            self.blocks[0].axpy(a, &b);
        } else {
            for t in 0..self.blocks.len() {
                let b = other.block(t).clone();
                self.blocks[t].axpy(a, &b);
            }
        }
    }

    /// Operator norm on 𝒴: the largest block norm.
    pub fn operator_norm(&self) -> f64 {
        self.blocks.iter().map(Block::spectral_norm).fold(0.0, f64::max)
    }

    /// Applies `K(u, v)` to an output trajectory.
    pub fn apply(&self, y: &Signal) -> Result<Signal> {
        if y.grid().len() != self.samples {
            return Err(shape(format!("kernel value covers {} samples, signal has {}", self.samples, y.grid().len())));
        }
        let p = y.dim();
        if let Some(d) = self.blocks.iter().find_map(Block::dim) {
            if d != p {
                return Err(shape(format!("kernel acts on {d} channels, signal has {p}")));
            }
        }
        let mut out = vec![0.0; y.values().len()];
        for t in 0..self.samples {
            self.block(t).apply(y.sample(t), &mut out[t * p..(t + 1) * p]);
        }
        Signal::new(*y.grid(), p, out)
    }

    /// The `samples·p` square matrix of `y ↦ K(u, v) y` (time-major, then channel).
    pub fn to_dense(&self, p: usize) -> Result<DMatrix<f64>> {
        let n = self.samples * p;
        let mut out = DMatrix::zeros(n, n);
        let shared = if self.is_uniform() { Some(self.blocks[0].to_matrix(p)?) } else { None };
        for t in 0..self.samples {
            let b = match &shared {
                Some(b) => b.clone(),
                None => self.blocks[t].to_matrix(p)?,
            };
            out.view_mut((t * p, t * p), (p, p)).copy_from(&b);
        }
        Ok(out)
    }
}

/// Prefix sums of `⟨u(s), v(s)⟩` and `‖u(s) − v(s)‖²` over `s ≤ t`.
fn prefix_stats(u: &Signal, v: &Signal) -> (Vec<f64>, Vec<f64>) {
    let (mut inner, mut dist) = (0.0, 0.0);
    let mut inners = Vec::with_capacity(u.grid().len());
    let mut dists = Vec::with_capacity(u.grid().len());
    for (a, b) in u.samples().zip(v.samples()) {
        for (x, y) in a.iter().zip(b) {
            inner += x * y;
            dist += (x - y) * (x - y);
        }
        inners.push(inner);
        dists.push(dist);
    }
    (inners, dists)
}

impl OperatorKernel {
    /// Separable kernel `k(u, v) R`; `R` must be symmetric positive semidefinite.
    pub fn separable(scalar: ScalarKernel, weight: OutputWeight) -> Result<Self> {
        scalar.validate()?;
        weight.check_psd()?;
        Ok(OperatorKernel::Separable(SeparableBlock { scalar, weight }))
    }

    /// `k(u, v) I`.
    pub fn scalar(scalar: ScalarKernel) -> Result<Self> {
        Self::separable(scalar, OutputWeight::identity())
    }

    pub fn sum(weights: Vec<f64>, children: Vec<OperatorKernel>) -> Result<Self> {
        if children.is_empty() || weights.len() != children.len() {
            return Err(shape(format!("sum kernel has {} weights for {} children", weights.len(), children.len())));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(format!("sum weights must be >= 0, got {w}")));
        }
        Ok(OperatorKernel::Sum { weights, children })
    }

    pub fn conjugated(weight: OutputWeight, child: OperatorKernel) -> Result<Self> {
        weight.check_square()?;
        Ok(OperatorKernel::Conjugated { weight, child: Box::new(child) })
    }

    pub fn causal_diagonal(blocks: TimeBlocks) -> Result<Self> {
        let list: Vec<&SeparableBlock> = match &blocks {
            TimeBlocks::Shared(b) => vec![b],
            TimeBlocks::PerTime(bs) if bs.is_empty() => return Err(shape("causal kernel needs at least one time block")),
            TimeBlocks::PerTime(bs) => bs.iter().collect(),
        };
        for b in list {
            b.scalar.validate()?;
            b.weight.check_psd()?;
        }
        Ok(OperatorKernel::CausalDiagonal(blocks))
    }

    /// `K(u, v)` as per-sample blocks.
    pub fn eval(&self, u: &Signal, v: &Signal) -> Result<KernelValue> {
        u.check_compatible(v)?;
        self.eval_inner(u, v, None)
    }

    fn eval_inner(&self, u: &Signal, v: &Signal, stats: Option<&(Vec<f64>, Vec<f64>)>) -> Result<KernelValue> {
        let samples = u.grid().len();
        match self {
            OperatorKernel::Separable(b) => {
                let k = b.scalar.eval(u, v)?;
                Ok(KernelValue::uniform(Block::scaled(&b.weight, k), samples))
            }
            OperatorKernel::Sum { weights, children } => {
                let local;
                let stats = match stats {
                    Some(s) => Some(s),
                    None if self.has_causal_part() => {
                        local = prefix_stats(u, v);
                        Some(&local)
                    }
                    None => None,
                };
                let mut acc = KernelValue::zero_like(samples);
                for (w, c) in weights.iter().zip(children) {
                    acc.axpy(*w, &c.eval_inner(u, v, stats)?);
                }
                Ok(acc)
            }
            OperatorKernel::Conjugated { weight, child } => {
                let inner = child.eval_inner(u, v, stats)?;
                Ok(KernelValue {
                    blocks: inner.blocks.iter().map(|b| b.conjugate(weight)).collect(),
                    samples,
                })
            }
            OperatorKernel::CausalDiagonal(tb) => {
                if let TimeBlocks::PerTime(bs) = tb {
                    if bs.len() != samples {
                        return Err(shape(format!("causal kernel has {} time blocks for {samples} samples", bs.len())));
                    }
                }
                let local;
                let (inners, dists) = match stats {
                    Some(s) => s,
                    None => {
                        local = prefix_stats(u, v);
                        &local
                    }
                };
                let mut blocks = Vec::with_capacity(samples);
                for t in 0..samples {
                    let b = match tb {
                        TimeBlocks::Shared(b) => b,
                        TimeBlocks::PerTime(bs) => &bs[t],
                    };
                    if let ScalarKernel::StableSpline { .. } = b.scalar {
                        check_spline_point(u)?;
                        check_spline_point(v)?;
                    }
                    let k = b.scalar.eval_parts(inners[t], dists[t], u.values()[0], v.values()[0]);
                    blocks.push(Block::scaled(&b.weight, k));
                }
                Ok(KernelValue { blocks, samples })
            }
        }
    }

    fn has_causal_part(&self) -> bool {
        match self {
            OperatorKernel::Separable(_) => false,
            OperatorKernel::CausalDiagonal(_) => true,
            OperatorKernel::Sum { children, .. } => children.iter().any(|c| c.has_causal_part()),
            OperatorKernel::Conjugated { child, .. } => child.has_causal_part(),
        }
    }

    /// `K(u, v) y`.
    pub fn apply(&self, u: &Signal, v: &Signal, y: &Signal) -> Result<Signal> {
        self.eval(u, v)?.apply(y)
    }

    /// Output dimension fixed by an explicit weight matrix, if any.
    pub fn output_dim(&self) -> Option<usize> {
        match self {
            OperatorKernel::Separable(b) => b.weight.dim(),
            OperatorKernel::Sum { children, .. } => children.iter().find_map(|c| c.output_dim()),
            OperatorKernel::Conjugated { weight, child } => weight.dim().or_else(|| child.output_dim()),
            OperatorKernel::CausalDiagonal(TimeBlocks::Shared(b)) => b.weight.dim(),
            OperatorKernel::CausalDiagonal(TimeBlocks::PerTime(bs)) => bs.iter().find_map(|b| b.weight.dim()),
        }
    }

    /// Proven iff a nonexpansiveness rule applies structurally: a certified scalar
    /// kernel with a PSD weight of norm ≤ 1, a sum of certified kernels with weights
    /// summing to ≤ 1, or a certified kernel conjugated by a weight of norm ≤ 1.
    pub fn certify_nonexpansive(&self) -> Certificate {
        let unit = |w: &OutputWeight| w.norm() <= 1.0 + CERT_SLACK;
        Certificate::from_bool(match self {
            OperatorKernel::Separable(b) => b.scalar.certify_nonexpansive().is_proven() && unit(&b.weight),
            OperatorKernel::Sum { weights, children } => {
                children.iter().all(|c| c.certify_nonexpansive().is_proven())
                    && weights.iter().sum::<f64>() <= 1.0 + CERT_SLACK
            }
            OperatorKernel::Conjugated { weight, child } => child.certify_nonexpansive().is_proven() && unit(weight),
            // Not covered by the combination rules.
            OperatorKernel::CausalDiagonal(_) => false,
        })
    }

    /// `‖K(u,u) − K(u,v) − K(v,u) + K(v,v)‖ − ‖u − v‖²`; nonpositive everywhere for
    /// nonexpansive kernels.
    pub fn nonexpansive_defect(&self, u: &Signal, v: &Signal) -> Result<f64> {
        let mut second = self.eval(u, u)?;
        second.axpy(-1.0, &self.eval(u, v)?);
        second.axpy(-1.0, &self.eval(v, u)?);
        second.axpy(1.0, &self.eval(v, v)?);
        Ok(second.operator_norm() - u.distance_sq(v)?)
    }

    /// Proven for `k = ⟨·,·⟩` with a PSD weight of norm ≤ 1.
    pub fn certify_bounded(&self) -> Certificate {
        Certificate::from_bool(matches!(
            self,
            OperatorKernel::Separable(SeparableBlock { scalar: ScalarKernel::Bilinear, weight })
                if weight.norm() <= 1.0 + CERT_SLACK
        ))
    }

    /// Largest `‖K(u,u)‖^{1/2} − ‖u‖` over the probes.
    pub fn check_bounded(&self, probes: &[Signal]) -> Result<BoundedReport> {
        let mut report = BoundedReport { max_defect: f64::NEG_INFINITY, worst_probe: None };
        for (i, u) in probes.iter().enumerate() {
            let d = self.eval(u, u)?.operator_norm().sqrt() - u.l2_norm();
            if d > report.max_defect {
                report.max_defect = d;
                report.worst_probe = Some(i);
            }
        }
        Ok(report)
    }

    /// Causal kernels are causal-diagonal ones, and sums/conjugations built only from them.
    pub fn is_causal(&self) -> bool {
        match self {
            OperatorKernel::Separable(_) => false,
            OperatorKernel::CausalDiagonal(_) => true,
            OperatorKernel::Sum { children, .. } => children.iter().all(|c| c.is_causal()),
            OperatorKernel::Conjugated { child, .. } => child.is_causal(),
        }
    }

    /// `‖P_T(K(u, v) y) − P_T(K(P_T u, v) y)‖`, zero for causal kernels.
    pub fn causal_check(&self, u: &Signal, v: &Signal, y: &Signal, t_end: usize) -> Result<f64> {
        let full = self.apply(u, v, y)?.truncate(t_end)?;
        let cut = self.apply(&u.truncate(t_end)?, v, y)?.truncate(t_end)?;
        Ok(full.distance_sq(&cut)?.sqrt())
    }

    /// Minimum eigenvalue of the dense Gram matrix on `inputs`.
    pub fn gram_psd_check(&self, inputs: &[Signal], output_dim: usize) -> Result<PsdReport> {
        let gram = crate::rkhs::GramOperator::build_dense(self, inputs, output_dim)?;
        Ok(psd_report(&gram.to_dense()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundedReport {
    pub max_defect: f64,
    pub worst_probe: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub norm: f64,
    pub pass: bool,
}

/// Passes iff the smallest eigenvalue is at least `−1e-8·‖G‖`.
pub fn psd_report(gram: &DMatrix<f64>) -> PsdReport {
    let min = linalg::min_eigenvalue(gram);
    let norm = linalg::symmetric_spectral_norm(gram);
    PsdReport { min_eigenvalue: min, norm, pass: min >= -GRAM_PSD_REL_TOL * norm }
}

// --- serialization -------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BlockRepr {
    scalar: ScalarKernel,
    #[serde(rename = "R", default = "identity_repr")]
    weight: WeightRepr,
}

fn identity_repr() -> WeightRepr {
    WeightRepr::Name("identity".into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "structure", rename_all = "snake_case")]
enum KernelRepr {
    Separable {
        scalar: ScalarKernel,
        #[serde(rename = "R", default = "identity_repr")]
        weight: WeightRepr,
    },
    Sum {
        weights: Vec<f64>,
        children: Vec<KernelRepr>,
    },
    Conjugated {
        #[serde(rename = "R")]
        weight: WeightRepr,
        child: Box<KernelRepr>,
    },
    CausalDiagonal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scalar: Option<ScalarKernel>,
        #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
        weight: Option<WeightRepr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        per_time: Option<Vec<BlockRepr>>,
    },
}

impl TryFrom<BlockRepr> for SeparableBlock {
    type Error = Error;
    fn try_from(b: BlockRepr) -> Result<Self> {
        Ok(SeparableBlock { scalar: b.scalar, weight: b.weight.try_into()? })
    }
}

impl TryFrom<KernelRepr> for OperatorKernel {
    type Error = Error;
    fn try_from(r: KernelRepr) -> Result<Self> {
        match r {
            KernelRepr::Separable { scalar, weight } => OperatorKernel::separable(scalar, weight.try_into()?),
            KernelRepr::Sum { weights, children } => {
                let children = children.into_iter().map(OperatorKernel::try_from).collect::<Result<Vec<_>>>()?;
                OperatorKernel::sum(weights, children)
            }
            KernelRepr::Conjugated { weight, child } => OperatorKernel::conjugated(weight.try_into()?, (*child).try_into()?),
            KernelRepr::CausalDiagonal { scalar, weight, per_time } => match (scalar, per_time) {
                (Some(scalar), None) => {
                    let weight = weight.map(OutputWeight::try_from).transpose()?.unwrap_or_else(OutputWeight::identity);
                    OperatorKernel::causal_diagonal(TimeBlocks::Shared(SeparableBlock { scalar, weight }))
                }
                (None, Some(list)) => {
                    let blocks = list.into_iter().map(SeparableBlock::try_from).collect::<Result<Vec<_>>>()?;
                    OperatorKernel::causal_diagonal(TimeBlocks::PerTime(blocks))
                }
                _ => Err(Error::Format("causal_diagonal needs exactly one of `scalar` or `per_time`".into())),
            },
        }
    }
}

impl From<OperatorKernel> for KernelRepr {
    fn from(k: OperatorKernel) -> Self {
        match k {
            OperatorKernel::Separable(b) => KernelRepr::Separable { scalar: b.scalar, weight: (&b.weight).into() },
            OperatorKernel::Sum { weights, children } => KernelRepr::Sum {
                weights,
                children: children.into_iter().map(KernelRepr::from).collect(),
            },
            OperatorKernel::Conjugated { weight, child } => KernelRepr::Conjugated {
                weight: (&weight).into(),
                child: Box::new((*child).into()),
            },
            OperatorKernel::CausalDiagonal(TimeBlocks::Shared(b)) => KernelRepr::CausalDiagonal {
                scalar: Some(b.scalar),
                weight: Some((&b.weight).into()),
                per_time: None,
            },
            OperatorKernel::CausalDiagonal(TimeBlocks::PerTime(bs)) => KernelRepr::CausalDiagonal {
                scalar: None,
                weight: None,
                per_time: Some(
                    bs.into_iter()
                        .map(|b| BlockRepr { scalar: b.scalar, weight: (&b.weight).into() })
                        .collect(),
                ),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::TimeGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(tau: usize) -> TimeGrid {
        TimeGrid::new(tau, 1.0).unwrap()
    }

    fn point(x: f64) -> Signal {
        Signal::scalar(grid(0), vec![x]).unwrap()
    }

    fn random_signal(rng: &mut ChaCha8Rng, tau: usize, dim: usize, amp: f64) -> Signal {
        let n = (tau + 1) * dim;
        Signal::new(grid(tau), dim, (0..n).map(|_| rng.gen_range(-amp..amp)).collect()).unwrap()
    }

    /// Signal pair with ‖u − v‖² equal to `dist_sq`.
    fn pair_at_distance(dist_sq: f64) -> (Signal, Signal) {
        let u = Signal::scalar(grid(1), vec![0.3, -0.2]).unwrap();
        let v = Signal::scalar(grid(1), vec![0.3 + dist_sq.sqrt(), -0.2]).unwrap();
        (u, v)
    }

    #[test]
    fn scalar_examples() {
        let g = ScalarKernel::Gaussian { sigma: 1.0 };
        let u = Signal::scalar(grid(2), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g.eval(&u, &u).unwrap(), 1.0);
        let (a, b) = pair_at_distance(1.0);
        assert!((g.eval(&a, &b).unwrap() - (-1.0f64).exp()).abs() < 1e-12);

        let f = Signal::new(grid(1), 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let h = Signal::new(grid(1), 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(ScalarKernel::Bilinear.eval(&f, &h).unwrap(), 0.0);
        assert!(ScalarKernel::Gaussian { sigma: -1.0 }.eval(&f, &h).is_err());
        assert!(ScalarKernel::Bilinear.eval(&f, &u).is_err());
    }

    #[test]
    fn operator_examples() {
        let g = grid(3);
        let u = Signal::from_fn(g, |t| t.sin()).unwrap();
        let v = Signal::from_fn(g, |t| t.cos()).unwrap();
        let y = Signal::new(g, 2, (0..8).map(|i| i as f64).collect()).unwrap();
        let scalar = ScalarKernel::Gaussian { sigma: 2.0 };
        let k = OperatorKernel::scalar(scalar).unwrap();
        let kv = scalar.eval(&u, &v).unwrap();
        assert_eq!(k.apply(&u, &v, &y).unwrap(), y.scale(kv));

        let sum = OperatorKernel::sum(vec![0.5, 0.5], vec![k.clone(), k.clone()]).unwrap();
        let a = sum.apply(&u, &v, &y).unwrap();
        let b = k.apply(&u, &v, &y).unwrap();
        assert!(a.distance_sq(&b).unwrap() < 1e-28);
    }

    #[test]
    fn certificates() {
        use ScalarKernel::*;
        let cert = |s: ScalarKernel| s.certify_nonexpansive();
        assert_eq!(cert(Gaussian { sigma: 2f64.sqrt() }), Certificate::Proven);
        assert_eq!(cert(InversePower { c: 2.0, d: 1.0 }), Certificate::Proven);
        assert_eq!(cert(Gaussian { sigma: 1.0 }), Certificate::Unknown);
        assert_eq!(cert(Laplacian { sigma: 10.0 }), Certificate::Unknown);
        assert_eq!(cert(InversePower { c: 1.0, d: 1.0 }), Certificate::Unknown);
        assert_eq!(cert(StableSpline { beta: 1.0 }), Certificate::Unknown);

        let sl = OperatorKernel::scalar(ScaledLaplacian).unwrap();
        assert!(sl.certify_nonexpansive().is_proven());
        let big = OperatorKernel::separable(ScaledLaplacian, OutputWeight::ScaledIdentity(2.0)).unwrap();
        assert!(!big.certify_nonexpansive().is_proven());
        let sum = OperatorKernel::sum(vec![0.6, 0.4], vec![sl.clone(), sl.clone()]).unwrap();
        assert!(sum.certify_nonexpansive().is_proven());
        let over = OperatorKernel::sum(vec![0.6, 0.6], vec![sl.clone(), sl.clone()]).unwrap();
        assert!(!over.certify_nonexpansive().is_proven());
        let conj = OperatorKernel::conjugated(OutputWeight::Matrix(DMatrix::from_row_slice(2, 2, &[0.6, 0.0, 0.5, 0.3])), sl).unwrap();
        assert!(conj.certify_nonexpansive().is_proven());
        let causal = OperatorKernel::causal_diagonal(TimeBlocks::Shared(SeparableBlock {
            scalar: ScaledLaplacian,
            weight: OutputWeight::identity(),
        }))
        .unwrap();
        assert_eq!(causal.certify_nonexpansive(), Certificate::Unknown);
    }

    #[test]
    fn defect_examples() {
        let g1 = OperatorKernel::scalar(ScalarKernel::Gaussian { sigma: 1.0 }).unwrap();
        let (u, v) = pair_at_distance(0.1);
        assert_eq!(g1.nonexpansive_defect(&u, &u).unwrap(), 0.0);
        let expected = 2.0 - 2.0 * (-0.1f64).exp() - 0.1;
        assert!((g1.nonexpansive_defect(&u, &v).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.0903).abs() < 1e-4);

        let spline = OperatorKernel::scalar(ScalarKernel::StableSpline { beta: 1.0 }).unwrap();
        let d = spline.nonexpansive_defect(&point(0.1), &point(0.0)).unwrap();
        let expected = (1.0 - (-0.1f64).exp()) - 0.01;
        assert!((d - expected).abs() < 1e-14);
        assert!((expected - 0.0852).abs() < 1e-4);
        assert!(spline.nonexpansive_defect(&point(-1.0), &point(0.0)).is_err());
    }

    #[test]
    fn bounded_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bil = OperatorKernel::scalar(ScalarKernel::Bilinear).unwrap();
        let probes: Vec<Signal> = (0..5).map(|_| random_signal(&mut rng, 4, 1, 2.0)).collect();
        assert!(bil.check_bounded(&probes).unwrap().max_defect.abs() < 1e-12);
        assert!(bil.certify_bounded().is_proven());

        let gauss = OperatorKernel::scalar(ScalarKernel::Gaussian { sigma: 1.0 }).unwrap();
        let r = gauss.check_bounded(&[Signal::zeros(grid(4), 1)]).unwrap();
        assert_eq!(r.max_defect, 1.0);
        assert!(!gauss.certify_bounded().is_proven());

        let half = OperatorKernel::separable(ScalarKernel::Bilinear, OutputWeight::ScaledIdentity(0.5)).unwrap();
        assert!(half.certify_bounded().is_proven());
    }

    #[test]
    fn causality() {
        let g = grid(5);
        let causal = OperatorKernel::causal_diagonal(TimeBlocks::Shared(SeparableBlock {
            scalar: ScalarKernel::Gaussian { sigma: 1.0 },
            weight: OutputWeight::identity(),
        }))
        .unwrap();
        let sep = OperatorKernel::scalar(ScalarKernel::Gaussian { sigma: 1.0 }).unwrap();
        assert!(causal.is_causal());
        assert!(!sep.is_causal());

        let u = Signal::from_fn(g, |t| 0.3 * t).unwrap();
        let u2 = Signal::from_fn(g, |t| if t <= 2.0 { 0.3 * t } else { -1.0 }).unwrap();
        let v = Signal::from_fn(g, |t| (t).sin()).unwrap();
        let y = Signal::constant(g, 1, 1.0).unwrap();
        for t in 0..=5 {
            assert!(causal.causal_check(&u, &v, &y, t).unwrap() < 1e-12);
        }
        // the evaluation point only matters through its past
        let a = causal.apply(&u, &v, &y).unwrap().truncate(2).unwrap();
        let b = causal.apply(&u2, &v, &y).unwrap().truncate(2).unwrap();
        assert!(a.distance_sq(&b).unwrap() < 1e-28);

        assert!(sep.causal_check(&u, &v, &y, 2).unwrap() > 1e-3);
        assert_eq!(sep.causal_check(&u, &v, &y, 5).unwrap(), 0.0);
    }

    #[test]
    fn per_time_blocks_must_match_grid() {
        let b = SeparableBlock { scalar: ScalarKernel::Bilinear, weight: OutputWeight::identity() };
        let k = OperatorKernel::causal_diagonal(TimeBlocks::PerTime(vec![b.clone(), b])).unwrap();
        let u = Signal::zeros(grid(2), 1);
        assert!(k.eval(&u, &u).is_err());
        let u = Signal::zeros(grid(1), 1);
        assert!(k.eval(&u, &u).is_ok());
    }

    #[test]
    fn weights_are_validated() {
        let asym = OutputWeight::Matrix(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]));
        assert!(OperatorKernel::separable(ScalarKernel::Bilinear, asym.clone()).is_err());
        let neg = OutputWeight::Matrix(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        assert!(OperatorKernel::separable(ScalarKernel::Bilinear, neg).is_err());
        assert!(OperatorKernel::conjugated(asym, OperatorKernel::scalar(ScalarKernel::Bilinear).unwrap()).is_ok());
        assert!(OperatorKernel::sum(vec![-0.1], vec![OperatorKernel::scalar(ScalarKernel::Bilinear).unwrap()]).is_err());
    }

    #[test]
    fn psd_report_flags_indefinite() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let r = psd_report(&bad);
        assert!(!r.pass && (r.min_eigenvalue + 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_and_shape() {
        let text = r#"{"structure":"separable","scalar":{"kind":"scaled_laplacian"},"R":"identity"}"#;
        let k: OperatorKernel = serde_json::from_str(text).unwrap();
        assert_eq!(k, OperatorKernel::scalar(ScalarKernel::ScaledLaplacian).unwrap());
        assert_eq!(serde_json::to_string(&k).unwrap(), text);

        let nested = OperatorKernel::sum(
            vec![0.3, 0.7],
            vec![
                OperatorKernel::separable(ScalarKernel::Gaussian { sigma: 2.0 }, OutputWeight::Matrix(DMatrix::identity(2, 2) * 0.5)).unwrap(),
                OperatorKernel::causal_diagonal(TimeBlocks::Shared(SeparableBlock {
                    scalar: ScalarKernel::InversePower { c: 2.0, d: 1.0 },
                    weight: OutputWeight::ScaledIdentity(0.2),
                }))
                .unwrap(),
            ],
        )
        .unwrap();
        let back: OperatorKernel = serde_json::from_str(&serde_json::to_string(&nested).unwrap()).unwrap();
        assert_eq!(back, nested);

        let bad = r#"{"structure":"separable","scalar":{"kind":"bilinear"},"R":[1.0,0.0,0.0,-1.0]}"#;
        assert!(serde_json::from_str::<OperatorKernel>(bad).is_err());
    }
}
