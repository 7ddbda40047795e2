//! Quadratic supply rates, their scattering factorization, and sampled
//! incremental IQC checks.
//!
//! A supply rate `s_Φ(x₁, x₂) = [x₁; x₂]ᵀ Φ [x₁; x₂]` with `Φ` of inertia `(m, p)`
//! factors as `Φ = Mᵀ Σ M`, `Σ = diag(I_m, −I_p)`. Mapping data through `M`
//! turns a Φ-constraint on `(u, y)` into a gain constraint on `(v, z) = M(u, y)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::linalg;
use crate::signals::{Dataset, Quadrature, Signal, SignalOperator};

/// Relative tolerance on the symmetry of Φ.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues below `SINGULAR_REL_TOL · ‖Φ‖` in magnitude count as zero.
pub const SINGULAR_REL_TOL: f64 = 1e-10;
/// Residuals above `−IQC_REL_TOL · scale` count as nonnegative.
pub const IQC_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupplyKind {
    Passivity,
    Gain { delta: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupplyRate {
    kind: SupplyKind,
    phi: DMatrix<f64>,
    m: usize,
    p: usize,
}

/// Inertia of a candidate Φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignatureReport {
    pub positive: usize,
    pub negative: usize,
    pub min_abs_eigenvalue: f64,
    pub tol_singular: f64,
}

/// Checks that `phi` is symmetric, nonsingular, and has `m` positive and `p`
/// negative eigenvalues.
pub fn verify_signature(phi: &DMatrix<f64>, m: usize, p: usize) -> Result<SignatureReport> {
    if !phi.is_square() || phi.nrows() != m + p {
        return Err(shape(format!(
            "phi is {}x{}, expected {}x{}",
            phi.nrows(),
            phi.ncols(),
            m + p,
            m + p
        )));
    }
    if !linalg::is_symmetric(phi, SYMMETRY_TOL) {
        return Err(shape("phi is not symmetric"));
    }
    let (values, _) = linalg::sorted_symmetric_eigen(phi);
    let scale = values.amax();
    let tol_singular = SINGULAR_REL_TOL * scale;
    let min_abs = values.iter().fold(f64::INFINITY, |acc, x| acc.min(x.abs()));
    let positive = values.iter().filter(|&&x| x > tol_singular).count();
    let negative = values.iter().filter(|&&x| x < -tol_singular).count();
    if positive != m || negative != p || !(min_abs > tol_singular) {
        return Err(Error::Signature { positive, negative, min_abs, m, p });
    }
    Ok(SignatureReport { positive, negative, min_abs_eigenvalue: min_abs, tol_singular })
}

impl SupplyRate {
    /// `Φ = [[0, I], [I, 0]]`: monotonicity / incremental passivity, `m = p`.
    pub fn passivity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(shape("passivity supply needs a positive dimension"));
        }
        let mut phi = DMatrix::zeros(2 * dim, 2 * dim);
        for i in 0..dim {
            phi[(i, dim + i)] = 1.0;
            phi[(dim + i, i)] = 1.0;
        }
        Ok(Self { kind: SupplyKind::Passivity, phi, m: dim, p: dim })
    }

    /// `Φ = diag(δ I_m, −I_p)`: incremental gain `√δ`.
    pub fn gain(delta: f64, m: usize, p: usize) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter(format!("gain supply needs delta > 0, got {delta}")));
        }
        if m == 0 || p == 0 {
            return Err(shape("gain supply needs positive dimensions"));
        }
        let mut phi = DMatrix::zeros(m + p, m + p);
        for i in 0..m {
            phi[(i, i)] = delta;
        }
        for i in 0..p {
            phi[(m + i, m + i)] = -1.0;
        }
        Ok(Self { kind: SupplyKind::Gain { delta }, phi, m, p })
    }

    /// Arbitrary Φ; validated against Assumption-style inertia `(m, p)`.
    pub fn custom(phi: DMatrix<f64>, m: usize, p: usize) -> Result<Self> {
        verify_signature(&phi, m, p)?;
        Ok(Self { kind: SupplyKind::Custom, phi, m, p })
    }

    pub fn kind(&self) -> SupplyKind {
        self.kind
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `[x₁; x₂]ᵀ Φ [x₁; x₂]`.
    pub fn value(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        if x1.len() != self.m || x2.len() != self.p {
            return Err(shape(format!(
                "supply expects ({}, {}) vectors, got ({}, {})",
                self.m,
                self.p,
                x1.len(),
                x2.len()
            )));
        }
        Ok(self.value_unchecked(x1, x2))
    }

    fn value_unchecked(&self, x1: &[f64], x2: &[f64]) -> f64 {
        let x = |i: usize| if i < self.m { x1[i] } else { x2[i - self.m] };
        let n = self.m + self.p;
        let mut acc = 0.0;
        for i in 0..n {
            let xi = x(i);
            if xi == 0.0 {
                continue;
            }
            for j in 0..n {
                acc += xi * self.phi[(i, j)] * x(j);
            }
        }
        acc
    }

    /// Factors `Φ = Mᵀ Σ M`.
    ///
    /// Built-in supplies use their closed-form factors (the canonical scattering
    /// matrix for passivity, `diag(√δ I, I)` for gain). Custom supplies go
    /// through the sorted eigendecomposition `Φ = Q Λ Qᵀ`, `M = diag(√|Λ|) Qᵀ`.
    pub fn factor(&self) -> Result<ScatteringFactors> {
        let (m, p) = (self.m, self.p);
        let n = m + p;
        let factor = match self.kind {
            SupplyKind::Passivity => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let mut mm = DMatrix::zeros(n, n);
                for i in 0..m {
                    mm[(i, i)] = s;
                    mm[(i, m + i)] = s;
                    mm[(m + i, i)] = s;
                    mm[(m + i, m + i)] = -s;
                }
                mm
            }
            SupplyKind::Gain { delta } => {
                let mut mm = DMatrix::identity(n, n);
                for i in 0..m {
                    mm[(i, i)] = delta.sqrt();
                }
                mm
            }
            SupplyKind::Custom => {
                verify_signature(&self.phi, m, p)?;
                let (values, vectors) = linalg::sorted_symmetric_eigen(&self.phi);
                let root = DMatrix::from_diagonal(&values.map(|x| x.abs().sqrt()));
                root * vectors.transpose()
            }
        };
        ScatteringFactors::new(factor, m, p)
    }

    pub fn to_spec(&self) -> SupplySpec {
        match self.kind {
            SupplyKind::Passivity => SupplySpec::Passivity { m: Some(self.m), p: Some(self.p) },
            SupplyKind::Gain { delta } => SupplySpec::Gain { delta, m: Some(self.m), p: Some(self.p) },
            SupplyKind::Custom => SupplySpec::Custom {
                phi: linalg::to_row_major(&self.phi),
                m: self.m,
                p: self.p,
            },
        }
    }
}

/// Serialized form of a supply rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SupplySpec {
    Passivity {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<usize>,
    },
    Gain {
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<usize>,
    },
    Custom {
        phi: Vec<f64>,
        m: usize,
        p: usize,
    },
}

impl SupplySpec {
    /// Builds the supply; missing dimensions default to `(m, p)` of the data.
    pub fn build(&self, m: usize, p: usize) -> Result<SupplyRate> {
        match *self {
            SupplySpec::Passivity { m: sm, p: sp } => {
                let (m, p) = (sm.unwrap_or(m), sp.unwrap_or(p));
                if m != p {
                    return Err(shape(format!("passivity supply needs m = p, got m = {m}, p = {p}")));
                }
                SupplyRate::passivity(m)
            }
            SupplySpec::Gain { delta, m: sm, p: sp } => SupplyRate::gain(delta, sm.unwrap_or(m), sp.unwrap_or(p)),
            SupplySpec::Custom { ref phi, m, p } => {
                let mat = linalg::square_from_row_major(phi)?;
                SupplyRate::custom(mat, m, p)
            }
        }
    }
}

/// `M` with `Mᵀ Σ M = Φ` and its inverse `N`, both partitioned `(m, p) × (m, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringFactors {
    m_mat: DMatrix<f64>,
    n_mat: DMatrix<f64>,
    m: usize,
    p: usize,
}

impl ScatteringFactors {
    pub fn new(m_mat: DMatrix<f64>, m: usize, p: usize) -> Result<Self> {
        if !m_mat.is_square() || m_mat.nrows() != m + p {
            return Err(shape("scattering matrix has the wrong size"));
        }
        let n_mat = linalg::inverse(&m_mat, "scattering matrix M")?;
        Ok(Self { m_mat, n_mat, m, p })
    }

    pub fn m_matrix(&self) -> &DMatrix<f64> {
        &self.m_mat
    }

    pub fn n_matrix(&self) -> &DMatrix<f64> {
        &self.n_mat
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.p)
    }

    /// `Σ = diag(I_m, −I_p)`.
    pub fn sigma(&self) -> DMatrix<f64> {
        let mut s = DMatrix::identity(self.m + self.p, self.m + self.p);
        for i in self.m..self.m + self.p {
            s[(i, i)] = -1.0;
        }
        s
    }

    fn block(a: &DMatrix<f64>, m: usize, p: usize, row: usize, col: usize) -> DMatrix<f64> {
        let (r0, nr) = if row == 0 { (0, m) } else { (m, p) };
        let (c0, nc) = if col == 0 { (0, m) } else { (m, p) };
        a.view((r0, c0), (nr, nc)).clone_owned()
    }

    pub fn m11(&self) -> DMatrix<f64> {
        Self::block(&self.m_mat, self.m, self.p, 0, 0)
    }
    pub fn m12(&self) -> DMatrix<f64> {
        Self::block(&self.m_mat, self.m, self.p, 0, 1)
    }
    pub fn m21(&self) -> DMatrix<f64> {
        Self::block(&self.m_mat, self.m, self.p, 1, 0)
    }
    pub fn m22(&self) -> DMatrix<f64> {
        Self::block(&self.m_mat, self.m, self.p, 1, 1)
    }
    pub fn n11(&self) -> DMatrix<f64> {
        Self::block(&self.n_mat, self.m, self.p, 0, 0)
    }
    pub fn n12(&self) -> DMatrix<f64> {
        Self::block(&self.n_mat, self.m, self.p, 0, 1)
    }
    pub fn n21(&self) -> DMatrix<f64> {
        Self::block(&self.n_mat, self.m, self.p, 1, 0)
    }
    pub fn n22(&self) -> DMatrix<f64> {
        Self::block(&self.n_mat, self.m, self.p, 1, 1)
    }

    /// `(v, z) = M (u, y)` sample-wise.
    pub fn scatter(&self, u: &Signal, y: &Signal) -> Result<(Signal, Signal)> {
        self.check_dims(u, y)?;
        let v = Signal::block_map(&self.m11(), u, &self.m12(), y)?;
        let z = Signal::block_map(&self.m21(), u, &self.m22(), y)?;
        Ok((v, z))
    }

    /// `(u, y) = N (v, z)` sample-wise.
    pub fn unscatter(&self, v: &Signal, z: &Signal) -> Result<(Signal, Signal)> {
        self.check_dims(v, z)?;
        let u = Signal::block_map(&self.n11(), v, &self.n12(), z)?;
        let y = Signal::block_map(&self.n21(), v, &self.n22(), z)?;
        Ok((u, y))
    }

    fn check_dims(&self, a: &Signal, b: &Signal) -> Result<()> {
        if a.dim() != self.m || b.dim() != self.p {
            return Err(shape(format!(
                "factors expect ({}, {}) channels, got ({}, {})",
                self.m,
                self.p,
                a.dim(),
                b.dim()
            )));
        }
        Ok(())
    }
}

/// Applies `M` to every trajectory pair of `data`.
pub fn scatter_dataset(data: &Dataset, factors: &ScatteringFactors) -> Result<Dataset> {
    let (vs, zs) = map_dataset(data, |u, y| factors.scatter(u, y))?;
    Dataset::new(vs, zs)
}

/// Applies `N` to every trajectory pair of `data`.
pub fn unscatter_dataset(data: &Dataset, factors: &ScatteringFactors) -> Result<Dataset> {
    let (us, ys) = map_dataset(data, |v, z| factors.unscatter(v, z))?;
    Dataset::new(us, ys)
}

fn map_dataset(
    data: &Dataset,
    f: impl Fn(&Signal, &Signal) -> Result<(Signal, Signal)>,
) -> Result<(Vec<Signal>, Vec<Signal>)> {
    let mut a = Vec::with_capacity(data.len());
    let mut b = Vec::with_capacity(data.len());
    for (u, y) in data.pairs() {
        let (x, w) = f(u, y)?;
        a.push(x);
        b.push(w);
    }
    Ok((a, b))
}

/// Per-horizon partial sums of `w(t) s_Φ(u(t) − v(t), y(t) − z(t))`, together
/// with the matching sums of `w(t) ‖Φ‖ (‖Δu(t)‖² + ‖Δy(t)‖²)` used to scale tolerances.
fn iqc_partial_sums(
    supply: &SupplyRate,
    u: &Signal,
    v: &Signal,
    y: &Signal,
    z: &Signal,
    quad: Quadrature,
) -> Result<(Vec<f64>, Vec<f64>)> {
    u.check_compatible(v)?;
    y.check_compatible(z)?;
    if u.grid() != y.grid() {
        return Err(shape("input and output increments live on different grids"));
    }
    if u.dim() != supply.m || y.dim() != supply.p {
        return Err(shape(format!(
            "supply expects ({}, {}) channels, got ({}, {})",
            supply.m,
            supply.p,
            u.dim(),
            y.dim()
        )));
    }
    let phi_norm = linalg::symmetric_spectral_norm(&supply.phi);
    let grid = *u.grid();
    let mut partial = Vec::with_capacity(grid.len());
    let mut scale = Vec::with_capacity(grid.len());
    let (mut acc, mut acc_scale) = (0.0, 0.0);
    let mut du = vec![0.0; supply.m];
    let mut dy = vec![0.0; supply.p];
    for t in 0..grid.len() {
        for (d, (a, b)) in du.iter_mut().zip(u.sample(t).iter().zip(v.sample(t))) {
            *d = a - b;
        }
        for (d, (a, b)) in dy.iter_mut().zip(y.sample(t).iter().zip(z.sample(t))) {
            *d = a - b;
        }
        let w = quad.weight(&grid, t);
        acc += w * supply.value_unchecked(&du, &dy);
        let sq: f64 = du.iter().chain(dy.iter()).map(|x| x * x).sum();
        acc_scale += w * phi_norm * sq;
        partial.push(acc);
        scale.push(acc_scale);
    }
    Ok((partial, scale))
}

/// `Σ_{t ≤ horizon} w(t) s_Φ(u(t) − v(t), y(t) − z(t))`; `None` sums the full grid.
pub fn iiqc_residual(
    supply: &SupplyRate,
    u: &Signal,
    v: &Signal,
    y: &Signal,
    z: &Signal,
    horizon: Option<usize>,
    quad: Quadrature,
) -> Result<f64> {
    let tau = u.grid().tau();
    let h = horizon.unwrap_or(tau);
    if h > tau {
        return Err(Error::Range { index: h, max: tau });
    }
    let (partial, _) = iqc_partial_sums(supply, u, v, y, z, quad)?;
    Ok(partial[h])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonMode {
    /// Only `T = τ` (incremental IQC).
    FullHorizon,
    /// Every `T ∈ {0, …, τ}` (incremental dissipativity).
    AllHorizons,
}

/// Outcome of a sampled incremental-IQC check. A pass means no violation was found
/// on the probes, not a proof.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IqcReport {
    pub probes: usize,
    pub min_residual: f64,
    /// Smallest residual divided by its scale (`Σ w ‖Φ‖ (‖Δu‖² + ‖Δy‖²)`).
    pub min_relative_residual: f64,
    pub worst_probe: Option<usize>,
    pub worst_horizon: Option<usize>,
    pub tol_rel: f64,
    pub pass: bool,
}

/// Evaluates `op` on every probe pair and reports the smallest IQC residual.
pub fn check_operator_iiqc<O: SignalOperator + ?Sized>(
    op: &O,
    supply: &SupplyRate,
    probes: &[(Signal, Signal)],
    mode: HorizonMode,
    quad: Quadrature,
) -> Result<IqcReport> {
    let mut report = IqcReport {
        probes: probes.len(),
        min_residual: f64::INFINITY,
        min_relative_residual: f64::INFINITY,
        worst_probe: None,
        worst_horizon: None,
        tol_rel: IQC_REL_TOL,
        pass: true,
    };
    for (k, (u, v)) in probes.iter().enumerate() {
        let y = op.apply(u)?;
        let z = op.apply(v)?;
        let (partial, scale) = iqc_partial_sums(supply, u, v, &y, &z, quad)?;
        let horizons: Box<dyn Iterator<Item = usize>> = match mode {
            HorizonMode::FullHorizon => Box::new(std::iter::once(partial.len() - 1)),
            HorizonMode::AllHorizons => Box::new(0..partial.len()),
        };
        for h in horizons {
            let r = partial[h];
            let rel = if scale[h] > 0.0 { r / scale[h] } else { 0.0 };
            if r < report.min_residual {
                report.min_residual = r;
            }
            if rel < report.min_relative_residual {
                report.min_relative_residual = rel;
                report.worst_probe = Some(k);
                report.worst_horizon = Some(h);
            }
            if rel < -IQC_REL_TOL {
                report.pass = false;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::TimeGrid;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    #[test]
    fn signature_examples() {
        let r = verify_signature(&m2(0.0, 1.0, 1.0, 0.0), 1, 1).unwrap();
        assert_eq!((r.positive, r.negative), (1, 1));
        assert!(verify_signature(&m2(4.0, 0.0, 0.0, -1.0), 1, 1).is_ok());
        match verify_signature(&m2(1.0, 0.0, 0.0, 1.0), 1, 1) {
            Err(Error::Signature { positive: 2, negative: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(verify_signature(&m2(0.0, 1.0, 0.0, 0.0), 1, 1), Err(Error::Shape(_))));
        // singular
        assert!(verify_signature(&m2(1.0, 0.0, 0.0, 0.0), 1, 1).is_err());
    }

    #[test]
    fn factor_identities() {
        for supply in [
            SupplyRate::passivity(1).unwrap(),
            SupplyRate::passivity(3).unwrap(),
            SupplyRate::gain(4.0, 2, 1).unwrap(),
            SupplyRate::custom(m2(0.0, 1.0, 1.0, 0.0), 1, 1).unwrap(),
            SupplyRate::custom(m2(4.0, 0.0, 0.0, -1.0), 1, 1).unwrap(),
        ] {
            let f = supply.factor().unwrap();
            let back = f.m_matrix().transpose() * f.sigma() * f.m_matrix();
            assert!((back - supply.phi()).norm() <= 1e-10 * supply.phi().norm());
            let n = f.m_matrix().nrows();
            assert!((f.m_matrix() * f.n_matrix() - DMatrix::identity(n, n)).norm() < 1e-10);
        }
    }

    #[test]
    fn custom_passivity_recovers_canonical_scattering() {
        let f = SupplyRate::custom(m2(0.0, 1.0, 1.0, 0.0), 1, 1).unwrap().factor().unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((f.m_matrix() - m2(s, s, s, -s)).norm() < 1e-12);
        let g = SupplyRate::custom(m2(4.0, 0.0, 0.0, -1.0), 1, 1).unwrap().factor().unwrap();
        assert!((g.m_matrix() - m2(2.0, 0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn supply_values() {
        let pass = SupplyRate::passivity(1).unwrap();
        assert_eq!(pass.value(&[1.0], &[2.0]).unwrap(), 4.0);
        assert_eq!(pass.value(&[0.0], &[0.0]).unwrap(), 0.0);
        let gain = SupplyRate::gain(1.0, 1, 1).unwrap();
        assert_eq!(gain.value(&[3.0], &[2.0]).unwrap(), 5.0);
        assert!(gain.value(&[3.0, 1.0], &[2.0]).is_err());
    }

    #[test]
    fn spec_round_trip() {
        for s in [
            SupplyRate::passivity(2).unwrap(),
            SupplyRate::gain(0.5, 1, 2).unwrap(),
            SupplyRate::custom(m2(0.0, 1.0, 1.0, 0.0), 1, 1).unwrap(),
        ] {
            let json = serde_json::to_string(&s.to_spec()).unwrap();
            let back: SupplySpec = serde_json::from_str(&json).unwrap();
            assert_eq!(back.build(s.m(), s.p()).unwrap(), s);
        }
        let spec: SupplySpec = serde_json::from_str(r#"{"kind":"gain","delta":2.0}"#).unwrap();
        assert_eq!(spec.build(1, 1).unwrap().phi()[(0, 0)], 2.0);
    }

    #[test]
    fn scatter_examples() {
        let g = TimeGrid::new(3, 0.5).unwrap();
        let one = Signal::constant(g, 1, 1.0).unwrap();
        let f = SupplyRate::passivity(1).unwrap().factor().unwrap();
        let (v, z) = f.scatter(&one, &one).unwrap();
        assert!(v.samples().all(|s| (s[0] - 2f64.sqrt()).abs() < 1e-15));
        assert!(z.samples().all(|s| s[0].abs() < 1e-15));

        let ident = ScatteringFactors::new(DMatrix::identity(2, 2), 1, 1).unwrap();
        let u = Signal::from_fn(g, |t| t.sin()).unwrap();
        let data = Dataset::new(vec![u.clone()], vec![one.clone()]).unwrap();
        assert_eq!(scatter_dataset(&data, &ident).unwrap(), data);

        let back = unscatter_dataset(&scatter_dataset(&data, &f).unwrap(), &f).unwrap();
        for (a, b) in back.pairs().zip(data.pairs()) {
            assert!(a.0.distance_sq(b.0).unwrap() < 1e-24);
            assert!(a.1.distance_sq(b.1).unwrap() < 1e-24);
        }
    }

    #[test]
    fn residual_examples() {
        let g = TimeGrid::new(4, 1.0).unwrap();
        let u = Signal::from_fn(g, |t| t * t - 1.0).unwrap();
        let v = Signal::from_fn(g, |t| (t).cos()).unwrap();
        let gain = SupplyRate::gain(1.0, 1, 1).unwrap();
        assert_eq!(iiqc_residual(&gain, &u, &u, &u, &u, None, Quadrature::Sequence).unwrap(), 0.0);

        let (y, z) = (u.scale(0.5), v.scale(0.5));
        let r = iiqc_residual(&gain, &u, &v, &y, &z, None, Quadrature::Sequence).unwrap();
        let expected = 0.75 * u.distance_sq(&v).unwrap();
        assert!((r - expected).abs() < 1e-12 * expected);
        assert!(iiqc_residual(&gain, &u, &v, &y, &z, Some(5), Quadrature::Sequence).is_err());
    }

    #[test]
    fn operator_checks() {
        let g = TimeGrid::new(5, 1.0).unwrap();
        let probes = vec![
            (Signal::from_fn(g, |t| t).unwrap(), Signal::from_fn(g, |t| -t).unwrap()),
            (Signal::from_fn(g, |t| t.sin()).unwrap(), Signal::zeros(g, 1)),
        ];
        let pass = SupplyRate::passivity(1).unwrap();
        let identity = |u: &Signal| Ok(u.clone());
        let r = check_operator_iiqc(&identity, &pass, &probes, HorizonMode::AllHorizons, Quadrature::Sequence).unwrap();
        assert!(r.pass);
        let expected = 2.0 * probes.iter().map(|(a, b)| a.distance_sq(b).unwrap()).fold(f64::INFINITY, f64::min);
        let full = check_operator_iiqc(&identity, &pass, &probes, HorizonMode::FullHorizon, Quadrature::Sequence).unwrap();
        assert!((full.min_residual - expected).abs() < 1e-12);

        let negate = |u: &Signal| Ok(u.scale(-1.0));
        let r = check_operator_iiqc(&negate, &pass, &probes, HorizonMode::FullHorizon, Quadrature::Sequence).unwrap();
        assert!(!r.pass);
        assert!(r.min_residual < 0.0);
    }
}
