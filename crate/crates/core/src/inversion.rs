//! De-scattering: simulating `R = (N₂₁ + N₂₂S)(N₁₁ + N₁₂S)⁻¹` for a contraction `S`.
//!
//! For an input `u*`, the fixed point `v* = N₁₁⁻¹u* − N₁₁⁻¹N₁₂ S(v*)` is found by
//! Picard iteration, which contracts with factor `ε = ℓ ‖N₁₁⁻¹N₁₂‖` when `S` has
//! Lipschitz constant `ℓ`. The output is `y* = N₂₁v* + N₂₂S(v*)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{shape, Error, Result};
use crate::linalg;
use crate::rkhs::FittedOperator;
use crate::signals::{Scaling, Signal, SignalOperator};
use crate::supply::ScatteringFactors;

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Largest acceptable `‖P_T R(u) − P_T R(v)‖` for probes with `P_T u = P_T v`.
pub const CAUSALITY_TOL: f64 = 1e-8;

/// An operator with a certified Lipschitz constant.
pub trait LipschitzOperator: SignalOperator {
    /// A proven Lipschitz bound, or `None` when nothing is certified.
    fn lipschitz_bound(&self) -> Option<f64>;

    fn is_causal(&self) -> bool {
        false
    }
}

impl LipschitzOperator for FittedOperator {
    /// `‖Ĥ‖_ℋ` when the kernel is certified nonexpansive.
    fn lipschitz_bound(&self) -> Option<f64> {
        self.kernel().certify_nonexpansive().is_proven().then(|| self.rkhs_norm())
    }

    fn is_causal(&self) -> bool {
        self.kernel().is_causal()
    }
}

/// `S(v) = gain · v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGain {
    pub gain: f64,
}

impl SignalOperator for LinearGain {
    fn apply(&self, u: &Signal) -> Result<Signal> {
        Ok(u.scale(self.gain))
    }
}

impl LipschitzOperator for LinearGain {
    fn lipschitz_bound(&self) -> Option<f64> {
        Some(self.gain.abs())
    }

    fn is_causal(&self) -> bool {
        true
    }
}

/// A contraction `S` together with the factors needed to recover `R`.
#[derive(Debug, Clone)]
pub struct ScatteredModel<S> {
    s: S,
    factors: ScatteringFactors,
    lipschitz: f64,
    epsilon: f64,
    n11_inv: DMatrix<f64>,
    feedback: DMatrix<f64>,
}

/// Checks the contraction hypotheses and builds the model.
///
/// Requires a certified Lipschitz constant `ℓ < 1`, an invertible `N₁₁`, and
/// `ε = ℓ ‖N₁₁⁻¹N₁₂‖ < 1`.
pub fn contraction_margin<S: LipschitzOperator>(s: S, factors: &ScatteringFactors) -> Result<ScatteredModel<S>> {
    let lipschitz = s
        .lipschitz_bound()
        .ok_or_else(|| Error::Hypothesis("operator has no certified Lipschitz bound (kernel not proven nonexpansive)".into()))?;
    if !(lipschitz < 1.0) {
        return Err(Error::Hypothesis(format!("Lipschitz constant {lipschitz} is not below 1")));
    }
    let n11_inv = linalg::inverse(&factors.n11(), "N11")?;
    let feedback = &n11_inv * factors.n12();
    let epsilon = lipschitz * linalg::spectral_norm(&feedback);
    if !(epsilon < 1.0) {
        return Err(Error::Hypothesis(format!("epsilon = {epsilon:.6} is not below 1")));
    }
    Ok(ScatteredModel { s, factors: factors.clone(), lipschitz, epsilon, n11_inv, feedback })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Absolute distance-to-fixed-point target; overrides `rel_tol` when set.
    pub tol: Option<f64>,
    /// Target relative to `‖u*‖`, used when `tol` is unset.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Keep every iterate `vᵏ` (starting with `v⁰`).
    pub record_iterates: bool,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: None, rel_tol: DEFAULT_REL_TOL, max_iter: DEFAULT_MAX_ITER, record_iterates: false }
    }
}

impl PicardOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol: Some(tol), ..Self::default() }
    }

    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub v_star: Signal,
    pub iterations: usize,
    pub last_step: f64,
    /// `‖(N₁₁ + N₁₂S)(v*) − u*‖`.
    pub residual: f64,
    pub tol: f64,
    pub iterates: Vec<Signal>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub y: Signal,
    pub v: Signal,
    pub iterations: usize,
    pub residual: f64,
    pub epsilon: f64,
}

impl<S: LipschitzOperator> ScatteredModel<S> {
    pub fn operator(&self) -> &S {
        &self.s
    }

    pub fn factors(&self) -> &ScatteringFactors {
        &self.factors
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `ℓ ‖N₁₁⁻¹N₁₂‖`.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Solves `(N₁₁ + N₁₂S)(v*) = u*` from `v⁰ = N₁₁⁻¹u*`.
    ///
    /// Stops once `‖vᵏ⁺¹ − vᵏ‖ ≤ tol (1 − ε)/ε`, which bounds `‖vᵏ⁺¹ − v*‖ ≤ tol`.
    pub fn picard_solve(&self, u_star: &Signal, options: PicardOptions) -> Result<PicardSolution> {
        let (m, _) = self.factors.dims();
        if u_star.dim() != m {
            return Err(shape(format!("input has {} channels, model expects {m}", u_star.dim())));
        }
        let tol = options.tol.unwrap_or(options.rel_tol * u_star.l2_norm()).max(1e-300);
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
        }
        let threshold = if self.epsilon > 0.0 { tol * (1.0 - self.epsilon) / self.epsilon } else { f64::INFINITY };
        let base = u_star.map_samples(&self.n11_inv)?;
        let mut v = base.clone();
        let mut iterates = Vec::new();
        if options.record_iterates {
            iterates.push(v.clone());
        }
        let mut last_step = f64::INFINITY;
        for k in 1..=options.max_iter {
            let sv = self.s.apply(&v)?;
            let next = base.sub(&sv.map_samples(&self.feedback)?)?;
            last_step = next.distance_sq(&v)?.sqrt();
            v = next;
            if options.record_iterates {
                iterates.push(v.clone());
            }
            if last_step <= threshold {
                let residual = self.fixed_point_residual(&v, u_star)?;
                return Ok(PicardSolution { v_star: v, iterations: k, last_step, residual, tol, iterates });
            }
        }
        Err(Error::NonConvergence { iterations: options.max_iter, last_step })
    }

    /// `‖N₁₁v + N₁₂S(v) − u*‖`.
    pub fn fixed_point_residual(&self, v: &Signal, u_star: &Signal) -> Result<f64> {
        let sv = self.s.apply(v)?;
        let lhs = Signal::block_map(&self.factors.n11(), v, &self.factors.n12(), &sv)?;
        Ok(lhs.distance_sq(u_star)?.sqrt())
    }

    /// `y* = R(u*) = N₂₁v* + N₂₂S(v*)`.
    pub fn simulate(&self, u_star: &Signal, options: PicardOptions) -> Result<Simulation> {
        let sol = self.picard_solve(u_star, options)?;
        let sv = self.s.apply(&sol.v_star)?;
        let y = Signal::block_map(&self.factors.n21(), &sol.v_star, &self.factors.n22(), &sv)?;
        Ok(Simulation { y, v: sol.v_star, iterations: sol.iterations, residual: sol.residual, epsilon: self.epsilon })
    }

    /// `R` as a plain signal operator, optionally mapped back from scaled coordinates
    /// as `u ↦ b R̄(u / a)`.
    pub fn as_operator(&self, options: PicardOptions, scaling: Option<Scaling>) -> Descattered<'_, S> {
        Descattered { model: self, options, scaling }
    }
}

/// Shorthand for [`ScatteredModel::simulate`].
pub fn simulate_r<S: LipschitzOperator>(model: &ScatteredModel<S>, u_star: &Signal, options: PicardOptions) -> Result<Signal> {
    Ok(model.simulate(u_star, options)?.y)
}

/// Borrowing adapter evaluating `R` through Picard iteration.
pub struct Descattered<'a, S> {
    model: &'a ScatteredModel<S>,
    options: PicardOptions,
    scaling: Option<Scaling>,
}

impl<S: LipschitzOperator> SignalOperator for Descattered<'_, S> {
    fn apply(&self, u: &Signal) -> Result<Signal> {
        match self.scaling {
            None => simulate_r(self.model, u, self.options),
            Some(sc) => {
                let mut opts = self.options;
                opts.tol = opts.tol.map(|t| t / sc.a);
                Ok(sc.unscale_output(&simulate_r(self.model, &sc.scale_input(u), opts)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CausalityReport {
    pub checked: usize,
    pub max_violation: f64,
    pub worst: Option<(usize, usize)>,
    pub tol: f64,
    pub pass: bool,
    /// Whether `S` itself is certified causal.
    pub operator_causal: bool,
}

/// For each probe `(u, w)` and horizon `T`, builds `v = P_T u + (I − P_T) w` so that
/// `P_T u = P_T v`, and measures `‖P_T R(u) − P_T R(v)‖`.
pub fn causality_check_r<S: LipschitzOperator>(
    model: &ScatteredModel<S>,
    probes: &[(Signal, Signal)],
    horizons: &[usize],
    options: PicardOptions,
) -> Result<CausalityReport> {
    let mut report = CausalityReport {
        checked: 0,
        max_violation: 0.0,
        worst: None,
        tol: CAUSALITY_TOL,
        pass: true,
        operator_causal: model.s.is_causal(),
    };
    for (k, (u, w)) in probes.iter().enumerate() {
        u.check_compatible(w)?;
        let ru = simulate_r(model, u, options)?;
        for &t in horizons {
            let head = u.truncate(t)?;
            let tail = w.sub(&w.truncate(t)?)?;
            let v = head.add(&tail)?;
            let rv = simulate_r(model, &v, options)?;
            let violation = ru.truncate(t)?.distance_sq(&rv.truncate(t)?)?.sqrt();
            report.checked += 1;
            if violation > report.max_violation || report.worst.is_none() {
                report.max_violation = report.max_violation.max(violation);
                report.worst = Some((k, t));
            }
        }
    }
    report.pass = report.max_violation <= CAUSALITY_TOL;
    Ok(report)
}
