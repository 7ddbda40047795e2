//! Potassium-channel model of the Hodgkin–Huxley type.
//!
//! The gating variable obeys `ẋ = α(u)(1 − x) − β(u)x` with `x(0) = 0`, and the
//! channel current is `y = g x⁴ (u − u_rev)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::{Dataset, Quadrature, Scaling, Signal, SignalOperator, TimeGrid};

pub const DEFAULT_DT_ODE: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 10.0;
pub const DEFAULT_SAMPLE_DT: f64 = 0.5;
pub const DEFAULT_LEVELS: [f64; 12] = [-6.0, -10.0, -19.0, -26.0, -32.0, -38.0, -51.0, -63.0, -76.0, -88.0, -100.0, -109.0];
/// Input scaling `a` used for identification.
pub const DEFAULT_SCALE_A: f64 = 978.7;
/// Output scaling `b` used for identification.
pub const DEFAULT_SCALE_B: f64 = 2.539e4;

const ALPHA_SERIES_BAND: f64 = 1e-4;
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HHParams {
    /// Maximal conductance.
    pub g: f64,
    /// Reversal potential.
    pub u_rev: f64,
}

impl Default for HHParams {
    fn default() -> Self {
        Self { g: 36.0, u_rev: 12.0 }
    }
}

impl HHParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0 && self.g.is_finite() && self.u_rev.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid channel parameters {self:?}")));
        }
        Ok(())
    }

    pub fn current(&self, x: f64, u: f64) -> f64 {
        self.g * x.powi(4) * (u - self.u_rev)
    }
}

/// Opening rate `α(u) = 0.01 (u + 10) / (e^{(u+10)/10} − 1)`, continued through `u = −10`.
pub fn rate_alpha(u: f64) -> f64 {
    let s = u + 10.0;
    if s.abs() < ALPHA_SERIES_BAND {
        let w = s / 10.0;
        0.1 * (1.0 - w / 2.0 + w * w / 12.0)
    } else {
        0.01 * s / (s / 10.0).exp_m1()
    }
}

/// Closing rate `β(u) = 0.125 e^{u/80}`.
pub fn rate_beta(u: f64) -> f64 {
    0.125 * (u / 80.0).exp()
}

/// Steady-state gating value `α / (α + β)` for a constant voltage.
pub fn steady_state(u: f64) -> f64 {
    let a = rate_alpha(u);
    a / (a + rate_beta(u))
}

/// Time constant `1 / (α + β)` for a constant voltage.
pub fn time_constant(u: f64) -> f64 {
    1.0 / (rate_alpha(u) + rate_beta(u))
}

fn gating_rhs(u: f64, x: f64) -> f64 {
    rate_alpha(u) * (1.0 - x) - rate_beta(u) * x
}

/// A simulated trajectory on the integration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    pub dt: f64,
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl ChannelTrace {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.len() - 1, self.dt)
    }

    pub fn input_signal(&self) -> Result<Signal> {
        Signal::scalar(self.grid()?, self.u.clone())
    }

    pub fn output_signal(&self) -> Result<Signal> {
        Signal::scalar(self.grid()?, self.y.clone())
    }

    /// Input and output at every `stride`-th integration step.
    pub fn subsample(&self, stride: usize) -> Result<(Signal, Signal)> {
        if stride == 0 || (self.len() - 1) % stride != 0 {
            return Err(Error::InvalidParameter(format!("stride {stride} does not divide {} steps", self.len() - 1)));
        }
        let grid = TimeGrid::new((self.len() - 1) / stride, self.dt * stride as f64)?;
        let pick = |v: &[f64]| v.iter().step_by(stride).copied().collect::<Vec<_>>();
        Ok((Signal::scalar(grid, pick(&self.u))?, Signal::scalar(grid, pick(&self.y))?))
    }
}

/// Integer number of steps of size `step` covering `span`.
fn step_count(span: f64, step: f64, what: &str) -> Result<usize> {
    if !(step > 0.0 && step.is_finite() && span >= 0.0 && span.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what}: need step > 0 and span >= 0, got {step} and {span}")));
    }
    let n = (span / step).round();
    if (n * step - span).abs() > GRID_TOL * span.max(1.0) {
        return Err(Error::InvalidParameter(format!("{what}: {span} is not a multiple of {step}")));
    }
    Ok(n as usize)
}

/// Integrates the channel for a continuous input waveform with classical RK4.
pub fn simulate_channel_fn(u: impl Fn(f64) -> f64, horizon: f64, dt_ode: f64, params: &HHParams) -> Result<ChannelTrace> {
    params.validate()?;
    let steps = step_count(horizon, dt_ode, "integration grid")?;
    integrate(steps, dt_ode, params, |k, frac| u((k as f64 + frac) * dt_ode))
}

/// Integrates the channel for an input sampled on the integration grid.
///
/// Midpoint values inside a step are linearly interpolated.
pub fn simulate_channel(u: &Signal, params: &HHParams) -> Result<Signal> {
    Ok(simulate_channel_trace(u, params)?.output_signal()?)
}

pub fn simulate_channel_trace(u: &Signal, params: &HHParams) -> Result<ChannelTrace> {
    params.validate()?;
    if u.dim() != 1 {
        return Err(crate::error::shape("channel input must be scalar"));
    }
    let v = u.values();
    let steps = u.grid().tau();
    integrate(steps, u.grid().dt(), params, |k, frac| {
        if frac == 0.0 {
            v[k]
        } else if frac == 1.0 {
            v[k + 1]
        } else {
            (1.0 - frac) * v[k] + frac * v[k + 1]
        }
    })
}

/// RK4 over `steps` steps; `input(k, f)` is the input at time `(k + f) dt`, `f ∈ {0, ½, 1}`.
fn integrate(steps: usize, dt: f64, params: &HHParams, input: impl Fn(usize, f64) -> f64) -> Result<ChannelTrace> {
    let mut x = vec![0.0; steps + 1];
    let mut u = vec![0.0; steps + 1];
    u[0] = input(0, 0.0);
    for k in 0..steps {
        let (u0, um, u1) = (u[k], input(k, 0.5), input(k, 1.0));
        let xk = x[k];
        let k1 = gating_rhs(u0, xk);
        let k2 = gating_rhs(um, xk + 0.5 * dt * k1);
        let k3 = gating_rhs(um, xk + 0.5 * dt * k2);
        let k4 = gating_rhs(u1, xk + dt * k3);
        let next = xk + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() || !u1.is_finite() {
            return Err(Error::Numerical(format!("non-finite channel state at step {}", k + 1)));
        }
        x[k + 1] = next;
        u[k + 1] = u1;
    }
    let y = x.iter().zip(&u).map(|(&xi, &ui)| params.current(xi, ui)).collect();
    Ok(ChannelTrace { dt, u, x, y })
}

/// The channel as an operator on sampled inputs.
///
/// Inputs on a grid coarser than `dt_ode` are linearly interpolated; the output is
/// read back at the input sample times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelOperator {
    pub params: HHParams,
    pub dt_ode: f64,
}

impl Default for ChannelOperator {
    fn default() -> Self {
        Self { params: HHParams::default(), dt_ode: DEFAULT_DT_ODE }
    }
}

impl SignalOperator for ChannelOperator {
    fn apply(&self, u: &Signal) -> Result<Signal> {
        let grid = u.grid();
        let stride = step_count(grid.dt(), self.dt_ode, "input period")?.max(1);
        let v = u.values();
        let dt = grid.dt() / stride as f64;
        let trace = simulate_channel_fn(
            |t| {
                let pos = t / grid.dt();
                let j = (pos.floor() as usize).min(grid.tau());
                if j == grid.tau() {
                    v[j]
                } else {
                    let f = pos - j as f64;
                    (1.0 - f) * v[j] + f * v[j + 1]
                }
            },
            grid.tau() as f64 * grid.dt(),
            dt,
            &self.params,
        )?;
        let (_, y) = trace.subsample(stride)?;
        Signal::new(*grid, 1, y.into_values())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub levels: Vec<f64>,
    pub horizon: f64,
    pub sample_dt: f64,
    pub dt_ode: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS.to_vec(),
            horizon: DEFAULT_HORIZON,
            sample_dt: DEFAULT_SAMPLE_DT,
            dt_ode: DEFAULT_DT_ODE,
        }
    }
}

/// Constant-voltage responses sampled every `sample_dt` over `[0, horizon]`.
pub fn step_dataset(config: &StepConfig, params: &HHParams) -> Result<Dataset> {
    if config.levels.is_empty() {
        return Err(Error::InvalidParameter("no voltage levels given".into()));
    }
    let samples = step_count(config.horizon, config.sample_dt, "sampling grid")?;
    let stride = step_count(config.sample_dt, config.dt_ode, "integration step")?;
    if stride == 0 {
        return Err(Error::InvalidParameter("sample period shorter than integration step".into()));
    }
    let mut inputs = Vec::with_capacity(config.levels.len());
    let mut outputs = Vec::with_capacity(config.levels.len());
    for &level in &config.levels {
        let trace = simulate_channel_fn(|_| level, samples as f64 * config.sample_dt, config.dt_ode, params)?;
        let (u, y) = trace.subsample(stride)?;
        inputs.push(u);
        outputs.push(y);
    }
    Dataset::new(inputs, outputs)
}

/// First input of the non-monotonicity witness, `25 sin(12πt/50)`.
pub fn witness_u1(t: f64) -> f64 {
    25.0 * (12.0 / 50.0 * std::f64::consts::PI * t).sin()
}

/// Second input of the non-monotonicity witness, `25 cos(14πt/75)`.
pub fn witness_u2(t: f64) -> f64 {
    25.0 * (14.0 / 75.0 * std::f64::consts::PI * t).cos()
}

/// `⟨u₁ − u₂, y₁ − y₂⟩` for the two witness inputs under several quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    /// Trapezoidal rule on the integration grid.
    pub trapezoidal: f64,
    /// Rectangular rule on the integration grid.
    pub rectangular: f64,
    /// Plain sum over the `sample_dt` grid.
    pub sampled: f64,
    pub dt_ode: f64,
    pub sample_dt: f64,
}

pub fn monotonicity_witness(params: &HHParams, horizon: f64, dt_ode: f64, sample_dt: f64) -> Result<Witness> {
    let a = simulate_channel_fn(witness_u1, horizon, dt_ode, params)?;
    let b = simulate_channel_fn(witness_u2, horizon, dt_ode, params)?;
    let du = a.input_signal()?.sub(&b.input_signal()?)?;
    let dy = a.output_signal()?.sub(&b.output_signal()?)?;
    let stride = step_count(sample_dt, dt_ode, "witness sampling")?;
    let (ua, ya) = a.subsample(stride)?;
    let (ub, yb) = b.subsample(stride)?;
    Ok(Witness {
        trapezoidal: du.inner(&dy, Quadrature::Trapezoidal)?,
        rectangular: du.inner(&dy, Quadrature::Rectangular)?,
        sampled: ua.sub(&ub)?.inner(&yb.scale(-1.0).add(&ya)?, Quadrature::Sequence)?,
        dt_ode,
        sample_dt,
    })
}

pub fn default_witness() -> Result<Witness> {
    monotonicity_witness(&HHParams::default(), DEFAULT_HORIZON, DEFAULT_DT_ODE, DEFAULT_SAMPLE_DT)
}

/// Divides inputs by `a` and outputs by `b`.
pub fn scale_dataset(data: &Dataset, a: f64, b: f64) -> Result<Dataset> {
    Scaling::new(a, b)?.apply(data)
}

pub fn default_scaling() -> Scaling {
    Scaling { a: DEFAULT_SCALE_A, b: DEFAULT_SCALE_B }
}

/// Pointwise ordering of constant-level responses: `u_i ≤ u_j ⇒ y_i(t) ≤ y_j(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub pairs_checked: usize,
    pub violations: usize,
    pub max_violation: f64,
    pub holds: bool,
}

pub fn ordering_report(data: &Dataset) -> OrderingReport {
    let level = |s: &Signal| s.values()[0];
    let mut report = OrderingReport { pairs_checked: 0, violations: 0, max_violation: 0.0, holds: true };
    let n = data.len();
    for i in 0..n {
        for j in 0..n {
            if i == j || level(&data.inputs()[i]) > level(&data.inputs()[j]) {
                continue;
            }
            report.pairs_checked += 1;
            let excess = data.outputs()[i]
                .values()
                .iter()
                .zip(data.outputs()[j].values())
                .map(|(yi, yj)| yi - yj)
                .fold(0.0, f64::max);
            if excess > 0.0 {
                report.violations += 1;
                report.max_violation = report.max_violation.max(excess);
            }
        }
    }
    report.holds = report.violations == 0;
    report
}

/// Long-format `(t, level, y)` rows for plotting constant-level responses.
pub fn figure1_rows(data: &Dataset) -> Vec<(f64, f64, f64)> {
    data.pairs()
        .flat_map(|(u, y)| {
            let level = u.values()[0];
            let grid = *y.grid();
            y.values().iter().enumerate().map(move |(j, &v)| (grid.time(j), level, v)).collect::<Vec<_>>()
        })
        .collect()
}
