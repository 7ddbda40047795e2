//! Sampled signals on a uniform time grid and the ℓ₂ geometry over them.
//!
//! A [`Signal`] is an element of ℓ₂({0, …, τ}, ℝ^d). Values are stored flat,
//! time-major then channel, so `values[t * dim + c]` is channel `c` at sample `t`.
//! Every other module flattens collections of signals the same way.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};

/// Uniform sampling grid `t_j = j * dt`, `j = 0..=tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    tau: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(tau: usize, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("sampling period must be positive, got {dt}")));
        }
        Ok(Self { tau, dt })
    }

    /// Final sample index.
    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of samples, `tau + 1`.
    pub fn len(&self) -> usize {
        self.tau + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |j| self.time(j))
    }
}

/// How per-sample products are weighted when summing over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Pure ℓ₂ sequence inner product, weight 1 per sample.
    #[default]
    Sequence,
    /// Rectangular rule for a sampled continuous integral, weight `dt` per sample.
    Rectangular,
    /// Trapezoidal rule, weight `dt` with halved end points.
    Trapezoidal,
}

impl Quadrature {
    /// Weight of sample `j` on `grid`.
    pub fn weight(self, grid: &TimeGrid, j: usize) -> f64 {
        match self {
            Quadrature::Sequence => 1.0,
            Quadrature::Rectangular => grid.dt,
            Quadrature::Trapezoidal => {
                if grid.tau == 0 {
                    grid.dt
                } else if j == 0 || j == grid.tau {
                    0.5 * grid.dt
                } else {
                    grid.dt
                }
            }
        }
    }
}

/// A vector-valued trajectory sampled on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl Signal {
    /// Builds a signal from flat time-major values; rejects non-finite entries.
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(shape("signal dimension must be positive"));
        }
        if values.len() != grid.len() * dim {
            return Err(shape(format!(
                "expected {} values ({} samples x {} channels), got {}",
                grid.len() * dim,
                grid.len(),
                dim,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite value at sample {} channel {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { grid, dim, values })
    }

    /// Scalar signal from its samples.
    pub fn scalar(grid: TimeGrid, samples: Vec<f64>) -> Result<Self> {
        Self::new(grid, 1, samples)
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self { grid, dim, values: vec![0.0; grid.len() * dim] }
    }

    pub fn constant(grid: TimeGrid, dim: usize, value: f64) -> Result<Self> {
        Self::new(grid, dim, vec![value; grid.len() * dim])
    }

    /// Samples `f(t_j)` for a scalar waveform.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, 1, grid.times().map(f).collect())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// The vector at sample `t`.
    pub fn sample(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    /// Errors unless `other` lives on the same grid with the same channel count.
    pub fn check_compatible(&self, other: &Signal) -> Result<()> {
        if self.grid != other.grid {
            return Err(shape(format!("grid mismatch: {:?} vs {:?}", self.grid, other.grid)));
        }
        if self.dim != other.dim {
            return Err(shape(format!("dimension mismatch: {} vs {}", self.dim, other.dim)));
        }
        Ok(())
    }

    /// `Σ_t w(t) ⟨f(t), g(t)⟩` with weights from `quad`.
    pub fn inner(&self, other: &Signal, quad: Quadrature) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.inner_unchecked(other, quad))
    }

    fn inner_unchecked(&self, other: &Signal, quad: Quadrature) -> f64 {
        self.values
            .chunks_exact(self.dim)
            .zip(other.values.chunks_exact(self.dim))
            .enumerate()
            .map(|(t, (a, b))| {
                let s: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                quad.weight(&self.grid, t) * s
            })
            .sum()
    }

    pub fn norm(&self, quad: Quadrature) -> f64 {
        self.inner_unchecked(self, quad).max(0.0).sqrt()
    }

    /// ℓ₂ sequence norm.
    pub fn l2_norm(&self) -> f64 {
        self.norm(Quadrature::Sequence)
    }

    /// ‖self − other‖² in sequence mode.
    pub fn distance_sq(&self, other: &Signal) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum())
    }

    /// `P_T f`: keeps samples `0..=t_end`, zeroes the rest.
    pub fn truncate(&self, t_end: usize) -> Result<Signal> {
        if t_end > self.grid.tau {
            return Err(Error::Range { index: t_end, max: self.grid.tau });
        }
        let mut values = self.values.clone();
        values[(t_end + 1) * self.dim..].iter_mut().for_each(|x| *x = 0.0);
        Ok(Signal { grid: self.grid, dim: self.dim, values })
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &Signal, b: f64) -> Result<Signal> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Signal::new(self.grid, self.dim, values)
    }

    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> Signal {
        Signal { grid: self.grid, dim: self.dim, values: self.values.iter().map(|x| a * x).collect() }
    }

    /// Applies the matrix `a` (rows × dim) to every sample.
    pub fn map_samples(&self, a: &DMatrix<f64>) -> Result<Signal> {
        if a.ncols() != self.dim {
            return Err(shape(format!("matrix has {} columns, signal has {} channels", a.ncols(), self.dim)));
        }
        let rows = a.nrows();
        let mut values = Vec::with_capacity(self.grid.len() * rows);
        for s in self.samples() {
            for r in 0..rows {
                values.push((0..self.dim).map(|c| a[(r, c)] * s[c]).sum());
            }
        }
        Signal::new(self.grid, rows, values)
    }

    /// Sample-wise `a·x + b·y` for block matrices `a` (k × dim(x)) and `b` (k × dim(y)).
    pub fn block_map(a: &DMatrix<f64>, x: &Signal, b: &DMatrix<f64>, y: &Signal) -> Result<Signal> {
        if x.grid != y.grid {
            return Err(shape("block map operands live on different grids"));
        }
        if a.nrows() != b.nrows() {
            return Err(shape("block rows disagree"));
        }
        x.map_samples(a)?.add(&y.map_samples(b)?)
    }
}

/// An operator on sampled signals.
pub trait SignalOperator {
    fn apply(&self, u: &Signal) -> Result<Signal>;
}

impl<F> SignalOperator for F
where
    F: Fn(&Signal) -> Result<Signal>,
{
    fn apply(&self, u: &Signal) -> Result<Signal> {
        self(u)
    }
}

/// Positive rescaling `ū = u / a`, `ȳ = y / b` of inputs and outputs.
///
/// An operator `R` is recovered from its rescaled version as `R(u) = b R̄(u / a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub a: f64,
    pub b: f64,
}

impl Scaling {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidParameter(format!("scales must be positive, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b })
    }

    pub fn identity() -> Self {
        Self { a: 1.0, b: 1.0 }
    }

    pub fn scale_input(&self, u: &Signal) -> Signal {
        u.scale(1.0 / self.a)
    }

    pub fn scale_output(&self, y: &Signal) -> Signal {
        y.scale(1.0 / self.b)
    }

    pub fn unscale_output(&self, y: &Signal) -> Signal {
        y.scale(self.b)
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        Dataset::new(
            data.inputs().iter().map(|u| self.scale_input(u)).collect(),
            data.outputs().iter().map(|y| self.scale_output(y)).collect(),
        )
    }
}

/// Paired input/output trajectories on one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Signal>,
    outputs: Vec<Signal>,
}

impl Dataset {
    pub fn new(inputs: Vec<Signal>, outputs: Vec<Signal>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(shape("dataset must contain at least one trajectory pair"));
        }
        if inputs.len() != outputs.len() {
            return Err(shape(format!("{} inputs but {} outputs", inputs.len(), outputs.len())));
        }
        let grid = *inputs[0].grid();
        let (m, p) = (inputs[0].dim(), outputs[0].dim());
        for (i, (u, y)) in inputs.iter().zip(&outputs).enumerate() {
            if *u.grid() != grid || *y.grid() != grid {
                return Err(shape(format!("trajectory {i} is not on the shared grid")));
            }
            if u.dim() != m || y.dim() != p {
                return Err(shape(format!("trajectory {i} has dims ({}, {}), expected ({m}, {p})", u.dim(), y.dim())));
            }
        }
        Ok(Self { inputs, outputs })
    }

    pub fn inputs(&self) -> &[Signal] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Signal] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.inputs[0].grid()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].dim()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs[0].dim()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Signal, &Signal)> {
        self.inputs.iter().zip(&self.outputs)
    }

    /// Outputs flattened trajectory-major into one vector (the `ȳ` of the normal equations).
    pub fn stacked_outputs(&self) -> Vec<f64> {
        self.outputs.iter().flat_map(|y| y.values().iter().copied()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(tau: usize) -> TimeGrid {
        TimeGrid::new(tau, 0.5).unwrap()
    }

    #[test]
    fn inner_product_examples() {
        let one = Signal::constant(grid(1), 1, 1.0).unwrap();
        assert_eq!(one.inner(&one, Quadrature::Sequence).unwrap(), 2.0);

        let f = Signal::new(grid(2), 2, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let g = Signal::new(grid(2), 2, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(f.inner(&g, Quadrature::Sequence).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_weights() {
        let one = Signal::constant(grid(4), 1, 1.0).unwrap();
        assert_eq!(one.inner(&one, Quadrature::Rectangular).unwrap(), 2.5);
        // trapezoid integrates a constant over [0, 2] exactly
        assert!((one.inner(&one, Quadrature::Trapezoidal).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(Signal::zeros(grid(3), 2).l2_norm(), 0.0);
        assert_eq!(Signal::constant(grid(3), 1, 3.0).unwrap().l2_norm(), 6.0);
        let s = Signal::constant(grid(0), 2, 1.0).unwrap();
        assert!((s.l2_norm() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn truncate_examples() {
        let f = Signal::scalar(grid(2), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.truncate(2).unwrap(), f);
        assert_eq!(f.truncate(0).unwrap().values(), &[1.0, 0.0, 0.0]);
        assert!(matches!(f.truncate(3), Err(Error::Range { index: 3, max: 2 })));
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Signal::scalar(grid(1), vec![1.0]).is_err());
        assert!(matches!(Signal::scalar(grid(1), vec![1.0, f64::NAN]), Err(Error::Numerical(_))));
        assert!(TimeGrid::new(3, 0.0).is_err());
        let a = Signal::zeros(grid(1), 1);
        let b = Signal::zeros(grid(2), 1);
        assert!(a.inner(&b, Quadrature::Sequence).is_err());
        assert!(a.inner(&Signal::zeros(grid(1), 2), Quadrature::Sequence).is_err());
    }

    #[test]
    fn dataset_validation() {
        let u = Signal::zeros(grid(2), 1);
        let y = Signal::zeros(grid(2), 2);
        assert!(Dataset::new(vec![], vec![]).is_err());
        assert!(Dataset::new(vec![u.clone()], vec![]).is_err());
        assert!(Dataset::new(vec![u.clone(), u.clone()], vec![y.clone(), Signal::zeros(grid(2), 1)]).is_err());
        let d = Dataset::new(vec![u.clone()], vec![y]).unwrap();
        assert_eq!((d.len(), d.input_dim(), d.output_dim()), (1, 1, 2));
    }

    fn signal_strategy() -> impl Strategy<Value = (Signal, Signal, usize)> {
        (0usize..6, 1usize..3).prop_flat_map(|(tau, dim)| {
            let n = (tau + 1) * dim;
            (
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
                0..=tau,
            )
                .prop_map(move |(a, b, t)| {
                    let g = TimeGrid::new(tau, 0.5).unwrap();
                    (Signal::new(g, dim, a).unwrap(), Signal::new(g, dim, b).unwrap(), t)
                })
        })
    }

    proptest! {
        #[test]
        fn cauchy_schwarz((f, g, _t) in signal_strategy()) {
            let ip = f.inner(&g, Quadrature::Sequence).unwrap();
            let bound = f.l2_norm() * g.l2_norm();
            prop_assert!(ip.abs() <= bound * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn truncation_contracts_and_is_idempotent((f, _g, t) in signal_strategy()) {
            let pf = f.truncate(t).unwrap();
            prop_assert!(pf.l2_norm() <= f.l2_norm());
            prop_assert_eq!(pf.truncate(t).unwrap(), pf);
        }

        #[test]
        fn truncation_is_linear((f, g, t) in signal_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let lhs = f.lincomb(a, &g, b).unwrap().truncate(t).unwrap();
            let rhs = f.truncate(t).unwrap().lincomb(a, &g.truncate(t).unwrap(), b).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
