//! File formats: signal CSVs, dataset manifests, model bundles and run artifacts.
//!
//! Every file is plain text. Floats are written in shortest round-trip form so a
//! saved bundle reloads bit-for-bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::OperatorKernel;
use crate::rkhs::{FittedOperator, SweepPoint};
use crate::signals::{Dataset, Scaling, Signal, TimeGrid};
use crate::supply::SupplySpec;

/// Largest allowed deviation of a CSV time stamp from `j * dt`.
pub const TIME_TOL: f64 = 1e-9;
/// Relative linear-system residual a reloaded model must reproduce.
pub const BUNDLE_RESIDUAL_TOL: f64 = 1e-8;
pub const DATASET_MANIFEST: &str = "dataset.json";
pub const MODEL_MANIFEST: &str = "model.json";

fn format_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}: {msg}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e))
}

/// Writes `t,ch1,…,chd` rows.
pub fn write_signal_csv(path: &Path, signal: &Signal) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=signal.dim()).map(|c| format!("ch{c}")));
    w.write_record(&header)?;
    for (j, sample) in signal.samples().enumerate() {
        let mut row = vec![signal.grid().time(j).to_string()];
        row.extend(sample.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a signal CSV. The period is taken from `dt` or else from the first two rows.
pub fn read_signal_csv(path: &Path, dt: Option<f64>) -> Result<Signal> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let dim = header.len().saturating_sub(1);
    if dim == 0 || &header[0] != "t" {
        return Err(format_err(path, "header must be t,ch1,...,chd"));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != dim + 1 {
            return Err(format_err(path, format!("row {} has {} fields, expected {}", row + 1, record.len(), dim + 1)));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| format_err(path, format!("row {}: {e}", row + 1)));
        times.push(parse(&record[0])?);
        for field in record.iter().skip(1) {
            values.push(parse(field)?);
        }
    }
    if times.is_empty() {
        return Err(format_err(path, "no samples"));
    }
    let dt = match (dt, times.len()) {
        (Some(dt), _) => dt,
        (None, 1) => return Err(format_err(path, "a single-sample signal needs an explicit dt")),
        (None, _) => times[1] - times[0],
    };
    let grid = TimeGrid::new(times.len() - 1, dt)?;
    for (j, &t) in times.iter().enumerate() {
        if (t - grid.time(j)).abs() > TIME_TOL * grid.time(j).abs().max(1.0) {
            return Err(format_err(path, format!("time {t} at row {} is not {} * {dt}", j + 1, j)));
        }
    }
    Signal::new(grid, dim, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub m: usize,
    pub p: usize,
    pub dt: f64,
    pub tau: usize,
    pub pairs: Vec<PairEntry>,
}

/// Writes one CSV per signal plus `dataset.json` into `dir`; returns the manifest path.
pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut pairs = Vec::with_capacity(data.len());
    for (i, (u, y)) in data.pairs().enumerate() {
        let entry = PairEntry { input: format!("input_{i:03}.csv"), output: format!("output_{i:03}.csv") };
        write_signal_csv(&dir.join(&entry.input), u)?;
        write_signal_csv(&dir.join(&entry.output), y)?;
        pairs.push(entry);
    }
    let manifest = DatasetManifest {
        m: data.input_dim(),
        p: data.output_dim(),
        dt: data.grid().dt(),
        tau: data.grid().tau(),
        pairs,
    };
    let path = dir.join(DATASET_MANIFEST);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Accepts either the manifest itself or the directory containing it.
fn manifest_path(path: &Path, name: &str) -> PathBuf {
    if path.is_dir() {
        path.join(name)
    } else {
        path.to_path_buf()
    }
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let path = manifest_path(path, DATASET_MANIFEST);
    let manifest: DatasetManifest = read_json(&path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let grid = TimeGrid::new(manifest.tau, manifest.dt)?;
    let load = |name: &str, dim: usize| -> Result<Signal> {
        let s = read_signal_csv(&dir.join(name), Some(manifest.dt))?;
        if *s.grid() != grid || s.dim() != dim {
            return Err(format_err(&dir.join(name), format!("expected {} samples x {dim} channels", grid.len())));
        }
        Ok(s)
    };
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for entry in &manifest.pairs {
        inputs.push(load(&entry.input, manifest.m)?);
        outputs.push(load(&entry.output, manifest.p)?);
    }
    Dataset::new(inputs, outputs)
}

/// A fitted model with the context needed to use and re-verify it.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub model: FittedOperator,
    /// Training targets `ȳ`, kept so the linear system can be re-checked on load.
    pub targets: Vec<Signal>,
    /// Supply whose scattering produced the training data, if any.
    pub supply: Option<SupplySpec>,
    pub scaling: Option<Scaling>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub kernel: OperatorKernel,
    pub gamma: f64,
    pub rkhs_norm: f64,
    pub tau: usize,
    pub dt: f64,
    pub m: usize,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supply: Option<SupplySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<Scaling>,
    pub centers: Vec<String>,
    pub coefficients: Vec<String>,
    pub targets: Vec<String>,
}

pub fn save_model(dir: &Path, bundle: &ModelBundle) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let model = &bundle.model;
    if bundle.targets.len() != model.centers().len() {
        return Err(Error::Shape("one target per center is required".into()));
    }
    let names = |prefix: &str| (0..model.centers().len()).map(|i| format!("{prefix}_{i:03}.csv")).collect::<Vec<_>>();
    let (centers, coefficients, targets) = (names("center"), names("coef"), names("target"));
    for (name, s) in centers.iter().zip(model.centers()) {
        write_signal_csv(&dir.join(name), s)?;
    }
    for (name, s) in coefficients.iter().zip(model.coefficients()) {
        write_signal_csv(&dir.join(name), s)?;
    }
    for (name, s) in targets.iter().zip(&bundle.targets) {
        write_signal_csv(&dir.join(name), s)?;
    }
    let grid = model.centers()[0].grid();
    let manifest = ModelManifest {
        kernel: model.kernel().clone(),
        gamma: model.gamma(),
        rkhs_norm: model.rkhs_norm(),
        tau: grid.tau(),
        dt: grid.dt(),
        m: model.input_dim(),
        p: model.output_dim(),
        supply: bundle.supply.clone(),
        scaling: bundle.scaling,
        centers,
        coefficients,
        targets,
    };
    let path = dir.join(MODEL_MANIFEST);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Loads a bundle and re-verifies `(G + γI) c̄ = ȳ` and the stored norm.
pub fn load_model(path: &Path) -> Result<ModelBundle> {
    let path = manifest_path(path, MODEL_MANIFEST);
    let manifest: ModelManifest = read_json(&path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let load_all = |names: &[String]| -> Result<Vec<Signal>> {
        names.iter().map(|n| read_signal_csv(&dir.join(n), Some(manifest.dt))).collect()
    };
    let centers = load_all(&manifest.centers)?;
    let coefficients = load_all(&manifest.coefficients)?;
    let targets = load_all(&manifest.targets)?;
    let model = FittedOperator::from_parts(manifest.kernel.clone(), centers, coefficients, manifest.gamma)?;
    if model.input_dim() != manifest.m || model.output_dim() != manifest.p || model.centers()[0].grid().tau() != manifest.tau {
        return Err(format_err(&path, "signal files disagree with the manifest dimensions"));
    }
    let residual = model.linear_system_residual(&targets)?;
    if !(residual <= BUNDLE_RESIDUAL_TOL) {
        return Err(format_err(&path, format!("coefficients do not solve the regularized system (relative residual {residual:.3e})")));
    }
    if (model.rkhs_norm() - manifest.rkhs_norm).abs() > 1e-9 * manifest.rkhs_norm.max(1.0) {
        return Err(format_err(&path, format!("stored norm {} but coefficients give {}", manifest.rkhs_norm, model.rkhs_norm())));
    }
    Ok(ModelBundle { model, targets, supply: manifest.supply, scaling: manifest.scaling })
}

/// Writes `t,u1..um,y1..yp` rows for one simulated trajectory.
pub fn write_simulation_csv(path: &Path, u: &Signal, y: &Signal) -> Result<()> {
    if u.grid() != y.grid() {
        return Err(Error::Shape("input and output grids differ".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    let name = |base: &str, dim: usize, c: usize| if dim == 1 { base.to_string() } else { format!("{base}{}", c + 1) };
    let mut header = vec!["t".to_string()];
    header.extend((0..u.dim()).map(|c| name("u", u.dim(), c)));
    header.extend((0..y.dim()).map(|c| name("y", y.dim(), c)));
    w.write_record(&header)?;
    for (j, (a, b)) in u.samples().zip(y.samples()).enumerate() {
        let mut row = vec![u.grid().time(j).to_string()];
        row.extend(a.iter().chain(b).map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-trajectory record of a Picard simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationLog {
    pub input: String,
    pub output: String,
    pub epsilon: f64,
    pub iterations: usize,
    pub residual: f64,
}

pub fn write_figure1_csv(path: &Path, rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "level", "y"])?;
    for (t, level, y) in rows {
        w.write_record([t.to_string(), level.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["gamma", "rkhs_norm", "empirical_risk"])?;
    for p in points {
        w.write_record([p.gamma.to_string(), p.rkhs_norm.to_string(), p.empirical_risk.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
