use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use iqc_sysid::hodgkin::{self, ChannelOperator, HHParams, StepConfig};
use iqc_sysid::inversion::{contraction_margin, PicardOptions};
use iqc_sysid::io::{self, ModelBundle, SimulationLog};
use iqc_sysid::pipeline::{self, ReproduceConfig};
use iqc_sysid::probes;
use iqc_sysid::rkhs::{self, FitOptions};
use iqc_sysid::signals::{Quadrature, Scaling, Signal, TimeGrid};
use iqc_sysid::supply::{self, HorizonMode, IqcReport, SupplySpec};
use iqc_sysid::{Error, OperatorKernel};

#[derive(Parser)]
#[command(name = "iqc-sysid", version, about = "Identify operators that satisfy incremental quadratic constraints")]
struct Cli {
    /// JSON settings for the subcommand; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the potassium channel at constant voltages and write the dataset.
    GenData(GenDataArgs),
    /// Check an incremental quadratic constraint for a built-in operator or a fitted model.
    Check(CheckArgs),
    /// Fit a kernel model to a dataset, optionally after scaling and scattering.
    Fit(FitArgs),
    /// Simulate a fitted model on input signals.
    Simulate(SimulateArgs),
    /// Run the full channel identification pipeline.
    Reproduce(ReproduceArgs),
    /// Tabulate RKHS norm and empirical risk over a range of regularization weights.
    SweepGamma(SweepArgs),
}

/// Outcome of a command that completed without I/O or usage errors.
enum Verdict {
    Pass,
    Violation,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Violation) => ExitCode::from(1),
        Err(e) => {
            if let Some(Error::Hypothesis(msg)) = e.downcast_ref::<Error>() {
                eprintln!("hypothesis violated: {msg}");
                return ExitCode::from(1);
            }
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<Verdict> {
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    match &cli.command {
        Command::GenData(a) => gen_data(cli, a),
        Command::Check(a) => check(cli, a),
        Command::Fit(a) => fit(cli, a),
        Command::Simulate(a) => simulate(cli, a),
        Command::Reproduce(a) => reproduce(cli, a),
        Command::SweepGamma(a) => sweep(cli, a),
    }
}

fn load_config<T: DeserializeOwned + Default>(cli: &Cli) -> Result<T> {
    match &cli.config {
        Some(path) => Ok(io::read_json(path).with_context(|| format!("reading config {}", path.display()))?),
        None => Ok(T::default()),
    }
}

fn write_resolved<T: Serialize>(cli: &Cli, settings: &T) -> Result<()> {
    io::write_json(&cli.out.join("resolved_config.json"), settings)?;
    Ok(())
}

fn say(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", msg.as_ref());
    }
}

/// Inline JSON when the argument starts with `{`, a file path otherwise.
fn json_arg<T: DeserializeOwned>(arg: &str) -> Result<T> {
    if arg.trim_start().starts_with('{') {
        Ok(serde_json::from_str(arg).with_context(|| format!("parsing {arg}"))?)
    } else {
        Ok(io::read_json(Path::new(arg)).with_context(|| format!("reading {arg}"))?)
    }
}

/// `passivity`, `gain:<delta>`, inline JSON or a JSON file.
fn supply_arg(arg: &str) -> Result<SupplySpec> {
    if arg == "passivity" {
        return Ok(SupplySpec::Passivity { m: None, p: None });
    }
    if let Some(delta) = arg.strip_prefix("gain:") {
        let delta = delta.parse().with_context(|| format!("bad gain value in {arg}"))?;
        return Ok(SupplySpec::Gain { delta, m: None, p: None });
    }
    json_arg(arg)
}

fn scaling_of(a: Option<f64>, b: Option<f64>) -> Result<Option<Scaling>> {
    match (a, b) {
        (None, None) => Ok(None),
        (a, b) => Ok(Some(Scaling::new(a.unwrap_or(1.0), b.unwrap_or(1.0))?)),
    }
}

// --- gen-data ---------------------------------------------------------------

#[derive(Args)]
struct GenDataArgs {
    /// Comma-separated constant voltages.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    levels: Option<Vec<f64>>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    sample_dt: Option<f64>,
    #[arg(long)]
    dt_ode: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct GenDataSettings {
    params: HHParams,
    data: StepConfig,
}

fn gen_data(cli: &Cli, a: &GenDataArgs) -> Result<Verdict> {
    let mut s: GenDataSettings = load_config(cli)?;
    if let Some(l) = &a.levels {
        s.data.levels = l.clone();
    }
    s.data.horizon = a.horizon.unwrap_or(s.data.horizon);
    s.data.sample_dt = a.sample_dt.unwrap_or(s.data.sample_dt);
    s.data.dt_ode = a.dt_ode.unwrap_or(s.data.dt_ode);
    write_resolved(cli, &s)?;
    let data = hodgkin::step_dataset(&s.data, &s.params)?;
    let manifest = io::write_dataset(&cli.out.join("data"), &data)?;
    io::write_figure1_csv(&cli.out.join("figure1.csv"), &hodgkin::figure1_rows(&data))?;
    say(cli, format!("wrote {} trajectories of {} samples to {}", data.len(), data.grid().len(), manifest.display()));
    Ok(Verdict::Pass)
}

// --- check ------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BuiltinOperator {
    /// Potassium channel current.
    Hh,
    Identity,
    Negation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ProbeKind {
    /// The two sinusoidal inputs on which the channel fails monotonicity.
    Witness,
    Random,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, value_enum, conflicts_with = "model")]
    operator: Option<BuiltinOperator>,
    /// Fitted model bundle directory.
    #[arg(long)]
    model: Option<PathBuf>,
    /// `passivity`, `gain:<delta>`, or a JSON supply spec.
    #[arg(long)]
    supply: Option<String>,
    #[arg(long, value_enum)]
    probes: Option<ProbeKind>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    amplitude: Option<f64>,
    /// Check every truncation horizon instead of only the full one.
    #[arg(long)]
    all_horizons: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct CheckSettings {
    operator: Option<BuiltinOperator>,
    model: Option<PathBuf>,
    supply: SupplySpec,
    probes: ProbeKind,
    count: usize,
    amplitude: f64,
    tau: usize,
    dt: f64,
    dt_ode: f64,
    horizons: HorizonMode,
    quadrature: Quadrature,
    seed: u64,
    picard_rel_tol: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            operator: None,
            model: None,
            supply: SupplySpec::Passivity { m: None, p: None },
            probes: ProbeKind::Random,
            count: 100,
            amplitude: 1.0,
            tau: 20,
            dt: 0.5,
            dt_ode: hodgkin::DEFAULT_DT_ODE,
            horizons: HorizonMode::FullHorizon,
            quadrature: Quadrature::Sequence,
            seed: probes::DEFAULT_SEED,
            picard_rel_tol: 1e-9,
        }
    }
}

#[derive(Serialize)]
struct CheckReport<'a> {
    subject: String,
    supply: &'a SupplySpec,
    iqc: IqcReport,
    /// `⟨Δu, Δy⟩` of the worst probe when the supply is passivity.
    worst_inner_product: Option<f64>,
    epsilon: Option<f64>,
    pass: bool,
}

fn check(cli: &Cli, a: &CheckArgs) -> Result<Verdict> {
    let mut s: CheckSettings = load_config(cli)?;
    if a.operator.is_some() {
        s.operator = a.operator;
        s.model = None;
    }
    if a.model.is_some() {
        s.model = a.model.clone();
        s.operator = None;
    }
    if let Some(sup) = &a.supply {
        s.supply = supply_arg(sup)?;
    }
    if s.operator == Some(BuiltinOperator::Hh) && a.probes.is_none() && cli.config.is_none() {
        s.probes = ProbeKind::Witness;
    }
    s.probes = a.probes.unwrap_or(s.probes);
    s.count = a.count.unwrap_or(s.count);
    s.amplitude = a.amplitude.unwrap_or(s.amplitude);
    s.seed = cli.seed.unwrap_or(s.seed);
    if a.all_horizons {
        s.horizons = HorizonMode::AllHorizons;
    }
    if s.probes == ProbeKind::Witness {
        s.quadrature = Quadrature::Trapezoidal;
    }
    write_resolved(cli, &s)?;

    let witness_pairs = || -> Result<Vec<(Signal, Signal)>> { Ok(vec![pipeline::witness_probes(s.dt_ode)?]) };
    let random_pairs = |grid: TimeGrid, dim: usize| -> Result<Vec<(Signal, Signal)>> {
        Ok(probes::random_pairs(s.seed, s.count, grid, dim, s.amplitude)?)
    };
    let (subject, iqc, epsilon) = match (&s.operator, &s.model) {
        (Some(op), None) => {
            let rate = s.supply.build(1, 1)?;
            let pairs = match s.probes {
                ProbeKind::Witness => witness_pairs()?,
                ProbeKind::Random => random_pairs(TimeGrid::new(s.tau, s.dt)?, 1)?,
            };
            let report = match op {
                BuiltinOperator::Hh => {
                    let chan = ChannelOperator { params: HHParams::default(), dt_ode: s.dt_ode };
                    supply::check_operator_iiqc(&chan, &rate, &pairs, s.horizons, s.quadrature)?
                }
                BuiltinOperator::Identity => {
                    let id = |u: &Signal| Ok(u.clone());
                    supply::check_operator_iiqc(&id, &rate, &pairs, s.horizons, s.quadrature)?
                }
                BuiltinOperator::Negation => {
                    let neg = |u: &Signal| Ok(u.scale(-1.0));
                    supply::check_operator_iiqc(&neg, &rate, &pairs, s.horizons, s.quadrature)?
                }
            };
            (format!("{op:?}").to_lowercase(), report, None)
        }
        (None, Some(dir)) => {
            let bundle = io::load_model(dir)?;
            let model = bundle.model;
            let (m, p) = (model.input_dim(), model.output_dim());
            let train_supply = bundle.supply.clone().unwrap_or(SupplySpec::Passivity { m: None, p: None });
            let factors = train_supply.build(m, p)?.factor()?;
            let rate = s.supply.build(m, p)?;
            let grid = *model.centers()[0].grid();
            let pairs = random_pairs(grid, m)?;
            let scattered = contraction_margin(model, &factors)?;
            let eps = scattered.epsilon();
            let op = scattered.as_operator(PicardOptions::with_rel_tol(s.picard_rel_tol), None);
            let report = supply::check_operator_iiqc(&op, &rate, &pairs, s.horizons, s.quadrature)?;
            (format!("model {}", dir.display()), report, Some(eps))
        }
        _ => bail!("give exactly one of --operator or --model"),
    };
    let worst_inner_product = match s.supply {
        SupplySpec::Passivity { .. } => Some(iqc.min_residual / 2.0),
        _ => None,
    };
    let pass = iqc.pass;
    let report = CheckReport { subject, supply: &s.supply, iqc, worst_inner_product, epsilon, pass };
    io::write_json(&cli.out.join("check_report.json"), &report)?;
    say(
        cli,
        format!(
            "{}: min residual {:.6} (relative {:.3e}) over {} probes: {}",
            report.subject,
            report.iqc.min_residual,
            report.iqc.min_relative_residual,
            report.iqc.probes,
            if pass { "pass" } else { "VIOLATION" }
        ),
    );
    Ok(if pass { Verdict::Pass } else { Verdict::Violation })
}

// --- fit --------------------------------------------------------------------

#[derive(Args)]
struct FitArgs {
    /// Dataset manifest or its directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Kernel spec as inline JSON or a file.
    #[arg(long)]
    kernel: Option<String>,
    /// `passivity`, `gain:<delta>`, `none`, or a JSON supply spec.
    #[arg(long)]
    supply: Option<String>,
    #[arg(long, conflicts_with = "rho")]
    gamma: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    scale_a: Option<f64>,
    #[arg(long)]
    scale_b: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct FitSettings {
    data: Option<PathBuf>,
    kernel: OperatorKernel,
    supply: Option<SupplySpec>,
    gamma: Option<f64>,
    rho: f64,
    scaling: Option<Scaling>,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            data: None,
            kernel: pipeline::default_kernel(),
            supply: Some(SupplySpec::Passivity { m: None, p: None }),
            gamma: None,
            rho: 0.99,
            scaling: None,
        }
    }
}

#[derive(Serialize)]
struct FitReport {
    gamma: f64,
    rkhs_norm: f64,
    empirical_risk: f64,
    tuned: bool,
    at_floor: bool,
    nonexpansive_certificate: iqc_sysid::Certificate,
    bounded_certificate: iqc_sysid::Certificate,
    causal: bool,
    warnings: Vec<String>,
}

fn fit(cli: &Cli, a: &FitArgs) -> Result<Verdict> {
    let mut s: FitSettings = load_config(cli)?;
    if a.data.is_some() {
        s.data = a.data.clone();
    }
    if let Some(k) = &a.kernel {
        s.kernel = json_arg(k)?;
    }
    match a.supply.as_deref() {
        Some("none") => s.supply = None,
        Some(x) => s.supply = Some(supply_arg(x)?),
        None => {}
    }
    if a.gamma.is_some() {
        s.gamma = a.gamma;
    }
    if let Some(r) = a.rho {
        s.rho = r;
        s.gamma = None;
    }
    if let Some(sc) = scaling_of(a.scale_a, a.scale_b)? {
        s.scaling = Some(sc);
    }
    write_resolved(cli, &s)?;
    let Some(data_path) = &s.data else { bail!("no dataset given (use --data)") };
    let mut data = io::read_dataset(data_path)?;
    if let Some(sc) = s.scaling {
        data = sc.apply(&data)?;
    }
    if let Some(spec) = &s.supply {
        let factors = spec.build(data.input_dim(), data.output_dim())?.factor()?;
        data = supply::scatter_dataset(&data, &factors)?;
    }
    let (model, tuned, at_floor) = match s.gamma {
        Some(g) => (rkhs::fit_with(&s.kernel, &data, g, FitOptions::default())?, false, false),
        None => {
            let t = rkhs::tune_gamma(&s.kernel, &data, s.rho)?;
            (t.model, true, t.at_floor)
        }
    };
    let mut warnings = Vec::new();
    let cert = s.kernel.certify_nonexpansive();
    if !cert.is_proven() {
        warnings.push("kernel is not certified nonexpansive; the fit cannot be simulated as a contraction".into());
    }
    if model.rkhs_norm() >= 1.0 {
        warnings.push(format!("RKHS norm {} is not below 1", model.rkhs_norm()));
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let report = FitReport {
        gamma: model.gamma(),
        rkhs_norm: model.rkhs_norm(),
        empirical_risk: rkhs::empirical_risk(&model, &data)?,
        tuned,
        at_floor,
        nonexpansive_certificate: cert,
        bounded_certificate: s.kernel.certify_bounded(),
        causal: s.kernel.is_causal(),
        warnings,
    };
    let bundle = ModelBundle { model, targets: data.outputs().to_vec(), supply: s.supply.clone(), scaling: s.scaling };
    let manifest = io::save_model(&cli.out.join("model"), &bundle)?;
    io::write_json(&cli.out.join("fit_report.json"), &report)?;
    say(cli, format!("gamma {:.6e}, RKHS norm {:.6}; model written to {}", report.gamma, report.rkhs_norm, manifest.display()));
    Ok(Verdict::Pass)
}

// --- simulate ---------------------------------------------------------------

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Input signal CSVs in raw units.
    #[arg(long = "input", num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Constant input level, simulated on the model's grid; repeatable.
    #[arg(long = "constant", allow_hyphen_values = true)]
    constants: Vec<f64>,
    #[arg(long)]
    picard_rel_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct SimulateSettings {
    model: Option<PathBuf>,
    inputs: Vec<PathBuf>,
    constants: Vec<f64>,
    picard_rel_tol: f64,
    max_iter: usize,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            model: None,
            inputs: Vec::new(),
            constants: Vec::new(),
            picard_rel_tol: iqc_sysid::inversion::DEFAULT_REL_TOL,
            max_iter: iqc_sysid::inversion::DEFAULT_MAX_ITER,
        }
    }
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<Verdict> {
    let mut s: SimulateSettings = load_config(cli)?;
    if a.model.is_some() {
        s.model = a.model.clone();
    }
    if !a.inputs.is_empty() {
        s.inputs = a.inputs.clone();
    }
    if !a.constants.is_empty() {
        s.constants = a.constants.clone();
    }
    s.picard_rel_tol = a.picard_rel_tol.unwrap_or(s.picard_rel_tol);
    s.max_iter = a.max_iter.unwrap_or(s.max_iter);
    write_resolved(cli, &s)?;
    let Some(model_dir) = &s.model else { bail!("no model given (use --model)") };
    if s.inputs.is_empty() && s.constants.is_empty() {
        bail!("no inputs given (use --input or --constant)");
    }
    let bundle = io::load_model(model_dir)?;
    let model = bundle.model;
    let grid = *model.centers()[0].grid();
    let (m, p) = (model.input_dim(), model.output_dim());
    let spec = bundle.supply.clone().unwrap_or(SupplySpec::Passivity { m: None, p: None });
    let factors = spec.build(m, p)?.factor()?;
    let scaled = contraction_margin(model, &factors)?;
    let scaling = bundle.scaling.unwrap_or_else(Scaling::identity);
    let options = PicardOptions { rel_tol: s.picard_rel_tol, max_iter: s.max_iter, ..Default::default() };

    let mut named: Vec<(String, Signal)> = Vec::new();
    for path in &s.inputs {
        named.push((path.display().to_string(), io::read_signal_csv(path, None)?));
    }
    for &c in &s.constants {
        named.push((format!("constant {c}"), Signal::constant(grid, m, c)?));
    }
    let mut logs = Vec::new();
    for (k, (name, u)) in named.iter().enumerate() {
        let sim = scaled.simulate(&scaling.scale_input(u), options)?;
        let y = scaling.unscale_output(&sim.y);
        let file = format!("sim_{k:03}.csv");
        io::write_simulation_csv(&cli.out.join(&file), u, &y)?;
        logs.push(SimulationLog {
            input: name.clone(),
            output: file,
            epsilon: sim.epsilon,
            iterations: sim.iterations,
            residual: sim.residual,
        });
    }
    io::write_json(&cli.out.join("simulation_log.json"), &logs)?;
    say(cli, format!("simulated {} inputs (epsilon {:.6})", logs.len(), scaled.epsilon()));
    Ok(Verdict::Pass)
}

// --- reproduce --------------------------------------------------------------

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long, conflicts_with = "gamma")]
    rho: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Number of random probe pairs for the monotonicity check.
    #[arg(long)]
    probes: Option<usize>,
}

fn reproduce(cli: &Cli, a: &ReproduceArgs) -> Result<Verdict> {
    let mut s: ReproduceConfig = load_config(cli)?;
    if let Some(r) = a.rho {
        s.rho = r;
        s.gamma = None;
    }
    if a.gamma.is_some() {
        s.gamma = a.gamma;
    }
    s.probes = a.probes.unwrap_or(s.probes);
    s.seed = cli.seed.unwrap_or(s.seed);
    write_resolved(cli, &s)?;
    let report = pipeline::reproduce(&s, Some(&cli.out))?;
    say(cli, report.to_markdown());
    Ok(if report.properties_pass() { Verdict::Pass } else { Verdict::Violation })
}

// --- sweep-gamma ------------------------------------------------------------

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    supply: Option<String>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    scale_a: Option<f64>,
    #[arg(long)]
    scale_b: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct SweepSettings {
    data: Option<PathBuf>,
    kernel: OperatorKernel,
    supply: Option<SupplySpec>,
    scaling: Option<Scaling>,
    lo: f64,
    hi: f64,
    count: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            data: None,
            kernel: pipeline::default_kernel(),
            supply: Some(SupplySpec::Passivity { m: None, p: None }),
            scaling: None,
            lo: 1e-6,
            hi: 1e2,
            count: 33,
        }
    }
}

fn sweep(cli: &Cli, a: &SweepArgs) -> Result<Verdict> {
    let mut s: SweepSettings = load_config(cli)?;
    if a.data.is_some() {
        s.data = a.data.clone();
    }
    if let Some(k) = &a.kernel {
        s.kernel = json_arg(k)?;
    }
    match a.supply.as_deref() {
        Some("none") => s.supply = None,
        Some(x) => s.supply = Some(supply_arg(x)?),
        None => {}
    }
    if let Some(sc) = scaling_of(a.scale_a, a.scale_b)? {
        s.scaling = Some(sc);
    }
    s.lo = a.lo.unwrap_or(s.lo);
    s.hi = a.hi.unwrap_or(s.hi);
    s.count = a.count.unwrap_or(s.count);
    write_resolved(cli, &s)?;
    let Some(data_path) = &s.data else { bail!("no dataset given (use --data)") };
    if !(s.lo > 0.0 && s.hi >= s.lo && s.count > 0) {
        bail!("need 0 < lo <= hi and count > 0");
    }
    let mut data = io::read_dataset(data_path)?;
    if let Some(sc) = s.scaling {
        data = sc.apply(&data)?;
    }
    if let Some(spec) = &s.supply {
        let factors = spec.build(data.input_dim(), data.output_dim())?.factor()?;
        data = supply::scatter_dataset(&data, &factors)?;
    }
    let points = rkhs::sweep_gamma(&s.kernel, &data, &rkhs::log_grid(s.lo, s.hi, s.count))?;
    io::write_sweep_csv(&cli.out.join("sweep.csv"), &points)?;
    say(cli, format!("wrote {} sweep points", points.len()));
    Ok(Verdict::Pass)
}
