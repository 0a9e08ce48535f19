//! Command-line front end.
//!
//! Exit codes: 0 success, 2 unparseable input, 3 validation failure,
//! 4 conflicting or missing clip flags.

mod frame_file;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::divergence::{self, DivergenceOrder, GaussianSpec, InfluenceRecord};
use crate::error::Error;
use crate::model::{self, ModelSpec, PopulationFrame, Unit};
use crate::risk::{self, RiskReport};
use crate::robust::{self, RobustConfig, Scaling};
use crate::sim::{self, SimConfig};

pub use frame_file::read_frame;

/// Environment variable overriding the simulation seed.
pub const SEED_ENV: &str = "ROBUST_FPS_SEED";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn parse(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::validation(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "robust-fps", version, about = "Outlier-resistant finite population mean estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classical and robust estimates, model MSE and influence diagnostics.
    Estimate(EstimateArgs),
    /// Solve the clipping constant for an excess-risk budget.
    Calibrate(CalibrateArgs),
    /// Per-unit residuals and predictive influence.
    Diagnose(DiagnoseArgs),
    /// Monte Carlo study driven by a JSON config.
    Simulate(SimulateArgs),
    /// Power divergence between two multivariate normals.
    Divergence(DivergenceArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelKind {
    Ratio,
    Royall,
    Ht,
    Custom,
}

#[derive(ValueEnum, Clone, Copy, Debug, Default)]
enum ScalingArg {
    #[default]
    Paper,
    Chambers,
}

#[derive(Args, Debug)]
struct FrameArgs {
    /// Frame CSV.
    #[arg(long)]
    frame: PathBuf,
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Residual sd multiplier for the ratio model.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    sigma: f64,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    frame: FrameArgs,
    /// Clipping constant C.
    #[arg(long = "c", allow_negative_numbers = true)]
    c: Option<f64>,
    /// Excess-risk budget M; C is solved from it.
    #[arg(long, allow_negative_numbers = true)]
    max_excess: Option<f64>,
    #[arg(long, value_enum, default_value = "paper")]
    scaling: ScalingArg,
    /// Divergence order for the diagnostics.
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[command(flatten)]
    frame: FrameArgs,
    #[arg(long, allow_negative_numbers = true)]
    max_excess: f64,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[command(flatten)]
    frame: FrameArgs,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    lambda: f64,
    /// Flag units with |r| above this value.
    #[arg(long = "c", allow_negative_numbers = true)]
    c: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Writes `<prefix>.json` and `<prefix>.csv`.
    #[arg(long)]
    out_prefix: PathBuf,
    /// Overrides both the environment and the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct DivergenceArgs {
    /// Comma-separated mean, or @FILE.
    #[arg(long, allow_hyphen_values = true)]
    mu1: String,
    /// Rows separated by `;`, entries by `,`, or @FILE.
    #[arg(long, allow_hyphen_values = true)]
    cov1: String,
    #[arg(long, allow_hyphen_values = true)]
    mu2: String,
    #[arg(long, allow_hyphen_values = true)]
    cov2: String,
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    /// Average both orientations.
    #[arg(long)]
    symmetrized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSection {
    pub theta_hat_r: f64,
    pub ybar_p_r: f64,
    pub c_used: f64,
    pub clipped_units: Vec<String>,
    pub scaling: Scaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    #[serde(flatten)]
    pub record: InfluenceRecord,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub flagged: Option<bool>,
}

/// The JSON document written by `estimate` and `diagnose`. Carries the
/// model constants and observations it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub model: ModelInfo,
    pub n: usize,
    #[serde(rename = "N")]
    pub population_size: usize,
    pub classical: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub robust: Option<RobustSection>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub risk: Option<RiskReport>,
    pub lambda: f64,
    pub diagnostics: Vec<Diagnostic>,
    pub units: Vec<Unit>,
}

impl Report {
    /// The frame embedded in the report.
    pub fn frame(&self) -> Result<PopulationFrame, Error> {
        PopulationFrame::new(self.units.clone())
    }
}

fn model_spec(args: &FrameArgs) -> ModelSpec {
    match args.model {
        ModelKind::Ratio => ModelSpec::Ratio { sigma: args.sigma },
        ModelKind::Royall => ModelSpec::Royall,
        ModelKind::Ht => ModelSpec::HorvitzThompson,
        ModelKind::Custom => ModelSpec::Custom,
    }
}

fn model_info(spec: &ModelSpec) -> ModelInfo {
    let (family, sigma) = match *spec {
        ModelSpec::Ratio { sigma } => ("ratio", Some(sigma)),
        ModelSpec::Royall => ("royall", None),
        ModelSpec::HorvitzThompson => ("horvitz_thompson", None),
        ModelSpec::Custom => ("custom", None),
    };
    ModelInfo {
        family: family.to_string(),
        sigma,
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::parse(format!("cannot open {}: {e}", path.display())))
}

fn load_frame(args: &FrameArgs) -> Result<(ModelSpec, PopulationFrame), CliError> {
    let spec = model_spec(args);
    let raw = read_frame(open(&args.frame)?, &spec)?;
    let frame = model::build_model(&raw, &spec)?;
    Ok((spec, frame))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError { code: 1, message: format!("cannot write {}: {e}", path.display()) })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn diagnostics(
    frame: &PopulationFrame,
    order: DivergenceOrder,
    flag_at: Option<f64>,
) -> Result<Vec<Diagnostic>, Error> {
    Ok(divergence::influence(frame, order)?
        .into_iter()
        .map(|record| Diagnostic {
            flagged: flag_at.map(|c| record.r.abs() > c),
            record,
        })
        .collect())
}

fn cmd_estimate(args: &EstimateArgs) -> Result<Report, CliError> {
    let mode = match (args.c, args.max_excess) {
        (Some(c), None) => robust::ClipMode::Fixed(c),
        (None, Some(m)) => robust::ClipMode::ExcessBudget(m),
        (Some(_), Some(_)) => {
            return Err(CliError::conflict("--c and --max-excess are mutually exclusive"))
        }
        (None, None) => return Err(CliError::conflict("one of --c or --max-excess is required")),
    };
    let order = DivergenceOrder::new(args.lambda)?;
    let (spec, frame) = load_frame(&args.frame)?;
    let config = RobustConfig {
        mode,
        scaling: match args.scaling {
            ScalingArg::Paper => Scaling::PooledV,
            ScalingArg::Chambers => Scaling::ChambersSigma,
        },
    };
    let classical = model::classical_estimate(&frame)?;
    let est = robust::robust_estimate(&frame, &config)?;
    let informative = frame.sample_size() >= 2 && !frame.is_census();
    let (risk, diagnostics) = if informative {
        (
            Some(risk::mse_theorem2(&frame, est.c_used)?),
            diagnostics(&frame, order, Some(est.c_used))?,
        )
    } else {
        (None, Vec::new())
    };
    Ok(Report {
        model: model_info(&spec),
        n: frame.sample_size(),
        population_size: frame.population_size(),
        classical,
        robust: Some(RobustSection {
            theta_hat_r: est.theta_hat_r,
            ybar_p_r: est.ybar_p_r,
            c_used: est.c_used,
            clipped_units: est.clipped_units,
            scaling: est.scaling,
        }),
        risk,
        lambda: args.lambda,
        diagnostics,
        units: frame.units().to_vec(),
    })
}

/// `x` rounded to 12 significant digits, printed as the shortest decimal.
fn twelve_digits(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<f64, CliError> {
    if !(args.max_excess.is_finite() && args.max_excess > 0.0) {
        return Err(CliError::validation(format!(
            "--max-excess must be positive and finite, got {}",
            args.max_excess
        )));
    }
    let (_, frame) = load_frame(&args.frame)?;
    Ok(risk::calibrate_c(&frame, args.max_excess)?)
}

fn cmd_diagnose(args: &DiagnoseArgs) -> Result<Report, CliError> {
    let order = DivergenceOrder::new(args.lambda)?;
    if let Some(c) = args.c {
        if c.is_nan() || c < 0.0 {
            return Err(CliError::validation(format!("--c must be nonnegative, got {c}")));
        }
    }
    let (spec, frame) = load_frame(&args.frame)?;
    Ok(Report {
        model: model_info(&spec),
        n: frame.sample_size(),
        population_size: frame.population_size(),
        classical: model::classical_estimate(&frame)?,
        robust: None,
        risk: None,
        lambda: args.lambda,
        diagnostics: diagnostics(&frame, order, args.c)?,
        units: frame.units().to_vec(),
    })
}

/// Parses a simulation config, reporting schema violations with a JSON
/// pointer to the offending field.
pub fn parse_sim_config(text: &str) -> Result<SimConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer: String = e
            .path()
            .iter()
            .map(|seg| match seg {
                serde_path_to_error::Segment::Seq { index } => format!("/{index}"),
                serde_path_to_error::Segment::Map { key } => format!("/{key}"),
                serde_path_to_error::Segment::Enum { variant } => format!("/{variant}"),
                serde_path_to_error::Segment::Unknown => "/?".to_string(),
            })
            .collect();
        let pointer = if pointer.is_empty() { "/".to_string() } else { pointer };
        CliError::parse(format!("config schema violation at {pointer}: {}", e.inner()))
    })
}

fn resolve_seed(flag: Option<u64>, config_seed: u64) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::parse(format!("{SEED_ENV}=`{v}` is not a 64-bit unsigned integer"))),
        Err(_) => Ok(config_seed),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config = parse_sim_config(&text)?;
    config.seed = resolve_seed(args.seed, config.seed)?;
    config.validate()?;

    let result = run_with_threads(args.threads, || sim::empirical_risk(&config))??;

    let mut json_path = args.out_prefix.clone().into_os_string();
    json_path.push(".json");
    let mut csv_path = args.out_prefix.clone().into_os_string();
    csv_path.push(".csv");
    write_file(Path::new(&json_path), to_json(&result).as_bytes())?;
    write_file(Path::new(&csv_path), result.to_csv().as_bytes())?;
    Ok(())
}

#[cfg(feature = "parallel")]
fn run_with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::validation("--threads must be at least 1")),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError { code: 1, message: e.to_string() })?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn run_with_threads<T>(_threads: Option<usize>, f: impl FnOnce() -> T) -> Result<T, CliError> {
    Ok(f())
}

fn inline_or_file(arg: &str) -> Result<String, CliError> {
    match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::parse(format!("cannot read {path}: {e}"))),
        None => Ok(arg.to_string()),
    }
}

fn parse_numbers(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::parse(format!("{what}: cannot parse `{s}` as a number")))
        })
        .collect()
}

fn parse_gaussian(mu: &str, cov: &str, mu_name: &str, cov_name: &str) -> Result<GaussianSpec, CliError> {
    let mean = parse_numbers(&inline_or_file(mu)?, mu_name)?;
    let rows: Vec<Vec<f64>> = inline_or_file(cov)?
        .split([';', '\n'])
        .filter(|r| !r.trim().is_empty())
        .map(|r| parse_numbers(r, cov_name))
        .collect::<Result<_, _>>()?;
    let p = mean.len();
    if p == 0 {
        return Err(CliError::parse(format!("{mu_name}: empty vector")));
    }
    if rows.len() != p || rows.iter().any(|r| r.len() != p) {
        return Err(CliError::validation(format!(
            "{cov_name} must be {p}x{p} to match {mu_name}"
        )));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    GaussianSpec::named(DVector::from_vec(mean), DMatrix::from_row_slice(p, p, &flat), cov_name)
        .map_err(CliError::from)
}

fn cmd_divergence(args: &DivergenceArgs) -> Result<f64, CliError> {
    let f1 = parse_gaussian(&args.mu1, &args.cov1, "mu1", "cov1")?;
    let f2 = parse_gaussian(&args.mu2, &args.cov2, "mu2", "cov2")?;
    let order = DivergenceOrder::new(args.lambda)?;
    let value = if args.symmetrized {
        divergence::symmetrized_divergence(&f1, &f2, order)?
    } else {
        divergence::divergence(&f1, &f2, order)?
    };
    Ok(value)
}

fn dispatch(command: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError { code: 1, message: e.to_string() };
    match command {
        Command::Estimate(args) => {
            let report = cmd_estimate(args)?;
            write_file(&args.out, to_json(&report).as_bytes())
        }
        Command::Calibrate(args) => {
            let c = cmd_calibrate(args)?;
            writeln!(out, "{}", twelve_digits(c)).map_err(io)
        }
        Command::Diagnose(args) => {
            let report = cmd_diagnose(args)?;
            match &args.out {
                Some(path) => write_file(path, to_json(&report).as_bytes()),
                None => out.write_all(to_json(&report).as_bytes()).map_err(io),
            }
        }
        Command::Simulate(args) => cmd_simulate(args),
        Command::Divergence(args) => {
            let d = cmd_divergence(args)?;
            writeln!(out, "{d}").map_err(io)
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match dispatch(&cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}
