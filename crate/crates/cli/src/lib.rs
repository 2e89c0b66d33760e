//! Front end for the `geodissip` binary: `simulate`, `verify` and `eval`.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use geodissip::control;
use geodissip::integrate::{self, ControlMode};
use geodissip::leafgeom;
use geodissip::verify::{self, VerifyConfig};
use geodissip::ChartPoint;

use config::{ConfigError, Format, ModelParams, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "geodissip", version, about = "Conservative control fields and dissipative flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a configured flow and write its trajectory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides output.format from the config.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Run seeded property suites.
    Verify {
        /// formulations, gram, exterior-identities, leaf, models or all.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Instances per suite (defaults depend on the suite).
        #[arg(long)]
        count: Option<usize>,
        /// Write the JSON report here ("-" for stdout).
        #[arg(long)]
        json: Option<PathBuf>,
        /// Either a number applied to every property or name=value.
        #[arg(long)]
        tolerance: Vec<String>,
    },
    /// Print v0, T, the leaf projector or the conserved Gram matrix at a point.
    Eval {
        #[arg(long)]
        model: String,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, value_enum)]
        what: What,
        /// Model parameter as key=value (gamma, lambda, b, inertia, axisymmetric).
        #[arg(long = "param")]
        params: Vec<String>,
        /// Run configuration supplying a custom problem.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum What {
    V0,
    #[value(name = "T")]
    T,
    Projector,
    Sigma,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match cli.command {
        Command::Simulate { config, out, format } => simulate(&config, &out, format, stderr),
        Command::Verify { suite, seed, count, json, tolerance } => {
            verify_cmd(&suite, seed, count, json.as_ref(), &tolerance, stdout, stderr)
        }
        Command::Eval { model, point, what, params, config } => {
            eval(&model, &point, what, &params, config.as_ref(), stdout, stderr)
        }
    }
}

fn config_failure(stderr: &mut dyn Write, e: &ConfigError) -> i32 {
    let _ = writeln!(stderr, "error: {e}");
    EXIT_CONFIG
}

fn load_config(path: &PathBuf) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    config::parse_config(&text)
}

fn model_name(m: &config::ResolvedModel) -> &'static str {
    match m {
        config::ResolvedModel::LandauLifschitz(_) => config::LANDAU_LIFSCHITZ,
        config::ResolvedModel::RigidBody(_) => config::RIGID_BODY,
        config::ResolvedModel::Custom => config::CUSTOM,
    }
}

pub fn simulate(path: &PathBuf, out: &PathBuf, format: Option<Format>, stderr: &mut dyn Write) -> i32 {
    let cfg = match load_config(path) {
        Ok(c) => c,
        Err(e) => return config_failure(stderr, &e),
    };
    let resolved = match cfg.resolve() {
        Ok(r) => r,
        Err(e) => return config_failure(stderr, &e),
    };
    let _ = writeln!(stderr, "model: {}", model_name(&resolved.model));
    for d in &resolved.defaults {
        let _ = writeln!(stderr, "default: {d}");
    }
    let format = format.unwrap_or(cfg.output.format);
    let (traj, failure) = match integrate::integrate(&resolved.spec) {
        Ok(t) => (t, None),
        Err(f) => (f.partial.clone(), Some(f)),
    };
    let written = fs::File::create(out).and_then(|f| {
        output::write_trajectory(&traj, format, cfg.output.stride, BufWriter::new(f))
    });
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write {}: {e}", out.display());
        return EXIT_RUNTIME;
    }
    match failure {
        Some(f) => {
            let _ = writeln!(stderr, "error: integration failed: {f}");
            EXIT_RUNTIME
        }
        None => EXIT_OK,
    }
}

fn parse_tolerances(items: &[String], cfg: &mut VerifyConfig) -> Result<(), ConfigError> {
    for item in items {
        match item.split_once('=') {
            Some((name, v)) => {
                let v = v.parse::<f64>().map_err(|e| ConfigError::new("tolerance", format!("{item}: {e}")))?;
                cfg.overrides.insert(name.to_string(), v);
            }
            None => {
                let v = item.parse::<f64>().map_err(|e| ConfigError::new("tolerance", format!("{item}: {e}")))?;
                cfg.tolerance = Some(v);
            }
        }
    }
    Ok(())
}

pub fn verify_cmd(
    suite: &str,
    seed: u64,
    count: Option<usize>,
    json: Option<&PathBuf>,
    tolerance: &[String],
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let suites = match verify::parse_suites(suite) {
        Ok(s) => s,
        Err(e) => return config_failure(stderr, &ConfigError::new("suite", e.to_string())),
    };
    let mut cfg = VerifyConfig::new(suites, seed);
    cfg.count = count;
    if let Err(e) = parse_tolerances(tolerance, &mut cfg) {
        return config_failure(stderr, &e);
    }
    let report = match verify::run(&cfg) {
        Ok(r) => r,
        Err(e @ geodissip::Error::InvalidParameter(_)) => {
            return config_failure(stderr, &ConfigError::new("", e.to_string()))
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_RUNTIME;
        }
    };
    // the text summary moves to stderr when stdout carries the JSON report
    let to_stdout = json.is_some_and(|p| p.as_os_str() == "-");
    let summary: &mut dyn Write = if to_stdout { &mut *stderr } else { &mut *stdout };
    let _ = writeln!(summary, "{report}");
    if let Some(path) = json {
        let text = report.to_json() + "\n";
        let res = if path.as_os_str() == "-" { stdout.write_all(text.as_bytes()) } else { fs::write(path, text) };
        if let Err(e) = res {
            let _ = writeln!(stderr, "error: cannot write report: {e}");
            return EXIT_RUNTIME;
        }
    }
    if report.passed {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    }
}

fn parse_list(s: &str, field: &str) -> Result<Vec<f64>, ConfigError> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| ConfigError::new(field, format!("'{v}': {e}"))))
        .collect()
}

fn triple(s: &str, field: &str) -> Result<[f64; 3], ConfigError> {
    let v = parse_list(s, field)?;
    v.try_into().map_err(|v: Vec<f64>| ConfigError::new(field, format!("expected 3 values, found {}", v.len())))
}

pub fn parse_params(items: &[String]) -> Result<ModelParams, ConfigError> {
    let mut p = ModelParams::default();
    for item in items {
        let (key, value) =
            item.split_once('=').ok_or_else(|| ConfigError::new("param", format!("expected key=value, got '{item}'")))?;
        let one = |field: &str| -> Result<f64, ConfigError> {
            value.trim().parse::<f64>().map_err(|e| ConfigError::new(field, format!("'{value}': {e}")))
        };
        match key.trim() {
            "gamma" => p.gamma = Some(one("param gamma")?),
            "lambda" => p.lambda = Some(one("param lambda")?),
            "b" => p.b = Some(triple(value, "param b")?),
            "inertia" => p.inertia = Some(triple(value, "param inertia")?),
            "axisymmetric" => {
                p.axisymmetric = value
                    .trim()
                    .parse::<bool>()
                    .map_err(|e| ConfigError::new("param axisymmetric", e.to_string()))?
            }
            other => return Err(ConfigError::new("param", format!("unknown parameter '{other}'"))),
        }
    }
    Ok(p)
}

pub fn eval(
    model: &str,
    point: &str,
    what: What,
    params: &[String],
    config: Option<&PathBuf>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let setup = || -> Result<(geodissip::ControlProblem, ChartPoint), ConfigError> {
        let params = parse_params(params)?;
        let mut defaults = Vec::new();
        let resolved = config::build_model(model, &params, &mut defaults)?;
        let custom = match (&resolved, config) {
            (config::ResolvedModel::Custom, Some(path)) => load_config(path)?.custom,
            (config::ResolvedModel::Custom, None) => {
                return Err(ConfigError::new("config", "model custom needs --config"))
            }
            _ => None,
        };
        let (problem, _) = config::model_problem(&resolved, custom.as_ref())?;
        let coords = parse_list(point, "point")?;
        if coords.len() != problem.dim() {
            return Err(ConfigError::new(
                "point",
                format!("expected {} coordinates, found {}", problem.dim(), coords.len()),
            ));
        }
        let x = ChartPoint::new(coords).map_err(|e| ConfigError::new("point", e.to_string()))?;
        Ok((problem, x))
    };
    let (problem, x) = match setup() {
        Ok(v) => v,
        Err(e) => return config_failure(stderr, &e),
    };
    let text = match what {
        What::V0 => control::v0(&problem, &x).map(|v| output::format_vector(v.as_slice())),
        What::T => leafgeom::tensor_t(&problem, &x).map(|t| output::format_matrix(t.components())),
        What::Projector => leafgeom::projector(&problem, &x).map(|m| output::format_matrix(&m)),
        What::Sigma => problem.conserved_frame(&x).map(|f| {
            let labels: Vec<usize> = (0..problem.k()).collect();
            output::format_matrix(&f.sigma(&labels, &labels).entries)
        }),
    };
    match text {
        Ok(t) => {
            let _ = writeln!(stdout, "{t}");
            EXIT_OK
        }
        Err(geodissip::Error::OriginExcluded | geodissip::Error::NonFinite(_) | geodissip::Error::DimensionMismatch { .. }) => {
            config_failure(stderr, &ConfigError::new("point", "point outside the model's domain"))
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

/// Entry point used by the binary.
pub fn main_with(args: impl IntoIterator<Item = OsString>) -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = run(args, &mut out, &mut err);
    let _ = out.flush();
    code
}

/// Exact round trip helper for tests and tooling.
pub fn reread(path: &PathBuf, format: Format, mode: ControlMode) -> io::Result<integrate::Trajectory> {
    let f = io::BufReader::new(fs::File::open(path)?);
    match format {
        Format::Csv => output::read_csv(f, mode),
        Format::Jsonl => output::read_jsonl(f, mode),
    }
}
