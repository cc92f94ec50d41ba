//! `semnet` command-line front-end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use semnet_core::calibration::{estimate_cycles, fit_qos_model, read_samples};
use semnet_core::experiment::{
    oracle_check, random_subseed, run_sweep, solve_with_method, Method, RunManifest, SweepKind, SweepOptions, SweepSpec,
};
use semnet_core::oracle::OracleOptions;
use semnet_core::{check_original, Config, Error, ProblemSpec};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_DISAGREE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "semnet",
    version,
    about = "Energy-aware semantic offloading: solves, sweeps, oracle checks, calibration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted (sweeps default to sweep-<kind>.csv).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Scenario seed (base seed for sweeps); the config seed when omitted.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Repetitions per threshold.
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated subset of proposed,min_distance,random.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Comma-separated thresholds, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// The threshold held fixed (QoS for a delay sweep, delay for a QoS sweep).
    #[arg(long)]
    fixed: Option<f64>,
    /// Record wall-clock solve times in the solve_ms column.
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and print the solution as JSON.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10.0)]
        tmax: f64,
        #[arg(long, default_value_t = 0.8)]
        qmin: f64,
        #[arg(long, default_value = "proposed")]
        method: String,
    },
    /// Sweep the delay threshold.
    SweepTmax(SweepArgs),
    /// Sweep the QoS threshold.
    SweepQmin(SweepArgs),
    /// Compare the solver with exhaustive search on small scenarios.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        users: usize,
        #[arg(long, default_value_t = 2)]
        edges: usize,
        #[arg(long, default_value_t = 10)]
        instances: usize,
        #[arg(long, default_value_t = 5.0)]
        tmax: f64,
        #[arg(long, default_value_t = 0.8)]
        qmin: f64,
    },
    /// Fit the QoS line and cycle counts from a samples CSV.
    Calibrate {
        /// CSV with columns delta, accuracy and optionally t_user_s, t_edge_s, f_hz.
        #[arg(long, value_name = "PATH")]
        samples: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Domain(_) | Error::Calibration(_) | Error::OracleRefused(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        };
        Failure::new(code, e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    Ok(match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    })
}

fn threads() -> Result<Option<usize>, Failure> {
    match std::env::var("SEMNET_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| {
                Failure::new(
                    EXIT_CONFIG,
                    format!("SEMNET_THREADS must be a positive integer, got {v:?}"),
                )
            }),
        Err(_) => Ok(None),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => {
            fs::write(p, text).map_err(|e| Failure::new(EXIT_FAILURE, format!("cannot write {}: {e}", p.display())))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

fn solve_cmd(common: &Common, tmax: f64, qmin: f64, method: &str) -> Outcome {
    let config = load_config(common.config.as_deref())?;
    let method: Method = method.parse()?;
    let seed = common.seed.unwrap_or(config.seed);
    let spec = ProblemSpec::new(tmax, qmin, config.qos_model()?).map_err(infeasible_single)?;
    let scenario = config.scenario::<f64>(seed)?;
    let solution = solve_with_method(&scenario, &spec, method, random_subseed(seed, 0)).map_err(infeasible_single)?;
    let report = check_original(&scenario, &spec, &solution.decisions)?;
    let value = json!({
        "method": method,
        "t_max_s": tmax,
        "q_min": qmin,
        "seed": seed,
        "feasible": report.feasible,
        "violations": report.violations,
        "solution": solution,
        "manifest": RunManifest::for_seed(&config, seed),
    });
    emit(common.out.as_deref(), &pretty(&value))
}

fn infeasible_single(e: Error) -> Failure {
    if e.is_infeasible() {
        Failure::new(EXIT_INFEASIBLE, format!("infeasible: {e}"))
    } else {
        e.into()
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn sweep_cmd(kind: SweepKind, args: &SweepArgs) -> Outcome {
    let config = load_config(args.common.config.as_deref())?;
    let mut sweep = match kind {
        SweepKind::Tmax => SweepSpec::tmax_default(),
        SweepKind::Qmin => SweepSpec::qmin_default(),
    };
    sweep.base_seed = args.common.seed.unwrap_or(config.seed);
    if let Some(r) = args.reps {
        sweep.repetitions = r;
    }
    if let Some(v) = &args.values {
        sweep.values = v.clone();
    }
    if let Some(f) = args.fixed {
        sweep.fixed_other = f;
    }
    if let Some(m) = &args.methods {
        sweep.methods = m.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    }
    let options = SweepOptions {
        threads: threads()?,
        timing: args.timing,
    };
    let result = run_sweep(&config, &sweep, &options)?;

    let out = args
        .common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("sweep-{}.csv", kind.as_str())));
    let io = |e: Error| Failure::new(EXIT_FAILURE, format!("cannot write {}: {e}", out.display()));
    let file = |p: &Path| fs::File::create(p).map_err(|e| io(e.into()));
    result.write_csv(file(&out)?).map_err(io)?;
    result
        .write_summary_csv(file(&with_suffix(&out, ".summary.csv"))?)
        .map_err(io)?;
    fs::write(
        with_suffix(&out, ".manifest.json"),
        RunManifest::for_sweep(&config, &sweep).to_json_pretty(),
    )
    .map_err(|e| io(e.into()))?;

    for s in result.summary.iter().filter(|s| s.all_infeasible) {
        eprintln!(
            "warning: every repetition infeasible for {} at {} = {}",
            s.method,
            kind.as_str(),
            s.threshold
        );
    }
    Ok(())
}

fn oracle_cmd(common: &Common, users: usize, edges: usize, instances: usize, tmax: f64, qmin: f64) -> Outcome {
    let mut config = load_config(common.config.as_deref())?;
    config.population.n_users = users;
    config.population.n_edges = edges;
    if config.topology.is_some() {
        return Err(Failure::new(
            EXIT_CONFIG,
            "oracle-check draws random scenarios; remove the explicit topology",
        ));
    }
    let spec = ProblemSpec::new(tmax, qmin, config.qos_model()?)?;
    let report = oracle_check(
        &config,
        &spec,
        common.seed.unwrap_or(config.seed),
        instances,
        &OracleOptions::default(),
    )?;
    emit(
        common.out.as_deref(),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    if report.all_agree {
        Ok(())
    } else {
        Err(Failure::new(EXIT_DISAGREE, "solver and oracle disagree beyond 1%"))
    }
}

fn calibrate_cmd(samples: &Path, out: Option<&Path>) -> Outcome {
    let data = read_samples::<f64>(samples)?;
    let fit = fit_qos_model(&data)?;
    let has_timing = data
        .iter()
        .all(|s| s.t_user_s.is_some() && s.t_edge_s.is_some() && s.f_hz.is_some());
    let cycles = if has_timing {
        Some(estimate_cycles(&data)?)
    } else {
        None
    };
    emit(out, &pretty(&json!({ "qos": fit, "cycles": cycles })))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve {
            common,
            tmax,
            qmin,
            method,
        } => solve_cmd(common, *tmax, *qmin, method),
        Command::SweepTmax(args) => sweep_cmd(SweepKind::Tmax, args),
        Command::SweepQmin(args) => sweep_cmd(SweepKind::Qmin, args),
        Command::OracleCheck {
            common,
            users,
            edges,
            instances,
            tmax,
            qmin,
        } => oracle_cmd(common, *users, *edges, *instances, *tmax, *qmin),
        Command::Calibrate { samples, out } => calibrate_cmd(samples, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
