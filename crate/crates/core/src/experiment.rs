//! Batch experiments: threshold sweeps over the three association methods,
//! single solves, and solver-versus-oracle agreement checks.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{min_distance_assignment, random_assignment};
use crate::error::{Error, Result};
use crate::oracle::{brute_force, OracleOptions};
use crate::problem::ProblemSpec;
use crate::scenario::config::Config;
use crate::scenario::Scenario;
use crate::solver::{assignment_from_x, solve, Solution, SolveOptions};

/// Relative solver/oracle gap accepted as agreement.
pub const ORACLE_AGREEMENT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    MinDistance,
    Random,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Proposed, Method::MinDistance, Method::Random];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::MinDistance => "min_distance",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "proposed" => Ok(Method::Proposed),
            "min_distance" | "min-distance" => Ok(Method::MinDistance),
            "random" => Ok(Method::Random),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Tmax,
    Qmin,
}

impl SweepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepKind::Tmax => "tmax",
            SweepKind::Qmin => "qmin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// Strictly increasing thresholds.
    pub values: Vec<f64>,
    /// The threshold held fixed (Q^min for a delay sweep, T^max for a QoS sweep).
    pub fixed_other: f64,
    pub repetitions: usize,
    pub methods: Vec<Method>,
    /// Repetition `r` uses scenario seed `base_seed + r`.
    pub base_seed: u64,
}

impl SweepSpec {
    /// Delay thresholds 1..=10 s at Q^min = 0.8.
    pub fn tmax_default() -> Self {
        SweepSpec {
            kind: SweepKind::Tmax,
            values: (1..=10).map(f64::from).collect(),
            fixed_other: 0.8,
            repetitions: 20,
            methods: Method::ALL.to_vec(),
            base_seed: 0,
        }
    }

    /// QoS thresholds 0.2..=0.9 and 0.9736 at T^max = 10 s.
    pub fn qmin_default() -> Self {
        let mut values: Vec<f64> = (2..=9).map(|i| f64::from(i) / 10.0).collect();
        values.push(0.9736);
        SweepSpec {
            kind: SweepKind::Qmin,
            values,
            fixed_other: 10.0,
            repetitions: 20,
            methods: Method::ALL.to_vec(),
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(
                "sweep values must be non-empty and strictly increasing".into(),
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        Ok(())
    }

    pub fn seed(&self, repetition: usize) -> u64 {
        self.base_seed.wrapping_add(repetition as u64)
    }

    pub fn problem(&self, threshold: f64, qos: &Config) -> Result<ProblemSpec<f64>> {
        let (t_max, q_min) = match self.kind {
            SweepKind::Tmax => (threshold, self.fixed_other),
            SweepKind::Qmin => (self.fixed_other, threshold),
        };
        ProblemSpec::new(t_max, q_min, qos.qos_model()?)
    }
}

/// Seed of the random baseline for one sweep point and repetition.
pub fn random_subseed(scenario_seed: u64, point: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = scenario_seed ^ (point as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Solves one instance with the given association method.
pub fn solve_with_method(
    scenario: &Scenario<f64>,
    spec: &ProblemSpec<f64>,
    method: Method,
    random_seed: u64,
) -> Result<Solution<f64>> {
    let options = match method {
        Method::Proposed => SolveOptions::default(),
        Method::MinDistance => SolveOptions::fixed(assignment_from_x(&min_distance_assignment(scenario))?),
        Method::Random => SolveOptions::fixed(assignment_from_x(&random_assignment(scenario, random_seed))?),
    };
    solve(scenario, spec, &options)
}

/// One line of the sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    pub sweep_kind: SweepKind,
    pub threshold: f64,
    pub seed: u64,
    pub feasible: bool,
    pub e_comp_user_j: Option<f64>,
    pub e_trans_j: Option<f64>,
    pub e_comp_edge_j: Option<f64>,
    pub total_j: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Wall-clock solve time; only filled when timing is requested.
    pub solve_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub sweep_kind: SweepKind,
    pub threshold: f64,
    pub runs: usize,
    pub feasible_runs: usize,
    pub all_infeasible: bool,
    pub mean_e_comp_user_j: Option<f64>,
    pub mean_e_trans_j: Option<f64>,
    pub mean_e_comp_edge_j: Option<f64>,
    pub mean_total_j: Option<f64>,
    pub std_total_j: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` lets the pool decide.
    pub threads: Option<usize>,
    /// Record wall-clock solve times (makes the CSV non-reproducible).
    pub timing: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Solutions aligned with `rows`; `None` where the run was infeasible.
    pub solutions: Vec<Option<Solution<f64>>>,
    /// Why each infeasible run failed, aligned with `rows`.
    pub failures: Vec<Option<Error>>,
    pub summary: Vec<SummaryRow>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_records(out, &self.rows)
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        write_records(out, &self.summary)
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8 csv")
    }

    pub fn summary_for(&self, method: Method) -> impl Iterator<Item = &SummaryRow> {
        self.summary.iter().filter(move |s| s.method == method)
    }
}

fn write_records<W: Write, R: Serialize>(out: W, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

struct Task {
    method: Method,
    point: usize,
    repetition: usize,
}

/// Runs every (method, threshold, repetition). Rows come out in that nesting order regardless of thread count.
pub fn run_sweep(config: &Config, sweep: &SweepSpec, options: &SweepOptions) -> Result<SweepResult> {
    sweep.validate()?;
    config.validate()?;
    let problems: Vec<std::result::Result<ProblemSpec<f64>, Error>> = sweep
        .values
        .iter()
        .map(|&v| match sweep.problem(v, config) {
            Err(e) if !e.is_infeasible() => Err(e),
            other => Ok(other),
        })
        .collect::<Result<_>>()?;
    let scenarios: Vec<Scenario<f64>> = (0..sweep.repetitions)
        .map(|r| config.scenario(sweep.seed(r)))
        .collect::<Result<_>>()?;

    let tasks: Vec<Task> = sweep
        .methods
        .iter()
        .flat_map(|&method| {
            (0..sweep.values.len()).flat_map(move |point| {
                (0..sweep.repetitions).map(move |repetition| Task {
                    method,
                    point,
                    repetition,
                })
            })
        })
        .collect();

    let run = |t: &Task| {
        let scenario = &scenarios[t.repetition];
        let seed = sweep.seed(t.repetition);
        let started = Instant::now();
        let outcome = problems[t.point]
            .clone()
            .and_then(|spec| solve_with_method(scenario, &spec, t.method, random_subseed(seed, t.point)));
        let ms = started.elapsed().as_secs_f64() * 1e3;
        let mut row = SweepRow {
            method: t.method,
            sweep_kind: sweep.kind,
            threshold: sweep.values[t.point],
            seed,
            feasible: false,
            e_comp_user_j: None,
            e_trans_j: None,
            e_comp_edge_j: None,
            total_j: None,
            iterations: 0,
            converged: false,
            solve_ms: options.timing.then_some(ms),
        };
        match outcome {
            Ok(sol) => {
                row.feasible = true;
                row.e_comp_user_j = Some(sol.energy.e_comp_user_j);
                row.e_trans_j = Some(sol.energy.e_trans_j);
                row.e_comp_edge_j = Some(sol.energy.e_comp_edge_j);
                row.total_j = Some(sol.energy.total_j);
                row.iterations = sol.iterations;
                row.converged = sol.converged;
                (row, Some(sol), None)
            }
            Err(e) => (row, None, Some(e)),
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let outcomes: Vec<_> = pool.install(|| tasks.par_iter().map(run).collect());

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut solutions = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::with_capacity(outcomes.len());
    for (row, sol, err) in outcomes {
        if let Some(e) = &err {
            if !e.is_infeasible() {
                return Err(e.clone());
            }
        }
        rows.push(row);
        solutions.push(sol);
        failures.push(err);
    }
    let summary = summarize(&rows, sweep);
    Ok(SweepResult {
        rows,
        solutions,
        failures,
        summary,
    })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summarize(rows: &[SweepRow], sweep: &SweepSpec) -> Vec<SummaryRow> {
    rows.chunks(sweep.repetitions)
        .map(|chunk| {
            let ok: Vec<&SweepRow> = chunk.iter().filter(|r| r.feasible).collect();
            let col = |f: fn(&SweepRow) -> Option<f64>| ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>();
            let totals = col(|r| r.total_j);
            let mean_total = mean(&totals);
            let std_total = mean_total.map(|m| {
                if totals.len() < 2 {
                    0.0
                } else {
                    (totals.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (totals.len() - 1) as f64).sqrt()
                }
            });
            SummaryRow {
                method: chunk[0].method,
                sweep_kind: chunk[0].sweep_kind,
                threshold: chunk[0].threshold,
                runs: chunk.len(),
                feasible_runs: ok.len(),
                all_infeasible: ok.is_empty(),
                mean_e_comp_user_j: mean(&col(|r| r.e_comp_user_j)),
                mean_e_trans_j: mean(&col(|r| r.e_trans_j)),
                mean_e_comp_edge_j: mean(&col(|r| r.e_comp_edge_j)),
                mean_total_j: mean_total,
                std_total_j: std_total,
            }
        })
        .collect()
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: Config,
    pub sweep: Option<SweepSpec>,
    pub seeds: Vec<u64>,
}

impl RunManifest {
    pub fn for_sweep(config: &Config, sweep: &SweepSpec) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            sweep: Some(sweep.clone()),
            seeds: (0..sweep.repetitions).map(|r| sweep.seed(r)).collect(),
        }
    }

    pub fn for_seed(config: &Config, seed: u64) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            sweep: None,
            seeds: vec![seed],
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub seed: u64,
    pub solver_j: f64,
    pub oracle_j: f64,
    pub relative_gap: f64,
    pub agree: bool,
    pub solver_assignment: Vec<usize>,
    pub oracle_assignment: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub t_max_s: f64,
    pub q_min: f64,
    pub tolerance: f64,
    pub comparisons: Vec<OracleComparison>,
    pub all_agree: bool,
}

/// Compares the solver with the brute-force oracle on `instances` seeded scenarios.
pub fn oracle_check(
    config: &Config,
    spec: &ProblemSpec<f64>,
    base_seed: u64,
    instances: usize,
    options: &OracleOptions,
) -> Result<OracleReport> {
    let comparisons = (0..instances as u64)
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            let scenario = config.scenario::<f64>(seed)?;
            let sol = solve(&scenario, spec, &SolveOptions::default())?;
            let oracle = brute_force(&scenario, spec, options)?;
            let gap = (sol.energy.total_j - oracle.objective_j).abs() / oracle.objective_j.abs();
            Ok(OracleComparison {
                seed,
                solver_j: sol.energy.total_j,
                oracle_j: oracle.objective_j,
                relative_gap: gap,
                agree: gap <= ORACLE_AGREEMENT,
                solver_assignment: sol.assignment,
                oracle_assignment: oracle.assignment,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleReport {
        t_max_s: spec.t_max_s,
        q_min: spec.q_min,
        tolerance: ORACLE_AGREEMENT,
        all_agree: comparisons.iter().all(|c| c.agree),
        comparisons,
    })
}
