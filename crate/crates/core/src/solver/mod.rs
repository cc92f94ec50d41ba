//! Relaxed resource-allocation solver.
//!
//! With the extraction ratio at its QoS lower bound, the relaxed objective is
//! linear in the association weights and separable per pair except for the
//! per-edge CPU capacity. The solver alternates between per-pair KKT
//! solutions at the current capacity prices, Lagrangian-priced association,
//! and per-edge dual bisection, then de-relaxes the association by row argmax.

mod pair;

pub use pair::{min_footprint, pair_kkt, PairOptimum, PairProblem};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{delta_for_qos, pair_latency, t_trans, total_energy, EnergyBreakdown, LatencyBreakdown};
use crate::problem::{DecisionSet, ProblemSpec, REL_TOL};
use crate::scalar::Scalar;
use crate::scenario::Scenario;

use pair::bisect;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SolveMode {
    /// Optimize the association together with the resources.
    #[default]
    Joint,
    /// Keep the given serving edge per user and optimize the resources only.
    FixedAssociation(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions<T> {
    /// Relative objective change that ends the outer loop.
    pub tol_rel: T,
    pub max_outer_iters: usize,
    /// Relative bracket width for all bisections.
    pub bisection_tol: T,
    pub mode: SolveMode,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        SolveOptions {
            tol_rel: T::lit(1e-8).max(T::tol_floor()),
            max_outer_iters: 200,
            bisection_tol: T::lit(1e-12).max(T::tol_floor()),
            mode: SolveMode::Joint,
        }
    }
}

impl<T: Scalar> SolveOptions<T> {
    pub fn fixed(assignment: Vec<usize>) -> Self {
        SolveOptions {
            mode: SolveMode::FixedAssociation(assignment),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel > T::zero() && self.bisection_tol > T::zero()) || self.max_outer_iters == 0 {
            return Err(Error::Config(
                "solver tolerances must be positive and iteration cap at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution<T> {
    /// Decisions with one-hot association after de-relaxation.
    pub decisions: DecisionSet<T>,
    /// Association weights before de-relaxation.
    pub relaxed_x: Matrix<T>,
    /// Serving edge per user.
    pub assignment: Vec<usize>,
    pub energy: EnergyBreakdown<T>,
    /// Delay components of each user's served pair.
    pub latency: Vec<LatencyBreakdown<T>>,
    /// Per-edge capacity prices.
    pub duals: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// Optimal extraction ratio: the smallest one meeting the QoS threshold.
pub fn delta_star<T: Scalar>(spec: &ProblemSpec<T>) -> Result<T> {
    delta_for_qos(&spec.qos_model, spec.q_min)
}

/// Per-user argmin of pair costs; non-finite costs mark infeasible pairs. Ties go to the lower edge index.
pub fn associate<T: Scalar>(pair_costs: &Matrix<T>) -> Result<Vec<usize>> {
    (0..pair_costs.rows())
        .map(|u| {
            pair_costs
                .row(u)
                .iter()
                .enumerate()
                .filter(|(_, c)| c.is_finite())
                .fold(None, |best: Option<(usize, T)>, (n, &c)| match best {
                    Some((_, b)) if b <= c => best,
                    _ => Some((n, c)),
                })
                .map(|(n, _)| n)
                .ok_or(Error::InfeasibleUser { user: u })
        })
        .collect()
}

/// Rounds each row to a one-hot vector at its argmax (lowest index on ties).
pub fn derelax<T: Scalar>(relaxed_x: &Matrix<T>) -> Result<Matrix<T>> {
    if relaxed_x.cols() == 0 {
        return Err(Error::Contract("cannot de-relax rows with no edges".into()));
    }
    let mut out = Matrix::filled(relaxed_x.rows(), relaxed_x.cols(), T::zero());
    for u in 0..relaxed_x.rows() {
        let row = relaxed_x.row(u);
        if row.iter().any(|v| v.is_nan()) {
            return Err(Error::Contract(format!("association row {u} contains NaN")));
        }
        let best = (1..row.len()).fold(0, |b, n| if row[n] > row[b] { n } else { b });
        out[(u, best)] = T::one();
    }
    Ok(out)
}

/// Serving edge per user from a one-hot association matrix.
pub fn assignment_from_x<T: Scalar>(x: &Matrix<T>) -> Result<Vec<usize>> {
    (0..x.rows())
        .map(|u| {
            let row = x.row(u);
            let ones: Vec<usize> = (0..row.len()).filter(|&n| row[n] == T::one()).collect();
            let zeros = row.iter().filter(|&&v| v == T::zero()).count();
            match ones.as_slice() {
                [n] if zeros + 1 == row.len() => Ok(*n),
                _ => Err(Error::Contract(format!("association row {u} is not one-hot"))),
            }
        })
        .collect()
}

/// Precomputed per-pair quantities that do not depend on frequencies.
#[derive(Debug, Clone, Copy)]
struct PairData<T> {
    e_trans: T,
    base: PairProblem<T>,
    /// Edge frequency needed with the user CPU at its cap.
    footprint: T,
}

struct Prepared<T> {
    delta: T,
    /// `None` for pairs whose delay cannot be met at any frequency.
    pairs: Matrix<Option<PairData<T>>>,
}

fn prepare<T: Scalar>(scenario: &Scenario<T>, spec: &ProblemSpec<T>) -> Result<Prepared<T>> {
    spec.validate()?;
    scenario.params.validate()?;
    let delta = delta_star(spec)?;
    let params = &scenario.params;
    let theta_bits = params.theta_bits();
    let (users, edges) = scenario.shape();
    let mut pairs = Matrix::filled(users, edges, None);
    for u in 0..users {
        for n in 0..edges {
            let link = scenario.link(u, n);
            let t_tr = t_trans(delta, theta_bits, link.rate_bps())?;
            let base = PairProblem {
                kappa: params.kappa,
                t_budget_s: spec.t_max_s - t_tr,
                y1_cycles: params.y1_cycles,
                y2_cycles: params.y2_cycles,
                f_max_hz: scenario.users[u].f_max_hz,
                mu: T::zero(),
            };
            pairs[(u, n)] = match min_footprint(&base) {
                Ok(footprint) => Some(PairData {
                    e_trans: t_tr * link.power_w(),
                    base,
                    footprint,
                }),
                Err(Error::InfeasibleDelay { .. }) => None,
                Err(e) => return Err(e),
            };
        }
    }
    Ok(Prepared { delta, pairs })
}

fn priced<T: Scalar>(base: &PairProblem<T>, mu: T) -> PairProblem<T> {
    PairProblem { mu, ..*base }
}

/// Smallest price on one edge that fits the assigned users' demand next to the pinned footprints.
fn edge_dual<T: Scalar>(edge: usize, assigned: &[PairData<T>], pinned: T, capacity: T, tol: T) -> Result<T> {
    let load = |mu: T| -> Result<T> {
        assigned
            .iter()
            .try_fold(pinned, |acc, p| Ok(acc + pair_kkt(&priced(&p.base, mu), tol)?.h_hz))
    };
    let fits = |v: T| v <= capacity * (T::one() + T::lit(1e-12).max(T::tol_floor()));
    if fits(load(T::zero())?) {
        return Ok(T::zero());
    }
    let infeasible = |required: T| Error::InfeasibleCapacity {
        edge,
        required_hz: required.as_f64(),
        capacity_hz: capacity.as_f64(),
    };
    let floor = assigned.iter().fold(pinned, |acc, p| acc + p.footprint);
    if !fits(floor) || (floor >= capacity && assigned.iter().any(|p| !p.base.f_max_hz.is_finite())) {
        return Err(infeasible(floor));
    }
    // Price scale: marginal edge energy at the unpriced optimum.
    let mut hi = assigned
        .iter()
        .map(|p| {
            let f0 = (p.base.y1_cycles + p.base.y2_cycles) / p.base.t_budget_s;
            T::lit(2.0) * p.base.kappa * p.base.y2_cycles * f0
        })
        .fold(T::zero(), T::max)
        .max(T::min_positive_value());
    let mut steps = 0;
    while !fits(load(hi)?) {
        hi = hi * T::lit(2.0);
        steps += 1;
        if steps > 2000 || !hi.is_finite() {
            return Err(infeasible(floor));
        }
    }
    let mut failure = None;
    let (_, mu) = bisect(T::zero(), hi, tol, |mu| match load(mu) {
        Ok(v) => fits(v),
        Err(e) => {
            failure = Some(e);
            true
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(mu),
    }
}

fn duals_for<T: Scalar>(scenario: &Scenario<T>, prep: &Prepared<T>, assignment: &[usize], tol: T) -> Result<Vec<T>> {
    (0..scenario.n_edges())
        .map(|n| {
            let mut assigned = Vec::new();
            let mut pinned = T::zero();
            for (u, &a) in assignment.iter().enumerate() {
                match (prep.pairs[(u, n)], a == n) {
                    (Some(p), true) => assigned.push(p),
                    (Some(p), false) => pinned = pinned + p.footprint,
                    (None, true) => {
                        return Err(Error::InfeasibleDelay {
                            pair: Some((u, n)),
                            reason: "assigned pair cannot meet the delay threshold".into(),
                        })
                    }
                    (None, false) => {}
                }
            }
            edge_dual(n, &assigned, pinned, scenario.edges[n].h_max_hz, tol)
        })
        .collect()
}

fn check_assignment(assignment: &[usize], shape: (usize, usize)) -> Result<()> {
    if assignment.len() != shape.0 {
        return Err(Error::Contract(format!(
            "assignment covers {} users, scenario has {}",
            assignment.len(),
            shape.0
        )));
    }
    if let Some((u, &n)) = assignment.iter().enumerate().find(|(_, &n)| n >= shape.1) {
        return Err(Error::Contract(format!("user {u} assigned to missing edge {n}")));
    }
    Ok(())
}

/// Per-edge capacity prices for a fixed association.
pub fn capacity_duals<T: Scalar>(
    scenario: &Scenario<T>,
    spec: &ProblemSpec<T>,
    assignment: &[usize],
    options: &SolveOptions<T>,
) -> Result<Vec<T>> {
    check_assignment(assignment, scenario.shape())?;
    let prep = prepare(scenario, spec)?;
    duals_for(scenario, &prep, assignment, options.bisection_tol)
}

/// Evaluates the decisions implied by an association and prices.
fn realize<T: Scalar>(
    scenario: &Scenario<T>,
    prep: &Prepared<T>,
    assignment: &[usize],
    duals: &[T],
    tol: T,
) -> Result<(DecisionSet<T>, T)> {
    let (users, edges) = scenario.shape();
    let mut d = DecisionSet::zeros(users, edges);
    let mut objective = T::zero();
    for u in 0..users {
        for n in 0..edges {
            d.delta[(u, n)] = prep.delta;
            let Some(p) = prep.pairs[(u, n)] else { continue };
            if assignment[u] == n {
                let opt = pair_kkt(&priced(&p.base, duals[n]), tol)?;
                d.x[(u, n)] = T::one();
                d.f[(u, n)] = opt.f_hz;
                d.h[(u, n)] = opt.h_hz;
                objective = objective + opt.energy_j + p.e_trans;
            } else {
                d.f[(u, n)] = p.base.f_max_hz;
                d.h[(u, n)] = p.footprint;
            }
        }
    }
    Ok((d, objective))
}

/// Lagrangian cost of serving each pair at the given prices.
fn priced_costs<T: Scalar>(prep: &Prepared<T>, duals: &[T], tol: T) -> Result<Matrix<T>> {
    let (users, edges) = prep.pairs.shape();
    let mut costs = Matrix::filled(users, edges, T::infinity());
    for ((u, n), pair) in prep.pairs.indexed() {
        if let Some(p) = pair {
            let mu = duals[n];
            let opt = pair_kkt(&priced(&p.base, mu), tol)?;
            costs[(u, n)] = p.e_trans + opt.energy_j + mu * (opt.h_hz - p.footprint);
        }
    }
    Ok(costs)
}

/// Spreads each row's weight evenly over its exactly-tied minimum-cost edges.
fn relaxed_from_costs<T: Scalar>(costs: &Matrix<T>) -> Matrix<T> {
    let mut x = Matrix::filled(costs.rows(), costs.cols(), T::zero());
    for u in 0..costs.rows() {
        let row = costs.row(u);
        let min = row
            .iter()
            .copied()
            .filter(|c| c.is_finite())
            .fold(T::infinity(), T::min);
        let ties: Vec<usize> = (0..row.len()).filter(|&n| row[n] == min).collect();
        let w = T::one() / T::lit(ties.len() as f64);
        for n in ties {
            x[(u, n)] = w;
        }
    }
    x
}

/// One-hot association matrix for a serving-edge list.
pub fn one_hot<T: Scalar>(assignment: &[usize], edges: usize) -> Matrix<T> {
    Matrix::from_fn(assignment.len(), edges, |u, n| {
        if assignment[u] == n {
            T::one()
        } else {
            T::zero()
        }
    })
}

struct Iterate<T> {
    assignment: Vec<usize>,
    relaxed_x: Matrix<T>,
    duals: Vec<T>,
    decisions: DecisionSet<T>,
    objective: T,
}

/// Accepts `candidate` if it lowers the objective.
fn try_candidate<T: Scalar>(
    scenario: &Scenario<T>,
    prep: &Prepared<T>,
    best: &mut Iterate<T>,
    candidate: Vec<usize>,
    options: &SolveOptions<T>,
) -> Result<bool> {
    let duals = duals_for(scenario, prep, &candidate, options.bisection_tol)?;
    let (decisions, objective) = realize(scenario, prep, &candidate, &duals, options.bisection_tol)?;
    if objective < best.objective * (T::one() - options.tol_rel) {
        *best = Iterate {
            relaxed_x: one_hot(&candidate, scenario.n_edges()),
            assignment: candidate,
            duals,
            decisions,
            objective,
        };
        return Ok(true);
    }
    Ok(false)
}

/// Moves single users between edges, or swaps the edges of two users, while that lowers the objective.
fn improve_by_moves<T: Scalar>(
    scenario: &Scenario<T>,
    prep: &Prepared<T>,
    best: &mut Iterate<T>,
    options: &SolveOptions<T>,
) -> Result<()> {
    let (users, edges) = scenario.shape();
    for _ in 0..options.max_outer_iters {
        let mut improved = false;
        for u in 0..users {
            for n in 0..edges {
                if n == best.assignment[u] || prep.pairs[(u, n)].is_none() {
                    continue;
                }
                let mut candidate = best.assignment.clone();
                candidate[u] = n;
                improved |= try_candidate(scenario, prep, best, candidate, options)?;
            }
        }
        for u in 0..users {
            for v in u + 1..users {
                let (a, b) = (best.assignment[u], best.assignment[v]);
                if a == b || prep.pairs[(u, b)].is_none() || prep.pairs[(v, a)].is_none() {
                    continue;
                }
                let mut candidate = best.assignment.clone();
                candidate.swap(u, v);
                improved |= try_candidate(scenario, prep, best, candidate, options)?;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(())
}

/// Solves the relaxed problem and de-relaxes the association.
pub fn solve<T: Scalar>(
    scenario: &Scenario<T>,
    spec: &ProblemSpec<T>,
    options: &SolveOptions<T>,
) -> Result<Solution<T>> {
    options.validate()?;
    let prep = prepare(scenario, spec)?;
    let tol = options.bisection_tol;
    let edges = scenario.n_edges();

    let fixed = match &options.mode {
        SolveMode::Joint => None,
        SolveMode::FixedAssociation(a) => {
            check_assignment(a, scenario.shape())?;
            Some(a.clone())
        }
    };

    let mut duals = vec![T::zero(); edges];
    let mut best: Option<Iterate<T>> = None;
    let mut previous: Option<(Vec<usize>, T)> = None;
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=options.max_outer_iters {
        iterations = iter;
        let (assignment, relaxed_x) = match &fixed {
            Some(a) => (a.clone(), one_hot(a, edges)),
            None => {
                let costs = priced_costs(&prep, &duals, tol)?;
                (associate(&costs)?, relaxed_from_costs(&costs))
            }
        };
        let repeated = previous.as_ref().is_some_and(|(a, _)| *a == assignment);
        // Prices depend only on the assignment, so revisiting an earlier one means a cycle.
        if !repeated && !visited.insert(assignment.clone()) {
            break;
        }
        let new_duals = duals_for(scenario, &prep, &assignment, tol)?;
        let (decisions, objective) = realize(scenario, &prep, &assignment, &new_duals, tol)?;

        let stalled = previous
            .as_ref()
            .is_some_and(|(a, obj)| *a == assignment && (objective - *obj).abs() <= options.tol_rel * objective.abs());
        previous = Some((assignment.clone(), objective));
        duals = new_duals.clone();
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(Iterate {
                assignment,
                relaxed_x,
                duals: new_duals,
                decisions,
                objective,
            });
        }
        if fixed.is_some() || stalled {
            converged = true;
            break;
        }
    }

    let mut best = best.expect("at least one outer iteration");
    if fixed.is_none() {
        improve_by_moves(scenario, &prep, &mut best, options)?;
    }
    let mut decisions = best.decisions;
    decisions.x = derelax(&best.relaxed_x)?;
    debug_assert_eq!(decisions.assignment().as_deref(), Some(best.assignment.as_slice()));
    let energy = total_energy(scenario, &decisions)?;
    let latency = best
        .assignment
        .iter()
        .enumerate()
        .map(|(u, &n)| {
            pair_latency(
                &scenario.params,
                scenario.link(u, n),
                decisions.delta[(u, n)],
                decisions.f[(u, n)],
                decisions.h[(u, n)],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(crate::scalar::within(
        energy.total_j,
        best.objective,
        T::lit(REL_TOL).max(T::tol_floor() * T::lit(64.0)),
        T::zero()
    ));
    Ok(Solution {
        decisions,
        relaxed_x: best.relaxed_x,
        assignment: best.assignment,
        energy,
        latency,
        duals: best.duals,
        iterations,
        converged,
    })
}
