//! Brute-force reference solver for desk-scale instances.
//!
//! Enumerates every one-hot association and, for each served pair, searches
//! the tight-delay curve `f(h) = y1 / (T_b - y2 / h)` with a log-spaced grid
//! followed by golden-section refinement. When an edge's CPU capacity binds,
//! the split between its users is searched the same way, one user at a time.
//! Nothing here reuses the analytic solver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{delta_for_qos, t_trans};
use crate::problem::{DecisionSet, ProblemSpec};
use crate::scalar::Scalar;
use crate::scenario::Scenario;
use crate::solver::one_hot;

/// Largest association enumeration the oracle accepts.
pub const MAX_CANDIDATES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub grid_points_per_axis: usize,
    pub max_users: usize,
    pub max_edges: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            grid_points_per_axis: 200,
            max_users: 4,
            max_edges: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult<T> {
    pub objective_j: T,
    pub assignment: Vec<usize>,
    pub decisions: DecisionSet<T>,
    /// Associations that admitted a feasible allocation.
    pub feasible_candidates: usize,
}

/// Energy along the tight-delay curve for one pair, as a function of `h`.
#[derive(Debug, Clone, Copy)]
struct Curve<T> {
    kappa: T,
    y1: T,
    y2: T,
    budget: T,
    f_max: T,
    e_trans: T,
    /// Smallest admissible `h` (user CPU at its cap).
    h_lo: T,
    /// Unconstrained minimizer of the curve.
    h_best: T,
}

impl<T: Scalar> Curve<T> {
    fn f_of(&self, h: T) -> T {
        self.y1 / (self.budget - self.y2 / h)
    }

    fn energy(&self, h: T) -> T {
        let f = self.f_of(h);
        self.kappa * (self.y1 * f * f + self.y2 * h * h)
    }
}

fn golden<T: Scalar>(mut a: T, mut b: T, f: &impl Fn(T) -> T) -> (T, T) {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let tol = T::lit(1e-13).max(T::tol_floor());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol * b.abs().max(a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimizes a unimodal function on `[lo, hi]` (`lo > 0`): log grid, then golden section around the best node.
fn minimize_1d<T: Scalar>(lo: T, hi: T, points: usize, f: impl Fn(T) -> T) -> (T, T) {
    if !(hi > lo) {
        return (lo, f(lo));
    }
    let points = points.max(3);
    let ratio = (hi / lo).ln();
    let node = |i: usize| {
        if i + 1 == points {
            hi
        } else {
            lo * (ratio * T::lit(i as f64) / T::lit((points - 1) as f64)).exp()
        }
    };
    let (mut best_i, mut best_v) = (0, f(lo));
    for i in 1..points {
        let v = f(node(i));
        if v < best_v {
            best_i = i;
            best_v = v;
        }
    }
    let a = node(best_i.saturating_sub(1));
    let b = node((best_i + 1).min(points - 1));
    let (x, v) = golden(a, b, &f);
    if v < best_v {
        (x, v)
    } else {
        (node(best_i), best_v)
    }
}

/// Minimal total energy of users `curves[k..]` sharing at most `cap` edge Hz; also returns their `h`.
fn split_capacity<T: Scalar>(curves: &[Curve<T>], cap: T, points: usize) -> (T, Vec<T>) {
    let (first, rest) = curves.split_first().expect("non-empty");
    if rest.is_empty() {
        let h = first.h_best.min(cap).max(first.h_lo);
        return (first.energy(h), vec![h]);
    }
    let reserved = rest.iter().fold(T::zero(), |a, c| a + c.h_lo);
    let upper = first.h_best.min(cap - reserved).max(first.h_lo);
    let inner = |h: T| first.energy(h) + split_capacity(rest, cap - h, points).0;
    let (h, v) = minimize_1d(first.h_lo, upper, points, inner);
    let mut hs = vec![h];
    hs.extend(split_capacity(rest, cap - h, points).1);
    (v, hs)
}

struct Instance<T> {
    delta: T,
    /// `None` where the delay threshold cannot be met.
    curves: Vec<Vec<Option<Curve<T>>>>,
}

fn build<T: Scalar>(scenario: &Scenario<T>, spec: &ProblemSpec<T>, points: usize) -> Result<Instance<T>> {
    spec.validate()?;
    let delta = delta_for_qos(&spec.qos_model, spec.q_min)?;
    let p = &scenario.params;
    let mut curves = Vec::with_capacity(scenario.n_users());
    for (u, user) in scenario.users.iter().enumerate() {
        let mut row = Vec::with_capacity(scenario.n_edges());
        for n in 0..scenario.n_edges() {
            let link = scenario.link(u, n);
            let t_tr = t_trans(delta, p.theta_bits(), link.rate_bps())?;
            let budget = spec.t_max_s - t_tr;
            let user_floor = p.y1_cycles / user.f_max_hz;
            if !(budget > user_floor) {
                row.push(None);
                continue;
            }
            let h_lo = p.y2_cycles / (budget - user_floor);
            let mut c = Curve {
                kappa: p.kappa,
                y1: p.y1_cycles,
                y2: p.y2_cycles,
                budget,
                f_max: user.f_max_hz,
                e_trans: t_tr * link.power_w(),
                h_lo,
                h_best: h_lo,
            };
            let span = T::lit(100.0) * (p.y1_cycles + p.y2_cycles) / budget + h_lo;
            c.h_best = minimize_1d(h_lo, span, points, |h| c.energy(h)).0;
            row.push(Some(c));
        }
        curves.push(row);
    }
    Ok(Instance { delta, curves })
}

fn evaluate<T: Scalar>(
    scenario: &Scenario<T>,
    inst: &Instance<T>,
    assignment: &[usize],
    points: usize,
) -> Option<(T, DecisionSet<T>)> {
    let (users, edges) = scenario.shape();
    let mut d = DecisionSet::zeros(users, edges);
    d.x = one_hot(assignment, edges);
    let mut total = T::zero();
    for n in 0..edges {
        let mut served = Vec::new();
        let mut pinned = T::zero();
        for u in 0..users {
            d.delta[(u, n)] = inst.delta;
            match (inst.curves[u][n], assignment[u] == n) {
                (None, true) => return None,
                (None, false) => {}
                (Some(c), true) => served.push((u, c)),
                (Some(c), false) => {
                    pinned = pinned + c.h_lo;
                    d.f[(u, n)] = c.f_max;
                    d.h[(u, n)] = c.h_lo;
                }
            }
        }
        if served.is_empty() {
            continue;
        }
        let cap = scenario.edges[n].h_max_hz - pinned;
        let curves: Vec<Curve<T>> = served.iter().map(|&(_, c)| c).collect();
        let demand = curves.iter().fold(T::zero(), |a, c| a + c.h_best);
        let floor = curves.iter().fold(T::zero(), |a, c| a + c.h_lo);
        let slack = T::lit(1e-12).max(T::tol_floor()) * scenario.edges[n].h_max_hz;
        let hs: Vec<T> = if demand <= cap + slack {
            curves.iter().map(|c| c.h_best).collect()
        } else if floor > cap + slack {
            return None;
        } else {
            split_capacity(&curves, cap, points).1
        };
        for (&(u, c), h) in served.iter().zip(hs) {
            let f = c.f_of(h);
            d.f[(u, n)] = f;
            d.h[(u, n)] = h;
            total = total + c.e_trans + c.energy(h);
        }
    }
    Some((total, d))
}

fn check_guards<T>(scenario: &Scenario<T>, options: &OracleOptions) -> Result<usize> {
    let (users, edges) = (scenario.users.len(), scenario.edges.len());
    if users > options.max_users || edges > options.max_edges {
        return Err(Error::OracleRefused(format!(
            "{users} users x {edges} edges exceeds guard {} x {}",
            options.max_users, options.max_edges
        )));
    }
    let count = (0..users).try_fold(1usize, |acc, _| acc.checked_mul(edges).filter(|&c| c <= MAX_CANDIDATES));
    count.ok_or_else(|| Error::OracleRefused(format!("{edges}^{users} associations exceed {MAX_CANDIDATES}")))
}

fn decode(mut index: usize, users: usize, edges: usize) -> Vec<usize> {
    (0..users)
        .map(|_| {
            let n = index % edges;
            index /= edges;
            n
        })
        .collect()
}

/// Best allocation for one fixed association, or `None` if it admits no feasible allocation.
pub fn evaluate_assignment<T: Scalar>(
    scenario: &Scenario<T>,
    spec: &ProblemSpec<T>,
    assignment: &[usize],
    options: &OracleOptions,
) -> Result<Option<OracleResult<T>>> {
    check_guards(scenario, options)?;
    if assignment.len() != scenario.n_users() || assignment.iter().any(|&n| n >= scenario.n_edges()) {
        return Err(Error::Contract("assignment does not match scenario".into()));
    }
    let inst = build(scenario, spec, options.grid_points_per_axis)?;
    Ok(
        evaluate(scenario, &inst, assignment, options.grid_points_per_axis).map(|(objective_j, decisions)| {
            OracleResult {
                objective_j,
                assignment: assignment.to_vec(),
                decisions,
                feasible_candidates: 1,
            }
        }),
    )
}

/// Exhaustive search over all one-hot associations.
pub fn brute_force<T: Scalar>(
    scenario: &Scenario<T>,
    spec: &ProblemSpec<T>,
    options: &OracleOptions,
) -> Result<OracleResult<T>> {
    let count = check_guards(scenario, options)?;
    let inst = build(scenario, spec, options.grid_points_per_axis)?;
    let (users, edges) = scenario.shape();
    let points = options.grid_points_per_axis;
    let results: Vec<(usize, T, DecisionSet<T>)> = (0..count)
        .into_par_iter()
        .filter_map(|i| {
            let a = decode(i, users, edges);
            evaluate(scenario, &inst, &a, points).map(|(obj, d)| (i, obj, d))
        })
        .collect();
    let feasible_candidates = results.len();
    let (i, objective_j, decisions) = results
        .into_iter()
        .reduce(|best, cand| if cand.1 < best.1 { cand } else { best })
        .ok_or(Error::OracleInfeasible)?;
    Ok(OracleResult {
        objective_j,
        assignment: decode(i, users, edges),
        decisions,
        feasible_candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{QosModel, SystemParams};
    use crate::problem::check_original;
    use crate::scenario::{generate_topology, EdgeNode, GainModel, TopologyConfig, UserNode};
    use approx::assert_relative_eq;

    fn spec(t: f64) -> ProblemSpec<f64> {
        ProblemSpec::new(t, 0.8, QosModel::default()).unwrap()
    }

    fn one_pair(f_max: f64) -> Scenario<f64> {
        Scenario::from_nodes(
            SystemParams::default(),
            vec![UserNode {
                id: 0,
                position: [0.0, 0.0],
                f_max_hz: f_max,
            }],
            vec![EdgeNode {
                id: 0,
                position: [650.0, 0.0],
                h_max_hz: 4e9,
                p_total_w: 1.0,
                b_total_hz: 20e6,
            }],
            &GainModel::default(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, v) = golden(0.0f64, 5.0, &|x| (x - 1.7) * (x - 1.7) + 3.0);
        assert_relative_eq!(x, 1.7, max_relative = 1e-6);
        assert_relative_eq!(v, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn single_pair_matches_closed_form() {
        let s = one_pair(2.5e9);
        let r = brute_force(&s, &spec(1.0), &OracleOptions::default()).unwrap();
        let delta = (0.8 - 0.1006) / 0.873;
        let t_b = 1.0 - delta * 12544.0 / s.link(0, 0).rate_bps();
        let f = 3e7 / t_b;
        let e = 1e-28 * 3e7 * f * f + delta * 12544.0 / s.link(0, 0).rate_bps() * s.link(0, 0).power_w();
        assert_relative_eq!(r.objective_j, e, max_relative = 1e-3);
        assert_relative_eq!(r.decisions.h[(0, 0)], f, max_relative = 1e-3);
    }

    #[test]
    fn capped_user_pair() {
        // T = 0.03 s: (y1 + y2) / T_b is ~1e9 > f_max = 0.5e9
        let s = one_pair(0.5e9);
        let r = brute_force(&s, &spec(0.03), &OracleOptions::default()).unwrap();
        assert_relative_eq!(r.decisions.f[(0, 0)], 0.5e9, max_relative = 1e-6);
        assert!(check_original(&s, &spec(0.03), &r.decisions).unwrap().feasible);
    }

    #[test]
    fn infeasible_threshold_reported() {
        let s = one_pair(2.5e9);
        let t_tr = 0.9 * 12544.0 / s.link(0, 0).rate_bps();
        assert_eq!(
            brute_force(&s, &spec(0.5 * t_tr), &OracleOptions::default()).unwrap_err(),
            Error::OracleInfeasible
        );
    }

    #[test]
    fn guards_refuse_large_instances() {
        let s = generate_topology(0, &TopologyConfig::default(), &SystemParams::<f64>::default()).unwrap();
        assert!(matches!(
            brute_force(&s, &spec(1.0), &OracleOptions::default()),
            Err(Error::OracleRefused(_))
        ));
        let cfg = TopologyConfig::<f64> {
            n_users: 9,
            n_edges: 3,
            ..TopologyConfig::default()
        };
        let s = generate_topology(0, &cfg, &SystemParams::default()).unwrap();
        let opts = OracleOptions {
            max_users: 20,
            max_edges: 20,
            ..OracleOptions::default()
        };
        // 3^9 = 19683 > 10 000
        assert!(matches!(
            brute_force(&s, &spec(1.0), &opts),
            Err(Error::OracleRefused(_))
        ));
    }

    #[test]
    fn binding_capacity_split_is_feasible_and_tight() {
        let users = (0..3)
            .map(|id| UserNode {
                id,
                position: [10.0 * id as f64, 0.0],
                f_max_hz: [1e9, 0.5e9, 2.5e9][id],
            })
            .collect();
        let edges = vec![EdgeNode {
            id: 0,
            position: [700.0, 0.0],
            h_max_hz: 6.3e7,
            p_total_w: 1.0,
            b_total_hz: 20e6,
        }];
        let s = Scenario::from_nodes(SystemParams::default(), users, edges, &GainModel::default(), 0).unwrap();
        let r = brute_force(&s, &spec(1.0), &OracleOptions::default()).unwrap();
        let load: f64 = (0..3).map(|u| r.decisions.h[(u, 0)]).sum();
        assert_relative_eq!(load, 6.3e7, max_relative = 1e-9);
        assert!(check_original(&s, &spec(1.0), &r.decisions).unwrap().feasible);
    }

    #[test]
    fn invariant_under_user_reordering() {
        let cfg = TopologyConfig::<f64> {
            n_users: 3,
            n_edges: 2,
            ..TopologyConfig::default()
        };
        let s = generate_topology(17, &cfg, &SystemParams::default()).unwrap();
        let mut rev = s.clone();
        rev.users.reverse();
        rev = Scenario::from_nodes(rev.params.clone(), rev.users, rev.edges, &GainModel::default(), 17).unwrap();
        let a = brute_force(&s, &spec(1.0), &OracleOptions::default()).unwrap();
        let b = brute_force(&rev, &spec(1.0), &OracleOptions::default()).unwrap();
        assert_relative_eq!(a.objective_j, b.objective_j, max_relative = 1e-9);
    }
}
