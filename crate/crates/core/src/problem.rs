//! Problem instances, decision matrices and constraint checking for both the
//! binary-association problem and its relaxation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{delta_for_qos, pair_latency, qos_of_delta, total_energy, QosModel};
use crate::scalar::Scalar;
use crate::scenario::Scenario;

/// Relative violation tolerance.
pub const REL_TOL: f64 = 1e-9;
/// Absolute violation tolerance for bounds near zero.
pub const ABS_TOL: f64 = 1e-12;
/// Distance from {0, 1} below which an association weight counts as binary.
pub const BINARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec<T> {
    /// Delay threshold in seconds.
    pub t_max_s: T,
    /// Minimum per-user quality of service.
    pub q_min: T,
    pub qos_model: QosModel<T>,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn new(t_max_s: T, q_min: T, qos_model: QosModel<T>) -> Result<Self> {
        let spec = ProblemSpec {
            t_max_s,
            q_min,
            qos_model,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.qos_model.validate()?;
        if !(self.t_max_s > T::zero() && self.t_max_s.is_finite()) {
            return Err(Error::Config(format!("t_max must be positive, got {}", self.t_max_s)));
        }
        if !(self.q_min > self.qos_model.intercept) {
            return Err(Error::Config(format!(
                "q_min {} must exceed the QoS intercept {}",
                self.q_min, self.qos_model.intercept
            )));
        }
        // Reports q_min above the reachable maximum as an infeasibility.
        delta_for_qos(&self.qos_model, self.q_min)?;
        Ok(())
    }
}

/// The four `users x edges` decision matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSet<T> {
    /// Association weights.
    pub x: Matrix<T>,
    /// Semantic extraction ratios.
    pub delta: Matrix<T>,
    /// User CPU frequencies (Hz).
    pub f: Matrix<T>,
    /// Edge CPU frequencies (Hz).
    pub h: Matrix<T>,
}

impl<T: Scalar> DecisionSet<T> {
    pub fn zeros(users: usize, edges: usize) -> Self {
        let z = Matrix::filled(users, edges, T::zero());
        DecisionSet {
            x: z.clone(),
            delta: Matrix::filled(users, edges, T::one()),
            f: z.clone(),
            h: z,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.x.shape()
    }

    pub fn ensure_shape(&self, shape: (usize, usize)) -> Result<()> {
        self.x.ensure_shape(shape, "association matrix")?;
        self.delta.ensure_shape(shape, "extraction-ratio matrix")?;
        self.f.ensure_shape(shape, "user frequency matrix")?;
        self.h.ensure_shape(shape, "edge frequency matrix")
    }

    /// Serving edge of every user, if `x` is one-hot per row.
    pub fn assignment(&self) -> Option<Vec<usize>> {
        (0..self.x.rows())
            .map(|u| {
                let row = self.x.row(u);
                let ones: Vec<usize> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v == T::one())
                    .map(|(n, _)| n)
                    .collect();
                let zeros = row.iter().filter(|&&v| v == T::zero()).count();
                (ones.len() == 1 && zeros + 1 == row.len()).then(|| ones[0])
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintId {
    /// Per-user minimum quality (as a quality bound, or as the equivalent lower bound on delta).
    MinQos,
    MaxDelay,
    UserCpuCap,
    EdgeCpuCap,
    /// Extraction ratio within (0, 1].
    DeltaRange,
    /// Served pairs need strictly positive CPU frequencies.
    PositiveFrequency,
    /// Frequencies must be non-negative.
    NonNegativeFrequency,
    /// Association weights within [0, 1].
    AssociationBounds,
    /// Association weights of each user sum to one.
    AssociationSum,
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Location {
    Pair { user: usize, edge: usize },
    User(usize),
    Edge(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub location: Location,
    /// Amount by which the bound is exceeded, in the constraint's own units.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        FeasibilityReport {
            feasible: violations.is_empty(),
            violations,
        }
    }

    pub fn of(&self, id: ConstraintId) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.constraint == id)
    }
}

/// Amount by which `value` exceeds `bound` beyond tolerance.
fn excess<T: Scalar>(value: T, bound: T) -> Option<f64> {
    let slack = T::lit(ABS_TOL).max(T::lit(REL_TOL) * bound.abs());
    (value > bound + slack || value.is_nan()).then(|| (value - bound).as_f64())
}

struct Collector {
    out: Vec<Violation>,
}

impl Collector {
    fn check<T: Scalar>(&mut self, id: ConstraintId, loc: Location, value: T, bound: T) {
        if let Some(magnitude) = excess(value, bound) {
            self.out.push(Violation {
                constraint: id,
                location: loc,
                magnitude,
            });
        }
    }

    fn delta_range<T: Scalar>(&mut self, loc: Location, delta: T) {
        if !(delta > T::zero()) {
            self.out.push(Violation {
                constraint: ConstraintId::DeltaRange,
                location: loc,
                magnitude: (-delta).as_f64(),
            });
        }
        self.check(ConstraintId::DeltaRange, loc, delta, T::one());
    }

    fn delay<T: Scalar>(
        &mut self,
        scenario: &Scenario<T>,
        spec: &ProblemSpec<T>,
        d: &DecisionSet<T>,
        u: usize,
        n: usize,
    ) {
        let loc = Location::Pair { user: u, edge: n };
        let (delta, f, h) = (d.delta[(u, n)], d.f[(u, n)], d.h[(u, n)]);
        let total = if delta > T::zero() && delta <= T::one() && f > T::zero() && h > T::zero() {
            pair_latency(&scenario.params, scenario.link(u, n), delta, f, h)
                .map(|l| l.total_s)
                .unwrap_or_else(|_| T::infinity())
        } else {
            T::infinity()
        };
        self.check(ConstraintId::MaxDelay, loc, total, spec.t_max_s);
    }
}

/// Checks the binary-association problem. Fractional `x` is a contract error.
pub fn check_original<T: Scalar>(
    scenario: &Scenario<T>,
    spec: &ProblemSpec<T>,
    decisions: &DecisionSet<T>,
) -> Result<FeasibilityReport> {
    decisions.ensure_shape(scenario.shape())?;
    let tol = T::lit(BINARY_TOL);
    for ((u, n), &x) in decisions.x.indexed() {
        if !(x.abs() <= tol || (x - T::one()).abs() <= tol) {
            return Err(Error::Contract(format!(
                "association x[{u}][{n}] = {x} is fractional; de-relax before checking the binary problem"
            )));
        }
    }
    let mut c = Collector { out: Vec::new() };
    let (users, edges) = scenario.shape();
    for u in 0..users {
        let sum = decisions.x.row(u).iter().fold(T::zero(), |a, &v| a + v);
        let dev = (sum - T::one()).abs();
        c.check(ConstraintId::AssociationSum, Location::User(u), dev, T::zero());
        for n in 0..edges {
            let loc = Location::Pair { user: u, edge: n };
            let delta = decisions.delta[(u, n)];
            c.delta_range(loc, delta);
            if decisions.x[(u, n)] < T::lit(0.5) {
                continue;
            }
            let (f, h) = (decisions.f[(u, n)], decisions.h[(u, n)]);
            for v in [f, h] {
                if !(v > T::zero()) {
                    c.out.push(Violation {
                        constraint: ConstraintId::PositiveFrequency,
                        location: loc,
                        magnitude: (-v).as_f64(),
                    });
                }
            }
            if delta > T::zero() && delta <= T::one() {
                let q = qos_of_delta(&spec.qos_model, delta)?;
                c.check(ConstraintId::MinQos, loc, spec.q_min, q);
            }
            c.delay(scenario, spec, decisions, u, n);
            c.check(ConstraintId::UserCpuCap, loc, f, scenario.users[u].f_max_hz);
        }
    }
    for n in 0..edges {
        let load = (0..users).fold(T::zero(), |a, u| a + decisions.x[(u, n)] * decisions.h[(u, n)]);
        c.check(
            ConstraintId::EdgeCpuCap,
            Location::Edge(n),
            load,
            scenario.edges[n].h_max_hz,
        );
    }
    Ok(FeasibilityReport::from_violations(c.out))
}

/// Checks the relaxed problem: delay, QoS and frequency bounds apply to every
/// pair regardless of `x`, and edge capacity counts every user.
pub fn check_relaxed<T: Scalar>(
    scenario: &Scenario<T>,
    spec: &ProblemSpec<T>,
    decisions: &DecisionSet<T>,
) -> Result<FeasibilityReport> {
    decisions.ensure_shape(scenario.shape())?;
    let delta_lb = delta_for_qos(&spec.qos_model, spec.q_min)?;
    let mut c = Collector { out: Vec::new() };
    let (users, edges) = scenario.shape();
    for u in 0..users {
        let row = decisions.x.row(u);
        let sum = row.iter().fold(T::zero(), |a, &v| a + v);
        c.check(
            ConstraintId::AssociationSum,
            Location::User(u),
            (sum - T::one()).abs(),
            T::zero(),
        );
        for n in 0..edges {
            let loc = Location::Pair { user: u, edge: n };
            let x = decisions.x[(u, n)];
            c.check(ConstraintId::AssociationBounds, loc, -x, T::zero());
            c.check(ConstraintId::AssociationBounds, loc, x, T::one());
            let delta = decisions.delta[(u, n)];
            c.check(ConstraintId::MinQos, loc, delta_lb, delta);
            c.delta_range(loc, delta);
            c.delay(scenario, spec, decisions, u, n);
            let (f, h) = (decisions.f[(u, n)], decisions.h[(u, n)]);
            c.check(ConstraintId::NonNegativeFrequency, loc, -f, T::zero());
            c.check(ConstraintId::NonNegativeFrequency, loc, -h, T::zero());
            c.check(ConstraintId::UserCpuCap, loc, f, scenario.users[u].f_max_hz);
        }
    }
    for n in 0..edges {
        let load = (0..users).fold(T::zero(), |a, u| a + decisions.h[(u, n)]);
        c.check(
            ConstraintId::EdgeCpuCap,
            Location::Edge(n),
            load,
            scenario.edges[n].h_max_hz,
        );
    }
    Ok(FeasibilityReport::from_violations(c.out))
}

/// Association-weighted total energy in joules.
pub fn objective<T: Scalar>(scenario: &Scenario<T>, decisions: &DecisionSet<T>) -> Result<T> {
    Ok(total_energy(scenario, decisions)?.total_j)
}
