//! Per-pair frequency allocation under a delay budget.
//!
//! Minimizes `kappa (y1 f^2 + y2 h^2) + mu h` subject to `y1/f + y2/h <= T_b`
//! and `f <= f_max`. Stationarity with delay multiplier `lambda` gives
//! `2 kappa f^3 = lambda` and `2 kappa h^3 + (mu / y2) h^2 = lambda`; the delay
//! constraint is always tight at the optimum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairProblem<T> {
    pub kappa: T,
    /// Delay left for computation after transmission.
    pub t_budget_s: T,
    pub y1_cycles: T,
    pub y2_cycles: T,
    /// May be infinite.
    pub f_max_hz: T,
    /// Price on edge CPU frequency.
    pub mu: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairOptimum<T> {
    pub f_hz: T,
    pub h_hz: T,
    /// Computation energy `kappa (y1 f^2 + y2 h^2)`, without the price term.
    pub energy_j: T,
}

impl<T: Scalar> PairOptimum<T> {
    /// Value of the priced objective `energy + mu h`.
    pub fn priced(&self, mu: T) -> T {
        self.energy_j + mu * self.h_hz
    }
}

impl<T: Scalar> PairProblem<T> {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("kappa", self.kappa),
            ("y1", self.y1_cycles),
            ("y2", self.y2_cycles),
            ("f_max", self.f_max_hz),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.mu >= T::zero() && self.mu.is_finite()) {
            return Err(Error::Domain(format!(
                "price must be finite and non-negative, got {}",
                self.mu
            )));
        }
        if !(self.t_budget_s > T::zero() && self.t_budget_s.is_finite()) {
            return Err(Error::InfeasibleDelay {
                pair: None,
                reason: format!("no computation budget left ({} s)", self.t_budget_s),
            });
        }
        if self.y1_cycles / self.f_max_hz >= self.t_budget_s {
            return Err(Error::InfeasibleDelay {
                pair: None,
                reason: format!(
                    "user computation alone needs {} s at f_max, budget is {} s",
                    self.y1_cycles / self.f_max_hz,
                    self.t_budget_s
                ),
            });
        }
        Ok(())
    }

    fn energy(&self, f: T, h: T) -> PairOptimum<T> {
        PairOptimum {
            f_hz: f,
            h_hz: h,
            energy_j: self.kappa * (self.y1_cycles * f * f + self.y2_cycles * h * h),
        }
    }

    /// Edge frequency that makes the delay tight for a given user frequency.
    fn tight_h(&self, f: T) -> T {
        self.y2_cycles / (self.t_budget_s - self.y1_cycles / f)
    }

    /// Solves `2 kappa h^3 + (mu / y2) h^2 = 2 kappa f^3` for `h` in `(0, f]`.
    fn stationary_h(&self, f: T, tol: T) -> T {
        if self.mu == T::zero() {
            return f;
        }
        let two_k = T::lit(2.0) * self.kappa;
        let lambda = two_k * f * f * f;
        let c = self.mu / self.y2_cycles;
        let (_, hi) = bisect(T::zero(), f, tol, |h| two_k * h * h * h + c * h * h >= lambda);
        hi
    }

    fn delay(&self, f: T, h: T) -> T {
        self.y1_cycles / f + self.y2_cycles / h
    }
}

/// Smallest edge frequency meeting the delay with the user CPU at `f_max`.
pub fn min_footprint<T: Scalar>(p: &PairProblem<T>) -> Result<T> {
    p.validate()?;
    Ok(p.tight_h(p.f_max_hz))
}

/// Optimal `(f, h)` for one pair at price `mu`.
pub fn pair_kkt<T: Scalar>(p: &PairProblem<T>, bisection_tol: T) -> Result<PairOptimum<T>> {
    p.validate()?;
    let tol = bisection_tol.max(T::tol_floor());
    let capped = || p.energy(p.f_max_hz, p.tight_h(p.f_max_hz));

    if p.mu == T::zero() {
        let f = (p.y1_cycles + p.y2_cycles) / p.t_budget_s;
        return Ok(if f <= p.f_max_hz { p.energy(f, f) } else { capped() });
    }

    if p.f_max_hz.is_finite() && p.delay(p.f_max_hz, p.stationary_h(p.f_max_hz, tol)) > p.t_budget_s {
        return Ok(capped());
    }
    // delay(f, h(f)) decreases in f; at f = y1/T_b it already exceeds the budget.
    let lo = p.y1_cycles / p.t_budget_s;
    let mut hi = if p.f_max_hz.is_finite() {
        p.f_max_hz
    } else {
        (p.y1_cycles + p.y2_cycles) / p.t_budget_s
    };
    let mut doublings = 0;
    while p.delay(hi, p.stationary_h(hi, tol)) > p.t_budget_s {
        hi = hi * T::lit(2.0);
        doublings += 1;
        if doublings > 2000 || !hi.is_finite() {
            return Err(Error::InfeasibleDelay {
                pair: None,
                reason: "no finite frequency meets the budget".into(),
            });
        }
    }
    let (_, f) = bisect(lo, hi, tol, |f| p.delay(f, p.stationary_h(f, tol)) <= p.t_budget_s);
    let f = f.min(p.f_max_hz);
    Ok(p.energy(f, p.tight_h(f)))
}

/// Bisection for a monotone predicate that is false at `lo` and true at `hi`.
/// Returns the final bracket; `hi` always satisfies the predicate.
pub(crate) fn bisect<T: Scalar>(mut lo: T, mut hi: T, tol: T, mut pred: impl FnMut(T) -> bool) -> (T, T) {
    for _ in 0..400 {
        if hi - lo <= tol * hi.abs() {
            break;
        }
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}
