//! Physical-layer, energy and delay formulas of the offloading system.
//!
//! Everything here is a pure function over SI quantities (W, Hz, s, J). Users
//! run semantic extraction (`y1` cycles at frequency `f`), upload a fraction
//! `delta` of the encoded sample over a Shannon-rate link, and the serving
//! edge reconstructs and classifies it (`y2` cycles at frequency `h`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::DecisionSet;
use crate::scalar::Scalar;
use crate::scenario::Scenario;

/// Floor used for the extraction ratio when the QoS constraint is vacuous.
pub const DELTA_FLOOR: f64 = 1e-6;

/// Global physical constants shared by every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams<T> {
    /// Effective switched capacitance coefficient.
    pub kappa: T,
    /// Encoder output size in elements.
    pub theta_elements: T,
    pub bits_per_element: T,
    /// Raw input sample size in elements.
    pub source_image_elements: T,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: T,
    /// CPU cycles for semantic extraction and selection at a user.
    pub y1_cycles: T,
    /// CPU cycles for reconstruction and classification at an edge.
    pub y2_cycles: T,
}

impl<T: Scalar> Default for SystemParams<T> {
    fn default() -> Self {
        SystemParams {
            kappa: T::lit(1e-28),
            theta_elements: T::lit(392.0),
            bits_per_element: T::lit(32.0),
            source_image_elements: T::lit(784.0),
            noise_psd: T::lit(dbm_per_hz_to_w_per_hz(-174.0)),
            y1_cycles: T::lit(1e7),
            y2_cycles: T::lit(2e7),
        }
    }
}

impl<T: Scalar> SystemParams<T> {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("kappa", self.kappa),
            ("theta_elements", self.theta_elements),
            ("bits_per_element", self.bits_per_element),
            ("source_image_elements", self.source_image_elements),
            ("noise_psd", self.noise_psd),
            ("y1_cycles", self.y1_cycles),
            ("y2_cycles", self.y2_cycles),
        ];
        for (name, v) in fields {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.theta_elements > self.source_image_elements {
            return Err(Error::Config(format!(
                "theta_elements ({}) exceeds source_image_elements ({})",
                self.theta_elements, self.source_image_elements
            )));
        }
        Ok(())
    }

    /// Size of the full encoded representation in bits.
    pub fn theta_bits(&self) -> T {
        self.theta_elements * self.bits_per_element
    }
}

/// Linear quality-of-service model `Q(delta) = slope * delta + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosModel<T> {
    pub slope: T,
    pub intercept: T,
}

impl<T: Scalar> Default for QosModel<T> {
    fn default() -> Self {
        QosModel {
            slope: T::lit(0.873),
            intercept: T::lit(0.1006),
        }
    }
}

impl<T: Scalar> QosModel<T> {
    pub fn new(slope: T, intercept: T) -> Result<Self> {
        let m = QosModel { slope, intercept };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.slope > T::zero()
            && self.intercept >= T::zero()
            && self.intercept < T::one()
            && self.slope + self.intercept <= T::one() + T::tol_floor();
        if !ok {
            return Err(Error::Config(format!(
                "invalid QoS model: slope {} intercept {}",
                self.slope, self.intercept
            )));
        }
        Ok(())
    }

    /// Quality reached when the full representation is sent.
    pub fn max_quality(&self) -> T {
        self.slope + self.intercept
    }
}

pub fn qos_of_delta<T: Scalar>(model: &QosModel<T>, delta: T) -> Result<T> {
    check_delta(delta)?;
    Ok(model.slope * delta + model.intercept)
}

/// Smallest extraction ratio meeting `q_min`, clamped to `[DELTA_FLOOR, 1]`.
pub fn delta_for_qos<T: Scalar>(model: &QosModel<T>, q_min: T) -> Result<T> {
    let max_q = model.max_quality();
    if !q_min.is_finite() || q_min > max_q + T::lit(1e-12) * max_q {
        return Err(Error::InfeasibleQos {
            q_min: q_min.as_f64(),
            max_quality: max_q.as_f64(),
        });
    }
    let floor = T::lit(DELTA_FLOOR);
    if q_min <= model.intercept {
        return Ok(floor);
    }
    let delta = (q_min - model.intercept) / model.slope;
    Ok(delta.max(floor).min(T::one()))
}

/// Uplink Shannon rate `b log2(1 + p g / (b N0))` in bits/s.
pub fn shannon_rate<T: Scalar>(power_w: T, gain: T, bandwidth_hz: T, noise_psd: T) -> Result<T> {
    for (name, v) in [
        ("power", power_w),
        ("gain", gain),
        ("bandwidth", bandwidth_hz),
        ("noise psd", noise_psd),
    ] {
        if !(v > T::zero()) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    let snr = power_w * gain / (bandwidth_hz * noise_psd);
    Ok(bandwidth_hz * snr.ln_1p() / T::LN_2())
}

pub fn t_comp_user<T: Scalar>(y1_cycles: T, f_hz: T) -> Result<T> {
    compute_time(y1_cycles, f_hz)
}

pub fn e_comp_user<T: Scalar>(kappa: T, y1_cycles: T, f_hz: T) -> Result<T> {
    compute_energy(kappa, y1_cycles, f_hz)
}

pub fn t_comp_edge<T: Scalar>(y2_cycles: T, h_hz: T) -> Result<T> {
    compute_time(y2_cycles, h_hz)
}

pub fn e_comp_edge<T: Scalar>(kappa: T, y2_cycles: T, h_hz: T) -> Result<T> {
    compute_energy(kappa, y2_cycles, h_hz)
}

fn compute_time<T: Scalar>(cycles: T, freq: T) -> Result<T> {
    if !(freq > T::zero()) {
        return Err(Error::Domain(format!("CPU frequency must be positive, got {freq}")));
    }
    if cycles < T::zero() {
        return Err(Error::Domain(format!("cycle count must be non-negative, got {cycles}")));
    }
    Ok(cycles / freq)
}

fn compute_energy<T: Scalar>(kappa: T, cycles: T, freq: T) -> Result<T> {
    if kappa < T::zero() || cycles < T::zero() || freq < T::zero() {
        return Err(Error::Domain(format!(
            "energy inputs must be non-negative (kappa {kappa}, cycles {cycles}, frequency {freq})"
        )));
    }
    Ok(kappa * cycles * freq * freq)
}

fn check_delta<T: Scalar>(delta: T) -> Result<()> {
    if !(delta > T::zero() && delta <= T::one()) {
        return Err(Error::Domain(format!(
            "extraction ratio must lie in (0, 1], got {delta}"
        )));
    }
    Ok(())
}

pub fn t_trans<T: Scalar>(delta: T, theta_bits: T, rate_bps: T) -> Result<T> {
    check_delta(delta)?;
    if !(rate_bps > T::zero()) {
        return Err(Error::Domain(format!("rate must be positive, got {rate_bps}")));
    }
    Ok(delta * theta_bits / rate_bps)
}

pub fn e_trans<T: Scalar>(delta: T, theta_bits: T, link: &RadioLink<T>) -> Result<T> {
    Ok(t_trans(delta, theta_bits, link.rate_bps())? * link.power_w())
}

/// Radio resources of one user-edge pair. The rate is always derived from the others.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioLink<T> {
    distance_m: T,
    gain: T,
    power_w: T,
    bandwidth_hz: T,
    rate_bps: T,
}

impl<T: Scalar> RadioLink<T> {
    pub fn new(distance_m: T, gain: T, power_w: T, bandwidth_hz: T, noise_psd: T) -> Result<Self> {
        if !(distance_m > T::zero()) {
            return Err(Error::Domain(format!(
                "link distance must be positive, got {distance_m}"
            )));
        }
        let rate_bps = shannon_rate(power_w, gain, bandwidth_hz, noise_psd)?;
        Ok(RadioLink {
            distance_m,
            gain,
            power_w,
            bandwidth_hz,
            rate_bps,
        })
    }

    pub fn distance_m(&self) -> T {
        self.distance_m
    }

    pub fn gain(&self) -> T {
        self.gain
    }

    pub fn power_w(&self) -> T {
        self.power_w
    }

    pub fn bandwidth_hz(&self) -> T {
        self.bandwidth_hz
    }

    pub fn rate_bps(&self) -> T {
        self.rate_bps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown<T> {
    pub e_comp_user_j: T,
    pub e_trans_j: T,
    pub e_comp_edge_j: T,
    pub total_j: T,
}

impl<T: Scalar> EnergyBreakdown<T> {
    pub fn zero() -> Self {
        Self::from_parts(T::zero(), T::zero(), T::zero())
    }

    pub fn from_parts(e_comp_user_j: T, e_trans_j: T, e_comp_edge_j: T) -> Self {
        EnergyBreakdown {
            e_comp_user_j,
            e_trans_j,
            e_comp_edge_j,
            total_j: e_comp_user_j + e_trans_j + e_comp_edge_j,
        }
    }

    fn add_weighted(&mut self, w: T, other: &Self) {
        *self = Self::from_parts(
            self.e_comp_user_j + w * other.e_comp_user_j,
            self.e_trans_j + w * other.e_trans_j,
            self.e_comp_edge_j + w * other.e_comp_edge_j,
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown<T> {
    pub t_comp_user_s: T,
    pub t_trans_s: T,
    pub t_comp_edge_s: T,
    pub total_s: T,
}

impl<T: Scalar> LatencyBreakdown<T> {
    pub fn from_parts(t_comp_user_s: T, t_trans_s: T, t_comp_edge_s: T) -> Self {
        LatencyBreakdown {
            t_comp_user_s,
            t_trans_s,
            t_comp_edge_s,
            total_s: t_comp_user_s + t_trans_s + t_comp_edge_s,
        }
    }
}

/// Energy of serving one user on one edge with the given decisions.
pub fn pair_energy<T: Scalar>(
    params: &SystemParams<T>,
    link: &RadioLink<T>,
    delta: T,
    f_hz: T,
    h_hz: T,
) -> Result<EnergyBreakdown<T>> {
    Ok(EnergyBreakdown::from_parts(
        e_comp_user(params.kappa, params.y1_cycles, f_hz)?,
        e_trans(delta, params.theta_bits(), link)?,
        e_comp_edge(params.kappa, params.y2_cycles, h_hz)?,
    ))
}

pub fn pair_latency<T: Scalar>(
    params: &SystemParams<T>,
    link: &RadioLink<T>,
    delta: T,
    f_hz: T,
    h_hz: T,
) -> Result<LatencyBreakdown<T>> {
    Ok(LatencyBreakdown::from_parts(
        t_comp_user(params.y1_cycles, f_hz)?,
        t_trans(delta, params.theta_bits(), link.rate_bps())?,
        t_comp_edge(params.y2_cycles, h_hz)?,
    ))
}

/// Association-weighted system energy. Pairs with zero weight are skipped entirely.
pub fn total_energy<T: Scalar>(scenario: &Scenario<T>, decisions: &DecisionSet<T>) -> Result<EnergyBreakdown<T>> {
    decisions.ensure_shape(scenario.shape())?;
    let mut acc = EnergyBreakdown::zero();
    for ((u, n), &x) in decisions.x.indexed() {
        if x == T::zero() {
            continue;
        }
        let e = pair_energy(
            &scenario.params,
            scenario.link(u, n),
            decisions.delta[(u, n)],
            decisions.f[(u, n)],
            decisions.h[(u, n)],
        )?;
        acc.add_weighted(x, &e);
    }
    Ok(acc)
}

pub fn total_qos<T: Scalar>(scenario: &Scenario<T>, qos: &QosModel<T>, decisions: &DecisionSet<T>) -> Result<T> {
    decisions.ensure_shape(scenario.shape())?;
    let mut sum = T::zero();
    for ((u, n), &x) in decisions.x.indexed() {
        if x != T::zero() {
            sum = sum + x * qos_of_delta(qos, decisions.delta[(u, n)])?;
        }
    }
    Ok(sum)
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn dbm_per_hz_to_w_per_hz(dbm_hz: f64) -> f64 {
    dbm_to_w(dbm_hz)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
