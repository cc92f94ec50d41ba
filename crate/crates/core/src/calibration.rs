//! Fits the QoS line and the per-side cycle counts from measured samples.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::QosModel;
use crate::scalar::Scalar;

/// One measurement at a given extraction ratio. Columns in CSV: `delta,accuracy[,t_user_s,t_edge_s,f_hz]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample<T> {
    pub delta: T,
    pub accuracy: T,
    #[serde(default)]
    pub t_user_s: Option<T>,
    #[serde(default)]
    pub t_edge_s: Option<T>,
    /// CPU frequency the timings were taken at.
    #[serde(default)]
    pub f_hz: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
    pub max_abs_residual: T,
    pub samples: usize,
}

impl<T: Scalar> QosFit<T> {
    /// The fitted line as a validated QoS model.
    pub fn model(&self) -> Result<QosModel<T>> {
        QosModel::new(self.slope, self.intercept).map_err(|e| Error::Calibration(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleEstimate<T> {
    pub y1_cycles: T,
    pub y2_cycles: T,
    /// `|d c / d delta| / mean(c)` for user cycle counts `c = t f`; near zero when the cost is independent of delta.
    pub user_constancy: T,
    pub edge_constancy: T,
}

struct Line<T> {
    slope: T,
    intercept: T,
}

/// Ordinary least squares, `None` when all `x` coincide.
fn ols<T: Scalar>(xs: &[T], ys: &[T]) -> Option<Line<T>> {
    let n = T::lit(xs.len() as f64);
    let mx = xs.iter().fold(T::zero(), |a, &x| a + x) / n;
    let my = ys.iter().fold(T::zero(), |a, &y| a + y) / n;
    let (sxx, sxy) = xs.iter().zip(ys).fold((T::zero(), T::zero()), |(sxx, sxy), (&x, &y)| {
        (sxx + (x - mx) * (x - mx), sxy + (x - mx) * (y - my))
    });
    (sxx > T::zero()).then(|| {
        let slope = sxy / sxx;
        Line {
            slope,
            intercept: my - slope * mx,
        }
    })
}

fn check_sample<T: Scalar>(i: usize, s: &CalibrationSample<T>) -> Result<()> {
    if !(s.delta > T::zero() && s.delta <= T::one()) {
        return Err(Error::Calibration(format!(
            "sample {i}: delta {} outside (0, 1]",
            s.delta
        )));
    }
    if !(s.accuracy >= T::zero() && s.accuracy <= T::one()) {
        return Err(Error::Calibration(format!(
            "sample {i}: accuracy {} outside [0, 1]",
            s.accuracy
        )));
    }
    Ok(())
}

pub fn fit_qos_model<T: Scalar>(samples: &[CalibrationSample<T>]) -> Result<QosFit<T>> {
    for (i, s) in samples.iter().enumerate() {
        check_sample(i, s)?;
    }
    fit_line(samples)
}

fn fit_line<T: Scalar>(samples: &[CalibrationSample<T>]) -> Result<QosFit<T>> {
    if samples.len() < 2 {
        return Err(Error::Calibration("need at least two samples".into()));
    }
    let xs: Vec<T> = samples.iter().map(|s| s.delta).collect();
    let ys: Vec<T> = samples.iter().map(|s| s.accuracy).collect();
    let line = ols(&xs, &ys).ok_or_else(|| Error::Calibration("all samples share one delta".into()))?;
    let mean = ys.iter().fold(T::zero(), |a, &y| a + y) / T::lit(ys.len() as f64);
    let (mut ss_res, mut ss_tot, mut max_res) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(&ys) {
        let r = y - (line.slope * x + line.intercept);
        ss_res = ss_res + r * r;
        ss_tot = ss_tot + (y - mean) * (y - mean);
        max_res = max_res.max(r.abs());
    }
    let r_squared = if ss_tot > T::zero() {
        T::one() - ss_res / ss_tot
    } else {
        T::one()
    };
    Ok(QosFit {
        slope: line.slope,
        intercept: line.intercept,
        r_squared,
        max_abs_residual: max_res,
        samples: samples.len(),
    })
}

fn median<T: Scalar>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / T::lit(2.0)
    }
}

fn constancy<T: Scalar>(deltas: &[T], cycles: &[T]) -> T {
    let mean = cycles.iter().fold(T::zero(), |a, &c| a + c) / T::lit(cycles.len() as f64);
    match ols(deltas, cycles) {
        Some(line) if mean > T::zero() => line.slope.abs() / mean,
        _ => T::zero(),
    }
}

/// Median cycle counts `t * f` per side plus a constancy diagnostic against delta.
pub fn estimate_cycles<T: Scalar>(samples: &[CalibrationSample<T>]) -> Result<CycleEstimate<T>> {
    if samples.is_empty() {
        return Err(Error::Calibration("no samples".into()));
    }
    let mut deltas = Vec::with_capacity(samples.len());
    let mut t_user = Vec::with_capacity(samples.len());
    let mut t_edge = Vec::with_capacity(samples.len());
    let mut freqs = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let (Some(tu), Some(te), Some(f)) = (s.t_user_s, s.t_edge_s, s.f_hz) else {
            return Err(Error::Calibration(format!(
                "sample {i} lacks t_user_s, t_edge_s or f_hz"
            )));
        };
        if !(tu > T::zero() && te > T::zero() && f > T::zero()) {
            return Err(Error::Calibration(format!("sample {i} has non-positive timing fields")));
        }
        deltas.push(s.delta);
        t_user.push(tu);
        t_edge.push(te);
        freqs.push(f);
    }
    let cycles = |ts: &[T]| ts.iter().zip(&freqs).map(|(&t, &f)| t * f).collect::<Vec<T>>();
    let (c_user, c_edge) = (cycles(&t_user), cycles(&t_edge));
    Ok(CycleEstimate {
        user_constancy: constancy(&deltas, &c_user),
        edge_constancy: constancy(&deltas, &c_edge),
        y1_cycles: median(c_user),
        y2_cycles: median(c_edge),
    })
}

pub fn read_samples<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<CalibrationSample<T>>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Calibration(format!("{}: {e}", path.display())))?;
    read_samples_from(file)
}

pub fn read_samples_from<T: Scalar, R: Read>(reader: R) -> Result<Vec<CalibrationSample<T>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::Calibration(format!("bad sample row: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn sample(delta: f64, accuracy: f64) -> CalibrationSample<f64> {
        CalibrationSample {
            delta,
            accuracy,
            t_user_s: None,
            t_edge_s: None,
            f_hz: None,
        }
    }

    fn timed(delta: f64, tu: f64, te: f64) -> CalibrationSample<f64> {
        CalibrationSample {
            t_user_s: Some(tu),
            t_edge_s: Some(te),
            f_hz: Some(1e9),
            ..sample(delta, 0.5)
        }
    }

    #[test]
    fn exact_line_recovered() {
        let s: Vec<_> = (1..=10)
            .map(|i| i as f64 / 10.0)
            .map(|d| sample(d, 0.873 * d + 0.1006))
            .collect();
        let fit = fit_qos_model(&s).unwrap();
        assert!((fit.slope - 0.873).abs() <= 1e-9);
        assert!((fit.intercept - 0.1006).abs() <= 1e-9);
        assert_relative_eq!(fit.r_squared, 1.0, max_relative = 1e-12);
        assert!(fit.max_abs_residual < 1e-12);
        assert_eq!(fit.model().unwrap(), QosModel::new(fit.slope, fit.intercept).unwrap());
    }

    #[test]
    fn two_point_line() {
        let fit = fit_qos_model(&[sample(1e-9, 0.2), sample(1.0, 0.9)]).unwrap();
        assert_relative_eq!(fit.slope, 0.7 / (1.0 - 1e-9), max_relative = 1e-12);
        assert_relative_eq!(fit.intercept, 0.2 - fit.slope * 1e-9, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_design_rejected() {
        let err = fit_qos_model(&[sample(0.5, 0.4), sample(0.5, 0.6)]).unwrap_err();
        assert!(matches!(err, Error::Calibration(_)));
        assert!(fit_qos_model(&[sample(0.5, 0.4)]).is_err());
        assert!(fit_qos_model(&[sample(1.5, 0.4), sample(0.5, 0.4)]).is_err());
    }

    #[test]
    fn noisy_line_within_three_standard_errors() {
        let sigma = 0.01;
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let deltas: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let s: Vec<_> = deltas
            .iter()
            .map(|&d| sample(d, 0.873 * d + 0.1006 + noise.sample(&mut rng)))
            .collect();
        let fit = fit_qos_model(&s).unwrap();
        let mean = deltas.iter().sum::<f64>() / 100.0;
        let sxx: f64 = deltas.iter().map(|d| (d - mean).powi(2)).sum();
        let se = sigma / sxx.sqrt();
        assert!((fit.slope - 0.873).abs() <= 3.0 * se, "slope {} se {se}", fit.slope);
    }

    #[test]
    fn constant_timings() {
        let s: Vec<_> = (1..=10).map(|i| timed(i as f64 / 10.0, 0.01, 0.02)).collect();
        let c = estimate_cycles(&s).unwrap();
        assert_relative_eq!(c.y1_cycles, 1e7, max_relative = 1e-12);
        assert_relative_eq!(c.y2_cycles, 2e7, max_relative = 1e-12);
        assert!(c.user_constancy < 1e-9 && c.edge_constancy < 1e-9);
    }

    #[test]
    fn spike_does_not_move_median() {
        let mut s: Vec<_> = (1..=9).map(|i| timed(i as f64 / 10.0, 0.01, 0.02)).collect();
        s[4].t_user_s = Some(0.5);
        let c = estimate_cycles(&s).unwrap();
        assert_relative_eq!(c.y1_cycles, 1e7, max_relative = 1e-12);
    }

    #[test]
    fn sloped_timings_flagged() {
        let m = 0.01;
        // t = m (1 + 0.1 (delta - 0.5)) over a grid symmetric about 0.5, so mean t = m
        let s: Vec<_> = (0..=100)
            .map(|i| {
                let d = 1e-3 + 0.998 * i as f64 / 100.0;
                timed(d, m * (1.0 + 0.1 * (d - 0.5)), 0.02)
            })
            .collect();
        let c = estimate_cycles(&s).unwrap();
        assert!((c.user_constancy - 0.1).abs() <= 0.01, "{}", c.user_constancy);
        assert!(c.edge_constancy < 1e-9);
    }

    #[test]
    fn missing_timings_rejected() {
        assert!(matches!(
            estimate_cycles(&[sample(0.5, 0.5)]),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn csv_ingestion_with_and_without_timings() {
        let text = "delta,accuracy\n0.2,0.275\n1.0,0.9736\n";
        let s: Vec<CalibrationSample<f64>> = read_samples_from(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].t_user_s, None);
        let text = "delta,accuracy,t_user_s,t_edge_s,f_hz\n0.5,0.53,0.01,0.02,1e9\n0.6,0.62,,0.02,1e9\n";
        let s: Vec<CalibrationSample<f64>> = read_samples_from(text.as_bytes()).unwrap();
        assert_eq!(s[0].f_hz, Some(1e9));
        assert_eq!(s[1].t_user_s, None);
        assert!(read_samples_from::<f64, _>("delta,accuracy\nx,1\n".as_bytes()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fit_is_affine_equivariant(c in 0.05f64..1.0, noise in proptest::collection::vec(-0.02f64..0.02, 8)) {
                let s: Vec<_> = noise.iter().enumerate()
                    .map(|(i, e)| { let d = (i + 1) as f64 / 8.0; sample(d, 0.8 * d + 0.1 + e) })
                    .collect();
                let scaled: Vec<_> = s.iter().map(|x| sample(x.delta, c * x.accuracy)).collect();
                let a = fit_qos_model(&s).unwrap();
                let b = fit_qos_model(&scaled).unwrap();
                prop_assert!((b.slope - c * a.slope).abs() <= 1e-12);
                prop_assert!((b.intercept - c * a.intercept).abs() <= 1e-12);
            }

            #[test]
            fn cycles_invariant_to_order(ts in proptest::collection::vec((0.001f64..1.0, 0.001f64..0.1, 0.001f64..0.1), 2..20), seed in 0u64..1000) {
                use rand::seq::SliceRandom;
                let s: Vec<_> = ts.iter().map(|&(d, tu, te)| timed(d, tu, te)).collect();
                let mut shuffled = s.clone();
                shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let a = estimate_cycles(&s).unwrap();
                let b = estimate_cycles(&shuffled).unwrap();
                prop_assert_eq!(a.y1_cycles, b.y1_cycles);
                prop_assert_eq!(a.y2_cycles, b.y2_cycles);
                prop_assert!((a.user_constancy - b.user_constancy).abs() <= 1e-9 * a.user_constancy.max(1e-12));
            }
        }
    }
}
