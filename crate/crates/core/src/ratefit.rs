//! Decay exponents and logarithmic growth coefficients from sampled series.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

const MIN_SAMPLES: usize = 5;

/// Samples `(t_j, y_j)` with strictly increasing times and finite values.
///
/// Values may be signed (drift series); the fits check positivity where
/// they need it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl DecaySeries {
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if t.len() != y.len() {
            return Err(Error::InvalidParameter(format!("{} times but {} values", t.len(), y.len())));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) || t.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("sample times must be finite and strictly increasing".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("series contains non-finite values".into()));
        }
        Ok(Self { t, y })
    }

    pub fn from_fn(t: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(t.to_vec(), t.iter().map(|&s| f(s)).collect())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Samples with `t0 <= t <= t1`.
    pub fn window(&self, t0: f64, t1: f64) -> DecaySeries {
        let (t, y) = self.t.iter().zip(&self.y).filter(|(t, _)| **t >= t0 && **t <= t1).map(|(a, b)| (*a, *b)).unzip();
        DecaySeries { t, y }
    }

    /// Default fit window: the last decade of sample times.
    pub fn last_decade(&self) -> Option<(f64, f64)> {
        let t1 = *self.t.last()?;
        Some((t1 / 10.0, t1))
    }

    pub fn max_abs(&self) -> f64 {
        self.y.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.y.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Power-law fit `y ≈ C t^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub amplitude: f64,
    pub window: [f64; 2],
    /// RMS residual in log space.
    pub residual: f64,
    /// 95% confidence half-width of the exponent.
    pub half_width: f64,
}

impl FitResult {
    /// The whole confidence interval lies within `target ± tol`.
    pub fn within(&self, target: f64, tol: f64) -> bool {
        (self.exponent - target).abs() + self.half_width <= tol
    }

    /// The whole confidence interval lies at or below `bound`.
    pub fn at_most(&self, bound: f64) -> bool {
        self.exponent + self.half_width <= bound
    }
}

struct Ols {
    slope: f64,
    intercept: f64,
    rms: f64,
    half_width: f64,
}

fn ols(x: &[f64], y: &[f64]) -> Result<Ols> {
    ols_min(x, y, MIN_SAMPLES)
}

fn ols_min(x: &[f64], y: &[f64], min: usize) -> Result<Ols> {
    let n = x.len();
    if n < min.max(3) {
        return Err(Error::Fit(format!("need at least {} samples, got {n}", min.max(3))));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let dof = nf - 2.0;
    let se = (ss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Fit(e.to_string()))?.inverse_cdf(0.975);
    Ok(Ols { slope, intercept, rms: (ss / nf).sqrt(), half_width: t * se })
}

/// Least squares on `(log t, log y)` over `window`, or the last decade.
pub fn fit_power(series: &DecaySeries, window: Option<(f64, f64)>) -> Result<FitResult> {
    let (t0, t1) = window.or_else(|| series.last_decade()).ok_or_else(|| Error::Fit("empty series".into()))?;
    let w = series.window(t0, t1);
    if w.y.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("power fit needs strictly positive values in the window".into()));
    }
    if w.len() < MIN_SAMPLES {
        return Err(Error::Fit(format!("need at least {MIN_SAMPLES} samples in [{t0}, {t1}], got {}", w.len())));
    }
    let lx: Vec<f64> = w.t.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = w.y.iter().map(|y| y.ln()).collect();
    let r = ols(&lx, &ly)?;
    Ok(FitResult {
        exponent: r.slope,
        amplitude: r.intercept.exp(),
        window: [w.t[0], *w.t.last().unwrap()],
        residual: r.rms,
        half_width: r.half_width,
    })
}

/// Log-log slope of `y` against a positive abscissa, for short ladders
/// (at least three points) such as a parameter sweep.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<FitResult> {
    if x.len() != y.len() || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("log-log fit needs matching positive samples".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let r = ols_min(&lx, &ly, 3)?;
    Ok(FitResult {
        exponent: r.slope,
        amplitude: r.intercept.exp(),
        window: [x[0], *x.last().unwrap()],
        residual: r.rms,
        half_width: r.half_width,
    })
}

/// Behaviour of `y / log(1+t)` over the last samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plateau {
    /// The ratio settled (last three samples within 2%).
    Converged,
    /// `y` itself stopped growing: no logarithmic lower bound.
    Bounded,
    Drifting,
}

/// Fit `y ≈ c log(1+t) + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGrowthFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: [f64; 2],
    pub residual: f64,
    pub half_width: f64,
    pub plateau: Plateau,
    /// Last `y / log(1+t)`.
    pub final_ratio: f64,
}

/// Relative spread `(max - min) / max|·|` of the last `k` values.
pub fn tail_spread(values: &[f64], k: usize) -> f64 {
    let tail = &values[values.len().saturating_sub(k)..];
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = tail.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        0.0
    } else {
        (hi - lo) / scale
    }
}

pub const PLATEAU_TOL: f64 = 0.02;

pub fn fit_log_growth(series: &DecaySeries) -> Result<LogGrowthFit> {
    if series.len() < MIN_SAMPLES {
        return Err(Error::Fit(format!("need at least {MIN_SAMPLES} samples, got {}", series.len())));
    }
    let scale = series.max_abs().max(f64::MIN_POSITIVE);
    if series.y.windows(2).any(|w| w[1] < w[0] - 1e-12 * scale) {
        return Err(Error::Fit("log-growth fit needs a nondecreasing series".into()));
    }
    let lx: Vec<f64> = series.t.iter().map(|t| t.ln_1p()).collect();
    let r = ols(&lx, &series.y)?;
    let ratios: Vec<f64> = series.y.iter().zip(&lx).map(|(y, l)| y / l).collect();
    let plateau = if tail_spread(&ratios, 3) < PLATEAU_TOL {
        Plateau::Converged
    } else if tail_spread(&series.y, 3) < PLATEAU_TOL {
        Plateau::Bounded
    } else {
        Plateau::Drifting
    };
    Ok(LogGrowthFit {
        slope: r.slope,
        intercept: r.intercept,
        window: [series.t[0], *series.t.last().unwrap()],
        residual: r.rms,
        half_width: r.half_width,
        plateau,
        final_ratio: *ratios.last().unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ladder(t0: f64, rho: f64, n: usize) -> Vec<f64> {
        (0..n).map(|j| t0 * rho.powi(j as i32)).collect()
    }

    #[test]
    fn exact_power_law() {
        let t = ladder(1.0, 1.5, 30);
        let s = DecaySeries::from_fn(&t, |t| t.powf(-0.75)).unwrap();
        let f = fit_power(&s, Some((1.0, 1e6))).unwrap();
        assert!((f.exponent + 0.75).abs() < 1e-12);
        assert!((f.amplitude - 1.0).abs() < 1e-10);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn power_law_with_correction() {
        let t = ladder(100.0, 1.2, 26);
        let s = DecaySeries::from_fn(&t, |t| 3.0 * t.powf(-2.5) * (1.0 + 0.1 / t.sqrt())).unwrap();
        let f = fit_power(&s, Some((1e2, 1e4))).unwrap();
        assert!((f.exponent + 2.5).abs() < 0.02);
        assert!(f.half_width > 0.0);
    }

    #[test]
    fn zero_value_and_few_samples_rejected() {
        let s = DecaySeries::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![1.0, 0.5, 0.0, 0.2, 0.1, 0.05]).unwrap();
        assert!(matches!(fit_power(&s, Some((1.0, 6.0))), Err(Error::Fit(_))));
        let s = DecaySeries::from_fn(&[1.0, 2.0, 3.0], |t| 1.0 / t).unwrap();
        assert!(fit_power(&s, None).is_err());
    }

    #[test]
    fn default_window_is_last_decade() {
        let t = ladder(1.0, 1.25, 40);
        let s = DecaySeries::from_fn(&t, |t| t.powf(-1.0)).unwrap();
        let f = fit_power(&s, None).unwrap();
        let t1 = *t.last().unwrap();
        assert!(f.window[0] >= t1 / 10.0 && f.window[1] == t1);
    }

    #[test]
    fn log_growth_exact() {
        let t = ladder(1.0, 2.0, 20);
        let s = DecaySeries::from_fn(&t, |t| 2.0 * t.ln_1p()).unwrap();
        let f = fit_log_growth(&s).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert_eq!(f.plateau, Plateau::Converged);
        let s = DecaySeries::from_fn(&t, |t| 2.0 * t.ln_1p() + 5.0).unwrap();
        let f = fit_log_growth(&s).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 5.0).abs() < 1e-10);
    }

    #[test]
    fn bounded_series_flagged() {
        let t = ladder(1.0, 1.25, 45);
        let s = DecaySeries::from_fn(&t, |t| 1.0 - 1.0 / (1.0 + t)).unwrap();
        let f = fit_log_growth(&s).unwrap();
        assert!(f.slope.abs() < 0.1);
        assert_eq!(f.plateau, Plateau::Bounded);
    }

    #[test]
    fn decreasing_series_rejected() {
        let s = DecaySeries::from_fn(&ladder(1.0, 2.0, 8), |t| 1.0 / t).unwrap();
        assert!(fit_log_growth(&s).is_err());
    }

    #[test]
    fn bad_series_rejected() {
        assert!(DecaySeries::new(vec![1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(DecaySeries::new(vec![1.0, 2.0], vec![1.0, f64::NAN]).is_err());
        assert!(DecaySeries::new(vec![1.0, 2.0], vec![1.0]).is_err());
    }

    #[test]
    fn fit_result_json_schema() {
        let f = FitResult { exponent: -0.75, amplitude: 2.0, window: [10.0, 100.0], residual: 0.0, half_width: 0.01 };
        let v: serde_json::Value = serde_json::to_value(f).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["amplitude", "exponent", "half_width", "residual", "window"]);
        assert_eq!(v["window"].as_array().unwrap().len(), 2);
    }

    proptest! {
        #[test]
        fn rescaling_time_keeps_exponent(p in -3.0f64..-0.1, s in 0.1f64..10.0) {
            let t = ladder(1.0, 1.3, 25);
            let a = fit_power(&DecaySeries::from_fn(&t, |t| t.powf(p) * (1.0 + 0.2 / t)).unwrap(), Some((1.0, 1e9))).unwrap();
            let b = fit_power(&DecaySeries::from_fn(&t, |t| (s * t).powf(p) * (1.0 + 0.2 / t)).unwrap(), Some((1.0, 1e9))).unwrap();
            prop_assert!((a.exponent - b.exponent).abs() < 1e-9);
            prop_assert!((b.amplitude / a.amplitude - s.powf(p)).abs() < 1e-8 * s.powf(p));
        }

        #[test]
        fn log_slope_shift_invariant(c in -10.0f64..10.0) {
            let t = ladder(1.0, 1.5, 20);
            let a = fit_log_growth(&DecaySeries::from_fn(&t, |t| 0.7 * t.ln_1p() + t.sqrt().min(3.0)).unwrap()).unwrap();
            let b = fit_log_growth(&DecaySeries::from_fn(&t, |t| 0.7 * t.ln_1p() + t.sqrt().min(3.0) + c).unwrap()).unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-9);
        }
    }
}
