//! The parabolic flow `v_t + Sv = 0`, its conserved weighted mass and the
//! upper and lower decay measurements built on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::harmonic::HarmonicPair;
use crate::operator::SpectralDecomposition;
use crate::potential::Potential;
use crate::ratefit::{fit_log_growth, fit_power, DecaySeries, FitResult, LogGrowthFit};

/// Relative size of discarded modes tolerated by a truncated spectrum.
pub const TRUNCATION_TOL: f64 = 1e-14;

/// Geometric ladder `t_j = t0 · ratio^j`, `j = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeLadder {
    pub t0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl TimeLadder {
    pub fn new(t0: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(t0 > 0.0 && ratio > 1.0 && count >= 1) {
            return Err(Error::InvalidParameter(format!(
                "time ladder needs t0 > 0, ratio > 1, count >= 1 (got {t0}, {ratio}, {count})"
            )));
        }
        Ok(Self { t0, ratio, count })
    }

    /// Longest ladder with ratio `ratio` that ends exactly at `t1` and
    /// starts at or after `t0`.
    pub fn spanning(t0: f64, t1: f64, ratio: f64) -> Result<Self> {
        if !(t1 >= t0 && t0 > 0.0 && ratio > 1.0) {
            return Err(Error::InvalidParameter(format!("bad ladder span [{t0}, {t1}] with ratio {ratio}")));
        }
        let steps = ((t1 / t0).ln() / ratio.ln() + 1e-9).floor() as i32;
        Self::new(t1 / ratio.powi(steps), ratio, steps as usize + 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.t0 * self.ratio.powi(j as i32)).collect()
    }

    pub fn last(&self) -> f64 {
        self.t0 * self.ratio.powi(self.count as i32 - 1)
    }
}

/// Fit window excluding transients and wall contamination: `[10, (L/8)²]`.
pub fn default_fit_window(half_width: f64) -> (f64, f64) {
    (10.0, (half_width / 8.0).powi(2))
}

/// Quadrature nodes and weights for `∫_0^{t_j}`, grouped by ladder segment:
/// segment 0 is Simpson on `[0, t_0]`, segment `j` is Simpson in `log τ`
/// between `t_{j-1}` and `t_j`, which integrates the `1/τ` tails of these
/// functionals almost exactly. Shared endpoints appear in both segments.
pub fn quadrature_segments(times: &[f64]) -> Vec<Vec<(f64, f64)>> {
    const DENSE: usize = 2000;
    const SUB: usize = 16;
    let simpson = |a: f64, b: f64, m: usize| -> Vec<(f64, f64)> {
        let h = (b - a) / m as f64;
        (0..=m)
            .map(|i| {
                let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                (a + i as f64 * h, w * h / 3.0)
            })
            .collect()
    };
    let mut out = Vec::with_capacity(times.len());
    if let Some(&t0) = times.first() {
        out.push(simpson(0.0, t0, DENSE));
    }
    for w in times.windows(2) {
        let seg = simpson(w[0].ln(), w[1].ln(), SUB).into_iter().map(|(s, wt)| (s.exp(), wt * s.exp())).collect();
        out.push(seg);
    }
    out
}

/// Running integrals of several integrands evaluated together; `eval`
/// returns all integrand values at one time. Also returns the running sup
/// of each integrand over the nodes.
pub fn cumulative_integrals<const K: usize>(eval: impl Fn(f64) -> [f64; K] + Sync, times: &[f64]) -> ([Vec<f64>; K], [Vec<f64>; K]) {
    let segments = quadrature_segments(times);
    let mut ints: [Vec<f64>; K] = std::array::from_fn(|_| Vec::with_capacity(times.len()));
    let mut sups: [Vec<f64>; K] = std::array::from_fn(|_| Vec::with_capacity(times.len()));
    let mut acc = [0.0; K];
    let mut sup = [f64::NEG_INFINITY; K];
    for seg in segments {
        let vals = crate::par::map_range(seg.len(), |i| eval(seg[i].0));
        for ((_, w), v) in seg.iter().zip(&vals) {
            for k in 0..K {
                acc[k] += w * v[k];
                sup[k] = sup[k].max(v[k]);
            }
        }
        for k in 0..K {
            ints[k].push(acc[k]);
            sups[k].push(sup[k]);
        }
    }
    (ints, sups)
}

/// `∫_0^{t_j} g(τ) dτ` at every ladder time.
pub fn cumulative_integral(g: impl Fn(f64) -> f64 + Sync, times: &[f64]) -> Vec<f64> {
    let ([i], _) = cumulative_integrals(|t| [g(t)], times);
    i
}

/// `e^{-tS}` applied to a fixed initial field through its spectral
/// coefficients.
#[derive(Debug, Clone)]
pub struct HeatFlow<'a> {
    dec: &'a SpectralDecomposition,
    coeffs: Vec<f64>,
    valid_from: f64,
}

impl<'a> HeatFlow<'a> {
    pub fn new(dec: &'a SpectralDecomposition, f: &Field) -> Result<Self> {
        let coeffs = dec.coefficients(f)?;
        let valid_from = dec.cutoff().map_or(0.0, |c| dec.valid_from(c, TRUNCATION_TOL));
        Ok(Self { dec, coeffs, valid_from })
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        self.dec
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Earliest time the flow is trusted (nonzero for truncated spectra).
    pub fn valid_from(&self) -> f64 {
        self.valid_from
    }

    fn check(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("heat flow time must be nonnegative, got {t}")));
        }
        if t < self.valid_from {
            return Err(Error::SpectrumTruncated { t, valid_from: self.valid_from });
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> Result<Field> {
        self.check(t)?;
        Ok(self.dec.synthesize_with(&self.coeffs, |l| (-l * t).exp()))
    }

    /// `Σ λ^p e^{-2λt} c²`; `p = 0, 1, 2` give `‖v‖²`, `‖S^{1/2}v‖²`, `‖Sv‖²`.
    pub fn spectral_moment(&self, t: f64, p: i32) -> f64 {
        self.coeffs
            .iter()
            .zip(self.dec.eigenvalues())
            .map(|(c, &l)| {
                let w = (-l * t).exp() * c;
                l.max(0.0).powi(p) * w * w
            })
            .sum()
    }

    pub fn l2(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.spectral_moment(t, 0).sqrt())
    }

    pub fn half_power_l2(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.spectral_moment(t, 1).sqrt())
    }

    pub fn trajectory(&self, times: &[f64]) -> Result<HeatTrajectory> {
        let fields = times.iter().map(|&t| self.at(t)).collect::<Result<Vec<_>>>()?;
        Ok(HeatTrajectory { times: times.to_vec(), fields })
    }
}

/// `v(t_j) = e^{-t_j S} f` on a set of times.
#[derive(Debug, Clone)]
pub struct HeatTrajectory {
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
}

pub fn evolve_heat(dec: &SpectralDecomposition, f: &Field, t: f64) -> Result<Field> {
    HeatFlow::new(dec, f)?.at(t)
}

/// `∫ v(t) w dx - ∫ f w dx` on the given times.
pub fn invariant_measure_drift(weight: &Field, dec: &SpectralDecomposition, f: &Field, times: &[f64]) -> Result<DecaySeries> {
    f.check_same_grid(weight)?;
    let flow = HeatFlow::new(dec, f)?;
    let m0 = f.mul(weight)?.integrate();
    let y = times
        .iter()
        .map(|&t| Ok(flow.at(t)?.mul(weight)?.integrate() - m0))
        .collect::<Result<Vec<_>>>()?;
    DecaySeries::new(times.to_vec(), y)
}

/// `‖w v(t)‖₁ - ‖w f‖₁` on the given times; never positive for a
/// contraction.
pub fn l1_contraction_check(weight: &Field, dec: &SpectralDecomposition, f: &Field, times: &[f64]) -> Result<DecaySeries> {
    let flow = HeatFlow::new(dec, f)?;
    let n0 = f.weighted_l1(weight)?;
    let y = times
        .iter()
        .map(|&t| Ok(flow.at(t)?.weighted_l1(weight)? - n0))
        .collect::<Result<Vec<_>>>()?;
    DecaySeries::new(times.to_vec(), y)
}

/// A sampled functional with its power fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayStudy {
    pub series: DecaySeries,
    pub fit: FitResult,
    /// Rate predicted by the theory, when there is one.
    pub target: Option<f64>,
    /// Empirical constant, e.g. `sup t^{3/4}‖v‖₂ / ‖ψ_V f‖₁`.
    pub constant: Option<f64>,
}

fn is_trivial(f: &Field) -> bool {
    f.max_abs() == 0.0
}

/// `‖e^{-tS}f‖₂` with its fitted exponent. Without a pair (free control
/// run) no weighted constant is reported.
pub fn l2_decay_study(
    pair: Option<&HarmonicPair>,
    dec: &SpectralDecomposition,
    f: &Field,
    times: &[f64],
    window: Option<(f64, f64)>,
) -> Result<DecayStudy> {
    if is_trivial(f) {
        return Err(Error::InvalidParameter("initial datum is identically zero".into()));
    }
    let flow = HeatFlow::new(dec, f)?;
    let y = times.iter().map(|&t| flow.l2(t)).collect::<Result<Vec<_>>>()?;
    let series = DecaySeries::new(times.to_vec(), y)?;
    let fit = fit_power(&series, window)?;
    let (target, constant) = match pair {
        Some(p) => {
            let mass = f.weighted_l1(&p.psi_v)?;
            let c = series.t.iter().zip(&series.y).map(|(t, y)| t.powf(0.75) * y / mass).fold(0.0, f64::max);
            (Some(-0.75), Some(c))
        }
        None => (Some(-0.25), None),
    };
    Ok(DecayStudy { series, fit, target, constant })
}

/// `∫ ((v_x)² + V v²) / ψ_V^β dx` with its fitted exponent, target
/// `-(5+β)/2`.
pub fn weighted_dirichlet_decay(
    pair: &HarmonicPair,
    potential: &Potential,
    dec: &SpectralDecomposition,
    f: &Field,
    beta: f64,
    times: &[f64],
    window: Option<(f64, f64)>,
) -> Result<DecayStudy> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("weight exponent β must lie in [0, 1), got {beta}")));
    }
    if is_trivial(f) {
        return Err(Error::InvalidParameter("initial datum is identically zero".into()));
    }
    let weight = pair.psi_v.map(|p| p.powf(-beta));
    let flow = HeatFlow::new(dec, f)?;
    let y = times
        .iter()
        .map(|&t| {
            let v = flow.at(t)?;
            weighted_energy_density(potential, &v)?.mul(&weight).map(|d| d.integrate())
        })
        .collect::<Result<Vec<_>>>()?;
    let series = DecaySeries::new(times.to_vec(), y)?;
    let fit = fit_power(&series, window)?;
    Ok(DecayStudy { series, fit, target: Some(-(5.0 + beta) / 2.0), constant: None })
}

/// Pointwise `(v_x)² + V v²` with the cell-wise gradient.
pub fn weighted_energy_density(potential: &Potential, v: &Field) -> Result<Field> {
    let g = v.staggered_gradient_sq();
    let vv = v.zip_map(potential.field(), |a, p| p * a * a)?;
    Ok(&g + &vv)
}

/// One time-integrated functional divided by `log(1+t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSeries {
    pub name: String,
    /// `∫_0^t … dτ` at the ladder times.
    pub integral: DecaySeries,
    /// `integral / log(1+t)`.
    pub ratio: DecaySeries,
    pub growth: LogGrowthFit,
}

impl RatioSeries {
    pub fn build(name: &str, times: &[f64], integral: Vec<f64>) -> Result<Self> {
        let ratio = times.iter().zip(&integral).map(|(t, i)| i / t.ln_1p()).collect();
        let integral = DecaySeries::new(times.to_vec(), integral)?;
        let growth = fit_log_growth(&integral)?;
        Ok(Self { name: name.to_string(), ratio: DecaySeries::new(times.to_vec(), ratio)?, integral, growth })
    }

    pub fn final_ratio(&self) -> f64 {
        *self.ratio.y.last().unwrap_or(&f64::NAN)
    }

    pub fn converged(&self) -> bool {
        self.growth.plateau == crate::ratefit::Plateau::Converged && self.final_ratio() > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    /// `∫‖v‖^{4/3}`, `∫‖S^{1/2}v‖^{4/5}`, `∫(1+τ)^{1/2}‖v‖²`,
    /// `∫(1+τ)^{3/2}‖S^{1/2}v‖²`, in that order.
    pub ratios: Vec<RatioSeries>,
    /// Hölder: `(r₁)^{3/2} <= r₃` and `(r₂)^{5/2} <= r₄` at every ladder time.
    pub holder_consistent: bool,
    pub conserved_mass: f64,
}

/// Mass below which `∫ f dμ_V` is treated as zero, relative to `∫|f| dμ_V`.
pub const ZERO_MASS_TOL: f64 = 1e-10;

pub fn lower_bound_functionals(pair: &HarmonicPair, dec: &SpectralDecomposition, f: &Field, times: &[f64]) -> Result<LowerBoundReport> {
    let mass = f.mul(&pair.psi_v)?.integrate();
    let abs_mass = f.weighted_l1(&pair.psi_v)?;
    if !(mass.abs() > ZERO_MASS_TOL * abs_mass) {
        return Err(Error::Hypothesis(format!("∫ f dμ_V = {mass:e} vanishes; the logarithmic lower bound needs nonzero mass")));
    }
    let flow = HeatFlow::new(dec, f)?;
    if flow.valid_from() > 0.0 {
        return Err(Error::SpectrumTruncated { t: 0.0, valid_from: flow.valid_from() });
    }
    let ([i1, i2, i3, i4], _) = cumulative_integrals(
        |t| {
            let (m0, m1) = (flow.spectral_moment(t, 0), flow.spectral_moment(t, 1));
            [m0.powf(2.0 / 3.0), m1.powf(2.0 / 5.0), (1.0 + t).sqrt() * m0, (1.0 + t).powf(1.5) * m1]
        },
        times,
    );
    let ratios = vec![
        RatioSeries::build("l2_pow_4_3", times, i1)?,
        RatioSeries::build("half_power_pow_4_5", times, i2)?,
        RatioSeries::build("weighted_l2_sq", times, i3)?,
        RatioSeries::build("weighted_half_power_sq", times, i4)?,
    ];
    let holder_consistent = (0..times.len()).all(|j| {
        let r = |k: usize| ratios[k].ratio.y[j];
        r(0).powf(1.5) <= r(2) * (1.0 + 1e-9) && r(1).powf(2.5) <= r(3) * (1.0 + 1e-9)
    });
    Ok(LowerBoundReport { ratios, holder_consistent, conserved_mass: mass })
}
