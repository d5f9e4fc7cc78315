//! Damped wave flow `u_tt - u_xx + u_t + Vu = 0`, solved mode by mode in
//! closed form, with its energy functionals, the comparison with the heat
//! flow and the logarithmic lower bounds.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::harmonic::HarmonicPair;
use crate::heatflow::{cumulative_integrals, DecayStudy, RatioSeries, TRUNCATION_TOL};
use crate::operator::SpectralDecomposition;
use crate::par::map_range;
use crate::potential::Potential;
use crate::ratefit::{fit_power, DecaySeries};

/// Modes with `|1 - 4λ|` below this use the series form.
pub const CRITICAL_BAND: f64 = 1e-8;

/// Threshold below which initial data count as zero when measuring support.
pub const SUPPORT_TOL: f64 = 1e-14;

/// Distance the front may travel before its `e^{-t/2}` attenuation drops
/// below `1e-12`; past it the wall only sees the parabolic part.
pub fn front_margin() -> f64 {
    2.0 * 1e12f64.ln()
}

/// `(z, z')` for `z'' + z' + λz = 0`, `(z, z')(0) = (a, b)`.
pub fn damped_mode(lambda: f64, a: f64, b: f64, t: f64) -> (f64, f64) {
    let d = 1.0 - 4.0 * lambda;
    if d >= CRITICAL_BAND {
        let sq = d.sqrt();
        // Roots written without cancellation.
        let rp = -2.0 * lambda / (1.0 + sq);
        let rm = -(1.0 + sq) / 2.0;
        let ca = (b - rm * a) / sq;
        let cb = (rp * a - b) / sq;
        let (ep, em) = ((rp * t).exp(), (rm * t).exp());
        return (ca * ep + cb * em, ca * rp * ep + cb * rm * em);
    }
    // z = e^{-t/2}[a C + β T] with C'' = sC, T = ∫C, s = d/4.
    let s = d / 4.0;
    let beta = b + a / 2.0;
    let (c, tt) = if d <= -CRITICAL_BAND {
        let w = (-s).sqrt();
        let (sn, cs) = (w * t).sin_cos();
        (cs, sn / w)
    } else {
        critical_series(s, t)
    };
    let e = (-t / 2.0).exp();
    let z = e * (a * c + beta * tt);
    (z, -z / 2.0 + e * (a * s * tt + beta * c))
}

/// `cosh(√s t)` and `sinh(√s t)/√s` by their Taylor series in `s t²`.
fn critical_series(s: f64, t: f64) -> (f64, f64) {
    let x = s * t * t;
    let (mut c, mut tt) = (1.0, 1.0);
    let (mut tc, mut ts) = (1.0, 1.0);
    for k in 1..200 {
        let k = k as f64;
        tc *= x / ((2.0 * k - 1.0) * (2.0 * k));
        ts *= x / ((2.0 * k) * (2.0 * k + 1.0));
        c += tc;
        tt += ts;
        if tc.abs() < 1e-17 * c.abs() && ts.abs() < 1e-17 * tt.abs() {
            break;
        }
    }
    (c, t * tt)
}

/// `(z, z')` for the undamped `z'' + λz = 0`.
pub fn undamped_mode(lambda: f64, a: f64, b: f64, t: f64) -> (f64, f64) {
    if lambda <= 0.0 {
        return (a + b * t, b);
    }
    let w = lambda.sqrt();
    let (sn, cs) = (w * t).sin_cos();
    (a * cs + b * sn / w, -a * w * sn + b * cs)
}

/// Independent closed form of the `(0, 1)` mode from the complex roots of
/// `r² + r + λ = 0`: `z = (e^{r₊t} - e^{r₋t})/(r₊ - r₋)`.
pub fn theta_mode_complex(lambda: f64, t: f64) -> (f64, f64) {
    let disc = Complex64::new(1.0 - 4.0 * lambda, 0.0).sqrt();
    let rp = (disc - 1.0) / 2.0;
    let rm = (-disc - 1.0) / 2.0;
    let (ep, em) = ((rp * t).exp(), (rm * t).exp());
    let z = (ep - em) / disc;
    let zp = (rp * ep - rm * em) / disc;
    (z.re, zp.re)
}

/// `(u, u_t)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub u: Field,
    pub u_t: Field,
    pub t: f64,
}

impl WaveState {
    pub fn new(u: Field, u_t: Field, t: f64) -> Result<Self> {
        u.check_same_grid(&u_t)?;
        if u.values().iter().chain(u_t.values()).any(|v| !v.is_finite()) || !t.is_finite() {
            return Err(Error::InvalidParameter("wave state has non-finite entries".into()));
        }
        Ok(Self { u, u_t, t })
    }
}

/// Closed-form evolution of `(u₀, u₁)` on a spectral decomposition.
#[derive(Debug, Clone)]
pub struct ModalWaveEvolver<'a> {
    dec: &'a SpectralDecomposition,
    a: Vec<f64>,
    b: Vec<f64>,
    damped: bool,
    support_radius: f64,
    valid_from: f64,
    guarded: bool,
}

impl<'a> ModalWaveEvolver<'a> {
    pub fn new(dec: &'a SpectralDecomposition, u0: &Field, u1: &Field) -> Result<Self> {
        Self::build(dec, u0, u1, true)
    }

    /// Evolver for `u_tt - u_xx + Vu = 0`, used to validate the energy.
    pub fn undamped(dec: &'a SpectralDecomposition, u0: &Field, u1: &Field) -> Result<Self> {
        Self::build(dec, u0, u1, false)
    }

    /// `Θ(t)g`, the solution with data `(0, g)`.
    pub fn theta(dec: &'a SpectralDecomposition, g: &Field) -> Result<Self> {
        Self::build(dec, &dec.grid().zeros(), g, true)
    }

    fn build(dec: &'a SpectralDecomposition, u0: &Field, u1: &Field, damped: bool) -> Result<Self> {
        u0.check_same_grid(u1)?;
        let a = dec.coefficients(u0)?;
        let b = dec.coefficients(u1)?;
        let support_radius = u0.support_radius(SUPPORT_TOL).max(u1.support_radius(SUPPORT_TOL));
        let valid_from = match dec.cutoff() {
            None => 0.0,
            Some(_) if !damped => {
                return Err(Error::InvalidParameter("the undamped flow needs the full spectrum".into()));
            }
            Some(cut) => {
                // Slowest decay among the discarded modes.
                let d = 1.0 - 4.0 * cut;
                let rate = if d > 0.0 { 2.0 * cut / (1.0 + d.sqrt()) } else { 0.5 };
                dec.valid_from(rate, TRUNCATION_TOL)
            }
        };
        Ok(Self { dec, a, b, damped, support_radius, valid_from, guarded: true })
    }

    /// Drops the propagation guard: the truncated operator itself is the
    /// object of study, not a proxy for the line.
    pub fn without_guard(mut self) -> Self {
        self.guarded = false;
        self
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        self.dec
    }

    pub fn is_damped(&self) -> bool {
        self.damped
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn valid_from(&self) -> f64 {
        self.valid_from
    }

    /// Modal coefficients `(a_k, b_k)` of `(u₀, u₁)`.
    pub fn initial_coefficients(&self) -> (&[f64], &[f64]) {
        (&self.a, &self.b)
    }

    /// Rejects negative times, truncated-spectrum times and times at which
    /// an unattenuated front reaches the wall.
    pub fn check(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("wave time must be nonnegative, got {t}")));
        }
        if t < self.valid_from {
            return Err(Error::SpectrumTruncated { t, valid_from: self.valid_from });
        }
        let room = self.dec.grid().half_width() - self.support_radius;
        if self.guarded && t >= room && !(self.damped && room >= front_margin()) {
            return Err(Error::DomainTooSmall {
                t,
                required_half_width: self.support_radius + if self.damped { t.min(front_margin()) } else { t },
            });
        }
        Ok(())
    }

    /// Modal `(z_k(t), z_k'(t))`.
    pub fn amplitudes(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(t)?;
        let mode = if self.damped { damped_mode } else { undamped_mode };
        Ok(self
            .dec
            .eigenvalues()
            .iter()
            .zip(self.a.iter().zip(&self.b))
            .map(|(&l, (&a, &b))| mode(l, a, b, t))
            .unzip())
    }

    pub fn evolve(&self, t: f64) -> Result<WaveState> {
        let (z, zp) = self.amplitudes(t)?;
        WaveState::new(self.dec.synthesize(&z), self.dec.synthesize(&zp), t)
    }

    /// `E(u;t) = ‖u_t‖² + ⟨Su, u⟩` from the modal amplitudes.
    pub fn energy(&self, t: f64) -> Result<f64> {
        let (z, zp) = self.amplitudes(t)?;
        Ok(modal_energy(self.dec.eigenvalues(), &z, &zp))
    }

    pub fn l2_sq(&self, t: f64) -> Result<f64> {
        Ok(self.amplitudes(t)?.0.iter().map(|z| z * z).sum())
    }
}

fn modal_energy(lambda: &[f64], z: &[f64], zp: &[f64]) -> f64 {
    lambda.iter().zip(z.iter().zip(zp)).map(|(l, (z, zp))| zp * zp + l.max(0.0) * z * z).sum()
}

pub fn evolve_wave(evolver: &ModalWaveEvolver<'_>, t: f64) -> Result<WaveState> {
    evolver.evolve(t)
}

/// `(U(t)g, ∂_t U(t)g)` with `U(t)g` the solution with data `(0, g)`.
pub fn theta_flow(dec: &SpectralDecomposition, g: &Field, t: f64) -> Result<WaveState> {
    ModalWaveEvolver::theta(dec, g)?.evolve(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedValue {
    pub param: f64,
    pub value: f64,
}

/// Energies of one wave state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub kinetic: f64,
    pub elastic: f64,
    pub potential: f64,
    pub total: f64,
    /// `E_R` per radius `R`.
    pub local: Vec<WeightedValue>,
    /// `∫ℰ/⟨x⟩^β` per `β`.
    pub bracket_weighted: Vec<WeightedValue>,
    /// `∫ℰ/(ψ₁ψ₂)^β` per `β`, when a pair is supplied.
    pub product_weighted: Vec<WeightedValue>,
}

pub fn energy_report(
    potential: &Potential,
    pair: Option<&HarmonicPair>,
    state: &WaveState,
    radii: &[f64],
    betas: &[f64],
) -> Result<EnergyReport> {
    if let Some(b) = betas.iter().find(|b| !(0.0..1.0).contains(*b)) {
        if pair.is_some() {
            return Err(Error::InvalidParameter(format!("(ψ₁ψ₂)^(-β) weight needs β in [0, 1), got {b}")));
        }
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::InvalidParameter(format!("local energy radius must be positive, got {r}")));
    }
    let kin = state.u_t.map(|v| v * v);
    let grad = state.u.staggered_gradient_sq();
    let pot = state.u.zip_map(potential.field(), |u, p| p * u * u)?;
    let density = &(&kin + &grad) + &pot;
    let (kinetic, elastic, potential_part) = (kin.integrate(), grad.integrate(), pot.integrate());
    let local = radii.iter().map(|&r| WeightedValue { param: r, value: density.integrate_between(-r, r) }).collect();
    let bracket_weighted = betas
        .iter()
        .map(|&b| WeightedValue { param: b, value: density.map_with_x(|x, d| d * (1.0 + x * x).powf(-b / 2.0)).integrate() })
        .collect();
    let product_weighted = match pair {
        Some(p) => betas
            .iter()
            .map(|&b| Ok(WeightedValue { param: b, value: density.mul(&p.product_weight(b))?.integrate() }))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    Ok(EnergyReport {
        t: state.t,
        kinetic,
        elastic,
        potential: potential_part,
        total: kinetic + elastic + potential_part,
        local,
        bracket_weighted,
        product_weighted,
    })
}

/// Left-hand sides, majorants and ratio sups of the three abstract
/// diffusion estimates for `Θ(t)g` against `e^{-tA}g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatsumuraReport {
    pub times: Vec<f64>,
    pub lhs: [Vec<f64>; 3],
    pub rhs: [Vec<f64>; 3],
    /// `sup_t lhs/rhs` per estimate; an empirical stand-in for the constants.
    pub ratio_sup: [f64; 3],
}

impl MatsumuraReport {
    pub fn all_finite(&self) -> bool {
        self.ratio_sup.iter().all(|r| r.is_finite())
    }
}

/// The three quantities at one time given modal data `(λ_k, g_k)` and the
/// Θ amplitudes.
fn matsumura_terms(lambda: &[f64], g: &[f64], z: &[f64], zp: &[f64], t: f64) -> ([f64; 3], [f64; 3]) {
    let mut s = [0.0; 3];
    let (mut half, mut res, mut res_half, mut norm) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..lambda.len() {
        let l = lambda[k].max(0.0);
        let heat = (-l * t).exp() * g[k];
        let d = z[k] - heat;
        let dp = zp[k] + l * heat;
        s[0] += d * d;
        s[1] += l * d * d;
        s[2] += dp * dp;
        let h2 = (-l * t / 2.0).exp() * g[k];
        half += h2 * h2;
        let rs = g[k] / (l.sqrt() + 1.0);
        res += rs * rs;
        res_half += l * rs * rs;
        norm += g[k] * g[k];
    }
    let e16 = (-t / 16.0).exp();
    let lhs = [s[0].sqrt(), s[1].sqrt(), s[2].sqrt()];
    let rhs = [
        half.sqrt() / t + e16 * res.sqrt(),
        half.sqrt() / t.powf(1.5) + e16 * res_half.sqrt(),
        (norm.sqrt() + (-t / 4.0).exp() * norm.sqrt()) / (t * t),
    ];
    (lhs, rhs)
}

pub fn matsumura_check(dec: &SpectralDecomposition, g: &Field, times: &[f64]) -> Result<MatsumuraReport> {
    if let Some(t) = times.iter().find(|t| !(**t >= 1.0)) {
        return Err(Error::InvalidParameter(format!("the abstract estimates hold for t >= 1, got {t}")));
    }
    let ev = ModalWaveEvolver::theta(dec, g)?.without_guard();
    let coeffs = ev.initial_coefficients().1.to_vec();
    let rows = map_range(times.len(), |j| {
        let t = times[j];
        ev.amplitudes(t).map(|(z, zp)| matsumura_terms(dec.eigenvalues(), &coeffs, &z, &zp, t))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut lhs: [Vec<f64>; 3] = Default::default();
    let mut rhs: [Vec<f64>; 3] = Default::default();
    let mut ratio_sup = [0.0f64; 3];
    for (l, r) in rows {
        for i in 0..3 {
            lhs[i].push(l[i]);
            rhs[i].push(r[i]);
            let q = if r[i] > 0.0 { l[i] / r[i] } else if l[i] == 0.0 { 0.0 } else { f64::INFINITY };
            ratio_sup[i] = ratio_sup[i].max(q);
        }
    }
    Ok(MatsumuraReport { times: times.to_vec(), lhs, rhs, ratio_sup })
}

/// The three left-hand sides and majorants for `g = e_k` from the complex
/// closed form alone.
pub fn matsumura_single_mode(lambda: f64, t: f64) -> ([f64; 3], [f64; 3]) {
    let (z, zp) = theta_mode_complex(lambda, t);
    matsumura_terms(&[lambda], &[1.0], &[z], &[zp], t)
}

/// Tunables of the diffusion comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionOptions {
    pub window: Option<(f64, f64)>,
    /// Exponents of the `⟨x⟩^{-β}` energy weights.
    pub betas: Vec<f64>,
    /// Radii of the local energies.
    pub radii: Vec<f64>,
}

impl Default for DiffusionOptions {
    fn default() -> Self {
        Self { window: None, betas: vec![0.0], radii: vec![1.0] }
    }
}

/// `u(t)` against the heat profile `e^{-tS}(u₀+u₁)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionReport {
    /// `‖u(t) - e^{-tS}v₀‖₂`, target at most `-1`.
    pub difference: DecayStudy,
    /// `‖e^{-tS}v₀‖₂`, target `-3/4`.
    pub profile: DecayStudy,
    /// `∫ℰ(u)/⟨x⟩^β` per configured `β`, target `-(5+β)/2`.
    pub energy: Vec<(f64, DecayStudy)>,
    /// `E_R(u;t)` per configured `R`.
    pub local: Vec<(f64, DecayStudy)>,
    /// `‖ψ_V v₀‖₁`, finite by construction on a grid.
    pub weighted_mass: f64,
    /// `(min, max)` of `ψ₁ψ₂/⟨x⟩` on the grid.
    pub weight_comparability: (f64, f64),
}

pub fn diffusion_comparator(
    dec: &SpectralDecomposition,
    potential: &Potential,
    pair: &HarmonicPair,
    u0: &Field,
    u1: &Field,
    times: &[f64],
    opts: &DiffusionOptions,
) -> Result<DiffusionReport> {
    let ev = ModalWaveEvolver::new(dec, u0, u1)?;
    let (a, b) = ev.initial_coefficients();
    let v0: Vec<f64> = a.iter().zip(b).map(|(a, b)| a + b).collect();
    let lambda = dec.eigenvalues();
    struct Row {
        diff: f64,
        prof: f64,
        report: EnergyReport,
    }
    let rows = map_range(times.len(), |j| -> Result<Row> {
        let t = times[j];
        let (z, zp) = ev.amplitudes(t)?;
        let (mut diff, mut prof) = (0.0, 0.0);
        for k in 0..z.len() {
            let heat = (-lambda[k] * t).exp() * v0[k];
            diff += (z[k] - heat).powi(2);
            prof += heat * heat;
        }
        let state = WaveState::new(dec.synthesize(&z), dec.synthesize(&zp), t)?;
        let report = energy_report(potential, None, &state, &opts.radii, &opts.betas)?;
        Ok(Row { diff: diff.sqrt(), prof: prof.sqrt(), report })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let study = |y: Vec<f64>, target: f64| -> Result<DecayStudy> {
        let series = DecaySeries::new(times.to_vec(), y)?;
        let fit = fit_power(&series, opts.window)?;
        Ok(DecayStudy { series, fit, target: Some(target), constant: None })
    };
    let difference = study(rows.iter().map(|r| r.diff).collect(), -1.0)?;
    let profile = study(rows.iter().map(|r| r.prof).collect(), -0.75)?;
    let energy = opts
        .betas
        .iter()
        .enumerate()
        .map(|(i, &b)| Ok((b, study(rows.iter().map(|r| r.report.bracket_weighted[i].value).collect(), -(5.0 + b) / 2.0)?)))
        .collect::<Result<Vec<_>>>()?;
    let local = opts
        .radii
        .iter()
        .enumerate()
        .map(|(i, &r)| Ok((r, study(rows.iter().map(|row| row.report.local[i].value).collect(), -3.0)?)))
        .collect::<Result<Vec<_>>>()?;
    let v0f = u0 + u1;
    let weighted_mass = v0f.weighted_l1(&pair.psi_v)?;
    let prod = pair.psi1.mul(&pair.psi2)?;
    let q: Vec<f64> = prod.map_with_x(|x, p| p / (1.0 + x * x).sqrt()).into_values();
    let weight_comparability = (q.iter().copied().fold(f64::INFINITY, f64::min), q.iter().copied().fold(0.0, f64::max));
    Ok(DiffusionReport { difference, profile, energy, local, weighted_mass, weight_comparability })
}

/// Lower and upper logarithmic ratios of the wave flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveLowerBound {
    /// `∫(1+τ)^{1/2}‖u‖²` then `∫(1+τ)^{3/2}E(u;τ)`, over `log(1+t)`.
    pub ratios: Vec<RatioSeries>,
    /// `sup_{τ<=t}(1+τ)^{3/2}‖u‖²` and `sup_{τ<=t}(1+τ)^{5/2}E`, matching
    /// `ratios` entry by entry.
    pub upper: Vec<DecaySeries>,
    /// Every lower ratio is below its upper ratio.
    pub bracketed: bool,
}

pub fn energy_lower_bound(dec: &SpectralDecomposition, u0: &Field, u1: &Field, times: &[f64]) -> Result<WaveLowerBound> {
    let v0 = u0 + u1;
    let scale = v0.max_abs();
    if scale == 0.0 {
        return Err(Error::Hypothesis("u₀ + u₁ vanishes identically".into()));
    }
    if v0.values().iter().any(|v| *v < -1e-14 * scale) {
        return Err(Error::Hypothesis("u₀ + u₁ changes sign".into()));
    }
    let ev = ModalWaveEvolver::new(dec, u0, u1)?;
    if let Some(t) = times.last() {
        ev.check(*t)?;
    }
    if ev.valid_from() > 0.0 {
        return Err(Error::SpectrumTruncated { t: 0.0, valid_from: ev.valid_from() });
    }
    let lambda = dec.eigenvalues();
    let ([i_l2, i_e, _, _], [_, _, s_l2, s_e]) = cumulative_integrals(
        |t| {
            let (z, zp) = ev.amplitudes(t).expect("times checked above");
            let l2: f64 = z.iter().map(|z| z * z).sum();
            let e = modal_energy(lambda, &z, &zp);
            [(1.0 + t).sqrt() * l2, (1.0 + t).powf(1.5) * e, (1.0 + t).powf(1.5) * l2, (1.0 + t).powf(2.5) * e]
        },
        times,
    );
    let ratios = vec![RatioSeries::build("weighted_l2_sq", times, i_l2)?, RatioSeries::build("weighted_energy", times, i_e)?];
    let upper = vec![DecaySeries::new(times.to_vec(), s_l2)?, DecaySeries::new(times.to_vec(), s_e)?];
    let bracketed = ratios.iter().zip(&upper).all(|(r, u)| r.ratio.y.iter().zip(&u.y).all(|(lo, hi)| *lo <= *hi * (1.0 + 1e-12)));
    Ok(WaveLowerBound { ratios, upper, bracketed })
}

/// `t³‖∂_xG‖²` and `t⁵‖∂_tG‖²` on `(-R, R)` for the heat kernel
/// `G = (4πt)^{-1/2} e^{-x²/4t}`, plus the reduced form `t⁵‖(x²/4t²)G‖²`,
/// which is the part of `∂_tG` that survives the `t⁵` scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianReport {
    pub radius: f64,
    pub dx: DecaySeries,
    pub dt: DecaySeries,
    pub dt_reduced: DecaySeries,
    /// `R³/(24π)`.
    pub dx_limit: f64,
    /// `R⁵/(160π)`.
    pub dt_limit: f64,
}

pub fn gaussian_local_energy(radius: f64, times: &[f64], nodes: usize) -> Result<GaussianReport> {
    use std::f64::consts::PI;
    if !(radius > 0.0) || times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter("Gaussian local energy needs R > 0 and t > 0".into()));
    }
    let grid = crate::grid::Grid::new(radius, nodes.max(3) | 1)?;
    let sample = |t: f64, f: &dyn Fn(f64, f64) -> f64| grid.sample(|x| f(x, t).powi(2)).integrate();
    let g = |x: f64, t: f64| (4.0 * PI * t).powf(-0.5) * (-x * x / (4.0 * t)).exp();
    let gx = |x: f64, t: f64| -x / (2.0 * t) * g(x, t);
    let gt = |x: f64, t: f64| (x * x / (4.0 * t * t) - 1.0 / (2.0 * t)) * g(x, t);
    let gr = |x: f64, t: f64| x * x / (4.0 * t * t) * g(x, t);
    let series = |f: &dyn Fn(f64) -> f64| DecaySeries::from_fn(times, f);
    Ok(GaussianReport {
        radius,
        dx: series(&|t| t.powi(3) * sample(t, &gx))?,
        dt: series(&|t| t.powi(5) * sample(t, &gt))?,
        dt_reduced: series(&|t| t.powi(5) * sample(t, &gr))?,
        dx_limit: radius.powi(3) / (24.0 * PI),
        dt_limit: radius.powi(5) / (160.0 * PI),
    })
}

/// `sup_t (1+t)³E(∂_tũ;t) + (1+t)²‖∂_tũ‖²` for `ũ = U(·)u₀`.
pub fn lemma_time_derivative_sup(dec: &SpectralDecomposition, u0: &Field, times: &[f64]) -> Result<f64> {
    let ev = ModalWaveEvolver::theta(dec, u0)?;
    let lambda = dec.eigenvalues();
    let vals = map_range(times.len(), |j| {
        let t = times[j];
        ev.amplitudes(t).map(|(z, zp)| {
            // w = z', w' = z'' = -z' - λz
            let wp: Vec<f64> = zp.iter().zip(&z).zip(lambda).map(|((p, z), l)| -p - l * z).collect();
            let e = modal_energy(lambda, &zp, &wp);
            let l2: f64 = zp.iter().map(|w| w * w).sum();
            (1.0 + t).powi(3) * e + (1.0 + t).powi(2) * l2
        })
    });
    vals.into_iter().try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
}

/// `sup_t t³E(U(t)v₀ - e^{-tS}v₀;t) + t²‖U(t)v₀ - e^{-tS}v₀‖²`.
pub fn lemma_profile_gap_sup(dec: &SpectralDecomposition, v0: &Field, times: &[f64]) -> Result<f64> {
    let ev = ModalWaveEvolver::theta(dec, v0)?;
    let g = ev.initial_coefficients().1.to_vec();
    let lambda = dec.eigenvalues();
    let vals = map_range(times.len(), |j| {
        let t = times[j];
        ev.amplitudes(t).map(|(z, zp)| {
            let (mut e, mut l2) = (0.0, 0.0);
            for k in 0..z.len() {
                let heat = (-lambda[k] * t).exp() * g[k];
                let d = z[k] - heat;
                let dp = zp[k] + lambda[k] * heat;
                e += dp * dp + lambda[k].max(0.0) * d * d;
                l2 += d * d;
            }
            t.powi(3) * e + t * t * l2
        })
    });
    vals.into_iter().try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
}
