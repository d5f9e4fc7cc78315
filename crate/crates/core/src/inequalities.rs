//! Hardy-type, Nash and weighted Nash quotients, seeded sweeps over test
//! families, and the `β = 1` counterexample family.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::harmonic::HarmonicPair;
use crate::heatflow::weighted_energy_density;
use crate::operator::SchrodingerOperator;
use crate::par::map_range;
use crate::potential::{bump, Potential};
use crate::profiles::SmoothShape;
use crate::ratefit::{fit_loglog, FitResult};
use crate::tridiag::ql_eigenvalues;

/// Slack allowed over a proven constant before a ratio counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inequality {
    Hardy1,
    Hardy2,
    Hardy3,
    Nash,
    NashWeighted,
    NashVariant,
}

impl Inequality {
    pub const ALL: [Inequality; 6] = [
        Inequality::Hardy1,
        Inequality::Hardy2,
        Inequality::Hardy3,
        Inequality::Nash,
        Inequality::NashWeighted,
        Inequality::NashVariant,
    ];

    /// Whether the quotient depends on a weight exponent `β`.
    pub fn takes_beta(self) -> bool {
        matches!(self, Inequality::Hardy2 | Inequality::Hardy3)
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Inequality::Hardy1 => "hardy1",
            Inequality::Hardy2 => "hardy2",
            Inequality::Hardy3 => "hardy3",
            Inequality::Nash => "nash",
            Inequality::NashWeighted => "nash-weighted",
            Inequality::NashVariant => "nash-variant",
        })
    }
}

impl FromStr for Inequality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Inequality::ALL
            .into_iter()
            .find(|i| i.to_string() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown inequality `{s}`")))
    }
}

/// `C_{1,1} = 2/k_V`.
pub fn hardy1_constant(k_v: f64) -> f64 {
    2.0 / k_v
}

/// `C_{1,2} = (4/((1-β²)k_V²))^{(2+β)/4}`.
pub fn hardy2_constant(k_v: f64, beta: f64) -> f64 {
    (4.0 / ((1.0 - beta * beta) * k_v * k_v)).powf((2.0 + beta) / 4.0)
}

/// `C_{1,3} = (2-β)/(2(1-β)) · (4/((1-β²)k_V²))^{β/2}`.
pub fn hardy3_constant(k_v: f64, beta: f64) -> f64 {
    (2.0 - beta) / (2.0 * (1.0 - beta)) * (4.0 / ((1.0 - beta * beta) * k_v * k_v)).powf(beta / 2.0)
}

/// Best Nash constant `((N+2)/(Nλ))((N+2)/(2ω))^{2/N}` for `N = 1`,
/// `ω₁ = 2`, given the first positive even Neumann eigenvalue `λ` of `(-1, 1)`.
pub fn nash_best_constant(lambda1: f64) -> f64 {
    let n = 1.0;
    let omega = 2.0;
    ((n + 2.0) / (n * lambda1)) * ((n + 2.0) / (2.0 * omega)).powf(2.0 / n)
}

/// Smallest positive eigenvalue of `-u''` on `(-1, 1)` with Neumann ends
/// among even eigenfunctions, i.e. Neumann at both ends of `[0, 1]`, by a
/// symmetrized vertex-centred difference scheme with `m` cells, Richardson
/// extrapolated in `h²`.
pub fn neumann_even_eigenvalue(m: usize) -> Result<f64> {
    if m < 4 {
        return Err(Error::InvalidParameter("need at least 4 cells".into()));
    }
    let raw = |m: usize| -> Result<f64> {
        let h2 = (1.0 / m as f64).powi(2);
        let d = vec![2.0 / h2; m + 1];
        let mut e = vec![-1.0 / h2; m];
        // Half-weight end rows, made symmetric by the diagonal similarity.
        e[0] *= 2f64.sqrt();
        e[m - 1] *= 2f64.sqrt();
        let ev = ql_eigenvalues(&d, &e)?;
        ev.into_iter().find(|l| *l > 1e-6).ok_or(Error::NonConvergence { index: 1 })
    };
    let (a, b) = (raw(m)?, raw(2 * m)?);
    Ok((4.0 * b - a) / 3.0)
}

/// `C_Nash` for `N = 1` from the numerical eigenvalue.
pub fn nash_constant_1d() -> Result<f64> {
    Ok(nash_best_constant(neumann_even_eigenvalue(800)?))
}

fn nonzero(f: &Field) -> Result<()> {
    if f.max_abs() == 0.0 {
        Err(Error::InvalidParameter("test function vanishes identically".into()))
    } else {
        Ok(())
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if (0.0..1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("β must lie in [0, 1), got {beta}")))
    }
}

/// `‖f'‖₂²` with the cell gradient.
pub fn gradient_sq(f: &Field) -> f64 {
    f.staggered_gradient_sq().integrate()
}

/// `‖f‖₂⁶ / (‖f‖₁⁴ ‖f'‖₂²)`.
pub fn nash_classic(f: &Field) -> Result<f64> {
    nonzero(f)?;
    Ok(f.l2().powi(6) / (f.l1().powi(4) * gradient_sq(f)))
}

/// Everything the weighted quotients need on one grid.
#[derive(Debug, Clone)]
pub struct InequalityContext<'a> {
    pub potential: &'a Potential,
    pub pair: &'a HarmonicPair,
    pub op: SchrodingerOperator,
    product: Field,
}

impl<'a> InequalityContext<'a> {
    pub fn new(potential: &'a Potential, pair: &'a HarmonicPair) -> Result<Self> {
        if potential.grid() != pair.grid() {
            return Err(Error::GridMismatch);
        }
        let product = pair.psi1.mul(&pair.psi2)?;
        Ok(Self { potential, pair, op: SchrodingerOperator::assemble(potential), product })
    }

    pub fn k_v(&self) -> f64 {
        self.pair.k_v
    }

    /// `‖S^{1/2}f‖₂²`.
    pub fn form(&self, f: &Field) -> Result<f64> {
        crate::operator::dirichlet_form(self.potential, f)
    }

    pub fn s_norm(&self, f: &Field) -> Result<f64> {
        Ok(self.op.apply(f)?.l2())
    }

    /// `‖f/(ψ₁ψ₂)‖₂ / ‖S^{1/2}f‖₂`.
    pub fn hardy1(&self, f: &Field) -> Result<f64> {
        nonzero(f)?;
        Ok(f.div(&self.product)?.l2() / self.form(f)?.sqrt())
    }

    /// `‖f/(ψ₁ψ₂)^{1+β/2}‖₂ / (‖Sf‖₂^{(2+β)/4} ‖f‖₂^{(2-β)/4})`.
    pub fn hardy2(&self, f: &Field, beta: f64) -> Result<f64> {
        check_beta(beta)?;
        self.hardy2_unchecked(f, beta)
    }

    fn hardy2_unchecked(&self, f: &Field, beta: f64) -> Result<f64> {
        nonzero(f)?;
        let p = 1.0 + beta / 2.0;
        let lhs = f.zip_map(&self.product, |v, w| v / w.powf(p))?.l2();
        Ok(lhs / (self.s_norm(f)?.powf((2.0 + beta) / 4.0) * f.l2().powf((2.0 - beta) / 4.0)))
    }

    /// `∫((f')² + Vf²)/(ψ₁ψ₂)^β / (‖Sf‖₂^{1+β/2} ‖f‖₂^{1-β/2})`.
    pub fn hardy3(&self, f: &Field, beta: f64) -> Result<f64> {
        check_beta(beta)?;
        nonzero(f)?;
        let lhs = weighted_energy_density(self.potential, f)?.zip_map(&self.product, |d, w| d * w.powf(-beta))?.integrate();
        Ok(lhs / (self.s_norm(f)?.powf(1.0 + beta / 2.0) * f.l2().powf(1.0 - beta / 2.0)))
    }

    /// `‖ψ_V^{2/3}f‖₂⁶ / (‖ψ_V f‖₁⁴ ‖S^{1/2}f‖₂²)`.
    pub fn nash_weighted(&self, f: &Field) -> Result<f64> {
        nonzero(f)?;
        let num = f.zip_map(&self.pair.psi_v, |v, p| v * p.powf(2.0 / 3.0))?.l2().powi(6);
        Ok(num / (f.weighted_l1(&self.pair.psi_v)?.powi(4) * self.form(f)?))
    }

    /// `‖f‖₂^{10/3} / (‖ψ_V f‖₁^{4/3} ‖S^{1/2}f‖₂²)`.
    pub fn nash_variant(&self, f: &Field) -> Result<f64> {
        nonzero(f)?;
        Ok(f.l2().powf(10.0 / 3.0) / (f.weighted_l1(&self.pair.psi_v)?.powf(4.0 / 3.0) * self.form(f)?))
    }

    pub fn ratio(&self, which: Inequality, f: &Field, beta: f64) -> Result<f64> {
        match which {
            Inequality::Hardy1 => self.hardy1(f),
            Inequality::Hardy2 => self.hardy2(f, beta),
            Inequality::Hardy3 => self.hardy3(f, beta),
            Inequality::Nash => nash_classic(f),
            Inequality::NashWeighted => self.nash_weighted(f),
            Inequality::NashVariant => self.nash_variant(f),
        }
    }

    /// The proven constant, when there is an explicit one.
    pub fn constant(&self, which: Inequality, beta: f64) -> Result<Option<f64>> {
        let k = self.k_v();
        Ok(match which {
            Inequality::Hardy1 => Some(hardy1_constant(k)),
            Inequality::Hardy2 => Some(hardy2_constant(k, beta)),
            Inequality::Hardy3 => Some(hardy3_constant(k, beta)),
            Inequality::Nash => Some(nash_constant_1d()?),
            Inequality::NashWeighted | Inequality::NashVariant => None,
        })
    }

    /// Ratios of one family against one inequality.
    pub fn sweep(&self, which: Inequality, beta: f64, family: &str, fields: &[Field]) -> Result<RatioStudy> {
        let ratios = map_range(fields.len(), |i| self.ratio(which, &fields[i], beta)).into_iter().collect::<Result<Vec<_>>>()?;
        Ok(RatioStudy::new(which, if which.takes_beta() { Some(beta) } else { None }, family, ratios, self.constant(which, beta)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStudy {
    pub inequality: Inequality,
    pub beta: Option<f64>,
    pub family: String,
    pub ratios: Vec<f64>,
    pub sup: f64,
    pub constant: Option<f64>,
    /// Ratios above `constant · (1 + VIOLATION_TOL)`.
    pub violations: usize,
}

impl RatioStudy {
    pub fn new(inequality: Inequality, beta: Option<f64>, family: &str, ratios: Vec<f64>, constant: Option<f64>) -> Self {
        let sup = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let violations = constant.map_or(0, |c| ratios.iter().filter(|r| !(**r <= c * (1.0 + VIOLATION_TOL))).count());
        Self { inequality, beta, family: family.to_string(), ratios, sup, constant, violations }
    }

    /// `constant - sup` when a constant is known.
    pub fn margin(&self) -> Option<f64> {
        self.constant.map(|c| c - self.sup)
    }
}

/// `|a - b| / max(a, b)`: agreement of two empirical sups.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// Coordinate-wise perturbation ascent of `ratio` over shape parameters;
/// a probe for near-extremal functions, not a certified optimum.
pub fn ascend_shape(
    grid: &Grid,
    start: SmoothShape,
    rounds: usize,
    ratio: impl Fn(&Field) -> Result<f64>,
) -> Result<(SmoothShape, f64)> {
    let mut best = start;
    let mut value = ratio(&best.sample(grid))?;
    let mut step = 0.5;
    let limit = grid.half_width();
    for _ in 0..rounds {
        let mut improved = false;
        let coords = 2 + best.cos.len() + best.sin.len();
        for c in 0..coords {
            for dir in [1.0, -1.0] {
                let mut trial = best.clone();
                match c {
                    0 => trial.center += dir * step * trial.width,
                    1 => trial.width *= (dir * step).exp(),
                    k if k < 2 + trial.cos.len() => trial.cos[k - 2] += dir * step * 0.5,
                    k => {
                        let j = k - 2 - trial.cos.len();
                        trial.sin[j] += dir * step * 0.5;
                    }
                }
                if trial.support_radius() >= limit - grid.spacing() || trial.width < 4.0 * grid.spacing() {
                    continue;
                }
                let field = trial.sample(grid);
                if field.max_abs() == 0.0 {
                    continue;
                }
                if let Ok(r) = ratio(&field) {
                    if r > value {
                        best = trial;
                        value = r;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((best, value))
}

/// `ζ`, a bump with support exactly `[1, 2]`.
pub fn zeta(s: f64) -> f64 {
    bump((s - 1.5) / 0.5)
}

/// One member of the counterexample ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleRow {
    pub n: f64,
    pub l2: f64,
    pub s_norm: f64,
    /// `‖ψ_*^{-3} f_n‖₂`, `ψ_*² = ψ₁ψ₂`.
    pub weighted: f64,
    /// Hardy-(ii) quotient at `β = 1`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub rows: Vec<CounterexampleRow>,
    /// Slope of `log ‖f_n‖₂` against `log n`.
    pub l2_fit: FitResult,
    pub s_norm_fit: FitResult,
    /// Slope of `log ‖ψ_*^{-3}f_n‖₂` against `log log n`; `1/2` for
    /// `(log n)^{1/2}` growth, `0` for a bounded family.
    pub weighted_log_fit: FitResult,
    pub ratio_increasing: bool,
}

/// Half-width needed to hold the `f_n` ladder up to `n_max` for a potential
/// with Wronskian `k_v`, with 5% room.
pub fn counterexample_half_width(k_v: f64, n_max: f64) -> f64 {
    1.05 * 4.0 * n_max * n_max / k_v + 10.0
}

/// `f_n = ψ_V ζ(ψ_V^{1/2}/n)` over `n_list`.
pub fn beta_one_counterexample(ctx: &InequalityContext<'_>, n_list: &[f64]) -> Result<CounterexampleReport> {
    if n_list.len() < 3 || n_list.windows(2).any(|w| !(w[1] > w[0])) || n_list[0] <= 1.0 {
        return Err(Error::InvalidParameter("need at least three increasing n > 1".into()));
    }
    let grid = ctx.pair.grid();
    let psi = &ctx.pair.psi_v;
    let edge = psi.get(0).min(psi.get(grid.len() - 1));
    let top = *n_list.last().unwrap();
    if 4.0 * top * top >= edge {
        return Err(Error::DomainTooSmall { t: top, required_half_width: counterexample_half_width(ctx.k_v(), top) });
    }
    let rows = n_list
        .iter()
        .map(|&n| {
            let f = psi.map(|p| p * zeta(p.sqrt() / n));
            let l2 = f.l2();
            let s_norm = ctx.s_norm(&f)?;
            let weighted = f.zip_map(&ctx.product, |v, w| v / w.powf(1.5))?.l2();
            let ratio = ctx.hardy2_unchecked(&f, 1.0)?;
            Ok(CounterexampleRow { n, l2, s_norm, weighted, ratio })
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |g: fn(&CounterexampleRow) -> f64| rows.iter().map(g).collect::<Vec<_>>();
    let l2_fit = fit_loglog(n_list, &col(|r| r.l2))?;
    let s_norm_fit = fit_loglog(n_list, &col(|r| r.s_norm))?;
    let logs: Vec<f64> = n_list.iter().map(|n| n.ln()).collect();
    let weighted_log_fit = fit_loglog(&logs, &col(|r| r.weighted))?;
    let ratio_increasing = rows.windows(2).all(|w| w[1].ratio > w[0].ratio);
    Ok(CounterexampleReport { rows, l2_fit, s_norm_fit, weighted_log_fit, ratio_increasing })
}
