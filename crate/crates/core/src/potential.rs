//! Nonnegative potentials, membership checks for the admissible class
//! (bounded, `V >= 0`, `0 < ∫|x|V dx < ∞`) and the first moment.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Analytic description of a potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `exp(1 - 1/(1-x²))` on `|x| < 1`, zero outside.
    Bump,
    /// `(1+x²)^{-2}`.
    InverseQuartic,
    /// `⟨x⟩^{-α}`, `α > 2`.
    InversePower { alpha: f64 },
    Scaled { factor: f64, base: Box<PotentialKind> },
    /// `V ≡ 0`. Not admissible; exists for control runs.
    Zero,
    /// Piecewise linear through user-supplied samples, zero outside them.
    Sampled { table: Vec<(f64, f64)> },
}

impl PotentialKind {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PotentialKind::Bump => bump(x),
            PotentialKind::InverseQuartic => {
                let q = 1.0 + x * x;
                1.0 / (q * q)
            }
            PotentialKind::InversePower { alpha } => (1.0 + x * x).powf(-0.5 * alpha),
            PotentialKind::Scaled { factor, base } => factor * base.eval(x),
            PotentialKind::Zero => 0.0,
            PotentialKind::Sampled { table } => interpolate(table, x),
        }
    }

    /// Two-sided tail `∫_{|x|>L} |x| V dx`: analytic for built-ins,
    /// `None` for sampled data.
    fn analytic_tail(&self, l: f64) -> Option<f64> {
        match self {
            PotentialKind::Bump => Some(if l >= 1.0 { 0.0 } else { f64::NAN }),
            // 2 ∫_L^∞ x (1+x²)^{-2} dx = 1/(1+L²)
            PotentialKind::InverseQuartic => Some(1.0 / (1.0 + l * l)),
            // 2 ∫_L^∞ x (1+x²)^{-α/2} dx = 2 (1+L²)^{1-α/2} / (α-2)
            PotentialKind::InversePower { alpha } => {
                Some(2.0 * (1.0 + l * l).powf(1.0 - 0.5 * alpha) / (alpha - 2.0))
            }
            PotentialKind::Scaled { factor, base } => base.analytic_tail(l).map(|t| factor * t),
            PotentialKind::Zero => Some(0.0),
            PotentialKind::Sampled { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PotentialKind::InversePower { alpha } if !(*alpha > 2.0) => Err(Error::ClassViolation(
                format!("⟨x⟩^-α needs α > 2 for a finite first moment, got α = {alpha}"),
            )),
            PotentialKind::Scaled { factor, .. } if !(*factor > 0.0 && factor.is_finite()) => Err(
                Error::InvalidParameter(format!("scale factor must be positive, got {factor}")),
            ),
            PotentialKind::Scaled { base, .. } => base.validate(),
            PotentialKind::Sampled { table } => {
                if table.len() < 2 {
                    return Err(Error::InvalidParameter("sampled potential needs at least two rows".into()));
                }
                if !table.windows(2).all(|w| w[1].0 > w[0].0) {
                    return Err(Error::InvalidParameter(
                        "sampled potential abscissae must be strictly increasing".into(),
                    ));
                }
                if table.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
                    return Err(Error::InvalidParameter("sampled potential has non-finite entries".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::Bump => write!(f, "bump"),
            PotentialKind::InverseQuartic => write!(f, "inv4"),
            PotentialKind::InversePower { alpha } => write!(f, "invpow:{alpha}"),
            PotentialKind::Scaled { factor, base } => write!(f, "scaled:{factor}:{base}"),
            PotentialKind::Zero => write!(f, "zero"),
            PotentialKind::Sampled { table } => write!(f, "sampled[{}]", table.len()),
        }
    }
}

/// Parses the command-line names `bump`, `inv4`, `invpow:ALPHA`,
/// `scaled:C:NAME` and `zero`.
impl FromStr for PotentialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown potential '{s}'"));
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
        match s {
            "bump" => Ok(PotentialKind::Bump),
            "inv4" | "inverse_quartic" => Ok(PotentialKind::InverseQuartic),
            "zero" => Ok(PotentialKind::Zero),
            _ => {
                if let Some(a) = s.strip_prefix("invpow:") {
                    Ok(PotentialKind::InversePower { alpha: num(a)? })
                } else if let Some(rest) = s.strip_prefix("scaled:") {
                    let (c, base) = rest.split_once(':').ok_or_else(bad)?;
                    Ok(PotentialKind::Scaled {
                        factor: num(c)?,
                        base: Box::new(base.parse()?),
                    })
                } else {
                    Err(bad())
                }
            }
        }
    }
}

/// `exp(1 - 1/(1-x²))` for `|x| < 1`, else 0. Smooth, peak value 1.
pub fn bump(x: f64) -> f64 {
    let q = 1.0 - x * x;
    if q <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / q).exp()
    }
}

fn interpolate(table: &[(f64, f64)], x: f64) -> f64 {
    let (first, last) = (table[0], table[table.len() - 1]);
    if x < first.0 || x > last.0 {
        return 0.0;
    }
    let j = table.partition_point(|p| p.0 <= x).clamp(1, table.len() - 1);
    let (x0, v0) = table[j - 1];
    let (x1, v1) = table[j];
    v0 + (v1 - v0) * (x - x0) / (x1 - x0)
}

/// A potential sampled on a grid, with its analytic description.
#[derive(Debug, Clone)]
pub struct Potential {
    kind: PotentialKind,
    field: Field,
    first_moment: f64,
}

impl Potential {
    /// Built-in (or sampled) potential on `grid`. `V ≡ 0` is accepted here so
    /// control runs can be set up; [`Potential::validate_class`] rejects it.
    pub fn new(kind: PotentialKind, grid: &Grid) -> Result<Self> {
        kind.validate()?;
        let field = grid.sample(|x| kind.eval(x));
        let first_moment = field.map_with_x(|x, v| x.abs() * v).integrate();
        Ok(Self {
            kind,
            field,
            first_moment,
        })
    }

    pub fn zero(grid: &Grid) -> Self {
        Self::new(PotentialKind::Zero, grid).expect("zero potential is always constructible")
    }

    /// Custom potential from `(x, V)` rows, resampled by linear interpolation.
    pub fn from_table(table: Vec<(f64, f64)>, grid: &Grid) -> Result<Self> {
        Self::new(PotentialKind::Sampled { table }, grid)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    /// Value at an arbitrary point (exact for built-ins).
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.kind.eval(x)
    }

    /// Truncated moment `∫_{-L}^{L} |x| V dx`.
    pub fn first_moment(&self) -> f64 {
        self.first_moment
    }

    pub fn is_zero(&self) -> bool {
        self.field.values().iter().all(|&v| v == 0.0)
    }

    /// Estimate of `∫_{|x|>L} |x| V dx`. Sampled potentials get the
    /// conservative bound `sup_{|x|>L/2} V · L²`.
    pub fn tail_estimate(&self) -> f64 {
        let l = self.grid().half_width();
        match self.kind.analytic_tail(l) {
            Some(t) if t.is_finite() => t,
            Some(_) => f64::INFINITY,
            None => {
                let g = self.grid();
                let sup = (0..g.len())
                    .filter(|&i| g.x(i).abs() > 0.5 * l)
                    .map(|i| self.field.get(i))
                    .fold(0.0, f64::max);
                sup * l * l
            }
        }
    }

    pub fn validate_class(&self, tol: f64) -> ClassReport {
        let v = self.field.values();
        let nonnegative = v.iter().all(|&x| x >= 0.0);
        let sup = v.iter().fold(0.0f64, |m, &x| m.max(x));
        let bounded = sup.is_finite();
        let moment = self.first_moment;
        let tail = self.tail_estimate();
        let moment_positive = moment > 0.0;
        let moment_finite = moment.is_finite() && tail.is_finite();
        let tail_small = tail < tol * moment;
        ClassReport {
            nonnegative,
            bounded,
            moment_positive,
            moment_finite,
            sup,
            moment,
            tail_estimate: tail,
            tail_small,
            analytic_tail: !matches!(self.kind, PotentialKind::Sampled { .. }),
            passed: nonnegative && bounded && moment_positive && moment_finite && tail_small,
        }
    }

    /// Same as [`validate_class`](Self::validate_class) but as a `Result`.
    pub fn require_class(&self, tol: f64) -> Result<ClassReport> {
        let r = self.validate_class(tol);
        if r.passed {
            Ok(r)
        } else {
            Err(Error::ClassViolation(r.describe_failure()))
        }
    }
}

/// Outcome of the class-membership check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub nonnegative: bool,
    pub bounded: bool,
    pub moment_positive: bool,
    pub moment_finite: bool,
    pub sup: f64,
    /// `∫_{-L}^{L} |x| V dx`
    pub moment: f64,
    pub tail_estimate: f64,
    pub tail_small: bool,
    /// `false` when the tail is the conservative bound for sampled data.
    pub analytic_tail: bool,
    pub passed: bool,
}

impl ClassReport {
    pub fn describe_failure(&self) -> String {
        let mut why = Vec::new();
        if !self.nonnegative {
            why.push("V takes negative values".to_string());
        }
        if !self.bounded {
            why.push("V is unbounded".to_string());
        }
        if !self.moment_positive {
            why.push("first moment is zero (V ≡ 0 is excluded)".to_string());
        }
        if !self.moment_finite {
            why.push("first moment diverges".to_string());
        }
        if !self.tail_small {
            why.push(format!(
                "tail moment {:.3e} beyond the truncation is not small against {:.3e}",
                self.tail_estimate, self.moment
            ));
        }
        why.join("; ")
    }
}
