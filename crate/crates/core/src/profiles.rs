//! Named initial-data profiles and the seeded random smooth family.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::potential::bump;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    /// `a · bump((x - c)/w)`
    Bump { center: f64, width: f64, amplitude: f64 },
    /// `bump(x - s) - bump(x + s)`; integrates to zero against even weights.
    OddBump { shift: f64 },
    RandomSmooth { seed: u64 },
}

impl Profile {
    pub fn bump() -> Self {
        Profile::Bump { center: 0.0, width: 1.0, amplitude: 1.0 }
    }

    pub fn shifted_bump() -> Self {
        Profile::Bump { center: 3.0, width: 1.0, amplitude: 1.0 }
    }

    pub fn odd_bump() -> Self {
        Profile::OddBump { shift: 1.5 }
    }

    pub fn sample(&self, grid: &Grid) -> Field {
        match *self {
            Profile::Zero => grid.zeros(),
            Profile::Bump { center, width, amplitude } => grid.sample(|x| amplitude * bump((x - center) / width)),
            Profile::OddBump { shift } => grid.sample(|x| bump(x - shift) - bump(x + shift)),
            Profile::RandomSmooth { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                SmoothShape::draw(&mut rng, 0.0, 0.0, 2.0, 6.0).sample(grid)
            }
        }
    }

    /// Half-width of the closed support.
    pub fn support_radius(&self) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Bump { center, width, .. } => center.abs() + width.abs(),
            Profile::OddBump { shift } => shift.abs() + 1.0,
            Profile::RandomSmooth { .. } => 6.0,
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Zero => write!(f, "zero"),
            Profile::Bump { center, width, amplitude } if *center == 0.0 && *width == 1.0 && *amplitude == 1.0 => {
                write!(f, "bump")
            }
            Profile::Bump { center, width, amplitude } => write!(f, "bump:{center}:{width}:{amplitude}"),
            Profile::OddBump { shift } => write!(f, "odd-bump:{shift}"),
            Profile::RandomSmooth { seed } => write!(f, "random:{seed}"),
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    /// `zero | bump | shifted-bump | odd-bump[:S] | bump:C:W[:A] | random:SEED`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| -> Result<f64> {
            p.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad number `{p}` in profile `{s}`")))
        };
        match parts.as_slice() {
            ["zero"] => Ok(Profile::Zero),
            ["bump"] => Ok(Profile::bump()),
            ["shifted-bump"] => Ok(Profile::shifted_bump()),
            ["odd-bump"] => Ok(Profile::odd_bump()),
            ["odd-bump", sh] => Ok(Profile::OddBump { shift: num(sh)? }),
            ["bump", c, w] => Ok(Profile::Bump { center: num(c)?, width: num(w)?, amplitude: 1.0 }),
            ["bump", c, w, a] => Ok(Profile::Bump { center: num(c)?, width: num(w)?, amplitude: num(a)? }),
            ["random", seed] => seed
                .parse()
                .map(|seed| Profile::RandomSmooth { seed })
                .map_err(|_| Error::InvalidParameter(format!("bad seed in profile `{s}`"))),
            _ => Err(Error::InvalidParameter(format!("unknown profile `{s}`"))),
        }
    }
}

/// `window((x-c)/w) · Σ_k (a_k cos + b_k sin)(kπ(x-c)/w)` with the bump as
/// window and coefficients decaying like `(1+k)^{-2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothShape {
    pub center: f64,
    pub width: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

pub const FAMILY_MODES: usize = 6;

impl SmoothShape {
    /// Center uniform in `[c0 - spread, c0 + spread]`, width uniform in
    /// `[w_lo, w_hi]`.
    pub fn draw(rng: &mut impl Rng, c0: f64, spread: f64, w_lo: f64, w_hi: f64) -> Self {
        let center = if spread > 0.0 { c0 + rng.gen_range(-spread..=spread) } else { c0 };
        let width = if w_hi > w_lo { rng.gen_range(w_lo..=w_hi) } else { w_lo };
        let mut cos = Vec::with_capacity(FAMILY_MODES);
        let mut sin = Vec::with_capacity(FAMILY_MODES);
        for k in 0..FAMILY_MODES {
            let decay = 1.0 / ((1 + k) as f64).powi(2);
            // Keep a nonzero mean so the family is not orthogonal to constants.
            let a: f64 = if k == 0 { rng.gen_range(0.5..=1.0) } else { rng.gen_range(-1.0..=1.0) };
            cos.push(a * decay);
            sin.push(rng.gen_range(-1.0..=1.0) * decay);
        }
        Self { center, width, cos, sin }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.center) / self.width;
        let w = bump(s);
        if w == 0.0 {
            return 0.0;
        }
        let th = std::f64::consts::PI * s;
        let series: f64 = (0..self.cos.len())
            .map(|k| {
                let (sk, ck) = (k as f64 * th).sin_cos();
                self.cos[k] * ck + self.sin[k] * sk
            })
            .sum();
        w * series
    }

    pub fn sample(&self, grid: &Grid) -> Field {
        grid.sample(|x| self.eval(x))
    }

    pub fn support_radius(&self) -> f64 {
        self.center.abs() + self.width
    }
}

/// Reproducible family of `count` smooth, compactly supported functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFamily {
    pub seed: u64,
    pub count: usize,
    pub center_spread: f64,
    pub width_min: f64,
    pub width_max: f64,
}

impl RandomFamily {
    pub fn new(seed: u64, count: usize) -> Self {
        Self { seed, count, center_spread: 10.0, width_min: 0.5, width_max: 12.0 }
    }

    pub fn with_geometry(mut self, center_spread: f64, width_min: f64, width_max: f64) -> Self {
        self.center_spread = center_spread;
        self.width_min = width_min;
        self.width_max = width_max;
        self
    }

    pub fn shapes(&self) -> Vec<SmoothShape> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|_| SmoothShape::draw(&mut rng, 0.0, self.center_spread, self.width_min, self.width_max))
            .collect()
    }

    pub fn fields(&self, grid: &Grid) -> Vec<Field> {
        self.shapes().iter().map(|s| s.sample(grid)).collect()
    }

    pub fn max_support_radius(&self) -> f64 {
        self.center_spread + self.width_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for s in ["zero", "bump", "odd-bump:1.5", "bump:3:1:1", "random:42"] {
            let p: Profile = s.parse().unwrap();
            let back: Profile = p.to_string().parse().unwrap();
            assert_eq!(p, back);
        }
        assert_eq!("shifted-bump".parse::<Profile>().unwrap(), Profile::shifted_bump());
        assert!("wiggle".parse::<Profile>().is_err());
    }

    #[test]
    fn odd_bump_is_odd() {
        let g = Grid::new(10.0, 201).unwrap();
        let f = Profile::odd_bump().sample(&g);
        let n = g.len();
        for i in 0..n {
            assert!((f.get(i) + f.get(n - 1 - i)).abs() < 1e-14);
        }
    }

    #[test]
    fn family_is_reproducible_and_supported() {
        let g = Grid::new(40.0, 2001).unwrap();
        let fam = RandomFamily::new(7, 20);
        let a = fam.fields(&g);
        let b = fam.fields(&g);
        assert_eq!(a, b);
        let other = RandomFamily::new(8, 20).fields(&g);
        assert_ne!(a, other);
        for f in &a {
            assert!(f.support_radius(1e-14) <= fam.max_support_radius() + g.spacing());
            assert!(f.max_abs() > 0.0);
        }
    }

    #[test]
    fn support_radius_bounds_samples() {
        let g = Grid::new(20.0, 801).unwrap();
        for p in [Profile::bump(), Profile::shifted_bump(), Profile::odd_bump(), Profile::RandomSmooth { seed: 3 }] {
            assert!(p.sample(&g).support_radius(1e-14) <= p.support_radius() + g.spacing());
        }
    }
}
