//! Uniform truncated mesh on `[-L, L]`, grid functions and the quadrature,
//! norm and difference primitives everything else is built on.
//!
//! Quadrature is the composite trapezoid rule. Inner products use the same
//! weights, so spectral and quadrature norms of a field agree.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform mesh `x_i = -L + i h`, `i = 0..n`, with an odd node count so that
/// `x = 0` is a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "half-width must be positive, got {half_width}"
            )));
        }
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "node count must be odd and at least 3, got {n}"
            )));
        }
        Ok(Self {
            half_width,
            n,
            h: 2.0 * half_width / (n - 1) as f64,
        })
    }

    /// Grid with spacing as close as possible to `h` (rounded so the node
    /// count is odd).
    pub fn with_spacing(half_width: f64, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter(format!("spacing must be positive, got {h}")));
        }
        let cells = ((half_width / h).round() as usize).max(1);
        Self::new(half_width, 2 * cells + 1)
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Index of the node at `x = 0`.
    #[inline]
    pub fn center(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Node coordinate. Measured from the center so that `x_center == 0`
    /// and the grid is exactly symmetric.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == 0 {
            -self.half_width
        } else if i == self.n - 1 {
            self.half_width
        } else {
            (i as f64 - self.center() as f64) * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n - 1 {
            0.5 * self.h
        } else {
            self.h
        }
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: *self,
            values: (0..self.n).map(|i| f(self.x(i))).collect(),
        }
    }

    pub fn zeros(&self) -> Field {
        Field {
            grid: *self,
            values: vec![0.0; self.n],
        }
    }

    pub fn constant(&self, c: f64) -> Field {
        Field {
            grid: *self,
            values: vec![c; self.n],
        }
    }

    /// Closed index range of nodes with `a <= x_i <= b` (with a half-spacing
    /// of slack for rounding), or `None` when empty.
    pub fn index_range(&self, a: f64, b: f64) -> Option<(usize, usize)> {
        let eps = 1e-9 * self.h;
        let lo = (0..self.n).find(|&i| self.x(i) >= a - eps)?;
        let hi = (0..self.n).rev().find(|&i| self.x(i) <= b + eps)?;
        (lo <= hi).then_some((lo, hi))
    }

    /// Same grid refined by an integer factor (odd node count preserved).
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.half_width, (self.n - 1) * factor + 1)
    }

    /// Grid with the same spacing and `factor` times the half-width.
    pub fn widened(&self, factor: usize) -> Result<Self> {
        Self::new(self.half_width * factor as f64, (self.n - 1) * factor + 1)
    }
}

/// Supported Lebesgue exponents for [`Field::lp_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

impl Norm {
    pub fn from_exponent(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(Norm::L1)
        } else if p == 2.0 {
            Ok(Norm::L2)
        } else if p == f64::INFINITY {
            Ok(Norm::Inf)
        } else {
            Err(Error::InvalidParameter(format!("unsupported norm exponent {p}")))
        }
    }
}

/// Real grid function, one value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Construction without the finiteness scan, for values produced inside
    /// the crate.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise map that also sees the node coordinate.
    pub fn map_with_x(&self, f: impl Fn(f64, f64) -> f64) -> Field {
        let g = self.grid;
        Field::from_raw(
            g,
            self.values.iter().enumerate().map(|(i, &v)| f(g.x(i), v)).collect(),
        )
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn div(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a / b)
    }

    /// Trapezoid rule `sum_i w_i f_i`.
    pub fn integrate(&self) -> f64 {
        let n = self.values.len();
        let h = self.grid.spacing();
        let interior: f64 = self.values[1..n - 1].iter().sum();
        h * (interior + 0.5 * (self.values[0] + self.values[n - 1]))
    }

    /// Trapezoid rule restricted to the nodes in `[a, b]`.
    pub fn integrate_between(&self, a: f64, b: f64) -> f64 {
        match self.grid.index_range(a, b) {
            None => 0.0,
            Some((lo, hi)) if lo == hi => 0.0,
            Some((lo, hi)) => {
                let h = self.grid.spacing();
                let interior: f64 = self.values[lo + 1..hi].iter().sum();
                h * (interior + 0.5 * (self.values[lo] + self.values[hi]))
            }
        }
    }

    /// h-weighted (trapezoid) inner product.
    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.dot_unchecked(other))
    }

    pub(crate) fn dot_unchecked(&self, other: &Field) -> f64 {
        let n = self.values.len();
        let h = self.grid.spacing();
        let mut s = 0.5 * (self.values[0] * other.values[0] + self.values[n - 1] * other.values[n - 1]);
        for i in 1..n - 1 {
            s += self.values[i] * other.values[i];
        }
        h * s
    }

    pub fn lp_norm(&self, p: Norm) -> f64 {
        match p {
            Norm::L1 => self.map(f64::abs).integrate(),
            Norm::L2 => self.dot_unchecked(self).sqrt(),
            Norm::Inf => self.max_abs(),
        }
    }

    pub fn l1(&self) -> f64 {
        self.lp_norm(Norm::L1)
    }

    pub fn l2(&self) -> f64 {
        self.lp_norm(Norm::L2)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ |f| w dx`.
    pub fn weighted_l1(&self, w: &Field) -> Result<f64> {
        Ok(self.zip_map(w, |f, w| f.abs() * w)?.integrate())
    }

    /// Central differences inside, second-order one-sided stencils at the
    /// two endpoints.
    pub fn derivative(&self) -> Field {
        let f = &self.values;
        let n = f.len();
        let h = self.grid.spacing();
        let mut d = vec![0.0; n];
        d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
        d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
        for i in 1..n - 1 {
            d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
        }
        Field::from_raw(self.grid, d)
    }

    /// Squared staggered gradient redistributed to nodes:
    /// `g_i = ((D+f)_i^2 + (D-f)_i^2) / 2`, so that the trapezoid integral of
    /// `g` equals `sum_{i} h ((f_{i+1}-f_i)/h)^2` exactly when `f` vanishes at
    /// both ends. This is the gradient part of the discrete Dirichlet form.
    pub fn staggered_gradient_sq(&self) -> Field {
        let f = &self.values;
        let n = f.len();
        let h = self.grid.spacing();
        let mut g = vec![0.0; n];
        for i in 0..n - 1 {
            let d = (f[i + 1] - f[i]) / h;
            let d2 = 0.5 * d * d;
            g[i] += d2;
            g[i + 1] += d2;
        }
        // Endpoint nodes carry only one half-cell contribution, which the
        // trapezoid weight h/2 would halve again.
        g[0] *= 2.0;
        g[n - 1] *= 2.0;
        Field::from_raw(self.grid, g)
    }

    /// Smallest `r` such that `|f| < tol` outside `[-r, r]`.
    pub fn support_radius(&self, tol: f64) -> f64 {
        let g = self.grid;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() >= tol)
            .map(|(i, _)| g.x(i).abs())
            .fold(0.0, f64::max)
    }
}

impl Add for &Field {
    type Output = Field;

    /// Panics when the grids differ.
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b).expect("grid mismatch in field addition")
    }
}

impl Sub for &Field {
    type Output = Field;

    /// Panics when the grids differ.
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b).expect("grid mismatch in field subtraction")
    }
}

impl Mul<&Field> for f64 {
    type Output = Field;

    fn mul(self, rhs: &Field) -> Field {
        rhs.scaled(self)
    }
}
