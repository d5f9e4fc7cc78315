//! Discrete Schrödinger operator `S = -d²/dx² + V` with Dirichlet walls at
//! `±L`, its eigendecomposition and functional calculus.
//!
//! The operator acts on the `n - 2` interior nodes; a field's endpoint
//! values are treated as zero. Eigenvectors are normalized in the
//! h-weighted inner product, so spectral and quadrature norms coincide.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::potential::Potential;
use crate::tridiag;

#[derive(Debug, Clone)]
pub struct SchrodingerOperator {
    grid: Grid,
    diag: Vec<f64>,
    off: f64,
}

impl SchrodingerOperator {
    pub fn assemble(potential: &Potential) -> Self {
        let grid = *potential.grid();
        let h2 = grid.spacing().powi(2);
        let v = potential.values();
        let diag = (1..grid.len() - 1).map(|i| 2.0 / h2 + v[i]).collect();
        Self { grid, diag, off: -1.0 / h2 }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Diagonal over interior nodes.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diagonal(&self) -> f64 {
        self.off
    }

    pub fn dimension(&self) -> usize {
        self.diag.len()
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    fn off_vec(&self) -> Vec<f64> {
        vec![self.off; self.diag.len().saturating_sub(1)]
    }

    /// `Sf` on interior nodes, zero at the walls.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let n = self.grid.len();
        let x = f.values();
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            let left = if i > 1 { x[i - 1] } else { 0.0 };
            let right = if i < n - 2 { x[i + 1] } else { 0.0 };
            out[i] = self.diag[i - 1] * x[i] + self.off * (left + right);
        }
        Ok(Field::from_raw(self.grid, out))
    }

    /// `⟨Sf, f⟩` with the h-weighted inner product.
    pub fn quadratic_form(&self, f: &Field) -> Result<f64> {
        let sf = self.apply(f)?;
        Ok(interior_dot(&sf, f))
    }

    /// Full eigendecomposition.
    pub fn decompose(&self) -> Result<SpectralDecomposition> {
        let e = self.off_vec();
        let values = tridiag::ql_eigenvalues(&self.diag, &e)?;
        self.with_vectors(values, None)
    }

    /// Eigenpairs with `λ < lambda_max` only. Functions of `S` built from
    /// such a decomposition are accurate once the discarded modes have
    /// decayed, see [`SpectralDecomposition::valid_from`].
    pub fn decompose_below(&self, lambda_max: f64) -> Result<SpectralDecomposition> {
        if !(lambda_max > 0.0) {
            return Err(Error::InvalidParameter(format!("spectral cutoff must be positive, got {lambda_max}")));
        }
        let e = self.off_vec();
        let values = tridiag::bisect_eigenvalues(&self.diag, &e, f64::NEG_INFINITY, lambda_max);
        if values.len() == self.diag.len() {
            return self.with_vectors(values, None);
        }
        self.with_vectors(values, Some(lambda_max))
    }

    /// Eigenvalues only, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        tridiag::ql_eigenvalues(&self.diag, &self.off_vec())
    }

    fn with_vectors(&self, values: Vec<f64>, cutoff: Option<f64>) -> Result<SpectralDecomposition> {
        let e = self.off_vec();
        let vecs = tridiag::inverse_iteration(&self.diag, &e, &values, 0)?;
        let m = self.diag.len();
        let mut flat = Vec::with_capacity(m * vecs.len());
        for v in vecs {
            flat.extend(v);
        }
        Ok(SpectralDecomposition { grid: self.grid, eigenvalues: values, vectors: flat, cutoff })
    }
}

fn interior_dot(a: &Field, b: &Field) -> f64 {
    let n = a.grid().len();
    let h = a.grid().spacing();
    h * (1..n - 1).map(|i| a.get(i) * b.get(i)).sum::<f64>()
}

/// Eigenpairs `(λ_k, e_k)` of a [`SchrodingerOperator`], ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    grid: Grid,
    eigenvalues: Vec<f64>,
    /// Euclidean-unit eigenvectors over interior nodes, one after another.
    vectors: Vec<f64>,
    cutoff: Option<f64>,
}

/// Terms with `|φ(λ)c| <= NEGLIGIBLE · max|c|` are skipped in synthesis.
const NEGLIGIBLE: f64 = 1e-18;

impl SpectralDecomposition {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn is_complete(&self) -> bool {
        self.cutoff.is_none()
    }

    /// Spectral cutoff of a partial decomposition.
    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    fn dim(&self) -> usize {
        self.grid.len() - 2
    }

    fn raw(&self, k: usize) -> &[f64] {
        let m = self.dim();
        &self.vectors[k * m..(k + 1) * m]
    }

    /// Earliest time at which modes above the cutoff, damped at least like
    /// `e^{-rate·t}`, fall below `tol`. Zero for a full decomposition.
    pub fn valid_from(&self, rate: f64, tol: f64) -> f64 {
        match self.cutoff {
            None => 0.0,
            Some(_) => (1.0 / tol).ln() / rate,
        }
    }

    /// The h-normalized eigenfunction `e_k`.
    pub fn mode(&self, k: usize) -> Field {
        let s = 1.0 / self.grid.spacing().sqrt();
        let mut out = vec![0.0; self.grid.len()];
        for (o, v) in out[1..self.grid.len() - 1].iter_mut().zip(self.raw(k)) {
            *o = v * s;
        }
        Field::from_raw(self.grid, out)
    }

    /// `c_k = ⟨f, e_k⟩`.
    pub fn coefficients(&self, f: &Field) -> Result<Vec<f64>> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let sh = self.grid.spacing().sqrt();
        let interior = &f.values()[1..self.grid.len() - 1];
        let project = |k: usize| sh * self.raw(k).iter().zip(interior).map(|(a, b)| a * b).sum::<f64>();
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            Ok((0..self.len()).into_par_iter().map(project).collect())
        }
        #[cfg(not(feature = "parallel"))]
        {
            Ok((0..self.len()).map(project).collect())
        }
    }

    /// `Σ c_k e_k`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Field {
        let m = self.dim();
        let big = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let s = 1.0 / self.grid.spacing().sqrt();
        let mut acc = vec![0.0; m];
        for (k, &c) in coeffs.iter().enumerate().take(self.len()) {
            if c == 0.0 || c.abs() <= NEGLIGIBLE * big {
                continue;
            }
            for (a, v) in acc.iter_mut().zip(self.raw(k)) {
                *a += c * v;
            }
        }
        let mut out = vec![0.0; self.grid.len()];
        for (o, a) in out[1..self.grid.len() - 1].iter_mut().zip(&acc) {
            *o = a * s;
        }
        Field::from_raw(self.grid, out)
    }

    /// `φ(S)f = Σ φ(λ_k)⟨f, e_k⟩ e_k`.
    pub fn apply_function(&self, phi: impl Fn(f64) -> f64, f: &Field) -> Result<Field> {
        let c = self.coefficients(f)?;
        Ok(self.synthesize_with(&c, phi))
    }

    /// `Σ φ(λ_k) c_k e_k` for precomputed coefficients.
    pub fn synthesize_with(&self, coeffs: &[f64], phi: impl Fn(f64) -> f64) -> Field {
        let w: Vec<f64> = coeffs.iter().zip(&self.eigenvalues).map(|(c, &l)| phi(l) * c).collect();
        self.synthesize(&w)
    }

    /// `max_k ‖S e_k - λ_k e_k‖₂ / (|λ_k| + 1)` over every `stride`-th mode.
    pub fn max_residual(&self, op: &SchrodingerOperator, stride: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for k in (0..self.len()).step_by(stride.max(1)) {
            let e = self.mode(k);
            let r = &op.apply(&e)? - &e.scaled(self.eigenvalues[k]);
            worst = worst.max(r.l2() / (self.eigenvalues[k].abs() + 1.0));
        }
        Ok(worst)
    }

    /// `max |⟨e_j, e_k⟩ - δ_jk|` over every `stride`-th row against all modes.
    pub fn orthogonality_defect(&self, stride: usize) -> f64 {
        let mut worst = 0.0f64;
        for j in (0..self.len()).step_by(stride.max(1)) {
            let a = self.raw(j);
            for k in 0..self.len() {
                let dot: f64 = a.iter().zip(self.raw(k)).map(|(x, y)| x * y).sum();
                let want = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        worst
    }
}

/// `∫ (f')² + V f² dx` with the gradient taken cell by cell, which makes it
/// coincide with `⟨Sf, f⟩` for fields vanishing at the walls.
pub fn dirichlet_form(potential: &Potential, f: &Field) -> Result<f64> {
    f.check_same_grid(potential.field())?;
    let g = f.staggered_gradient_sq();
    let vf2 = f.zip_map(potential.field(), |a, v| v * a * a)?;
    Ok((&g + &vf2).integrate())
}

/// Largest endpoint magnitude relative to the sup norm; the Dirichlet form
/// and `⟨Sf, f⟩` differ by boundary terms when this is not small.
pub fn edge_magnitude(f: &Field) -> f64 {
    let n = f.grid().len();
    let m = f.max_abs();
    if m == 0.0 {
        0.0
    } else {
        f.get(0).abs().max(f.get(n - 1).abs()) / m
    }
}

/// Spectrum dump row.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectrumRow {
    pub k: usize,
    pub lambda: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialKind;
    use std::f64::consts::PI;

    fn setup(kind: Option<PotentialKind>, l: f64, n: usize) -> (Potential, SchrodingerOperator) {
        let g = Grid::new(l, n).unwrap();
        let v = match kind {
            Some(k) => Potential::new(k, &g).unwrap(),
            None => Potential::zero(&g),
        };
        let op = SchrodingerOperator::assemble(&v);
        (v, op)
    }

    fn smooth_bump(g: &Grid, c: f64, w: f64) -> Field {
        g.sample(|x| crate::potential::bump((x - c) / w))
    }

    #[test]
    fn smallest_grid() {
        let g = Grid::new(1.0, 3).unwrap();
        let op = SchrodingerOperator::assemble(&Potential::zero(&g));
        assert_eq!(op.diagonal(), &[2.0]);
        assert_eq!(op.off_diagonal(), -1.0);
        let f = Field::new(g, vec![5.0, 1.0, 7.0]).unwrap();
        assert_eq!(op.apply(&f).unwrap().values(), &[0.0, 2.0, 0.0]);
    }

    #[test]
    fn free_dirichlet_ground_state() {
        let (_, op) = setup(None, 10.0, 401);
        let lam = op.eigenvalues().unwrap();
        let exact = (PI / 20.0).powi(2);
        assert!((lam[0] - exact).abs() / exact < 1e-3);
        let (_, opv) = setup(Some(PotentialKind::InverseQuartic), 10.0, 401);
        assert!(opv.eigenvalues().unwrap()[0] > lam[0]);
    }

    #[test]
    fn free_modes_are_sines() {
        let (_, op) = setup(None, 5.0, 201);
        let dec = op.decompose().unwrap();
        for k in 0..4 {
            let e = dec.mode(k);
            let s = e.grid().sample(|x| (((k + 1) as f64) * PI * (x + 5.0) / 10.0).sin() / 5.0f64.sqrt());
            let dot = e.dot(&s).unwrap();
            assert!((dot.abs() - 1.0).abs() < 1e-3, "mode {k}: {dot}");
        }
    }

    #[test]
    fn trace_residual_orthogonality() {
        let (_, op) = setup(Some(PotentialKind::Bump), 8.0, 321);
        let dec = op.decompose().unwrap();
        let sum: f64 = dec.eigenvalues().iter().sum();
        assert!((sum - op.trace()).abs() / op.trace() < 1e-8);
        assert!(dec.eigenvalues()[0] >= -1e-12);
        assert!(dec.max_residual(&op, 1).unwrap() < 1e-9);
        assert!(dec.orthogonality_defect(1) < 1e-10);
    }

    #[test]
    fn functional_calculus_identities() {
        let (v, op) = setup(Some(PotentialKind::InverseQuartic), 10.0, 301);
        let dec = op.decompose().unwrap();
        let g = *v.grid();
        let f = smooth_bump(&g, 0.5, 3.0);
        let id = dec.apply_function(|_| 1.0, &f).unwrap();
        assert!((&id - &f).max_abs() < 1e-10);

        let s1 = dec.apply_function(|l| l, &f).unwrap();
        let s2 = dec.apply_function(|l| l, &s1).unwrap();
        let sq = dec.apply_function(|l| l * l, &f).unwrap();
        assert!((&s2 - &sq).max_abs() < 1e-9 * sq.max_abs().max(1.0));

        let direct = op.apply(&f).unwrap();
        assert!((&direct - &s1).max_abs() < 1e-9 * direct.max_abs());

        let eps = 0.3;
        let r = dec.apply_function(|l| 1.0 / (1.0 + eps * l), &f).unwrap();
        let back = &r + &op.apply(&r).unwrap().scaled(eps);
        assert!((&back - &f).max_abs() < 1e-8);
    }

    #[test]
    fn dirichlet_form_matches_quadratic_form() {
        let (v, op) = setup(Some(PotentialKind::InverseQuartic), 10.0, 401);
        let g = *v.grid();
        assert_eq!(dirichlet_form(&v, &g.zeros()).unwrap(), 0.0);
        let f = smooth_bump(&g, -1.0, 4.0);
        let a = dirichlet_form(&v, &f).unwrap();
        let b = op.quadratic_form(&f).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        assert!(edge_magnitude(&f) == 0.0);
    }

    #[test]
    fn rayleigh_quotient_of_first_mode() {
        let l = 6.0;
        let (v, _) = setup(None, l, 1201);
        let f = v.grid().sample(|x| (PI * (x + l) / (2.0 * l)).sin());
        let want = (PI / (2.0 * l)).powi(2) * l;
        assert!((dirichlet_form(&v, &f).unwrap() - want).abs() / want < 1e-4);
    }

    #[test]
    fn half_power_matches_form() {
        let (v, op) = setup(Some(PotentialKind::Bump), 10.0, 401);
        let dec = op.decompose().unwrap();
        let f = smooth_bump(v.grid(), 1.0, 2.0);
        let half = dec.apply_function(|l| l.max(0.0).sqrt(), &f).unwrap();
        let a = half.dot(&half).unwrap();
        let b = dirichlet_form(&v, &f).unwrap();
        assert!((a - b).abs() < 1e-9 * b);
    }

    #[test]
    fn smoothing_bound() {
        let (_, op) = setup(Some(PotentialKind::InverseQuartic), 10.0, 201);
        let lam = op.eigenvalues().unwrap();
        for tau in [1e-3, 0.1, 1.0, 10.0, 1e3] {
            assert!(lam.iter().all(|&l| l * tau * (-l * tau).exp() <= (-1.0f64).exp() + 1e-15));
        }
    }

    #[test]
    fn partial_decomposition_agrees_at_late_times() {
        let (v, op) = setup(Some(PotentialKind::InverseQuartic), 20.0, 401);
        let full = op.decompose().unwrap();
        let part = op.decompose_below(2.0).unwrap();
        assert!(!part.is_complete());
        assert!(part.len() < full.len());
        for (a, b) in part.eigenvalues().iter().zip(full.eigenvalues()) {
            assert!((a - b).abs() < 1e-10);
        }
        let f = smooth_bump(v.grid(), 0.0, 3.0);
        let t = part.valid_from(2.0, 1e-16);
        let a = full.apply_function(|l| (-l * t).exp(), &f).unwrap();
        let b = part.apply_function(|l| (-l * t).exp(), &f).unwrap();
        assert!((&a - &b).max_abs() < 1e-11 * a.max_abs(), "{} {}", (&a - &b).max_abs(), a.max_abs());
    }

    #[test]
    fn symmetry() {
        let (v, op) = setup(Some(PotentialKind::Bump), 5.0, 101);
        let g = *v.grid();
        let f = g.sample(|x| (1.3 * x + 0.2).sin() * (-x * x / 4.0).exp());
        let h = g.sample(|x| (0.4 * x + 0.3).cos() * (-(x - 0.5).powi(2) / 9.0).exp());
        let a = interior_dot(&op.apply(&f).unwrap(), &h);
        let b = interior_dot(&f, &op.apply(&h).unwrap());
        assert!((a - b).abs() <= 1e-10 * a.abs(), "{a} vs {b}");
    }
}
