//! Symmetric tridiagonal eigensolvers.
//!
//! A matrix is given by its diagonal `d` (length m) and off-diagonal `e`
//! (length m-1). Eigenvalues come from implicit QL (whole spectrum) or Sturm
//! bisection (spectral window); eigenvectors from inverse iteration with
//! Gram-Schmidt against close neighbours.

use crate::error::{Error, Result};

const MAX_QL_SWEEPS: usize = 60;
const INVERSE_ITERATIONS: usize = 3;
const EXTRA_ITERATIONS: usize = 4;

/// Gershgorin interval containing the spectrum.
pub fn gershgorin(d: &[f64], e: &[f64]) -> (f64, f64) {
    let m = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < m { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (lo, hi)
}

fn norm_bound(d: &[f64], e: &[f64]) -> f64 {
    let (lo, hi) = gershgorin(d, e);
    lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
}

/// All eigenvalues, ascending, by implicit QL with Wilkinson-type shifts.
pub fn ql_eigenvalues(d: &[f64], e: &[f64]) -> Result<Vec<f64>> {
    let m = d.len();
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().copied().chain(std::iter::once(0.0)).collect();
    for l in 0..m {
        let mut sweeps = 0;
        loop {
            let mut mm = l;
            while mm + 1 < m {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(Error::NonConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[mm] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut deflated = false;
            for i in (l..mm).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    d.sort_by(|a, b| a.total_cmp(b));
    Ok(d)
}

/// Number of eigenvalues strictly below `x`.
pub fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    sturm_count_with(d, e, x, pivot_floor(d, e))
}

fn pivot_floor(d: &[f64], e: &[f64]) -> f64 {
    f64::MIN_POSITIVE.sqrt() * norm_bound(d, e).max(1.0)
}

fn sturm_count_with(d: &[f64], e: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        q = d[i] - x - e[i - 1] * e[i - 1] / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Eigenvalues in `[lo, hi)`, ascending, by bisection on Sturm counts.
pub fn bisect_eigenvalues(d: &[f64], e: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let (glo, ghi) = gershgorin(d, e);
    let lo = lo.max(glo - 1.0);
    let hi = hi.min(ghi + 1.0);
    if !(hi > lo) {
        return Vec::new();
    }
    let pivmin = pivot_floor(d, e);
    let first = sturm_count_with(d, e, lo, pivmin);
    let last = sturm_count_with(d, e, hi, pivmin);
    let count = last - first;
    let mut lower = vec![lo; count];
    let mut upper = vec![hi; count];
    let scale = norm_bound(d, e);
    for k in 0..count {
        let (mut a, mut b) = (lower[k], upper[k]);
        while b - a > 2.0 * f64::EPSILON * (a.abs().max(b.abs())) + 4.0 * f64::EPSILON * scale * 1e-3 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let c = sturm_count_with(d, e, mid, pivmin);
            // Every evaluation tightens the brackets of later eigenvalues too.
            for (j, (lj, uj)) in lower.iter_mut().zip(upper.iter_mut()).enumerate().skip(k + 1) {
                if first + j < c {
                    *uj = uj.min(mid);
                } else {
                    *lj = lj.max(mid);
                }
            }
            if first + k < c {
                b = mid;
            } else {
                a = mid;
            }
        }
        lower[k] = a;
        upper[k] = b;
    }
    lower.iter().zip(&upper).map(|(a, b)| 0.5 * (a + b)).collect()
}

/// LU factorization of `T - λI` with partial pivoting.
struct ShiftedLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swap: Vec<bool>,
}

impl ShiftedLu {
    fn new(d: &[f64], e: &[f64], lambda: f64, tiny: f64) -> Self {
        let m = d.len();
        let mut dl = e.to_vec();
        let mut du = e.to_vec();
        let mut dd: Vec<f64> = d.iter().map(|x| x - lambda).collect();
        let mut du2 = vec![0.0; m.saturating_sub(2)];
        let mut swap = vec![false; m.saturating_sub(1)];
        for i in 0..m.saturating_sub(1) {
            if dd[i].abs() >= dl[i].abs() {
                if dd[i] == 0.0 {
                    dd[i] = tiny;
                }
                let fact = dl[i] / dd[i];
                dl[i] = fact;
                dd[i + 1] -= fact * du[i];
            } else {
                let fact = dd[i] / dl[i];
                dd[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = dd[i + 1];
                dd[i + 1] = temp - fact * dd[i + 1];
                if i + 2 < m {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swap[i] = true;
            }
        }
        for x in dd.iter_mut() {
            if x.abs() < tiny {
                *x = tiny.copysign(*x);
            }
        }
        Self { dl, d: dd, du, du2, swap }
    }

    fn solve(&self, b: &mut [f64]) {
        let m = b.len();
        for i in 0..m - 1 {
            if self.swap[i] {
                let t = b[i];
                b[i] = b[i + 1];
                b[i + 1] = t - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[m - 1] /= self.d[m - 1];
        if m >= 2 {
            b[m - 2] = (b[m - 2] - self.du[m - 2] * b[m - 1]) / self.d[m - 2];
        }
        for i in (0..m.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(d: &[f64], e: &[f64], lambda: f64, v: &[f64]) -> f64 {
    let m = d.len();
    let mut acc = 0.0;
    for i in 0..m {
        let mut r = (d[i] - lambda) * v[i];
        if i > 0 {
            r += e[i - 1] * v[i - 1];
        }
        if i + 1 < m {
            r += e[i] * v[i + 1];
        }
        acc += r * r;
    }
    acc.sqrt()
}

/// Deterministic start vector with no special structure.
fn start_vector(m: usize, seed: usize) -> Vec<f64> {
    let mut s = (seed as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03;
    (0..m)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// Relative gap below which eigenvectors are explicitly orthogonalized.
pub const ORTHO_GAP: f64 = 1e-4;

/// Unit eigenvectors (Euclidean norm) for the given ascending eigenvalues.
///
/// `index_offset` only labels errors.
pub fn inverse_iteration(d: &[f64], e: &[f64], eigenvalues: &[f64], index_offset: usize) -> Result<Vec<Vec<f64>>> {
    let scale = norm_bound(d, e);
    let gap = ORTHO_GAP * scale;
    // Independent chunks separated by gaps wider than the threshold.
    let mut cuts = vec![0];
    for k in 1..eigenvalues.len() {
        if eigenvalues[k] - eigenvalues[k - 1] > gap {
            cuts.push(k);
        }
    }
    cuts.push(eigenvalues.len());
    let chunks: Vec<(usize, usize)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();

    let run = |&(a, b): &(usize, usize)| -> Result<Vec<Vec<f64>>> {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(b - a);
        for k in a..b {
            let v = one_vector(d, e, eigenvalues, k, a, &out, scale, gap)
                .ok_or(Error::NonConvergence { index: index_offset + k })?;
            out.push(v);
        }
        Ok(out)
    };

    #[cfg(feature = "parallel")]
    let parts: Vec<Result<Vec<Vec<f64>>>> = {
        use rayon::prelude::*;
        chunks.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<Vec<Vec<f64>>>> = chunks.iter().map(run).collect();

    let mut all = Vec::with_capacity(eigenvalues.len());
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

#[allow(clippy::too_many_arguments)]
fn one_vector(
    d: &[f64],
    e: &[f64],
    eigenvalues: &[f64],
    k: usize,
    chunk_start: usize,
    previous: &[Vec<f64>],
    scale: f64,
    gap: f64,
) -> Option<Vec<f64>> {
    let m = d.len();
    let lambda = eigenvalues[k];
    let tiny = f64::EPSILON * scale;
    let lu = ShiftedLu::new(d, e, lambda, tiny);
    let neighbours: Vec<&Vec<f64>> = (chunk_start..k)
        .rev()
        .take_while(|&j| lambda - eigenvalues[j] <= gap)
        .map(|j| &previous[j - chunk_start])
        .collect();
    let tol = 1e3 * f64::EPSILON * scale * (m as f64).sqrt().max(1.0);
    let mut v = start_vector(m, k + 1);
    for it in 0..INVERSE_ITERATIONS + EXTRA_ITERATIONS {
        lu.solve(&mut v);
        for u in &neighbours {
            let c: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(u.iter()) {
                *x -= c * y;
            }
        }
        let nrm = norm2(&v);
        if !(nrm > 0.0) || !nrm.is_finite() {
            v = start_vector(m, k + 7 * it + 3);
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nrm);
        if it + 1 >= INVERSE_ITERATIONS && residual(d, e, lambda, &v) <= tol {
            return Some(v);
        }
    }
    None
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Cyclic Jacobi on a dense symmetric matrix; slow but independent.
    pub(crate) fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = a.len();
        let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
            if off < 1e-26 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for row in a.iter_mut() {
                        let (akp, akq) = (row[p], row[q]);
                        row[p] = c * akp - s * akq;
                        row[q] = s * akp + c * akq;
                    }
                    #[allow(clippy::needless_range_loop)]
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for row in v.iter_mut() {
                        let (vp, vq) = (row[p], row[q]);
                        row[p] = c * vp - s * vq;
                        row[q] = s * vp + c * vq;
                    }
                }
            }
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
        let vals = idx.iter().map(|&i| a[i][i]).collect();
        let vecs = idx.iter().map(|&i| (0..n).map(|r| v[r][i]).collect()).collect();
        (vals, vecs)
    }

    fn dense(d: &[f64], e: &[f64]) -> Vec<Vec<f64>> {
        let m = d.len();
        let mut a = vec![vec![0.0; m]; m];
        for i in 0..m {
            a[i][i] = d[i];
            if i + 1 < m {
                a[i][i + 1] = e[i];
                a[i + 1][i] = e[i];
            }
        }
        a
    }

    fn sample_matrix(m: usize) -> (Vec<f64>, Vec<f64>) {
        let d = (0..m).map(|i| 2.0 + (i as f64 * 0.7).sin()).collect();
        let e = (0..m - 1).map(|i| -1.0 + 0.3 * (i as f64 * 1.3).cos()).collect();
        (d, e)
    }

    #[test]
    fn ql_matches_jacobi() {
        let (d, e) = sample_matrix(40);
        let ql = ql_eigenvalues(&d, &e).unwrap();
        let (jac, _) = jacobi_eigen(dense(&d, &e));
        for (a, b) in ql.iter().zip(&jac) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn bisection_matches_ql() {
        let (d, e) = sample_matrix(200);
        let ql = ql_eigenvalues(&d, &e).unwrap();
        let all = bisect_eigenvalues(&d, &e, f64::NEG_INFINITY, f64::INFINITY);
        assert_eq!(all.len(), 200);
        for (a, b) in ql.iter().zip(&all) {
            assert!((a - b).abs() < 1e-12);
        }
        let window = bisect_eigenvalues(&d, &e, 1.0, 2.5);
        let expected: Vec<f64> = ql.iter().copied().filter(|&x| (1.0..2.5).contains(&x)).collect();
        assert_eq!(window.len(), expected.len());
    }

    #[test]
    fn sturm_count_on_laplacian() {
        // Eigenvalues 2 - 2cos(kπ/(m+1)).
        let m = 50;
        let d = vec![2.0; m];
        let e = vec![-1.0; m - 1];
        let lam = |k: usize| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (m + 1) as f64).cos();
        assert_eq!(sturm_count(&d, &e, 0.5 * (lam(10) + lam(11))), 10);
        assert_eq!(sturm_count(&d, &e, -1.0), 0);
        assert_eq!(sturm_count(&d, &e, 5.0), m);
    }

    #[test]
    fn inverse_iteration_orthonormal_with_small_residuals() {
        let m = 300;
        let (d, e) = sample_matrix(m);
        let vals = ql_eigenvalues(&d, &e).unwrap();
        let vecs = inverse_iteration(&d, &e, &vals, 0).unwrap();
        for (k, v) in vecs.iter().enumerate() {
            assert!(residual(&d, &e, vals[k], v) < 1e-11);
        }
        for i in 0..m {
            for j in i..m {
                let dot: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-11, "({i},{j}) {dot}");
            }
        }
    }

    #[test]
    fn eigenvectors_match_jacobi_up_to_sign() {
        let (d, e) = sample_matrix(30);
        let vals = ql_eigenvalues(&d, &e).unwrap();
        let vecs = inverse_iteration(&d, &e, &vals, 0).unwrap();
        let (_, jv) = jacobi_eigen(dense(&d, &e));
        for (a, b) in vecs.iter().zip(&jv) {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn one_by_one_and_two_by_two() {
        assert_eq!(ql_eigenvalues(&[3.0], &[]).unwrap(), vec![3.0]);
        let v = ql_eigenvalues(&[2.0, 2.0], &[-1.0]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 3.0).abs() < 1e-14);
        let vecs = inverse_iteration(&[2.0, 2.0], &[-1.0], &v, 0).unwrap();
        assert!((vecs[0][0].abs() - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
