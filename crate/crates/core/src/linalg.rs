//! Small dense complex matrices: one-sided Jacobi SVD and pivoted Cholesky.

use std::ops::{Index, IndexMut};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::RationalError;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Row-major complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        CMat::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) } else { ZERO })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        CMat {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest |A_ij − conj(A_ji)| relative to the largest entry.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut d: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d / scale
    }

    /// Submatrix of the given rows and columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> CMat {
        CMat::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    // conjugate-linear in the first argument
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Rotates the phase of `v` so that its first entry with modulus above
/// 1e-12 (relative to the largest) is real positive.
pub fn fix_phase(v: &mut [C64]) {
    let scale = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if let Some(first) = v.iter().find(|x| x.norm() > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        let ph = first.conj() / first.norm();
        for x in v.iter_mut() {
            *x *= ph;
        }
    }
}

/// Singular values (descending) and right singular vectors (as columns of
/// V, same order) of `a`.
pub struct Svd {
    pub singular_values: Vec<f64>,
    pub v: CMat,
}

/// One-sided Jacobi SVD. Tall inputs are first reduced to their triangular
/// QR factor, which has the same singular values and right vectors.
pub fn svd(a: &CMat) -> Svd {
    let n = a.cols();
    let w = if a.rows() > n { qr_r(a) } else { a.clone() };
    // column-major copies for cache-friendly rotations
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| w.col(j)).collect();
    let mut vcols: Vec<Vec<C64>> = (0..n).map(|j| CMat::identity(n).col(j)).collect();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|x| x.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|x| x.norm_sqr()).sum();
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.norm() <= 1e-15 * (alpha * beta).sqrt() || gamma.norm() == 0.0 {
                    continue;
                }
                rotated = true;
                // Hermitian 2×2 [[α, γ], [γ̄, β]] diagonalized by a unitary
                // rotation with phase e^{iφ} = γ/|γ|
                let g = gamma.norm();
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for x in [&mut cols, &mut vcols] {
                    let (lo, hi) = x.split_at_mut(q);
                    for (a, b) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                        let (ap, bq) = (*a, *b);
                        *a = c * ap - s * phase.conj() * bq;
                        *b = s * phase * ap + c * bq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    Svd {
        singular_values: order.iter().map(|&j| norms[j]).collect(),
        v: CMat::from_fn(n, n, |i, j| vcols[order[j]][i]),
    }
}

/// R factor of a Householder QR of a tall matrix (n × n).
fn qr_r(a: &CMat) -> CMat {
    let (m, n) = (a.rows(), a.cols());
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| a.col(j)).collect();
    for k in 0..n.min(m) {
        let x = &cols[k][k..];
        let xn = norm2(x);
        if xn == 0.0 {
            continue;
        }
        let x0 = x[0];
        let ph = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::new(1.0, 0.0) };
        let mut u: Vec<C64> = x.to_vec();
        u[0] += ph * xn;
        let un2: f64 = u.iter().map(|v| v.norm_sqr()).sum();
        if un2 == 0.0 {
            continue;
        }
        for col in cols.iter_mut().skip(k) {
            let y = &mut col[k..];
            let f = dot(&u, y) * (2.0 / un2);
            for (yi, ui) in y.iter_mut().zip(&u) {
                *yi -= f * ui;
            }
        }
    }
    CMat::from_fn(n, n, |i, j| if i <= j { cols[j][i] } else { ZERO })
}

/// Unit vector v minimizing ‖Mv‖₂, with the phase convention of
/// [`fix_phase`], and the minimal singular value.
pub fn min_right_singular_vector(m: &CMat) -> (Vec<C64>, f64) {
    assert!(m.cols() >= 1, "need at least one column");
    let s = svd(m);
    let n = m.cols();
    let mut v = s.v.col(n - 1);
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    fix_phase(&mut v);
    (v, s.singular_values[n - 1])
}

/// Rank-revealing Cholesky G ≈ R^H R with diagonal pivoting.
#[derive(Clone, Debug)]
pub struct PivotedCholesky {
    /// T × S factor with columns in the original order.
    pub r: CMat,
    /// Pivot order of the accepted pivots.
    pub pivots: Vec<usize>,
}

impl PivotedCholesky {
    pub fn rank(&self) -> usize {
        self.r.rows()
    }
}

/// Pivoted Cholesky of a Hermitian PSD matrix; pivots below
/// `rel_threshold` times the largest diagonal entry end the factorization.
/// Diagonals below −`psd_tol`·trace are reported as indefinite.
pub fn pivoted_cholesky(g: &CMat, rel_threshold: f64, psd_tol: f64) -> Result<PivotedCholesky, RationalError> {
    let n = g.rows();
    if g.cols() != n {
        return Err(RationalError::Dimension("Gramian must be square".into()));
    }
    let trace: f64 = (0..n).map(|i| g[(i, i)].re).sum();
    let min_diag = (0..n).map(|i| g[(i, i)].re).fold(f64::INFINITY, f64::min);
    if n > 0 && min_diag < -psd_tol * trace.abs() {
        return Err(RationalError::NotPsd(min_diag));
    }
    let max_diag = (0..n).map(|i| g[(i, i)].re).fold(0.0, f64::max);
    if max_diag <= 0.0 {
        return Err(RationalError::RankZero);
    }
    let mut a = g.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for k in 0..n {
        // largest remaining diagonal
        let (p, d) = (k..n)
            .map(|i| (i, a[(perm[i], perm[i])].re))
            .fold((k, f64::NEG_INFINITY), |b, x| if x.1 > b.1 { x } else { b });
        if d <= rel_threshold * max_diag {
            break;
        }
        perm.swap(k, p);
        let pk = perm[k];
        let rkk = d.sqrt();
        let mut row = vec![ZERO; n];
        row[pk] = C64::new(rkk, 0.0);
        for &j in &perm[k + 1..] {
            row[j] = a[(pk, j)] / rkk;
        }
        // Schur complement update of the remaining block
        for &i in &perm[k + 1..] {
            for &j in &perm[k + 1..] {
                let upd = row[i].conj() * row[j];
                a[(i, j)] -= upd;
            }
        }
        rows.push(row);
    }
    let t = rows.len();
    Ok(PivotedCholesky {
        r: CMat::from_fn(t, n, |i, j| rows[i][j]),
        pivots: perm[..t].to_vec(),
    })
}

/// Inverse of a small Hermitian positive definite matrix via Cholesky.
pub fn hpd_inverse(a: &CMat) -> Result<CMat, RationalError> {
    let n = a.rows();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(RationalError::CauchyRankDeficient);
        }
        let ljj = d.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    // solve L L^H X = I column by column
    let mut inv = CMat::zeros(n, n);
    for c in 0..n {
        let mut y = vec![ZERO; n];
        for i in 0..n {
            let mut s = if i == c { C64::new(1.0, 0.0) } else { ZERO };
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * inv[(k, c)];
            }
            inv[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn min_vector_examples() {
        let (v, s) = min_right_singular_vector(&CMat::from_rows(&[vec![c(2.0), c(0.0)], vec![c(0.0), c(1.0)]]));
        assert!((v[0].norm()) < 1e-15 && (v[1] - c(1.0)).norm() < 1e-15 && (s - 1.0).abs() < 1e-15);
        let (v, s) = min_right_singular_vector(&CMat::from_rows(&[vec![c(1.0), c(1.0)], vec![c(1.0), c(1.0)]]));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0] - c(h)).norm() < 1e-15 && (v[1] + c(h)).norm() < 1e-15 && s < 1e-15);
    }

    /// Smallest eigenvalue of a Hermitian matrix by faer, as an independent
    /// oracle.
    fn min_eig(a: &CMat) -> f64 {
        let n = a.rows();
        let m = faer::Mat::<C64>::from_fn(n, n, |i, j| a[(i, j)]);
        let e = m.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        e.into_iter().fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn min_vector_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (r, cl) in [(5, 3), (40, 6), (3, 5), (12, 12)] {
            let m = random(&mut rng, r, cl);
            let (v, s) = min_right_singular_vector(&m);
            assert!((norm2(&v) - 1.0).abs() < 1e-14);
            let mv = norm2(&m.mul_vec(&v));
            let lam = min_eig(&m.adjoint().matmul(&m)).max(0.0);
            assert!((mv - lam.sqrt()).abs() < 1e-10, "{mv} {}", lam.sqrt());
            assert!((mv - s).abs() < 1e-10);
        }
    }

    #[test]
    fn svd_values_are_sorted_and_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random(&mut rng, 8, 4);
        let s = svd(&m);
        assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let av = m.matmul(&s.v);
        for j in 0..4 {
            assert!((norm2(&av.col(j)) - s.singular_values[j]).abs() < 1e-12);
        }
        let vhv = s.v.adjoint().matmul(&s.v);
        assert!(vhv.sub(&CMat::identity(4)).norm_fro() < 1e-13);
        let fro: f64 = s.singular_values.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((fro - m.norm_fro()).abs() < 1e-12);
    }

    #[test]
    fn cholesky_examples() {
        let id = pivoted_cholesky(&CMat::identity(4), 1e-12, 1e-10).unwrap();
        assert_eq!(id.rank(), 4);
        assert!(id.r.adjoint().matmul(&id.r).sub(&CMat::identity(4)).norm_fro() < 1e-15);
        let ones = CMat::from_fn(3, 3, |_, _| c(1.0));
        let f = pivoted_cholesky(&ones, 1e-12, 1e-10).unwrap();
        assert_eq!(f.rank(), 1);
        assert!(f.r.sub(&CMat::from_fn(1, 3, |_, _| c(1.0))).norm_fro() < 1e-15);
        let neg = CMat::from_rows(&[vec![c(1.0), c(0.0)], vec![c(0.0), c(-1.0)]]);
        assert!(matches!(pivoted_cholesky(&neg, 1e-12, 1e-10), Err(RationalError::NotPsd(_))));
        assert!(matches!(pivoted_cholesky(&CMat::zeros(2, 2), 1e-12, 1e-10), Err(RationalError::RankZero)));
    }

    #[test]
    fn cholesky_reveals_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = random(&mut rng, 2, 5);
        let g = b.adjoint().matmul(&b);
        let f = pivoted_cholesky(&g, 1e-12, 1e-10).unwrap();
        assert_eq!(f.rank(), 2);
        assert!(f.r.adjoint().matmul(&f.r).sub(&g).norm_fro() <= 1e-10 * g.norm_fro());
    }

    #[test]
    fn hpd_inverse_is_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random(&mut rng, 6, 4);
        let g = b.adjoint().matmul(&b);
        let inv = hpd_inverse(&g).unwrap();
        assert!(inv.matmul(&g).sub(&CMat::identity(4)).norm_fro() < 1e-10);
    }

    #[test]
    fn phase_convention() {
        let mut v = vec![C64::new(0.0, 0.0), C64::new(0.0, 2.0), C64::new(1.0, 0.0)];
        fix_phase(&mut v);
        assert!((v[1] - c(2.0)).norm() < 1e-15);
        assert!((v[2] - C64::new(0.0, -1.0)).norm() < 1e-15);
    }
}
