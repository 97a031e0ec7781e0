//! Small dense linear algebra: a row-major matrix, a cyclic Jacobi
//! eigensolver for symmetric matrices, an LU determinant and a one-sided
//! Jacobi singular value routine.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Build from nested rows. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Self {
            rows: n,
            cols: m,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| crate::scalar::dot(self.row(i), x))
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `self - shift * I`.
    pub fn shifted(&self, shift: T) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] -= shift;
        }
        m
    }

    /// Copy `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// Gershgorin interval `[lo, hi]` enclosing every eigenvalue of a
    /// symmetric matrix.
    pub fn gershgorin(&self) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for i in 0..self.rows {
            let r: T = (0..self.cols)
                .filter(|&j| j != i)
                .map(|j| self[(i, j)].abs())
                .sum();
            lo = lo.min(self[(i, i)] - r);
            hi = hi.max(self[(i, i)] + r);
        }
        if self.rows == 0 {
            (T::zero(), T::zero())
        } else {
            (lo, hi)
        }
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a real symmetric matrix: ascending `values`,
/// eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Mat<T>,
    pub sweeps: usize,
}

impl<T: Real> SymEigen<T> {
    /// The `k`-th eigenvector.
    pub fn vector(&self, k: usize) -> Vec<T> {
        self.vectors.col(k)
    }

    /// `Q Λ Qᵀ`.
    pub fn reconstruct(&self) -> Mat<T> {
        let n = self.values.len();
        Mat::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)])
                .sum()
        })
    }

    /// `max_k ‖A v_k − λ_k v_k‖`.
    pub fn residual_bound(&self, m: &Mat<T>) -> T {
        (0..self.values.len())
            .map(|k| {
                let v = self.vector(k);
                let av = m.matvec(&v);
                av.iter()
                    .zip(&v)
                    .map(|(&a, &x)| (a - self.values[k] * x).powi(2))
                    .sum::<T>()
                    .sqrt()
            })
            .fold(T::zero(), T::max)
    }
}

pub const MAX_JACOBI_SWEEPS: usize = 100;

/// Diagonalize a symmetric matrix by cyclic Jacobi rotations.
///
/// Converged when the off-diagonal Frobenius norm drops below
/// `tol · ‖m‖_F`. Input must be symmetric within `1e-12 · ‖m‖` (or a few
/// ulps for low-precision scalars).
pub fn diagonalize_sym<T: Real>(m: &Mat<T>, tol: T) -> Result<SymEigen<T>> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "diagonalize_sym needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let scale = m.frobenius();
    let sym_tol = T::default_tol() * scale.max(T::min_positive_value());
    if m.asymmetry() > sym_tol {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric (max |a_ij - a_ji| = {})",
            m.asymmetry()
        )));
    }

    let mut a = m.clone();
    // exact symmetry from here on
    for i in 0..n {
        for j in (i + 1)..n {
            let s = (a[(i, j)] + a[(j, i)]) * T::lit(0.5);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    let mut v = Mat::identity(n);
    let threshold = tol * scale;
    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= threshold || n < 2 {
            break;
        }
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi did not converge after {MAX_JACOBI_SWEEPS} sweeps (off-diagonal {off}, target {threshold})"
            )));
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                rotated |= rotate(&mut a, &mut v, p, q);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| a[(k, k)]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymEigen {
        values,
        vectors,
        sweeps,
    })
}

fn off_diagonal_norm<T: Real>(a: &Mat<T>) -> T {
    let n = a.rows();
    let mut s = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            s += a[(i, j)] * a[(i, j)];
        }
    }
    (s + s).sqrt()
}

/// Apply one Jacobi rotation annihilating `a[p][q]`. Returns false when the
/// rotation is numerically the identity.
fn rotate<T: Real>(a: &mut Mat<T>, v: &mut Mat<T>, p: usize, q: usize) -> bool {
    let n = a.rows();
    let apq = a[(p, q)];
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let two = T::lit(2.0);
    let theta = (aqq - app) / (two * apq);
    let t = if theta.abs() > T::lit(1e150).min(T::max_value().sqrt()) {
        T::one() / (two * theta)
    } else {
        theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
    };
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;
    if s == T::zero() {
        a[(p, q)] = T::zero();
        a[(q, p)] = T::zero();
        return false;
    }
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = T::zero();
    a[(q, p)] = T::zero();
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
    true
}

/// Determinant by Gaussian elimination with partial pivoting. The sign is
/// tracked through row swaps.
pub fn determinant<T: Real>(m: &Mat<T>) -> Result<T> {
    if !m.is_square() {
        return Err(Error::Shape("determinant needs a square matrix".into()));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut det = T::one();
    for k in 0..n {
        let mut piv = k;
        for i in (k + 1)..n {
            if a[(i, k)].abs() > a[(piv, k)].abs() {
                piv = i;
            }
        }
        let pivot = a[(piv, k)];
        if pivot == T::zero() {
            return Ok(T::zero());
        }
        if piv != k {
            for j in 0..n {
                let tmp = a[(k, j)];
                a[(k, j)] = a[(piv, j)];
                a[(piv, j)] = tmp;
            }
            det = -det;
        }
        det *= pivot;
        for i in (k + 1)..n {
            let f = a[(i, k)] / pivot;
            if f == T::zero() {
                continue;
            }
            for j in k..n {
                let akj = a[(k, j)];
                a[(i, j)] -= f * akj;
            }
        }
    }
    Ok(det)
}

/// Singular values (descending) by one-sided Jacobi orthogonalization.
///
/// Accurate to relative machine precision for small singular values, unlike
/// the square root of Gram-matrix eigenvalues.
pub fn singular_values<T: Real>(m: &Mat<T>) -> Result<Vec<T>> {
    // orthogonalize the shorter dimension
    let work = if m.cols() > m.rows() {
        m.transpose()
    } else {
        m.clone()
    };
    let rows = work.rows();
    let ncol = work.cols();
    let mut cols: Vec<Vec<T>> = (0..ncol).map(|j| work.col(j)).collect();
    // dot products of length `rows` carry rounding of order rows·ε
    let eps = T::epsilon() * T::from_count(rows.max(1));
    let mut converged = false;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut changed = false;
        for p in 0..ncol {
            for q in (p + 1)..ncol {
                let alpha = crate::scalar::dot(&cols[p], &cols[p]);
                let beta = crate::scalar::dot(&cols[q], &cols[q]);
                let gamma = crate::scalar::dot(&cols[p], &cols[q]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                changed = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let x = cols[p][i];
                    let y = cols[q][i];
                    cols[p][i] = c * x - s * y;
                    cols[q][i] = s * x + c * y;
                }
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(
            "one-sided Jacobi SVD did not converge".into(),
        ));
    }
    let mut sv: Vec<T> = cols.iter().map(|c| crate::scalar::norm(c)).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(sv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_symmetric(n: usize, seed: u64) -> Mat<f64> {
        let mut rng = SplitMix64::new(seed);
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x = rng.uniform(-1.0, 1.0);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    #[test]
    fn identity_eigenvalues_are_one() {
        let e = diagonalize_sym(&Mat::<f64>::identity(4), 1e-12).unwrap();
        assert_eq!(e.values, vec![1.0; 4]);
    }

    #[test]
    fn diagonal_sorted_with_unit_vectors() {
        let e = diagonalize_sym(&Mat::from_diag(&[3.0, 1.0, 2.0]), 1e-12).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(e.vector(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(e.vector(1), vec![0.0, 0.0, 1.0]);
        assert_eq!(e.vector(2), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn random_12x12_reconstruction() {
        let m = random_symmetric(12, 99);
        let e = diagonalize_sym(&m, 1e-12).unwrap();
        let mut diff = e.reconstruct();
        for i in 0..12 {
            for j in 0..12 {
                diff[(i, j)] -= m[(i, j)];
            }
        }
        assert!(diff.frobenius() <= 1e-9 * m.frobenius());
        let qtq = e.vectors.transpose().matmul(&e.vectors);
        for i in 0..12 {
            for j in 0..12 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - want).abs() < 1e-12);
            }
        }
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_non_symmetric() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(diagonalize_sym(&m, 1e-12), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn jacobi_in_single_precision() {
        let m = Mat::<f32>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = diagonalize_sym(&m, f32::default_tol()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-6);
        assert!((e.values[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn determinant_matches_closed_forms() {
        let m = Mat::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
        assert_eq!(determinant(&m).unwrap(), -6.0);
        let d = Mat::from_diag(&[2.0, -3.0, 0.5]);
        assert_eq!(determinant(&d).unwrap(), -3.0);
    }

    #[test]
    fn determinant_equals_eigenvalue_product() {
        let m = random_symmetric(7, 3);
        let e = diagonalize_sym(&m, 1e-13).unwrap();
        let prod: f64 = e.values.iter().product();
        let det = determinant(&m).unwrap();
        assert!((det - prod).abs() <= 1e-10 * prod.abs().max(1e-3));
    }

    #[test]
    fn singular_values_of_rank_one_and_rotation() {
        let u: [f64; 3] = [1.0, 2.0, -1.0];
        let v = [0.5, 0.0, 3.0, 1.0];
        let m = Mat::from_fn(3, 4, |i, j| u[i] * v[j]);
        let sv = singular_values(&m).unwrap();
        let expect = crate::scalar::norm(&u) * crate::scalar::norm(&v);
        assert!((sv[0] - expect).abs() < 1e-12);
        assert!(sv[1..].iter().all(|&s| s < 1e-14 * expect));

        let c = 0.6_f64;
        let s = 0.8_f64;
        let r = Mat::from_rows(&[vec![3.0 * c, -s], vec![3.0 * s, c]]).unwrap();
        let sv = singular_values(&r).unwrap();
        assert!((sv[0] - 3.0).abs() < 1e-12 && (sv[1] - 1.0).abs() < 1e-12);
    }
}
