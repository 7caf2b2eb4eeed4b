//! Dense complex linear algebra at small dimension.
//!
//! Everything here works on plain row-major `Vec<Complex64>` storage. The
//! dimensions this crate cares about are tiny (d up to a few dozen), so the
//! kernels favour determinism and transparent tolerances over speed:
//! Hermitian eigenproblems use cyclic Jacobi rotations and real null vectors
//! come from a one-sided (Hestenes) Jacobi SVD.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Sweep cap for both Jacobi iterations.
const MAX_SWEEPS: usize = 100;

/// Default relative singularity threshold for [`psd_inv_sqrt`].
pub const DEFAULT_SINGULAR_EPS: f64 = 1e-10;

/// Relative Hermiticity tolerance accepted by [`HermitianOperator::new`].
pub const HERMITICITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix shape {rows}x{cols} does not match {len} entries")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },

    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: max |M - M^dag| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Jacobi eigensolver did not converge for {name} (d = {dim}) after {sweeps} sweeps, off-diagonal norm {off_norm:e}")]
    NoConvergence {
        name: String,
        dim: usize,
        sweeps: usize,
        off_norm: f64,
    },

    #[error("operator is singular: smallest eigenvalue {smallest:e} <= threshold {threshold:e}")]
    SingularOperator { smallest: f64, threshold: f64 },

    #[error("homogeneous system has no null vector: best residual {residual:e} exceeds bound {bound:e}")]
    RankTooHigh { residual: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(LinalgError::ShapeMismatch {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(LinalgError::ShapeMismatch {
                rows: n_rows,
                cols: n_cols,
                len: rows.iter().map(Vec::len).sum(),
            });
        }
        Self::from_row_major(n_rows, n_cols, rows.concat())
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// `|u><v|`
    pub fn outer(u: &[Complex64], v: &[Complex64]) -> Self {
        let mut m = Self::zeros(u.len(), v.len());
        for (i, a) in u.iter().enumerate() {
            for (j, b) in v.iter().enumerate() {
                m[(i, j)] = a * b.conj();
            }
        }
        m
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

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry-wise distance to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn mat_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Max |M[j,k] - conj(M[k,j])|.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for j in 0..self.rows {
            for k in j..self.cols {
                dev = dev.max((self[(j, k)] - self[(k, j)].conj()).norm());
            }
        }
        dev
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// A square complex matrix that is Hermitian to within [`HERMITICITY_TOL`]
/// relative to its largest entry. The stored matrix is exactly Hermitian:
/// construction averages it with its adjoint.
#[derive(Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(LinalgError::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        let deviation = matrix.hermiticity_deviation();
        if deviation > HERMITICITY_TOL * matrix.max_abs() {
            return Err(LinalgError::NotHermitian { deviation });
        }
        Ok(Self::symmetrized(matrix))
    }

    /// Projects onto the Hermitian part, (M + M^dag)/2, without a tolerance
    /// check. Use for matrices that are Hermitian up to roundoff by
    /// construction.
    pub fn symmetrized(matrix: ComplexMatrix) -> Self {
        assert!(matrix.is_square());
        let adj = matrix.adjoint();
        let mut m = (&matrix + &adj).scale(Complex64::new(0.5, 0.0));
        for i in 0..m.rows() {
            m[(i, i)].im = 0.0;
        }
        Self { matrix: m }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        Self {
            matrix: ComplexMatrix::diag(values),
        }
    }

    /// `|v><v|`
    pub fn projector(v: &[Complex64]) -> Self {
        Self::symmetrized(ComplexMatrix::outer(v, v))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.matrix.mat_vec(v)
    }

    /// `<u|M|v>`
    pub fn sandwich(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        dot(u, &self.apply(v))
    }

    /// `<v|M|v>`, real up to roundoff; the imaginary residue is dropped.
    pub fn expectation(&self, v: &[Complex64]) -> f64 {
        self.sandwich(v, v).re
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::symmetrized(&self.matrix + &other.matrix)
    }

    /// `A M A^dag` for Hermitian `A`, i.e. the congruence used to normalise a
    /// POVM.
    pub fn congruence(&self, a: &HermitianOperator) -> Self {
        Self::symmetrized(a.matrix.matmul(&self.matrix).matmul(&a.matrix))
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.max_abs()
    }
}

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hermitian{:?}", self.matrix)
    }
}

/// `<u|v>` (conjugate-linear in the first argument).
pub fn dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Spectral decomposition of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        self.eigenvectors.column(k)
    }

    /// `V f(diag) V^dag`
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = f(lambda);
            for i in 0..n {
                let a = v[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += a * v[(j, k)].conj();
                }
            }
        }
        HermitianOperator::symmetrized(out)
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.map_spectrum(|x| x)
    }
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Eigendecomposition by cyclic complex Jacobi rotations. Eigenvalues come
/// back ascending with matching eigenvector columns.
pub fn hermitian_eig(op: &HermitianOperator) -> Result<HermitianEig> {
    hermitian_eig_named(op, "operator")
}

/// As [`hermitian_eig`], with a caller-supplied name for the convergence
/// diagnostic.
pub fn hermitian_eig_named(op: &HermitianOperator, name: &str) -> Result<HermitianEig> {
    let n = op.dim();
    let mut a = op.matrix().clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.max_abs();

    let mut converged = scale == 0.0 || n == 1;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE * 16.0 {
                    continue;
                }
                // Phase the (p,q) pair real, then apply a real Jacobi rotation.
                let u = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // J (restricted to p,q) = [[c, s], [-s conj(u), c conj(u)]]
                let jpp = Complex64::new(c, 0.0);
                let jpq = Complex64::new(s, 0.0);
                let jqp = -u.conj() * s;
                let jqq = u.conj() * c;

                // A <- A J
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * jpp + akq * jqp;
                    a[(k, q)] = akp * jpq + akq * jqq;
                }
                // A <- J^dag A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;
                // V <- V J
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * jpp + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * jqq;
                }
            }
        }
        converged = off_diagonal_norm(&a) <= f64::EPSILON * 0.5 * scale;
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            name: name.to_string(),
            dim: n,
            sweeps,
            off_norm: off_diagonal_norm(&a),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (new_k, &old_k) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[(i, new_k)] = v[(i, old_k)];
        }
    }
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

fn positive_definite_eig(op: &HermitianOperator, eps: f64) -> Result<HermitianEig> {
    let eig = hermitian_eig(op)?;
    let largest = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let smallest = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let threshold = eps * largest.abs().max(f64::MIN_POSITIVE);
    if smallest <= threshold {
        return Err(LinalgError::SingularOperator {
            smallest,
            threshold,
        });
    }
    Ok(eig)
}

/// `M^{-1/2}` for positive definite `M`. `eps` is relative to the largest
/// eigenvalue; see [`DEFAULT_SINGULAR_EPS`].
pub fn psd_inv_sqrt(op: &HermitianOperator, eps: f64) -> Result<HermitianOperator> {
    Ok(positive_definite_eig(op, eps)?.map_spectrum(|x| 1.0 / x.sqrt()))
}

/// `M^{1/2}` for positive definite `M`.
pub fn psd_sqrt(op: &HermitianOperator, eps: f64) -> Result<HermitianOperator> {
    Ok(positive_definite_eig(op, eps)?.map_spectrum(f64::sqrt))
}

/// Orthonormal basis of the eigenspace with eigenvalues `<= tol`.
pub fn null_space(op: &HermitianOperator, tol: f64) -> Result<Vec<Vec<Complex64>>> {
    let eig = hermitian_eig(op)?;
    Ok(eig
        .eigenvalues
        .iter()
        .enumerate()
        .take_while(|(_, &lambda)| lambda <= tol)
        .map(|(k, _)| eig.eigenvector(k))
        .collect())
}

/// Plane rotation of vectors `p < q`.
fn rotate_pair(vs: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = vs.split_at_mut(q);
    for (x, y) in head[p].iter_mut().zip(tail[0].iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Unit vector `x` of length `n` with `row . x = 0` for every row.
///
/// One-sided Jacobi SVD of the stacked rows; the right singular vector of the
/// smallest singular value is returned, signed so its first non-negligible
/// coordinate is positive. Fails with [`LinalgError::RankTooHigh`] when that
/// vector leaves a residual above `1e-9 * (1 + max row norm)`.
pub fn real_homogeneous_solve(rows: &[Vec<f64>], n: usize) -> Result<Vec<f64>> {
    assert!(n > 0, "real_homogeneous_solve needs at least one unknown");
    for r in rows {
        assert_eq!(r.len(), n, "row length differs from unknown count");
    }
    let m = rows.len();
    // Column-major copy of A (m x n) so column rotations are contiguous.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    if m > 0 {
        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..n.saturating_sub(1) {
                for q in p + 1..n {
                    let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                    let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                    let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                    if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    rotate_pair(&mut cols, p, q, c, s);
                    rotate_pair(&mut v, p, q, c, s);
                }
            }
            if !rotated {
                break;
            }
        }
    }

    let sigma: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let best = (0..n)
        .min_by(|&i, &j| sigma[i].total_cmp(&sigma[j]))
        .expect("n > 0");
    let mut x = v[best].clone();
    let len = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    x.iter_mut().for_each(|a| *a /= len);
    if let Some(first) = x.iter().find(|a| a.abs() > 1e-12) {
        if *first < 0.0 {
            x.iter_mut().for_each(|a| *a = -*a);
        }
    }

    let max_row_norm = rows
        .iter()
        .map(|r| r.iter().map(|a| a * a).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let residual = homogeneous_residual(rows, &x);
    let bound = 1e-9 * (1.0 + max_row_norm);
    if residual > bound {
        return Err(LinalgError::RankTooHigh { residual, bound });
    }
    Ok(x)
}

/// max over rows of |row . x|
pub fn homogeneous_residual(rows: &[Vec<f64>], x: &[f64]) -> f64 {
    rows.iter()
        .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(d: usize, seed: u64) -> HermitianOperator {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut m = ComplexMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        HermitianOperator::symmetrized(m)
    }

    fn assert_orthonormal_columns(v: &ComplexMatrix, tol: f64) {
        let g = v.adjoint().matmul(v);
        assert!(g.max_abs_diff(&ComplexMatrix::identity(v.cols())) <= tol);
    }

    #[test]
    fn eig_of_identity() {
        let eig = hermitian_eig(&HermitianOperator::identity(2)).unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0, 1.0]);
        assert_orthonormal_columns(&eig.eigenvectors, 1e-14);
    }

    #[test]
    fn eig_of_diagonal_is_sorted() {
        let eig = hermitian_eig(&HermitianOperator::diag(&[4.0, 1.0])).unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0, 4.0]);
    }

    #[test]
    fn eig_random_residual_seed_42() {
        let op = random_hermitian(5, 42);
        let eig = hermitian_eig(&op).unwrap();
        let resid = eig.reconstruct().matrix().max_abs_diff(op.matrix());
        assert!(resid <= 1e-10 * (1.0 + op.max_abs()), "residual {resid:e}");
        assert_orthonormal_columns(&eig.eigenvectors, 1e-10);
        assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eig_two_by_two_complex_offdiagonal() {
        // [[3, 1-i],[1+i, 3]] has eigenvalues 3 -+ sqrt(2)
        let g = HermitianOperator::new(
            ComplexMatrix::from_rows(&[vec![c(3.0, 0.0), c(1.0, -1.0)], vec![c(1.0, 1.0), c(3.0, 0.0)]])
                .unwrap(),
        )
        .unwrap();
        let eig = hermitian_eig(&g).unwrap();
        let s2 = 2f64.sqrt();
        assert!((eig.eigenvalues[0] - (3.0 - s2)).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - (3.0 + s2)).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]])
            .unwrap();
        assert!(matches!(
            HermitianOperator::new(m),
            Err(LinalgError::NotHermitian { .. })
        ));
    }

    #[test]
    fn rejects_non_finite() {
        let err = ComplexMatrix::from_row_major(1, 2, vec![c(1.0, 0.0), c(f64::NAN, 0.0)]).unwrap_err();
        assert_eq!(err, LinalgError::NonFinite { row: 0, col: 1 });
    }

    #[test]
    fn inv_sqrt_identity_and_diagonal() {
        let r = psd_inv_sqrt(&HermitianOperator::identity(3), DEFAULT_SINGULAR_EPS).unwrap();
        assert!(r.matrix().max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);
        let r = psd_inv_sqrt(&HermitianOperator::diag(&[4.0, 1.0]), DEFAULT_SINGULAR_EPS).unwrap();
        assert!(r.matrix().max_abs_diff(&ComplexMatrix::diag(&[0.5, 1.0])) < 1e-15);
    }

    #[test]
    fn inv_sqrt_of_d2_gram_matrix() {
        let g = HermitianOperator::new(
            ComplexMatrix::from_rows(&[vec![c(3.0, 0.0), c(1.0, -1.0)], vec![c(1.0, 1.0), c(3.0, 0.0)]])
                .unwrap(),
        )
        .unwrap();
        let r = psd_inv_sqrt(&g, DEFAULT_SINGULAR_EPS).unwrap();
        let prod = r.matrix().matmul(g.matrix()).matmul(r.matrix());
        assert!(prod.max_abs_diff(&ComplexMatrix::identity(2)) <= 1e-9);
        let s = psd_sqrt(&g, DEFAULT_SINGULAR_EPS).unwrap();
        assert!(s.matrix().matmul(r.matrix()).max_abs_diff(&ComplexMatrix::identity(2)) <= 1e-12);
    }

    #[test]
    fn inv_sqrt_singular() {
        let err = psd_inv_sqrt(&HermitianOperator::diag(&[1.0, 0.0]), DEFAULT_SINGULAR_EPS).unwrap_err();
        assert!(matches!(err, LinalgError::SingularOperator { .. }));
    }

    #[test]
    fn null_space_of_partial_projector() {
        let op = HermitianOperator::diag(&[1.0, 1.0, 0.0]);
        let ns = null_space(&op, 1e-10).unwrap();
        assert_eq!(ns.len(), 1);
        assert!((ns[0][2].norm() - 1.0).abs() < 1e-14);
        assert!(null_space(&HermitianOperator::identity(4), 1e-10).unwrap().is_empty());
    }

    #[test]
    fn homogeneous_no_rows() {
        let x = real_homogeneous_solve(&[], 2).unwrap();
        assert!((x.iter().map(|a| a * a).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_single_row() {
        let x = real_homogeneous_solve(&[vec![1.0, 0.0]], 2).unwrap();
        assert!(x[0].abs() < 1e-15);
        assert!((x[1].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_full_rank_fails() {
        let err = real_homogeneous_solve(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2).unwrap_err();
        assert!(matches!(err, LinalgError::RankTooHigh { .. }));
    }

    #[test]
    fn homogeneous_dependent_rows() {
        let rows = vec![vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0], vec![-1.0, 0.5, 0.0]];
        let x = real_homogeneous_solve(&rows, 3).unwrap();
        assert!(homogeneous_residual(&rows, &x) <= 1e-12);
    }
}
