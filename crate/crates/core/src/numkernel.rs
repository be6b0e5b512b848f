//! Dense complex linear algebra used by the rest of the crate.
//!
//! Matrices here are small (at most 81×81 for a nine-level superoperator), so
//! everything is dense and row-major. Eigensolves are delegated to `faer`;
//! this module owns the conventions layered on top: eigenvalue ordering,
//! biorthonormal left eigenvectors, PSD logarithms and trace norms.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex64;
use thiserror::Error;

/// Eigenvalues of a density matrix below this are treated as exact zeros.
pub const DEFAULT_ZERO_CLAMP: f64 = 1e-14;
/// Relative tolerance for deciding that two eigenvalues share a real part.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;
/// Default Hermiticity tolerance used by operations that do not take one.
pub const DEFAULT_HERMITICITY_TOL: f64 = 1e-10;
/// Right-eigenvector condition numbers above this are rejected.
pub const MAX_EIGVEC_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not diagonalizable (eigenvector condition number {0:.3e})")]
    NonDiagonalizable(f64),
    #[error("negative eigenvalue {0:.3e} in a matrix expected to be PSD")]
    NegativeEigenvalue(f64),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("eigensolver failed to converge")]
    NoConvergence,
}

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        assert_eq!(data.len(), rows * cols, "entry count must equal rows*cols");
        Self { rows, cols, data }
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let data = rows
            .iter()
            .flat_map(|row| {
                assert_eq!(row.len(), c, "ragged rows");
                row.iter().map(|&v| Complex64::new(v, 0.0))
            })
            .collect();
        Self::from_row_major(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
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

    /// Row-major entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn diag(&self) -> Vec<Complex64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> Complex64 {
        self.diag().into_iter().sum()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: Complex64, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ‖A − A†‖_max.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// (A + A†)/2.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)] == Complex64::new(0.0, 0.0)))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub(crate) fn to_faer(&self) -> Mat<Complex64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }

    pub(crate) fn from_faer(m: faer::MatRef<'_, Complex64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out.add_scaled(Complex64::new(1.0, 0.0), rhs);
        out
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.clone();
        out.add_scaled(Complex64::new(-1.0, 0.0), rhs);
        out
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
            let row: Vec<String> = self
                .row(i)
                .iter()
                .map(|z| format!("{:+.6e}{:+.6e}i", z.re, z.im))
                .collect();
            writeln!(f, "  {}", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Eigendecomposition of a Hermitian matrix: `A = U diag(λ) U†`.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    /// `U f(Λ) U†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> Option<f64>) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let u = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let Some(w) = f(lam) else { continue };
            for i in 0..n {
                let uik = u[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += uik * u[(j, k)].conj();
                }
            }
        }
        out
    }
}

/// Eigendecomposition of a general square matrix with biorthonormal
/// left/right eigenvectors.
#[derive(Debug, Clone)]
pub struct GeneralEig {
    /// Sorted by descending real part; near-equal real parts by ascending
    /// imaginary part.
    pub eigenvalues: Vec<Complex64>,
    /// Column `n` is the right eigenvector of `eigenvalues[n]`.
    pub right: ComplexMatrix,
    /// Row `m` is the left eigenvector of `eigenvalues[m]`; `left * right = I`.
    pub left: ComplexMatrix,
    /// 2-norm condition number of `right`.
    pub condition: f64,
}

impl GeneralEig {
    /// ‖L·R − I‖_max.
    pub fn biorthonormality_defect(&self) -> f64 {
        let n = self.eigenvalues.len();
        (&self.left * &self.right).max_abs_diff(&ComplexMatrix::identity(n))
    }
}

fn require_square(a: &ComplexMatrix) -> Result<usize, NumError> {
    if a.is_square() {
        Ok(a.rows())
    } else {
        Err(NumError::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        })
    }
}

pub fn hermitian_eig(a: &ComplexMatrix, hermiticity_tol: f64) -> Result<HermitianEig, NumError> {
    let n = require_square(a)?;
    let defect = a.hermiticity_defect();
    if !(defect <= hermiticity_tol) {
        return Err(NumError::NotHermitian(defect));
    }
    let sym = a.hermitian_part().to_faer();
    let eig = sym
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| NumError::NoConvergence)?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[i].re.total_cmp(&s[j].re));
    let eigenvalues = order.iter().map(|&k| s[k].re).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Orders eigenvalues by descending real part. Real parts that agree within
/// `tol` (relative to the spectral scale) form a cluster, ordered by
/// ascending imaginary part.
fn spectral_order(values: &[Complex64], tol: f64) -> Vec<usize> {
    let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[j]
            .re
            .total_cmp(&values[i].re)
            .then(values[i].im.total_cmp(&values[j].im))
    });
    let mut out = Vec::with_capacity(order.len());
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len()
            && (values[order[end - 1]].re - values[order[end]].re).abs() <= tol * scale
        {
            end += 1;
        }
        let mut cluster = order[start..end].to_vec();
        cluster.sort_by(|&i, &j| {
            values[i]
                .im
                .total_cmp(&values[j].im)
                .then(values[j].re.total_cmp(&values[i].re))
        });
        out.extend(cluster);
        start = end;
    }
    out
}

pub fn general_eig(a: &ComplexMatrix, degeneracy_tol: f64) -> Result<GeneralEig, NumError> {
    let n = require_square(a)?;
    let eig = a.to_faer().eigen().map_err(|_| NumError::NoConvergence)?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let raw: Vec<Complex64> = (0..n).map(|k| s[k]).collect();
    let order = spectral_order(&raw, degeneracy_tol);

    let eigenvalues: Vec<Complex64> = order.iter().map(|&k| raw[k]).collect();
    let mut right = ComplexMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    for j in 0..n {
        let norm = right.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            for i in 0..n {
                right[(i, j)] /= norm;
            }
        }
    }

    let rf = right.to_faer();
    let sv = rf.singular_values().map_err(|_| NumError::NoConvergence)?;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_EIGVEC_CONDITION) {
        return Err(NumError::NonDiagonalizable(condition));
    }
    let left = ComplexMatrix::from_faer(rf.partial_piv_lu().inverse().as_ref());
    Ok(GeneralEig {
        eigenvalues,
        right,
        left,
        condition,
    })
}

/// `U log(Λ) U†` over the eigenvalues above `zero_clamp`.
pub fn matrix_log_psd(a: &ComplexMatrix, zero_clamp: f64) -> Result<ComplexMatrix, NumError> {
    let eig = hermitian_eig(a, DEFAULT_HERMITICITY_TOL * a.max_abs().max(1.0))?;
    if let Some(&lowest) = eig.eigenvalues.first() {
        if lowest < -zero_clamp {
            return Err(NumError::NegativeEigenvalue(lowest));
        }
    }
    Ok(eig.reconstruct_with(|lam| (lam > zero_clamp).then(|| lam.ln())))
}

/// Σ|λᵢ| for Hermitian `a`.
pub fn trace_norm_hermitian(a: &ComplexMatrix) -> Result<f64, NumError> {
    let eig = hermitian_eig(a, DEFAULT_HERMITICITY_TOL * a.max_abs().max(1.0))?;
    Ok(eig.eigenvalues.iter().map(|l| l.abs()).sum())
}
