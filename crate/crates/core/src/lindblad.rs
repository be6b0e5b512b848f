//! Lindblad generator, its spectral decomposition, and exact propagation.
//!
//! Density matrices are vectorized row-major: entry (i, j) of an N×N matrix
//! sits at index `i*N + j`. For a two-level system listed as (excited,
//! ground) this reproduces the ordering [ρ₁₁, ρ₁₀, ρ₀₁, ρ₀₀].

use num_complex::Complex64;
use thiserror::Error;

use crate::numkernel::{general_eig, ComplexMatrix, NumError, DEFAULT_DEGENERACY_TOL};
use crate::system::{DensityMatrix, LevelSystem};

/// Eigenvalues with modulus below this (relative to the spectral scale)
/// count as stationary.
pub const STATIONARY_TOL: f64 = 1e-10;
/// Default threshold on |Tr(ρ₀V^L)| / ‖ρ₀‖ for a mode to be considered present.
pub const DEFAULT_OVERLAP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LindbladError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("{0} stationary modes found; the rate graph is disconnected")]
    MultipleStationaryStates(usize),
    #[error("no stationary mode found")]
    NoStationaryState,
    #[error("mode with eigenvalue {0} does not decay")]
    NonDecayingMode(Complex64),
    #[error("propagation time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("state dimension {got} does not match generator dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial state has no overlap with any decaying mode")]
    NoOverlap,
}

pub fn vec_index(n: usize, i: usize, j: usize) -> usize {
    i * n + j
}

pub fn vectorize(m: &ComplexMatrix) -> Vec<Complex64> {
    m.as_slice().to_vec()
}

pub fn unvectorize(n: usize, v: &[Complex64]) -> ComplexMatrix {
    ComplexMatrix::from_row_major(n, n, v.to_vec())
}

/// Matrix representation of 𝓛 acting on vectorized density matrices.
#[derive(Debug, Clone)]
pub struct Superoperator {
    levels: usize,
    energies: Vec<f64>,
    rates: Vec<Vec<f64>>,
    dephasing: f64,
    matrix: ComplexMatrix,
}

impl Superoperator {
    /// Assembles the generator from raw parts without any validation of the
    /// rate graph. `rates[i][j]` multiplies the jump |i⟩⟨j|.
    pub fn from_parts(energies: &[f64], rates: &[Vec<f64>], dephasing: f64) -> Self {
        let n = energies.len();
        let d = n * n;
        let mut matrix = ComplexMatrix::zeros(d, d);
        let mut basis = ComplexMatrix::zeros(n, n);
        for k in 0..n {
            for l in 0..n {
                basis[(k, l)] = Complex64::new(1.0, 0.0);
                let image = apply_generator(energies, rates, dephasing, &basis);
                basis[(k, l)] = Complex64::new(0.0, 0.0);
                let col = vec_index(n, k, l);
                for (row, &z) in image.as_slice().iter().enumerate() {
                    matrix[(row, col)] = z;
                }
            }
        }
        Self {
            levels: n,
            energies: energies.to_vec(),
            rates: rates.to_vec(),
            dephasing,
            matrix,
        }
    }

    pub fn level_count(&self) -> usize {
        self.levels
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// 𝓛[ρ] evaluated directly on the matrix.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        apply_generator(&self.energies, &self.rates, self.dephasing, rho)
    }
}

/// −i[H, ρ] + Σ Γ_ij (L ρ L† − ½{L†L, ρ}) − (Δ/4)[σ_z, [σ_z, ρ]] with
/// H = diag(ε) and L = |i⟩⟨j|.
fn apply_generator(energies: &[f64], rates: &[Vec<f64>], dephasing: f64, rho: &ComplexMatrix) -> ComplexMatrix {
    let n = energies.len();
    let mut out = ComplexMatrix::zeros(n, n);
    let minus_i = Complex64::new(0.0, -1.0);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = minus_i * (energies[i] - energies[j]) * rho[(i, j)];
        }
    }
    for a in 0..n {
        for b in 0..n {
            let g = rates[a][b];
            if a == b || g == 0.0 {
                continue;
            }
            out[(a, a)] += g * rho[(b, b)];
            for k in 0..n {
                out[(b, k)] -= 0.5 * g * rho[(b, k)];
                out[(k, b)] -= 0.5 * g * rho[(k, b)];
            }
        }
    }
    if dephasing != 0.0 {
        // [σ_z, [σ_z, ρ]] = 4 ρ_ij off the diagonal
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    out[(i, j)] -= dephasing * rho[(i, j)];
                }
            }
        }
    }
    out
}

pub fn build_superoperator(sys: &LevelSystem) -> Superoperator {
    Superoperator::from_parts(sys.energies(), sys.rate_matrix(), sys.dephasing())
}

/// Eigenvalues and biorthonormal eigenmatrices of 𝓛.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    levels: usize,
    eigenvalues: Vec<Complex64>,
    right: Vec<ComplexMatrix>,
    /// Left eigenvectors as rows over the vectorized index.
    left: Vec<Vec<Complex64>>,
    stationary_index: usize,
    condition: f64,
}

impl SpectralDecomposition {
    pub fn level_count(&self) -> usize {
        self.levels
    }

    /// Sorted by descending real part.
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn stationary_index(&self) -> usize {
        self.stationary_index
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn right_eigenmatrix(&self, k: usize) -> &ComplexMatrix {
        &self.right[k]
    }

    /// V^L_k, normalized so Tr(V^L_k V^R_m) = δ_km.
    pub fn left_eigenmatrix(&self, k: usize) -> ComplexMatrix {
        unvectorize(self.levels, &self.left[k]).transpose()
    }

    /// Unit-trace stationary state.
    pub fn stationary_state(&self) -> &ComplexMatrix {
        &self.right[self.stationary_index]
    }

    /// Tr(ρ V^L_k).
    pub fn overlap(&self, rho: &ComplexMatrix, k: usize) -> Complex64 {
        rho.as_slice()
            .iter()
            .zip(&self.left[k])
            .map(|(a, b)| a * b)
            .sum()
    }

    fn check_dim(&self, rho: &DensityMatrix) -> Result<(), LindbladError> {
        if rho.dim() != self.levels {
            return Err(LindbladError::DimensionMismatch {
                expected: self.levels,
                got: rho.dim(),
            });
        }
        Ok(())
    }

    /// Precomputes mode amplitudes for repeated evaluation along one
    /// trajectory.
    pub fn trajectory(&self, rho0: &DensityMatrix) -> Result<Trajectory<'_>, LindbladError> {
        self.check_dim(rho0)?;
        let amplitudes = (0..self.eigenvalues.len())
            .map(|k| {
                let a = self.overlap(rho0.matrix(), k);
                // below its own rounding bound an overlap is indistinguishable from 0
                let bound: f64 = rho0
                    .matrix()
                    .as_slice()
                    .iter()
                    .zip(&self.left[k])
                    .map(|(x, y)| x.norm() * y.norm())
                    .sum();
                if k != self.stationary_index && a.norm() <= 8.0 * f64::EPSILON * bound {
                    Complex64::new(0.0, 0.0)
                } else {
                    a
                }
            })
            .collect();
        Ok(Trajectory {
            dec: self,
            amplitudes,
        })
    }
}

pub fn decompose(sop: &Superoperator) -> Result<SpectralDecomposition, LindbladError> {
    let n = sop.level_count();
    let eig = general_eig(sop.matrix(), DEFAULT_DEGENERACY_TOL)?;
    let scale = eig.eigenvalues.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let zero_tol = STATIONARY_TOL * scale;

    let stationary: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k].norm() <= zero_tol)
        .collect();
    let stationary_index = match stationary.as_slice() {
        [] => return Err(LindbladError::NoStationaryState),
        [k] => *k,
        many => return Err(LindbladError::MultipleStationaryStates(many.len())),
    };
    if let Some(bad) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .find(|&(k, z)| k != stationary_index && z.re >= -zero_tol)
    {
        return Err(LindbladError::NonDecayingMode(*bad.1));
    }

    let d = n * n;
    let mut right: Vec<ComplexMatrix> = (0..d)
        .map(|k| unvectorize(n, &eig.right.column(k)))
        .collect();
    let mut left: Vec<Vec<Complex64>> = (0..d).map(|k| eig.left.row(k).to_vec()).collect();

    let tr = right[stationary_index].trace();
    right[stationary_index] = right[stationary_index].scale(tr.inv());
    for z in &mut left[stationary_index] {
        *z *= tr;
    }

    let mut eigenvalues = eig.eigenvalues;
    eigenvalues[stationary_index] = Complex64::new(0.0, 0.0);

    Ok(SpectralDecomposition {
        levels: n,
        eigenvalues,
        right,
        left,
        stationary_index,
        condition: eig.condition,
    })
}

/// A state's expansion in the eigenmodes of 𝓛.
#[derive(Debug, Clone)]
pub struct Trajectory<'a> {
    dec: &'a SpectralDecomposition,
    amplitudes: Vec<Complex64>,
}

impl Trajectory<'_> {
    /// Tr(ρ₀ V^L_k) for every mode.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// ρ(t) − ρ_Eq, summed over the decaying modes only so that it stays
    /// accurate when it is many orders of magnitude below ρ_Eq.
    pub fn deviation(&self, t: f64) -> Result<ComplexMatrix, LindbladError> {
        if !(t >= 0.0) {
            return Err(LindbladError::NegativeTime(t));
        }
        let n = self.dec.levels;
        let mut acc = ComplexMatrix::zeros(n, n);
        for (k, (&lam, &amp)) in self.dec.eigenvalues.iter().zip(&self.amplitudes).enumerate() {
            if k == self.dec.stationary_index {
                continue;
            }
            let w = amp * (lam * t).exp();
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            acc.add_scaled(w, &self.dec.right[k]);
        }
        Ok(acc.hermitian_part())
    }

    pub fn state(&self, t: f64) -> Result<DensityMatrix, LindbladError> {
        let dev = self.deviation(t)?;
        let rho = &self.dec.stationary_state().hermitian_part() + &dev;
        Ok(DensityMatrix::from_matrix_unchecked(rho))
    }
}

/// ρ(t) = V^R_stat + Σ_{n≠stat} Tr(ρ₀V^L_n) V^R_n e^{λ_n t}.
pub fn propagate(dec: &SpectralDecomposition, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix, LindbladError> {
    dec.trajectory(rho0)?.state(t)
}

/// ρ(t) − ρ_Eq without forming ρ(t).
pub fn propagate_deviation(
    dec: &SpectralDecomposition,
    rho0: &DensityMatrix,
    t: f64,
) -> Result<ComplexMatrix, LindbladError> {
    dec.trajectory(rho0)?.deviation(t)
}

/// The slowest decaying mode that the initial state actually excites.
/// Modes sharing its real part (conjugate pairs) are grouped together.
#[derive(Debug, Clone)]
pub struct SlowMode {
    /// Representative eigenvalue (nonnegative imaginary part when paired).
    pub eigenvalue: Complex64,
    /// Indices of every mode in the group.
    pub modes: Vec<usize>,
    /// Σ Tr(ρ₀V^L)V^R over the group.
    pub prefactor: ComplexMatrix,
    amplitudes: Vec<Complex64>,
    eigenvalues: Vec<Complex64>,
    right: Vec<ComplexMatrix>,
}

impl SlowMode {
    /// Decay rate −Re(λ).
    pub fn rate(&self) -> f64 {
        -self.eigenvalue.re
    }

    /// Contribution of this mode group to ρ(t) − ρ_Eq.
    pub fn contribution(&self, t: f64) -> ComplexMatrix {
        let n = self.prefactor.rows();
        let mut acc = ComplexMatrix::zeros(n, n);
        for ((&a, &lam), v) in self.amplitudes.iter().zip(&self.eigenvalues).zip(&self.right) {
            acc.add_scaled(a * (lam * t).exp(), v);
        }
        acc.hermitian_part()
    }
}

pub fn slowest_relevant_mode(
    dec: &SpectralDecomposition,
    rho0: &DensityMatrix,
    overlap_tol: f64,
) -> Result<SlowMode, LindbladError> {
    let traj = dec.trajectory(rho0)?;
    let threshold = overlap_tol * rho0.matrix().frobenius_norm().max(f64::MIN_POSITIVE);
    let relevant = |k: usize| k != dec.stationary_index && traj.amplitudes[k].norm() > threshold;
    let first = (0..dec.eigenvalues.len())
        .find(|&k| relevant(k))
        .ok_or(LindbladError::NoOverlap)?;
    let re = dec.eigenvalues[first].re;
    let scale = dec.eigenvalues.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let modes: Vec<usize> = (0..dec.eigenvalues.len())
        .filter(|&k| relevant(k) && (dec.eigenvalues[k].re - re).abs() <= DEFAULT_DEGENERACY_TOL * scale)
        .collect();

    let n = dec.levels;
    let mut prefactor = ComplexMatrix::zeros(n, n);
    for &k in &modes {
        prefactor.add_scaled(traj.amplitudes[k], &dec.right[k]);
    }
    let eigenvalue = modes
        .iter()
        .map(|&k| dec.eigenvalues[k])
        .find(|z| z.im >= 0.0)
        .unwrap_or(dec.eigenvalues[first]);
    Ok(SlowMode {
        eigenvalue,
        prefactor: prefactor.hermitian_part(),
        amplitudes: modes.iter().map(|&k| traj.amplitudes[k]).collect(),
        eigenvalues: modes.iter().map(|&k| dec.eigenvalues[k]).collect(),
        right: modes.iter().map(|&k| dec.right[k].clone()).collect(),
        modes,
    })
}
