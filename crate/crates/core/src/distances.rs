//! Distances from equilibrium: KL divergence, trace distance, reversed and
//! symmetrized KL, plus the coherence split of the KL divergence.
//!
//! Near equilibrium every divergence is quadratic in the deviation
//! δ = ρ − ρ_Eq, so at late times the textbook formula
//! Tr ρ log ρ − Tr ρ log ρ_Eq loses all significant digits. When ρ_Eq is
//! diagonal (always the case for thermal references) the divergences are
//! instead evaluated directly from δ: populations via
//! q·h(δ/q) with h(u) = (1+u)ln(1+u) − u, coherences via their exact
//! second-order form when they are small and via eigenvalues otherwise.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::{
    hermitian_eig, matrix_log_psd, trace_norm_hermitian, ComplexMatrix, NumError, DEFAULT_ZERO_CLAMP,
};
use crate::system::{thermal_state, DensityMatrix, LevelSystem};

/// Coherences below this fraction of the smallest population are handled
/// perturbatively; the neglected terms are third order in the ratio.
const SMALL_COHERENCE_RATIO: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistanceError {
    #[error("dimension mismatch: state is {0}x{0}, reference is {1}x{1}")]
    DimensionMismatch(usize, usize),
    #[error("reference state is not full rank")]
    SingularReference,
    #[error(transparent)]
    Num(#[from] NumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "kl")]
    Kl,
    #[serde(rename = "trace")]
    Trace,
    #[serde(rename = "revkl")]
    ReversedKl,
    #[serde(rename = "symkl")]
    SymmetrizedKl,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::Kl, Measure::Trace, Measure::ReversedKl, Measure::SymmetrizedKl];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Kl => "kl",
            Measure::Trace => "trace",
            Measure::ReversedKl => "revkl",
            Measure::SymmetrizedKl => "symkl",
        }
    }

    /// Parses a comma-separated list such as `kl,trace`.
    pub fn parse_list(s: &str) -> Result<Vec<Measure>, String> {
        s.split(',').filter(|p| !p.trim().is_empty()).map(|p| p.trim().parse()).collect()
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kl" => Ok(Measure::Kl),
            "trace" => Ok(Measure::Trace),
            "revkl" => Ok(Measure::ReversedKl),
            "symkl" => Ok(Measure::SymmetrizedKl),
            other => Err(format!("unknown measure {other:?} (expected kl, trace, revkl or symkl)")),
        }
    }
}

/// (1+u) ln(1+u) − u, accurate for small |u|.
fn rel_entropy_kernel(u: f64) -> f64 {
    if u.abs() < 0.1 {
        // Σ_{k≥2} (−u)^k / (k(k−1))
        let mut sum: f64 = 0.0;
        let mut pow = u * u;
        let mut k = 2.0;
        loop {
            let term = pow / (k * (k - 1.0));
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            pow *= -u;
            k += 1.0;
        }
        sum
    } else if u <= -1.0 {
        1.0
    } else {
        (1.0 + u) * u.ln_1p() - u
    }
}

/// (ln a − ln b)/(a − b), continuous at a = b.
fn log_divided_difference(a: f64, b: f64) -> f64 {
    let u = (a - b) / b;
    if u == 0.0 {
        return 1.0 / b;
    }
    if u.abs() < 0.1 {
        // ln(1+u)/u = Σ (−u)^k/(k+1)
        let mut sum: f64 = 0.0;
        let mut pow: f64 = 1.0;
        let mut k: f64 = 0.0;
        loop {
            let term = pow / (k + 1.0);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            pow *= -u;
            k += 1.0;
        }
        sum / b
    } else {
        (a.ln() - b.ln()) / (a - b)
    }
}

/// (u − ln(1+u))/u², continuous at u = 0.
fn log_second_kernel(u: f64) -> f64 {
    if u.abs() < 0.1 {
        // Σ_{k≥0} (−u)^k/(k+2)
        let mut sum: f64 = 0.0;
        let mut pow: f64 = 1.0;
        let mut k: f64 = 0.0;
        loop {
            let term = pow / (k + 2.0);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            pow *= -u;
            k += 1.0;
        }
        sum
    } else if u <= -1.0 {
        f64::INFINITY
    } else {
        (u - u.ln_1p()) / (u * u)
    }
}

fn entropy_term(x: f64) -> f64 {
    if x > DEFAULT_ZERO_CLAMP {
        -x * x.ln()
    } else {
        0.0
    }
}

/// von Neumann entropy −Tr ρ log ρ with 0·log 0 = 0.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues().into_iter().map(entropy_term).sum()
}

fn off_diagonal(delta: &ComplexMatrix) -> (Vec<f64>, Vec<(usize, usize, f64)>) {
    let n = delta.rows();
    let diag = (0..n).map(|i| delta[(i, i)].re).collect();
    let mut off = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let z = delta[(i, j)];
                if z != Complex64::new(0.0, 0.0) {
                    off.push((i, j, z.norm_sqr()));
                }
            }
        }
    }
    (diag, off)
}

fn populations_plus_coherences(p: &[f64], delta: &ComplexMatrix) -> ComplexMatrix {
    let mut rho = delta.hermitian_part();
    for (i, &pi) in p.iter().enumerate() {
        rho[(i, i)] = Complex64::new(pi, 0.0);
    }
    rho
}

fn is_small_coherence(p: &[f64], off: &[(usize, usize, f64)]) -> bool {
    let pmin = p.iter().cloned().fold(f64::INFINITY, f64::min);
    let cmax = off.iter().map(|&(_, _, s)| s.sqrt()).fold(0.0, f64::max);
    pmin > 0.0 && cmax <= SMALL_COHERENCE_RATIO * pmin
}

/// S[diag ρ] − S[ρ] for ρ = diag(p) + off-diagonal part of `delta`.
fn coherence_entropy(p: &[f64], delta: &ComplexMatrix, off: &[(usize, usize, f64)]) -> Result<f64, NumError> {
    if off.is_empty() {
        return Ok(0.0);
    }
    if is_small_coherence(p, off) {
        // ½ Σ_{i≠j} |C_ij|² (ln p_i − ln p_j)/(p_i − p_j)
        let s: f64 = off
            .iter()
            .map(|&(i, j, c2)| c2 * log_divided_difference(p[i], p[j]))
            .sum();
        return Ok(0.5 * s);
    }
    let rho = populations_plus_coherences(p, delta);
    let eig = hermitian_eig(&rho, f64::INFINITY)?;
    let s_rho: f64 = eig.eigenvalues.iter().map(|&x| entropy_term(x)).sum();
    let s_diag: f64 = p.iter().map(|&x| entropy_term(x)).sum();
    Ok((s_diag - s_rho).max(0.0))
}

/// Σ_i q_i [ln p_i − (ln ρ)_ii]; the coherence contribution to KL(ρ_Eq‖ρ).
fn reversed_coherence(q: &[f64], p: &[f64], delta: &ComplexMatrix, off: &[(usize, usize, f64)]) -> Result<f64, NumError> {
    if off.is_empty() {
        return Ok(0.0);
    }
    if is_small_coherence(p, off) {
        // second-order diagonal of ln(P + C): Σ_k |C_ik|² f[p_i, p_i, p_k],
        // with f[a, a, b] = −k((b−a)/a)/a² for f = ln
        let s: f64 = off
            .iter()
            .map(|&(i, k, c2)| q[i] * c2 * log_second_kernel((p[k] - p[i]) / p[i]) / (p[i] * p[i]))
            .sum();
        return Ok(s);
    }
    let rho = populations_plus_coherences(p, delta);
    let eig = hermitian_eig(&rho, f64::INFINITY)?;
    if eig.eigenvalues[0] <= DEFAULT_ZERO_CLAMP {
        return Ok(f64::INFINITY);
    }
    let log_rho = eig.reconstruct_with(|x| Some(x.ln()));
    Ok(q.iter()
        .enumerate()
        .map(|(i, &qi)| qi * (p[i].ln() - log_rho[(i, i)].re))
        .sum())
}

fn check_dims(rho_dim: usize, eq: &DensityMatrix) -> Result<(), DistanceError> {
    if rho_dim != eq.dim() {
        return Err(DistanceError::DimensionMismatch(rho_dim, eq.dim()));
    }
    Ok(())
}

/// Distance of ρ = ρ_Eq + δ from ρ_Eq, computed from δ itself.
///
/// Divergences that are infinite because ρ lost support where ρ_Eq has
/// weight (a population that is zero or rounds below zero) come back as
/// `f64::INFINITY`.
pub fn distance_from_deviation(rho_eq: &DensityMatrix, deviation: &ComplexMatrix, m: Measure) -> Result<f64, DistanceError> {
    deviation_distance(rho_eq, deviation, None, m)
}

/// `populations`, when given, are the exact diagonal of ρ; they replace
/// q + δ, which loses populations far below the corresponding q.
fn deviation_distance(
    rho_eq: &DensityMatrix,
    deviation: &ComplexMatrix,
    populations: Option<Vec<f64>>,
    m: Measure,
) -> Result<f64, DistanceError> {
    check_dims(deviation.rows(), rho_eq)?;
    if m == Measure::Trace {
        return Ok(0.5 * trace_norm_hermitian(&deviation.hermitian_part())?);
    }
    if !rho_eq.matrix().is_diagonal() {
        let rho = rho_eq.matrix() + deviation;
        return generic_divergence(&rho, rho_eq.matrix(), m);
    }
    let q = rho_eq.populations();
    if q.iter().any(|&x| x <= DEFAULT_ZERO_CLAMP) {
        return Err(DistanceError::SingularReference);
    }
    let (d, off) = off_diagonal(deviation);
    let p: Vec<f64> = populations.unwrap_or_else(|| q.iter().zip(&d).map(|(qi, di)| qi + di).collect());

    let forward = || -> Result<f64, DistanceError> {
        let diag: f64 = q.iter().zip(&d).map(|(&qi, &di)| qi * rel_entropy_kernel(di / qi)).sum();
        Ok((diag + coherence_entropy(&p, deviation, &off)?).max(0.0))
    };
    let reversed = || -> Result<f64, DistanceError> {
        if p.iter().any(|&x| x <= 0.0) {
            return Ok(f64::INFINITY);
        }
        let diag: f64 = p.iter().zip(&d).map(|(&pi, &di)| pi * rel_entropy_kernel(-di / pi)).sum();
        Ok((diag + reversed_coherence(&q, &p, deviation, &off)?).max(0.0))
    };
    match m {
        Measure::Kl => forward(),
        Measure::ReversedKl => reversed(),
        Measure::SymmetrizedKl => Ok(0.5 * (forward()? + reversed()?)),
        Measure::Trace => unreachable!(),
    }
}

/// Eigenvalue-based divergences for a non-diagonal reference.
fn generic_divergence(rho: &ComplexMatrix, sigma: &ComplexMatrix, m: Measure) -> Result<f64, DistanceError> {
    let kl = |a: &ComplexMatrix, b: &ComplexMatrix| -> Result<f64, DistanceError> {
        let eb = hermitian_eig(b, f64::INFINITY)?;
        if eb.eigenvalues[0] <= DEFAULT_ZERO_CLAMP {
            let ea = hermitian_eig(a, f64::INFINITY)?;
            // support of a must lie inside support of b
            let leak = eb
                .eigenvalues
                .iter()
                .enumerate()
                .filter(|(_, &l)| l <= DEFAULT_ZERO_CLAMP)
                .map(|(k, _)| {
                    let v = eb.eigenvectors.column(k);
                    let av = a.matmul(&ComplexMatrix::from_row_major(v.len(), 1, v.clone()));
                    v.iter().zip(av.as_slice()).map(|(x, y)| x.conj() * y).sum::<Complex64>().re
                })
                .fold(0.0, f64::max);
            if leak > DEFAULT_ZERO_CLAMP {
                return Ok(f64::INFINITY);
            }
            drop(ea);
        }
        let neg_s: f64 = -hermitian_eig(a, f64::INFINITY)?
            .eigenvalues
            .iter()
            .map(|&x| entropy_term(x))
            .sum::<f64>();
        let log_b = matrix_log_psd(b, DEFAULT_ZERO_CLAMP)?;
        let cross = (a * &log_b).trace().re;
        Ok((neg_s - cross).max(0.0))
    };
    match m {
        Measure::Kl => kl(rho, sigma),
        Measure::ReversedKl => kl(sigma, rho),
        Measure::SymmetrizedKl => Ok(0.5 * (kl(rho, sigma)? + kl(sigma, rho)?)),
        Measure::Trace => Ok(0.5 * trace_norm_hermitian(&(rho - sigma).hermitian_part())?),
    }
}

/// D(ρ ‖ ρ_Eq) under measure `m`.
pub fn distance(rho: &DensityMatrix, rho_eq: &DensityMatrix, m: Measure) -> Result<f64, DistanceError> {
    check_dims(rho.dim(), rho_eq)?;
    deviation_distance(rho_eq, &(rho.matrix() - rho_eq.matrix()), Some(rho.populations()), m)
}

/// Splits KL(ρ̂ ‖ ρ_Eq) into the relative entropy of coherence
/// S[ρ_diag] − S[ρ̂] and the population part KL(ρ_diag ‖ ρ_Eq). ρ_diag keeps
/// only the diagonal of ρ̂ in the energy basis.
pub fn kl_coherence_split(rho_hat: &DensityMatrix, rho_eq: &DensityMatrix) -> Result<(f64, f64), DistanceError> {
    check_dims(rho_hat.dim(), rho_eq)?;
    if !rho_eq.matrix().is_diagonal() {
        return Err(DistanceError::Num(NumError::NotHermitian(f64::NAN)));
    }
    let q = rho_eq.populations();
    if q.iter().any(|&x| x <= DEFAULT_ZERO_CLAMP) {
        return Err(DistanceError::SingularReference);
    }
    let delta = rho_hat.matrix() - rho_eq.matrix();
    let (d, off) = off_diagonal(&delta);
    let p: Vec<f64> = q.iter().zip(&d).map(|(qi, di)| qi + di).collect();
    let diagonal_part = q
        .iter()
        .zip(&d)
        .map(|(&qi, &di)| qi * rel_entropy_kernel(di / qi))
        .sum::<f64>()
        .max(0.0);
    let coherence_part = coherence_entropy(&p, &delta, &off)?;
    Ok((coherence_part, diagonal_part))
}

/// D(ρ_th(β₀) ‖ ρ_Eq) over a grid of initial inverse temperatures.
pub fn initial_distance_curve(sys: &LevelSystem, m: Measure, beta0_grid: &[f64]) -> Result<Vec<(f64, f64)>, DistanceError> {
    let eq = thermal_state(sys, sys.beta());
    beta0_grid
        .iter()
        .map(|&b0| Ok((b0, distance(&thermal_state(sys, b0), &eq, m)?)))
        .collect()
}
