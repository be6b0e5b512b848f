//! Level systems, detailed-balanced jump rates and initial states.
//!
//! Units: ħ = k_B = 1. Energies are angular frequencies, `beta` is an inverse
//! temperature in the same units, and rates carry units of inverse time. The
//! canonical time unit is 1/Γ₀₁.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::{hermitian_eig, ComplexMatrix};

pub const MAX_LEVELS: usize = 9;

/// Tolerance for Hermiticity, unit trace and positivity of density matrices.
pub const DENSITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("level count {0} outside 2..={MAX_LEVELS}")]
    LevelCount(usize),
    #[error("energy of level {0} is not finite")]
    NonFiniteEnergy(usize),
    #[error("inverse temperature must be finite and nonnegative, got {0}")]
    InvalidBeta(f64),
    #[error("rate key {0}-{1} must satisfy i < j < level count")]
    BadRateKey(usize, usize),
    #[error("malformed rate key {0:?}; expected \"i-j\"")]
    MalformedRateKey(String),
    #[error("rate {0}-{1} given twice")]
    DuplicateRate(usize, usize),
    #[error("rate {i}-{j} must be finite and nonnegative, got {rate}")]
    InvalidRate { i: usize, j: usize, rate: f64 },
    #[error("dephasing must be finite and nonnegative, got {0}")]
    InvalidDephasing(f64),
    #[error("dephasing is only defined for two-level systems (got {0} levels)")]
    DephasingNeedsTwoLevels(usize),
    #[error("rate graph is disconnected: level {0} cannot reach level 0")]
    Disconnected(usize),
    #[error("operation requires a two-level system, got {0} levels")]
    NotTwoLevel(usize),
    #[error("coherence r = {r} exceeds the Bloch bound {r_max}")]
    CoherenceBoundViolated { r: f64, r_max: f64 },
    #[error("invalid coherent state parameter: {0}")]
    InvalidCoherentSpec(String),
    #[error("transition frequency must be nonzero")]
    ZeroFrequency,
    #[error("dipole amplitude must be positive, got {0}")]
    InvalidAmplitude(f64),
    #[error("not a density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("invalid system description: {0}")]
    Json(String),
}

/// A few-level system coupled to a thermal bath.
///
/// Only transitions `j → i` with `i < j` are supplied; the reverse rates
/// follow from detailed balance, `Γ_ji = Γ_ij e^{−β(ε_j − ε_i)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSystem {
    energies: Vec<f64>,
    beta: f64,
    downward: BTreeMap<(usize, usize), f64>,
    /// `rates[i][j]` multiplies the jump operator |i⟩⟨j|.
    rates: Vec<Vec<f64>>,
    dephasing: f64,
}

impl LevelSystem {
    pub fn new(
        energies: Vec<f64>,
        beta: f64,
        downward: &[((usize, usize), f64)],
        dephasing: f64,
    ) -> Result<Self, SystemError> {
        let n = energies.len();
        if !(2..=MAX_LEVELS).contains(&n) {
            return Err(SystemError::LevelCount(n));
        }
        if let Some(i) = energies.iter().position(|e| !e.is_finite()) {
            return Err(SystemError::NonFiniteEnergy(i));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(SystemError::InvalidBeta(beta));
        }
        if !(dephasing.is_finite() && dephasing >= 0.0) {
            return Err(SystemError::InvalidDephasing(dephasing));
        }
        if dephasing > 0.0 && n != 2 {
            return Err(SystemError::DephasingNeedsTwoLevels(n));
        }

        let mut map = BTreeMap::new();
        for &((i, j), rate) in downward {
            if !(i < j && j < n) {
                return Err(SystemError::BadRateKey(i, j));
            }
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(SystemError::InvalidRate { i, j, rate });
            }
            if map.insert((i, j), rate).is_some() {
                return Err(SystemError::DuplicateRate(i, j));
            }
        }

        let mut rates = vec![vec![0.0; n]; n];
        for (&(i, j), &g) in &map {
            rates[i][j] = g;
            rates[j][i] = g * (-beta * (energies[j] - energies[i])).exp();
        }

        let sys = Self {
            energies,
            beta,
            downward: map,
            rates,
            dephasing,
        };
        sys.check_connected()?;
        Ok(sys)
    }

    /// Two-level system with levels ∓ω₀/2 (ground first) and decay rate Γ₀₁.
    pub fn two_level(omega0: f64, beta: f64, gamma01: f64, dephasing: f64) -> Result<Self, SystemError> {
        Self::new(
            vec![-omega0 / 2.0, omega0 / 2.0],
            beta,
            &[((0, 1), gamma01)],
            dephasing,
        )
    }

    /// Three-level system with rates Γ₀₁, Γ₀₂, Γ₁₂.
    pub fn three_level(
        energies: [f64; 3],
        beta: f64,
        gamma01: f64,
        gamma02: f64,
        gamma12: f64,
    ) -> Result<Self, SystemError> {
        Self::new(
            energies.to_vec(),
            beta,
            &[((0, 1), gamma01), ((0, 2), gamma02), ((1, 2), gamma12)],
            0.0,
        )
    }

    fn check_connected(&self) -> Result<(), SystemError> {
        let n = self.energies.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(a) = stack.pop() {
            for b in 0..n {
                if !seen[b] && (self.rates[a][b] > 0.0 || self.rates[b][a] > 0.0) {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(SystemError::Disconnected(i)),
            None => Ok(()),
        }
    }

    pub fn level_count(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dephasing(&self) -> f64 {
        self.dephasing
    }

    /// Rate of the transition `j → i`, upward or downward.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[i][j]
    }

    /// Full rate table, `rate_matrix()[i][j]` for `j → i`.
    pub fn rate_matrix(&self) -> &[Vec<f64>] {
        &self.rates
    }

    /// User-supplied rates keyed by `(i, j)` with `i < j`.
    pub fn downward_rates(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.downward
    }

    /// Γ₀₁, the rate that defines the time unit.
    pub fn gamma01(&self) -> f64 {
        self.rates[0][1]
    }

    /// Two-level transition frequency ε₁ − ε₀.
    pub fn omega0(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }

    /// Same system with every rate (and the dephasing) multiplied by `c`.
    pub fn with_rates_scaled(&self, c: f64) -> Result<Self, SystemError> {
        let downward: Vec<_> = self.downward.iter().map(|(&k, &g)| (k, g * c)).collect();
        Self::new(self.energies.clone(), self.beta, &downward, self.dephasing * c)
    }

    pub fn with_dephasing(&self, dephasing: f64) -> Result<Self, SystemError> {
        let downward: Vec<_> = self.downward.iter().map(|(&k, &g)| (k, g)).collect();
        Self::new(self.energies.clone(), self.beta, &downward, dephasing)
    }

    pub fn from_json_str(s: &str) -> Result<Self, SystemError> {
        let file: SystemFile = serde_json::from_str(s).map_err(|e| SystemError::Json(e.to_string()))?;
        file.into_system()
    }

    pub fn to_file(&self) -> SystemFile {
        SystemFile {
            levels: self.energies.clone(),
            beta: self.beta,
            rates: self
                .downward
                .iter()
                .map(|(&(i, j), &g)| (format!("{i}-{j}"), g))
                .collect(),
            dephasing: self.dephasing,
        }
    }
}

/// On-disk system description:
/// `{"levels": [...], "beta": x, "rates": {"0-1": g, ...}, "dephasing": d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub levels: Vec<f64>,
    pub beta: f64,
    pub rates: BTreeMap<String, f64>,
    #[serde(default)]
    pub dephasing: f64,
}

impl SystemFile {
    pub fn into_system(self) -> Result<LevelSystem, SystemError> {
        let mut downward = Vec::with_capacity(self.rates.len());
        for (key, rate) in &self.rates {
            let (i, j) = parse_rate_key(key)?;
            downward.push(((i, j), *rate));
        }
        LevelSystem::new(self.levels, self.beta, &downward, self.dephasing)
    }
}

fn parse_rate_key(key: &str) -> Result<(usize, usize), SystemError> {
    let bad = || SystemError::MalformedRateKey(key.to_string());
    let (a, b) = key.split_once('-').ok_or_else(bad)?;
    let i = a.trim().parse().map_err(|_| bad())?;
    let j = b.trim().parse().map_err(|_| bad())?;
    Ok((i, j))
}

/// A validated density matrix: Hermitian, unit trace, PSD (each within
/// [`DENSITY_TOL`]).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self, SystemError> {
        if !matrix.is_square() {
            return Err(SystemError::InvalidDensityMatrix("not square".into()));
        }
        let defect = matrix.hermiticity_defect();
        if defect > DENSITY_TOL {
            return Err(SystemError::InvalidDensityMatrix(format!(
                "Hermiticity defect {defect:.3e}"
            )));
        }
        let tr = matrix.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > DENSITY_TOL {
            return Err(SystemError::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let eig = hermitian_eig(&matrix, DENSITY_TOL)
            .map_err(|e| SystemError::InvalidDensityMatrix(e.to_string()))?;
        let lowest = eig.eigenvalues[0];
        if lowest < -DENSITY_TOL {
            return Err(SystemError::InvalidDensityMatrix(format!(
                "negative eigenvalue {lowest:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix already known to be a valid state (e.g. produced by
    /// a trace-preserving propagation).
    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn diagonal(populations: &[f64]) -> Result<Self, SystemError> {
        Self::new(ComplexMatrix::from_diag(populations))
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

    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diag().iter().map(|z| z.re).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eig(&self.matrix, f64::INFINITY)
            .map(|e| e.eigenvalues)
            .unwrap_or_default()
    }
}

/// Boltzmann weights e^{−βε_i}/Z, evaluated relative to the extreme level so
/// that no exponent overflows. `β = ±∞` selects the lowest/highest levels.
pub fn thermal_populations(energies: &[f64], beta: f64) -> Vec<f64> {
    let n = energies.len();
    if beta == 0.0 {
        return vec![1.0 / n as f64; n];
    }
    if beta.is_infinite() {
        let target = if beta > 0.0 {
            energies.iter().cloned().fold(f64::INFINITY, f64::min)
        } else {
            energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        };
        let hits: Vec<bool> = energies.iter().map(|&e| e == target).collect();
        let count = hits.iter().filter(|&&h| h).count() as f64;
        return hits.iter().map(|&h| if h { 1.0 / count } else { 0.0 }).collect();
    }
    let shift = if beta > 0.0 {
        energies.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    };
    let w: Vec<f64> = energies.iter().map(|&e| (-beta * (e - shift)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Gibbs state e^{−β' H}/Z of the system's Hamiltonian at an arbitrary
/// inverse temperature β'.
pub fn thermal_state(sys: &LevelSystem, beta_any: f64) -> DensityMatrix {
    DensityMatrix::from_matrix_unchecked(ComplexMatrix::from_diag(&thermal_populations(
        sys.energies(),
        beta_any,
    )))
}

/// Two-level initial state: thermal populations at β₀ plus a coherence of
/// modulus `r` and phase `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentInitialSpec {
    pub beta0: f64,
    pub r: f64,
    pub phi: f64,
}

impl CoherentInitialSpec {
    pub fn thermal(beta0: f64) -> Self {
        Self { beta0, r: 0.0, phi: 0.0 }
    }
}

/// Largest coherence compatible with positivity: 1/(2 cosh(β₀ω₀/2)).
pub fn coherence_bound(beta0: f64, omega0: f64) -> f64 {
    let x = (beta0 * omega0 / 2.0).abs();
    if x.is_infinite() {
        0.0
    } else {
        // e^{-x}/(1+e^{-2x}) avoids overflow
        (-x).exp() / (1.0 + (-2.0 * x).exp())
    }
}

pub fn coherent_state(sys: &LevelSystem, spec: CoherentInitialSpec) -> Result<DensityMatrix, SystemError> {
    if sys.level_count() != 2 {
        return Err(SystemError::NotTwoLevel(sys.level_count()));
    }
    if spec.beta0.is_nan() {
        return Err(SystemError::InvalidCoherentSpec("beta0 is NaN".into()));
    }
    if !(spec.r.is_finite() && spec.r >= 0.0) {
        return Err(SystemError::InvalidCoherentSpec(format!("r = {}", spec.r)));
    }
    if !(spec.phi.is_finite() && (0.0..=TAU).contains(&spec.phi)) {
        return Err(SystemError::InvalidCoherentSpec(format!(
            "phi = {} outside [0, 2π]",
            spec.phi
        )));
    }
    let r_max = coherence_bound(spec.beta0, sys.omega0());
    if spec.r > r_max * (1.0 + 1e-12) {
        return Err(SystemError::CoherenceBoundViolated { r: spec.r, r_max });
    }
    let r = spec.r.min(r_max);
    let mut m = ComplexMatrix::from_diag(&thermal_populations(sys.energies(), spec.beta0));
    // level 1 is the excited state |u+⟩; ⟨u+|ρ|u−⟩ = r e^{iφ}
    let z = Complex64::from_polar(r, spec.phi);
    m[(1, 0)] = z;
    m[(0, 1)] = z.conj();
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Dipole-coupling rates (Γ₀₁, Γ₁₀) for a transition of frequency ω₀.
pub fn dipole_rates(amplitude: f64, omega0: f64, beta: f64) -> Result<(f64, f64), SystemError> {
    if omega0 == 0.0 || !omega0.is_finite() {
        return Err(SystemError::ZeroFrequency);
    }
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(SystemError::InvalidAmplitude(amplitude));
    }
    if !(beta > 0.0) {
        return Err(SystemError::InvalidBeta(beta));
    }
    let w = omega0.abs();
    let base = amplitude * w.powi(3);
    let x = beta * w;
    if x.is_infinite() {
        return Ok((base, 0.0));
    }
    let up = base / x.exp_m1();
    Ok((base + up, up))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn thermal_examples() {
        let sys = LevelSystem::two_level(1.0, 1.0, 1.0, 0.0).unwrap();
        let p = thermal_state(&sys, 0.0).populations();
        assert_eq!(p, vec![0.5, 0.5]);
        let p = thermal_state(&sys, 1.0).populations();
        // ground first; the excited population is 1/(1+e)
        assert!((p[0] - E / (1.0 + E)).abs() < 1e-15);
        assert!((p[1] - 1.0 / (1.0 + E)).abs() < 1e-15);

        let three = LevelSystem::three_level([0.0, 1.0, 2.0], 1.0, 1.0, 1.0, 1.0).unwrap();
        let p = thermal_state(&three, 1.0).populations();
        let z = 1.0 + (-1.0f64).exp() + (-2.0f64).exp();
        for (k, pk) in p.iter().enumerate() {
            assert!((pk - (-(k as f64)).exp() / z).abs() < 1e-15);
        }
    }

    #[test]
    fn thermal_extremes_do_not_overflow() {
        let e = [0.0, 1.0, 2.0];
        assert_eq!(thermal_populations(&e, f64::INFINITY), vec![1.0, 0.0, 0.0]);
        assert_eq!(thermal_populations(&e, f64::NEG_INFINITY), vec![0.0, 0.0, 1.0]);
        let p = thermal_populations(&e, 1e4);
        assert_eq!(p[0], 1.0);
        let p = thermal_populations(&e, -1e4);
        assert_eq!(p[2], 1.0);
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn detailed_balance_by_construction() {
        let sys = LevelSystem::three_level([0.0, 0.7, 2.3], 1.3, 0.4, 2.0, 0.9).unwrap();
        let e = sys.energies();
        for i in 0..3 {
            for j in 0..3 {
                let lhs = sys.rate(i, j) * (-sys.beta() * e[j]).exp();
                let rhs = sys.rate(j, i) * (-sys.beta() * e[i]).exp();
                assert!((lhs - rhs).abs() <= 1e-15 * lhs.abs().max(1.0));
            }
            assert_eq!(sys.rate(i, i), 0.0);
        }
    }

    #[test]
    fn connectivity() {
        assert!(LevelSystem::three_level([0.0, 1.0, 2.0], 1.0, 1.0, 0.0, 1.0).is_ok());
        assert!(LevelSystem::three_level([0.0, 1.0, 2.0], 1.0, 1.0, 2.0, 0.0).is_ok());
        assert_eq!(
            LevelSystem::three_level([0.0, 1.0, 2.0], 1.0, 1.0, 0.0, 0.0),
            Err(SystemError::Disconnected(2))
        );
    }

    #[test]
    fn validation_errors() {
        assert_eq!(LevelSystem::new(vec![0.0], 1.0, &[], 0.0), Err(SystemError::LevelCount(1)));
        assert_eq!(
            LevelSystem::new(vec![0.0, 1.0], 1.0, &[((1, 0), 1.0)], 0.0),
            Err(SystemError::BadRateKey(1, 0))
        );
        assert!(matches!(
            LevelSystem::new(vec![0.0, 1.0], 1.0, &[((0, 1), -1.0)], 0.0),
            Err(SystemError::InvalidRate { .. })
        ));
        assert_eq!(
            LevelSystem::three_level([0.0, 1.0, 2.0], 1.0, 1.0, 1.0, 1.0)
                .unwrap()
                .with_dephasing(0.5),
            Err(SystemError::DephasingNeedsTwoLevels(3))
        );
        assert!(matches!(
            LevelSystem::new(vec![0.0, 1.0], f64::NAN, &[((0, 1), 1.0)], 0.0),
            Err(SystemError::InvalidBeta(_))
        ));
    }

    #[test]
    fn json_round_trip_and_key_errors() {
        let json = r#"{"levels": [0, 1, 2], "beta": 1.0, "rates": {"0-1": 1, "0-2": 1.1, "1-2": 1.5}}"#;
        let sys = LevelSystem::from_json_str(json).unwrap();
        assert_eq!(sys.rate(0, 2), 1.1);
        assert_eq!(sys.dephasing(), 0.0);
        let back = serde_json::to_string(&sys.to_file()).unwrap();
        assert_eq!(LevelSystem::from_json_str(&back).unwrap(), sys);

        let bad = r#"{"levels": [0, 1], "beta": 1.0, "rates": {"1-0": 1}}"#;
        assert_eq!(LevelSystem::from_json_str(bad), Err(SystemError::BadRateKey(1, 0)));
        let bad = r#"{"levels": [0, 1], "beta": 1.0, "rates": {"01": 1}}"#;
        assert!(matches!(LevelSystem::from_json_str(bad), Err(SystemError::MalformedRateKey(_))));
    }

    #[test]
    fn coherent_state_examples() {
        let sys = LevelSystem::two_level(1.0, 1.0, 1.0, 0.0).unwrap();
        let plain = coherent_state(&sys, CoherentInitialSpec::thermal(2.0)).unwrap();
        assert_eq!(plain, thermal_state(&sys, 2.0));

        let rmax = coherence_bound(0.7, 1.0);
        let pure = coherent_state(&sys, CoherentInitialSpec { beta0: 0.7, r: rmax, phi: 1.0 }).unwrap();
        let ev = pure.eigenvalues();
        assert!(ev[0].abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);

        let err = coherent_state(&sys, CoherentInitialSpec { beta0: 0.7, r: rmax * 1.01, phi: 0.0 });
        assert!(matches!(err, Err(SystemError::CoherenceBoundViolated { .. })));

        let s = coherent_state(&sys, CoherentInitialSpec { beta0: 1.0, r: 0.21, phi: 0.5 }).unwrap();
        assert!((s.matrix()[(1, 0)] - Complex64::from_polar(0.21, 0.5)).norm() < 1e-16);
        assert!(DensityMatrix::new(s.matrix().clone()).is_ok());

        let three = LevelSystem::three_level([0.0, 1.0, 2.0], 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(
            coherent_state(&three, CoherentInitialSpec::thermal(1.0)),
            Err(SystemError::NotTwoLevel(3))
        );
    }

    #[test]
    fn dipole_rate_examples() {
        let (down, up) = dipole_rates(1.0, 1.0, 1.0).unwrap();
        assert!((down - E / (E - 1.0)).abs() < 1e-14);
        assert!((down - 1.5819767068693265).abs() < 1e-14);
        assert!((up / down - (-1.0f64).exp()).abs() < 1e-15);
        let (down, up) = dipole_rates(2.0, -1.5, 0.3).unwrap();
        assert!((up / down - (-0.45f64).exp()).abs() < 1e-14);
        let (down, up) = dipole_rates(1.0, 2.0, f64::INFINITY).unwrap();
        assert_eq!((down, up), (8.0, 0.0));
        assert_eq!(dipole_rates(1.0, 0.0, 1.0), Err(SystemError::ZeroFrequency));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::diagonal(&[0.5, 0.5]).is_ok());
        assert!(DensityMatrix::diagonal(&[0.6, 0.5]).is_err());
        assert!(DensityMatrix::diagonal(&[1.1, -0.1]).is_err());
    }
}
