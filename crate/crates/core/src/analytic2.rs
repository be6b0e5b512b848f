//! Closed-form results for the driven-free two-level system: exact ρ(t),
//! exact and asymptotic distances, the γ prefactor, the critical dephasing
//! and the existence limits of thermal equidistant pairs.
//!
//! Level 0 is the ground state at −ω₀/2, level 1 the excited state at +ω₀/2.
//! Populations relax at λ_p = Γ₀₁(1+e^{−βω₀}); the coherence ρ₁₀ decays at
//! λ_p/2 + Δ and rotates as e^{−iω₀t}.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distances::{distance_from_deviation, DistanceError, Measure};
use crate::numkernel::ComplexMatrix;
use crate::system::{
    coherence_bound, thermal_populations, CoherentInitialSpec, DensityMatrix, LevelSystem, SystemError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("γ is 0/0 at β₀ = β")]
    DegeneratePoint,
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelParams {
    pub omega0: f64,
    pub beta: f64,
    pub beta0: f64,
    pub r: f64,
    pub phi: f64,
    pub gamma01: f64,
    pub dephasing: f64,
}

impl Default for TwoLevelParams {
    fn default() -> Self {
        Self { omega0: 1.0, beta: 1.0, beta0: 1.0, r: 0.0, phi: 0.0, gamma01: 1.0, dephasing: 0.0 }
    }
}

impl TwoLevelParams {
    pub fn system(&self) -> Result<LevelSystem, SystemError> {
        LevelSystem::two_level(self.omega0, self.beta, self.gamma01, self.dephasing)
    }

    pub fn initial_spec(&self) -> CoherentInitialSpec {
        CoherentInitialSpec { beta0: self.beta0, r: self.r, phi: self.phi }
    }

    /// Γ₀₁(1+e^{−βω₀}).
    pub fn population_rate(&self) -> f64 {
        self.gamma01 * (1.0 + (-self.beta * self.omega0).exp())
    }

    /// Decay rate of |ρ₁₀|: λ_p/2 + Δ.
    pub fn coherence_rate(&self) -> f64 {
        0.5 * self.population_rate() + self.dephasing
    }

    /// Excited-state population at β₀ minus its equilibrium value.
    fn initial_population_offset(&self) -> f64 {
        excited_population(self.beta0, self.omega0) - excited_population(self.beta, self.omega0)
    }
}

fn excited_population(beta: f64, omega0: f64) -> f64 {
    thermal_populations(&[-omega0 / 2.0, omega0 / 2.0], beta)[1]
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn check_time(t: f64) -> Result<(), AnalyticError> {
    if t < 0.0 || t.is_nan() {
        Err(AnalyticError::NegativeTime(t))
    } else {
        Ok(())
    }
}

/// ρ(t) − ρ_Eq from the exact solution.
pub fn closed_form_deviation(p: &TwoLevelParams, t: f64) -> Result<ComplexMatrix, AnalyticError> {
    check_time(t)?;
    let d = p.initial_population_offset() * (-p.population_rate() * t).exp();
    let c = Complex64::from_polar(p.r * (-p.coherence_rate() * t).exp(), p.phi - p.omega0 * t);
    let mut m = ComplexMatrix::from_diag(&[-d, d]);
    m[(1, 0)] = c;
    m[(0, 1)] = c.conj();
    Ok(m)
}

/// Exact ρ(t) for the coherent initial state described by `p`.
pub fn closed_form_state(p: &TwoLevelParams, t: f64) -> Result<DensityMatrix, AnalyticError> {
    let r_max = coherence_bound(p.beta0, p.omega0);
    if p.r > r_max * (1.0 + 1e-12) {
        return Err(SystemError::CoherenceBoundViolated { r: p.r, r_max }.into());
    }
    let q = thermal_populations(&[-p.omega0 / 2.0, p.omega0 / 2.0], p.beta);
    let mut m = closed_form_deviation(p, t)?;
    m[(0, 0)] += q[0];
    m[(1, 1)] += q[1];
    Ok(DensityMatrix::new(m)?)
}

/// Exact distance of ρ(t) from ρ_Eq under any measure.
pub fn closed_form_distance(p: &TwoLevelParams, t: f64, m: Measure) -> Result<f64, AnalyticError> {
    let q = thermal_populations(&[-p.omega0 / 2.0, p.omega0 / 2.0], p.beta);
    let eq = DensityMatrix::diagonal(&q)?;
    Ok(distance_from_deviation(&eq, &closed_form_deviation(p, t)?, m)?)
}

/// Amplitude of the e^{−2λ_p t} term of the late-time KL divergence.
pub fn population_prefactor(beta0: f64, beta: f64, omega0: f64) -> f64 {
    let q = thermal_populations(&[-omega0 / 2.0, omega0 / 2.0], beta);
    let d = excited_population(beta0, omega0) - q[1];
    0.5 * d * d / (q[0] * q[1])
}

/// Amplitude of the e^{−(λ_p+2Δ)t} term: r² βω₀ coth(βω₀/2).
pub fn coherence_prefactor(r: f64, beta: f64, omega0: f64) -> f64 {
    let x = beta * omega0;
    let c = if x == 0.0 { 2.0 } else { x / (x / 2.0).tanh() };
    r * r * c
}

/// Sum of both asymptotic amplitudes; at Δ = Δ_c the smallest value relaxes fastest.
pub fn combined_prefactor(beta0: f64, r: f64, beta: f64, omega0: f64) -> f64 {
    population_prefactor(beta0, beta, omega0) + coherence_prefactor(r, beta, omega0)
}

/// Two-term late-time approximation of D_KL(ρ(t) ‖ ρ_Eq).
pub fn kl_asymptotic(p: &TwoLevelParams, t: f64) -> f64 {
    let lp = p.population_rate();
    population_prefactor(p.beta0, p.beta, p.omega0) * (-2.0 * lp * t).exp()
        + coherence_prefactor(p.r, p.beta, p.omega0) * (-(lp + 2.0 * p.dephasing) * t).exp()
}

/// D_KL(ρ_th(β₀) ‖ ρ_Eq), written out in terms of e^{β₀ω₀} and e^{βω₀}.
pub fn kl_initial_closed_form(beta0: f64, beta: f64, omega0: f64) -> f64 {
    let x = beta * omega0;
    let x0 = beta0 * omega0;
    // p_g0 = e^{x0}/(e^{x0}+1), p_e0 = 1/(e^{x0}+1)
    let p_g0 = 1.0 / (1.0 + (-x0).exp());
    let p_e0 = 1.0 / (1.0 + x0.exp());
    let log_qg = -softplus(-x);
    let log_qe = -softplus(x);
    let log_pg0 = -softplus(-x0);
    let log_pe0 = -softplus(x0);
    let term = |p: f64, lp: f64, lq: f64| if p == 0.0 { 0.0 } else { p * (lp - lq) };
    (term(p_g0, log_pg0, log_qg) + term(p_e0, log_pe0, log_qe)).max(0.0)
}

/// Normalized asymptotic amplitude of the KL divergence for r = 0:
/// D(t)/D(0) ~ γ e^{−2λ_p t}.
pub fn gamma_prefactor(beta0: f64, beta: f64, omega0: f64) -> Result<f64, AnalyticError> {
    if beta0 == beta {
        return Err(AnalyticError::DegeneratePoint);
    }
    Ok(population_prefactor(beta0, beta, omega0) / kl_initial_closed_form(beta0, beta, omega0))
}

/// Γ₀₁(1+e^{−βω₀})/2.
pub fn delta_critical(p: &TwoLevelParams) -> f64 {
    0.5 * p.population_rate()
}

/// sqrt(r² e^{−(λ_p+2Δ)t} + d₀² e^{−2λ_p t}), d₀ the initial population offset.
pub fn trace_closed_form(p: &TwoLevelParams, t: f64) -> Result<f64, AnalyticError> {
    check_time(t)?;
    let lp = p.population_rate();
    let d0 = p.initial_population_offset();
    Ok((p.r * p.r * (-(lp + 2.0 * p.dephasing) * t).exp() + d0 * d0 * (-2.0 * lp * t).exp()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExistenceLimits {
    /// lim_{β₀→0} D_KL(ρ_th(β₀) ‖ ρ_Eq).
    pub limit_hot: f64,
    /// lim_{β₀→∞} D_KL(ρ_th(β₀) ‖ ρ_Eq) = log(1+e^{−βω₀}).
    pub limit_cold: f64,
    pub pair_guaranteed_up_to: f64,
    /// βω₀/2 ≥ log 2, equivalently limit_cold ≤ limit_hot.
    pub cold_limit_binds: bool,
}

pub fn equidistant_existence(beta: f64, omega0: f64) -> ExistenceLimits {
    let x = beta * omega0;
    let limit_hot = 0.5 * (softplus(x) + softplus(-x) - 2.0 * std::f64::consts::LN_2);
    let limit_cold = softplus(-x);
    ExistenceLimits {
        limit_hot,
        limit_cold,
        pair_guaranteed_up_to: limit_hot.min(limit_cold),
        cold_limit_binds: x / 2.0 >= std::f64::consts::LN_2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DephasingRegime {
    BelowCritical,
    Critical,
    AboveCritical,
}

/// Relative band within which Δ counts as equal to Δ_c.
pub const CRITICAL_REL_TOL: f64 = 1e-9;

pub fn dephasing_regime(p: &TwoLevelParams) -> DephasingRegime {
    let dc = delta_critical(p);
    if (p.dephasing - dc).abs() <= CRITICAL_REL_TOL * dc {
        DephasingRegime::Critical
    } else if p.dephasing < dc {
        DephasingRegime::BelowCritical
    } else {
        DephasingRegime::AboveCritical
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distances::distance;
    use crate::lindblad::{build_superoperator, decompose, propagate};
    use crate::system::{coherent_state, thermal_state};

    fn fig1(beta0: f64, r: f64, dephasing: f64) -> TwoLevelParams {
        TwoLevelParams { beta0, r, dephasing, ..Default::default() }
    }

    #[test]
    fn delta_critical_value() {
        let dc = delta_critical(&fig1(1.0, 0.0, 0.0));
        let e = std::f64::consts::E;
        assert!((dc - (1.0 + e) / (2.0 * e)).abs() < 1e-15);
        assert!((dc - 0.68394).abs() < 1e-5);
        let cold = TwoLevelParams { beta: 1e6, ..Default::default() };
        assert!((delta_critical(&cold) - 0.5).abs() < 1e-15);
        let hot = TwoLevelParams { beta: 0.0, ..Default::default() };
        assert_eq!(delta_critical(&hot), 1.0);
    }

    #[test]
    fn existence_limits() {
        let l = equidistant_existence(1.0, 1.0);
        let e = std::f64::consts::E;
        let hot = 0.5 * (-(1.0 / (e + 1.0)).ln() - (e / (e + 1.0)).ln() - 2.0 * 2f64.ln());
        assert!((l.limit_hot - hot).abs() < 1e-15);
        assert!((l.limit_hot - 0.12011).abs() < 1e-5);
        assert!((l.limit_cold - (1.0 + (-1.0f64).exp()).ln()).abs() < 1e-15);
        assert!(!l.cold_limit_binds);
        assert_eq!(l.pair_guaranteed_up_to, l.limit_hot);
        assert!(0.1 < l.pair_guaranteed_up_to);

        let eq = equidistant_existence(2.0 * 2f64.ln(), 1.0);
        assert!((eq.limit_hot - eq.limit_cold).abs() < 1e-15);
    }

    #[test]
    fn initial_kl_matches_limits_and_distance() {
        let l = equidistant_existence(1.0, 1.0);
        assert!((kl_initial_closed_form(0.0, 1.0, 1.0) - l.limit_hot).abs() < 1e-15);
        assert!((kl_initial_closed_form(f64::INFINITY, 1.0, 1.0) - l.limit_cold).abs() < 1e-15);
        assert!((kl_initial_closed_form(800.0, 1.0, 1.0) - l.limit_cold).abs() < 1e-15);
        let sys = LevelSystem::two_level(1.0, 1.0, 1.0, 0.0).unwrap();
        let eq = thermal_state(&sys, 1.0);
        for b0 in [0.0, 0.084, 0.5, 1.3, 2.306, 7.0] {
            let d = distance(&thermal_state(&sys, b0), &eq, Measure::Kl).unwrap();
            assert!((d - kl_initial_closed_form(b0, 1.0, 1.0)).abs() < 1e-14);
        }
        assert!((kl_initial_closed_form(2.306, 1.0, 1.0) - 0.1).abs() < 5e-3);
        assert!((kl_initial_closed_form(0.084, 1.0, 1.0) - 0.1).abs() < 5e-3);
    }

    #[test]
    fn t_zero_reproduces_initial_state() {
        let p = fig1(0.7, 0.2, 0.3);
        let sys = p.system().unwrap();
        let a = closed_form_state(&p, 0.0).unwrap();
        let b = coherent_state(&sys, p.initial_spec()).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-15);
        let late = closed_form_state(&p, 200.0).unwrap();
        assert!(late.matrix().max_abs_diff(thermal_state(&sys, 1.0).matrix()) < 1e-15);
        assert_eq!(closed_form_state(&p, -1.0), Err(AnalyticError::NegativeTime(-1.0)));
    }

    #[test]
    fn matches_spectral_propagation() {
        let p = TwoLevelParams { omega0: 1.3, beta: 0.8, beta0: 2.306, r: 0.12, phi: 1.1, gamma01: 0.7, dephasing: 0.4 };
        let sys = p.system().unwrap();
        let dec = decompose(&build_superoperator(&sys)).unwrap();
        let rho0 = coherent_state(&sys, p.initial_spec()).unwrap();
        for t in [0.01, 0.1, 1.0, 10.0] {
            let a = closed_form_state(&p, t).unwrap();
            let b = propagate(&dec, &rho0, t).unwrap();
            assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-12, "t={t}");
        }
    }

    #[test]
    fn trace_closed_form_matches_distance() {
        for p in [fig1(2.306, 0.0, 0.0), fig1(0.3, 0.1, 0.5), fig1(1.0, 0.21, 2.0)] {
            for t in [0.0, 0.5, 3.0, 10.0] {
                let a = trace_closed_form(&p, t).unwrap();
                let b = closed_form_distance(&p, t, Measure::Trace).unwrap();
                assert!((a - b).abs() < 1e-15, "{a} {b}");
            }
        }
        // r = 0, t = 0 gives |e^{βω}−e^{β₀ω}| / ((e^{βω}+1)(e^{β₀ω}+1))
        let (b, b0) = (1.0f64, 2.306f64);
        let want = (b.exp() - b0.exp()).abs() / ((b.exp() + 1.0) * (b0.exp() + 1.0));
        assert!((trace_closed_form(&fig1(b0, 0.0, 0.0), 0.0).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn asymptotic_kl_tracks_exact_value() {
        for (p, tol10, tol20) in [(fig1(2.306, 0.0, 0.0), 0.02, 1e-3), (fig1(1.0, 0.21, 0.0), 0.02, 1e-3)] {
            for (t, tol) in [(10.0, tol10), (20.0, tol20)] {
                let exact = closed_form_distance(&p, t, Measure::Kl).unwrap();
                let approx = kl_asymptotic(&p, t);
                assert!((approx / exact - 1.0).abs() < tol, "t={t}: {approx} vs {exact}");
            }
        }
        assert_eq!(kl_asymptotic(&fig1(1.0, 0.0, 0.3), 4.0), 0.0);
    }

    #[test]
    fn gamma_decreases() {
        assert_eq!(gamma_prefactor(1.0, 1.0, 1.0), Err(AnalyticError::DegeneratePoint));
        assert!(gamma_prefactor(0.084, 1.0, 1.0).unwrap() > gamma_prefactor(2.306, 1.0, 1.0).unwrap());
        let grid: Vec<f64> = (0..200).map(|k| 0.05 + 2.95 * k as f64 / 199.0).filter(|&b| b != 1.0).collect();
        let g: Vec<f64> = grid.iter().map(|&b| gamma_prefactor(b, 1.0, 1.0).unwrap()).collect();
        assert!(g.iter().all(|&x| x >= 0.0));
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn regimes() {
        let dc = delta_critical(&fig1(1.0, 0.0, 0.0));
        assert_eq!(dephasing_regime(&fig1(1.0, 0.0, 0.0)), DephasingRegime::BelowCritical);
        assert_eq!(dephasing_regime(&fig1(1.0, 0.0, dc)), DephasingRegime::Critical);
        assert_eq!(dephasing_regime(&fig1(1.0, 0.0, 2.0 * dc)), DephasingRegime::AboveCritical);
    }
}
