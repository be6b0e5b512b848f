//! Equidistant initial states, quench simulation and asymmetry verdicts.
//!
//! Library times are physical (rates carry their own units). Records and
//! CSV output report t·Γ₀₁.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic2::{combined_prefactor, delta_critical, dephasing_regime, DephasingRegime, TwoLevelParams};
use crate::distances::{distance, distance_from_deviation, DistanceError, Measure};
use crate::lindblad::{build_superoperator, decompose, LindbladError, SpectralDecomposition};
use crate::system::{coherence_bound, coherent_state, thermal_state, CoherentInitialSpec, DensityMatrix, LevelSystem, SystemError};

/// Convergence target on |D(β₀) − D*|.
pub const PAIR_TOL: f64 = 1e-12;
pub const MAX_BISECTION_STEPS: usize = 200;
/// Cold-side search stops at this multiple of β.
pub const COLD_BRACKET_CAP: f64 = 50.0;
pub const DEFAULT_SYM_TOL: f64 = 1e-6;
/// Default evaluation time in units of 1/Γ₀₁.
pub const DEFAULT_T_EVAL: f64 = 10.0;
const MONOTONICITY_SAMPLES: usize = 48;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuenchError {
    #[error("target distance must be finite and nonnegative, got {0}")]
    InvalidTarget(f64),
    #[error("NoHotPartner: target {target} exceeds the hot-side limit {limit}")]
    NoHotPartner { target: f64, limit: f64 },
    #[error("NoColdPartner: target {target} exceeds the cold-side limit {limit} reached at beta0 = {beta0_cap}")]
    NoColdPartner { target: f64, limit: f64, beta0_cap: f64 },
    #[error("NotBracketed: {0}")]
    NotBracketed(String),
    #[error("bath inverse temperature must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("invalid time {0}")]
    InvalidTime(f64),
    #[error("need at least 2 samples, got {0}")]
    InvalidSamples(usize),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Rate that sets the time unit: Γ₀₁ when present, otherwise 1.
pub fn time_unit_rate(sys: &LevelSystem) -> f64 {
    let g = sys.gamma01();
    if g > 0.0 {
        g
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquidistantPair {
    pub measure: Measure,
    pub target: f64,
    pub beta: f64,
    pub beta0_hot: f64,
    pub beta0_cold: f64,
    pub distance_hot: f64,
    pub distance_cold: f64,
}

fn initial_distance(sys: &LevelSystem, eq: &DensityMatrix, m: Measure, beta0: f64) -> Result<f64, QuenchError> {
    Ok(distance(&thermal_state(sys, beta0), eq, m)?)
}

/// Bisection for D(x) = target on [a, b] with D(a) − target and
/// D(b) − target of opposite sign.
fn bisect(mut f: impl FnMut(f64) -> Result<f64, QuenchError>, mut a: f64, mut b: f64, target: f64) -> Result<(f64, f64), QuenchError> {
    let mut fa = f(a)? - target;
    let fb = f(b)? - target;
    if fa == 0.0 {
        return Ok((a, fa + target));
    }
    if fb == 0.0 {
        return Ok((b, fb + target));
    }
    if fa.signum() == fb.signum() {
        return Err(QuenchError::NotBracketed(format!("no sign change on [{a}, {b}]")));
    }
    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (a + b);
        if mid <= a.min(b) || mid >= a.max(b) {
            break;
        }
        let fm = f(mid)? - target;
        if fm.abs() < best.1.abs() {
            best = (mid, fm);
        }
        if fm.abs() <= PAIR_TOL * target.max(f64::MIN_POSITIVE) {
            break;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok((best.0, best.1 + target))
}

fn check_monotone(values: &[f64], increasing: bool, side: &str) -> Result<(), QuenchError> {
    for w in values.windows(2) {
        let slack = 1e-13 * w[0].abs().max(w[1].abs());
        let ok = w[0] == w[1] || if increasing { w[1] >= w[0] - slack } else { w[1] <= w[0] + slack };
        if !ok {
            return Err(QuenchError::NotBracketed(format!("initial distance is not monotone on the {side} side")));
        }
    }
    Ok(())
}

/// Thermal initial states β₀_hot < β < β₀_cold at distance D* from ρ_Eq.
pub fn find_equidistant_pair(sys: &LevelSystem, m: Measure, target: f64) -> Result<EquidistantPair, QuenchError> {
    if !(target.is_finite() && target >= 0.0) {
        return Err(QuenchError::InvalidTarget(target));
    }
    let beta = sys.beta();
    if !(beta > 0.0) {
        return Err(QuenchError::InvalidBeta(beta));
    }
    if target == 0.0 {
        return Ok(EquidistantPair {
            measure: m,
            target,
            beta,
            beta0_hot: beta,
            beta0_cold: beta,
            distance_hot: 0.0,
            distance_cold: 0.0,
        });
    }
    let eq = thermal_state(sys, beta);
    let d = |b0: f64| initial_distance(sys, &eq, m, b0);

    let hot_scan: Vec<f64> = (0..=MONOTONICITY_SAMPLES)
        .map(|k| d(beta * k as f64 / MONOTONICITY_SAMPLES as f64))
        .collect::<Result<_, _>>()?;
    check_monotone(&hot_scan, false, "hot")?;
    let hot_limit = hot_scan[0];
    if target > hot_limit {
        return Err(QuenchError::NoHotPartner { target, limit: hot_limit });
    }
    let (beta0_hot, distance_hot) = bisect(d, 0.0, beta, target)?;

    let cap = COLD_BRACKET_CAP * beta;
    let mut lo = beta;
    let mut hi = 2.0 * beta;
    let mut d_hi = d(hi)?;
    while d_hi < target {
        if hi >= cap {
            return Err(QuenchError::NoColdPartner { target, limit: d_hi, beta0_cap: cap });
        }
        lo = hi;
        hi = (2.0 * hi).min(cap);
        d_hi = d(hi)?;
    }
    let cold_scan: Vec<f64> = (0..=MONOTONICITY_SAMPLES)
        .map(|k| d(beta + (hi - beta) * k as f64 / MONOTONICITY_SAMPLES as f64))
        .collect::<Result<_, _>>()?;
    check_monotone(&cold_scan, true, "cold")?;
    let (beta0_cold, distance_cold) = bisect(d, lo, hi, target)?;

    Ok(EquidistantPair { measure: m, target, beta, beta0_hot, beta0_cold, distance_hot, distance_cold })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocusPoint {
    pub beta0: f64,
    pub r: f64,
}

/// Coherent two-level states (β₀, r, φ=0) at distance D* from ρ_Eq.
/// Grid points whose thermal state is already farther than D*, or whose
/// purest state is still closer, are skipped.
pub fn coherence_locus(sys: &LevelSystem, m: Measure, target: f64, beta0_grid: &[f64]) -> Result<Vec<LocusPoint>, QuenchError> {
    if sys.level_count() != 2 {
        return Err(SystemError::NotTwoLevel(sys.level_count()).into());
    }
    if !(target.is_finite() && target > 0.0) {
        return Err(QuenchError::InvalidTarget(target));
    }
    let eq = thermal_state(sys, sys.beta());
    let mut out = Vec::new();
    for &beta0 in beta0_grid {
        let r_max = coherence_bound(beta0, sys.omega0());
        let d = |r: f64| -> Result<f64, QuenchError> {
            let rho = coherent_state(sys, CoherentInitialSpec { beta0, r: r.min(r_max), phi: 0.0 })?;
            Ok(distance(&rho, &eq, m)?)
        };
        let d0 = d(0.0)?;
        if (d0 - target).abs() <= PAIR_TOL * target {
            out.push(LocusPoint { beta0, r: 0.0 });
            continue;
        }
        if d0 > target || d(r_max)? < target {
            continue;
        }
        let (r, _) = bisect(d, 0.0, r_max, target)?;
        out.push(LocusPoint { beta0, r });
    }
    Ok(out)
}

/// A system with its decomposed generator and equilibrium state, reused
/// across many initial states.
#[derive(Debug, Clone)]
pub struct Relaxation {
    sys: LevelSystem,
    dec: SpectralDecomposition,
    eq: DensityMatrix,
}

impl Relaxation {
    pub fn new(sys: &LevelSystem) -> Result<Self, QuenchError> {
        let dec = decompose(&build_superoperator(sys))?;
        Ok(Self { sys: sys.clone(), dec, eq: thermal_state(sys, sys.beta()) })
    }

    pub fn system(&self) -> &LevelSystem {
        &self.sys
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.dec
    }

    pub fn equilibrium(&self) -> &DensityMatrix {
        &self.eq
    }

    /// D(ρ(t) ‖ ρ_Eq) at each physical time in `times`.
    pub fn distances(&self, rho0: &DensityMatrix, m: Measure, times: &[f64]) -> Result<Vec<f64>, QuenchError> {
        let traj = self.dec.trajectory(rho0)?;
        times
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    return Ok(distance(rho0, &self.eq, m)?);
                }
                Ok(distance_from_deviation(&self.eq, &traj.deviation(t)?, m)?)
            })
            .collect()
    }

    pub fn distance_at(&self, rho0: &DensityMatrix, m: Measure, t: f64) -> Result<f64, QuenchError> {
        Ok(self.distances(rho0, m, &[t])?[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchRecord {
    pub measure: Measure,
    pub label: String,
    /// Sample times in units of 1/Γ₀₁.
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
}

impl QuenchRecord {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_gamma01,distance\n");
        for (t, d) in self.times.iter().zip(&self.distances) {
            writeln!(s, "{t:.16e},{d:.16e}").unwrap();
        }
        s
    }

    /// Largest increase between consecutive samples (≤ 0 for a monotone record).
    pub fn max_increase(&self) -> f64 {
        self.distances.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// t = 0 followed by `samples − 1` geometric points from t_max/10³ to t_max.
pub fn sample_times(t_max: f64, samples: usize) -> Result<Vec<f64>, QuenchError> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(QuenchError::InvalidTime(t_max));
    }
    if samples < 2 {
        return Err(QuenchError::InvalidSamples(samples));
    }
    let mut times = vec![0.0];
    let k = samples - 1;
    if k == 1 {
        times.push(t_max);
        return Ok(times);
    }
    let (a, b) = ((t_max / 1e3).ln(), t_max.ln());
    times.extend((0..k).map(|i| {
        if i == k - 1 {
            t_max
        } else {
            (a + (b - a) * i as f64 / (k - 1) as f64).exp()
        }
    }));
    Ok(times)
}

/// Distance time series for one initial state; `t_max` is physical time.
pub fn run_quench(sys: &LevelSystem, rho0: &DensityMatrix, m: Measure, t_max: f64, samples: usize) -> Result<QuenchRecord, QuenchError> {
    let relax = Relaxation::new(sys)?;
    run_quench_with(&relax, rho0, m, t_max, samples, "")
}

pub fn run_quench_with(
    relax: &Relaxation,
    rho0: &DensityMatrix,
    m: Measure,
    t_max: f64,
    samples: usize,
    label: &str,
) -> Result<QuenchRecord, QuenchError> {
    let times = sample_times(t_max, samples)?;
    let distances = relax.distances(rho0, m, &times)?;
    let unit = time_unit_rate(relax.system());
    Ok(QuenchRecord {
        measure: m,
        label: label.to_string(),
        times: times.iter().map(|t| t * unit).collect(),
        distances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictKind {
    UphillFaster,
    DownhillFaster,
    Symmetric,
}

impl VerdictKind {
    pub fn name(self) -> &'static str {
        match self {
            VerdictKind::UphillFaster => "UphillFaster",
            VerdictKind::DownhillFaster => "DownhillFaster",
            VerdictKind::Symmetric => "Symmetric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// Physical evaluation time.
    pub t_star: f64,
    /// D_downhill(t*) − D_uphill(t*).
    pub gap: f64,
    pub distance_downhill: f64,
    pub distance_uphill: f64,
}

pub fn verdict_from_distances(d_down: f64, d_up: f64, t_star: f64, sym_tol: f64) -> Verdict {
    let gap = d_down - d_up;
    let scale = d_down.max(d_up).max(1e-300);
    let kind = if gap.is_nan() || gap.abs() <= sym_tol * scale {
        VerdictKind::Symmetric
    } else if gap > 0.0 {
        VerdictKind::UphillFaster
    } else {
        VerdictKind::DownhillFaster
    };
    Verdict { kind, t_star, gap, distance_downhill: d_down, distance_uphill: d_up }
}

/// Compares the hot (downhill) and cold (uphill) members of `pair` at
/// physical time `t_star` under `m_eval`.
pub fn classify(sys: &LevelSystem, pair: &EquidistantPair, m_eval: Measure, t_star: f64, sym_tol: f64) -> Result<Verdict, QuenchError> {
    classify_with(&Relaxation::new(sys)?, pair, m_eval, t_star, sym_tol)
}

pub fn classify_with(relax: &Relaxation, pair: &EquidistantPair, m_eval: Measure, t_star: f64, sym_tol: f64) -> Result<Verdict, QuenchError> {
    if !(t_star.is_finite() && t_star > 0.0) {
        return Err(QuenchError::InvalidTime(t_star));
    }
    let sys = relax.system();
    let d_down = relax.distance_at(&thermal_state(sys, pair.beta0_hot), m_eval, t_star)?;
    let d_up = relax.distance_at(&thermal_state(sys, pair.beta0_cold), m_eval, t_star)?;
    Ok(verdict_from_distances(d_down, d_up, t_star, sym_tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fastest {
    /// The uphill thermal state relaxes fastest.
    ColdThermal,
    /// Both thermal states tie and beat the coherent state.
    ThermalPairTie,
    /// The β₀ = β coherent state relaxes fastest.
    Coherent,
    /// Every equidistant state relaxes at the same pace.
    AllTie,
    /// Whichever candidate has the smallest combined asymptotic prefactor.
    SmallestPrefactor(Candidate),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Candidate {
    HotThermal,
    ColdThermal,
    Coherent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub candidate: Candidate,
    pub beta0: f64,
    pub r: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRegime {
    pub measure: Measure,
    pub predicted: Fastest,
    pub outcomes: Vec<CandidateOutcome>,
    pub confirmed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub delta_c: f64,
    pub dephasing: f64,
    pub regime: DephasingRegime,
    /// Evaluation time in units of 1/Γ₀₁.
    pub t_eval: f64,
    pub measures: Vec<MeasureRegime>,
}

/// Relative band for calling two simulated distances equal.
const TIE_TOL: f64 = 1e-6;

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1e-300)
}

/// Predicts which equidistant two-level state (hot thermal, cold thermal,
/// or β₀ = β with coherence) relaxes fastest under KL and trace, and checks
/// the prediction against simulated distances at t·Γ₀₁ = `t_eval`.
pub fn regime_report(p: &TwoLevelParams, target: f64, t_eval: f64) -> Result<RegimeReport, QuenchError> {
    let sys = p.system()?;
    let relax = Relaxation::new(&sys)?;
    let regime = dephasing_regime(p);
    let t_star = t_eval / p.gamma01;
    let mut measures = Vec::new();
    for m in [Measure::Kl, Measure::Trace] {
        let pair = find_equidistant_pair(&sys, m, target)?;
        let r = coherence_locus(&sys, m, target, &[p.beta])?
            .first()
            .map(|l| l.r)
            .ok_or_else(|| QuenchError::NotBracketed("no coherent state at beta0 = beta reaches the target".into()))?;
        let specs = [
            (Candidate::HotThermal, pair.beta0_hot, 0.0),
            (Candidate::ColdThermal, pair.beta0_cold, 0.0),
            (Candidate::Coherent, p.beta, r),
        ];
        let mut outcomes = Vec::new();
        for (candidate, beta0, r) in specs {
            let rho0 = coherent_state(&sys, CoherentInitialSpec { beta0, r, phi: p.phi })?;
            let distance = relax.distance_at(&rho0, m, t_star)?;
            outcomes.push(CandidateOutcome { candidate, beta0, r, distance });
        }
        let (hot, cold, coh) = (outcomes[0].distance, outcomes[1].distance, outcomes[2].distance);
        let predicted = match (m, regime) {
            (_, DephasingRegime::AboveCritical) => Fastest::Coherent,
            (Measure::Kl, DephasingRegime::BelowCritical) => Fastest::ColdThermal,
            (Measure::Kl, DephasingRegime::Critical) => {
                let best = outcomes
                    .iter()
                    .min_by(|a, b| {
                        combined_prefactor(a.beta0, a.r, p.beta, p.omega0)
                            .total_cmp(&combined_prefactor(b.beta0, b.r, p.beta, p.omega0))
                    })
                    .unwrap();
                Fastest::SmallestPrefactor(best.candidate)
            }
            (_, DephasingRegime::BelowCritical) => Fastest::ThermalPairTie,
            (_, DephasingRegime::Critical) => Fastest::AllTie,
        };
        let strict_min = |c: f64, others: [f64; 2]| others.iter().all(|&o| c < o && !ties(c, o));
        let confirmed = match predicted {
            Fastest::ColdThermal => strict_min(cold, [hot, coh]),
            Fastest::Coherent => strict_min(coh, [hot, cold]),
            Fastest::ThermalPairTie => ties(hot, cold) && hot < coh && !ties(hot, coh),
            Fastest::AllTie => ties(hot, cold) && ties(hot, coh),
            Fastest::SmallestPrefactor(c) => {
                let d = |c: Candidate| outcomes.iter().find(|o| o.candidate == c).unwrap().distance;
                outcomes.iter().all(|o| o.candidate == c || d(c) < o.distance)
            }
        };
        measures.push(MeasureRegime { measure: m, predicted, outcomes, confirmed });
    }
    Ok(RegimeReport { delta_c: delta_critical(p), dephasing: p.dephasing, regime, t_eval, measures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic2::closed_form_distance;

    fn two(dephasing: f64) -> LevelSystem {
        LevelSystem::two_level(1.0, 1.0, 1.0, dephasing).unwrap()
    }

    fn three(x: f64, y: f64) -> LevelSystem {
        LevelSystem::three_level([0.0, 1.0, 2.0], 1.0, 1.0, x, y).unwrap()
    }

    #[test]
    fn two_level_kl_pair() {
        let pair = find_equidistant_pair(&two(0.0), Measure::Kl, 0.1).unwrap();
        assert!((pair.beta0_hot - 0.084).abs() < 5e-3, "{pair:?}");
        assert!((pair.beta0_cold - 2.306).abs() < 5e-3, "{pair:?}");
        assert!((pair.distance_hot - 0.1).abs() < 1e-9 && (pair.distance_cold - 0.1).abs() < 1e-9);
        assert!(pair.beta0_hot < 1.0 && 1.0 < pair.beta0_cold);
    }

    #[test]
    fn three_level_pairs() {
        let sys = three(1.0, 1.0);
        let kl = find_equidistant_pair(&sys, Measure::Kl, 0.1).unwrap();
        assert!((kl.beta0_hot - 0.40).abs() < 5e-3 && (kl.beta0_cold - 1.90).abs() < 5e-3, "{kl:?}");
        let tr = find_equidistant_pair(&sys, Measure::Trace, 0.1).unwrap();
        assert!((tr.beta0_hot - 0.67).abs() < 5e-3 && (tr.beta0_cold - 1.40).abs() < 5e-3, "{tr:?}");
    }

    #[test]
    fn pair_edge_cases() {
        let pair = find_equidistant_pair(&two(0.0), Measure::Kl, 0.0).unwrap();
        assert_eq!((pair.beta0_hot, pair.beta0_cold), (1.0, 1.0));
        assert!(matches!(find_equidistant_pair(&two(0.0), Measure::Kl, 0.2), Err(QuenchError::NoHotPartner { .. })));
        // at β = 3 the cold limit log(1+e^{-3}) ≈ 0.0486 binds first
        let cold_bound = LevelSystem::two_level(1.0, 3.0, 1.0, 0.0).unwrap();
        assert!(matches!(find_equidistant_pair(&cold_bound, Measure::Kl, 0.06), Err(QuenchError::NoColdPartner { .. })));
        assert!(matches!(find_equidistant_pair(&two(0.0), Measure::Kl, -1.0), Err(QuenchError::InvalidTarget(_))));
    }

    #[test]
    fn locus_examples() {
        let sys = two(0.0);
        let at_beta = coherence_locus(&sys, Measure::Kl, 0.1, &[1.0]).unwrap();
        assert!((at_beta[0].r - 0.210).abs() < 5e-3);
        let tr = coherence_locus(&sys, Measure::Trace, 0.1, &[1.0]).unwrap();
        assert!((tr[0].r - 0.1).abs() < 1e-10);
        let pair = find_equidistant_pair(&sys, Measure::Kl, 0.1).unwrap();
        let ends = coherence_locus(&sys, Measure::Kl, 0.1, &[pair.beta0_hot, pair.beta0_cold]).unwrap();
        assert!(ends.iter().all(|l| l.r < 1e-5), "{ends:?}");
        assert!(coherence_locus(&sys, Measure::Kl, 0.1, &[0.0, 5.0]).unwrap().len() <= 1);
    }

    #[test]
    fn sample_times_layout() {
        let t = sample_times(10.0, 5).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t[0], 0.0);
        assert!((t[1] - 0.01).abs() < 1e-15);
        assert_eq!(t[4], 10.0);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(sample_times(3.0, 2).unwrap(), vec![0.0, 3.0]);
        assert!(sample_times(3.0, 1).is_err());
        assert!(sample_times(0.0, 4).is_err());
    }

    #[test]
    fn quench_record_matches_closed_form() {
        let sys = two(0.0);
        let rho0 = thermal_state(&sys, 2.306);
        let rec = run_quench(&sys, &rho0, Measure::Kl, 10.0, 40).unwrap();
        let p = TwoLevelParams { beta0: 2.306, ..Default::default() };
        for (&t, &d) in rec.times.iter().zip(&rec.distances) {
            let want = closed_form_distance(&p, t, Measure::Kl).unwrap();
            assert!((d - want).abs() <= 1e-10 * want.max(1e-300) + 1e-300, "t={t}: {d} vs {want}");
        }
        assert!(rec.max_increase() <= 1e-10);
        let csv = rec.to_csv();
        assert!(csv.starts_with("t_gamma01,distance\n0.0000000000000000e0,"));
        assert_eq!(csv.lines().count(), 41);

        let flat = run_quench(&sys, &thermal_state(&sys, 1.0), Measure::Trace, 5.0, 6).unwrap();
        assert!(flat.distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn two_level_verdicts() {
        let sys = two(0.0);
        for d in [0.02, 0.05, 0.1] {
            let pair = find_equidistant_pair(&sys, Measure::Kl, d).unwrap();
            let v = classify(&sys, &pair, Measure::Kl, 10.0, DEFAULT_SYM_TOL).unwrap();
            assert_eq!(v.kind, VerdictKind::UphillFaster, "D*={d}: {v:?}");
        }
        let tr = find_equidistant_pair(&sys, Measure::Trace, 0.1).unwrap();
        let v = classify(&sys, &tr, Measure::Trace, 10.0, DEFAULT_SYM_TOL).unwrap();
        assert_eq!(v.kind, VerdictKind::Symmetric, "{v:?}");
    }

    #[test]
    fn three_level_region_cells() {
        for (x, y, kl, tr) in [
            (0.0, 1.0, VerdictKind::UphillFaster, VerdictKind::UphillFaster),
            (2.0, 0.0, VerdictKind::DownhillFaster, VerdictKind::DownhillFaster),
            (1.1, 1.5, VerdictKind::UphillFaster, VerdictKind::DownhillFaster),
        ] {
            let sys = three(x, y);
            let pk = find_equidistant_pair(&sys, Measure::Kl, 0.1).unwrap();
            let pt = find_equidistant_pair(&sys, Measure::Trace, 0.1).unwrap();
            assert_eq!(classify(&sys, &pk, Measure::Kl, 10.0, DEFAULT_SYM_TOL).unwrap().kind, kl, "({x},{y})");
            assert_eq!(classify(&sys, &pt, Measure::Trace, 10.0, DEFAULT_SYM_TOL).unwrap().kind, tr, "({x},{y})");
        }
    }

    #[test]
    fn verdict_scale_invariance() {
        let sys = three(1.1, 1.5);
        let pair = find_equidistant_pair(&sys, Measure::Kl, 0.1).unwrap();
        let base = classify(&sys, &pair, Measure::Kl, 10.0, DEFAULT_SYM_TOL).unwrap();
        for c in [0.1, 10.0] {
            let scaled = sys.with_rates_scaled(c).unwrap();
            let v = classify(&scaled, &pair, Measure::Kl, 10.0 / c, DEFAULT_SYM_TOL).unwrap();
            assert_eq!(v.kind, base.kind);
            assert!((v.gap / base.gap - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn regime_predictions_hold() {
        let base = TwoLevelParams::default();
        let dc = delta_critical(&base);
        for dephasing in [0.0, dc, 2.0 * dc] {
            let p = TwoLevelParams { dephasing, ..base };
            let rep = regime_report(&p, 0.1, 10.0).unwrap();
            for m in &rep.measures {
                assert!(m.confirmed, "Δ={dephasing}: {m:?}");
            }
        }
        let rep = regime_report(&base, 0.1, 10.0).unwrap();
        assert_eq!(rep.regime, DephasingRegime::BelowCritical);
        assert_eq!(rep.measures[0].predicted, Fastest::ColdThermal);
        assert_eq!(rep.measures[1].predicted, Fastest::ThermalPairTie);
    }
}
