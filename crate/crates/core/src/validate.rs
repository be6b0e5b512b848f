//! Seeded oracle and invariant suites. Every suite draws its own random
//! instances from a ChaCha stream, so results depend only on the seed.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytic2::{closed_form_state, TwoLevelParams};
use crate::distances::{distance, kl_coherence_split, Measure};
use crate::lindblad::{build_superoperator, decompose, propagate, vectorize};
use crate::numkernel::{hermitian_eig, ComplexMatrix};
use crate::oracle::propagate_expm;
use crate::quench::{find_equidistant_pair, sample_times, Relaxation};
use crate::system::{coherence_bound, coherent_state, thermal_state, CoherentInitialSpec, DensityMatrix, LevelSystem};

pub const DEFAULT_SEED: u64 = 20_240_611;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    /// Largest observed violation measure (difference, defect or excess).
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub detail: String,
}

struct Tracker {
    name: &'static str,
    tolerance: f64,
    worst: f64,
    cases: usize,
    failure: Option<String>,
}

impl Tracker {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, tolerance, worst: 0.0, cases: 0, failure: None }
    }

    fn record(&mut self, value: f64, context: impl FnOnce() -> String) {
        self.cases += 1;
        if value > self.worst || value.is_nan() {
            self.worst = value;
        }
        if !(value <= self.tolerance) && self.failure.is_none() {
            self.failure = Some(format!("{value:.3e} > {:.1e} at {}", self.tolerance, context()));
        }
    }

    fn error(&mut self, e: impl std::fmt::Display) {
        self.cases += 1;
        if self.failure.is_none() {
            self.failure = Some(e.to_string());
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            name: self.name,
            passed: self.failure.is_none() && self.cases > 0,
            worst: self.worst,
            tolerance: self.tolerance,
            cases: self.cases,
            detail: self.failure.unwrap_or_else(|| "ok".into()),
        }
    }
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    g.hermitian_part()
}

/// ρ = GG†/Tr(GG†) for a Gaussian-free uniform G; full rank almost surely.
pub fn random_state(rng: &mut impl Rng, n: usize) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let p = g.matmul(&g.adjoint());
    let tr = p.trace().re;
    DensityMatrix::new(p.scale_real(1.0 / tr).hermitian_part()).expect("GG† is a state")
}

/// Random connected system with 2–4 levels; dephasing only for two levels.
pub fn random_system(rng: &mut impl Rng) -> LevelSystem {
    let n: usize = rng.gen_range(2..=4);
    let energies: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let beta = rng.gen_range(0.1..3.0);
    let mut rates = Vec::new();
    for j in 1..n {
        // a spanning chain keeps the graph connected
        rates.push(((j - 1, j), rng.gen_range(0.1..2.0)));
        for i in 0..j.saturating_sub(1) {
            if rng.gen_bool(0.6) {
                rates.push(((i, j), rng.gen_range(0.1..2.0)));
            }
        }
    }
    let dephasing = if n == 2 { rng.gen_range(0.0..2.0) } else { 0.0 };
    LevelSystem::new(energies, beta, &rates, dephasing).expect("random system is valid")
}

pub fn random_two_level(rng: &mut impl Rng) -> TwoLevelParams {
    let omega0 = rng.gen_range(0.2..3.0);
    let beta0 = rng.gen_range(-2.0..4.0);
    TwoLevelParams {
        omega0,
        beta: rng.gen_range(0.1..3.0),
        beta0,
        r: rng.gen_range(0.0..0.99) * coherence_bound(beta0, omega0),
        phi: rng.gen_range(0.0..TAU),
        gamma01: rng.gen_range(0.2..3.0),
        dephasing: rng.gen_range(0.0..2.0),
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn eig_reconstruction(seed: u64) -> SuiteResult {
    let mut t = Tracker::new("hermitian eigendecomposition reconstruction", 1e-10);
    let mut rng = rng_for(seed, 1);
    for _ in 0..200 {
        let n = rng.gen_range(2..=9);
        let a = random_hermitian(&mut rng, n);
        match hermitian_eig(&a, 1e-12) {
            Ok(e) => {
                let recon = e.reconstruct_with(Some);
                let u = &e.eigenvectors;
                let ortho = u.adjoint().matmul(u).max_abs_diff(&ComplexMatrix::identity(n));
                t.record((recon.max_abs_diff(&a) / a.max_abs().max(1.0)).max(ortho), || format!("n={n}"));
            }
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

fn oracle_two_level(seed: u64) -> SuiteResult {
    let mut t = Tracker::new("two-level spectral vs closed form vs matrix exponential", 1e-10);
    let mut rng = rng_for(seed, 2);
    for _ in 0..100 {
        let p = random_two_level(&mut rng);
        let run = || -> Result<f64, String> {
            let sys = p.system().map_err(|e| e.to_string())?;
            let sop = build_superoperator(&sys);
            let dec = decompose(&sop).map_err(|e| e.to_string())?;
            let rho0 = coherent_state(&sys, p.initial_spec()).map_err(|e| e.to_string())?;
            let mut worst: f64 = 0.0;
            for tau in [0.01, 0.1, 1.0, 10.0, 20.0] {
                let time = tau / p.gamma01;
                let a = propagate(&dec, &rho0, time).map_err(|e| e.to_string())?;
                let b = closed_form_state(&p, time).map_err(|e| e.to_string())?;
                let c = propagate_expm(&sop, rho0.matrix(), time);
                worst = worst
                    .max(a.matrix().max_abs_diff(b.matrix()))
                    .max(a.matrix().max_abs_diff(&c))
                    .max(b.matrix().max_abs_diff(&c));
            }
            Ok(worst)
        };
        match run() {
            Ok(w) => t.record(w, || format!("{p:?}")),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

fn oracle_general(seed: u64) -> SuiteResult {
    let mut t = Tracker::new("spectral propagation vs matrix exponential (2-4 levels)", 1e-9);
    let mut rng = rng_for(seed, 3);
    for _ in 0..60 {
        let sys = random_system(&mut rng);
        let rho0 = random_state(&mut rng, sys.level_count());
        let sop = build_superoperator(&sys);
        match decompose(&sop) {
            Ok(dec) => {
                for time in [0.05, 0.5, 2.0, 8.0] {
                    match propagate(&dec, &rho0, time) {
                        Ok(a) => {
                            let b = propagate_expm(&sop, rho0.matrix(), time);
                            t.record(a.matrix().max_abs_diff(&b), || format!("N={} t={time}", sys.level_count()));
                        }
                        Err(e) => t.error(e),
                    }
                }
            }
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

/// |Tr ρ(t) − 1| and the most negative eigenvalue of ρ(t).
fn trace_and_positivity(seed: u64) -> (SuiteResult, SuiteResult) {
    let mut tr = Tracker::new("trace preservation", 1e-9);
    let mut pos = Tracker::new("positivity", 1e-8);
    let mut rng = rng_for(seed, 4);
    for _ in 0..60 {
        let sys = random_system(&mut rng);
        let rho0 = random_state(&mut rng, sys.level_count());
        let dec = match decompose(&build_superoperator(&sys)) {
            Ok(d) => d,
            Err(e) => {
                tr.error(&e);
                pos.error(e);
                continue;
            }
        };
        for time in sample_times(20.0, 25).unwrap() {
            match propagate(&dec, &rho0, time) {
                Ok(r) => {
                    tr.record((r.matrix().trace() - Complex64::new(1.0, 0.0)).norm(), || format!("t={time}"));
                    let lowest = r.eigenvalues()[0];
                    pos.record((-lowest).max(0.0), || format!("t={time}"));
                }
                Err(e) => tr.error(e),
            }
        }
    }
    (tr.finish(), pos.finish())
}

fn semigroup(seed: u64) -> SuiteResult {
    let mut t = Tracker::new("semigroup composition", 1e-9);
    let mut rng = rng_for(seed, 5);
    for _ in 0..60 {
        let sys = random_system(&mut rng);
        let rho0 = random_state(&mut rng, sys.level_count());
        let (t1, t2) = (rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0));
        let run = || -> Result<f64, String> {
            let dec = decompose(&build_superoperator(&sys)).map_err(|e| e.to_string())?;
            let direct = propagate(&dec, &rho0, t1 + t2).map_err(|e| e.to_string())?;
            let mid = propagate(&dec, &rho0, t1).map_err(|e| e.to_string())?;
            let mid = DensityMatrix::new(mid.into_matrix()).map_err(|e| e.to_string())?;
            let two = propagate(&dec, &mid, t2).map_err(|e| e.to_string())?;
            Ok(direct.matrix().max_abs_diff(two.matrix()))
        };
        match run() {
            Ok(w) => t.record(w, || format!("t1={t1} t2={t2}")),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

fn monotone_distances(seed: u64) -> SuiteResult {
    let mut t = Tracker::new("distance monotonicity along trajectories", 1e-10);
    let mut rng = rng_for(seed, 6);
    for _ in 0..40 {
        let sys = random_system(&mut rng);
        let rho0 = random_state(&mut rng, sys.level_count());
        let relax = match Relaxation::new(&sys) {
            Ok(r) => r,
            Err(e) => {
                t.error(e);
                continue;
            }
        };
        let times = sample_times(15.0, 40).unwrap();
        for m in Measure::ALL {
            match relax.distances(&rho0, m, &times) {
                Ok(d) => {
                    let rise = d.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
                    t.record(rise, || format!("{m} N={}", sys.level_count()));
                }
                Err(e) => t.error(e),
            }
        }
    }
    t.finish()
}

fn pinsker(seed: u64) -> SuiteResult {
    let mut t = Tracker::new("Pinsker bound KL >= 2 D_Tr^2", 1e-14);
    let mut rng = rng_for(seed, 7);
    for _ in 0..300 {
        let sys = random_system(&mut rng);
        let rho = random_state(&mut rng, sys.level_count());
        let eq = thermal_state(&sys, sys.beta());
        match (distance(&rho, &eq, Measure::Kl), distance(&rho, &eq, Measure::Trace)) {
            (Ok(kl), Ok(tr)) => t.record(2.0 * tr * tr - kl, || format!("kl={kl} tr={tr}")),
            (Err(e), _) | (_, Err(e)) => t.error(e),
        }
    }
    t.finish()
}

fn phase_invariance(seed: u64) -> SuiteResult {
    let mut t = Tracker::new("phase invariance of all measures", 1e-10);
    let mut rng = rng_for(seed, 8);
    for _ in 0..50 {
        let p = random_two_level(&mut rng);
        let sys = p.system().unwrap();
        let eq = thermal_state(&sys, p.beta);
        for m in Measure::ALL {
            let vals: Result<Vec<f64>, _> = (0..12)
                .map(|k| {
                    let rho = coherent_state(&sys, CoherentInitialSpec { beta0: p.beta0, r: p.r, phi: TAU * k as f64 / 12.0 })?;
                    distance(&rho, &eq, m).map_err(|e| crate::system::SystemError::InvalidDensityMatrix(e.to_string()))
                })
                .collect();
            match vals {
                Ok(v) => {
                    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
                    t.record((hi - lo) / hi.max(1.0), || format!("{m} {p:?}"));
                }
                Err(e) => t.error(e),
            }
        }
    }
    t.finish()
}

fn detailed_balance(seed: u64) -> SuiteResult {
    let mut t = Tracker::new("detailed balance and stationarity of the Gibbs state", 1e-12);
    let mut rng = rng_for(seed, 9);
    for _ in 0..100 {
        let sys = random_system(&mut rng);
        let n = sys.level_count();
        let e = sys.energies();
        let b = sys.beta();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let lhs = sys.rate(i, j) * (-b * e[j]).exp();
                let rhs = sys.rate(j, i) * (-b * e[i]).exp();
                worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
            }
        }
        let eq = thermal_state(&sys, b);
        let image = build_superoperator(&sys).apply(eq.matrix());
        let null = vectorize(&image).iter().map(|z| z.norm()).fold(0.0, f64::max);
        t.record(worst.max(null), || format!("N={n}"));
    }
    t.finish()
}

fn trace_symmetry(seed: u64) -> SuiteResult {
    let mut t = Tracker::new("symmetric relaxation of trace-equidistant thermal pairs", 1e-10);
    let mut rng = rng_for(seed, 10);
    for _ in 0..20 {
        let omega0 = rng.gen_range(0.3..2.0);
        let beta = rng.gen_range(0.3..2.0);
        let sys = LevelSystem::two_level(omega0, beta, rng.gen_range(0.3..2.0), rng.gen_range(0.0..1.5)).unwrap();
        let eq = thermal_state(&sys, beta);
        let cap = distance(&thermal_state(&sys, 0.0), &eq, Measure::Trace)
            .unwrap()
            .min(distance(&thermal_state(&sys, f64::INFINITY), &eq, Measure::Trace).unwrap());
        let target = rng.gen_range(0.05..0.9) * cap;
        let run = || -> Result<f64, String> {
            let pair = find_equidistant_pair(&sys, Measure::Trace, target).map_err(|e| e.to_string())?;
            let relax = Relaxation::new(&sys).map_err(|e| e.to_string())?;
            let times: Vec<f64> = (0..50).map(|k| 20.0 * k as f64 / 49.0 / sys.gamma01()).collect();
            let hot = relax.distances(&thermal_state(&sys, pair.beta0_hot), Measure::Trace, &times).map_err(|e| e.to_string())?;
            let cold = relax.distances(&thermal_state(&sys, pair.beta0_cold), Measure::Trace, &times).map_err(|e| e.to_string())?;
            Ok(hot.iter().zip(&cold).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        };
        match run() {
            Ok(w) => t.record(w, || format!("target={target}")),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

fn kl_split(seed: u64) -> SuiteResult {
    let mut t = Tracker::new("KL coherence split additivity", 1e-10);
    let mut rng = rng_for(seed, 11);
    for _ in 0..100 {
        let sys = random_system(&mut rng);
        let rho = random_state(&mut rng, sys.level_count());
        let eq = thermal_state(&sys, sys.beta());
        match (kl_coherence_split(&rho, &eq), distance(&rho, &eq, Measure::Kl)) {
            (Ok((c, d)), Ok(kl)) => t.record((c + d - kl).abs().max(-c.min(0.0)), || format!("N={}", sys.level_count())),
            (Err(e), _) | (_, Err(e)) => t.error(e),
        }
    }
    t.finish()
}

fn symmetrized_kl(seed: u64) -> SuiteResult {
    let mut t = Tracker::new("symmetrized KL argument exchange", 1e-12);
    let mut rng = rng_for(seed, 12);
    for _ in 0..100 {
        let sys = random_system(&mut rng);
        let rho = random_state(&mut rng, sys.level_count());
        let eq = thermal_state(&sys, sys.beta());
        match (distance(&rho, &eq, Measure::SymmetrizedKl), distance(&eq, &rho, Measure::SymmetrizedKl)) {
            (Ok(a), Ok(b)) => t.record((a - b).abs() / a.max(1.0), || format!("{a} vs {b}")),
            (Err(e), _) | (_, Err(e)) => t.error(e),
        }
    }
    t.finish()
}

/// Runs every suite. Only seeded random instances are used.
pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    let (tr, pos) = trace_and_positivity(seed);
    vec![
        eig_reconstruction(seed),
        oracle_two_level(seed),
        oracle_general(seed),
        tr,
        pos,
        semigroup(seed),
        monotone_distances(seed),
        pinsker(seed),
        phase_invariance(seed),
        detailed_balance(seed),
        trace_symmetry(seed),
        kl_split(seed),
        symmetrized_kl(seed),
    ]
}
