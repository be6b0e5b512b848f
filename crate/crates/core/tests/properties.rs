use std::f64::consts::TAU;

use proptest::prelude::*;

use equiquench::analytic2::{closed_form_state, equidistant_existence, gamma_prefactor, TwoLevelParams};
use equiquench::distances::{distance, kl_coherence_split, Measure};
use equiquench::phasemap::Axis;
use equiquench::quench::{find_equidistant_pair, verdict_from_distances, Relaxation, VerdictKind};
use equiquench::system::{coherence_bound, coherent_state, thermal_populations, thermal_state, CoherentInitialSpec, LevelSystem};
use equiquench::{build_superoperator, decompose, propagate};

fn two_level_params() -> impl Strategy<Value = TwoLevelParams> {
    (0.2..3.0f64, 0.1..3.0f64, -2.0..4.0f64, 0.0..0.99f64, 0.0..TAU, 0.2..3.0f64, 0.0..2.0f64).prop_map(
        |(omega0, beta, beta0, frac, phi, gamma01, dephasing)| TwoLevelParams {
            omega0,
            beta,
            beta0,
            r: frac * coherence_bound(beta0, omega0),
            phi,
            gamma01,
            dephasing,
        },
    )
}

fn three_level_system() -> impl Strategy<Value = LevelSystem> {
    (0.1..2.0f64, 0.1..2.0f64, 0.2..2.0f64, 0.05..3.0f64, 0.0..3.0f64, 0.05..3.0f64).prop_map(|(e1, gap, beta, g01, g02, g12)| {
        LevelSystem::three_level([0.0, e1, e1 + gap], beta, g01, g02, g12).unwrap()
    })
}

fn measure() -> impl Strategy<Value = Measure> {
    prop::sample::select(Measure::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thermal_populations_normalized_and_ordered(
        energies in prop::collection::vec(-5.0..5.0f64, 2..6),
        beta in -3.0..3.0f64,
    ) {
        let p = thermal_populations(&energies, beta);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for i in 0..energies.len() {
            for j in 0..energies.len() {
                if beta * (energies[i] - energies[j]) < 0.0 {
                    prop_assert!(p[i] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn detailed_balance_ratio(sys in three_level_system()) {
        let e = sys.energies();
        for i in 0..3 {
            for j in 0..3 {
                let (down, up) = (sys.rate(i, j), sys.rate(j, i));
                if i < j && down > 0.0 {
                    let want = (-sys.beta() * (e[j] - e[i])).exp();
                    prop_assert!((up / down - want).abs() <= 1e-12 * want.max(1.0));
                }
            }
        }
    }

    #[test]
    fn propagation_preserves_trace_and_hermiticity(p in two_level_params(), tau in 0.0..30.0f64) {
        let sys = p.system().unwrap();
        let dec = decompose(&build_superoperator(&sys)).unwrap();
        let rho0 = coherent_state(&sys, p.initial_spec()).unwrap();
        let rho = propagate(&dec, &rho0, tau / p.gamma01).unwrap();
        prop_assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
        prop_assert!(rho.matrix().hermiticity_defect() < 1e-12);
        prop_assert!(rho.eigenvalues().iter().all(|&l| l > -1e-10));
    }

    #[test]
    fn spectral_matches_closed_form(p in two_level_params(), tau in 0.0..20.0f64) {
        let sys = p.system().unwrap();
        let dec = decompose(&build_superoperator(&sys)).unwrap();
        let rho0 = coherent_state(&sys, p.initial_spec()).unwrap();
        let t = tau / p.gamma01;
        let a = propagate(&dec, &rho0, t).unwrap();
        let b = closed_form_state(&p, t).unwrap();
        prop_assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-10);
    }

    #[test]
    fn semigroup_composition(sys in three_level_system(), beta0 in -1.0..4.0f64, s in 0.0..5.0f64, t in 0.0..5.0f64) {
        let dec = decompose(&build_superoperator(&sys)).unwrap();
        let rho0 = thermal_state(&sys, beta0);
        let direct = propagate(&dec, &rho0, s + t).unwrap();
        let stepped = propagate(&dec, &propagate(&dec, &rho0, s).unwrap(), t).unwrap();
        prop_assert!(direct.matrix().max_abs_diff(stepped.matrix()) < 1e-10);
    }

    #[test]
    fn distances_nonincreasing_in_time(p in two_level_params(), m in measure()) {
        let sys = p.system().unwrap();
        let relax = Relaxation::new(&sys).unwrap();
        let rho0 = coherent_state(&sys, p.initial_spec()).unwrap();
        let times: Vec<f64> = (0..40).map(|k| 0.25 * k as f64 / p.gamma01).collect();
        let d = relax.distances(&rho0, m, &times).unwrap();
        for w in d.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10 * w[0].max(1e-300) + 1e-15, "{m}: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn distances_nonnegative_and_zero_at_equilibrium(p in two_level_params(), m in measure()) {
        let sys = p.system().unwrap();
        let eq = thermal_state(&sys, p.beta);
        let rho0 = coherent_state(&sys, p.initial_spec()).unwrap();
        prop_assert!(distance(&rho0, &eq, m).unwrap() >= 0.0);
        prop_assert_eq!(distance(&eq, &eq, m).unwrap(), 0.0);
    }

    #[test]
    fn pinsker_bound(p in two_level_params()) {
        let sys = p.system().unwrap();
        let eq = thermal_state(&sys, p.beta);
        let rho0 = coherent_state(&sys, p.initial_spec()).unwrap();
        let kl = distance(&rho0, &eq, Measure::Kl).unwrap();
        let tr = distance(&rho0, &eq, Measure::Trace).unwrap();
        prop_assert!(kl >= 2.0 * tr * tr - 1e-14);
    }

    #[test]
    fn phase_does_not_change_distance(p in two_level_params(), phi2 in 0.0..TAU, m in measure(), tau in 0.0..10.0f64) {
        let sys = p.system().unwrap();
        let relax = Relaxation::new(&sys).unwrap();
        let a = coherent_state(&sys, p.initial_spec()).unwrap();
        let b = coherent_state(&sys, CoherentInitialSpec { phi: phi2, ..p.initial_spec() }).unwrap();
        let t = tau / p.gamma01;
        let (da, db) = (relax.distance_at(&a, m, t).unwrap(), relax.distance_at(&b, m, t).unwrap());
        prop_assert!((da - db).abs() <= 1e-10 * da.max(db) + 1e-15);
    }

    #[test]
    fn kl_split_adds_up(p in two_level_params()) {
        let sys = p.system().unwrap();
        let eq = thermal_state(&sys, p.beta);
        let rho0 = coherent_state(&sys, p.initial_spec()).unwrap();
        let (coh, diag) = kl_coherence_split(&rho0, &eq).unwrap();
        let kl = distance(&rho0, &eq, Measure::Kl).unwrap();
        prop_assert!(coh >= -1e-15 && diag >= -1e-15);
        prop_assert!((coh + diag - kl).abs() <= 1e-10 * kl.max(1e-12));
    }

    #[test]
    fn equidistant_pair_brackets_beta(sys in three_level_system(), m in measure(), frac in 0.05..0.8f64) {
        let hot_limit = distance(&thermal_state(&sys, 0.0), &thermal_state(&sys, sys.beta()), m).unwrap();
        let cold_limit = distance(&thermal_state(&sys, 50.0 * sys.beta()), &thermal_state(&sys, sys.beta()), m).unwrap();
        let target = frac * hot_limit.min(cold_limit);
        prop_assume!(target > 1e-6);
        let pair = find_equidistant_pair(&sys, m, target).unwrap();
        prop_assert!(pair.beta0_hot < sys.beta() && sys.beta() < pair.beta0_cold);
        prop_assert!((pair.distance_hot - target).abs() <= 1e-9 * target);
        prop_assert!((pair.distance_cold - target).abs() <= 1e-9 * target);
    }

    #[test]
    fn trace_pairs_relax_symmetrically(omega0 in 0.3..2.5f64, beta in 0.2..2.5f64, g in 0.2..3.0f64, dephasing in 0.0..2.0f64, tau in 0.0..20.0f64) {
        let sys = LevelSystem::two_level(omega0, beta, g, dephasing).unwrap();
        let lim = equidistant_existence(beta, omega0);
        let hot_trace = distance(&thermal_state(&sys, 0.0), &thermal_state(&sys, beta), Measure::Trace).unwrap();
        let target = 0.5 * hot_trace.min(lim.limit_cold).min(0.1);
        let pair = find_equidistant_pair(&sys, Measure::Trace, target).unwrap();
        let relax = Relaxation::new(&sys).unwrap();
        let t = tau / g;
        let hot = relax.distance_at(&thermal_state(&sys, pair.beta0_hot), Measure::Trace, t).unwrap();
        let cold = relax.distance_at(&thermal_state(&sys, pair.beta0_cold), Measure::Trace, t).unwrap();
        prop_assert!((hot - cold).abs() <= 1e-10);
    }

    #[test]
    fn gamma_decreases_with_beta0(beta0 in 0.05..3.0f64, step in 1e-3..1.0f64) {
        let (a, b) = (beta0, beta0 + step);
        prop_assume!((a - 1.0).abs() > 1e-6 && (b - 1.0).abs() > 1e-6);
        prop_assert!(gamma_prefactor(b, 1.0, 1.0).unwrap() < gamma_prefactor(a, 1.0, 1.0).unwrap());
    }

    #[test]
    fn verdict_sign_convention(down in 0.0..1.0f64, up in 0.0..1.0f64) {
        let v = verdict_from_distances(down, up, 10.0, 1e-6);
        match v.kind {
            VerdictKind::UphillFaster => prop_assert!(up < down),
            VerdictKind::DownhillFaster => prop_assert!(down < up),
            VerdictKind::Symmetric => prop_assert!((down - up).abs() <= 1e-6 * down.max(up).max(f64::MIN_POSITIVE) + 1e-300),
        }
    }

    #[test]
    fn axis_values_hit_endpoints(min in 0.0..5.0f64, span in 0.01..5.0f64, n in 2usize..100) {
        let axis = Axis::new(min, min + span, n).unwrap();
        let v = axis.values();
        prop_assert_eq!(v.len(), n);
        prop_assert_eq!(v[0], min);
        prop_assert_eq!(v[n - 1], min + span);
    }
}
