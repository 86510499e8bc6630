use gridcf::case::ScenarioKind;
use gridcf::dataset::ProblemKind;
use gridcf::fixtures;
use gridcf_harness::sampling::{profile_shape, scaled_profile};
use gridcf_harness::{sample_dcopf_demands, sample_uc_profiles, HarnessError, ProfileOptions};
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn five_bus_draws_stay_under_120_percent() {
    let case = fixtures::case5_fig1();
    let base = case.default_demand().values;
    let ds = sample_dcopf_demands(&case, 10, 3).unwrap();
    assert_eq!(ds.len(), 10);
    assert_eq!(ds.kind, ProblemKind::Dcopf);
    for s in &ds.samples {
        assert_eq!(s.theta.kind, ScenarioKind::DcopfNodal);
        for (d, b) in s.theta.values.iter().zip(&base) {
            assert!(*d >= 0.0 && *d <= 1.2 * b);
        }
    }
}

#[test]
fn zero_default_demand_gives_identical_zero_samples() {
    let mut case = fixtures::case5_fig1();
    for d in &mut case.demands {
        d.default = 0.0;
    }
    let ds = sample_dcopf_demands(&case, 5, 11).unwrap();
    assert!(ds.samples.iter().all(|s| s.theta.values.iter().all(|&v| v == 0.0)));
    assert!(ds.samples.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn five_bus_means_approach_sixty_percent_of_default() {
    // With line limits lifted every draw is feasible, so accepted samples are
    // plain unif(0, 1.2 d) draws with mean 0.6 d.
    let mut case = fixtures::case5_fig1();
    for l in &mut case.lines {
        l.limit = None;
    }
    let base = case.default_demand().values;
    let ds = sample_dcopf_demands(&case, 1000, 5).unwrap();
    for (i, b) in base.iter().enumerate() {
        let mean = ds.samples.iter().map(|s| s.theta.values[i]).sum::<f64>() / ds.len() as f64;
        assert!((mean - 0.6 * b).abs() <= 0.05 * 0.6 * b, "demand {i}: mean {mean} vs {}", 0.6 * b);
    }
}

#[test]
fn discarding_infeasible_draws_trims_the_congested_demand() {
    // With the 240 MW limits, high draws at bus 2 are often infeasible and the
    // accepted mean falls below the uniform one.
    let case = fixtures::case5_fig1();
    let ds = sample_dcopf_demands(&case, 400, 5).unwrap();
    let mean = ds.samples.iter().map(|s| s.theta.values[1]).sum::<f64>() / ds.len() as f64;
    assert!(mean < 0.6 * case.demands[1].default);
}

#[test]
fn recorded_solutions_are_optimal_and_consistent() {
    let case = fixtures::case14_desk();
    let ds = sample_dcopf_demands(&case, 20, 9).unwrap();
    for s in &ds.samples {
        let pg = s.pg().unwrap();
        let gen: f64 = pg.iter().sum();
        assert!((gen - s.theta.total()).abs() <= 1e-6 * (1.0 + gen));
    }
}

#[test]
fn sampling_is_deterministic_and_worker_independent() {
    let case = fixtures::case5_fig1();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| sample_dcopf_demands(&case, 40, 21).unwrap());
    let b = four.install(|| sample_dcopf_demands(&case, 40, 21).unwrap());
    let c = sample_dcopf_demands(&case, 40, 22).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.samples, c.samples);
}

#[test]
fn hopeless_case_gives_up_after_budget() {
    let mut case = fixtures::case5_fig1();
    for g in &mut case.generators {
        g.p_max = 0.0;
    }
    match sample_dcopf_demands(&case, 3, 1) {
        Err(HarnessError::TooManyInfeasible { requested, accepted, draws }) => {
            assert_eq!((requested, accepted, draws), (3, 0, 300));
        }
        other => panic!("expected give-up, got {other:?}"),
    }
}

#[test]
fn zero_samples_are_rejected() {
    assert!(matches!(
        sample_dcopf_demands(&fixtures::case5_fig1(), 0, 1),
        Err(HarnessError::NoSamples)
    ));
}

#[test]
fn three_unit_profile_peaks_stay_in_range() {
    let case = fixtures::uc_three_unit();
    let cap = case.total_capacity();
    assert_eq!(cap, 550.0);
    let ds = sample_uc_profiles(&case, 12, 4, &ProfileOptions::default()).unwrap();
    assert_eq!(ds.len(), 12);
    for s in &ds.samples {
        assert_eq!(s.theta.len(), case.horizon);
        let peak = s.theta.values.iter().copied().fold(0.0, f64::max);
        assert!(peak >= 0.36 * cap - 1e-9 && peak <= 0.84 * cap + 1e-9, "{peak}");
        assert!(s.commitment().is_some());
    }
}

#[test]
fn toy_dataset_reaches_requested_size() {
    let ds = sample_uc_profiles(&fixtures::uc_toy(), 500, 8, &ProfileOptions::default()).unwrap();
    assert_eq!(ds.len(), 500);
}

#[test]
fn shape_has_two_daytime_peaks() {
    let s = profile_shape(24);
    let local_max: Vec<usize> = (1..23).filter(|&t| s[t] > s[t - 1] && s[t] >= s[t + 1]).collect();
    assert_eq!(local_max.len(), 2, "{local_max:?}");
    assert!(local_max[0] < 12 && local_max[1] > 12);
    assert!(s[0] < s[local_max[0]] && s[23] < s[local_max[1]]);
}

proptest! {
    #[test]
    fn noiseless_profile_peak_is_exact(peak in 0.0f64..2000.0, horizon in 1usize..48) {
        let p = scaled_profile::<ChaCha8Rng>(horizon, peak, None);
        prop_assert_eq!(p.iter().copied().fold(0.0, f64::max), peak);
    }

    #[test]
    fn noisy_profile_peak_is_exact_and_noise_bounded(peak in 1.0f64..2000.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = scaled_profile(24, peak, Some(&mut rng));
        let top = p.iter().copied().fold(0.0, f64::max);
        prop_assert!((top - peak).abs() <= 1e-9 * peak);
        // each hour is within the noise band of the noiseless shape, after rescaling
        let base = scaled_profile::<ChaCha8Rng>(24, peak, None);
        for (a, b) in p.iter().zip(&base) {
            prop_assert!(*a <= b * 1.05 / 0.95 + 1e-9 && *a >= b * 0.95 / 1.05 - 1e-9);
        }
    }
}
