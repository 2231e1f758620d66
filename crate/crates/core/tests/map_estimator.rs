mod common;

use common::*;
use doamap::estimator::{map_estimate, MapConfig};
use doamap::scenario::PriorSpec;
use doamap::{generate_dataset, match_angles, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn noise_free_limit_lands_on_the_truth() {
    let scn = ScenarioConfig::from_json(
        r#"{
            "m": 6,
            "priors": [{"mu_deg": 0}, {"mu_deg": 0}],
            "true_thetas_fixed_deg": [-20, 25],
            "sigma2": 1e-8,
            "signal_power": 1.0,
            "N": 50, "M": 50
        }"#,
    )
    .unwrap()
    .build()
    .unwrap();
    let cfg = MapConfig::default();
    for seed in 0..5 {
        let ds = generate_dataset(&scn, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let res = map_estimate(&ds.y_bar, &ds.y, scn.priors(), scn.geom(), &cfg).unwrap();
        assert!(res.converged);
        let perm = match_angles(&res.theta_hat, &ds.thetas_realized).unwrap();
        for (&j, truth) in perm.iter().zip(&ds.thetas_realized) {
            let est = res.theta_hat[j];
            assert!((est - truth).abs() <= 2.0 * res.final_step, "{est} vs {truth}");
        }
        assert_eq!(res.monotone_violations(), 0);
    }
}

#[test]
fn overwhelming_priors_pin_the_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let m = 6;
    let y_bar = randn(m, 40, &mut rng);
    let y = randn(m, 40, &mut rng);
    let geom = doamap::ArrayGeometry::half_wavelength(m).unwrap();
    let mus = [-0.7, 0.123_456, 0.9];
    let priors: Vec<PriorSpec> = mus.iter().map(|&mu| PriorSpec::new(mu, 1e12).unwrap()).collect();
    let cfg = MapConfig::new(100, 6);
    let res = map_estimate(&y_bar, &y, &priors, &geom, &cfg).unwrap();
    for (est, mu) in res.theta_hat.iter().zip(&mus) {
        assert!((est - mu).abs() <= 0.5 * res.final_step * (1.0 + 1e-9), "{est} vs {mu}");
    }
}

#[test]
fn estimates_are_reproducible() {
    let scn = oracle_scenario();
    let ds = generate_dataset(&scn, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let cfg = MapConfig::new(200, 6);
    let a = map_estimate(&ds.y_bar, &ds.y, scn.priors(), scn.geom(), &cfg).unwrap();
    let b = map_estimate(&ds.y_bar, &ds.y, scn.priors(), scn.geom(), &cfg).unwrap();
    assert_eq!(a.theta_hat, b.theta_hat);
    assert_eq!(a.cost_trace, b.cost_trace);
}

#[test]
fn cost_never_increases_within_a_level() {
    let scn = oracle_scenario();
    let cfg = MapConfig::new(120, 8);
    for seed in 0..20 {
        let ds = generate_dataset(&scn, &mut ChaCha8Rng::seed_from_u64(100 + seed)).unwrap();
        let res = map_estimate(&ds.y_bar, &ds.y, scn.priors(), scn.geom(), &cfg).unwrap();
        assert_eq!(res.monotone_violations(), 0, "seed {seed}");
        assert_eq!(res.sweeps_per_level.len(), 8);
        assert_eq!(res.iterates.len(), res.sweeps_per_level.iter().sum::<usize>());
    }
}

#[test]
fn alternating_search_reaches_exhaustive_minimum_on_a_few_trials() {
    let scn = oracle_scenario();
    let hits = (0..10)
        .map(|t| oracle_trial(&scn, t))
        .filter(|o| (o.alternating - o.exhaustive).abs() < 1e-9)
        .count();
    assert!(hits >= 8, "{hits}/10");
}

#[test]
fn rejects_bad_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let geom = doamap::ArrayGeometry::half_wavelength(4).unwrap();
    let priors = [PriorSpec::noninformative()];
    // Too few noise-only snapshots for a nonsingular Q0.
    let err = map_estimate(&randn(4, 3, &mut rng), &randn(4, 10, &mut rng), &priors, &geom, &MapConfig::default());
    assert!(matches!(err, Err(doamap::Error::SingularNoiseCovariance { .. })));
    let bad_cfg = MapConfig::new(1, 3);
    assert!(map_estimate(&randn(4, 8, &mut rng), &randn(4, 10, &mut rng), &priors, &geom, &bad_cfg).is_err());
}
