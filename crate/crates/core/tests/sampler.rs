mod common;

use common::{sampled_records, zero_product};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmtoolbox::dynamics::QuenchConfig;
use rmtoolbox::estimator::estimate_purity;
use rmtoolbox::qstate::{QuantumState, SubsystemMask};
use rmtoolbox::randunitary::{LocalUnitarySet, SeedStream};
use rmtoolbox::sampler::{run_protocol, sample_record, NoiseModel, ProtocolSpec};
use rmtoolbox::stats::sample_variance;

#[test]
fn neel_at_time_zero_has_unit_purity() {
    let mut cfg = QuenchConfig::new(4, 420.0, 1.24);
    cfg.master_seed = 50;
    let set = run_protocol(&cfg, &ProtocolSpec { n_unitaries: 300, n_shots: 256, patterns: vec![] }).unwrap();
    assert_eq!(set.records.len(), 300);
    let est = estimate_purity(&set.records, SubsystemMask::full(4)).unwrap();
    assert!((est.purity - 1.0).abs() <= 3.0 * est.stderr, "{} ± {}", est.purity, est.stderr);
}

#[test]
fn measurement_noise_reduces_ten_qubit_purity() {
    let lambda = 1.0 - 0.019;
    let noise = NoiseModel { lambda_prep: vec![1.0; 10], lambda_meas: vec![lambda; 10] };
    let recs = sampled_records(&zero_product(10), 500, 150, &noise, 51);
    let est = estimate_purity(&recs, SubsystemMask::full(10)).unwrap();
    let exact = ((1.0 + lambda * lambda) / 2.0f64).powi(10);
    assert!((exact - 0.83).abs() < 0.01);
    assert!((est.purity - exact).abs() <= 3.0 * est.stderr, "{} ± {} vs {exact}", est.purity, est.stderr);
}

#[test]
fn pure_states_spread_more_than_maximally_mixed() {
    let n = 3;
    let pure = sampled_records(&zero_product(n), 400, 100, &NoiseModel::noiseless(n), 52);
    let mixed = sampled_records(&QuantumState::maximally_mixed(n).unwrap(), 400, 100, &NoiseModel::noiseless(n), 52);
    let full = SubsystemMask::full(n);
    let (p, m) = (estimate_purity(&pure, full).unwrap(), estimate_purity(&mixed, full).unwrap());
    assert!((p.purity - 1.0).abs() <= 3.0 * p.stderr);
    assert!((m.purity - 0.125).abs() <= 3.0 * m.stderr);
    assert!(sample_variance(&p.x_per_unitary) > sample_variance(&m.x_per_unitary));
}

#[test]
fn purity_decreases_with_measurement_noise() {
    let state = QuantumState::haar_random(4, &mut ChaCha8Rng::seed_from_u64(53)).unwrap();
    let mask = SubsystemMask::range(1, 3).unwrap();
    let mut prev: Option<(f64, f64)> = None;
    for lambda in [1.0, 0.95, 0.9, 0.8, 0.6] {
        let noise = NoiseModel { lambda_prep: vec![1.0; 4], lambda_meas: vec![lambda; 4] };
        let est = estimate_purity(&sampled_records(&state, 400, 100, &noise, 53), mask).unwrap();
        if let Some((p, se)) = prev {
            let combined = (se * se + est.stderr * est.stderr).sqrt();
            assert!(est.purity <= p + 3.0 * combined, "λ = {lambda}: {} after {p}", est.purity);
        }
        prev = Some((est.purity, est.stderr));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_records_are_valid(
        n in 1usize..=6,
        n_m in 2u64..300,
        lambda in 0.0f64..=1.0,
        seed in any::<u64>(),
        mixed in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = if mixed {
            QuantumState::random_mixed(n, 1, &mut rng).unwrap()
        } else {
            QuantumState::haar_random(n, &mut rng).unwrap()
        };
        let set = LocalUnitarySet::sample(&SeedStream::new(seed), seed % 1000, n);
        let noise = NoiseModel { lambda_prep: vec![1.0; n], lambda_meas: vec![lambda; n] };
        let rec = sample_record(&state, &set, n_m, &noise, &mut rng).unwrap();
        prop_assert!(rec.validate().is_ok());
        prop_assert_eq!(rec.counts.values().sum::<u64>(), n_m);
        prop_assert_eq!(rec.angles.len(), n);
    }
}
