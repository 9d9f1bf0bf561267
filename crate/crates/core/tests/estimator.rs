mod common;

use std::collections::BTreeMap;

use common::{bell, exact_xs, sampled_records, zero_product};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rmtoolbox::estimator::{
    all_partitions, entanglement_witness, estimate_purity, exact_x, mutual_information, unbiased_x,
    EntropyFlag, PurityEstimate, WitnessVerdict, DEFAULT_PARTITION_CAP,
};
use rmtoolbox::linalg::C64;
use rmtoolbox::qstate::{QuantumState, SubsystemMask};
use rmtoolbox::randunitary::{sample_cue, LocalUnitarySet, SeedStream};
use rmtoolbox::sampler::{calibrate_prep_lambda, outcome_probabilities, MeasurementRecord, NoiseModel, SCHEMA_VERSION};
use rmtoolbox::stats::{jackknife_mean, mean, sample_variance};

fn mask(sites: &[usize]) -> SubsystemMask {
    SubsystemMask::from_sites(sites).unwrap()
}

fn within(est: f64, exact: f64, stderr: f64, k: f64) -> bool {
    (est - exact).abs() <= k * stderr
}

/// All ways to place `n` shots into `bins` outcomes.
fn compositions(n: u64, bins: usize) -> Vec<Vec<u64>> {
    if bins == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|k| {
            compositions(n - k, bins - 1).into_iter().map(move |mut rest| {
                rest.insert(0, k);
                rest
            })
        })
        .collect()
}

fn factorial(n: u64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[test]
fn exhaustive_expectation_equals_exact_x() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let stream = SeedStream::new(31);
    for n_a in 1..=2usize {
        let state = QuantumState::random_mixed(n_a, 1, &mut rng).unwrap();
        let set = LocalUnitarySet::sample(&stream, 0, n_a);
        let p = outcome_probabilities(&state, &common::matrices(&set), None).unwrap();
        let exact = exact_x(&p, 2).unwrap();
        for n_m in 2..=4u64 {
            let mut e = 0.0;
            for c in compositions(n_m, 1 << n_a) {
                let weight = factorial(n_m)
                    * c.iter().zip(&p).map(|(&k, &q)| q.powi(k as i32) / factorial(k)).product::<f64>();
                let counts: BTreeMap<u64, u64> =
                    c.iter().enumerate().filter(|(_, k)| **k > 0).map(|(s, &k)| (s as u64, k)).collect();
                let rec = MeasurementRecord {
                    schema_version: SCHEMA_VERSION,
                    n_qubits: n_a,
                    unitary_index: 0,
                    time_s: 0.0,
                    pattern: 0,
                    n_shots: n_m,
                    angles: vec![[0.0; 3]; n_a],
                    counts,
                    matrices: None,
                };
                e += weight * unbiased_x(&rec, SubsystemMask::full(n_a)).unwrap();
            }
            assert!((e - exact).abs() < 1e-12, "N_A={n_a} N_M={n_m}: {e} vs {exact}");
        }
    }
}

#[test]
fn exact_probability_average_converges_to_purity() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let states = [QuantumState::haar_random(6, &mut rng).unwrap(), QuantumState::random_mixed(6, 3, &mut rng).unwrap()];
    for (k, state) in states.iter().enumerate() {
        for m in [mask(&[1]), mask(&[2, 5]), mask(&[1, 2, 3, 4]), SubsystemMask::full(6)] {
            let est = PurityEstimate::from_x(m, exact_xs(state, m, 1000, 100 + k as u64), u64::MAX).unwrap();
            let exact = state.partial_trace(m).unwrap().purity();
            assert!(within(est.purity, exact, est.stderr, 3.0), "{m}: {} ± {} vs {exact}", est.purity, est.stderr);
        }
    }
}

/// Haar mean of `X` for states with equal `Tr ρ²` but different subsystem purities.
#[test]
fn estimator_ignores_subsystem_purities() {
    let n_u = 100_000;
    let half = C64::new(0.5, 0.0);
    let rho_a = QuantumState::from_density_matrix(
        2,
        vec![
            half, C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0),
            C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0),
            C64::new(0.0, 0.0), C64::new(0.0, 0.0), half, C64::new(0.0, 0.0),
            C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0),
        ],
    )
    .unwrap();
    let rho_b = QuantumState::from_density_matrix(
        2,
        vec![
            half, C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0),
            C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0),
            C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0),
            C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), half,
        ],
    )
    .unwrap();
    let pairs = [
        (zero_product(2), bell()),
        (zero_product(3), QuantumState::ghz(3).unwrap()),
        (rho_a, rho_b),
    ];
    for (seed, (a, b)) in pairs.iter().enumerate() {
        assert!((a.purity() - b.purity()).abs() < 1e-12);
        let s1 = mask(&[1]);
        assert!((a.subsystem_renyi2(s1).unwrap() - b.subsystem_renyi2(s1).unwrap()).abs() > 0.5
            || (a.subsystem_renyi2(mask(&[2])).unwrap() - b.subsystem_renyi2(mask(&[2])).unwrap()).abs() > 0.5);
        for state in [a, b] {
            let full = SubsystemMask::full(state.n_qubits());
            let xs = exact_xs(state, full, n_u, 500 + seed as u64);
            let (m, se) = jackknife_mean(&xs);
            assert!(within(m, state.purity(), se, 5.0), "{m} ± {se} vs {}", state.purity());
        }
    }
}

#[test]
fn qutrit_weights_recover_purity() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let g: Vec<C64> = (0..9)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    // ρ = G G† / Tr
    let mut rho = vec![C64::new(0.0, 0.0); 9];
    for i in 0..3 {
        for j in 0..3 {
            rho[i * 3 + j] = (0..3).map(|k| g[i * 3 + k] * g[j * 3 + k].conj()).sum();
        }
    }
    let tr = (rho[0] + rho[4] + rho[8]).re;
    rho.iter_mut().for_each(|z| *z /= tr);
    let purity: f64 = rho.iter().map(|z| z.norm_sqr()).sum();
    let xs: Vec<f64> = (0..100_000)
        .map(|_| {
            let u = sample_cue(&mut rng, 3);
            let p: Vec<f64> = (0..3)
                .map(|s| {
                    let mut v = C64::new(0.0, 0.0);
                    for a in 0..3 {
                        for b in 0..3 {
                            v += u[s * 3 + a] * rho[a * 3 + b] * u[s * 3 + b].conj();
                        }
                    }
                    v.re
                })
                .collect();
            exact_x(&p, 3).unwrap()
        })
        .collect();
    let (m, se) = jackknife_mean(&xs);
    assert!(within(m, purity, se, 5.0), "{m} ± {se} vs {purity}");
}

#[test]
fn jackknife_error_matches_direct_standard_error() {
    let state = QuantumState::haar_random(3, &mut ChaCha8Rng::seed_from_u64(34)).unwrap();
    let recs = sampled_records(&state, 1000, 50, &NoiseModel::noiseless(3), 34);
    let est = estimate_purity(&recs, mask(&[1, 2])).unwrap();
    let direct = (sample_variance(&est.x_per_unitary) / 1000.0).sqrt();
    assert!((est.stderr / direct - 1.0).abs() < 0.2);
    assert!((est.purity - mean(&est.x_per_unitary)).abs() < 1e-12);
}

#[test]
fn maximally_mixed_qubit_estimates_one_half() {
    let state = QuantumState::maximally_mixed(1).unwrap();
    let recs = sampled_records(&state, 200, 20, &NoiseModel::noiseless(1), 35);
    let est = estimate_purity(&recs, SubsystemMask::full(1)).unwrap();
    assert!(within(est.purity, 0.5, est.stderr, 3.0));
}

#[test]
fn pure_product_state_estimates_unit_purity() {
    let state = zero_product(4);
    let recs = sampled_records(&state, 100, 512, &NoiseModel::noiseless(4), 36);
    let est = estimate_purity(&recs, SubsystemMask::full(4)).unwrap();
    assert!(within(est.purity, 1.0, est.stderr, 3.0), "{} ± {}", est.purity, est.stderr);
}

#[test]
fn partition_sweeps() {
    let recs = sampled_records(&zero_product(3), 300, 100, &NoiseModel::noiseless(3), 37);
    let all = all_partitions(&recs, DEFAULT_PARTITION_CAP).unwrap();
    assert_eq!(all.len(), 7);
    for (m, p) in &all {
        let e = &p.entropy;
        assert_eq!(e.flag, EntropyFlag::Ok);
        assert!(within(e.s2.unwrap(), 0.0, e.stderr_s2.unwrap(), 3.0), "{m}");
    }
    assert!(all_partitions(&recs, 2).is_err());

    let ghz = QuantumState::ghz(4).unwrap();
    let recs = sampled_records(&ghz, 500, 256, &NoiseModel::noiseless(4), 38);
    let all = all_partitions(&recs, DEFAULT_PARTITION_CAP).unwrap();
    assert_eq!(all.len(), 15);
    for (m, p) in &all {
        let expect = if m.len() == 4 { 0.0 } else { 1.0 };
        let e = &p.entropy;
        assert!(within(e.s2.unwrap(), expect, e.stderr_s2.unwrap(), 3.0), "{m}: {:?}", e.s2);
    }
}

#[test]
fn nested_masks_match_reduced_records() {
    let state = QuantumState::haar_random(4, &mut ChaCha8Rng::seed_from_u64(39)).unwrap();
    let recs = sampled_records(&state, 50, 40, &NoiseModel::noiseless(4), 39);
    let all = all_partitions(&recs, DEFAULT_PARTITION_CAP).unwrap();
    let sub = mask(&[2, 4]);
    let reduced: Vec<MeasurementRecord> = recs
        .iter()
        .map(|r| MeasurementRecord {
            n_qubits: 2,
            angles: sub.sites().iter().map(|&q| r.angles[q - 1]).collect(),
            counts: r.marginal_counts(sub).unwrap(),
            ..r.clone()
        })
        .collect();
    let direct = estimate_purity(&reduced, SubsystemMask::full(2)).unwrap();
    assert!((all[&sub].purity.purity - direct.purity).abs() < 1e-12);
    assert!((all[&mask(&[2])].purity.purity - estimate_purity(&reduced, mask(&[1])).unwrap().purity).abs() < 1e-12);
}

#[test]
fn mutual_information_examples() {
    let noiseless = |n| NoiseModel::noiseless(n);
    let recs = sampled_records(&zero_product(3), 300, 100, &noiseless(3), 40);
    let mi = mutual_information(&recs, mask(&[1]), mask(&[2, 3])).unwrap();
    assert!(within(mi.value, 0.0, mi.stderr, 3.0), "{mi:?}");

    let recs = sampled_records(&QuantumState::ghz(4).unwrap(), 500, 200, &noiseless(4), 41);
    let mi = mutual_information(&recs, mask(&[1]), mask(&[2])).unwrap();
    assert!(within(mi.value, 1.0, mi.stderr, 3.0), "{mi:?}");

    let recs = sampled_records(&bell(), 500, 200, &noiseless(2), 42);
    let mi = mutual_information(&recs, mask(&[1]), mask(&[2])).unwrap();
    assert!(within(mi.value, 2.0, mi.stderr, 3.0), "{mi:?}");
}

#[test]
fn entanglement_witness_examples() {
    let recs = sampled_records(&bell(), 300, 150, &NoiseModel::noiseless(2), 43);
    assert_eq!(entanglement_witness(&recs, mask(&[1])).unwrap().verdict, WitnessVerdict::Entangled);

    let recs = sampled_records(&zero_product(3), 300, 150, &NoiseModel::noiseless(3), 44);
    for a in [mask(&[1]), mask(&[1, 3])] {
        assert_eq!(entanglement_witness(&recs, a).unwrap().verdict, WitnessVerdict::Inconclusive);
    }

    // per-qubit noise of the 10-ion experiment: prep purity 0.92 over 10 qubits, γ = 0.019
    let ten = QuantumState::neel(10).unwrap();
    let l_prep = calibrate_prep_lambda(&ten, 0.92).unwrap();
    let ghz = QuantumState::ghz(4).unwrap().apply_depolarizing_all(&[l_prep; 4]).unwrap();
    let noise = NoiseModel { lambda_prep: vec![1.0; 4], lambda_meas: vec![1.0 - 0.019; 4] };
    let recs = sampled_records(&ghz, 500, 150, &noise, 45);
    for q in 1..=4 {
        let w = entanglement_witness(&recs, mask(&[q])).unwrap();
        assert_eq!(w.verdict, WitnessVerdict::Entangled, "site {q}: {w:?}");
    }
}

#[test]
fn concavity_of_disorder_entropies() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let purities: Vec<f64> = (0..35)
        .map(|_| QuantumState::haar_random(4, &mut rng).unwrap().subsystem_renyi2(mask(&[1, 2])).unwrap())
        .map(|s| 2f64.powf(-s))
        .collect();
    let of_avg = -mean(&purities).log2();
    let avg_of: f64 = purities.iter().map(|p| -p.log2()).sum::<f64>() / purities.len() as f64;
    assert!(of_avg <= avg_of + 1e-15);
}
