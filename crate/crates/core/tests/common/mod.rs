#![allow(dead_code)]

use rmtoolbox::estimator::exact_x;
use rmtoolbox::linalg::Mat2;
use rmtoolbox::qstate::{QuantumState, SubsystemMask};
use rmtoolbox::randunitary::{Domain, LocalUnitarySet, SeedStream};
use rmtoolbox::sampler::{outcome_probabilities, sample_record, MeasurementRecord, NoiseModel};

pub fn matrices(set: &LocalUnitarySet) -> Vec<Mat2> {
    set.unitaries.iter().map(|u| u.matrix).collect()
}

/// Per-unitary `X` from exact outcome probabilities (no shot noise).
pub fn exact_xs(state: &QuantumState, mask: SubsystemMask, n_u: u64, seed: u64) -> Vec<f64> {
    let stream = SeedStream::new(seed);
    (0..n_u)
        .map(|u| {
            let set = LocalUnitarySet::sample(&stream, u, state.n_qubits());
            let p = outcome_probabilities(state, &matrices(&set), Some(mask)).unwrap();
            exact_x(&p, 2).unwrap()
        })
        .collect()
}

/// Sampled records, one per random unitary.
pub fn sampled_records(
    state: &QuantumState,
    n_u: u64,
    n_m: u64,
    noise: &NoiseModel,
    seed: u64,
) -> Vec<MeasurementRecord> {
    let stream = SeedStream::new(seed);
    (0..n_u)
        .map(|u| {
            let set = LocalUnitarySet::sample(&stream, u, state.n_qubits());
            let mut rng = stream.rng(Domain::Test, [u, 0, 0, 0]);
            sample_record(state, &set, n_m, noise, &mut rng).unwrap()
        })
        .collect()
}

pub fn bell() -> QuantumState {
    QuantumState::ghz(2).unwrap()
}

pub fn zero_product(n: usize) -> QuantumState {
    QuantumState::basis(n, 0).unwrap()
}
