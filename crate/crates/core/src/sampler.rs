//! Simulated randomized-measurement protocol: noisy preparation, quench,
//! local random rotations, measurement depolarization and projective shots.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dynamics::{build_hamiltonian, QuenchConfig};
use crate::error::{Error, Result};
use crate::linalg::{Mat2, C64};
use crate::qstate::{apply_gate_vec, gather_bits, site_bit, QuantumState, SubsystemMask};
use crate::randunitary::{Domain, LocalUnitarySet, SeedStream, ZyzAngles};

/// Record schema understood by this version.
pub const SCHEMA_VERSION: u32 = 1;

/// Largest register a record may describe.
pub const MAX_RECORD_QUBITS: usize = 63;

/// Outcome histogram for one random-unitary setting.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub schema_version: u32,
    pub n_qubits: usize,
    pub unitary_index: u64,
    /// Evolution time, seconds.
    pub time_s: f64,
    /// Disorder pattern id (0 for clean runs).
    pub pattern: u64,
    pub n_shots: u64,
    /// Per-qubit `(θ₁, θ₂, θ₃)`, qubit 1 first.
    pub angles: Vec<[f64; 3]>,
    /// Basis index → count; zero counts omitted.
    pub counts: BTreeMap<u64, u64>,
    /// Optional per-qubit unitaries for externally ingested data.
    pub matrices: Option<Vec<Mat2>>,
}

impl MeasurementRecord {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_qubits;
        if n == 0 || n > MAX_RECORD_QUBITS {
            return Err(Error::InconsistentRecords(format!("n_qubits = {n} outside 1..={MAX_RECORD_QUBITS}")));
        }
        if self.schema_version > SCHEMA_VERSION {
            return Err(Error::UnsupportedSchema { found: self.schema_version, supported: SCHEMA_VERSION });
        }
        if self.angles.len() != n {
            return Err(Error::InconsistentRecords(format!("{} angle triples for {n} qubits", self.angles.len())));
        }
        if self.angles.iter().flatten().any(|a| !a.is_finite()) {
            return Err(Error::InconsistentRecords("non-finite angle".into()));
        }
        if let Some(m) = &self.matrices {
            if m.len() != n {
                return Err(Error::InconsistentRecords(format!("{} matrices for {n} qubits", m.len())));
            }
        }
        if !(self.time_s >= 0.0) || !self.time_s.is_finite() {
            return Err(Error::InconsistentRecords(format!("time {} must be finite and ≥ 0", self.time_s)));
        }
        let limit = 1u64 << n;
        let mut total = 0u64;
        for (&s, &c) in &self.counts {
            if s >= limit {
                return Err(Error::InconsistentRecords(format!("outcome {s} exceeds {n}-qubit register")));
            }
            if c == 0 {
                return Err(Error::InconsistentRecords("zero count stored".into()));
            }
            total = total
                .checked_add(c)
                .ok_or_else(|| Error::InconsistentRecords("count overflow".into()))?;
        }
        if total != self.n_shots {
            return Err(Error::InconsistentRecords(format!("counts sum to {total}, n_shots = {}", self.n_shots)));
        }
        Ok(())
    }

    /// Per-qubit unitaries: stored matrices if present, else recomposed angles.
    pub fn unitaries(&self) -> Vec<Mat2> {
        match &self.matrices {
            Some(m) => m.clone(),
            None => self
                .angles
                .iter()
                .map(|a| ZyzAngles::new(a[0], a[1], a[2]).recompose())
                .collect(),
        }
    }

    /// Counts marginalized onto `mask`, indexed by the compact subsystem index.
    pub fn marginal_counts(&self, mask: SubsystemMask) -> Result<BTreeMap<u64, u64>> {
        mask.check_within(self.n_qubits)?;
        let positions = mask.index_bits(self.n_qubits);
        let mut out = BTreeMap::new();
        for (&s, &c) in &self.counts {
            *out.entry(gather_bits(s, &positions)).or_insert(0) += c;
        }
        Ok(out)
    }
}

/// Per-qubit depolarizing strengths at preparation and measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub lambda_prep: Vec<f64>,
    pub lambda_meas: Vec<f64>,
}

impl NoiseModel {
    pub fn noiseless(n_qubits: usize) -> Self {
        NoiseModel { lambda_prep: vec![1.0; n_qubits], lambda_meas: vec![1.0; n_qubits] }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.lambda_prep.len() != n_qubits || self.lambda_meas.len() != n_qubits {
            return Err(Error::InvalidArgument(format!("noise model does not cover {n_qubits} qubits")));
        }
        if self.lambda_prep.iter().chain(&self.lambda_meas).any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::InvalidArgument("depolarizing λ outside [0, 1]".into()));
        }
        Ok(())
    }
}

impl From<&crate::dynamics::NoiseParams> for NoiseModel {
    fn from(p: &crate::dynamics::NoiseParams) -> Self {
        NoiseModel { lambda_prep: p.lambda_prep.clone(), lambda_meas: p.lambda_meas.clone() }
    }
}

/// `P(s) = ⟨s|UρU†|s⟩` for `U = u₁ ⊗ … ⊗ u_N`, optionally marginalized onto `mask`.
pub fn outcome_probabilities(
    state: &QuantumState,
    unitaries: &[Mat2],
    mask: Option<SubsystemMask>,
) -> Result<Vec<f64>> {
    let n = state.n_qubits();
    if unitaries.len() != n {
        return Err(Error::InvalidArgument(format!("{} unitaries for {n} qubits", unitaries.len())));
    }
    if let Some(m) = mask {
        m.check_within(n)?;
    }
    let probs = match state.amplitudes() {
        Some(psi) => {
            let mut v = psi.to_vec();
            for (q, u) in unitaries.iter().enumerate() {
                apply_gate_vec(&mut v, site_bit(n, q + 1) as usize, &u.0);
            }
            v.iter().map(|a| a.norm_sqr()).collect()
        }
        None => rotated_diagonal(state.density().expect("mixed"), n, unitaries),
    };
    Ok(match mask {
        Some(m) => marginalize(&probs, n, m),
        None => probs,
    })
}

/// Diagonal of `UρU†`, contracting one qubit at a time from the most
/// significant bit. Layout of the working tensor: `[outcome prefix][row][col]`.
fn rotated_diagonal(rho: &[C64], n: usize, unitaries: &[Mat2]) -> Vec<f64> {
    let mut t = rho.to_vec();
    let mut prefixes = 1usize;
    let mut r = 1usize << n;
    for u in unitaries {
        let m = &u.0;
        let h = r / 2;
        let mut next = vec![C64::new(0.0, 0.0); prefixes * 2 * h * h];
        for p in 0..prefixes {
            let block = &t[p * r * r..(p + 1) * r * r];
            for s in 0..2 {
                let (u0, u1) = (m[s][0], m[s][1]);
                let (c0, c1) = (u0.conj(), u1.conj());
                let out = &mut next[(p * 2 + s) * h * h..(p * 2 + s + 1) * h * h];
                for ro in 0..h {
                    let top = &block[ro * r..ro * r + r];
                    let bot = &block[(h + ro) * r..(h + ro) * r + r];
                    let dst = &mut out[ro * h..ro * h + h];
                    for co in 0..h {
                        let a = u0 * top[co] + u1 * bot[co];
                        let b = u0 * top[h + co] + u1 * bot[h + co];
                        dst[co] = a * c0 + b * c1;
                    }
                }
            }
        }
        t = next;
        prefixes *= 2;
        r = h;
    }
    t.iter().map(|z| z.re.max(0.0)).collect()
}

/// Sum a full-register distribution onto the sites of `mask`.
pub fn marginalize(probs: &[f64], n_qubits: usize, mask: SubsystemMask) -> Vec<f64> {
    let positions = mask.index_bits(n_qubits);
    let mut out = vec![0.0; 1usize << positions.len()];
    for (s, p) in probs.iter().enumerate() {
        out[gather_bits(s as u64, &positions) as usize] += p;
    }
    out
}

/// Per-qubit depolarizing channel applied before a z-basis readout: each
/// outcome bit is kept with weight `(1+λ)/2` and flipped with `(1−λ)/2`.
pub fn apply_measurement_depolarizing(probs: &mut [f64], n_qubits: usize, lambdas: &[f64]) {
    for (q, &l) in lambdas.iter().enumerate() {
        if l == 1.0 {
            continue;
        }
        let bit = site_bit(n_qubits, q + 1) as usize;
        let (keep, flip) = ((1.0 + l) / 2.0, (1.0 - l) / 2.0);
        for s in 0..probs.len() {
            if s & bit == 0 {
                let (a, b) = (probs[s], probs[s | bit]);
                probs[s] = keep * a + flip * b;
                probs[s | bit] = flip * a + keep * b;
            }
        }
    }
}

/// Multinomial draw by sequential binomial conditioning.
pub fn sample_counts<R: Rng + ?Sized>(probs: &[f64], n_shots: u64, rng: &mut R) -> BTreeMap<u64, u64> {
    let mut counts = BTreeMap::new();
    let Some(last) = probs.iter().rposition(|&p| p > 0.0) else {
        return counts;
    };
    let mut remaining = n_shots;
    let mut mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (s, &p) in probs.iter().enumerate().take(last + 1) {
        if remaining == 0 {
            break;
        }
        let p = p.max(0.0);
        let k = if s == last || p >= mass {
            remaining
        } else if p == 0.0 {
            0
        } else {
            Binomial::new(remaining, (p / mass).min(1.0)).expect("valid binomial").sample(rng)
        };
        if k > 0 {
            counts.insert(s as u64, k);
            remaining -= k;
        }
        mass -= p;
    }
    counts
}

/// One measurement setting: rotate, depolarize, draw `n_shots` outcomes.
pub fn sample_record<R: Rng + ?Sized>(
    state: &QuantumState,
    unitaries: &LocalUnitarySet,
    n_shots: u64,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    let n = state.n_qubits();
    if n_shots < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n_shots as usize });
    }
    noise.validate(n)?;
    let mats: Vec<Mat2> = unitaries.unitaries.iter().map(|u| u.matrix).collect();
    let mut probs = outcome_probabilities(state, &mats, None)?;
    apply_measurement_depolarizing(&mut probs, n, &noise.lambda_meas);
    Ok(MeasurementRecord {
        schema_version: SCHEMA_VERSION,
        n_qubits: n,
        unitary_index: unitaries.unitary_index,
        time_s: 0.0,
        pattern: 0,
        n_shots,
        angles: unitaries.angles().iter().map(|a| a.to_array()).collect(),
        counts: sample_counts(&probs, n_shots, rng),
        matrices: None,
    })
}

/// Run parameters and digests carried alongside a record set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub tool_version: String,
    pub master_seed: u64,
    pub config_sha256: String,
    pub n_unitaries: usize,
    pub n_shots: u64,
    pub n_patterns: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordSet {
    /// Ordered by time, then pattern, then unitary.
    pub records: Vec<MeasurementRecord>,
    pub provenance: Provenance,
}

/// Protocol sizes and optional disorder patterns (each a per-site Δ vector).
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSpec {
    pub n_unitaries: usize,
    pub n_shots: u64,
    /// Empty: a single pattern taken from the quench configuration.
    pub patterns: Vec<Vec<f64>>,
}

/// Full simulated experiment from the Néel state.
pub fn run_protocol(config: &QuenchConfig, spec: &ProtocolSpec) -> Result<RecordSet> {
    let initial = QuantumState::neel(config.n_qubits)?;
    run_protocol_from(&initial, config, spec)
}

/// Full simulated experiment from an arbitrary initial state.
///
/// Unitary sets are indexed `pattern·N_U + u` and shared across times.
pub fn run_protocol_from(initial: &QuantumState, config: &QuenchConfig, spec: &ProtocolSpec) -> Result<RecordSet> {
    config.validate()?;
    let n = config.n_qubits;
    if initial.n_qubits() != n {
        return Err(Error::InvalidArgument(format!("initial state has {} qubits, config {n}", initial.n_qubits())));
    }
    if spec.n_unitaries < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: spec.n_unitaries });
    }
    if spec.n_shots < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: spec.n_shots as usize });
    }
    let patterns: Vec<Vec<f64>> =
        if spec.patterns.is_empty() { vec![config.disorder.clone()] } else { spec.patterns.clone() };
    if patterns.iter().any(|p| p.len() != n) {
        return Err(Error::Config("disorder pattern length differs from n_qubits".into()));
    }
    let noise = NoiseModel::from(&config.noise);
    let prepared = if noise.lambda_prep.iter().all(|&l| l == 1.0) {
        initial.clone()
    } else {
        initial.apply_depolarizing_all(&noise.lambda_prep)?
    };
    let stream = SeedStream::new(config.master_seed);
    let n_u = spec.n_unitaries as u64;
    let sets: Vec<Vec<LocalUnitarySet>> = (0..patterns.len() as u64)
        .map(|pat| {
            (0..n_u)
                .into_par_iter()
                .map(|u| LocalUnitarySet::sample(&stream, pat * n_u + u, n))
                .collect()
        })
        .collect();

    let mut evolved: Vec<Vec<QuantumState>> = vec![Vec::new(); config.times.len()];
    for (pat, delta) in patterns.iter().enumerate() {
        let mut cfg = config.clone();
        cfg.disorder = delta.clone();
        let h = build_hamiltonian(&cfg)?;
        for (ti, &t) in config.times.iter().enumerate() {
            evolved[ti].push(h.evolve(&prepared, t)?);
            debug_assert_eq!(evolved[ti].len(), pat + 1);
        }
    }

    let mut records = Vec::with_capacity(config.times.len() * patterns.len() * spec.n_unitaries);
    for (ti, &t) in config.times.iter().enumerate() {
        for (pat, state) in evolved[ti].iter().enumerate() {
            let batch: Result<Vec<MeasurementRecord>> = sets[pat]
                .par_iter()
                .enumerate()
                .map(|(u, set)| {
                    let mut rng = stream.rng(Domain::Shots, [ti as u64, pat as u64, u as u64, 0]);
                    let mut rec = sample_record(state, set, spec.n_shots, &noise, &mut rng)?;
                    rec.time_s = t;
                    rec.pattern = pat as u64;
                    Ok(rec)
                })
                .collect();
            records.extend(batch?);
        }
    }

    Ok(RecordSet {
        records,
        provenance: Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.master_seed,
            config_sha256: config_digest(config, spec),
            n_unitaries: spec.n_unitaries,
            n_shots: spec.n_shots,
            n_patterns: patterns.len(),
        },
    })
}

fn config_digest(config: &QuenchConfig, spec: &ProtocolSpec) -> String {
    let payload = serde_json::json!({
        "config": config,
        "n_unitaries": spec.n_unitaries,
        "n_shots": spec.n_shots,
        "patterns": spec.patterns,
    });
    hex::encode(Sha256::digest(payload.to_string().as_bytes()))
}

/// Uniform per-qubit `λ_prep` giving `state` the global purity `target`
/// after preparation depolarization, by bisection.
pub fn calibrate_prep_lambda(state: &QuantumState, target: f64) -> Result<f64> {
    let n = state.n_qubits();
    let floor = 0.5f64.powi(n as i32);
    let top = state.purity();
    if !(target > floor && target <= top + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "target purity {target} outside ({floor}, {top}]"
        )));
    }
    let purity_at = |l: f64| -> Result<f64> { Ok(state.apply_depolarizing_all(&vec![l; n])?.purity()) };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if purity_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
