//! Purity and second-order Rényi entropy estimation from randomized
//! measurements.
//!
//! For one unitary setting with outcome counts `n_s` (total `N_M`) on an
//! `N_A`-site subsystem, the unbiased estimator of
//! `X = d^{N_A} Σ_{s,s'} (−d)^{−D[s,s']} P(s)P(s')` is
//!
//! ```text
//! X̂ = d^{N_A} / (N_M(N_M−1)) · ( Σ_{s,s'} (−d)^{−D[s,s']} n_s n_{s'} − N_M )
//! ```
//!
//! and the mean of `X` over Haar-random local unitaries is `Tr ρ_A²`.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qstate::SubsystemMask;
use crate::sampler::MeasurementRecord;
use crate::stats::jackknife;

/// Dense kernel path limit on `d^{N_A}`.
pub const DENSE_LIMIT: usize = 1 << 24;

/// Default cap on the register size for all-partition sweeps.
pub const DEFAULT_PARTITION_CAP: usize = 12;

/// `Σ_{s,s'} (−d)^{−D[s,s']} v_s v_{s'}` for a dense vector of length
/// `d^{N_A}`, via the per-site kernel `K_aa = 1`, `K_ab = −1/d`.
pub fn kernel_transform(v: &[f64], d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("local dimension {d} < 2")));
    }
    let mut len = 1usize;
    let mut n_a = 0usize;
    while len < v.len() {
        len *= d;
        n_a += 1;
    }
    if len != v.len() || v.is_empty() {
        return Err(Error::InvalidArgument(format!("vector length {} is not a power of {d}", v.len())));
    }
    let off = -1.0 / d as f64;
    let mut w = v.to_vec();
    let mut stride = 1usize;
    for _ in 0..n_a {
        // (K w)_a = w_a − (1/d) Σ_{b≠a} w_b = (1 + 1/d) w_a − (1/d) Σ_b w_b
        for base in 0..len {
            if (base / stride) % d != 0 {
                continue;
            }
            let total: f64 = (0..d).map(|a| w[base + a * stride]).sum();
            for a in 0..d {
                let i = base + a * stride;
                w[i] = (1.0 - off) * w[i] + off * total;
            }
        }
        stride *= d;
    }
    Ok(v.iter().zip(&w).map(|(a, b)| a * b).sum())
}

/// `X` evaluated on exact outcome probabilities (no shot noise).
pub fn exact_x(probs: &[f64], d: usize) -> Result<f64> {
    let dim = probs.len() as f64;
    Ok(dim * kernel_transform(probs, d)?)
}

/// Unbiased `X̂` from a dense count vector over `d^{N_A}` outcomes.
pub fn unbiased_x_from_counts(counts: &[f64], d: usize) -> Result<f64> {
    let n_m: f64 = counts.iter().sum();
    if n_m < 2.0 {
        return Err(Error::InsufficientSamples { needed: 2, got: n_m as usize });
    }
    let s = kernel_transform(counts, d)?;
    Ok(counts.len() as f64 * (s - n_m) / (n_m * (n_m - 1.0)))
}

/// Which evaluation strategy `unbiased_x` used or should use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelPath {
    Dense,
    Sparse,
}

/// Dense when `2^{N_A} ≤ 2²⁴` and `2^{N_A} ≤ 64·M²` for `M` distinct outcomes.
pub fn choose_path(n_a: usize, distinct: usize) -> KernelPath {
    if n_a >= 63 {
        return KernelPath::Sparse;
    }
    let dim = 1u128 << n_a;
    if dim <= DENSE_LIMIT as u128 && dim <= 64 * (distinct as u128).pow(2) {
        KernelPath::Dense
    } else {
        KernelPath::Sparse
    }
}

fn prepare(record: &MeasurementRecord, mask: SubsystemMask) -> Result<BTreeMap<u64, u64>> {
    if mask.is_empty() {
        return Err(Error::InvalidMask("empty subsystem".into()));
    }
    if record.n_shots < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: record.n_shots as usize });
    }
    record.marginal_counts(mask)
}

fn finish(sum: f64, n_a: usize, n_m: u64) -> f64 {
    let n = n_m as f64;
    2f64.powi(n_a as i32) * (sum - n) / (n * (n - 1.0))
}

/// Unbiased per-unitary `X̂` on `mask`, choosing the cheaper kernel path.
pub fn unbiased_x(record: &MeasurementRecord, mask: SubsystemMask) -> Result<f64> {
    let counts = prepare(record, mask)?;
    let sum = match choose_path(mask.len(), counts.len()) {
        KernelPath::Dense => dense_sum(&counts, mask.len()),
        KernelPath::Sparse => sparse_sum(&counts, mask.len()),
    };
    Ok(finish(sum, mask.len(), record.n_shots))
}

/// `X̂` through the dense per-axis kernel transform.
pub fn unbiased_x_dense(record: &MeasurementRecord, mask: SubsystemMask) -> Result<f64> {
    if mask.len() > 24 {
        return Err(Error::TooLarge { what: "dense kernel", n: mask.len(), limit: 24 });
    }
    let counts = prepare(record, mask)?;
    Ok(finish(dense_sum(&counts, mask.len()), mask.len(), record.n_shots))
}

/// `X̂` by pairwise iteration over the distinct observed outcomes.
pub fn unbiased_x_sparse(record: &MeasurementRecord, mask: SubsystemMask) -> Result<f64> {
    let counts = prepare(record, mask)?;
    Ok(finish(sparse_sum(&counts, mask.len()), mask.len(), record.n_shots))
}

fn dense_sum(counts: &BTreeMap<u64, u64>, n_a: usize) -> f64 {
    let mut v = vec![0.0; 1usize << n_a];
    for (&s, &c) in counts {
        v[s as usize] = c as f64;
    }
    kernel_transform(&v, 2).expect("power-of-two length")
}

fn sparse_sum(counts: &BTreeMap<u64, u64>, n_a: usize) -> f64 {
    let weights: Vec<f64> = (0..=n_a).map(|k| (-0.5f64).powi(k as i32)).collect();
    let items: Vec<(u64, f64)> = counts.iter().map(|(&s, &c)| (s, c as f64)).collect();
    let mut total = 0.0;
    for (i, &(s, a)) in items.iter().enumerate() {
        total += a * a;
        for &(t, b) in &items[i + 1..] {
            total += 2.0 * weights[(s ^ t).count_ones() as usize] * a * b;
        }
    }
    total
}

/// Mean of per-unitary `X̂` with a delete-one jackknife error.
#[derive(Clone, Debug, PartialEq)]
pub struct PurityEstimate {
    pub mask: SubsystemMask,
    pub x_per_unitary: Vec<f64>,
    pub purity: f64,
    pub stderr: f64,
    pub n_unitaries: usize,
    pub n_shots: u64,
}

impl PurityEstimate {
    /// Aggregate precomputed per-unitary values (e.g. from exact probabilities).
    pub fn from_x(mask: SubsystemMask, x_per_unitary: Vec<f64>, n_shots: u64) -> Result<Self> {
        if x_per_unitary.len() < 2 {
            return Err(Error::InsufficientSamples { needed: 2, got: x_per_unitary.len() });
        }
        let (purity, stderr) = jackknife(&[&x_per_unitary], |m| m[0]);
        Ok(PurityEstimate { mask, n_unitaries: x_per_unitary.len(), x_per_unitary, purity, stderr, n_shots })
    }
}

/// Check that records describe one register with one shot budget.
pub fn check_records(records: &[MeasurementRecord]) -> Result<(usize, u64)> {
    if records.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: records.len() });
    }
    let (n, m) = (records[0].n_qubits, records[0].n_shots);
    for (i, r) in records.iter().enumerate() {
        if r.n_qubits != n {
            return Err(Error::InconsistentRecords(format!("record {i} has {} qubits, expected {n}", r.n_qubits)));
        }
        if r.n_shots != m {
            return Err(Error::InconsistentRecords(format!("record {i} has {} shots, expected {m}", r.n_shots)));
        }
    }
    Ok((n, m))
}

fn x_values(records: &[MeasurementRecord], mask: SubsystemMask) -> Result<Vec<f64>> {
    records.par_iter().map(|r| unbiased_x(r, mask)).collect()
}

/// Purity of `mask` from one record per random unitary.
pub fn estimate_purity(records: &[MeasurementRecord], mask: SubsystemMask) -> Result<PurityEstimate> {
    let (n, m) = check_records(records)?;
    mask.check_within(n)?;
    PurityEstimate::from_x(mask, x_values(records, mask)?, m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntropyFlag {
    Ok,
    NonpositivePurity,
}

impl EntropyFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            EntropyFlag::Ok => "ok",
            EntropyFlag::NonpositivePurity => "nonpositive_purity",
        }
    }
}

/// `S⁽²⁾ = −log₂ Tr ρ²` with first-order error propagation.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyEstimate {
    pub mask: SubsystemMask,
    pub s2: Option<f64>,
    pub stderr_s2: Option<f64>,
    pub flag: EntropyFlag,
}

pub fn estimate_entropy(p: &PurityEstimate) -> EntropyEstimate {
    if p.purity > 0.0 {
        EntropyEstimate {
            mask: p.mask,
            s2: Some(-p.purity.log2()),
            stderr_s2: Some(p.stderr / (p.purity * std::f64::consts::LN_2)),
            flag: EntropyFlag::Ok,
        }
    } else {
        EntropyEstimate { mask: p.mask, s2: None, stderr_s2: None, flag: EntropyFlag::NonpositivePurity }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionEstimate {
    pub purity: PurityEstimate,
    pub entropy: EntropyEstimate,
}

/// Estimates for the given masks, all from the same records.
pub fn estimate_partitions(records: &[MeasurementRecord], masks: &[SubsystemMask]) -> Result<Vec<PartitionEstimate>> {
    let (n, _) = check_records(records)?;
    for m in masks {
        m.check_within(n)?;
    }
    masks
        .par_iter()
        .map(|&m| {
            let purity = estimate_purity(records, m)?;
            let entropy = estimate_entropy(&purity);
            Ok(PartitionEstimate { purity, entropy })
        })
        .collect()
}

/// Every nonempty subsystem of the register, ordered by mask bits.
pub fn all_partitions(records: &[MeasurementRecord], cap: usize) -> Result<BTreeMap<SubsystemMask, PartitionEstimate>> {
    let (n, _) = check_records(records)?;
    if n > cap {
        return Err(Error::TooLarge { what: "all-partition sweep", n, limit: cap });
    }
    let masks: Vec<SubsystemMask> = (1..(1u64 << n)).map(|b| SubsystemMask::new(b).expect("nonzero")).collect();
    let est = estimate_partitions(records, &masks)?;
    Ok(masks.into_iter().zip(est).collect())
}

/// Value and jackknife error of a derived entropy combination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Combined {
    pub value: f64,
    pub stderr: f64,
}

/// `I⁽²⁾(A:B) = S(A) + S(B) − S(AB)`, jackknifed through the whole expression.
pub fn mutual_information(records: &[MeasurementRecord], a: SubsystemMask, b: SubsystemMask) -> Result<Combined> {
    if !a.is_disjoint(b) {
        return Err(Error::InvalidMask(format!("subsystems {a} and {b} overlap")));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidMask("empty subsystem".into()));
    }
    let (n, _) = check_records(records)?;
    a.union(b).check_within(n)?;
    let xa = x_values(records, a)?;
    let xb = x_values(records, b)?;
    let xab = x_values(records, a.union(b))?;
    let f = |m: &[f64]| -m[0].log2() - m[1].log2() + m[2].log2();
    let (value, stderr) = jackknife(&[&xa, &xb, &xab], f);
    if !value.is_finite() {
        return Err(Error::InvalidState("nonpositive purity estimate in mutual information".into()));
    }
    Ok(Combined { value, stderr })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WitnessVerdict {
    Entangled,
    Inconclusive,
}

/// Outcome of the `S(A) > S(full)` test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Witness {
    pub verdict: WitnessVerdict,
    /// `S(A) − S(full)`.
    pub difference: Combined,
    /// Difference in units of its standard error.
    pub margin_sigma: f64,
}

/// Entangled iff `S(A) − S(full)` exceeds three jackknife standard errors.
pub fn entanglement_witness(records: &[MeasurementRecord], a: SubsystemMask) -> Result<Witness> {
    let (n, _) = check_records(records)?;
    a.check_within(n)?;
    let full = SubsystemMask::full(n);
    if a.is_empty() || a == full {
        return Err(Error::InvalidMask(format!("{a} is not a proper subsystem")));
    }
    let xa = x_values(records, a)?;
    let xf = x_values(records, full)?;
    let (value, stderr) = jackknife(&[&xa, &xf], |m| -m[0].log2() + m[1].log2());
    let difference = Combined { value, stderr };
    if !value.is_finite() {
        return Ok(Witness { verdict: WitnessVerdict::Inconclusive, difference, margin_sigma: 0.0 });
    }
    let margin_sigma = if stderr > 0.0 { value / stderr } else if value > 0.0 { f64::INFINITY } else { 0.0 };
    let verdict = if margin_sigma > 3.0 { WitnessVerdict::Entangled } else { WitnessVerdict::Inconclusive };
    Ok(Witness { verdict, difference, margin_sigma })
}

/// Pooled disorder average over `(pattern, unitary)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderAverage {
    /// Estimate of the disorder-averaged purity with jackknife over all pairs.
    pub pooled: PurityEstimate,
    /// `−log₂` of the averaged purity.
    pub entropy_of_average: EntropyEstimate,
    /// Mean of per-pattern entropies, when every pattern's purity is positive.
    pub mean_pattern_entropy: Option<f64>,
    pub n_patterns: usize,
}

/// Disorder average of the purity of `mask`; records are grouped by their
/// `pattern` field.
pub fn disorder_average(records: &[MeasurementRecord], mask: SubsystemMask) -> Result<DisorderAverage> {
    let (n, m) = check_records(records)?;
    mask.check_within(n)?;
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(r.pattern).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: groups.len() });
    }
    let times: BTreeSet<u64> = records.iter().map(|r| r.time_s.to_bits()).collect();
    if times.len() > 1 {
        return Err(Error::InconsistentRecords("disorder average over records from several times".into()));
    }
    let xs = x_values(records, mask)?;
    let mean_pattern_entropy = groups
        .values()
        .map(|idx| idx.iter().map(|&i| xs[i]).sum::<f64>() / idx.len() as f64)
        .map(|p| if p > 0.0 { Some(-p.log2()) } else { None })
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64);
    let pooled = PurityEstimate::from_x(mask, xs, m)?;
    let entropy_of_average = estimate_entropy(&pooled);
    Ok(DisorderAverage { pooled, entropy_of_average, mean_pattern_entropy, n_patterns: groups.len() })
}

/// Group records by evolution time, preserving order inside each group.
pub fn group_by_time(records: &[MeasurementRecord]) -> Vec<(f64, Vec<MeasurementRecord>)> {
    let mut out: Vec<(f64, Vec<MeasurementRecord>)> = Vec::new();
    let mut index: BTreeMap<u64, usize> = BTreeMap::new();
    for r in records {
        let slot = *index.entry(r.time_s.to_bits()).or_insert_with(|| {
            out.push((r.time_s, Vec::new()));
            out.len() - 1
        });
        out[slot].1.push(r.clone());
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}
