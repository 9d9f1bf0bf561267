//! Experiment harnesses: measurement-budget scaling, disorder-averaged
//! entanglement growth and randomized-measurement diagnostics.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::beta::beta_reg;

use crate::dynamics::{build_hamiltonian, draw_disorder, QuenchConfig};
use crate::error::{Error, Result};
use crate::estimator::{disorder_average, estimate_entropy, estimate_purity, unbiased_x, EntropyEstimate};
use crate::linalg::Mat2;
use crate::qstate::{site_bit, QuantumState, SubsystemMask};
use crate::randunitary::{Domain, LocalUnitary, LocalUnitarySet, SeedStream};
use crate::sampler::{outcome_probabilities, run_protocol, sample_counts, MeasurementRecord, NoiseModel, ProtocolSpec};
use crate::stats::{correlation_p_value, fisher_statistic, ks_critical_1pct, ks_statistic, linear_fit, pearson};

/// Largest subsystem in the scaling study (mixed states need `2·N_A` qubits).
pub const MAX_SCALING_QUBITS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateFamily {
    ProductPure,
    HaarPure,
    HalfHaarMixed,
}

impl StateFamily {
    pub fn name(self) -> &'static str {
        match self {
            StateFamily::ProductPure => "product_pure",
            StateFamily::HaarPure => "haar_pure",
            StateFamily::HalfHaarMixed => "half_haar_mixed",
        }
    }

    /// Representative state on `n_a` qubits.
    pub fn state<R: Rng + ?Sized>(self, n_a: usize, rng: &mut R) -> Result<QuantumState> {
        match self {
            StateFamily::ProductPure => QuantumState::basis(n_a, 0),
            StateFamily::HaarPure => QuantumState::haar_random(n_a, rng),
            StateFamily::HalfHaarMixed => QuantumState::random_mixed(n_a, n_a, rng),
        }
    }
}

impl std::str::FromStr for StateFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product_pure" => Ok(StateFamily::ProductPure),
            "haar_pure" => Ok(StateFamily::HaarPure),
            "half_haar_mixed" => Ok(StateFamily::HalfHaarMixed),
            _ => Err(Error::Config(format!("unknown state family `{s}`"))),
        }
    }
}

/// `(N_U, N_M)` optimization grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub n_unitaries: Vec<usize>,
    pub n_shots: Vec<u64>,
}

impl Grid {
    /// `N_U` quadratically and `N_M` logarithmically spaced over `4..=1024`.
    pub fn new(points: usize) -> Self {
        assert!(points >= 2);
        let step = (points - 1) as f64;
        let n_unitaries = (0..points)
            .map(|k| (2.0 + 30.0 * k as f64 / step).powi(2).round() as usize)
            .collect();
        let n_shots = (0..points)
            .map(|k| (4.0 * 256f64.powf(k as f64 / step)).round() as u64)
            .collect();
        Grid { n_unitaries, n_shots }
    }

    pub fn desk() -> Self {
        Self::new(12)
    }

    pub fn full() -> Self {
        Self::new(50)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingConfig {
    pub family: StateFamily,
    pub subsystem_sizes: Vec<usize>,
    pub error_target: f64,
    pub trials: usize,
    pub grid: Grid,
    pub seed: u64,
}

/// Mean relative purity error at one grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub n_unitaries: usize,
    pub n_shots: u64,
    pub mean_relative_error: f64,
}

/// Cheapest grid point meeting the error target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Optimum {
    pub n_unitaries: usize,
    pub n_shots: u64,
    pub total: f64,
    /// Half the local grid step of `log₂(N_U·N_M)`.
    pub log2_total_uncertainty: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubsystemScaling {
    pub n_a: usize,
    pub exact_purity: f64,
    pub surface: Vec<GridPoint>,
    /// `None` when no grid point meets the target.
    pub optimum: Option<Optimum>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingResult {
    pub family: StateFamily,
    pub error_target: f64,
    pub per_size: Vec<SubsystemScaling>,
    /// Fit of `log₂(total) = b + a·N_A` over sizes with an optimum.
    pub exponent: Option<f64>,
    pub offset: Option<f64>,
    pub exponent_fit_stderr: Option<f64>,
    /// Exponent uncertainty propagated from the grid resolution.
    pub exponent_grid_uncertainty: Option<f64>,
    /// Mean of `log₂(N_U/N_M)` at the optima.
    pub mean_log2_ratio: Option<f64>,
}

fn family_id(f: StateFamily) -> u64 {
    match f {
        StateFamily::ProductPure => 0,
        StateFamily::HaarPure => 1,
        StateFamily::HalfHaarMixed => 2,
    }
}

/// Per-unitary `X̂` for one trial: `x[j][u]` uses `n_shots[j]` shots on unitary `u`.
///
/// Unitaries are shared by every `N_M` and prefixes serve every `N_U`, so
/// grid points within a trial are compared on common random numbers.
fn trial_x_table(
    state: &QuantumState,
    n_unitaries: usize,
    n_shots: &[u64],
    stream: &SeedStream,
    key: [u64; 3],
) -> Result<Vec<Vec<f64>>> {
    let n = state.n_qubits();
    let full = SubsystemMask::full(n);
    let mut table = vec![Vec::with_capacity(n_unitaries); n_shots.len()];
    for u in 0..n_unitaries as u64 {
        let mut urng = stream.rng(Domain::Trial, [key[0], key[1], key[2], u << 8]);
        let mats: Vec<Mat2> = (0..n).map(|_| LocalUnitary::sample(&mut urng).matrix).collect();
        let probs = outcome_probabilities(state, &mats, None)?;
        for (j, &n_m) in n_shots.iter().enumerate() {
            let mut srng = stream.rng(Domain::Shots, [key[0], key[1], key[2], (u << 8) | j as u64]);
            let rec = MeasurementRecord {
                schema_version: crate::sampler::SCHEMA_VERSION,
                n_qubits: n,
                unitary_index: u,
                time_s: 0.0,
                pattern: 0,
                n_shots: n_m,
                angles: vec![[0.0; 3]; n],
                counts: sample_counts(&probs, n_m, &mut srng),
                matrices: None,
            };
            table[j].push(unbiased_x(&rec, full)?);
        }
    }
    Ok(table)
}

fn log2_step<T: Copy + Into<f64>>(values: &[T], i: usize) -> f64 {
    let at = |k: usize| values[k].into().log2();
    if values.len() < 2 {
        return 0.0;
    }
    if i + 1 < values.len() { at(i + 1) - at(i) } else { at(i) - at(i - 1) }
}

/// Minimal `N_U·N_M` reaching a mean relative purity error of `error_target`.
pub fn scaling_study(cfg: &ScalingConfig) -> Result<ScalingResult> {
    if cfg.trials == 0 || cfg.grid.n_unitaries.is_empty() || cfg.grid.n_shots.is_empty() {
        return Err(Error::Config("scaling study needs trials and a nonempty grid".into()));
    }
    if cfg.grid.n_unitaries.iter().any(|&u| u < 2) || cfg.grid.n_shots.iter().any(|&m| m < 2) {
        return Err(Error::Config("grid values must be ≥ 2".into()));
    }
    if let Some(&n) = cfg.subsystem_sizes.iter().find(|&&n| n == 0 || n > MAX_SCALING_QUBITS) {
        return Err(Error::TooLarge { what: "scaling subsystem", n, limit: MAX_SCALING_QUBITS });
    }
    let stream = SeedStream::new(cfg.seed);
    let fam = family_id(cfg.family);
    let states: Vec<QuantumState> = cfg
        .subsystem_sizes
        .iter()
        .map(|&n_a| cfg.family.state(n_a, &mut stream.rng(Domain::State, [fam, n_a as u64, 0, 0])))
        .collect::<Result<_>>()?;

    let g = &cfg.grid;
    let max_u = *g.n_unitaries.iter().max().expect("nonempty grid");
    let jobs: Vec<(usize, usize)> = (0..states.len()).flat_map(|s| (0..cfg.trials).map(move |t| (s, t))).collect();
    // rel_err[job][i * n_shots + j]
    let per_trial: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(s, t)| {
            let state = &states[s];
            let exact = state.purity();
            let key = [fam, cfg.subsystem_sizes[s] as u64, t as u64];
            let table = trial_x_table(state, max_u, &g.n_shots, &stream, key)?;
            let mut out = Vec::with_capacity(g.n_unitaries.len() * g.n_shots.len());
            for &n_u in &g.n_unitaries {
                for xs in &table {
                    let est = xs[..n_u].iter().sum::<f64>() / n_u as f64;
                    out.push((est - exact).abs() / exact);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let cells_per = g.n_unitaries.len() * g.n_shots.len();
    let errors: Vec<f64> = (0..states.len())
        .flat_map(|s| {
            let rows = &per_trial[s * cfg.trials..(s + 1) * cfg.trials];
            (0..cells_per).map(move |c| rows.iter().map(|r| r[c]).sum::<f64>() / cfg.trials as f64)
        })
        .collect();

    let cells = g.n_unitaries.len() * g.n_shots.len();
    let per_size: Vec<SubsystemScaling> = states
        .iter()
        .enumerate()
        .map(|(s, state)| {
            let surface: Vec<GridPoint> = (0..cells)
                .map(|c| GridPoint {
                    n_unitaries: g.n_unitaries[c / g.n_shots.len()],
                    n_shots: g.n_shots[c % g.n_shots.len()],
                    mean_relative_error: errors[s * cells + c],
                })
                .collect();
            let optimum = surface
                .iter()
                .enumerate()
                .filter(|(_, p)| p.mean_relative_error <= cfg.error_target)
                .min_by(|(_, a), (_, b)| {
                    let ta = a.n_unitaries as f64 * a.n_shots as f64;
                    let tb = b.n_unitaries as f64 * b.n_shots as f64;
                    ta.total_cmp(&tb).then(a.n_unitaries.cmp(&b.n_unitaries))
                })
                .map(|(c, p)| {
                    let (i, j) = (c / g.n_shots.len(), c % g.n_shots.len());
                    let du = log2_step(&g.n_unitaries.iter().map(|&u| u as f64).collect::<Vec<_>>(), i);
                    let dm = log2_step(&g.n_shots.iter().map(|&m| m as f64).collect::<Vec<_>>(), j);
                    Optimum {
                        n_unitaries: p.n_unitaries,
                        n_shots: p.n_shots,
                        total: p.n_unitaries as f64 * p.n_shots as f64,
                        log2_total_uncertainty: 0.5 * (du * du + dm * dm).sqrt(),
                    }
                });
            SubsystemScaling { n_a: cfg.subsystem_sizes[s], exact_purity: state.purity(), surface, optimum }
        })
        .collect();

    let pts: Vec<(f64, f64, f64)> = per_size
        .iter()
        .filter_map(|p| p.optimum.map(|o| (p.n_a as f64, o.total.log2(), o.log2_total_uncertainty)))
        .collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let fit = linear_fit(&xs, &ys);
    let grid_unc = fit.map(|_| {
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        (pts.iter().map(|p| (p.0 - mx).powi(2) * p.2 * p.2).sum::<f64>()).sqrt() / sxx
    });
    let ratios: Vec<f64> = per_size
        .iter()
        .filter_map(|p| p.optimum.map(|o| (o.n_unitaries as f64 / o.n_shots as f64).log2()))
        .collect();
    Ok(ScalingResult {
        family: cfg.family,
        error_target: cfg.error_target,
        per_size,
        exponent: fit.map(|f| f.slope),
        offset: fit.map(|f| f.intercept),
        exponent_fit_stderr: fit.map(|f| f.slope_stderr),
        exponent_grid_uncertainty: grid_unc,
        mean_log2_ratio: if ratios.is_empty() { None } else { Some(ratios.iter().sum::<f64>() / ratios.len() as f64) },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisorderConfig {
    pub quench: QuenchConfig,
    pub n_patterns: usize,
    pub n_unitaries_per_pattern: usize,
    pub n_shots: u64,
    /// Δ_j drawn uniformly from `[−width, width]`.
    pub width: f64,
    pub mask: SubsystemMask,
    /// Unitaries for the clean baseline; 0 uses `n_patterns · n_unitaries_per_pattern`.
    pub clean_unitaries: usize,
}

/// One time point of the disorder study.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderPoint {
    pub time_s: f64,
    pub clean: EntropyEstimate,
    /// `−log₂` of the disorder-averaged purity.
    pub disordered: EntropyEstimate,
    pub mean_pattern_entropy: Option<f64>,
    /// Noiseless state-level values of the two series.
    pub exact_clean: f64,
    pub exact_disordered: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisorderStudy {
    pub points: Vec<DisorderPoint>,
    pub patterns: Vec<Vec<f64>>,
    pub clean_records: Vec<MeasurementRecord>,
    pub disordered_records: Vec<MeasurementRecord>,
}

/// Disorder-averaged entropy of `mask` over time next to a clean baseline.
///
/// With a single pattern the disordered series is a plain estimate.
pub fn disorder_study(cfg: &DisorderConfig) -> Result<DisorderStudy> {
    let q = &cfg.quench;
    q.validate()?;
    cfg.mask.check_within(q.n_qubits)?;
    if cfg.n_patterns == 0 {
        return Err(Error::Config("n_patterns must be ≥ 1".into()));
    }
    if !(cfg.width >= 0.0) {
        return Err(Error::Config("disorder width must be ≥ 0".into()));
    }
    let stream = SeedStream::new(q.master_seed);
    let patterns: Vec<Vec<f64>> =
        (0..cfg.n_patterns as u64).map(|p| draw_disorder(&stream, p, q.n_qubits, cfg.width)).collect();
    let clean_n = if cfg.clean_unitaries == 0 { cfg.n_patterns * cfg.n_unitaries_per_pattern } else { cfg.clean_unitaries };
    let mut clean_cfg = q.clone();
    clean_cfg.disorder = vec![0.0; q.n_qubits];
    let clean = run_protocol(&clean_cfg, &ProtocolSpec { n_unitaries: clean_n, n_shots: cfg.n_shots, patterns: vec![] })?;
    let mut dis_cfg = q.clone();
    dis_cfg.master_seed = q.master_seed ^ 0x6469_736f_7264_6572;
    let disordered = run_protocol(
        &dis_cfg,
        &ProtocolSpec { n_unitaries: cfg.n_unitaries_per_pattern, n_shots: cfg.n_shots, patterns: patterns.clone() },
    )?;

    let exact = exact_disorder_series(q, &patterns, cfg.mask)?;
    let clean_exact = exact_disorder_series(q, &[vec![0.0; q.n_qubits]], cfg.mask)?;
    let mut points = Vec::with_capacity(q.times.len());
    for (ti, &t) in q.times.iter().enumerate() {
        let at = |recs: &[MeasurementRecord]| -> Vec<MeasurementRecord> {
            recs.iter().filter(|r| r.time_s == t).cloned().collect()
        };
        let c = estimate_entropy(&estimate_purity(&at(&clean.records), cfg.mask)?);
        let d_recs = at(&disordered.records);
        let (d, mean_pattern) = if cfg.n_patterns == 1 {
            let e = estimate_entropy(&estimate_purity(&d_recs, cfg.mask)?);
            let s = e.s2;
            (e, s)
        } else {
            let avg = disorder_average(&d_recs, cfg.mask)?;
            (avg.entropy_of_average, avg.mean_pattern_entropy)
        };
        points.push(DisorderPoint {
            time_s: t,
            clean: c,
            disordered: d,
            mean_pattern_entropy: mean_pattern,
            exact_clean: -clean_exact[ti].log2(),
            exact_disordered: -exact[ti].log2(),
        });
    }
    Ok(DisorderStudy { points, patterns, clean_records: clean.records, disordered_records: disordered.records })
}

/// Pattern-averaged exact purity of `mask` at each configured time
/// (preparation noise included, measurement noise excluded).
pub fn exact_disorder_series(q: &QuenchConfig, patterns: &[Vec<f64>], mask: SubsystemMask) -> Result<Vec<f64>> {
    let initial = QuantumState::neel(q.n_qubits)?;
    let prepared = if q.noise.lambda_prep.iter().all(|&l| l == 1.0) {
        initial
    } else {
        initial.apply_depolarizing_all(&q.noise.lambda_prep)?
    };
    let per_pattern: Vec<Vec<f64>> = patterns
        .par_iter()
        .map(|delta| {
            let mut cfg = q.clone();
            cfg.disorder = delta.clone();
            let h = build_hamiltonian(&cfg)?;
            q.times
                .iter()
                .map(|&t| Ok(h.evolve(&prepared, t)?.partial_trace(mask)?.purity()))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..q.times.len())
        .map(|ti| per_pattern.iter().map(|p| p[ti]).sum::<f64>() / patterns.len() as f64)
        .collect())
}

/// Number of shots finding `qubit` excited, one entry per record.
pub fn excited_counts(records: &[MeasurementRecord], qubit: usize) -> Vec<u64> {
    records
        .iter()
        .map(|r| {
            let bit = site_bit(r.n_qubits, qubit);
            r.counts.iter().filter(|(s, _)| *s & bit != 0).map(|(_, c)| c).sum()
        })
        .collect()
}

/// `P(m)` for `m` excitations in `n` shots when `p` is uniform on
/// `[p_lim, 1−p_lim]`.
pub fn box_binomial_pmf(m: u64, n: u64, p_lim: f64) -> f64 {
    if p_lim <= 0.0 {
        return 1.0 / (n + 1) as f64;
    }
    let (a, b) = ((m + 1) as f64, (n - m + 1) as f64);
    let mass = beta_reg(a, b, 1.0 - p_lim) - beta_reg(a, b, p_lim);
    (mass / ((n + 1) as f64 * (1.0 - 2.0 * p_lim))).max(0.0)
}

fn box_log_likelihood(hist: &[u64], n: u64, p_lim: f64) -> f64 {
    hist.iter()
        .enumerate()
        .filter(|(_, h)| **h > 0)
        .map(|(m, &h)| h as f64 * box_binomial_pmf(m as u64, n, p_lim).max(1e-300).ln())
        .sum()
}

/// Box⊛binomial fit for one qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformityFit {
    pub qubit: usize,
    pub n_unitaries: usize,
    pub n_shots: u64,
    /// Occurrences of `m = 0..=N_M` excitations.
    pub histogram: Vec<u64>,
    pub p_lim: f64,
    /// 95% likelihood-ratio interval.
    pub p_lim_interval: (f64, f64),
    /// Per-qubit purity loss `(1 − (1−2p_lim)²)/2`.
    pub gamma: f64,
    pub chi2: f64,
    pub dof: usize,
    /// Central 99% band of χ²(dof).
    pub chi2_band: (f64, f64),
    /// Randomized-PIT Kolmogorov–Smirnov statistic against the fitted model.
    pub ks_statistic: f64,
    pub ks_critical: f64,
}

impl UniformityFit {
    pub fn chi2_consistent(&self) -> bool {
        self.chi2 >= self.chi2_band.0 && self.chi2 <= self.chi2_band.1
    }

    pub fn ks_pass(&self) -> bool {
        self.ks_statistic < self.ks_critical
    }
}

/// Minimum number of unitaries for the uniformity fit.
pub const MIN_UNIFORMITY_UNITARIES: usize = 300;

const P_LIM_MAX: f64 = 0.45;

/// Maximum-likelihood box-distribution fit of one qubit's excitation counts.
pub fn uniformity_fit(records: &[MeasurementRecord], qubit: usize, stream: &SeedStream) -> Result<UniformityFit> {
    if records.len() < MIN_UNIFORMITY_UNITARIES {
        return Err(Error::InsufficientSamples { needed: MIN_UNIFORMITY_UNITARIES, got: records.len() });
    }
    let (n_q, n) = crate::estimator::check_records(records)?;
    SubsystemMask::from_sites(&[qubit])?.check_within(n_q)?;
    let ms = excited_counts(records, qubit);
    let mut hist = vec![0u64; n as usize + 1];
    for &m in &ms {
        hist[m as usize] += 1;
    }
    let ll = |a: f64| box_log_likelihood(&hist, n, a);

    let grid = 450;
    let step = P_LIM_MAX / grid as f64;
    let best = (0..=grid)
        .map(|k| (k, ll(k as f64 * step)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty grid")
        .0;
    let (mut lo, mut hi) = ((best as f64 - 1.0).max(0.0) * step, (best as f64 + 1.0).min(grid as f64) * step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let (c, d) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if ll(c) >= ll(d) { hi = d } else { lo = c }
    }
    let p_lim = 0.5 * (lo + hi);
    let ll_max = ll(p_lim).max(ll(0.0));
    let p_lim = if ll(0.0) >= ll(p_lim) { 0.0 } else { p_lim };

    let threshold = ChiSquared::new(1.0).expect("dof").inverse_cdf(0.95) / 2.0;
    let inside = |a: f64| ll_max - ll(a) <= threshold;
    let edge = |from: f64, to: f64| {
        let (mut a, mut b) = (from, to);
        if inside(b) {
            return b;
        }
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if inside(mid) { a = mid } else { b = mid }
        }
        a
    };
    let interval = (edge(p_lim, 0.0), edge(p_lim, P_LIM_MAX));

    let total = ms.len() as f64;
    let pmf: Vec<f64> = (0..=n).map(|m| box_binomial_pmf(m, n, p_lim)).collect();
    let mut chi2 = 0.0;
    let mut bins = 0usize;
    for (m, &h) in hist.iter().enumerate() {
        let e = total * pmf[m];
        if e > 0.0 {
            chi2 += (h as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    let dof = bins.saturating_sub(2).max(1);
    let chi = ChiSquared::new(dof as f64).expect("dof");
    let chi2_band = (chi.inverse_cdf(0.005), chi.inverse_cdf(0.995));

    // randomized probability integral transform of the discrete counts
    let mut cdf = vec![0.0; pmf.len() + 1];
    for m in 0..pmf.len() {
        cdf[m + 1] = cdf[m] + pmf[m];
    }
    let norm = cdf[pmf.len()];
    let mut rng = stream.rng(Domain::Test, [qubit as u64, n, records.len() as u64, 0]);
    let u: Vec<f64> = ms
        .iter()
        .map(|&m| (cdf[m as usize] + rng.random::<f64>() * pmf[m as usize]) / norm)
        .collect();
    let ks = ks_statistic(&u, |x| x.clamp(0.0, 1.0));
    let r = 1.0 - 2.0 * p_lim;
    Ok(UniformityFit {
        qubit,
        n_unitaries: records.len(),
        n_shots: n,
        histogram: hist,
        p_lim,
        p_lim_interval: interval,
        gamma: (1.0 - r * r) / 2.0,
        chi2,
        dof,
        chi2_band,
        ks_statistic: ks,
        ks_critical: ks_critical_1pct(ms.len()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairCorrelation {
    pub i: usize,
    pub j: usize,
    pub r: f64,
    pub p_value: f64,
}

/// Pairwise Pearson correlations of per-unitary excitation probabilities and
/// Fisher's combined statistic.
#[derive(Clone, Debug, PartialEq)]
pub struct CrosstalkReport {
    pub n_unitaries: usize,
    pub pairs: Vec<PairCorrelation>,
    /// Pairs with a zero-variance series.
    pub excluded: Vec<(usize, usize)>,
    pub fisher_chi2: f64,
    /// Null expectation `2M` for `M` included pairs.
    pub null_mean: f64,
    /// `2M ± 3·2√M`.
    pub null_band: (f64, f64),
}

impl CrosstalkReport {
    pub fn within_null(&self) -> bool {
        self.fisher_chi2 >= self.null_band.0 && self.fisher_chi2 <= self.null_band.1
    }
}

/// Minimum number of unitaries for the cross-talk test.
pub const MIN_CROSSTALK_UNITARIES: usize = 100;

pub fn crosstalk_from_probabilities(series: &[Vec<f64>]) -> Result<CrosstalkReport> {
    if series.len() < 2 {
        return Err(Error::InvalidArgument("cross-talk test needs at least 2 qubits".into()));
    }
    let n_u = series[0].len();
    if n_u < MIN_CROSSTALK_UNITARIES {
        return Err(Error::InsufficientSamples { needed: MIN_CROSSTALK_UNITARIES, got: n_u });
    }
    let mut pairs = Vec::new();
    let mut excluded = Vec::new();
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            match pearson(&series[i], &series[j]) {
                Some(r) => pairs.push(PairCorrelation { i: i + 1, j: j + 1, r, p_value: correlation_p_value(r, n_u) }),
                None => excluded.push((i + 1, j + 1)),
            }
        }
    }
    let m = pairs.len() as f64;
    let fisher_chi2 = fisher_statistic(&pairs.iter().map(|p| p.p_value).collect::<Vec<_>>());
    Ok(CrosstalkReport {
        n_unitaries: n_u,
        pairs,
        excluded,
        fisher_chi2,
        null_mean: 2.0 * m,
        null_band: (2.0 * m - 6.0 * m.sqrt(), 2.0 * m + 6.0 * m.sqrt()),
    })
}

pub fn crosstalk_diagnostics(records: &[MeasurementRecord]) -> Result<CrosstalkReport> {
    let (n, shots) = crate::estimator::check_records(records)?;
    let series: Vec<Vec<f64>> = (1..=n)
        .map(|q| excited_counts(records, q).iter().map(|&c| c as f64 / shots as f64).collect())
        .collect();
    crosstalk_from_probabilities(&series)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsReport {
    pub uniformity: Vec<UniformityFit>,
    pub crosstalk: Option<CrosstalkReport>,
}

/// Per-qubit uniformity fits plus the cross-talk test when `N ≥ 2`.
pub fn uniformity_diagnostics(records: &[MeasurementRecord], stream: &SeedStream) -> Result<DiagnosticsReport> {
    let (n, _) = crate::estimator::check_records(records)?;
    let uniformity = (1..=n).map(|q| uniformity_fit(records, q, stream)).collect::<Result<Vec<_>>>()?;
    let crosstalk = if n >= 2 && records.len() >= MIN_CROSSTALK_UNITARIES {
        Some(crosstalk_diagnostics(records)?)
    } else {
        None
    };
    Ok(DiagnosticsReport { uniformity, crosstalk })
}

/// Records for a pure product state measured after random local rotations.
pub fn product_state_records(
    n_qubits: usize,
    n_unitaries: usize,
    n_shots: u64,
    noise: &NoiseModel,
    stream: &SeedStream,
) -> Result<Vec<MeasurementRecord>> {
    let state = QuantumState::basis(n_qubits, 0)?;
    (0..n_unitaries as u64)
        .into_par_iter()
        .map(|u| {
            let set = LocalUnitarySet::sample(stream, u, n_qubits);
            let mut rng = stream.rng(Domain::Shots, [u, 0, 0, 1]);
            crate::sampler::sample_record(&state, &set, n_shots, noise, &mut rng)
        })
        .collect()
}
