//! Subcommands of the `rmtoolbox` binary.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 I/O failure,
//! 4 invalid or inconsistent data.
//!
//! All randomness derives from one master seed (`--seed`, else the config
//! file's `seed`, else drawn from system entropy and reported). Output files
//! carry no timestamps or absolute paths, so reruns with the same seed are
//! byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{MaskSpec, RunConfig};
use crate::dynamics::draw_disorder;
use crate::error::{Error, Result};
use crate::estimator::{check_records, disorder_average, estimate_partitions, estimate_purity};
use crate::io::{
    format_result_row, read_records, sha256_file, sha256_hex, write_records, write_table, ResultRow, RESULT_HEADER,
};
use crate::qstate::SubsystemMask;
use crate::randunitary::SeedStream;
use crate::sampler::{run_protocol, MeasurementRecord, ProtocolSpec};
use crate::studies::{
    disorder_study, product_state_records, scaling_study, uniformity_diagnostics, DisorderConfig,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "rmtoolbox", version, about = "Randomized-measurement purity and entropy toolbox")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Args)]
pub struct Shared {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for all random draws.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a quench and write randomized-measurement records.
    Simulate {
        #[command(flatten)]
        shared: Shared,
    },
    /// Estimate purities and Rényi entropies from a record file.
    Estimate {
        #[command(flatten)]
        shared: Shared,
        /// Record file (JSON Lines).
        #[arg(long)]
        records: PathBuf,
        /// `all`, `connected-from-1`, or site lists separated by `;` (e.g. `1-3;5,7`).
        #[arg(long)]
        masks: Option<String>,
        /// Subsystem whose per-unitary X values are histogrammed.
        #[arg(long)]
        histogram: Option<String>,
    },
    /// Measurement-budget scaling study.
    Scaling {
        #[command(flatten)]
        shared: Shared,
    },
    /// Disorder-averaged entropy growth next to the clean chain.
    Disorder {
        #[command(flatten)]
        shared: Shared,
    },
    /// Uniformity and cross-talk diagnostics.
    Diagnose {
        #[command(flatten)]
        shared: Shared,
        /// Record file; without it product-state records are simulated from `[diagnose]`.
        #[arg(long)]
        records: Option<PathBuf>,
    },
}

impl Command {
    fn shared(&self) -> &Shared {
        match self {
            Command::Simulate { shared }
            | Command::Estimate { shared, .. }
            | Command::Scaling { shared }
            | Command::Disorder { shared }
            | Command::Diagnose { shared, .. } => shared,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Estimate { .. } => "estimate",
            Command::Scaling { .. } => "scaling",
            Command::Disorder { .. } => "disorder",
            Command::Diagnose { .. } => "diagnose",
        }
    }
}

/// What a finished subcommand produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub seed: u64,
    /// True when the seed was drawn from system entropy.
    pub seed_drawn: bool,
    pub files: Vec<PathBuf>,
}

struct Context {
    command: &'static str,
    config: RunConfig,
    config_sha256: String,
    seed: u64,
    out: PathBuf,
}

impl Context {
    fn provenance(&self, extra: &[(&'static str, String)]) -> Vec<(&'static str, String)> {
        let mut v = vec![
            ("tool", format!("rmtoolbox {TOOL_VERSION}")),
            ("command", self.command.to_string()),
            ("seed", self.seed.to_string()),
            ("config_sha256", self.config_sha256.clone()),
        ];
        v.extend_from_slice(extra);
        v
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let shared = cli.command.shared().clone();
    let (config, config_sha256) = match &shared.config {
        Some(p) => {
            let bytes = fs::read(p)?;
            let text = String::from_utf8(bytes.clone()).map_err(|e| Error::Config(e.to_string()))?;
            (RunConfig::from_toml(&text)?, sha256_hex(&bytes))
        }
        None => (RunConfig::default(), "none".to_string()),
    };
    let threads = shared.threads.or(config.threads);
    if threads == Some(0) {
        return Err(Error::InvalidArgument("--threads must be ≥ 1".into()));
    }
    let (seed, seed_drawn) = match shared.seed.or(config.seed) {
        Some(s) => (s, false),
        None => (rand::random::<u64>(), true),
    };
    fs::create_dir_all(&shared.out)?;
    let ctx = Context { command: cli.command.name(), config, config_sha256, seed, out: shared.out.clone() };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let files = pool.install(|| match &cli.command {
        Command::Simulate { .. } => cmd_simulate(&ctx),
        Command::Estimate { records, masks, histogram, .. } => {
            cmd_estimate(&ctx, records, masks.as_deref(), histogram.as_deref())
        }
        Command::Scaling { .. } => cmd_scaling(&ctx),
        Command::Disorder { .. } => cmd_disorder(&ctx),
        Command::Diagnose { records, .. } => cmd_diagnose(&ctx, records.as_deref()),
    })?;
    Ok(Outcome { seed, seed_drawn, files })
}

fn cmd_simulate(ctx: &Context) -> Result<Vec<PathBuf>> {
    let cfg = &ctx.config;
    let protocol = cfg.protocol.as_ref().ok_or_else(|| Error::Config("missing [protocol] table".into()))?;
    let quench = cfg.quench_config(ctx.seed)?;
    let stream = SeedStream::new(ctx.seed);
    let patterns = (0..protocol.patterns as u64)
        .map(|p| draw_disorder(&stream, p, quench.n_qubits, protocol.disorder_width))
        .collect();
    let spec = ProtocolSpec { n_unitaries: protocol.n_unitaries, n_shots: protocol.n_shots, patterns };
    let mut set = run_protocol(&quench, &spec)?;
    if protocol.store_matrices {
        for r in &mut set.records {
            r.matrices = Some(r.unitaries());
        }
    }
    let records = ctx.path("records.jsonl");
    write_records(&records, &set.records)?;
    let provenance = serde_json::json!({
        "run": set.provenance,
        "command": ctx.command,
        "config_file_sha256": ctx.config_sha256,
        "records_file": "records.jsonl",
        "records_sha256": sha256_file(&records)?,
        "n_records": set.records.len(),
    });
    let prov = ctx.path("provenance.json");
    let text = serde_json::to_string_pretty(&provenance).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    fs::write(&prov, text + "\n")?;
    Ok(vec![records, prov])
}

/// Consecutive runs of records sharing `(time, pattern)`, in file order.
fn group_time_pattern(records: &[MeasurementRecord]) -> Vec<((f64, u64), Vec<MeasurementRecord>)> {
    let mut groups: Vec<((f64, u64), Vec<MeasurementRecord>)> = Vec::new();
    for r in records {
        let key = (r.time_s, r.pattern);
        match groups.iter_mut().find(|(k, _)| k.0.to_bits() == key.0.to_bits() && k.1 == key.1) {
            Some((_, v)) => v.push(r.clone()),
            None => groups.push((key, vec![r.clone()])),
        }
    }
    groups
}

const HISTOGRAM_BINS: usize = 40;

fn cmd_estimate(
    ctx: &Context,
    records_path: &Path,
    masks: Option<&str>,
    histogram: Option<&str>,
) -> Result<Vec<PathBuf>> {
    let est = &ctx.config.estimate;
    let spec = match (masks, &est.masks) {
        (Some(m), _) => m.parse::<MaskSpec>()?,
        (None, Some(m)) => MaskSpec::try_from(m)?,
        (None, None) => MaskSpec::ConnectedFromOne,
    };
    let hist_mask = match histogram.map(str::to_string).or_else(|| est.histogram.clone()) {
        Some(h) => Some(h.parse::<SubsystemMask>()?),
        None => None,
    };
    let records = read_records(records_path)?;
    let (n, _) = check_records(&records)?;
    let masks = spec.resolve(n, est.partition_cap)?;
    if let Some(h) = hist_mask {
        h.check_within(n)?;
    }
    let groups = group_time_pattern(&records);
    let per_group = groups
        .par_iter()
        .map(|(_, recs)| estimate_partitions(recs, &masks))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (((t, p), _), parts) in groups.iter().zip(&per_group) {
        for part in parts {
            rows.push(format_result_row(&ResultRow::new("estimate", *t, p.to_string(), &part.purity, &part.entropy)));
        }
    }
    // Disorder-averaged rows where a time carries several patterns.
    for (t, recs) in crate::estimator::group_by_time(&records) {
        let n_patterns = recs.iter().map(|r| r.pattern).collect::<std::collections::BTreeSet<_>>().len();
        if n_patterns < 2 {
            continue;
        }
        for m in &masks {
            let avg = disorder_average(&recs, *m)?;
            rows.push(format_result_row(&ResultRow::new(
                "estimate",
                t,
                "pooled".into(),
                &avg.pooled,
                &avg.entropy_of_average,
            )));
        }
    }
    let records_sha = sha256_file(records_path)?;
    let results = ctx.path("results.tsv");
    write_table(
        &results,
        &ctx.provenance(&[
            ("records_sha256", records_sha.clone()),
            ("n_records", records.len().to_string()),
            ("axes", "purity and s2 (bits) per subsystem mask, time in s".into()),
        ]),
        RESULT_HEADER,
        &rows,
    )?;
    let mut files = vec![results];
    if let Some(h) = hist_mask {
        let mut series = Vec::new();
        for ((t, p), recs) in &groups {
            series.push((*t, *p, estimate_purity(recs, h)?.x_per_unitary));
        }
        let (lo, hi) = series
            .iter()
            .flat_map(|s| s.2.iter())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let width = if hi > lo { (hi - lo) / HISTOGRAM_BINS as f64 } else { 1.0 };
        let mut out_rows = Vec::new();
        for (t, p, xs) in &series {
            let mut counts = [0u64; HISTOGRAM_BINS];
            for &x in xs {
                let b = (((x - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
                counts[b] += 1;
            }
            for (b, c) in counts.iter().enumerate() {
                let left = lo + b as f64 * width;
                out_rows.push(format!("{t}\t{p}\t{left}\t{}\t{c}", left + width));
            }
        }
        let path = ctx.path("histogram.tsv");
        write_table(
            &path,
            &ctx.provenance(&[
                ("records_sha256", records_sha),
                ("mask", h.to_string()),
                ("axes", "per-unitary purity estimate X (bin edges) vs number of unitaries".into()),
            ]),
            "time_s\tpattern\tbin_low\tbin_high\tcount",
            &out_rows,
        )?;
        files.push(path);
    }
    Ok(files)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn cmd_scaling(ctx: &Context) -> Result<Vec<PathBuf>> {
    let section = ctx.config.scaling.as_ref().ok_or_else(|| Error::Config("missing [scaling] table".into()))?;
    let configs = ctx.config.scaling_configs(section, ctx.seed)?;
    let mut optimum_rows = Vec::new();
    let mut surface_rows = Vec::new();
    let mut fit_rows = Vec::new();
    for cfg in &configs {
        let res = scaling_study(cfg)?;
        let f = res.family.name();
        for s in &res.per_size {
            for g in &s.surface {
                surface_rows.push(format!("{f}\t{}\t{}\t{}\t{}", s.n_a, g.n_unitaries, g.n_shots, g.mean_relative_error));
            }
            optimum_rows.push(match &s.optimum {
                Some(o) => format!(
                    "{f}\t{}\t{}\t{}\t{}\t{}\t{}",
                    s.n_a,
                    s.exact_purity,
                    o.n_unitaries,
                    o.n_shots,
                    o.total,
                    o.log2_total_uncertainty
                ),
                None => format!("{f}\t{}\t{}\tNA\tNA\tNA\tNA", s.n_a, s.exact_purity),
            });
        }
        fit_rows.push(format!(
            "{f}\t{}\t{}\t{}\t{}\t{}",
            opt(res.exponent),
            opt(res.offset),
            opt(res.exponent_fit_stderr),
            opt(res.exponent_grid_uncertainty),
            opt(res.mean_log2_ratio)
        ));
    }
    let common = [
        ("error_target", section.error_target.to_string()),
        ("trials", section.trials.to_string()),
        ("grid_points", section.grid_points.to_string()),
    ];
    let with = |axes: &str| {
        let mut v = common.to_vec();
        v.push(("axes", axes.to_string()));
        ctx.provenance(&v)
    };
    let scaling = ctx.path("scaling.tsv");
    write_table(
        &scaling,
        &with("N_A vs cheapest N_U·N_M reaching the error target"),
        "family\tn_a\texact_purity\tn_unitaries\tn_shots\ttotal\tlog2_total_uncertainty",
        &optimum_rows,
    )?;
    let surface = ctx.path("surface.tsv");
    write_table(
        &surface,
        &with("mean relative purity error over (N_U, N_M)"),
        "family\tn_a\tn_unitaries\tn_shots\tmean_relative_error",
        &surface_rows,
    )?;
    let fit = ctx.path("scaling_fit.tsv");
    write_table(
        &fit,
        &with("fit log2(N_U·N_M) = offset + exponent·N_A"),
        "family\texponent\toffset\texponent_fit_stderr\texponent_grid_uncertainty\tmean_log2_ratio",
        &fit_rows,
    )?;
    Ok(vec![scaling, surface, fit])
}

fn cmd_disorder(ctx: &Context) -> Result<Vec<PathBuf>> {
    let section = ctx.config.disorder.as_ref().ok_or_else(|| Error::Config("missing [disorder] table".into()))?;
    let quench = ctx.config.quench_config(ctx.seed)?;
    let n = quench.n_qubits;
    let mask = match &section.mask {
        Some(m) => m.parse::<SubsystemMask>().map_err(|e| Error::Config(format!("disorder.mask: {e}")))?,
        None => SubsystemMask::range(1, n / 2)?,
    };
    let cfg = DisorderConfig {
        quench,
        n_patterns: section.n_patterns,
        n_unitaries_per_pattern: section.n_unitaries_per_pattern,
        n_shots: section.n_shots,
        width: section.width,
        mask,
        clean_unitaries: section.clean_unitaries,
    };
    let study = disorder_study(&cfg)?;
    let rows: Vec<String> = study
        .points
        .iter()
        .map(|p| {
            format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                p.time_s,
                opt(p.clean.s2),
                opt(p.clean.stderr_s2),
                p.clean.flag.as_str(),
                opt(p.disordered.s2),
                opt(p.disordered.stderr_s2),
                p.disordered.flag.as_str(),
                opt(p.mean_pattern_entropy),
                p.exact_clean,
                p.exact_disordered
            )
        })
        .collect();
    let table = ctx.path("disorder.tsv");
    write_table(
        &table,
        &ctx.provenance(&[
            ("mask", mask.to_string()),
            ("n_patterns", section.n_patterns.to_string()),
            ("n_unitaries_per_pattern", section.n_unitaries_per_pattern.to_string()),
            ("n_shots", section.n_shots.to_string()),
            ("width", section.width.to_string()),
            ("axes", "time (s) vs second-order Renyi entropy (bits)".into()),
        ]),
        "time_s\tclean_s2\tclean_stderr\tclean_flag\tdisordered_s2\tdisordered_stderr\tdisordered_flag\tmean_pattern_s2\texact_clean_s2\texact_disordered_s2",
        &rows,
    )?;
    let clean = ctx.path("records_clean.jsonl");
    write_records(&clean, &study.clean_records)?;
    let dis = ctx.path("records_disordered.jsonl");
    write_records(&dis, &study.disordered_records)?;
    let pattern_rows: Vec<String> = study
        .patterns
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let vals: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            format!("{i}\t{}", vals.join("\t"))
        })
        .collect();
    let header = std::iter::once("pattern".to_string()).chain((1..=n).map(|q| format!("delta_{q}"))).collect::<Vec<_>>();
    let patterns = ctx.path("patterns.tsv");
    write_table(
        &patterns,
        &ctx.provenance(&[("axes", "per-site disorder offsets (rad/s)".into())]),
        &header.join("\t"),
        &pattern_rows,
    )?;
    Ok(vec![table, clean, dis, patterns])
}

fn cmd_diagnose(ctx: &Context, records_path: Option<&Path>) -> Result<Vec<PathBuf>> {
    let stream = SeedStream::new(ctx.seed);
    let (records, source) = match records_path {
        Some(p) => (read_records(p)?, ("records_sha256", sha256_file(p)?)),
        None => {
            let d = ctx.config.diagnose.as_ref().ok_or_else(|| {
                Error::Config("diagnose needs --records or a [diagnose] table".into())
            })?;
            let noise = d.noise()?;
            let recs = product_state_records(d.n_qubits, d.n_unitaries, d.n_shots, &noise, &stream)?;
            (recs, ("source", "simulated product state".to_string()))
        }
    };
    let report = uniformity_diagnostics(&records, &stream)?;
    let rows: Vec<String> = report
        .uniformity
        .iter()
        .map(|u| {
            format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                u.qubit,
                u.n_unitaries,
                u.n_shots,
                u.p_lim,
                u.p_lim_interval.0,
                u.p_lim_interval.1,
                u.gamma,
                u.chi2,
                u.dof,
                u.chi2_band.0,
                u.chi2_band.1,
                u.ks_statistic,
                u.ks_critical,
                if u.ks_pass() { "pass" } else { "fail" }
            )
        })
        .collect();
    let diag = ctx.path("diagnostics.tsv");
    write_table(
        &diag,
        &ctx.provenance(&[source.clone(), ("axes", "per-qubit uniformity fit of excitation counts".into())]),
        "qubit\tn_unitaries\tn_shots\tp_lim\tp_lim_low\tp_lim_high\tgamma\tchi2\tdof\tchi2_low\tchi2_high\tks\tks_critical\tks_result",
        &rows,
    )?;
    let hist_rows: Vec<String> = report
        .uniformity
        .iter()
        .flat_map(|u| {
            let n_u = u.n_unitaries as f64;
            u.histogram.iter().enumerate().map(move |(m, c)| {
                let expected = n_u * crate::studies::box_binomial_pmf(m as u64, u.n_shots, u.p_lim);
                format!("{}\t{m}\t{c}\t{expected}", u.qubit)
            })
        })
        .collect();
    let hist = ctx.path("uniformity_histogram.tsv");
    write_table(
        &hist,
        &ctx.provenance(&[source.clone(), ("axes", "excitations per unitary vs occurrences, with fitted expectation".into())]),
        "qubit\tm\tcount\texpected",
        &hist_rows,
    )?;
    let mut files = vec![diag, hist];
    if let Some(c) = &report.crosstalk {
        let rows: Vec<String> = c.pairs.iter().map(|p| format!("{}\t{}\t{}\t{}", p.i, p.j, p.r, p.p_value)).collect();
        let path = ctx.path("crosstalk.tsv");
        write_table(
            &path,
            &ctx.provenance(&[
                source,
                ("fisher_chi2", c.fisher_chi2.to_string()),
                ("null_mean", c.null_mean.to_string()),
                ("null_band", format!("{} {}", c.null_band.0, c.null_band.1)),
                ("within_null", c.within_null().to_string()),
                ("axes", "qubit pair vs Pearson correlation of excitation probabilities".into()),
            ]),
            "i\tj\tr\tp_value",
            &rows,
        )?;
        files.push(path);
    }
    Ok(files)
}

/// Parse arguments, run, and map the result to a process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(o) => {
            if o.seed_drawn {
                eprintln!("seed: {}", o.seed);
            }
            for f in &o.files {
                eprintln!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
