//! TOML run configuration shared by the command-line subcommands.
//!
//! Every table rejects unknown keys, and the whole file is validated before
//! any computation starts. Times are in seconds, couplings and fields in
//! s⁻¹ and rad/s.

use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::dynamics::{NoiseParams, QuenchConfig};
use crate::error::{Error, Result};
use crate::qstate::{QuantumState, SubsystemMask};
use crate::sampler::{calibrate_prep_lambda, NoiseModel};
use crate::studies::{Grid, ScalingConfig, StateFamily};

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; `--seed` takes precedence.
    pub seed: Option<u64>,
    /// Worker threads; `--threads` takes precedence.
    pub threads: Option<usize>,
    pub system: Option<SystemSection>,
    #[serde(default)]
    pub noise: NoiseSection,
    pub protocol: Option<ProtocolSection>,
    #[serde(default)]
    pub estimate: EstimateSection,
    pub disorder: Option<DisorderSection>,
    pub scaling: Option<ScalingSection>,
    pub diagnose: Option<DiagnoseSection>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n_qubits: usize,
    pub j0: f64,
    pub alpha: f64,
    #[serde(default)]
    pub b_field: f64,
    /// Per-site Δ_j; omitted means clean.
    pub disorder: Option<Vec<f64>>,
    pub times: Vec<f64>,
}

/// A per-qubit value given either once for all qubits or as a list.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PerQubit {
    Uniform(f64),
    List(Vec<f64>),
}

impl PerQubit {
    pub fn expand(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            PerQubit::Uniform(x) => Ok(vec![*x; n]),
            PerQubit::List(v) if v.len() == n => Ok(v.clone()),
            PerQubit::List(v) => Err(Error::Config(format!("{what} has {} entries for {n} qubits", v.len()))),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub lambda_prep: Option<PerQubit>,
    /// Target purity of the prepared state; sets a uniform `λ_prep` by
    /// calibration and excludes `lambda_prep`.
    pub prep_purity: Option<f64>,
    pub lambda_meas: Option<PerQubit>,
    #[serde(default)]
    pub decay_rate: f64,
    #[serde(default)]
    pub flip_rate: f64,
}

impl NoiseSection {
    /// Noise for an `n`-qubit run starting from the Néel state.
    pub fn params(&self, n: usize) -> Result<NoiseParams> {
        let lambda_prep = match (&self.lambda_prep, self.prep_purity) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("noise: give lambda_prep or prep_purity, not both".into()));
            }
            (Some(l), None) => l.expand(n, "noise.lambda_prep")?,
            (None, Some(p)) => {
                let l = calibrate_prep_lambda(&QuantumState::neel(n)?, p)
                    .map_err(|e| Error::Config(format!("noise.prep_purity: {e}")))?;
                vec![l; n]
            }
            (None, None) => vec![1.0; n],
        };
        let lambda_meas = match &self.lambda_meas {
            Some(l) => l.expand(n, "noise.lambda_meas")?,
            None => vec![1.0; n],
        };
        Ok(NoiseParams { lambda_prep, lambda_meas, decay_rate: self.decay_rate, flip_rate: self.flip_rate })
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub n_unitaries: usize,
    pub n_shots: u64,
    /// Disorder patterns drawn with `disorder_width`; 0 uses `system.disorder`.
    #[serde(default)]
    pub patterns: usize,
    #[serde(default)]
    pub disorder_width: f64,
    /// Also write the 2×2 unitaries next to the angles.
    #[serde(default)]
    pub store_matrices: bool,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MaskList {
    Spec(String),
    List(Vec<String>),
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub masks: Option<MaskList>,
    /// Subsystem whose per-unitary X values are written as a histogram.
    pub histogram: Option<String>,
    #[serde(default = "default_partition_cap")]
    pub partition_cap: usize,
}

impl Default for EstimateSection {
    fn default() -> Self {
        EstimateSection { masks: None, histogram: None, partition_cap: default_partition_cap() }
    }
}

fn default_partition_cap() -> usize {
    crate::estimator::DEFAULT_PARTITION_CAP
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DisorderSection {
    pub n_patterns: usize,
    pub n_unitaries_per_pattern: usize,
    pub n_shots: u64,
    /// Half-width of the uniform Δ_j distribution, rad/s.
    pub width: f64,
    /// Defaults to the left half chain.
    pub mask: Option<String>,
    #[serde(default)]
    pub clean_unitaries: usize,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub families: Vec<String>,
    pub subsystem_sizes: Vec<usize>,
    #[serde(default = "default_error_target")]
    pub error_target: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_error_target() -> f64 {
    0.12
}
fn default_trials() -> usize {
    30
}
fn default_grid_points() -> usize {
    12
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseSection {
    pub n_qubits: usize,
    pub n_unitaries: usize,
    pub n_shots: u64,
    pub lambda_meas: Option<PerQubit>,
}

/// Which subsystems `estimate` reports.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MaskSpec {
    All,
    ConnectedFromOne,
    List(Vec<SubsystemMask>),
}

impl FromStr for MaskSpec {
    type Err = Error;

    /// `all`, `connected-from-1`, or site lists separated by `;`
    /// (`1-3;5,7`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "" => Err(Error::InvalidArgument("empty mask specification".into())),
            "all" => Ok(MaskSpec::All),
            "connected-from-1" => Ok(MaskSpec::ConnectedFromOne),
            _ => MaskSpec::from_list(&s.split(';').collect::<Vec<_>>()),
        }
    }
}

impl MaskSpec {
    pub fn from_list<S: AsRef<str>>(items: &[S]) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidArgument("empty mask specification".into()));
        }
        let masks = items
            .iter()
            .map(|m| {
                let m = m.as_ref().trim();
                if m.is_empty() {
                    return Err(Error::InvalidArgument("empty mask in list".into()));
                }
                m.parse::<SubsystemMask>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MaskSpec::List(masks))
    }

    /// Concrete masks for an `n`-qubit register, in output order.
    pub fn resolve(&self, n: usize, cap: usize) -> Result<Vec<SubsystemMask>> {
        match self {
            MaskSpec::All => {
                if n > cap {
                    return Err(Error::TooLarge { what: "all-partition enumeration", n, limit: cap });
                }
                let mut v: Vec<SubsystemMask> =
                    (1u64..1 << n).map(SubsystemMask::new).collect::<Result<_>>()?;
                v.sort_by_key(|m| (m.len(), m.sites()));
                Ok(v)
            }
            MaskSpec::ConnectedFromOne => (1..=n).map(|i| SubsystemMask::range(1, i)).collect(),
            MaskSpec::List(v) => {
                for m in v {
                    m.check_within(n)?;
                }
                Ok(v.clone())
            }
        }
    }
}

impl TryFrom<&MaskList> for MaskSpec {
    type Error = Error;

    fn try_from(m: &MaskList) -> Result<Self> {
        match m {
            MaskList::Spec(s) => s.parse(),
            MaskList::List(v) => MaskSpec::from_list(v),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be ≥ 1".into()));
        }
        if let Some(s) = &self.system {
            self.quench(s, 0)?.validate()?;
        }
        if let Some(m) = &self.estimate.masks {
            MaskSpec::try_from(m).map_err(|e| Error::Config(format!("estimate.masks: {e}")))?;
        }
        if let Some(h) = &self.estimate.histogram {
            h.parse::<SubsystemMask>().map_err(|e| Error::Config(format!("estimate.histogram: {e}")))?;
        }
        if let Some(p) = &self.protocol {
            if p.n_unitaries < 2 || p.n_shots < 2 {
                return Err(Error::Config("protocol: n_unitaries and n_shots must be ≥ 2".into()));
            }
            if !(p.disorder_width >= 0.0) {
                return Err(Error::Config("protocol.disorder_width must be ≥ 0".into()));
            }
        }
        if let Some(s) = &self.scaling {
            self.scaling_configs(s, 0)?;
        }
        if let Some(d) = &self.diagnose {
            d.noise()?;
        }
        Ok(())
    }

    fn quench(&self, s: &SystemSection, seed: u64) -> Result<QuenchConfig> {
        let n = s.n_qubits;
        let noise = if n >= 2 && n <= crate::qstate::MAX_PURE_QUBITS {
            self.noise.params(n)?
        } else {
            NoiseParams::noiseless(n)
        };
        Ok(QuenchConfig {
            n_qubits: n,
            j0: s.j0,
            alpha: s.alpha,
            b_field: s.b_field,
            disorder: s.disorder.clone().unwrap_or_else(|| vec![0.0; n]),
            times: s.times.clone(),
            noise,
            master_seed: seed,
        })
    }

    /// The `[system]` and `[noise]` tables as a quench configuration.
    pub fn quench_config(&self, seed: u64) -> Result<QuenchConfig> {
        let s = self.system.as_ref().ok_or_else(|| Error::Config("missing [system] table".into()))?;
        let q = self.quench(s, seed)?;
        q.validate()?;
        Ok(q)
    }

    pub fn scaling_configs(&self, s: &ScalingSection, seed: u64) -> Result<Vec<ScalingConfig>> {
        if s.families.is_empty() || s.subsystem_sizes.is_empty() {
            return Err(Error::Config("scaling: families and subsystem_sizes must be nonempty".into()));
        }
        if !(s.error_target > 0.0) || s.trials == 0 || s.grid_points < 2 {
            return Err(Error::Config("scaling: need error_target > 0, trials ≥ 1, grid_points ≥ 2".into()));
        }
        s.families
            .iter()
            .map(|f| {
                Ok(ScalingConfig {
                    family: f.parse::<StateFamily>().map_err(|e| Error::Config(format!("scaling.families: {e}")))?,
                    subsystem_sizes: s.subsystem_sizes.clone(),
                    error_target: s.error_target,
                    trials: s.trials,
                    grid: Grid::new(s.grid_points),
                    seed,
                })
            })
            .collect()
    }
}

impl DiagnoseSection {
    pub fn noise(&self) -> Result<NoiseModel> {
        let n = self.n_qubits;
        let meas = match &self.lambda_meas {
            Some(l) => l.expand(n, "diagnose.lambda_meas")?,
            None => vec![1.0; n],
        };
        let m = NoiseModel { lambda_prep: vec![1.0; n], lambda_meas: meas };
        m.validate(n).map_err(|e| Error::Config(format!("diagnose: {e}")))?;
        Ok(m)
    }
}
