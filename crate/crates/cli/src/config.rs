//! Experiment configuration: the versioned JSON schema and its validation.

use std::path::{Path, PathBuf};

use davies_lab::davies::{DENSE_SUPEROP_MAX_DIM, STATE_MAX_DIM};
use davies_lab::lab::{BoundInputs, FormulaId};
use davies_lab::{CoarseGrainingParams, LabError, LocalHamiltonian, ModelSpec, Region, WeightScheme};
use serde::{Deserialize, Serialize};

/// The only schema version this build understands.
pub const SCHEMA_VERSION: u32 = 1;

/// Suites that can be selected in a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    CoarseGrain,
    McmiScan,
    Ineq,
    Gap,
    Mix,
    W1,
    Bounds,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::CoarseGrain => "coarse-grain",
            Suite::McmiScan => "mcmi-scan",
            Suite::Ineq => "ineq",
            Suite::Gap => "gap",
            Suite::Mix => "mix",
            Suite::W1 => "w1",
            Suite::Bounds => "bounds",
        }
    }
}

/// Partition `(A, C, D)` given by site coordinates; `B` is the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub a: Vec<Vec<i64>>,
    pub c: Vec<Vec<i64>>,
    #[serde(default)]
    pub d: Vec<Vec<i64>>,
}

/// Reference state of the inequality suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Reference {
    /// The Gibbs state of the model.
    #[default]
    Gibbs,
    /// Product of single-site states `diag(1 − weight, weight, …)`: a
    /// deliberately wrong reference for negative controls.
    BiasedProduct { weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IneqConfig {
    /// Random states per inverse temperature.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub reference: Reference,
    /// Regions `A` for the MLSI-alike checks (single sites when omitted).
    #[serde(default)]
    pub mlsi_regions: Option<Vec<Vec<Vec<i64>>>>,
    /// Regions for the heat-bath checks (single sites when omitted).
    #[serde(default)]
    pub heat_bath_regions: Option<Vec<Vec<Vec<i64>>>>,
}

impl Default for IneqConfig {
    fn default() -> Self {
        Self { samples: default_samples(), reference: Reference::Gibbs, mlsi_regions: None, heat_bath_regions: None }
    }
}

fn default_samples() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    /// Regions whose generators are analysed (every single site and the whole
    /// system when omitted).
    #[serde(default)]
    pub regions: Option<Vec<Vec<Vec<i64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixConfig {
    pub eps: Vec<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Region of the generator (the whole system when omitted).
    #[serde(default)]
    pub region: Option<Vec<Vec<i64>>>,
    /// Also compute Wasserstein mixing times.
    #[serde(default)]
    pub w1: bool,
    /// Fit the weak-MLSI envelope on the same initial states.
    #[serde(default)]
    pub wmlsi: bool,
}

fn default_horizon() -> f64 {
    200.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct W1Config {
    /// Random states compared against the Gibbs state per inverse temperature.
    #[serde(default = "default_w1_samples")]
    pub samples: usize,
}

fn default_w1_samples() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub inputs: BoundInputs,
    /// Formulas to evaluate (all when omitted).
    #[serde(default)]
    pub formulas: Option<Vec<FormulaId>>,
    /// Emit the polylog table up to `N = 10^max`.
    #[serde(default)]
    pub polylog_max_exponent: Option<u32>,
}

/// Numerical settings of the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_sdp_tol")]
    pub sdp_tol: f64,
    #[serde(default = "default_sdp_max_iter")]
    pub sdp_max_iter: usize,
    #[serde(default = "default_w1_gap_tol")]
    pub w1_gap_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { sdp_tol: default_sdp_tol(), sdp_max_iter: default_sdp_max_iter(), w1_gap_tol: default_w1_gap_tol() }
    }
}

fn default_sdp_tol() -> f64 {
    1e-10
}

fn default_sdp_max_iter() -> usize {
    150
}

fn default_w1_gap_tol() -> f64 {
    1e-6
}

/// Top-level experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub model: ModelSpec,
    #[serde(default)]
    pub betas: Vec<f64>,
    #[serde(default)]
    pub weights: WeightScheme,
    #[serde(default)]
    pub coarse_graining: Option<CoarseGrainingParams>,
    #[serde(default)]
    pub partitions: Option<Vec<PartitionSpec>>,
    #[serde(default)]
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub ineq: IneqConfig,
    #[serde(default)]
    pub gap: Option<GapConfig>,
    #[serde(default)]
    pub mix: Option<MixConfig>,
    #[serde(default)]
    pub w1: Option<W1Config>,
    #[serde(default)]
    pub bounds: Option<BoundsConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Output directory (overridden by `--out`).
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Failure while loading or validating a configuration.
#[derive(Debug)]
pub enum ConfigError {
    /// Unreadable file.
    Io(String),
    /// Schema violation at a JSON path.
    Schema { path: String, message: String },
    /// Semantically invalid content.
    Invalid(String),
    /// A requested computation exceeds a size cap.
    Capability(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "cannot read configuration: {m}"),
            ConfigError::Schema { path, message } => write!(f, "schema violation at `{path}`: {message}"),
            ConfigError::Invalid(m) => write!(f, "invalid configuration: {m}"),
            ConfigError::Capability(m) => write!(f, "capability exceeded: {m}"),
        }
    }
}

impl From<LabError> for ConfigError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Capability(m) => ConfigError::Capability(m),
            other => ConfigError::Invalid(other.to_string()),
        }
    }
}

/// Parse a configuration, reporting the JSON path of the first offending field.
pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

/// Convert coordinates to a model region, rejecting sites outside the model.
pub fn region(h: &LocalHamiltonian, coords: &[Vec<i64>]) -> Result<Region, ConfigError> {
    let r = h.lattice().region_from_coords(coords).map_err(ConfigError::from)?;
    if !r.is_subset(h.universe()) {
        return Err(ConfigError::Invalid(format!("region {coords:?} leaves the model sites")));
    }
    Ok(r)
}

impl ExperimentConfig {
    /// Check everything that can be checked before running: schema version,
    /// the model, parameter ranges and the size caps of the selected suites.
    pub fn validate(&self, suites: &[Suite]) -> Result<LocalHamiltonian, ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Schema {
                path: "schema_version".into(),
                message: format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            });
        }
        let h = LocalHamiltonian::build(&self.model).map_err(ConfigError::from)?;
        if let Some(bad) = self.betas.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(ConfigError::Invalid(format!("inverse temperature {bad} must be finite and non-negative")));
        }
        let needs_betas = suites.iter().any(|s| matches!(s, Suite::McmiScan | Suite::Ineq | Suite::Gap | Suite::Mix | Suite::W1));
        if needs_betas && self.betas.is_empty() {
            return Err(ConfigError::Invalid("the selected suites need at least one inverse temperature".into()));
        }
        let state_dim = h.full_register().dim();
        let uses_states = suites.iter().any(|s| !matches!(s, Suite::CoarseGrain | Suite::Bounds));
        if uses_states && state_dim > STATE_MAX_DIM {
            return Err(ConfigError::Capability(format!(
                "state dimension {state_dim} exceeds the cap {STATE_MAX_DIM}"
            )));
        }
        if suites.iter().any(|s| matches!(s, Suite::Gap | Suite::Mix | Suite::Ineq)) {
            for r in self.generator_regions(&h, suites)? {
                let dim = h.register(&h.closure(&r)).dim();
                if dim > DENSE_SUPEROP_MAX_DIM {
                    return Err(ConfigError::Capability(format!(
                        "generator register of dimension {dim} exceeds the cap {DENSE_SUPEROP_MAX_DIM}"
                    )));
                }
            }
        }
        if suites.contains(&Suite::CoarseGrain) && self.coarse_graining.is_none() {
            return Err(ConfigError::Invalid("the coarse-grain suite needs `coarse_graining`".into()));
        }
        if let Some(p) = &self.coarse_graining {
            p.validate(h.lattice().dim(), h.lattice().side()).map_err(ConfigError::from)?;
        }
        if let Some(parts) = &self.partitions {
            for p in parts {
                region(&h, &p.a)?;
                region(&h, &p.c)?;
                region(&h, &p.d)?;
            }
        }
        if suites.contains(&Suite::Mix) {
            let mix = self.mix.as_ref().ok_or_else(|| ConfigError::Invalid("the mix suite needs `mix`".into()))?;
            if mix.eps.is_empty() || mix.eps.iter().any(|e| !(*e > 0.0)) {
                return Err(ConfigError::Invalid("mixing precisions must be positive".into()));
            }
            if !(mix.horizon > 0.0) {
                return Err(ConfigError::Invalid("mixing horizon must be positive".into()));
            }
        }
        if suites.contains(&Suite::Bounds) && self.bounds.is_none() {
            return Err(ConfigError::Invalid("the bounds suite needs `bounds`".into()));
        }
        if let Reference::BiasedProduct { weight } = self.ineq.reference {
            if !(weight > 0.0 && weight < 1.0 / self.model.d as f64) {
                return Err(ConfigError::Invalid(format!("biased reference weight {weight} out of range")));
            }
        }
        Ok(h)
    }

    /// Every region a Davies generator will be built on by the selected suites.
    fn generator_regions(&self, h: &LocalHamiltonian, suites: &[Suite]) -> Result<Vec<Region>, ConfigError> {
        let singles = || h.universe().iter().map(|s| Region::new(vec![s])).collect::<Vec<_>>();
        let mut out = Vec::new();
        if suites.contains(&Suite::Gap) {
            out.extend(self.gap_regions(h)?);
        }
        if suites.contains(&Suite::Mix) {
            if let Some(m) = &self.mix {
                out.push(self.mix_region(h, m)?);
            }
        }
        if suites.contains(&Suite::Ineq) {
            match &self.ineq.mlsi_regions {
                Some(rs) => {
                    for r in rs {
                        out.push(h.closure(&region(h, r)?));
                    }
                }
                None => out.extend(singles().iter().map(|r| h.closure(r))),
            }
        }
        Ok(out)
    }

    pub fn gap_regions(&self, h: &LocalHamiltonian) -> Result<Vec<Region>, ConfigError> {
        match self.gap.as_ref().and_then(|g| g.regions.as_ref()) {
            Some(rs) => rs.iter().map(|r| region(h, r)).collect(),
            None => {
                let mut out: Vec<Region> = h.universe().iter().map(|s| Region::new(vec![s])).collect();
                out.push(h.universe().clone());
                Ok(out)
            }
        }
    }

    pub fn mix_region(&self, h: &LocalHamiltonian, mix: &MixConfig) -> Result<Region, ConfigError> {
        match &mix.region {
            Some(r) => region(h, r),
            None => Ok(h.universe().clone()),
        }
    }
}
