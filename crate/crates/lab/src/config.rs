//! Versioned JSON experiment configs. Unknown keys are rejected everywhere.

use std::path::Path;

use antithetic_core::diffusion::{DdpmVariance, MixtureParams, Schedule};
use antithetic_core::ou::Orthogonal;
use antithetic_core::RngStream;
use serde::{Deserialize, Serialize};

use crate::LabError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Correlation(CorrelationSpec),
    Uq(UqSpec),
    QmcTradeoff(QmcTradeoffSpec),
    Symmetry(SymmetrySpec),
    Ou(OuSpec),
    Fkg(FkgSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSpec {
    pub model: ModelSpec,
    pub pairs: usize,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

fn default_bins() -> usize {
    40
}

fn default_alpha() -> f64 {
    0.05
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Correlation(_) => "correlation",
            Experiment::Uq(_) => "uq",
            Experiment::QmcTradeoff(_) => "qmc-tradeoff",
            Experiment::Symmetry(_) => "symmetry",
            Experiment::Ou(_) => "ou",
            Experiment::Fkg(_) => "fkg",
        }
    }
}

/// Image-shaped analytic diffusion model: the mixture lives in
/// `channels * height * width` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub image: ImageShape,
    pub mixture: MixtureSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub sampler: SamplerSpec,
    /// Clamp model outputs to `[0, 1]` after the affine map.
    #[serde(default)]
    pub clamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ImageShape {
    pub fn dim(&self) -> usize {
        self.channels * self.height * self.width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MixtureSpec {
    /// `N(mean * 1, variance I)`: the score is linear in `x`.
    Gaussian { dim: usize, mean: f64, variance: f64 },
    Random { dim: usize, components: usize, mean_scale: f64, variance_range: [f64; 2], seed: u64 },
    SymmetricPair { center: Vec<f64>, offset: Vec<f64>, variance: f64 },
    Explicit { weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<f64> },
}

impl MixtureSpec {
    pub fn build(&self, field: &str) -> Result<MixtureParams, LabError> {
        let built = match self {
            MixtureSpec::Gaussian { dim, mean, variance } => {
                if *dim == 0 {
                    return Err(LabError::config(format!("{field}.dim"), "must be at least 1"));
                }
                MixtureParams::single(vec![*mean; *dim], *variance)
            }
            MixtureSpec::Random { dim, components, mean_scale, variance_range, seed } => MixtureParams::random(
                RngStream::new(*seed, 0),
                *dim,
                *components,
                *mean_scale,
                (variance_range[0], variance_range[1]),
            ),
            MixtureSpec::SymmetricPair { center, offset, variance } => MixtureParams::symmetric_pair(center, offset, *variance),
            MixtureSpec::Explicit { weights, means, variances } => MixtureParams::new(weights.clone(), means.clone(), variances.clone()),
        };
        built.map_err(|e| LabError::config(field, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default = "default_train_steps")]
    pub train_steps: usize,
    #[serde(default = "default_beta_min")]
    pub beta_min: f64,
    #[serde(default = "default_beta_max")]
    pub beta_max: f64,
    pub steps: usize,
}

fn default_train_steps() -> usize {
    1000
}

fn default_beta_min() -> f64 {
    1e-4
}

fn default_beta_max() -> f64 {
    0.02
}

impl ScheduleSpec {
    pub fn base(&self, field: &str) -> Result<Schedule, LabError> {
        Schedule::linear_beta(self.train_steps, self.beta_min, self.beta_max).map_err(|e| LabError::config(field, e.to_string()))
    }

    pub fn build(&self, field: &str) -> Result<Schedule, LabError> {
        self.base(field)?.respaced(self.steps).map_err(|e| LabError::config(format!("{field}.steps"), e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    #[default]
    Ddim,
    Ddpm { variance: DdpmVariance },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    MeanPixel,
    Brightness,
    Contrast,
    CentroidRow,
}

impl Statistic {
    pub fn label(&self) -> &'static str {
        match self {
            Statistic::MeanPixel => "mean_pixel",
            Statistic::Brightness => "brightness",
            Statistic::Contrast => "contrast",
            Statistic::CentroidRow => "centroid_row",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    Mc,
    Amc,
    KAntithetic { k: usize },
    Rqmc { replicates: usize },
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match self {
            MethodSpec::Mc => "MC".into(),
            MethodSpec::Amc => "AMC(k=2)".into(),
            MethodSpec::KAntithetic { k } => format!("AMC(k={k})"),
            MethodSpec::Rqmc { replicates } => format!("RQMC(R={replicates})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UqSpec {
    pub model: ModelSpec,
    /// Sampler calls per method.
    pub budget: usize,
    pub methods: Vec<MethodSpec>,
    pub statistics: Vec<Statistic>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub replicates: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QmcTradeoffSpec {
    pub model: ModelSpec,
    pub budget: usize,
    pub splits: Vec<Split>,
    pub statistics: Vec<Statistic>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_true")]
    pub owen: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetrySpec {
    pub model: ModelSpec,
    /// Sampler steps to probe; all steps when omitted.
    #[serde(default)]
    pub steps: Option<Vec<usize>>,
    pub anchors: usize,
    #[serde(default = "default_coords")]
    pub coords: Vec<usize>,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    /// Antithetic trajectory pairs for the temporal correlation tables.
    pub pairs: usize,
    #[serde(default = "default_center_probes")]
    pub center_probes: usize,
}

fn default_coords() -> Vec<usize> {
    vec![0]
}

fn default_grid() -> usize {
    201
}

fn default_center_probes() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuSpec {
    pub mixture: MixtureSpec,
    pub times: Vec<f64>,
    #[serde(default)]
    pub expansion: Option<ExpansionSpec>,
    #[serde(default)]
    pub one_step: Option<OneStepSpec>,
    #[serde(default)]
    pub preservation: Option<PreservationSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionSpec {
    pub max_degree: u32,
    pub order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneStepSpec {
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreservationSpec {
    pub map: Orthogonal,
    pub center: Vec<f64>,
    pub probes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkgSpec {
    pub chains: ChainSpec,
    #[serde(default)]
    pub additive: Option<AdditiveSpec>,
    #[serde(default)]
    pub monotonicity: Option<MonotonicitySpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub count: usize,
    pub max_depth: usize,
    pub weight_scale: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdditiveSpec {
    pub count: usize,
    pub dim: usize,
    pub outputs: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotonicitySpec {
    pub mixture: MixtureSpec,
    pub schedule: ScheduleSpec,
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Step counts for the threshold sweep.
    #[serde(default)]
    pub sweep: Vec<usize>,
    /// Starting points for the finite-difference Jacobian of the full chain.
    #[serde(default)]
    pub chain_probes: usize,
}

fn default_probes() -> usize {
    512
}

/// The `kind`-tagged enum buffers its body, which hides the path of an error
/// inside it; re-reading the body as the tagged variant recovers it.
fn locate_in_experiment(text: &str) -> Option<LabError> {
    fn body<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Option<LabError> {
        serde_path_to_error::deserialize::<_, T>(v)
            .err()
            .map(|e| LabError::config(format!("experiment.{}", e.path()), e.into_inner().to_string()))
    }
    let root: serde_json::Value = serde_json::from_str(text).ok()?;
    let mut v = root.get("experiment")?.clone();
    let kind = v.as_object_mut()?.remove("kind")?;
    match kind.as_str()? {
        "correlation" => body::<CorrelationSpec>(v),
        "uq" => body::<UqSpec>(v),
        "qmc-tradeoff" => body::<QmcTradeoffSpec>(v),
        "symmetry" => body::<SymmetrySpec>(v),
        "ou" => body::<OuSpec>(v),
        "fkg" => body::<FkgSpec>(v),
        _ => None,
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, LabError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "experiment" {
                if let Some(err) = locate_in_experiment(text) {
                    return err;
                }
            }
            LabError::config(if path == "." { "config".to_string() } else { path }, e.into_inner().to_string())
        })?;
        if config.version != SCHEMA_VERSION {
            return Err(LabError::config("version", format!("unsupported schema version {} (expected {SCHEMA_VERSION})", config.version)));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical serialization used for the manifest hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
