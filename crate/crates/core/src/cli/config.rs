//! JSON run configuration. Unknown keys are rejected; relative paths are
//! resolved against the directory holding the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::denoiser::{
    BackboneConfig, BlockBackbone, ConstantDenoiser, ControlInput, ControlKind, DenoiserModel, FrameShape,
    GaussianAnalyticDenoiser, SpatialMaps, TEXT_DIM,
};
use crate::format::read_tensor;
use crate::metrics::Normalization;
use crate::schedule::{self, make_power_schedule, NoiseSchedule};
use crate::tensor::{Dims4, Tensor4};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "default_sigma_min")]
    pub sigma_min: f64,
    #[serde(default = "default_sigma_max")]
    pub sigma_max: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_sigma_data")]
    pub sigma_data: f64,
}

fn default_steps() -> usize {
    schedule::DEFAULT_STEPS
}
fn default_sigma_min() -> f64 {
    schedule::DEFAULT_SIGMA_MIN
}
fn default_sigma_max() -> f64 {
    schedule::DEFAULT_SIGMA_MAX
}
fn default_rho() -> f64 {
    schedule::DEFAULT_RHO
}
fn default_sigma_data() -> f64 {
    schedule::DEFAULT_SIGMA_DATA
}
fn default_w_cfg() -> f64 {
    7.0
}
fn default_w_c() -> f64 {
    1.0
}
fn default_stride() -> usize {
    1
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            n_steps: default_steps(),
            sigma_min: default_sigma_min(),
            sigma_max: default_sigma_max(),
            rho: default_rho(),
            sigma_data: default_sigma_data(),
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<NoiseSchedule, CliError> {
        make_power_schedule(self.n_steps, self.sigma_min, self.sigma_max, self.rho)
            .and_then(|s| s.with_sigma_data(self.sigma_data))
            .map_err(|e| CliError::Config(format!("schedule: {e}")))
    }
}

/// A tensor given inline as a broadcast scalar or as an SVRT file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorSource {
    Scalar(f32),
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DenoiserSpec {
    /// Clean estimate fixed at `value` everywhere.
    Constant { value: f32 },
    /// Clean estimate fixed at the tensor in `path`.
    Target { path: PathBuf },
    Gaussian { mean: TensorSource, var: TensorSource },
    /// Seeded toy backbone. `control` defaults to every spatial map given.
    Backbone {
        #[serde(default)]
        width: Option<usize>,
        #[serde(default)]
        n_blocks: Option<usize>,
        #[serde(default)]
        control: Option<Vec<ControlKind>>,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Backbone parameters saved as an SVRT directory with a manifest.
    BackboneManifest { dir: PathBuf },
}

impl DenoiserSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            DenoiserSpec::Constant { .. } => "constant",
            DenoiserSpec::Target { .. } => "target",
            DenoiserSpec::Gaussian { .. } => "gaussian",
            DenoiserSpec::Backbone { .. } => "backbone",
            DenoiserSpec::BackboneManifest { .. } => "backbone_manifest",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prompts {
    #[serde(default)]
    pub inv: String,
    #[serde(default)]
    pub real: String,
    #[serde(default)]
    pub neg: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<PathBuf>,
}

impl SpatialPaths {
    pub fn entries(&self) -> Vec<(ControlKind, &PathBuf)> {
        let mut v = Vec::new();
        for (k, p) in [
            (ControlKind::Depth, &self.depth),
            (ControlKind::Segmentation, &self.segmentation),
            (ControlKind::Edge, &self.edge),
        ] {
            if let Some(p) = p {
                v.push((k, p));
            }
        }
        v
    }
}

/// Inputs for scoring enhanced latents against their source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    pub masks: PathBuf,
    pub mask_sidecar: PathBuf,
    /// Stride of the toy feature extractor.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub mode: Normalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub schedule: ScheduleConfig,
    pub denoiser: DenoiserSpec,
    #[serde(default)]
    pub prompts: Prompts,
    #[serde(default = "default_w_cfg")]
    pub w_cfg: f64,
    #[serde(default = "default_w_c")]
    pub w_c: f64,
    #[serde(default)]
    pub invert_with_cfg: bool,
    pub input: PathBuf,
    #[serde(default)]
    pub spatial: SpatialPaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub dump_trajectory: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsConfig>,
}

/// Scalar fields that command-line flags may override.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub n_steps: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub w_cfg: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub w_c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.n_steps {
            self.schedule.n_steps = n;
        }
        if let Some(w) = o.w_cfg {
            self.w_cfg = w;
        }
        if let Some(w) = o.w_c {
            self.w_c = w;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.output {
            self.output = Some(p.clone());
        }
    }

    /// Checks everything that does not need file contents.
    pub fn validate(&self) -> Result<NoiseSchedule, CliError> {
        let schedule = self.schedule.build()?;
        if !(self.w_cfg.is_finite() && self.w_cfg >= 0.0) {
            return Err(CliError::Config(format!("w_cfg must be >= 0, got {}", self.w_cfg)));
        }
        if !(self.w_c.is_finite() && self.w_c >= 0.0) {
            return Err(CliError::Config(format!("w_c must be >= 0, got {}", self.w_c)));
        }
        if let DenoiserSpec::Backbone { control: Some(kinds), .. } = &self.denoiser {
            for k in kinds {
                if !self.spatial.entries().iter().any(|(kk, _)| kk == k) {
                    return Err(CliError::Config(format!("backbone control uses {k} but no {k} map is configured")));
                }
            }
        }
        if let Some(m) = &self.metrics {
            if m.stride == 0 {
                return Err(CliError::Config("metrics.stride must be >= 1".into()));
            }
        }
        Ok(schedule)
    }
}

/// A loaded configuration: validated parameters plus file contents.
pub struct Resolved {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub schedule: NoiseSchedule,
    pub input: Tensor4,
    pub spatial: Option<Arc<SpatialMaps>>,
    pub denoiser: Box<dyn DenoiserModel>,
    pub text_dim: usize,
    /// Every file read, as (role, resolved path).
    pub inputs_read: Vec<(String, PathBuf)>,
}

impl Resolved {
    pub fn path(&self, p: &Path) -> PathBuf {
        resolve(&self.base_dir, p)
    }
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn read_config(path: &Path, overrides: &Overrides) -> Result<(RunConfig, PathBuf), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut config = RunConfig::from_json(&text)?;
    config.apply(overrides);
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

fn load(base: &Path, p: &Path, role: &str, read: &mut Vec<(String, PathBuf)>) -> Result<Tensor4, CliError> {
    let full = resolve(base, p);
    let t = read_tensor(&full).map_err(CliError::from)?;
    read.push((role.to_string(), full));
    Ok(t)
}

fn load_source(
    base: &Path,
    src: &TensorSource,
    dims: Dims4,
    role: &str,
    read: &mut Vec<(String, PathBuf)>,
) -> Result<Tensor4, CliError> {
    match src {
        TensorSource::Scalar(v) => Tensor4::filled(dims, *v).map_err(|e| CliError::Config(format!("{role}: {e}"))),
        TensorSource::Path(p) => {
            let t = load(base, p, role, read)?;
            if t.dims() != dims {
                return Err(CliError::Config(format!("{role} dims {} != input dims {dims}", t.dims())));
            }
            Ok(t)
        }
    }
}

/// Validates, then reads every referenced file and builds the denoiser.
pub fn resolve_config(config: RunConfig, base_dir: PathBuf) -> Result<Resolved, CliError> {
    let schedule = config.validate()?;
    let mut read = Vec::new();
    let input = load(&base_dir, &config.input, "input", &mut read)?;
    let dims = input.dims();

    let mut maps = SpatialMaps::default();
    for (kind, p) in config.spatial.entries() {
        maps.set(kind, Some(load(&base_dir, p, &kind.to_string(), &mut read)?));
    }
    let spatial = (!maps.is_empty()).then(|| Arc::new(maps));
    if let Some(m) = &spatial {
        crate::denoiser::ConditioningBundle::new(Some(m.clone()), vec![])
            .and_then(|b| b.validate_for(dims))
            .map_err(|e| CliError::Config(e.to_string()))?;
    }

    let sd = config.schedule.sigma_data;
    let as_config = |e: crate::denoiser::DenoiserError| CliError::Config(format!("denoiser: {e}"));
    let (denoiser, text_dim): (Box<dyn DenoiserModel>, usize) = match &config.denoiser {
        DenoiserSpec::Constant { value } => (Box::new(ConstantDenoiser::scalar(*value, sd).map_err(as_config)?), TEXT_DIM),
        DenoiserSpec::Target { path } => {
            let t = load(&base_dir, path, "target", &mut read)?;
            if t.dims() != dims {
                return Err(CliError::Config(format!("target dims {} != input dims {dims}", t.dims())));
            }
            (Box::new(ConstantDenoiser::tensor(t, sd).map_err(as_config)?), TEXT_DIM)
        }
        DenoiserSpec::Gaussian { mean, var } => {
            let mean = load_source(&base_dir, mean, dims, "gaussian_mean", &mut read)?;
            let var = load_source(&base_dir, var, dims, "gaussian_var", &mut read)?;
            (Box::new(GaussianAnalyticDenoiser::new(mean, var, sd).map_err(as_config)?), TEXT_DIM)
        }
        DenoiserSpec::Backbone { width, n_blocks, control, seed } => {
            let kinds: Vec<ControlKind> = match control {
                Some(k) => k.clone(),
                None => config.spatial.entries().iter().map(|(k, _)| *k).collect(),
            };
            let controls = kinds
                .iter()
                .map(|k| {
                    let m = spatial.as_ref().and_then(|s| s.get(*k)).expect("validated");
                    ControlInput { kind: *k, channels: m.dims().channels }
                })
                .collect();
            let mut bc = BackboneConfig::new(FrameShape::of(dims), seed.unwrap_or(config.seed)).with_control(controls);
            if let Some(w) = width {
                bc.width = *w;
            }
            if let Some(n) = n_blocks {
                bc.n_blocks = *n;
            }
            bc.sigma_data = sd;
            bc.control_weight = config.w_c;
            let text_dim = bc.text_dim;
            (Box::new(BlockBackbone::new(bc).map_err(as_config)?), text_dim)
        }
        DenoiserSpec::BackboneManifest { dir } => {
            let full = resolve(&base_dir, dir);
            let bb = BlockBackbone::load(&full).map_err(|e| match e {
                crate::denoiser::DenoiserError::Format(f) => CliError::from(f),
                crate::denoiser::DenoiserError::Manifest(m) => CliError::Io(m),
                other => as_config(other),
            })?;
            read.push(("backbone_manifest".into(), full.join("manifest.json")));
            if bb.config().frame != FrameShape::of(dims) {
                return Err(CliError::Config("backbone frame shape does not match input".into()));
            }
            if (bb.config().sigma_data - sd).abs() > 1e-12 * sd {
                return Err(CliError::Config("backbone sigma_data differs from schedule".into()));
            }
            let bb = bb.with_control_weight(config.w_c).map_err(as_config)?;
            let text_dim = bb.config().text_dim;
            (Box::new(bb), text_dim)
        }
    };

    Ok(Resolved { config, base_dir, schedule, input, spatial, denoiser, text_dim, inputs_read: read })
}
