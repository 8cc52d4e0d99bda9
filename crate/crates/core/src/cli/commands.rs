use std::ffi::OsString;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{read_config, resolve_config, Overrides, Resolved, RunConfig, ScheduleConfig};
use super::manifest::{FileRecord, PendingWrites, RunManifest};
use super::CliError;
use crate::denoiser::{text_embed_with_dim, ConditioningBundle};
use crate::format::{encode_tensor, read_tensor};
use crate::metrics::{
    frame_perceptual_distance, object_consistency, toy_feature_extractor, ConsistencyReport, FeatureStack, MaskSet,
    Normalization, PerceptualDistance, ReportStatus,
};
use crate::sampler::{
    enhance, enhance_observed, generate, generate_observed, invert, invert_observed, EnhanceRequest, GuidanceParams,
    InversionGuidance, Phase, Trajectory,
};
use crate::tensor::Tensor4;

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn require_output(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.output.clone().ok_or_else(|| CliError::Config("no output path (set \"output\" or pass --output)".into()))
}

fn bundle(res: &Resolved, prompt: &str) -> Result<ConditioningBundle, CliError> {
    let b = ConditioningBundle::new(res.spatial.clone(), text_embed_with_dim(prompt, res.text_dim))?;
    b.validate_for(res.input.dims())?;
    Ok(b)
}

fn trajectory_dir(res: &Resolved, output: &Path) -> PathBuf {
    match &res.config.trajectory_dir {
        Some(d) => res.path(d),
        None => with_suffix(&output.with_extension(""), "_trajectory"),
    }
}

fn push_trajectory(writes: &mut PendingWrites, dir: &Path, traj: &Trajectory) {
    for (phase, index, _, x) in &traj.states {
        let name = match phase {
            Phase::Inversion => format!("inversion_{index:03}"),
            Phase::Generation => format!("generation_{index:03}"),
        };
        writes.push(format!("trajectory/{name}"), dir.join(format!("{name}.svrt")), encode_tensor(x));
    }
}

/// Adds the manifest to `writes` and commits everything. Returns its path.
fn finish(
    res: &Resolved,
    config_path: &Path,
    command: &str,
    mut writes: PendingWrites,
    default_manifest: PathBuf,
) -> Result<PathBuf, CliError> {
    let mut inputs = std::collections::BTreeMap::new();
    inputs.insert("config".to_string(), FileRecord::read(config_path)?);
    for (role, path) in &res.inputs_read {
        inputs.insert(role.clone(), FileRecord::read(path)?);
    }
    let manifest_path = res.config.manifest.as_ref().map(|m| res.path(m)).unwrap_or(default_manifest);
    let manifest = RunManifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_dir: res.base_dir.display().to_string(),
        config: res.config.clone(),
        schedule: res.schedule.clone(),
        denoiser: res.config.denoiser.kind().into(),
        text_dim: res.text_dim,
        inputs,
        outputs: writes.records(),
    };
    writes.push("manifest", manifest_path.clone(), manifest.to_json().into_bytes());
    writes.commit()?;
    Ok(manifest_path)
}

fn load(config: &Path, overrides: &Overrides, needs_output: bool) -> Result<(Resolved, Option<PathBuf>), CliError> {
    let (cfg, base) = read_config(config, overrides)?;
    let output = if needs_output { Some(require_output(&cfg)?) } else { cfg.output.clone() };
    let res = resolve_config(cfg, base)?;
    let output = output.map(|o| res.path(&o));
    Ok((res, output))
}

fn request<'a>(res: &'a Resolved) -> EnhanceRequest<'a> {
    let c = &res.config;
    let mut req = EnhanceRequest::new(&res.input, &res.schedule, res.denoiser.as_ref());
    req.spatial = res.spatial.clone();
    req.prompt_inv = c.prompts.inv.clone();
    req.prompt_real = c.prompts.real.clone();
    req.prompt_neg = c.prompts.neg.clone();
    req.w_cfg = c.w_cfg;
    req.invert_with_cfg = c.invert_with_cfg;
    req.text_dim = res.text_dim;
    req
}

fn written(command: &str, output: &Path, bytes: &[u8], manifest: &Path) -> Value {
    json!({
        "command": command,
        "output": output.display().to_string(),
        "sha256": super::sha256_hex(bytes),
        "manifest": manifest.display().to_string(),
    })
}

/// Invert-then-generate enhancement of `input` into `output`.
pub fn cmd_enhance(config: &Path, overrides: &Overrides) -> Result<Value, CliError> {
    let (res, output) = load(config, overrides, true)?;
    let output = output.expect("required");
    let req = request(&res);
    let mut traj = Trajectory::default();
    let out = if res.config.dump_trajectory { enhance_observed(&req, &mut traj)? } else { enhance(&req)? };

    let bytes = encode_tensor(&out);
    let mut writes = PendingWrites::default();
    writes.push("output", output.clone(), bytes.clone());
    if res.config.dump_trajectory {
        push_trajectory(&mut writes, &trajectory_dir(&res, &output), &traj);
    }
    let manifest = finish(&res, config, "enhance", writes, with_suffix(&output, ".manifest.json"))?;
    Ok(written("enhance", &output, &bytes, &manifest))
}

/// Inversion of `input` under the inversion prompt.
pub fn cmd_invert(config: &Path, overrides: &Overrides) -> Result<Value, CliError> {
    let (res, output) = load(config, overrides, true)?;
    let output = output.expect("required");
    let cond_inv = bundle(&res, &res.config.prompts.inv)?;
    let guidance = if res.config.invert_with_cfg {
        Some(InversionGuidance { cond_negative: bundle(&res, &res.config.prompts.neg)?, w_cfg: res.config.w_cfg })
    } else {
        None
    };
    let mut traj = Trajectory::default();
    let d = res.denoiser.as_ref();
    let out = if res.config.dump_trajectory {
        invert_observed(&res.input, &res.schedule, d, &cond_inv, guidance.as_ref(), &mut traj)?
    } else {
        invert(&res.input, &res.schedule, d, &cond_inv, guidance.as_ref())?
    };

    let bytes = encode_tensor(&out);
    let mut writes = PendingWrites::default();
    writes.push("output", output.clone(), bytes.clone());
    if res.config.dump_trajectory {
        push_trajectory(&mut writes, &trajectory_dir(&res, &output), &traj);
    }
    let manifest = finish(&res, config, "invert", writes, with_suffix(&output, ".manifest.json"))?;
    Ok(written("invert", &output, &bytes, &manifest))
}

/// Guided sampling from the noise latent in `input`.
pub fn cmd_generate(config: &Path, overrides: &Overrides) -> Result<Value, CliError> {
    let (res, output) = load(config, overrides, true)?;
    let output = output.expect("required");
    let guidance = GuidanceParams::new(
        res.config.w_cfg,
        bundle(&res, &res.config.prompts.real)?,
        bundle(&res, &res.config.prompts.neg)?,
    )?;
    let mut traj = Trajectory::default();
    let d = res.denoiser.as_ref();
    let out = if res.config.dump_trajectory {
        generate_observed(&res.input, &res.schedule, d, &guidance, &mut traj)?
    } else {
        generate(&res.input, &res.schedule, d, &guidance)?
    };

    let bytes = encode_tensor(&out);
    let mut writes = PendingWrites::default();
    writes.push("output", output.clone(), bytes.clone());
    if res.config.dump_trajectory {
        push_trajectory(&mut writes, &trajectory_dir(&res, &output), &traj);
    }
    let manifest = finish(&res, config, "generate", writes, with_suffix(&output, ".manifest.json"))?;
    Ok(written("generate", &output, &bytes, &manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub max_abs_err: f64,
    pub rmse: f64,
    pub n_steps: usize,
}

/// Inverts `input`, regenerates under the same conditioning, and compares.
/// The report is also written to `output` when one is configured.
pub fn cmd_roundtrip(config: &Path, overrides: &Overrides) -> Result<RoundtripReport, CliError> {
    let (res, output) = load(config, overrides, false)?;
    let cond = bundle(&res, &res.config.prompts.inv)?;
    let d = res.denoiser.as_ref();
    let x_t = invert(&res.input, &res.schedule, d, &cond, None)?;
    let guidance = GuidanceParams::new(0.0, cond.clone(), cond)?;
    let back = generate(&x_t, &res.schedule, d, &guidance)?;
    let report = RoundtripReport {
        max_abs_err: back.max_abs_diff(&res.input).map_err(|e| CliError::Config(e.to_string()))?,
        rmse: back.rmse(&res.input).map_err(|e| CliError::Config(e.to_string()))?,
        n_steps: res.schedule.n_steps(),
    };
    if let Some(out) = output {
        let mut writes = PendingWrites::default();
        writes.push("report", out.clone(), serde_json::to_vec_pretty(&report).expect("serializable"));
        finish(&res, config, "roundtrip", writes, with_suffix(&out, ".manifest.json"))?;
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct MetricArgs {
    pub orig: PathBuf,
    pub gen: PathBuf,
    pub masks: PathBuf,
    pub sidecar: PathBuf,
    pub mode: Normalization,
    /// When set, `orig` and `gen` are latents scored through the toy extractor.
    pub toy_stride: Option<usize>,
    pub out: PathBuf,
}

fn features(t: Tensor4, toy_stride: Option<usize>) -> FeatureStack {
    match toy_stride {
        Some(s) => toy_feature_extractor(&t, s),
        None => FeatureStack::new(t),
    }
}

/// Scores `gen` against `orig` with masks brought to feature resolution.
fn score(
    orig: &FeatureStack,
    gen: &FeatureStack,
    masks: &MaskSet,
    mode: Normalization,
    toy_stride: Option<usize>,
) -> Result<(ConsistencyReport, PerceptualDistance), CliError> {
    let masks = masks.resampled(orig.height(), orig.width())?;
    let mut report = object_consistency(orig, gen, &masks, mode)?;
    let source = match toy_stride {
        Some(s) => format!("toy_extractor(stride={s})"),
        None => "external".to_string(),
    };
    report.metadata.insert("features".into(), source);
    let pd = frame_perceptual_distance(orig, gen)?;
    Ok((report, pd))
}

fn push_report(
    writes: &mut PendingWrites,
    prefix: &Path,
    report: &ConsistencyReport,
    pd: &PerceptualDistance,
) -> Result<(), CliError> {
    writes.push("consistency_json", with_suffix(prefix, ".json"), report.to_json().into_bytes());
    writes.push("consistency_csv", with_suffix(prefix, ".csv"), report.to_csv()?);
    writes.push(
        "perceptual_json",
        with_suffix(prefix, "_perceptual.json"),
        serde_json::to_vec_pretty(pd).expect("serializable"),
    );
    Ok(())
}

pub fn cmd_metric(a: &MetricArgs) -> Result<Value, CliError> {
    if a.toy_stride == Some(0) {
        return Err(CliError::Config("--toy-stride must be >= 1".into()));
    }
    let orig = features(read_tensor(&a.orig)?, a.toy_stride);
    let gen = features(read_tensor(&a.gen)?, a.toy_stride);
    let masks = MaskSet::read(&a.masks, &a.sidecar)?;
    let (report, pd) = score(&orig, &gen, &masks, a.mode, a.toy_stride)?;
    let mut writes = PendingWrites::default();
    push_report(&mut writes, &a.out, &report, &pd)?;
    writes.commit()?;
    Ok(json!({
        "command": "metric",
        "status": report.status,
        "overall": report.overall,
        "perceptual_distance": pd.mean,
        "report": with_suffix(&a.out, ".json").display().to_string(),
    }))
}

#[derive(Debug, Clone)]
pub struct SweepArgs {
    pub config: PathBuf,
    pub values: Vec<f64>,
    pub out: PathBuf,
    pub overrides: Overrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub w_cfg: f64,
    pub status: ReportStatus,
    pub consistency: Option<f64>,
    pub perceptual_distance: f64,
    pub output: String,
    pub sha256: String,
}

/// Runs the enhancement once per guidance weight and scores each output
/// against the input with the configured masks and toy extractor.
pub fn cmd_sweep_cfg(a: &SweepArgs) -> Result<Vec<SweepRow>, CliError> {
    if a.values.is_empty() {
        return Err(CliError::Config("no guidance values given".into()));
    }
    if let Some(v) = a.values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(CliError::Config(format!("guidance value {v} must be >= 0")));
    }
    let (cfg, base) = read_config(&a.config, &a.overrides)?;
    let metrics = cfg
        .metrics
        .clone()
        .ok_or_else(|| CliError::Config("sweep-cfg needs a \"metrics\" section".into()))?;
    let mut res = resolve_config(cfg, base)?;
    let masks = MaskSet::read(res.path(&metrics.masks), res.path(&metrics.mask_sidecar))?;
    res.inputs_read.push(("masks".into(), res.path(&metrics.masks)));
    res.inputs_read.push(("mask_sidecar".into(), res.path(&metrics.mask_sidecar)));
    let stride = Some(metrics.stride);
    let orig = toy_feature_extractor(&res.input, metrics.stride);

    let mut writes = PendingWrites::default();
    let mut rows = Vec::new();
    for &w in &a.values {
        let mut req = request(&res);
        req.w_cfg = w;
        let out = enhance(&req)?;
        let gen = toy_feature_extractor(&out, metrics.stride);
        let (report, pd) = score(&orig, &gen, &masks, metrics.mode, stride)?;
        let stem = a.out.join(format!("cfg_{w}"));
        let latent = with_suffix(&stem, ".svrt");
        let bytes = encode_tensor(&out);
        rows.push(SweepRow {
            w_cfg: w,
            status: report.status,
            consistency: report.overall,
            perceptual_distance: pd.mean,
            output: latent.display().to_string(),
            sha256: super::sha256_hex(&bytes),
        });
        writes.push(format!("cfg_{w}/latent"), latent, bytes);
        push_report(&mut writes, &with_suffix(&stem, "_consistency"), &report, &pd)?;
    }

    let mut csv = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    csv.write_record(["w_cfg", "status", "consistency", "perceptual_distance"]).map_err(err)?;
    for r in &rows {
        csv.write_record([
            r.w_cfg.to_string(),
            serde_json::to_value(r.status).expect("serializable").as_str().unwrap_or_default().to_string(),
            r.consistency.map(|c| format!("{c:.9}")).unwrap_or_default(),
            format!("{:.9}", r.perceptual_distance),
        ])
        .map_err(err)?;
    }
    writes.push("sweep_csv", a.out.join("sweep.csv"), csv.into_inner().map_err(|e| CliError::Io(e.to_string()))?);
    writes.push("sweep_json", a.out.join("sweep.json"), serde_json::to_vec_pretty(&rows).expect("serializable"));
    finish(&res, &a.config, "sweep-cfg", writes, a.out.join("manifest.json"))?;
    Ok(rows)
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ScheduleArgs {
    /// Start from the schedule section of this run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_steps: Option<usize>,
    #[arg(long)]
    pub sigma_min: Option<f64>,
    #[arg(long)]
    pub sigma_max: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub sigma_data: Option<f64>,
}

/// The schedule as pretty JSON `{"sigmas": [...], "sigma_data": ...}`.
pub fn cmd_schedule(a: &ScheduleArgs) -> Result<String, CliError> {
    let mut s = match &a.config {
        Some(p) => read_config(p, &Overrides::default())?.0.schedule,
        None => ScheduleConfig::default(),
    };
    if let Some(v) = a.n_steps {
        s.n_steps = v;
    }
    if let Some(v) = a.sigma_min {
        s.sigma_min = v;
    }
    if let Some(v) = a.sigma_max {
        s.sigma_max = v;
    }
    if let Some(v) = a.rho {
        s.rho = v;
    }
    if let Some(v) = a.sigma_data {
        s.sigma_data = v;
    }
    Ok(serde_json::to_string_pretty(&s.build()?).expect("serializable"))
}
