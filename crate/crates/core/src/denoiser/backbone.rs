//! Seeded toy backbone with a parallel control branch.
//!
//! Each frame is flattened to `F = C·H·W` values and processed independently:
//!
//! ```text
//! h_0         = W_in·(c_in(σ)·x) + b_in + c_noise(σ)·s
//! main_i      = tanh(A_i·h_{i−1} + b_i + U_i·text)
//! control_i   = K_i·g + G_i·h_{i−1} + e_i            (g = concatenated control maps)
//! final_i     = main_i + 1[i ∈ {1,2,3}]·w_c·control_i
//! n           = W_out·h_B + b_out
//! ```
//!
//! Parameters are drawn uniformly in `[−0.05, 0.05)` from [`SeededRng`] in
//! manifest order: the main path first (input, blocks, output), then the
//! control branch, so removing the branch leaves the main weights intact.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_sigma, finite_output, ConditioningBundle, ControlKind, DenoiserError, DenoiserModel};
use crate::format::{read_tensor, write_atomic, write_tensor};
use crate::precond::{c_in, c_noise};
use crate::rng::SeededRng;
use crate::tensor::{Dims4, Tensor4};

pub const MIN_BLOCKS: usize = 4;
/// One-based indices of the blocks that receive the control residual.
pub const INJECTED_BLOCKS: [usize; 3] = [1, 2, 3];
const INIT_HALF_WIDTH: f32 = 0.05;
const MANIFEST_FORMAT: &str = "svr-backbone-v1";
const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl FrameShape {
    pub fn of(d: Dims4) -> Self {
        Self { channels: d.channels, height: d.height, width: d.width }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlInput {
    pub kind: ControlKind,
    pub channels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneConfig {
    pub frame: FrameShape,
    pub width: usize,
    pub n_blocks: usize,
    pub text_dim: usize,
    pub sigma_data: f64,
    pub control_weight: f64,
    /// Control maps consumed by the branch; empty means no branch.
    pub control: Vec<ControlInput>,
    pub seed: u64,
}

impl BackboneConfig {
    /// Defaults: width 32, 6 blocks, text dim 64, σ_data 0.5, w_c 1, no control.
    pub fn new(frame: FrameShape, seed: u64) -> Self {
        Self {
            frame,
            width: 32,
            n_blocks: 6,
            text_dim: super::TEXT_DIM,
            sigma_data: crate::schedule::DEFAULT_SIGMA_DATA,
            control_weight: 1.0,
            control: Vec::new(),
            seed,
        }
    }

    pub fn with_control(mut self, control: Vec<ControlInput>) -> Self {
        self.control = control;
        self
    }

    fn control_len(&self) -> usize {
        self.control.iter().map(|c| c.channels).sum::<usize>() * self.frame.height * self.frame.width
    }

    fn validate(&self) -> Result<(), DenoiserError> {
        let bad = |m: String| Err(DenoiserError::Params(m));
        if self.frame.len() == 0 || self.width == 0 {
            return bad("frame shape and width must be nonzero".into());
        }
        if self.n_blocks < MIN_BLOCKS {
            return bad(format!("n_blocks must be >= {MIN_BLOCKS}, got {}", self.n_blocks));
        }
        if !(self.sigma_data.is_finite() && self.sigma_data > 0.0) {
            return bad(format!("sigma_data must be > 0, got {}", self.sigma_data));
        }
        if !(self.control_weight.is_finite() && self.control_weight >= 0.0) {
            return bad(format!("control weight must be >= 0, got {}", self.control_weight));
        }
        let mut seen = Vec::new();
        for c in &self.control {
            if c.channels == 0 || seen.contains(&c.kind) {
                return bad(format!("invalid control input {:?}", c));
            }
            seen.push(c.kind);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    fn random(rows: usize, cols: usize, rng: &mut SeededRng) -> Self {
        Self { rows, cols, data: (0..rows * cols).map(|_| rng.symmetric_f32(INIT_HALF_WIDTH)).collect() }
    }

    /// `out += self · v`
    fn mul_add(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        for (row, o) in self.data.chunks_exact(self.cols).zip(out.iter_mut()) {
            *o += row.iter().zip(v).map(|(&w, &x)| w as f64 * x).sum::<f64>();
        }
    }

    fn to_tensor(&self) -> Tensor4 {
        Tensor4::new(Dims4::new(1, 1, self.rows, self.cols), self.data.clone()).expect("finite params")
    }
}

#[derive(Debug, Clone, PartialEq)]
struct BlockParams {
    weight: Matrix,
    bias: Matrix,
    text_weight: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
struct ControlParams {
    map_weight: Matrix,
    state_weight: Matrix,
    bias: Matrix,
}

/// Per-block activations of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTap {
    /// One-based block index.
    pub block: usize,
    pub main: Vec<f64>,
    /// Control residual before weighting, present only where it was added.
    pub control: Option<Vec<f64>>,
    pub final_: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameTrace {
    pub input_state: Vec<f64>,
    pub blocks: Vec<BlockTap>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockBackbone {
    config: BackboneConfig,
    in_weight: Matrix,
    in_bias: Matrix,
    sigma_weight: Matrix,
    blocks: Vec<BlockParams>,
    out_weight: Matrix,
    out_bias: Matrix,
    control: Vec<ControlParams>,
}

impl BlockBackbone {
    pub fn new(config: BackboneConfig) -> Result<Self, DenoiserError> {
        config.validate()?;
        let mut rng = SeededRng::new(config.seed);
        let (w, f, d, g) = (config.width, config.frame.len(), config.text_dim, config.control_len());
        let in_weight = Matrix::random(w, f, &mut rng);
        let in_bias = Matrix::random(1, w, &mut rng);
        let sigma_weight = Matrix::random(1, w, &mut rng);
        let blocks = (0..config.n_blocks)
            .map(|_| BlockParams {
                weight: Matrix::random(w, w, &mut rng),
                bias: Matrix::random(1, w, &mut rng),
                text_weight: Matrix::random(w, d, &mut rng),
            })
            .collect();
        let out_weight = Matrix::random(f, w, &mut rng);
        let out_bias = Matrix::random(1, f, &mut rng);
        let control = if config.control.is_empty() {
            Vec::new()
        } else {
            INJECTED_BLOCKS
                .iter()
                .map(|_| ControlParams {
                    map_weight: Matrix::random(w, g, &mut rng),
                    state_weight: Matrix::random(w, w, &mut rng),
                    bias: Matrix::random(1, w, &mut rng),
                })
                .collect()
        };
        Ok(Self { config, in_weight, in_bias, sigma_weight, blocks, out_weight, out_bias, control })
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn has_control(&self) -> bool {
        !self.control.is_empty()
    }

    pub fn control_weight(&self) -> f64 {
        self.config.control_weight
    }

    pub fn with_control_weight(&self, w_c: f64) -> Result<Self, DenoiserError> {
        let mut out = self.clone();
        out.config.control_weight = w_c;
        out.config.validate()?;
        Ok(out)
    }

    /// Same main path with the control branch dropped.
    pub fn without_control(&self) -> Self {
        let mut out = self.clone();
        out.control.clear();
        out.config.control.clear();
        out
    }

    fn control_active(&self) -> bool {
        self.has_control() && self.config.control_weight != 0.0
    }

    fn check_inputs(&self, x: &Tensor4, sigma: f64, cond: &ConditioningBundle) -> Result<(), DenoiserError> {
        check_sigma(sigma)?;
        if FrameShape::of(x.dims()) != self.config.frame {
            return Err(DenoiserError::Params(format!(
                "latent frame {:?} does not match backbone frame {:?}",
                FrameShape::of(x.dims()),
                self.config.frame
            )));
        }
        if cond.text_dim() != self.config.text_dim {
            return Err(DenoiserError::Condition(format!(
                "text embedding dim {} != backbone text dim {}",
                cond.text_dim(),
                self.config.text_dim
            )));
        }
        cond.validate_for(x.dims())?;
        if self.control_active() {
            let maps = cond
                .spatial_maps()
                .ok_or_else(|| DenoiserError::Condition("control branch enabled but no spatial maps given".into()))?;
            for c in &self.config.control {
                let m = maps
                    .get(c.kind)
                    .ok_or_else(|| DenoiserError::Condition(format!("missing {} map", c.kind)))?;
                if m.dims().channels != c.channels {
                    return Err(DenoiserError::Condition(format!(
                        "{} map has {} channels, backbone expects {}",
                        c.kind,
                        m.dims().channels,
                        c.channels
                    )));
                }
            }
        }
        Ok(())
    }

    fn control_vector(&self, cond: &ConditioningBundle, t: usize) -> Vec<f64> {
        let maps = cond.spatial_maps().expect("checked");
        let mut g = Vec::with_capacity(self.config.control_len());
        for c in &self.config.control {
            g.extend(maps.get(c.kind).expect("checked").frame(t).iter().map(|&v| v as f64));
        }
        g
    }

    fn run_frame(&self, x: &Tensor4, t: usize, sigma: f64, cond: &ConditioningBundle, trace: bool) -> (Vec<f32>, Option<FrameTrace>) {
        let w = self.config.width;
        let scale = c_in(sigma, self.config.sigma_data);
        let noise = c_noise(sigma);
        let xin: Vec<f64> = x.frame(t).iter().map(|&v| v as f64 * scale).collect();
        let mut h: Vec<f64> = self
            .in_bias
            .data
            .iter()
            .zip(&self.sigma_weight.data)
            .map(|(&b, &s)| b as f64 + noise * s as f64)
            .collect();
        self.in_weight.mul_add(&xin, &mut h);

        let text: Vec<f64> = cond.text.iter().map(|&v| v as f64).collect();
        let active = self.control_active();
        let g = if active { self.control_vector(cond, t) } else { Vec::new() };
        let w_c = self.config.control_weight;
        let mut tr = trace.then(|| FrameTrace { input_state: h.clone(), blocks: Vec::new() });

        for (i, block) in self.blocks.iter().enumerate() {
            let index = i + 1;
            let mut pre: Vec<f64> = block.bias.data.iter().map(|&b| b as f64).collect();
            block.weight.mul_add(&h, &mut pre);
            block.text_weight.mul_add(&text, &mut pre);
            let main: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();

            let injected = active && INJECTED_BLOCKS.contains(&index);
            let (fin, control) = if injected {
                let cp = &self.control[index - 1];
                let mut ctrl: Vec<f64> = cp.bias.data.iter().map(|&b| b as f64).collect();
                cp.map_weight.mul_add(&g, &mut ctrl);
                cp.state_weight.mul_add(&h, &mut ctrl);
                let fin: Vec<f64> = main.iter().zip(&ctrl).map(|(m, c)| m + w_c * c).collect();
                (fin, Some(ctrl))
            } else {
                (main.clone(), None)
            };
            debug_assert_eq!(fin.len(), w);
            if let Some(tr) = tr.as_mut() {
                tr.blocks.push(BlockTap { block: index, main, control, final_: fin.clone() });
            }
            h = fin;
        }

        let mut out: Vec<f64> = self.out_bias.data.iter().map(|&b| b as f64).collect();
        self.out_weight.mul_add(&h, &mut out);
        (out.into_iter().map(|v| v as f32).collect(), tr)
    }

    fn forward(
        &self,
        x: &Tensor4,
        sigma: f64,
        cond: &ConditioningBundle,
        trace: bool,
    ) -> Result<(Tensor4, Vec<FrameTrace>), DenoiserError> {
        self.check_inputs(x, sigma, cond)?;
        let frames: Vec<(Vec<f32>, Option<FrameTrace>)> = (0..x.dims().frames)
            .into_par_iter()
            .map(|t| self.run_frame(x, t, sigma, cond, trace))
            .collect();
        let mut data = Vec::with_capacity(x.len());
        let mut traces = Vec::new();
        for (d, tr) in frames {
            data.extend(d);
            traces.extend(tr);
        }
        Ok((finite_output(Tensor4::new(x.dims(), data), sigma)?, traces))
    }

    /// Prediction plus per-frame, per-block activations.
    pub fn predict_traced(
        &self,
        x: &Tensor4,
        sigma: f64,
        cond: &ConditioningBundle,
    ) -> Result<(Tensor4, Vec<FrameTrace>), DenoiserError> {
        self.forward(x, sigma, cond, true)
    }

    fn named_params(&self) -> Vec<(String, &Matrix)> {
        let mut v: Vec<(String, &Matrix)> = vec![
            ("in_weight".into(), &self.in_weight),
            ("in_bias".into(), &self.in_bias),
            ("sigma_weight".into(), &self.sigma_weight),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            v.push((format!("block{}.weight", i + 1), &b.weight));
            v.push((format!("block{}.bias", i + 1), &b.bias));
            v.push((format!("block{}.text_weight", i + 1), &b.text_weight));
        }
        v.push(("out_weight".into(), &self.out_weight));
        v.push(("out_bias".into(), &self.out_bias));
        for (i, c) in self.control.iter().enumerate() {
            v.push((format!("control{}.map_weight", i + 1), &c.map_weight));
            v.push((format!("control{}.state_weight", i + 1), &c.state_weight));
            v.push((format!("control{}.bias", i + 1), &c.bias));
        }
        v
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut v: Vec<(String, &mut Matrix)> = vec![
            ("in_weight".into(), &mut self.in_weight),
            ("in_bias".into(), &mut self.in_bias),
            ("sigma_weight".into(), &mut self.sigma_weight),
        ];
        for (i, b) in self.blocks.iter_mut().enumerate() {
            v.push((format!("block{}.weight", i + 1), &mut b.weight));
            v.push((format!("block{}.bias", i + 1), &mut b.bias));
            v.push((format!("block{}.text_weight", i + 1), &mut b.text_weight));
        }
        v.push(("out_weight".into(), &mut self.out_weight));
        v.push(("out_bias".into(), &mut self.out_bias));
        for (i, c) in self.control.iter_mut().enumerate() {
            v.push((format!("control{}.map_weight", i + 1), &mut c.map_weight));
            v.push((format!("control{}.state_weight", i + 1), &mut c.state_weight));
            v.push((format!("control{}.bias", i + 1), &mut c.bias));
        }
        v
    }

    /// Writes `manifest.json` plus one SVRT file per parameter into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), DenoiserError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| DenoiserError::Manifest(format!("{}: {e}", dir.display())))?;
        let mut entries = Vec::new();
        for (name, m) in self.named_params() {
            let file = format!("{name}.svrt");
            write_tensor(dir.join(&file), &m.to_tensor())?;
            entries.push(TensorEntry { name, file, rows: m.rows, cols: m.cols });
        }
        let manifest = Manifest { format: MANIFEST_FORMAT.into(), config: self.config.clone(), tensors: entries };
        let json = serde_json::to_vec_pretty(&manifest).expect("serializable");
        let path = dir.join(MANIFEST_FILE);
        write_atomic(&path, &json).map_err(|e| DenoiserError::Manifest(format!("{}: {e}", path.display())))
    }

    /// Loads parameters saved by [`BlockBackbone::save`]; stored tensors take
    /// precedence over the seed in the manifest.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, DenoiserError> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST_FILE);
        let bytes = std::fs::read(&path).map_err(|e| DenoiserError::Manifest(format!("{}: {e}", path.display())))?;
        let manifest: Manifest =
            serde_json::from_slice(&bytes).map_err(|e| DenoiserError::Manifest(format!("{}: {e}", path.display())))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(DenoiserError::Manifest(format!("unknown format {:?}", manifest.format)));
        }
        let mut model = Self::new(manifest.config)?;
        let mut expected = model.named_params_mut();
        if expected.len() != manifest.tensors.len() {
            return Err(DenoiserError::Manifest(format!(
                "expected {} tensors, manifest lists {}",
                expected.len(),
                manifest.tensors.len()
            )));
        }
        for ((name, slot), entry) in expected.iter_mut().zip(&manifest.tensors) {
            if *name != entry.name || slot.rows != entry.rows || slot.cols != entry.cols {
                return Err(DenoiserError::Manifest(format!("unexpected tensor entry {:?}", entry.name)));
            }
            let t = read_tensor(dir.join(&entry.file))?;
            if t.dims() != Dims4::new(1, 1, entry.rows, entry.cols) {
                return Err(DenoiserError::Manifest(format!("{}: dims {}", entry.file, t.dims())));
            }
            slot.data = t.into_data();
        }
        drop(expected);
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    file: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    config: BackboneConfig,
    tensors: Vec<TensorEntry>,
}

impl DenoiserModel for BlockBackbone {
    fn predict(&self, x: &Tensor4, sigma: f64, cond: &ConditioningBundle) -> Result<Tensor4, DenoiserError> {
        self.forward(x, sigma, cond, false).map(|(t, _)| t)
    }

    fn name(&self) -> &'static str {
        "backbone"
    }
}
