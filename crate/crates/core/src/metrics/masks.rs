use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::format::{read_tensor, write_atomic, write_tensor};
use crate::tensor::{Dims4, Tensor4};

/// Binary object mask with its label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectMask {
    pub label: String,
    height: usize,
    width: usize,
    bits: Vec<u8>,
}

impl ObjectMask {
    pub fn new(label: impl Into<String>, height: usize, width: usize, bits: Vec<u8>) -> Result<Self, MetricError> {
        if height == 0 || width == 0 || bits.len() != height * width {
            return Err(MetricError::Mask(format!(
                "mask of {}x{} needs {} cells, got {}",
                height,
                width,
                height * width,
                bits.len()
            )));
        }
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return Err(MetricError::Mask(format!("non-binary value {} at cell {i}", bits[i])));
        }
        Ok(Self { label: label.into(), height, width, bits })
    }

    pub fn from_fn(
        label: impl Into<String>,
        height: usize,
        width: usize,
        f: impl Fn(usize, usize) -> bool,
    ) -> Result<Self, MetricError> {
        let bits = (0..height * width).map(|i| f(i / width, i % width) as u8).collect();
        Self::new(label, height, width, bits)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x] == 1
    }

    pub fn area(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }
}

/// Nearest-neighbor subsampling at cell centers: target cell `(i, j)` reads
/// source `(⌊(i + ½)·H/H'⌋, ⌊(j + ½)·W/W'⌋)`. Upsampling is rejected.
pub fn resample_mask(mask: &ObjectMask, height: usize, width: usize) -> Result<ObjectMask, MetricError> {
    if height == 0 || width == 0 {
        return Err(MetricError::Mask("target resolution must be nonzero".into()));
    }
    if height > mask.height || width > mask.width {
        return Err(MetricError::Unsupported(format!(
            "mask upsampling {}x{} -> {}x{}",
            mask.height, mask.width, height, width
        )));
    }
    let bits = (0..height * width)
        .map(|k| {
            let (i, j) = (k / width, k % width);
            let sy = (2 * i + 1) * mask.height / (2 * height);
            let sx = (2 * j + 1) * mask.width / (2 * width);
            mask.bits[sy * mask.width + sx]
        })
        .collect();
    ObjectMask::new(mask.label.clone(), height, width, bits)
}

/// JSON sidecar describing a mask tensor `(N, 1, H, W)`: entry `i` of each
/// array belongs to mask `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSidecar {
    pub labels: Vec<String>,
    pub frame_index: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_frames: Option<usize>,
}

/// Object masks grouped by frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaskSet {
    frames: Vec<Vec<ObjectMask>>,
}

impl MaskSet {
    /// Validates that masks within each frame share one resolution.
    pub fn new(frames: Vec<Vec<ObjectMask>>) -> Result<Self, MetricError> {
        for (t, masks) in frames.iter().enumerate() {
            if let Some(first) = masks.first() {
                if masks.iter().any(|m| (m.height, m.width) != (first.height, first.width)) {
                    return Err(MetricError::Mask(format!("frame {t} mixes mask resolutions")));
                }
            }
        }
        Ok(Self { frames })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, t: usize) -> &[ObjectMask] {
        self.frames.get(t).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn frames(&self) -> &[Vec<ObjectMask>] {
        &self.frames
    }

    pub fn n_masks(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    /// Resamples every mask to `(height, width)`; masks already there are kept.
    pub fn resampled(&self, height: usize, width: usize) -> Result<MaskSet, MetricError> {
        let frames = self
            .frames
            .iter()
            .map(|ms| {
                ms.iter()
                    .map(|m| {
                        if (m.height, m.width) == (height, width) {
                            Ok(m.clone())
                        } else {
                            resample_mask(m, height, width)
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        MaskSet::new(frames)
    }

    pub fn from_tensor(tensor: Option<&Tensor4>, sidecar: &MaskSidecar) -> Result<Self, MetricError> {
        let n = sidecar.labels.len();
        if sidecar.frame_index.len() != n {
            return Err(MetricError::Sidecar(format!(
                "{} labels but {} frame indices",
                n,
                sidecar.frame_index.len()
            )));
        }
        let max_frame = sidecar.frame_index.iter().max().map_or(0, |m| m + 1);
        let n_frames = sidecar.n_frames.unwrap_or(max_frame);
        if max_frame > n_frames {
            return Err(MetricError::Sidecar(format!("frame index {} >= n_frames {n_frames}", max_frame - 1)));
        }
        let mut frames = vec![Vec::new(); n_frames];
        if n > 0 {
            let tensor = tensor.ok_or_else(|| MetricError::Sidecar("labels given without a mask tensor".into()))?;
            let d = tensor.dims();
            if d.frames != n || d.channels != 1 {
                return Err(MetricError::Mask(format!("mask tensor dims {d} do not match {n} labels")));
            }
            for (i, (label, &t)) in sidecar.labels.iter().zip(&sidecar.frame_index).enumerate() {
                let bits = tensor
                    .frame(i)
                    .iter()
                    .map(|&v| match v {
                        v if v == 0.0 => Ok(0u8),
                        v if v == 1.0 => Ok(1u8),
                        v => Err(MetricError::Mask(format!("mask {i} has non-binary value {v}"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                frames[t].push(ObjectMask::new(label.clone(), d.height, d.width, bits)?);
            }
        }
        MaskSet::new(frames)
    }

    /// Flattens to a `(N, 1, H, W)` tensor plus sidecar. `None` when there are
    /// no masks or resolutions differ across frames.
    pub fn to_tensor(&self) -> Option<(Tensor4, MaskSidecar)> {
        let first = self.frames.iter().flatten().next()?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::new();
        let mut sidecar = MaskSidecar { labels: Vec::new(), frame_index: Vec::new(), n_frames: Some(self.frames.len()) };
        for (t, ms) in self.frames.iter().enumerate() {
            for m in ms {
                if (m.height, m.width) != (h, w) {
                    return None;
                }
                data.extend(m.bits.iter().map(|&b| b as f32));
                sidecar.labels.push(m.label.clone());
                sidecar.frame_index.push(t);
            }
        }
        let t = Tensor4::new(Dims4::new(sidecar.labels.len(), 1, h, w), data).ok()?;
        Some((t, sidecar))
    }

    /// Reads a sidecar and, when it lists any masks, the tensor next to it.
    pub fn read(tensor_path: impl AsRef<Path>, sidecar_path: impl AsRef<Path>) -> Result<Self, MetricError> {
        let sp = sidecar_path.as_ref();
        let bytes = std::fs::read(sp)
            .map_err(|e| MetricError::Format(crate::format::FormatError::Io { path: sp.to_path_buf(), source: e }))?;
        let sidecar: MaskSidecar =
            serde_json::from_slice(&bytes).map_err(|e| MetricError::Sidecar(format!("{}: {e}", sp.display())))?;
        let tensor = if sidecar.labels.is_empty() { None } else { Some(read_tensor(tensor_path)?) };
        Self::from_tensor(tensor.as_ref(), &sidecar)
    }

    pub fn write(&self, tensor_path: impl AsRef<Path>, sidecar_path: impl AsRef<Path>) -> Result<(), MetricError> {
        let (tensor, sidecar) = self
            .to_tensor()
            .ok_or_else(|| MetricError::Mask("mask set is empty or mixes resolutions".into()))?;
        write_tensor(tensor_path, &tensor)?;
        let json = serde_json::to_vec_pretty(&sidecar).expect("serializable");
        let sp = sidecar_path.as_ref();
        write_atomic(sp, &json).map_err(|e| MetricError::Output(format!("{}: {e}", sp.display())))
    }
}
