use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::DenoiserError;
use crate::tensor::{Dims4, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    Depth,
    Segmentation,
    Edge,
}

impl ControlKind {
    pub const ALL: [ControlKind; 3] = [ControlKind::Depth, ControlKind::Segmentation, ControlKind::Edge];
}

impl fmt::Display for ControlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlKind::Depth => "depth",
            ControlKind::Segmentation => "segmentation",
            ControlKind::Edge => "edge",
        })
    }
}

/// Spatial control maps. Any subset may be present, which is what
/// condition-set ablations vary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpatialMaps {
    pub depth: Option<Tensor4>,
    pub segmentation: Option<Tensor4>,
    pub edge: Option<Tensor4>,
}

impl SpatialMaps {
    pub fn get(&self, kind: ControlKind) -> Option<&Tensor4> {
        match kind {
            ControlKind::Depth => self.depth.as_ref(),
            ControlKind::Segmentation => self.segmentation.as_ref(),
            ControlKind::Edge => self.edge.as_ref(),
        }
    }

    pub fn set(&mut self, kind: ControlKind, map: Option<Tensor4>) {
        match kind {
            ControlKind::Depth => self.depth = map,
            ControlKind::Segmentation => self.segmentation = map,
            ControlKind::Edge => self.edge = map,
        }
    }

    /// Present maps in the fixed order depth, segmentation, edge.
    pub fn present(&self) -> impl Iterator<Item = (ControlKind, &Tensor4)> {
        ControlKind::ALL.into_iter().filter_map(|k| self.get(k).map(|m| (k, m)))
    }

    pub fn is_empty(&self) -> bool {
        self.present().next().is_none()
    }

    /// Keeps only the listed kinds.
    pub fn restricted_to(&self, kinds: &[ControlKind]) -> SpatialMaps {
        let mut out = SpatialMaps::default();
        for k in kinds {
            out.set(*k, self.get(*k).cloned());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningBundle {
    pub spatial: Option<Arc<SpatialMaps>>,
    pub text: Arc<[f32]>,
}

impl ConditioningBundle {
    pub fn new(spatial: Option<Arc<SpatialMaps>>, text: Vec<f32>) -> Result<Self, DenoiserError> {
        if let Some(i) = text.iter().position(|v| !v.is_finite()) {
            return Err(DenoiserError::Condition(format!("text embedding has non-finite entry {i}")));
        }
        Ok(Self { spatial, text: text.into() })
    }

    pub fn text_only(text: Vec<f32>) -> Result<Self, DenoiserError> {
        Self::new(None, text)
    }

    /// Same spatial maps, different text.
    pub fn with_text(&self, text: Vec<f32>) -> Result<Self, DenoiserError> {
        Self::new(self.spatial.clone(), text)
    }

    pub fn text_dim(&self) -> usize {
        self.text.len()
    }

    pub fn spatial_maps(&self) -> Option<&SpatialMaps> {
        self.spatial.as_deref().filter(|m| !m.is_empty())
    }

    /// Checks every present map shares `(T, H, W)` with the latent.
    pub fn validate_for(&self, latent: Dims4) -> Result<(), DenoiserError> {
        let Some(maps) = self.spatial.as_deref() else { return Ok(()) };
        for (kind, m) in maps.present() {
            let d = m.dims();
            if d.frames != latent.frames || d.height != latent.height || d.width != latent.width {
                return Err(DenoiserError::Condition(format!(
                    "{kind} map dims {d} not aligned with latent {latent}"
                )));
            }
        }
        Ok(())
    }

    /// True when both bundles carry the same spatial maps (by value).
    pub fn same_spatial(&self, other: &ConditioningBundle) -> bool {
        match (self.spatial_maps(), other.spatial_maps()) {
            (None, None) => true,
            (Some(a), Some(b)) => std::ptr::eq(a, b) || a == b,
            _ => false,
        }
    }
}
