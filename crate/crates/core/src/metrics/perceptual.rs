//! Perceptual-distance slot shaped like LPIPS: per-frame mean of
//! `1 − cos` over feature pixels, averaged across frames. Any encoder that
//! exports `(T, D, H', W')` feature stacks can feed it.

use serde::{Deserialize, Serialize};

use super::features::{cosine_similarity_map, FeatureStack};
use super::MetricError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptualDistance {
    pub per_frame: Vec<f64>,
    pub mean: f64,
}

pub fn frame_perceptual_distance(orig: &FeatureStack, gen: &FeatureStack) -> Result<PerceptualDistance, MetricError> {
    orig.ensure_aligned(gen)?;
    let per_frame = (0..orig.n_frames())
        .map(|t| {
            let sim = cosine_similarity_map(orig.frame(t), gen.frame(t))?;
            Ok(sim.values.iter().map(|s| 1.0 - s).sum::<f64>() / sim.values.len() as f64)
        })
        .collect::<Result<Vec<f64>, MetricError>>()?;
    let mean = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
    Ok(PerceptualDistance { per_frame, mean })
}
