use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{cosine_similarity_map, FeatureStack};
use super::masks::MaskSet;
use super::MetricError;
use crate::format::write_atomic;

/// How per-object scores aggregate into the overall score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Mean over all scored `(frame, object)` instances.
    #[default]
    PerObjectMean,
    /// `(1/T)·Σ_t Σ_k score_{t,k}`: object sums are not divided by `K_t`.
    Eq7Literal,
}

impl FromStr for Normalization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per_object_mean" => Ok(Self::PerObjectMean),
            "eq7_literal" => Ok(Self::Eq7Literal),
            other => Err(format!("unknown normalization {other:?} (per_object_mean | eq7_literal)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Ok,
    /// No mask had a nonzero area; `overall` is null rather than 0.
    NoObjects,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRow {
    pub frame: usize,
    pub object: usize,
    pub label: String,
    pub mask_area: usize,
    /// Null for empty masks.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub similarity: String,
    pub normalization: Normalization,
    pub n_frames: usize,
    pub feature_dim: usize,
    pub feature_height: usize,
    pub feature_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub status: ReportStatus,
    pub overall: Option<f64>,
    pub per_frame_means: Vec<Option<f64>>,
    pub rows: Vec<ObjectRow>,
    pub config: ReportConfig,
    /// Free-form provenance, e.g. which extractor produced the features.
    pub metadata: BTreeMap<String, String>,
}

impl ConsistencyReport {
    /// The documented aggregation of `rows`. Scores are summed in ascending
    /// order, so the result does not depend on object order.
    pub fn aggregate(rows: &[ObjectRow], n_frames: usize, normalization: Normalization) -> Option<f64> {
        let scores: Vec<f64> = rows.iter().filter_map(|r| r.score).collect();
        if scores.is_empty() {
            return None;
        }
        let sum = sorted_sum(scores.clone());
        Some(match normalization {
            Normalization::PerObjectMean => sum / scores.len() as f64,
            Normalization::Eq7Literal => sum / n_frames as f64,
        })
    }

    pub fn recompute_overall(&self) -> Option<f64> {
        Self::aggregate(&self.rows, self.config.n_frames, self.config.normalization)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// One line per object: `frame,object,label,mask_area,score` (empty score for null).
    pub fn to_csv(&self) -> Result<Vec<u8>, MetricError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let out = |e: csv::Error| MetricError::Output(e.to_string());
        w.write_record(["frame", "object", "label", "mask_area", "score"]).map_err(out)?;
        for r in &self.rows {
            w.write_record([
                r.frame.to_string(),
                r.object.to_string(),
                r.label.clone(),
                r.mask_area.to_string(),
                r.score.map(|s| format!("{s:.9}")).unwrap_or_default(),
            ])
            .map_err(out)?;
        }
        w.into_inner().map_err(|e| MetricError::Output(e.to_string()))
    }

    pub fn write(&self, json_path: impl AsRef<Path>, csv_path: impl AsRef<Path>) -> Result<(), MetricError> {
        let csv = self.to_csv()?;
        let (jp, cp) = (json_path.as_ref(), csv_path.as_ref());
        write_atomic(jp, self.to_json().as_bytes()).map_err(|e| MetricError::Output(format!("{}: {e}", jp.display())))?;
        write_atomic(cp, &csv).map_err(|e| MetricError::Output(format!("{}: {e}", cp.display())))
    }
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Masked mean feature similarity per object, aggregated over the video.
/// Masks must already be at feature resolution.
pub fn object_consistency(
    orig: &FeatureStack,
    gen: &FeatureStack,
    masks: &MaskSet,
    normalization: Normalization,
) -> Result<ConsistencyReport, MetricError> {
    orig.ensure_aligned(gen)?;
    let (n_frames, h, w) = (orig.n_frames(), orig.height(), orig.width());
    if masks.n_frames() > n_frames {
        return Err(MetricError::Shape(format!(
            "masks cover {} frames, features only {n_frames}",
            masks.n_frames()
        )));
    }
    for (t, frame) in masks.frames().iter().enumerate() {
        if let Some(m) = frame.iter().find(|m| (m.height(), m.width()) != (h, w)) {
            return Err(MetricError::Shape(format!(
                "frame {t} mask '{}' is {}x{}, features are {h}x{w}; resample first",
                m.label,
                m.height(),
                m.width()
            )));
        }
    }

    let per_frame: Vec<Vec<ObjectRow>> = (0..n_frames)
        .into_par_iter()
        .map(|t| {
            let objects = masks.frame(t);
            if objects.is_empty() {
                return Ok(Vec::new());
            }
            let sim = cosine_similarity_map(orig.frame(t), gen.frame(t))?;
            Ok(objects
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    let area = m.area();
                    let score = (area > 0).then(|| {
                        let sum: f64 = m
                            .bits()
                            .iter()
                            .zip(&sim.values)
                            .filter(|(&b, _)| b == 1)
                            .map(|(_, &s)| s)
                            .sum();
                        sum / area as f64
                    });
                    ObjectRow { frame: t, object: k, label: m.label.clone(), mask_area: area, score }
                })
                .collect())
        })
        .collect::<Result<_, MetricError>>()?;

    let per_frame_means = per_frame
        .iter()
        .map(|rows| {
            let s: Vec<f64> = rows.iter().filter_map(|r| r.score).collect();
            (!s.is_empty()).then(|| s.len() as f64).map(|n| sorted_sum(s) / n)
        })
        .collect();
    let rows: Vec<ObjectRow> = per_frame.into_iter().flatten().collect();
    let overall = ConsistencyReport::aggregate(&rows, n_frames, normalization);
    Ok(ConsistencyReport {
        status: if overall.is_some() { ReportStatus::Ok } else { ReportStatus::NoObjects },
        overall,
        per_frame_means,
        rows,
        config: ReportConfig {
            similarity: "cosine".into(),
            normalization,
            n_frames,
            feature_dim: orig.feature_dim(),
            feature_height: h,
            feature_width: w,
        },
        metadata: BTreeMap::new(),
    })
}
