use serde::{Deserialize, Serialize};

use super::FramePrediction;
use crate::data::NUM_CLASSES;
use crate::error::{invalid, Result};

/// Maps per-frame emotion distributions to a 0-10 engagement score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngagementConfig {
    /// Per-class weight in `[0, 1]`, dataset order.
    pub weights: [f64; NUM_CLASSES],
    /// Frames averaged over.
    pub window_len: usize,
    /// Score of a frame with no detected face.
    pub no_face_score: f64,
}

impl Default for EngagementConfig {
    fn default() -> Self {
        Self {
            weights: [0.7, 0.9, 0.8, 0.3, 0.2, 0.2, 0.3, 0.2],
            window_len: 30,
            no_face_score: 0.0,
        }
    }
}

impl EngagementConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(invalid(format!("engagement weights must lie in [0, 1]: {:?}", self.weights)));
        }
        if self.window_len == 0 {
            return Err(invalid("engagement window_len must be at least 1"));
        }
        if !(0.0..=10.0).contains(&self.no_face_score) {
            return Err(invalid("no_face_score must lie in [0, 10]"));
        }
        Ok(())
    }
}

/// `10 · Σ weight·prob` for the frame's largest face, or the no-face score.
pub fn frame_score(frame: &FramePrediction, config: &EngagementConfig) -> f64 {
    match frame.largest_face() {
        Some(face) => {
            10.0 * face
                .distribution
                .probs
                .iter()
                .zip(&config.weights)
                .map(|(&p, &w)| p as f64 * w)
                .sum::<f64>()
        }
        None => config.no_face_score,
    }
}

/// Mean frame score over the last `window_len` frames, clamped to `[0, 10]`.
pub fn engagement_score(history: &[FramePrediction], config: &EngagementConfig) -> Result<f64> {
    config.validate()?;
    if history.is_empty() {
        return Err(invalid("engagement needs at least one frame"));
    }
    let window = &history[history.len().saturating_sub(config.window_len)..];
    let mean = window.iter().map(|f| frame_score(f, config)).sum::<f64>() / window.len() as f64;
    Ok(mean.clamp(0.0, 10.0))
}
