//! From an image to per-face emotions, emojis and an engagement score.

mod emotion;
mod engagement;
mod preprocess;

use std::time::{SystemTime, UNIX_EPOCH};

use image::DynamicImage;
use serde::{Deserialize, Serialize};

pub use emotion::{decide_label, to_emoji, EmotionDistribution, EmotionLabel, DEFAULT_TAU};
pub use engagement::{engagement_score, frame_score, EngagementConfig};
pub use preprocess::{bilinear_resample, decode_image, luma, preprocess_roi, resize_bilinear, to_gray};

use crate::data::NUM_CLASSES;
use crate::detect::{detect_multiscale, CascadeModel, DetectParams, DetectionBox};
use crate::error::{invalid, Result};
use crate::model::ResNet;
use crate::tensor::{softmax, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacePrediction {
    #[serde(rename = "box")]
    pub bbox: DetectionBox,
    pub distribution: EmotionDistribution,
    pub label: EmotionLabel,
    pub emoji: char,
}

impl FacePrediction {
    pub fn new(bbox: DetectionBox, distribution: EmotionDistribution, tau: f32) -> Self {
        let label = decide_label(&distribution, tau);
        Self {
            bbox,
            distribution,
            label,
            emoji: to_emoji(label),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FramePrediction {
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    /// Faces sorted by `(y, x)`.
    pub faces: Vec<FacePrediction>,
    /// 0-10 when computed over a session history.
    pub engagement: Option<f64>,
}

impl FramePrediction {
    /// Largest box by area, ties to the first in order.
    pub fn largest_face(&self) -> Option<&FacePrediction> {
        self.faces
            .iter()
            .fold(None, |best: Option<&FacePrediction>, f| match best {
                Some(b) if b.bbox.rect().area() >= f.bbox.rect().area() => Some(b),
                _ => Some(f),
            })
    }
}

/// Softmax over the model's logits for a batch of `[1, 48, 48]` ROIs.
pub fn classify_rois(model: &ResNet<f32>, rois: &[Tensor<f32>]) -> Result<Vec<EmotionDistribution>> {
    if rois.is_empty() {
        return Ok(Vec::new());
    }
    if model.num_classes() != NUM_CLASSES {
        return Err(invalid(format!("pipeline needs an {NUM_CLASSES}-class model")));
    }
    let batch = Tensor::stack(&rois.iter().collect::<Vec<_>>())?;
    let probs = softmax(&model.infer(&batch)?)?;
    Ok(probs
        .data()
        .chunks_exact(NUM_CLASSES)
        .map(|row| EmotionDistribution {
            probs: row.try_into().unwrap(),
        })
        .collect())
}

pub fn classify_roi(model: &ResNet<f32>, roi: &Tensor<f32>) -> Result<EmotionDistribution> {
    Ok(classify_rois(model, std::slice::from_ref(roi))?[0])
}

/// Settings for [`predict_image`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub tau: f32,
    pub detect: DetectParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            detect: DetectParams::default(),
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Per-face predictions, in detector order.
pub fn predict_faces(
    model: &ResNet<f32>,
    cascade: &CascadeModel,
    image: &DynamicImage,
    config: &PipelineConfig,
) -> Result<Vec<FacePrediction>> {
    let gray = to_gray(image);
    let boxes = detect_multiscale(cascade, &gray, &config.detect)?;
    let gray = DynamicImage::ImageLuma8(gray);
    let rois = boxes
        .iter()
        .map(|b| preprocess_roi(&gray, b.rect()))
        .collect::<Result<Vec<_>>>()?;
    let dists = classify_rois(model, &rois)?;
    Ok(boxes
        .into_iter()
        .zip(dists)
        .map(|(b, d)| FacePrediction::new(b, d, config.tau))
        .collect())
}

/// Detects faces and classifies each one. The engagement field is left for
/// the caller, which owns the frame history.
pub fn predict_image(
    model: &ResNet<f32>,
    cascade: &CascadeModel,
    image: &DynamicImage,
    config: &PipelineConfig,
) -> Result<FramePrediction> {
    Ok(FramePrediction {
        timestamp_ms: now_ms(),
        faces: predict_faces(model, cascade, image, config)?,
        engagement: None,
    })
}
