use fer_core::detect::{load_cascade_file, CascadeModel, DetectParams};
use fer_core::model::{load_weights, ResNet, ResNetConfig};
use fer_core::pipeline::{decode_image, predict_image, EngagementConfig, FramePrediction, PipelineConfig};
use fer_core::Rng;
use image::{DynamicImage, GenericImageView, ImageFormat};

use crate::config::ServiceConfig;
use crate::error::ServiceError;

/// Seed of the untrained model served in fixture mode.
pub const FIXTURE_SEED: u64 = 0;

/// Model, detector and settings shared by every request.
pub struct Engine {
    pub model: ResNet<f32>,
    pub cascade: CascadeModel,
    pub pipeline: PipelineConfig,
    pub engagement: EngagementConfig,
}

/// A decoded upload.
pub struct Decoded {
    pub image: DynamicImage,
    pub format: &'static str,
    pub width: u32,
    pub height: u32,
}

impl Engine {
    pub fn from_config(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let model = match (&config.weights, config.fixture_mode) {
            (_, true) => ResNet::new(ResNetConfig::narrow(8), &mut Rng::new(FIXTURE_SEED))?,
            (Some(path), false) => load_weights(path)?,
            (None, false) => return Err(ServiceError::Config("weights path required".into())),
        };
        let cascade = load_cascade_file(&config.cascade)?;
        Ok(Self::new(model, cascade, config.tau, config.engagement.clone()))
    }

    pub fn new(model: ResNet<f32>, cascade: CascadeModel, tau: f32, engagement: EngagementConfig) -> Self {
        Self {
            model,
            cascade,
            pipeline: PipelineConfig {
                tau,
                detect: DetectParams::default(),
            },
            engagement,
        }
    }

    pub fn decode(bytes: &[u8]) -> fer_core::Result<Decoded> {
        let image = decode_image(bytes)?;
        let format = match image::guess_format(bytes) {
            Ok(ImageFormat::Png) => "png",
            _ => "jpeg",
        };
        let (width, height) = image.dimensions();
        Ok(Decoded {
            image,
            format,
            width,
            height,
        })
    }

    pub fn predict(&self, image: &DynamicImage) -> fer_core::Result<FramePrediction> {
        predict_image(&self.model, &self.cascade, image, &self.pipeline)
    }
}
