//! Engagement over a stream of frames: a face drifting from happy to sad,
//! with a few frames where no face was found.

use fer_core::detect::DetectionBox;
use fer_core::pipeline::{engagement_score, EmotionDistribution, EngagementConfig, FacePrediction, FramePrediction};

fn main() -> fer_core::Result<()> {
    let cfg = EngagementConfig {
        window_len: 5,
        ..EngagementConfig::default()
    };
    let bbox = DetectionBox {
        x: 10,
        y: 10,
        w: 60,
        h: 60,
        neighbor_count: 8,
    };
    let mut history = Vec::new();
    for t in 0..12u64 {
        let faces = if t % 4 == 3 {
            Vec::new()
        } else {
            let a = t as f32 / 11.0;
            let mut probs = [0.0; 8];
            probs[1] = 1.0 - a;
            probs[3] = a;
            vec![FacePrediction::new(bbox, EmotionDistribution::new(probs)?, 0.4)]
        };
        history.push(FramePrediction {
            timestamp_ms: t * 500,
            faces,
            engagement: None,
        });
        let score = engagement_score(&history, &cfg)?;
        let label = history.last().unwrap().faces.first().map_or("-".to_string(), |f| format!("{} {}", f.label, f.emoji));
        println!("t={:>4}ms {:<14} engagement={score:.3}", t * 500, label);
    }
    Ok(())
}
