//! Full pipeline on one image: detect, crop, classify, label and emoji.
//! Uses trained weights when given, else a seeded untrained network.
//!
//! `cargo run -p fer-core --example predict_image -- [image] [weights.ferw]`

use std::path::PathBuf;

use fer_core::data::EMOTIONS;
use fer_core::detect::load_cascade_file;
use fer_core::model::{load_weights, ResNet, ResNetConfig};
use fer_core::pipeline::{decode_image, predict_image, PipelineConfig};
use fer_core::Rng;

fn main() -> fer_core::Result<()> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let mut args = std::env::args().skip(1);
    let image = args.next().map_or(fixtures.join("images/face.png"), PathBuf::from);
    let model = match args.next() {
        Some(w) => load_weights(w)?,
        None => ResNet::new(ResNetConfig::narrow(8), &mut Rng::new(0))?,
    };
    let cascade = load_cascade_file(fixtures.join("cascades/haarcascade_frontalface_default.xml"))?;
    let frame = predict_image(&model, &cascade, &decode_image(&std::fs::read(image)?)?, &PipelineConfig::default())?;
    if frame.faces.is_empty() {
        println!("no face detected");
    }
    for f in &frame.faces {
        println!("box x={} y={} w={} h={}", f.bbox.x, f.bbox.y, f.bbox.w, f.bbox.h);
        for (name, p) in EMOTIONS.iter().zip(f.distribution.probs) {
            println!("  {name:<10} {p:.4}");
        }
        println!("  -> {} {}", f.label, f.emoji);
    }
    Ok(())
}
