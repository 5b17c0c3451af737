//! Runs the Haar cascade on an image and prints the grouped boxes.
//!
//! `cargo run -p fer-core --example detect_faces -- [image] [cascade]`

use std::path::PathBuf;

use fer_core::detect::{detect_multiscale, detect_raw, load_cascade_file, DetectParams};
use fer_core::pipeline::{decode_image, to_gray};

fn main() -> fer_core::Result<()> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let mut args = std::env::args().skip(1);
    let image = args.next().map_or(fixtures.join("images/face.png"), PathBuf::from);
    let cascade = args
        .next()
        .map_or(fixtures.join("cascades/haarcascade_frontalface_default.xml"), PathBuf::from);

    let model = load_cascade_file(&cascade)?;
    println!("cascade: {} stages, {} weak classifiers", model.stages.len(), model.weak_count());
    let gray = to_gray(&decode_image(&std::fs::read(&image)?)?);
    let params = DetectParams::default();
    let raw = detect_raw(&model, &gray, &params)?;
    let boxes = detect_multiscale(&model, &gray, &params)?;
    println!("{}x{}: {} raw hits, {} faces", gray.width(), gray.height(), raw.len(), boxes.len());
    for b in boxes {
        println!("x={} y={} w={} h={} neighbors={}", b.x, b.y, b.w, b.h, b.neighbor_count);
    }
    Ok(())
}
