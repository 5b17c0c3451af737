//! Parses FER2013 and FER+ CSVs, merges the votes to 8 classes and prints
//! per-split histograms and inverse-frequency class weights.
//!
//! `cargo run -p fer-core --example dataset_stats -- [fer2013.csv] [fer2013new.csv]`

use std::path::PathBuf;

use fer_core::data::{class_histogram, inverse_frequency_weights, merge_labels, read_fer2013, read_ferplus, Usage, EMOTIONS};

fn main() -> fer_core::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/fer");
    let mut args = std::env::args().skip(1);
    let fer_path = args.next().map_or(dir.join("fer2013.csv"), PathBuf::from);
    let plus_path = args.next().map_or(dir.join("fer2013new.csv"), PathBuf::from);

    let fer = read_fer2013(fer_path)?;
    let votes = read_ferplus(plus_path)?;
    let merged = merge_labels(&fer, &votes)?;
    println!(
        "rows={} kept={} all_zero={} unknown_or_not_face={} low_count={}",
        fer.len(),
        merged.samples.len(),
        merged.all_zero,
        merged.unknown_or_not_face,
        merged.low_count
    );
    println!("{:<12}{}", "", EMOTIONS.map(|e| format!("{e:>10}")).concat());
    for split in Usage::ALL {
        let h = class_histogram(&merged.samples, split);
        println!("{:<12}{}", split.as_str(), h.map(|n| format!("{n:>10}")).concat());
    }
    let w = inverse_frequency_weights(&class_histogram(&merged.samples, Usage::Training));
    println!("{:<12}{}", "weights", w.iter().map(|v| format!("{v:>10.3}")).collect::<String>());
    Ok(())
}
