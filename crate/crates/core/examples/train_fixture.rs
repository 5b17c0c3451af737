//! Trains a narrow ResNet18 on the bundled FER fixture, evaluates the
//! PrivateTest split and round-trips the weights file.
//!
//! `cargo run --release -p fer-core --example train_fixture -- [epochs]`

use std::path::PathBuf;

use fer_core::data::{examples_for, merge_labels, read_fer2013, read_ferplus, Usage};
use fer_core::model::{build_resnet18, evaluate, load_weights, save_weights, ResNetConfig, TrainConfig, Trainer};
use fer_core::Rng;

fn main() -> fer_core::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/fer");
    let fer = read_fer2013(dir.join("fer2013.csv"))?;
    let votes = read_ferplus(dir.join("fer2013new.csv"))?;
    let merged = merge_labels(&fer, &votes)?;
    let train = examples_for(&merged.samples, Usage::Training)?;
    let val = examples_for(&merged.samples, Usage::PublicTest)?;
    let test = examples_for(&merged.samples, Usage::PrivateTest)?;
    println!("train={} val={} test={}", train.len(), val.len(), test.len());

    let model = build_resnet18(ResNetConfig::narrow(8), &mut Rng::new(7))?;
    let cfg = TrainConfig {
        epochs,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(model, cfg)?;
    trainer.fit(&train, Some(&val), |m| println!("{}", m.log_line()))?;

    let result = evaluate(trainer.model(), &test)?;
    println!("private-test accuracy={:.4} loss={:.4}", result.accuracy, result.loss);
    print!("{}", result.confusion.to_csv());

    let path = std::env::temp_dir().join("fer_train_fixture.ferw");
    save_weights(trainer.model(), &path)?;
    let reloaded = load_weights(&path)?;
    let again = evaluate(&reloaded, &test)?;
    println!("reloaded {} -> accuracy {:.4}", path.display(), again.accuracy);
    Ok(())
}
