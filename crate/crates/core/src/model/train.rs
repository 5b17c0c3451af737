//! Mini-batch SGD training, evaluation and the metrics they produce.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::resnet::ResNet;
use crate::data::{horizontal_flip, random_erase, Example, ERASE_AREA, ERASE_ASPECT};
use crate::error::{invalid, Result};
use crate::tensor::{softmax_cross_entropy, Rng, Scalar, SgdState, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f32,
    pub momentum: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Epochs without validation-loss improvement before the rate is cut.
    pub plateau_patience: usize,
    pub plateau_factor: f32,
    /// Random erasing and horizontal flips on training samples.
    pub augment: bool,
    pub erase_prob: f64,
    pub flip_prob: f64,
    /// Per-class loss weights, e.g. from [`crate::data::inverse_frequency_weights`].
    pub class_weights: Option<Vec<f32>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            momentum: 0.9,
            batch_size: 64,
            epochs: 30,
            seed: 0,
            plateau_patience: 3,
            plateau_factor: 0.5,
            augment: true,
            erase_prob: 0.5,
            flip_prob: 0.5,
            class_weights: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum must be in [0, 1)"));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor <= 1.0) {
            return Err(invalid("plateau factor must be in (0, 1]"));
        }
        for p in [self.erase_prob, self.flip_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid("augmentation probabilities must be in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Counts of (true class, predicted class) pairs; rows are true classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks(self.classes).map(|r| r.iter().sum()).collect()
    }

    /// `trace / total`, or 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    /// One line per true class, comma-separated counts, no header.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.counts.chunks(self.classes) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f32,
    pub train_acc: f32,
    pub val_loss: Option<f32>,
    pub val_acc: Option<f32>,
    pub lr: f32,
}

impl EpochMetrics {
    /// `key=value` progress line.
    pub fn log_line(&self) -> String {
        let opt = |v: Option<f32>| v.map_or("na".to_string(), |v| format!("{v:.6}"));
        format!(
            "epoch={} train_loss={:.6} train_acc={:.6} val_loss={} val_acc={} lr={}",
            self.epoch,
            self.train_loss,
            self.train_acc,
            opt(self.val_loss),
            opt(self.val_acc),
            self.lr
        )
    }
}

/// Per-epoch curves plus the latest confusion matrix.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub epochs: Vec<EpochMetrics>,
    pub confusion: Option<ConfusionMatrix>,
}

impl Metrics {
    pub fn train_losses(&self) -> Vec<f32> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }

    /// `epoch,train_loss,train_acc,val_loss,val_acc` with a header row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        let opt = |v: Option<f32>| v.map_or(String::new(), |v| format!("{v:.6}"));
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{},{}",
                e.epoch,
                e.train_loss,
                e.train_acc,
                opt(e.val_loss),
                opt(e.val_acc)
            );
        }
        s
    }
}

/// Loss terms of one batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown<T> {
    pub total: T,
    pub data: T,
    pub l2: T,
    pub correct: usize,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Cross-entropy plus `(wd/2)·Σ‖W‖²` over decay-flagged parameters.
///
/// Clears and refills every parameter gradient. The decay gradient `wd·W`
/// is added here, so optimizer steps must be taken with zero weight decay.
pub fn loss_with_l2<T: Scalar>(
    model: &mut ResNet<T>,
    batch: &Tensor<T>,
    labels: &[usize],
    class_weights: Option<&[T]>,
) -> Result<LossBreakdown<T>> {
    let wd = T::lit(model.config().weight_decay as f64);
    model.zero_grad();
    let logits = model.forward_train(batch)?;
    let ce = softmax_cross_entropy(&logits, labels, class_weights)?;
    model.backward(&ce.grad_logits)?;
    let k = model.num_classes();
    let correct = ce
        .probs
        .data()
        .chunks(k)
        .zip(labels)
        .filter(|(row, &l)| argmax(row) == l)
        .count();
    let mut l2 = T::zero();
    for p in model.params_mut().into_iter().filter(|p| p.decay) {
        l2 += p.value.sum_squares();
        if wd != T::zero() {
            let crate::tensor::Param { value, grad, .. } = p;
            for (g, &w) in grad.data_mut().iter_mut().zip(value.data()) {
                *g += wd * w;
            }
        }
    }
    let l2 = l2 * wd / T::lit(2.0);
    Ok(LossBreakdown {
        total: ce.loss + l2,
        data: ce.loss,
        l2,
        correct,
    })
}

fn batch_tensor(images: &[&Tensor<f32>]) -> Result<Tensor<f32>> {
    Tensor::stack(images)
}

/// Mean training loss and accuracy of one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub loss: f32,
    pub accuracy: f32,
}

/// One shuffled pass over `data` with SGD updates.
///
/// Samples are augmented per epoch when `config.augment` is set, each
/// with its own stream split from `rng`.
pub fn train_epoch(
    model: &mut ResNet<f32>,
    data: &[Example],
    config: &TrainConfig,
    lr: f32,
    sgd: &mut SgdState<f32>,
    rng: &mut Rng,
) -> Result<EpochStats> {
    if data.is_empty() {
        return Err(invalid("cannot train on an empty dataset"));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    rng.shuffle(&mut order);
    let mut aug_rng = rng.split();
    let mut loss_sum = 0.0f64;
    let mut correct = 0usize;
    for chunk in order.chunks(config.batch_size) {
        let augmented: Vec<Tensor<f32>>;
        let images: Vec<&Tensor<f32>> = if config.augment {
            augmented = chunk
                .iter()
                .map(|&i| {
                    let mut r = aug_rng.split();
                    let img = if r.bernoulli(config.flip_prob) {
                        horizontal_flip(&data[i].image)?
                    } else {
                        data[i].image.clone()
                    };
                    random_erase(&img, &mut r, config.erase_prob, ERASE_AREA, ERASE_ASPECT)
                })
                .collect::<Result<_>>()?;
            augmented.iter().collect()
        } else {
            chunk.iter().map(|&i| &data[i].image).collect()
        };
        let labels: Vec<usize> = chunk.iter().map(|&i| data[i].label).collect();
        let batch = batch_tensor(&images)?;
        let out = loss_with_l2(model, &batch, &labels, config.class_weights.as_deref())?;
        loss_sum += out.data as f64 * chunk.len() as f64;
        correct += out.correct;
        sgd.step(&mut model.params_mut(), lr, config.momentum, 0.0);
    }
    Ok(EpochStats {
        loss: (loss_sum / data.len() as f64) as f32,
        accuracy: correct as f32 / data.len() as f32,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f32,
    pub accuracy: f32,
    pub confusion: ConfusionMatrix,
}

const EVAL_BATCH: usize = 32;

/// Inference-mode loss, accuracy and confusion matrix. No augmentation.
pub fn evaluate(model: &ResNet<f32>, data: &[Example]) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(invalid("cannot evaluate an empty split"));
    }
    let k = model.num_classes();
    let mut confusion = ConfusionMatrix::new(k);
    let mut loss_sum = 0.0f64;
    for chunk in data.chunks(EVAL_BATCH) {
        let images: Vec<&Tensor<f32>> = chunk.iter().map(|e| &e.image).collect();
        let labels: Vec<usize> = chunk.iter().map(|e| e.label).collect();
        let logits = model.infer(&batch_tensor(&images)?)?;
        let ce = softmax_cross_entropy(&logits, &labels, None)?;
        loss_sum += ce.loss as f64 * chunk.len() as f64;
        for (row, &l) in logits.data().chunks(k).zip(&labels) {
            confusion.record(l, argmax(row));
        }
    }
    Ok(Evaluation {
        loss: (loss_sum / data.len() as f64) as f32,
        accuracy: confusion.accuracy() as f32,
        confusion,
    })
}

/// Owns a model and the optimizer/schedule state across epochs.
pub struct Trainer {
    model: ResNet<f32>,
    config: TrainConfig,
    sgd: SgdState<f32>,
    rng: Rng,
    lr: f32,
    schedule: PlateauSchedule,
    metrics: Metrics,
}

/// Reduce-on-plateau: multiply the rate by `factor` after `patience`
/// consecutive epochs without a new best loss.
#[derive(Clone, Debug)]
pub struct PlateauSchedule {
    patience: usize,
    factor: f32,
    best: f32,
    stale: usize,
}

impl PlateauSchedule {
    pub fn new(patience: usize, factor: f32) -> Self {
        Self {
            patience,
            factor,
            best: f32::INFINITY,
            stale: 0,
        }
    }

    /// Records an epoch's monitored loss and returns the rate for the next epoch.
    pub fn observe(&mut self, loss: f32, lr: f32) -> f32 {
        if loss < self.best {
            self.best = loss;
            self.stale = 0;
            return lr;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            self.stale = 0;
            return lr * self.factor;
        }
        lr
    }
}

impl Trainer {
    pub fn new(model: ResNet<f32>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if let Some(w) = &config.class_weights {
            if w.len() != model.num_classes() {
                return Err(invalid("class weight count does not match num_classes"));
            }
        }
        Ok(Self {
            rng: Rng::new(config.seed),
            lr: config.lr,
            schedule: PlateauSchedule::new(config.plateau_patience, config.plateau_factor),
            model,
            config,
            sgd: SgdState::new(),
            metrics: Metrics::default(),
        })
    }

    pub fn model(&self) -> &ResNet<f32> {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut ResNet<f32> {
        &mut self.model
    }

    pub fn into_model(self) -> ResNet<f32> {
        self.model
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn lr(&self) -> f32 {
        self.lr
    }

    /// Trains one epoch, evaluates `val` if given, applies the plateau
    /// schedule (on validation loss, else training loss) and records metrics.
    pub fn epoch(&mut self, train: &[Example], val: Option<&[Example]>) -> Result<&EpochMetrics> {
        let lr = self.lr;
        let stats = train_epoch(&mut self.model, train, &self.config, lr, &mut self.sgd, &mut self.rng)?;
        let val_eval = match val {
            Some(v) if !v.is_empty() => Some(evaluate(&self.model, v)?),
            _ => None,
        };
        let monitored = val_eval.as_ref().map_or(stats.loss, |e| e.loss);
        self.lr = self.schedule.observe(monitored, self.lr);
        if let Some(e) = &val_eval {
            self.metrics.confusion = Some(e.confusion.clone());
        }
        self.metrics.epochs.push(EpochMetrics {
            epoch: self.metrics.epochs.len() + 1,
            train_loss: stats.loss,
            train_acc: stats.accuracy,
            val_loss: val_eval.as_ref().map(|e| e.loss),
            val_acc: val_eval.as_ref().map(|e| e.accuracy),
            lr,
        });
        Ok(self.metrics.epochs.last().expect("just pushed"))
    }

    /// Runs `config.epochs` epochs, calling `on_epoch` after each.
    pub fn fit(
        &mut self,
        train: &[Example],
        val: Option<&[Example]>,
        mut on_epoch: impl FnMut(&EpochMetrics),
    ) -> Result<&Metrics> {
        for _ in 0..self.config.epochs {
            let m = self.epoch(train, val)?;
            on_epoch(m);
        }
        Ok(&self.metrics)
    }
}
