use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::NUM_CLASSES;
use crate::error::{invalid, Result};

/// Default confidence below which a face is labelled [`EmotionLabel::Unknown`].
pub const DEFAULT_TAU: f32 = 0.4;

/// The 8 classes in dataset order, plus the low-confidence fallback.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Neutral,
    Happiness,
    Surprise,
    Sadness,
    Anger,
    Disgust,
    Fear,
    Contempt,
    Unknown,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 9] = [
        EmotionLabel::Neutral,
        EmotionLabel::Happiness,
        EmotionLabel::Surprise,
        EmotionLabel::Sadness,
        EmotionLabel::Anger,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Contempt,
        EmotionLabel::Unknown,
    ];

    /// Class for `label8`; `None` outside `0..8`.
    pub fn from_index(i: usize) -> Option<Self> {
        (i < NUM_CLASSES).then(|| Self::ALL[i])
    }

    /// `label8` index, `None` for `Unknown`.
    pub fn index(self) -> Option<usize> {
        (self != EmotionLabel::Unknown).then_some(self as usize)
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Happiness => "happiness",
            EmotionLabel::Surprise => "surprise",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Anger => "anger",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Contempt => "contempt",
            EmotionLabel::Unknown => "unknown",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn to_emoji(label: EmotionLabel) -> char {
    match label {
        EmotionLabel::Neutral => '\u{1F610}',
        EmotionLabel::Happiness => '\u{1F604}',
        EmotionLabel::Surprise => '\u{1F62E}',
        EmotionLabel::Sadness => '\u{1F622}',
        EmotionLabel::Anger => '\u{1F620}',
        EmotionLabel::Disgust => '\u{1F922}',
        EmotionLabel::Fear => '\u{1F628}',
        EmotionLabel::Contempt => '\u{1F612}',
        EmotionLabel::Unknown => '\u{2753}',
    }
}

/// Class probabilities in dataset order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmotionDistribution {
    pub probs: [f32; NUM_CLASSES],
}

impl EmotionDistribution {
    /// Accepts probabilities in `[0, 1]` summing to 1 within 1e-4.
    pub fn new(probs: [f32; NUM_CLASSES]) -> Result<Self> {
        let sum: f64 = probs.iter().map(|&p| p as f64).sum();
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-4 {
            return Err(invalid(format!("not a probability distribution: {probs:?}")));
        }
        Ok(Self { probs })
    }

    pub fn one_hot(class: usize) -> Self {
        let mut probs = [0.0; NUM_CLASSES];
        probs[class] = 1.0;
        Self { probs }
    }

    pub fn uniform() -> Self {
        Self {
            probs: [1.0 / NUM_CLASSES as f32; NUM_CLASSES],
        }
    }

    /// Most probable class, ties to the lower index.
    pub fn argmax(&self) -> (usize, f32) {
        self.probs
            .iter()
            .enumerate()
            .fold((0, self.probs[0]), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc })
    }
}

/// The argmax class when its probability reaches `tau`, else `Unknown`.
pub fn decide_label(dist: &EmotionDistribution, tau: f32) -> EmotionLabel {
    let (i, p) = dist.argmax();
    if p >= tau {
        EmotionLabel::ALL[i]
    } else {
        EmotionLabel::Unknown
    }
}
