use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

pub const IMAGE_SIDE: usize = 48;
pub const PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const NUM_CLASSES: usize = 8;
/// A FER+ winner needs at least this many votes to be kept.
pub const MIN_WINNING_VOTES: u32 = 3;

/// The 8 merged classes, indexed by `label8`.
pub const EMOTIONS: [&str; NUM_CLASSES] = [
    "neutral",
    "happiness",
    "surprise",
    "sadness",
    "anger",
    "disgust",
    "fear",
    "contempt",
];

/// The original 7 FER2013 labels, indexed by `fer_label`.
pub const FER_LABELS: [&str; 7] = ["Angry", "Disgust", "Fear", "Happy", "Sad", "Surprise", "Neutral"];

const FER2013_HEADER: [&str; 3] = ["emotion", "pixels", "Usage"];
const FERPLUS_HEADER: [&str; 12] = [
    "usage",
    "Image name",
    "neutral",
    "happiness",
    "surprise",
    "sadness",
    "anger",
    "disgust",
    "fear",
    "contempt",
    "unknown",
    "NF",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Usage {
    Training,
    PublicTest,
    PrivateTest,
}

impl Usage {
    pub const ALL: [Usage; 3] = [Usage::Training, Usage::PublicTest, Usage::PrivateTest];

    pub fn as_str(self) -> &'static str {
        match self {
            Usage::Training => "Training",
            Usage::PublicTest => "PublicTest",
            Usage::PrivateTest => "PrivateTest",
        }
    }
}

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Usage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Usage::ALL
            .into_iter()
            .find(|u| u.as_str() == s.trim())
            .ok_or_else(|| invalid(format!("unknown usage {s:?}")))
    }
}

/// One FER2013 row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FerSample {
    /// Row-major, top-left origin, `PIXELS` values.
    pub pixels: Vec<u8>,
    pub fer_label: u8,
    pub usage: Usage,
}

/// One FER+ row of crowd votes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FerPlusVotes {
    pub usage: String,
    pub image_name: String,
    /// neutral, happiness, surprise, sadness, anger, disgust, fear, contempt,
    /// unknown, not-a-face.
    pub counts: [u32; 10],
}

impl FerPlusVotes {
    pub fn emotion_counts(&self) -> &[u32] {
        &self.counts[..NUM_CLASSES]
    }

    pub fn unknown(&self) -> u32 {
        self.counts[8]
    }

    pub fn not_a_face(&self) -> u32 {
        self.counts[9]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSample {
    pub pixels: Vec<u8>,
    pub label8: usize,
    pub usage: Usage,
}

/// A training-ready example: normalized `[1, H, W]` image and class index.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub image: Tensor<f32>,
    pub label: usize,
}

/// Output of [`merge_labels`] together with why rows were dropped.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MergeReport {
    pub samples: Vec<LabeledSample>,
    pub all_zero: usize,
    pub unknown_or_not_face: usize,
    pub low_count: usize,
}

impl MergeReport {
    pub fn excluded(&self) -> usize {
        self.all_zero + self.unknown_or_not_face + self.low_count
    }
}

fn parse_err(row: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        row,
        message: message.into(),
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input)
}

fn check_header(record: Option<csv::Result<csv::StringRecord>>, expected: &[&str]) -> Result<()> {
    let header = match record {
        Some(r) => r.map_err(|e| parse_err(0, e.to_string()))?,
        None => return Err(parse_err(0, "missing header")),
    };
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    let matches = found.len() == expected.len()
        && found.iter().zip(expected).all(|(a, b)| a.eq_ignore_ascii_case(b));
    if !matches {
        return Err(parse_err(0, format!("expected header {:?}, found {:?}", expected.join(","), found.join(","))));
    }
    Ok(())
}

/// Parses a FER2013 CSV (`emotion,pixels,Usage`), preserving row order.
pub fn parse_fer2013_csv<R: Read>(input: R) -> Result<Vec<FerSample>> {
    let mut rdr = reader(input);
    let mut records = rdr.records();
    check_header(records.next(), &FER2013_HEADER)?;
    let mut out = Vec::new();
    for (i, record) in records.enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| parse_err(row, e.to_string()))?;
        if record.len() != 3 {
            return Err(parse_err(row, format!("expected 3 columns, found {}", record.len())));
        }
        let fer_label: u8 = record[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(row, format!("label {:?} is not an integer", &record[0])))?;
        if fer_label > 6 {
            return Err(parse_err(row, format!("label {fer_label} outside 0..=6")));
        }
        let pixels = record[1]
            .split_ascii_whitespace()
            .map(|p| {
                p.parse::<u8>()
                    .map_err(|_| parse_err(row, format!("pixel {p:?} is not an integer in 0..=255")))
            })
            .collect::<Result<Vec<u8>>>()?;
        if pixels.len() != PIXELS {
            return Err(parse_err(row, format!("expected {PIXELS} pixels, found {}", pixels.len())));
        }
        let usage = record[2].parse().map_err(|e: Error| parse_err(row, e.to_string()))?;
        out.push(FerSample { pixels, fer_label, usage });
    }
    Ok(out)
}

/// Writes samples in the FER2013 CSV layout accepted by [`parse_fer2013_csv`].
pub fn write_fer2013_csv<W: Write>(samples: &[FerSample], mut out: W) -> Result<()> {
    writeln!(out, "{}", FER2013_HEADER.join(","))?;
    for s in samples {
        let pixels: Vec<String> = s.pixels.iter().map(u8::to_string).collect();
        writeln!(out, "{},{},{}", s.fer_label, pixels.join(" "), s.usage)?;
    }
    Ok(())
}

/// Parses a FER+ vote CSV. Rows are returned in file order so that row `i`
/// pairs with row `i` of the FER2013 file; blank-image rows are kept.
pub fn parse_ferplus_csv<R: Read>(input: R) -> Result<Vec<FerPlusVotes>> {
    let mut rdr = reader(input);
    let mut records = rdr.records();
    check_header(records.next(), &FERPLUS_HEADER)?;
    let mut out = Vec::new();
    for (i, record) in records.enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| parse_err(row, e.to_string()))?;
        if record.len() != FERPLUS_HEADER.len() {
            return Err(parse_err(
                row,
                format!("expected {} columns, found {}", FERPLUS_HEADER.len(), record.len()),
            ));
        }
        let mut counts = [0u32; 10];
        for (k, c) in counts.iter_mut().enumerate() {
            let field = record[k + 2].trim();
            *c = field.parse().map_err(|_| {
                parse_err(row, format!("{} vote {field:?} is not a non-negative integer", FERPLUS_HEADER[k + 2]))
            })?;
        }
        out.push(FerPlusVotes {
            usage: record[0].trim().to_string(),
            image_name: record[1].trim().to_string(),
            counts,
        });
    }
    Ok(out)
}

pub fn read_fer2013(path: impl AsRef<Path>) -> Result<Vec<FerSample>> {
    parse_fer2013_csv(File::open(path)?)
}

pub fn read_ferplus(path: impl AsRef<Path>) -> Result<Vec<FerPlusVotes>> {
    parse_ferplus_csv(File::open(path)?)
}

/// Majority-vote merge to 8 classes.
///
/// A row is dropped when all votes are zero, when unknown or not-a-face holds
/// the strict maximum over all ten columns, or when the winning emotion has
/// fewer than [`MIN_WINNING_VOTES`]. Ties between emotions go to the lower index.
pub fn merge_labels(fer: &[FerSample], votes: &[FerPlusVotes]) -> Result<MergeReport> {
    if fer.len() != votes.len() {
        return Err(invalid(format!(
            "FER2013 has {} rows but FER+ has {}",
            fer.len(),
            votes.len()
        )));
    }
    let mut report = MergeReport::default();
    for (sample, v) in fer.iter().zip(votes) {
        if v.counts.iter().all(|&c| c == 0) {
            report.all_zero += 1;
            continue;
        }
        let emotions = v.emotion_counts();
        let (label8, best) = emotions
            .iter()
            .enumerate()
            .fold((0, 0), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc });
        if v.unknown().max(v.not_a_face()) > best {
            report.unknown_or_not_face += 1;
            continue;
        }
        if best < MIN_WINNING_VOTES {
            report.low_count += 1;
            continue;
        }
        report.samples.push(LabeledSample {
            pixels: sample.pixels.clone(),
            label8,
            usage: sample.usage,
        });
    }
    Ok(report)
}

/// 8-class counts for one split.
pub fn class_histogram(samples: &[LabeledSample], split: Usage) -> [usize; NUM_CLASSES] {
    let mut counts = [0; NUM_CLASSES];
    for s in samples.iter().filter(|s| s.usage == split) {
        counts[s.label8] += 1;
    }
    counts
}

/// Scales 8-bit intensities to `[0, 1]` as a `[1, 48, 48]` tensor.
pub fn normalize_image(pixels: &[u8]) -> Result<Tensor<f32>> {
    if pixels.len() != PIXELS {
        return Err(invalid(format!("expected {PIXELS} pixels, got {}", pixels.len())));
    }
    Tensor::new(
        &[1, IMAGE_SIDE, IMAGE_SIDE],
        pixels.iter().map(|&p| p as f32 / 255.0).collect(),
    )
}

/// Normalized examples for one split, in file order.
pub fn examples_for(samples: &[LabeledSample], split: Usage) -> Result<Vec<Example>> {
    samples
        .iter()
        .filter(|s| s.usage == split)
        .map(|s| {
            Ok(Example {
                image: normalize_image(&s.pixels)?,
                label: s.label8,
            })
        })
        .collect()
}

/// `N / (K * n_c)` per class; classes with no samples get weight 0.
pub fn inverse_frequency_weights(counts: &[usize]) -> Vec<f32> {
    let total: usize = counts.iter().sum();
    let k = counts.len() as f32;
    counts
        .iter()
        .map(|&n| if n == 0 { 0.0 } else { total as f32 / (k * n as f32) })
        .collect()
}
