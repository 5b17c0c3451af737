//! Wire types and the per-session JSONL log.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use fer_core::data::NUM_CLASSES;
use fer_core::detect::DetectionBox;
use fer_core::pipeline::{EmotionDistribution, EmotionLabel, FacePrediction, FramePrediction};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub name: String,
    /// RFC 3339, UTC.
    pub created: String,
}

/// One detected face as sent to clients and stored in the log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceOut {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub neighbors: usize,
    pub label: EmotionLabel,
    pub emoji: String,
    pub probs: [f32; NUM_CLASSES],
}

impl From<&FacePrediction> for FaceOut {
    fn from(f: &FacePrediction) -> Self {
        Self {
            x: f.bbox.x,
            y: f.bbox.y,
            w: f.bbox.w,
            h: f.bbox.h,
            neighbors: f.bbox.neighbor_count,
            label: f.label,
            emoji: f.emoji.to_string(),
            probs: f.distribution.probs,
        }
    }
}

impl FaceOut {
    pub fn to_prediction(&self) -> FacePrediction {
        FacePrediction {
            bbox: DetectionBox {
                x: self.x,
                y: self.y,
                w: self.w,
                h: self.h,
                neighbor_count: self.neighbors,
            },
            distribution: EmotionDistribution { probs: self.probs },
            label: self.label,
            emoji: self.emoji.chars().next().unwrap_or('\u{2753}'),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Static,
    Live,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub session: String,
    pub timestamp: String,
    pub mode: Mode,
    /// Frame number for live records.
    pub seq: Option<u64>,
    pub faces: Vec<FaceOut>,
    pub engagement: Option<f64>,
}

impl PredictionRecord {
    pub fn to_frame(&self) -> FramePrediction {
        FramePrediction {
            timestamp_ms: 0,
            faces: self.faces.iter().map(FaceOut::to_prediction).collect(),
            engagement: self.engagement,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Record {
    Session(SessionInfo),
    Prediction(PredictionRecord),
}

/// Session summary, computed by replaying the log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub name: String,
    pub created: String,
    /// Prediction records, static and live.
    pub frames: u64,
    pub live_frames: u64,
    pub faces: u64,
    /// Faces per label, every label present.
    pub label_counts: BTreeMap<String, u64>,
    /// Mean of the engagement values reported to live clients.
    pub mean_engagement: Option<f64>,
    pub first: Option<String>,
    pub last: Option<String>,
}

impl Report {
    /// `None` when the log does not open with a session record.
    pub fn from_records(records: &[Record]) -> Option<Self> {
        let Some(Record::Session(info)) = records.first() else {
            return None;
        };
        let mut report = Report {
            id: info.id.clone(),
            name: info.name.clone(),
            created: info.created.clone(),
            frames: 0,
            live_frames: 0,
            faces: 0,
            label_counts: EmotionLabel::ALL.iter().map(|l| (l.name().to_string(), 0)).collect(),
            mean_engagement: None,
            first: None,
            last: None,
        };
        let (mut eng_sum, mut eng_n) = (0.0, 0u64);
        for rec in &records[1..] {
            let Record::Prediction(p) = rec else { continue };
            report.frames += 1;
            if p.mode == Mode::Live {
                report.live_frames += 1;
                if let Some(e) = p.engagement {
                    eng_sum += e;
                    eng_n += 1;
                }
            }
            for f in &p.faces {
                report.faces += 1;
                *report.label_counts.entry(f.label.name().to_string()).or_default() += 1;
            }
            report.first.get_or_insert_with(|| p.timestamp.clone());
            report.last = Some(p.timestamp.clone());
        }
        if eng_n > 0 {
            report.mean_engagement = Some(eng_sum / eng_n as f64);
        }
        Some(report)
    }
}

/// Session ids are 32 lowercase hex digits; anything else never touches disk.
pub fn valid_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// Append-only JSONL files, one per session.
#[derive(Clone, Debug)]
pub struct LogStore {
    dir: PathBuf,
}

impl LogStore {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    pub fn create(&self, info: &SessionInfo) -> io::Result<()> {
        let mut file = OpenOptions::new().write(true).create_new(true).open(self.path(&info.id))?;
        write_record(&mut file, &Record::Session(info.clone()))
    }

    pub fn append(&self, id: &str, record: &Record) -> io::Result<()> {
        let mut file = OpenOptions::new().append(true).open(self.path(id))?;
        write_record(&mut file, record)
    }

    /// All records of a session, `None` if it has no log. A final line cut
    /// short by a crash is ignored.
    pub fn read(&self, id: &str) -> io::Result<Option<Vec<Record>>> {
        if !valid_id(id) {
            return Ok(None);
        }
        let file = match File::open(self.path(id)) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let lines: Vec<String> = BufReader::new(file).lines().collect::<io::Result<_>>()?;
        let mut records = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            match serde_json::from_str(line) {
                Ok(r) => records.push(r),
                Err(_) if i + 1 == lines.len() => break,
                Err(e) => {
                    return Err(io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("{}: line {}: {e}", self.path(id).display(), i + 1),
                    ))
                }
            }
        }
        Ok(Some(records))
    }
}

fn write_record(file: &mut File, record: &Record) -> io::Result<()> {
    let mut line = serde_json::to_vec(record)?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.flush()
}
