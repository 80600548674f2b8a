//! Annotation data model for the three supervision levels.
//!
//! An image can carry bounding boxes, center points, a scalar count, or any
//! combination of the three. All coordinates are stored normalized to the
//! image: x divided by width and y divided by height.
//!
//! Manifests are JSON documents:
//!
//! ```json
//! {"name": "llvip", "coords": "normalized",
//!  "records": [{"id": "0001", "width": 1280, "height": 1024,
//!               "boxes": [[0.5, 0.5, 0.1, 0.2, 1.0]],
//!               "points": [[0.5, 0.5, 1.0]], "count": 1}]}
//! ```
//!
//! Box rows are `[cx, cy, w, h, score?]` and point rows `[cx, cy, score?]`;
//! a missing score means ground truth (1.0). With `"coords": "pixel"` the
//! coordinates are divided by the record's width/height on load. Prediction
//! files use the same schema with only the predicted tier filled in.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest count in the label space used for image-level counting.
pub const DEFAULT_MAX_COUNT: u32 = 20;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("manifest failed validation:\n{}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error("record {0:?} has no annotation tier")]
    NoAnnotation(String),
    #[error("train_count {train_count} out of range for {total} records")]
    TrainCountOutOfRange { train_count: usize, total: usize },
    #[error("record ids differ between manifests: {missing} missing from predictions, {extra} unexpected (first: {first:?})")]
    IdMismatch {
        missing: usize,
        extra: usize,
        first: String,
    },
}

/// One invariant violation, tied to the record that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub record: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record {:?}: {}", self.record, self.message)
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Axis-aligned box in normalized center-size form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    /// Detector confidence; 1.0 for ground truth.
    pub score: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, score: f64) -> Self {
        Self {
            cx,
            cy,
            w,
            h,
            score,
        }
    }

    pub fn ground_truth(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx, cy, w, h, 1.0)
    }

    /// `(x0, y0, x1, y1)` corners.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        let hw = self.w / 2.0;
        let hh = self.h / 2.0;
        (self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> PointAnnotation {
        PointAnnotation::new(self.cx, self.cy, self.score)
    }

    pub fn check(&self) -> Result<(), String> {
        if !in_unit(self.cx) || !in_unit(self.cy) {
            return Err(format!(
                "box center ({}, {}) outside [0, 1]",
                self.cx, self.cy
            ));
        }
        if !(self.w > 0.0 && self.w <= 1.0 && self.h > 0.0 && self.h <= 1.0) {
            return Err(format!("box size ({}, {}) outside (0, 1]", self.w, self.h));
        }
        if !in_unit(self.score) {
            return Err(format!("box score {} outside [0, 1]", self.score));
        }
        Ok(())
    }
}

/// A person location in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointAnnotation {
    pub cx: f64,
    pub cy: f64,
    /// Localizer confidence; 1.0 for ground truth.
    pub score: f64,
}

impl PointAnnotation {
    pub fn new(cx: f64, cy: f64, score: f64) -> Self {
        Self { cx, cy, score }
    }

    pub fn at(cx: f64, cy: f64) -> Self {
        Self::new(cx, cy, 1.0)
    }

    pub fn check(&self) -> Result<(), String> {
        if !in_unit(self.cx) || !in_unit(self.cy) {
            return Err(format!("point ({}, {}) outside [0, 1]", self.cx, self.cy));
        }
        if !in_unit(self.score) {
            return Err(format!("point score {} outside [0, 1]", self.score));
        }
        Ok(())
    }
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

/// Image-level person count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountLabel(pub u32);

impl CountLabel {
    pub fn get(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub boxes: Option<Vec<BoundingBox>>,
    pub points: Option<Vec<PointAnnotation>>,
    pub count: Option<CountLabel>,
    pub frame_path: Option<String>,
}

impl ImageRecord {
    pub fn new(id: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            id: id.into(),
            width,
            height,
            boxes: None,
            points: None,
            count: None,
            frame_path: None,
        }
    }

    pub fn with_boxes(mut self, boxes: Vec<BoundingBox>) -> Self {
        self.boxes = Some(boxes);
        self
    }

    pub fn with_points(mut self, points: Vec<PointAnnotation>) -> Self {
        self.points = Some(points);
        self
    }

    pub fn with_count(mut self, count: u32) -> Self {
        self.count = Some(CountLabel(count));
        self
    }

    pub fn has_annotation(&self) -> bool {
        self.boxes.is_some() || self.points.is_some() || self.count.is_some()
    }

    /// Every broken invariant of this record, as human-readable messages.
    pub fn violations(&self, max_count: u32) -> Vec<String> {
        let mut out = Vec::new();
        if self.width == 0 || self.height == 0 {
            out.push(format!(
                "image size {}x{} must be positive",
                self.width, self.height
            ));
        }
        if !self.has_annotation() {
            out.push("no annotation tier present".to_string());
        }
        if let Some(boxes) = &self.boxes {
            for (i, b) in boxes.iter().enumerate() {
                if let Err(e) = b.check() {
                    out.push(format!("box {i}: {e}"));
                }
            }
        }
        if let Some(points) = &self.points {
            for (i, p) in points.iter().enumerate() {
                if let Err(e) = p.check() {
                    out.push(format!("point {i}: {e}"));
                }
            }
        }
        if let Some(CountLabel(c)) = self.count {
            if c > max_count {
                out.push(format!("count {c} exceeds max_count {max_count}"));
            }
            if let Some(boxes) = &self.boxes {
                if boxes.len() != c as usize {
                    out.push(format!("count {c} disagrees with {} boxes", boxes.len()));
                }
            }
            if let Some(points) = &self.points {
                if points.len() != c as usize {
                    out.push(format!(
                        "count {c} disagrees with {} points",
                        points.len()
                    ));
                }
            }
        }
        out
    }
}

/// An ordered, id-unique collection of records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub records: Vec<ImageRecord>,
}

impl Dataset {
    /// Builds a dataset, enforcing every record invariant and id uniqueness.
    pub fn new(name: impl Into<String>, records: Vec<ImageRecord>) -> Result<Self, CorpusError> {
        Self::with_max_count(name, records, DEFAULT_MAX_COUNT)
    }

    pub fn with_max_count(
        name: impl Into<String>,
        records: Vec<ImageRecord>,
        max_count: u32,
    ) -> Result<Self, CorpusError> {
        let ds = Self {
            name: name.into(),
            records,
        };
        let violations = ds.violations(max_count);
        if violations.is_empty() {
            Ok(ds)
        } else {
            Err(CorpusError::Validation(violations))
        }
    }

    pub fn violations(&self, max_count: u32) -> Vec<Violation> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for r in &self.records {
            if !seen.insert(r.id.as_str()) {
                out.push(Violation {
                    record: r.id.clone(),
                    message: "duplicate id".to_string(),
                });
            }
            out.extend(r.violations(max_count).into_iter().map(|message| Violation {
                record: r.id.clone(),
                message,
            }));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }
}

/// Pairs ground-truth and prediction records by id, in ground-truth order.
///
/// Both manifests must contain exactly the same id set.
pub fn align<'a>(
    gt: &'a Dataset,
    pred: &'a Dataset,
) -> Result<Vec<(&'a ImageRecord, &'a ImageRecord)>, CorpusError> {
    let by_id: HashMap<&str, &ImageRecord> =
        pred.records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut pairs = Vec::with_capacity(gt.len());
    let mut missing = Vec::new();
    for g in &gt.records {
        match by_id.get(g.id.as_str()) {
            Some(p) => pairs.push((g, *p)),
            None => missing.push(g.id.clone()),
        }
    }
    let gt_ids: HashSet<&str> = gt.ids().collect();
    let extra: Vec<&str> = pred.ids().filter(|id| !gt_ids.contains(id)).collect();
    if missing.is_empty() && extra.is_empty() {
        return Ok(pairs);
    }
    let first = missing
        .first()
        .cloned()
        .or_else(|| extra.first().map(|s| s.to_string()))
        .unwrap_or_default();
    Err(CorpusError::IdMismatch {
        missing: missing.len(),
        extra: extra.len(),
        first,
    })
}

/// Box centers as points, order and scores preserved.
pub fn boxes_to_points(boxes: &[BoundingBox]) -> Vec<PointAnnotation> {
    boxes.iter().map(BoundingBox::center).collect()
}

/// Image-level count of a record. An explicit count wins over points, and
/// points win over boxes.
pub fn annotation_to_count(record: &ImageRecord) -> Result<CountLabel, CorpusError> {
    if let Some(c) = record.count {
        return Ok(c);
    }
    if let Some(points) = &record.points {
        return Ok(CountLabel(points.len() as u32));
    }
    if let Some(boxes) = &record.boxes {
        return Ok(CountLabel(boxes.len() as u32));
    }
    Err(CorpusError::NoAnnotation(record.id.clone()))
}

/// Seeded shuffle, then the first `train_count` records go to the training
/// split and the rest to the test split.
pub fn split_dataset(
    ds: &Dataset,
    train_count: usize,
    seed: u64,
) -> Result<(Dataset, Dataset), CorpusError> {
    if train_count > ds.len() {
        return Err(CorpusError::TrainCountOutOfRange {
            train_count,
            total: ds.len(),
        });
    }
    let order = shuffled_indices(ds.len(), seed);
    let pick = |idx: &[usize]| idx.iter().map(|&i| ds.records[i].clone()).collect();
    let train = Dataset {
        name: format!("{}-train", ds.name),
        records: pick(&order[..train_count]),
    };
    let test = Dataset {
        name: format!("{}-test", ds.name),
        records: pick(&order[train_count..]),
    };
    Ok((train, test))
}

/// Deterministic permutation of `0..n` for a seed.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordSpace {
    #[default]
    Normalized,
    Pixel,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawManifest {
    name: String,
    #[serde(default, skip_serializing_if = "is_normalized")]
    coords: CoordSpace,
    records: Vec<RawRecord>,
}

fn is_normalized(c: &CoordSpace) -> bool {
    *c == CoordSpace::Normalized
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    id: String,
    width: u32,
    height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boxes: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frame_path: Option<String>,
}

/// Manifest loading options.
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub max_count: u32,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            max_count: DEFAULT_MAX_COUNT,
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<Dataset, CorpusError> {
    load_manifest_with(path, LoadOptions::default())
}

pub fn load_manifest_with(path: &Path, opts: LoadOptions) -> Result<Dataset, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_manifest(&text, opts)
}

/// Parses and validates a manifest document. All violations are collected
/// before failing.
pub fn parse_manifest(text: &str, opts: LoadOptions) -> Result<Dataset, CorpusError> {
    let raw: RawManifest = serde_json::from_str(text)?;
    let mut violations = Vec::new();
    let mut records = Vec::with_capacity(raw.records.len());
    for r in raw.records {
        let (sx, sy) = match raw.coords {
            CoordSpace::Normalized => (1.0, 1.0),
            CoordSpace::Pixel if r.width > 0 && r.height > 0 => {
                (f64::from(r.width), f64::from(r.height))
            }
            // zero dims are reported by the record check below
            CoordSpace::Pixel => (1.0, 1.0),
        };
        let mut bad = |message: String| {
            violations.push(Violation {
                record: r.id.clone(),
                message,
            })
        };
        let boxes = r.boxes.map(|rows| {
            rows.iter()
                .enumerate()
                .filter_map(|(i, row)| match row.as_slice() {
                    [cx, cy, w, h] => Some(BoundingBox::ground_truth(
                        cx / sx,
                        cy / sy,
                        w / sx,
                        h / sy,
                    )),
                    [cx, cy, w, h, s] => Some(BoundingBox::new(cx / sx, cy / sy, w / sx, h / sy, *s)),
                    _ => {
                        bad(format!("box {i} has {} fields, expected 4 or 5", row.len()));
                        None
                    }
                })
                .collect::<Vec<_>>()
        });
        let points = r.points.map(|rows| {
            rows.iter()
                .enumerate()
                .filter_map(|(i, row)| match row.as_slice() {
                    [cx, cy] => Some(PointAnnotation::at(cx / sx, cy / sy)),
                    [cx, cy, s] => Some(PointAnnotation::new(cx / sx, cy / sy, *s)),
                    _ => {
                        bad(format!("point {i} has {} fields, expected 2 or 3", row.len()));
                        None
                    }
                })
                .collect::<Vec<_>>()
        });
        records.push(ImageRecord {
            id: r.id,
            width: r.width,
            height: r.height,
            boxes,
            points,
            count: r.count.map(CountLabel),
            frame_path: r.frame_path,
        });
    }
    let ds = Dataset {
        name: raw.name,
        records,
    };
    violations.extend(ds.violations(opts.max_count));
    if violations.is_empty() {
        Ok(ds)
    } else {
        Err(CorpusError::Validation(violations))
    }
}

/// Serializes a dataset as a normalized-coordinate manifest. Scores are
/// always written so the round trip is field-exact.
pub fn manifest_to_string(ds: &Dataset) -> String {
    let raw = RawManifest {
        name: ds.name.clone(),
        coords: CoordSpace::Normalized,
        records: ds
            .records
            .iter()
            .map(|r| RawRecord {
                id: r.id.clone(),
                width: r.width,
                height: r.height,
                boxes: r.boxes.as_ref().map(|bs| {
                    bs.iter()
                        .map(|b| vec![b.cx, b.cy, b.w, b.h, b.score])
                        .collect()
                }),
                points: r
                    .points
                    .as_ref()
                    .map(|ps| ps.iter().map(|p| vec![p.cx, p.cy, p.score]).collect()),
                count: r.count.map(CountLabel::get),
                frame_path: r.frame_path.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("manifest serialization is infallible")
}

pub fn save_manifest(ds: &Dataset, path: &Path) -> Result<(), CorpusError> {
    fs::write(path, manifest_to_string(ds)).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}
