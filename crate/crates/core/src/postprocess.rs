//! Detector post-processing: IoU, confidence filtering, greedy NMS, and the
//! validation sweep that picks a confidence threshold by count accuracy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{align, annotation_to_count, BoundingBox, CorpusError, Dataset, ImageRecord};
use crate::metrics::{count_metrics, CountPair, MetricsError};

/// IoU threshold applied before the confidence sweep.
pub const DEFAULT_NMS_IOU: f64 = 0.7;
pub const DEFAULT_GRID_STEP: f64 = 0.001;

#[derive(Debug, Error)]
pub enum PostprocessError {
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error("threshold grid must be strictly ascending (index {0})")]
    UnsortedGrid(usize),
    #[error("grid step must be in (0, 1], got {0}")]
    BadStep(f64),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn check_unit(name: &'static str, value: f64) -> Result<(), PostprocessError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(PostprocessError::OutOfRange { name, value })
    }
}

/// Intersection over union of two center-size boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Boxes scoring at least `conf`, in input order.
pub fn confidence_filter(
    boxes: &[BoundingBox],
    conf: f64,
) -> Result<Vec<BoundingBox>, PostprocessError> {
    check_unit("confidence threshold", conf)?;
    Ok(boxes.iter().filter(|b| b.score >= conf).copied().collect())
}

/// Indices kept by greedy NMS, highest score first.
///
/// Boxes are visited by descending score (ties by lower index); a box is
/// dropped when its IoU with an already kept box exceeds `iou_thresh`.
pub fn nms_indices(boxes: &[BoundingBox], iou_thresh: f64) -> Result<Vec<usize>, PostprocessError> {
    check_unit("NMS IoU threshold", iou_thresh)?;
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| boxes[j].score.total_cmp(&boxes[i].score));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| iou(&boxes[k], &boxes[i]) <= iou_thresh) {
            kept.push(i);
        }
    }
    Ok(kept)
}

pub fn nms(boxes: &[BoundingBox], iou_thresh: f64) -> Result<Vec<BoundingBox>, PostprocessError> {
    Ok(nms_indices(boxes, iou_thresh)?
        .into_iter()
        .map(|i| boxes[i])
        .collect())
}

/// Count accuracy as a function of the confidence threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub thresholds: Vec<f64>,
    pub accuracies: Vec<f64>,
    pub best_threshold: f64,
    pub best_accuracy: f64,
}

impl ThresholdCurve {
    /// Builds a curve from parallel vectors, picking the smallest threshold
    /// that attains the maximum accuracy.
    pub fn from_points(thresholds: Vec<f64>, accuracies: Vec<f64>) -> Self {
        let mut best = 0;
        for (i, &a) in accuracies.iter().enumerate() {
            if a > accuracies[best] {
                best = i;
            }
        }
        Self {
            best_threshold: thresholds.get(best).copied().unwrap_or(f64::NAN),
            best_accuracy: accuracies.get(best).copied().unwrap_or(f64::NAN),
            thresholds,
            accuracies,
        }
    }
}

/// `0, step, 2·step, ..., 1`. When `1/step` is an integer the points are
/// computed as `i / n` so they land on the nearest decimal.
pub fn threshold_grid(step: f64) -> Result<Vec<f64>, PostprocessError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(PostprocessError::BadStep(step));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() < 1e-9 {
        let n = n as usize;
        return Ok((0..=n).map(|i| i as f64 / n as f64).collect());
    }
    let mut out = Vec::new();
    let mut i = 0usize;
    loop {
        let t = i as f64 * step;
        if t > 1.0 + 1e-12 {
            break;
        }
        out.push(t.min(1.0));
        i += 1;
    }
    Ok(out)
}

/// Scores that a prediction record contributes to the sweep. Boxes go
/// through NMS first; point predictions are used as-is. `None` means the
/// record only carries a count, which no threshold changes.
fn sweep_scores(pred: &ImageRecord, nms_iou: f64) -> Result<Option<Vec<f64>>, PostprocessError> {
    if let Some(boxes) = &pred.boxes {
        return Ok(Some(nms(boxes, nms_iou)?.iter().map(|b| b.score).collect()));
    }
    if let Some(points) = &pred.points {
        return Ok(Some(points.iter().map(|p| p.score).collect()));
    }
    Ok(None)
}

/// Sweeps confidence thresholds over a validation set and records count
/// accuracy at each one.
pub fn tune_threshold(
    gt: &Dataset,
    pred: &Dataset,
    grid: &[f64],
    nms_iou: f64,
) -> Result<ThresholdCurve, PostprocessError> {
    if grid.is_empty() {
        return Err(PostprocessError::EmptyGrid);
    }
    for (i, &t) in grid.iter().enumerate() {
        check_unit("grid threshold", t)?;
        if i > 0 && t <= grid[i - 1] {
            return Err(PostprocessError::UnsortedGrid(i));
        }
    }
    check_unit("NMS IoU threshold", nms_iou)?;

    struct Prepared<'a> {
        id: &'a str,
        gt: u32,
        scores: Option<Vec<f64>>,
        fixed: u32,
    }
    let mut images = Vec::with_capacity(gt.len());
    for (g, p) in align(gt, pred)? {
        let scores = sweep_scores(p, nms_iou)?;
        let fixed = match scores {
            Some(_) => 0,
            None => annotation_to_count(p)?.get(),
        };
        images.push(Prepared {
            id: &g.id,
            gt: annotation_to_count(g)?.get(),
            scores,
            fixed,
        });
    }

    let accuracies = grid
        .par_iter()
        .map(|&t| {
            let pairs: Vec<CountPair> = images
                .iter()
                .map(|im| {
                    let pred = match &im.scores {
                        Some(s) => s.iter().filter(|&&x| x >= t).count() as u32,
                        None => im.fixed,
                    };
                    CountPair::new(im.id, im.gt, pred)
                })
                .collect();
            count_metrics(&pairs).map(|r| r.accuracy)
        })
        .collect::<Result<Vec<f64>, MetricsError>>()?;

    Ok(ThresholdCurve::from_points(grid.to_vec(), accuracies))
}
