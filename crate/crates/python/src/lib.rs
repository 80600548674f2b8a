//! Python bindings. Points are `(cx, cy)` or `(cx, cy, score)` tuples and
//! boxes `(cx, cy, w, h)` or `(cx, cy, w, h, score)`, all in normalized
//! coordinates. Frames and maps are flat row-major lists plus a width.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ircount_core::camloc::{self, ActivationMap, Branch};
use ircount_core::corpus::{self, BoundingBox, Dataset as CoreDataset, PointAnnotation};
use ircount_core::harness::{self, FractionCurve};
use ircount_core::metrics::{self, CountPair, Denominator, MaedConfig};
use ircount_core::postprocess;
use ircount_core::preprocess::{self, Frame};
use ircount_core::{assignment, MatchResult};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_point(v: &[f64]) -> PyResult<PointAnnotation> {
    match *v {
        [cx, cy] => Ok(PointAnnotation::at(cx, cy)),
        [cx, cy, s] => Ok(PointAnnotation::new(cx, cy, s)),
        _ => Err(value_err(format!("a point has 2 or 3 fields, got {}", v.len()))),
    }
}

fn to_points(rows: Vec<Vec<f64>>) -> PyResult<Vec<PointAnnotation>> {
    rows.iter().map(|r| to_point(r)).collect()
}

fn to_box(v: &[f64]) -> PyResult<BoundingBox> {
    match *v {
        [cx, cy, w, h] => Ok(BoundingBox::ground_truth(cx, cy, w, h)),
        [cx, cy, w, h, s] => Ok(BoundingBox::new(cx, cy, w, h, s)),
        _ => Err(value_err(format!("a box has 4 or 5 fields, got {}", v.len()))),
    }
}

fn to_boxes(rows: Vec<Vec<f64>>) -> PyResult<Vec<BoundingBox>> {
    rows.iter().map(|r| to_box(r)).collect()
}

fn point_tuple(p: &PointAnnotation) -> (f64, f64) {
    (p.cx, p.cy)
}

type BoxTuple = (f64, f64, f64, f64, f64);

fn box_tuple(b: &BoundingBox) -> BoxTuple {
    (b.cx, b.cy, b.w, b.h, b.score)
}

fn grid_height(len: usize, width: usize) -> PyResult<usize> {
    if width == 0 || len == 0 || !len.is_multiple_of(width) {
        return Err(value_err(format!(
            "{len} values do not form rows of width {width}"
        )));
    }
    Ok(len / width)
}

/// Result of optimal point matching.
#[pyclass(name = "MatchResult", module = "ircount", frozen)]
pub struct PyMatchResult {
    inner: MatchResult,
}

#[pymethods]
impl PyMatchResult {
    /// `(gt_index, pred_index, distance)` triples sorted by ground-truth index.
    #[getter]
    fn pairs(&self) -> Vec<(usize, usize, f64)> {
        self.inner.pairs.iter().map(|p| (p.gt, p.pred, p.distance)).collect()
    }

    #[getter]
    fn unmatched_gt(&self) -> usize {
        self.inner.unmatched_gt
    }

    #[getter]
    fn unmatched_pred(&self) -> usize {
        self.inner.unmatched_pred
    }

    /// Sum of matched distances plus `penalty` per unmatched point.
    fn objective(&self, penalty: f64) -> f64 {
        self.inner.objective(penalty)
    }

    fn __repr__(&self) -> String {
        format!(
            "MatchResult(pairs={}, unmatched_gt={}, unmatched_pred={})",
            self.inner.pairs.len(),
            self.inner.unmatched_gt,
            self.inner.unmatched_pred
        )
    }
}

/// Minimum-cost matching between two point sets.
#[pyfunction]
#[pyo3(signature = (gt, pred, penalty = 1.0))]
fn match_points(gt: Vec<Vec<f64>>, pred: Vec<Vec<f64>>, penalty: f64) -> PyResult<PyMatchResult> {
    if !(penalty.is_finite() && penalty >= 0.0) {
        return Err(value_err(format!("penalty must be finite and non-negative, got {penalty}")));
    }
    let inner = assignment::match_points(&to_points(gt)?, &to_points(pred)?, penalty);
    Ok(PyMatchResult { inner })
}

/// Exhaustive matching, for at most 8 points per side.
#[pyfunction]
#[pyo3(signature = (gt, pred, penalty = 1.0))]
fn brute_force_match(
    gt: Vec<Vec<f64>>,
    pred: Vec<Vec<f64>>,
    penalty: f64,
) -> PyResult<PyMatchResult> {
    let inner = assignment::brute_force_match(&to_points(gt)?, &to_points(pred)?, penalty)
        .map_err(value_err)?;
    Ok(PyMatchResult { inner })
}

/// Solves a square assignment problem; returns `(row, col)` pairs.
#[pyfunction]
fn hungarian(costs: Vec<Vec<f64>>) -> PyResult<Vec<(usize, usize)>> {
    let rows = costs.len();
    let cols = costs.first().map_or(0, Vec::len);
    if costs.iter().any(|r| r.len() != cols) {
        return Err(value_err("cost rows have different lengths"));
    }
    let m = assignment::CostMatrix::new(rows, cols, costs.concat()).map_err(value_err)?;
    assignment::hungarian(&m).map_err(value_err)
}

fn maed_config(penalty: f64, squared: bool, denominator: &str) -> PyResult<MaedConfig> {
    let denominator = match denominator {
        "max_card" => Denominator::MaxCard,
        "gt_card" => Denominator::GtCard,
        other => {
            return Err(value_err(format!(
                "denominator must be 'max_card' or 'gt_card', got {other:?}"
            )))
        }
    };
    Ok(MaedConfig {
        penalty,
        squared,
        denominator,
    })
}

/// mAED term of a single image.
#[pyfunction]
#[pyo3(signature = (gt, pred, penalty = 1.0, squared = true, denominator = "max_card"))]
fn maed_image(
    gt: Vec<Vec<f64>>,
    pred: Vec<Vec<f64>>,
    penalty: f64,
    squared: bool,
    denominator: &str,
) -> PyResult<f64> {
    let cfg = maed_config(penalty, squared, denominator)?;
    metrics::maed_image(&to_points(gt)?, &to_points(pred)?, &cfg).map_err(value_err)
}

/// Mean mAED over images; `gt` and `pred` are lists of point lists.
#[pyfunction]
#[pyo3(signature = (gt, pred, penalty = 1.0, squared = true, denominator = "max_card"))]
fn maed(
    gt: Vec<Vec<Vec<f64>>>,
    pred: Vec<Vec<Vec<f64>>>,
    penalty: f64,
    squared: bool,
    denominator: &str,
) -> PyResult<f64> {
    let cfg = maed_config(penalty, squared, denominator)?;
    let gt: Vec<_> = gt.into_iter().map(to_points).collect::<PyResult<_>>()?;
    let pred: Vec<_> = pred.into_iter().map(to_points).collect::<PyResult<_>>()?;
    metrics::maed(&gt, &pred, &cfg).map_err(value_err)
}

fn count_pairs(gt: &[u32], pred: &[u32]) -> PyResult<Vec<CountPair>> {
    if gt.len() != pred.len() {
        return Err(value_err(format!(
            "{} ground-truth counts but {} predictions",
            gt.len(),
            pred.len()
        )));
    }
    Ok(gt
        .iter()
        .zip(pred)
        .enumerate()
        .map(|(i, (&g, &p))| CountPair::new(i.to_string(), g, p))
        .collect())
}

/// Accuracy, MSE and MAE as a dict; with `per_class`, also a
/// `{count: (accuracy, occurrences, correct)}` breakdown.
#[pyfunction]
#[pyo3(signature = (gt, pred, per_class = false))]
fn count_metrics<'py>(
    py: Python<'py>,
    gt: Vec<u32>,
    pred: Vec<u32>,
    per_class: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let pairs = count_pairs(&gt, &pred)?;
    let r = if per_class {
        metrics::count_metrics_with_classes(&pairs)
    } else {
        metrics::count_metrics(&pairs)
    }
    .map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("mse", r.mse)?;
    d.set_item("mae", r.mae)?;
    d.set_item("n", r.n)?;
    if let Some(classes) = r.per_class {
        let c = PyDict::new(py);
        for (k, s) in classes {
            c.set_item(k, (s.accuracy, s.occurrences, s.correct))?;
        }
        d.set_item("per_class", c)?;
    }
    Ok(d)
}

/// Rounds a regression output to a count.
#[pyfunction]
fn decide_count_regression(raw: f64) -> PyResult<u32> {
    metrics::decide_count_regression(raw).map_err(value_err)
}

/// Index of the highest class score.
#[pyfunction]
fn decide_count_classification(scores: Vec<f64>) -> PyResult<usize> {
    metrics::decide_count_classification(&scores).map_err(value_err)
}

#[pyfunction]
fn iou(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    Ok(postprocess::iou(&to_box(&a)?, &to_box(&b)?))
}

/// Indices of the boxes kept by greedy NMS, highest score first.
#[pyfunction]
#[pyo3(signature = (boxes, iou_threshold = postprocess::DEFAULT_NMS_IOU))]
fn nms(boxes: Vec<Vec<f64>>, iou_threshold: f64) -> PyResult<Vec<usize>> {
    postprocess::nms_indices(&to_boxes(boxes)?, iou_threshold).map_err(value_err)
}

#[pyfunction]
fn confidence_filter(
    boxes: Vec<Vec<f64>>,
    threshold: f64,
) -> PyResult<Vec<BoxTuple>> {
    let kept = postprocess::confidence_filter(&to_boxes(boxes)?, threshold).map_err(value_err)?;
    Ok(kept.iter().map(box_tuple).collect())
}

#[pyfunction]
#[pyo3(signature = (step = postprocess::DEFAULT_GRID_STEP))]
fn threshold_grid(step: f64) -> PyResult<Vec<f64>> {
    postprocess::threshold_grid(step).map_err(value_err)
}

/// Clips a frame at its `lo`/`hi` percentiles.
#[pyfunction]
#[pyo3(signature = (values, width, lo = 5.0, hi = 95.0))]
fn winsorize(values: Vec<f64>, width: usize, lo: f64, hi: f64) -> PyResult<Vec<f64>> {
    let h = grid_height(values.len(), width)?;
    let f = Frame::new(width, h, values).map_err(value_err)?;
    Ok(preprocess::winsorize(&f, lo, hi).map_err(value_err)?.into_values())
}

#[pyfunction]
#[pyo3(signature = (values, lo = 5.0, hi = 95.0))]
fn percentile_bounds(values: Vec<f64>, lo: f64, hi: f64) -> PyResult<(f64, f64)> {
    let n = values.len();
    let f = Frame::new(n, 1, values).map_err(value_err)?;
    preprocess::percentile_bounds(&f, lo, hi).map_err(value_err)
}

#[pyfunction]
fn normalize_unit(values: Vec<f64>) -> PyResult<Vec<f64>> {
    let n = values.len();
    let f = Frame::new(n, 1, values).map_err(value_err)?;
    Ok(preprocess::normalize_unit(&f).into_values())
}

/// Person locations recovered from an activation map.
#[pyclass(name = "Localization", module = "ircount", frozen)]
pub struct PyLocalization {
    #[pyo3(get)]
    points: Vec<(f64, f64)>,
    #[pyo3(get)]
    branch: &'static str,
    #[pyo3(get)]
    components: usize,
    #[pyo3(get)]
    adjustment: isize,
    #[pyo3(get)]
    degenerate: bool,
}

#[pymethods]
impl PyLocalization {
    fn __repr__(&self) -> String {
        format!(
            "Localization(points={}, branch={:?}, components={})",
            self.points.len(),
            self.branch,
            self.components
        )
    }
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::NoPeople => "no_people",
        Branch::Exact => "exact",
        Branch::Largest => "largest",
        Branch::Split => "split",
        Branch::EmptyMask => "empty_mask",
    }
}

/// Places `count` people on an activation map given in [0, 255].
#[pyfunction]
#[pyo3(signature = (values, width, count, threshold = camloc::DEFAULT_BINARY_THRESHOLD, seed = 0))]
fn locate_people(
    values: Vec<f64>,
    width: usize,
    count: usize,
    threshold: f64,
    seed: u64,
) -> PyResult<PyLocalization> {
    let h = grid_height(values.len(), width)?;
    let map = ActivationMap::new(width, h, values).map_err(value_err)?;
    let loc = camloc::locate_people(&map, threshold, count, seed);
    Ok(PyLocalization {
        points: loc.points.iter().map(point_tuple).collect(),
        branch: branch_name(loc.branch),
        components: loc.components,
        adjustment: loc.adjustment,
        degenerate: loc.is_degenerate(),
    })
}

/// A synthetic activation map with planted people.
#[pyclass(name = "Scene", module = "ircount", frozen)]
pub struct PyScene {
    #[pyo3(get)]
    width: usize,
    #[pyo3(get)]
    height: usize,
    /// Flat row-major map in [0, 255].
    #[pyo3(get)]
    values: Vec<f64>,
    #[pyo3(get)]
    points: Vec<(f64, f64)>,
    #[pyo3(get)]
    boxes: Vec<BoxTuple>,
}

#[pyfunction]
#[pyo3(signature = (n, width = 64, height = 64, sigma = 2.0, min_sep = None, seed = 0))]
fn synth_scene(
    n: usize,
    width: usize,
    height: usize,
    sigma: f64,
    min_sep: Option<f64>,
    seed: u64,
) -> PyResult<PyScene> {
    let s = harness::synth_scene(n, width, height, sigma, min_sep.unwrap_or(8.0 * sigma), seed)
        .map_err(value_err)?;
    Ok(PyScene {
        width,
        height,
        values: s.map.values().to_vec(),
        points: s.points.iter().map(point_tuple).collect(),
        boxes: s.boxes.iter().map(box_tuple).collect(),
    })
}

/// Smallest fraction whose interpolated accuracy reaches `target`.
#[pyfunction]
fn break_even(fractions: Vec<f64>, accuracies: Vec<f64>, target: f64) -> PyResult<Option<f64>> {
    let curve = FractionCurve::new("", fractions, accuracies).map_err(value_err)?;
    Ok(harness::break_even(&curve, target))
}

/// Seeded permutation of `0..n`.
#[pyfunction]
fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    corpus::shuffled_indices(n, seed)
}

/// A validated annotation manifest.
#[pyclass(name = "Dataset", module = "ircount", frozen)]
pub struct PyDataset {
    inner: CoreDataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = corpus::load_manifest(&path).map_err(|e| match e {
            corpus::CorpusError::Io { .. } => PyIOError::new_err(e.to_string()),
            other => value_err(other),
        })?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner =
            corpus::parse_manifest(text, corpus::LoadOptions::default()).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        corpus::manifest_to_string(&self.inner)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.ids().map(str::to_string).collect()
    }

    /// Image-level counts derived from the finest annotation present.
    fn counts(&self) -> PyResult<Vec<u32>> {
        self.inner
            .records
            .iter()
            .map(|r| corpus::annotation_to_count(r).map(|c| c.get()).map_err(value_err))
            .collect()
    }

    fn split(&self, train_count: usize, seed: u64) -> PyResult<(Self, Self)> {
        let (a, b) = corpus::split_dataset(&self.inner, train_count, seed).map_err(value_err)?;
        Ok((Self { inner: a }, Self { inner: b }))
    }

    /// Nested subsets, one per fraction.
    fn ablate(&self, fractions: Vec<f64>, seed: u64) -> PyResult<Vec<Self>> {
        let subsets = harness::ablate_fractions(&self.inner, &fractions, seed).map_err(value_err)?;
        Ok(subsets.into_iter().map(|inner| Self { inner }).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(name={:?}, records={})", self.inner.name, self.inner.len())
    }
}

#[pymodule]
fn ircount(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyMatchResult>()?;
    m.add_class::<PyLocalization>()?;
    m.add_class::<PyScene>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(match_points, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_match, m)?)?;
    m.add_function(wrap_pyfunction!(hungarian, m)?)?;
    m.add_function(wrap_pyfunction!(maed_image, m)?)?;
    m.add_function(wrap_pyfunction!(maed, m)?)?;
    m.add_function(wrap_pyfunction!(count_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(decide_count_regression, m)?)?;
    m.add_function(wrap_pyfunction!(decide_count_classification, m)?)?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(nms, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_filter, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_grid, m)?)?;
    m.add_function(wrap_pyfunction!(winsorize, m)?)?;
    m.add_function(wrap_pyfunction!(percentile_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_unit, m)?)?;
    m.add_function(wrap_pyfunction!(locate_people, m)?)?;
    m.add_function(wrap_pyfunction!(synth_scene, m)?)?;
    m.add_function(wrap_pyfunction!(break_even, m)?)?;
    m.add_function(wrap_pyfunction!(shuffled_indices, m)?)?;
    Ok(())
}
