//! Experiment drivers: training-set fraction ablation, break-even analysis,
//! inference-speed benchmarking, and a synthetic scene generator used to
//! check the localization and metric code end to end.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camloc::ActivationMap;
use crate::corpus::{shuffled_indices, BoundingBox, Dataset, PointAnnotation};

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

/// Default number of untimed calls before measurement.
pub const DEFAULT_WARMUP: usize = 100;
/// Default number of timed calls.
pub const DEFAULT_ITERS: usize = 10_000;
/// Per-iteration latencies are kept only up to this many timed calls.
pub const DEFAULT_RETAIN_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("fractions must be strictly ascending values in (0, 1], got {0:?}")]
    BadFractions(Vec<f64>),
    #[error("malformed range {0:?}; expected start:stop:step")]
    BadRange(String),
    #[error("fraction curve is malformed: {0}")]
    BadCurve(String),
    #[error("benchmark needs at least one timed iteration and one input")]
    BadBenchConfig,
    #[error("predictor failed at iteration {iteration}: {source}")]
    Predictor {
        iteration: usize,
        #[source]
        source: BoxError,
    },
    #[error("cannot place {n} people {min_sep} px apart in a {width}x{height} map")]
    Infeasible {
        n: usize,
        width: usize,
        height: usize,
        min_sep: f64,
    },
    #[error("invalid scene parameters: {0}")]
    BadScene(String),
    #[error("could not start predictor: {0}")]
    Spawn(#[source] std::io::Error),
}

/// Accuracy as a function of the fraction of training data used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionCurve {
    pub fractions: Vec<f64>,
    pub accuracies: Vec<f64>,
    #[serde(default)]
    pub label: String,
}

impl FractionCurve {
    pub fn new(
        label: impl Into<String>,
        fractions: Vec<f64>,
        accuracies: Vec<f64>,
    ) -> Result<Self, HarnessError> {
        let c = Self {
            fractions,
            accuracies,
            label: label.into(),
        };
        c.check()?;
        Ok(c)
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        if self.fractions.len() != self.accuracies.len() {
            return Err(HarnessError::BadCurve(format!(
                "{} fractions but {} accuracies",
                self.fractions.len(),
                self.accuracies.len()
            )));
        }
        check_fractions(&self.fractions)?;
        if let Some(a) = self.accuracies.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(HarnessError::BadCurve(format!("accuracy {a} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.fractions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.is_empty()
    }
}

fn check_fractions(fractions: &[f64]) -> Result<(), HarnessError> {
    let ok = fractions.iter().all(|f| *f > 0.0 && *f <= 1.0)
        && fractions.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(HarnessError::BadFractions(fractions.to_vec()))
    }
}

/// Expands `start:stop:step` into an inclusive list, e.g. `0.1:1.0:0.1`.
/// Values are rounded to 9 decimals to absorb accumulated float error.
pub fn parse_range(spec: &str) -> Result<Vec<f64>, HarnessError> {
    let bad = || HarnessError::BadRange(spec.to_string());
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(bad());
    }
    let mut out = Vec::new();
    let mut i = 0u32;
    loop {
        let v = ((start + f64::from(i) * step) * 1e9).round() / 1e9;
        if v > stop + 1e-9 {
            break;
        }
        out.push(v);
        i += 1;
    }
    Ok(out)
}

/// The ten fractions 0.1, 0.2, ..., 1.0.
pub fn default_fractions() -> Vec<f64> {
    (1..=10).map(|i| f64::from(i) / 10.0).collect()
}

/// Nested training subsets: one seeded shuffle, and each fraction takes the
/// first `round(f * n)` records of it. Records keep their original order
/// inside each subset.
pub fn ablate_fractions(
    ds: &Dataset,
    fractions: &[f64],
    seed: u64,
) -> Result<Vec<Dataset>, HarnessError> {
    if ds.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    check_fractions(fractions)?;
    let order = shuffled_indices(ds.len(), seed);
    Ok(fractions
        .iter()
        .map(|&f| {
            let size = (f * ds.len() as f64).round() as usize;
            let mut picked = order[..size.min(ds.len())].to_vec();
            picked.sort_unstable();
            Dataset {
                name: format!("{}-f{:.2}", ds.name, f),
                records: picked.into_iter().map(|i| ds.records[i].clone()).collect(),
            }
        })
        .collect())
}

/// Smallest fraction at which the piecewise-linear curve reaches `target`.
pub fn break_even(curve: &FractionCurve, target: f64) -> Option<f64> {
    let f = &curve.fractions;
    let a = &curve.accuracies;
    for i in 0..f.len().min(a.len()) {
        if a[i] >= target {
            if i == 0 {
                return Some(f[i]);
            }
            let t = (target - a[i - 1]) / (a[i] - a[i - 1]);
            return Some(f[i - 1] + t * (f[i] - f[i - 1]));
        }
    }
    None
}

/// Output of one predictor call.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Count(u32),
    Points(Vec<PointAnnotation>),
    Boxes(Vec<BoundingBox>),
}

impl Prediction {
    /// Parses a predictor reply line: a bare integer count, or a JSON array
    /// of `[cx, cy, score?]` points or `[cx, cy, w, h, score?]` boxes.
    pub fn parse_line(line: &str) -> Result<Self, String> {
        let line = line.trim();
        if let Ok(n) = line.parse::<u32>() {
            return Ok(Self::Count(n));
        }
        let rows: Vec<Vec<f64>> =
            serde_json::from_str(line).map_err(|e| format!("unparseable prediction {line:?}: {e}"))?;
        let widths: HashSet<usize> = rows.iter().map(Vec::len).collect();
        if widths.iter().all(|w| *w == 2 || *w == 3) {
            return Ok(Self::Points(
                rows.iter()
                    .map(|r| PointAnnotation::new(r[0], r[1], r.get(2).copied().unwrap_or(1.0)))
                    .collect(),
            ));
        }
        if widths.iter().all(|w| *w == 4 || *w == 5) {
            return Ok(Self::Boxes(
                rows.iter()
                    .map(|r| BoundingBox::new(r[0], r[1], r[2], r[3], r.get(4).copied().unwrap_or(1.0)))
                    .collect(),
            ));
        }
        Err(format!("rows of mixed or unsupported width in {line:?}"))
    }

    pub fn count(&self) -> usize {
        match self {
            Self::Count(n) => *n as usize,
            Self::Points(p) => p.len(),
            Self::Boxes(b) => b.len(),
        }
    }
}

/// Anything that turns one input into a prediction.
pub trait Predictor<I: ?Sized> {
    fn predict(&mut self, input: &I) -> Result<Prediction, BoxError>;
}

impl<I: ?Sized, F> Predictor<I> for F
where
    F: FnMut(&I) -> Result<Prediction, BoxError>,
{
    fn predict(&mut self, input: &I) -> Result<Prediction, BoxError> {
        self(input)
    }
}

/// Latency summary of a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchStats {
    pub warmup_iters: usize,
    pub timed_iters: usize,
    /// Seconds.
    pub mean_latency: f64,
    pub fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_iter: Option<Vec<f64>>,
}

impl BenchStats {
    /// Latency percentile in seconds, when per-iteration samples were kept.
    pub fn latency_percentile(&self, p: f64) -> Option<f64> {
        let mut s = self.per_iter.clone()?;
        if s.is_empty() {
            return None;
        }
        s.sort_by(f64::total_cmp);
        Some(crate::preprocess::percentile_sorted(&s, p))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub warmup: usize,
    pub iters: usize,
    pub retain_cap: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            warmup: DEFAULT_WARMUP,
            iters: DEFAULT_ITERS,
            retain_cap: DEFAULT_RETAIN_CAP,
        }
    }
}

/// Times a predictor one input at a time.
///
/// `warmup` calls run untimed, then `iters` calls are timed individually
/// with a monotonic clock. Inputs are consumed cyclically across both
/// phases. Strictly serial.
pub fn bench_fps<I, P: Predictor<I> + ?Sized>(
    predictor: &mut P,
    inputs: &[I],
    opts: BenchOptions,
) -> Result<BenchStats, HarnessError> {
    if opts.iters == 0 || inputs.is_empty() {
        return Err(HarnessError::BadBenchConfig);
    }
    let mut call = 0usize;
    let mut next = |p: &mut P| {
        let input = &inputs[call % inputs.len()];
        let iteration = call;
        call += 1;
        p.predict(input)
            .map(|_| ())
            .map_err(|source| HarnessError::Predictor { iteration, source })
    };
    for _ in 0..opts.warmup {
        next(predictor)?;
    }
    let keep = opts.iters <= opts.retain_cap;
    let mut samples = Vec::with_capacity(if keep { opts.iters } else { 0 });
    let mut total = 0.0f64;
    for _ in 0..opts.iters {
        let start = Instant::now();
        next(predictor)?;
        let dt = start.elapsed().as_secs_f64();
        total += dt;
        if keep {
            samples.push(dt);
        }
    }
    // a zero-work stub can measure below clock resolution
    let mean = (total / opts.iters as f64).max(1e-9);
    Ok(BenchStats {
        warmup_iters: opts.warmup,
        timed_iters: opts.iters,
        mean_latency: mean,
        fps: 1.0 / mean,
        per_iter: keep.then_some(samples),
    })
}

/// A predictor running as a child process speaking the line protocol: one
/// input path per line on stdin, one prediction per line on stdout.
pub struct ExternalPredictor {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    line: String,
}

impl ExternalPredictor {
    /// Spawns `command` through `sh -c`.
    pub fn spawn(command: &str) -> Result<Self, HarnessError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(HarnessError::Spawn)?;
        let stdin = BufWriter::new(child.stdin.take().expect("stdin is piped"));
        let stdout = BufReader::new(child.stdout.take().expect("stdout is piped"));
        Ok(Self {
            child,
            stdin,
            stdout,
            line: String::new(),
        })
    }
}

impl Predictor<str> for ExternalPredictor {
    fn predict(&mut self, input: &str) -> Result<Prediction, BoxError> {
        writeln!(self.stdin, "{input}")?;
        self.stdin.flush()?;
        self.line.clear();
        if self.stdout.read_line(&mut self.line)? == 0 {
            return Err("predictor closed its output".into());
        }
        Ok(Prediction::parse_line(&self.line)?)
    }
}

impl Predictor<String> for ExternalPredictor {
    fn predict(&mut self, input: &String) -> Result<Prediction, BoxError> {
        Predictor::<str>::predict(self, input.as_str())
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A rendered synthetic scene with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub map: ActivationMap,
    pub points: Vec<PointAnnotation>,
    pub boxes: Vec<BoundingBox>,
}

/// Adds an isotropic Gaussian blob centered at pixel-space `(cx, cy)`.
/// Overlapping blobs combine by maximum, so values stay within `[0, peak]`.
pub fn render_blob(map: &mut ActivationMap, cx: f64, cy: f64, sigma: f64, peak: f64) {
    let w = map.width();
    let two_var = 2.0 * sigma * sigma;
    for (i, v) in map.values_mut().iter_mut().enumerate() {
        let dx = (i % w) as f64 + 0.5 - cx;
        let dy = (i / w) as f64 + 0.5 - cy;
        let b = peak * (-(dx * dx + dy * dy) / two_var).exp();
        if b > *v {
            *v = b;
        }
    }
}

const PLACEMENT_RESTARTS: usize = 200;
const PLACEMENT_TRIES: usize = 500;

/// Plants `n_people` Gaussian blobs (peak 255) at seeded positions at least
/// `min_sep` pixels apart and at least `3·sigma` from the border. Returns the
/// map, the true centers as normalized points, and `4·sigma` square boxes.
pub fn synth_scene(
    n_people: usize,
    width: usize,
    height: usize,
    blob_sigma: f64,
    min_sep: f64,
    seed: u64,
) -> Result<Scene, HarnessError> {
    if width == 0 || height == 0 {
        return Err(HarnessError::BadScene("dimensions must be positive".into()));
    }
    if !(blob_sigma > 0.0 && blob_sigma.is_finite()) {
        return Err(HarnessError::BadScene(format!("sigma {blob_sigma} must be positive")));
    }
    if !(min_sep > 0.0 && min_sep.is_finite()) {
        return Err(HarnessError::BadScene(format!("min_sep {min_sep} must be positive")));
    }
    let margin = 3.0 * blob_sigma;
    let (wf, hf) = (width as f64, height as f64);
    let infeasible = || HarnessError::Infeasible {
        n: n_people,
        width,
        height,
        min_sep,
    };
    if n_people > 0 && (wf <= 2.0 * margin || hf <= 2.0 * margin) {
        return Err(infeasible());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<(f64, f64)> = Vec::with_capacity(n_people);
    'restart: for _ in 0..PLACEMENT_RESTARTS {
        centers.clear();
        for _ in 0..n_people {
            let mut placed = false;
            for _ in 0..PLACEMENT_TRIES {
                let c = (
                    rng.random_range(margin..wf - margin),
                    rng.random_range(margin..hf - margin),
                );
                if centers
                    .iter()
                    .all(|o| (o.0 - c.0).hypot(o.1 - c.1) >= min_sep)
                {
                    centers.push(c);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'restart;
            }
        }
        break;
    }
    if centers.len() != n_people {
        return Err(infeasible());
    }

    let mut map = ActivationMap::zeros(width, height).expect("dimensions checked");
    for &(x, y) in &centers {
        render_blob(&mut map, x, y, blob_sigma, 255.0);
    }
    let (bw, bh) = ((4.0 * blob_sigma / wf).min(1.0), (4.0 * blob_sigma / hf).min(1.0));
    let points = centers
        .iter()
        .map(|&(x, y)| PointAnnotation::at(x / wf, y / hf))
        .collect();
    let boxes = centers
        .iter()
        .map(|&(x, y)| BoundingBox::ground_truth(x / wf, y / hf, bw, bh))
        .collect();
    Ok(Scene { map, points, boxes })
}
