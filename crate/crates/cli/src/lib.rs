//! `ircount-eval`: one binary, one subcommand per evaluation task.
//!
//! Exit codes: 0 on success, 1 for usage and validation errors (bad flags,
//! missing inputs, schema violations), 2 for runtime failures.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ircount_core::camloc::{self, ActivationMap, Branch, DEFAULT_BINARY_THRESHOLD};
use ircount_core::corpus::{
    self, align, annotation_to_count, boxes_to_points, CountLabel, Dataset, ImageRecord,
    PointAnnotation,
};
use ircount_core::harness::{self, BenchOptions, ExternalPredictor, FractionCurve};
use ircount_core::metrics::{self, CountPair, Denominator, MaedConfig};
use ircount_core::plot::{render_svg, PlotSeries};
use ircount_core::postprocess::{self, ThresholdCurve, DEFAULT_NMS_IOU};
use ircount_core::preprocess::{self, Frame};
use ircount_core::report::{self, Format, LocateReport, ModelRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn invalid(message: impl fmt::Display) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.to_string(),
        }
    }

    fn runtime(message: impl fmt::Display) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.to_string(),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

#[derive(Debug, Parser)]
#[command(name = "ircount-eval", version, about = "Evaluation toolkit for infrared people counting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count accuracy, MSE and MAE of predicted counts.
    EvalCount(EvalCountArgs),
    /// mAED between ground-truth and predicted points.
    EvalLocate(EvalLocateArgs),
    /// Sweep detector confidence thresholds on a validation set.
    TuneThreshold(TuneArgs),
    /// Extract person locations from a class activation map.
    LocateCam(LocateCamArgs),
    /// Percentile-clip a temperature frame.
    Winsorize(WinsorizeArgs),
    /// Reduce annotations to a weaker supervision level.
    Convert(ConvertArgs),
    /// Seeded train/test split of a manifest.
    Split(SplitArgs),
    /// Nested training subsets at several data fractions.
    Ablate(AblateArgs),
    /// Smallest data fraction at which a curve reaches a target accuracy.
    BreakEven(BreakEvenArgs),
    /// Time an external predictor over the line protocol.
    Bench(BenchArgs),
    /// Render a synthetic activation map with planted people.
    Synth(SynthArgs),
    /// Render result rows as JSON, Markdown or CSV.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OutputFormat {
    Json,
    Markdown,
    Csv,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Json => Format::Json,
            OutputFormat::Markdown => Format::Markdown,
            OutputFormat::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalCountArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub per_class: bool,
    /// Model name for the report row; defaults to the prediction manifest name.
    #[arg(long)]
    pub model: Option<String>,
    /// Keep only boxes/points scoring at least this much before counting.
    #[arg(long)]
    pub conf: Option<f64>,
    /// Apply NMS at this IoU to box predictions before counting.
    #[arg(long)]
    pub nms: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DenominatorArg {
    MaxCard,
    GtCard,
}

#[derive(Debug, Args)]
pub struct EvalLocateArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub penalty: f64,
    /// Use plain instead of squared distances for matched pairs.
    #[arg(long)]
    pub no_squared: bool,
    #[arg(long, value_enum, default_value = "max-card")]
    pub denominator: DenominatorArg,
    #[arg(long)]
    pub conf: Option<f64>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value_t = postprocess::DEFAULT_GRID_STEP)]
    pub grid_step: f64,
    #[arg(long, default_value_t = DEFAULT_NMS_IOU)]
    pub nms: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LocateCamArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = DEFAULT_BINARY_THRESHOLD)]
    pub threshold: f64,
    /// Factor applied to map values before thresholding (255 for [0, 1] maps).
    #[arg(long, default_value_t = 1.0)]
    pub map_scale: f64,
    #[arg(long, env = "IRCOUNT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WinsorizeArgs {
    #[arg(long, default_value_t = 5.0)]
    pub lo: f64,
    #[arg(long, default_value_t = 95.0)]
    pub hi: f64,
    /// Rescale the clipped frame to [0, 1].
    #[arg(long)]
    pub normalize: bool,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConvertTarget {
    /// Boxes become their center points.
    Points,
    /// Any tier becomes an image-level count.
    Count,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub to: ConvertTarget,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub train_count: usize,
    #[arg(long, env = "IRCOUNT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "0.1:1.0:0.1")]
    pub fractions: String,
    #[arg(long, env = "IRCOUNT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BreakEvenArgs {
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(long)]
    pub target: f64,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Predictor command, run through `sh -c`.
    #[arg(long)]
    pub cmd: String,
    #[arg(long, default_value_t = harness::DEFAULT_WARMUP)]
    pub warmup: usize,
    #[arg(long, default_value_t = harness::DEFAULT_ITERS)]
    pub iters: usize,
    /// Input paths fed to the predictor cyclically (repeatable).
    #[arg(long = "input")]
    pub inputs: Vec<String>,
    /// Take inputs from the `frame_path` entries of a manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    /// `WIDTHxHEIGHT`.
    #[arg(long, default_value = "64x64")]
    pub dims: String,
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    /// Minimum center separation in pixels; defaults to 8·sigma.
    #[arg(long)]
    pub min_sep: Option<f64>,
    #[arg(long, env = "IRCOUNT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(cli.command, &mut std::io::stdout().lock()) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Runs one subcommand, writing any stdout output to `stdout`.
pub fn execute(command: Command, stdout: &mut dyn Write) -> Outcome {
    match command {
        Command::EvalCount(a) => eval_count(a, stdout),
        Command::EvalLocate(a) => eval_locate(a, stdout),
        Command::TuneThreshold(a) => tune(a, stdout),
        Command::LocateCam(a) => locate_cam(a, stdout),
        Command::Winsorize(a) => winsorize(a),
        Command::Convert(a) => convert(a),
        Command::Split(a) => split(a, stdout),
        Command::Ablate(a) => ablate(a, stdout),
        Command::BreakEven(a) => break_even(a, stdout),
        Command::Bench(a) => bench(a, stdout),
        Command::Synth(a) => synth(a, stdout),
        Command::Report(a) => report_cmd(a, stdout),
    }
}

fn require_file(path: &Path) -> Outcome {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::invalid(format!("input file {} does not exist", path.display())))
    }
}

fn load(path: &Path) -> Outcome<Dataset> {
    require_file(path)?;
    corpus::load_manifest(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn check_unit(name: &str, v: f64) -> Outcome {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Failure::invalid(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Writes through a temporary file in the destination directory, then
/// renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Outcome {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let fail = |e: &dyn fmt::Display| Failure::runtime(format!("writing {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| fail(&e))?;
    tmp.write_all(contents).map_err(|e| fail(&e))?;
    tmp.persist(path).map_err(|e| fail(&e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Outcome {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::runtime(format!("writing stdout: {e}"))),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report types serialize") + "\n"
}

/// Predicted count for one record, optionally after NMS and a score cut.
fn predicted_count(rec: &ImageRecord, conf: Option<f64>, nms: Option<f64>) -> Outcome<u32> {
    if let Some(boxes) = &rec.boxes {
        let mut kept = boxes.clone();
        if let Some(t) = nms {
            kept = postprocess::nms(&kept, t).map_err(Failure::invalid)?;
        }
        if let Some(c) = conf {
            kept = postprocess::confidence_filter(&kept, c).map_err(Failure::invalid)?;
        }
        if conf.is_some() || nms.is_some() || rec.count.is_none() && rec.points.is_none() {
            return Ok(kept.len() as u32);
        }
    }
    if let (Some(points), Some(c)) = (&rec.points, conf) {
        return Ok(points.iter().filter(|p| p.score >= c).count() as u32);
    }
    annotation_to_count(rec)
        .map(CountLabel::get)
        .map_err(Failure::invalid)
}

fn eval_count(a: EvalCountArgs, stdout: &mut dyn Write) -> Outcome {
    if let Some(c) = a.conf {
        check_unit("--conf", c)?;
    }
    if let Some(t) = a.nms {
        check_unit("--nms", t)?;
    }
    let gt = load(&a.gt)?;
    let pred = load(&a.pred)?;
    let mut pairs = Vec::with_capacity(gt.len());
    for (g, p) in align(&gt, &pred).map_err(Failure::invalid)? {
        let truth = annotation_to_count(g).map_err(Failure::invalid)?.get();
        pairs.push(CountPair::new(&g.id, truth, predicted_count(p, a.conf, a.nms)?));
    }
    let report = if a.per_class {
        metrics::count_metrics_with_classes(&pairs)
    } else {
        metrics::count_metrics(&pairs)
    }
    .map_err(Failure::invalid)?;
    let row = ModelRow::new(a.model.unwrap_or(pred.name), report);
    let text = match a.format {
        OutputFormat::Json => to_json(&row),
        f => report::render(&[row], f.into()),
    };
    emit(a.out.as_deref(), &text, stdout)
}

fn record_points(rec: &ImageRecord, conf: Option<f64>) -> Outcome<Vec<PointAnnotation>> {
    let points = match (&rec.points, &rec.boxes) {
        (Some(p), _) => p.clone(),
        (None, Some(b)) => boxes_to_points(b),
        (None, None) if rec.count == Some(CountLabel(0)) => Vec::new(),
        (None, None) => {
            return Err(Failure::invalid(format!(
                "record {:?} has no point or box annotations",
                rec.id
            )))
        }
    };
    Ok(match conf {
        Some(c) => points.into_iter().filter(|p| p.score >= c).collect(),
        None => points,
    })
}

fn eval_locate(a: EvalLocateArgs, stdout: &mut dyn Write) -> Outcome {
    if !(a.penalty > 0.0 && a.penalty.is_finite()) {
        return Err(Failure::invalid(format!("--penalty must be positive, got {}", a.penalty)));
    }
    if let Some(c) = a.conf {
        check_unit("--conf", c)?;
    }
    let gt = load(&a.gt)?;
    let pred = load(&a.pred)?;
    let mut gt_sets = Vec::with_capacity(gt.len());
    let mut pred_sets = Vec::with_capacity(gt.len());
    for (g, p) in align(&gt, &pred).map_err(Failure::invalid)? {
        gt_sets.push(record_points(g, None)?);
        pred_sets.push(record_points(p, a.conf)?);
    }
    let config = MaedConfig {
        penalty: a.penalty,
        squared: !a.no_squared,
        denominator: match a.denominator {
            DenominatorArg::MaxCard => Denominator::MaxCard,
            DenominatorArg::GtCard => Denominator::GtCard,
        },
    };
    let value = metrics::maed(&gt_sets, &pred_sets, &config).map_err(Failure::invalid)?;
    let report = LocateReport {
        model: a.model.unwrap_or(pred.name),
        maed: value,
        images: gt_sets.len(),
        config,
    };
    emit(a.out.as_deref(), &to_json(&report), stdout)
}

fn tune(a: TuneArgs, stdout: &mut dyn Write) -> Outcome {
    check_unit("--nms", a.nms)?;
    let grid = postprocess::threshold_grid(a.grid_step).map_err(Failure::invalid)?;
    let gt = load(&a.gt)?;
    let pred = load(&a.pred)?;
    let curve = postprocess::tune_threshold(&gt, &pred, &grid, a.nms).map_err(Failure::invalid)?;
    write_atomic(&a.out, to_json(&curve).as_bytes())?;
    if let Some(svg) = &a.svg {
        write_atomic(svg, render_svg(&PlotSeries::from(&curve)).as_bytes())?;
    }
    let _ = writeln!(
        stdout,
        "best threshold {:.3} (accuracy {:.4})",
        curve.best_threshold, curve.best_accuracy
    );
    Ok(())
}

#[derive(Serialize)]
struct CamOutput {
    points: Vec<[f64; 2]>,
    branch: &'static str,
    components: usize,
    degenerate: bool,
    adjustment: isize,
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

fn locate_cam(a: LocateCamArgs, stdout: &mut dyn Write) -> Outcome {
    if !a.threshold.is_finite() {
        return Err(Failure::invalid("--threshold must be finite"));
    }
    require_file(&a.map)?;
    let map = ActivationMap::read(&a.map).map_err(|e| Failure::invalid(format!("{}: {e}", a.map.display())))?;
    let map = if a.map_scale == 1.0 { map } else { map.rescaled(a.map_scale) };
    let loc = camloc::locate_people(&map, a.threshold, a.count, a.seed);
    if loc.is_degenerate() {
        eprintln!("warning: no pixel above threshold; repeating the global peak");
    }
    let out = CamOutput {
        points: loc.points.iter().map(|p| [p.cx, p.cy]).collect(),
        branch: branch_name(loc.branch),
        components: loc.components,
        degenerate: loc.is_degenerate(),
        adjustment: loc.adjustment,
    };
    emit(a.out.as_deref(), &to_json(&out), stdout)
}

fn winsorize(a: WinsorizeArgs) -> Outcome {
    require_file(&a.input)?;
    let frame = Frame::read(&a.input).map_err(|e| Failure::invalid(format!("{}: {e}", a.input.display())))?;
    let mut out = preprocess::winsorize(&frame, a.lo, a.hi).map_err(Failure::invalid)?;
    if a.normalize {
        out = preprocess::normalize_unit(&out);
    }
    write_atomic(&a.output, out.to_text().as_bytes())
}

fn convert(a: ConvertArgs) -> Outcome {
    let mut ds = load(&a.input)?;
    for rec in &mut ds.records {
        match a.to {
            ConvertTarget::Points => {
                if let Some(boxes) = rec.boxes.take() {
                    if rec.points.is_none() {
                        rec.points = Some(boxes_to_points(&boxes));
                    }
                }
            }
            ConvertTarget::Count => {
                let c = annotation_to_count(rec).map_err(Failure::invalid)?;
                rec.count = Some(c);
                rec.boxes = None;
                rec.points = None;
            }
        }
    }
    write_atomic(&a.out, corpus::manifest_to_string(&ds).as_bytes())
}

fn split(a: SplitArgs, stdout: &mut dyn Write) -> Outcome {
    let ds = load(&a.manifest)?;
    let (train, test) = corpus::split_dataset(&ds, a.train_count, a.seed).map_err(Failure::invalid)?;
    write_atomic(&a.train_out, corpus::manifest_to_string(&train).as_bytes())?;
    write_atomic(&a.test_out, corpus::manifest_to_string(&test).as_bytes())?;
    let _ = writeln!(stdout, "train {} / test {}", train.len(), test.len());
    Ok(())
}

fn ablate(a: AblateArgs, stdout: &mut dyn Write) -> Outcome {
    let fractions = harness::parse_range(&a.fractions).map_err(Failure::invalid)?;
    let ds = load(&a.manifest)?;
    let subsets = harness::ablate_fractions(&ds, &fractions, a.seed).map_err(Failure::invalid)?;
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| Failure::runtime(format!("creating {}: {e}", a.out_dir.display())))?;
    for (f, subset) in fractions.iter().zip(&subsets) {
        let path = a.out_dir.join(format!("subset_f{f:.2}.json"));
        write_atomic(&path, corpus::manifest_to_string(subset).as_bytes())?;
        let _ = writeln!(stdout, "{f:.2}\t{}\t{}", subset.len(), path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct BreakEvenOutput {
    label: String,
    target: f64,
    fraction: Option<f64>,
}

fn break_even(a: BreakEvenArgs, stdout: &mut dyn Write) -> Outcome {
    check_unit("--target", a.target)?;
    require_file(&a.curve)?;
    let text = fs::read_to_string(&a.curve)
        .map_err(|e| Failure::runtime(format!("reading {}: {e}", a.curve.display())))?;
    let curve: FractionCurve = serde_json::from_str(&text)
        .map_err(|e| Failure::invalid(format!("{}: {e}", a.curve.display())))?;
    curve.check().map_err(Failure::invalid)?;
    if curve.is_empty() {
        return Err(Failure::invalid("fraction curve is empty"));
    }
    if let Some(svg) = &a.svg {
        write_atomic(svg, render_svg(&PlotSeries::from(&curve)).as_bytes())?;
    }
    let out = BreakEvenOutput {
        fraction: harness::break_even(&curve, a.target),
        label: curve.label,
        target: a.target,
    };
    emit(None, &to_json(&out), stdout)
}

fn bench(a: BenchArgs, stdout: &mut dyn Write) -> Outcome {
    if a.iters == 0 {
        return Err(Failure::invalid("--iters must be at least 1"));
    }
    let mut inputs = a.inputs.clone();
    if let Some(m) = &a.manifest {
        let ds = load(m)?;
        inputs.extend(ds.records.iter().filter_map(|r| r.frame_path.clone()));
    }
    if inputs.is_empty() {
        inputs.push("-".to_string());
    }
    let mut predictor = ExternalPredictor::spawn(&a.cmd).map_err(Failure::runtime)?;
    let opts = BenchOptions {
        warmup: a.warmup,
        iters: a.iters,
        ..BenchOptions::default()
    };
    let mut stats = harness::bench_fps(&mut predictor, &inputs, opts).map_err(Failure::runtime)?;
    let p50 = stats.latency_percentile(50.0);
    let p95 = stats.latency_percentile(95.0);
    stats.per_iter = None;
    #[derive(Serialize)]
    struct Out {
        #[serde(flatten)]
        stats: harness::BenchStats,
        p50_latency: Option<f64>,
        p95_latency: Option<f64>,
    }
    emit(
        a.out.as_deref(),
        &to_json(&Out {
            stats,
            p50_latency: p50,
            p95_latency: p95,
        }),
        stdout,
    )
}

fn parse_dims(s: &str) -> Outcome<(usize, usize)> {
    let bad = || Failure::invalid(format!("--dims must look like 64x64, got {s:?}"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

fn synth(a: SynthArgs, stdout: &mut dyn Write) -> Outcome {
    let (w, h) = parse_dims(&a.dims)?;
    let min_sep = a.min_sep.unwrap_or(8.0 * a.sigma);
    let scene = harness::synth_scene(a.n, w, h, a.sigma, min_sep, a.seed).map_err(Failure::invalid)?;
    fs::create_dir_all(&a.out)
        .map_err(|e| Failure::runtime(format!("creating {}: {e}", a.out.display())))?;
    write_atomic(&a.out.join("map.cam"), scene.map.to_text().as_bytes())?;
    let record = ImageRecord {
        id: format!("synth-{}", a.seed),
        width: w as u32,
        height: h as u32,
        boxes: Some(scene.boxes),
        points: Some(scene.points),
        count: Some(CountLabel(a.n as u32)),
        frame_path: Some("map.cam".to_string()),
    };
    let ds = Dataset::with_max_count("synth", vec![record], u32::MAX).map_err(Failure::invalid)?;
    write_atomic(&a.out.join("manifest.json"), corpus::manifest_to_string(&ds).as_bytes())?;
    let _ = writeln!(stdout, "wrote {} people to {}", a.n, a.out.display());
    Ok(())
}

fn report_cmd(a: ReportArgs, stdout: &mut dyn Write) -> Outcome {
    require_file(&a.input)?;
    let text = fs::read_to_string(&a.input)
        .map_err(|e| Failure::runtime(format!("reading {}: {e}", a.input.display())))?;
    let rows = report::parse_rows(&text).map_err(|e| Failure::invalid(format!("{}: {e}", a.input.display())))?;
    emit(a.out.as_deref(), &report::render(&rows, a.format.into()), stdout)
}

/// Threshold curve read back from JSON, for callers that post-process
/// `tune-threshold` output.
pub fn read_threshold_curve(path: &Path) -> Result<ThresholdCurve, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}
