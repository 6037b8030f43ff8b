//! facedyn: posed vs. spontaneous smile classification pipeline.
//!
//! Subcommands mirror the pipeline stages (track, normalize, magnify,
//! extract, temporal, train, evaluate) plus the end-to-end `pipeline`
//! driver with content-addressed caching, and dataset utilities
//! (`make-folds`, `synth`).

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use facedyn::{
    farneback_flow, fit, generate_benchmark_dataset, hog_descriptor, load_config, load_model,
    load_sequence, lpq_descriptor, magnify_sequence, make_folds, normalize_length,
    normalize_sequence, parse_manifest, read_feature_matrix, run_pipeline, save_model,
    save_sequence, svm_predict, track_sequence, write_feature_matrix, write_manifest,
    write_report_csv, BoundingBox, ConfusionMatrix, DescriptorKind, FeatureMatrix, MagnifyParams,
    Manifest, NormalizationMode, PipelineConfig, RegionLayout, ReportGrid, TrackResult,
    TrainConfig,
};

#[derive(Parser)]
#[command(name = "facedyn", version, about = "Posed vs. spontaneous smile classification")]
struct Cli {
    /// Worker threads for video-level parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on a manifest and emit a cross-validation report.
    Pipeline(PipelineArgs),
    /// Track the face through a video and dump per-frame geometry as JSON.
    Track(TrackArgs),
    /// Geometrically normalize a tracked video into an image directory.
    Normalize(NormalizeArgs),
    /// Eulerian video magnification of an image directory.
    Magnify(MagnifyArgs),
    /// Extract per-frame descriptors from a normalized sequence into an FDM1 file.
    Extract(ExtractArgs),
    /// DCT length normalization of a feature matrix; writes the flattened 1xN vector.
    Temporal(TemporalArgs),
    /// Train a linear SVM from per-video feature files.
    Train(TrainArgs),
    /// Evaluate a trained model on a fold of the manifest.
    Evaluate(EvaluateArgs),
    /// Assign seeded stratified 10-fold CV folds to a manifest.
    MakeFolds(MakeFoldsArgs),
    /// Generate the synthetic two-class smile benchmark.
    Synth(SynthArgs),
}

fn parse_box(s: &str) -> Result<BoundingBox, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if parts.len() != 4 {
        return Err(format!("expected x,y,w,h, got '{s}'"));
    }
    BoundingBox::new(parts[0], parts[1], parts[2], parts[3]).map_err(|e| e.to_string())
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if parts.len() != 2 {
        return Err(format!("expected x,y, got '{s}'"));
    }
    Ok((parts[0], parts[1]))
}

fn parse_descriptor(s: &str) -> Result<DescriptorKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown descriptor '{s}' (lpq|hog|flow|external)"))
}

fn parse_mode(s: &str) -> Result<NormalizationMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
        format!("unknown mode '{s}' (eye_location|face_orientation|no_normalization)")
    })
}

#[derive(Args)]
struct PipelineArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Pipeline configuration (JSON); flags below override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_descriptor)]
    descriptor: Option<DescriptorKind>,
    #[arg(long, value_parser = parse_mode)]
    normalization: Option<NormalizationMode>,
    /// Enable Eulerian video magnification before descriptor extraction.
    #[arg(long)]
    use_evm: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    f_lo: Option<f64>,
    #[arg(long)]
    f_hi: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    lambda_c: Option<f64>,
    /// HOG cell size in pixels.
    #[arg(long)]
    cell: Option<usize>,
    /// DCT coefficients kept per descriptor dimension.
    #[arg(long)]
    target_len: Option<usize>,
    /// SVM hinge-loss weight C.
    #[arg(long)]
    c: Option<f64>,
    /// Uniform scale applied to the canonical layout.
    #[arg(long)]
    layout_scale: Option<f64>,
    /// Cache directory (FACEDYN_CACHE overrides the config file; this flag overrides both).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Cross-validation report as CSV.
    #[arg(long, default_value = "report.csv")]
    report_csv: PathBuf,
    /// Optional markdown report table (descriptor rows, normalization columns).
    #[arg(long)]
    report_md: Option<PathBuf>,
}

fn cmd_pipeline(args: PipelineArgs) -> anyhow::Result<()> {
    let mut config = match &args.config {
        Some(p) => load_config(p).with_context(|| format!("reading config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Ok(dir) = std::env::var("FACEDYN_CACHE") {
        config.cache_dir = Some(PathBuf::from(dir));
    }
    if let Some(v) = args.descriptor {
        config.descriptor = v;
    }
    if let Some(v) = args.normalization {
        config.normalization = v;
    }
    if args.use_evm {
        config.use_evm = true;
    }
    if let Some(v) = args.alpha {
        config.magnify.alpha = v;
    }
    if let Some(v) = args.f_lo {
        config.magnify.f_lo = v;
    }
    if let Some(v) = args.f_hi {
        config.magnify.f_hi = v;
    }
    if let Some(v) = args.levels {
        config.magnify.levels = v;
    }
    if let Some(v) = args.lambda_c {
        config.magnify.lambda_c = v;
    }
    if let Some(v) = args.cell {
        config.hog.cell = v;
    }
    if let Some(v) = args.target_len {
        config.temporal.target_len = v;
    }
    if let Some(v) = args.c {
        config.svm.c = v;
    }
    if let Some(v) = args.layout_scale {
        config.layout_scale = v;
    }
    if let Some(v) = args.cache_dir {
        config.cache_dir = Some(v);
    }

    let report = run_pipeline(&args.manifest, &config)?;
    write_report_csv(&report, &args.report_csv)?;
    if let Some(md_path) = &args.report_md {
        let mut grid = ReportGrid::default();
        let descriptor = serde_json::to_value(config.descriptor)?;
        let mode = serde_json::to_value(config.normalization)?;
        let column = format!(
            "{}{}",
            mode.as_str().unwrap_or("?"),
            if config.use_evm { " + EVM" } else { "" }
        );
        grid.insert(descriptor.as_str().unwrap_or("?"), &column, &report);
        std::fs::write(md_path, grid.render_markdown())
            .with_context(|| format!("writing {}", md_path.display()))?;
    }
    println!(
        "overall accuracy: {:.2}% over {} videos ({} folds)",
        report.overall_accuracy(),
        report.aggregate.total(),
        report.folds.len()
    );
    Ok(())
}

#[derive(Args)]
struct TrackArgs {
    /// Directory of frame_%06d.png/.pgm images.
    #[arg(long)]
    video: PathBuf,
    #[arg(long, default_value_t = 50.0)]
    fps: f64,
    #[arg(long, value_parser = parse_box)]
    face_box: BoundingBox,
    #[arg(long, value_parser = parse_box)]
    left_eye_box: BoundingBox,
    #[arg(long, value_parser = parse_box)]
    right_eye_box: BoundingBox,
    /// Output track JSON.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_track(args: TrackArgs) -> anyhow::Result<()> {
    let video = load_sequence(&args.video, args.fps)?;
    let track = track_sequence(&video, &args.face_box, &args.left_eye_box, &args.right_eye_box)?;
    std::fs::write(&args.out, serde_json::to_string(&track)?)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("tracked {} frames", track.frames.len());
    Ok(())
}

fn load_track(path: &PathBuf) -> anyhow::Result<TrackResult> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Args)]
struct NormalizeArgs {
    #[arg(long)]
    video: PathBuf,
    #[arg(long, default_value_t = 50.0)]
    fps: f64,
    /// Track JSON produced by `track`.
    #[arg(long)]
    track: PathBuf,
    #[arg(long, value_parser = parse_mode, default_value = "eye_location")]
    mode: NormalizationMode,
    #[arg(long, default_value_t = 1.0)]
    layout_scale: f64,
    /// Output image directory.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_normalize(args: NormalizeArgs) -> anyhow::Result<()> {
    let video = load_sequence(&args.video, args.fps)?;
    let track = load_track(&args.track)?;
    let layout = PipelineConfig {
        layout_scale: args.layout_scale,
        ..Default::default()
    }
    .effective_layout();
    let normalized = normalize_sequence(&video, &track, args.mode, &layout)?;
    save_sequence(&normalized, &args.out)?;
    println!(
        "wrote {} frames ({}x{})",
        normalized.len(),
        normalized.width(),
        normalized.height()
    );
    Ok(())
}

#[derive(Args)]
struct MagnifyArgs {
    #[arg(long)]
    video: PathBuf,
    #[arg(long, default_value_t = 50.0)]
    fps: f64,
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.4)]
    f_lo: f64,
    #[arg(long, default_value_t = 3.0)]
    f_hi: f64,
    #[arg(long, default_value_t = 4)]
    levels: usize,
    #[arg(long, default_value_t = 16.0)]
    lambda_c: f64,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_magnify(args: MagnifyArgs) -> anyhow::Result<()> {
    let video = load_sequence(&args.video, args.fps)?;
    let params = MagnifyParams {
        alpha: args.alpha,
        f_lo: args.f_lo,
        f_hi: args.f_hi,
        levels: args.levels,
        lambda_c: args.lambda_c,
    };
    let magnified = magnify_sequence(&video, &params)?;
    save_sequence(&magnified, &args.out)?;
    println!("wrote {} magnified frames", magnified.len());
    Ok(())
}

#[derive(Args)]
struct ExtractArgs {
    /// Normalized image directory.
    #[arg(long)]
    video: PathBuf,
    #[arg(long, default_value_t = 50.0)]
    fps: f64,
    #[arg(long, value_parser = parse_descriptor)]
    descriptor: DescriptorKind,
    /// LPQ window size.
    #[arg(long, default_value_t = 7)]
    window: usize,
    /// HOG cell size.
    #[arg(long, default_value_t = 4)]
    cell: usize,
    /// HOG orientation count.
    #[arg(long, default_value_t = 9)]
    orientations: usize,
    /// Flow only: eye centers and boxes in normalized coordinates.
    #[arg(long, value_parser = parse_point)]
    left_eye: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_point)]
    right_eye: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_box)]
    left_eye_box: Option<BoundingBox>,
    #[arg(long, value_parser = parse_box)]
    right_eye_box: Option<BoundingBox>,
    /// Output FDM1 feature matrix.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_extract(args: ExtractArgs) -> anyhow::Result<()> {
    let video = load_sequence(&args.video, args.fps)?;
    let matrix = match args.descriptor {
        DescriptorKind::Lpq => {
            let params = facedyn::LpqParams {
                window: args.window,
                ..Default::default()
            };
            let rows = video
                .frames()
                .iter()
                .map(|f| lpq_descriptor(f, &params))
                .collect::<facedyn::Result<Vec<_>>>()?;
            FeatureMatrix::from_rows(rows, DescriptorKind::Lpq)?
        }
        DescriptorKind::Hog => {
            let params = facedyn::HogParams {
                cell: args.cell,
                orientations: args.orientations,
            };
            let rows = video
                .frames()
                .iter()
                .map(|f| hog_descriptor(f, &params))
                .collect::<facedyn::Result<Vec<_>>>()?;
            FeatureMatrix::from_rows(rows, DescriptorKind::Hog)?
        }
        DescriptorKind::Flow => {
            let (left, right, lbox, rbox) = match (
                args.left_eye,
                args.right_eye,
                args.left_eye_box,
                args.right_eye_box,
            ) {
                (Some(l), Some(r), Some(lb), Some(rb)) => (l, r, lb, rb),
                _ => bail!(
                    "flow extraction needs --left-eye, --right-eye, --left-eye-box, --right-eye-box"
                ),
            };
            let layout = RegionLayout::from_eye_centers(left, right, lbox, rbox)?;
            let params = facedyn::FlowParams::default();
            let mut rows = Vec::new();
            for t in 0..video.len().saturating_sub(1) {
                let flow = farneback_flow(&video.frames()[t], &video.frames()[t + 1], &params)?;
                rows.push(facedyn::extract_flow_regions(&flow, &layout)?);
            }
            FeatureMatrix::from_rows(rows, DescriptorKind::Flow)?
        }
        DescriptorKind::External => bail!("external features are ingested via the manifest"),
    };
    write_feature_matrix(&matrix, &args.out)?;
    println!("wrote {}x{} feature matrix", matrix.rows(), matrix.cols());
    Ok(())
}

#[derive(Args)]
struct TemporalArgs {
    /// Input FDM1 feature matrix (frames x dims).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_descriptor, default_value = "lpq")]
    descriptor: DescriptorKind,
    /// Cosine coefficients kept per dimension.
    #[arg(long, default_value_t = 100)]
    target_len: usize,
    /// Output FDM1: the flattened 1x(target_len*dims) vector.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_temporal(args: TemporalArgs) -> anyhow::Result<()> {
    let matrix = read_feature_matrix(&args.input, args.descriptor)?;
    let cfg = facedyn::TemporalConfig {
        target_len: args.target_len,
    };
    let fixed = normalize_length(&matrix, &cfg)?;
    let flat = facedyn::flatten(&fixed);
    let row = FeatureMatrix::new(1, flat.len(), flat, args.descriptor)?;
    write_feature_matrix(&row, &args.out)?;
    println!("wrote 1x{} vector", row.cols());
    Ok(())
}

/// Loads `{features_dir}/{video_id}.fdm` flattened per-video vectors.
fn load_vectors(
    manifest: &Manifest,
    features_dir: &PathBuf,
    fold: Option<u32>,
    keep_fold: bool,
) -> anyhow::Result<(Vec<Vec<f64>>, Vec<f64>, Vec<usize>)> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut idx = Vec::new();
    for (i, rec) in manifest.records.iter().enumerate() {
        if let Some(f) = fold {
            if (rec.fold == f) != keep_fold {
                continue;
            }
        }
        let path = features_dir.join(format!("{}.fdm", rec.video_id));
        let m = read_feature_matrix(&path, DescriptorKind::External)
            .with_context(|| format!("features for '{}'", rec.video_id))?;
        x.push(m.data().to_vec());
        y.push(rec.label.to_sign());
        idx.push(i);
    }
    Ok((x, y, idx))
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory of per-video `{video_id}.fdm` flattened feature vectors.
    #[arg(long)]
    features_dir: PathBuf,
    /// Hold this fold out of training.
    #[arg(long)]
    test_fold: Option<u32>,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Output model JSON.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let manifest = parse_manifest(&args.manifest)?;
    let (x, y, _) = load_vectors(&manifest, &args.features_dir, args.test_fold, false)?;
    if x.is_empty() {
        bail!("no training videos after fold exclusion");
    }
    let cfg = TrainConfig {
        c: args.c,
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let model = fit(&x, &y, &cfg)?;
    save_model(&model, &args.out)?;
    println!("trained on {} videos", x.len());
    Ok(())
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    features_dir: PathBuf,
    /// Restrict evaluation to this fold (default: all videos).
    #[arg(long)]
    fold: Option<u32>,
    /// Model JSON produced by `train`.
    #[arg(long)]
    model: PathBuf,
}

fn cmd_evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let manifest = parse_manifest(&args.manifest)?;
    let model = load_model(&args.model)?;
    let (x, _, idx) = load_vectors(&manifest, &args.features_dir, args.fold, true)?;
    if x.is_empty() {
        bail!("no videos selected for evaluation");
    }
    let mut confusion = ConfusionMatrix::default();
    for (v, i) in x.iter().zip(&idx) {
        let (predicted, _) = svm_predict(&model, v)?;
        confusion.record(manifest.records[*i].label, predicted);
    }
    println!("tp,fn,tn,fp,posed_acc,spont_acc,overall_acc");
    println!(
        "{},{},{},{},{:.4},{:.4},{:.4}",
        confusion.tp,
        confusion.fn_,
        confusion.tn,
        confusion.fp,
        confusion.posed_accuracy(),
        confusion.spontaneous_accuracy(),
        confusion.overall_accuracy()
    );
    Ok(())
}

#[derive(Args)]
struct MakeFoldsArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output manifest (default: rewrite in place).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_make_folds(args: MakeFoldsArgs) -> anyhow::Result<()> {
    let mut manifest = parse_manifest(&args.manifest)?;
    make_folds(&mut manifest, args.seed);
    let out = args.out.unwrap_or(args.manifest);
    write_manifest(&manifest, &out)?;
    println!("assigned folds for {} videos", manifest.records.len());
    Ok(())
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset directory (receives video dirs + manifest.json).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 60)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    let manifest = generate_benchmark_dataset(&args.out, args.n, args.seed)?;
    println!(
        "generated {} videos in {}",
        manifest.records.len(),
        args.out.display()
    );
    Ok(())
}

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Pipeline(args) => cmd_pipeline(args),
        Command::Track(args) => cmd_track(args),
        Command::Normalize(args) => cmd_normalize(args),
        Command::Magnify(args) => cmd_magnify(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Temporal(args) => cmd_temporal(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::MakeFolds(args) => cmd_make_folds(args),
        Command::Synth(args) => cmd_synth(args),
    }
}
