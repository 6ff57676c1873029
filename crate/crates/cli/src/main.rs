use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gazepool_core::eval::{
    fixation_count_curve, noise_sweep, run_condition, sigma_sweep, synth_dataset, table1, Condition,
    Suite, SynthSpec, Trial,
};
use gazepool_core::io::heatmap::{export_heatmap, Palette};
use gazepool_core::io::manifest::{load_suite, store_suite};
use gazepool_core::io::report::{
    prediction_json, render_curve, render_noise, render_prediction, render_reports, OutputFormat,
};
use gazepool_core::{
    acam, gaze_weighted_feature_map, run_collage, DensityMode, EncodingConfig, Error,
    FixationPooling, IntegrationConfig, TaskKind, Violation,
};

const THREADS_ENV: &str = "GAZEPOOL_THREADS";

#[derive(Parser)]
#[command(name = "gazepool", version, about = "Predict search targets from fixations with gaze-weighted pooling")]
struct Cli {
    /// Manifest describing collages, feature maps, heads and trials.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Seed for every random choice (noise, synthetic data).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file for reports, or output directory for `synth` and `acam`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format: text, json or csv.
    #[arg(long, global = true, default_value = "text")]
    format: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predict the search target of one trial.
    Predict(PredictArgs),
    /// Evaluate Top-N accuracy over all trials.
    Evaluate(EvaluateArgs),
    /// Evaluate each fixation width in a list.
    SweepSigma(SweepSigmaArgs),
    /// Evaluate local and global density under increasing gaze noise.
    SweepNoise(SweepNoiseArgs),
    /// Write density and attended class activation heatmaps for one trial.
    Acam(AcamArgs),
    /// Generate a synthetic suite and write it as a manifest tree.
    Synth(SynthArgs),
    /// Accuracy when only the first m fixations of each trial are used.
    FixationCurve(CurveArgs),
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// Density mode: local (fixation density) or global (uniform).
    #[arg(long, default_value = "local")]
    mode: DensityMode,
    /// Weight images by fixation duration instead of equally.
    #[arg(long)]
    duration_weighting: bool,
    /// Per-fixation Gaussian width in grid cells.
    #[arg(long, default_value_t = EncodingConfig::DEFAULT_SIGMA_FIX)]
    sigma_fix: f64,
    /// How overlapping fixations combine: avg or max.
    #[arg(long, default_value = "avg")]
    fixation_pooling: FixationPooling,
    /// Task kind; inferred from the trials when omitted.
    #[arg(long)]
    task_kind: Option<TaskKind>,
}

impl PipelineArgs {
    fn encoding(&self) -> Result<EncodingConfig, Error> {
        Ok(EncodingConfig::new(self.sigma_fix)?.with_pooling(self.fixation_pooling))
    }

    fn integration(&self) -> IntegrationConfig {
        IntegrationConfig::new(self.mode, self.duration_weighting)
    }

    fn condition(&self, top_n: &[usize]) -> Result<Condition, Error> {
        let mut cond = Condition::new(self.encoding()?, self.integration());
        cond.top_n = top_n.to_vec();
        Ok(cond)
    }
}

#[derive(Args)]
struct TrialArgs {
    #[arg(long)]
    collage: String,
    #[arg(long)]
    participant: String,
    /// Target label of the trial.
    #[arg(long)]
    task: String,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    trial: TrialArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Gaussian gaze noise in screen pixels, seeded by --seed.
    #[arg(long)]
    noise_px: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    topn: Vec<usize>,
    /// Run a predefined grid instead of one condition; `table1` runs the four
    /// global/local by duration conditions.
    #[arg(long)]
    grid: Option<Grid>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Grid {
    Table1,
}

#[derive(Args)]
struct SweepSigmaArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, value_delimiter = ',', default_value = "1.0,1.2,1.4,1.6,1.8,2.0")]
    sigmas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    topn: Vec<usize>,
}

#[derive(Args)]
struct SweepNoiseArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,60,120,200")]
    levels: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    replications: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    topn: Vec<usize>,
}

#[derive(Args)]
struct AcamArgs {
    #[command(flatten)]
    trial: TrialArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Number of top-ranked classes to map per image.
    #[arg(long, default_value_t = 1)]
    top: usize,
    /// Heatmap palette: gray or heat.
    #[arg(long, default_value = "heat")]
    palette: Palette,
    /// Image file extension: png, pgm or ppm.
    #[arg(long, default_value = "png")]
    image_format: String,
    /// Pixels per grid cell in the written heatmaps.
    #[arg(long, default_value_t = 16)]
    cell_px: u32,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    classes: usize,
    /// Collages per class.
    #[arg(long, default_value_t = 10)]
    collages: usize,
    #[arg(long, default_value_t = 20)]
    images_per_collage: usize,
    #[arg(long, default_value_t = 14)]
    participants: usize,
    #[arg(long, default_value = "category")]
    task_kind: TaskKind,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 12)]
    max_fixations: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    topn: Vec<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: usage: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match configure_threads().and_then(|()| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.code(), single_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Violation::Parameter(format!("{THREADS_ENV}={raw:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Violation::Parameter(format!("thread pool: {e}")).into())
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Synth(args) => synth(cli, args),
        Command::Predict(args) => predict(cli, args),
        Command::Evaluate(args) => evaluate(cli, args),
        Command::SweepSigma(args) => {
            let suite = load(cli)?;
            let (kind, trials) = select(&suite, args.pipeline.task_kind)?;
            let ctx = suite.context(kind)?;
            let reports = sigma_sweep(&ctx, &trials, &args.pipeline.condition(&args.topn)?, &args.sigmas)?;
            emit(cli, &render_reports(&reports, cli.format))
        }
        Command::SweepNoise(args) => {
            let suite = load(cli)?;
            let (kind, trials) = select(&suite, args.pipeline.task_kind)?;
            let ctx = suite.context(kind)?;
            let dw = args.pipeline.duration_weighting;
            let conditions = [
                IntegrationConfig::new(DensityMode::Local, dw),
                IntegrationConfig::new(DensityMode::Global, dw),
            ];
            let points = noise_sweep(
                &ctx,
                &trials,
                &args.pipeline.condition(&args.topn)?,
                &conditions,
                &args.levels,
                args.replications,
                cli.seed,
            )?;
            emit(cli, &render_noise(&points, cli.format))
        }
        Command::FixationCurve(args) => {
            let suite = load(cli)?;
            let (kind, trials) = select(&suite, args.pipeline.task_kind)?;
            let ctx = suite.context(kind)?;
            let curve = fixation_count_curve(&ctx, &trials, &args.pipeline.condition(&args.topn)?, args.max_fixations)?;
            emit(cli, &render_curve(&curve, cli.format))
        }
        Command::Acam(args) => write_acams(cli, args),
    }
}

fn load(cli: &Cli) -> Result<Suite, Error> {
    let path = cli
        .manifest
        .as_deref()
        .ok_or_else(|| Violation::Parameter("--manifest is required for this command".into()))?;
    load_suite(path)
}

/// Trials of the requested kind, or of the only kind present.
fn select(suite: &Suite, kind: Option<TaskKind>) -> Result<(TaskKind, Vec<Trial>), Error> {
    let kind = match kind {
        Some(k) => k,
        None => match suite.trials.first() {
            Some(first) if suite.trials.iter().all(|t| t.kind() == first.kind()) => first.kind(),
            Some(_) => {
                return Err(Violation::Parameter(
                    "manifest mixes category and attribute trials; pass --task-kind".into(),
                )
                .into())
            }
            None => return Err(Error::Empty("trials")),
        },
    };
    Ok((kind, suite.trials_of(kind)))
}

fn emit(cli: &Cli, text: &str) -> Result<(), Error> {
    match &cli.out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn find_trial<'a>(suite: &'a Suite, t: &TrialArgs, kind: Option<TaskKind>) -> Result<&'a Trial, Error> {
    suite
        .trials
        .iter()
        .find(|tr| {
            tr.participant_id() == t.participant
                && tr.collage_id() == t.collage
                && tr.target() == t.task
                && kind.is_none_or(|k| tr.kind() == k)
        })
        .ok_or_else(|| {
            Violation::Parameter(format!(
                "no trial for participant {:?} on collage {:?} with task {:?}",
                t.participant, t.collage, t.task
            ))
            .into()
        })
}

fn predict(cli: &Cli, args: &PredictArgs) -> Result<(), Error> {
    let suite = load(cli)?;
    let trial = find_trial(&suite, &args.trial, args.pipeline.task_kind)?;
    let ctx = suite.context(trial.kind())?;
    let layout = &suite.layouts[trial.collage_id()];
    let outcome = run_collage(
        trial.log(),
        layout,
        &suite.features,
        ctx.head,
        &args.pipeline.encoding()?,
        args.pipeline.integration(),
    )?;
    emit(cli, &render_prediction(&outcome.prediction, cli.format))
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<(), Error> {
    let suite = load(cli)?;
    let (kind, trials) = select(&suite, args.pipeline.task_kind)?;
    let ctx = suite.context(kind)?;
    let mut cond = args.pipeline.condition(&args.topn)?;
    if let Some(px) = args.noise_px {
        cond = cond.with_noise(px, cli.seed);
    }
    let reports = match args.grid {
        Some(Grid::Table1) => table1(&ctx, &trials, &cond)?,
        None => vec![run_condition(&ctx, &trials, &cond)?],
    };
    emit(cli, &render_reports(&reports, cli.format))
}

fn synth(cli: &Cli, args: &SynthArgs) -> Result<(), Error> {
    let out = cli
        .out
        .as_deref()
        .ok_or_else(|| Violation::Parameter("synth needs --out DIR".into()))?;
    let spec = SynthSpec {
        classes: args.classes,
        collages_per_class: args.collages,
        images_per_collage: args.images_per_collage,
        participants: args.participants,
        task_kind: args.task_kind,
        seed: cli.seed,
        ..SynthSpec::default()
    };
    let suite = synth_dataset(&spec)?;
    let manifest = store_suite(out, &suite)?;
    println!(
        "wrote {} collages, {} images and {} trials to {}",
        suite.layouts.len(),
        suite.features.len(),
        suite.trials.len(),
        manifest.display()
    );
    Ok(())
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn write_acams(cli: &Cli, args: &AcamArgs) -> Result<(), Error> {
    if !matches!(args.image_format.as_str(), "png" | "pgm" | "ppm") {
        return Err(Violation::Parameter(format!("unsupported image format {:?}", args.image_format)).into());
    }
    let suite = load(cli)?;
    let trial = find_trial(&suite, &args.trial, args.pipeline.task_kind)?;
    let ctx = suite.context(trial.kind())?;
    let head = ctx.head;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("acam"));
    fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let outcome = run_collage(
        trial.log(),
        &suite.layouts[trial.collage_id()],
        &suite.features,
        head,
        &args.pipeline.encoding()?,
        args.pipeline.integration(),
    )?;
    let relative = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut images = Vec::new();
    for img in &outcome.images {
        let stem = file_stem(&img.image_id);
        let fdm_path = out.join(format!("{stem}.fdm.{}", args.image_format));
        export_heatmap(&img.density, args.palette, args.cell_px, &fdm_path)?;
        let gwfm = gaze_weighted_feature_map(&suite.features[&img.image_id], &img.density)?;
        let mut maps = Vec::new();
        for &class in outcome.prediction.ranking().iter().take(args.top) {
            let label = &head.labels()[class];
            let map = acam(&gwfm, head, label)?;
            let path = out.join(format!("{stem}.acam.{}.{}", file_stem(label), args.image_format));
            export_heatmap(&map, args.palette, args.cell_px, &path)?;
            maps.push(serde_json::json!({
                "label": label,
                "file": relative(&path),
                "logit": map.logit(),
                "bias": map.bias(),
                "mean": map.mean(),
            }));
        }
        images.push(serde_json::json!({
            "image_id": img.image_id,
            "weight": img.weight,
            "fixation_count": img.fixation_count,
            "duration_ms": img.duration_ms,
            "fdm_file": relative(&fdm_path),
            "acam": maps,
        }));
    }
    let sidecar = serde_json::json!({
        "participant": trial.participant_id(),
        "collage": trial.collage_id(),
        "task": trial.log().task().to_string(),
        "discarded_fixations": outcome.discarded_fixations,
        "prediction": prediction_json(&outcome.prediction),
        "images": images,
    });
    let path = out.join("prediction.json");
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n";
    fs::write(&path, text).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    println!("wrote {} image heatmap sets and {}", outcome.images.len(), path.display());
    Ok(())
}
