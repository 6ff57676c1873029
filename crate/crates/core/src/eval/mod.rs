//! Evaluation protocol: Top-N accuracy per participant under a pipeline
//! condition, plus the sweeps built on top of it (sigma, noise, fixation count).

mod synth;

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::collage::{run_collage, DensityMode, FeatureStore, IntegrationConfig};
use crate::encoding::{EncodingConfig, FixationPooling};
use crate::error::{Error, Result, Violation};
use crate::types::{
    ClassifierHead, CollageLayout, FeatureMap, Fixation, FixationLog, PredictionResult, TaskKind,
};

pub use synth::{synth_dataset, GazeModel, SynthSpec};

/// Noise levels in screen pixels for tracker errors of roughly 1.2, 2.5 and 4.2 degrees.
pub const NOISE_LEVELS_PX: [f64; 3] = [60.0, 120.0, 200.0];

/// One search task: a participant's fixation log with its ground-truth target.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    log: FixationLog,
}

impl Trial {
    pub fn new(log: FixationLog) -> Self {
        Self { log }
    }

    pub fn log(&self) -> &FixationLog {
        &self.log
    }

    pub fn participant_id(&self) -> &str {
        self.log.participant_id()
    }

    pub fn collage_id(&self) -> &str {
        self.log.collage_id()
    }

    pub fn target(&self) -> &str {
        &self.log.task().label
    }

    pub fn kind(&self) -> TaskKind {
        self.log.task().kind
    }

    /// `participant/collage/kind:label`, used in diagnostics.
    pub fn name(&self) -> String {
        format!(
            "{}/{}/{}",
            self.participant_id(),
            self.collage_id(),
            self.log.task()
        )
    }
}

/// Everything needed to run trials: layouts, features, heads and the trials themselves.
#[derive(Debug, Clone, Default)]
pub struct Suite {
    pub layouts: BTreeMap<String, CollageLayout>,
    pub features: HashMap<String, FeatureMap>,
    pub heads: Vec<ClassifierHead>,
    pub trials: Vec<Trial>,
}

impl Suite {
    pub fn head(&self, kind: TaskKind) -> Option<&ClassifierHead> {
        self.heads.iter().find(|h| h.kind() == kind)
    }

    pub fn trials_of(&self, kind: TaskKind) -> Vec<Trial> {
        self.trials.iter().filter(|t| t.kind() == kind).cloned().collect()
    }

    /// Evaluation context for the head of `kind`.
    pub fn context(&self, kind: TaskKind) -> Result<EvalContext<'_>> {
        let head = self
            .head(kind)
            .ok_or_else(|| Error::UnknownClass(format!("no {kind} head in suite")))?;
        Ok(EvalContext {
            layouts: &self.layouts,
            features: &self.features,
            head,
        })
    }

    /// Finds the trial of a participant on a collage for a target label.
    pub fn find_trial(&self, participant: &str, collage: &str, task_label: &str) -> Option<&Trial> {
        self.trials.iter().find(|t| {
            t.participant_id() == participant && t.collage_id() == collage && t.target() == task_label
        })
    }
}

#[derive(Clone, Copy)]
pub struct EvalContext<'a> {
    pub layouts: &'a BTreeMap<String, CollageLayout>,
    pub features: &'a (dyn FeatureStore + Sync),
    pub head: &'a ClassifierHead,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseSpec {
    pub sigma_px: f64,
    pub seed: u64,
}

/// A pipeline configuration to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub encoding: EncodingConfig,
    pub integration: IntegrationConfig,
    pub noise: Option<NoiseSpec>,
    /// Keep only the first `m` fixations of every log.
    pub max_fixations: Option<usize>,
    pub top_n: Vec<usize>,
}

impl Condition {
    pub fn new(encoding: EncodingConfig, integration: IntegrationConfig) -> Self {
        Self {
            encoding,
            integration,
            noise: None,
            max_fixations: None,
            top_n: vec![1, 2, 3],
        }
    }

    pub fn with_noise(self, sigma_px: f64, seed: u64) -> Self {
        Self {
            noise: Some(NoiseSpec { sigma_px, seed }),
            ..self
        }
    }

    pub fn with_integration(self, integration: IntegrationConfig) -> Self {
        Self { integration, ..self }
    }

    pub fn descriptor(&self) -> ConditionDescriptor {
        ConditionDescriptor {
            label: self.integration.to_string(),
            density_mode: self.integration.density_mode,
            duration_weighting: self.integration.duration_weighting,
            sigma_fix: self.encoding.sigma_fix(),
            fixation_pooling: self.encoding.pooling(),
            noise_px: self.noise.map_or(0.0, |n| n.sigma_px),
            max_fixations: self.max_fixations,
        }
    }
}

impl Default for Condition {
    fn default() -> Self {
        Self::new(EncodingConfig::default(), IntegrationConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionDescriptor {
    pub label: String,
    pub density_mode: DensityMode,
    pub duration_weighting: bool,
    pub sigma_fix: f64,
    pub fixation_pooling: FixationPooling,
    pub noise_px: f64,
    pub max_fixations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyStat {
    pub n: usize,
    /// Mean over participants.
    pub mean: f64,
    /// Population standard deviation over participants.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantAccuracy {
    pub participant_id: String,
    pub trials: usize,
    /// One entry per requested N.
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub condition: ConditionDescriptor,
    pub task_kind: TaskKind,
    pub accuracy: Vec<AccuracyStat>,
    pub per_participant: Vec<ParticipantAccuracy>,
    pub trial_count: usize,
    /// Trials where no fixation landed on any image; they count as misses.
    pub unpredicted_trials: usize,
}

impl EvalReport {
    pub fn accuracy_at(&self, n: usize) -> Option<f64> {
        self.accuracy.iter().find(|a| a.n == n).map(|a| a.mean)
    }

    pub fn top1(&self) -> f64 {
        self.accuracy_at(1).unwrap_or(f64::NAN)
    }
}

/// Fraction of results whose truth is among the first `n` ranked classes.
pub fn topn_accuracy(results: &[(PredictionResult, usize)], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Violation::Parameter("top-N requires N >= 1".into()).into());
    }
    if results.is_empty() {
        return Err(Error::Empty("prediction results"));
    }
    let hits = results.iter().filter(|(p, truth)| p.in_top(*truth, n)).count();
    Ok(hits as f64 / results.len() as f64)
}

/// Adds independent Gaussian noise of `sigma_px` to each coordinate, clamped to the screen.
pub fn inject_noise(
    log: &FixationLog,
    layout: &CollageLayout,
    sigma_px: f64,
    seed: u64,
) -> Result<FixationLog> {
    if !(sigma_px.is_finite() && sigma_px >= 0.0) {
        return Err(Violation::Parameter(format!("noise sigma {sigma_px} must be non-negative")).into());
    }
    if sigma_px == 0.0 {
        return Ok(log.clone());
    }
    let normal = Normal::new(0.0, sigma_px)
        .map_err(|e| Violation::Parameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (layout.screen_width_px(), layout.screen_height_px());
    let noisy: Vec<Fixation> = log
        .fixations()
        .iter()
        .map(|f| Fixation {
            x: (f.x + normal.sample(&mut rng)).clamp(0.0, w),
            y: (f.y + normal.sample(&mut rng)).clamp(0.0, h),
            ..*f
        })
        .collect();
    Ok(log.with_fixations(noisy)?)
}

/// Seed for an independent stream, derived from a base seed and a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct TrialOutcome {
    truth: usize,
    prediction: Option<PredictionResult>,
}

fn evaluate_trial(
    ctx: &EvalContext<'_>,
    trial: &Trial,
    index: usize,
    condition: &Condition,
) -> Result<TrialOutcome> {
    let wrap = |e: Error| Error::Trial {
        trial: trial.name(),
        source: Box::new(e),
    };
    if trial.kind() != ctx.head.kind() {
        return Err(wrap(Error::ShapeMismatch(format!(
            "{} trial evaluated with a {} head",
            trial.kind(),
            ctx.head.kind()
        ))));
    }
    let truth = ctx
        .head
        .label_index(trial.target())
        .ok_or_else(|| wrap(Error::UnknownClass(trial.target().to_owned())))?;
    let layout = ctx
        .layouts
        .get(trial.collage_id())
        .ok_or_else(|| wrap(Error::UnknownCollage(trial.collage_id().to_owned())))?;
    let mut log = match condition.max_fixations {
        Some(m) => trial.log().truncated(m),
        None => trial.log().clone(),
    };
    if let Some(noise) = condition.noise {
        log = inject_noise(&log, layout, noise.sigma_px, derive_seed(noise.seed, index as u64))
            .map_err(wrap)?;
    }
    match run_collage(
        &log,
        layout,
        ctx.features,
        ctx.head,
        &condition.encoding,
        condition.integration,
    ) {
        Ok(outcome) => Ok(TrialOutcome {
            truth,
            prediction: Some(outcome.prediction),
        }),
        Err(Error::NoFixatedImages) => Ok(TrialOutcome {
            truth,
            prediction: None,
        }),
        Err(e) => Err(wrap(e)),
    }
}

/// Evaluates every trial under `condition` and aggregates Top-N accuracy per participant.
pub fn run_condition(
    ctx: &EvalContext<'_>,
    trials: &[Trial],
    condition: &Condition,
) -> Result<EvalReport> {
    if trials.is_empty() {
        return Err(Error::Empty("trials"));
    }
    if condition.top_n.is_empty() || condition.top_n.contains(&0) {
        return Err(Violation::Parameter("top-N levels must be >= 1".into()).into());
    }
    let outcomes: Vec<TrialOutcome> = trials
        .par_iter()
        .enumerate()
        .map(|(i, t)| evaluate_trial(ctx, t, i, condition))
        .collect::<Result<_>>()?;

    let mut by_participant: BTreeMap<&str, (usize, Vec<usize>)> = BTreeMap::new();
    let mut unpredicted = 0;
    for (trial, outcome) in trials.iter().zip(&outcomes) {
        let entry = by_participant
            .entry(trial.participant_id())
            .or_insert_with(|| (0, vec![0; condition.top_n.len()]));
        entry.0 += 1;
        match &outcome.prediction {
            Some(p) => {
                for (hits, &n) in entry.1.iter_mut().zip(&condition.top_n) {
                    if p.in_top(outcome.truth, n) {
                        *hits += 1;
                    }
                }
            }
            None => unpredicted += 1,
        }
    }
    let per_participant: Vec<ParticipantAccuracy> = by_participant
        .into_iter()
        .map(|(id, (count, hits))| ParticipantAccuracy {
            participant_id: id.to_owned(),
            trials: count,
            accuracy: hits.iter().map(|&h| h as f64 / count as f64).collect(),
        })
        .collect();
    let accuracy = condition
        .top_n
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let values: Vec<f64> = per_participant.iter().map(|p| p.accuracy[i]).collect();
            let (mean, std) = mean_and_population_std(&values);
            AccuracyStat { n, mean, std }
        })
        .collect();
    Ok(EvalReport {
        condition: condition.descriptor(),
        task_kind: ctx.head.kind(),
        accuracy,
        per_participant,
        trial_count: trials.len(),
        unpredicted_trials: unpredicted,
    })
}

pub(crate) fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// The four integration conditions in ablation-table row order.
pub fn table1(ctx: &EvalContext<'_>, trials: &[Trial], base: &Condition) -> Result<Vec<EvalReport>> {
    IntegrationConfig::TABLE1
        .iter()
        .map(|&cfg| run_condition(ctx, trials, &base.clone().with_integration(cfg)))
        .collect()
}

/// One report per `sigma_fix`, each with a truncation radius of three widths.
pub fn sigma_sweep(
    ctx: &EvalContext<'_>,
    trials: &[Trial],
    base: &Condition,
    sigmas: &[f64],
) -> Result<Vec<EvalReport>> {
    if sigmas.is_empty() {
        return Err(Error::Empty("sigma values"));
    }
    sigmas
        .iter()
        .map(|&sigma| {
            let encoding =
                EncodingConfig::with_truncation(sigma, 3.0 * sigma, base.encoding.pooling())?;
            run_condition(ctx, trials, &Condition { encoding, ..base.clone() })
        })
        .collect()
}

/// Accuracy at one noise level, averaged over seeded replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisePoint {
    pub condition: String,
    pub noise_px: f64,
    pub replications: usize,
    pub top_n: Vec<usize>,
    /// Mean over replications of the across-participant mean accuracy.
    pub mean: Vec<f64>,
    /// Population standard deviation over replications.
    pub std: Vec<f64>,
}

impl NoisePoint {
    pub fn top1(&self) -> f64 {
        self.top_n
            .iter()
            .position(|&n| n == 1)
            .map_or(f64::NAN, |i| self.mean[i])
    }
}

/// Accuracy over noise levels for each integration condition.
pub fn noise_sweep(
    ctx: &EvalContext<'_>,
    trials: &[Trial],
    base: &Condition,
    conditions: &[IntegrationConfig],
    levels: &[f64],
    replications: usize,
    seed: u64,
) -> Result<Vec<NoisePoint>> {
    if replications == 0 {
        return Err(Violation::Parameter("replications must be >= 1".into()).into());
    }
    if levels.is_empty() || conditions.is_empty() {
        return Err(Error::Empty("noise levels"));
    }
    let mut points = Vec::with_capacity(levels.len() * conditions.len());
    for &integration in conditions {
        for &level in levels {
            let mut per_n: Vec<Vec<f64>> = vec![Vec::with_capacity(replications); base.top_n.len()];
            for r in 0..replications {
                let cond = base
                    .clone()
                    .with_integration(integration)
                    .with_noise(level, derive_seed(seed, r as u64));
                let report = run_condition(ctx, trials, &cond)?;
                for (acc, stat) in per_n.iter_mut().zip(&report.accuracy) {
                    acc.push(stat.mean);
                }
            }
            let (mean, std) = per_n.iter().map(|v| mean_and_population_std(v)).unzip();
            points.push(NoisePoint {
                condition: integration.to_string(),
                noise_px: level,
                replications,
                top_n: base.top_n.clone(),
                mean,
                std,
            });
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub fixations: usize,
    pub report: EvalReport,
}

/// Accuracy when every log is cut to its first `m` fixations, for `m = 1..=max_fixations`.
pub fn fixation_count_curve(
    ctx: &EvalContext<'_>,
    trials: &[Trial],
    base: &Condition,
    max_fixations: usize,
) -> Result<Vec<CurvePoint>> {
    if max_fixations == 0 {
        return Err(Violation::Parameter("max_fixations must be >= 1".into()).into());
    }
    (1..=max_fixations)
        .map(|m| {
            let cond = Condition {
                max_fixations: Some(m),
                ..base.clone()
            };
            Ok(CurvePoint {
                fixations: m,
                report: run_condition(ctx, trials, &cond)?,
            })
        })
        .collect()
}
