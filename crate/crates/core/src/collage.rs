//! Collage-level prediction: per-image gaze pooling followed by a
//! (optionally duration-weighted) average of the per-image posteriors.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::encoding::{assign_fixations, build_fdm, uniform_fdm, EncodingConfig};
use crate::error::{Error, Result, Violation};
use crate::pooling::predict_image;
use crate::types::{
    ClassifierHead, CollageLayout, FeatureMap, FixationDensityMap, FixationLog, GridDims,
    PredictionResult, Scope, TaskKind, POSTERIOR_SUM_TOLERANCE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityMode {
    /// Gaussian fixation density maps at the fixated locations.
    Local,
    /// A uniform map on every fixated image; fixation locations are ignored.
    Global,
}

impl fmt::Display for DensityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DensityMode::Local => "local",
            DensityMode::Global => "global",
        })
    }
}

impl std::str::FromStr for DensityMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "local" => Ok(DensityMode::Local),
            "global" => Ok(DensityMode::Global),
            other => Err(format!("unknown density mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub density_mode: DensityMode,
    pub duration_weighting: bool,
}

impl IntegrationConfig {
    pub const fn new(density_mode: DensityMode, duration_weighting: bool) -> Self {
        Self {
            density_mode,
            duration_weighting,
        }
    }

    /// The four ablation conditions: Global, Local, Global+duration, Local+duration.
    pub const TABLE1: [IntegrationConfig; 4] = [
        IntegrationConfig::new(DensityMode::Global, false),
        IntegrationConfig::new(DensityMode::Local, false),
        IntegrationConfig::new(DensityMode::Global, true),
        IntegrationConfig::new(DensityMode::Local, true),
    ];
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self::new(DensityMode::Local, true)
    }
}

impl fmt::Display for IntegrationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match self.density_mode {
            DensityMode::Local => "Local",
            DensityMode::Global => "Global",
        };
        if self.duration_weighting {
            write!(f, "{mode}+duration")
        } else {
            f.write_str(mode)
        }
    }
}

/// Posterior of one fixated image together with its integration inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEvidence {
    image_id: String,
    posterior: Vec<f64>,
    duration_ms: f64,
    fixation_count: usize,
}

impl ImageEvidence {
    /// Evidence from a class distribution; it must sum to one.
    pub fn new(
        image_id: impl Into<String>,
        posterior: Vec<f64>,
        duration_ms: f64,
        fixation_count: usize,
    ) -> Result<Self, Violation> {
        if posterior.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Violation::Parameter("posterior entries must lie in [0, 1]".into()));
        }
        let sum: f64 = posterior.iter().sum();
        if (sum - 1.0).abs() > POSTERIOR_SUM_TOLERANCE {
            return Err(Violation::Parameter(format!("posterior sums to {sum}")));
        }
        Self::from_parts(image_id.into(), posterior, duration_ms, fixation_count)
    }

    /// Evidence from a single-image prediction of any head kind.
    pub fn from_prediction(
        prediction: &PredictionResult,
        image_id: impl Into<String>,
        duration_ms: f64,
        fixation_count: usize,
    ) -> Result<Self, Violation> {
        Self::from_parts(
            image_id.into(),
            prediction.posteriors().to_vec(),
            duration_ms,
            fixation_count,
        )
    }

    fn from_parts(
        image_id: String,
        posterior: Vec<f64>,
        duration_ms: f64,
        fixation_count: usize,
    ) -> Result<Self, Violation> {
        if !(duration_ms.is_finite() && duration_ms >= 0.0) {
            return Err(Violation::Parameter(format!(
                "duration {duration_ms} of image {image_id:?} must be non-negative"
            )));
        }
        Ok(Self {
            image_id,
            posterior,
            duration_ms,
            fixation_count,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn posterior(&self) -> &[f64] {
        &self.posterior
    }

    pub fn duration_ms(&self) -> f64 {
        self.duration_ms
    }

    pub fn fixation_count(&self) -> usize {
        self.fixation_count
    }
}

/// Result of averaging image posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrated {
    pub posterior: Vec<f64>,
    /// `(image_id, weight)` in evidence order; weights sum to one.
    pub weights: Vec<(String, f64)>,
}

/// Weighted average of the evidence posteriors, weights `d_i / sum_j d_j` or `1/n`.
pub fn integrate(evidence: &[ImageEvidence], config: IntegrationConfig) -> Result<Integrated> {
    let first = evidence.first().ok_or(Error::NoFixatedImages)?;
    let k = first.posterior.len();
    if let Some(bad) = evidence.iter().find(|e| e.posterior.len() != k) {
        return Err(Error::ShapeMismatch(format!(
            "posterior of image {:?} has {} classes, expected {k}",
            bad.image_id,
            bad.posterior.len()
        )));
    }
    let weights: Vec<f64> = if config.duration_weighting {
        let total: f64 = evidence.iter().map(|e| e.duration_ms).sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::ZeroDurations);
        }
        evidence.iter().map(|e| e.duration_ms / total).collect()
    } else {
        let w = 1.0 / evidence.len() as f64;
        vec![w; evidence.len()]
    };
    let mut posterior = vec![0.0f64; k];
    for (e, &w) in evidence.iter().zip(&weights) {
        for (acc, &p) in posterior.iter_mut().zip(&e.posterior) {
            *acc += w * p;
        }
    }
    Ok(Integrated {
        posterior,
        weights: evidence
            .iter()
            .zip(weights)
            .map(|(e, w)| (e.image_id.clone(), w))
            .collect(),
    })
}

/// Lookup of feature maps by image id.
pub trait FeatureStore {
    fn feature_map(&self, image_id: &str) -> Option<&FeatureMap>;
}

impl FeatureStore for HashMap<String, FeatureMap> {
    fn feature_map(&self, image_id: &str) -> Option<&FeatureMap> {
        self.get(image_id)
    }
}

impl FeatureStore for BTreeMap<String, FeatureMap> {
    fn feature_map(&self, image_id: &str) -> Option<&FeatureMap> {
        self.get(image_id)
    }
}

/// Per-image intermediate results of a collage prediction.
#[derive(Debug, Clone)]
pub struct ImageDiagnostic {
    pub image_id: String,
    pub fixation_count: usize,
    pub duration_ms: f64,
    pub weight: f64,
    pub density: FixationDensityMap,
    pub prediction: PredictionResult,
}

#[derive(Debug, Clone)]
pub struct CollageOutcome {
    pub prediction: PredictionResult,
    pub discarded_fixations: usize,
    /// Fixated images in layout order.
    pub images: Vec<ImageDiagnostic>,
}

/// Full pipeline for one fixation log on one collage.
pub fn run_collage<S: FeatureStore + ?Sized>(
    log: &FixationLog,
    layout: &CollageLayout,
    features: &S,
    head: &ClassifierHead,
    encoding: &EncodingConfig,
    config: IntegrationConfig,
) -> Result<CollageOutcome> {
    let grid = collage_grid(layout, features)?;
    let assignment = assign_fixations(log, layout, grid)?;
    if assignment.images.is_empty() {
        return Err(Error::NoFixatedImages);
    }
    let mut evidence = Vec::with_capacity(assignment.images.len());
    let mut images = Vec::with_capacity(assignment.images.len());
    for fixated in &assignment.images {
        let fm = features
            .feature_map(&fixated.image_id)
            .ok_or_else(|| Error::MissingFeatureMap(fixated.image_id.clone()))?;
        let density = match config.density_mode {
            DensityMode::Local => build_fdm(&fixated.points, fm.grid(), encoding)?,
            DensityMode::Global => uniform_fdm(fm.grid()),
        };
        let prediction = predict_image(fm, &density, head)?;
        evidence.push(ImageEvidence::from_prediction(
            &prediction,
            fixated.image_id.clone(),
            fixated.total_duration_ms,
            fixated.points.len(),
        )?);
        images.push(ImageDiagnostic {
            image_id: fixated.image_id.clone(),
            fixation_count: fixated.points.len(),
            duration_ms: fixated.total_duration_ms,
            weight: 0.0,
            density,
            prediction,
        });
    }
    let integrated = integrate(&evidence, config)?;
    for (img, (_, w)) in images.iter_mut().zip(&integrated.weights) {
        img.weight = *w;
    }
    Ok(CollageOutcome {
        prediction: collage_prediction(head, integrated),
        discarded_fixations: assignment.discarded.len(),
        images,
    })
}

fn collage_prediction(head: &ClassifierHead, integrated: Integrated) -> PredictionResult {
    PredictionResult::new(
        head.kind(),
        head.shared_labels(),
        integrated.posterior,
        Scope::Collage,
        integrated.weights,
    )
}

/// Wraps an integrated posterior as a collage-scope prediction for `head`'s labels.
pub fn to_prediction(head: &ClassifierHead, integrated: Integrated) -> Result<PredictionResult> {
    if integrated.posterior.len() != head.num_classes() {
        return Err(Error::ShapeMismatch(format!(
            "{} posteriors for {} labels",
            integrated.posterior.len(),
            head.num_classes()
        )));
    }
    if head.kind() == TaskKind::Category {
        let sum: f64 = integrated.posterior.iter().sum();
        if (sum - 1.0).abs() > POSTERIOR_SUM_TOLERANCE {
            return Err(Violation::Parameter(format!("posterior sums to {sum}")).into());
        }
    }
    Ok(collage_prediction(head, integrated))
}

/// The single feature grid shared by every image of the collage.
fn collage_grid<S: FeatureStore + ?Sized>(layout: &CollageLayout, features: &S) -> Result<GridDims> {
    let mut grid = None;
    for e in layout.entries() {
        let Some(fm) = features.feature_map(&e.image_id) else {
            continue;
        };
        match grid {
            None => grid = Some(fm.grid()),
            Some(g) if g != fm.grid() => {
                return Err(Error::ShapeMismatch(format!(
                    "collage {:?} mixes feature grids {g} and {}",
                    layout.collage_id(),
                    fm.grid()
                )))
            }
            Some(_) => {}
        }
    }
    grid.ok_or_else(|| Error::MissingFeatureMap(layout.collage_id().to_owned()))
}
