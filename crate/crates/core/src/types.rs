//! Shared domain types.
//!
//! Every tensor-like type validates its invariants at construction and is
//! immutable afterwards; buffers sit behind `Arc` so clones are cheap and
//! values can be shared freely across threads. Dense data is stored as `f32`
//! in `(channel, row, col)` order, row-major within a channel, with row 0 at
//! the top of the image. Reductions accumulate in `f64`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Location, Violation};

/// Tolerance on the unit-mean normalization of a [`FixationDensityMap`].
pub const DENSITY_MEAN_TOLERANCE: f64 = 1e-6;

/// Tolerance on posteriors summing to one.
pub const POSTERIOR_SUM_TOLERANCE: f64 = 1e-6;

/// Spatial dimensions of a feature grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub height: usize,
    pub width: usize,
}

impl GridDims {
    /// The 14x14 resolution of a VGG-GAP `conv5-3` layer.
    pub const DEFAULT: GridDims = GridDims::new(14, 14);

    pub const fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub const fn cells(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub const fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    fn check(&self) -> Result<(), Violation> {
        if self.height == 0 {
            return Err(Violation::EmptyDimension("height"));
        }
        if self.width == 0 {
            return Err(Violation::EmptyDimension("width"));
        }
        Ok(())
    }
}

impl Default for GridDims {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl fmt::Display for GridDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// Per-image activation tensor of shape `channels x height x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    image_id: String,
    channels: usize,
    grid: GridDims,
    data: Arc<[f32]>,
}

impl FeatureMap {
    pub fn new(
        image_id: impl Into<String>,
        channels: usize,
        grid: GridDims,
        data: Vec<f32>,
    ) -> Result<Self, Violation> {
        if channels == 0 {
            return Err(Violation::EmptyDimension("channels"));
        }
        grid.check()?;
        let expected = channels * grid.cells();
        if data.len() != expected {
            return Err(Violation::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            let cells = grid.cells();
            return Err(Violation::NonFinite(Location::Feature {
                channel: i / cells,
                row: (i % cells) / grid.width,
                col: i % grid.width,
            }));
        }
        Ok(Self {
            image_id: image_id.into(),
            channels,
            grid,
            data: data.into(),
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn grid(&self) -> GridDims {
        self.grid
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, k: usize) -> &[f32] {
        let cells = self.grid.cells();
        &self.data[k * cells..(k + 1) * cells]
    }

    #[inline]
    pub fn get(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[channel * self.grid.cells() + self.grid.index(row, col)]
    }
}

/// A single gaze fixation in screen pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub x: f64,
    pub y: f64,
    pub duration_ms: f64,
    pub onset_ms: f64,
}

impl Fixation {
    pub fn new(x: f64, y: f64, duration_ms: f64, onset_ms: f64) -> Self {
        Self {
            x,
            y,
            duration_ms,
            onset_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Category,
    Attribute,
}

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Category => "category",
            TaskKind::Attribute => "attribute",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "category" => Ok(TaskKind::Category),
            "attribute" => Ok(TaskKind::Attribute),
            other => Err(format!("unknown task kind {other:?}")),
        }
    }
}

/// The search target a participant was asked to find.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Task {
    pub kind: TaskKind,
    pub label: String,
}

impl Task {
    pub fn new(kind: TaskKind, label: impl Into<String>) -> Self {
        Self {
            kind,
            label: label.into(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.label)
    }
}

/// Fixations of one participant searching one collage for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationLog {
    participant_id: String,
    task: Task,
    collage_id: String,
    fixations: Arc<[Fixation]>,
}

impl FixationLog {
    pub fn new(
        participant_id: impl Into<String>,
        task: Task,
        collage_id: impl Into<String>,
        fixations: Vec<Fixation>,
    ) -> Result<Self, Violation> {
        check_fixations(&fixations)?;
        Ok(Self {
            participant_id: participant_id.into(),
            task,
            collage_id: collage_id.into(),
            fixations: fixations.into(),
        })
    }

    pub fn participant_id(&self) -> &str {
        &self.participant_id
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    pub fn collage_id(&self) -> &str {
        &self.collage_id
    }

    pub fn fixations(&self) -> &[Fixation] {
        &self.fixations
    }

    /// Same log with its fixations replaced.
    pub fn with_fixations(&self, fixations: Vec<Fixation>) -> Result<Self, Violation> {
        check_fixations(&fixations)?;
        Ok(Self {
            fixations: fixations.into(),
            ..self.clone()
        })
    }

    /// The first `count` fixations by onset (all of them if the log is shorter).
    pub fn truncated(&self, count: usize) -> Self {
        let n = count.min(self.fixations.len());
        Self {
            fixations: self.fixations[..n].into(),
            ..self.clone()
        }
    }
}

fn check_fixations(fixations: &[Fixation]) -> Result<(), Violation> {
    for (index, fx) in fixations.iter().enumerate() {
        let at = Location::Fixation { index };
        if !(fx.x.is_finite() && fx.y.is_finite() && fx.onset_ms.is_finite()) {
            return Err(Violation::NonFinite(at));
        }
        if !fx.duration_ms.is_finite() {
            return Err(Violation::NonFinite(at));
        }
        if fx.duration_ms < 0.0 {
            return Err(Violation::NegativeDuration(at));
        }
        if index > 0 && fx.onset_ms < fixations[index - 1].onset_ms {
            return Err(Violation::OutOfOrder(at));
        }
    }
    Ok(())
}

/// Screen-space rectangle; contains points with `x0 <= x < x1` and `y0 <= y < y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoundingBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    fn overlaps(&self, other: &BoundingBox) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub image_id: String,
    pub bbox: BoundingBox,
}

/// Binds screen regions of a collage to image ids.
#[derive(Debug, Clone, PartialEq)]
pub struct CollageLayout {
    collage_id: String,
    screen_width_px: f64,
    screen_height_px: f64,
    entries: Arc<[LayoutEntry]>,
}

impl CollageLayout {
    pub fn new(
        collage_id: impl Into<String>,
        screen_width_px: f64,
        screen_height_px: f64,
        entries: Vec<LayoutEntry>,
    ) -> Result<Self, Violation> {
        if !(screen_width_px.is_finite() && screen_width_px > 0.0) {
            return Err(Violation::EmptyDimension("screen width"));
        }
        if !(screen_height_px.is_finite() && screen_height_px > 0.0) {
            return Err(Violation::EmptyDimension("screen height"));
        }
        for (i, e) in entries.iter().enumerate() {
            let b = &e.bbox;
            let inside = 0.0 <= b.x0
                && b.x0 < b.x1
                && b.x1 <= screen_width_px
                && 0.0 <= b.y0
                && b.y0 < b.y1
                && b.y1 <= screen_height_px;
            if !inside {
                return Err(Violation::BoxOutOfBounds(e.image_id.clone()));
            }
            for other in &entries[..i] {
                if other.image_id == e.image_id {
                    return Err(Violation::DuplicateImage(e.image_id.clone()));
                }
                if other.bbox.overlaps(b) {
                    return Err(Violation::BoxesOverlap(
                        other.image_id.clone(),
                        e.image_id.clone(),
                    ));
                }
            }
        }
        Ok(Self {
            collage_id: collage_id.into(),
            screen_width_px,
            screen_height_px,
            entries: entries.into(),
        })
    }

    pub fn collage_id(&self) -> &str {
        &self.collage_id
    }

    pub fn screen_width_px(&self) -> f64 {
        self.screen_width_px
    }

    pub fn screen_height_px(&self) -> f64 {
        self.screen_height_px
    }

    pub fn entries(&self) -> &[LayoutEntry] {
        &self.entries
    }

    /// Index of the entry whose box contains the point, if any.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        self.entries.iter().position(|e| e.bbox.contains(x, y))
    }
}

/// Non-negative attention weights over a feature grid, normalized to a cell mean of one.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationDensityMap {
    grid: GridDims,
    data: Arc<[f32]>,
}

impl FixationDensityMap {
    pub fn new(grid: GridDims, data: Vec<f32>) -> Result<Self, Violation> {
        grid.check()?;
        if data.len() != grid.cells() {
            return Err(Violation::LengthMismatch {
                expected: grid.cells(),
                actual: data.len(),
            });
        }
        let mut sum = 0.0f64;
        for (i, &v) in data.iter().enumerate() {
            let at = Location::Cell {
                row: i / grid.width,
                col: i % grid.width,
            };
            if !v.is_finite() {
                return Err(Violation::NonFinite(at));
            }
            if v < 0.0 {
                return Err(Violation::Negative(at));
            }
            sum += f64::from(v);
        }
        let mean = sum / grid.cells() as f64;
        if (mean - 1.0).abs() > DENSITY_MEAN_TOLERANCE {
            return Err(Violation::MeanNotOne { mean });
        }
        Ok(Self {
            grid,
            data: data.into(),
        })
    }

    /// The all-ones map.
    pub fn uniform(grid: GridDims) -> Self {
        Self {
            grid,
            data: vec![1.0; grid.cells()].into(),
        }
    }

    pub fn grid(&self) -> GridDims {
        self.grid
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[self.grid.index(row, col)]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum::<f64>() / self.grid.cells() as f64
    }
}

/// Output semantics of a classifier head.
///
/// Category heads hold one weight row per label and produce a softmax over
/// labels. Attribute heads hold two interleaved rows per label,
/// `(absent, present)`, each pair forming an independent 2-way softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    kind: TaskKind,
    labels: Arc<[String]>,
    feature_channels: usize,
    weights: Arc<[f32]>,
    bias: Arc<[f32]>,
}

impl ClassifierHead {
    /// `weights` is row-major with one row per logit and `feature_channels` columns.
    pub fn new(
        kind: TaskKind,
        labels: Vec<String>,
        feature_channels: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self, Violation> {
        if labels.is_empty() {
            return Err(Violation::EmptyDimension("labels"));
        }
        if feature_channels == 0 {
            return Err(Violation::EmptyDimension("feature channels"));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Violation::DuplicateLabel(l.clone()));
            }
        }
        if !weights.len().is_multiple_of(feature_channels) {
            return Err(Violation::LengthMismatch {
                expected: (weights.len() / feature_channels + 1) * feature_channels,
                actual: weights.len(),
            });
        }
        let rows = weights.len() / feature_channels;
        let expected = logit_rows(kind, labels.len());
        if rows != expected {
            return Err(Violation::RowCountMismatch {
                labels: labels.len(),
                expected,
                rows,
            });
        }
        if bias.len() != rows {
            return Err(Violation::BiasLengthMismatch {
                rows,
                bias: bias.len(),
            });
        }
        if let Some(i) = weights.iter().position(|v| !v.is_finite()) {
            return Err(Violation::NonFinite(Location::Weight {
                row: i / feature_channels,
                col: i % feature_channels,
            }));
        }
        if let Some(index) = bias.iter().position(|v| !v.is_finite()) {
            return Err(Violation::NonFinite(Location::Bias { index }));
        }
        Ok(Self {
            kind,
            labels: labels.into(),
            feature_channels,
            weights: weights.into(),
            bias: bias.into(),
        })
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub(crate) fn shared_labels(&self) -> Arc<[String]> {
        Arc::clone(&self.labels)
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_channels(&self) -> usize {
        self.feature_channels
    }

    /// Number of logits: one per label for categories, two for attributes.
    pub fn logit_rows(&self) -> usize {
        self.bias.len()
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.weights[r * self.feature_channels..(r + 1) * self.feature_channels]
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Weight row scoring `class`: the class row for categories, the
    /// "present" row for attributes.
    pub fn class_row(&self, class: usize) -> usize {
        match self.kind {
            TaskKind::Category => class,
            TaskKind::Attribute => 2 * class + 1,
        }
    }
}

fn logit_rows(kind: TaskKind, labels: usize) -> usize {
    match kind {
        TaskKind::Category => labels,
        TaskKind::Attribute => 2 * labels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    SingleImage,
    Collage,
}

/// Class posteriors with their ranking.
///
/// For category heads `posteriors` is a distribution over labels. For
/// attribute heads each entry is that attribute's independent present
/// probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    kind: TaskKind,
    labels: Arc<[String]>,
    posteriors: Vec<f64>,
    ranking: Vec<usize>,
    scope: Scope,
    contributing_images: Vec<(String, f64)>,
}

impl PredictionResult {
    pub(crate) fn new(
        kind: TaskKind,
        labels: Arc<[String]>,
        posteriors: Vec<f64>,
        scope: Scope,
        contributing_images: Vec<(String, f64)>,
    ) -> Self {
        debug_assert_eq!(labels.len(), posteriors.len());
        let ranking = rank_descending(&posteriors);
        Self {
            kind,
            labels,
            posteriors,
            ranking,
            scope,
            contributing_images,
        }
    }

    pub(crate) fn set_contributors(&mut self, contributing_images: Vec<(String, f64)>) {
        self.contributing_images = contributing_images;
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn posteriors(&self) -> &[f64] {
        &self.posteriors
    }

    /// Class indices by descending posterior; ties go to the lower index.
    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    pub fn ranked_labels(&self) -> impl Iterator<Item = &str> + '_ {
        self.ranking.iter().map(|&i| self.labels[i].as_str())
    }

    pub fn top(&self) -> usize {
        self.ranking[0]
    }

    pub fn top_label(&self) -> &str {
        &self.labels[self.ranking[0]]
    }

    /// True when `class` is among the first `n` ranked classes.
    pub fn in_top(&self, class: usize, n: usize) -> bool {
        self.ranking.iter().take(n).any(|&c| c == class)
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn contributing_images(&self) -> &[(String, f64)] {
        &self.contributing_images
    }
}

/// Indices sorted by descending value, ties broken by ascending index.
pub fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn nan_feature_reports_its_location() {
        let grid = GridDims::new(6, 6);
        let mut data = vec![0.5f32; 2 * grid.cells()];
        data[grid.index(3, 3)] = f32::NAN;
        let err = FeatureMap::new("img", 2, grid, data).unwrap_err();
        assert_eq!(err.to_string(), "non-finite at channel 0, row 3, col 3");

        let mut data = vec![0.5f32; 2 * grid.cells()];
        data[grid.cells() + grid.index(1, 4)] = f32::INFINITY;
        let err = FeatureMap::new("img", 2, grid, data).unwrap_err();
        assert_eq!(
            err,
            Violation::NonFinite(Location::Feature {
                channel: 1,
                row: 1,
                col: 4
            })
        );
    }

    #[test]
    fn feature_map_shape_checks() {
        assert_eq!(
            FeatureMap::new("a", 0, GridDims::new(2, 2), vec![]).unwrap_err(),
            Violation::EmptyDimension("channels")
        );
        assert_eq!(
            FeatureMap::new("a", 1, GridDims::new(2, 2), vec![0.0; 3]).unwrap_err(),
            Violation::LengthMismatch {
                expected: 4,
                actual: 3
            }
        );
    }

    #[test]
    fn feature_map_indexing_is_channel_row_col() {
        let grid = GridDims::new(2, 3);
        let data: Vec<f32> = (0..12).map(|i| i as f32).collect();
        let f = FeatureMap::new("a", 2, grid, data).unwrap();
        assert_eq!(f.get(0, 0, 2), 2.0);
        assert_eq!(f.get(0, 1, 0), 3.0);
        assert_eq!(f.get(1, 0, 0), 6.0);
        assert_eq!(f.channel(1), &[6.0, 7.0, 8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn all_ones_density_is_valid() {
        let grid = GridDims::DEFAULT;
        let fdm = FixationDensityMap::new(grid, vec![1.0; 196]).unwrap();
        assert_eq!(fdm.mean(), 1.0);
        assert_eq!(fdm, FixationDensityMap::uniform(grid));
    }

    #[test]
    fn density_rejects_bad_values() {
        let grid = GridDims::new(2, 2);
        assert!(FixationDensityMap::new(grid, vec![2.0, 2.0, 0.0, -0.0]).is_ok());
        assert_eq!(
            FixationDensityMap::new(grid, vec![2.0, 2.5, 0.0, -0.5]).unwrap_err(),
            Violation::Negative(Location::Cell { row: 1, col: 1 })
        );
        assert!(matches!(
            FixationDensityMap::new(grid, vec![1.0, 1.0, 1.0, 2.0]).unwrap_err(),
            Violation::MeanNotOne { .. }
        ));
        assert!(matches!(
            FixationDensityMap::new(grid, vec![1.0, f32::NAN, 1.0, 1.0]).unwrap_err(),
            Violation::NonFinite(_)
        ));
    }

    #[test]
    fn head_row_count_mismatch() {
        let err =
            ClassifierHead::new(TaskKind::Category, labels(10), 4, vec![0.0; 9 * 4], vec![0.0; 9])
                .unwrap_err();
        assert!(matches!(
            err,
            Violation::RowCountMismatch {
                labels: 10,
                rows: 9,
                ..
            }
        ));
        assert!(err.to_string().starts_with("row count mismatch"));
    }

    #[test]
    fn attribute_head_has_two_rows_per_label() {
        let h = ClassifierHead::new(TaskKind::Attribute, labels(3), 2, vec![0.0; 12], vec![0.0; 6])
            .unwrap();
        assert_eq!(h.logit_rows(), 6);
        assert_eq!(h.class_row(2), 5);
        assert!(
            ClassifierHead::new(TaskKind::Attribute, labels(3), 2, vec![0.0; 6], vec![0.0; 3])
                .is_err()
        );
    }

    #[test]
    fn head_rejects_bias_and_duplicates() {
        assert_eq!(
            ClassifierHead::new(TaskKind::Category, labels(2), 2, vec![0.0; 4], vec![0.0; 3])
                .unwrap_err(),
            Violation::BiasLengthMismatch { rows: 2, bias: 3 }
        );
        let dup = vec!["a".to_string(), "a".to_string()];
        assert_eq!(
            ClassifierHead::new(TaskKind::Category, dup, 1, vec![0.0; 2], vec![0.0; 2])
                .unwrap_err(),
            Violation::DuplicateLabel("a".into())
        );
        assert_eq!(
            ClassifierHead::new(TaskKind::Category, labels(2), 1, vec![0.0, 1.0], vec![0.0, f32::NAN])
                .unwrap_err(),
            Violation::NonFinite(Location::Bias { index: 1 })
        );
    }

    #[test]
    fn log_requires_onset_order_and_non_negative_durations() {
        let task = Task::new(TaskKind::Category, "c0");
        let ok = vec![Fixation::new(1.0, 1.0, 100.0, 0.0), Fixation::new(2.0, 2.0, 0.0, 0.0)];
        assert!(FixationLog::new("p", task.clone(), "c", ok).is_ok());
        let unordered = vec![Fixation::new(1.0, 1.0, 100.0, 50.0), Fixation::new(2.0, 2.0, 10.0, 10.0)];
        assert_eq!(
            FixationLog::new("p", task.clone(), "c", unordered).unwrap_err(),
            Violation::OutOfOrder(Location::Fixation { index: 1 })
        );
        let negative = vec![Fixation::new(1.0, 1.0, -1.0, 0.0)];
        assert_eq!(
            FixationLog::new("p", task, "c", negative).unwrap_err(),
            Violation::NegativeDuration(Location::Fixation { index: 0 })
        );
    }

    #[test]
    fn layout_rejects_overlap_duplicates_and_out_of_screen() {
        let e = |id: &str, x0, y0, x1, y1| LayoutEntry {
            image_id: id.into(),
            bbox: BoundingBox::new(x0, y0, x1, y1),
        };
        assert!(CollageLayout::new("c", 100.0, 100.0, vec![e("a", 0., 0., 50., 50.), e("b", 50., 0., 100., 50.)]).is_ok());
        assert_eq!(
            CollageLayout::new("c", 100.0, 100.0, vec![e("a", 0., 0., 50., 50.), e("b", 40., 10., 90., 40.)]).unwrap_err(),
            Violation::BoxesOverlap("a".into(), "b".into())
        );
        assert_eq!(
            CollageLayout::new("c", 100.0, 100.0, vec![e("a", 0., 0., 50., 50.), e("a", 60., 0., 90., 50.)]).unwrap_err(),
            Violation::DuplicateImage("a".into())
        );
        assert_eq!(
            CollageLayout::new("c", 100.0, 100.0, vec![e("a", 0., 0., 150., 50.)]).unwrap_err(),
            Violation::BoxOutOfBounds("a".into())
        );
    }

    #[test]
    fn ranking_breaks_ties_by_index() {
        assert_eq!(rank_descending(&[0.2, 0.5, 0.2, 0.1]), vec![1, 0, 2, 3]);
        assert_eq!(rank_descending(&[0.25; 4]), vec![0, 1, 2, 3]);
    }
}
