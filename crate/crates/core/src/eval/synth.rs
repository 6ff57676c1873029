//! Synthetic search suites with planted targets.
//!
//! Each collage has one target class planted as the dominant object of
//! `target_copies` images; every image also carries a secondary object, and
//! distractor images are dominated by the collage's majority class more often
//! than by any other. Channel `k` of a feature map is a detector for class
//! `k`, and the category head is a scaled identity. Simulated participants
//! fixate the target objects with a per-participant probability and dwell
//! longer there; the remaining fixations are uniform over the screen.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{derive_seed, Suite, Trial};
use crate::error::{Result, Violation};
use crate::types::{
    BoundingBox, ClassifierHead, CollageLayout, FeatureMap, Fixation, FixationLog, GridDims,
    LayoutEntry, Task, TaskKind,
};

/// Fixation behaviour of simulated participants.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeModel {
    /// Mean probability that a fixation lands on a target object.
    pub target_probability: f64,
    /// Participants draw their own probability within `+-` this spread.
    pub participant_spread: f64,
    /// Inclusive range of fixations per trial.
    pub fixations: (usize, usize),
    pub target_duration_ms: (f64, f64),
    pub distractor_duration_ms: (f64, f64),
    /// Standard deviation of gaze jitter around the aimed point.
    pub jitter_px: f64,
    pub saccade_ms: f64,
}

impl Default for GazeModel {
    fn default() -> Self {
        Self {
            target_probability: 0.6,
            participant_spread: 0.15,
            fixations: (20, 40),
            target_duration_ms: (250.0, 600.0),
            distractor_duration_ms: (120.0, 300.0),
            jitter_px: 25.0,
            saccade_ms: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub collages_per_class: usize,
    pub images_per_collage: usize,
    pub target_copies: usize,
    pub participants: usize,
    pub grid: GridDims,
    /// Activation of a planted object relative to a background level of at most 0.1.
    pub signal_strength: f64,
    /// Scale of the identity classifier weights.
    pub head_gain: f64,
    /// Probability that a distractor image is dominated by the collage's majority class.
    pub majority_share: f64,
    pub task_kind: TaskKind,
    pub screen_px: (f64, f64),
    /// Gap between neighbouring image boxes.
    pub gutter_px: f64,
    pub gaze: GazeModel,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            collages_per_class: 10,
            images_per_collage: 20,
            target_copies: 2,
            participants: 14,
            grid: GridDims::DEFAULT,
            signal_strength: 1.0,
            head_gain: 8.0,
            majority_share: 0.3,
            task_kind: TaskKind::Category,
            screen_px: (3840.0, 2400.0),
            gutter_px: 32.0,
            gaze: GazeModel::default(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn check(&self) -> Result<(), Violation> {
        let bad = |msg: &str| Err(Violation::Parameter(msg.to_owned()));
        if self.classes < 2 {
            return bad("at least two classes are required");
        }
        if self.collages_per_class == 0 || self.participants == 0 {
            return bad("collage and participant counts must be positive");
        }
        if self.target_copies == 0 || self.target_copies >= self.images_per_collage {
            return bad("target copies must be positive and leave room for distractors");
        }
        if self.grid.height < 4 || self.grid.width < 4 {
            return bad("grid must be at least 4x4");
        }
        if !(self.signal_strength > 0.0 && self.head_gain > 0.0) {
            return bad("signal strength and head gain must be positive");
        }
        if !(0.0..=1.0).contains(&self.majority_share) {
            return bad("majority share must be a probability");
        }
        let g = &self.gaze;
        let p_lo = g.target_probability - g.participant_spread;
        let p_hi = g.target_probability + g.participant_spread;
        if !(0.0..=1.0).contains(&p_lo) || !(0.0..=1.0).contains(&p_hi) || g.participant_spread < 0.0 {
            return bad("participant target probabilities must stay within [0, 1]");
        }
        if g.fixations.0 == 0 || g.fixations.0 > g.fixations.1 {
            return bad("fixation count range must be non-empty and positive");
        }
        let valid_range = |(lo, hi): (f64, f64)| lo >= 0.0 && lo <= hi && hi.is_finite();
        if !valid_range(g.target_duration_ms) || !valid_range(g.distractor_duration_ms) {
            return bad("duration ranges must be non-negative and ordered");
        }
        if !(g.jitter_px >= 0.0 && g.saccade_ms >= 0.0) {
            return bad("jitter and saccade time must be non-negative");
        }
        let (w, h) = self.screen_px;
        if !(w > 0.0 && h > 0.0 && self.gutter_px >= 0.0) {
            return bad("screen size must be positive");
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        let prefix = match self.task_kind {
            TaskKind::Category => "class",
            TaskKind::Attribute => "attr",
        };
        (0..self.classes).map(|k| format!("{prefix}-{k}")).collect()
    }
}

/// Grid cells `[row0, row1) x [col0, col1)` covered by an object.
#[derive(Debug, Clone, Copy)]
struct Patch {
    row0: usize,
    col0: usize,
    rows: usize,
    cols: usize,
}

fn random_patch(rng: &mut ChaCha8Rng, grid: GridDims, min_frac: f64, max_frac: f64) -> Patch {
    let side = |n: usize, rng: &mut ChaCha8Rng| {
        let lo = ((n as f64 * min_frac).round() as usize).clamp(1, n);
        let hi = ((n as f64 * max_frac).round() as usize).clamp(lo, n);
        rng.random_range(lo..=hi)
    };
    let rows = side(grid.height, rng);
    let cols = side(grid.width, rng);
    Patch {
        row0: rng.random_range(0..=grid.height - rows),
        col0: rng.random_range(0..=grid.width - cols),
        rows,
        cols,
    }
}

/// Paints an opaque object: inside the patch, every other channel falls back to background.
fn paint(data: &mut [f32], background: &[f32], grid: GridDims, class: usize, patch: Patch, level: f32) {
    let cells = grid.cells();
    for r in patch.row0..patch.row0 + patch.rows {
        for c in patch.col0..patch.col0 + patch.cols {
            let cell = grid.index(r, c);
            for ch in 0..data.len() / cells {
                let i = ch * cells + cell;
                data[i] = if ch == class { level } else { background[i] };
            }
        }
    }
}

fn layout_boxes(spec: &SynthSpec) -> Vec<BoundingBox> {
    let n = spec.images_per_collage;
    let (w, h) = spec.screen_px;
    // Fewest empty slots first, then the squarest cells.
    let (cols, rows) = (1..=n)
        .map(|c| (c, n.div_ceil(c)))
        .min_by(|a, b| {
            let score = |&(c, r): &(usize, usize)| {
                let empty = c * r - n;
                let aspect = ((w / c as f64) / (h / r as f64)).ln().abs();
                (empty, aspect)
            };
            let (ea, aa) = score(a);
            let (eb, ab) = score(b);
            ea.cmp(&eb).then(aa.total_cmp(&ab))
        })
        .expect("at least one image");
    let (cw, ch) = (w / cols as f64, h / rows as f64);
    let g = spec.gutter_px / 2.0;
    (0..n)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            BoundingBox::new(
                c as f64 * cw + g,
                r as f64 * ch + g,
                (c + 1) as f64 * cw - g,
                (r + 1) as f64 * ch - g,
            )
        })
        .collect()
}

struct PlantedCollage {
    id: String,
    target: usize,
    /// `(box, target patch)` of each target image.
    targets: Vec<(BoundingBox, Patch)>,
}

fn other_class(rng: &mut ChaCha8Rng, classes: usize, exclude: usize) -> usize {
    let c = rng.random_range(0..classes - 1);
    if c >= exclude {
        c + 1
    } else {
        c
    }
}

/// Builds a deterministic synthetic suite: layouts, features, heads and trials.
pub fn synth_dataset(spec: &SynthSpec) -> Result<Suite> {
    spec.check()?;
    let grid = spec.grid;
    let k = spec.classes;
    let boxes = layout_boxes(spec);
    let signal = spec.signal_strength as f32;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0));

    let mut layouts = BTreeMap::new();
    let mut features = HashMap::new();
    let mut planted = Vec::new();
    for target in 0..k {
        for j in 0..spec.collages_per_class {
            let collage_id = format!("collage-{:03}", target * spec.collages_per_class + j);
            let majority = other_class(&mut rng, k, target);
            let mut slots: Vec<usize> = (0..spec.images_per_collage).collect();
            for i in 0..spec.target_copies {
                let pick = rng.random_range(i..slots.len());
                slots.swap(i, pick);
            }
            let target_slots = &slots[..spec.target_copies];

            let mut entries = Vec::with_capacity(boxes.len());
            let mut targets = Vec::new();
            for (slot, bbox) in boxes.iter().enumerate() {
                let image_id = format!("{collage_id}-img-{slot:02}");
                let background: Vec<f32> = (0..k * grid.cells())
                    .map(|_| rng.random_range(0.0..0.1f32) * signal)
                    .collect();
                let mut data = background.clone();
                let dominant_class;
                let dominant = if target_slots.contains(&slot) {
                    dominant_class = target;
                    random_patch(&mut rng, grid, 0.45, 0.65)
                } else {
                    dominant_class = if rng.random_bool(spec.majority_share) {
                        majority
                    } else {
                        other_class(&mut rng, k, target)
                    };
                    random_patch(&mut rng, grid, 0.5, 0.75)
                };
                let secondary_class = other_class(&mut rng, k, target);
                let secondary = random_patch(&mut rng, grid, 0.25, 0.45);
                let l = signal * rng.random_range(0.8..1.2f32);
                paint(&mut data, &background, grid, secondary_class, secondary, l);
                let l = signal * rng.random_range(0.8..1.2f32);
                paint(&mut data, &background, grid, dominant_class, dominant, l);
                if dominant_class == target {
                    targets.push((*bbox, dominant));
                }
                features.insert(image_id.clone(), FeatureMap::new(image_id.clone(), k, grid, data)?);
                entries.push(LayoutEntry {
                    image_id,
                    bbox: *bbox,
                });
            }
            let (w, h) = spec.screen_px;
            layouts.insert(collage_id.clone(), CollageLayout::new(collage_id.clone(), w, h, entries)?);
            planted.push(PlantedCollage {
                id: collage_id,
                target,
                targets,
            });
        }
    }

    let labels = spec.labels();
    let heads = vec![category_head(spec, &labels)?, attribute_head(spec, &labels)?];

    let mut trials = Vec::with_capacity(spec.participants * planted.len());
    for p in 0..spec.participants {
        let participant = format!("p{:02}", p + 1);
        let mut prng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1 + p as u64));
        let g = &spec.gaze;
        let p_target = g.target_probability
            + if g.participant_spread > 0.0 {
                prng.random_range(-g.participant_spread..=g.participant_spread)
            } else {
                0.0
            };
        for collage in &planted {
            let task = Task::new(spec.task_kind, labels[collage.target].clone());
            let fixations = simulate_search(spec, collage, p_target, &mut prng);
            trials.push(Trial::new(FixationLog::new(
                participant.clone(),
                task,
                collage.id.clone(),
                fixations,
            )?));
        }
    }

    Ok(Suite {
        layouts,
        features,
        heads,
        trials,
    })
}

fn simulate_search(
    spec: &SynthSpec,
    collage: &PlantedCollage,
    p_target: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Fixation> {
    let g = &spec.gaze;
    let (w, h) = spec.screen_px;
    let jitter = Normal::new(0.0, g.jitter_px).expect("non-negative jitter");
    let count = rng.random_range(g.fixations.0..=g.fixations.1);
    let mut onset = 0.0;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (x, y, duration) = if rng.random_bool(p_target) {
            let (bbox, patch) = collage.targets[rng.random_range(0..collage.targets.len())];
            let u = patch.col0 as f64 + rng.random_range(0.0..patch.cols as f64);
            let v = patch.row0 as f64 + rng.random_range(0.0..patch.rows as f64);
            let x = bbox.x0 + u / spec.grid.width as f64 * bbox.width() + jitter.sample(rng);
            let y = bbox.y0 + v / spec.grid.height as f64 * bbox.height() + jitter.sample(rng);
            (x, y, uniform(rng, g.target_duration_ms))
        } else {
            (
                rng.random_range(0.0..w),
                rng.random_range(0.0..h),
                uniform(rng, g.distractor_duration_ms),
            )
        };
        out.push(Fixation::new(
            x.clamp(0.0, w),
            y.clamp(0.0, h),
            duration,
            onset,
        ));
        onset += duration + g.saccade_ms;
    }
    out
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn category_head(spec: &SynthSpec, labels: &[String]) -> Result<ClassifierHead> {
    let k = spec.classes;
    let mut w = vec![0.0f32; k * k];
    for i in 0..k {
        w[i * k + i] = spec.head_gain as f32;
    }
    Ok(ClassifierHead::new(TaskKind::Category, labels.to_vec(), k, w, vec![0.0; k])?)
}

/// Independent present/absent pairs; presence is declared above a quarter of full signal.
fn attribute_head(spec: &SynthSpec, labels: &[String]) -> Result<ClassifierHead> {
    let k = spec.classes;
    let gain = spec.head_gain as f32;
    let mut w = vec![0.0f32; 2 * k * k];
    let mut b = vec![0.0f32; 2 * k];
    for i in 0..k {
        w[(2 * i + 1) * k + i] = gain;
        b[2 * i] = gain * 0.25 * spec.signal_strength as f32;
    }
    let attr_labels = labels
        .iter()
        .map(|l| l.replacen("class-", "attr-", 1))
        .collect();
    Ok(ClassifierHead::new(TaskKind::Attribute, attr_labels, k, w, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            classes: 4,
            collages_per_class: 2,
            participants: 3,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn same_seed_same_suite() {
        let a = synth_dataset(&small()).unwrap();
        let b = synth_dataset(&small()).unwrap();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.layouts, b.layouts);
        assert_eq!(a.heads, b.heads);
        for (id, f) in &a.features {
            assert_eq!(f.data(), b.features[id].data());
        }
        let c = synth_dataset(&SynthSpec { seed: 1, ..small() }).unwrap();
        assert_ne!(a.trials, c.trials);
    }

    #[test]
    fn default_suite_has_100_trials_per_participant() {
        let spec = SynthSpec {
            participants: 2,
            ..SynthSpec::default()
        };
        let suite = synth_dataset(&spec).unwrap();
        assert_eq!(suite.layouts.len(), 100);
        assert_eq!(suite.features.len(), 2000);
        for p in ["p01", "p02"] {
            assert_eq!(suite.trials.iter().filter(|t| t.participant_id() == p).count(), 100);
        }
        for layout in suite.layouts.values() {
            assert_eq!(layout.entries().len(), 20);
        }
    }

    #[test]
    fn target_planted_twice_per_collage() {
        let suite = synth_dataset(&small()).unwrap();
        let head = suite.head(TaskKind::Category).unwrap();
        for t in suite.trials.iter().filter(|t| t.participant_id() == "p01") {
            let target = head.label_index(t.target()).unwrap();
            let layout = &suite.layouts[t.collage_id()];
            let dominant = layout
                .entries()
                .iter()
                .filter(|e| {
                    let f = &suite.features[&e.image_id];
                    f.channel(target).iter().filter(|&&v| v > 0.5).count() >= 36
                })
                .count();
            assert_eq!(dominant, 2, "collage {}", t.collage_id());
        }
    }

    #[test]
    fn layout_is_five_by_four() {
        let boxes = layout_boxes(&SynthSpec::default());
        assert_eq!(boxes.len(), 20);
        assert_eq!(boxes[4].x1, 3840.0 - 16.0);
        assert_eq!(boxes[5].y0, 600.0 + 16.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        for bad in [
            SynthSpec { classes: 1, ..small() },
            SynthSpec { target_copies: 20, ..small() },
            SynthSpec { signal_strength: 0.0, ..small() },
            SynthSpec {
                gaze: GazeModel { fixations: (5, 2), ..GazeModel::default() },
                ..small()
            },
        ] {
            assert!(synth_dataset(&bad).is_err());
        }
    }

    #[test]
    fn attribute_suite_uses_attribute_labels() {
        let suite = synth_dataset(&SynthSpec { task_kind: TaskKind::Attribute, ..small() }).unwrap();
        assert!(suite.trials.iter().all(|t| t.kind() == TaskKind::Attribute && t.target().starts_with("attr-")));
        let head = suite.head(TaskKind::Attribute).unwrap();
        assert!(suite.trials.iter().all(|t| head.label_index(t.target()).is_some()));
    }
}
