//! The gaze pooling layer: gaze-weighted feature maps, global average
//! pooling, linear + softmax classification and attended class activation maps.

use std::sync::Arc;

use crate::encoding::RawDensityMap;
use crate::error::{Error, Result};
use crate::types::{
    rank_descending, ClassifierHead, FeatureMap, FixationDensityMap, GridDims, PredictionResult,
    Scope, TaskKind,
};

/// A per-cell spatial weighting that can be broadcast over feature channels.
pub trait SpatialWeights {
    fn grid(&self) -> GridDims;
    fn weight(&self, cell: usize) -> f64;
}

impl SpatialWeights for FixationDensityMap {
    fn grid(&self) -> GridDims {
        FixationDensityMap::grid(self)
    }

    #[inline]
    fn weight(&self, cell: usize) -> f64 {
        f64::from(self.data()[cell])
    }
}

impl SpatialWeights for RawDensityMap {
    fn grid(&self) -> GridDims {
        RawDensityMap::grid(self)
    }

    #[inline]
    fn weight(&self, cell: usize) -> f64 {
        self.data()[cell]
    }
}

/// Dense `channels x height x width` activations.
pub trait ChannelGrid {
    fn channels(&self) -> usize;
    fn grid(&self) -> GridDims;
    fn data(&self) -> &[f32];
}

impl ChannelGrid for FeatureMap {
    fn channels(&self) -> usize {
        FeatureMap::channels(self)
    }

    fn grid(&self) -> GridDims {
        FeatureMap::grid(self)
    }

    fn data(&self) -> &[f32] {
        FeatureMap::data(self)
    }
}

/// Feature map multiplied cell-wise by a density, broadcast over channels.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeWeightedFeatureMap {
    image_id: String,
    channels: usize,
    grid: GridDims,
    data: Arc<[f32]>,
}

impl GazeWeightedFeatureMap {
    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[channel * self.grid.cells() + self.grid.index(row, col)]
    }
}

impl ChannelGrid for GazeWeightedFeatureMap {
    fn channels(&self) -> usize {
        self.channels
    }

    fn grid(&self) -> GridDims {
        self.grid
    }

    fn data(&self) -> &[f32] {
        &self.data
    }
}

pub fn gaze_weighted_feature_map<W: SpatialWeights + ?Sized>(
    features: &FeatureMap,
    density: &W,
) -> Result<GazeWeightedFeatureMap> {
    let grid = features.grid();
    if density.grid() != grid {
        return Err(Error::ShapeMismatch(format!(
            "density grid {} does not match feature grid {grid}",
            density.grid()
        )));
    }
    let cells = grid.cells();
    let mut data = Vec::with_capacity(features.data().len());
    for channel in features.data().chunks_exact(cells) {
        data.extend(
            channel
                .iter()
                .enumerate()
                .map(|(i, &f)| (f64::from(f) * density.weight(i)) as f32),
        );
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::ShapeMismatch(
            "gaze-weighted features overflowed to non-finite values".into(),
        ));
    }
    Ok(GazeWeightedFeatureMap {
        image_id: features.image_id().to_owned(),
        channels: features.channels(),
        grid,
        data: data.into(),
    })
}

/// Per-channel mean over all cells.
pub fn gap<M: ChannelGrid + ?Sized>(map: &M) -> Vec<f64> {
    let cells = map.grid().cells();
    map.data()
        .chunks_exact(cells)
        .map(|ch| ch.iter().map(|&v| f64::from(v)).sum::<f64>() / cells as f64)
        .collect()
}

/// `W * features + b` over every logit row of the head.
pub fn logits(features: &[f64], head: &ClassifierHead) -> Result<Vec<f64>> {
    if features.len() != head.feature_channels() {
        return Err(Error::ShapeMismatch(format!(
            "{} pooled features for a head expecting {}",
            features.len(),
            head.feature_channels()
        )));
    }
    Ok((0..head.logit_rows())
        .map(|r| {
            let dot: f64 = head
                .row(r)
                .iter()
                .zip(features)
                .map(|(&w, &x)| f64::from(w) * x)
                .sum();
            dot + f64::from(head.bias()[r])
        })
        .collect())
}

/// Softmax with max subtraction.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Posteriors from logits according to the head kind.
pub fn posteriors_from_logits(z: &[f64], kind: TaskKind) -> Vec<f64> {
    match kind {
        TaskKind::Category => softmax(z),
        TaskKind::Attribute => z.chunks_exact(2).map(|pair| softmax(pair)[1]).collect(),
    }
}

pub fn classify(features: &[f64], head: &ClassifierHead) -> Result<PredictionResult> {
    let z = logits(features, head)?;
    Ok(PredictionResult::new(
        head.kind(),
        head.shared_labels(),
        posteriors_from_logits(&z, head.kind()),
        Scope::SingleImage,
        Vec::new(),
    ))
}

/// Gaze-weighted prediction for one image.
pub fn predict_image(
    features: &FeatureMap,
    density: &FixationDensityMap,
    head: &ClassifierHead,
) -> Result<PredictionResult> {
    let gwfm = gaze_weighted_feature_map(features, density)?;
    let mut result = classify(&gap(&gwfm), head)?;
    result.set_contributors(vec![(features.image_id().to_owned(), 1.0)]);
    Ok(result)
}

/// Ranks attributes by present-probability; the first entry is the prediction.
pub fn predict_attribute(present: &[f64]) -> Result<Vec<usize>> {
    if present.is_empty() {
        return Err(Error::Empty("attribute probabilities"));
    }
    Ok(rank_descending(present))
}

/// Class evidence per cell of a gaze-weighted feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct AttendedClassActivationMap {
    class_label: String,
    grid: GridDims,
    data: Vec<f64>,
    logit: f64,
    bias: f64,
}

impl AttendedClassActivationMap {
    pub fn class_label(&self) -> &str {
        &self.class_label
    }

    pub fn grid(&self) -> GridDims {
        self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.grid.index(row, col)]
    }

    pub fn logit(&self) -> f64 {
        self.logit
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

pub fn acam<M: ChannelGrid + ?Sized>(
    map: &M,
    head: &ClassifierHead,
    class_label: &str,
) -> Result<AttendedClassActivationMap> {
    let class = head
        .label_index(class_label)
        .ok_or_else(|| Error::UnknownClass(class_label.to_owned()))?;
    if map.channels() != head.feature_channels() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature channels for a head expecting {}",
            map.channels(),
            head.feature_channels()
        )));
    }
    let row = head.class_row(class);
    let weights = head.row(row);
    let grid = map.grid();
    let cells = grid.cells();
    let mut data = vec![0.0f64; cells];
    for (w, channel) in weights.iter().zip(map.data().chunks_exact(cells)) {
        let w = f64::from(*w);
        for (acc, &v) in data.iter_mut().zip(channel) {
            *acc += w * f64::from(v);
        }
    }
    let z = logits(&gap(map), head)?;
    Ok(AttendedClassActivationMap {
        class_label: class_label.to_owned(),
        grid,
        data,
        logit: z[row],
        bias: f64::from(head.bias()[row]),
    })
}

/// Standard class activation map of raw features.
pub fn class_activation_map(
    features: &FeatureMap,
    head: &ClassifierHead,
    class_label: &str,
) -> Result<AttendedClassActivationMap> {
    acam(features, head, class_label)
}
