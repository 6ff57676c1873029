//! Fixation density maps.
//!
//! Fixations are mapped from screen pixels into the continuous coordinate
//! frame of an image's feature grid (`u` along columns, `v` along rows, both
//! in cell units), rendered as truncated isotropic Gaussians evaluated at cell
//! centers, pooled across fixations by sum or max, and normalized so the grid
//! mean is one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::types::{CollageLayout, Fixation, FixationDensityMap, FixationLog, GridDims};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixationPooling {
    /// Coordinate-wise sum of the per-fixation maps.
    #[default]
    #[serde(alias = "average")]
    Avg,
    /// Coordinate-wise maximum of the per-fixation maps.
    Max,
}

impl std::fmt::Display for FixationPooling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FixationPooling::Avg => "avg",
            FixationPooling::Max => "max",
        })
    }
}

impl std::str::FromStr for FixationPooling {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "avg" | "average" => Ok(FixationPooling::Avg),
            "max" => Ok(FixationPooling::Max),
            other => Err(format!("unknown fixation pooling {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    sigma_fix: f64,
    truncation_radius: f64,
    pooling: FixationPooling,
}

impl EncodingConfig {
    /// Gaussian width in grid cells chosen to match eye tracker accuracy.
    pub const DEFAULT_SIGMA_FIX: f64 = 1.6;
    /// The range of `sigma_fix` values the encoding is evaluated over.
    pub const SIGMA_SWEEP: [f64; 6] = [1.0, 1.2, 1.4, 1.6, 1.8, 2.0];

    /// Config with the given width, a truncation radius of three widths and average pooling.
    pub fn new(sigma_fix: f64) -> Result<Self, Violation> {
        Self::with_truncation(sigma_fix, 3.0 * sigma_fix, FixationPooling::Avg)
    }

    pub fn with_truncation(
        sigma_fix: f64,
        truncation_radius: f64,
        pooling: FixationPooling,
    ) -> Result<Self, Violation> {
        if !(sigma_fix.is_finite() && sigma_fix > 0.0) {
            return Err(Violation::Parameter(format!(
                "sigma_fix must be positive, got {sigma_fix}"
            )));
        }
        if !(truncation_radius.is_finite() && truncation_radius >= sigma_fix) {
            return Err(Violation::Parameter(format!(
                "truncation radius {truncation_radius} must be at least sigma_fix {sigma_fix}"
            )));
        }
        Ok(Self {
            sigma_fix,
            truncation_radius,
            pooling,
        })
    }

    pub fn with_pooling(self, pooling: FixationPooling) -> Self {
        Self { pooling, ..self }
    }

    pub fn sigma_fix(&self) -> f64 {
        self.sigma_fix
    }

    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    pub fn pooling(&self) -> FixationPooling {
        self.pooling
    }
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            sigma_fix: Self::DEFAULT_SIGMA_FIX,
            truncation_radius: 3.0 * Self::DEFAULT_SIGMA_FIX,
            pooling: FixationPooling::Avg,
        }
    }
}

/// Continuous position on a feature grid: `u` along columns, `v` along rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub u: f64,
    pub v: f64,
}

impl GridPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Fixations that landed on one image, in that image's grid coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFixations {
    pub image_id: String,
    pub points: Vec<GridPoint>,
    pub total_duration_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Fixated images in layout order.
    pub images: Vec<ImageFixations>,
    /// Fixations that fell on no image.
    pub discarded: Vec<Fixation>,
}

impl Assignment {
    pub fn get(&self, image_id: &str) -> Option<&ImageFixations> {
        self.images.iter().find(|i| i.image_id == image_id)
    }
}

/// Assigns each fixation to the image whose box contains it, mapping it to that image's grid.
pub fn assign_fixations(
    log: &FixationLog,
    layout: &CollageLayout,
    grid: GridDims,
) -> Result<Assignment> {
    if log.collage_id() != layout.collage_id() {
        return Err(Error::LayoutLogMismatch {
            log: log.collage_id().to_owned(),
            layout: layout.collage_id().to_owned(),
        });
    }
    let entries = layout.entries();
    let mut per_entry: Vec<Option<ImageFixations>> = vec![None; entries.len()];
    let mut discarded = Vec::new();
    for fx in log.fixations() {
        let Some(i) = layout.locate(fx.x, fx.y) else {
            discarded.push(*fx);
            continue;
        };
        let b = &entries[i].bbox;
        let point = GridPoint::new(
            (fx.x - b.x0) / b.width() * grid.width as f64,
            (fx.y - b.y0) / b.height() * grid.height as f64,
        );
        let slot = per_entry[i].get_or_insert_with(|| ImageFixations {
            image_id: entries[i].image_id.clone(),
            points: Vec::new(),
            total_duration_ms: 0.0,
        });
        slot.points.push(point);
        slot.total_duration_ms += fx.duration_ms;
    }
    Ok(Assignment {
        images: per_entry.into_iter().flatten().collect(),
        discarded,
    })
}

/// Unnormalized density grid; values accumulate in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDensityMap {
    grid: GridDims,
    data: Vec<f64>,
}

impl RawDensityMap {
    pub fn zeros(grid: GridDims) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.cells()],
        }
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

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Rescales to a cell mean of one.
    pub fn normalize(&self) -> Result<FixationDensityMap> {
        let sum = self.sum();
        if sum.is_nan() || sum <= 0.0 {
            return Err(Error::ZeroDensity);
        }
        let scale = self.grid.cells() as f64 / sum;
        let data = self.data.iter().map(|&v| (v * scale) as f32).collect();
        Ok(FixationDensityMap::new(self.grid, data)?)
    }

    fn combine(&mut self, other: &RawDensityMap, pooling: FixationPooling) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            match pooling {
                FixationPooling::Avg => *a += b,
                FixationPooling::Max => *a = a.max(b),
            }
        }
    }
}

/// Truncated Gaussian of one fixation, evaluated at cell centers.
pub fn render_fixation(
    point: GridPoint,
    grid: GridDims,
    config: &EncodingConfig,
) -> Result<RawDensityMap> {
    let (h, w) = (grid.height as f64, grid.width as f64);
    let in_range = (0.0..=w).contains(&point.u) && (0.0..=h).contains(&point.v);
    if !in_range {
        return Err(Error::CoordinateOutOfRange {
            u: point.u,
            v: point.v,
            height: grid.height,
            width: grid.width,
        });
    }
    let mut map = RawDensityMap::zeros(grid);
    let radius = config.truncation_radius;
    let r2 = radius * radius;
    let denom = 2.0 * config.sigma_fix * config.sigma_fix;

    // Only cells whose center can lie within the radius.
    let row_lo = ((point.v - radius - 0.5).floor().max(0.0)) as usize;
    let row_hi = ((point.v + radius - 0.5).ceil().min(h - 1.0)) as usize;
    let col_lo = ((point.u - radius - 0.5).floor().max(0.0)) as usize;
    let col_hi = ((point.u + radius - 0.5).ceil().min(w - 1.0)) as usize;
    for row in row_lo..=row_hi {
        let dv = row as f64 + 0.5 - point.v;
        for col in col_lo..=col_hi {
            let du = col as f64 + 0.5 - point.u;
            let d2 = du * du + dv * dv;
            if d2 <= r2 {
                map.data[grid.index(row, col)] = (-d2 / denom).exp();
            }
        }
    }
    Ok(map)
}

/// Pools the per-fixation maps without normalizing.
pub fn pool_fixations(
    points: &[GridPoint],
    grid: GridDims,
    config: &EncodingConfig,
) -> Result<RawDensityMap> {
    let (first, rest) = points.split_first().ok_or(Error::NoFixationsOnImage)?;
    let mut acc = render_fixation(*first, grid, config)?;
    for p in rest {
        acc.combine(&render_fixation(*p, grid, config)?, config.pooling);
    }
    Ok(acc)
}

/// Fixation density map of one image from its fixations.
pub fn build_fdm(
    points: &[GridPoint],
    grid: GridDims,
    config: &EncodingConfig,
) -> Result<FixationDensityMap> {
    pool_fixations(points, grid, config)?.normalize()
}

/// The all-ones map used by the global condition.
pub fn uniform_fdm(grid: GridDims) -> FixationDensityMap {
    FixationDensityMap::uniform(grid)
}
