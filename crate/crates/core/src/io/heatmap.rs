//! Heatmap images for density maps and class activation maps.
//!
//! Each map is min-max normalized on its own, so brightness is not comparable
//! across images. Constant maps render as mid-gray.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::imageops::{self, FilterType};
use image::ImageEncoder;
use image::{DynamicImage, GrayImage, ImageFormat, Luma, Rgb, RgbImage};

use crate::encoding::RawDensityMap;
use crate::error::{Error, Result, Violation};
use crate::pooling::AttendedClassActivationMap;
use crate::types::{FixationDensityMap, GridDims};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Palette {
    #[default]
    Gray,
    /// Blue through green to red.
    Heat,
}

impl std::str::FromStr for Palette {
    type Err = Violation;

    fn from_str(s: &str) -> Result<Self, Violation> {
        match s {
            "gray" | "grey" => Ok(Palette::Gray),
            "heat" => Ok(Palette::Heat),
            other => Err(Violation::Parameter(format!("unknown palette {other:?}"))),
        }
    }
}

/// A scalar field on a grid.
pub trait GridValues {
    fn grid(&self) -> GridDims;
    fn value(&self, cell: usize) -> f64;
}

impl GridValues for FixationDensityMap {
    fn grid(&self) -> GridDims {
        FixationDensityMap::grid(self)
    }

    fn value(&self, cell: usize) -> f64 {
        self.data()[cell] as f64
    }
}

impl GridValues for RawDensityMap {
    fn grid(&self) -> GridDims {
        RawDensityMap::grid(self)
    }

    fn value(&self, cell: usize) -> f64 {
        self.data()[cell]
    }
}

impl GridValues for AttendedClassActivationMap {
    fn grid(&self) -> GridDims {
        AttendedClassActivationMap::grid(self)
    }

    fn value(&self, cell: usize) -> f64 {
        self.data()[cell]
    }
}

/// Min-max maps values to `0..=255`; a constant map becomes 128 everywhere.
pub fn normalize_u8<M: GridValues + ?Sized>(map: &M) -> Result<GrayImage> {
    let g = map.grid();
    let values: Vec<f64> = (0..g.cells()).map(|i| map.value(i)).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Violation::NonFinite(crate::error::Location::Cell {
            row: i / g.width,
            col: i % g.width,
        })
        .into());
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let bytes = values
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u8
            } else {
                128
            }
        })
        .collect();
    Ok(GrayImage::from_raw(g.width as u32, g.height as u32, bytes).expect("buffer matches grid"))
}

pub fn colorize(level: u8) -> Rgb<u8> {
    let t = level as f64 / 255.0;
    let ramp = |c: f64| ((1.5 - (4.0 * t - c).abs()).clamp(0.0, 1.0) * 255.0).round() as u8;
    Rgb([ramp(3.0), ramp(2.0), ramp(1.0)])
}

/// Renders one block of `cell_px` square pixels per grid cell.
pub fn render<M: GridValues + ?Sized>(map: &M, palette: Palette, cell_px: u32) -> Result<DynamicImage> {
    if cell_px == 0 {
        return Err(Violation::Parameter("cell size must be >= 1 pixel".into()).into());
    }
    let gray = normalize_u8(map)?;
    let (w, h) = (gray.width() * cell_px, gray.height() * cell_px);
    let scaled = imageops::resize(&gray, w, h, FilterType::Nearest);
    Ok(match palette {
        Palette::Gray => DynamicImage::ImageLuma8(scaled),
        Palette::Heat => DynamicImage::ImageRgb8(RgbImage::from_fn(w, h, |x, y| {
            let Luma([v]) = *scaled.get_pixel(x, y);
            colorize(v)
        })),
    })
}

/// Blends the map, bilinearly upsampled to the base image size, over `base`.
pub fn overlay<M: GridValues + ?Sized>(
    map: &M,
    palette: Palette,
    base: &RgbImage,
    alpha: f64,
) -> Result<RgbImage> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Violation::Parameter(format!("alpha {alpha} must lie in [0, 1]")).into());
    }
    let gray = normalize_u8(map)?;
    let up = imageops::resize(&gray, base.width(), base.height(), FilterType::Triangle);
    Ok(RgbImage::from_fn(base.width(), base.height(), |x, y| {
        let Luma([v]) = *up.get_pixel(x, y);
        let top = match palette {
            Palette::Gray => Rgb([v, v, v]),
            Palette::Heat => colorize(v),
        };
        let under = base.get_pixel(x, y);
        Rgb(std::array::from_fn(|c| {
            (alpha * top[c] as f64 + (1.0 - alpha) * under[c] as f64).round() as u8
        }))
    }))
}

/// Saves by extension: binary `.pgm` (converted to gray), binary `.ppm`, or `.png`.
pub fn save(image: &DynamicImage, path: &Path) -> Result<()> {
    let err = |message: String| Error::Image {
        path: path.to_owned(),
        message,
    };
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let pnm = |image: DynamicImage, subtype: PnmSubtype| -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        PnmEncoder::new(BufWriter::new(file))
            .with_subtype(subtype)
            .write_image(image.as_bytes(), image.width(), image.height(), image.color().into())
            .map_err(|e| err(e.to_string()))
    };
    match ext.as_str() {
        "pgm" => pnm(
            DynamicImage::ImageLuma8(image.to_luma8()),
            PnmSubtype::Graymap(SampleEncoding::Binary),
        ),
        "ppm" => pnm(
            DynamicImage::ImageRgb8(image.to_rgb8()),
            PnmSubtype::Pixmap(SampleEncoding::Binary),
        ),
        "png" => image
            .save_with_format(path, ImageFormat::Png)
            .map_err(|e| err(e.to_string())),
        other => Err(err(format!("unsupported extension {other:?}"))),
    }
}

pub fn export_heatmap<M: GridValues + ?Sized>(
    map: &M,
    palette: Palette,
    cell_px: u32,
    path: &Path,
) -> Result<()> {
    save(&render(map, palette, cell_px)?, path)
}
