//! Learned weight rows rendered as CIFAR-shaped image tiles.
//!
//! Each weight row is mapped back to pixel space through the PCA inverse
//! (mean included), read as a planar 32×32×3 image (1024 red, then green,
//! then blue values, rows top to bottom), and scaled to `0..=255` by its own
//! minimum and maximum: `round(255 (v - min) / (max - min))`. A constant
//! image becomes uniform gray 128. Tiles are laid out row-major with
//! `grid_cols` per row and no gaps; unused cells stay black.
//!
//! The PPM output is binary P6: `P6\n<width> <height>\n255\n` followed by
//! RGB triples row by row.

use std::io::BufWriter;
use std::path::Path;

use ndarray::Array2;
use ovr_core::datasets::{pca_inverse, PcaModel, CIFAR_IMAGE_BYTES};
use ovr_core::network::Checkpoint;

use crate::error::{CliError, Result};

pub const TILE: usize = 32;
const PLANE: usize = TILE * TILE;

/// 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// Pixel-space images, one row per weight row.
pub fn feature_images(weights: &Array2<f64>, pca: &PcaModel) -> Result<Array2<f64>> {
    if weights.ncols() != pca.out_dims() {
        return Err(CliError::Invalid(format!(
            "weights have {} inputs but the PCA model has {} components",
            weights.ncols(),
            pca.out_dims()
        )));
    }
    if pca.dim() != CIFAR_IMAGE_BYTES {
        return Err(CliError::Invalid(format!(
            "PCA model reconstructs {} values, expected {CIFAR_IMAGE_BYTES} (32x32x3)",
            pca.dim()
        )));
    }
    Ok(pca_inverse(pca, weights)?)
}

fn to_bytes(image: ndarray::ArrayView1<'_, f64>) -> Vec<u8> {
    let (lo, hi) = image
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return vec![128; image.len()];
    }
    image
        .iter()
        .map(|&v| ((v - lo) / (hi - lo) * 255.0).round() as u8)
        .collect()
}

/// Tiles planar 3072-value images into a grid.
pub fn tile_images(images: &Array2<f64>, grid_cols: usize) -> Result<RgbImage> {
    if grid_cols == 0 {
        return Err(CliError::Invalid("grid_cols must be positive".into()));
    }
    if images.ncols() != CIFAR_IMAGE_BYTES {
        return Err(CliError::Invalid(format!(
            "images have {} values, expected {CIFAR_IMAGE_BYTES}",
            images.ncols()
        )));
    }
    if images.nrows() == 0 {
        return Err(CliError::Invalid("no features to export".into()));
    }
    let grid_rows = images.nrows().div_ceil(grid_cols);
    let (width, height) = (grid_cols * TILE, grid_rows * TILE);
    let mut data = vec![0u8; width * height * 3];
    for (f, image) in images.rows().into_iter().enumerate() {
        let bytes = to_bytes(image);
        let (x0, y0) = ((f % grid_cols) * TILE, (f / grid_cols) * TILE);
        for r in 0..TILE {
            for c in 0..TILE {
                let dst = ((y0 + r) * width + x0 + c) * 3;
                for ch in 0..3 {
                    data[dst + ch] = bytes[ch * PLANE + r * TILE + c];
                }
            }
        }
    }
    Ok(RgbImage { width, height, data })
}

pub fn ppm_bytes(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.data);
    out
}

pub fn write_ppm(path: &Path, image: &RgbImage) -> Result<()> {
    std::fs::write(path, ppm_bytes(image)).map_err(|e| CliError::io(path, e))
}

pub fn write_png(path: &Path, image: &RgbImage) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), image.width as u32, image.height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| CliError::Invalid(format!("png {}: {e}", path.display()));
    let mut writer = encoder.write_header().map_err(png_err)?;
    writer.write_image_data(&image.data).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

/// Weight matrix of the first `encoder` or `hidden` layer in a checkpoint.
pub fn checkpoint_weights(ckpt: &Checkpoint, layer: Option<&str>) -> Result<Array2<f64>> {
    let candidates: Vec<&str> = match layer {
        Some(l) => vec![l],
        None => vec!["encoder", "hidden"],
    };
    for prefix in candidates {
        let name = format!("{prefix}.weights");
        if ckpt.array(&name).is_some() {
            return Ok(ckpt.matrix(&name)?);
        }
    }
    Err(CliError::Invalid("checkpoint has no matching layer weights".into()))
}

/// Renders a checkpoint's features to `out` (PPM) and, when `png` is set,
/// to the same path with a `.png` extension.
pub fn export_features(
    checkpoint: &Path,
    pca: &Path,
    out: &Path,
    grid_cols: usize,
    layer: Option<&str>,
    png: bool,
) -> Result<RgbImage> {
    let weights = checkpoint_weights(&Checkpoint::load(checkpoint)?, layer)?;
    let pca = Checkpoint::load(pca)?.pca()?;
    let image = tile_images(&feature_images(&weights, &pca)?, grid_cols)?;
    write_ppm(out, &image)?;
    if png {
        write_png(&out.with_extension("png"), &image)?;
    }
    Ok(image)
}
