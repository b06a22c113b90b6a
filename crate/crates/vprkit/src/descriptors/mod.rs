//! Descriptor computation and post-processing: a patch-normalized holistic
//! descriptor, grid-sampled local features, codebook aggregation (BoVW,
//! VLAD), per-group standardization, and dimensionality reduction.

mod aggregate;
mod kmeans;
mod persist;
mod project;
mod standardize;

pub use aggregate::{aggregate_bovw, aggregate_vlad};
pub use kmeans::{assign_to_codebook, kmeans_fit, nearest_centroid, Codebook};
pub use persist::{load_codebook, load_pca_basis, save_codebook, save_pca_basis};
pub use project::{pca_apply, pca_fit, random_projection, PcaBasis, ProjectionKind};
pub use standardize::{
    cluster_standardize, standardize_apply, standardize_fit, standardize_per_set,
    StandardizationStats,
};

use rayon::prelude::*;

use crate::data::{DescriptorMatrix, GrayImage, LocalFeatureSet};
use crate::error::{Error, Result};

/// Standard deviations below this floor are clamped when z-scoring pixel
/// patches, so constant patches map to zero instead of blowing up.
const PATCH_SIGMA_FLOOR: f64 = 1e-6;

/// Fixed seed for the sign projection used by local feature extraction; the
/// same projection must apply to every image so features stay comparable.
const LOCAL_PROJECTION_SEED: u64 = 0x1f83_d9ab_fb41_bd6b;

/// Bilinear resampling with half-pixel-centered coordinates. Resizing to the
/// source size reproduces the input exactly.
pub fn resize_bilinear(image: &GrayImage, out_height: usize, out_width: usize) -> Result<GrayImage> {
    if out_height == 0 || out_width == 0 {
        return Err(Error::Param("target size must be at least 1x1".into()));
    }
    let (h, w) = (image.height(), image.width());
    let scale_y = h as f64 / out_height as f64;
    let scale_x = w as f64 / out_width as f64;
    let mut data = Vec::with_capacity(out_height * out_width);
    for oy in 0..out_height {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = sy - y0 as f64;
        for ox in 0..out_width {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = sx - x0 as f64;
            let top = image.get(y0, x0) * (1.0 - fx) + image.get(y0, x1) * fx;
            let bottom = image.get(y1, x0) * (1.0 - fx) + image.get(y1, x1) * fx;
            data.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    GrayImage::new(out_height, out_width, data)
}

fn zscore(block: &mut [f64], sigma_floor: f64) {
    let n = block.len() as f64;
    let mean = block.iter().sum::<f64>() / n;
    let var = block.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sigma = var.sqrt().max(sigma_floor);
    for v in block.iter_mut() {
        *v = (*v - mean) / sigma;
    }
}

/// Holistic descriptor: the image is resized to
/// `(grid_rows * patch) x (grid_cols * patch)`, each `patch x patch` block is
/// z-scored independently, and the blocks are concatenated row-major into a
/// `grid_rows * grid_cols * patch^2` vector.
///
/// Per-block z-scoring makes the descriptor invariant to global intensity
/// shifts and per-patch positive scaling.
pub fn holistic_patchnorm(
    image: &GrayImage,
    grid_rows: usize,
    grid_cols: usize,
    patch: usize,
) -> Result<Vec<f64>> {
    if grid_rows == 0 || grid_cols == 0 || patch == 0 {
        return Err(Error::Param("grid and patch sizes must be at least 1".into()));
    }
    if image.height() < patch || image.width() < patch {
        return Err(Error::Param(format!(
            "{}x{} image is smaller than the {patch}x{patch} patch",
            image.height(),
            image.width()
        )));
    }
    let resized = resize_bilinear(image, grid_rows * patch, grid_cols * patch)?;
    let mut descriptor = Vec::with_capacity(grid_rows * grid_cols * patch * patch);
    for block_row in 0..grid_rows {
        for block_col in 0..grid_cols {
            let mut block = Vec::with_capacity(patch * patch);
            for y in 0..patch {
                for x in 0..patch {
                    block.push(resized.get(block_row * patch + y, block_col * patch + x));
                }
            }
            zscore(&mut block, PATCH_SIGMA_FLOOR);
            descriptor.extend(block);
        }
    }
    Ok(descriptor)
}

/// [`holistic_patchnorm`] over a batch of images. Images are processed in
/// parallel; each output row depends only on its own image.
pub fn holistic_patchnorm_batch(
    images: &[GrayImage],
    grid_rows: usize,
    grid_cols: usize,
    patch: usize,
) -> Result<DescriptorMatrix> {
    let rows: Vec<Vec<f64>> = images
        .par_iter()
        .map(|img| holistic_patchnorm(img, grid_rows, grid_cols, patch))
        .collect::<Result<_>>()?;
    DescriptorMatrix::from_rows(&rows)
}

/// Local features sampled on a stride grid: each `patch x patch` block is
/// z-scored and flattened; when `d_out` is smaller than `patch^2` the vector
/// is reduced with a fixed seeded sign random projection. Coordinates are
/// `(x, y)` patch centers.
pub fn extract_local_grid(
    image: &GrayImage,
    stride: usize,
    patch: usize,
    d_out: usize,
) -> Result<LocalFeatureSet> {
    if stride == 0 || patch == 0 {
        return Err(Error::Param("stride and patch must be at least 1".into()));
    }
    if image.height() < patch || image.width() < patch {
        return Err(Error::Param(format!(
            "{}x{} image is smaller than the {patch}x{patch} patch",
            image.height(),
            image.width()
        )));
    }
    let raw_dim = patch * patch;
    let reduce = d_out >= 1 && d_out < raw_dim;
    let out_dim = if reduce { d_out } else { raw_dim };

    let mut vectors = Vec::new();
    let mut coords = Vec::new();
    let mut y = 0;
    while y + patch <= image.height() {
        let mut x = 0;
        while x + patch <= image.width() {
            let mut block = Vec::with_capacity(raw_dim);
            for py in 0..patch {
                for px in 0..patch {
                    block.push(image.get(y + py, x + px));
                }
            }
            zscore(&mut block, PATCH_SIGMA_FLOOR);
            coords.push(((x + patch / 2) as u32, (y + patch / 2) as u32));
            vectors.push(block);
            x += stride;
        }
        y += stride;
    }

    let flat: Vec<f64> = if reduce {
        let raw = DescriptorMatrix::from_rows(&vectors)?;
        random_projection(&raw, d_out, ProjectionKind::Sign, LOCAL_PROJECTION_SEED)?
            .values()
            .to_vec()
    } else {
        vectors.into_iter().flatten().collect()
    };
    LocalFeatureSet::new(out_dim, flat, coords)
}
