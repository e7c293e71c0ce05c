use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use thiserror::Error;

use crate::grid::ImageGrid;
use crate::variance::{db_compress, VarianceError};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("image has {actual} pixels, grid has {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("image contains non-finite values")]
    NonFinite,
    #[error(transparent)]
    Range(#[from] VarianceError),
    #[error(transparent)]
    Encode(#[from] png::EncodingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 8-bit gray levels: the dB floor maps to 0 and 0 dB to 255.
pub fn gray_levels(values: &[f64], dynamic_range_db: f64) -> Result<Vec<u8>, RenderError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(RenderError::NonFinite);
    }
    let db = db_compress(values, dynamic_range_db)?;
    Ok(db
        .iter()
        .map(|d| (255.0 * (d + dynamic_range_db) / dynamic_range_db).round().clamp(0.0, 255.0) as u8)
        .collect())
}

/// PNG bytes for a grid image, one row per depth sample.
pub fn encode_png(values: &[f64], grid: &ImageGrid, dynamic_range_db: f64) -> Result<Vec<u8>, RenderError> {
    if values.len() != grid.len() {
        return Err(RenderError::LengthMismatch { expected: grid.len(), actual: values.len() });
    }
    let gray = gray_levels(values, dynamic_range_db)?;
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, grid.width_px() as u32, grid.depth_px() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header()?;
        w.write_image_data(&gray)?;
    }
    Ok(out)
}

pub fn render_png(values: &[f64], grid: &ImageGrid, dynamic_range_db: f64, path: impl AsRef<Path>) -> Result<(), RenderError> {
    let bytes = encode_png(values, grid, dynamic_range_db)?;
    let mut f = BufWriter::new(File::create(path)?);
    std::io::Write::write_all(&mut f, &bytes)?;
    Ok(())
}
