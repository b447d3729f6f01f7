use std::path::Path;

use image::{GrayImage, Luma};

use super::{ConfusionMatrix, MetricsError};

const CELL: u32 = 40;

/// Grayscale rendering of the row-normalized matrix: black is 0, white is
/// 1. Unsupported rows are drawn as a checkerboard.
pub fn render_heatmap(matrix: &ConfusionMatrix, path: &Path) -> Result<(), MetricsError> {
    let n = matrix.counts.len() as u32;
    let mut img = GrayImage::new(n * CELL, n * CELL);
    for (i, row) in matrix.normalized.iter().enumerate() {
        for j in 0..n {
            for y in 0..CELL {
                for x in 0..CELL {
                    let v = match row {
                        Some(vals) => (vals[j as usize] * 255.0).round() as u8,
                        None => {
                            if (x / 5 + y / 5) % 2 == 0 {
                                96
                            } else {
                                160
                            }
                        }
                    };
                    // One-pixel grid lines between cells.
                    let v = if x == 0 || y == 0 { 128 } else { v };
                    img.put_pixel(j * CELL + x, i as u32 * CELL + y, Luma([v]));
                }
            }
        }
    }
    img.save(path).map_err(|e| MetricsError::Format(format!("{}: {e}", path.display())))
}
