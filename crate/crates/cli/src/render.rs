use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Result;
use ndarray::Array2;
use num_complex::Complex64;
use tfr_core::grid::{AxisKind, ComplexGrid};

/// 8-bit grayscale raster, row 0 at the top.
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(self.pixels.len() + 32);
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.extend_from_slice(&self.pixels);
        fs::write(path, out)?;
        Ok(())
    }
}

/// Grid row shown at image row `y`: largest frequency or smallest scale on top.
fn source_row(kind: AxisKind, rows: usize, y: usize) -> usize {
    match kind {
        AxisKind::Frequency => rows - 1 - y,
        AxisKind::Scale => y,
    }
}

/// Log magnitude over `range_db` below the peak, then a gamma curve.
pub fn magnitude_image(grid: &ComplexGrid, range_db: f64, gamma: f64) -> Image {
    let v = grid.values();
    let peak = grid.max_abs();
    shade(
        grid,
        |z| {
            if peak <= 0.0 || z.norm() <= 0.0 {
                return 0.0;
            }
            let db = 20.0 * (z.norm() / peak).log10();
            ((db + range_db) / range_db).clamp(0.0, 1.0).powf(gamma)
        },
        v,
    )
}

/// Phase mapped from (−π, π] to [0, 1]; points more than `range_db` below
/// the peak are black.
pub fn phase_image(grid: &ComplexGrid, range_db: f64) -> Image {
    let v = grid.values();
    let peak = grid.max_abs();
    let floor = peak * 10f64.powf(-range_db / 20.0);
    shade(
        grid,
        |z| {
            if peak <= 0.0 || z.norm() < floor || z.norm() == 0.0 {
                return 0.0;
            }
            (z.arg() + std::f64::consts::PI) / (2.0 * std::f64::consts::PI)
        },
        v,
    )
}

fn shade(grid: &ComplexGrid, f: impl Fn(Complex64) -> f64, v: &Array2<Complex64>) -> Image {
    let (rows, cols) = v.dim();
    let mut pixels = Vec::with_capacity(rows * cols);
    for y in 0..rows {
        let r = source_row(grid.axis_kind(), rows, y);
        for c in 0..cols {
            pixels.push((f(v[[r, c]]) * 255.0).round() as u8);
        }
    }
    Image {
        width: cols,
        height: rows,
        pixels,
    }
}
