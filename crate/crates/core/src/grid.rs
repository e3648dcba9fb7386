//! Tensor grids over the rectangle and sampled scalar fields.

use std::io::Write;

use crate::error::Result;
use crate::lattice::{LatticeIndex, RectangleSpec};

/// Scalar samples on a tensor grid over the rectangle. Node (i, j) sits at
/// (xs[i], ys[j]); values are stored row-major in i (index `i * ys.len() + j`).
#[derive(Debug, Clone)]
pub struct GridField {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ys.len() + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// CSV dump with columns x,y,value (17 significant digits).
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "x,y,value")?;
        for (i, &x) in self.xs.iter().enumerate() {
            for (j, &y) in self.ys.iter().enumerate() {
                writeln!(w, "{},{},{}", fmt_g17(x), fmt_g17(y), fmt_g17(self.at(i, j)))?;
            }
        }
        Ok(())
    }

    /// Flat binary of 8-byte little-endian reals (row-major in x) plus a JSON
    /// sidecar carrying the grid shape and bounds.
    pub fn write_binary(&self, data: &mut impl Write, sidecar: &mut impl Write) -> Result<()> {
        for &v in &self.values {
            data.write_all(&v.to_le_bytes())?;
        }
        let side = serde_json::json!({
            "nx": self.nx(),
            "ny": self.ny(),
            "x_min": self.xs.first().copied().unwrap_or(0.0),
            "x_max": self.xs.last().copied().unwrap_or(0.0),
            "y_min": self.ys.first().copied().unwrap_or(0.0),
            "y_max": self.ys.last().copied().unwrap_or(0.0),
            "layout": "row-major-x",
            "dtype": "f64-le",
        });
        sidecar.write_all(serde_json::to_string_pretty(&side)?.as_bytes())?;
        Ok(())
    }
}

/// Uniform grid over R including the boundary, nx × ny nodes.
pub fn uniform_grid(rect: &RectangleSpec, nx: usize, ny: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(nx >= 2 && ny >= 2);
    let xs = (0..nx).map(|i| rect.width * i as f64 / (nx - 1) as f64).collect();
    let ys = (0..ny).map(|j| rect.height * j as f64 / (ny - 1) as f64).collect();
    (xs, ys)
}

/// Grid aligned with the nodal cells of u_{α0}: `k` intervals per cell in each
/// direction, so every unperturbed nodal line lands exactly on a grid node.
pub fn aligned_grid(rect: &RectangleSpec, alpha: &LatticeIndex, k: usize) -> (Vec<f64>, Vec<f64>) {
    uniform_grid(rect, alpha.n * k + 1, alpha.m * k + 1)
}

/// Grid with interior nodes offset from the nodal lines of u_{α0}: the
/// interval count per direction is n·k+1 (coprime to the cell count), so no
/// interior node can coincide with a nodal line.
pub fn offset_grid(rect: &RectangleSpec, alpha: &LatticeIndex, k: usize) -> (Vec<f64>, Vec<f64>) {
    uniform_grid(rect, alpha.n * k + 2, alpha.m * k + 2)
}

/// Format a float with 17 significant digits; round-trips exactly.
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}
