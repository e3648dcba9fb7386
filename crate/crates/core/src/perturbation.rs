//! First-order eigenfunction correction and the L∞ diagnostics attached to it:
//! how well u_{αq} − u_{α0} is explained by the correction sum, and how small
//! the perturbed eigenfunction stays near the former nodal-line intersections.

use crate::error::{Error, Result};
use crate::grid::uniform_grid;
use crate::lattice::{LatticeIndex, RectangleSpec};
use crate::nodal::frame_margins;
use crate::spectral::{evaluate_eigenfunction, Eigenpair, GalerkinSystem};

/// L∞ diagnostics for one matched index.
#[derive(Debug, Clone)]
pub struct CorrectionReport {
    pub index: LatticeIndex,
    /// L∞ of the correction sum over the grid.
    pub correction_linf: f64,
    /// L∞ of u_{αq} − u_{α0} − correction.
    pub residual_linf: f64,
    /// √a·|α|^(−15/16), the scale of the correction itself.
    pub bound_15_16: f64,
    /// √a·|α|^(−15/8), the scale of the remainder and of the corner values.
    pub bound_15_8: f64,
    /// max |u_{αq}| on boxes of half-widths (d₁, d₂) around each interior
    /// nodal-line intersection of u_{α0}.
    pub corner_max: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
}

/// Coefficient vector Σ_{β≠α} (q u_{α0}, u_{β0}) / (|α|² − |β|²) over the
/// system basis; zero at the α slot. Couplings are read off the assembled
/// matrix (its off-diagonal entries are exactly the couplings).
pub fn first_order_correction(sys: &GalerkinSystem, alpha: &LatticeIndex) -> Result<Vec<f64>> {
    let pos = sys.basis_position(alpha).ok_or_else(|| {
        Error::Domain(format!("index (n={}, m={}) not in the basis", alpha.n, alpha.m))
    })?;
    let mut out = vec![0.0; sys.dim()];
    for (j, beta) in sys.basis.iter().enumerate() {
        if j == pos {
            continue;
        }
        let denom = alpha.norm_sq - beta.norm_sq;
        if denom.abs() < 1e-9 {
            return Err(Error::DegenerateDenominator {
                n: alpha.n,
                m: alpha.m,
                bn: beta.n,
                bm: beta.m,
                gap: denom.abs(),
            });
        }
        out[j] = sys.entry(pos, j) / denom;
    }
    Ok(out)
}

/// Evaluate u_{αq}, u_{α0} and the correction on an `nx` × `ny` uniform grid
/// and collect the L∞ diagnostics. The grid must resolve the oscillation
/// (at least 8 samples per half-wave in each direction).
pub fn theorem1_report(
    rect: &RectangleSpec,
    pair: &Eigenpair,
    correction: &[f64],
    nx: usize,
    ny: usize,
) -> Result<CorrectionReport> {
    let alpha = pair.index;
    if nx < 8 * alpha.n + 1 || ny < 8 * alpha.m + 1 {
        return Err(Error::Domain(format!(
            "grid {nx}x{ny} under-samples index (n={}, m={}); need at least {}x{}",
            alpha.n,
            alpha.m,
            8 * alpha.n + 1,
            8 * alpha.m + 1
        )));
    }
    if correction.len() != pair.basis.len() {
        return Err(Error::Domain("correction and eigenpair use different bases".into()));
    }
    let (xs, ys) = uniform_grid(rect, nx, ny);
    let u_q = pair.evaluate_on(rect, &xs, &ys);
    let u_0 = pair.unperturbed_on(rect, &xs, &ys);
    let corr = evaluate_eigenfunction(rect, &pair.basis, correction, &xs, &ys);

    let mut correction_linf = 0.0f64;
    let mut residual_linf = 0.0f64;
    for k in 0..u_q.values.len() {
        correction_linf = correction_linf.max(corr.values[k].abs());
        residual_linf =
            residual_linf.max((u_q.values[k] - u_0.values[k] - corr.values[k]).abs());
    }

    // corner boxes around the interior nodal-line intersections of u_{α0}
    let (_, d1, d2) = frame_margins(rect, &alpha);
    let mut corner_max = 0.0f64;
    for ci in 1..alpha.n {
        for cj in 1..alpha.m {
            let cx = rect.width * ci as f64 / alpha.n as f64;
            let cy = rect.height * cj as f64 / alpha.m as f64;
            for (i, &x) in xs.iter().enumerate() {
                if (x - cx).abs() > d1 {
                    continue;
                }
                for (j, &y) in ys.iter().enumerate() {
                    if (y - cy).abs() <= d2 {
                        corner_max = corner_max.max(u_q.at(i, j).abs());
                    }
                }
            }
        }
    }

    let sqrt_a = rect.a.sqrt();
    Ok(CorrectionReport {
        index: alpha,
        correction_linf,
        residual_linf,
        bound_15_16: sqrt_a * alpha.norm().powf(-15.0 / 16.0),
        bound_15_8: sqrt_a * alpha.norm().powf(-15.0 / 8.0),
        corner_max,
        grid_nx: nx,
        grid_ny: ny,
    })
}
