//! Synthetic test potentials on the rectangle: mean-zero smooth functions
//! (compactly supported bump differences and trigonometric products), plus
//! quadrature of inner products against the sine basis modes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{LatticeIndex, RectangleSpec};
use crate::quad::{pairwise_sum, simpson_weights};

/// Normalization of the unperturbed modes u_{α0} = (2√a/π) sin(anx) sin(my).
pub fn mode_norm_const(rect: &RectangleSpec) -> f64 {
    2.0 * rect.a.sqrt() / PI
}

/// One term amplitude·cos(jx·a·x)·cos(ky·y); mean-zero over R when jx ≥ 1
/// or ky ≥ 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CosineTerm {
    pub amplitude: f64,
    pub jx: u32,
    pub ky: u32,
}

/// A potential q on R from the closed-form registry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Potential {
    Zero,
    CosineProduct { terms: Vec<CosineTerm> },
    BumpDifference {
        center_pos: (f64, f64),
        center_neg: (f64, f64),
        radius: f64,
        amplitude: f64,
    },
    GridSampled {
        nx: usize,
        ny: usize,
        width: f64,
        height: f64,
        values: Vec<f64>,
    },
}

fn mollifier(dx: f64, dy: f64, radius: f64) -> f64 {
    let r_sq = (dx * dx + dy * dy) / (radius * radius);
    if r_sq < 1.0 {
        (-1.0 / (1.0 - r_sq)).exp()
    } else {
        0.0
    }
}

impl Potential {
    /// q(x, y). Errors on points outside the rectangle.
    pub fn evaluate(&self, rect: &RectangleSpec, x: f64, y: f64) -> Result<f64> {
        if !rect.contains(x, y) {
            return Err(Error::Domain(format!("point ({x}, {y}) outside the rectangle")));
        }
        Ok(self.eval_unchecked(rect, x, y))
    }

    /// q(x, y) without the rectangle check; quadrature hot path.
    #[inline]
    pub fn eval_unchecked(&self, rect: &RectangleSpec, x: f64, y: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::CosineProduct { terms } => terms
                .iter()
                .map(|t| {
                    t.amplitude
                        * (t.jx as f64 * rect.a * x).cos()
                        * (t.ky as f64 * y).cos()
                })
                .sum(),
            Potential::BumpDifference { center_pos, center_neg, radius, amplitude } => {
                amplitude
                    * (mollifier(x - center_pos.0, y - center_pos.1, *radius)
                        - mollifier(x - center_neg.0, y - center_neg.1, *radius))
            }
            Potential::GridSampled { nx, ny, width, height, values } => {
                // bilinear interpolation on the stored uniform grid
                let fx = (x / width * (*nx as f64 - 1.0)).clamp(0.0, *nx as f64 - 1.0);
                let fy = (y / height * (*ny as f64 - 1.0)).clamp(0.0, *ny as f64 - 1.0);
                let i0 = (fx.floor() as usize).min(nx - 2);
                let j0 = (fy.floor() as usize).min(ny - 2);
                let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
                let v = |i: usize, j: usize| values[i * ny + j];
                v(i0, j0) * (1.0 - tx) * (1.0 - ty)
                    + v(i0 + 1, j0) * tx * (1.0 - ty)
                    + v(i0, j0 + 1) * (1.0 - tx) * ty
                    + v(i0 + 1, j0 + 1) * tx * ty
            }
        }
    }

    /// Structural validation: mean-zero terms, supports inside R.
    pub fn validate(&self, rect: &RectangleSpec) -> Result<()> {
        match self {
            Potential::Zero => Ok(()),
            Potential::CosineProduct { terms } => {
                for t in terms {
                    if t.jx == 0 && t.ky == 0 && t.amplitude != 0.0 {
                        return Err(Error::Domain(
                            "constant cosine term breaks the mean-zero requirement".into(),
                        ));
                    }
                }
                Ok(())
            }
            Potential::BumpDifference { center_pos, center_neg, radius, .. } => {
                check_bump_geometry(rect, *center_pos, *center_neg, *radius)
            }
            Potential::GridSampled { nx, ny, values, .. } => {
                if *nx < 2 || *ny < 2 || values.len() != nx * ny {
                    return Err(Error::Domain("grid-sampled potential has inconsistent shape".into()));
                }
                Ok(())
            }
        }
    }

    /// Closed-form (or cheaply bounded) sup norm.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::CosineProduct { terms } => terms.iter().map(|t| t.amplitude.abs()).sum(),
            Potential::BumpDifference { amplitude, .. } => amplitude.abs() * (-1.0f64).exp(),
            Potential::GridSampled { values, .. } => {
                values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
        }
    }

    /// Highest x-frequency present, in units of cos(j·a·x) waves.
    pub fn max_freq_x(&self, rect: &RectangleSpec) -> usize {
        match self {
            Potential::Zero => 0,
            Potential::CosineProduct { terms } => {
                terms.iter().map(|t| t.jx as usize).max().unwrap_or(0)
            }
            Potential::BumpDifference { radius, .. } => (rect.width / radius).ceil() as usize,
            Potential::GridSampled { nx, .. } => *nx / 2,
        }
    }

    /// Highest y-frequency present, in units of cos(k·y) waves.
    pub fn max_freq_y(&self, rect: &RectangleSpec) -> usize {
        match self {
            Potential::Zero => 0,
            Potential::CosineProduct { terms } => {
                terms.iter().map(|t| t.ky as usize).max().unwrap_or(0)
            }
            Potential::BumpDifference { radius, .. } => (rect.height / radius).ceil() as usize,
            Potential::GridSampled { ny, .. } => *ny / 2,
        }
    }

    /// Mean over R by tensor Simpson quadrature with `n` intervals per side.
    pub fn mean(&self, rect: &RectangleSpec, n: usize) -> f64 {
        let integral = crate::quad::simpson_2d(
            |x, y| self.eval_unchecked(rect, x, y),
            rect.width,
            rect.height,
            n,
            n,
        );
        integral / rect.area()
    }
}

fn check_bump_geometry(
    rect: &RectangleSpec,
    c_pos: (f64, f64),
    c_neg: (f64, f64),
    radius: f64,
) -> Result<()> {
    if !(radius > 0.0) {
        return Err(Error::Domain("bump radius must be positive".into()));
    }
    for (cx, cy) in [c_pos, c_neg] {
        let clearance = cx.min(rect.width - cx).min(cy).min(rect.height - cy);
        if clearance <= radius {
            return Err(Error::Domain(format!(
                "bump at ({cx}, {cy}) with radius {radius} is not strictly inside the rectangle"
            )));
        }
    }
    let dist = ((c_pos.0 - c_neg.0).powi(2) + (c_pos.1 - c_neg.1).powi(2)).sqrt();
    if dist <= 2.0 * radius {
        return Err(Error::Domain("bump supports overlap or touch".into()));
    }
    Ok(())
}

/// q = amplitude·(φ₊ − φ₋) with two identical translated mollifier bumps;
/// the integral over R vanishes analytically.
pub fn make_mean_zero_bump(
    rect: &RectangleSpec,
    center_pos: (f64, f64),
    center_neg: (f64, f64),
    radius: f64,
    amplitude: f64,
) -> Result<Potential> {
    check_bump_geometry(rect, center_pos, center_neg, radius)?;
    Ok(Potential::BumpDifference { center_pos, center_neg, radius, amplitude })
}

/// L² inner product ∫∫ q·u_{α0}·u_{β0} over R by tensor composite Simpson
/// with `nx` × `ny` intervals. Symmetric in (α, β).
pub fn coupling(
    pot: &Potential,
    rect: &RectangleSpec,
    alpha: &LatticeIndex,
    beta: &LatticeIndex,
    nx: usize,
    ny: usize,
) -> Result<f64> {
    check_resolution(pot, rect, alpha.n + beta.n, alpha.m + beta.m, nx, ny)?;
    // canonicalize the pair so the floating-point product order (and hence
    // the result) is bit-identical under argument swap
    let (alpha, beta) = if (alpha.n, alpha.m) <= (beta.n, beta.m) {
        (alpha, beta)
    } else {
        (beta, alpha)
    };
    let c = mode_norm_const(rect);
    let (an_a, an_b) = (rect.a * alpha.n as f64, rect.a * beta.n as f64);
    let (m_a, m_b) = (alpha.m as f64, beta.m as f64);
    let val = crate::quad::simpson_2d(
        |x, y| {
            pot.eval_unchecked(rect, x, y)
                * c
                * c
                * (an_a * x).sin()
                * (m_a * y).sin()
                * (an_b * x).sin()
                * (m_b * y).sin()
        },
        rect.width,
        rect.height,
        nx,
        ny,
    );
    Ok(val)
}

fn check_resolution(
    pot: &Potential,
    rect: &RectangleSpec,
    sum_n: usize,
    sum_m: usize,
    nx: usize,
    ny: usize,
) -> Result<()> {
    let need_x = 4 * (sum_n + pot.max_freq_x(rect));
    let need_y = 4 * (sum_m + pot.max_freq_y(rect));
    if nx < need_x || ny < need_y {
        return Err(Error::Precision(format!(
            "quadrature grid {nx}x{ny} under-resolves integrand; need at least {need_x}x{need_y}"
        )));
    }
    Ok(())
}

/// Cosine moments C(j,k) = ∫∫ q cos(j·a·x) cos(k·y) over R, computed once on
/// a shared Simpson grid. Every coupling is an exact linear combination of
/// four entries, which makes Galerkin assembly O(1) per matrix element.
#[derive(Debug, Clone)]
pub struct CosineTable {
    pub jmax: usize,
    pub kmax: usize,
    moments: Vec<f64>, // (jmax+1) x (kmax+1), row-major in j
    a: f64,
}

impl CosineTable {
    pub fn compute(
        pot: &Potential,
        rect: &RectangleSpec,
        jmax: usize,
        kmax: usize,
        nx: usize,
        ny: usize,
    ) -> Result<Self> {
        let need_x = 4 * (jmax + pot.max_freq_x(rect));
        let need_y = 4 * (kmax + pot.max_freq_y(rect));
        if nx < need_x || ny < need_y {
            return Err(Error::Precision(format!(
                "cosine table grid {nx}x{ny} under-resolves j<={jmax}, k<={kmax}; need {need_x}x{need_y}"
            )));
        }
        let hx = rect.width / nx as f64;
        let hy = rect.height / ny as f64;
        let wx = simpson_weights(nx, hx);
        let wy = simpson_weights(ny, hy);
        let ys: Vec<f64> = (0..=ny).map(|j| j as f64 * hy).collect();

        // partial transform P[i][k] = Σ_j wy[j] q(x_i, y_j) cos(k y_j)
        let partial: Vec<Vec<f64>> = (0..=nx)
            .into_par_iter()
            .map(|i| {
                let x = i as f64 * hx;
                let row: Vec<f64> = ys.iter().map(|&y| pot.eval_unchecked(rect, x, y)).collect();
                (0..=kmax)
                    .map(|k| {
                        let terms: Vec<f64> = row
                            .iter()
                            .zip(&ys)
                            .zip(&wy)
                            .map(|((&q, &y), &w)| w * q * (k as f64 * y).cos())
                            .collect();
                        pairwise_sum(&terms)
                    })
                    .collect()
            })
            .collect();

        let mut moments = vec![0.0; (jmax + 1) * (kmax + 1)];
        for j in 0..=jmax {
            for k in 0..=kmax {
                let terms: Vec<f64> = (0..=nx)
                    .map(|i| {
                        let x = i as f64 * hx;
                        wx[i] * partial[i][k] * (j as f64 * rect.a * x).cos()
                    })
                    .collect();
                moments[j * (kmax + 1) + k] = pairwise_sum(&terms);
            }
        }
        Ok(CosineTable { jmax, kmax, moments, a: rect.a })
    }

    #[inline]
    pub fn moment(&self, j: usize, k: usize) -> f64 {
        self.moments[j * (self.kmax + 1) + k]
    }

    /// coupling(q, α, β) from the table via the product-to-sum expansion.
    pub fn coupling(&self, alpha: &LatticeIndex, beta: &LatticeIndex) -> f64 {
        let dn = alpha.n.abs_diff(beta.n);
        let sn = alpha.n + beta.n;
        let dm = alpha.m.abs_diff(beta.m);
        let sm = alpha.m + beta.m;
        debug_assert!(sn <= self.jmax && sm <= self.kmax);
        (self.a / (PI * PI))
            * (self.moment(dn, dm) - self.moment(dn, sm) - self.moment(sn, dm)
                + self.moment(sn, sm))
    }
}
