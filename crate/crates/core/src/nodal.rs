//! Nodal geometry: ternary sign fields, nodal-domain labeling by flood fill,
//! the frame cells of the unperturbed mode with their shrunk and expanded
//! boxes, and construction of the approximate nodal domain.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::lattice::{LatticeIndex, RectangleSpec};

/// Ternary classification of grid samples: +1, −1, or 0 (|value| < zero_tol).
/// Rectangle-boundary nodes are forced to 0.
#[derive(Debug, Clone)]
pub struct SignField {
    pub field: GridField,
    pub signs: Vec<i8>,
    pub zero_tol: f64,
}

/// Default zero tolerance: values near former nodal-line intersections are
/// genuinely ambiguous; treating them as zeros keeps the domain conservative.
pub fn default_zero_tol(field: &GridField) -> f64 {
    1e-3 * field.max_abs()
}

pub fn sign_field(field: &GridField, zero_tol: f64) -> SignField {
    assert!(zero_tol >= 0.0);
    let (nx, ny) = (field.nx(), field.ny());
    let mut signs = vec![0i8; nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                continue; // boundary stays 0
            }
            let v = field.at(i, j);
            signs[i * ny + j] = if v.abs() < zero_tol || v == 0.0 {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            };
        }
    }
    SignField { field: field.clone(), signs, zero_tol }
}

/// Connected components of the nonzero sign set, 4-connectivity, labels in
/// row-major discovery order. Zeros carry no label.
#[derive(Debug, Clone)]
pub struct NodalDomains {
    /// Per-node label, usize::MAX for unlabeled (zero) nodes.
    pub labels: Vec<usize>,
    pub count: usize,
    /// Sign of each labeled component.
    pub component_signs: Vec<i8>,
}

pub fn nodal_domains(sf: &SignField) -> NodalDomains {
    let (nx, ny) = (sf.field.nx(), sf.field.ny());
    let mut labels = vec![usize::MAX; nx * ny];
    let mut component_signs = Vec::new();
    let mut stack = Vec::new();
    for start in 0..nx * ny {
        if sf.signs[start] == 0 || labels[start] != usize::MAX {
            continue;
        }
        let label = component_signs.len();
        let sign = sf.signs[start];
        component_signs.push(sign);
        labels[start] = label;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (i, j) = (idx / ny, idx % ny);
            let mut visit = |ii: usize, jj: usize, stack: &mut Vec<usize>| {
                let k = ii * ny + jj;
                if sf.signs[k] == sign && labels[k] == usize::MAX {
                    labels[k] = label;
                    stack.push(k);
                }
            };
            if i > 0 {
                visit(i - 1, j, &mut stack);
            }
            if i + 1 < nx {
                visit(i + 1, j, &mut stack);
            }
            if j > 0 {
                visit(i, j - 1, &mut stack);
            }
            if j + 1 < ny {
                visit(i, j + 1, &mut stack);
            }
        }
    }
    NodalDomains { labels, count: component_signs.len(), component_signs }
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Box2 {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Box2 {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn contains_strict(&self, x: f64, y: f64) -> bool {
        x > self.x0 && x < self.x1 && y > self.y0 && y < self.y1
    }
}

/// Margins of the frame construction: d = 1/(3.9·|α|^(15/16)), d₁ = d/(an),
/// d₂ = d/m.
pub fn frame_margins(rect: &RectangleSpec, alpha: &LatticeIndex) -> (f64, f64, f64) {
    let d = 1.0 / (3.9 * alpha.norm().powf(15.0 / 16.0));
    (d, d / (rect.a * alpha.n as f64), d / alpha.m as f64)
}

/// One nodal cell Ω₀ of u_{α0} with its shrunk box Ω₁ and expanded box Ω₂
/// (Ω₂ clipped to the rectangle).
#[derive(Debug, Clone)]
pub struct CellFrame {
    pub index: LatticeIndex,
    pub n1: usize,
    pub m1: usize,
    pub d: f64,
    pub d1: f64,
    pub d2: f64,
    pub omega0: Box2,
    pub omega1: Box2,
    pub omega2: Box2,
}

impl CellFrame {
    pub fn center(&self) -> (f64, f64) {
        (
            (self.omega0.x0 + self.omega0.x1) / 2.0,
            (self.omega0.y0 + self.omega0.y1) / 2.0,
        )
    }
}

/// All n·m frames of u_{α0}.
pub fn build_frames(rect: &RectangleSpec, alpha: &LatticeIndex) -> Result<Vec<CellFrame>> {
    let (d, d1, d2) = frame_margins(rect, alpha);
    let an = rect.a * alpha.n as f64;
    let half_x = PI / (2.0 * an);
    let half_y = PI / (2.0 * alpha.m as f64);
    if d1 >= half_x || d2 >= half_y {
        return Err(Error::MarginTooLarge { n: alpha.n, m: alpha.m, d1, d2 });
    }
    let mut frames = Vec::with_capacity(alpha.n * alpha.m);
    for n1 in 0..alpha.n {
        for m1 in 0..alpha.m {
            let cx = (n1 as f64 + 0.5) * PI / an;
            let cy = (m1 as f64 + 0.5) * PI / alpha.m as f64;
            let make = |hx: f64, hy: f64, clip: bool| {
                let mut b = Box2 { x0: cx - hx, x1: cx + hx, y0: cy - hy, y1: cy + hy };
                if clip {
                    b.x0 = b.x0.max(0.0);
                    b.y0 = b.y0.max(0.0);
                    b.x1 = b.x1.min(rect.width);
                    b.y1 = b.y1.min(rect.height);
                }
                b
            };
            frames.push(CellFrame {
                index: *alpha,
                n1,
                m1,
                d,
                d1,
                d2,
                omega0: make(half_x, half_y, false),
                omega1: make(half_x - d1, half_y - d2, false),
                omega2: make(half_x + d1, half_y + d2, true),
            });
        }
    }
    Ok(frames)
}

/// Grid-node mask of the approximate nodal domain Ω′.
#[derive(Debug, Clone)]
pub struct ApproxNodalDomain {
    pub frame: CellFrame,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub mask: Vec<bool>,
    pub component_sign: i8,
    pub area_cells: usize,
}

/// Flood-fill from the interior of Ω₁ through same-sign nodes restricted to
/// Ω₂. The sign of u_{αq} must be constant and nonzero on every grid node
/// strictly inside Ω₁ (violation means α is effectively exceptional for this
/// potential and the frame is discarded).
pub fn build_approx_domain(sf: &SignField, frame: &CellFrame) -> Result<ApproxNodalDomain> {
    let (nx, ny) = (sf.field.nx(), sf.field.ny());
    let xs = &sf.field.xs;
    let ys = &sf.field.ys;

    let mut seeds = Vec::new();
    let mut sign: i8 = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x <= frame.omega1.x0 || x >= frame.omega1.x1 {
            continue;
        }
        for (j, &y) in ys.iter().enumerate() {
            if y <= frame.omega1.y0 || y >= frame.omega1.y1 {
                continue;
            }
            let s = sf.signs[i * ny + j];
            if s == 0 {
                // below the zero threshold: ambiguous, neither seed nor
                // contradiction
                continue;
            }
            if sign != 0 && s != sign {
                return Err(Error::SignChangeInOmega1 { n1: frame.n1, m1: frame.m1 });
            }
            sign = s;
            seeds.push(i * ny + j);
        }
    }
    if seeds.is_empty() {
        return Err(Error::EmptyFrame { n1: frame.n1, m1: frame.m1 });
    }

    let mut mask = vec![false; nx * ny];
    let mut stack = Vec::new();
    for &s in &seeds {
        if !mask[s] {
            mask[s] = true;
            stack.push(s);
        }
    }
    while let Some(idx) = stack.pop() {
        let (i, j) = (idx / ny, idx % ny);
        let mut visit = |ii: usize, jj: usize, stack: &mut Vec<usize>| {
            let k = ii * ny + jj;
            if !mask[k] && sf.signs[k] == sign && frame.omega2.contains(xs[ii], ys[jj]) {
                mask[k] = true;
                stack.push(k);
            }
        };
        if i > 0 {
            visit(i - 1, j, &mut stack);
        }
        if i + 1 < nx {
            visit(i + 1, j, &mut stack);
        }
        if j > 0 {
            visit(i, j - 1, &mut stack);
        }
        if j + 1 < ny {
            visit(i, j + 1, &mut stack);
        }
    }

    let area_cells = mask.iter().filter(|&&b| b).count();
    Ok(ApproxNodalDomain {
        frame: frame.clone(),
        xs: xs.clone(),
        ys: ys.clone(),
        mask,
        component_sign: sign,
        area_cells,
    })
}

/// Run-length encoding of a boolean grid mask (row-major in x).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RleMask {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    /// (start, len) runs over the flattened row-major array.
    pub runs: Vec<(usize, usize)>,
}

impl RleMask {
    pub fn encode(mask: &[bool], nx: usize, ny: usize, hx: f64, hy: f64) -> Self {
        let mut runs = Vec::new();
        let mut k = 0;
        while k < mask.len() {
            if mask[k] {
                let start = k;
                while k < mask.len() && mask[k] {
                    k += 1;
                }
                runs.push((start, k - start));
            } else {
                k += 1;
            }
        }
        RleMask { nx, ny, hx, hy, runs }
    }

    pub fn decode(&self) -> Vec<bool> {
        let mut mask = vec![false; self.nx * self.ny];
        for &(start, len) in &self.runs {
            for b in mask.iter_mut().skip(start).take(len) {
                *b = true;
            }
        }
        mask
    }
}

impl ApproxNodalDomain {
    pub fn to_rle(&self) -> RleMask {
        let hx = self.xs[1] - self.xs[0];
        let hy = self.ys[1] - self.ys[0];
        RleMask::encode(&self.mask, self.xs.len(), self.ys.len(), hx, hy)
    }
}

/// Plain-text portable graymap (P2): 255 inside the mask, 0 outside. Written
/// with y as image rows, top row = largest y.
pub fn write_mask_pgm(mask: &[bool], nx: usize, ny: usize, w: &mut impl Write) -> Result<()> {
    writeln!(w, "P2")?;
    writeln!(w, "{nx} {ny}")?;
    writeln!(w, "255")?;
    for j in (0..ny).rev() {
        let row: Vec<&str> = (0..nx).map(|i| if mask[i * ny + j] { "255" } else { "0" }).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}
