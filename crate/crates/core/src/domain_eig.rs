//! First Dirichlet eigenvalue of −Δ on a grid-masked domain: 5-point finite
//! differences with node-exclusion Dirichlet walls, inverse power iteration
//! with conjugate-gradient inner solves.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::pairwise_sum;

/// Symmetric positive-definite action v ↦ (−Δ_h + shift)·v on the masked
/// nodes, zero Dirichlet data on every node outside the mask.
pub struct MaskedLaplacian {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    /// Flat grid indices (i·ny + j) of the masked nodes, ascending.
    pub nodes: Vec<usize>,
    /// Flat index → compact index, usize::MAX outside the mask.
    node_of: Vec<usize>,
    /// Constant added to the operator (0 for the plain Laplacian).
    pub shift: f64,
}

impl MaskedLaplacian {
    pub fn new(mask: &[bool], nx: usize, ny: usize, hx: f64, hy: f64) -> Result<Self> {
        Self::with_shift(mask, nx, ny, hx, hy, 0.0)
    }

    pub fn with_shift(
        mask: &[bool],
        nx: usize,
        ny: usize,
        hx: f64,
        hy: f64,
        shift: f64,
    ) -> Result<Self> {
        assert_eq!(mask.len(), nx * ny);
        assert!(hx > 0.0 && hy > 0.0);
        let components = count_components(mask, nx, ny);
        if components != 1 {
            return Err(Error::NotConnected { components });
        }
        let nodes: Vec<usize> = (0..nx * ny).filter(|&k| mask[k]).collect();
        let mut node_of = vec![usize::MAX; nx * ny];
        for (c, &flat) in nodes.iter().enumerate() {
            node_of[flat] = c;
        }
        Ok(MaskedLaplacian { nx, ny, hx, hy, nodes, node_of, shift })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// out = (−Δ_h + shift)·v over the compact node vector. Each output
    /// element depends only on its own neighbors, so row parallelism cannot
    /// change the result.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let ix2 = 1.0 / (self.hx * self.hx);
        let iy2 = 1.0 / (self.hy * self.hy);
        let diag = 2.0 * ix2 + 2.0 * iy2 + self.shift;
        let ny = self.ny;
        out.par_iter_mut().zip(self.nodes.par_iter()).for_each(|(o, &flat)| {
            let (i, j) = (flat / ny, flat % ny);
            let mut acc = diag * v[self.node_of[flat]];
            let mut take = |k: usize, w: f64| {
                let c = self.node_of[k];
                if c != usize::MAX {
                    acc -= w * v[c];
                }
            };
            if i > 0 {
                take(flat - ny, ix2);
            }
            if i + 1 < self.nx {
                take(flat + ny, ix2);
            }
            if j > 0 {
                take(flat - 1, iy2);
            }
            if j + 1 < ny {
                take(flat + 1, iy2);
            }
            *o = acc;
        });
    }
}

fn count_components(mask: &[bool], nx: usize, ny: usize) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(flat) = stack.pop() {
            let (i, j) = (flat / ny, flat % ny);
            let mut visit = |k: usize, stack: &mut Vec<usize>| {
                if mask[k] && !seen[k] {
                    seen[k] = true;
                    stack.push(k);
                }
            };
            if i > 0 {
                visit(flat - ny, &mut stack);
            }
            if i + 1 < nx {
                visit(flat + ny, &mut stack);
            }
            if j > 0 {
                visit(flat - 1, &mut stack);
            }
            if j + 1 < ny {
                visit(flat + 1, &mut stack);
            }
        }
    }
    count
}

/// Deterministic dot product (pairwise reduction).
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&prods)
}

/// Conjugate gradient for the SPD masked operator, absolute residual target
/// (the right-hand sides here are unit vectors).
fn cg_solve(
    op: &MaskedLaplacian,
    b: &[f64],
    x0: Option<&[f64]>,
    tol_abs: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let (mut x, mut r) = match x0 {
        Some(g) => {
            let mut ag = vec![0.0; n];
            op.apply(g, &mut ag);
            let r: Vec<f64> = b.iter().zip(&ag).map(|(bi, agi)| bi - agi).collect();
            (g.to_vec(), r)
        }
        None => (vec![0.0; n], b.to_vec()),
    };
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rs = dot(&r, &r);
    if rs.sqrt() <= tol_abs {
        return Ok(x);
    }
    for _ in 0..max_iter {
        op.apply(&p, &mut ap);
        let alpha = rs / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rs_new = dot(&r, &r);
        if rs_new.sqrt() <= tol_abs {
            return Ok(x);
        }
        let beta = rs_new / rs;
        rs = rs_new;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }
    Err(Error::NonConvergence(format!(
        "conjugate gradient did not reach residual {tol_abs:e} in {max_iter} iterations"
    )))
}

#[derive(Debug, Clone)]
pub struct Lambda1Result {
    pub lambda1: f64,
    /// First eigenvector on the full grid (zeros outside the mask), unit L²
    /// over the nodes, positive.
    pub mode: Vec<f64>,
    pub iterations: usize,
}

pub const OUTER_CAP: usize = 200;

/// Smallest eigenvalue of the masked 5-point Laplacian by inverse power
/// iteration. Deterministic start vector (constant over the mask).
pub fn lambda1(
    mask: &[bool],
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    tol: f64,
) -> Result<Lambda1Result> {
    let op = MaskedLaplacian::new(mask, nx, ny, hx, hy)?;
    lambda1_op(&op, tol)
}

pub fn lambda1_op(op: &MaskedLaplacian, tol: f64) -> Result<Lambda1Result> {
    if tol <= 0.0 {
        return Err(Error::Domain("tol must be positive".into()));
    }
    let n = op.len();
    if n == 0 {
        return Err(Error::Domain("empty mask".into()));
    }
    let inner_cap = 10 * (n as f64).sqrt().ceil() as usize + 100;

    // start from the first mode of the bounding box of the nodes: for the
    // near-rectangular domains this solver sees, its overlap with the true
    // mode is already close to 1
    let (mut i0, mut i1, mut j0, mut j1) = (usize::MAX, 0usize, usize::MAX, 0usize);
    for &flat in &op.nodes {
        let (i, j) = (flat / op.ny, flat % op.ny);
        i0 = i0.min(i);
        i1 = i1.max(i);
        j0 = j0.min(j);
        j1 = j1.max(j);
    }
    let (px, py) = ((i1 - i0 + 1) as f64, (j1 - j0 + 1) as f64);
    let mut v: Vec<f64> = op
        .nodes
        .iter()
        .map(|&flat| {
            let (i, j) = (flat / op.ny, flat % op.ny);
            (std::f64::consts::PI * (i - i0 + 1) as f64 / (px + 1.0)).sin()
                * (std::f64::consts::PI * (j - j0 + 1) as f64 / (py + 1.0)).sin()
        })
        .collect();
    let norm0 = dot(&v, &v).sqrt();
    for x in v.iter_mut() {
        *x /= norm0;
    }
    let mut av = vec![0.0; n];
    op.apply(&v, &mut av);
    let mut rho = dot(&av, &v);
    // eigen-residual ‖Av − ρv‖, used to loosen the inner solves while the
    // iterate is still far from the eigenvector (inexact inverse iteration)
    let mut eigen_resid = {
        let r: Vec<f64> = av.iter().zip(&v).map(|(a, x)| a - rho * x).collect();
        dot(&r, &r).sqrt()
    };
    let mut guess = vec![0.0; n];
    for it in 1..=OUTER_CAP {
        // near convergence A·v ≈ ρ·v, so v/ρ is a strong warm start for A·w = v
        if rho != 0.0 {
            for k in 0..n {
                guess[k] = v[k] / rho;
            }
        }
        // the solve target w ≈ v/rho has norm ~1/rho, so scale the loose
        // phase of the inner tolerance accordingly
        let inner_tol =
            (tol / 10.0).max(eigen_resid / (100.0 * rho.abs().max(1.0))).min(0.1);
        let w = cg_solve(op, &v, (rho != 0.0).then_some(&guess[..]), inner_tol, inner_cap)?;
        let norm = dot(&w, &w).sqrt();
        for k in 0..n {
            v[k] = w[k] / norm;
        }
        op.apply(&v, &mut av);
        let rho_new = dot(&av, &v);
        let r: Vec<f64> = av.iter().zip(&v).map(|(a, x)| a - rho_new * x).collect();
        eigen_resid = dot(&r, &r).sqrt();
        // |rho − lambda| ≲ resid²/gap, so demand resid² ≤ tol·rho² on top of
        // Rayleigh-quotient stagnation
        let done = (rho_new - rho).abs() <= tol * rho_new.abs()
            && eigen_resid * eigen_resid <= tol * rho_new * rho_new;
        rho = rho_new;
        if done {
            if pairwise_sum(&v) < 0.0 {
                for x in v.iter_mut() {
                    *x = -*x;
                }
            }
            let mut mode = vec![0.0; op.nx * op.ny];
            for (c, &flat) in op.nodes.iter().enumerate() {
                mode[flat] = v[c];
            }
            return Ok(Lambda1Result { lambda1: rho, mode, iterations: it });
        }
    }
    Err(Error::NonConvergence(format!(
        "inverse iteration did not converge to tol {tol:e} in {OUTER_CAP} steps"
    )))
}

/// Closed-form smallest eigenvalue of the 5-point Laplacian on a full
/// rectangular mask of p × q interior nodes with spacings hx, hy:
/// (4/hx²)·sin²(π/(2(p+1))) + (4/hy²)·sin²(π/(2(q+1))).
pub fn discrete_rectangle_lambda1(p: usize, q: usize, hx: f64, hy: f64) -> f64 {
    let sx = (std::f64::consts::PI / (2.0 * (p as f64 + 1.0))).sin();
    let sy = (std::f64::consts::PI / (2.0 * (q as f64 + 1.0))).sin();
    4.0 / (hx * hx) * sx * sx + 4.0 / (hy * hy) * sy * sy
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Interior of a w × h rectangle sampled with (divx+1) × (divy+1) nodes.
    fn rect_mask(divx: usize, divy: usize) -> (Vec<bool>, usize, usize) {
        let (nx, ny) = (divx + 1, divy + 1);
        let mut mask = vec![false; nx * ny];
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                mask[i * ny + j] = true;
            }
        }
        (mask, nx, ny)
    }

    #[test]
    fn unit_square_matches_closed_form() {
        let h = PI / 64.0;
        let (mask, nx, ny) = rect_mask(64, 64);
        let res = lambda1(&mask, nx, ny, h, h, 1e-12).unwrap();
        let exact = discrete_rectangle_lambda1(63, 63, h, h);
        assert!((exact - 4.0 / (h * h) * 2.0 * (h / 2.0).sin().powi(2)).abs() < 1e-12);
        assert!(
            (res.lambda1 - exact).abs() <= 1e-10 * exact,
            "{} vs {}",
            res.lambda1,
            exact
        );
        assert!((res.lambda1 - 2.0).abs() < 1e-3); // continuum value 2
    }

    #[test]
    fn halving_h_quarters_the_continuum_error() {
        let lam = |div: usize| {
            let h = PI / div as f64;
            let (mask, nx, ny) = rect_mask(div, div);
            lambda1(&mask, nx, ny, h, h, 1e-12).unwrap().lambda1
        };
        let e1 = (lam(64) - 2.0).abs();
        let e2 = (lam(128) - 2.0).abs();
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn cell_eigenvalue_is_alpha_norm_sq() {
        // cell pi/(an) x pi/m for a = 2^(1/4), alpha = (2,3)
        let a = 2f64.powf(0.25);
        let (an, m) = (2.0 * a, 3.0);
        let (w, h) = (PI / an, PI / m);
        let div = 96;
        let (hx, hy) = (w / div as f64, h / div as f64);
        let (mask, nx, ny) = rect_mask(div, div);
        let res = lambda1(&mask, nx, ny, hx, hy, 1e-11).unwrap();
        let alpha_sq = an * an + m * m;
        assert!(
            (res.lambda1 - alpha_sq).abs() < 3e-3,
            "{} vs {}",
            res.lambda1,
            alpha_sq
        );
    }

    #[test]
    fn single_node() {
        let h = 0.1;
        let mut mask = vec![false; 9];
        mask[4] = true;
        let res = lambda1(&mask, 3, 3, h, h, 1e-12).unwrap();
        assert!((res.lambda1 - 4.0 / (h * h)).abs() < 1e-8);
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn domain_monotonicity() {
        let h = PI / 48.0;
        let (small, nx, ny) = rect_mask(48, 48);
        // shrink: interior of a sub-rectangle
        let mut smaller = vec![false; nx * ny];
        for i in 5..nx - 5 {
            for j in 8..ny - 8 {
                smaller[i * ny + j] = true;
            }
        }
        let l_small = lambda1(&smaller, nx, ny, h, h, 1e-10).unwrap().lambda1;
        let l_big = lambda1(&small, nx, ny, h, h, 1e-10).unwrap().lambda1;
        assert!(l_small > l_big);
    }

    #[test]
    fn operator_symmetric_and_positive() {
        let (mask, nx, ny) = rect_mask(17, 13);
        let op = MaskedLaplacian::new(&mask, nx, ny, 0.07, 0.05).unwrap();
        let n = op.len();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut av = vec![0.0; n];
            let mut aw = vec![0.0; n];
            op.apply(&v, &mut av);
            op.apply(&w, &mut aw);
            let s1 = dot(&av, &w);
            let s2 = dot(&v, &aw);
            assert!((s1 - s2).abs() <= 1e-12 * s1.abs().max(1.0));
            assert!(dot(&av, &v) > 0.0);
        }
    }

    #[test]
    fn disconnected_mask_rejected() {
        let mut mask = vec![false; 25];
        mask[6] = true;
        mask[18] = true;
        match MaskedLaplacian::new(&mask, 5, 5, 0.1, 0.1) {
            Err(Error::NotConnected { components: 2 }) => {}
            other => panic!("expected NotConnected, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn constant_shift_identity() {
        let (mask, nx, ny) = rect_mask(32, 32);
        let h = PI / 32.0;
        let c = 3.25;
        let base = lambda1(&mask, nx, ny, h, h, 1e-12).unwrap().lambda1;
        let op = MaskedLaplacian::with_shift(&mask, nx, ny, h, h, c).unwrap();
        let shifted = lambda1_op(&op, 1e-12).unwrap().lambda1;
        assert!((shifted - base - c).abs() < 1e-9, "{shifted} vs {base} + {c}");
    }

    #[test]
    fn mode_has_constant_sign() {
        let (mask, nx, ny) = rect_mask(40, 24);
        let res = lambda1(&mask, nx, ny, 0.05, 0.09, 1e-11).unwrap();
        for (k, &inside) in mask.iter().enumerate() {
            if inside {
                assert!(res.mode[k] > 0.0);
            } else {
                assert_eq!(res.mode[k], 0.0);
            }
        }
    }
}
