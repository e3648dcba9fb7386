//! Forward solver: Galerkin discretization of −Δ+q in the sine basis,
//! dense symmetric eigensolve by cyclic Jacobi rotations, matching of the
//! perturbed eigenpair to each lattice index, and grid evaluation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::lattice::{enumerate_indices, LatticeIndex, RectangleSpec};
use crate::potentials::{mode_norm_const, CosineTable, Potential};

/// Default tensor quadrature intervals per direction for couplings.
pub const DEFAULT_QUAD: usize = 1024;
/// Basis size cap.
pub const BASIS_CAP: usize = 4000;

/// Discretized operator H[β,γ] = |β|²δ_{βγ} + (q u_{β0}, u_{γ0}).
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    pub rect: RectangleSpec,
    pub basis: Vec<LatticeIndex>,
    pub matrix: Vec<f64>, // dense symmetric, row-major, dim = basis.len()
    pub potential: Potential,
    pub cutoff: f64,
}

impl GalerkinSystem {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.basis.len() + j]
    }

    pub fn basis_position(&self, alpha: &LatticeIndex) -> Option<usize> {
        self.basis.iter().position(|b| b.n == alpha.n && b.m == alpha.m)
    }
}

/// Basis enumerated by |β| < B, couplings from the potential's cosine table.
pub fn assemble(rect: &RectangleSpec, pot: &Potential, cutoff: f64) -> Result<GalerkinSystem> {
    let basis = enumerate_indices(rect, cutoff);
    assemble_with_basis(rect, pot, basis, cutoff)
}

/// Rectangular tensor-product basis {1..nmax} × {1..mmax}; used when the
/// operator separates into x and y parts.
pub fn assemble_tensor(
    rect: &RectangleSpec,
    pot: &Potential,
    nmax: usize,
    mmax: usize,
) -> Result<GalerkinSystem> {
    let mut basis = Vec::with_capacity(nmax * mmax);
    for n in 1..=nmax {
        for m in 1..=mmax {
            basis.push(LatticeIndex::new(rect, n, m));
        }
    }
    let cutoff = basis.iter().map(|b| b.norm()).fold(0.0f64, f64::max);
    assemble_with_basis(rect, pot, basis, cutoff)
}

fn assemble_with_basis(
    rect: &RectangleSpec,
    pot: &Potential,
    basis: Vec<LatticeIndex>,
    cutoff: f64,
) -> Result<GalerkinSystem> {
    if basis.is_empty() {
        return Err(Error::Domain("empty Galerkin basis".into()));
    }
    if basis.len() > BASIS_CAP {
        return Err(Error::Resource(format!(
            "basis size {} exceeds cap {BASIS_CAP}",
            basis.len()
        )));
    }
    let dim = basis.len();
    let mut matrix = vec![0.0; dim * dim];

    if !matches!(pot, Potential::Zero) {
        let jmax = 2 * basis.iter().map(|b| b.n).max().unwrap();
        let kmax = 2 * basis.iter().map(|b| b.m).max().unwrap();
        let need_x = 4 * (jmax + pot.max_freq_x(rect));
        let need_y = 4 * (kmax + pot.max_freq_y(rect));
        let nq_x = round_up_even(DEFAULT_QUAD.max(need_x));
        let nq_y = round_up_even(DEFAULT_QUAD.max(need_y));
        let table = CosineTable::compute(pot, rect, jmax, kmax, nq_x, nq_y)?;
        // rows are independent; upper triangle computed, then mirrored
        matrix
            .par_chunks_mut(dim)
            .enumerate()
            .for_each(|(i, row)| {
                for j in i..dim {
                    row[j] = table.coupling(&basis[i], &basis[j]);
                }
            });
        for i in 0..dim {
            for j in 0..i {
                matrix[i * dim + j] = matrix[j * dim + i];
            }
        }
    }
    for (i, b) in basis.iter().enumerate() {
        matrix[i * dim + i] += b.norm_sq;
    }
    Ok(GalerkinSystem { rect: *rect, basis, matrix, potential: pot.clone(), cutoff })
}

fn round_up_even(n: usize) -> usize {
    if n % 2 == 0 { n } else { n + 1 }
}

/// Full spectral decomposition, eigenvalues ascending. `vectors` is
/// column-per-eigenvalue: component i of eigenvector k is `vectors[k][i]`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi with the threshold strategy of Numerical Recipes §11.1.
pub fn jacobi_eigen(mat: &[f64], dim: usize) -> Result<EigenDecomposition> {
    assert_eq!(mat.len(), dim * dim);
    const MAX_SWEEPS: usize = 60;
    let mut a = mat.to_vec();
    let mut v = vec![0.0; dim * dim];
    for i in 0..dim {
        v[i * dim + i] = 1.0;
    }
    let idx = |i: usize, j: usize| i * dim + j;

    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..dim {
            for q in (p + 1)..dim {
                off += a[idx(p, q)] * a[idx(p, q)];
            }
        }
        if off == 0.0 {
            break;
        }
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        if off.sqrt() <= 1e-15 * norm {
            break;
        }
        if sweep == MAX_SWEEPS - 1 {
            return Err(Error::NonConvergence(format!(
                "Jacobi did not converge in {MAX_SWEEPS} sweeps (off = {:e})",
                off.sqrt()
            )));
        }
        let threshold = if sweep < 3 { 0.2 * off / (dim * dim) as f64 } else { 0.0 };
        for p in 0..dim - 1 {
            for q in (p + 1)..dim {
                let apq = a[idx(p, q)];
                let g = 100.0 * apq.abs();
                // after a few sweeps, skip rotations whose off-element is
                // negligible next to both diagonal entries
                if sweep >= 4
                    && a[idx(p, p)].abs() + g == a[idx(p, p)].abs()
                    && a[idx(q, q)].abs() + g == a[idx(q, q)].abs()
                {
                    a[idx(p, q)] = 0.0;
                    a[idx(q, p)] = 0.0;
                    continue;
                }
                if apq * apq <= threshold {
                    continue;
                }
                let h = a[idx(q, q)] - a[idx(p, p)];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        t = -t;
                    }
                    t
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;
                a[idx(p, p)] -= h;
                a[idx(q, q)] += h;
                a[idx(p, q)] = 0.0;
                a[idx(q, p)] = 0.0;
                let rotate = |a: &mut [f64], i1: usize, j1: usize, i2: usize, j2: usize| {
                    let g = a[i1 * dim + j1];
                    let h = a[i2 * dim + j2];
                    a[i1 * dim + j1] = g - s * (h + g * tau);
                    a[i2 * dim + j2] = h + s * (g - h * tau);
                };
                for j in 0..p {
                    rotate(&mut a, j, p, j, q);
                }
                for j in (p + 1)..q {
                    rotate(&mut a, p, j, j, q);
                }
                for j in (q + 1)..dim {
                    rotate(&mut a, p, j, q, j);
                }
                for j in 0..dim {
                    rotate(&mut v, j, p, j, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| a[idx(i, i)].partial_cmp(&a[idx(j, j)]).unwrap());
    let values: Vec<f64> = order.iter().map(|&k| a[idx(k, k)]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| (0..dim).map(|i| v[idx(i, k)]).collect())
        .collect();
    Ok(EigenDecomposition { values, vectors })
}

/// Decompose the assembled system.
pub fn eigensolve(sys: &GalerkinSystem) -> Result<EigenDecomposition> {
    jacobi_eigen(&sys.matrix, sys.dim())
}

/// A perturbed eigenpair matched to lattice index α: eigenvalue λ_{αq},
/// Galerkin coefficients of u_{αq} (unit Euclidean norm, positive coefficient
/// on u_{α0}), and the retained overlap.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub index: LatticeIndex,
    pub lambda: f64,
    pub coeffs: Vec<f64>,
    pub overlap: f64,
    /// |λ_{αq} − |α|²|
    pub lambda_gap: f64,
    pub basis: Vec<LatticeIndex>,
}

/// Among eigenvectors carrying more than half their squared mass on the
/// α-coordinate, pick the one with the largest α-coefficient.
pub fn match_eigenpair(
    sys: &GalerkinSystem,
    decomposition: &EigenDecomposition,
    alpha: &LatticeIndex,
) -> Result<Eigenpair> {
    let pos = sys.basis_position(alpha).ok_or_else(|| {
        Error::Domain(format!("index (n={}, m={}) not in the basis", alpha.n, alpha.m))
    })?;
    if alpha.norm() > sys.cutoff / 2.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "index (n={}, m={}) violates the cutoff rule |alpha| <= B/2",
            alpha.n, alpha.m
        )));
    }
    let mut best: Option<(usize, f64)> = None;
    for (k, vec) in decomposition.vectors.iter().enumerate() {
        let c = vec[pos].abs();
        if best.map(|(_, b)| c > b).unwrap_or(true) {
            best = Some((k, c));
        }
    }
    let (k, c) = best.unwrap();
    // the margin keeps an exactly split two-level degeneracy (c = 1/sqrt 2,
    // c^2 = 1/2 up to rounding) on the rejected side
    if c * c <= 0.5 + 1e-12 {
        return Err(Error::NoDominantMode { n: alpha.n, m: alpha.m, best_overlap: c });
    }
    let mut coeffs = decomposition.vectors[k].clone();
    if coeffs[pos] < 0.0 {
        for x in coeffs.iter_mut() {
            *x = -*x;
        }
    }
    let lambda = decomposition.values[k];
    Ok(Eigenpair {
        index: *alpha,
        lambda,
        overlap: coeffs[pos],
        lambda_gap: (lambda - alpha.norm_sq).abs(),
        coeffs,
        basis: sys.basis.clone(),
    })
}

/// Evaluate Σ_β coeffs[β]·u_{β0} on the tensor grid (xs, ys). Samples on the
/// rectangle boundary are forced to exactly zero.
pub fn evaluate_eigenfunction(
    rect: &RectangleSpec,
    basis: &[LatticeIndex],
    coeffs: &[f64],
    xs: &[f64],
    ys: &[f64],
) -> GridField {
    assert_eq!(basis.len(), coeffs.len());
    let c0 = mode_norm_const(rect);
    let (nx, ny) = (xs.len(), ys.len());

    // group by n: u(x,y) = Σ_n sin(a n x) · T_n(y), T_n(y) = Σ_m c_{nm} sin(m y)
    let mut by_n: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
    for (b, &c) in basis.iter().zip(coeffs) {
        if c == 0.0 {
            continue;
        }
        match by_n.iter_mut().find(|(n, _)| *n == b.n) {
            Some((_, v)) => v.push((b.m, c)),
            None => by_n.push((b.n, vec![(b.m, c)])),
        }
    }
    by_n.sort_by_key(|(n, _)| *n);

    let t_rows: Vec<Vec<f64>> = by_n
        .iter()
        .map(|(_, terms)| {
            ys.iter()
                .map(|&y| terms.iter().map(|&(m, c)| c * (m as f64 * y).sin()).sum())
                .collect()
        })
        .collect();

    let values: Vec<f64> = (0..nx)
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = xs[i];
            let on_x_boundary = x == 0.0 || (x - rect.width).abs() < 1e-14;
            let sin_x: Vec<f64> =
                by_n.iter().map(|&(n, _)| (rect.a * n as f64 * x).sin()).collect();
            let t_rows = &t_rows;
            (0..ny).map(move |j| {
                let y = ys[j];
                if on_x_boundary || y == 0.0 || (y - rect.height).abs() < 1e-14 {
                    return 0.0;
                }
                let mut s = 0.0;
                for (sx, t) in sin_x.iter().zip(t_rows) {
                    s += sx * t[j];
                }
                c0 * s
            })
        })
        .collect();

    GridField { xs: xs.to_vec(), ys: ys.to_vec(), values }
}

impl Eigenpair {
    pub fn evaluate_on(&self, rect: &RectangleSpec, xs: &[f64], ys: &[f64]) -> GridField {
        evaluate_eigenfunction(rect, &self.basis, &self.coeffs, xs, ys)
    }

    /// The unperturbed mode u_{α0} on the same basis layout, carrying the
    /// sign of the pair's α-coefficient so that a global sign flip of the
    /// pair flips u_{α0} with it.
    pub fn unperturbed_on(&self, rect: &RectangleSpec, xs: &[f64], ys: &[f64]) -> GridField {
        let pos = self
            .basis
            .iter()
            .position(|b| b.n == self.index.n && b.m == self.index.m)
            .expect("matched index is in the basis");
        let mut e = vec![0.0; self.basis.len()];
        e[pos] = if self.coeffs[pos] < 0.0 { -1.0 } else { 1.0 };
        evaluate_eigenfunction(rect, &self.basis, &e, xs, ys)
    }
}
