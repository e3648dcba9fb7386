//! Composite Simpson quadrature on tensor grids, with pairwise summation
//! so results do not depend on accumulation order or thread count.

/// Pairwise (cascade) summation. Deterministic for a fixed slice regardless
/// of how callers parallelize around it, and accurate to O(log n) ulps.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    const CUTOFF: usize = 32;
    if v.len() <= CUTOFF {
        let mut s = 0.0;
        for &x in v {
            s += x;
        }
        return s;
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Composite Simpson weights for `n` intervals (`n` even) of width `h`.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2 && n % 2 == 0, "composite Simpson needs an even interval count");
    let mut w = vec![0.0; n + 1];
    w[0] = 1.0;
    w[n] = 1.0;
    for (i, wi) in w.iter_mut().enumerate().take(n).skip(1) {
        *wi = if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    for wi in &mut w {
        *wi *= h / 3.0;
    }
    w
}

/// ∫₀^len f(x) dx by composite Simpson with `n` intervals.
pub fn simpson_1d(f: impl Fn(f64) -> f64, len: f64, n: usize) -> f64 {
    let h = len / n as f64;
    let w = simpson_weights(n, h);
    let terms: Vec<f64> = w
        .iter()
        .enumerate()
        .map(|(i, &wi)| wi * f(i as f64 * h))
        .collect();
    pairwise_sum(&terms)
}

/// ∫∫ over [0,lx]×[0,ly] of f(x,y) by tensor-product composite Simpson,
/// `nx` × `ny` intervals. Rows are reduced first, then the row integrals,
/// both by pairwise summation.
pub fn simpson_2d(f: impl Fn(f64, f64) -> f64, lx: f64, ly: f64, nx: usize, ny: usize) -> f64 {
    let hx = lx / nx as f64;
    let hy = ly / ny as f64;
    let wx = simpson_weights(nx, hx);
    let wy = simpson_weights(ny, hy);
    let mut row = vec![0.0; ny + 1];
    let col: Vec<f64> = (0..=nx)
        .map(|i| {
            let x = i as f64 * hx;
            for (j, r) in row.iter_mut().enumerate() {
                *r = wy[j] * f(x, j as f64 * hy);
            }
            wx[i] * pairwise_sum(&row)
        })
        .collect();
    pairwise_sum(&col)
}
