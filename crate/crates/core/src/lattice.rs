//! Rectangle geometry, the eigenvalue lattice, Diophantine admissibility of
//! the side-ratio parameter, and selection of well-separated ("good") indices.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// The rectangle [0, π/a] × [0, π], a > 1.
#[derive(Debug, Clone, Copy)]
pub struct RectangleSpec {
    pub a: f64,
    pub width: f64,
    pub height: f64,
}

impl RectangleSpec {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 1.0) || !a.is_finite() {
            return Err(Error::Domain(format!("side ratio a must be > 1, got {a}")));
        }
        Ok(RectangleSpec { a, width: PI / a, height: PI })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width).contains(&x) && (0.0..=self.height).contains(&y)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Lattice index α = (an, m). `norm_sq` caches |α|² = a²n² + m², the
/// unperturbed eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeIndex {
    pub n: usize,
    pub m: usize,
    pub norm_sq: f64,
}

impl LatticeIndex {
    pub fn new(rect: &RectangleSpec, n: usize, m: usize) -> Self {
        assert!(n >= 1 && m >= 1, "lattice indices start at 1");
        let an = rect.a * n as f64;
        LatticeIndex { n, m, norm_sq: an * an + (m * m) as f64 }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }
}

/// All indices with |α| < r, ascending by |α|², ties broken by (n, m).
pub fn enumerate_indices(rect: &RectangleSpec, r: f64) -> Vec<LatticeIndex> {
    let mut out = Vec::new();
    if r <= 0.0 {
        return out;
    }
    let r_sq = r * r;
    let n_max = (r / rect.a).floor() as usize;
    for n in 1..=n_max {
        let an_sq = (rect.a * n as f64).powi(2);
        if an_sq >= r_sq {
            continue;
        }
        let m_max = (r_sq - an_sq).sqrt().floor() as usize + 1;
        for m in 1..=m_max {
            let idx = LatticeIndex::new(rect, n, m);
            if idx.norm_sq < r_sq {
                out.push(idx);
            }
        }
    }
    sort_indices(&mut out);
    out
}

fn sort_indices(v: &mut [LatticeIndex]) {
    v.sort_by(|a, b| {
        a.norm_sq
            .partial_cmp(&b.norm_sq)
            .unwrap()
            .then(a.n.cmp(&b.n))
            .then(a.m.cmp(&b.m))
    });
}

/// A convergent p/den of a² that breaks the badly-approximable inequality.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub p: i64,
    pub den: u64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Accepted,
    Rejected,
    ExactRational,
}

/// Falsification report for membership of a in the badly-approximable set.
#[derive(Debug, Clone, Serialize)]
pub struct DiophantineReport {
    pub a_sq: f64,
    pub max_denominator_scanned: u64,
    pub worst_violation: Option<Violation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_k: Option<f64>,
    pub verdict: Verdict,
}

/// Target exponent window: δ < 1/24.
pub const DELTA_MAX: f64 = 1.0 / 24.0;
/// A convergent with den ≥ 100 counts as a violation when its scaled constant
/// gap·den^(2+1/24) drops below this floor. Quadratic irrationals with small
/// discriminant sit near 0.3-0.6 on this scale; super-polynomial approximations
/// collapse by orders of magnitude.
const K_FLOOR: f64 = 0.2;
/// Gap below this (relative) at a convergent means the input is rational in
/// double precision.
const RATIONAL_FLOOR: f64 = 1e-14;

/// Scan the continued-fraction convergents of `a_sq` up to `max_denominator`
/// and look for evidence that a² is too well approximated by rationals.
///
/// This is a falsification test, not a proof of membership: verdicts are
/// `exact-rational` (a convergent hits a_sq to the double-precision floor),
/// `rejected` (two or more convergents with den ≥ 100 show a super-polynomial
/// approximation), or `accepted` with a fitted (δ, k) pair such that every
/// scanned convergent satisfies |a² − p/den| > k/den^(2+δ).
pub fn check_admissible(a_sq: f64, max_denominator: u64) -> Result<DiophantineReport> {
    if !(a_sq > 1.0) || !a_sq.is_finite() {
        return Err(Error::Domain(format!("a_sq must be > 1, got {a_sq}")));
    }
    if max_denominator < 2 {
        return Err(Error::Domain("max_denominator must be >= 2".into()));
    }

    // continued-fraction convergents of a_sq
    let mut convergents: Vec<(i64, u64, f64)> = Vec::new(); // (p, den, gap)
    let mut x = a_sq;
    let (mut p_prev, mut q_prev): (i128, i128) = (1, 0);
    let (mut p_cur, mut q_cur): (i128, i128) = (a_sq.floor() as i128, 1);
    let mut max_scanned = 1u64;
    loop {
        let den = q_cur as u64;
        if den > max_denominator {
            break;
        }
        max_scanned = max_scanned.max(den);
        let gap = (a_sq - p_cur as f64 / q_cur as f64).abs();
        convergents.push((p_cur as i64, den, gap));
        if gap <= RATIONAL_FLOOR * a_sq {
            break; // rational in double precision; CF terms below are noise
        }
        let frac = x - x.floor();
        if frac == 0.0 {
            break;
        }
        x = 1.0 / frac;
        let term = x.floor() as i128;
        let p_next = term * p_cur + p_prev;
        let q_next = term * q_cur + q_prev;
        if q_next > i64::MAX as i128 {
            break;
        }
        p_prev = p_cur;
        q_prev = q_cur;
        p_cur = p_next;
        q_cur = q_next;
    }

    // decision rule: >= 2 violations at den >= 100 reject; a double-precision
    // rational hit (checked after the violation count) is exact-rational
    let mut violations: Vec<Violation> = Vec::new();
    let mut rational_hit: Option<Violation> = None;
    for &(p, den, gap) in &convergents {
        if gap <= RATIONAL_FLOOR * a_sq {
            rational_hit = Some(Violation { p, den, gap });
            break;
        }
        if den >= 100 {
            let k_scaled = gap * (den as f64).powf(2.0 + DELTA_MAX);
            if k_scaled < K_FLOOR {
                violations.push(Violation { p, den, gap });
                if violations.len() >= 2 {
                    break;
                }
            }
        }
    }

    if violations.len() >= 2 {
        let worst = violations
            .iter()
            .min_by(|a, b| {
                let ka = a.gap * (a.den as f64).powf(2.0 + DELTA_MAX);
                let kb = b.gap * (b.den as f64).powf(2.0 + DELTA_MAX);
                ka.partial_cmp(&kb).unwrap()
            })
            .cloned();
        return Ok(DiophantineReport {
            a_sq,
            max_denominator_scanned: max_scanned,
            worst_violation: worst,
            fitted_delta: None,
            fitted_k: None,
            verdict: Verdict::Rejected,
        });
    }
    if let Some(hit) = rational_hit {
        return Ok(DiophantineReport {
            a_sq,
            max_denominator_scanned: max_scanned,
            worst_violation: Some(hit),
            fitted_delta: None,
            fitted_k: None,
            verdict: Verdict::ExactRational,
        });
    }

    // accepted: fit the empirical exponent by least squares of
    // -ln(gap) against ln(den) over convergents with den >= 10
    let pts: Vec<(f64, f64)> = convergents
        .iter()
        .filter(|&&(_, den, gap)| den >= 10 && gap > 0.0)
        .map(|&(_, den, gap)| ((den as f64).ln(), -gap.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    } else {
        2.0
    };
    let fitted_delta = (slope - 2.0).clamp(1e-6, DELTA_MAX * 0.999);
    let fitted_k = convergents
        .iter()
        .filter(|&&(_, _, gap)| gap > 0.0)
        .map(|&(_, den, gap)| gap * (den as f64).powf(2.0 + fitted_delta))
        .fold(f64::INFINITY, f64::min)
        * 0.999;

    Ok(DiophantineReport {
        a_sq,
        max_denominator_scanned: max_scanned,
        worst_violation: None,
        fitted_delta: Some(fitted_delta),
        fitted_k: Some(fitted_k),
        verdict: Verdict::Accepted,
    })
}

/// Tunable stand-in for the complement of the exceptional index set:
/// nearest-neighbor eigenvalue gap plus comparability of n and m.
#[derive(Debug, Clone, Copy)]
pub struct GoodIndexCriteria {
    pub min_gap_exponent: f64,
    pub gap_constant: f64,
    pub comparability_c: f64,
    pub max_norm: f64,
}

impl Default for GoodIndexCriteria {
    fn default() -> Self {
        GoodIndexCriteria {
            min_gap_exponent: -15.0 / 16.0,
            gap_constant: 2.0,
            comparability_c: 0.3,
            max_norm: 12.0,
        }
    }
}

impl GoodIndexCriteria {
    pub fn validate(&self) -> Result<()> {
        if !(self.comparability_c > 0.0 && self.comparability_c < 1.0) {
            return Err(Error::Domain("comparability_c must lie in (0,1)".into()));
        }
        if !(self.gap_constant > 0.0) {
            return Err(Error::Domain("gap_constant must be positive".into()));
        }
        if !(self.max_norm > 0.0) {
            return Err(Error::Domain("max_norm must be positive".into()));
        }
        Ok(())
    }
}

/// A selected index with its realized nearest-neighbor eigenvalue gap.
#[derive(Debug, Clone, Copy)]
pub struct GoodIndex {
    pub index: LatticeIndex,
    pub gap: f64,
}

/// Indices with |α| ≤ max_norm whose eigenvalue is at least
/// gap_constant·|α|^exponent away from every other eigenvalue with
/// |β| ≤ max_norm + 1, and whose aspect m/(an) lies in [c, 1/c].
pub fn select_good_indices(rect: &RectangleSpec, criteria: &GoodIndexCriteria) -> Vec<GoodIndex> {
    let pool = enumerate_inclusive(rect, criteria.max_norm + 1.0);
    let mut out = Vec::new();
    for idx in pool.iter().filter(|i| i.norm() <= criteria.max_norm) {
        let gap = pool
            .iter()
            .filter(|b| !(b.n == idx.n && b.m == idx.m))
            .map(|b| (b.norm_sq - idx.norm_sq).abs())
            .fold(f64::INFINITY, f64::min);
        let threshold = criteria.gap_constant * idx.norm().powf(criteria.min_gap_exponent);
        let aspect = idx.m as f64 / (rect.a * idx.n as f64);
        let comparable =
            aspect >= criteria.comparability_c && aspect <= 1.0 / criteria.comparability_c;
        if gap >= threshold && comparable {
            out.push(GoodIndex { index: *idx, gap });
        }
    }
    out
}

/// Like `enumerate_indices` but with |α| ≤ r inclusive.
pub fn enumerate_inclusive(rect: &RectangleSpec, r: f64) -> Vec<LatticeIndex> {
    let mut v = enumerate_indices(rect, r + 1e-12 * r.max(1.0));
    sort_indices(&mut v);
    v
}

/// Parse a real-valued CLI argument: a plain decimal, `sqrt(x)`, or
/// `liouville(n)` = 1 + Σ_{k=1..n} 10^(−k!).
pub fn parse_real_expr(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    if let Some(inner) = s.strip_prefix("sqrt(").and_then(|t| t.strip_suffix(')')) {
        let v: f64 = inner
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad sqrt argument: {inner}")))?;
        return Ok(v.sqrt());
    }
    if let Some(inner) = s.strip_prefix("liouville(").and_then(|t| t.strip_suffix(')')) {
        let n: u32 = inner
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad liouville argument: {inner}")))?;
        let mut v = 1.0;
        let mut fact = 1u64;
        for k in 1..=n as u64 {
            fact *= k;
            if fact > 300 {
                break; // 10^-300 underflows anyway
            }
            v += 10f64.powi(-(fact as i32));
        }
        return Ok(v);
    }
    Err(Error::Config(format!("cannot parse real expression: {s}")))
}
