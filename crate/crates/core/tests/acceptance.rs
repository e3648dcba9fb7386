//! Acceptance suite: ten end-to-end criteria, one pass/fail line each.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::f64::consts::PI;
use std::process::Command;

use nodalinv::domain_eig::{discrete_rectangle_lambda1, lambda1};
use nodalinv::grid::offset_grid;
use nodalinv::lattice::{
    check_admissible, parse_real_expr, select_good_indices, GoodIndexCriteria, LatticeIndex,
    RectangleSpec, Verdict,
};
use nodalinv::nodal::{
    build_approx_domain, build_frames, default_zero_tol, nodal_domains, sign_field,
};
use nodalinv::perturbation::first_order_correction;
use nodalinv::potentials::{make_mean_zero_bump, mode_norm_const, CosineTerm, Potential};
use nodalinv::quad::simpson_1d;
use nodalinv::reconstruct::{probe_points, reconstruct_index, sweep, GridPolicy};
use nodalinv::spectral::{
    assemble, assemble_tensor, eigensolve, evaluate_eigenfunction, jacobi_eigen, match_eigenpair,
};

fn rect() -> RectangleSpec {
    RectangleSpec::new(2f64.powf(0.25)).unwrap()
}

/// The fixed compactly supported test potential: two opposite mollifier
/// bumps on the vertical midline.
fn bump(r: &RectangleSpec, amplitude: f64) -> Potential {
    make_mean_zero_bump(
        r,
        (r.width * 0.5, r.height * 0.3),
        (r.width * 0.5, r.height * 0.7),
        0.25,
        amplitude,
    )
    .unwrap()
}

fn passed(n: usize, what: &str) {
    println!("PASS criterion {n}: {what}");
}

#[test]
fn criterion_01_zero_potential_exactness() {
    let r = rect();
    let pot = Potential::Zero;
    let alpha = LatticeIndex::new(&r, 2, 3);
    let sys = assemble(&r, &pot, 2.0 * alpha.norm() + 0.5).unwrap();
    let decomp = eigensolve(&sys).unwrap();
    let pair = match_eigenpair(&sys, &decomp, &alpha).unwrap();
    // >= 128 nodes per frame side
    let policy = GridPolicy { k_min: 128, k_scale: 0.0, k_cap: 512, tol: 1e-9 };
    let (samples, skipped) = reconstruct_index(&r, &pot, &pair, &policy);
    assert!(skipped.is_empty(), "{skipped:?}");
    assert_eq!(samples.len(), 6);
    for s in &samples {
        assert!(s.q_hat.abs() <= 1e-2, "frame ({},{}) q_hat {}", s.n1, s.m1, s.q_hat);
    }
    passed(1, "q=0 gives |q_hat| <= 1e-2 on all 6 frames of alpha=(2,3)");
}

#[test]
fn criterion_02_discrete_rectangle_eigenvalue_oracle() {
    let run = |div: usize| {
        let (nx, ny) = (div + 1, div + 1);
        let mut mask = vec![false; nx * ny];
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                mask[i * ny + j] = true;
            }
        }
        let h = PI / div as f64;
        lambda1(&mask, nx, ny, h, h, 1e-12).unwrap().lambda1
    };
    let h = PI / 64.0;
    let exact = discrete_rectangle_lambda1(63, 63, h, h);
    assert!((exact - 4.0 / (h * h) * 2.0 * (h / 2.0).sin().powi(2)).abs() < 1e-12);
    let l64 = run(64);
    assert!((l64 - exact).abs() <= 1e-10 * exact, "{l64} vs {exact}");
    let ratio = (l64 - 2.0).abs() / (run(128) - 2.0).abs();
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    passed(2, "lambda1 matches the closed-form discrete value; error drops ~4x when h halves");
}

#[test]
fn criterion_03_separable_potential_oracle() {
    // q(x,y) = f(x) + g(y), f = 0.25 cos(2ax), g = 0.35 cos(3y)
    let r = rect();
    let (ef, eg) = (0.25, 0.35);
    let pot = Potential::CosineProduct {
        terms: vec![
            CosineTerm { amplitude: ef, jx: 2, ky: 0 },
            CosineTerm { amplitude: eg, jx: 0, ky: 3 },
        ],
    };
    let (nmax, mmax) = (4usize, 4usize);
    let sys = assemble_tensor(&r, &pot, nmax, mmax).unwrap();
    let d2 = eigensolve(&sys).unwrap();

    // independent 1D sine-Galerkin oracles
    let quad = 4096;
    let one_d = |dim: usize, len: f64, freq: f64, base: &dyn Fn(usize) -> f64, q: &dyn Fn(f64) -> f64| {
        let norm = 2.0 / len;
        let mut mat = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let (fi, fj) = (freq * (i + 1) as f64, freq * (j + 1) as f64);
                let v = norm * simpson_1d(|t| q(t) * (fi * t).sin() * (fj * t).sin(), len, quad);
                mat[i * dim + j] = v + if i == j { base(i + 1) } else { 0.0 };
            }
        }
        jacobi_eigen(&mat, dim).unwrap().values
    };
    let lx = one_d(nmax, r.width, r.a, &|n| (r.a * n as f64).powi(2), &|x| {
        ef * (2.0 * r.a * x).cos()
    });
    let ly = one_d(mmax, r.height, 1.0, &|m| (m as f64).powi(2), &|y| eg * (3.0 * y).cos());

    for &lam in &d2.values {
        let best = lx
            .iter()
            .flat_map(|&a| ly.iter().map(move |&b| (a + b - lam).abs()))
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 1e-8, "2D eigenvalue {lam} off tensor sums by {best}");
    }
    passed(3, "every 2D Galerkin eigenvalue is a sum of 1D eigenvalues to 1e-8");
}

#[test]
fn criterion_04_first_order_shift() {
    let r = rect();
    let alpha = LatticeIndex::new(&r, 1, 1);
    let resid = |eps: f64| {
        let pot = Potential::CosineProduct {
            terms: vec![CosineTerm { amplitude: eps, jx: 2, ky: 2 }],
        };
        let sys = assemble(&r, &pot, 10.0).unwrap();
        let d = eigensolve(&sys).unwrap();
        let pair = match_eigenpair(&sys, &d, &alpha).unwrap();
        (pair.lambda - alpha.norm_sq - eps / 4.0).abs()
    };
    let (r1, r2, r3) = (resid(4e-2), resid(2e-2), resid(1e-2));
    let q1 = r1 / r2;
    let q2 = r2 / r3;
    assert!((3.0..=5.0).contains(&q1), "ratio {q1}");
    assert!((3.0..=5.0).contains(&q2), "ratio {q2}");
    passed(4, "residual of lambda = |alpha|^2 + eps/4 shrinks 3-5x per eps halving");
}

#[test]
fn criterion_05_theorem1_correction_efficacy() {
    let r = rect();
    let pot = bump(&r, 0.2);
    let criteria = GoodIndexCriteria { max_norm: 12.0, ..Default::default() };
    let good = select_good_indices(&r, &criteria);
    assert!(!good.is_empty());
    let sys = assemble(&r, &pot, 24.0).unwrap();
    let decomp = eigensolve(&sys).unwrap();
    for g in &good {
        let alpha = g.index;
        let pair = match_eigenpair(&sys, &decomp, &alpha).unwrap();
        let corr = first_order_correction(&sys, &alpha).unwrap();
        let nx = (16 * alpha.n + 1).max(129);
        let ny = (16 * alpha.m + 1).max(129);
        let (xs, ys) = nodalinv::grid::uniform_grid(&r, nx, ny);
        let u_q = pair.evaluate_on(&r, &xs, &ys);
        let u_0 = pair.unperturbed_on(&r, &xs, &ys);
        let c = evaluate_eigenfunction(&r, &pair.basis, &corr, &xs, &ys);
        let mut diff = 0.0f64;
        let mut resid = 0.0f64;
        for k in 0..u_q.values.len() {
            let d = u_q.values[k] - u_0.values[k];
            diff = diff.max(d.abs());
            resid = resid.max((d - c.values[k]).abs());
        }
        assert!(
            resid <= 0.3 * diff,
            "(n={},m={}): residual {resid:e} vs 0.3*diff {:e}",
            alpha.n,
            alpha.m,
            0.3 * diff
        );
    }
    passed(5, "first-order correction explains >= 70% of u_q - u_0 for all good |alpha| <= 12");
}

#[test]
fn criterion_06_nodal_sandwich_invariant() {
    let r = rect();
    // component counts for 10 assorted indices on offset grids
    let indices =
        [(1, 1), (1, 2), (2, 1), (2, 3), (3, 2), (3, 3), (1, 5), (4, 1), (2, 5), (4, 4)];
    let c0 = mode_norm_const(&r);
    for &(n, m) in &indices {
        let alpha = LatticeIndex::new(&r, n, m);
        let (xs, ys) = offset_grid(&r, &alpha, 8);
        let an = r.a * n as f64;
        let values: Vec<f64> = xs
            .iter()
            .flat_map(|&x| {
                ys.iter().map(move |&y| c0 * (an * x).sin() * (m as f64 * y).sin())
            })
            .collect();
        let field = nodalinv::grid::GridField { xs, ys, values };
        let sf = sign_field(&field, default_zero_tol(&field));
        assert_eq!(nodal_domains(&sf).count, n * m, "(n={n},m={m})");
    }

    // sandwich + constant sign on perturbed eigenfunctions
    let pot = bump(&r, 0.2);
    for &(n, m) in &[(2, 3), (3, 2), (3, 3)] {
        let alpha = LatticeIndex::new(&r, n, m);
        let sys = assemble(&r, &pot, 2.0 * alpha.norm() + 1.0).unwrap();
        let decomp = eigensolve(&sys).unwrap();
        let pair = match_eigenpair(&sys, &decomp, &alpha).unwrap();
        let (xs, ys) = nodalinv::grid::aligned_grid(&r, &alpha, 48);
        let field = pair.evaluate_on(&r, &xs, &ys);
        let sf = sign_field(&field, default_zero_tol(&field));
        for frame in &build_frames(&r, &alpha).unwrap() {
            let dom = build_approx_domain(&sf, frame).unwrap();
            let ny = sf.field.ny();
            for (i, &x) in sf.field.xs.iter().enumerate() {
                for (j, &y) in sf.field.ys.iter().enumerate() {
                    let inside = dom.mask[i * ny + j];
                    if frame.omega1.contains_strict(x, y) {
                        assert!(inside, "omega1 node outside omega-prime");
                    }
                    if inside {
                        assert!(frame.omega2.contains(x, y), "mask outside omega2");
                        assert_eq!(sf.signs[i * ny + j], dom.component_sign, "mixed sign");
                    }
                }
            }
        }
    }
    passed(6, "omega1 within omega-prime within omega2, constant sign; component count = n*m");
}

#[test]
fn criterion_07_reconstruction_error_trend() {
    let r = rect();
    let pot = bump(&r, 0.2);
    let criteria = GoodIndexCriteria { max_norm: 14.0, ..Default::default() };
    let policy = GridPolicy::default();
    let probes = probe_points(&r, 8, None);
    let result = sweep(&r, &pot, &criteria, &policy, &probes).unwrap();
    let mut errs: Vec<(f64, f64)> = result
        .samples
        .iter()
        .filter(|s| s.norm >= 4.0)
        .map(|s| (s.norm, s.err_min_over_domain))
        .collect();
    assert!(errs.len() >= 30, "only {} samples", errs.len());
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let third = errs.len() / 3;
    let median = |v: &[(f64, f64)]| {
        let mut e: Vec<f64> = v.iter().map(|&(_, e)| e).collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e[e.len() / 2]
    };
    let bottom = median(&errs[..third]);
    let top = median(&errs[errs.len() - third..]);
    assert!(
        top <= bottom,
        "median err_min over top-third |alpha| = {top:e} > bottom-third {bottom:e}"
    );
    passed(7, "median err_min over top-third |alpha| <= bottom-third (|alpha| in [4,14])");
}

#[test]
fn criterion_08_diophantine_checker() {
    let rep = check_admissible(1.5, 1000).unwrap();
    assert!(matches!(rep.verdict, Verdict::ExactRational));

    let rep = check_admissible(2f64.sqrt(), 1_000_000).unwrap();
    assert!(matches!(rep.verdict, Verdict::Accepted), "{rep:?}");
    assert!(rep.worst_violation.is_none(), "{:?}", rep.worst_violation);

    let liou = parse_real_expr("liouville(5)").unwrap();
    let rep = check_admissible(liou, 1_000_000).unwrap();
    assert!(matches!(rep.verdict, Verdict::Rejected), "{rep:?}");
    passed(8, "3/2 exact-rational, sqrt(2) accepted with no violation, Liouville rejected");
}

#[test]
fn criterion_09_density_demonstration() {
    let r = rect();
    let pot = bump(&r, 0.2);
    let policy = GridPolicy::default();
    let probes = probe_points(&r, 24, None);
    let run = |max_norm: f64| {
        let criteria = GoodIndexCriteria { max_norm, ..Default::default() };
        sweep(&r, &pot, &criteria, &policy, &probes).unwrap().coverage
    };
    let (c8, c12, c16) = (run(8.0), run(12.0), run(16.0));
    assert!(
        c8.coverage_radius > c12.coverage_radius && c12.coverage_radius > c16.coverage_radius,
        "radii {} {} {}",
        c8.coverage_radius,
        c12.coverage_radius,
        c16.coverage_radius
    );
    assert!(
        c8.coverage_radius_sparse > c12.coverage_radius_sparse
            && c12.coverage_radius_sparse > c16.coverage_radius_sparse,
        "sparse radii {} {} {}",
        c8.coverage_radius_sparse,
        c12.coverage_radius_sparse,
        c16.coverage_radius_sparse
    );
    passed(9, "coverage radius strictly decreases for max_norm 8 -> 12 -> 16, full and sparse");
}

#[test]
fn criterion_10_determinism_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let pot_path = dir.path().join("bump.json");
    let r = rect();
    std::fs::write(&pot_path, serde_json::to_string(&bump(&r, 0.2)).unwrap()).unwrap();
    let cfg_path = dir.path().join("config.json");
    std::fs::write(
        &cfg_path,
        format!(
            r#"{{"a": {:.17}, "potential": "{}", "max_norm": 6.0, "tol": 1e-7, "probes": 8, "seed": 42}}"#,
            r.a,
            pot_path.display()
        ),
    )
    .unwrap();

    let mut outputs = Vec::new();
    for threads in ["1", "2", "8"] {
        let samples = dir.path().join(format!("samples_{threads}.csv"));
        let coverage = dir.path().join(format!("coverage_{threads}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_nodalinv"))
            .args([
                "--config",
                cfg_path.to_str().unwrap(),
                "--threads",
                threads,
                "sweep",
                "--out",
                samples.to_str().unwrap(),
                "--coverage-out",
                coverage.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push((std::fs::read(&samples).unwrap(), std::fs::read(&coverage).unwrap()));
    }
    assert!(!outputs[0].0.is_empty() && !outputs[0].1.is_empty());
    for o in &outputs[1..] {
        assert_eq!(o.0, outputs[0].0, "samples.csv differs across thread counts");
        assert_eq!(o.1, outputs[0].1, "coverage.json differs across thread counts");
    }
    passed(10, "identical CSV/JSON bytes across 1, 2, and 8 threads");
}
