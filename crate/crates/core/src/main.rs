//! Command-line front end: configuration, dispatch, and serialization.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;

use nodalinv::error::{Error, Result};
use nodalinv::grid::{fmt_g17, offset_grid, uniform_grid};
use nodalinv::lattice::{
    check_admissible, enumerate_inclusive, parse_real_expr, select_good_indices,
    GoodIndexCriteria, LatticeIndex, RectangleSpec,
};
use nodalinv::nodal::{
    build_approx_domain, build_frames, default_zero_tol, nodal_domains, sign_field,
    write_mask_pgm, RleMask,
};
use nodalinv::perturbation::{first_order_correction, theorem1_report};
use nodalinv::potentials::Potential;
use nodalinv::reconstruct::{
    probe_points, reconstruct_index, sweep, GridPolicy, ReconstructionSample, SkippedFrame,
};
use nodalinv::spectral::{assemble, eigensolve, match_eigenpair};

/// Experiment configuration; every field can also be set (and overridden) by
/// the matching CLI flag. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunConfig {
    a: Option<f64>,
    a_sq: Option<f64>,
    potential: Option<PathBuf>,
    cutoff: Option<f64>,
    max_den: Option<u64>,
    // good-index criteria
    min_gap_exponent: Option<f64>,
    gap_constant: Option<f64>,
    comparability_c: Option<f64>,
    max_norm: Option<f64>,
    // grid policy
    k_min: Option<usize>,
    k_scale: Option<f64>,
    k_cap: Option<usize>,
    tol: Option<f64>,
    // outputs and probes
    out: Option<PathBuf>,
    coverage_out: Option<PathBuf>,
    probes: Option<usize>,
    seed: Option<u64>,
}

#[derive(Parser)]
#[command(name = "nodalinv", version, about = "Inverse nodal problem pipeline on a rectangle")]
struct Cli {
    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker thread count (default: all cores). Outputs are identical for
    /// any value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Diophantine admissibility report for a².
    CheckA {
        /// a² as a number or expression ("1.5", "sqrt(2)", "liouville(5)").
        #[arg(long = "a-sq")]
        a_sq: Option<String>,
        #[arg(long = "max-den")]
        max_den: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate the eigenvalue lattice with nearest-neighbor gaps and the
    /// good-index flag.
    Lattice {
        #[arg(long)]
        a: Option<String>,
        #[arg(long = "max-norm")]
        max_norm: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble and solve the Galerkin system; report matched eigenpairs.
    Spectrum {
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        potential: Option<PathBuf>,
        #[arg(long)]
        cutoff: Option<f64>,
        /// Index to match, as "n,m"; repeatable.
        #[arg(long = "match")]
        matches: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First-order correction diagnostics, one CSV row per index.
    Perturb {
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        potential: Option<PathBuf>,
        /// "good" or a semicolon-separated list "n,m;n,m;…".
        #[arg(long, default_value = "good")]
        indices: String,
        #[arg(long)]
        cutoff: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nodal-domain count and per-frame Ω′ masks for one index.
    Nodal {
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        potential: Option<PathBuf>,
        /// Index as "n,m".
        #[arg(long)]
        index: String,
        /// Evaluation grid as "NxM" (default: per-index policy grid).
        #[arg(long)]
        grid: Option<String>,
        /// Directory for optional P2 graymap images of the masks.
        #[arg(long)]
        pgm: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First Dirichlet eigenvalue of a masked domain from an RLE mask file.
    Lambda1 {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        hx: Option<f64>,
        #[arg(long)]
        hy: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruction samples over all good indices and frames.
    Reconstruct {
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        potential: Option<PathBuf>,
        #[arg(long = "max-norm")]
        max_norm: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruction plus the coverage report.
    Sweep {
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        potential: Option<PathBuf>,
        #[arg(long = "max-norm")]
        max_norm: Option<f64>,
        #[arg(long)]
        probes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "coverage-out")]
        coverage_out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("warning: thread pool already initialized");
        }
    }
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn resolve_rect(flag: Option<&str>, cfg: &RunConfig) -> Result<RectangleSpec> {
    if cfg.a.is_some() && cfg.a_sq.is_some() {
        return Err(Error::Config("give exactly one of a, a_sq".into()));
    }
    let a = if let Some(s) = flag {
        parse_real_expr(s)?
    } else if let Some(a) = cfg.a {
        a
    } else if let Some(a_sq) = cfg.a_sq {
        if a_sq <= 0.0 {
            return Err(Error::Config("a_sq must be positive".into()));
        }
        a_sq.sqrt()
    } else {
        return Err(Error::Config("missing --a (or a/a_sq in the config)".into()));
    };
    RectangleSpec::new(a)
}

fn resolve_potential(flag: Option<&Path>, cfg: &RunConfig, rect: &RectangleSpec) -> Result<Potential> {
    let path = flag
        .or(cfg.potential.as_deref())
        .ok_or_else(|| Error::Config("missing --potential".into()))?;
    let text = fs::read_to_string(path)?;
    let pot: Potential = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    pot.validate(rect)?;
    Ok(pot)
}

fn resolve_criteria(max_norm_flag: Option<f64>, cfg: &RunConfig) -> Result<GoodIndexCriteria> {
    let d = GoodIndexCriteria::default();
    let c = GoodIndexCriteria {
        min_gap_exponent: cfg.min_gap_exponent.unwrap_or(d.min_gap_exponent),
        gap_constant: cfg.gap_constant.unwrap_or(d.gap_constant),
        comparability_c: cfg.comparability_c.unwrap_or(d.comparability_c),
        max_norm: max_norm_flag.or(cfg.max_norm).unwrap_or(d.max_norm),
    };
    c.validate()?;
    Ok(c)
}

fn resolve_policy(cfg: &RunConfig) -> GridPolicy {
    let d = GridPolicy::default();
    GridPolicy {
        k_min: cfg.k_min.unwrap_or(d.k_min),
        k_scale: cfg.k_scale.unwrap_or(d.k_scale),
        k_cap: cfg.k_cap.unwrap_or(d.k_cap),
        tol: cfg.tol.unwrap_or(d.tol),
    }
}

fn parse_index(s: &str, rect: &RectangleSpec) -> Result<LatticeIndex> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = || Error::Config(format!("bad index '{s}', expected n,m"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let n: usize = parts[0].trim().parse().map_err(|_| bad())?;
    let m: usize = parts[1].trim().parse().map_err(|_| bad())?;
    if n == 0 || m == 0 {
        return Err(bad());
    }
    Ok(LatticeIndex::new(rect, n, m))
}

fn write_out(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn sample_csv(samples: &[ReconstructionSample], skipped: &[SkippedFrame]) -> String {
    let mut csv =
        String::from("n,m,n1,m1,x,y,q_hat,q_true,err_at_point,err_min,bound,status\n");
    for s in samples {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},ok\n",
            s.n,
            s.m,
            s.n1,
            s.m1,
            fmt_g17(s.x),
            fmt_g17(s.y),
            fmt_g17(s.q_hat),
            fmt_g17(s.q_true_at_point),
            fmt_g17(s.err_at_point),
            fmt_g17(s.err_min_over_domain),
            fmt_g17(s.bound),
        ));
    }
    for k in skipped {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},,,,,,,,{}\n",
            k.n,
            k.m,
            opt(k.n1),
            opt(k.m1),
            k.reason
        ));
    }
    csv
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.cmd {
        Cmd::CheckA { a_sq, max_den, out } => {
            let a_sq = match (&a_sq, cfg.a_sq, cfg.a) {
                (Some(s), _, _) => parse_real_expr(s)?,
                (None, Some(v), _) => v,
                (None, None, Some(a)) => a * a,
                _ => return Err(Error::Config("missing --a-sq".into())),
            };
            let max_den = max_den.or(cfg.max_den).unwrap_or(1_000_000);
            let report = check_admissible(a_sq, max_den)?;
            let json = serde_json::to_string_pretty(&report)?;
            write_out(out.or(cfg.out).as_deref(), &(json + "\n"))
        }

        Cmd::Lattice { a, max_norm, out } => {
            let rect = resolve_rect(a.as_deref(), &cfg)?;
            let criteria = resolve_criteria(max_norm, &cfg)?;
            let pool = enumerate_inclusive(&rect, criteria.max_norm + 1.0);
            let good = select_good_indices(&rect, &criteria);
            let mut csv = String::from("n,m,norm_sq,gap,good\n");
            for idx in pool.iter().filter(|i| i.norm_sq <= criteria.max_norm * criteria.max_norm) {
                let gap = pool
                    .iter()
                    .filter(|b| (b.n, b.m) != (idx.n, idx.m))
                    .map(|b| (b.norm_sq - idx.norm_sq).abs())
                    .fold(f64::INFINITY, f64::min);
                let is_good = good.iter().any(|g| (g.index.n, g.index.m) == (idx.n, idx.m));
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    idx.n,
                    idx.m,
                    fmt_g17(idx.norm_sq),
                    fmt_g17(gap),
                    is_good as u8
                ));
            }
            write_out(out.or(cfg.out).as_deref(), &csv)
        }

        Cmd::Spectrum { a, potential, cutoff, matches, out } => {
            let rect = resolve_rect(a.as_deref(), &cfg)?;
            let pot = resolve_potential(potential.as_deref(), &cfg, &rect)?;
            let cutoff = cutoff
                .or(cfg.cutoff)
                .ok_or_else(|| Error::Config("missing --cutoff".into()))?;
            let sys = assemble(&rect, &pot, cutoff)?;
            let decomp = eigensolve(&sys)?;
            let mut matched = Vec::new();
            for s in &matches {
                let alpha = parse_index(s, &rect)?;
                let pair = match_eigenpair(&sys, &decomp, &alpha)?;
                matched.push(serde_json::json!({
                    "n": alpha.n,
                    "m": alpha.m,
                    "lambda": pair.lambda,
                    "gap": pair.lambda_gap,
                    "overlap": pair.overlap,
                }));
            }
            let json = serde_json::to_string_pretty(&serde_json::json!({
                "basis_size": sys.dim(),
                "cutoff": cutoff,
                "matched": matched,
            }))?;
            write_out(out.or(cfg.out).as_deref(), &(json + "\n"))
        }

        Cmd::Perturb { a, potential, indices, cutoff, out } => {
            let rect = resolve_rect(a.as_deref(), &cfg)?;
            let pot = resolve_potential(potential.as_deref(), &cfg, &rect)?;
            let cutoff = cutoff
                .or(cfg.cutoff)
                .ok_or_else(|| Error::Config("missing --cutoff".into()))?;
            let targets: Vec<LatticeIndex> = if indices == "good" {
                let criteria = resolve_criteria(Some(cutoff / 2.0), &cfg)?;
                select_good_indices(&rect, &criteria).into_iter().map(|g| g.index).collect()
            } else {
                indices
                    .split(';')
                    .map(|s| parse_index(s, &rect))
                    .collect::<Result<_>>()?
            };
            let sys = assemble(&rect, &pot, cutoff)?;
            let decomp = eigensolve(&sys)?;
            let mut csv = String::from(
                "n,m,norm,correction_linf,residual_linf,bound_15_16,bound_15_8,corner_max,grid_nx,grid_ny\n",
            );
            for alpha in &targets {
                let pair = match_eigenpair(&sys, &decomp, alpha)?;
                let corr = first_order_correction(&sys, alpha)?;
                let nx = (16 * alpha.n + 1).max(129);
                let ny = (16 * alpha.m + 1).max(129);
                let rep = theorem1_report(&rect, &pair, &corr, nx, ny)?;
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    alpha.n,
                    alpha.m,
                    fmt_g17(alpha.norm()),
                    fmt_g17(rep.correction_linf),
                    fmt_g17(rep.residual_linf),
                    fmt_g17(rep.bound_15_16),
                    fmt_g17(rep.bound_15_8),
                    fmt_g17(rep.corner_max),
                    rep.grid_nx,
                    rep.grid_ny
                ));
            }
            write_out(out.or(cfg.out).as_deref(), &csv)
        }

        Cmd::Nodal { a, potential, index, grid, pgm, out } => {
            let rect = resolve_rect(a.as_deref(), &cfg)?;
            let pot = resolve_potential(potential.as_deref(), &cfg, &rect)?;
            let alpha = parse_index(&index, &rect)?;
            let cutoff = cfg.cutoff.unwrap_or(2.5 * alpha.norm());
            let sys = assemble(&rect, &pot, cutoff)?;
            let decomp = eigensolve(&sys)?;
            let pair = match_eigenpair(&sys, &decomp, &alpha)?;
            let policy = resolve_policy(&cfg);

            // component count on an offset grid (no node on an unperturbed
            // nodal line), masks on the requested or aligned grid
            let (cxs, cys) = offset_grid(&rect, &alpha, policy.k_for(&alpha));
            let count_field = pair.evaluate_on(&rect, &cxs, &cys);
            let count_sf = sign_field(&count_field, default_zero_tol(&count_field));
            let component_count = nodal_domains(&count_sf).count;

            let (xs, ys) = match &grid {
                Some(s) => {
                    let (nx, ny) = parse_grid(s)?;
                    uniform_grid(&rect, nx, ny)
                }
                None => nodalinv::grid::aligned_grid(&rect, &alpha, policy.k_for(&alpha)),
            };
            let field = pair.evaluate_on(&rect, &xs, &ys);
            let sf = sign_field(&field, default_zero_tol(&field));
            let frames = build_frames(&rect, &alpha)?;
            let mut frame_json = Vec::new();
            for frame in &frames {
                match build_approx_domain(&sf, frame) {
                    Ok(dom) => {
                        if let Some(dir) = &pgm {
                            fs::create_dir_all(dir)?;
                            let name = dir.join(format!("omega_{}_{}.pgm", frame.n1, frame.m1));
                            let mut buf = Vec::new();
                            write_mask_pgm(&dom.mask, xs.len(), ys.len(), &mut buf)?;
                            fs::write(name, buf)?;
                        }
                        frame_json.push(serde_json::json!({
                            "n1": frame.n1,
                            "m1": frame.m1,
                            "status": "ok",
                            "sign": dom.component_sign,
                            "area_cells": dom.area_cells,
                            "mask": dom.to_rle(),
                        }));
                    }
                    Err(e) => frame_json.push(serde_json::json!({
                        "n1": frame.n1,
                        "m1": frame.m1,
                        "status": format!("{e}"),
                    })),
                }
            }
            let json = serde_json::to_string_pretty(&serde_json::json!({
                "n": alpha.n,
                "m": alpha.m,
                "component_count": component_count,
                "grid": {"nx": xs.len(), "ny": ys.len()},
                "frames": frame_json,
            }))?;
            write_out(out.or(cfg.out).as_deref(), &(json + "\n"))
        }

        Cmd::Lambda1 { mask, hx, hy, tol, out } => {
            let text = fs::read_to_string(&mask)?;
            let rle: RleMask = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", mask.display())))?;
            let bits = rle.decode();
            let hx = hx.unwrap_or(rle.hx);
            let hy = hy.unwrap_or(rle.hy);
            let tol = tol.or(cfg.tol).unwrap_or(1e-8);
            let res = nodalinv::domain_eig::lambda1(&bits, rle.nx, rle.ny, hx, hy, tol)?;
            let json = serde_json::to_string_pretty(&serde_json::json!({
                "lambda1": res.lambda1,
                "iterations": res.iterations,
            }))?;
            write_out(out.or(cfg.out).as_deref(), &(json + "\n"))
        }

        Cmd::Reconstruct { a, potential, max_norm, out } => {
            let rect = resolve_rect(a.as_deref(), &cfg)?;
            let pot = resolve_potential(potential.as_deref(), &cfg, &rect)?;
            let criteria = resolve_criteria(max_norm, &cfg)?;
            let policy = resolve_policy(&cfg);
            let good = select_good_indices(&rect, &criteria);
            let sys = assemble(&rect, &pot, 2.0 * criteria.max_norm)?;
            let decomp = eigensolve(&sys)?;
            let mut samples = Vec::new();
            let mut skipped = Vec::new();
            for g in &good {
                match match_eigenpair(&sys, &decomp, &g.index) {
                    Ok(pair) => {
                        let (s, k) = reconstruct_index(&rect, &pot, &pair, &policy);
                        samples.extend(s);
                        skipped.extend(k);
                    }
                    Err(e) => skipped.push(SkippedFrame {
                        n: g.index.n,
                        m: g.index.m,
                        n1: None,
                        m1: None,
                        reason: format!("{e}"),
                    }),
                }
            }
            write_out(out.or(cfg.out).as_deref(), &sample_csv(&samples, &skipped))
        }

        Cmd::Sweep { a, potential, max_norm, probes, seed, out, coverage_out } => {
            let rect = resolve_rect(a.as_deref(), &cfg)?;
            let pot = resolve_potential(potential.as_deref(), &cfg, &rect)?;
            let criteria = resolve_criteria(max_norm, &cfg)?;
            let policy = resolve_policy(&cfg);
            let p = probes.or(cfg.probes).unwrap_or(32);
            let pts = probe_points(&rect, p, seed.or(cfg.seed));
            let result = sweep(&rect, &pot, &criteria, &policy, &pts)?;
            write_out(
                out.or(cfg.out).as_deref(),
                &sample_csv(&result.samples, &result.coverage.skipped),
            )?;
            let json = serde_json::to_string_pretty(&result.coverage)?;
            match coverage_out.or(cfg.coverage_out) {
                Some(p) => fs::write(p, json + "\n")?,
                None => println!("{json}"),
            }
            Ok(())
        }
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("bad grid '{s}', expected NxM"));
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    if parts.len() != 2 {
        return Err(bad());
    }
    let nx: usize = parts[0].trim().parse().map_err(|_| bad())?;
    let ny: usize = parts[1].trim().parse().map_err(|_| bad())?;
    if nx < 2 || ny < 2 {
        return Err(bad());
    }
    Ok((nx, ny))
}
