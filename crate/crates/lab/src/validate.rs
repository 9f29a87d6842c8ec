//! A quick property suite over every module, run by `validate`.

use std::fmt::Write as _;

use anderson_core::bounds::{argmax_m, LowerConstants};
use anderson_core::events::{check_inclusions, estimate_event_probs, EventConfig};
use anderson_core::hnorm::{g_from_path, inner_product_bilinear, inner_product_quadrature, BilinearForm};
use anderson_core::moments::{combined_log_weights, estimate_moment, fit_exponents, sample_paths, FitMode, FitPoint};
use anderson_core::paths::sample_bm;
use anderson_core::rng::{Domain, StreamKey};
use anderson_core::{CovarianceKernel, InitialCondition, MomentConfig, QuadratureConfig, TimeGrid, Variant};
use nalgebra::DMatrix;

use crate::config::ExperimentConfig;
use crate::pool::Pool;
use crate::study::Outcome;

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

type CheckResult = anyhow::Result<(bool, String)>;
type CheckFn = fn(&Pool) -> CheckResult;

fn moment_cfg(kernel: CovarianceKernel, n: usize, samples: u64) -> MomentConfig {
    MomentConfig {
        n,
        t: 1.0,
        x: vec![0.0],
        kernel,
        h: 0.25,
        u0: InitialCondition::Constant(1.0),
        samples,
        steps: 32,
        seed: 11,
        variant: Variant::Skorohod,
        allow_large: false,
    }
}

fn constant_closed_form(pool: &Pool) -> CheckResult {
    let mut worst = 0.0f64;
    for (s2, n, t) in [(1.0, 2, 1.0), (0.5, 3, 0.5), (1.0, 4, 2.0)] {
        let cfg = MomentConfig { t, ..moment_cfg(CovarianceKernel::constant(s2)?, n, 8) };
        let e = estimate_moment(&cfg, pool)?;
        let exact = 0.5 * (n * (n - 1)) as f64 * s2 * t.powf(0.5);
        worst = worst.max((e.log_mean - exact).abs() + e.stderr_log);
    }
    Ok((worst <= 1e-10, format!("worst |error| + stderr = {worst:.1e}")))
}

fn first_moment_is_zero(pool: &Pool) -> CheckResult {
    let e = estimate_moment(&moment_cfg(CovarianceKernel::fbm(0.75)?, 1, 500), pool)?;
    Ok((e.log_mean == 0.0 && e.stderr_log == 0.0, format!("log_mean = {}", e.log_mean)))
}

fn gram_positive(_: &Pool) -> CheckResult {
    let kernel = CovarianceKernel::fbm(0.75)?;
    let grid = TimeGrid::new(1.0, 32)?;
    let form = BilinearForm::new(&kernel, 0.25, grid)?;
    let mut worst_eig = f64::INFINITY;
    let mut cs_ok = true;
    for s in 0..20 {
        let gs = sample_paths(grid, &[0.0], 21, s, 4)
            .iter()
            .map(|p| g_from_path(p, 1.0, &[0.0]))
            .collect::<Result<Vec<_>, _>>()?;
        let g = form.gram(&gs);
        let m = DMatrix::from_row_slice(4, 4, &g);
        let trace = m.trace();
        let eig = m.clone().symmetric_eigen().eigenvalues.min() / trace.max(f64::MIN_POSITIVE);
        worst_eig = worst_eig.min(eig);
        for i in 0..4 {
            for j in 0..4 {
                let lhs = g[i * 4 + j].powi(2);
                let rhs = g[i * 4 + i] * g[j * 4 + j];
                cs_ok &= m[(i, j)] == m[(j, i)] && lhs <= rhs * (1.0 + 1e-12);
            }
        }
    }
    Ok((cs_ok && worst_eig >= -1e-8, format!("min eigenvalue / trace = {worst_eig:.2e}")))
}

fn domination(_: &Pool) -> CheckResult {
    let kernel = CovarianceKernel::fbm(0.75)?;
    let grid = TimeGrid::new(1.0, 32)?;
    let u0 = InitialCondition::Constant(1.0);
    let mut bad = 0;
    for s in 0..2000 {
        let ps = sample_paths(grid, &[0.0], 5, s, 3);
        let w = combined_log_weights(&ps, &kernel, 0.25, &u0, &[0.0], 1.0)?;
        bad += usize::from(w.skorohod > w.stratonovich);
    }
    Ok((bad == 0, format!("{bad} of 2000 samples violate")))
}

fn quadrature_agrees(_: &Pool) -> CheckResult {
    let kernel = CovarianceKernel::fbm(0.75)?;
    let grid = TimeGrid::new(1.0, 64)?;
    let qc = QuadratureConfig {
        outer_nodes: 512,
        inner_nodes: 128,
        ..Default::default()
    };
    let mut worst = 0.0f64;
    for s in 0..3 {
        let p = sample_bm(grid, &[0.0], StreamKey::new(13, Domain::BrownianPath, s));
        let g = g_from_path(&p, 1.0, &[0.0])?;
        let exact = inner_product_bilinear(&g, &g, &kernel, 0.25)?;
        let q = inner_product_quadrature(&p, &p, &kernel, 0.25, &qc)?.value;
        worst = worst.max((q - exact).abs() / exact.abs());
    }
    Ok((worst <= 1e-2, format!("worst relative gap = {worst:.2e}")))
}

fn worked_example(_: &Pool) -> CheckResult {
    let lc = LowerConstants::from_raw(1.0, 0.0, 16.0, 0.5, 0.25, 0.1);
    let a = argmax_m(4, 1.0, &lc)?;
    Ok((a.m0 == 0.125 && a.f_direct == 1.0, format!("M0 = {}, f(M0) = {}", a.m0, a.f_direct)))
}

fn fit_exact(_: &Pool) -> CheckResult {
    let pts: Vec<FitPoint> = (2..8)
        .map(|n| FitPoint {
            abscissa: n as f64,
            log_mean: 3.0 * (n as f64).powi(3),
            stderr_log: 0.0,
        })
        .collect();
    let s = fit_exponents(&pts, FitMode::N)?.fit.slope;
    Ok(((s - 3.0).abs() <= 1e-9, format!("slope = {s}")))
}

fn thread_determinism(_: &Pool) -> CheckResult {
    let cfg = moment_cfg(CovarianceKernel::fbm(0.75)?, 3, 3000);
    let one = estimate_moment(&cfg, &Pool::new(1)?)?;
    let many = estimate_moment(&cfg, &Pool::new(4)?)?;
    Ok((one == many, format!("1 thread {} / 4 threads {}", one.log_mean, many.log_mean)))
}

fn config_round_trip(_: &Pool) -> CheckResult {
    let c = ExperimentConfig {
        h: 0.1 + 0.2,
        t: vec![1.0 / 3.0, 2.0f64.sqrt()],
        c_eps: Some(std::f64::consts::PI),
        ..Default::default()
    };
    let back = ExperimentConfig::from_json(&c.to_json())?;
    Ok((back == c && back.digest() == c.digest(), "JSON round trip".into()))
}

fn events_small(pool: &Pool) -> CheckResult {
    let ec = EventConfig {
        t: 1.0,
        m: 2.0,
        x_j: 0.5,
        eps: 0.25,
        samples: 2000,
        steps: 64,
        c_eps: 1.0,
    };
    let p = estimate_event_probs(&ec, 5.0, 3, pool)?;
    let floors_ok = p.p[0].p_hat >= p.floors[0] - 3.0 * p.p[0].stderr && p.p[1].p_hat >= p.floors[1] - 3.0 * p.p[1].stderr;
    let inc = check_inclusions(&ec, 5.0, 3, 2000, 16.0, pool)?;
    Ok((
        floors_ok && inc.violations() == 0,
        format!("P(A1) = {}, P(A2) = {}, {} inclusion violations", p.p[0].p_hat, p.p[1].p_hat, inc.violations()),
    ))
}

pub fn checks(pool: &Pool) -> Vec<Check> {
    let list: [(&'static str, CheckFn); 10] = [
        ("constant-kernel closed form", constant_closed_form),
        ("first moment of u0 = 1", first_moment_is_zero),
        ("Gram symmetry, PSD, Cauchy-Schwarz", gram_positive),
        ("Skorohod <= Stratonovich pathwise", domination),
        ("bilinear vs quadrature", quadrature_agrees),
        ("bounds worked example", worked_example),
        ("fit of exact power law", fit_exact),
        ("thread-count determinism", thread_determinism),
        ("config JSON round trip", config_round_trip),
        ("event floors and inclusions", events_small),
    ];
    list.iter()
        .map(|&(name, f)| match f(pool) {
            Ok((pass, detail)) => Check { name, pass, detail },
            Err(e) => Check {
                name,
                pass: false,
                detail: format!("error: {e:#}"),
            },
        })
        .collect()
}

pub fn run_suite(pool: &Pool) -> Outcome {
    let cs = checks(pool);
    let mut report = String::new();
    for c in &cs {
        let _ = writeln!(report, "{} {:<38} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Outcome {
        ok: cs.iter().all(|c| c.pass),
        report,
        ..Default::default()
    }
}
