//! The studies behind each subcommand.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use anderson_core::bounds::{argmax_m, classify_region, exponent_pair, lower_bound_log, BoundConstants, LowerConstants};
use anderson_core::events::{check_inclusions, estimate_event_probs, estimate_gj, measure_c_eps, EventConfig};
use anderson_core::hnorm::{g_from_path, BilinearForm};
use anderson_core::moments::{estimate_both, estimate_moment, sample_paths, fit_exponents, FitMode, FitPoint, FkConfig, FkSimulator};
use anderson_core::stats::MeanAccumulator;
use anderson_core::{BlockExecutor, Error, MomentConfig, MomentEstimate, TimeGrid, Variant};
use anyhow::{bail, Context};

use crate::config::{Command, ExperimentConfig, FitAxis, VariantName};
use crate::io::{append_rows, join_point, read_rows, write_gram_dump, write_path_dump, EventRow, MomentRow, SolutionRow};
use crate::pool::Pool;
use crate::validate;

/// What a study produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    /// Human-readable report for stdout.
    pub report: String,
    pub warnings: Vec<String>,
    /// False when a check the study performs did not pass.
    pub ok: bool,
}

pub fn run(cfg: &ExperimentConfig, pool: &Pool) -> anyhow::Result<Outcome> {
    match cfg.subcommand {
        Command::Moments => moments(cfg, pool),
        Command::Solution => solution(cfg, pool),
        Command::Events => events(cfg, pool),
        Command::Bounds => bounds(cfg, pool),
        Command::Validate => Ok(validate::run_suite(pool)),
        Command::Fit => fit(cfg),
    }
}

fn moment_config(cfg: &ExperimentConfig, n: usize, t: f64, variant: Variant) -> anyhow::Result<MomentConfig> {
    Ok(MomentConfig {
        n,
        t,
        x: cfg.point()?,
        kernel: cfg.kernel()?,
        h: cfg.h,
        u0: cfg.u0.build()?,
        samples: cfg.samples,
        steps: cfg.steps,
        seed: cfg.seed,
        variant,
        allow_large: cfg.allow_large,
    })
}

fn variants(cfg: &ExperimentConfig) -> Vec<Variant> {
    let mut v: Vec<Variant> = cfg.variant.iter().map(|&v| v.into()).collect();
    v.dedup();
    if v.is_empty() {
        v.push(Variant::Skorohod);
    }
    v
}

/// Moment estimates for every `(t, n, variant)` in the config. Different
/// `n` at the same `t` share their random numbers.
pub fn moment_estimates(cfg: &ExperimentConfig, pool: &Pool) -> anyhow::Result<Vec<(MomentEstimate, f64)>> {
    let vs = variants(cfg);
    let both = vs.contains(&Variant::Skorohod) && vs.contains(&Variant::Stratonovich);
    let mut out = Vec::new();
    for &t in &cfg.t {
        for &n in &cfg.n {
            let start = Instant::now();
            if both {
                let (s, st) = estimate_both(&moment_config(cfg, n, t, Variant::Skorohod)?, pool)?;
                let wall = start.elapsed().as_secs_f64();
                out.push((s, wall));
                out.push((st, wall));
            } else {
                let e = estimate_moment(&moment_config(cfg, n, t, vs[0])?, pool)?;
                out.push((e, start.elapsed().as_secs_f64()));
            }
        }
    }
    Ok(out)
}

fn moments(cfg: &ExperimentConfig, pool: &Pool) -> anyhow::Result<Outcome> {
    if cfg.n.is_empty() || cfg.t.is_empty() {
        return Err(Error::domain("need at least one n and one t").into());
    }
    let kernel = cfg.kernel()?;
    let run_id = cfg.run_id();
    let mut rows = Vec::new();
    let mut out = Outcome { ok: true, ..Default::default() };
    for (e, wall) in moment_estimates(cfg, pool)? {
        if e.flagged > 0 {
            out.warnings.push(format!("n = {}, t = {}: {} non-finite weights excluded", e.n, e.t, e.flagged));
        }
        rows.push(MomentRow {
            run_id: run_id.clone(),
            variant: e.variant.name().to_string(),
            kernel: kernel.name(),
            h: cfg.h,
            alpha: kernel.alpha,
            n: e.n,
            t: e.t,
            x: join_point(&e.x),
            steps: e.steps,
            samples: e.samples,
            seed: e.seed,
            log_moment: e.log_mean,
            stderr_log: e.stderr_log,
            wall_time_s: wall,
        });
    }
    let path = cfg.output.join("moments.csv");
    append_rows(&path, &rows)?;
    out.outputs.push(path);
    writeln!(out.report, "{:<13} {:>3} {:>8} {:>22} {:>12}", "variant", "n", "t", "log E[u^n]", "stderr")?;
    for r in &rows {
        writeln!(out.report, "{:<13} {:>3} {:>8} {:>22} {:>12.3e}", r.variant, r.n, r.t, r.log_moment, r.stderr_log)?;
    }
    if cfg.dump_paths > 0 || cfg.dump_gram > 0 {
        out.outputs.extend(dumps(cfg)?);
    }
    Ok(out)
}

/// Paths and Gram matrices of the first samples at the first `(n, t)`.
fn dumps(cfg: &ExperimentConfig) -> anyhow::Result<Vec<PathBuf>> {
    let (n, t) = (cfg.n[0], cfg.t[0]);
    let x = cfg.point()?;
    let kernel = cfg.kernel()?;
    let grid = TimeGrid::new(t, cfg.steps)?;
    let count = cfg.dump_paths.max(cfg.dump_gram);
    let sets: Vec<_> = (0..count).map(|s| sample_paths(grid, &x, cfg.seed, s, n)).collect();
    let mut written = Vec::new();
    fs_dir(cfg)?;
    if cfg.dump_paths > 0 {
        let flat: Vec<(u64, &anderson_core::PathSample)> = sets
            .iter()
            .take(cfg.dump_paths as usize)
            .enumerate()
            .flat_map(|(s, ps)| ps.iter().enumerate().map(move |(i, p)| ((s * n + i) as u64, p)))
            .collect();
        let p = cfg.output.join("paths.csv");
        write_path_dump(&p, &flat)?;
        written.push(p);
    }
    if cfg.dump_gram > 0 {
        let form = BilinearForm::new(&kernel, cfg.h, grid)?;
        let mut grams = Vec::new();
        for (s, ps) in sets.iter().take(cfg.dump_gram as usize).enumerate() {
            let gs = ps.iter().map(|p| g_from_path(p, t, &x)).collect::<Result<Vec<_>, _>>()?;
            grams.push((s as u64, form.gram(&gs)));
        }
        let p = cfg.output.join("gram.csv");
        write_gram_dump(&p, &grams, n)?;
        written.push(p);
    }
    Ok(written)
}

fn fs_dir(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    std::fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))
}

pub fn fk_config(cfg: &ExperimentConfig) -> anyhow::Result<FkConfig> {
    let t = *cfg.t.first().context("need a time")?;
    let x = cfg.point()?;
    if x.len() != 1 {
        return Err(Error::domain("the solution sampler is one-dimensional").into());
    }
    if cfg.z_nodes < 2 || cfg.z_half_width.is_nan() || cfg.z_half_width <= 0.0 {
        return Err(Error::domain("need z_nodes >= 2 and a positive z_half_width").into());
    }
    let w = cfg.z_half_width * t.sqrt();
    let m = cfg.z_nodes;
    let z_grid = (0..m).map(|i| x[0] - w + 2.0 * w * i as f64 / (m - 1) as f64).collect();
    Ok(FkConfig {
        t,
        x: x[0],
        kernel: cfg.kernel()?,
        h: cfg.h,
        u0: cfg.u0.build()?,
        z_grid,
        steps: cfg.steps,
        inner_samples: cfg.inner_samples,
        seed: cfg.seed,
    })
}

fn solution(cfg: &ExperimentConfig, pool: &Pool) -> anyhow::Result<Outcome> {
    let fk = fk_config(cfg)?;
    let sim = FkSimulator::new(&fk)?;
    let run_id = cfg.run_id();
    let draws: Vec<_> = pool
        .map_blocks(cfg.draws, |r| r.map(|w| (w, sim.draw(w))).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect();
    let (mut first, mut second) = (MeanAccumulator::default(), MeanAccumulator::default());
    let mut clamped = 0;
    let rows: Vec<SolutionRow> = draws
        .iter()
        .map(|&(w, d)| {
            first.push(d.value);
            second.push(d.value * d.value);
            clamped += d.out_of_range;
            SolutionRow {
                run_id: run_id.clone(),
                t: fk.t,
                x: fk.x,
                steps: fk.steps,
                draw: w,
                value: d.value,
                log_value: d.log_value,
                out_of_range: d.out_of_range,
            }
        })
        .collect();
    let path = cfg.output.join("solution.csv");
    append_rows(&path, &rows)?;
    let mut out = Outcome {
        ok: true,
        outputs: vec![path],
        warnings: sim.warnings.clone(),
        ..Default::default()
    };
    if clamped > 0 {
        out.warnings.push(format!("{clamped} inner paths left the spatial grid"));
    }
    writeln!(out.report, "draws      {}", cfg.draws)?;
    writeln!(out.report, "E[u]       {} ± {}", first.mean(), first.stderr())?;
    writeln!(out.report, "E[u^2]     {} ± {}", second.mean(), second.stderr())?;
    Ok(out)
}

fn event_config(cfg: &ExperimentConfig, steps: usize, c_eps: f64) -> anyhow::Result<EventConfig> {
    Ok(EventConfig {
        t: *cfg.t.first().context("need a time")?,
        m: cfg.m,
        x_j: cfg.x_j,
        eps: cfg.eps,
        samples: cfg.samples,
        steps,
        c_eps,
    })
}

/// `C_ε` from the config or measured on the event grid.
pub fn c_eps_for(cfg: &ExperimentConfig, t: f64, pool: &Pool) -> anyhow::Result<f64> {
    match cfg.c_eps {
        Some(c) => Ok(c),
        None => Ok(measure_c_eps(t, cfg.eps, cfg.steps, cfg.c_eps_samples, cfg.seed, pool)?.c_eps),
    }
}

const EVENT_NAMES: [&str; 4] = ["A1", "A2", "A3", "A4"];

/// Floor rows for one grid and every pinning value.
pub fn floor_rows(ec: &EventConfig, rs: &[f64], seed: u64, pool: &Pool) -> anyhow::Result<Vec<EventRow>> {
    let mut rows = Vec::new();
    for &r in rs {
        let p = estimate_event_probs(ec, r, seed, pool)?;
        let row = |event: &str, p_hat: f64, stderr: f64, floor: f64| EventRow {
            event: event.to_string(),
            t: ec.t,
            m: ec.m,
            x_j: ec.x_j,
            eps: ec.eps,
            r: Some(r),
            steps: ec.steps,
            samples: ec.samples,
            p_hat,
            stderr,
            paper_floor: Some(floor),
            pass: p_hat >= floor - 3.0 * stderr,
        };
        for (i, name) in EVENT_NAMES.iter().enumerate() {
            rows.push(row(name, p.p[i].p_hat, p.p[i].stderr, p.floors[i]));
        }
        rows.push(row("A_all", p.p_all.p_hat, p.p_all.stderr, p.floor_all));
    }
    Ok(rows)
}

fn events(cfg: &ExperimentConfig, pool: &Pool) -> anyhow::Result<Outcome> {
    let t = *cfg.t.first().context("need a time")?;
    let c_eps = c_eps_for(cfg, t, pool)?;
    let ec = event_config(cfg, cfg.steps, c_eps)?;
    ec.validate()?;
    let rs = cfg.r_values();
    let mut out = Outcome { ok: true, ..Default::default() };
    let mut rows = floor_rows(&ec, &rs, cfg.seed, pool)?;

    for &r in &rs {
        match check_inclusions(&ec, r, cfg.seed, cfg.samples, 16.0, pool) {
            Ok(rep) => rows.push(EventRow {
                event: "inclusions".into(),
                p_hat: rep.violations() as f64 / rep.samples as f64,
                stderr: 0.0,
                paper_floor: None,
                pass: rep.violations() == 0,
                ..rows[0].clone_at(r)
            }),
            Err(Error::SideConditions(msg)) => out.warnings.push(format!("inclusions skipped: {msg}")),
            Err(e) => return Err(e.into()),
        }
    }

    let gj_cfg = EventConfig {
        samples: cfg.gj_samples.unwrap_or(cfg.samples),
        ..ec
    };
    let g = estimate_gj(&gj_cfg, cfg.seed, cfg.r_nodes, pool)?;
    let comb = (g.direct.stderr.powi(2) + g.pinned.stderr.powi(2)).sqrt();
    let identity = (g.direct.p_hat - g.pinned.p_hat).abs() <= 3.0 * comb;
    for (name, f) in [("G_direct", g.direct), ("G_pinned", g.pinned), ("G_pinned_positive", g.pinned_positive)] {
        rows.push(EventRow {
            event: name.into(),
            r: None,
            samples: gj_cfg.samples,
            p_hat: f.p_hat,
            stderr: f.stderr,
            paper_floor: None,
            pass: name == "G_pinned_positive" || identity,
            ..rows[0].clone_at(0.0)
        });
    }

    if cfg.grid_check {
        let fine = EventConfig { steps: 2 * cfg.steps, ..ec };
        let fine_rows = floor_rows(&fine, &rs, cfg.seed, pool)?;
        let coarse: Vec<_> = rows.iter().filter(|r| r.paper_floor.is_some()).collect();
        let stable = coarse.iter().zip(&fine_rows).all(|(a, b)| a.pass == b.pass);
        if !stable {
            out.warnings.push("floor verdicts differ between K and 2K".into());
            out.ok = false;
        }
        rows.extend(fine_rows);
    }

    out.ok &= rows.iter().all(|r| r.pass);
    let path = cfg.output.join("events.csv");
    append_rows(&path, &rows)?;
    out.outputs.push(path);
    writeln!(out.report, "C_eps = {c_eps}")?;
    writeln!(out.report, "{:<18} {:>6} {:>5} {:>10} {:>10} {:>10} pass", "event", "r", "K", "p_hat", "stderr", "floor")?;
    for r in &rows {
        writeln!(
            out.report,
            "{:<18} {:>6} {:>5} {:>10.6} {:>10.3e} {:>10} {}",
            r.event,
            r.r.map_or("-".into(), |v| format!("{v}")),
            r.steps,
            r.p_hat,
            r.stderr,
            r.paper_floor.map_or("-".into(), |v| format!("{v:.6}")),
            r.pass
        )?;
    }
    Ok(out)
}

impl EventRow {
    fn clone_at(&self, r: f64) -> EventRow {
        EventRow { r: Some(r), ..self.clone() }
    }
}

/// The constants behind the `bounds` table: raw `(c1, c2)` when both are
/// given, otherwise derived from the kernel metadata.
pub fn lower_constants(cfg: &ExperimentConfig, c_eps: f64) -> anyhow::Result<LowerConstants> {
    let alpha = match cfg.alpha {
        Some(a) => a,
        None => cfg.kernel()?.alpha,
    };
    let d = cfg.dim();
    let bc = |kc1: f64, kc2: f64, q00: f64| BoundConstants {
        h: cfg.h,
        alpha,
        beta: cfg.beta.unwrap_or(alpha),
        d,
        kernel_c1: kc1,
        kernel_c2: kc2,
        q00,
        c_h: cfg.c_h,
        eps: cfg.eps,
        c_eps,
    };
    if let (Some(c1), Some(c2)) = (cfg.c1, cfg.c2) {
        let c_1eps = bc(1.0, 1.0, 0.0).c_1eps();
        return Ok(LowerConstants::from_raw(c1, c2, 16.0 * d as f64, alpha, cfg.h, c_1eps));
    }
    if cfg.c1.is_some() != cfg.c2.is_some() {
        bail!("give both c1 and c2, or neither");
    }
    let k = cfg.kernel()?;
    Ok(bc(cfg.kernel_c1.unwrap_or(k.c1), cfg.kernel_c2.unwrap_or(k.c2), k.q00()).lower()?)
}

fn bounds(cfg: &ExperimentConfig, pool: &Pool) -> anyhow::Result<Outcome> {
    let c_eps = c_eps_for(cfg, 1.0, pool)?;
    let lc = lower_constants(cfg, c_eps)?;
    let x = cfg.point()?;
    let mut table: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| table.push((k.to_string(), v));
    put("H", cfg.h.to_string());
    put("alpha", lc.alpha.to_string());
    put("d", lc.d.to_string());
    put("x", join_point(&x));
    put("eps", cfg.eps.to_string());
    put("C_eps", c_eps.to_string());
    put("C_1eps", lc.c_1eps.to_string());
    put("c1", lc.c1.to_string());
    put("c2", lc.c2.to_string());
    put("c3", lc.c3.to_string());
    let mut warnings = Vec::new();
    match classify_region(1, 1.0, &x, &lc) {
        Ok(r) => {
            put("N", r.thresholds.n_big.to_string());
            put("n0(x)", r.thresholds.n0x.to_string());
            put("t0(x)", r.thresholds.t0x.to_string());
        }
        Err(e) => warnings.push(format!("thresholds unavailable: {e}")),
    }
    match exponent_pair(cfg.h, lc.alpha) {
        Ok((a, b)) => {
            put("exponent_n", a.to_string());
            put("exponent_t", b.to_string());
        }
        Err(e) => warnings.push(format!("exponents unavailable: {e}")),
    }
    for &t in &cfg.t {
        for &n in &cfg.n {
            let n = n as u64;
            let tag = format!("[n={n} t={t}]");
            match argmax_m(n, t, &lc) {
                Ok(a) => {
                    put(&format!("M0 {tag}"), a.m0.to_string());
                    put(&format!("f(M0) {tag}"), a.f_direct.to_string());
                    put(&format!("f(M0) closed form {tag}"), a.f_closed.to_string());
                }
                Err(e) => warnings.push(format!("{tag}: {e}")),
            }
            match classify_region(n, t, &x, &lc) {
                Ok(r) => put(&format!("region {tag}"), format!("{:?}", r.label)),
                Err(e) => warnings.push(format!("{tag}: {e}")),
            }
            match lower_bound_log(n, t, &x, &lc, cfg.m_override) {
                Ok(b) => {
                    put(&format!("lower bound {tag}"), b.log_bound.to_string());
                    put(&format!("M used {tag}"), b.m.to_string());
                }
                Err(e) => warnings.push(format!("{tag}: lower bound unavailable: {e}")),
            }
        }
    }
    fs_dir(cfg)?;
    let path = cfg.output.join("bounds.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["run_id", "quantity", "value"])?;
    let run_id = cfg.run_id();
    let mut report = String::new();
    for (k, v) in &table {
        w.write_record([run_id.as_str(), k, v])?;
        writeln!(report, "{k:<28} {v}")?;
    }
    w.flush()?;
    Ok(Outcome {
        outputs: vec![path],
        report,
        warnings,
        ok: true,
    })
}

/// The exponent a fitted slope is compared with.
pub fn target_slope(kernel: &str, h: f64, alpha: f64, axis: FitAxis) -> Option<(f64, Option<(f64, f64)>)> {
    let constant = kernel.starts_with("constant");
    match axis {
        FitAxis::T if constant => Some((2.0 * h, None)),
        FitAxis::N if constant => Some((2.0, None)),
        _ => {
            let (a, b) = exponent_pair(h, alpha).ok()?;
            match axis {
                FitAxis::N => Some((a, Some((2.0, a)))),
                FitAxis::T => Some((b, None)),
            }
        }
    }
}

fn fit(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let input = cfg.input.as_ref().context("fit needs --input <moments.csv>")?;
    let rows: Vec<MomentRow> = read_rows(input)?;
    let variant = cfg.variant.first().copied().unwrap_or(VariantName::Skorohod);
    let want: Variant = variant.into();
    let rows: Vec<&MomentRow> = rows.iter().filter(|r| r.variant == want.name()).collect();
    let first = rows.first().ok_or_else(|| Error::InsufficientData(format!("no {} rows in {}", want.name(), input.display())))?;
    let mut warnings = Vec::new();
    if rows.iter().any(|r| r.kernel != first.kernel || r.h != first.h) {
        warnings.push("rows mix kernels or H; the fit pools them".to_string());
    }
    let (mode, pts): (FitMode, Vec<FitPoint>) = match cfg.mode {
        FitAxis::N => (FitMode::N, rows.iter().map(|r| FitPoint { abscissa: r.n as f64, log_mean: r.log_moment, stderr_log: r.stderr_log }).collect()),
        FitAxis::T => (FitMode::T, rows.iter().map(|r| FitPoint { abscissa: r.t, log_mean: r.log_moment, stderr_log: r.stderr_log }).collect()),
    };
    let rep = fit_exponents(&pts, mode)?;
    warnings.extend(rep.warnings.iter().cloned());
    let mut report = String::new();
    writeln!(report, "mode       {}", if cfg.mode == FitAxis::N { "n" } else { "t" })?;
    writeln!(report, "points     {}", rep.used.len())?;
    writeln!(report, "slope      {}", rep.fit.slope)?;
    writeln!(report, "intercept  {}", rep.fit.intercept)?;
    writeln!(report, "r^2        {}", rep.fit.r_squared)?;
    if let Some((target, band)) = target_slope(&first.kernel, first.h, first.alpha, cfg.mode) {
        writeln!(report, "target     {target}")?;
        if let Some((lo, hi)) = band {
            writeln!(report, "band       [{lo}, {hi}] (report only)")?;
        }
    }
    for (p, r) in rep.used.iter().zip(&rep.residuals) {
        writeln!(report, "  at {:<10} residual {r:+.3e}", p.abscissa)?;
    }
    Ok(Outcome {
        outputs: Vec::new(),
        report,
        warnings,
        ok: true,
    })
}
