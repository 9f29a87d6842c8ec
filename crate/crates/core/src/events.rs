//! Monte Carlo checks of the path events behind the lower bound.
//!
//! A path from `x_j` on `[0, t]` pinned at `B_{t/2} = r` splits into a
//! bridge `Y` on `[0, t/2]` and an independent Brownian motion `Z` with
//! `B_{t/2+s} = r + Z_s`. With the Hölder exponent `½ - ε` the events are
//!
//! * `A1 = {sup |Z| <= M}`, `A2 = {sup |Y| <= 4M}`,
//! * `A3 = {[Z]_{½-ε} <= 8M / t^{½-ε}}`, `A4 = {[Y]_{½-ε} <= 8M / t^{½-ε}}`,
//!
//! and `G^j(M)` asks for `inf_{[t/2,t]} |B| >= M`, `sup_{[0,t]} |B| <= 4M`
//! and `[B]_{½-ε} <= 16M / t^{½-ε}` on the whole path.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::exec::BlockExecutor;
use crate::math::{heat_kernel, normal_abs_moment, pow, sqrt};
use crate::paths::{check_eps, holder_exceeds, sample_bm, sample_pinned_parts, window_range, window_stats, PathSample, PinnedParts, TimeGrid};
use crate::rng::{Domain, StreamKey};
use crate::stats::{HitCounter, MeanAccumulator};
use crate::{Error, Result};

/// Trapezoid nodes per sign branch in [`estimate_gj`] unless overridden.
pub const DEFAULT_R_NODES: usize = 65;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventConfig {
    pub t: f64,
    pub m: f64,
    pub x_j: f64,
    pub eps: f64,
    pub samples: u64,
    /// Steps on `[0, t]`; must be even.
    pub steps: usize,
    /// Kolmogorov constant used in the A3/A4 floors.
    pub c_eps: f64,
}

impl EventConfig {
    pub fn validate(&self) -> Result<()> {
        check_eps(self.eps)?;
        if !(self.t > 0.0 && self.m > 0.0 && self.x_j.is_finite()) {
            return Err(Error::domain("need t > 0, M > 0 and finite x_j"));
        }
        if self.steps == 0 || self.steps % 2 != 0 {
            return Err(Error::domain("event grids need an even step count"));
        }
        if self.samples == 0 {
            return Err(Error::domain("need at least one sample"));
        }
        Ok(())
    }

    /// `8M / t^{½-ε}`, the half-path Hölder threshold.
    pub fn half_threshold(&self) -> f64 {
        8.0 * self.m / pow(self.t, 0.5 - self.eps)
    }

    fn require_r(&self, r: f64) -> Result<()> {
        if !(r >= 2.0 * self.m && r <= 3.0 * self.m) {
            return Err(Error::domain(format!("r = {r} lies outside [2M, 3M]")));
        }
        Ok(())
    }

    fn side_condition(&self) -> Option<String> {
        (self.m / 2.0 <= self.x_j.abs()).then(|| format!("M/2 = {} does not exceed |x_j| = {}", self.m / 2.0, self.x_j.abs()))
    }

    /// The four single-event floors `[A1, A2, A3, A4]`.
    pub fn floors(&self) -> [f64; 4] {
        let (t, m, e) = (self.t, self.m, self.eps);
        let tail = pow(t, 1.0 / e) / pow(m, 2.0 / e);
        let a1 = 1.0 - t / (2.0 * m * m);
        let a2 = 1.0 - 8.0 * t / (m * m);
        let a3 = 1.0 - pow(2.0, -6.0 / e) * self.c_eps * tail;
        let a4 = 1.0
            - (pow(2.0, 2.0 / e - 1.0) * self.c_eps + pow(2.0, 2.0 / e - 3.0) * normal_abs_moment(2.0 / e)) * tail;
        [a1, a2, a3, a4]
    }
}

/// A frequency with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency {
    pub p_hat: f64,
    pub stderr: f64,
}

impl From<HitCounter> for Frequency {
    fn from(c: HitCounter) -> Self {
        Frequency {
            p_hat: c.p_hat(),
            stderr: c.stderr(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventProbs {
    /// `[A1, A2, A3, A4]`.
    pub p: [Frequency; 4],
    /// `A1 ∩ A2 ∩ A3 ∩ A4`.
    pub p_all: Frequency,
    /// Single-event floors in the order of `p`.
    pub floors: [f64; 4],
    /// `floor1·floor2 + floor3·floor4 - 1`.
    pub floor_all: f64,
    /// `p1·p2 + p3·p4 - 1` from the empirical frequencies.
    pub structure_bound: f64,
    /// Correlation between `1_{A1∩A3}` (a function of `Z`) and `1_{A2∩A4}`
    /// (a function of `Y`); `None` when either indicator is constant.
    pub zy_correlation: Option<f64>,
    pub samples: u64,
    pub warnings: Vec<String>,
}

/// Indicators `[A1, A2, A3, A4]` for one decomposed path.
pub fn a_events(parts: &PinnedParts, cfg: &EventConfig) -> [bool; 4] {
    let kh = parts.bridge.grid().steps();
    let (z_sup, _) = window_range(&parts.tail, 0, kh);
    let (y_sup, _) = window_range(&parts.bridge, 0, kh);
    let (th, e) = (cfg.half_threshold(), 0.5 - cfg.eps);
    [
        z_sup <= cfg.m,
        y_sup <= 4.0 * cfg.m,
        !holder_exceeds(&parts.tail, 0, kh, e, th),
        !holder_exceeds(&parts.bridge, 0, kh, e, th),
    ]
}

#[derive(Debug, Clone, Copy, Default)]
struct EventCounts {
    single: [HitCounter; 4],
    all: HitCounter,
    z_ev: HitCounter,
    y_ev: HitCounter,
    both: HitCounter,
}

impl EventCounts {
    fn merge(&mut self, o: &Self) {
        for (a, b) in self.single.iter_mut().zip(&o.single) {
            a.merge(b);
        }
        self.all.merge(&o.all);
        self.z_ev.merge(&o.z_ev);
        self.y_ev.merge(&o.y_ev);
        self.both.merge(&o.both);
    }
}

/// Frequencies of `A1..A4` at pinning value `r ∈ [2M, 3M]`.
pub fn estimate_event_probs<E: BlockExecutor>(cfg: &EventConfig, r: f64, seed: u64, exec: &E) -> Result<EventProbs> {
    cfg.validate()?;
    cfg.require_r(r)?;
    let mut warnings = Vec::new();
    if let Some(w) = cfg.side_condition() {
        warnings.push(w);
    }
    let blocks = exec.map_blocks(cfg.samples, |range| {
        let mut c = EventCounts::default();
        for s in range {
            let key = StreamKey::new(seed, Domain::EventPaths, s);
            let parts = sample_pinned_parts(cfg.t, cfg.x_j, r, cfg.steps, key).expect("validated config");
            let a = a_events(&parts, cfg);
            for (h, &v) in c.single.iter_mut().zip(&a) {
                h.record(v);
            }
            c.all.record(a.iter().all(|&v| v));
            let (ze, ye) = (a[0] && a[2], a[1] && a[3]);
            c.z_ev.record(ze);
            c.y_ev.record(ye);
            c.both.record(ze && ye);
        }
        c
    });
    let mut c = EventCounts::default();
    for b in &blocks {
        c.merge(b);
    }
    let p = c.single.map(Frequency::from);
    let floors = cfg.floors();
    let (pz, py, pb) = (c.z_ev.p_hat(), c.y_ev.p_hat(), c.both.p_hat());
    let var = pz * (1.0 - pz) * py * (1.0 - py);
    let zy_correlation = (var > 0.0).then(|| (pb - pz * py) / sqrt(var));
    Ok(EventProbs {
        p,
        p_all: c.all.into(),
        floors,
        floor_all: floors[0] * floors[1] + floors[2] * floors[3] - 1.0,
        structure_bound: p[0].p_hat * p[1].p_hat + p[2].p_hat * p[3].p_hat - 1.0,
        zy_correlation,
        samples: cfg.samples,
        warnings,
    })
}

/// Whether a full path on `[0, t]` lies in `G^j(M)`.
pub fn in_gj(path: &PathSample, cfg: &EventConfig) -> bool {
    let k = path.grid().steps();
    // The range tests are cheap; the Hölder scan runs only when they pass.
    let (_, late_inf) = window_range(path, k / 2, k);
    let (sup, _) = window_range(path, 0, k);
    late_inf >= cfg.m && sup <= 4.0 * cfg.m && !holder_exceeds(path, 0, k, 0.5 - cfg.eps, 2.0 * cfg.half_threshold())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GjEstimate {
    /// Frequency of `G^j(M)` on unconditioned paths.
    pub direct: Frequency,
    /// `∫ P[G^j | B_{t/2} = r] q_{t/2}(r - x_j) dr` over both
    /// `r ∈ [M, 4M]` and `r ∈ [-4M, -M]`, where `G^j` forces `|B_{t/2}|` to lie.
    pub pinned: Frequency,
    /// The same integral over `[M, 4M]` only.
    pub pinned_positive: Frequency,
    /// `(r, conditional frequency)` at every node, negative branch first.
    pub conditional: Vec<(f64, Frequency)>,
}

/// `P(G^j(M))` directly and through the pinning decomposition, with
/// `r_nodes` trapezoid nodes per sign branch (at least 16). Conditional
/// estimates at different nodes reuse the same random streams.
///
/// The pinned standard error adds the per-node errors with their quadrature
/// weights, which bounds the error of the correlated sum.
pub fn estimate_gj<E: BlockExecutor>(cfg: &EventConfig, seed: u64, r_nodes: usize, exec: &E) -> Result<GjEstimate> {
    cfg.validate()?;
    if r_nodes < 16 {
        return Err(Error::domain("the pinning integral needs at least 16 nodes"));
    }
    let grid = TimeGrid::new(cfg.t, cfg.steps)?;
    let direct = exec.map_blocks(cfg.samples, |range| {
        let mut c = HitCounter::default();
        for s in range {
            let p = sample_bm(grid, &[cfg.x_j], StreamKey::new(seed, Domain::BrownianPath, s));
            c.record(in_gj(&p, cfg));
        }
        c
    });
    let direct = direct.iter().fold(HitCounter::default(), |mut a, b| {
        a.merge(b);
        a
    });

    let m = cfg.m;
    let h = 3.0 * m / (r_nodes - 1) as f64;
    let mut rs: Vec<f64> = (0..r_nodes).map(|i| -4.0 * m + h * i as f64).collect();
    rs[r_nodes - 1] = -m;
    rs.extend((0..r_nodes).map(|i| if i + 1 == r_nodes { 4.0 * m } else { m + h * i as f64 }));

    let mut conditional = Vec::with_capacity(rs.len());
    for &r in &rs {
        let blocks = exec.map_blocks(cfg.samples, |range| {
            let mut c = HitCounter::default();
            for s in range {
                let key = StreamKey::new(seed, Domain::EventPaths, s);
                let parts = sample_pinned_parts(cfg.t, cfg.x_j, r, cfg.steps, key).expect("validated config");
                c.record(in_gj(&parts.assemble(), cfg));
            }
            c
        });
        let c = blocks.iter().fold(HitCounter::default(), |mut a, b| {
            a.merge(b);
            a
        });
        conditional.push((r, Frequency::from(c)));
    }

    let branch = |nodes: &[(f64, Frequency)]| -> Frequency {
        let (mut p, mut se) = (0.0, 0.0);
        for (i, &(r, f)) in nodes.iter().enumerate() {
            let w = if i == 0 || i + 1 == nodes.len() { 0.5 * h } else { h };
            let q = heat_kernel(cfg.t / 2.0, r - cfg.x_j);
            p += w * q * f.p_hat;
            se += w * q * f.stderr;
        }
        Frequency { p_hat: p, stderr: se }
    };
    let neg = branch(&conditional[..r_nodes]);
    let pos = branch(&conditional[r_nodes..]);
    Ok(GjEstimate {
        direct: direct.into(),
        pinned: Frequency {
            p_hat: neg.p_hat + pos.p_hat,
            stderr: neg.stderr + pos.stderr,
        },
        pinned_positive: pos,
        conditional,
    })
}

/// Outcome of the pathwise inclusion checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InclusionReport {
    /// Samples in `A3 ∩ A4` whose full-path Hölder ratio exceeded the
    /// threshold.
    pub holder_violations: u64,
    /// Samples in `A1 ∩ A2` with `inf_{[t/2,t]}|B| < M` or `sup |B| > 4M`.
    pub range_violations: u64,
    pub a34: u64,
    pub a12: u64,
    pub samples: u64,
}

impl InclusionReport {
    pub fn violations(&self) -> u64 {
        self.holder_violations + self.range_violations
    }
}

/// Checks both implications on one decomposed path with full-path Hölder
/// threshold `multiplier·M / t^{½-ε}`. Returns `(holder_ok, range_ok)`;
/// either is vacuously true when its hypothesis fails.
pub fn check_parts(parts: &PinnedParts, cfg: &EventConfig, multiplier: f64) -> (bool, bool, [bool; 4]) {
    let a = a_events(parts, cfg);
    let full = parts.assemble();
    let k = full.grid().steps();
    let th = multiplier * cfg.m / pow(cfg.t, 0.5 - cfg.eps);
    let holder_ok = !(a[2] && a[3]) || !holder_exceeds(&full, 0, k, 0.5 - cfg.eps, th);
    let (sup, _) = window_range(&full, 0, k);
    let (_, late_inf) = window_range(&full, k / 2, k);
    let range_ok = !(a[0] && a[1]) || (late_inf >= cfg.m && sup <= 4.0 * cfg.m);
    (holder_ok, range_ok, a)
}

/// Counts counterexamples to `A3 ∩ A4 ⊂ {full Hölder <= multiplier·M/t^{½-ε}}`
/// and `A1 ∩ A2 ⊂ {inf_{[t/2,t]}|B| >= M, sup|B| <= 4M}` over `samples`
/// pinned paths. The implications are pathwise for `multiplier = 16`.
pub fn check_inclusions<E: BlockExecutor>(
    cfg: &EventConfig,
    r: f64,
    seed: u64,
    samples: u64,
    multiplier: f64,
    exec: &E,
) -> Result<InclusionReport> {
    cfg.validate()?;
    cfg.require_r(r)?;
    if let Some(w) = cfg.side_condition() {
        return Err(Error::SideConditions(w));
    }
    let blocks = exec.map_blocks(samples, |range| {
        let mut rep = InclusionReport::default();
        for s in range {
            let key = StreamKey::new(seed, Domain::EventPaths, s);
            let parts = sample_pinned_parts(cfg.t, cfg.x_j, r, cfg.steps, key).expect("validated config");
            let (h_ok, r_ok, a) = check_parts(&parts, cfg, multiplier);
            rep.holder_violations += !h_ok as u64;
            rep.range_violations += !r_ok as u64;
            rep.a34 += (a[2] && a[3]) as u64;
            rep.a12 += (a[0] && a[1]) as u64;
            rep.samples += 1;
        }
        rep
    });
    Ok(blocks.iter().fold(InclusionReport::default(), |mut a, b| {
        a.holder_violations += b.holder_violations;
        a.range_violations += b.range_violations;
        a.a34 += b.a34;
        a.a12 += b.a12;
        a.samples += b.samples;
        a
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CEpsEstimate {
    pub c_eps: f64,
    pub stderr: f64,
}

/// `C_ε = mean([B]_{½-ε}^{2/ε}) / t²` over standard Brownian paths on
/// `[0, t/2]` with `steps/2` grid steps, the discretization the A3/A4 events
/// use.
pub fn measure_c_eps<E: BlockExecutor>(t: f64, eps: f64, steps: usize, samples: u64, seed: u64, exec: &E) -> Result<CEpsEstimate> {
    check_eps(eps)?;
    if steps < 2 || steps % 2 != 0 || samples < 2 {
        return Err(Error::domain("need an even step count and at least two samples"));
    }
    let half = TimeGrid::new(t / 2.0, steps / 2)?;
    let p = 2.0 / eps;
    let blocks = exec.map_blocks(samples, |range| {
        let mut acc = MeanAccumulator::default();
        for s in range {
            let b = sample_bm(half, &[0.0], StreamKey::new(seed, Domain::BrownianPath, s).path(1));
            let st = window_stats(&b, eps, 0, steps / 2);
            acc.push(pow(st.holder, p));
        }
        acc
    });
    let mut acc = MeanAccumulator::default();
    for b in &blocks {
        acc.merge(b);
    }
    Ok(CEpsEstimate {
        c_eps: acc.mean() / (t * t),
        stderr: acc.stderr() / (t * t),
    })
}
