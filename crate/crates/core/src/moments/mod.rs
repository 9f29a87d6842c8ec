//! Moments `E[u(t,x)^n]` through the Feynman–Kac moment formula
//!
//! `E[u(t,x)^n] = E^B[ Π_k u0(B^k_t) exp(½ Σ_{i≠j} ⟨g^i, g^j⟩_𝓗) ]`
//!
//! for independent Brownian motions `B^1..B^n` from `x`, together with a
//! pathwise solution sampler and exponent fitting.

mod fit;
mod fk;

pub use fit::{fit_exponents, FitMode, FitPoint, FitReport};
pub use fk::{simulate_solution_fk, FkConfig, FkDraw, FkSimulator};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::exec::BlockExecutor;
use crate::hnorm::{from_path_unchecked, BilinearForm, StepFunctional};
use crate::kernels::CovarianceKernel;
use crate::math::ln;
use crate::paths::{sample_bm, PathSample, TimeGrid};
use crate::rng::{Domain, StreamKey};
use crate::stats::LogMeanAccumulator;
use crate::{Error, Result};

/// Initial datum `u0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Constant(f64),
    /// One-dimensional table, linearly interpolated and held constant
    /// outside the nodes.
    Tabulated { nodes: Vec<f64>, values: Vec<f64> },
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialCondition::Constant(c) => {
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(Error::domain(format!("constant initial condition must be positive, got {c}")));
                }
            }
            InitialCondition::Tabulated { nodes, values } => {
                if nodes.len() < 2 || nodes.len() != values.len() {
                    return Err(Error::domain("tabulated initial condition needs matching nodes and values"));
                }
                if nodes.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::domain("initial-condition nodes must increase"));
                }
                if !crate::math::all_finite(values) || !crate::math::all_finite(nodes) {
                    return Err(Error::domain("initial-condition table must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            InitialCondition::Constant(c) => *c,
            InitialCondition::Tabulated { nodes, values } => {
                let z = y[0];
                let last = nodes.len() - 1;
                if z <= nodes[0] {
                    return values[0];
                }
                if z >= nodes[last] {
                    return values[last];
                }
                let i = nodes.partition_point(|&n| n <= z) - 1;
                let f = (z - nodes[i]) / (nodes[i + 1] - nodes[i]);
                values[i] + f * (values[i + 1] - values[i])
            }
        }
    }

    /// `(inf u0, sup u0)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            InitialCondition::Constant(c) => (*c, *c),
            InitialCondition::Tabulated { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        }
    }

    pub fn is_one(&self) -> bool {
        *self == InitialCondition::Constant(1.0)
    }

    fn log_at(&self, y: &[f64]) -> Result<f64> {
        if let InitialCondition::Constant(c) = self {
            return Ok(if *c == 1.0 { 0.0 } else { ln(*c) });
        }
        let v = self.eval(y);
        if !(v > 0.0) {
            return Err(Error::domain(format!("u0 = {v} is not positive at {y:?}")));
        }
        Ok(ln(v))
    }

    pub fn name(&self) -> String {
        match self {
            InitialCondition::Constant(c) => format!("constant:{c}"),
            InitialCondition::Tabulated { nodes, .. } => format!("tabulated:{}", nodes.len()),
        }
    }
}

/// Which product the equation is read with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Wick product; the exponent carries only `i ≠ j` terms.
    Skorohod,
    /// Ordinary product; the exponent carries the full double sum.
    Stratonovich,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Skorohod => "skorohod",
            Variant::Stratonovich => "stratonovich",
        }
    }
}

/// Both log-weights of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogWeights {
    pub skorohod: f64,
    pub stratonovich: f64,
}

impl LogWeights {
    pub fn get(&self, v: Variant) -> f64 {
        match v {
            Variant::Skorohod => self.skorohod,
            Variant::Stratonovich => self.stratonovich,
        }
    }
}

/// Log-weights from `Σ_k log u0(B^k_t)` and the Gram matrix (row-major
/// `n × n`) of the paths' functionals: the off-diagonal sum `Σ_{i<j} G_ij`,
/// plus `½ Σ_i G_ii` for the Stratonovich weight.
pub fn weights_from_gram(log_u0: f64, gram: &[f64], n: usize) -> LogWeights {
    let mut off = 0.0;
    let mut diag = 0.0;
    for i in 0..n {
        diag += gram[i * n + i];
        for j in i + 1..n {
            off += gram[i * n + j];
        }
    }
    let skorohod = log_u0 + off;
    LogWeights {
        skorohod,
        stratonovich: skorohod + 0.5 * diag,
    }
}

fn check_paths(paths: &[PathSample], kernel: &CovarianceKernel, x: &[f64], t: f64) -> Result<TimeGrid> {
    let first = paths.first().ok_or_else(|| Error::domain("need at least one path"))?;
    let grid = *first.grid();
    if (grid.horizon() - t).abs() > 1e-12 * t {
        return Err(Error::domain("paths do not run to t"));
    }
    kernel.check_point(x)?;
    for p in paths {
        if *p.grid() != grid {
            return Err(Error::domain("paths must share one grid"));
        }
        if p.start() != x {
            return Err(Error::domain("paths must start at x"));
        }
    }
    Ok(grid)
}

/// Both log-weights for the given paths.
pub fn combined_log_weights(
    paths: &[PathSample],
    kernel: &CovarianceKernel,
    h: f64,
    u0: &InitialCondition,
    x: &[f64],
    t: f64,
) -> Result<LogWeights> {
    let grid = check_paths(paths, kernel, x, t)?;
    u0.validate()?;
    let form = BilinearForm::new(kernel, h, grid)?;
    let mut log_u0 = 0.0;
    for p in paths {
        log_u0 += u0.log_at(p.end())?;
    }
    let gs: Vec<StepFunctional> = paths.iter().map(from_path_unchecked).collect();
    Ok(weights_from_gram(log_u0, &form.gram(&gs), paths.len()))
}

/// `Σ_k log u0(B^k_t) + ½ Σ_{i≠j} ⟨g^i, g^j⟩`.
pub fn skorohod_log_weight(
    paths: &[PathSample],
    kernel: &CovarianceKernel,
    h: f64,
    u0: &InitialCondition,
    x: &[f64],
    t: f64,
) -> Result<f64> {
    Ok(combined_log_weights(paths, kernel, h, u0, x, t)?.skorohod)
}

/// `Σ_k log u0(B^k_t) + ½ Σ_{i,j} ⟨g^i, g^j⟩`.
pub fn stratonovich_log_weight(
    paths: &[PathSample],
    kernel: &CovarianceKernel,
    h: f64,
    u0: &InitialCondition,
    x: &[f64],
    t: f64,
) -> Result<f64> {
    Ok(combined_log_weights(paths, kernel, h, u0, x, t)?.stratonovich)
}

/// Desk-scale limits; exceeding any needs `allow_large`.
pub const MAX_N: usize = 6;
pub const MAX_T: f64 = 2.0;
pub const MAX_STEPS: usize = 512;
pub const MAX_SAMPLES: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentConfig {
    pub n: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub kernel: CovarianceKernel,
    pub h: f64,
    pub u0: InitialCondition,
    pub samples: u64,
    pub steps: usize,
    pub seed: u64,
    pub variant: Variant,
    pub allow_large: bool,
}

impl MomentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("moment order must be at least 1"));
        }
        if self.samples == 0 {
            return Err(Error::domain("need at least one sample"));
        }
        crate::hnorm::TemporalCovariance::new(self.h)?;
        TimeGrid::new(self.t, self.steps)?;
        self.kernel.check_point(&self.x)?;
        self.u0.validate()?;
        if !self.allow_large {
            let mut over = Vec::new();
            if self.n > MAX_N {
                over.push(format!("n = {} > {MAX_N}", self.n));
            }
            if self.t > MAX_T {
                over.push(format!("t = {} > {MAX_T}", self.t));
            }
            if self.steps > MAX_STEPS {
                over.push(format!("K = {} > {MAX_STEPS}", self.steps));
            }
            if self.samples > MAX_SAMPLES {
                over.push(format!("samples = {} > {MAX_SAMPLES}", self.samples));
            }
            if !over.is_empty() {
                return Err(Error::Envelope(over.join(", ")));
            }
        }
        Ok(())
    }

    /// FNV-1a digest of every field that affects the result.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv::new();
        h.u64(self.n as u64);
        h.f64(self.t);
        for v in &self.x {
            h.f64(*v);
        }
        h.str(&self.kernel.name());
        h.f64(self.kernel.alpha);
        h.f64(self.h);
        h.str(&self.u0.name());
        if let InitialCondition::Tabulated { nodes, values } = &self.u0 {
            nodes.iter().chain(values).for_each(|v| h.f64(*v));
        }
        h.u64(self.samples);
        h.u64(self.steps as u64);
        h.u64(self.seed);
        h.str(self.variant.name());
        h.0
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
    fn bytes(&mut self, b: &[u8]) {
        for &x in b {
            self.0 ^= x as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.bytes(s.as_bytes());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub n: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub variant: Variant,
    /// `log` of the sample mean of the weights.
    pub log_mean: f64,
    pub stderr_log: f64,
    pub samples: u64,
    /// Samples whose weight was not finite (excluded from the mean).
    pub flagged: u64,
    pub seed: u64,
    pub steps: usize,
    pub digest: u64,
}

/// Paths of sample `s`: path `k` always comes from the same stream, so
/// estimates for different `n` share their random numbers.
pub fn sample_paths(grid: TimeGrid, x: &[f64], seed: u64, s: u64, n: usize) -> Vec<PathSample> {
    (0..n)
        .map(|k| sample_bm(grid, x, StreamKey::new(seed, Domain::BrownianPath, s).path(k as u32)))
        .collect()
}

/// Both log-weight accumulators over all samples of `cfg`.
pub fn accumulate<E: BlockExecutor>(cfg: &MomentConfig, exec: &E) -> Result<(LogMeanAccumulator, LogMeanAccumulator)> {
    cfg.validate()?;
    let grid = TimeGrid::new(cfg.t, cfg.steps)?;
    let form = BilinearForm::new(&cfg.kernel, cfg.h, grid)?;
    let blocks = exec.map_blocks(cfg.samples, |range| -> Result<_> {
        let mut sk = LogMeanAccumulator::new();
        let mut st = LogMeanAccumulator::new();
        for s in range {
            let paths = sample_paths(grid, &cfg.x, cfg.seed, s, cfg.n);
            let mut log_u0 = 0.0;
            for p in &paths {
                log_u0 += cfg.u0.log_at(p.end())?;
            }
            let gs: Vec<StepFunctional> = paths.iter().map(from_path_unchecked).collect();
            let w = weights_from_gram(log_u0, &form.gram(&gs), cfg.n);
            sk.push(w.skorohod);
            st.push(w.stratonovich);
        }
        Ok((sk, st))
    });
    let mut sk = LogMeanAccumulator::new();
    let mut st = LogMeanAccumulator::new();
    for b in blocks {
        let (a, c) = b?;
        sk.merge(&a);
        st.merge(&c);
    }
    Ok((sk, st))
}

fn finish(cfg: &MomentConfig, acc: &LogMeanAccumulator, variant: Variant) -> Result<MomentEstimate> {
    let flagged = acc.flagged();
    if flagged * 1000 > cfg.samples || acc.count() == 0 {
        return Err(Error::NonFiniteWeights {
            flagged,
            samples: cfg.samples,
        });
    }
    Ok(MomentEstimate {
        n: cfg.n,
        t: cfg.t,
        x: cfg.x.clone(),
        variant,
        log_mean: acc.log_mean(),
        stderr_log: acc.stderr_log(),
        samples: acc.count(),
        flagged,
        seed: cfg.seed,
        steps: cfg.steps,
        digest: cfg.digest(),
    })
}

/// Monte Carlo estimate of `log E[u(t,x)^n]` for `cfg.variant`.
///
/// Non-finite weights are counted and skipped; more than one in a thousand
/// aborts the run.
pub fn estimate_moment<E: BlockExecutor>(cfg: &MomentConfig, exec: &E) -> Result<MomentEstimate> {
    let (sk, st) = accumulate(cfg, exec)?;
    match cfg.variant {
        Variant::Skorohod => finish(cfg, &sk, Variant::Skorohod),
        Variant::Stratonovich => finish(cfg, &st, Variant::Stratonovich),
    }
}

/// Both variants from one pass over the samples.
pub fn estimate_both<E: BlockExecutor>(cfg: &MomentConfig, exec: &E) -> Result<(MomentEstimate, MomentEstimate)> {
    let (sk, st) = accumulate(cfg, exec)?;
    let sk_cfg = MomentConfig {
        variant: Variant::Skorohod,
        ..cfg.clone()
    };
    let st_cfg = MomentConfig {
        variant: Variant::Stratonovich,
        ..cfg.clone()
    };
    Ok((finish(&sk_cfg, &sk, Variant::Skorohod)?, finish(&st_cfg, &st, Variant::Stratonovich)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::math::pow;

    fn cfg(kernel: CovarianceKernel, n: usize) -> MomentConfig {
        MomentConfig {
            n,
            t: 1.0,
            x: alloc::vec![0.0],
            kernel,
            h: 0.25,
            u0: InitialCondition::Constant(1.0),
            samples: 300,
            steps: 16,
            seed: 11,
            variant: Variant::Skorohod,
            allow_large: false,
        }
    }

    #[test]
    fn n_one_is_exactly_zero() {
        let e = estimate_moment(&cfg(CovarianceKernel::fbm(0.3).unwrap(), 1), &Sequential).unwrap();
        assert_eq!((e.log_mean, e.stderr_log), (0.0, 0.0));
    }

    #[test]
    fn constant_kernel_closed_form() {
        let c = cfg(CovarianceKernel::constant(1.0).unwrap(), 2);
        let e = estimate_moment(&c, &Sequential).unwrap();
        assert_eq!((e.log_mean, e.stderr_log), (1.0, 0.0));
        let c = MomentConfig {
            n: 3,
            t: 0.5,
            h: 0.4,
            kernel: CovarianceKernel::constant(0.5).unwrap(),
            variant: Variant::Stratonovich,
            ..c
        };
        let e = estimate_moment(&c, &Sequential).unwrap();
        assert!((e.log_mean - 0.5 * 9.0 * 0.5 * pow(0.5, 0.8)).abs() < 1e-12);
    }

    #[test]
    fn injected_zero_path_kills_cross_term() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let zero = PathSample::constant(g, &[0.0]).unwrap();
        let other = sample_bm(g, &[0.0], StreamKey::new(1, Domain::BrownianPath, 0));
        let k = CovarianceKernel::fbm(0.25).unwrap();
        let u0 = InitialCondition::Constant(1.0);
        let w = skorohod_log_weight(&[zero, other], &k, 0.3, &u0, &[0.0], 1.0).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn envelope_and_u0_errors() {
        let mut c = cfg(CovarianceKernel::fbm(0.3).unwrap(), 7);
        assert!(matches!(estimate_moment(&c, &Sequential), Err(Error::Envelope(_))));
        c.allow_large = true;
        c.samples = 4;
        assert!(estimate_moment(&c, &Sequential).is_ok());
        let bad = InitialCondition::Tabulated {
            nodes: alloc::vec![-1.0, 1.0],
            values: alloc::vec![0.0, 1.0],
        };
        let g = TimeGrid::new(1.0, 4).unwrap();
        let p = PathSample::constant(g, &[-2.0]).unwrap();
        let r = skorohod_log_weight(&[p], &c.kernel, 0.3, &bad, &[-2.0], 1.0);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn tabulated_u0_interpolates() {
        let u = InitialCondition::Tabulated {
            nodes: alloc::vec![0.0, 1.0, 3.0],
            values: alloc::vec![1.0, 2.0, 4.0],
        };
        assert_eq!(u.eval(&[0.5]), 1.5);
        assert_eq!(u.eval(&[2.0]), 3.0);
        assert_eq!(u.eval(&[-9.0]), 1.0);
        assert_eq!(u.eval(&[9.0]), 4.0);
        assert_eq!(u.bounds(), (1.0, 4.0));
    }

    #[test]
    fn digest_tracks_fields() {
        let a = cfg(CovarianceKernel::fbm(0.3).unwrap(), 2);
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed += 1;
        assert_ne!(a.digest(), b.digest());
        let mut c = a.clone();
        c.t = 1.0 + f64::EPSILON;
        assert_ne!(a.digest(), c.digest());
    }
}
