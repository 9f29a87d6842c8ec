//! Inner products `⟨g, g'⟩_𝓗` of the functionals
//! `g(r, z) = 1_{[0,t]}(r) 1_{[0, B_{t-r}]}(z)` attached to Brownian paths.
//!
//! Two independent routes are provided. [`inner_product_bilinear`] expands a
//! pair of step functionals over time rectangles against the fractional
//! covariance `R`; it is exact for the discretized functionals and is the
//! method used everywhere else in the crate. [`inner_product_quadrature`]
//! evaluates the singular double-integral representation on graded meshes and
//! serves as a cross-check.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::kernels::{CovarianceKernel, KernelKind};
use crate::math::{abs_pow, ceil, floor, pow};
use crate::paths::{PathSample, TimeGrid};
use crate::{Error, Result};

/// The temporal covariance `R(s,t) = ½(s^{2H} + t^{2H} - |s-t|^{2H})` of a
/// fractional Brownian motion with `H ∈ (0, ½)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalCovariance {
    h: f64,
}

impl TemporalCovariance {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 0.5) {
            return Err(Error::domain(format!("Hurst parameter must lie in (0, 1/2), got {h}")));
        }
        Ok(TemporalCovariance { h })
    }

    pub fn hurst(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn r(&self, s: f64, t: f64) -> f64 {
        let p = 2.0 * self.h;
        0.5 * (abs_pow(s, p) + abs_pow(t, p) - abs_pow(s - t, p))
    }

    /// Covariance of the increments over two cells of a uniform grid with
    /// step `dt` whose indices differ by `m`.
    pub fn increment_cov(&self, dt: f64, m: usize) -> f64 {
        let p = 2.0 * self.h;
        let m = m as f64;
        0.5 * pow(dt, p) * (pow(m + 1.0, p) + abs_pow(m - 1.0, p) - 2.0 * abs_pow(m, p))
    }

    /// `D_m` for `m = 0..K`, the first row of the increment covariance.
    pub fn toeplitz_row(&self, grid: &TimeGrid) -> Vec<f64> {
        let dt = grid.dt();
        (0..grid.steps()).map(|m| self.increment_cov(dt, m)).collect()
    }
}

/// `R(s, t)` with argument validation.
pub fn temporal_cov(s: f64, t: f64, h: f64) -> Result<f64> {
    if !(s >= 0.0 && t >= 0.0 && s.is_finite() && t.is_finite()) {
        return Err(Error::domain("covariance times must be finite and nonnegative"));
    }
    Ok(TemporalCovariance::new(h)?.r(s, t))
}

/// `α_H = 2H(2H - 1)`, negative on `(0, ½)`.
pub fn alpha_h(h: f64) -> f64 {
    2.0 * h * (2.0 * h - 1.0)
}

/// A functional `Σ_k 1_{(s_k, s_{k+1}]}(r) 1_{[0, ζ_k]}(z)` with breakpoints
/// `0 = s_0 < … < s_K = t` and endpoints `ζ_k ∈ R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunctional {
    origin: Vec<f64>,
    dim: usize,
    breaks: Vec<f64>,
    zeta: Vec<f64>,
    grid: Option<TimeGrid>,
}

impl StepFunctional {
    /// General partition. `zeta` is row-major `K × d`.
    pub fn new(origin: Vec<f64>, breaks: Vec<f64>, zeta: Vec<f64>) -> Result<Self> {
        let dim = origin.len();
        let k = breaks.len().saturating_sub(1);
        if dim == 0 || k == 0 || zeta.len() != k * dim {
            return Err(Error::domain("step functional shape mismatch"));
        }
        if breaks[0] != 0.0 || breaks.windows(2).any(|w| !(w[1] > w[0])) || !breaks[k].is_finite() {
            return Err(Error::domain("breakpoints must increase strictly from 0"));
        }
        if !crate::math::all_finite(&zeta) || !crate::math::all_finite(&origin) {
            return Err(Error::domain("step functional entries must be finite"));
        }
        let grid = TimeGrid::new(breaks[k], k)
            .ok()
            .filter(|g| breaks.iter().enumerate().all(|(i, &b)| b == g.time(i)));
        Ok(StepFunctional {
            origin,
            dim,
            breaks,
            zeta,
            grid,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.breaks[self.breaks.len() - 1]
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of rectangles.
    pub fn len(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Spatial endpoint of rectangle `k`.
    #[inline]
    pub fn zeta(&self, k: usize) -> &[f64] {
        &self.zeta[k * self.dim..(k + 1) * self.dim]
    }

    /// The uniform grid of the breakpoints, if they form one.
    pub fn uniform_grid(&self) -> Option<TimeGrid> {
        self.grid
    }
}

/// The step functional of a path: rectangle `k` over `(t_k, t_{k+1}]`
/// carries `ζ_k = B_{t - t_k}`, i.e. `v_{K-k}` for path values `v`.
pub fn g_from_path(path: &PathSample, t: f64, x: &[f64]) -> Result<StepFunctional> {
    let grid = *path.grid();
    if (grid.horizon() - t).abs() > 1e-12 * t.abs() {
        return Err(Error::domain(format!(
            "path horizon {} does not match t = {t}",
            grid.horizon()
        )));
    }
    if path.start() != x {
        return Err(Error::domain("path does not start at x"));
    }
    Ok(from_path_unchecked(path))
}

pub(crate) fn from_path_unchecked(path: &PathSample) -> StepFunctional {
    let grid = *path.grid();
    let k = grid.steps();
    let d = path.dim();
    let mut zeta = Vec::with_capacity(k * d);
    for i in 0..k {
        zeta.extend_from_slice(path.at(k - i));
    }
    StepFunctional {
        origin: path.start().to_vec(),
        dim: d,
        breaks: grid.times(),
        zeta,
        grid: Some(grid),
    }
}

/// Precomputed bilinear form on one uniform grid.
///
/// The increment covariance over a uniform grid is Toeplitz, so only its
/// first row `D_m` is stored.
#[derive(Debug, Clone)]
pub struct BilinearForm<'a> {
    kernel: &'a CovarianceKernel,
    cov: TemporalCovariance,
    grid: TimeGrid,
    row: Vec<f64>,
}

impl<'a> BilinearForm<'a> {
    pub fn new(kernel: &'a CovarianceKernel, h: f64, grid: TimeGrid) -> Result<Self> {
        let cov = TemporalCovariance::new(h)?;
        let row = cov.toeplitz_row(&grid);
        Ok(BilinearForm {
            kernel,
            cov,
            grid,
            row,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `Σ_{k,l} D_{k-l} Q(ζ_k, ζ'_l)` for two functionals on this grid.
    /// Shapes are the caller's responsibility.
    pub fn inner(&self, g1: &StepFunctional, g2: &StepFunctional) -> f64 {
        let k = self.grid.steps();
        match self.kernel.kind {
            // Σ_{k,l} D_{k-l} telescopes to R(t, t).
            KernelKind::Constant { sigma2 } => {
                sigma2 * self.cov.r(self.grid.horizon(), self.grid.horizon())
            }
            KernelKind::Fbm { exponent, .. } => {
                // Q = ½(|ζ|^p + |ζ'|^p - |ζ-ζ'|^p) coordinatewise; the masses
                // |ζ|^p are computed once per rectangle.
                let p = 2.0 * exponent;
                let mass = |g: &StepFunctional| -> Vec<f64> {
                    (0..k).map(|i| g.zeta(i).iter().map(|&z| abs_pow(z, p)).sum()).collect()
                };
                let (m1, m2) = (mass(g1), mass(g2));
                let mut s = 0.0;
                for (i, &mi) in m1.iter().enumerate() {
                    let a = g1.zeta(i);
                    let mut acc = 0.0;
                    for (l, &ml) in m2.iter().enumerate() {
                        let c: f64 = a.iter().zip(g2.zeta(l)).map(|(x, y)| abs_pow(x - y, p)).sum();
                        acc += self.row[i.abs_diff(l)] * (mi + ml - c);
                    }
                    s += acc;
                }
                0.5 * s
            }
            KernelKind::Tabulated(_) => {
                let mut s = 0.0;
                for i in 0..k {
                    let a = g1.zeta(i);
                    let mut acc = 0.0;
                    for l in 0..k {
                        acc += self.row[i.abs_diff(l)] * self.kernel.q(a, g2.zeta(l));
                    }
                    s += acc;
                }
                s
            }
        }
    }

    /// Symmetric Gram matrix (row-major) of the given functionals.
    pub fn gram(&self, gs: &[StepFunctional]) -> Vec<f64> {
        let n = gs.len();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.inner(&gs[i], &gs[j]);
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        m
    }
}

fn check_functional(g: &StepFunctional, kernel: &CovarianceKernel) -> Result<()> {
    kernel.check_point(g.origin())
}

/// `⟨g1, g2⟩_𝓗` by bilinear expansion over rectangles:
/// `Σ_{k,l} [R(b_k,d_l) - R(a_k,d_l) - R(b_k,c_l) + R(a_k,c_l)] Q(ζ_k, ζ'_l)`.
pub fn inner_product_bilinear(
    g1: &StepFunctional,
    g2: &StepFunctional,
    kernel: &CovarianceKernel,
    h: f64,
) -> Result<f64> {
    check_functional(g1, kernel)?;
    check_functional(g2, kernel)?;
    if g1.dim() != g2.dim() {
        return Err(Error::domain("functionals of different dimension"));
    }
    if g1.horizon() != g2.horizon() {
        return Err(Error::domain(format!(
            "horizons differ: {} vs {}",
            g1.horizon(),
            g2.horizon()
        )));
    }
    if let (Some(a), Some(b)) = (g1.uniform_grid(), g2.uniform_grid()) {
        if a == b {
            return Ok(BilinearForm::new(kernel, h, a)?.inner(g1, g2));
        }
    }
    let cov = TemporalCovariance::new(h)?;
    let (b1, b2) = (g1.breaks(), g2.breaks());
    let n2 = b2.len();
    let rm: Vec<f64> = b1.iter().flat_map(|&s| b2.iter().map(move |&u| cov.r(s, u))).collect();
    let mut s = 0.0;
    for k in 0..g1.len() {
        for l in 0..g2.len() {
            let dd = rm[(k + 1) * n2 + l + 1] - rm[k * n2 + l + 1] - rm[(k + 1) * n2 + l]
                + rm[k * n2 + l];
            s += dd * kernel.q(g1.zeta(k), g2.zeta(l));
        }
    }
    Ok(s)
}

/// How path positions between grid times enter the quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    /// Piecewise constant, matching the step functional: `B_s = v_{j+1}` on
    /// `[t_j, t_{j+1})`. The quadrature then converges to the bilinear value.
    Step,
    /// Linear interpolation between grid positions.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Total θ-nodes. With [`Lookup::Step`] they are spread evenly over the
    /// grid cells.
    pub outer_nodes: usize,
    /// r-nodes per θ-node.
    pub inner_nodes: usize,
    /// Exponent `γ` of the inner mesh. `None` picks 2 for step lookup and
    /// `3/(2H+α-1)` for linear lookup.
    pub grading_exponent: Option<f64>,
    pub lookup: Lookup,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            outer_nodes: 4096,
            inner_nodes: 256,
            grading_exponent: None,
            lookup: Lookup::Step,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_nodes < 8 || self.inner_nodes < 8 {
            return Err(Error::domain("quadrature needs at least 8 nodes per integral"));
        }
        if let Some(g) = self.grading_exponent {
            if !(g >= 1.0 && g.is_finite()) {
                return Err(Error::domain(format!("grading exponent must be >= 1, got {g}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    /// Set when the node counts look too small for the singularity strength.
    pub under_resolved: bool,
}

/// The integral representation
///
/// `H ∫_0^t θ^{2H-1} [Q(φ_θ,ψ_θ) + Q(φ_{t-θ},ψ_{t-θ})] dθ
///  + |α_H| ∫_0^t ∫_0^θ r^{2H-2} Q̂(θ, θ-r, φ, ψ) dr dθ`
///
/// with `φ, ψ` the two paths. For distinct paths `Q̂(θ,θ-r,φ,ψ)` is used,
/// which equals its symmetrization in `(φ, ψ)`.
///
/// With step lookup the single integral is exact cell by cell. The outer
/// θ-integral of the double integral uses `p` midpoint nodes per grid cell,
/// graded toward the cell's left end as `δ = dt·u^{1/(2H)}`. With step lookup the inner
/// integrand vanishes for `r < δ`, so the inner mesh is graded from `δ`:
/// `r = δ + (θ-δ) w^γ`.
pub fn inner_product_quadrature(
    path_i: &PathSample,
    path_j: &PathSample,
    kernel: &CovarianceKernel,
    h: f64,
    qc: &QuadratureConfig,
) -> Result<QuadratureResult> {
    let cov = TemporalCovariance::new(h)?;
    qc.validate()?;
    let bound = 1.0 - 2.0 * h;
    if kernel.alpha <= bound {
        return Err(Error::Divergent {
            alpha: kernel.alpha,
            bound,
        });
    }
    if path_i.grid() != path_j.grid() || path_i.dim() != path_j.dim() {
        return Err(Error::domain("paths must share grid and dimension"));
    }
    kernel.check_point(path_i.start())?;
    let k = path_i.grid().steps();
    let strength = 2.0 * h + kernel.alpha - 1.0;
    let thin_inner = (qc.inner_nodes as f64) * strength < 16.0;
    let value = match qc.lookup {
        Lookup::Step => step_quadrature(path_i, path_j, kernel, cov, qc),
        Lookup::Linear => linear_quadrature(path_i, path_j, kernel, cov, qc, strength),
    };
    let thin_outer = match qc.lookup {
        Lookup::Step => qc.outer_nodes < 2 * k,
        Lookup::Linear => qc.outer_nodes < 4 * k,
    };
    Ok(QuadratureResult {
        value,
        under_resolved: thin_inner || thin_outer,
    })
}

fn step_quadrature(
    phi: &PathSample,
    psi: &PathSample,
    kernel: &CovarianceKernel,
    cov: TemporalCovariance,
    qc: &QuadratureConfig,
) -> f64 {
    let h = cov.hurst();
    let grid = *phi.grid();
    let k = grid.steps();
    let dt = grid.dt();
    let p = ceil(qc.outer_nodes as f64 / k as f64).max(1.0) as usize;
    let go = 1.0 / (2.0 * h);
    let gi = qc.grading_exponent.unwrap_or(2.0);
    let ni = qc.inner_nodes;

    // Cell m of path time carries the grid value at its right end.
    let a = |m: usize| phi.at(m + 1);
    let b = |m: usize| psi.at(m + 1);
    let diag: Vec<f64> = (0..k).map(|m| kernel.q(a(m), b(m))).collect();

    let outer: Vec<(f64, f64)> = (0..p)
        .map(|i| {
            let u = (i as f64 + 0.5) / p as f64;
            (dt * pow(u, go), dt * go * pow(u, go - 1.0) / p as f64)
        })
        .collect();
    let inner: Vec<(f64, f64)> = (0..ni)
        .map(|m| {
            let w = (m as f64 + 0.5) / ni as f64;
            (pow(w, gi), gi * pow(w, gi - 1.0) / ni as f64)
        })
        .collect();

    let mut first = 0.0;
    let mut second = 0.0;
    let mut qhat = vec![0.0; ni];
    for j in 0..k {
        let tj = grid.time(j);
        // Q̂ at θ in cell j against θ - r in cell c < j.
        if j > 0 {
            for (slot, &(wg, _)) in qhat.iter_mut().zip(&inner) {
                let c = (floor(j as f64 * (1.0 - wg)) as usize).min(j - 1);
                *slot = 0.5 * (diag[j] + diag[c] - kernel.q(a(j), b(c)) - kernel.q(a(c), b(j)));
            }
        }
        // t - θ lies in cell K-1-j. Both lookups are constant on the cell,
        // so H∫θ^{2H-1} over it is exact.
        let edge = diag[j] + diag[k - 1 - j];
        first += 0.5 * edge * (pow(grid.time(j + 1), 2.0 * h) - pow(tj, 2.0 * h));
        if j == 0 {
            continue;
        }
        for &(delta, w_theta) in &outer {
            let mut acc = 0.0;
            for (q, &(wg, ww)) in qhat.iter().zip(&inner) {
                let r = delta + tj * wg;
                acc += ww * pow(r, 2.0 * h - 2.0) * q;
            }
            second += w_theta * tj * acc;
        }
    }
    first + alpha_h(h).abs() * second
}

fn interpolate(path: &PathSample, s: f64, out: &mut [f64]) {
    let grid = path.grid();
    let k = grid.steps();
    let x = (s / grid.dt()).clamp(0.0, k as f64);
    let i = (floor(x) as usize).min(k - 1);
    let f = x - i as f64;
    let (lo, hi) = (path.at(i), path.at(i + 1));
    for ((o, a), b) in out.iter_mut().zip(lo).zip(hi) {
        *o = a + f * (b - a);
    }
}

fn linear_quadrature(
    phi: &PathSample,
    psi: &PathSample,
    kernel: &CovarianceKernel,
    cov: TemporalCovariance,
    qc: &QuadratureConfig,
    strength: f64,
) -> f64 {
    let h = cov.hurst();
    let t = phi.grid().horizon();
    let d = phi.dim();
    let go = 1.0 / (2.0 * h);
    let gi = qc.grading_exponent.unwrap_or(3.0 / strength);
    let (no, ni) = (qc.outer_nodes, qc.inner_nodes);
    let mut pu = vec![0.0; d];
    let mut qu = vec![0.0; d];
    let mut pv = vec![0.0; d];
    let mut qv = vec![0.0; d];
    let mut first = 0.0;
    let mut second = 0.0;
    for i in 0..no {
        let u = (i as f64 + 0.5) / no as f64;
        let theta = t * pow(u, go);
        let w_theta = t * go * pow(u, go - 1.0) / no as f64;
        interpolate(phi, theta, &mut pu);
        interpolate(psi, theta, &mut qu);
        interpolate(phi, t - theta, &mut pv);
        interpolate(psi, t - theta, &mut qv);
        first += w_theta * pow(theta, 2.0 * h - 1.0) * (kernel.q(&pu, &qu) + kernel.q(&pv, &qv));
        let q_uu = kernel.q(&pu, &qu);
        let mut acc = 0.0;
        for m in 0..ni {
            let w = (m as f64 + 0.5) / ni as f64;
            let r = theta * pow(w, gi);
            let wr = theta * gi * pow(w, gi - 1.0) / ni as f64;
            interpolate(phi, theta - r, &mut pv);
            interpolate(psi, theta - r, &mut qv);
            let qh = 0.5 * (q_uu + kernel.q(&pv, &qv) - kernel.q(&pu, &qv) - kernel.q(&pv, &qu));
            acc += wr * pow(r, 2.0 * h - 2.0) * qh;
        }
        second += w_theta * acc;
    }
    h * first + alpha_h(h).abs() * second
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::sample_bm;
    use crate::rng::{Domain, StreamKey};

    fn fbm(alpha: f64) -> CovarianceKernel {
        CovarianceKernel::fbm(alpha).unwrap()
    }

    #[test]
    fn covariance_examples() {
        assert!((temporal_cov(1.0, 2.0, 0.25).unwrap() - 2f64.powf(-0.5)).abs() < 1e-15);
        assert_eq!(temporal_cov(0.7, 0.0, 0.3).unwrap(), 0.0);
        assert!((temporal_cov(1.3, 1.3, 0.3).unwrap() - 1.3f64.powf(0.6)).abs() < 1e-15);
        assert!(temporal_cov(1.0, 1.0, 0.5).is_err());
        assert!(temporal_cov(-1.0, 1.0, 0.2).is_err());
        assert_eq!(alpha_h(0.25), -0.25);
    }

    #[test]
    fn toeplitz_row_matches_rectangles() {
        let cov = TemporalCovariance::new(0.3).unwrap();
        let g = TimeGrid::new(1.5, 7).unwrap();
        let row = cov.toeplitz_row(&g);
        for k in 0..7 {
            for l in 0..7 {
                let (a, b, c, d) = (g.time(k), g.time(k + 1), g.time(l), g.time(l + 1));
                let dd = cov.r(b, d) - cov.r(a, d) - cov.r(b, c) + cov.r(a, c);
                assert!((dd - row[k.abs_diff(l)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reversal_and_shape() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let p = PathSample::from_values(g, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let f = g_from_path(&p, 1.0, &[0.0]).unwrap();
        let z: Vec<f64> = (0..4).map(|k| f.zeta(k)[0]).collect();
        assert_eq!(z, [4.0, 3.0, 2.0, 1.0]);
        assert!(g_from_path(&p, 2.0, &[0.0]).is_err());
        assert!(g_from_path(&p, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn single_rectangle_unit_norm() {
        let f = StepFunctional::new(vec![0.0], vec![0.0, 1.0], vec![1.0]).unwrap();
        for h in [0.1, 0.25, 0.45] {
            let v = inner_product_bilinear(&f, &f, &fbm(0.3), h).unwrap();
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_endpoints_give_zero() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let p = sample_bm(g, &[0.2], StreamKey::new(3, Domain::BrownianPath, 0));
        let zero = PathSample::constant(g, &[0.0]).unwrap();
        let (a, b) = (from_path_unchecked(&p), from_path_unchecked(&zero));
        assert_eq!(inner_product_bilinear(&a, &b, &fbm(0.4), 0.3).unwrap().abs(), 0.0);
    }

    #[test]
    fn general_partition_agrees_with_toeplitz() {
        let g = TimeGrid::new(1.0, 24).unwrap();
        let k = fbm(0.35);
        let p = sample_bm(g, &[0.1], StreamKey::new(4, Domain::BrownianPath, 0));
        let q = sample_bm(g, &[0.1], StreamKey::new(4, Domain::BrownianPath, 1));
        let (a, b) = (from_path_unchecked(&p), from_path_unchecked(&q));
        let fast = inner_product_bilinear(&a, &b, &k, 0.3).unwrap();
        // Same functional, breakpoints perturbed off the uniform grid by a
        // split of every rectangle into two.
        let split = |f: &StepFunctional| {
            let mut br = vec![0.0];
            let mut z = vec![];
            for i in 0..f.len() {
                let (lo, hi) = (f.breaks()[i], f.breaks()[i + 1]);
                br.push(lo + 0.3 * (hi - lo));
                br.push(hi);
                z.extend_from_slice(f.zeta(i));
                z.extend_from_slice(f.zeta(i));
            }
            StepFunctional::new(vec![0.1], br, z).unwrap()
        };
        let slow = inner_product_bilinear(&split(&a), &b, &k, 0.3).unwrap();
        assert!((fast - slow).abs() < 1e-12 * fast.abs().max(1.0));
        let other = StepFunctional::new(vec![0.1], vec![0.0, 2.0], vec![1.0]).unwrap();
        assert!(inner_product_bilinear(&a, &other, &k, 0.3).is_err());
    }

    #[test]
    fn quadrature_closed_forms() {
        let g = TimeGrid::new(1.3, 32).unwrap();
        let qc = QuadratureConfig {
            outer_nodes: 256,
            inner_nodes: 64,
            ..Default::default()
        };
        let p = sample_bm(g, &[0.4], StreamKey::new(8, Domain::BrownianPath, 0));
        let c = CovarianceKernel::constant(2.0).unwrap();
        let v = inner_product_quadrature(&p, &p, &c, 0.25, &qc).unwrap().value;
        assert!((v - 2.0 * 1.3f64.powf(0.5)).abs() < 1e-10, "{v} vs {}", 2.0 * 1.3f64.powf(0.5));

        let flat = PathSample::constant(g, &[-0.7]).unwrap();
        let v = inner_product_quadrature(&flat, &flat, &fbm(0.75), 0.25, &qc).unwrap().value;
        let want = 0.7f64.powf(1.5) * 1.3f64.powf(0.5);
        assert!((v - want).abs() < 1e-10 * want);
        let lin = QuadratureConfig {
            lookup: Lookup::Linear,
            ..qc
        };
        let v = inner_product_quadrature(&flat, &flat, &fbm(0.75), 0.25, &lin).unwrap().value;
        assert!((v - want).abs() < 1e-10 * want);
    }

    #[test]
    fn quadrature_refuses_divergent_kernels() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let p = PathSample::constant(g, &[1.0]).unwrap();
        let r = inner_product_quadrature(&p, &p, &fbm(0.4), 0.25, &QuadratureConfig::default());
        assert!(matches!(r, Err(Error::Divergent { .. })));
    }

    #[test]
    fn quadrature_tracks_bilinear_for_cross_pairs() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let k = fbm(0.75);
        let p = sample_bm(g, &[0.3], StreamKey::new(5, Domain::BrownianPath, 0));
        let q = sample_bm(g, &[0.3], StreamKey::new(5, Domain::BrownianPath, 1));
        let exact = inner_product_bilinear(&from_path_unchecked(&p), &from_path_unchecked(&q), &k, 0.25).unwrap();
        let qc = QuadratureConfig {
            outer_nodes: 64 * 16,
            inner_nodes: 512,
            ..Default::default()
        };
        let r = inner_product_quadrature(&p, &q, &k, 0.25, &qc).unwrap();
        assert!(!r.under_resolved);
        assert!((r.value - exact).abs() < 1e-2 * (1.0 + exact.abs()), "{} vs {exact}", r.value);
    }
}
