//! Spatial covariance kernels `Q(x, y)` and sampled checks of the two
//! structural hypotheses the moment bounds rely on:
//!
//! * regularity: `Q(x,x) + Q(y,y) - 2Q(x,y) <= C1 |x-y|^{2α}`;
//! * far-field floor: `Q(x,y) >= C2 M^{2β}` whenever every coordinate of `x`
//!   and `y` exceeds `M` in absolute value.
//!
//! Both are universally quantified, so the checks only report the worst case
//! seen over a sample and how dense that sample was.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{abs_pow, norm, pow};
use crate::rng::{Domain, StreamKey};
use crate::{Error, Result};

/// Relative slack used when a report decides pass or fail.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Magnitudes sampled by [`check_h2`] lie in `(M, H2_SPAN·M]`.
pub const H2_SPAN: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// `Q ≡ σ²`.
    Constant { sigma2: f64 },
    /// `Q(x,y) = Σ_j ½(|x_j|^{2a} + |y_j|^{2a} - |x_j - y_j|^{2a})`; for
    /// `dim = 1` this is the covariance of a two-sided fractional Brownian
    /// motion with Hurst index `a`.
    Fbm { exponent: f64, dim: usize },
    /// Bilinear interpolation of a symmetric table on a 1-d grid.
    Tabulated(TabulatedKernel),
}

/// A symmetric table `Q(nodes[i], nodes[j]) = values[i·n + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedKernel {
    /// Builds the table from `(x, y, Q)` triples covering a full square grid.
    pub fn from_triples(triples: &[(f64, f64, f64)]) -> Result<Self> {
        if triples.is_empty() {
            return Err(Error::domain("tabulated kernel needs at least one triple"));
        }
        let mut nodes: Vec<f64> = triples.iter().flat_map(|t| [t.0, t.1]).collect();
        if !crate::math::all_finite(&nodes) {
            return Err(Error::domain("tabulated kernel nodes must be finite"));
        }
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup();
        let n = nodes.len();
        let mut values = vec![f64::NAN; n * n];
        let index = |v: f64| nodes.binary_search_by(|p| p.partial_cmp(&v).unwrap()).unwrap();
        for &(x, y, q) in triples {
            if !q.is_finite() {
                return Err(Error::domain(format!("non-finite table value at ({x}, {y})")));
            }
            let (i, j) = (index(x), index(y));
            values[i * n + j] = q;
        }
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                match (a.is_nan(), b.is_nan()) {
                    (true, true) => {
                        return Err(Error::domain(format!(
                            "tabulated kernel is missing the pair ({}, {})",
                            nodes[i], nodes[j]
                        )))
                    }
                    (true, false) => values[i * n + j] = b,
                    (false, true) => values[j * n + i] = a,
                    (false, false) => {
                        if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                            return Err(Error::domain(format!(
                                "tabulated kernel is not symmetric at ({}, {})",
                                nodes[i], nodes[j]
                            )));
                        }
                    }
                }
            }
        }
        Ok(TabulatedKernel { nodes, values })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Cell index and weight for `v`, clamped to the table range.
    fn locate(&self, v: f64) -> (usize, f64) {
        let n = self.nodes.len();
        if n == 1 || v <= self.nodes[0] {
            return (0, 0.0);
        }
        if v >= self.nodes[n - 1] {
            return (n - 2, 1.0);
        }
        let hi = self.nodes.partition_point(|&p| p <= v);
        let lo = hi - 1;
        (lo, (v - self.nodes[lo]) / (self.nodes[hi] - self.nodes[lo]))
    }

    /// Bilinear interpolation; points outside the grid are clamped to it.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        // The table is symmetric; a canonical argument order makes the
        // interpolant symmetric bit for bit.
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        let n = self.nodes.len();
        if n == 1 {
            return self.values[0];
        }
        let (i, wx) = self.locate(x);
        let (j, wy) = self.locate(y);
        let v = |a: usize, b: usize| self.values[a * n + b];
        (1.0 - wx) * ((1.0 - wy) * v(i, j) + wy * v(i, j + 1))
            + wx * ((1.0 - wy) * v(i + 1, j) + wy * v(i + 1, j + 1))
    }
}

/// A spatial covariance together with the constants it is claimed to
/// satisfy the hypotheses with.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceKernel {
    pub kind: KernelKind,
    /// Regularity exponent `α ∈ (0, 1]`.
    pub alpha: f64,
    /// Far-field exponent `β ∈ [0, 1)`.
    pub beta: f64,
    /// Regularity constant `C1`.
    pub c1: f64,
    /// Far-field constant `C2`.
    pub c2: f64,
    /// Whether `Q(0, 0) = 0`.
    pub q00_zero: bool,
}

impl CovarianceKernel {
    /// `Q ≡ σ²`. The regularity bound holds with any exponent (the increment
    /// is identically zero); the far-field floor holds with `β = 0`,
    /// `C2 = σ²`.
    pub fn constant(sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::domain(format!("constant kernel needs σ² >= 0, got {sigma2}")));
        }
        Ok(CovarianceKernel {
            kind: KernelKind::Constant { sigma2 },
            alpha: 1.0,
            beta: 0.0,
            c1: 1.0,
            c2: sigma2,
            q00_zero: sigma2 == 0.0,
        })
    }

    /// One-dimensional fractional-Brownian spatial kernel.
    pub fn fbm(alpha: f64) -> Result<Self> {
        Self::fbm_sum(alpha, 1)
    }

    /// Coordinate sum of 1-d fbm kernels in dimension `dim`.
    ///
    /// The regularity bound holds with `C1 = d^{1-α}` (power-mean inequality).
    /// The far-field infimum is attained at same-magnitude opposite-sign
    /// coordinates, giving `C2 = d(1 - 2^{2α-1})` with `β = α`; that is
    /// positive only for `α < 1/2`, and `C2` is recorded as 0 otherwise.
    pub fn fbm_sum(alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain(format!("fbm kernel needs α in (0, 1], got {alpha}")));
        }
        if dim == 0 {
            return Err(Error::domain("fbm kernel needs dim >= 1"));
        }
        let d = dim as f64;
        Ok(CovarianceKernel {
            kind: KernelKind::Fbm { exponent: alpha, dim },
            alpha,
            beta: alpha.min(0.999_999),
            c1: pow(d, 1.0 - alpha),
            c2: (d * (1.0 - pow(2.0, 2.0 * alpha - 1.0))).max(0.0),
            q00_zero: true,
        })
    }

    /// A 1-d tabulated kernel with caller-declared hypothesis metadata.
    pub fn tabulated(table: TabulatedKernel, alpha: f64, beta: f64, c1: f64, c2: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0 && (0.0..1.0).contains(&beta) && c1 > 0.0 && c2 >= 0.0) {
            return Err(Error::domain("tabulated kernel metadata out of range"));
        }
        let q00_zero = table.eval(0.0, 0.0) == 0.0;
        Ok(CovarianceKernel {
            kind: KernelKind::Tabulated(table),
            alpha,
            beta,
            c1,
            c2,
            q00_zero,
        })
    }

    /// Replaces the declared exponents and constants.
    pub fn with_metadata(mut self, alpha: f64, beta: f64, c1: f64, c2: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self.c1 = c1;
        self.c2 = c2;
        self
    }

    /// Spatial dimension the kernel requires, if any.
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            KernelKind::Constant { .. } => None,
            KernelKind::Fbm { dim, .. } => Some(*dim),
            KernelKind::Tabulated(_) => Some(1),
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            KernelKind::Constant { sigma2 } => format!("constant:{sigma2}"),
            KernelKind::Fbm { exponent, dim: 1 } => format!("fbm:{exponent}"),
            KernelKind::Fbm { exponent, dim } => format!("fbm:{exponent}:{dim}"),
            KernelKind::Tabulated(t) => format!("tabulated:{}", t.nodes.len()),
        }
    }

    /// `Q(0, 0)`.
    pub fn q00(&self) -> f64 {
        match &self.kind {
            KernelKind::Constant { sigma2 } => *sigma2,
            KernelKind::Fbm { .. } => 0.0,
            KernelKind::Tabulated(t) => t.eval(0.0, 0.0),
        }
    }

    /// `Q(x, y)` without argument checks. Slices must have the kernel's
    /// dimension.
    #[inline]
    pub fn q(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            KernelKind::Constant { sigma2 } => *sigma2,
            KernelKind::Fbm { exponent, .. } => {
                let p = 2.0 * exponent;
                x.iter()
                    .zip(y)
                    .map(|(&a, &b)| 0.5 * (abs_pow(a, p) + abs_pow(b, p) - abs_pow(a - b, p)))
                    .sum()
            }
            KernelKind::Tabulated(t) => t.eval(x[0], y[0]),
        }
    }

    /// `Q(x,x) + Q(y,y) - 2Q(x,y)`, the variance of the field increment.
    pub fn increment_variance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.q(x, x) + self.q(y, y) - 2.0 * self.q(x, y)
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if let Some(d) = self.dim() {
            if x.len() != d {
                return Err(Error::domain(format!(
                    "kernel {} expects points in R^{d}, got R^{}",
                    self.name(),
                    x.len()
                )));
            }
        }
        if !crate::math::all_finite(x) {
            return Err(Error::domain("kernel arguments must be finite"));
        }
        Ok(())
    }
}

/// `Q(x, y)` with argument validation.
pub fn eval_q(kernel: &CovarianceKernel, x: &[f64], y: &[f64]) -> Result<f64> {
    kernel.check_point(x)?;
    kernel.check_point(y)?;
    if x.len() != y.len() {
        return Err(Error::domain("points of different dimension"));
    }
    Ok(kernel.q(x, y))
}

/// `Q̂(u, v, φ, ψ) = ½[Q(φ_u,ψ_u) + Q(φ_v,ψ_v) - Q(φ_u,ψ_v) - Q(φ_v,ψ_u)]`,
/// given the four positions `φ_u, φ_v, ψ_u, ψ_v`.
pub fn hat_q(
    kernel: &CovarianceKernel,
    phi_u: &[f64],
    phi_v: &[f64],
    psi_u: &[f64],
    psi_v: &[f64],
) -> Result<f64> {
    for p in [phi_u, phi_v, psi_u, psi_v] {
        kernel.check_point(p)?;
    }
    Ok(hat_q_unchecked(kernel, phi_u, phi_v, psi_u, psi_v))
}

#[inline]
pub(crate) fn hat_q_unchecked(
    kernel: &CovarianceKernel,
    phi_u: &[f64],
    phi_v: &[f64],
    psi_u: &[f64],
    psi_v: &[f64],
) -> f64 {
    0.5 * (kernel.q(phi_u, psi_u) + kernel.q(phi_v, psi_v)
        - kernel.q(phi_u, psi_v)
        - kernel.q(phi_v, psi_u))
}

/// Axis-aligned sampling region.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SamplingBox {
    pub fn cube(dim: usize, half_width: f64) -> Self {
        SamplingBox {
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    /// Largest observed `(Q(x,x)+Q(y,y)-2Q(x,y)) / |x-y|^{2α}`.
    pub max_h1_ratio: f64,
    /// Smallest observed `Q(x,y) / M^{2β}` over the far-field region.
    pub min_h2_value: f64,
    pub sample_count: u64,
    pub pass_h1: Option<bool>,
    pub pass_h2: Option<bool>,
    pub warnings: Vec<String>,
}

fn q00_warning(kernel: &CovarianceKernel, warnings: &mut Vec<String>) {
    if !kernel.q00_zero {
        warnings.push(format!(
            "kernel {} has Q(0,0) = {} != 0; lower bounds fall back to the growth estimate \
             |Q(x,y)| <= (C1^½|x|^α + Q(0,0)^½)(C1^½|y|^α + Q(0,0)^½)",
            kernel.name(),
            kernel.q00()
        ));
    }
}

/// Samples `n_pairs` point pairs uniformly in `region` and records the worst
/// regularity ratio against the kernel's declared `α` and `C1`.
pub fn check_h1(
    kernel: &CovarianceKernel,
    n_pairs: u64,
    region: &SamplingBox,
    seed: u64,
) -> Result<HypothesisReport> {
    if n_pairs == 0 {
        return Err(Error::domain("check_h1 needs n_pairs >= 1"));
    }
    let d = region.dim();
    if d == 0 || region.hi.len() != d || region.lo.iter().zip(&region.hi).any(|(l, h)| !(h > l)) {
        return Err(Error::domain("sampling box has zero volume"));
    }
    if let Some(kd) = kernel.dim() {
        if kd != d {
            return Err(Error::domain("sampling box dimension does not match kernel"));
        }
    }
    let mut rng = StreamKey::new(seed, Domain::HypothesisSampling, 1).rng();
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut diff = vec![0.0; d];
    let mut worst = 0.0f64;
    let mut used = 0;
    for _ in 0..n_pairs {
        for j in 0..d {
            let w = region.hi[j] - region.lo[j];
            x[j] = region.lo[j] + w * rng.uniform();
            y[j] = region.lo[j] + w * rng.uniform();
            diff[j] = x[j] - y[j];
        }
        let dist = norm(&diff);
        if dist == 0.0 {
            continue;
        }
        let ratio = kernel.increment_variance(&x, &y) / pow(dist, 2.0 * kernel.alpha);
        worst = worst.max(ratio);
        used += 1;
    }
    let mut warnings = Vec::new();
    q00_warning(kernel, &mut warnings);
    Ok(HypothesisReport {
        max_h1_ratio: worst,
        min_h2_value: f64::NAN,
        sample_count: used,
        pass_h1: Some(worst <= kernel.c1 * (1.0 + DEFAULT_TOLERANCE)),
        pass_h2: None,
        warnings,
    })
}

/// Records `inf Q(x,y)/M^{2β}` over `n_points` random pairs whose coordinates
/// all have magnitude in `(M, H2_SPAN·M]`, plus the corner probes where every
/// coordinate is `±M` (the closure of the region).
pub fn check_h2(kernel: &CovarianceKernel, m: f64, n_points: u64, seed: u64) -> Result<HypothesisReport> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::domain(format!("check_h2 needs M > 0, got {m}")));
    }
    let d = kernel.dim().unwrap_or(1);
    let scale = pow(m, 2.0 * kernel.beta);
    let mut worst = f64::INFINITY;
    let mut count = 0u64;
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];

    // Corner probes: all sign patterns for small d, the two extremes otherwise.
    let patterns: Vec<u64> = if 2 * d <= 12 {
        (0..(1u64 << (2 * d))).collect()
    } else {
        vec![0, (1u64 << d) - 1]
    };
    for bits in patterns {
        for j in 0..d {
            x[j] = if bits >> j & 1 == 1 { -m } else { m };
            y[j] = if bits >> (d + j) & 1 == 1 { -m } else { m };
        }
        worst = worst.min(kernel.q(&x, &y) / scale);
        count += 1;
    }

    let mut rng = StreamKey::new(seed, Domain::HypothesisSampling, 2).rng();
    for _ in 0..n_points {
        for j in 0..d {
            let sx = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            let sy = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            // (M, SPAN·M]: 1 - U lies in (0, 1].
            x[j] = sx * m * (1.0 + (H2_SPAN - 1.0) * (1.0 - rng.uniform()));
            y[j] = sy * m * (1.0 + (H2_SPAN - 1.0) * (1.0 - rng.uniform()));
        }
        worst = worst.min(kernel.q(&x, &y) / scale);
        count += 1;
    }
    let mut warnings = Vec::new();
    q00_warning(kernel, &mut warnings);
    Ok(HypothesisReport {
        max_h1_ratio: f64::NAN,
        min_h2_value: worst,
        sample_count: count,
        pass_h1: None,
        pass_h2: Some(kernel.c2 > 0.0 && worst >= kernel.c2 * (1.0 - DEFAULT_TOLERANCE)),
        warnings,
    })
}
