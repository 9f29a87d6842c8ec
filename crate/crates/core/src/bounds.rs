//! Closed-form constants, the `M`-optimization and the `(t, n)` region logic
//! behind the intermittency lower bound, plus the exponent pair shared by the
//! upper and lower bounds.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::hnorm::alpha_h;
use crate::math::{floor, normal_abs_moment, pow, sqrt};
use crate::{Error, Result};

/// `((2-α)/(1-α), (2H+α)/(1-α))`, the exponents of `n` and `t` in
/// `log E[u(t,x)^n] ≍ n^a t^b`.
pub fn exponent_pair(h: f64, alpha: f64) -> Result<(f64, f64)> {
    if alpha >= 1.0 {
        return Err(Error::domain("α = 1 makes both exponents infinite"));
    }
    if !(alpha > 0.0) {
        return Err(Error::domain(format!("α must be positive, got {alpha}")));
    }
    Ok(((2.0 - alpha) / (1.0 - alpha), (2.0 * h + alpha) / (1.0 - alpha)))
}

/// Inputs of the lower-bound constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub h: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Spatial dimension.
    pub d: usize,
    /// Regularity constant of the kernel.
    pub kernel_c1: f64,
    /// Far-field floor constant of the kernel.
    pub kernel_c2: f64,
    /// `Q(0,0)`; zero for the built-in kernels.
    pub q00: f64,
    /// Constant of the external energy lower bound; unknown in general.
    pub c_h: f64,
    pub eps: f64,
    /// Kolmogorov constant `C_ε`, measured or supplied.
    pub c_eps: f64,
}

impl BoundConstants {
    /// `E|N|^{2/ε}` for a standard normal `N`.
    pub fn normal_moment(&self) -> f64 {
        normal_abs_moment(2.0 / self.eps)
    }

    /// `C_{1,ε}`: the smallest multiple of `√t` for `M` that makes each of
    /// the four path-event floors at least `√3/2`.
    pub fn c_1eps(&self) -> f64 {
        let slack = 1.0 - sqrt(3.0) / 2.0;
        let e = self.eps;
        let a4 = pow(2.0, 2.0 / e - 1.0) * self.c_eps + pow(2.0, 2.0 / e - 3.0) * self.normal_moment();
        sqrt(8.0 / slack).max(pow(a4 / slack, e / 2.0))
    }

    fn validate(&self) -> Result<()> {
        let h = self.h;
        if !(h > 0.0 && h < 0.5) {
            return Err(Error::domain(format!("H must lie in (0, 1/2), got {h}")));
        }
        if !(self.alpha > 1.0 - 2.0 * h && self.alpha <= 1.0) {
            return Err(Error::domain(format!(
                "α must lie in (1-2H, 1] = ({}, 1], got {}",
                1.0 - 2.0 * h,
                self.alpha
            )));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::domain(format!("ε must lie in (0, 1/2), got {}", self.eps)));
        }
        if self.d == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        if !(self.kernel_c1 >= 0.0 && self.kernel_c2 >= 0.0 && self.c_h > 0.0 && self.c_eps > 0.0 && self.q00 >= 0.0) {
            return Err(Error::domain("kernel and proof constants must be nonnegative (C_H, C_ε positive)"));
        }
        Ok(())
    }

    /// The second summand of `c2`, the part coming from the singular
    /// double integral.
    fn c2_singular(&self) -> Result<f64> {
        let (h, a, e) = (self.h, self.alpha, self.eps);
        let s = 2.0 * h + a - 2.0 * a * e;
        let den = (s - 1.0) * s;
        if !(s > 1.0) {
            return Err(Error::domain(format!(
                "2H + α - 2αε = {s} must exceed 1; choose ε < {}",
                (2.0 * h + a - 1.0) / (2.0 * a)
            )));
        }
        let da = pow(self.d as f64, a);
        Ok(pow(2.0, 8.0 * a - 2.0) * da * self.kernel_c1 * alpha_h(h).abs() / den)
    }

    /// `(c1, c2, c3)`.
    pub fn lower_constants(&self) -> Result<(f64, f64, f64)> {
        self.validate()?;
        let a = self.alpha;
        let c1 = pow(2.0, -2.0 * self.h) * self.kernel_c2 * self.c_h;
        let c2 = pow(2.0, 4.0 * a - 1.0) * pow(self.d as f64, a) * self.kernel_c1 + self.c2_singular()?;
        let c3 = 16.0 * self.d as f64;
        Ok((c1, c2, c3))
    }

    pub fn lower(&self) -> Result<LowerConstants> {
        let (c1, c2, c3) = self.lower_constants()?;
        Ok(LowerConstants {
            c1,
            c2,
            c3,
            alpha: self.alpha,
            h: self.h,
            d: self.d,
            c_1eps: self.c_1eps(),
            q00: self.q00,
            kernel_c1: self.kernel_c1,
            c2_singular: self.c2_singular()?,
        })
    }
}

/// The derived constants everything downstream works with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub alpha: f64,
    pub h: f64,
    pub d: usize,
    pub c_1eps: f64,
    pub q00: f64,
    pub kernel_c1: f64,
    pub c2_singular: f64,
}

impl LowerConstants {
    /// Direct construction from `(c1, c2, c3)` for a kernel with
    /// `Q(0,0) = 0`, e.g. to explore the arithmetic with a chosen `C_{1,ε}`.
    pub fn from_raw(c1: f64, c2: f64, c3: f64, alpha: f64, h: f64, c_1eps: f64) -> Self {
        LowerConstants {
            c1,
            c2,
            c3,
            alpha,
            h,
            d: floor(c3 / 16.0).max(1.0) as usize,
            c_1eps,
            q00: 0.0,
            kernel_c1: 0.0,
            c2_singular: 0.0,
        }
    }

    /// Smallest integer `N` with `c1·N - c2 > 0`.
    pub fn n_threshold(&self) -> Result<u64> {
        if !(self.c1 > 0.0) {
            return Err(Error::domain("c1 must be positive for a threshold to exist"));
        }
        let mut n = (floor(self.c2 / self.c1) + 1.0).max(1.0) as u64;
        while n > 1 && self.c1 * (n - 1) as f64 - self.c2 > 0.0 {
            n -= 1;
        }
        while self.c1 * n as f64 - self.c2 <= 0.0 {
            n += 1;
        }
        Ok(n)
    }

    /// `log` of the lower bound at a given `M`. Equals [`f_of_m`] when
    /// `Q(0,0) = 0`; otherwise the diagonal energy is bounded through
    /// `|Q(y,y)| <= (C1^½|y|^α + Q(0,0)^½)²` at `|y| <= 4√d M`.
    pub fn log_bound_at(&self, m: f64, n: u64, t: f64) -> f64 {
        if self.q00 == 0.0 {
            return f_of_m(m, n, t, self.c1, self.c2, self.c3, self.alpha, self.h);
        }
        let nf = n as f64;
        let a = self.alpha;
        let reach = sqrt(self.kernel_c1) * pow(4.0 * sqrt(self.d as f64) * m, a) + sqrt(self.q00);
        let penalty = nf * pow(t, 2.0 * self.h) * (0.5 * reach * reach + self.c2_singular * pow(m, 2.0 * a));
        self.c1 * nf * nf * pow(m, 2.0 * a) * pow(t, 2.0 * self.h) - penalty - self.c3 * nf * m * m / t
    }
}

/// `f(M) = (c1 n² - c2 n) M^{2α} t^{2H} - c3 n M² / t`.
#[allow(clippy::too_many_arguments)]
pub fn f_of_m(m: f64, n: u64, t: f64, c1: f64, c2: f64, c3: f64, alpha: f64, h: f64) -> f64 {
    let n = n as f64;
    (c1 * n * n - c2 * n) * pow(m, 2.0 * alpha) * pow(t, 2.0 * h) - c3 * n * m * m / t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Argmax {
    pub m0: f64,
    /// `f(M0)` evaluated directly.
    pub f_direct: f64,
    /// `f(M0)` from the closed form.
    pub f_closed: f64,
}

/// The maximizer `M0` of `f` over `M >= 0` and the maximum by two routes.
pub fn argmax_m(n: u64, t: f64, lc: &LowerConstants) -> Result<Argmax> {
    let a = lc.alpha;
    if a >= 1.0 {
        return Err(Error::domain("the optimizer needs α < 1"));
    }
    let gap = lc.c1 * n as f64 - lc.c2;
    if !(gap > 0.0) {
        return Err(Error::domain(format!("n = {n} is below the threshold N (c1·n - c2 = {gap})")));
    }
    let h = lc.h;
    let m0 = pow(a * gap * pow(t, 2.0 * h + 1.0) / lc.c3, 1.0 / (2.0 - 2.0 * a));
    let f_direct = f_of_m(m0, n, t, lc.c1, lc.c2, lc.c3, a, h);
    let q = 1.0 - a;
    let f_closed = q * pow(a, a / q) * pow(lc.c3, -a / q) * n as f64 * pow(gap, 1.0 / q) * pow(t, (2.0 * h + a) / q);
    Ok(Argmax { m0, f_direct, f_closed })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub n_big: u64,
    pub n0x: f64,
    pub t0x: f64,
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `N`, `n0(x)` and `t0(x)`. The exponent of the `|x|` term is `2-α` in
/// `n0(x)` and `2-2α` in `t0(x)`; both are kept as they stand although only
/// `2-2α` makes `M0/2 >= max|x_i|` follow on `L1`. The side conditions are
/// therefore rechecked wherever `M0` is used.
pub fn thresholds(lc: &LowerConstants, x: &[f64]) -> Result<Thresholds> {
    let n_big = lc.n_threshold()?;
    let a = lc.alpha;
    let x2 = 2.0 * max_abs(x);
    let n0x = (n_big as f64)
        .max((lc.c2 * a + lc.c3 * pow(x2, 2.0 - a)) / (lc.c1 * a))
        .max((lc.c2 * a + lc.c3 * pow(lc.c_1eps, 2.0 - 2.0 * a)) / (lc.c1 * a));
    let den = a * (lc.c1 * n_big as f64 - lc.c2);
    let e = 1.0 / (2.0 * lc.h + a);
    let t0x = 1.0f64
        .max(pow(lc.c3 * pow(x2, 2.0 - 2.0 * a) / den, e))
        .max(pow(lc.c3 * pow(lc.c_1eps, 2.0 - 2.0 * a) / den, e));
    Ok(Thresholds { n_big, n0x, t0x })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    L1,
    L2,
    L3,
    BelowThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionLabel {
    /// First matching region in the order L1, L2, L3.
    pub label: Region,
    pub in_l1: bool,
    pub in_l2: bool,
    pub in_l3: bool,
    pub thresholds: Thresholds,
}

pub fn classify_region(n: u64, t: f64, x: &[f64], lc: &LowerConstants) -> Result<RegionLabel> {
    let th = thresholds(lc, x)?;
    let nf = n as f64;
    let in_l1 = t >= 1.0 && nf >= th.n0x;
    let in_l2 = t >= th.t0x && n >= th.n_big;
    let in_l3 = t >= 1.0 && t <= th.t0x && n >= th.n_big && nf <= th.n0x;
    let label = if in_l1 {
        Region::L1
    } else if in_l2 {
        Region::L2
    } else if in_l3 {
        Region::L3
    } else {
        Region::BelowThreshold
    };
    Ok(RegionLabel {
        label,
        in_l1,
        in_l2,
        in_l3,
        thresholds: th,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    /// `log` lower bound for `log E[u(t,x)^n]`.
    pub log_bound: f64,
    /// The `M` used.
    pub m: f64,
    /// The part `-c3 n M² / t` that comes from the path-event probability.
    pub log_probability: f64,
    pub region: Region,
}

/// The lower bound at `M = m_override`, or at the region's choice (`M0` on
/// L1/L2, `M1` on L3). The chosen `M` must satisfy `M >= C_{1,ε}√t` and
/// `M/2 >= max|x_i|`; violations are listed in the error.
pub fn lower_bound_log(
    n: u64,
    t: f64,
    x: &[f64],
    lc: &LowerConstants,
    m_override: Option<f64>,
) -> Result<LowerBound> {
    if !(t > 0.0) || n == 0 {
        return Err(Error::domain("need t > 0 and n >= 1"));
    }
    let region = classify_region(n, t, x, lc)?;
    let m = match (m_override, region.label) {
        (Some(m), _) => m,
        (None, Region::L1 | Region::L2) => argmax_m(n, t, lc)?.m0,
        (None, Region::L3) => (2.0 * max_abs(x)).max(lc.c_1eps * sqrt(region.thresholds.t0x)),
        (None, Region::BelowThreshold) => {
            return Err(Error::SideConditions(format!(
                "(t, n) = ({t}, {n}) lies outside L1 ∪ L2 ∪ L3 (need t >= 1 and n >= N = {})",
                region.thresholds.n_big
            )))
        }
    };
    let mut violations: Vec<String> = Vec::new();
    let tol = 1.0 + 1e-12;
    if !(m * tol >= lc.c_1eps * sqrt(t)) {
        violations.push(format!("M = {m} < C_1,ε·√t = {}", lc.c_1eps * sqrt(t)));
    }
    if !(m * tol / 2.0 >= max_abs(x)) {
        violations.push(format!("M/2 = {} < max|x_i| = {}", m / 2.0, max_abs(x)));
    }
    if !violations.is_empty() {
        return Err(Error::SideConditions(violations.join("; ")));
    }
    Ok(LowerBound {
        log_bound: lc.log_bound_at(m, n, t),
        m,
        log_probability: -lc.c3 * n as f64 * m * m / t,
        region: region.label,
    })
}
