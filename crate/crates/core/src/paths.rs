//! Brownian motions, Brownian bridges and midpoint-pinned paths on uniform
//! grids, with sup/inf and discrete Hölder statistics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{pow, sqrt};
use crate::rng::StreamKey;
use crate::{Error, Result};

/// Uniform grid `0 = t_0 < t_1 < … < t_K = t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("time horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::domain("time grid needs at least one step"));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_k`; `t_K` is exactly the horizon.
    pub fn time(&self, k: usize) -> f64 {
        if k >= self.steps {
            self.horizon
        } else {
            self.horizon * k as f64 / self.steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Index of a grid time, accepting round-off of a millionth of a step.
    pub fn index_of(&self, time: f64) -> Result<usize> {
        let x = time / self.dt();
        let k = crate::math::floor(x + 0.5);
        if (x - k).abs() > 1e-6 || k < 0.0 || k > self.steps as f64 {
            return Err(Error::domain(format!("time {time} is not on the grid")));
        }
        Ok(k as usize)
    }
}

/// Positions of a `d`-dimensional path at the grid times, row-major
/// `(K+1) × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl PathSample {
    /// Wraps explicit positions. `values.len()` must be `(K+1)·dim`.
    pub fn from_values(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != (grid.steps() + 1) * dim {
            return Err(Error::domain("path values do not match grid and dimension"));
        }
        if !crate::math::all_finite(&values) {
            return Err(Error::domain("path values must be finite"));
        }
        Ok(PathSample { grid, dim, values })
    }

    /// The constant path `≡ c`.
    pub fn constant(grid: TimeGrid, c: &[f64]) -> Result<Self> {
        let values = (0..=grid.steps()).flat_map(|_| c.iter().copied()).collect();
        Self::from_values(grid, c.len(), values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start(&self) -> &[f64] {
        self.at(0)
    }

    pub fn end(&self) -> &[f64] {
        self.at(self.grid.steps())
    }

    /// Position at grid index `k`.
    #[inline]
    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Coordinate `j` at grid index `k`.
    #[inline]
    pub fn coord(&self, k: usize, j: usize) -> f64 {
        self.values[k * self.dim + j]
    }
}

/// Brownian motion from `x` on `grid`: `values[k+1] = values[k] + N(0, dt·I)`.
pub fn sample_bm(grid: TimeGrid, x: &[f64], key: StreamKey) -> PathSample {
    let d = x.len();
    let k = grid.steps();
    let sd = sqrt(grid.dt());
    let mut rng = key.rng();
    let mut values = vec![0.0; (k + 1) * d];
    values[..d].copy_from_slice(x);
    for step in 0..k {
        for j in 0..d {
            values[(step + 1) * d + j] = values[step * d + j] + sd * rng.normal();
        }
    }
    PathSample { grid, dim: d, values }
}

/// Turns a standard path `b` (with `b_0 = 0`) on `[0, T]` into the bridge
/// `x_j + b_s - (s/T)(b_T - r + x_j)` from `x_j` to `r`. Both endpoints are
/// set exactly.
pub fn bridge_from_standard(standard: &PathSample, x_j: f64, r: f64) -> Result<PathSample> {
    if standard.dim != 1 {
        return Err(Error::domain("bridges are one-dimensional"));
    }
    let k = standard.grid.steps();
    let b_end = standard.values[k];
    let shift = b_end - r + x_j;
    let mut values = Vec::with_capacity(k + 1);
    values.push(x_j);
    for i in 1..k {
        let frac = i as f64 / k as f64;
        values.push(x_j + standard.values[i] - frac * shift);
    }
    values.push(r);
    Ok(PathSample {
        grid: standard.grid,
        dim: 1,
        values,
    })
}

/// Brownian bridge from `x_j` to `r` on `half_grid`, built from a fresh
/// standard path drawn from `key`.
pub fn sample_bridge(half_grid: TimeGrid, x_j: f64, r: f64, key: StreamKey) -> PathSample {
    let b = sample_bm(half_grid, &[0.0], key);
    bridge_from_standard(&b, x_j, r).expect("one-dimensional by construction")
}

/// The two halves of a path pinned at `t/2`: the bridge `Y` on `[0, t/2]`
/// and the increment process `Z` on `[0, t/2]` after the midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnedParts {
    pub bridge: PathSample,
    pub tail: PathSample,
    pub r: f64,
}

impl PinnedParts {
    /// The full path on `[0, t]`: `Y` then `r + Z`.
    pub fn assemble(&self) -> PathSample {
        let kh = self.bridge.grid.steps();
        let mut values = Vec::with_capacity(2 * kh + 1);
        values.extend_from_slice(&self.bridge.values);
        values.extend(self.tail.values[1..].iter().map(|z| self.r + z));
        let grid = TimeGrid::new(2.0 * self.bridge.grid.horizon(), 2 * kh).expect("valid half grid");
        PathSample { grid, dim: 1, values }
    }
}

/// Draws `(Y, Z)` for a path from `x_j` on `[0, t]` conditioned on
/// `B_{t/2} = r`. The halves use disjoint streams (`half` 0 and 1 of `key`).
pub fn sample_pinned_parts(t: f64, x_j: f64, r: f64, steps: usize, key: StreamKey) -> Result<PinnedParts> {
    if steps == 0 || steps % 2 != 0 {
        return Err(Error::domain(format!("pinned paths need an even step count, got {steps}")));
    }
    let half = TimeGrid::new(t / 2.0, steps / 2)?;
    let bridge = sample_bridge(half, x_j, r, key.half(0));
    let tail = sample_bm(half, &[0.0], key.half(1));
    Ok(PinnedParts { bridge, tail, r })
}

/// A path on `[0, t]` from `x_j` with `B_{t/2} = r` exactly.
pub fn sample_pinned(t: f64, x_j: f64, r: f64, steps: usize, key: StreamKey) -> Result<PathSample> {
    Ok(sample_pinned_parts(t, x_j, r, steps, key)?.assemble())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStats {
    /// `max |coordinate|` over the window and all coordinates.
    pub sup_abs: f64,
    /// `min |coordinate|` over the window and all coordinates.
    pub inf_abs: f64,
    /// Largest `(½-ε)`-Hölder ratio over grid pairs in the window, maximized
    /// over coordinates.
    pub holder: f64,
}

/// Statistics of `path` over the grid window `[a, b]`.
pub fn path_stats(path: &PathSample, eps: f64, a: f64, b: f64) -> Result<PathStats> {
    check_eps(eps)?;
    let lo = path.grid.index_of(a)?;
    let hi = path.grid.index_of(b)?;
    if lo > hi {
        return Err(Error::domain("empty window"));
    }
    Ok(window_stats(path, eps, lo, hi))
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::domain(format!("ε must lie in (0, 1/2), got {eps}")));
    }
    Ok(())
}

/// `(sup, inf)` of the coordinate magnitudes over grid indices `lo..=hi`.
pub(crate) fn window_range(path: &PathSample, lo: usize, hi: usize) -> (f64, f64) {
    let mut sup = 0.0f64;
    let mut inf = f64::INFINITY;
    for v in &path.values[lo * path.dim..(hi + 1) * path.dim] {
        sup = sup.max(v.abs());
        inf = inf.min(v.abs());
    }
    (sup, inf)
}

/// Statistics over grid indices `lo..=hi`; `eps` must already be valid.
pub(crate) fn window_stats(path: &PathSample, eps: f64, lo: usize, hi: usize) -> PathStats {
    let (sup, inf) = window_range(path, lo, hi);
    let mut holder = 0.0f64;
    for j in 0..path.dim {
        holder = holder.max(holder_window(path, j, lo, hi, 0.5 - eps));
    }
    PathStats {
        sup_abs: sup,
        inf_abs: inf,
        holder,
    }
}

/// Exact `max_{lo<=v<u<=hi} |p_u - p_v| / ((u-v)·dt)^exponent` for one
/// coordinate.
///
/// Lags are scanned in increasing order; once the window's range divided by
/// the current lag's denominator cannot beat the running maximum, no larger
/// lag can either.
pub fn holder_window(path: &PathSample, coord: usize, lo: usize, hi: usize, exponent: f64) -> f64 {
    let n = hi - lo;
    if n == 0 {
        return 0.0;
    }
    let dt = path.grid.dt();
    let d = path.dim;
    let v = |k: usize| path.values[k * d + coord];
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in lo..=hi {
        min = min.min(v(k));
        max = max.max(v(k));
    }
    let range = max - min;
    let mut best = 0.0f64;
    for lag in 1..=n {
        let den = pow(lag as f64 * dt, exponent);
        if range / den <= best {
            break;
        }
        for i in lo..=hi - lag {
            let r = (v(i + lag) - v(i)).abs() / den;
            if r > best {
                best = r;
            }
        }
    }
    best
}

/// Whether the Hölder ratio of `holder_window` exceeds `threshold` for some
/// coordinate, i.e. `!(seminorm <= threshold)`.
///
/// Only lags whose denominator is below `range / threshold` can exceed the
/// threshold, which makes the test much cheaper than the seminorm when the
/// threshold is large.
pub fn holder_exceeds(path: &PathSample, lo: usize, hi: usize, exponent: f64, threshold: f64) -> bool {
    if hi <= lo {
        return false;
    }
    let dt = path.grid.dt();
    let d = path.dim;
    for coord in 0..d {
        let v = |k: usize| path.values[k * d + coord];
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in lo..=hi {
            min = min.min(v(k));
            max = max.max(v(k));
        }
        let range = max - min;
        for lag in 1..=hi - lo {
            let den = pow(lag as f64 * dt, exponent);
            if range / den <= threshold {
                break;
            }
            if (lo..=hi - lag).any(|i| (v(i + lag) - v(i)).abs() / den > threshold) {
                return true;
            }
        }
    }
    false
}
