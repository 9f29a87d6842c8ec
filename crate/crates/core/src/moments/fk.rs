//! Pathwise Feynman–Kac sampling: one draw of the noise on a space-time
//! grid, then `u(t,x) = E^B[u0(B_t) exp(W(g) - ½‖g‖²)]` by an inner average
//! over Brownian paths.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::hnorm::TemporalCovariance;
use crate::kernels::CovarianceKernel;
use crate::linalg::{cholesky_psd, lower_mul};
use crate::math::{exp, sqrt};
use crate::paths::{sample_bm, TimeGrid};
use crate::rng::{Domain, StreamKey};
use crate::stats::LogMeanAccumulator;
use crate::{Error, Result};

use super::InitialCondition;

#[derive(Debug, Clone, PartialEq)]
pub struct FkConfig {
    pub t: f64,
    /// Starting point (one-dimensional).
    pub x: f64,
    pub kernel: CovarianceKernel,
    pub h: f64,
    pub u0: InitialCondition,
    /// Sorted spatial endpoints `z_0 < … < z_{m-1}`.
    pub z_grid: Vec<f64>,
    pub steps: usize,
    pub inner_samples: u64,
    pub seed: u64,
}

/// One realization of `u(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkDraw {
    pub value: f64,
    pub log_value: f64,
    /// Inner paths that left the spatial grid and were clamped to its ends.
    pub out_of_range: u64,
}

/// Precomputed factors for repeated draws of one configuration.
///
/// The noise array `ξ_{k,m} = W(1_{(t_k,t_{k+1}]} × [0, z_m])` has the
/// separable covariance `D ⊗ Q_grid`, sampled as `L_T Z L_Qᵀ` from the two
/// Cholesky factors.
#[derive(Debug, Clone)]
pub struct FkSimulator {
    cfg: FkConfig,
    grid: TimeGrid,
    row: Vec<f64>,
    l_time: Vec<f64>,
    l_space: Vec<f64>,
    q_grid: Vec<f64>,
    pub warnings: Vec<String>,
}

impl FkSimulator {
    pub fn new(cfg: &FkConfig) -> Result<Self> {
        let cov = TemporalCovariance::new(cfg.h)?;
        let grid = TimeGrid::new(cfg.t, cfg.steps)?;
        cfg.u0.validate()?;
        if cfg.kernel.dim().is_some_and(|d| d != 1) {
            return Err(Error::domain("the solution sampler is one-dimensional"));
        }
        let z = &cfg.z_grid;
        if z.len() < 2 || z.windows(2).any(|w| !(w[1] > w[0])) || !crate::math::all_finite(z) {
            return Err(Error::domain("spatial grid must be finite, sorted and have two or more nodes"));
        }
        if cfg.inner_samples == 0 {
            return Err(Error::domain("need at least one inner path"));
        }
        let mut warnings = Vec::new();
        let reach = 4.0 * sqrt(cfg.t);
        if z[0] > cfg.x - reach || z[z.len() - 1] < cfg.x + reach {
            warnings.push(format!(
                "spatial grid [{}, {}] does not cover x ± 4√t = [{}, {}]",
                z[0],
                z[z.len() - 1],
                cfg.x - reach,
                cfg.x + reach
            ));
        }
        let k = grid.steps();
        let row = cov.toeplitz_row(&grid);
        let mut dmat = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                dmat[i * k + j] = row[i.abs_diff(j)];
            }
        }
        let l_time = cholesky_psd(&dmat, k, "temporal increments")?;
        let m = z.len();
        let mut q_grid = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                q_grid[a * m + b] = cfg.kernel.q(&[z[a]], &[z[b]]);
            }
        }
        let l_space = cholesky_psd(&q_grid, m, &cfg.kernel.name())?;
        Ok(FkSimulator {
            cfg: cfg.clone(),
            grid,
            row,
            l_time,
            l_space,
            q_grid,
            warnings,
        })
    }

    /// The noise array for draw `w`, row-major `K × m`.
    pub fn noise(&self, w: u64) -> Vec<f64> {
        let k = self.grid.steps();
        let m = self.cfg.z_grid.len();
        let mut rng = StreamKey::new(self.cfg.seed, Domain::NoiseField, w).rng();
        let mut zmat = vec![0.0; k * m];
        rng.fill_normal(&mut zmat);
        // A = L_T Z, column by column.
        let mut a = vec![0.0; k * m];
        let mut col = vec![0.0; k];
        for b in 0..m {
            for i in 0..k {
                col[i] = zmat[i * m + b];
            }
            for (i, v) in lower_mul(&self.l_time, k, &col).into_iter().enumerate() {
                a[i * m + b] = v;
            }
        }
        // ξ = A L_Qᵀ, row by row.
        let mut xi = vec![0.0; k * m];
        for i in 0..k {
            let r = lower_mul(&self.l_space, m, &a[i * m..(i + 1) * m]);
            xi[i * m..(i + 1) * m].copy_from_slice(&r);
        }
        xi
    }

    /// Index of the grid node nearest to `y`, and whether `y` lies more than
    /// half an edge spacing outside the grid.
    fn snap(&self, y: f64) -> (usize, bool) {
        let z = &self.cfg.z_grid;
        let m = z.len();
        let i = z.partition_point(|&v| v < y);
        if i == 0 {
            return (0, y < z[0] - 0.5 * (z[1] - z[0]));
        }
        if i == m {
            return (m - 1, y > z[m - 1] + 0.5 * (z[m - 1] - z[m - 2]));
        }
        if y - z[i - 1] <= z[i] - y {
            (i - 1, false)
        } else {
            (i, false)
        }
    }

    pub fn draw(&self, w: u64) -> FkDraw {
        let xi = self.noise(w);
        let k = self.grid.steps();
        let m = self.cfg.z_grid.len();
        let mut acc = LogMeanAccumulator::new();
        let mut out_of_range = 0;
        let mut idx = vec![0usize; k];
        for i in 0..self.cfg.inner_samples {
            let key = StreamKey::new(self.cfg.seed, Domain::InnerPaths, w).path(i as u32);
            let path = sample_bm(self.grid, &[self.cfg.x], key);
            let mut clamped = false;
            // Rectangle j carries the position at t - t_j.
            for (j, slot) in idx.iter_mut().enumerate() {
                let (s, out) = self.snap(path.coord(k - j, 0));
                *slot = s;
                clamped |= out;
            }
            out_of_range += clamped as u64;
            let wg: f64 = idx.iter().enumerate().map(|(j, &s)| xi[j * m + s]).sum();
            let mut norm2 = 0.0;
            for (a, &sa) in idx.iter().enumerate() {
                let qrow = &self.q_grid[sa * m..(sa + 1) * m];
                let mut s = 0.0;
                for (b, &sb) in idx.iter().enumerate() {
                    s += self.row[a.abs_diff(b)] * qrow[sb];
                }
                norm2 += s;
            }
            let u0 = self.cfg.u0.eval(path.end());
            acc.push(crate::math::ln(u0) + wg - 0.5 * norm2);
        }
        let log_value = acc.log_mean();
        FkDraw {
            value: exp(log_value),
            log_value,
            out_of_range,
        }
    }
}

/// One realization of `u(t, x)` from noise draw `w`.
pub fn simulate_solution_fk(cfg: &FkConfig, w: u64) -> Result<FkDraw> {
    Ok(FkSimulator::new(cfg)?.draw(w))
}
