//! Supervision streams: sampling grids, the reference tasks, finite
//! differences and seeded shuffles.
//!
//! Supervision instants sit mid-interval, `t_i = (i-1) tau + tau/2`, with
//! `N = floor(T / tau)` samples per period. Each sample carries the input
//! `x(t_i)`, its time derivative, the target `y_i` and the arc weight
//! `b_i = sqrt(1 + |x'(t_i)|^2)` that rescales every impulse.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng;

/// A sampled supervision stream.
///
/// `x` and `xdot` are `N x d` in row-major `Vec<Vec<f64>>` form (`d = 1` for
/// the analytic tasks). All per-sample vectors share length `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Sampling step.
    pub tau: f64,
    /// Period covered by the grid.
    pub period: f64,
    /// Supervision instants.
    pub t: Vec<f64>,
    /// Inputs, one row per sample.
    pub x: Vec<Vec<f64>>,
    /// Input time derivatives, one row per sample.
    pub xdot: Vec<Vec<f64>>,
    /// Targets.
    pub y: Vec<f64>,
    /// Arc weights `sqrt(1 + |x'|^2)`.
    pub b: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// Assemble a trajectory from raw sampled columns. Derivatives are
    /// computed by finite differences when absent; arc weights are always
    /// recomputed from the derivatives.
    pub fn from_samples(
        tau: f64,
        period: f64,
        t: Vec<f64>,
        x: Vec<Vec<f64>>,
        xdot: Option<Vec<Vec<f64>>>,
        y: Vec<f64>,
    ) -> Result<Trajectory> {
        let n = t.len();
        if n == 0 {
            return Err(Error::EmptyGrid { tau, period });
        }
        if x.len() != n || y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "t/x/y lengths differ: {n}/{}/{}",
                x.len(),
                y.len()
            )));
        }
        let d = x[0].len();
        if x.iter().any(|row| row.len() != d) {
            return Err(Error::DimensionMismatch("ragged input rows".to_string()));
        }
        let xdot = match xdot {
            Some(v) => {
                if v.len() != n || v.iter().any(|row| row.len() != d) {
                    return Err(Error::DimensionMismatch("derivative shape mismatch".to_string()));
                }
                v
            }
            None => finite_difference_derivatives(&x, tau)?,
        };
        let b = arc_weights(&xdot);
        Ok(Trajectory { tau, period, t, x, xdot, y, b })
    }

    /// Replace the derivatives (and the arc weights derived from them).
    pub fn with_finite_difference_derivatives(mut self) -> Result<Trajectory> {
        self.xdot = finite_difference_derivatives(&self.x, self.tau)?;
        self.b = arc_weights(&self.xdot);
        Ok(self)
    }
}

/// Mid-interval sampling grid: `t_1 = tau/2`, step `tau`, `N = floor(T/tau)`.
pub fn sample_grid(tau: f64, period: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) || !(period > 0.0) || !tau.is_finite() || !period.is_finite() {
        return Err(Error::InvalidParameter("tau", "tau and period must be finite and > 0".to_string()));
    }
    if tau >= period {
        return Err(Error::EmptyGrid { tau, period });
    }
    // small nudge so exact divisors are not lost to representation error
    let n = libm::floor(period / tau + 1e-9) as usize;
    if n == 0 {
        return Err(Error::EmptyGrid { tau, period });
    }
    Ok((0..n).map(|k| (k as f64) * tau + tau / 2.0).collect())
}

/// The built-in analytic tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// `x = sin t`, `y = 2x - 1`.
    Sine,
    /// `x = -3 cos t`, `y = x + 3`.
    Cosine,
}

/// Sample one of the analytic tasks over `[0, period]` with exact
/// (analytic) derivatives.
pub fn build_task(kind: TaskKind, tau: f64, period: f64) -> Result<Trajectory> {
    let t = sample_grid(tau, period)?;
    let n = t.len();
    let mut x = Vec::with_capacity(n);
    let mut xdot = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for &ti in &t {
        let (xi, di, yi) = match kind {
            TaskKind::Sine => {
                let s = libm::sin(ti);
                (s, libm::cos(ti), 2.0 * s - 1.0)
            }
            TaskKind::Cosine => {
                let c = -3.0 * libm::cos(ti);
                (c, 3.0 * libm::sin(ti), c + 3.0)
            }
        };
        x.push(vec![xi]);
        xdot.push(vec![di]);
        y.push(yi);
    }
    let b = arc_weights(&xdot);
    Ok(Trajectory { tau, period, t, x, xdot, y, b })
}

/// Arc weights `b_i = sqrt(1 + |x'_i|^2)`.
pub fn arc_weights(xdot: &[Vec<f64>]) -> Vec<f64> {
    xdot.iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|v| v * v).sum();
            libm::sqrt(1.0 + sq)
        })
        .collect()
}

/// Finite-difference time derivatives on a fixed-step grid: central
/// differences inside, one-sided first-order at the two endpoints (so the
/// endpoint columns carry O(tau) error while the interior is O(tau^2)).
pub fn finite_difference_derivatives(x: &[Vec<f64>], tau: f64) -> Result<Vec<Vec<f64>>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::DimensionMismatch(format!(
            "finite differences need at least 2 samples, got {n}"
        )));
    }
    let d = x[0].len();
    let mut out = vec![vec![0.0; d]; n];
    for j in 0..d {
        out[0][j] = (x[1][j] - x[0][j]) / tau;
        out[n - 1][j] = (x[n - 1][j] - x[n - 2][j]) / tau;
    }
    for i in 1..n - 1 {
        for j in 0..d {
            out[i][j] = (x[i + 1][j] - x[i - 1][j]) / (2.0 * tau);
        }
    }
    Ok(out)
}

/// Seeded random permutation of the data rows. The time grid is left in
/// place: the system keeps its own clock, only the order in which samples
/// arrive is shuffled, and each row keeps its `(x, xdot, y, b)` pairing.
pub fn permute(traj: &Trajectory, seed: u64) -> Trajectory {
    let idx = rng::permutation(traj.len(), seed);
    Trajectory {
        tau: traj.tau,
        period: traj.period,
        t: traj.t.clone(),
        x: idx.iter().map(|&i| traj.x[i].clone()).collect(),
        xdot: idx.iter().map(|&i| traj.xdot[i].clone()).collect(),
        y: idx.iter().map(|&i| traj.y[i]).collect(),
        b: idx.iter().map(|&i| traj.b[i]).collect(),
    }
}
