//! Exact discrete-time evolution of the companion system under impulsive
//! supervision.
//!
//! Between supervision instants the state obeys `f' = A f`, so one step of
//! length `tau` is exactly `e^(A tau) f`. Supervisions arrive mid-interval
//! and act as impulses: the variation-of-constants integral collapses the
//! update to
//!
//! `f[K+1] = e^(A tau) f[K] + e^(A tau/2) B * delta / (lambda a_h^2 b_i)`
//!
//! where `delta = f~ - y_i` is the error measured at the half step
//! `f~ = (e^(A tau/2) f[K])[0]`; using the half-step value instead of
//! `f[K][0]` removes the tau/2 evaluation offset between updates and
//! supervisions. The acceleration mode replaces the physical step `tau` by a
//! larger update step `tau'`, consuming one data sample per update and
//! treating the targets as an ordered point list.
//!
//! Both exponentials are computed once per run and cached in a
//! [`Propagator`]; runs are single-threaded and bit-deterministic.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Lu, Mat};
use crate::operators::{CompanionSystem, OperatorSpec};
use crate::signals::Trajectory;

/// State `[f, Df, ..., D^(2h-1) f]` at a grid instant.
pub type StateVector = Vec<f64>;

/// Magnitude beyond which a run is flagged as diverged (divergent regimes
/// are reported, not rejected).
pub const DIVERGENCE_LIMIT: f64 = 1e12;

const MAX_EXPM_DIM: usize = 16;

// Pade approximant data for the scaling-and-squaring matrix exponential
// (orders and theta thresholds from the standard double-precision table).
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] =
    [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by Pade approximation with scaling and squaring.
///
/// Desk-scale contract: `n <= 16`, finite entries. Relative accuracy is at
/// the level of the approximant's backward error (far below 1e-12 for the
/// norms this crate produces).
pub fn expm(m: &Mat) -> Result<Mat> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "expm needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() > MAX_EXPM_DIM {
        return Err(Error::MatrixTooLarge { n: m.rows(), max: MAX_EXPM_DIM });
    }
    if !m.is_finite() {
        return Err(Error::NonFiniteMatrix);
    }
    let norm = m.norm_1();
    if norm <= THETA_3 {
        return pade(m, &PADE_3);
    }
    if norm <= THETA_5 {
        return pade(m, &PADE_5);
    }
    if norm <= THETA_7 {
        return pade(m, &PADE_7);
    }
    if norm <= THETA_9 {
        return pade(m, &PADE_9);
    }
    if norm <= THETA_13 {
        return pade13(m);
    }
    let s = libm::ceil(libm::log2(norm / THETA_13)) as i32;
    let scaled = m.scale(libm::pow(2.0, -f64::from(s)));
    let mut r = pade13(&scaled)?;
    for _ in 0..s {
        r = r.mul(&r);
    }
    Ok(r)
}

/// Pade approximant of odd order 3..9: `U = A * sum b_(2j+1) A^(2j)`,
/// `V = sum b_(2j) A^(2j)`, result `(V - U)^-1 (V + U)`.
fn pade(a: &Mat, b: &[f64]) -> Result<Mat> {
    let n = a.rows();
    let ident = Mat::identity(n);
    let a2 = a.mul(a);
    // accumulate even powers once, reusing them for both sums
    let half_terms = b.len() / 2;
    let mut even_powers = Vec::with_capacity(half_terms);
    even_powers.push(ident.clone());
    for _ in 1..half_terms {
        let next = even_powers.last().unwrap().mul(&a2);
        even_powers.push(next);
    }
    let mut u_inner = Mat::zeros(n, n);
    let mut v = Mat::zeros(n, n);
    for (j, p) in even_powers.iter().enumerate() {
        u_inner = u_inner.add(&p.scale(b[2 * j + 1]));
        v = v.add(&p.scale(b[2 * j]));
    }
    let u = a.mul(&u_inner);
    solve_pade(&u, &v)
}

fn pade13(a: &Mat) -> Result<Mat> {
    let b = &PADE_13;
    let n = a.rows();
    let ident = Mat::identity(n);
    let a2 = a.mul(a);
    let a4 = a2.mul(&a2);
    let a6 = a2.mul(&a4);
    let u_high = a6.scale(b[13]).add(&a4.scale(b[11])).add(&a2.scale(b[9]));
    let u_inner = a6
        .mul(&u_high)
        .add(&a6.scale(b[7]))
        .add(&a4.scale(b[5]))
        .add(&a2.scale(b[3]))
        .add(&ident.scale(b[1]));
    let u = a.mul(&u_inner);
    let v_high = a6.scale(b[12]).add(&a4.scale(b[10])).add(&a2.scale(b[8]));
    let v = a6
        .mul(&v_high)
        .add(&a6.scale(b[6]))
        .add(&a4.scale(b[4]))
        .add(&a2.scale(b[2]))
        .add(&ident.scale(b[0]));
    solve_pade(&u, &v)
}

fn solve_pade(u: &Mat, v: &Mat) -> Result<Mat> {
    let lhs = v.sub(u);
    let rhs = v.add(u);
    let lu = Lu::factor(&lhs)?;
    Ok(lu.solve_mat(&rhs))
}

/// Cached step propagators: `e^(A step)`, `e^(A step/2)` and the impulse
/// direction `e^(A step/2) B`, computed once per run.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub step: f64,
    pub full: Mat,
    pub half: Mat,
    pub half_b: Vec<f64>,
}

impl Propagator {
    pub fn new(sys: &CompanionSystem, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter("step", "must be finite and > 0".to_string()));
        }
        let full = expm(&sys.a.scale(step))?;
        let half = expm(&sys.a.scale(step / 2.0))?;
        let half_b = half.mul_vec(&sys.b);
        Ok(Propagator { step, full, half, half_b })
    }

    /// Function value at the mid-interval instant, `(e^(A step/2) f)[0]`.
    pub fn half_value(&self, f: &[f64]) -> f64 {
        let mut acc = 0.0;
        for j in 0..f.len() {
            acc += self.half[(0, j)] * f[j];
        }
        acc
    }

    /// One impulsive update with an already-formed error signal:
    /// `e^(A step) f + e^(A step/2) B * err / divisor_b`.
    pub fn impulse_step(&self, f: &[f64], err: f64, divisor_b: f64) -> StateVector {
        let scaled = err / divisor_b;
        let mut next = self.full.mul_vec(f);
        for (n, hb) in next.iter_mut().zip(self.half_b.iter()) {
            *n += hb * scaled;
        }
        next
    }
}

/// Mid-interval state `e^(A step/2) f`; the input is not mutated.
pub fn half_step_state(f: &[f64], sys: &CompanionSystem, step: f64) -> Result<StateVector> {
    let half = expm(&sys.a.scale(step / 2.0))?;
    Ok(half.mul_vec(f))
}

/// One supervised update. Returns `(next_state, f~, delta)` where `f~` is
/// the half-step function value and `delta` the error signal actually used
/// (zero when no target is given, as in supervision blackout).
///
/// `lambda = 0` cannot reach this point: [`OperatorSpec`] rejects it.
pub fn forward_step(
    f: &[f64],
    sys: &CompanionSystem,
    spec: &OperatorSpec,
    b_i: f64,
    target: Option<f64>,
    step: f64,
) -> Result<(StateVector, f64, f64)> {
    let prop = Propagator::new(sys, step)?;
    Ok(forward_step_with(&prop, spec, f, b_i, target))
}

/// [`forward_step`] against a cached [`Propagator`].
pub fn forward_step_with(
    prop: &Propagator,
    spec: &OperatorSpec,
    f: &[f64],
    b_i: f64,
    target: Option<f64>,
) -> (StateVector, f64, f64) {
    debug_assert!(spec.lambda != 0.0);
    let ftilde = prop.half_value(f);
    let delta = match target {
        Some(y) => ftilde - y,
        None => 0.0,
    };
    let next = prop.impulse_step(f, delta, spec.impulse_divisor() * b_i);
    (next, ftilde, delta)
}

/// Training schedule for [`run_epochs`].
#[derive(Debug, Clone)]
pub struct TrainingConfig {
    /// Number of passes over the data (state carries across epochs).
    pub epochs: usize,
    /// Data sampling step.
    pub tau: f64,
    /// Update step; equal to `tau` unless accelerating.
    pub tau_prime: f64,
    /// Starting state; empty means all zeros.
    pub initial_state: StateVector,
    /// Epochs with supervision; later epochs evolve with the targets
    /// withheld (delta forced to zero).
    pub supervised_epochs: usize,
}

impl TrainingConfig {
    pub fn new(epochs: usize, tau: f64) -> Self {
        TrainingConfig {
            epochs,
            tau,
            tau_prime: tau,
            initial_state: Vec::new(),
            supervised_epochs: epochs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs", "must be >= 1".to_string()));
        }
        if !(self.tau_prime > 0.0) || !self.tau_prime.is_finite() {
            return Err(Error::InvalidParameter(
                "tau_prime",
                "must be finite and > 0".to_string(),
            ));
        }
        Ok(())
    }
}

/// One logged update.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// Global update counter, starting at 0.
    pub k: usize,
    /// Mid-interval supervision instant `k * step + step/2`.
    pub t: f64,
    /// Half-step function value used against the target.
    pub f_tilde: f64,
    /// Target presented at this step.
    pub y: f64,
    /// Error signal actually applied (zero during blackout).
    pub delta: f64,
}

/// Full record of a training run.
#[derive(Debug, Clone)]
pub struct RunLog {
    /// Mean of `(f~ - y_i)^2` over the samples of each epoch.
    pub mse_per_epoch: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub final_state: StateVector,
    /// Set when any state or half-step value left the finite range
    /// `|.| <= 1e12`; the run continues regardless.
    pub diverged: bool,
}

/// Run `cfg.epochs` passes over a fixed trajectory.
pub fn run_epochs(
    traj: &Trajectory,
    sys: &CompanionSystem,
    spec: &OperatorSpec,
    cfg: &TrainingConfig,
) -> Result<RunLog> {
    run_engine(sys, spec, cfg, |_| None, Some(traj))
}

/// Run with a fresh trajectory per epoch (e.g. per-epoch reshuffles). The
/// provider is called once per epoch with the 1-based epoch index.
pub fn run_epochs_generated(
    sys: &CompanionSystem,
    spec: &OperatorSpec,
    cfg: &TrainingConfig,
    mut provider: impl FnMut(usize) -> Trajectory,
) -> Result<RunLog> {
    run_engine(sys, spec, cfg, |e| Some(provider(e)), None)
}

fn run_engine(
    sys: &CompanionSystem,
    spec: &OperatorSpec,
    cfg: &TrainingConfig,
    mut generate: impl FnMut(usize) -> Option<Trajectory>,
    fixed: Option<&Trajectory>,
) -> Result<RunLog> {
    cfg.validate()?;
    let dim = sys.dim();
    let mut state: StateVector = if cfg.initial_state.is_empty() {
        vec![0.0; dim]
    } else {
        if cfg.initial_state.len() != dim {
            return Err(Error::DimensionMismatch(alloc::format!(
                "initial state has {} components, system needs {dim}",
                cfg.initial_state.len()
            )));
        }
        cfg.initial_state.clone()
    };
    let step = cfg.tau_prime;
    let prop = Propagator::new(sys, step)?;
    let divisor = spec.impulse_divisor();

    let mut mse_per_epoch = Vec::with_capacity(cfg.epochs);
    let mut trace = Vec::new();
    let mut diverged = false;
    let mut k: usize = 0;

    for epoch in 1..=cfg.epochs {
        let generated = generate(epoch);
        let data = match (&generated, fixed) {
            (Some(g), _) => g,
            (None, Some(f)) => f,
            (None, None) => unreachable!("run_engine needs a data source"),
        };
        if data.is_empty() {
            return Err(Error::DimensionMismatch("empty trajectory".to_string()));
        }
        let supervised = epoch <= cfg.supervised_epochs;
        let mut sse = 0.0;
        for i in 0..data.len() {
            let ftilde = prop.half_value(&state);
            let delta = if supervised { ftilde - data.y[i] } else { 0.0 };
            state = prop.impulse_step(&state, delta, divisor * data.b[i]);
            let err = ftilde - data.y[i];
            sse += err * err;
            trace.push(TraceRow {
                k,
                t: k as f64 * step + step / 2.0,
                f_tilde: ftilde,
                y: data.y[i],
                delta,
            });
            if !diverged && (!ftilde.is_finite() || libm::fabs(ftilde) > DIVERGENCE_LIMIT
                || state.iter().any(|v| !v.is_finite() || libm::fabs(*v) > DIVERGENCE_LIMIT))
            {
                diverged = true;
            }
            k += 1;
        }
        mse_per_epoch.push(sse / data.len() as f64);
    }
    Ok(RunLog { mse_per_epoch, trace, final_state: state, diverged })
}

/// Homogeneous evolution `f <- e^(A step) f`, returning the state at every
/// instant including the start (`steps + 1` entries).
pub fn free_evolution(
    f: &[f64],
    sys: &CompanionSystem,
    steps: usize,
    step: f64,
) -> Result<Vec<StateVector>> {
    let prop = Propagator::new(sys, step)?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut state = f.to_vec();
    out.push(state.clone());
    for _ in 0..steps {
        state = prop.full.mul_vec(&state);
        out.push(state.clone());
    }
    Ok(out)
}
