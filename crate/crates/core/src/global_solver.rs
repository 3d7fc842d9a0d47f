//! Batch (global) solution through the Green's function of the reduced
//! operator.
//!
//! With distinct characteristic roots `l_1..l_2h`, the unit-jump impulse
//! response of the monic reduced operator is the partial-fraction sum
//! `g(t) = sum_l w_l e^(l_l t)` with `w_l = 1 / prod_(m != l) (l_l - l_m)`;
//! causally it vanishes for `t < 0`, the non-causal variant carries the same
//! modal sum on the whole line (divergent on the negative axis for stable
//! roots, reported via a saturation flag rather than hidden). Any leading
//! coefficient of the original operator is carried as an explicit
//! `1 / a_h^2` scale on the kernel.
//!
//! Evaluating the solution ansatz
//! `f(t) = sum_l c_l e^(l_l t) - (nu/lambda) sum_i (f(t_i) - y_i)/b_i g(t - t_i)`
//! (`nu = (-1)^h`) at the supervision instants and appending `2h` boundary
//! rows (periodic `f^(s)(0) = f^(s)(T)` or Cauchy values) yields the dense
//! square system `M fvec = rhs` in the unknowns
//! `[f(t_1)..f(t_N), c_1..c_2h]`, assembled here with the block layout
//! `M = (lambda/nu)(I_N + C) + G`. Conjugate root pairs are folded into the
//! real basis `e^(at) cos(bt)`, `e^(at) sin(bt)` so `M` stays real.
//!
//! The same module carries the functional-value quadrature used to compare
//! causal, non-causal and online solutions on one scale.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrator::Propagator;
use crate::linalg::{self, Lu, Mat};
use crate::operators::{CompanionSystem, OperatorSpec};
use crate::signals::Trajectory;

/// Magnitude cap for kernel evaluations; beyond it the value is clamped and
/// the evaluation reported as saturated.
pub const KERNEL_CLAMP: f64 = 1e300;
// exp argument producing roughly KERNEL_CLAMP
const EXP_ARG_CLAMP: f64 = 690.0;

/// Support convention of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    /// `g(t) = 0` for `t < 0`.
    Causal,
    /// Analytic continuation of the modal sum on the whole line.
    NonCausal,
}

/// Partial-fraction Green's function of the reduced operator.
#[derive(Debug, Clone)]
pub struct GreensFunction {
    /// Characteristic roots, sorted by real then imaginary part.
    pub roots: Vec<Complex64>,
    pub mode: KernelMode,
    /// `(-1)^h` for operator order `h`.
    pub nu: f64,
    /// Kernel scale `1 / a_h^2` carried for callers (1 when roots are
    /// chosen directly).
    pub leading_scale: f64,
    weights: Vec<Complex64>,
}

impl GreensFunction {
    /// Build from a distinct, conjugate-closed root set of even length `2h`.
    pub fn new(roots: &[Complex64], mode: KernelMode, leading_scale: f64) -> Result<Self> {
        let n = roots.len();
        if n == 0 || n % 2 != 0 {
            return Err(Error::DimensionMismatch(alloc::format!(
                "kernel needs an even positive number of roots, got {n}"
            )));
        }
        if roots.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
            return Err(Error::NonFiniteMatrix);
        }
        // conjugate closure keeps the kernel and its basis real
        linalg::split_conjugate_roots(roots)?;
        let scale = roots.iter().fold(1.0_f64, |m, r| m.max(r.norm()));
        let mut weights = Vec::with_capacity(n);
        for l in 0..n {
            let mut prod = Complex64::new(1.0, 0.0);
            for m in 0..n {
                if m == l {
                    continue;
                }
                let d = roots[l] - roots[m];
                if d.norm() <= 1e-8 * scale {
                    return Err(Error::RepeatedRoots);
                }
                prod *= d;
            }
            weights.push(Complex64::new(1.0, 0.0) / prod);
        }
        let mut sorted: Vec<Complex64> = roots.to_vec();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            roots[a]
                .re
                .partial_cmp(&roots[b].re)
                .unwrap()
                .then(roots[a].im.partial_cmp(&roots[b].im).unwrap())
        });
        sorted.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        let weights = order.iter().map(|&i| weights[i]).collect();
        Ok(GreensFunction { roots: sorted, mode, nu: nu_for_dim(n), leading_scale, weights })
    }

    /// Kernel of a companion system's root set, carrying the `1 / a_h^2`
    /// scale of the operator spec.
    pub fn for_system(
        sys: &CompanionSystem,
        spec: &OperatorSpec,
        mode: KernelMode,
    ) -> Result<Self> {
        let lead = spec.alpha_lead();
        GreensFunction::new(&sys.roots, mode, 1.0 / (lead * lead))
    }

    /// Operator order `h`.
    pub fn order_h(&self) -> usize {
        self.roots.len() / 2
    }

    /// `g(t)`, clamped to `KERNEL_CLAMP` in magnitude.
    pub fn eval(&self, t: f64) -> f64 {
        self.eval_deriv_checked(0, t).0
    }

    /// `g^(s)(t)`, clamped.
    pub fn eval_deriv(&self, s: usize, t: f64) -> f64 {
        self.eval_deriv_checked(s, t).0
    }

    /// `g^(s)(t)` together with a saturation flag (true when any modal term
    /// or the sum had to be clamped).
    pub fn eval_deriv_checked(&self, s: usize, t: f64) -> (f64, bool) {
        if matches!(self.mode, KernelMode::Causal) && t < 0.0 {
            return (0.0, false);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut saturated = false;
        for (root, w) in self.roots.iter().zip(self.weights.iter()) {
            let mut arg = root.re * t;
            if arg > EXP_ARG_CLAMP {
                arg = EXP_ARG_CLAMP;
                saturated = true;
            }
            let amp = libm::exp(arg);
            let phase = root.im * t;
            let e = Complex64::new(amp * libm::cos(phase), amp * libm::sin(phase));
            let mut term = *w * e;
            for _ in 0..s {
                term *= *root;
            }
            acc += term;
        }
        let mut v = acc.re * self.leading_scale;
        if !v.is_finite() || libm::fabs(v) > KERNEL_CLAMP {
            v = if v.is_nan() { KERNEL_CLAMP } else { libm::copysign(KERNEL_CLAMP, v) };
            saturated = true;
        }
        (v, saturated)
    }
}

fn nu_for_dim(dim: usize) -> f64 {
    if (dim / 2) % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Real kernel-basis functions spanning `Ker(Q)`: `e^(lt)` for real roots,
/// `e^(at) cos(bt)` / `e^(at) sin(bt)` for conjugate pairs. Order: real
/// roots ascending, then pairs by `(a, b)` with the cosine member first.
#[derive(Debug, Clone, Copy)]
enum BasisFn {
    Real(f64),
    Cos(f64, f64),
    Sin(f64, f64),
}

fn kernel_basis(roots: &[Complex64]) -> Result<Vec<BasisFn>> {
    let (mut reals, mut pairs) = linalg::split_conjugate_roots(roots)?;
    reals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
    let mut basis = Vec::with_capacity(roots.len());
    for r in reals {
        basis.push(BasisFn::Real(r));
    }
    for (a, b) in pairs {
        basis.push(BasisFn::Cos(a, b));
        basis.push(BasisFn::Sin(a, b));
    }
    Ok(basis)
}

fn basis_eval(f: &BasisFn, s: usize, t: f64) -> f64 {
    match *f {
        BasisFn::Real(l) => {
            let mut v = libm::exp(l * t);
            for _ in 0..s {
                v *= l;
            }
            v
        }
        BasisFn::Cos(a, b) | BasisFn::Sin(a, b) => {
            let z = Complex64::new(a, b);
            let amp = libm::exp(a * t);
            let mut w = Complex64::new(amp * libm::cos(b * t), amp * libm::sin(b * t));
            for _ in 0..s {
                w *= z;
            }
            if matches!(*f, BasisFn::Cos(..)) {
                w.re
            } else {
                w.im
            }
        }
    }
}

/// Boundary closure of the global system.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    /// `f^(s)(0) = f^(s)(T)` for `s = 0..2h-1`.
    Periodic,
    /// `f^(s)(0) = v_s`; carries the `2h` values.
    Cauchy(Vec<f64>),
}

/// Assembled dense system `M fvec = rhs`.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub m: Mat,
    pub rhs: Vec<f64>,
    /// Supervision block `G^g[j][i] = g(t_j - t_i) / b_i`.
    pub gg: Mat,
    /// Kernel block `C^g[j][l] = -basis_l(t_j)`.
    pub cg: Mat,
    pub boundary: Boundary,
    /// 1-norm condition estimate of `M` (infinite when factorization fails).
    pub cond_estimate: f64,
    /// True when any kernel evaluation was clamped during assembly.
    pub saturated: bool,
    pub n_samples: usize,
    /// Kernel dimension `2h`.
    pub dim_kernel: usize,
    pub lambda: f64,
    pub nu: f64,
    lu: Option<Lu>,
}

/// Build the `(N + 2h)` square system for a trajectory and kernel.
/// Ill-conditioning is reported through `cond_estimate`, never rejected.
pub fn assemble_system(
    traj: &Trajectory,
    gf: &GreensFunction,
    lambda: f64,
    boundary: Boundary,
) -> Result<GlobalSystem> {
    if traj.is_empty() {
        return Err(Error::DimensionMismatch("empty trajectory".to_string()));
    }
    if lambda == 0.0 {
        return Err(Error::InvalidParameter("lambda", "must be nonzero".to_string()));
    }
    let n = traj.len();
    let dim_kernel = gf.roots.len();
    let h2 = dim_kernel;
    if let Boundary::Cauchy(v) = &boundary {
        if v.len() != h2 {
            return Err(Error::DimensionMismatch(alloc::format!(
                "Cauchy boundary needs {h2} values, got {}",
                v.len()
            )));
        }
    }
    let basis = kernel_basis(&gf.roots)?;
    let lam_nu = lambda / gf.nu;
    let period = traj.period;
    let size = n + h2;
    let mut m = Mat::zeros(size, size);
    let mut rhs = vec![0.0; size];
    let mut gg = Mat::zeros(n, n);
    let mut cg = Mat::zeros(n, h2);
    let mut saturated = false;

    // supervision rows
    for j in 0..n {
        for i in 0..n {
            let (g, sat) = gf.eval_deriv_checked(0, traj.t[j] - traj.t[i]);
            saturated |= sat;
            gg[(j, i)] = g / traj.b[i];
        }
        for (l, bf) in basis.iter().enumerate() {
            cg[(j, l)] = -basis_eval(bf, 0, traj.t[j]);
        }
        for i in 0..n {
            m[(j, i)] = gg[(j, i)];
            rhs[j] += gg[(j, i)] * traj.y[i];
        }
        m[(j, j)] += lam_nu;
        for l in 0..h2 {
            m[(j, n + l)] = lam_nu * cg[(j, l)];
        }
    }

    // boundary rows
    for s in 0..h2 {
        let row = n + s;
        match &boundary {
            Boundary::Periodic => {
                for i in 0..n {
                    let (g_end, sat_a) = gf.eval_deriv_checked(s, period - traj.t[i]);
                    let (g_start, sat_b) = gf.eval_deriv_checked(s, -traj.t[i]);
                    saturated |= sat_a || sat_b;
                    let coeff = (g_end - g_start) / traj.b[i];
                    m[(row, i)] = coeff;
                    rhs[row] += coeff * traj.y[i];
                }
                for (l, bf) in basis.iter().enumerate() {
                    m[(row, n + l)] =
                        lam_nu * (basis_eval(bf, s, 0.0) - basis_eval(bf, s, period));
                }
            }
            Boundary::Cauchy(values) => {
                for i in 0..n {
                    let (g_start, sat) = gf.eval_deriv_checked(s, -traj.t[i]);
                    saturated |= sat;
                    let coeff = -g_start / traj.b[i];
                    m[(row, i)] = coeff;
                    rhs[row] += coeff * traj.y[i];
                }
                for (l, bf) in basis.iter().enumerate() {
                    m[(row, n + l)] = lam_nu * basis_eval(bf, s, 0.0);
                }
                rhs[row] += lam_nu * values[s];
            }
        }
    }

    let (lu, cond_estimate) = match Lu::factor(&m) {
        Ok(f) => {
            let cond = linalg::condest1(&m, &f);
            (Some(f), cond)
        }
        Err(_) => (None, f64::INFINITY),
    };

    Ok(GlobalSystem {
        m,
        rhs,
        gg,
        cg,
        boundary,
        cond_estimate,
        saturated,
        n_samples: n,
        dim_kernel: h2,
        lambda,
        nu: gf.nu,
        lu,
    })
}

/// Solved global system: supervision-point values, kernel coefficients and
/// the 2-norm back-substitution residual.
#[derive(Debug, Clone)]
pub struct GlobalSolution {
    pub fbar: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub residual: f64,
}

/// Solve the assembled system.
pub fn solve_global(gs: &GlobalSystem) -> Result<GlobalSolution> {
    let lu = gs
        .lu
        .as_ref()
        .ok_or(Error::SingularSystem { cond_estimate: gs.cond_estimate })?;
    let sol = lu.solve(&gs.rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem { cond_estimate: gs.cond_estimate });
    }
    let check = gs.m.mul_vec(&sol);
    let residual = libm::sqrt(
        check
            .iter()
            .zip(gs.rhs.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>(),
    );
    let fbar = sol[..gs.n_samples].to_vec();
    let coeffs = sol[gs.n_samples..].to_vec();
    Ok(GlobalSolution { fbar, coeffs, residual })
}

/// Evaluate the reconstructed solution
/// `f(t) = sum_l c_l basis_l(t) - (nu/lambda) sum_i (fbar_i - y_i)/b_i g(t - t_i)`.
pub fn reconstruct(
    gf: &GreensFunction,
    coeffs: &[f64],
    traj: &Trajectory,
    fbar: &[f64],
    lambda: f64,
    t: f64,
) -> f64 {
    let basis = kernel_basis(&gf.roots).expect("kernel roots were validated at construction");
    let mut v = 0.0;
    for (c, bf) in coeffs.iter().zip(basis.iter()) {
        v += c * basis_eval(bf, 0, t);
    }
    let mut impulse = 0.0;
    for i in 0..traj.len() {
        impulse += (fbar[i] - traj.y[i]) / traj.b[i] * gf.eval(t - traj.t[i]);
    }
    v - gf.nu / lambda * impulse
}

/// Parameters of the online-to-global convergence bound
/// `C (1 + 1/lambda) (1 + C/lambda)^(N-1) e^(-beta T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceParams {
    /// Constant `C >= 1` from the cited bound.
    pub c: f64,
    /// Rate `beta > 0`, positively related to the dissipation.
    pub beta_conv: f64,
    pub lambda: f64,
    pub n: usize,
    pub period: f64,
}

impl ConvergenceParams {
    pub fn new(c: f64, beta_conv: f64, lambda: f64, n: usize, period: f64) -> Result<Self> {
        if !(c >= 1.0) {
            return Err(Error::InvalidParameter("c", "must be >= 1".to_string()));
        }
        if !(beta_conv > 0.0) {
            return Err(Error::InvalidParameter("beta_conv", "must be > 0".to_string()));
        }
        if lambda == 0.0 {
            return Err(Error::InvalidParameter("lambda", "must be nonzero".to_string()));
        }
        Ok(ConvergenceParams { c, beta_conv, lambda, n, period })
    }
}

/// Left-hand side of the convergence condition; values below 1 predict that
/// the online solution approaches the global one. A calculator, not an
/// oracle: `C` and `beta` are user-supplied diagnostics.
pub fn convergence_indicator(p: &ConvergenceParams) -> f64 {
    let base = 1.0 + p.c / p.lambda;
    p.c * (1.0 + 1.0 / p.lambda)
        * libm::pow(base, (p.n as f64) - 1.0)
        * libm::exp(-p.beta_conv * p.period)
}

/// Samples of a candidate solution on a quadrature grid, with enough
/// derivatives to apply the operator `P`.
#[derive(Debug, Clone)]
pub struct QuadratureStack {
    /// Quadrature instants, ascending.
    pub t: Vec<f64>,
    /// Function values on the grid.
    pub fbar: Vec<f64>,
    /// `derivs[s-1][k] = f^(s)(t_k)` for `s = 1..=h`.
    pub derivs: Vec<Vec<f64>>,
    /// Function values at the supervision instants (for the penalty term).
    pub fbar_at_supervision: Vec<f64>,
}

/// Trapezoidal evaluation of the regularization functional
/// `lambda int (P f)^2 e^(theta t) dt + mu int f^2 e^(theta t) dt
///  + sum_i psi(t_i) (f(t_i) - y_i)^2` with `psi(t_i) = e^(theta t_i)/b_i`.
pub fn functional_value(
    stack: &QuadratureStack,
    traj: &Trajectory,
    spec: &OperatorSpec,
) -> Result<f64> {
    let h = spec.order_h;
    let m = stack.t.len();
    if stack.fbar.len() != m || stack.derivs.len() < h {
        return Err(Error::DimensionMismatch(
            "quadrature stack shape does not match its grid".to_string(),
        ));
    }
    for d in &stack.derivs {
        if d.len() != m {
            return Err(Error::DimensionMismatch("derivative row length mismatch".to_string()));
        }
    }
    if stack.fbar_at_supervision.len() != traj.len() {
        return Err(Error::DimensionMismatch(
            "supervision values do not match the trajectory".to_string(),
        ));
    }
    let pf = |k: usize| -> f64 {
        let mut v = spec.alpha[0] * stack.fbar[k];
        for s in 1..=h {
            v += spec.alpha[s] * stack.derivs[s - 1][k];
        }
        v
    };
    let mut smooth = 0.0;
    let mut zero_order = 0.0;
    for k in 0..m.saturating_sub(1) {
        let dt = stack.t[k + 1] - stack.t[k];
        let wa = libm::exp(spec.theta * stack.t[k]);
        let wb = libm::exp(spec.theta * stack.t[k + 1]);
        let pa = pf(k);
        let pb = pf(k + 1);
        smooth += 0.5 * dt * (pa * pa * wa + pb * pb * wb);
        if spec.mu != 0 {
            let fa = stack.fbar[k];
            let fb = stack.fbar[k + 1];
            zero_order += 0.5 * dt * (fa * fa * wa + fb * fb * wb);
        }
    }
    let mut penalty = 0.0;
    for i in 0..traj.len() {
        let psi = libm::exp(spec.theta * traj.t[i]) / traj.b[i];
        let e = stack.fbar_at_supervision[i] - traj.y[i];
        penalty += psi * e * e;
    }
    Ok(spec.lambda * smooth + f64::from(spec.mu) * zero_order + penalty)
}

/// Refined sampling of the online (forward) trajectory for the functional
/// quadrature: `refine` homogeneous sub-steps per update, the impulse
/// applied at the mid sub-step; grid spans `[0, N * step]` of the final
/// epoch. Pre-impulse values are recorded at the supervision instants.
/// `refine` must be even.
pub fn forward_quadrature_stack(
    traj: &Trajectory,
    sys: &CompanionSystem,
    spec: &OperatorSpec,
    cfg: &crate::integrator::TrainingConfig,
    refine: usize,
) -> Result<QuadratureStack> {
    if refine == 0 || refine % 2 != 0 {
        return Err(Error::InvalidParameter("refine", "must be a positive even count".to_string()));
    }
    cfg.validate()?;
    let h = spec.order_h;
    let dim = sys.dim();
    let n = traj.len();
    if n == 0 {
        return Err(Error::DimensionMismatch("empty trajectory".to_string()));
    }
    let step = cfg.tau_prime;
    // warm up through all but the last epoch with the exact recursion
    let mut state = if cfg.initial_state.is_empty() {
        vec![0.0; dim]
    } else {
        cfg.initial_state.clone()
    };
    if state.len() != dim {
        return Err(Error::DimensionMismatch("initial state dimension".to_string()));
    }
    let prop = Propagator::new(sys, step)?;
    let divisor = spec.impulse_divisor();
    for epoch in 1..cfg.epochs {
        let supervised = epoch <= cfg.supervised_epochs;
        for i in 0..n {
            let ftilde = prop.half_value(&state);
            let delta = if supervised { ftilde - traj.y[i] } else { 0.0 };
            state = prop.impulse_step(&state, delta, divisor * traj.b[i]);
        }
    }
    // final epoch with refined sampling
    let supervised = cfg.epochs <= cfg.supervised_epochs;
    let sub = expm_substep(sys, step / refine as f64)?;
    let mut t_grid = Vec::with_capacity(n * refine + 1);
    let mut fbar = Vec::with_capacity(n * refine + 1);
    let mut derivs = vec![Vec::with_capacity(n * refine + 1); h];
    let mut fbar_sup = Vec::with_capacity(n);
    let record = |t: f64, s: &[f64], fbar: &mut Vec<f64>, derivs: &mut Vec<Vec<f64>>, t_grid: &mut Vec<f64>| {
        t_grid.push(t);
        fbar.push(s[0]);
        for k in 1..=h {
            derivs[k - 1].push(s[k]);
        }
    };
    for i in 0..n {
        let base = i as f64 * step;
        for q in 0..refine {
            let t = base + q as f64 * step / refine as f64;
            record(t, &state, &mut fbar, &mut derivs, &mut t_grid);
            if q == refine / 2 {
                // supervision instant: the pre-impulse value is the one the
                // error is measured against
                let ftilde = state[0];
                fbar_sup.push(ftilde);
                let delta = if supervised { ftilde - traj.y[i] } else { 0.0 };
                let scaled = delta / (divisor * traj.b[i]);
                for (sv, bv) in state.iter_mut().zip(sys.b.iter()) {
                    *sv += bv * scaled;
                }
            }
            state = sub.mul_vec(&state);
        }
    }
    record(n as f64 * step, &state, &mut fbar, &mut derivs, &mut t_grid);
    Ok(QuadratureStack { t: t_grid, fbar, derivs, fbar_at_supervision: fbar_sup })
}

fn expm_substep(sys: &CompanionSystem, dt: f64) -> Result<Mat> {
    crate::integrator::expm(&sys.a.scale(dt))
}

/// Quadrature stack of a solved global system: the reconstruction sampled on
/// a uniform grid over `[0, N tau]`, derivatives by central differences
/// (one-sided at the ends), supervision values from the solve itself.
pub fn global_quadrature_stack(
    gf: &GreensFunction,
    sol: &GlobalSolution,
    traj: &Trajectory,
    lambda: f64,
    order_h: usize,
    refine: usize,
) -> Result<QuadratureStack> {
    if refine == 0 {
        return Err(Error::InvalidParameter("refine", "must be positive".to_string()));
    }
    let n = traj.len();
    let m = n * refine + 1;
    let dt = traj.tau / refine as f64;
    let t_grid: Vec<f64> = (0..m).map(|k| k as f64 * dt).collect();
    let fbar: Vec<f64> = t_grid
        .iter()
        .map(|&t| reconstruct(gf, &sol.coeffs, traj, &sol.fbar, lambda, t))
        .collect();
    let mut derivs: Vec<Vec<f64>> = Vec::with_capacity(order_h);
    let mut prev: &Vec<f64> = &fbar;
    let mut storage: Vec<Vec<f64>> = Vec::new();
    for _ in 0..order_h {
        let mut d = vec![0.0; m];
        d[0] = (prev[1] - prev[0]) / dt;
        d[m - 1] = (prev[m - 1] - prev[m - 2]) / dt;
        for k in 1..m - 1 {
            d[k] = (prev[k + 1] - prev[k - 1]) / (2.0 * dt);
        }
        storage.push(d);
        prev = storage.last().unwrap();
    }
    derivs.append(&mut storage);
    Ok(QuadratureStack {
        t: t_grid,
        fbar,
        derivs,
        fbar_at_supervision: sol.fbar.clone(),
    })
}
