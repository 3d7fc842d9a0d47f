//! Differential-operator specifications and their companion-form systems.
//!
//! A spec describes the operator `P = a_0 + a_1 D (+ a_2 D^2)` together with
//! the dissipation weight `phi(t) = e^(theta t)`, the optional zero-order
//! functional term (`mu`), and the regularization weight `lambda`. Applying
//! the adjoint identity `P*(phi P f) + (mu/lambda) phi f` and dividing by the
//! leading coefficient collapses the stationarity condition to a single
//! constant-coefficient ODE of order `2h`,
//!
//! `D^(2h) f + beta_(2h-1) D^(2h-1) f + ... + beta_0 f = (+/-) U / (lambda a_h^2 phi)`,
//!
//! which is then rewritten as the first-order companion system
//! `f' = A f + B F(t)` with state `f = [f, Df, ..., D^(2h-1) f]`.
//!
//! Order 1 gives `beta = (b0, theta)` with
//! `b0 = (a0 a1 theta - a0^2 - mu/lambda) / a1^2`; order 2 gives the quartic
//! coefficient set with `beta_3 = 2 theta`. Only these two reductions exist
//! in closed form here; higher even state dimensions are reachable by
//! choosing the characteristic roots directly ([`system_from_roots`]), which
//! is also how root sets that no `(alpha, theta)` pair generates are used.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Differential-operator specification.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    /// Order `h` of `P`; only 1 and 2 are derived.
    pub order_h: usize,
    /// Coefficients `a_0..a_h` of `P`, lowest order first; `a_h != 0`.
    pub alpha: Vec<f64>,
    /// Dissipation rate `theta > 0` in `phi(t) = e^(theta t)`.
    pub theta: f64,
    /// Zero-order functional term switch, 0 or 1.
    pub mu: u8,
    /// Regularization weight; nonzero, negative values permitted.
    pub lambda: f64,
}

impl OperatorSpec {
    pub fn new(order_h: usize, alpha: Vec<f64>, theta: f64, mu: u8, lambda: f64) -> Result<Self> {
        if order_h != 1 && order_h != 2 {
            return Err(Error::UnsupportedOrder(order_h));
        }
        if alpha.len() != order_h + 1 {
            return Err(Error::InvalidParameter(
                "alpha",
                format!("expected {} coefficients for order {order_h}, got {}", order_h + 1, alpha.len()),
            ));
        }
        if alpha[order_h] == 0.0 || !alpha.iter().all(|a| a.is_finite()) {
            return Err(Error::InvalidParameter(
                "alpha",
                "leading coefficient must be finite and nonzero".to_string(),
            ));
        }
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::InvalidParameter("theta", "must be finite and > 0".to_string()));
        }
        if mu > 1 {
            return Err(Error::InvalidParameter("mu", "must be 0 or 1".to_string()));
        }
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidParameter("lambda", "must be finite and nonzero".to_string()));
        }
        Ok(OperatorSpec { order_h, alpha, theta, mu, lambda })
    }

    /// Leading coefficient `a_h` of `P`.
    pub fn alpha_lead(&self) -> f64 {
        self.alpha[self.order_h]
    }

    /// The divisor `lambda * a_h^2` entering every impulsive update.
    pub fn impulse_divisor(&self) -> f64 {
        self.lambda * self.alpha_lead() * self.alpha_lead()
    }
}

/// How a companion system was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemSource {
    FromAlpha,
    FromRoots,
}

/// Companion-form state-space system of the reduced ODE.
///
/// `A` is `2h x 2h` with ones on the superdiagonal and `-beta` as its last
/// row; `B` is zero except for its last entry, `+1` for `h = 1` and `-1` for
/// `h = 2` (sign of the impulse term in the reduced equation). `roots` holds
/// the zeros of `s^(2h) + beta_(2h-1) s^(2h-1) + ... + beta_0`, sorted by
/// real then imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionSystem {
    pub beta: Vec<f64>,
    pub a: Mat,
    pub b: Vec<f64>,
    pub roots: Vec<Complex64>,
    pub source: SystemSource,
}

impl CompanionSystem {
    /// State dimension `2h`.
    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// Operator order `h`.
    pub fn order_h(&self) -> usize {
        self.beta.len() / 2
    }

    /// The root with largest real part (slowest mode for Hurwitz systems).
    pub fn slowest_root(&self) -> Complex64 {
        let mut best = self.roots[0];
        for r in &self.roots {
            if r.re > best.re {
                best = *r;
            }
        }
        best
    }
}

/// Reduced constant coefficients `beta_0..beta_(2h-1)` of the stationarity ODE.
pub fn reduced_coefficients(spec: &OperatorSpec) -> Result<Vec<f64>> {
    let th = spec.theta;
    let mu_over_lambda = f64::from(spec.mu) / spec.lambda;
    match spec.order_h {
        1 => {
            let (a0, a1) = (spec.alpha[0], spec.alpha[1]);
            let b0 = (a0 * a1 * th - a0 * a0 - mu_over_lambda) / (a1 * a1);
            Ok(vec![b0, th])
        }
        2 => {
            let (a0, a1, a2) = (spec.alpha[0], spec.alpha[1], spec.alpha[2]);
            let a2sq = a2 * a2;
            let b0 = (a0 * a2 * th * th - a0 * a1 * th + a0 * a0 + mu_over_lambda) / a2sq;
            let b1 = (a1 * a2 * th * th + (2.0 * a0 * a2 - a1 * a1) * th) / a2sq;
            let b2 = (a2sq * th * th + a1 * a2 * th + 2.0 * a0 * a2 - a1 * a1) / a2sq;
            let b3 = 2.0 * th;
            Ok(vec![b0, b1, b2, b3])
        }
        h => Err(Error::UnsupportedOrder(h)),
    }
}

/// Build the companion system for a reduced coefficient vector (length 2 or 4).
pub fn companion_system(beta: &[f64]) -> Result<CompanionSystem> {
    if beta.len() != 2 && beta.len() != 4 {
        return Err(Error::DimensionMismatch(format!(
            "reduced coefficient vector must have length 2 or 4, got {}",
            beta.len()
        )));
    }
    let roots = linalg::monic_roots(beta);
    Ok(build_companion(beta.to_vec(), roots, SystemSource::FromAlpha))
}

/// Build the companion system directly from a conjugate-closed root set of
/// even length `2h`. The reduced coefficients are the real coefficients of
/// the monic product `prod (s - l_i)`.
pub fn system_from_roots(roots: &[Complex64]) -> Result<CompanionSystem> {
    if roots.is_empty() || roots.len() % 2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "root set must have even positive length 2h, got {}",
            roots.len()
        )));
    }
    if roots.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
        return Err(Error::InvalidParameter("roots", "must be finite".to_string()));
    }
    let beta = linalg::poly_from_roots(roots)?;
    let mut sorted = roots.to_vec();
    sorted.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    Ok(build_companion(beta, sorted, SystemSource::FromRoots))
}

fn build_companion(beta: Vec<f64>, roots: Vec<Complex64>, source: SystemSource) -> CompanionSystem {
    let n = beta.len();
    let h = n / 2;
    let mut a = Mat::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -beta[j];
    }
    let mut b = vec![0.0; n];
    // sign of the impulse feed in the reduced equation: + for odd h, - for even
    b[n - 1] = if h % 2 == 1 { 1.0 } else { -1.0 };
    CompanionSystem { beta, a, b, roots, source }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec_h1(theta: f64, a0: f64) -> OperatorSpec {
        OperatorSpec::new(1, vec![a0, 1.0], theta, 0, 1.0).unwrap()
    }

    #[test]
    fn first_order_reduction_matches_root_product() {
        // beta_0 equals the product of the characteristic roots of a monic
        // quadratic with beta_1 its negated sum (Vieta oracle).
        let beta = reduced_coefficients(&spec_h1(1.0, 0.999)).unwrap();
        assert_relative_eq!(beta[0], 0.000999, max_relative = 1e-12);
        assert_relative_eq!(beta[1], 1.0);
        let prod = (-1e-3_f64) * (-0.999);
        assert_relative_eq!(beta[0], prod, max_relative = 1e-12);
    }

    #[test]
    fn first_order_reduction_degenerate_alpha0() {
        let beta = reduced_coefficients(&spec_h1(1.0, 0.0)).unwrap();
        assert_eq!(beta, vec![0.0, 1.0]);
    }

    #[test]
    fn second_order_reduction_hand_expanded() {
        // theta = 1, alpha = (1, 2, 1), mu = 0: hand expansion gives
        // b0 = 1 - 2 + 1 = 0, b1 = 2 + (2 - 4) = 0, b2 = 1 + 2 + 2 - 4 = 1, b3 = 2.
        let spec = OperatorSpec::new(2, vec![1.0, 2.0, 1.0], 1.0, 0, 1.0).unwrap();
        let beta = reduced_coefficients(&spec).unwrap();
        assert_relative_eq!(beta[0], 0.0);
        assert_relative_eq!(beta[1], 0.0);
        assert_relative_eq!(beta[2], 1.0);
        assert_relative_eq!(beta[3], 2.0);
    }

    #[test]
    fn mu_term_shifts_constant_coefficient() {
        let with = OperatorSpec::new(1, vec![0.5, 1.0], 1.0, 1, 2.0).unwrap();
        let without = OperatorSpec::new(1, vec![0.5, 1.0], 1.0, 0, 2.0).unwrap();
        let bw = reduced_coefficients(&with).unwrap();
        let bo = reduced_coefficients(&without).unwrap();
        assert_relative_eq!(bo[0] - bw[0], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn unsupported_order_is_rejected() {
        assert!(matches!(
            OperatorSpec::new(3, vec![1.0, 1.0, 1.0, 1.0], 1.0, 0, 1.0),
            Err(Error::UnsupportedOrder(3))
        ));
    }

    #[test]
    fn companion_shape_first_order() {
        let sys = companion_system(&[0.000999, 1.0]).unwrap();
        assert_eq!(sys.a[(0, 0)], 0.0);
        assert_eq!(sys.a[(0, 1)], 1.0);
        assert_relative_eq!(sys.a[(1, 0)], -0.000999);
        assert_relative_eq!(sys.a[(1, 1)], -1.0);
        assert_eq!(sys.b, vec![0.0, 1.0]);
        assert_eq!(sys.source, SystemSource::FromAlpha);
        // quoted root pair
        assert_relative_eq!(sys.roots[0].re, -0.999, epsilon = 1e-9);
        assert_relative_eq!(sys.roots[1].re, -1e-3, epsilon = 1e-9);
    }

    #[test]
    fn nilpotent_companion_roots() {
        let sys = companion_system(&[0.0, 0.0]).unwrap();
        assert_eq!(sys.roots, vec![Complex64::new(0.0, 0.0); 2]);
    }

    #[test]
    fn second_order_b_sign_flips() {
        let sys = companion_system(&[0.0, 0.0, 1.0, 2.0]).unwrap();
        assert_eq!(sys.b, vec![0.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn quartic_root_list_round_trip() {
        // independent expansion oracle: naive complex convolution of the
        // monomial factors, then recover the roots from the coefficients
        let quoted = [-1e-8, -0.6, -0.65, -0.74999999];
        let mut coeffs = vec![Complex64::new(1.0, 0.0)];
        for r in quoted {
            let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
            for (i, c) in coeffs.iter().enumerate() {
                next[i] += -Complex64::new(r, 0.0) * c;
                next[i + 1] += c;
            }
            coeffs = next;
        }
        let beta: Vec<f64> = coeffs[..4].iter().map(|c| c.re).collect();
        assert_relative_eq!(beta[3], 2.0, max_relative = 1e-9);
        let sys = companion_system(&beta).unwrap();
        let mut expect = quoted.to_vec();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (root, want) in sys.roots.iter().zip(expect.iter()) {
            assert!(root.im == 0.0);
            assert!((root.re - want).abs() <= 1e-7 * (1.0 + want.abs()), "{root} vs {want}");
        }
    }

    #[test]
    fn from_roots_expands_first_order_pair() {
        let roots = [Complex64::new(-1e-3, 0.0), Complex64::new(-0.999, 0.0)];
        let sys = system_from_roots(&roots).unwrap();
        assert_relative_eq!(sys.beta[0], 0.000999, max_relative = 1e-12);
        assert_relative_eq!(sys.beta[1], 1.0, max_relative = 1e-12);
        assert_eq!(sys.source, SystemSource::FromRoots);
    }

    #[test]
    fn from_roots_zero_pair() {
        let roots = [Complex64::new(0.0, 0.0); 2];
        let sys = system_from_roots(&roots).unwrap();
        assert_eq!(sys.beta, vec![0.0, 0.0]);
    }

    #[test]
    fn from_roots_quartic_sum_rule() {
        let roots = [
            Complex64::new(-1e-8, 0.0),
            Complex64::new(-0.6, 0.0),
            Complex64::new(-0.65, 0.0),
            Complex64::new(-0.74999999, 0.0),
        ];
        let sys = system_from_roots(&roots).unwrap();
        // negated sum of the quoted roots (addition oracle)
        let sum: f64 = roots.iter().map(|r| r.re).sum();
        assert_relative_eq!(sys.beta[3], -sum, max_relative = 1e-12);
        assert_relative_eq!(sys.beta[3], 2.0, max_relative = 1e-8);
    }

    #[test]
    fn from_roots_rejects_unmatched_conjugates() {
        let roots = [Complex64::new(-1.0, 1.0), Complex64::new(-1.0, -2.0)];
        assert!(matches!(system_from_roots(&roots), Err(Error::ConjugateClosure(_))));
    }

    #[test]
    fn high_dissipation_parameterization_roots() {
        // theta = 10, alpha_0 = 9.999: the quadratic factors exactly as
        // (s + 9.999)(s + 0.001) (discriminant 99.960004 = 9.998^2), so the
        // slow root is -1e-3. The widely quoted -1e-4 slow root needs
        // alpha_0 = 9.9999 instead; both are checked here.
        let beta = reduced_coefficients(&spec_h1(10.0, 9.999)).unwrap();
        let sys = companion_system(&beta).unwrap();
        assert_relative_eq!(sys.roots[0].re, -9.999, epsilon = 1e-9);
        assert_relative_eq!(sys.roots[1].re, -1e-3, epsilon = 1e-9);

        let beta = reduced_coefficients(&spec_h1(10.0, 9.9999)).unwrap();
        let sys = companion_system(&beta).unwrap();
        assert_relative_eq!(sys.roots[0].re, -9.9999, epsilon = 1e-9);
        assert_relative_eq!(sys.roots[1].re, -1e-4, epsilon = 1e-9);
    }

    #[test]
    fn trailing_coefficient_is_dissipation() {
        // beta_(2h-1) = 2 theta for h = 2 and beta_1 = theta for h = 1, exactly
        for (a0, a1) in [(0.3, 1.5), (-0.7, 2.0), (0.0, 0.25)] {
            let spec = OperatorSpec::new(1, vec![a0, a1], 1.75, 0, -4.0).unwrap();
            assert_eq!(reduced_coefficients(&spec).unwrap()[1], 1.75);
        }
        for (a0, a1, a2) in [(0.3, 1.5, 1.0), (-0.7, 2.0, -0.5)] {
            let spec = OperatorSpec::new(2, vec![a0, a1, a2], 1.75, 1, 3.0).unwrap();
            assert_eq!(reduced_coefficients(&spec).unwrap()[3], 3.5);
        }
    }
}
