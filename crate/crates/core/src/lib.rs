//! Online learning of scalar functions of time by exact discrete integration
//! of the Euler-Lagrange dynamics of a dissipative regularization functional.
//!
//! The library models a supervised stream `(x(t_i), y_i)` as a train of
//! impulses driving a linear time-invariant companion system. The state is
//! advanced in closed form with matrix exponentials (no ODE solver), so the
//! forward path is exact for the reduced dynamics. A batch counterpart solves
//! the same problem globally through the Green's function of the reduced
//! operator, and a graph-augmented variant blends the supervised error with
//! temporal-succession and spatial-neighborhood terms collected online.
//!
//! Module map:
//! - [`operators`]: differential-operator specs, reduced coefficients and the
//!   companion-form state-space system;
//! - [`signals`]: supervision streams (grids, tasks, derivatives, shuffles);
//! - [`integrator`]: matrix exponential, half-step correction, impulsive
//!   forward recursion, epoch training and free evolution;
//! - [`global_solver`]: Green's function kernel, dense periodic system,
//!   solve/reconstruct, convergence indicator, functional quadrature;
//! - [`graph`]: online node graph with succession counts and Gaussian
//!   spatial weights feeding an augmented error signal;
//! - [`linalg`]: the small dense-matrix kernel everything above rides on.
//!
//! The crate is `no_std` (with `alloc`); all file and process concerns live
//! in the companion CLI crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod global_solver;
pub mod graph;
pub mod integrator;
pub mod linalg;
pub mod operators;
pub mod rng;
pub mod signals;

pub use error::{Error, Result};

// re-export so downstream crates share the same complex type
pub use num_complex;
