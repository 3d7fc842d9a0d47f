//! Protocol-level behavior pins: relative orderings that characterize the
//! method, asserted with wide margins so they survive harmless numeric
//! drift.

use greenline_core::graph::{run_graph_epochs, ErnGraph};
use greenline_core::integrator::{run_epochs, TrainingConfig};
use greenline_core::operators::{companion_system, reduced_coefficients, OperatorSpec};
use greenline_core::signals::{build_task, TaskKind};

const TWO_PI: f64 = std::f64::consts::TAU;

fn sine_run(lambda: f64, tau_prime: f64, epochs: usize) -> Vec<f64> {
    let traj = build_task(TaskKind::Sine, 0.1, TWO_PI).unwrap();
    let spec = OperatorSpec::new(1, vec![0.999, 1.0], 1.0, 0, lambda).unwrap();
    let sys = companion_system(&reduced_coefficients(&spec).unwrap()).unwrap();
    let mut tc = TrainingConfig::new(epochs, 0.1);
    tc.tau_prime = tau_prime;
    run_epochs(&traj, &sys, &spec, &tc).unwrap().mse_per_epoch
}

/// The negative-regularization family orders as expected: acceleration
/// helps, and the lighter fitting weight helps more.
#[test]
fn acceleration_and_weighting_order_the_fits() {
    let plain = sine_run(-10.0, 0.1, 10); // no acceleration
    let accel = sine_run(-10.0, 1.0, 10); // accelerated, heavy weight
    let light = sine_run(-3.0, 1.0, 10); // accelerated, lighter weight
    let (plain, accel, light) =
        (plain.last().unwrap(), accel.last().unwrap(), light.last().unwrap());
    assert!(
        light * 2.0 < *accel,
        "lighter weight should fit clearly better: {light} vs {accel}"
    );
    assert!(
        accel * 2.0 < *plain,
        "acceleration should fit clearly better: {accel} vs {plain}"
    );
}

/// Stored node values keep feeding error impulses after the external
/// supervisions stop, so the graph-augmented run holds its fit where the
/// plain run decays back toward the prior.
#[test]
fn graph_memory_outlives_supervision() {
    let traj = build_task(TaskKind::Sine, 0.1, TWO_PI).unwrap();
    let spec = OperatorSpec::new(1, vec![0.999, 1.0], 1.0, 0, -3.0).unwrap();
    let sys = companion_system(&reduced_coefficients(&spec).unwrap()).unwrap();
    let mut tc = TrainingConfig::new(6, 0.1);
    tc.tau_prime = 1.0;
    tc.supervised_epochs = 2;

    let plain = run_epochs(&traj, &sys, &spec, &tc).unwrap();
    let mut graph = ErnGraph::new(0.05, 1.0, 2, 0.5).unwrap();
    let graphed = run_graph_epochs(&traj, &sys, &spec, &tc, &mut graph).unwrap();

    let plain_final = *plain.mse_per_epoch.last().unwrap();
    let graph_final = *graphed.mse_per_epoch.last().unwrap();
    assert!(
        graph_final * 2.0 < plain_final,
        "graph run should retain the fit: {graph_final} vs plain {plain_final}"
    );
    // and the graph actually collected supervised nodes to do it with
    assert!(graph.nodes.iter().any(|n| n.supervised));
}
