//! Online spatio-temporal neighborhood graph.
//!
//! Nodes are points of the input space collected as the stream arrives: each
//! step matches the current input to the last-visited node (within radius
//! `epsilon`), else to the nearest node within `epsilon`, else inserts a new
//! one. A sparse counter `w_hat[k][j]` records how many times node `k`
//! succeeded node `j` in time; Gaussian weights
//! `w_ks = exp(-|x_k - x_s|^2 / (2 sigma^2))` rank spatial neighbors.
//!
//! The stored node values (predictions, replaced and then averaged by any
//! supervisions seen there) feed back into learning through the augmented
//! error
//!
//! `E[k] = Delta_k + (eta / w_hat_k) sum_j w_hat[k][j] (f~ - value_j)
//!        + ((1-eta) / rho) sum_s w_ks (f~ - value_s)`
//!
//! with `Delta_k = f~ - y` when a supervision is present and 0 otherwise,
//! and `w_hat_k = max_j w_hat[k][j]` (the temporal term is 0 when node `k`
//! has no incoming successions). The state update is the same impulsive
//! recursion as the plain integrator with `E[k]` in place of the bare error,
//! so a degenerate graph configuration reproduces the plain trajectory
//! bit for bit.
//!
//! Single-writer structure: one learning process mutates the graph; readers
//! may inspect it between steps.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::integrator::{Propagator, RunLog, StateVector, TraceRow, TrainingConfig, DIVERGENCE_LIMIT};
use crate::operators::{CompanionSystem, OperatorSpec};
use crate::signals::Trajectory;

/// One graph node: a position in input space and the value stored there.
#[derive(Debug, Clone, PartialEq)]
pub struct ErnNode {
    pub position: Vec<f64>,
    /// Stored prediction, or the running mean of supervisions once any
    /// arrived.
    pub value: f64,
    pub supervised: bool,
    pub supervision_count: usize,
}

/// The online graph with its matching and weighting parameters.
#[derive(Debug, Clone)]
pub struct ErnGraph {
    pub nodes: Vec<ErnNode>,
    /// `(cur, prev) -> count`: times `cur` succeeded `prev`.
    temporal_counts: BTreeMap<(usize, usize), u64>,
    /// Matching radius.
    pub epsilon: f64,
    /// Gaussian kernel width.
    pub sigma: f64,
    /// Spatial neighborhood size.
    pub rho: usize,
    /// Temporal blend weight; the spatial weight is `1 - eta`.
    pub eta: f64,
    pub last_visited: Option<usize>,
}

impl ErnGraph {
    pub fn new(epsilon: f64, sigma: f64, rho: usize, eta: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter("epsilon", "must be finite and >= 0".to_string()));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter("sigma", "must be finite and > 0".to_string()));
        }
        if rho == 0 {
            return Err(Error::InvalidParameter("rho", "must be >= 1".to_string()));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter("eta", "must lie in [0, 1]".to_string()));
        }
        Ok(ErnGraph {
            nodes: Vec::new(),
            temporal_counts: BTreeMap::new(),
            epsilon,
            sigma,
            rho,
            eta,
            last_visited: None,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Succession counts as `(cur, prev, count)` rows in deterministic order.
    pub fn edges(&self) -> Vec<(usize, usize, u64)> {
        self.temporal_counts.iter().map(|(&(c, p), &n)| (c, p, n)).collect()
    }

    /// Match the input against the graph: the last-visited node wins inside
    /// the radius, else the nearest node inside the radius, else a fresh
    /// unsupervised node at `x`. Updates `last_visited`.
    pub fn match_or_insert(&mut self, x: &[f64]) -> (usize, bool) {
        if let Some(last) = self.last_visited {
            if distance(&self.nodes[last].position, x) <= self.epsilon {
                self.last_visited = Some(last);
                return (last, false);
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (id, node) in self.nodes.iter().enumerate() {
            let d = distance(&node.position, x);
            if d <= self.epsilon {
                match best {
                    Some((_, bd)) if bd <= d => {}
                    _ => best = Some((id, d)),
                }
            }
        }
        if let Some((id, _)) = best {
            self.last_visited = Some(id);
            return (id, false);
        }
        let id = self.nodes.len();
        self.nodes.push(ErnNode {
            position: x.to_vec(),
            value: 0.0,
            supervised: false,
            supervision_count: 0,
        });
        self.last_visited = Some(id);
        (id, true)
    }

    /// Count one succession of `cur` after `prev`; returns the new count.
    pub fn record_transition(&mut self, prev: usize, cur: usize) -> Result<u64> {
        if prev >= self.nodes.len() {
            return Err(Error::InvalidNodeId(prev));
        }
        if cur >= self.nodes.len() {
            return Err(Error::InvalidNodeId(cur));
        }
        let c = self.temporal_counts.entry((cur, prev)).or_insert(0);
        *c += 1;
        Ok(*c)
    }

    /// Temporal normalizer `w_hat_k = max_j w_hat[k][j]` (0 without incoming
    /// successions).
    pub fn normalizer(&self, k: usize) -> u64 {
        self.temporal_counts
            .range((k, 0)..=(k, usize::MAX))
            .map(|(_, &n)| n)
            .max()
            .unwrap_or(0)
    }

    /// Top-`rho` other nodes by Gaussian weight, descending; ties broken by
    /// node id for determinism.
    pub fn spatial_neighbors(&self, k: usize) -> Result<Vec<(usize, f64)>> {
        if k >= self.nodes.len() {
            return Err(Error::InvalidNodeId(k));
        }
        let pos = &self.nodes[k].position;
        let mut weighted: Vec<(usize, f64)> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(id, _)| *id != k)
            .map(|(id, node)| (id, gaussian_weight(distance(&node.position, pos), self.sigma)))
            .collect();
        weighted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        weighted.truncate(self.rho);
        Ok(weighted)
    }

    /// Augmented error `E[k]` for the value `f~` observed at node `k`.
    pub fn error_signal(&self, k: usize, ftilde: f64, supervision: Option<f64>) -> Result<f64> {
        if k >= self.nodes.len() {
            return Err(Error::InvalidNodeId(k));
        }
        let delta = match supervision {
            Some(y) => ftilde - y,
            None => 0.0,
        };
        let w_hat = self.normalizer(k);
        let temporal = if w_hat == 0 {
            0.0
        } else {
            let mut acc = 0.0;
            for (&(_, j), &count) in self.temporal_counts.range((k, 0)..=(k, usize::MAX)) {
                acc += count as f64 * (ftilde - self.nodes[j].value);
            }
            acc / w_hat as f64
        };
        let mut spatial = 0.0;
        for (id, w) in self.spatial_neighbors(k)? {
            spatial += w * (ftilde - self.nodes[id].value);
        }
        let gamma = 1.0 - self.eta;
        Ok(delta + self.eta * temporal + gamma / self.rho as f64 * spatial)
    }

    /// Store the step's value in node `k`: supervisions enter a running mean
    /// and pin the node; otherwise `f~` is stored only while the node is
    /// unsupervised.
    pub fn store_value(&mut self, k: usize, ftilde: f64, supervision: Option<f64>) -> Result<()> {
        let node = self.nodes.get_mut(k).ok_or(Error::InvalidNodeId(k))?;
        match supervision {
            Some(y) => {
                let n = node.supervision_count as f64;
                node.value = if node.supervised { (node.value * n + y) / (n + 1.0) } else { y };
                node.supervised = true;
                node.supervision_count += 1;
            }
            None => {
                if !node.supervised {
                    node.value = ftilde;
                }
            }
        }
        Ok(())
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let sq: f64 = a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum();
    libm::sqrt(sq)
}

/// Gaussian spatial weight `exp(-d^2 / (2 sigma^2))`.
pub fn gaussian_weight(dist: f64, sigma: f64) -> f64 {
    libm::exp(-(dist * dist) / (2.0 * sigma * sigma))
}

/// Kernel width estimate: mean Euclidean distance over all unordered sample
/// pairs. Meant to be frozen after a warm-up window.
pub fn estimate_sigma(samples: &[Vec<f64>]) -> Result<f64> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::DimensionMismatch(alloc::format!(
            "sigma estimate needs at least 2 samples, got {m}"
        )));
    }
    let mut acc = 0.0;
    let mut pairs = 0u64;
    for i in 0..m {
        for j in (i + 1)..m {
            acc += distance(&samples[i], &samples[j]);
            pairs += 1;
        }
    }
    let sigma = acc / pairs as f64;
    if sigma == 0.0 {
        return Err(Error::DegenerateKernel);
    }
    Ok(sigma)
}

/// Matching-radius estimate: mean distance between consecutive samples of
/// the warm-up window (the typical step length of the input path).
pub fn estimate_epsilon(samples: &[Vec<f64>]) -> Result<f64> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::DimensionMismatch(alloc::format!(
            "epsilon estimate needs at least 2 samples, got {m}"
        )));
    }
    let acc: f64 = samples.windows(2).map(|w| distance(&w[0], &w[1])).sum();
    Ok(acc / (m - 1) as f64)
}

/// One graph-augmented update: the plain impulsive recursion with `E[k]` in
/// place of the bare supervised error.
pub fn st_forward_step(
    f: &[f64],
    sys: &CompanionSystem,
    spec: &OperatorSpec,
    b_k: f64,
    e: f64,
    step: f64,
) -> Result<StateVector> {
    let prop = Propagator::new(sys, step)?;
    Ok(st_forward_step_with(&prop, spec, f, b_k, e))
}

/// [`st_forward_step`] against a cached [`Propagator`].
pub fn st_forward_step_with(
    prop: &Propagator,
    spec: &OperatorSpec,
    f: &[f64],
    b_k: f64,
    e: f64,
) -> StateVector {
    prop.impulse_step(f, e, spec.impulse_divisor() * b_k)
}

/// Epoch training driven by the graph: per step the input is matched (and
/// the succession recorded), the augmented error formed from the stored
/// values, the state advanced, and the node value stored afterwards
/// (read-then-write within the step). Supervision follows the epoch
/// schedule of `cfg`; the graph keeps growing across epochs.
pub fn run_graph_epochs(
    traj: &Trajectory,
    sys: &CompanionSystem,
    spec: &OperatorSpec,
    cfg: &TrainingConfig,
    graph: &mut ErnGraph,
) -> Result<RunLog> {
    cfg.validate()?;
    if traj.is_empty() {
        return Err(Error::DimensionMismatch("empty trajectory".to_string()));
    }
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
        let supervised = epoch <= cfg.supervised_epochs;
        let mut sse = 0.0;
        for i in 0..traj.len() {
            let prev = graph.last_visited;
            let (node, _) = graph.match_or_insert(&traj.x[i]);
            if let Some(p) = prev {
                graph.record_transition(p, node)?;
            }
            let ftilde = prop.half_value(&state);
            let supervision = if supervised { Some(traj.y[i]) } else { None };
            let e = graph.error_signal(node, ftilde, supervision)?;
            state = prop.impulse_step(&state, e, divisor * traj.b[i]);
            graph.store_value(node, ftilde, supervision)?;
            let err = ftilde - traj.y[i];
            sse += err * err;
            trace.push(TraceRow {
                k,
                t: k as f64 * step + step / 2.0,
                f_tilde: ftilde,
                y: traj.y[i],
                delta: e,
            });
            if !diverged && (!ftilde.is_finite() || libm::fabs(ftilde) > DIVERGENCE_LIMIT
                || state.iter().any(|v| !v.is_finite() || libm::fabs(*v) > DIVERGENCE_LIMIT))
            {
                diverged = true;
            }
            k += 1;
        }
        mse_per_epoch.push(sse / traj.len() as f64);
    }
    Ok(RunLog { mse_per_epoch, trace, final_state: state, diverged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::forward_step_with;
    use crate::operators::system_from_roots;
    use crate::signals::{build_task, TaskKind};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn graph(epsilon: f64, sigma: f64, rho: usize, eta: f64) -> ErnGraph {
        ErnGraph::new(epsilon, sigma, rho, eta).unwrap()
    }

    #[test]
    fn empty_graph_inserts_first_node() {
        let mut g = graph(0.5, 1.0, 2, 0.5);
        let (id, inserted) = g.match_or_insert(&[0.0]);
        assert_eq!((id, inserted), (0, true));
        assert_eq!(g.last_visited, Some(0));
        assert_eq!(g.nodes[0].value, 0.0);
        assert!(!g.nodes[0].supervised);
    }

    #[test]
    fn zero_radius_inserts_every_distinct_input() {
        let mut g = graph(0.0, 1.0, 2, 0.5);
        for k in 0..5 {
            g.match_or_insert(&[k as f64 * 0.1]);
        }
        assert_eq!(g.node_count(), 5);
    }

    #[test]
    fn nearest_node_wins_when_last_does_not_fit() {
        let mut g = graph(1.5, 1.0, 2, 0.5);
        g.nodes.push(ErnNode { position: vec![1.0], value: 0.0, supervised: false, supervision_count: 0 });
        g.nodes.push(ErnNode { position: vec![-2.0], value: 0.0, supervised: false, supervision_count: 0 });
        g.last_visited = None;
        // brute-force scan oracle: distances 1 and 2, nearest is node 0
        let (id, inserted) = g.match_or_insert(&[0.0]);
        assert_eq!((id, inserted), (0, false));
    }

    #[test]
    fn last_visited_has_priority_over_nearer_nodes() {
        let mut g = graph(1.5, 1.0, 2, 0.5);
        g.nodes.push(ErnNode { position: vec![1.4], value: 0.0, supervised: false, supervision_count: 0 });
        g.nodes.push(ErnNode { position: vec![0.1], value: 0.0, supervised: false, supervision_count: 0 });
        g.last_visited = Some(0);
        let (id, _) = g.match_or_insert(&[0.0]);
        assert_eq!(id, 0, "sticky match must prefer the last node inside the radius");
    }

    #[test]
    fn transitions_count_and_normalize() {
        let mut g = graph(0.0, 1.0, 2, 0.5);
        g.match_or_insert(&[0.0]);
        g.match_or_insert(&[1.0]);
        g.match_or_insert(&[2.0]);
        assert_eq!(g.record_transition(0, 2).unwrap(), 1);
        assert_eq!(g.normalizer(2), 1);
        for _ in 0..4 {
            g.record_transition(0, 2).unwrap();
        }
        assert_eq!(g.record_transition(1, 2).unwrap(), 1);
        for _ in 0..2 {
            g.record_transition(1, 2).unwrap();
        }
        // counts 5 and 3; max-over-row oracle
        assert_eq!(g.normalizer(2), 5);
        assert!(g.record_transition(9, 0).is_err());
    }

    #[test]
    fn gaussian_weight_reference_points() {
        assert_eq!(gaussian_weight(0.0, 2.0), 1.0);
        let sigma = 0.7;
        let d = sigma * libm::sqrt(2.0);
        assert_relative_eq!(gaussian_weight(d, sigma), libm::exp(-1.0), max_relative = 1e-15);
    }

    #[test]
    fn spatial_neighbors_sorted_and_capped() {
        let mut g = graph(0.0, 1.0, 2, 0.5);
        for x in [0.0, 0.5, 1.0, 3.0] {
            g.match_or_insert(&[x]);
        }
        let nb = g.spatial_neighbors(0).unwrap();
        assert_eq!(nb.len(), 2);
        assert_eq!(nb[0].0, 1);
        assert_eq!(nb[1].0, 2);
        assert!(nb[0].1 >= nb[1].1);
        assert!(nb.iter().all(|(_, w)| *w > 0.0 && *w <= 1.0));
        // single node: nothing to rank
        let mut lone = graph(0.0, 1.0, 3, 0.5);
        lone.match_or_insert(&[0.0]);
        assert!(lone.spatial_neighbors(0).unwrap().is_empty());
    }

    #[test]
    fn sigma_estimates() {
        assert_relative_eq!(estimate_sigma(&[vec![0.0], vec![3.0]]).unwrap(), 3.0);
        // collinear 0, 1, 2: pair distances {1, 2, 1}
        let s = estimate_sigma(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert_relative_eq!(s, 4.0 / 3.0, max_relative = 1e-15);
        assert!(matches!(
            estimate_sigma(&[vec![1.0], vec![1.0]]),
            Err(Error::DegenerateKernel)
        ));
        assert!(estimate_sigma(&[vec![1.0]]).is_err());
    }

    #[test]
    fn epsilon_estimate_uses_consecutive_steps() {
        let e = estimate_epsilon(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        assert_relative_eq!(e, 1.5);
    }

    #[test]
    fn error_signal_reduces_to_plain_error_without_links() {
        let mut g = graph(0.0, 1.0, 2, 0.7);
        let (k, _) = g.match_or_insert(&[0.3]);
        let e = g.error_signal(k, 0.9, Some(0.4)).unwrap();
        assert_eq!(e, 0.5);
    }

    #[test]
    fn error_signal_full_temporal_blend() {
        // eta = 1, single predecessor with w_hat[k][j] = w_hat_k:
        // E = Delta + (f~ - value_j)
        let mut g = graph(0.0, 1.0, 1, 1.0);
        let (j, _) = g.match_or_insert(&[0.0]);
        let (k, _) = g.match_or_insert(&[5.0]);
        g.store_value(j, 0.25, None).unwrap();
        g.record_transition(j, k).unwrap();
        let ftilde = 1.0;
        let e = g.error_signal(k, ftilde, Some(0.5)).unwrap();
        // spatial term present but weighted by gamma = 0
        assert_relative_eq!(e, (1.0 - 0.5) + (1.0 - 0.25), max_relative = 1e-15);
    }

    #[test]
    fn consensus_values_give_zero_error() {
        let mut g = graph(0.0, 10.0, 2, 0.5);
        let (a, _) = g.match_or_insert(&[0.0]);
        let (b, _) = g.match_or_insert(&[1.0]);
        let (k, _) = g.match_or_insert(&[2.0]);
        let ftilde = 0.77;
        g.store_value(a, ftilde, None).unwrap();
        g.store_value(b, ftilde, None).unwrap();
        g.record_transition(b, k).unwrap();
        let e = g.error_signal(k, ftilde, None).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn store_value_averages_supervisions_and_pins_them() {
        let mut g = graph(0.0, 1.0, 2, 0.5);
        let (k, _) = g.match_or_insert(&[0.0]);
        g.store_value(k, 0.7, None).unwrap();
        assert_eq!(g.nodes[k].value, 0.7);
        g.store_value(k, 0.0, Some(1.0)).unwrap();
        g.store_value(k, 0.0, Some(3.0)).unwrap();
        assert_eq!(g.nodes[k].value, 2.0);
        assert_eq!(g.nodes[k].supervision_count, 2);
        // prediction updates no longer touch a supervised node
        g.store_value(k, -5.0, None).unwrap();
        assert_eq!(g.nodes[k].value, 2.0);
    }

    #[test]
    fn degenerate_graph_matches_plain_integrator_bitwise() {
        // eta = 0 kills the temporal term, a collapsed kernel width
        // underflows every spatial weight to exactly zero, supervision on
        // every step: E == delta bit for bit
        let traj = build_task(TaskKind::Sine, 0.1, 2.0 * core::f64::consts::PI).unwrap();
        let sys = system_from_roots(&[Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 0.0)])
            .unwrap();
        let spec = OperatorSpec::new(1, vec![1.0, 1.0], 3.0, 0, -3.0).unwrap();
        let step = 0.1;
        let prop = Propagator::new(&sys, step).unwrap();
        let mut g = graph(0.0, 1e-300, 2, 0.0);
        let mut f_plain = vec![0.0, 0.0];
        let mut f_graph = vec![0.0, 0.0];
        for k in 0..1000 {
            let i = k % traj.len();
            let prev = g.last_visited;
            let (node, _) = g.match_or_insert(&traj.x[i]);
            if let Some(p) = prev {
                g.record_transition(p, node).unwrap();
            }
            let ftilde = prop.half_value(&f_graph);
            let e = g.error_signal(node, ftilde, Some(traj.y[i])).unwrap();
            let next_graph = st_forward_step_with(&prop, &spec, &f_graph, traj.b[i], e);
            g.store_value(node, ftilde, Some(traj.y[i])).unwrap();
            let (next_plain, ..) =
                forward_step_with(&prop, &spec, &f_plain, traj.b[i], Some(traj.y[i]));
            assert_eq!(next_graph, next_plain, "step {k} drifted");
            f_graph = next_graph;
            f_plain = next_plain;
        }
    }

    #[test]
    fn node_count_stabilizes_on_cyclic_data() {
        let traj = build_task(TaskKind::Sine, 0.1, 2.0 * core::f64::consts::PI).unwrap();
        let sys = system_from_roots(&[Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 0.0)])
            .unwrap();
        let spec = OperatorSpec::new(1, vec![1.0, 1.0], 3.0, 0, -3.0).unwrap();
        let mut g = graph(0.05, 1.0, 2, 0.5);
        let mut counts = Vec::new();
        for _ in 0..3 {
            let cfg = TrainingConfig::new(1, 0.1);
            run_graph_epochs(&traj, &sys, &spec, &cfg, &mut g).unwrap();
            counts.push(g.node_count());
        }
        assert!(counts[0] >= 1);
        assert_eq!(counts[1], counts[0], "growth after the first epoch");
        assert_eq!(counts[2], counts[0]);
    }

    #[test]
    fn zero_error_and_zero_state_stay_zero() {
        let sys = system_from_roots(&[Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 0.0)])
            .unwrap();
        let spec = OperatorSpec::new(1, vec![1.0, 1.0], 3.0, 0, 2.0).unwrap();
        let next = st_forward_step(&[0.0, 0.0], &sys, &spec, 1.0, 0.0, 0.5).unwrap();
        assert_eq!(next, vec![0.0, 0.0]);
        // zero error on a nonzero state: pure homogeneous step
        let prop = Propagator::new(&sys, 0.5).unwrap();
        let f = [0.4, -0.2];
        let next = st_forward_step_with(&prop, &spec, &f, 1.0, 0.0);
        assert_eq!(next, prop.full.mul_vec(&f));
    }
}
