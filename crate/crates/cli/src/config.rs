//! Run configuration: JSON document, strict parsing, field-level validation.
//!
//! Unknown keys are rejected so silently ignored typos cannot skew an
//! experiment. Defaults: `tau_prime = tau`, `supervised_epochs = epochs`,
//! zero initial state, no shuffle, periodic boundary, causal kernel,
//! `period = 2 pi` for the analytic tasks.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use greenline_core::linalg::split_conjugate_roots;
use greenline_core::num_complex::Complex64;
use serde::Deserialize;

fn to_complex(pairs: &[[f64; 2]]) -> Vec<Complex64> {
    pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct RunConfig {
    pub mode: Mode,
    pub task: TaskSpec,
    pub operator: OperatorConfig,
    pub lambda: f64,
    pub tau: f64,
    #[serde(default)]
    pub tau_prime: Option<f64>,
    /// Period of the supervision stream; defaults to `2 pi` for the
    /// analytic tasks and `N tau` for CSV data.
    #[serde(default)]
    pub period: Option<f64>,
    pub epochs: usize,
    #[serde(default)]
    pub supervised_epochs: Option<usize>,
    #[serde(default)]
    pub shuffle: Shuffle,
    #[serde(default)]
    pub initial_state: Vec<f64>,
    #[serde(default)]
    pub graph: Option<GraphParams>,
    /// Kernel support used by the global solve (compare mode always runs
    /// both).
    #[serde(default)]
    pub kernel: Kernel,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub convergence_probe: Option<ConvergenceProbe>,
    /// Also write the assembled matrix and right-hand side as plain text.
    #[serde(default)]
    pub dump_system: bool,
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Forward,
    Global,
    Graph,
    Compare,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Forward => "forward",
            Mode::Global => "global",
            Mode::Graph => "graph",
            Mode::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    Sine,
    Cosine,
    Csv { path: String },
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum OperatorConfig {
    /// Operator coefficients: order `h`, `alpha_0..alpha_h`, dissipation
    /// `theta`, zero-order switch `mu`.
    Alpha { h: usize, alpha: Vec<f64>, theta: f64, mu: u8 },
    /// Characteristic roots chosen directly, as `[re, im]` pairs (length
    /// 2h, conjugate-closed); the leading coefficient is taken as 1.
    Roots { roots: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum Shuffle {
    #[default]
    None,
    /// One permutation applied before training.
    Once { seed: u64 },
    /// A fresh permutation every epoch.
    PerEpoch { seed: u64 },
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Causal,
    Noncausal,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    #[default]
    Periodic,
    Cauchy(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GraphParams {
    /// Matching radius; absent means estimated from the warm-up window.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Gaussian kernel width; absent means estimated from the warm-up window.
    #[serde(default)]
    pub sigma: Option<f64>,
    pub rho: usize,
    pub eta: f64,
    /// Samples used for the frozen parameter estimates (defaults to one
    /// full epoch).
    #[serde(default)]
    pub warmup: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceProbe {
    pub c: f64,
    pub beta: f64,
}

/// Parse and validate a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let config: RunConfig = serde_json::from_str(&text)
        .with_context(|| format!("cannot parse {}", path.display()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Effective update step.
    pub fn effective_tau_prime(&self) -> f64 {
        self.tau_prime.unwrap_or(self.tau)
    }

    /// Effective supervised-epoch count.
    pub fn effective_supervised_epochs(&self) -> usize {
        self.supervised_epochs.unwrap_or(self.epochs)
    }

    /// Effective period for the analytic tasks (CSV data derives it from
    /// the samples).
    pub fn effective_period(&self) -> f64 {
        self.period.unwrap_or(2.0 * PI)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda == 0.0 || !self.lambda.is_finite() {
            bail!("field `lambda`: must be finite and nonzero");
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            bail!("field `tau`: must be finite and > 0");
        }
        if let Some(tp) = self.tau_prime {
            if !(tp > 0.0) || !tp.is_finite() {
                bail!("field `tau_prime`: must be finite and > 0");
            }
        }
        if let Some(p) = self.period {
            if !(p > 0.0) || !p.is_finite() {
                bail!("field `period`: must be finite and > 0");
            }
        }
        if self.epochs == 0 {
            bail!("field `epochs`: must be >= 1");
        }
        if let Some(se) = self.supervised_epochs {
            if se > self.epochs {
                bail!("field `supervised_epochs`: cannot exceed `epochs`");
            }
        }
        match &self.operator {
            OperatorConfig::Alpha { h, alpha, theta, mu } => {
                if *h != 1 && *h != 2 {
                    bail!("field `operator.h`: only orders 1 and 2 are supported");
                }
                if alpha.len() != h + 1 {
                    bail!(
                        "field `operator.alpha`: expected {} coefficients for order {h}",
                        h + 1
                    );
                }
                if alpha[*h] == 0.0 {
                    bail!("field `operator.alpha`: leading coefficient must be nonzero");
                }
                if !(*theta > 0.0) {
                    bail!("field `operator.theta`: must be > 0");
                }
                if *mu > 1 {
                    bail!("field `operator.mu`: must be 0 or 1");
                }
            }
            OperatorConfig::Roots { roots } => {
                if roots.len() != 2 && roots.len() != 4 {
                    bail!("field `operator.roots`: expected 2 or 4 roots, got {}", roots.len());
                }
                let complex = to_complex(roots);
                split_conjugate_roots(&complex)
                    .map_err(|e| anyhow::anyhow!("field `operator.roots`: {e}"))?;
                let sum_re: f64 = roots.iter().map(|r| r[0]).sum();
                if !(sum_re < 0.0) {
                    bail!(
                        "field `operator.roots`: real parts must sum negative (positive dissipation)"
                    );
                }
            }
        }
        match self.shuffle {
            Shuffle::None => {}
            Shuffle::Once { .. } | Shuffle::PerEpoch { .. } => {
                if matches!(self.mode, Mode::Compare) {
                    bail!("field `shuffle`: compare mode requires unshuffled data");
                }
            }
        }
        if matches!(self.mode, Mode::Graph) {
            let g = self
                .graph
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("field `graph`: required for graph mode"))?;
            if g.rho == 0 {
                bail!("field `graph.rho`: must be >= 1");
            }
            if !(0.0..=1.0).contains(&g.eta) {
                bail!("field `graph.eta`: must lie in [0, 1]");
            }
            if let Some(eps) = g.epsilon {
                if !(eps >= 0.0) || !eps.is_finite() {
                    bail!("field `graph.epsilon`: must be finite and >= 0");
                }
            }
            if let Some(s) = g.sigma {
                if !(s > 0.0) || !s.is_finite() {
                    bail!("field `graph.sigma`: must be finite and > 0");
                }
            }
        }
        if matches!(self.mode, Mode::Compare) {
            if let Some(tp) = self.tau_prime {
                if tp != self.tau {
                    bail!("field `tau_prime`: compare mode requires tau_prime == tau");
                }
            }
        }
        if let BoundarySpec::Cauchy(values) = &self.boundary {
            let dim = match &self.operator {
                OperatorConfig::Alpha { h, .. } => 2 * h,
                OperatorConfig::Roots { roots } => roots.len(),
            };
            if values.len() != dim {
                bail!("field `boundary`: Cauchy values must have length {dim}");
            }
        }
        if let Some(p) = &self.convergence_probe {
            if !(p.c >= 1.0) {
                bail!("field `convergence_probe.c`: must be >= 1");
            }
            if !(p.beta > 0.0) {
                bail!("field `convergence_probe.beta`: must be > 0");
            }
        }
        Ok(())
    }

    /// Complex root list for a roots-specified operator.
    pub fn roots_as_complex(&self) -> Option<Vec<Complex64>> {
        match &self.operator {
            OperatorConfig::Roots { roots } => Some(to_complex(roots)),
            OperatorConfig::Alpha { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn parse(json: &str) -> Result<RunConfig> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(json.as_bytes()).unwrap();
        load_config(f.path())
    }

    const MINIMAL: &str = r#"{
        "mode": "forward",
        "task": {"kind": "sine"},
        "operator": {"kind": "alpha", "h": 1, "alpha": [0.999, 1.0], "theta": 1.0, "mu": 0},
        "lambda": -3.0,
        "tau": 0.1,
        "epochs": 10
    }"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.effective_tau_prime(), 0.1);
        assert_eq!(c.effective_supervised_epochs(), 10);
        assert!(c.initial_state.is_empty());
        assert_eq!(c.shuffle, Shuffle::None);
        assert_eq!(c.boundary, BoundarySpec::Periodic);
        assert_eq!(c.kernel, Kernel::Causal);
        assert!((c.effective_period() - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn zero_lambda_is_rejected() {
        let bad = MINIMAL.replace("-3.0", "0.0");
        let err = parse(&bad).unwrap_err().to_string();
        assert!(err.contains("lambda"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("\"epochs\": 10", "\"epochs\": 10, \"typo\": 1");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn unmatched_conjugates_are_rejected() {
        let bad = r#"{
            "mode": "forward",
            "task": {"kind": "sine"},
            "operator": {"kind": "roots", "roots": [[-1.0, 1.0], [-1.0, -2.0]]},
            "lambda": 1.0,
            "tau": 0.1,
            "epochs": 1
        }"#;
        let err = parse(bad).unwrap_err().to_string();
        assert!(err.contains("operator.roots"), "{err}");
    }

    #[test]
    fn graph_mode_requires_graph_section() {
        let bad = MINIMAL.replace("\"forward\"", "\"graph\"");
        let err = parse(&bad).unwrap_err().to_string();
        assert!(err.contains("graph"), "{err}");
    }

    #[test]
    fn parse_error_carries_position() {
        let err = parse("{ nope }").unwrap_err();
        let chain = format!("{err:#}");
        assert!(chain.contains("line"), "{chain}");
    }
}
