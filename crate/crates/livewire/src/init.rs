//! Initial topology construction: every layer connects to every later
//! layer, with edge probability decaying exponentially in layer
//! distance, `p(gap) = clamp(s0 * exp(b * gap), 0, 1)` with b < 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{Network, NodeRef, TopologyError, WeightInit};

/// Weight draw applied to each created edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WeightScaleRule {
    /// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], fan_in being the
    /// realized in-degree of the destination when the edge is created.
    FanInScaled,
    /// Uniform in [-sigma, +sigma].
    Fixed { sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitConfig {
    /// Density at layer distance 0; adjacent layers see s0 * exp(b).
    pub sparsity_hyperparameter: f64,
    /// Must be negative so density shrinks with layer distance.
    pub branching_factor: f64,
    pub weight_scale_rule: WeightScaleRule,
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum InitError {
    #[error("sparsity_hyperparameter must lie in (0, 1], got {0}")]
    BadSparsity(f64),
    #[error("branching_factor must be negative, got {0}")]
    BadBranchingFactor(f64),
    #[error("network shape invalid: {0}")]
    Shape(String),
}

impl InitConfig {
    pub fn validate(&self) -> Result<(), InitError> {
        if !(self.sparsity_hyperparameter > 0.0 && self.sparsity_hyperparameter <= 1.0) {
            return Err(InitError::BadSparsity(self.sparsity_hyperparameter));
        }
        if !(self.branching_factor < 0.0) {
            return Err(InitError::BadBranchingFactor(self.branching_factor));
        }
        Ok(())
    }

    /// Edge probability for a source/destination layer distance.
    pub fn density(&self, gap: usize) -> f64 {
        let p = self.sparsity_hyperparameter * (self.branching_factor * gap as f64).exp();
        p.clamp(0.0, 1.0)
    }
}

/// Result of initialization; `warning` flags degenerate configs that
/// left the output layer unreachable at this scale.
pub struct InitOutcome {
    pub network: Network,
    pub warning: Option<String>,
}

/// Build the initial sparse network. Every ordered layer pair (i, j),
/// i < j, contributes each of its width(i) * width(j) possible edges
/// independently with probability `density(j - i)`, drawn from a single
/// ChaCha stream, so the same (widths, config) always yields the same
/// network byte for byte.
pub fn init_network(layer_widths: &[usize], cfg: &InitConfig) -> Result<InitOutcome, InitError> {
    cfg.validate()?;
    let mut net = Network::new(layer_widths.to_vec()).map_err(|e| match e {
        TopologyError::BadShape => InitError::Shape("need >= 2 layers, widths >= 1".into()),
        other => InitError::Shape(other.to_string()),
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pairs = Vec::new();
    for i in 0..layer_widths.len() {
        for j in (i + 1)..layer_widths.len() {
            let p = cfg.density(j - i);
            for a in 0..layer_widths[i] {
                for b in 0..layer_widths[j] {
                    if rng.gen_range(0.0..1.0) < p {
                        pairs.push((NodeRef::new(i, a), NodeRef::new(j, b)));
                    }
                }
            }
        }
    }

    let weight_init = match cfg.weight_scale_rule {
        WeightScaleRule::FanInScaled => WeightInit::ScaledRandom {
            seed: rng.gen::<u64>(),
        },
        WeightScaleRule::Fixed { sigma } => WeightInit::FixedRandom {
            sigma,
            seed: rng.gen::<u64>(),
        },
    };
    net.grow_edges(&pairs, weight_init);

    let last = layer_widths.len() - 1;
    let output_reachable = (0..layer_widths[last]).any(|i| net.in_degree(NodeRef::new(last, i)) > 0);
    let warning = if output_reachable {
        None
    } else {
        Some("initialization left every output node disconnected; growth must reach them".into())
    };
    Ok(InitOutcome {
        network: net,
        warning,
    })
}
