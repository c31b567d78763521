//! Run configuration: a flat key-value file (TOML syntax) whose keys
//! mirror the `RunConfig` field names exactly. Unknown keys are errors
//! so typos fail loudly. Every stochastic subsystem has its own seed;
//! there is no ambient randomness anywhere in the engine.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::init::{InitConfig, WeightScaleRule};
use crate::plasticity::{
    CredibilitySchedule, DecayKind, HighGradientBoost, OptimizerConfig,
};
use crate::propagation::LossKind;
use crate::rewire::{NewEdgeInit, RewireConfig, Scoring};
use crate::schedule::{CyclicSchedule, ScheduleError};
use crate::topology::NodeRef;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("invalid schedule: {0}")]
    Schedule(#[from] ScheduleError),
    #[error("bad node reference '{0}': expected layer:index")]
    BadNodeRef(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    FanInScaled,
    Fixed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    // loss and batching
    pub loss: LossKind,
    pub batch_size: usize,
    pub epochs: usize,
    /// 0 means no cap; otherwise training stops once the network's
    /// step counter reaches this value.
    pub max_steps: u64,
    pub dropout_rate: f64,

    // initial topology
    pub layer_widths: Vec<usize>,
    pub sparsity_hyperparameter: f64,
    pub branching_factor: f64,
    pub weight_scale_rule: WeightRule,
    pub fixed_weight_sigma: f64,

    // rewiring
    pub queue_capacity: usize,
    pub min_layer_gap: usize,
    pub distance_preference: f64,
    pub scoring: Scoring,
    pub new_edge_init: NewEdgeInit,
    /// Optimizer steps between rewiring rounds.
    pub rewire_interval: u64,
    pub growth_base: f64,
    pub growth_peak: f64,
    pub growth_floor: f64,
    pub growth_warmup_steps: u64,
    pub growth_decay_steps: u64,
    pub prune_ratio_base: f64,
    pub prune_ratio_peak: f64,
    pub prune_ratio_floor: f64,
    pub prune_ratio_warmup_steps: u64,
    pub prune_ratio_decay_steps: u64,
    /// When true, rewiring triggers on smoothed loss exceeding
    /// `adaptive_loss_threshold` instead of the fixed interval.
    pub adaptive_rewire: bool,
    pub adaptive_loss_threshold: f64,
    pub include_output_nodes: bool,

    // plasticity
    pub momentum_coeff: f64,
    pub eta_new: f64,
    pub eta_floor: f64,
    pub credibility_halflife: f64,
    pub credibility_decay: DecayKind,
    pub lr_scale_base: f64,
    pub lr_scale_peak: f64,
    pub lr_scale_floor: f64,
    pub lr_scale_warmup_steps: u64,
    pub lr_scale_decay_steps: u64,
    /// 0 disables clipping.
    pub gradient_clip: f64,
    pub high_gradient_boost: bool,
    pub boost_percentile: f64,
    pub boost_multiplier: f64,
    pub boost_smoothing: f64,

    // seeds, one per stochastic subsystem
    pub seed_init: u64,
    pub seed_dropout: u64,
    pub seed_growth: u64,
    pub seed_data: u64,

    // diagnostics
    /// Nodes to track for event logging, as "layer:index" strings.
    pub track_nodes: Vec<String>,
    pub event_threshold: f64,
    pub metrics_interval: u64,
    /// 0 disables mutual-information snapshots.
    pub mi_interval: u64,

    // few-shot runner
    pub fewshot_phase2_steps: u64,
    pub fewshot_phase2_growth: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::SoftmaxCrossEntropy,
            batch_size: 16,
            epochs: 10,
            max_steps: 0,
            dropout_rate: 0.0,
            layer_widths: vec![8, 16, 8, 2],
            sparsity_hyperparameter: 0.5,
            branching_factor: -0.7,
            weight_scale_rule: WeightRule::FanInScaled,
            fixed_weight_sigma: 0.1,
            queue_capacity: 16,
            min_layer_gap: 1,
            distance_preference: 0.0,
            scoring: Scoring::Gradient,
            new_edge_init: NewEdgeInit::Zero,
            rewire_interval: 5,
            growth_base: 1.0,
            growth_peak: 3.0,
            growth_floor: 0.0,
            growth_warmup_steps: 50,
            growth_decay_steps: 200,
            prune_ratio_base: 0.5,
            prune_ratio_peak: 1.0,
            prune_ratio_floor: 1.0,
            prune_ratio_warmup_steps: 50,
            prune_ratio_decay_steps: 200,
            adaptive_rewire: false,
            adaptive_loss_threshold: 1.0,
            include_output_nodes: false,
            momentum_coeff: 0.9,
            eta_new: 0.05,
            eta_floor: 0.005,
            credibility_halflife: 200.0,
            credibility_decay: DecayKind::Hyperbolic,
            lr_scale_base: 1.0,
            lr_scale_peak: 1.0,
            lr_scale_floor: 1.0,
            lr_scale_warmup_steps: 1,
            lr_scale_decay_steps: 1,
            gradient_clip: 0.0,
            high_gradient_boost: false,
            boost_percentile: 0.9,
            boost_multiplier: 2.0,
            boost_smoothing: 0.9,
            seed_init: 1,
            seed_dropout: 2,
            seed_growth: 3,
            seed_data: 4,
            track_nodes: Vec::new(),
            event_threshold: 1.0,
            metrics_interval: 1,
            mi_interval: 0,
            fewshot_phase2_steps: 60,
            fewshot_phase2_growth: 2.0,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(body: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(body)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let body = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&body)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.init_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.growth_schedule()?;
        self.prune_ratio_schedule()?;
        self.optimizer_config()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.batch_size < 2 {
            return Err(ConfigError::Invalid("batch_size must be >= 2".into()));
        }
        if self.layer_widths.len() < 2 || self.layer_widths.iter().any(|&w| w == 0) {
            return Err(ConfigError::Invalid(
                "layer_widths needs >= 2 positive entries".into(),
            ));
        }
        if self.rewire_interval == 0 {
            return Err(ConfigError::Invalid("rewire_interval must be >= 1".into()));
        }
        if self.metrics_interval == 0 {
            return Err(ConfigError::Invalid("metrics_interval must be >= 1".into()));
        }
        if self.min_layer_gap == 0 {
            return Err(ConfigError::Invalid("min_layer_gap must be >= 1".into()));
        }
        if !(self.dropout_rate >= 0.0 && self.dropout_rate < 1.0) {
            return Err(ConfigError::Invalid(
                "dropout_rate must lie in [0, 1)".into(),
            ));
        }
        self.parsed_track_nodes()?;
        Ok(())
    }

    pub fn init_config(&self) -> InitConfig {
        InitConfig {
            sparsity_hyperparameter: self.sparsity_hyperparameter,
            branching_factor: self.branching_factor,
            weight_scale_rule: match self.weight_scale_rule {
                WeightRule::FanInScaled => WeightScaleRule::FanInScaled,
                WeightRule::Fixed => WeightScaleRule::Fixed {
                    sigma: self.fixed_weight_sigma,
                },
            },
            seed: self.seed_init,
        }
    }

    pub fn growth_schedule(&self) -> Result<CyclicSchedule, ScheduleError> {
        CyclicSchedule::new(
            self.growth_base,
            self.growth_peak,
            self.growth_floor,
            self.growth_warmup_steps,
            self.growth_decay_steps,
        )
    }

    pub fn prune_ratio_schedule(&self) -> Result<CyclicSchedule, ScheduleError> {
        CyclicSchedule::new(
            self.prune_ratio_base,
            self.prune_ratio_peak,
            self.prune_ratio_floor,
            self.prune_ratio_warmup_steps,
            self.prune_ratio_decay_steps,
        )
    }

    pub fn lr_scale_schedule(&self) -> Result<CyclicSchedule, ScheduleError> {
        CyclicSchedule::new(
            self.lr_scale_base,
            self.lr_scale_peak,
            self.lr_scale_floor,
            self.lr_scale_warmup_steps,
            self.lr_scale_decay_steps,
        )
    }

    pub fn rewire_config(&self) -> Result<RewireConfig, ScheduleError> {
        Ok(RewireConfig {
            queue_capacity: self.queue_capacity,
            growth_schedule: self.growth_schedule()?,
            prune_ratio_schedule: self.prune_ratio_schedule()?,
            min_layer_gap: self.min_layer_gap,
            distance_preference: self.distance_preference,
            scoring: self.scoring,
            new_edge_init: self.new_edge_init,
            include_output_nodes: self.include_output_nodes,
        })
    }

    pub fn optimizer_config(&self) -> Result<OptimizerConfig, ConfigError> {
        let schedule = CredibilitySchedule {
            eta_new: self.eta_new,
            eta_floor: self.eta_floor,
            halflife: self.credibility_halflife,
            decay: self.credibility_decay,
            global_scale: self.lr_scale_schedule()?,
        };
        schedule
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(OptimizerConfig {
            momentum_coeff: self.momentum_coeff,
            schedule,
            gradient_clip: if self.gradient_clip > 0.0 {
                Some(self.gradient_clip)
            } else {
                None
            },
            boost: if self.high_gradient_boost {
                Some(HighGradientBoost {
                    percentile: self.boost_percentile,
                    multiplier: self.boost_multiplier,
                    smoothing: self.boost_smoothing,
                })
            } else {
                None
            },
        })
    }

    pub fn parsed_track_nodes(&self) -> Result<Vec<NodeRef>, ConfigError> {
        self.track_nodes.iter().map(|s| parse_node_ref(s)).collect()
    }
}

/// Parse "layer:index" into a node reference.
pub fn parse_node_ref(s: &str) -> Result<NodeRef, ConfigError> {
    let bad = || ConfigError::BadNodeRef(s.to_string());
    let (layer, index) = s.split_once(':').ok_or_else(bad)?;
    Ok(NodeRef::new(
        layer.trim().parse().map_err(|_| bad())?,
        index.trim().parse().map_err(|_| bad())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip_overrides_fields() {
        let cfg = RunConfig::from_toml_str(
            r#"
            loss = "mean-squared-error"
            layer_widths = [4, 8, 3]
            batch_size = 8
            scoring = "gradient-free"
            new_edge_init = "scaled-random"
            credibility_decay = "exponential"
            weight_scale_rule = "fixed"
            fixed_weight_sigma = 0.25
            track_nodes = ["1:0", "1:3"]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.loss, LossKind::MeanSquaredError);
        assert_eq!(cfg.layer_widths, vec![4, 8, 3]);
        assert_eq!(cfg.scoring, Scoring::GradientFree);
        assert_eq!(cfg.new_edge_init, NewEdgeInit::ScaledRandom);
        assert_eq!(cfg.credibility_decay, DecayKind::Exponential);
        assert_eq!(
            cfg.parsed_track_nodes().unwrap(),
            vec![NodeRef::new(1, 0), NodeRef::new(1, 3)]
        );
        // untouched fields keep defaults
        assert_eq!(cfg.rewire_interval, 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str("sparsityhyper = 0.5\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn invalid_branching_factor_is_rejected() {
        let err = RunConfig::from_toml_str("branching_factor = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("branching_factor"));
    }

    #[test]
    fn bad_track_node_strings_are_rejected() {
        let err = RunConfig::from_toml_str("track_nodes = [\"banana\"]\n").unwrap_err();
        assert!(matches!(err, ConfigError::BadNodeRef(_)));
    }

    #[test]
    fn zero_schedule_lengths_are_rejected() {
        let err = RunConfig::from_toml_str("growth_warmup_steps = 0\n").unwrap_err();
        assert!(err.to_string().contains("warmup"));
    }
}
