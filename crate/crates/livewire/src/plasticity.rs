//! Weight updates with per-edge, age-dependent learning rates.
//!
//! Every edge decays from `eta_new` toward `eta_floor` as it ages; the
//! default decay is the hyperbolic credibility form
//! `eta(age) = eta_floor + (eta_new - eta_floor) * halflife / (halflife + age)`,
//! which halves the decaying component at `age == halflife`. A young
//! edge therefore adapts fast while an old, well-fitted edge barely
//! moves — the mechanism that lets few-shot adaptation leave prior
//! learning intact. Edges that have been pruned are never updated:
//! the step walks the network's own edge set and reports gradient
//! entries for missing edges as stale.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagation::GradMap;
use crate::schedule::CyclicSchedule;
use crate::topology::{EdgeKey, Network, NodeRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayKind {
    /// halflife / (halflife + age) — the credibility factor.
    Hyperbolic,
    /// 2^(-age / halflife).
    Exponential,
}

#[derive(Clone, Debug)]
pub struct CredibilitySchedule {
    /// Rate at age 0; must be positive.
    pub eta_new: f64,
    /// Asymptotic rate; non-negative, at most eta_new.
    pub eta_floor: f64,
    /// Age at which the decaying component halves; positive.
    pub halflife: f64,
    pub decay: DecayKind,
    /// Network-wide cyclic multiplier applied on top of the age decay.
    pub global_scale: CyclicSchedule,
}

impl CredibilitySchedule {
    /// Age-dependent rate before the global multiplier.
    pub fn eta(&self, age: u64) -> f64 {
        let factor = match self.decay {
            DecayKind::Hyperbolic => self.halflife / (self.halflife + age as f64),
            DecayKind::Exponential => (-(age as f64) / self.halflife).exp2(),
        };
        self.eta_floor + (self.eta_new - self.eta_floor) * factor
    }

    pub fn validate(&self) -> Result<(), PlasticityError> {
        if !(self.eta_new > 0.0) {
            return Err(PlasticityError::BadSchedule("eta_new must be positive"));
        }
        if !(self.eta_floor >= 0.0 && self.eta_floor <= self.eta_new) {
            return Err(PlasticityError::BadSchedule(
                "eta_floor must lie in [0, eta_new]",
            ));
        }
        if !(self.halflife > 0.0) {
            return Err(PlasticityError::BadSchedule("halflife must be positive"));
        }
        Ok(())
    }
}

/// The rate an edge of this age receives at this step.
pub fn effective_rate(age: u64, step: u64, schedule: &CredibilitySchedule) -> f64 {
    schedule.global_scale.at(step) * schedule.eta(age)
}

/// Optional rate raise for edges whose smoothed |gradient| stays in the
/// top tail — capped so no edge ever exceeds the age-0 rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HighGradientBoost {
    /// Fraction of edges below the boost threshold, e.g. 0.9.
    pub percentile: f64,
    /// Multiplier applied to eta(age) before the eta_new cap.
    pub multiplier: f64,
    /// EMA coefficient for the per-edge |gradient| trace.
    pub smoothing: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    /// In [0, 1).
    pub momentum_coeff: f64,
    pub schedule: CredibilitySchedule,
    /// Global-norm clip applied to the whole gradient map; None = off.
    pub gradient_clip: Option<f64>,
    /// Off by default.
    pub boost: Option<HighGradientBoost>,
}

#[derive(Debug, Error)]
pub enum PlasticityError {
    #[error("non-finite gradient for edge {0} -> {1}")]
    NonFiniteGradient(NodeRef, NodeRef),
    #[error("invalid schedule: {0}")]
    BadSchedule(&'static str),
    #[error("momentum_coeff must lie in [0, 1)")]
    BadMomentum,
}

/// Per-step summary.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub applied: usize,
    /// Gradient-map entries whose edge no longer exists.
    pub stale: Vec<EdgeKey>,
    pub mean_abs_update: f64,
    pub boosted: usize,
}

/// Owns optimizer state (the boost EMA when enabled) and applies steps.
#[derive(Clone, Debug)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    smoothed_abs_grad: BTreeMap<EdgeKey, f64>,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig) -> Result<Self, PlasticityError> {
        if !(cfg.momentum_coeff >= 0.0 && cfg.momentum_coeff < 1.0) {
            return Err(PlasticityError::BadMomentum);
        }
        cfg.schedule.validate()?;
        Ok(Self {
            cfg,
            smoothed_abs_grad: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    /// One optimizer step: momentum update, credibility-rated weight
    /// update, age increment on every surviving edge, and a step-count
    /// bump on the network. Edges absent from the gradient map see a
    /// zero gradient; gradient entries without an edge are stale.
    pub fn step(
        &mut self,
        net: &mut Network,
        grads: &GradMap,
        step_index: u64,
    ) -> Result<StepReport, PlasticityError> {
        for (&(src, dst), &g) in grads.iter() {
            if !g.is_finite() {
                return Err(PlasticityError::NonFiniteGradient(src, dst));
            }
        }
        let stale: Vec<EdgeKey> = grads
            .keys()
            .filter(|&&(src, dst)| !net.contains_edge(src, dst))
            .copied()
            .collect();

        // global-norm clip over the gradients that will be applied
        let clip_factor = match self.cfg.gradient_clip {
            Some(clip) => {
                let mut sq = 0.0;
                for (key, &g) in grads.iter() {
                    if !stale.contains(key) {
                        sq += g * g;
                    }
                }
                let norm = sq.sqrt();
                if norm > clip {
                    clip / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };

        let boost_threshold = self.boost_threshold(net, grads);

        let schedule = self.cfg.schedule.clone();
        let momentum_coeff = self.cfg.momentum_coeff;
        let boost = self.cfg.boost;
        let global = schedule.global_scale.at(step_index);
        let mut applied = 0usize;
        let mut boosted = 0usize;
        let mut abs_update_sum = 0.0;
        for (key, state) in net.edges_mut() {
            let g = grads.get(key).copied().unwrap_or(0.0) * clip_factor;
            state.momentum = momentum_coeff * state.momentum + g;
            let mut eta = schedule.eta(state.age);
            if let (Some(b), Some(threshold)) = (boost, boost_threshold) {
                let smoothed = self.smoothed_abs_grad.get(key).copied().unwrap_or(0.0);
                if smoothed >= threshold {
                    eta = (eta * b.multiplier).min(schedule.eta_new);
                    boosted += 1;
                }
            }
            let update = global * eta * state.momentum;
            state.weight -= update;
            state.age += 1;
            abs_update_sum += update.abs();
            applied += 1;
        }
        net.bump_step_count();

        if let Some(b) = boost {
            for (key, &g) in grads.iter() {
                if net.contains_edge(key.0, key.1) {
                    let entry = self.smoothed_abs_grad.entry(*key).or_insert(0.0);
                    *entry = b.smoothing * *entry + (1.0 - b.smoothing) * g.abs();
                }
            }
            self.smoothed_abs_grad
                .retain(|key, _| net.contains_edge(key.0, key.1));
        }

        Ok(StepReport {
            applied,
            stale,
            mean_abs_update: if applied == 0 {
                0.0
            } else {
                abs_update_sum / applied as f64
            },
            boosted,
        })
    }

    fn boost_threshold(&self, net: &Network, _grads: &GradMap) -> Option<f64> {
        let b = self.cfg.boost?;
        let mut values: Vec<f64> = net
            .edge_keys()
            .map(|key| self.smoothed_abs_grad.get(&key).copied().unwrap_or(0.0))
            .collect();
        if values.is_empty() {
            return None;
        }
        values.sort_by(|a, b| a.total_cmp(b));
        let idx = ((values.len() as f64 * b.percentile) as usize).min(values.len() - 1);
        let threshold = values[idx];
        if threshold <= 0.0 {
            None
        } else {
            Some(threshold)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::WeightInit;

    fn n(layer: usize, index: usize) -> NodeRef {
        NodeRef::new(layer, index)
    }

    fn schedule(eta_new: f64, eta_floor: f64, halflife: f64) -> CredibilitySchedule {
        CredibilitySchedule {
            eta_new,
            eta_floor,
            halflife,
            decay: DecayKind::Hyperbolic,
            global_scale: CyclicSchedule::constant(1.0),
        }
    }

    fn plain_config(eta: f64, momentum: f64) -> OptimizerConfig {
        OptimizerConfig {
            momentum_coeff: momentum,
            schedule: schedule(eta, eta, 100.0),
            gradient_clip: None,
            boost: None,
        }
    }

    #[test]
    fn rate_at_age_zero_is_eta_new() {
        let s = schedule(0.1, 0.001, 50.0);
        assert_eq!(effective_rate(0, 0, &s), 0.1);
    }

    #[test]
    fn rate_at_halflife_with_zero_floor_is_half() {
        let s = schedule(0.2, 0.0, 50.0);
        assert!((effective_rate(50, 0, &s) - 0.1).abs() < 1e-15);
        let exp = CredibilitySchedule {
            decay: DecayKind::Exponential,
            ..schedule(0.2, 0.0, 50.0)
        };
        assert!((effective_rate(50, 0, &exp) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rate_decreases_monotonically_with_age() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let eta_new = rng.gen_range(0.01..1.0);
            let eta_floor = rng.gen_range(0.0..eta_new);
            let halflife = rng.gen_range(1.0..500.0);
            for decay in [DecayKind::Hyperbolic, DecayKind::Exponential] {
                let s = CredibilitySchedule {
                    decay,
                    ..schedule(eta_new, eta_floor, halflife)
                };
                let mut prev = f64::INFINITY;
                for age in 0..10_000u64 {
                    let rate = s.eta(age);
                    assert!(rate >= eta_floor);
                    assert!(rate <= prev, "age {age}");
                    // strictly decreasing while the decay has resolution
                    if age < 100 {
                        assert!(rate < prev, "age {age}");
                    }
                    prev = rate;
                }
                assert!((s.eta(10_000_000) - eta_floor).abs() < eta_new * 1e-2 + 1e-12);
            }
        }
    }

    #[test]
    fn global_scale_multiplies_the_rate() {
        let s = CredibilitySchedule {
            global_scale: CyclicSchedule::new(0.5, 2.0, 0.1, 10, 10).unwrap(),
            ..schedule(0.1, 0.1, 100.0)
        };
        assert_eq!(effective_rate(0, 0, &s), 0.5 * 0.1);
        assert_eq!(effective_rate(0, 10, &s), 2.0 * 0.1);
    }

    fn two_edge_net() -> (Network, EdgeKey, EdgeKey) {
        let mut net = Network::new(vec![2, 2]).unwrap();
        let a = (n(0, 0), n(1, 0));
        let b = (n(0, 1), n(1, 1));
        net.grow_edges(&[a, b], WeightInit::Zero);
        (net, a, b)
    }

    #[test]
    fn zero_gradients_leave_weights_but_age_everything() {
        let (mut net, a, b) = two_edge_net();
        net.edge_mut(a.0, a.1).unwrap().weight = 0.5;
        net.edge_mut(b.0, b.1).unwrap().weight = -0.25;
        let mut opt = Optimizer::new(plain_config(0.1, 0.9)).unwrap();
        let grads: GradMap = [(a, 0.0), (b, 0.0)].into_iter().collect();
        opt.step(&mut net, &grads, 0).unwrap();
        assert_eq!(net.edge(a.0, a.1).unwrap().weight, 0.5);
        assert_eq!(net.edge(b.0, b.1).unwrap().weight, -0.25);
        assert_eq!(net.edge(a.0, a.1).unwrap().age, 1);
        assert_eq!(net.edge(b.0, b.1).unwrap().age, 1);
        assert_eq!(net.step_count(), 1);
    }

    #[test]
    fn momentum_follows_the_geometric_recursion() {
        let (mut net, a, _) = two_edge_net();
        let mut opt = Optimizer::new(plain_config(0.01, 0.9)).unwrap();
        let g = 0.5;
        let grads: GradMap = [(a, g)].into_iter().collect();
        let expected = [g, 1.9 * g, 2.71 * g];
        for step in 0..3 {
            opt.step(&mut net, &grads, step).unwrap();
            let m = net.edge(a.0, a.1).unwrap().momentum;
            assert!(
                (m - expected[step as usize]).abs() < 1e-12,
                "step {step}: momentum {m}"
            );
        }
    }

    #[test]
    fn stale_gradient_entries_are_reported_not_applied() {
        let (mut net, a, b) = two_edge_net();
        net.remove_edges(&[b]).unwrap();
        let mut opt = Optimizer::new(plain_config(0.1, 0.0)).unwrap();
        let grads: GradMap = [(a, 1.0), (b, 99.0)].into_iter().collect();
        let report = opt.step(&mut net, &grads, 0).unwrap();
        assert_eq!(report.applied, 1);
        assert_eq!(report.stale, vec![b]);
    }

    #[test]
    fn non_finite_gradient_names_the_edge() {
        let (mut net, a, _) = two_edge_net();
        let mut opt = Optimizer::new(plain_config(0.1, 0.0)).unwrap();
        let grads: GradMap = [(a, f64::NAN)].into_iter().collect();
        let err = opt.step(&mut net, &grads, 0).unwrap_err();
        match err {
            PlasticityError::NonFiniteGradient(src, dst) => {
                assert_eq!((src, dst), a);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mixed_ages_receive_rates_matching_the_schedule_oracle() {
        let (mut net, a, b) = two_edge_net();
        net.edge_mut(a.0, a.1).unwrap().age = 0;
        net.edge_mut(b.0, b.1).unwrap().age = 200;
        let cfg = OptimizerConfig {
            momentum_coeff: 0.0,
            schedule: schedule(0.1, 0.002, 40.0),
            gradient_clip: None,
            boost: None,
        };
        let sched = cfg.schedule.clone();
        let mut opt = Optimizer::new(cfg).unwrap();
        let g = 1.0;
        let grads: GradMap = [(a, g), (b, g)].into_iter().collect();
        opt.step(&mut net, &grads, 7).unwrap();
        let da = -net.edge(a.0, a.1).unwrap().weight;
        let db = -net.edge(b.0, b.1).unwrap().weight;
        assert_eq!(da, effective_rate(0, 7, &sched) * g);
        assert_eq!(db, effective_rate(200, 7, &sched) * g);
        // older edge moved less
        assert!(db.abs() < da.abs());
    }

    #[test]
    fn degenerate_schedule_reduces_to_plain_sgd_bitwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let (mut net, a, b) = two_edge_net();
        let lr = 0.05;
        let mut opt = Optimizer::new(plain_config(lr, 0.0)).unwrap();
        let mut oracle_w = [0.0f64, 0.0];
        for step in 0..50 {
            let ga = rng.gen_range(-1.0..1.0);
            let gb = rng.gen_range(-1.0..1.0);
            let grads: GradMap = [(a, ga), (b, gb)].into_iter().collect();
            opt.step(&mut net, &grads, step).unwrap();
            oracle_w[0] -= lr * ga;
            oracle_w[1] -= lr * gb;
            assert_eq!(net.edge(a.0, a.1).unwrap().weight.to_bits(), oracle_w[0].to_bits());
            assert_eq!(net.edge(b.0, b.1).unwrap().weight.to_bits(), oracle_w[1].to_bits());
        }
    }

    #[test]
    fn gradient_clip_caps_the_global_norm() {
        let (mut net, a, b) = two_edge_net();
        let cfg = OptimizerConfig {
            gradient_clip: Some(1.0),
            ..plain_config(1.0, 0.0)
        };
        let mut opt = Optimizer::new(cfg).unwrap();
        let grads: GradMap = [(a, 3.0), (b, 4.0)].into_iter().collect();
        opt.step(&mut net, &grads, 0).unwrap();
        // norm 5 clipped to 1: effective gradients 0.6 and 0.8
        assert!((net.edge(a.0, a.1).unwrap().weight + 0.6).abs() < 1e-15);
        assert!((net.edge(b.0, b.1).unwrap().weight + 0.8).abs() < 1e-15);
    }

    #[test]
    fn age_counts_steps_survived_exactly() {
        let (mut net, a, b) = two_edge_net();
        let mut opt = Optimizer::new(plain_config(0.1, 0.0)).unwrap();
        let grads: GradMap = GradMap::new();
        for step in 0..5 {
            opt.step(&mut net, &grads, step).unwrap();
        }
        assert_eq!(net.edge(a.0, a.1).unwrap().age, 5);
        net.grow_edges(&[(n(0, 0), n(1, 1))], WeightInit::Zero);
        for step in 5..8 {
            opt.step(&mut net, &grads, step).unwrap();
        }
        assert_eq!(net.edge(a.0, a.1).unwrap().age, 8);
        assert_eq!(net.edge(b.0, b.1).unwrap().age, 8);
        assert_eq!(net.edge(n(0, 0), n(1, 1)).unwrap().age, 3);
        assert_eq!(net.step_count(), 8);
    }

    #[test]
    fn pruned_edges_are_frozen_under_interleaved_rewiring() {
        // keep sending gradients for pruned keys: they must be reported
        // stale every step and never reappear in the network
        use rand::{Rng, SeedableRng};
        use std::collections::BTreeSet;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let mut net = Network::new(vec![3, 3, 3]).unwrap();
        let mut pairs = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                pairs.push((n(0, i), n(1, j)));
                pairs.push((n(1, i), n(2, j)));
            }
        }
        net.grow_edges(&pairs, WeightInit::ScaledRandom { seed: 1 });
        let mut opt = Optimizer::new(plain_config(0.05, 0.5)).unwrap();
        let mut dead: BTreeSet<EdgeKey> = BTreeSet::new();
        for step in 0..100u64 {
            if step % 7 == 3 && net.edge_count() > 4 {
                let removed = net.prune_edges(1, &Default::default()).unwrap();
                dead.insert((removed[0].src, removed[0].dst));
            }
            let mut grads: GradMap = net
                .edge_keys()
                .map(|k| (k, rng.gen_range(-1.0..1.0)))
                .collect();
            for &k in &dead {
                grads.insert(k, rng.gen_range(-1.0..1.0));
            }
            let report = opt.step(&mut net, &grads, step).unwrap();
            assert_eq!(report.stale, dead.iter().copied().collect::<Vec<_>>());
            for &(src, dst) in &dead {
                assert!(!net.contains_edge(src, dst));
            }
        }
    }

    #[test]
    fn older_edges_receive_smaller_updates_for_equal_gradients() {
        let (mut net, a, b) = two_edge_net();
        net.edge_mut(b.0, b.1).unwrap().age = 500;
        let cfg = OptimizerConfig {
            momentum_coeff: 0.0,
            schedule: schedule(0.1, 0.0, 50.0),
            gradient_clip: None,
            boost: None,
        };
        let mut opt = Optimizer::new(cfg).unwrap();
        let grads: GradMap = [(a, 0.7), (b, 0.7)].into_iter().collect();
        opt.step(&mut net, &grads, 0).unwrap();
        let young = net.edge(a.0, a.1).unwrap().weight.abs();
        let old = net.edge(b.0, b.1).unwrap().weight.abs();
        assert!(old < young);
    }
}
