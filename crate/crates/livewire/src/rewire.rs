//! The rewiring engine: collect the strongest-activated nodes into a
//! bounded priority queue, enumerate admissible unconnected pairs among
//! them, score each pair by the loss gradient the edge would receive
//! (or by activation strength alone in gradient-free mode), and emit a
//! plan of edges to grow and to prune under the cyclic schedule.
//!
//! Scoring never needs an extra backward pass: a hypothetical edge at
//! weight zero leaves the forward pass untouched, so its gradient is
//! exactly the batch mean of `delta(dst) * post_activation(src)` from
//! the deltas already computed.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagation::{ActivationTrace, PropError};
use crate::schedule::CyclicSchedule;
use crate::topology::{Edge, EdgeKey, Network, NodeRef, TopologyError, WeightInit};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueueEntry {
    pub node: NodeRef,
    /// Mean over the batch of |normalized activation|; never negative.
    pub strength: f64,
}

/// The top-`capacity` nodes of one forward pass, strongest first, ties
/// broken by ascending node coordinates.
#[derive(Clone, Debug)]
pub struct ActivationQueue {
    pub capacity: usize,
    pub entries: Vec<QueueEntry>,
}

impl ActivationQueue {
    pub fn nodes(&self) -> impl Iterator<Item = NodeRef> + '_ {
        self.entries.iter().map(|e| e.node)
    }

    pub fn strength_of(&self, node: NodeRef) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.node == node)
            .map(|e| e.strength)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scoring {
    /// |batch-mean gradient| of the hypothetical zero-weight edge.
    Gradient,
    /// strength(src) * strength(dst); no backward pass required.
    GradientFree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NewEdgeInit {
    Zero,
    ScaledRandom,
}

#[derive(Clone, Debug)]
pub struct RewireConfig {
    pub queue_capacity: usize,
    /// K(step): how many edges to grow, rounded from the schedule.
    pub growth_schedule: CyclicSchedule,
    /// r(step): prunes per grown edge.
    pub prune_ratio_schedule: CyclicSchedule,
    /// Minimum dst.layer - src.layer; 1 enforces the intra-layer ban.
    pub min_layer_gap: usize,
    /// Score multiplier exp(distance_preference * layer gap); 0 = off.
    pub distance_preference: f64,
    pub scoring: Scoring,
    pub new_edge_init: NewEdgeInit,
    /// Admit output nodes into the queue (strength from their
    /// batch-standardized pre-activations). Off for ordinary training;
    /// the few-shot runner enables it so freshly added output nodes can
    /// acquire incoming edges.
    pub include_output_nodes: bool,
}

impl Default for RewireConfig {
    fn default() -> Self {
        Self {
            queue_capacity: 16,
            growth_schedule: CyclicSchedule::constant(1.0),
            prune_ratio_schedule: CyclicSchedule::constant(1.0),
            min_layer_gap: 1,
            distance_preference: 0.0,
            scoring: Scoring::Gradient,
            new_edge_init: NewEdgeInit::Zero,
            include_output_nodes: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub src: NodeRef,
    pub dst: NodeRef,
    pub score: f64,
}

/// The outcome of one rewiring round. Planning never mutates; apply it
/// with [`apply_plan`].
#[derive(Clone, Debug, Default)]
pub struct RewirePlan {
    pub candidates: Vec<Candidate>,
    pub to_grow: Vec<EdgeKey>,
    pub to_prune: Vec<Edge>,
    /// Human-readable notes about clipped counts.
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct MutationReport {
    pub grown: Vec<EdgeKey>,
    pub pruned: Vec<EdgeKey>,
    pub edge_count: usize,
    pub density: f64,
}

#[derive(Debug, Error)]
pub enum RewireError {
    #[error("gradient scoring requires a completed backward pass")]
    GradientsMissing,
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Propagation(#[from] PropError),
}

/// Queue eligibility: hidden nodes always; input nodes only while the
/// trace came from a training pass; output nodes only when enabled.
fn eligible(trace: &ActivationTrace, cfg_include_outputs: bool, node_layer: usize) -> bool {
    let last = trace.num_layers() - 1;
    if node_layer == 0 {
        return trace.mode.is_train();
    }
    if node_layer == last {
        return cfg_include_outputs;
    }
    true
}

fn collect_queue_impl(
    trace: &ActivationTrace,
    capacity: usize,
    include_outputs: bool,
) -> ActivationQueue {
    let mut entries: Vec<QueueEntry> = Vec::new();
    for layer in 0..trace.num_layers() {
        if !eligible(trace, include_outputs, layer) {
            continue;
        }
        for index in 0..trace.layer_width(layer) {
            let node = NodeRef::new(layer, index);
            entries.push(QueueEntry {
                node,
                strength: trace.strength(node),
            });
        }
    }
    entries.sort_by(|a, b| {
        b.strength
            .total_cmp(&a.strength)
            .then_with(|| a.node.cmp(&b.node))
    });
    entries.truncate(capacity);
    ActivationQueue { capacity, entries }
}

/// The top-`capacity` nodes by strength = mean |normalized activation|.
pub fn collect_queue(trace: &ActivationTrace, capacity: usize) -> ActivationQueue {
    collect_queue_impl(trace, capacity, false)
}

/// As [`collect_queue`] but honoring `cfg.include_output_nodes`.
pub fn collect_queue_with(
    trace: &ActivationTrace,
    capacity: usize,
    cfg: &RewireConfig,
) -> ActivationQueue {
    collect_queue_impl(trace, capacity, cfg.include_output_nodes)
}

/// All ordered pairs (u, v) of queue nodes with
/// `v.layer - u.layer >= min_layer_gap` and no existing (u, v) edge,
/// in ascending (src, dst) order.
pub fn enumerate_candidates(
    queue: &ActivationQueue,
    net: &Network,
    cfg: &RewireConfig,
) -> Vec<EdgeKey> {
    let mut pairs = Vec::new();
    for u in queue.nodes() {
        for v in queue.nodes() {
            if v.layer < u.layer + cfg.min_layer_gap {
                continue;
            }
            if net.contains_edge(u, v) {
                continue;
            }
            pairs.push((u, v));
        }
    }
    pairs.sort();
    pairs
}

fn distance_factor(cfg: &RewireConfig, src: NodeRef, dst: NodeRef) -> f64 {
    if cfg.distance_preference == 0.0 {
        1.0
    } else {
        (cfg.distance_preference * (dst.layer - src.layer) as f64).exp()
    }
}

/// Score each pair. Gradient mode reads the already-computed deltas;
/// gradient-free mode multiplies the two strengths.
pub fn score_candidates(
    pairs: &[EdgeKey],
    trace: &ActivationTrace,
    cfg: &RewireConfig,
) -> Result<Vec<Candidate>, RewireError> {
    match cfg.scoring {
        Scoring::Gradient => {
            if !trace.deltas_ready {
                return Err(RewireError::GradientsMissing);
            }
            Ok(pairs
                .iter()
                .map(|&(src, dst)| {
                    let grad = crate::propagation::pair_gradient(trace, src, dst)
                        .expect("deltas checked above");
                    Candidate {
                        src,
                        dst,
                        score: grad.abs() * distance_factor(cfg, src, dst),
                    }
                })
                .collect())
        }
        Scoring::GradientFree => Ok(pairs
            .iter()
            .map(|&(src, dst)| Candidate {
                src,
                dst,
                score: trace.strength(src) * trace.strength(dst) * distance_factor(cfg, src, dst),
            })
            .collect()),
    }
}

/// Compose queue collection, candidate enumeration, scoring, and
/// grow/prune selection into a plan for this step. Nothing is mutated.
pub fn plan_rewire(
    net: &Network,
    trace: &ActivationTrace,
    cfg: &RewireConfig,
    step: u64,
) -> Result<RewirePlan, RewireError> {
    let queue = collect_queue_with(trace, cfg.queue_capacity, cfg);
    let pairs = enumerate_candidates(&queue, net, cfg);
    let mut candidates = score_candidates(&pairs, trace, cfg)?;
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| (a.src, a.dst).cmp(&(b.src, b.dst)))
    });

    let mut notes = Vec::new();
    let requested_k = cfg.growth_schedule.count_at(step);
    let k = requested_k.min(candidates.len());
    if k < requested_k {
        notes.push(format!(
            "growth clipped from {requested_k} to {k} available candidates"
        ));
    }
    let to_grow: Vec<EdgeKey> = candidates[..k].iter().map(|c| (c.src, c.dst)).collect();

    let ratio = cfg.prune_ratio_schedule.at(step).max(0.0);
    let requested_prunes = (ratio * to_grow.len() as f64).round() as usize;
    let protected: BTreeSet<EdgeKey> = to_grow.iter().copied().collect();
    let prunable = net
        .edges()
        .filter(|e| !protected.contains(&(e.src, e.dst)))
        .count();
    let prune_count = requested_prunes.min(prunable);
    if prune_count < requested_prunes {
        notes.push(format!(
            "prune clipped from {requested_prunes} to {prune_count} prunable edges"
        ));
    }
    let to_prune = net.select_prune(prune_count, &protected)?;

    Ok(RewirePlan {
        candidates,
        to_grow,
        to_prune,
        notes,
    })
}

/// Grow then prune per the plan. New edges start at age 0, momentum 0,
/// weight per `cfg.new_edge_init`; `seed` feeds the scaled-random draw.
pub fn apply_plan(
    net: &mut Network,
    plan: &RewirePlan,
    cfg: &RewireConfig,
    seed: u64,
) -> Result<MutationReport, RewireError> {
    let init = match cfg.new_edge_init {
        NewEdgeInit::Zero => WeightInit::Zero,
        NewEdgeInit::ScaledRandom => WeightInit::ScaledRandom { seed },
    };
    let grow_report = net.grow_edges(&plan.to_grow, init);
    let prune_keys: Vec<EdgeKey> = plan.to_prune.iter().map(|e| (e.src, e.dst)).collect();
    let pruned = net.remove_edges(&prune_keys)?;
    Ok(MutationReport {
        grown: grow_report.added,
        pruned: pruned.iter().map(|e| (e.src, e.dst)).collect(),
        edge_count: net.edge_count(),
        density: net.density(),
    })
}
