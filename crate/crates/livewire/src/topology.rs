//! Layered-DAG network representation and all structural mutation.
//!
//! A `Network` is a list of layer widths plus a sparse, mutable set of
//! forward cross-layer edges. Edges are keyed by (src, dst) and indexed
//! by both endpoints so traversal is O(degree). All iteration orders are
//! lexicographic in node coordinates, which is what makes training runs
//! replayable bit for bit.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A node addressed by (layer, index). Layer 0 is the input layer, the
/// last layer is the output layer.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct NodeRef {
    pub layer: usize,
    pub index: usize,
}

impl NodeRef {
    pub fn new(layer: usize, index: usize) -> Self {
        Self { layer, index }
    }
}

impl std::fmt::Display for NodeRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.layer, self.index)
    }
}

/// Edge key in canonical (src, dst) order.
pub type EdgeKey = (NodeRef, NodeRef);

/// Mutable per-edge state. `age` counts optimizer steps survived since
/// the edge was created.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeState {
    pub weight: f64,
    pub momentum: f64,
    pub age: u64,
}

/// A fully materialized edge record, as returned by queries and pruning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub src: NodeRef,
    pub dst: NodeRef,
    pub weight: f64,
    pub momentum: f64,
    pub age: u64,
}

/// Per-node normalization state for one hidden layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormState {
    pub scale: f64,
    pub shift: f64,
    pub running_mean: f64,
    pub running_var: f64,
}

impl Default for NormState {
    fn default() -> Self {
        Self {
            scale: 1.0,
            shift: 0.0,
            running_mean: 0.0,
            running_var: 1.0,
        }
    }
}

/// Weight initialization for newly grown edges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightInit {
    /// Exactly 0.0 — growth cannot change any forward output.
    Zero,
    /// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], fan_in measured at
    /// creation time (including the edge being created), drawn from a
    /// ChaCha stream seeded here.
    ScaledRandom { seed: u64 },
    /// Uniform in [-sigma, +sigma].
    FixedRandom { sigma: f64, seed: u64 },
}

/// One structural invariant violation, reported as data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    IntraLayerEdge { src: NodeRef, dst: NodeRef },
    BackwardEdge { src: NodeRef, dst: NodeRef },
    NodeOutOfRange { node: NodeRef },
    DuplicateEdge { src: NodeRef, dst: NodeRef },
    NonFiniteNormScale { layer: usize, index: usize },
    NegativeRunningVar { layer: usize, index: usize },
    NormShapeMismatch { expected_layers: usize, found: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::IntraLayerEdge { src, dst } => {
                write!(f, "intra-layer edge {src} -> {dst}")
            }
            Violation::BackwardEdge { src, dst } => write!(f, "backward edge {src} -> {dst}"),
            Violation::NodeOutOfRange { node } => write!(f, "node out of range: {node}"),
            Violation::DuplicateEdge { src, dst } => write!(f, "duplicate edge {src} -> {dst}"),
            Violation::NonFiniteNormScale { layer, index } => {
                write!(f, "non-finite norm scale at {layer}:{index}")
            }
            Violation::NegativeRunningVar { layer, index } => {
                write!(f, "negative running variance at {layer}:{index}")
            }
            Violation::NormShapeMismatch {
                expected_layers,
                found,
            } => write!(
                f,
                "norm state covers {found} layers, expected {expected_layers}"
            ),
        }
    }
}

/// Why a requested growth pair was skipped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkipReason {
    Duplicate,
    NotForward,
    OutOfRange,
}

/// Outcome of a `grow_edges` call.
#[derive(Clone, Debug, Default)]
pub struct GrowReport {
    pub added: Vec<EdgeKey>,
    pub skipped: Vec<(EdgeKey, SkipReason)>,
}

impl GrowReport {
    pub fn count(&self) -> usize {
        self.added.len()
    }
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("prune count {requested} exceeds {available} prunable edges")]
    PruneCountTooLarge { requested: usize, available: usize },
    #[error("edge {0} -> {1} not present")]
    MissingEdge(NodeRef, NodeRef),
    #[error("network needs at least 2 layers with positive widths")]
    BadShape,
}

/// Sparse layered DAG with per-hidden-layer normalization state.
///
/// Structural mutation is single-writer: callers hold `&mut Network`
/// between training steps. Reads never mutate.
#[derive(Clone, Debug)]
pub struct Network {
    layer_widths: Vec<usize>,
    edges: BTreeMap<EdgeKey, EdgeState>,
    in_adj: Vec<Vec<BTreeSet<NodeRef>>>,
    out_adj: Vec<Vec<BTreeSet<NodeRef>>>,
    /// norm[h] covers layer h + 1; input and output layers carry none.
    norm: Vec<Vec<NormState>>,
    step_count: u64,
}

impl Network {
    /// An edge-free network. Hidden-layer norm state starts at
    /// scale 1, shift 0, running mean 0, running variance 1.
    pub fn new(layer_widths: Vec<usize>) -> Result<Self, TopologyError> {
        if layer_widths.len() < 2 || layer_widths.iter().any(|&w| w == 0) {
            return Err(TopologyError::BadShape);
        }
        let in_adj = layer_widths
            .iter()
            .map(|&w| vec![BTreeSet::new(); w])
            .collect();
        let out_adj = layer_widths
            .iter()
            .map(|&w| vec![BTreeSet::new(); w])
            .collect();
        let norm = layer_widths[1..layer_widths.len() - 1]
            .iter()
            .map(|&w| vec![NormState::default(); w])
            .collect();
        Ok(Self {
            layer_widths,
            edges: BTreeMap::new(),
            in_adj,
            out_adj,
            norm,
            step_count: 0,
        })
    }

    pub fn layer_widths(&self) -> &[usize] {
        &self.layer_widths
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len()
    }

    pub fn width(&self, layer: usize) -> usize {
        self.layer_widths[layer]
    }

    pub fn node_count(&self) -> usize {
        self.layer_widths.iter().sum()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub(crate) fn bump_step_count(&mut self) {
        self.step_count += 1;
    }

    /// Overwrite the optimizer step counter; checkpoint loading and
    /// test fixtures use this, the training loop never does.
    pub fn set_step_count(&mut self, steps: u64) {
        self.step_count = steps;
    }

    pub fn contains_node(&self, node: NodeRef) -> bool {
        node.layer < self.layer_widths.len() && node.index < self.layer_widths[node.layer]
    }

    pub fn contains_edge(&self, src: NodeRef, dst: NodeRef) -> bool {
        self.edges.contains_key(&(src, dst))
    }

    pub fn edge(&self, src: NodeRef, dst: NodeRef) -> Option<&EdgeState> {
        self.edges.get(&(src, dst))
    }

    pub fn edge_mut(&mut self, src: NodeRef, dst: NodeRef) -> Option<&mut EdgeState> {
        self.edges.get_mut(&(src, dst))
    }

    /// All edges in lexicographic (src, dst) order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|(&(src, dst), s)| Edge {
            src,
            dst,
            weight: s.weight,
            momentum: s.momentum,
            age: s.age,
        })
    }

    pub fn edge_keys(&self) -> impl Iterator<Item = EdgeKey> + '_ {
        self.edges.keys().copied()
    }

    pub(crate) fn edges_mut(&mut self) -> impl Iterator<Item = (&EdgeKey, &mut EdgeState)> {
        self.edges.iter_mut()
    }

    /// Incoming edges of `node` in ascending source order.
    pub fn incoming(&self, node: NodeRef) -> impl Iterator<Item = (NodeRef, &EdgeState)> + '_ {
        self.in_adj[node.layer][node.index]
            .iter()
            .map(move |&src| (src, &self.edges[&(src, node)]))
    }

    /// Outgoing edges of `node` in ascending destination order.
    pub fn outgoing(&self, node: NodeRef) -> impl Iterator<Item = (NodeRef, &EdgeState)> + '_ {
        self.out_adj[node.layer][node.index]
            .iter()
            .map(move |&dst| (dst, &self.edges[&(node, dst)]))
    }

    pub fn in_degree(&self, node: NodeRef) -> usize {
        self.in_adj[node.layer][node.index].len()
    }

    pub fn out_degree(&self, node: NodeRef) -> usize {
        self.out_adj[node.layer][node.index].len()
    }

    pub fn norm_state(&self, node: NodeRef) -> Option<&NormState> {
        if node.layer == 0 || node.layer + 1 == self.layer_widths.len() {
            return None;
        }
        Some(&self.norm[node.layer - 1][node.index])
    }

    pub fn norm_state_mut(&mut self, node: NodeRef) -> Option<&mut NormState> {
        if node.layer == 0 || node.layer + 1 == self.layer_widths.len() {
            return None;
        }
        Some(&mut self.norm[node.layer - 1][node.index])
    }

    pub(crate) fn norm_layers(&self) -> &[Vec<NormState>] {
        &self.norm
    }

    pub(crate) fn norm_layers_mut(&mut self) -> &mut [Vec<NormState>] {
        &mut self.norm
    }

    /// Check every structural invariant; an empty list means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = validate_edge_list(
            &self.layer_widths,
            self.edges.keys().map(|&(s, d)| (s, d)),
        );
        let hidden = self.layer_widths.len().saturating_sub(2);
        if self.norm.len() != hidden {
            out.push(Violation::NormShapeMismatch {
                expected_layers: hidden,
                found: self.norm.len(),
            });
        }
        for (h, states) in self.norm.iter().enumerate() {
            for (i, st) in states.iter().enumerate() {
                if !st.scale.is_finite() {
                    out.push(Violation::NonFiniteNormScale {
                        layer: h + 1,
                        index: i,
                    });
                }
                if st.running_var < 0.0 {
                    out.push(Violation::NegativeRunningVar {
                        layer: h + 1,
                        index: i,
                    });
                }
            }
        }
        out
    }

    fn legal_pair(&self, src: NodeRef, dst: NodeRef) -> Result<(), SkipReason> {
        if !self.contains_node(src) || !self.contains_node(dst) {
            return Err(SkipReason::OutOfRange);
        }
        if src.layer >= dst.layer {
            return Err(SkipReason::NotForward);
        }
        if self.edges.contains_key(&(src, dst)) {
            return Err(SkipReason::Duplicate);
        }
        Ok(())
    }

    /// Add edges for the given pairs, age 0 and momentum 0, weights per
    /// `init`. Illegal pairs are skipped and reported, not fatal. Pairs
    /// are processed in the order given; random draws happen once per
    /// accepted pair, so the report is replayable for a fixed seed.
    pub fn grow_edges(&mut self, pairs: &[EdgeKey], init: WeightInit) -> GrowReport {
        let mut report = GrowReport::default();
        let mut rng = match init {
            WeightInit::Zero => None,
            WeightInit::ScaledRandom { seed } | WeightInit::FixedRandom { seed, .. } => {
                Some(ChaCha8Rng::seed_from_u64(seed))
            }
        };
        let mut seen: BTreeSet<EdgeKey> = BTreeSet::new();
        for &(src, dst) in pairs {
            let verdict = if seen.contains(&(src, dst)) {
                Err(SkipReason::Duplicate)
            } else {
                self.legal_pair(src, dst)
            };
            match verdict {
                Err(reason) => report.skipped.push(((src, dst), reason)),
                Ok(()) => {
                    self.insert_edge_raw(src, dst, EdgeState {
                        weight: 0.0,
                        momentum: 0.0,
                        age: 0,
                    });
                    let weight = match init {
                        WeightInit::Zero => 0.0,
                        WeightInit::ScaledRandom { .. } => {
                            let fan_in = self.in_degree(dst).max(1) as f64;
                            let bound = 1.0 / fan_in.sqrt();
                            rng.as_mut().unwrap().gen_range(-bound..=bound)
                        }
                        WeightInit::FixedRandom { sigma, .. } => {
                            rng.as_mut().unwrap().gen_range(-sigma..=sigma)
                        }
                    };
                    self.edges.get_mut(&(src, dst)).unwrap().weight = weight;
                    seen.insert((src, dst));
                    report.added.push((src, dst));
                }
            }
        }
        report
    }

    pub(crate) fn insert_edge_raw(&mut self, src: NodeRef, dst: NodeRef, state: EdgeState) {
        self.edges.insert((src, dst), state);
        self.in_adj[dst.layer][dst.index].insert(src);
        self.out_adj[src.layer][src.index].insert(dst);
    }

    /// Select, without removing, the `count` unprotected edges with the
    /// smallest |weight|; ties break on the lexicographic endpoint tuple.
    pub fn select_prune(
        &self,
        count: usize,
        protected: &BTreeSet<EdgeKey>,
    ) -> Result<Vec<Edge>, TopologyError> {
        let mut candidates: Vec<Edge> = self
            .edges()
            .filter(|e| !protected.contains(&(e.src, e.dst)))
            .collect();
        if count > candidates.len() {
            return Err(TopologyError::PruneCountTooLarge {
                requested: count,
                available: candidates.len(),
            });
        }
        candidates.sort_by(|a, b| {
            a.weight
                .abs()
                .total_cmp(&b.weight.abs())
                .then_with(|| (a.src, a.dst).cmp(&(b.src, b.dst)))
        });
        candidates.truncate(count);
        Ok(candidates)
    }

    /// Remove exactly `count` unprotected edges in ascending |weight|
    /// order and return them.
    pub fn prune_edges(
        &mut self,
        count: usize,
        protected: &BTreeSet<EdgeKey>,
    ) -> Result<Vec<Edge>, TopologyError> {
        let selected = self.select_prune(count, protected)?;
        for e in &selected {
            self.remove_edge_raw(e.src, e.dst);
        }
        Ok(selected)
    }

    /// Remove the listed edges. Errors if any is absent.
    pub fn remove_edges(&mut self, keys: &[EdgeKey]) -> Result<Vec<Edge>, TopologyError> {
        for &(src, dst) in keys {
            if !self.edges.contains_key(&(src, dst)) {
                return Err(TopologyError::MissingEdge(src, dst));
            }
        }
        let mut removed = Vec::with_capacity(keys.len());
        for &(src, dst) in keys {
            let state = self.remove_edge_raw(src, dst).unwrap();
            removed.push(Edge {
                src,
                dst,
                weight: state.weight,
                momentum: state.momentum,
                age: state.age,
            });
        }
        Ok(removed)
    }

    fn remove_edge_raw(&mut self, src: NodeRef, dst: NodeRef) -> Option<EdgeState> {
        let state = self.edges.remove(&(src, dst))?;
        self.in_adj[dst.layer][dst.index].remove(&src);
        self.out_adj[src.layer][src.index].remove(&dst);
        Some(state)
    }

    /// Append `extra` nodes to the output layer. New nodes start with no
    /// incident edges and, like all output nodes, no norm state.
    pub fn extend_output_layer(&mut self, extra: usize) {
        let last = self.layer_widths.len() - 1;
        self.layer_widths[last] += extra;
        self.in_adj[last].extend((0..extra).map(|_| BTreeSet::new()));
        self.out_adj[last].extend((0..extra).map(|_| BTreeSet::new()));
    }

    /// Hash of the connection structure only (widths + edge endpoints);
    /// weights, ages and norm state are excluded. Used to pair traces
    /// with the network they were computed on.
    pub fn structural_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_usize(self.layer_widths.len());
        for &w in &self.layer_widths {
            h.write_usize(w);
        }
        for &(src, dst) in self.edges.keys() {
            h.write_usize(src.layer);
            h.write_usize(src.index);
            h.write_usize(dst.layer);
            h.write_usize(dst.index);
        }
        h.finish()
    }

    /// Fraction of legal (src, dst) pairs that exist, overall.
    pub fn density(&self) -> f64 {
        let mut possible = 0usize;
        for i in 0..self.layer_widths.len() {
            for j in (i + 1)..self.layer_widths.len() {
                possible += self.layer_widths[i] * self.layer_widths[j];
            }
        }
        if possible == 0 {
            0.0
        } else {
            self.edges.len() as f64 / possible as f64
        }
    }

    /// Realized density per layer distance, index 0 holding distance 1.
    pub fn density_by_gap(&self) -> Vec<f64> {
        let layers = self.layer_widths.len();
        let mut possible = vec![0usize; layers - 1];
        let mut realized = vec![0usize; layers - 1];
        for i in 0..layers {
            for j in (i + 1)..layers {
                possible[j - i - 1] += self.layer_widths[i] * self.layer_widths[j];
            }
        }
        for &(src, dst) in self.edges.keys() {
            realized[dst.layer - src.layer - 1] += 1;
        }
        possible
            .iter()
            .zip(&realized)
            .map(|(&p, &r)| if p == 0 { 0.0 } else { r as f64 / p as f64 })
            .collect()
    }

    pub fn mean_edge_age(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        self.edges.values().map(|e| e.age as f64).sum::<f64>() / self.edges.len() as f64
    }
}

/// Validate a raw edge list against layer widths. This also sees
/// duplicate pairs, which the keyed `Network` store cannot represent.
pub fn validate_edge_list(
    layer_widths: &[usize],
    edges: impl IntoIterator<Item = EdgeKey>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen: BTreeSet<EdgeKey> = BTreeSet::new();
    for (src, dst) in edges {
        let in_range = |n: NodeRef| n.layer < layer_widths.len() && n.index < layer_widths[n.layer];
        if !in_range(src) {
            out.push(Violation::NodeOutOfRange { node: src });
        }
        if !in_range(dst) {
            out.push(Violation::NodeOutOfRange { node: dst });
        }
        if src.layer == dst.layer {
            out.push(Violation::IntraLayerEdge { src, dst });
        } else if src.layer > dst.layer {
            out.push(Violation::BackwardEdge { src, dst });
        }
        if !seen.insert((src, dst)) {
            out.push(Violation::DuplicateEdge { src, dst });
        }
    }
    out
}

/// FNV-1a, fixed so structural hashes are stable across runs and platforms.
struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf29ce484222325)
    }

    fn write_usize(&mut self, v: usize) {
        for b in (v as u64).to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}
