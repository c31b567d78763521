//! Forward and backward passes over the sparse cross-layer DAG.
//!
//! Hidden nodes compute a sparse weighted sum, normalize it (batch
//! statistics in train mode, running statistics in eval mode), apply
//! scale/shift, rectify, and in train mode pass through inverted
//! dropout. Output nodes are identity; input nodes feed their raw
//! values forward. The trace records everything rewiring needs,
//! including batch-standardized values for input and output nodes so
//! activation strengths are comparable across the whole network.
//!
//! All reductions run in a fixed order (samples ascending inside nodes
//! ascending inside layers ascending; edge sums in lexicographic source
//! order), which is what makes trajectories replayable bit for bit.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::topology::{EdgeKey, Network, NodeRef};

/// Epsilon inside the normalization square root.
pub const NORM_EPS: f64 = 1e-5;
/// Running-statistics momentum: running = M * running + (1 - M) * batch.
pub const RUNNING_STAT_MOMENTUM: f64 = 0.9;

pub type GradMap = BTreeMap<EdgeKey, f64>;

/// One training or evaluation batch, row-major: `inputs[sample][feature]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    SoftmaxCrossEntropy,
    MeanSquaredError,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TraceMode {
    Train { dropout_rate: f64 },
    Eval,
}

impl TraceMode {
    pub fn is_train(&self) -> bool {
        matches!(self, TraceMode::Train { .. })
    }
}

#[derive(Debug, Error)]
pub enum PropError {
    #[error("train mode needs batch_size >= 2 for batch statistics, got {0}")]
    BatchTooSmall(usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("input width {got} does not match input layer width {expected}")]
    InputWidthMismatch { expected: usize, got: usize },
    #[error("target width {got} does not match output layer width {expected}")]
    TargetWidthMismatch { expected: usize, got: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(NodeRef),
    #[error("trace was computed on a different network structure")]
    TraceMismatch,
    #[error("trace has no deltas; run backward first")]
    DeltasMissing,
    #[error("target row {0} is not one-hot")]
    NotOneHot(usize),
    #[error("ragged batch: row {row} has width {got}, expected {expected}")]
    RaggedBatch {
        row: usize,
        expected: usize,
        got: usize,
    },
}

/// Everything recorded per layer during a forward pass, node-major:
/// `pre_norm[node][sample]`.
#[derive(Clone, Debug, Default)]
pub struct LayerTrace {
    pub pre_norm: Vec<Vec<f64>>,
    pub normalized: Vec<Vec<f64>>,
    pub post_activation: Vec<Vec<f64>>,
    /// Hidden layers in train mode with dropout_rate > 0; empty otherwise.
    pub dropout_mask: Vec<Vec<bool>>,
    /// d loss / d pre-activation, filled by `backward`.
    pub delta: Vec<Vec<f64>>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ActivationTrace {
    pub layers: Vec<LayerTrace>,
    pub batch_size: usize,
    pub mode: TraceMode,
    pub structural_hash: u64,
    pub deltas_ready: bool,
}

impl ActivationTrace {
    pub fn normalized(&self, node: NodeRef) -> &[f64] {
        &self.layers[node.layer].normalized[node.index]
    }

    pub fn post_activation(&self, node: NodeRef) -> &[f64] {
        &self.layers[node.layer].post_activation[node.index]
    }

    pub fn delta(&self, node: NodeRef) -> Option<&[f64]> {
        if !self.deltas_ready {
            return None;
        }
        Some(&self.layers[node.layer].delta[node.index])
    }

    /// Mean |normalized activation| over the batch; the queue-ranking
    /// strength of a node.
    pub fn strength(&self, node: NodeRef) -> f64 {
        let vals = self.normalized(node);
        vals.iter().map(|v| v.abs()).sum::<f64>() / vals.len() as f64
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_width(&self, layer: usize) -> usize {
        self.layers[layer].pre_norm.len()
    }
}

fn check_batch(net: &Network, batch: &Batch) -> Result<(), PropError> {
    if batch.is_empty() {
        return Err(PropError::EmptyBatch);
    }
    let in_width = net.width(0);
    for (row, x) in batch.inputs.iter().enumerate() {
        if x.len() != in_width {
            if row == 0 {
                return Err(PropError::InputWidthMismatch {
                    expected: in_width,
                    got: x.len(),
                });
            }
            return Err(PropError::RaggedBatch {
                row,
                expected: in_width,
                got: x.len(),
            });
        }
    }
    Ok(())
}

fn batch_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Standardize a node's raw values against its own batch statistics.
fn standardize(values: &[f64]) -> (Vec<f64>, f64, f64) {
    let (mean, var) = batch_stats(values);
    let inv = 1.0 / (var + NORM_EPS).sqrt();
    let normalized = values.iter().map(|v| (v - mean) * inv).collect();
    (normalized, mean, var)
}

struct ForwardResult {
    trace: ActivationTrace,
    outputs: Vec<Vec<f64>>,
}

fn forward_impl(
    net: &Network,
    batch: &Batch,
    mode: TraceMode,
    dropout_seed: u64,
) -> Result<ForwardResult, PropError> {
    check_batch(net, batch)?;
    let b = batch.len();
    if mode.is_train() && b < 2 {
        return Err(PropError::BatchTooSmall(b));
    }
    let layers = net.num_layers();
    let mut trace = ActivationTrace {
        layers: Vec::with_capacity(layers),
        batch_size: b,
        mode,
        structural_hash: net.structural_hash(),
        deltas_ready: false,
    };

    let (dropout_rate, mut dropout_rng) = match mode {
        TraceMode::Train { dropout_rate } if dropout_rate > 0.0 => {
            (dropout_rate, Some(ChaCha8Rng::seed_from_u64(dropout_seed)))
        }
        _ => (0.0, None),
    };
    let keep_scale = if dropout_rate > 0.0 {
        1.0 / (1.0 - dropout_rate)
    } else {
        1.0
    };

    for layer in 0..layers {
        let width = net.width(layer);
        let mut lt = LayerTrace::default();

        if layer == 0 {
            for i in 0..width {
                let raw: Vec<f64> = batch.inputs.iter().map(|row| row[i]).collect();
                let (normalized, mean, var) = standardize(&raw);
                lt.batch_mean.push(mean);
                lt.batch_var.push(var);
                lt.normalized.push(normalized);
                lt.post_activation.push(raw.clone());
                lt.pre_norm.push(raw);
                lt.delta.push(Vec::new());
            }
        } else {
            let is_output = layer == layers - 1;
            for i in 0..width {
                let node = NodeRef::new(layer, i);
                let mut pre = vec![0.0f64; b];
                for (src, state) in net.incoming(node) {
                    let upstream = &trace.layers[src.layer].post_activation[src.index];
                    for s in 0..b {
                        pre[s] += state.weight * upstream[s];
                    }
                }
                if pre.iter().any(|v| !v.is_finite()) {
                    return Err(PropError::NonFinite(node));
                }

                if is_output {
                    let (normalized, mean, var) = standardize(&pre);
                    lt.batch_mean.push(mean);
                    lt.batch_var.push(var);
                    lt.normalized.push(normalized);
                    lt.post_activation.push(pre.clone());
                    lt.pre_norm.push(pre);
                } else {
                    let ns = net.norm_state(node).expect("hidden node has norm state");
                    let (normalized, mean, var) = match mode {
                        TraceMode::Train { .. } => {
                            let (mean, var) = batch_stats(&pre);
                            let inv = 1.0 / (var + NORM_EPS).sqrt();
                            let norm: Vec<f64> = pre.iter().map(|v| (v - mean) * inv).collect();
                            (norm, mean, var)
                        }
                        TraceMode::Eval => {
                            let inv = 1.0 / (ns.running_var + NORM_EPS).sqrt();
                            let norm: Vec<f64> =
                                pre.iter().map(|v| (v - ns.running_mean) * inv).collect();
                            (norm, ns.running_mean, ns.running_var)
                        }
                    };
                    let mut post: Vec<f64> = normalized
                        .iter()
                        .map(|&z| {
                            let scaled = ns.scale * z + ns.shift;
                            if scaled > 0.0 {
                                scaled
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    if let Some(rng) = dropout_rng.as_mut() {
                        let mask: Vec<bool> = (0..b)
                            .map(|_| rng.gen_range(0.0..1.0) >= dropout_rate)
                            .collect();
                        for (v, &keep) in post.iter_mut().zip(&mask) {
                            *v = if keep { *v * keep_scale } else { 0.0 };
                        }
                        lt.dropout_mask.push(mask);
                    }
                    lt.batch_mean.push(mean);
                    lt.batch_var.push(var);
                    lt.normalized.push(normalized);
                    lt.post_activation.push(post);
                    lt.pre_norm.push(pre);
                }
                lt.delta.push(Vec::new());
            }
        }
        trace.layers.push(lt);
    }

    let last = layers - 1;
    let outputs: Vec<Vec<f64>> = (0..b)
        .map(|s| {
            (0..net.width(last))
                .map(|k| trace.layers[last].post_activation[k][s])
                .collect()
        })
        .collect();
    Ok(ForwardResult { trace, outputs })
}

/// Train-mode forward pass: batch-statistics normalization, inverted
/// dropout drawn from `dropout_seed`, and a running-statistics update
/// on the network. Returns the trace and `outputs[sample][k]`.
pub fn forward_train(
    net: &mut Network,
    batch: &Batch,
    dropout_rate: f64,
    dropout_seed: u64,
) -> Result<(ActivationTrace, Vec<Vec<f64>>), PropError> {
    let mode = TraceMode::Train { dropout_rate };
    let result = forward_impl(net, batch, mode, dropout_seed)?;

    for layer in 1..net.num_layers() - 1 {
        let lt = &result.trace.layers[layer];
        for i in 0..net.width(layer) {
            let ns = net
                .norm_state_mut(NodeRef::new(layer, i))
                .expect("hidden node has norm state");
            ns.running_mean = RUNNING_STAT_MOMENTUM * ns.running_mean
                + (1.0 - RUNNING_STAT_MOMENTUM) * lt.batch_mean[i];
            ns.running_var = RUNNING_STAT_MOMENTUM * ns.running_var
                + (1.0 - RUNNING_STAT_MOMENTUM) * lt.batch_var[i];
        }
    }
    Ok((result.trace, result.outputs))
}

/// Eval-mode forward pass: running statistics, no dropout, read-only.
pub fn forward_eval(
    net: &Network,
    batch: &Batch,
) -> Result<(ActivationTrace, Vec<Vec<f64>>), PropError> {
    let result = forward_impl(net, batch, TraceMode::Eval, 0)?;
    Ok((result.trace, result.outputs))
}

/// Loss value plus d loss / d output for a whole batch.
pub fn loss_and_output_grad(
    outputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    loss: LossKind,
) -> Result<(f64, Vec<Vec<f64>>), PropError> {
    if outputs.is_empty() {
        return Err(PropError::EmptyBatch);
    }
    let b = outputs.len();
    let width = outputs[0].len();
    for (row, t) in targets.iter().enumerate() {
        if t.len() != width {
            return Err(PropError::TargetWidthMismatch {
                expected: width,
                got: t.len(),
            });
        }
        let _ = row;
    }
    match loss {
        LossKind::MeanSquaredError => {
            let denom = (b * width) as f64;
            let mut total = 0.0;
            let mut grad = vec![vec![0.0; width]; b];
            for s in 0..b {
                for k in 0..width {
                    let diff = outputs[s][k] - targets[s][k];
                    total += diff * diff;
                    grad[s][k] = 2.0 * diff / denom;
                }
            }
            Ok((total / denom, grad))
        }
        LossKind::SoftmaxCrossEntropy => {
            for (row, t) in targets.iter().enumerate() {
                let ones = t.iter().filter(|&&v| v == 1.0).count();
                let zeros = t.iter().filter(|&&v| v == 0.0).count();
                if ones != 1 || ones + zeros != t.len() {
                    return Err(PropError::NotOneHot(row));
                }
            }
            let mut total = 0.0;
            let mut grad = vec![vec![0.0; width]; b];
            let inv_b = 1.0 / b as f64;
            for s in 0..b {
                let logits = &outputs[s];
                let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let mut z = 0.0;
                for &l in logits {
                    z += (l - max).exp();
                }
                let log_z = z.ln();
                for k in 0..width {
                    let log_p = logits[k] - max - log_z;
                    if targets[s][k] == 1.0 {
                        total -= log_p;
                    }
                    grad[s][k] = (log_p.exp() - targets[s][k]) * inv_b;
                }
            }
            Ok((total * inv_b, grad))
        }
    }
}

/// d(per-sample loss)/d(output), with no batch averaging.
fn per_sample_output_grad(outputs: &[Vec<f64>], targets: &[Vec<f64>], loss: LossKind) -> Vec<Vec<f64>> {
    let b = outputs.len();
    let width = outputs[0].len();
    let mut grad = vec![vec![0.0; width]; b];
    match loss {
        LossKind::MeanSquaredError => {
            let inv_w = 1.0 / width as f64;
            for s in 0..b {
                for k in 0..width {
                    grad[s][k] = 2.0 * (outputs[s][k] - targets[s][k]) * inv_w;
                }
            }
        }
        LossKind::SoftmaxCrossEntropy => {
            for s in 0..b {
                let logits = &outputs[s];
                let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let mut z = 0.0;
                for &l in logits {
                    z += (l - max).exp();
                }
                let log_z = z.ln();
                for k in 0..width {
                    grad[s][k] = (logits[k] - max - log_z).exp() - targets[s][k];
                }
            }
        }
    }
    grad
}

/// Loss of a single prediction, used for partition-invariant evaluation.
pub fn per_sample_loss(output: &[f64], target: &[f64], loss: LossKind) -> f64 {
    match loss {
        LossKind::MeanSquaredError => {
            output
                .iter()
                .zip(target)
                .map(|(o, t)| (o - t) * (o - t))
                .sum::<f64>()
                / output.len() as f64
        }
        LossKind::SoftmaxCrossEntropy => {
            let max = output.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let z: f64 = output.iter().map(|&l| (l - max).exp()).sum();
            let log_z = z.ln();
            let mut total = 0.0;
            for (k, &t) in target.iter().enumerate() {
                if t == 1.0 {
                    total -= output[k] - max - log_z;
                }
            }
            total
        }
    }
}

/// Backpropagate through the trace, filling per-node deltas and
/// returning the per-edge gradient map plus the batch loss.
///
/// The gradient of edge (u, v) is the batch mean of
/// `delta(v) * post_activation(u)`, with deltas pushed through the
/// normalization, dropout mask, and rectifier exactly as the forward
/// pass applied them.
pub fn backward(
    net: &Network,
    trace: &mut ActivationTrace,
    batch: &Batch,
    loss: LossKind,
) -> Result<(GradMap, f64), PropError> {
    if trace.structural_hash != net.structural_hash() {
        return Err(PropError::TraceMismatch);
    }
    let b = trace.batch_size;
    if batch.len() != b {
        return Err(PropError::TraceMismatch);
    }
    let layers = net.num_layers();
    let last = layers - 1;
    let out_width = net.width(last);
    for t in &batch.targets {
        if t.len() != out_width {
            return Err(PropError::TargetWidthMismatch {
                expected: out_width,
                got: t.len(),
            });
        }
    }

    let outputs: Vec<Vec<f64>> = (0..b)
        .map(|s| {
            (0..out_width)
                .map(|k| trace.layers[last].post_activation[k][s])
                .collect()
        })
        .collect();
    let (loss_value, _) = loss_and_output_grad(&outputs, &batch.targets, loss)?;

    // deltas are per-sample loss derivatives; the edge gradient takes
    // the batch mean, recovering d(batch loss)/d(weight)
    let seed = per_sample_output_grad(&outputs, &batch.targets, loss);
    for k in 0..out_width {
        trace.layers[last].delta[k] = (0..b).map(|s| seed[s][k]).collect();
    }

    let dropout_rate = match trace.mode {
        TraceMode::Train { dropout_rate } => dropout_rate,
        TraceMode::Eval => 0.0,
    };
    let keep_scale = if dropout_rate > 0.0 {
        1.0 / (1.0 - dropout_rate)
    } else {
        1.0
    };

    for layer in (0..last).rev() {
        for i in 0..net.width(layer) {
            let node = NodeRef::new(layer, i);
            let mut dpost = vec![0.0f64; b];
            for (dst, state) in net.outgoing(node) {
                let delta_dst = &trace.layers[dst.layer].delta[dst.index];
                for s in 0..b {
                    dpost[s] += state.weight * delta_dst[s];
                }
            }
            if layer == 0 {
                trace.layers[0].delta[i] = dpost;
                continue;
            }

            let ns = net.norm_state(node).expect("hidden node has norm state");
            let lt = &trace.layers[layer];
            let normalized = &lt.normalized[i];
            let mask = lt.dropout_mask.get(i);
            let mut dscaled = vec![0.0f64; b];
            for s in 0..b {
                let through_dropout = match mask {
                    Some(m) => {
                        if m[s] {
                            dpost[s] * keep_scale
                        } else {
                            0.0
                        }
                    }
                    None => dpost[s],
                };
                let scaled = ns.scale * normalized[s] + ns.shift;
                dscaled[s] = if scaled > 0.0 { through_dropout } else { 0.0 };
            }

            let delta = match trace.mode {
                TraceMode::Eval => {
                    let inv_std = 1.0 / (ns.running_var + NORM_EPS).sqrt();
                    dscaled.iter().map(|&d| d * ns.scale * inv_std).collect()
                }
                TraceMode::Train { .. } => {
                    let mean = lt.batch_mean[i];
                    let var = lt.batch_var[i];
                    let pre = &lt.pre_norm[i];
                    let inv_std = 1.0 / (var + NORM_EPS).sqrt();
                    let n = b as f64;
                    let dxhat: Vec<f64> = dscaled.iter().map(|&d| d * ns.scale).collect();
                    let mut sum_dxhat = 0.0;
                    let mut sum_dxhat_xc = 0.0;
                    let mut sum_xc = 0.0;
                    for s in 0..b {
                        let xc = pre[s] - mean;
                        sum_dxhat += dxhat[s];
                        sum_dxhat_xc += dxhat[s] * xc;
                        sum_xc += xc;
                    }
                    let dvar = sum_dxhat_xc * -0.5 * inv_std * inv_std * inv_std;
                    let dmean = sum_dxhat * -inv_std + dvar * -2.0 * sum_xc / n;
                    (0..b)
                        .map(|s| {
                            dxhat[s] * inv_std + dvar * 2.0 * (pre[s] - mean) / n + dmean / n
                        })
                        .collect::<Vec<f64>>()
                }
            };
            trace.layers[layer].delta[i] = delta;
        }
    }
    trace.deltas_ready = true;

    let mut grads = GradMap::new();
    for (src, dst) in net.edge_keys() {
        grads.insert((src, dst), pair_gradient_unchecked(trace, src, dst));
    }
    Ok((grads, loss_value))
}

/// The gradient a zero-weight edge (src, dst) would receive on this
/// batch: mean of `delta(dst) * post_activation(src)`. Exact for a
/// hypothetical edge because a zero weight leaves the forward pass
/// unchanged. Requires deltas.
pub fn pair_gradient(trace: &ActivationTrace, src: NodeRef, dst: NodeRef) -> Result<f64, PropError> {
    if !trace.deltas_ready {
        return Err(PropError::DeltasMissing);
    }
    Ok(pair_gradient_unchecked(trace, src, dst))
}

fn pair_gradient_unchecked(trace: &ActivationTrace, src: NodeRef, dst: NodeRef) -> f64 {
    let delta = &trace.layers[dst.layer].delta[dst.index];
    let post = &trace.layers[src.layer].post_activation[src.index];
    let b = trace.batch_size as f64;
    let mut sum = 0.0;
    for s in 0..trace.batch_size {
        sum += delta[s] * post[s];
    }
    sum / b
}
