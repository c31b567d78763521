//! Shared test oracles, all implemented independently of the engine's
//! code paths: a dense-matrix trainer mirroring the engine's arithmetic
//! order, finite differences, brute-force selection oracles, and an
//! exact binomial tail.

#![allow(dead_code)]

use livewire::propagation::{Batch, LossKind};
use livewire::topology::{EdgeKey, Network, NodeRef, WeightInit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-5;

/// Dense-matrix re-implementation of the whole training step: masked
/// weights, batch normalization, rectifier, per-sample loss seeds, and
/// SGD with momentum. Reduction orders match the engine's documented
/// lexicographic order so trajectories can be compared bit for bit.
pub struct DenseNet {
    pub widths: Vec<usize>,
    /// weight[i][j][u][v] for i < j; None for unmasked entries.
    pub weight: Vec<Vec<Vec<Vec<f64>>>>,
    pub mask: Vec<Vec<Vec<Vec<bool>>>>,
    pub momentum: Vec<Vec<Vec<Vec<f64>>>>,
    pub scale: Vec<Vec<f64>>,
    pub shift: Vec<Vec<f64>>,
    pub running_mean: Vec<Vec<f64>>,
    pub running_var: Vec<Vec<f64>>,
    /// pre-activations of the most recent train forward, for backward
    last_pres: Vec<Vec<Vec<f64>>>,
}

impl DenseNet {
    /// Embed a sparse network into dense masked matrices.
    pub fn from_network(net: &Network) -> Self {
        let widths = net.layer_widths().to_vec();
        let layers = widths.len();
        let zeros = |a: usize, b: usize| vec![vec![0.0; b]; a];
        let falses = |a: usize, b: usize| vec![vec![false; b]; a];
        let mut weight = Vec::new();
        let mut mask = Vec::new();
        let mut momentum = Vec::new();
        for i in 0..layers {
            let mut wrow = Vec::new();
            let mut mrow = Vec::new();
            let mut morow = Vec::new();
            for j in 0..layers {
                if i < j {
                    wrow.push(zeros(widths[i], widths[j]));
                    mrow.push(falses(widths[i], widths[j]));
                    morow.push(zeros(widths[i], widths[j]));
                } else {
                    wrow.push(Vec::new());
                    mrow.push(Vec::new());
                    morow.push(Vec::new());
                }
            }
            weight.push(wrow);
            mask.push(mrow);
            momentum.push(morow);
        }
        for e in net.edges() {
            weight[e.src.layer][e.dst.layer][e.src.index][e.dst.index] = e.weight;
            mask[e.src.layer][e.dst.layer][e.src.index][e.dst.index] = true;
            momentum[e.src.layer][e.dst.layer][e.src.index][e.dst.index] = e.momentum;
        }
        let mut scale = Vec::new();
        let mut shift = Vec::new();
        let mut running_mean = Vec::new();
        let mut running_var = Vec::new();
        for l in 1..layers - 1 {
            let mut sc = Vec::new();
            let mut sh = Vec::new();
            let mut rm = Vec::new();
            let mut rv = Vec::new();
            for idx in 0..widths[l] {
                let ns = net.norm_state(NodeRef::new(l, idx)).unwrap();
                sc.push(ns.scale);
                sh.push(ns.shift);
                rm.push(ns.running_mean);
                rv.push(ns.running_var);
            }
            scale.push(sc);
            shift.push(sh);
            running_mean.push(rm);
            running_var.push(rv);
        }
        Self {
            widths,
            weight,
            mask,
            momentum,
            scale,
            shift,
            running_mean,
            running_var,
            last_pres: Vec::new(),
        }
    }

    /// Train-mode forward with batch statistics; updates running stats.
    /// Returns (post activations per layer [node][sample], outputs
    /// [sample][k], per-node batch mean/var for hidden layers).
    pub fn forward_train(&mut self, inputs: &[Vec<f64>]) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
        let b = inputs.len();
        let layers = self.widths.len();
        let mut post: Vec<Vec<Vec<f64>>> = Vec::with_capacity(layers);
        let mut pres: Vec<Vec<Vec<f64>>> = Vec::with_capacity(layers);
        post.push(
            (0..self.widths[0])
                .map(|u| inputs.iter().map(|row| row[u]).collect())
                .collect(),
        );
        pres.push(Vec::new());
        for j in 1..layers {
            let mut layer_post = Vec::with_capacity(self.widths[j]);
            let mut layer_pre = Vec::with_capacity(self.widths[j]);
            for v in 0..self.widths[j] {
                let mut pre = vec![0.0f64; b];
                for i in 0..j {
                    for u in 0..self.widths[i] {
                        if self.mask[i][j][u][v] {
                            let w = self.weight[i][j][u][v];
                            for s in 0..b {
                                pre[s] += w * post[i][u][s];
                            }
                        }
                    }
                }
                if j == layers - 1 {
                    layer_post.push(pre.clone());
                    layer_pre.push(pre);
                } else {
                    let n = b as f64;
                    let mean = pre.iter().sum::<f64>() / n;
                    let var = pre.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                    let h = j - 1;
                    self.running_mean[h][v] = 0.9 * self.running_mean[h][v] + (1.0 - 0.9) * mean;
                    self.running_var[h][v] = 0.9 * self.running_var[h][v] + (1.0 - 0.9) * var;
                    let inv = 1.0 / (var + EPS).sqrt();
                    let out: Vec<f64> = pre
                        .iter()
                        .map(|&x| {
                            let z = (x - mean) * inv;
                            let scaled = self.scale[h][v] * z + self.shift[h][v];
                            if scaled > 0.0 {
                                scaled
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    layer_post.push(out);
                    layer_pre.push(pre);
                }
            }
            post.push(layer_post);
            pres.push(layer_pre);
        }
        let last = layers - 1;
        let outputs: Vec<Vec<f64>> = (0..b)
            .map(|s| (0..self.widths[last]).map(|k| post[last][k][s]).collect())
            .collect();
        self.last_pres = pres;
        (post, outputs)
    }

    /// One full training step: forward (train), backward, momentum SGD
    /// at a flat rate. Returns the batch loss.
    pub fn sgd_step(
        &mut self,
        batch: &Batch,
        loss: LossKind,
        rate: f64,
        momentum_coeff: f64,
    ) -> f64 {
        let b = batch.inputs.len();
        let layers = self.widths.len();
        let last = layers - 1;
        let (post, outputs) = self.forward_train(&batch.inputs);
        let pres = std::mem::take(&mut self.last_pres);

        let loss_value = batch_loss(&outputs, &batch.targets, loss);
        let seed = per_sample_grad(&outputs, &batch.targets, loss);

        // deltas per layer [node][sample]
        let mut delta: Vec<Vec<Vec<f64>>> = (0..layers)
            .map(|l| vec![vec![0.0; b]; self.widths[l]])
            .collect();
        for k in 0..self.widths[last] {
            for s in 0..b {
                delta[last][k][s] = seed[s][k];
            }
        }
        for l in (0..last).rev() {
            for u in 0..self.widths[l] {
                let mut dpost = vec![0.0f64; b];
                for j in l + 1..layers {
                    for v in 0..self.widths[j] {
                        if self.mask[l][j][u][v] {
                            let w = self.weight[l][j][u][v];
                            for s in 0..b {
                                dpost[s] += w * delta[j][v][s];
                            }
                        }
                    }
                }
                if l == 0 {
                    delta[0][u] = dpost;
                    continue;
                }
                let h = l - 1;
                let pre = &pres[l][u];
                let n = b as f64;
                let mean = pre.iter().sum::<f64>() / n;
                let var = pre.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                let inv_std = 1.0 / (var + EPS).sqrt();
                let mut dscaled = vec![0.0f64; b];
                for s in 0..b {
                    let z = (pre[s] - mean) * inv_std;
                    let scaled = self.scale[h][u] * z + self.shift[h][u];
                    dscaled[s] = if scaled > 0.0 { dpost[s] } else { 0.0 };
                }
                let dxhat: Vec<f64> = dscaled.iter().map(|&d| d * self.scale[h][u]).collect();
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
                for s in 0..b {
                    delta[l][u][s] =
                        dxhat[s] * inv_std + dvar * 2.0 * (pre[s] - mean) / n + dmean / n;
                }
            }
        }

        // momentum update on masked entries, same expressions as the engine
        for i in 0..layers {
            for j in i + 1..layers {
                for u in 0..self.widths[i] {
                    for v in 0..self.widths[j] {
                        if self.mask[i][j][u][v] {
                            let mut g = 0.0;
                            for s in 0..b {
                                g += delta[j][v][s] * post[i][u][s];
                            }
                            g /= b as f64;
                            self.momentum[i][j][u][v] =
                                momentum_coeff * self.momentum[i][j][u][v] + g;
                            let update = 1.0 * rate * self.momentum[i][j][u][v];
                            self.weight[i][j][u][v] -= update;
                        }
                    }
                }
            }
        }
        loss_value
    }

    /// Eval-mode forward using running statistics, outputs only.
    pub fn forward_eval(&self, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let b = inputs.len();
        let layers = self.widths.len();
        let mut post: Vec<Vec<Vec<f64>>> = Vec::with_capacity(layers);
        post.push(
            (0..self.widths[0])
                .map(|u| inputs.iter().map(|row| row[u]).collect())
                .collect(),
        );
        for j in 1..layers {
            let mut layer_post = Vec::with_capacity(self.widths[j]);
            for v in 0..self.widths[j] {
                let mut pre = vec![0.0f64; b];
                for i in 0..j {
                    for u in 0..self.widths[i] {
                        if self.mask[i][j][u][v] {
                            let w = self.weight[i][j][u][v];
                            for s in 0..b {
                                pre[s] += w * post[i][u][s];
                            }
                        }
                    }
                }
                if j == layers - 1 {
                    layer_post.push(pre);
                } else {
                    let h = j - 1;
                    let inv = 1.0 / (self.running_var[h][v] + EPS).sqrt();
                    let out: Vec<f64> = pre
                        .iter()
                        .map(|&x| {
                            let z = (x - self.running_mean[h][v]) * inv;
                            let scaled = self.scale[h][v] * z + self.shift[h][v];
                            if scaled > 0.0 {
                                scaled
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    layer_post.push(out);
                }
            }
            post.push(layer_post);
        }
        let last = layers - 1;
        (0..b)
            .map(|s| (0..self.widths[last]).map(|k| post[last][k][s]).collect())
            .collect()
    }
}

/// Batch loss matching the engine's published formulas.
pub fn batch_loss(outputs: &[Vec<f64>], targets: &[Vec<f64>], loss: LossKind) -> f64 {
    let b = outputs.len();
    let width = outputs[0].len();
    match loss {
        LossKind::MeanSquaredError => {
            let denom = (b * width) as f64;
            let mut total = 0.0;
            for s in 0..b {
                for k in 0..width {
                    let d = outputs[s][k] - targets[s][k];
                    total += d * d;
                }
            }
            total / denom
        }
        LossKind::SoftmaxCrossEntropy => {
            let inv_b = 1.0 / b as f64;
            let mut total = 0.0;
            for s in 0..b {
                let logits = &outputs[s];
                let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let mut z = 0.0;
                for &l in logits {
                    z += (l - max).exp();
                }
                let log_z = z.ln();
                for k in 0..width {
                    if targets[s][k] == 1.0 {
                        total -= logits[k] - max - log_z;
                    }
                }
            }
            total * inv_b
        }
    }
}

fn per_sample_grad(outputs: &[Vec<f64>], targets: &[Vec<f64>], loss: LossKind) -> Vec<Vec<f64>> {
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

/// Random layered net with cross-layer skips and uniform weights.
pub fn random_net(rng: &mut ChaCha8Rng, widths: &[usize], p: f64) -> Network {
    let mut net = Network::new(widths.to_vec()).unwrap();
    let mut pairs = Vec::new();
    for i in 0..widths.len() {
        for j in (i + 1)..widths.len() {
            for a in 0..widths[i] {
                for b in 0..widths[j] {
                    if rng.gen_bool(p) {
                        pairs.push((NodeRef::new(i, a), NodeRef::new(j, b)));
                    }
                }
            }
        }
    }
    net.grow_edges(&pairs, WeightInit::Zero);
    let keys: Vec<EdgeKey> = net.edge_keys().collect();
    for (s, d) in keys {
        net.edge_mut(s, d).unwrap().weight = rng.gen_range(-0.8..0.8);
    }
    net
}

pub fn random_batch(rng: &mut ChaCha8Rng, b: usize, in_w: usize, out_w: usize) -> Batch {
    Batch {
        inputs: (0..b)
            .map(|_| (0..in_w).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect(),
        targets: (0..b)
            .map(|_| (0..out_w).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
    }
}

pub fn one_hot_batch(rng: &mut ChaCha8Rng, b: usize, in_w: usize, out_w: usize) -> Batch {
    Batch {
        inputs: (0..b)
            .map(|_| (0..in_w).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect(),
        targets: (0..b)
            .map(|_| {
                let k = rng.gen_range(0..out_w);
                (0..out_w).map(|j| if j == k { 1.0 } else { 0.0 }).collect()
            })
            .collect(),
    }
}

/// Exact upper tail P(X >= k) for X ~ Binomial(n, p).
pub fn binomial_upper_tail(n: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    // ln C(n, i) via cumulative log factorials
    let mut ln_fact = vec![0.0f64; (n + 1) as usize];
    for i in 1..=n as usize {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    let mut tail = 0.0;
    for i in k..=n {
        let ln_term = ln_fact[n as usize] - ln_fact[i as usize] - ln_fact[(n - i) as usize]
            + i as f64 * ln_p
            + (n - i) as f64 * ln_q;
        tail += ln_term.exp();
    }
    tail.min(1.0)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
