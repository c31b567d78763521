//! Training orchestration: forward, backward, periodic rewiring,
//! optimizer step, metrics emission, checkpointing, evaluation, the
//! few-shot protocol runner, and checkpoint inspection.
//!
//! Everything stochastic is derived from explicit seeds and the step
//! index, so a run resumed from a checkpoint at step t continues
//! bit-identically to the uninterrupted run: batch order is a pure
//! function of (seed_data, epoch), dropout masks of
//! (seed_dropout, step), growth initialization of (seed_growth, step).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{self, CheckpointError};
use crate::config::{ConfigError, RunConfig};
use crate::infometrics::{
    coincidence_stats, mutual_information, EventLog, InfoError, MIN_MI_OBSERVATIONS,
};
use crate::init::{init_network, InitError};
use crate::plasticity::{Optimizer, PlasticityError};
use crate::propagation::{
    backward, forward_eval, forward_train, pair_gradient, per_sample_loss, LossKind, PropError,
};
use crate::rewire::{
    apply_plan, collect_queue_with, plan_rewire, RewireError,
};
use crate::tasks::{Dataset, TaskError};
use crate::topology::{EdgeKey, Network, NodeRef, TopologyError, WeightInit};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Init(#[from] InitError),
    #[error(transparent)]
    Propagation(#[from] PropError),
    #[error(transparent)]
    Rewire(#[from] RewireError),
    #[error(transparent)]
    Plasticity(#[from] PlasticityError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error("non-finite loss at step {step}; last good checkpoint retained")]
    NonFiniteLoss { step: u64 },
    #[error("dataset input width {got} does not match input layer width {expected}")]
    DataWidth { expected: usize, got: usize },
    #[error("label {label} does not fit the output layer width {width}")]
    LabelRange { label: usize, width: usize },
    #[error("dataset yields no usable batches")]
    EmptyData,
    #[error("tracked node {0} is outside the network")]
    BadTrackedNode(NodeRef),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("few-shot config mismatch: {0}")]
    FewshotShape(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Stateless per-step seed derivation; resume-safe by construction.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base.wrapping_add(splitmix64(index.wrapping_add(1))))
}

/// The row visitation order for one epoch.
pub fn epoch_order(len: usize, seed_data: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed_data, epoch));
    order.shuffle(&mut rng);
    order
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QueueStatsRecord {
    pub max: f64,
    pub mean: f64,
    pub min: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MiSnapshot {
    pub a: String,
    pub b: String,
    pub bits: f64,
    pub coincidence_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RewireRecord {
    pub candidates: usize,
    pub grown: Vec<String>,
    pub pruned: Vec<String>,
    pub queue: QueueStatsRecord,
    pub notes: Vec<String>,
}

/// One line of the metrics stream.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub epoch: u64,
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub edge_count: usize,
    pub density_by_gap: Vec<f64>,
    pub edges_grown: usize,
    pub edges_pruned: usize,
    pub mean_edge_age: f64,
    pub rewire: Option<RewireRecord>,
    pub mi: Option<Vec<MiSnapshot>>,
}

/// Programmatic record of one applied rewiring round.
#[derive(Clone, Debug)]
pub struct RewireRound {
    pub step: u64,
    pub grown: Vec<EdgeKey>,
    pub pruned: Vec<EdgeKey>,
    pub candidate_count: usize,
}

#[derive(Debug, Default)]
struct Collector {
    records: Vec<MetricsRecord>,
    rewire_rounds: Vec<RewireRound>,
    events: Option<EventLog>,
    mi_window: Option<EventLog>,
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    pub out_dir: Option<PathBuf>,
    pub resume_from: Option<PathBuf>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub network: Network,
    pub records: Vec<MetricsRecord>,
    pub rewire_rounds: Vec<RewireRound>,
    pub events: Option<EventLog>,
    pub warnings: Vec<String>,
}

fn edge_label(key: &EdgeKey) -> String {
    format!("{}->{}", key.0, key.1)
}

fn batch_accuracy(outputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let mut correct = 0usize;
    for (o, t) in outputs.iter().zip(targets) {
        if argmax(o) == argmax(t) {
            correct += 1;
        }
    }
    correct as f64 / outputs.len() as f64
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_data(net: &Network, data: &Dataset) -> Result<(), HarnessError> {
    if data.input_width() != net.width(0) {
        return Err(HarnessError::DataWidth {
            expected: net.width(0),
            got: data.input_width(),
        });
    }
    let width = net.width(net.num_layers() - 1);
    if let Some(&label) = data.labels.iter().max() {
        if label >= width {
            return Err(HarnessError::LabelRange { label, width });
        }
    }
    Ok(())
}

/// The core loop shared by `train` and the few-shot phases. Schedules
/// (growth, prune ratio, learning-rate scale) and the data order are
/// evaluated at `step - schedule_origin`, so an adaptation phase can
/// restart its cycle while the network's absolute step counter, edge
/// ages, and derived seeds keep running.
fn run_training(
    net: &mut Network,
    cfg: &RunConfig,
    data: &Dataset,
    schedule_origin: u64,
    out_dir: Option<&Path>,
    collector: &mut Collector,
) -> Result<(), HarnessError> {
    check_data(net, data)?;
    let rcfg = cfg.rewire_config().map_err(ConfigError::Schedule)?;
    let mut optimizer = Optimizer::new(cfg.optimizer_config()?)?;
    let tracked = cfg.parsed_track_nodes()?;
    for &node in &tracked {
        if !net.contains_node(node) {
            return Err(HarnessError::BadTrackedNode(node));
        }
    }
    if !tracked.is_empty() {
        if collector.events.is_none() {
            collector.events = Some(EventLog::new(tracked.clone(), cfg.event_threshold));
        }
        if collector.mi_window.is_none() {
            collector.mi_window = Some(EventLog::new(tracked.clone(), cfg.event_threshold));
        }
    }

    let out_width = net.width(net.num_layers() - 1);
    let order_template = epoch_order(data.len(), cfg.seed_data, 0);
    let bpe = order_template
        .chunks(cfg.batch_size)
        .filter(|c| c.len() >= 2)
        .count() as u64;
    if bpe == 0 {
        return Err(HarnessError::EmptyData);
    }
    let mut target = schedule_origin + cfg.epochs as u64 * bpe;
    if cfg.max_steps > 0 {
        target = target.min(cfg.max_steps);
    }

    let mut cached_epoch: Option<(u64, Vec<usize>)> = None;
    let mut ema_loss: Option<f64> = None;

    while net.step_count() < target {
        let step = net.step_count();
        let sched_step = step - schedule_origin;
        let epoch = sched_step / bpe;
        let batch_idx = (sched_step % bpe) as usize;

        if cached_epoch.as_ref().map(|(e, _)| *e) != Some(epoch) {
            cached_epoch = Some((epoch, epoch_order(data.len(), cfg.seed_data, epoch)));
        }
        let order = &cached_epoch.as_ref().unwrap().1;
        let rows: Vec<usize> = order
            .chunks(cfg.batch_size)
            .filter(|c| c.len() >= 2)
            .nth(batch_idx)
            .expect("batch index within bpe")
            .to_vec();
        let batch = data.batch_of(&rows, out_width);

        let (mut trace, outputs) = forward_train(
            net,
            &batch,
            cfg.dropout_rate,
            derive_seed(cfg.seed_dropout, step),
        )?;
        let (mut grads, loss) = backward(net, &mut trace, &batch, cfg.loss)?;
        if !loss.is_finite() {
            return Err(HarnessError::NonFiniteLoss { step });
        }
        let accuracy = match cfg.loss {
            LossKind::SoftmaxCrossEntropy => Some(batch_accuracy(&outputs, &batch.targets)),
            LossKind::MeanSquaredError => None,
        };
        ema_loss = Some(match ema_loss {
            None => loss,
            Some(prev) => 0.9 * prev + 0.1 * loss,
        });

        let trigger = if cfg.adaptive_rewire {
            ema_loss.unwrap() > cfg.adaptive_loss_threshold
        } else {
            sched_step % cfg.rewire_interval == 0
        };

        let mut rewire_record = None;
        let mut grown_count = 0usize;
        let mut pruned_count = 0usize;
        if trigger {
            let plan = plan_rewire(net, &trace, &rcfg, sched_step)?;
            // newly grown edges take their first update from this same
            // batch: their gradients are exactly the candidate scores'
            // signed values, read off the existing trace
            for &(src, dst) in &plan.to_grow {
                grads.insert((src, dst), pair_gradient(&trace, src, dst)?);
            }
            let queue = collect_queue_with(&trace, rcfg.queue_capacity, &rcfg);
            let queue_stats = if queue.entries.is_empty() {
                QueueStatsRecord {
                    max: 0.0,
                    mean: 0.0,
                    min: 0.0,
                }
            } else {
                let strengths: Vec<f64> = queue.entries.iter().map(|e| e.strength).collect();
                QueueStatsRecord {
                    max: strengths[0],
                    mean: strengths.iter().sum::<f64>() / strengths.len() as f64,
                    min: *strengths.last().unwrap(),
                }
            };
            let report = apply_plan(net, &plan, &rcfg, derive_seed(cfg.seed_growth, step))?;
            grown_count = report.grown.len();
            pruned_count = report.pruned.len();
            collector.rewire_rounds.push(RewireRound {
                step,
                grown: report.grown.clone(),
                pruned: report.pruned.clone(),
                candidate_count: plan.candidates.len(),
            });
            rewire_record = Some(RewireRecord {
                candidates: plan.candidates.len(),
                grown: report.grown.iter().map(edge_label).collect(),
                pruned: report.pruned.iter().map(edge_label).collect(),
                queue: queue_stats,
                notes: plan.notes.clone(),
            });
        }

        optimizer.step(net, &grads, sched_step)?;

        if !tracked.is_empty() {
            for s in 0..batch.len() {
                let values: Vec<f64> = tracked
                    .iter()
                    .map(|&node| trace.normalized(node)[s])
                    .collect();
                if let Some(log) = collector.events.as_mut() {
                    log.record_values(&values)?;
                }
                if let Some(window) = collector.mi_window.as_mut() {
                    window.record_values(&values)?;
                }
            }
        }

        if step % cfg.metrics_interval == 0 {
            let mi = if cfg.mi_interval > 0 && step % cfg.mi_interval == 0 {
                self::mi_snapshots(collector.mi_window.as_ref())
            } else {
                None
            };
            if mi.is_some() {
                if let Some(window) = collector.mi_window.as_mut() {
                    *window = EventLog::new(tracked.clone(), cfg.event_threshold);
                }
            }
            let record = MetricsRecord {
                step,
                epoch,
                loss,
                accuracy,
                edge_count: net.edge_count(),
                density_by_gap: net.density_by_gap(),
                edges_grown: grown_count,
                edges_pruned: pruned_count,
                mean_edge_age: net.mean_edge_age(),
                rewire: rewire_record,
                mi,
            };
            collector.records.push(record);
        }

        if batch_idx as u64 == bpe - 1 {
            if let Some(dir) = out_dir {
                let path = dir.join(format!("epoch_{epoch:04}.json"));
                checkpoint::save(net, &path)?;
            }
        }
    }
    Ok(())
}

fn mi_snapshots(window: Option<&EventLog>) -> Option<Vec<MiSnapshot>> {
    let log = window?;
    if log.n_obs() < MIN_MI_OBSERVATIONS || log.nodes().len() < 2 {
        return None;
    }
    let nodes = log.nodes().to_vec();
    let mut out = Vec::new();
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let mi = mutual_information(log, nodes[i], nodes[j]).ok()?;
            let stats = coincidence_stats(log, nodes[i], nodes[j]).ok()?;
            out.push(MiSnapshot {
                a: nodes[i].to_string(),
                b: nodes[j].to_string(),
                bits: mi.value_bits,
                coincidence_ratio: stats.ratio,
            });
        }
    }
    Some(out)
}

/// Serialize metrics as one JSON object per line.
pub fn metrics_to_string(records: &[MetricsRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("metrics serialize"));
        out.push('\n');
    }
    out
}

/// Full training entry point. Builds (or resumes) the network, runs
/// the loop, and writes `metrics.jsonl`, per-epoch checkpoints,
/// `checkpoint.json`, and `events.json` under `out_dir` when given.
pub fn train(
    cfg: &RunConfig,
    data: &Dataset,
    opts: &TrainOptions,
) -> Result<TrainOutcome, HarnessError> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let mut net = match &opts.resume_from {
        Some(path) => checkpoint::load(path)?,
        None => {
            let outcome = init_network(&cfg.layer_widths, &cfg.init_config())?;
            if let Some(w) = outcome.warning {
                warnings.push(w);
            }
            outcome.network
        }
    };

    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }

    let mut collector = Collector::default();
    run_training(
        &mut net,
        cfg,
        data,
        0,
        opts.out_dir.as_deref(),
        &mut collector,
    )?;

    if let Some(dir) = &opts.out_dir {
        let metrics_path = dir.join("metrics.jsonl");
        let mut f = fs::File::create(&metrics_path).map_err(io_err(&metrics_path))?;
        f.write_all(metrics_to_string(&collector.records).as_bytes())
            .map_err(io_err(&metrics_path))?;
        checkpoint::save(&net, &dir.join("checkpoint.json"))?;
        if let Some(events) = &collector.events {
            let events_path = dir.join("events.json");
            let body = serde_json::to_string_pretty(events).expect("events serialize");
            fs::write(&events_path, body).map_err(io_err(&events_path))?;
        }
    }

    Ok(TrainOutcome {
        network: net,
        records: collector.records,
        rewire_rounds: collector.rewire_rounds,
        events: collector.events,
        warnings,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub loss: f64,
    pub accuracy: f64,
    pub n: usize,
}

/// Eval-mode pass over a dataset: running statistics, no dropout,
/// per-sample aggregation so the result is invariant to batching.
pub fn evaluate(net: &Network, data: &Dataset, loss: LossKind) -> Result<EvalReport, HarnessError> {
    check_data(net, data)?;
    if data.is_empty() {
        return Err(HarnessError::EmptyData);
    }
    let out_width = net.width(net.num_layers() - 1);
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let rows: Vec<usize> = (0..data.len()).collect();
    for chunk in rows.chunks(256) {
        let batch = data.batch_of(chunk, out_width);
        let (_, outputs) = forward_eval(net, &batch)?;
        for (s, &row) in chunk.iter().enumerate() {
            loss_sum += per_sample_loss(&outputs[s], &batch.targets[s], loss);
            if argmax(&outputs[s]) == data.labels[row] {
                correct += 1;
            }
        }
    }
    Ok(EvalReport {
        loss: loss_sum / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
        n: data.len(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArmReport {
    pub base_acc_before: f64,
    pub base_acc_after: f64,
    pub base_drop: f64,
    pub novel_acc: f64,
    pub edges_grown: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FewshotReport {
    pub livewired: ArmReport,
    pub control: ArmReport,
    /// Livewired base-accuracy drop no worse than the control's.
    pub drop_not_worse: bool,
    /// Livewired novel accuracy over the control's (1.0 = parity).
    pub novel_ratio: f64,
}

/// Two-phase few-shot protocol with a paired control arm.
///
/// Phase 1 trains on the base classes. Phase 2 extends the output
/// layer with the novel classes and adapts on the support shots only:
/// the livewired arm starts the new outputs fully disconnected and
/// must grow their connectivity (queue opened to output nodes, fresh
/// growth cycle, credibility rates); the control arm gets a dense
/// zero-initialized output extension, a fixed topology, and one global
/// learning rate. Both arms share phase-1 weights, seeds, and the
/// update budget.
pub fn run_fewshot(
    cfg: &RunConfig,
    protocol: &crate::tasks::FewShotProtocol,
    out_dir: Option<&Path>,
) -> Result<FewshotReport, HarnessError> {
    cfg.validate()?;
    protocol.validate()?;
    let widths = &cfg.layer_widths;
    if widths[0] != protocol.input_dim {
        return Err(HarnessError::FewshotShape(format!(
            "layer_widths[0] = {} but protocol input_dim = {}",
            widths[0], protocol.input_dim
        )));
    }
    if *widths.last().unwrap() != protocol.base_classes {
        return Err(HarnessError::FewshotShape(format!(
            "output width {} must equal base_classes {}",
            widths.last().unwrap(),
            protocol.base_classes
        )));
    }

    let data = crate::tasks::gen_fewshot(protocol)?;

    // phase 1: base training
    let mut net = init_network(&cfg.layer_widths, &cfg.init_config())?.network;
    let mut collector = Collector::default();
    run_training(&mut net, cfg, &data.base_train, 0, None, &mut collector)?;
    let base_before = evaluate(&net, &data.base_test, cfg.loss)?.accuracy;
    let phase2_start = net.step_count();
    let budget = cfg.fewshot_phase2_steps;

    let phase2_cfg = |growth: f64, livewired: bool| -> RunConfig {
        let mut c = cfg.clone();
        c.include_output_nodes = livewired;
        c.growth_base = growth;
        c.growth_peak = growth;
        c.growth_floor = growth;
        c.max_steps = phase2_start + budget;
        c.epochs = (budget as usize).max(1);
        c.batch_size = cfg.batch_size.min(data.novel_support.len()).max(2);
        if !livewired {
            // single global learning rate, no credibility decay
            c.eta_floor = c.eta_new;
        }
        c
    };

    // livewired arm: disconnected novel outputs, growth must wire them
    let mut live_net = net.clone();
    live_net.extend_output_layer(protocol.novel_classes);
    let live_cfg = phase2_cfg(cfg.fewshot_phase2_growth, true);
    let mut live_collector = Collector::default();
    if budget > 0 {
        run_training(
            &mut live_net,
            &live_cfg,
            &data.novel_support,
            phase2_start,
            None,
            &mut live_collector,
        )?;
    }
    let live_grown: usize = live_collector.rewire_rounds.iter().map(|r| r.grown.len()).sum();
    let live_after = evaluate(&live_net, &data.base_test, cfg.loss)?.accuracy;
    let live_novel = evaluate(&live_net, &data.novel_query, cfg.loss)?.accuracy;

    // control arm: dense zero-init output extension, fixed topology
    let mut ctrl_net = net.clone();
    ctrl_net.extend_output_layer(protocol.novel_classes);
    let last = ctrl_net.num_layers() - 1;
    let hidden = last - 1;
    let mut dense_pairs = Vec::new();
    for i in 0..ctrl_net.width(hidden) {
        for k in 0..protocol.novel_classes {
            dense_pairs.push((
                NodeRef::new(hidden, i),
                NodeRef::new(last, protocol.base_classes + k),
            ));
        }
    }
    ctrl_net.grow_edges(&dense_pairs, WeightInit::Zero);
    let ctrl_cfg = phase2_cfg(0.0, false);
    let mut ctrl_collector = Collector::default();
    if budget > 0 {
        run_training(
            &mut ctrl_net,
            &ctrl_cfg,
            &data.novel_support,
            phase2_start,
            None,
            &mut ctrl_collector,
        )?;
    }
    let ctrl_after = evaluate(&ctrl_net, &data.base_test, cfg.loss)?.accuracy;
    let ctrl_novel = evaluate(&ctrl_net, &data.novel_query, cfg.loss)?.accuracy;

    let report = FewshotReport {
        livewired: ArmReport {
            base_acc_before: base_before,
            base_acc_after: live_after,
            base_drop: base_before - live_after,
            novel_acc: live_novel,
            edges_grown: live_grown,
        },
        control: ArmReport {
            base_acc_before: base_before,
            base_acc_after: ctrl_after,
            base_drop: base_before - ctrl_after,
            novel_acc: ctrl_novel,
            edges_grown: dense_pairs.len(),
        },
        drop_not_worse: (base_before - live_after) <= (base_before - ctrl_after),
        novel_ratio: if ctrl_novel > 0.0 {
            live_novel / ctrl_novel
        } else if live_novel > 0.0 {
            f64::INFINITY
        } else {
            1.0
        },
    };

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join("fewshot_report.json");
        let body = serde_json::to_string_pretty(&report).expect("report serialize");
        fs::write(&path, body).map_err(io_err(&path))?;
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeLine {
    pub src: String,
    pub dst: String,
    pub weight: f64,
    pub age: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeReport {
    pub node: String,
    pub incoming: Vec<EdgeLine>,
    pub outgoing: Vec<EdgeLine>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InspectReport {
    pub layer_widths: Vec<usize>,
    pub step_count: u64,
    pub edge_count: usize,
    pub density: f64,
    pub density_by_gap: Vec<f64>,
    pub mean_in_degree_by_layer: Vec<f64>,
    pub mean_out_degree_by_layer: Vec<f64>,
    /// (age, count) pairs, ascending age.
    pub age_histogram: Vec<(u64, usize)>,
    pub nodes: Vec<NodeReport>,
    pub mi: Option<Vec<MiSnapshot>>,
}

/// Topology statistics, per-node incident edges, and MI snapshots if
/// an event log is supplied.
pub fn inspect(
    checkpoint_path: &Path,
    nodes: &[NodeRef],
    events_path: Option<&Path>,
) -> Result<InspectReport, HarnessError> {
    let net = checkpoint::load(checkpoint_path)?;
    let layers = net.num_layers();

    let mut age_counts: BTreeMap<u64, usize> = BTreeMap::new();
    for e in net.edges() {
        *age_counts.entry(e.age).or_insert(0) += 1;
    }

    let mut mean_in = Vec::with_capacity(layers);
    let mut mean_out = Vec::with_capacity(layers);
    for l in 0..layers {
        let w = net.width(l) as f64;
        let in_sum: usize = (0..net.width(l))
            .map(|i| net.in_degree(NodeRef::new(l, i)))
            .sum();
        let out_sum: usize = (0..net.width(l))
            .map(|i| net.out_degree(NodeRef::new(l, i)))
            .sum();
        mean_in.push(in_sum as f64 / w);
        mean_out.push(out_sum as f64 / w);
    }

    let node_reports = nodes
        .iter()
        .map(|&node| NodeReport {
            node: node.to_string(),
            incoming: net
                .incoming(node)
                .map(|(src, st)| EdgeLine {
                    src: src.to_string(),
                    dst: node.to_string(),
                    weight: st.weight,
                    age: st.age,
                })
                .collect(),
            outgoing: net
                .outgoing(node)
                .map(|(dst, st)| EdgeLine {
                    src: node.to_string(),
                    dst: dst.to_string(),
                    weight: st.weight,
                    age: st.age,
                })
                .collect(),
        })
        .collect();

    let mi = match events_path {
        Some(path) => {
            let body = fs::read_to_string(path).map_err(io_err(path))?;
            let mut log: EventLog =
                serde_json::from_str(&body).map_err(|e| HarnessError::Io {
                    path: path.display().to_string(),
                    source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
                })?;
            log.reindex();
            mi_snapshots(Some(&log))
        }
        None => None,
    };

    Ok(InspectReport {
        layer_widths: net.layer_widths().to_vec(),
        step_count: net.step_count(),
        edge_count: net.edge_count(),
        density: net.density(),
        density_by_gap: net.density_by_gap(),
        mean_in_degree_by_layer: mean_in,
        mean_out_degree_by_layer: mean_out,
        age_histogram: age_counts.into_iter().collect(),
        nodes: node_reports,
        mi,
    })
}

impl InspectReport {
    /// Plain-text rendering for the CLI.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "layers: {:?}  steps: {}  edges: {}  density: {:.4}\n",
            self.layer_widths, self.step_count, self.edge_count, self.density
        ));
        s.push_str("density by layer gap:");
        for (i, d) in self.density_by_gap.iter().enumerate() {
            s.push_str(&format!("  gap {}: {:.4}", i + 1, d));
        }
        s.push('\n');
        s.push_str(&format!(
            "mean in-degree by layer: {:?}\n",
            self.mean_in_degree_by_layer
                .iter()
                .map(|v| (v * 100.0).round() / 100.0)
                .collect::<Vec<_>>()
        ));
        s.push_str("age histogram:");
        for (age, count) in &self.age_histogram {
            s.push_str(&format!("  {age}: {count}"));
        }
        s.push('\n');
        for nr in &self.nodes {
            s.push_str(&format!(
                "node {} ({} in, {} out)\n",
                nr.node,
                nr.incoming.len(),
                nr.outgoing.len()
            ));
            for e in &nr.incoming {
                s.push_str(&format!(
                    "  in  {} -> {}  w={:+.6}  age={}\n",
                    e.src, e.dst, e.weight, e.age
                ));
            }
            for e in &nr.outgoing {
                s.push_str(&format!(
                    "  out {} -> {}  w={:+.6}  age={}\n",
                    e.src, e.dst, e.weight, e.age
                ));
            }
        }
        if let Some(mi) = &self.mi {
            for snap in mi {
                s.push_str(&format!(
                    "mi {} ~ {}: {:.4} bits  coincidence ratio {:.3}\n",
                    snap.a, snap.b, snap.bits, snap.coincidence_ratio
                ));
            }
        }
        s
    }
}

/// Receptive mixtures: how much of each input group feeds each node,
/// following |weight| shares recursively from the input layer. Input
/// nodes are one-hot in their own group; a node with no incoming edges
/// has an all-zero mixture.
pub fn receptive_vectors(
    net: &Network,
    n_groups: usize,
    group_of: impl Fn(usize) -> usize,
) -> Vec<Vec<Vec<f64>>> {
    let layers = net.num_layers();
    let mut vecs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(layers);
    for layer in 0..layers {
        let width = net.width(layer);
        let mut layer_vecs = Vec::with_capacity(width);
        for i in 0..width {
            if layer == 0 {
                let mut v = vec![0.0; n_groups];
                v[group_of(i)] = 1.0;
                layer_vecs.push(v);
                continue;
            }
            let node = NodeRef::new(layer, i);
            let mut v = vec![0.0; n_groups];
            let mut total = 0.0;
            for (src, state) in net.incoming(node) {
                let w = state.weight.abs();
                total += w;
                for (g, share) in vecs[src.layer][src.index].iter().enumerate() {
                    v[g] += w * share;
                }
            }
            if total > 0.0 {
                for x in v.iter_mut() {
                    *x /= total;
                }
            }
            layer_vecs.push(v);
        }
        vecs.push(layer_vecs);
    }
    vecs
}

/// The dominant input group of a node, by receptive share. Zero-degree
/// nodes have no dominant group.
pub fn receptive_group(vectors: &[Vec<Vec<f64>>], node: NodeRef) -> Option<usize> {
    let v = &vectors[node.layer][node.index];
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut best = 0;
    for (g, &share) in v.iter().enumerate() {
        if share > v[best] {
            best = g;
        }
    }
    Some(best)
}
