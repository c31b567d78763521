//! Full livewired training run on the coincidence task: inputs where
//! two distant feature groups fire together exactly when related. The
//! training loop interleaves SGD with rewiring rounds that grow the
//! highest-gradient connections between strongly activated nodes and
//! prune the weakest weights.
//!
//! Run: cargo run --example train_coincidence

use livewire::config::RunConfig;
use livewire::harness::{evaluate, train, TrainOptions};
use livewire::tasks::{gen_coincidence, CoincidenceTask};

fn main() {
    let task = CoincidenceTask {
        n_groups: 4,
        group_width: 3,
        correlated_pairs: vec![(0, 2), (1, 3)],
        noise: 0.8,
        seed: 11,
    };
    let (data, _) = gen_coincidence(&task, 480).unwrap();

    let mut cfg = RunConfig::default();
    cfg.layer_widths = vec![12, 16, 12, 2];
    cfg.batch_size = 16;
    cfg.epochs = 4;
    cfg.eta_new = 0.05;
    cfg.eta_floor = 0.01;
    cfg.rewire_interval = 5;
    cfg.growth_base = 1.0;
    cfg.growth_peak = 3.0;
    cfg.growth_floor = 0.0;
    cfg.growth_warmup_steps = 30;
    cfg.growth_decay_steps = 60;
    cfg.metrics_interval = 10;

    let outcome = train(&cfg, &data, &TrainOptions::default()).unwrap();

    println!(
        "{:>5} {:>5} {:>9} {:>9} {:>6} {:>7} {:>7} {:>9}",
        "step", "epoch", "loss", "acc", "edges", "grown", "pruned", "mean age"
    );
    for r in &outcome.records {
        println!(
            "{:>5} {:>5} {:>9.4} {:>9.4} {:>6} {:>7} {:>7} {:>9.1}",
            r.step,
            r.epoch,
            r.loss,
            r.accuracy.unwrap_or(f64::NAN),
            r.edge_count,
            r.edges_grown,
            r.edges_pruned,
            r.mean_edge_age,
        );
    }

    let total_grown: usize = outcome.rewire_rounds.iter().map(|r| r.grown.len()).sum();
    let total_pruned: usize = outcome.rewire_rounds.iter().map(|r| r.pruned.len()).sum();
    println!(
        "\n{} rewiring rounds: grew {total_grown}, pruned {total_pruned}",
        outcome.rewire_rounds.len()
    );

    let report = evaluate(&outcome.network, &data, cfg.loss).unwrap();
    println!(
        "final: loss {:.4}, accuracy {:.4}, {} edges, density {:.4}",
        report.loss,
        report.accuracy,
        outcome.network.edge_count(),
        outcome.network.density()
    );
}
