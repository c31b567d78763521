//! Few-shot adaptation with the paired control arm.
//!
//! Phase 1 trains on four base classes. Phase 2 appends two novel
//! output nodes that start fully disconnected and adapts on ten shots
//! per novel class: the livewired arm must grow the new connectivity
//! and updates old edges at credibility-decayed rates, while the
//! control arm gets a dense output extension and one global learning
//! rate. Less base-accuracy loss at comparable novel accuracy is the
//! point of the per-edge rates.
//!
//! Run: cargo run --example fewshot_adaptation

use livewire::config::RunConfig;
use livewire::harness::run_fewshot;
use livewire::tasks::FewShotProtocol;

fn main() {
    let mut cfg = RunConfig::default();
    cfg.layer_widths = vec![8, 16, 12, 4];
    cfg.sparsity_hyperparameter = 0.7;
    cfg.batch_size = 16;
    cfg.epochs = 12;
    cfg.eta_new = 0.06;
    cfg.eta_floor = 0.001;
    cfg.credibility_halflife = 15.0;
    cfg.momentum_coeff = 0.5;
    cfg.queue_capacity = 64;
    cfg.growth_base = 1.0;
    cfg.growth_peak = 2.0;
    cfg.growth_floor = 1.0;
    cfg.prune_ratio_base = 0.0;
    cfg.prune_ratio_peak = 0.0;
    cfg.prune_ratio_floor = 0.0;
    cfg.fewshot_phase2_steps = 25;
    cfg.fewshot_phase2_growth = 3.0;

    println!(
        "{:>4} {:>8} {:>16} {:>16} {:>12} {:>8}",
        "seed", "base", "live after/novel", "ctrl after/novel", "drop l/c", "grown"
    );
    let mut live_drops = 0.0;
    let mut ctrl_drops = 0.0;
    for seed in 1..=5u64 {
        let protocol = FewShotProtocol {
            base_classes: 4,
            novel_classes: 2,
            shots: 10,
            base_train: 400,
            base_test: 200,
            novel_support: 20,
            novel_query: 100,
            seed,
            input_dim: 8,
            cluster_std: 0.5,
            center_separation: 3.0,
        };
        let r = run_fewshot(&cfg, &protocol, None).unwrap();
        println!(
            "{:>4} {:>8.3} {:>8.3} / {:>5.3} {:>8.3} / {:>5.3} {:>5.2}/{:>5.2} {:>8}",
            seed,
            r.livewired.base_acc_before,
            r.livewired.base_acc_after,
            r.livewired.novel_acc,
            r.control.base_acc_after,
            r.control.novel_acc,
            r.livewired.base_drop,
            r.control.base_drop,
            r.livewired.edges_grown
        );
        live_drops += r.livewired.base_drop;
        ctrl_drops += r.control.base_drop;
    }
    println!(
        "\nmean base-accuracy drop: livewired {:.3} vs control {:.3}",
        live_drops / 5.0,
        ctrl_drops / 5.0
    );
}
