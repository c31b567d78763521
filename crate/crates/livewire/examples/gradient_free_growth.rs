//! Compare the two candidate-scoring modes on the same trace.
//!
//! Gradient mode scores a candidate pair by the loss gradient the edge
//! would receive if it existed at weight zero — computable from the
//! deltas already in hand, no extra backward pass. Gradient-free mode
//! skips gradients entirely and multiplies the two activation
//! strengths; because the gradient of a connection is proportional to
//! the parent activation, strong pairs still tend to rank high.
//!
//! Run: cargo run --example gradient_free_growth

use livewire::init::{init_network, InitConfig, WeightScaleRule};
use livewire::propagation::{backward, forward_train, LossKind};
use livewire::rewire::{collect_queue, enumerate_candidates, score_candidates, RewireConfig, Scoring};
use livewire::tasks::{gen_coincidence, CoincidenceTask};

fn main() {
    let task = CoincidenceTask {
        n_groups: 4,
        group_width: 3,
        correlated_pairs: vec![(0, 2), (1, 3)],
        noise: 0.8,
        seed: 5,
    };
    let (data, _) = gen_coincidence(&task, 32).unwrap();
    let batch = data.batch_of(&(0..32).collect::<Vec<_>>(), 2);

    let init = InitConfig {
        sparsity_hyperparameter: 0.4,
        branching_factor: -0.7,
        weight_scale_rule: WeightScaleRule::FanInScaled,
        seed: 40,
    };
    let mut net = init_network(&[12, 14, 10, 2], &init).unwrap().network;

    let (mut trace, _) = forward_train(&mut net, &batch, 0.0, 0).unwrap();
    backward(&net, &mut trace, &batch, LossKind::SoftmaxCrossEntropy).unwrap();

    let gradient_cfg = RewireConfig::default();
    let free_cfg = RewireConfig {
        scoring: Scoring::GradientFree,
        ..RewireConfig::default()
    };

    let queue = collect_queue(&trace, 10);
    println!("activation queue (top {}):", queue.entries.len());
    for e in &queue.entries {
        println!("  {}  strength {:.4}", e.node, e.strength);
    }

    let pairs = enumerate_candidates(&queue, &net, &gradient_cfg);
    let mut by_gradient = score_candidates(&pairs, &trace, &gradient_cfg).unwrap();
    let mut by_strength = score_candidates(&pairs, &trace, &free_cfg).unwrap();
    by_gradient.sort_by(|a, b| b.score.total_cmp(&a.score));
    by_strength.sort_by(|a, b| b.score.total_cmp(&a.score));

    println!("\n{} admissible candidates; top 8 by each scoring mode:", pairs.len());
    println!("{:<18} {:>12}   {:<18} {:>12}", "gradient", "|grad|", "gradient-free", "s(u)*s(v)");
    for i in 0..8.min(by_gradient.len()) {
        let g = &by_gradient[i];
        let f = &by_strength[i];
        println!(
            "{:<18} {:>12.6}   {:<18} {:>12.6}",
            format!("{}->{}", g.src, g.dst),
            g.score,
            format!("{}->{}", f.src, f.dst),
            f.score
        );
    }

    let top_k = 6;
    let grad_top: Vec<_> = by_gradient[..top_k].iter().map(|c| (c.src, c.dst)).collect();
    let overlap = by_strength[..top_k]
        .iter()
        .filter(|c| grad_top.contains(&(c.src, c.dst)))
        .count();
    println!("\noverlap of the two top-{top_k} sets: {overlap}/{top_k}");
}
