//! Build the initial sparse topology: every layer connects to every
//! later layer with edge probability decaying exponentially in layer
//! distance, p(gap) = s0 * exp(b * gap). Long skips stay rare, short
//! hops stay common, and the whole draw is reproducible from one seed.
//!
//! Run: cargo run --example sparse_init

use livewire::init::{init_network, InitConfig, WeightScaleRule};
use livewire::NodeRef;

fn main() {
    let widths = [32usize, 32, 32, 32];
    let cfg = InitConfig {
        sparsity_hyperparameter: 0.5,
        branching_factor: -0.7,
        weight_scale_rule: WeightScaleRule::FanInScaled,
        seed: 7,
    };
    let net = init_network(&widths, &cfg).unwrap().network;

    println!("layers {widths:?}, {} edges, overall density {:.4}\n", net.edge_count(), net.density());
    println!("{:>4} {:>12} {:>12} {:>10}", "gap", "configured", "realized", "edges");
    let realized = net.density_by_gap();
    for gap in 1..widths.len() {
        let count = net
            .edge_keys()
            .filter(|(s, d)| d.layer - s.layer == gap)
            .count();
        println!(
            "{:>4} {:>12.4} {:>12.4} {:>10}",
            gap,
            cfg.density(gap),
            realized[gap - 1],
            count
        );
    }

    println!("\nper-node fan-in, layer 1 (first 8 nodes):");
    for i in 0..8 {
        let node = NodeRef::new(1, i);
        println!("  node {node}: in {}, out {}", net.in_degree(node), net.out_degree(node));
    }

    // same seed, same network
    let again = init_network(&widths, &cfg).unwrap().network;
    println!(
        "\nsame seed reproduces the draw byte for byte: {}",
        livewire::checkpoint::to_string(&net) == livewire::checkpoint::to_string(&again)
    );
}
