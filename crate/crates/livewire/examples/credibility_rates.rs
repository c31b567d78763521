//! Per-edge learning rates under the credibility schedule: a freshly
//! grown edge starts at eta_new and decays toward eta_floor as it ages,
//! halving its decaying component every `halflife` steps. Old edges
//! barely move, which is what protects prior learning during few-shot
//! adaptation.
//!
//! Run: cargo run --example credibility_rates

use livewire::plasticity::{effective_rate, CredibilitySchedule, DecayKind};
use livewire::schedule::CyclicSchedule;

fn main() {
    let hyperbolic = CredibilitySchedule {
        eta_new: 0.1,
        eta_floor: 0.002,
        halflife: 50.0,
        decay: DecayKind::Hyperbolic,
        global_scale: CyclicSchedule::constant(1.0),
    };
    let exponential = CredibilitySchedule {
        decay: DecayKind::Exponential,
        ..hyperbolic.clone()
    };

    println!("{:>6} {:>12} {:>12}", "age", "hyperbolic", "exponential");
    for age in [0u64, 10, 25, 50, 100, 200, 400, 1000, 5000] {
        println!(
            "{:>6} {:>12.5} {:>12.5}",
            age,
            hyperbolic.eta(age),
            exponential.eta(age)
        );
    }

    // the network-wide cyclic multiplier stacks on top of the age decay
    let cyclic = CredibilitySchedule {
        global_scale: CyclicSchedule::new(0.5, 1.5, 0.2, 100, 300).unwrap(),
        ..hyperbolic
    };
    println!("\nwith a cyclic global multiplier (warmup 100, decay 300):");
    println!("{:>6} {:>10} {:>14} {:>14}", "step", "scale", "rate age 0", "rate age 200");
    for step in [0u64, 50, 100, 200, 400, 600] {
        println!(
            "{:>6} {:>10.3} {:>14.5} {:>14.5}",
            step,
            cyclic.global_scale.at(step),
            effective_rate(0, step, &cyclic),
            effective_rate(200, step, &cyclic)
        );
    }
}
