//! Information diagnostics over activation events: surprise of an
//! observation, joint-vs-independent coincidence ratios, and mutual
//! information between binary event streams. These quantify whether
//! two nodes' strong activations carry evidence of a relationship.
//!
//! Run: cargo run --example mutual_information

use livewire::infometrics::{coincidence_stats, mutual_information, surprise, EventLog};
use livewire::NodeRef;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    println!("surprise (bits):");
    for p in [1.0, 0.5, 0.25, 0.125, 0.01] {
        println!("  p = {:<6} -> {:.4}", p, surprise(p).unwrap());
    }

    // three streams: b tracks a with 10% flips, c is independent
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let a = NodeRef::new(1, 0);
    let b = NodeRef::new(1, 1);
    let c = NodeRef::new(2, 0);
    let mut log = EventLog::new(vec![a, b, c], 1.0);
    for _ in 0..n {
        let ea = rng.gen_bool(0.3);
        let eb = ea ^ rng.gen_bool(0.1);
        let ec = rng.gen_bool(0.3);
        log.record_events(&[ea, eb, ec]).unwrap();
    }

    println!("\ncoincidence statistics over {n} observations:");
    for (x, y, label) in [(a, b, "coupled"), (a, c, "independent")] {
        let s = coincidence_stats(&log, x, y).unwrap();
        println!(
            "  {x} ~ {y} ({label}): p_a {:.3}, p_b {:.3}, p_joint {:.3}, ratio {:.3}",
            s.p_a, s.p_b, s.p_joint, s.ratio
        );
    }

    println!("\nmutual information:");
    for (x, y, label) in [(a, b, "coupled"), (a, c, "independent")] {
        let mi = mutual_information(&log, x, y).unwrap();
        println!(
            "  {x} ~ {y} ({label}): {:.4} bits over {} observations, joint counts {:?}",
            mi.value_bits, mi.n_obs, mi.cells
        );
    }

    // a ratio above 1 is the growth signal: the pair coincides more
    // than independence predicts
    let coupled = coincidence_stats(&log, a, b).unwrap().ratio;
    println!("\ncoupled pair exceeds independence by {:.2}x", coupled);
}
