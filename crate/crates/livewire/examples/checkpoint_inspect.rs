//! Checkpoint round trip and topology inspection: train briefly, save
//! the lossless text checkpoint, reload it, verify the forward pass is
//! unchanged bit for bit, and print the inspection report.
//!
//! Run: cargo run --example checkpoint_inspect

use livewire::config::RunConfig;
use livewire::harness::{inspect, train, TrainOptions};
use livewire::propagation::forward_eval;
use livewire::tasks::{gen_coincidence, CoincidenceTask};
use livewire::{checkpoint, NodeRef};

fn main() {
    let task = CoincidenceTask {
        n_groups: 4,
        group_width: 3,
        correlated_pairs: vec![(0, 2), (1, 3)],
        noise: 0.7,
        seed: 23,
    };
    let (data, _) = gen_coincidence(&task, 320).unwrap();

    let mut cfg = RunConfig::default();
    cfg.layer_widths = vec![12, 14, 10, 2];
    cfg.batch_size = 16;
    cfg.epochs = 3;

    let dir = std::env::temp_dir().join("livewire_checkpoint_example");
    std::fs::create_dir_all(&dir).unwrap();
    let outcome = train(
        &cfg,
        &data,
        &TrainOptions {
            out_dir: Some(dir.clone()),
            resume_from: None,
        },
    )
    .unwrap();
    let path = dir.join("checkpoint.json");
    println!("trained {} steps, checkpoint at {}", outcome.network.step_count(), path.display());

    // reload and compare a forward pass bit for bit
    let restored = checkpoint::load(&path).unwrap();
    let batch = data.batch_of(&[0, 1, 2, 3], 2);
    let (_, a) = forward_eval(&outcome.network, &batch).unwrap();
    let (_, b) = forward_eval(&restored, &batch).unwrap();
    let identical = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    println!("reloaded forward pass bit-identical: {identical}\n");

    let report = inspect(&path, &[NodeRef::new(1, 0), NodeRef::new(2, 3)], None).unwrap();
    print!("{}", report.render());
}
