//! Train from a CSV file: numeric feature columns plus a final `label`
//! column. The loader fits per-column standardization and the label
//! vocabulary on the training split and reapplies both to held-out
//! data, rejecting unknown labels.
//!
//! Run: cargo run --example csv_training

use livewire::config::RunConfig;
use livewire::harness::{evaluate, train, TrainOptions};
use livewire::tasks::{load_csv_str, CsvSchema};

fn main() {
    // two noisy interleaved spirals, rendered as CSV text
    let mut train_csv = String::from("x,y,label\n");
    let mut eval_csv = String::from("x,y,label\n");
    let mut state = 12345u64;
    let mut uniform = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for i in 0..360 {
        let t = 0.35 + 2.7 * uniform();
        let class = i % 2;
        let sign = if class == 0 { 1.0 } else { -1.0 };
        let x = sign * t * t.cos() + 0.15 * (uniform() - 0.5);
        let y = sign * t * t.sin() + 0.15 * (uniform() - 0.5);
        let row = format!("{x:.6},{y:.6},spiral_{class}\n");
        if i < 300 {
            train_csv.push_str(&row);
        } else {
            eval_csv.push_str(&row);
        }
    }

    let (train_data, schema) = load_csv_str(&train_csv, "train.csv", &CsvSchema::default()).unwrap();
    let (eval_data, _) = load_csv_str(&eval_csv, "eval.csv", &schema).unwrap();
    println!(
        "train {} rows, eval {} rows, {} features, {} classes",
        train_data.len(),
        eval_data.len(),
        train_data.input_width(),
        train_data.n_classes
    );

    let mut cfg = RunConfig::default();
    cfg.layer_widths = vec![2, 24, 16, 2];
    cfg.sparsity_hyperparameter = 0.8;
    cfg.batch_size = 20;
    cfg.epochs = 120;
    cfg.eta_new = 0.08;
    cfg.eta_floor = 0.02;
    cfg.growth_base = 1.0;
    cfg.growth_peak = 2.0;
    cfg.growth_floor = 0.0;
    cfg.growth_warmup_steps = 300;
    cfg.growth_decay_steps = 900;
    cfg.metrics_interval = 300;

    let outcome = train(&cfg, &train_data, &TrainOptions::default()).unwrap();
    for r in &outcome.records {
        println!(
            "step {:>5}  loss {:.4}  batch acc {:.3}  edges {}",
            r.step,
            r.loss,
            r.accuracy.unwrap_or(f64::NAN),
            r.edge_count
        );
    }

    let train_report = evaluate(&outcome.network, &train_data, cfg.loss).unwrap();
    let eval_report = evaluate(&outcome.network, &eval_data, cfg.loss).unwrap();
    println!(
        "\ntrain accuracy {:.3}, held-out accuracy {:.3} ({} edges)",
        train_report.accuracy,
        eval_report.accuracy,
        outcome.network.edge_count()
    );
}
