//! Trains the classifier on simulated scenarios and reports held-out accuracy.
//!
//! cargo run --release -p drowsy-core --example train_synthetic -- [n_scenarios] [epochs]
//!
//! Environment overrides for parameter sweeps: STRIDE, SCEN_MS, LR, DYAWN
//! (drowsy yawns/min), AYAWN (alert yawns/min), LONGP (long-closure probability).

use std::time::Instant;

use drowsy_core::lstm::{train, TrainConfig};
use drowsy_core::simulator::{generate_training_set, RegimeParams, TrainingSetConfig};

fn main() -> drowsy_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(200, |a| a.parse().expect("n_scenarios"));
    let epochs: usize = args.next().map_or(100, |a| a.parse().expect("epochs"));

    let start = Instant::now();
    let data = generate_training_set(
        &TrainingSetConfig {
            n_scenarios: n,
            window_stride: env("STRIDE", 10),
            scenario_ms: env("SCEN_MS", 30_000),
            ..Default::default()
        },
        &params(1),
    )?;
    let test = generate_training_set(
        &TrainingSetConfig {
            n_scenarios: 60,
            window_stride: 1,
            scenario_ms: env("SCEN_MS", 30_000),
            ..Default::default()
        },
        &params(2),
    )?;
    println!(
        "train windows {} (drowsy {:.3}), test windows {}  [{:.1?}]",
        data.sequences.len(),
        data.drowsy_fraction,
        test.sequences.len(),
        start.elapsed()
    );

    let out = train(
        &data.sequences,
        &TrainConfig {
            epochs,
            seed: 3,
            learning_rate: env("LR", 0.05),
            ..Default::default()
        },
    )?;
    for e in out
        .trace
        .iter()
        .filter(|e| e.epoch % 10 == 0 || e.epoch == 1)
    {
        println!(
            "epoch {:3}  train {:.4}  val {:.4}  val_acc {:.4}  |g| {:.3}",
            e.epoch, e.train_loss, e.val_loss, e.val_accuracy, e.grad_norm
        );
    }
    let correct = test
        .sequences
        .iter()
        .filter(|s| (out.model.forward(&s.inputs).unwrap() >= 0.5) == s.drowsy)
        .count();
    println!(
        "best epoch {}  held-out accuracy {:.4}  total {:.1?}",
        out.best_epoch,
        correct as f64 / test.sequences.len() as f64,
        start.elapsed()
    );
    Ok(())
}

fn env<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn params(seed: u64) -> RegimeParams {
    let d = RegimeParams::default();
    RegimeParams {
        seed,
        drowsy_yawns_per_min: env("DYAWN", d.drowsy_yawns_per_min),
        alert_yawns_per_min: env("AYAWN", d.alert_yawns_per_min),
        drowsy_long_closure_prob: env("LONGP", d.drowsy_long_closure_prob),
        ..d
    }
}
