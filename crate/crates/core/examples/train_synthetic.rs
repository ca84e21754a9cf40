//! Trains on the default synthetic set and evaluates on a held-out tail.
//!
//! `cargo run --release --example train_synthetic -- [epochs]`

use haucl::data::generate_synthetic;
use haucl::{evaluate, train, HauclModel, RunConfig, SyntheticSpec};

fn main() -> haucl::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(30);
    let data = generate_synthetic(&SyntheticSpec::default())?;
    let (train_set, held_out) = data.split_tail(0.2);
    let cfg = RunConfig { epochs, lr: 1e-3, ..RunConfig::default() };
    let mut model = HauclModel::new(cfg.model_config(&data), cfg.seed)?;
    train(&mut model, &train_set, &cfg.train_config(), |log| {
        if log.epoch % 5 == 0 || log.epoch == epochs {
            println!("{log}");
        }
    })?;
    println!("held-out {}", evaluate(&model, &held_out)?);
    Ok(())
}
