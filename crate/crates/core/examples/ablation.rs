//! Held-out accuracy of the full model and each ablation.

use haucl::data::generate_synthetic;
use haucl::{evaluate, train, HauclModel, RunConfig, SyntheticSpec};

fn main() -> haucl::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let data = generate_synthetic(&SyntheticSpec::default())?;
    let (train_set, held_out) = data.split_tail(0.2);
    let base = RunConfig { epochs, lr: 1e-3, ..RunConfig::default() };
    let variants = [
        ("full", base.clone()),
        ("w/o SE", RunConfig { no_speaker_embedding: true, ..base.clone() }),
        ("w/o GCL", RunConfig { no_vhgae_paths: true, ..base.clone() }),
        ("w/o CL", RunConfig { no_contrastive: true, ..base.clone() }),
    ];
    for (name, cfg) in variants {
        let mut model = HauclModel::new(cfg.model_config(&data), cfg.seed)?;
        train(&mut model, &train_set, &cfg.train_config(), |_| {})?;
        println!("{name:<8} {}", evaluate(&model, &held_out)?);
    }
    Ok(())
}
