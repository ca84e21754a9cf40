//! Saves a trained model, reloads it into a fresh one and compares outputs.

use haucl::checkpoint::{load_checkpoint, save_checkpoint};
use haucl::data::generate_synthetic;
use haucl::{evaluate, train, HauclModel, RunConfig, SyntheticSpec};

fn main() -> haucl::Result<()> {
    let data = generate_synthetic(&SyntheticSpec { num_dialogues: 6, ..SyntheticSpec::default() })?;
    let cfg = RunConfig { epochs: 2, ..RunConfig::tiny() };
    let mut model = HauclModel::new(cfg.model_config(&data), cfg.seed)?;
    train(&mut model, &data, &cfg.train_config(), |_| {})?;

    let path = std::env::temp_dir().join("haucl-example.ckpt");
    save_checkpoint(&model.params, &path)?;
    let bytes = std::fs::metadata(&path).map_err(|e| haucl::Error::io(&path, e))?.len();
    println!("wrote {} ({bytes} bytes, {} scalars)", path.display(), model.params.num_scalars());

    let mut fresh = HauclModel::new(cfg.model_config(&data), 123)?;
    fresh.params.load_from(&load_checkpoint(&path)?)?;
    println!("bit-identical parameters: {}", fresh.params.bit_eq(&model.params));
    println!("original {}", evaluate(&model, &data)?);
    println!("reloaded {}", evaluate(&fresh, &data)?);
    std::fs::remove_file(&path).ok();
    Ok(())
}
