//! How closely the evaluation-mode decoded incidence follows the initial one.
//!
//! `cargo run --release --example reconstruction_diagnostics -- [epochs] [soft]`

use haucl::data::generate_synthetic;
use haucl::{
    build_initial_incidence, evaluate, train, HauclModel, IncidenceMode, Noise, RunConfig, SyntheticSpec, Tape,
};

fn main() -> haucl::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(30);
    let data = generate_synthetic(&SyntheticSpec::default())?;
    let mut cfg = RunConfig { epochs, lr: 1e-3, ..RunConfig::default() };
    if args.get(2).map(String::as_str) == Some("soft") {
        cfg.incidence = IncidenceMode::Soft;
    }
    let mut model = HauclModel::new(cfg.model_config(&data), cfg.seed)?;
    train(&mut model, &data, &cfg.train_config(), |log| {
        if log.epoch % 10 == 0 {
            println!("{log}");
        }
    })?;

    let (mut entries, mut agree, mut present, mut h0_pos, mut recalled) = (0, 0, 0, 0, 0);
    let (mut rows, mut own_edge, mut modality_edge) = (0, 0, 0);
    let (mut majority, mut utterances) = (0, 0);
    for dlg in &data.dialogues {
        let n = dlg.len();
        let tape = Tape::new();
        let bound = model.params.bind(&tape);
        let out = model.forward(&bound, dlg, &mut Noise::off())?;
        let decoded =
            out.vhgae.as_ref().expect("autoencoder path on")[0]
                .presence
                .value()
                .map(|p| if p >= 0.5 { 1.0 } else { 0.0 });
        let h0 = build_initial_incidence(n)?;
        for (&a, &b) in decoded.data().iter().zip(h0.incidence().data()) {
            entries += 1;
            agree += (a == b) as usize;
            present += (a == 1.0) as usize;
            if b == 1.0 {
                h0_pos += 1;
                recalled += (a == 1.0) as usize;
            }
        }
        for r in 0..3 * n {
            rows += 1;
            own_edge += (decoded.at(r, 3 + r % n) == 1.0) as usize;
            modality_edge += (decoded.at(r, r / n) == 1.0) as usize;
        }
        let mut counts = vec![0; data.classes];
        for y in dlg.labels() {
            counts[y] += 1;
        }
        majority += counts.iter().max().unwrap();
        utterances += n;
    }
    let frac = |a: usize, b: usize| a as f64 / b as f64;
    println!(
        "agreement={:.4} density={:.4} recall={:.4}",
        frac(agree, entries),
        frac(present, entries),
        frac(recalled, h0_pos)
    );
    println!(
        "rows with own utterance edge={:.4} rows with modality edge={:.4}",
        frac(own_edge, rows),
        frac(modality_edge, rows)
    );
    println!("dialogue-majority baseline={:.4}", frac(majority, utterances));
    println!("train {}", evaluate(&model, &data)?);
    Ok(())
}
