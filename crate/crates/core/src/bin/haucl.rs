use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use haucl::checkpoint::{load_checkpoint, save_checkpoint};
use haucl::data::{generate_synthetic, load_dataset, save_dataset};
use haucl::gradcheck::gradcheck_tiny;
use haucl::{evaluate, train, Error, HauclModel, IncidenceMode, ModalityDims, Result, RunConfig, SyntheticSpec};

#[derive(Parser)]
#[command(name = "haucl", version, about = "Hypergraph emotion recognition in conversation", args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a dataset file and write a checkpoint.
    Train(RunArgs),
    /// Evaluate a checkpoint on a dataset file.
    Eval(RunArgs),
    /// Check backprop against finite differences on a tiny model.
    Gradcheck {
        #[command(flatten)]
        run: RunArgs,
        /// Scale the backward pass of this op (negative control).
        #[arg(long, hide = true)]
        corrupt_op: Option<String>,
    },
    /// Write a synthetic dataset.
    Synth(SynthArgs),
}

/// Every field of the run configuration; flags override the config file.
#[derive(Args)]
struct RunArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    d_z: Option<usize>,
    #[arg(long)]
    gru_hidden: Option<usize>,
    #[arg(long)]
    head_hidden: Option<usize>,
    #[arg(long)]
    conv_layers: Option<usize>,
    #[arg(long)]
    tau_gumbel: Option<f64>,
    #[arg(long)]
    tau_cl: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    lambda_g: Option<f64>,
    #[arg(long)]
    lambda_cl: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["hard", "soft"])]
    incidence: Option<String>,
    #[arg(long)]
    no_speaker_embedding: bool,
    #[arg(long)]
    no_vhgae_paths: bool,
    #[arg(long)]
    no_contrastive: bool,
    /// Dataset file.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Write evaluation-mode node embeddings here (eval only).
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

macro_rules! override_fields {
    ($cfg:ident, $args:ident, $($f:ident),*) => {
        $(if let Some(v) = $args.$f.clone() { $cfg.$f = v.into(); })*
    };
}

impl RunArgs {
    fn resolve(&self, base: RunConfig) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => base,
        };
        override_fields!(
            cfg,
            self,
            d,
            d_z,
            gru_hidden,
            head_hidden,
            conv_layers,
            tau_gumbel,
            tau_cl,
            l2,
            lambda_g,
            lambda_cl,
            dropout,
            lr,
            batch_size,
            epochs,
            seed
        );
        if let Some(mode) = &self.incidence {
            cfg.incidence = if mode == "soft" { IncidenceMode::Soft } else { IncidenceMode::Hard };
        }
        cfg.no_speaker_embedding |= self.no_speaker_embedding;
        cfg.no_vhgae_paths |= self.no_vhgae_paths;
        cfg.no_contrastive |= self.no_contrastive;
        for (slot, flag) in [
            (&mut cfg.data, &self.data),
            (&mut cfg.checkpoint, &self.checkpoint),
            (&mut cfg.embeddings, &self.embeddings),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 6)]
    classes: usize,
    #[arg(long, default_value_t = 2)]
    speakers: usize,
    #[arg(long, default_value_t = 20)]
    dialogues: usize,
    #[arg(long, default_value_t = 8)]
    min_len: usize,
    #[arg(long, default_value_t = 16)]
    max_len: usize,
    #[arg(long, default_value_t = 16)]
    dim_t: usize,
    #[arg(long, default_value_t = 12)]
    dim_a: usize,
    #[arg(long, default_value_t = 12)]
    dim_v: usize,
    /// Probability of keeping the previous label.
    #[arg(long, default_value_t = 0.7)]
    inertia: f64,
    #[arg(long, default_value_t = 1.0)]
    speaker_scale: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn required(path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.clone()
        .ok_or_else(|| Error::Config(format!("no {what} path given (use --{what} or set it in the config file)")))
}

fn cmd_train(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.resolve(RunConfig::default())?;
    let data = load_dataset(required(&cfg.data, "data")?)?;
    let ckpt = required(&cfg.checkpoint, "checkpoint")?;
    let mut model = HauclModel::new(cfg.model_config(&data), cfg.seed)?;
    train(&mut model, &data, &cfg.train_config(), |log| println!("{log}"))?;
    save_checkpoint(&model.params, &ckpt)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.resolve(RunConfig::default())?;
    let data = load_dataset(required(&cfg.data, "data")?)?;
    let stored = load_checkpoint(required(&cfg.checkpoint, "checkpoint")?)?;
    let mut model = HauclModel::new(cfg.model_config(&data), cfg.seed)?;
    model.params.load_from(&stored)?;
    let report = evaluate(&model, &data)?;
    if let Some(path) = &cfg.embeddings {
        let embeddings = data
            .dialogues
            .iter()
            .map(|dlg| {
                let e = model.embed(dlg)?;
                Ok((0..e.rows()).map(|i| e.row(i).to_vec()).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let text = serde_json::to_string(&embeddings).expect("embeddings serialize");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
    }
    println!("{report}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_gradcheck(args: &RunArgs, corrupt_op: Option<&str>) -> Result<ExitCode> {
    let cfg = args.resolve(RunConfig::tiny())?;
    let report = gradcheck_tiny(&cfg, corrupt_op)?;
    println!("{report}");
    if report.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        let worst = report.worst();
        eprintln!("gradient mismatch in parameter {} (relative error {:.3e})", worst.name, worst.max_rel_error);
        if let Some(op) = corrupt_op {
            eprintln!("backward pass of op `{op}` was corrupted");
        }
        Ok(ExitCode::from(1))
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<ExitCode> {
    let data = generate_synthetic(&SyntheticSpec {
        classes: args.classes,
        num_speakers: args.speakers,
        num_dialogues: args.dialogues,
        len_range: (args.min_len, args.max_len),
        dims: ModalityDims { t: args.dim_t, a: args.dim_a, v: args.dim_v },
        inertia: args.inertia,
        speaker_scale: args.speaker_scale,
        seed: args.seed,
    })?;
    save_dataset(&data, &args.out)?;
    println!(
        "dialogues={} utterances={} classes={} speakers={}",
        data.dialogues.len(),
        data.num_utterances(),
        data.classes,
        data.num_speakers
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Gradcheck { run, corrupt_op } => cmd_gradcheck(run, corrupt_op.as_deref()),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
