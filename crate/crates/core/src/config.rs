//! Run configuration: TOML file plus per-field overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::LossWeights;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Ablation, ModelConfig};
use crate::train::TrainConfig;
use crate::vhgae::IncidenceMode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Node embedding width.
    pub d: usize,
    /// Latent width of the autoencoder.
    pub d_z: usize,
    /// Hidden width of each GRU direction in the text encoder.
    pub gru_hidden: usize,
    /// Hidden width of the classifier.
    pub head_hidden: usize,
    pub conv_layers: usize,
    pub tau_gumbel: f64,
    pub tau_cl: f64,
    /// Coefficient of the global L2 norm of all parameters.
    pub l2: f64,
    pub lambda_g: f64,
    pub lambda_cl: f64,
    pub dropout: f64,
    pub lr: f64,
    /// Dialogues per optimizer step.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub incidence: IncidenceMode,
    pub no_speaker_embedding: bool,
    pub no_vhgae_paths: bool,
    pub no_contrastive: bool,
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Where `eval` writes fused node embeddings, if set.
    pub embeddings: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            d: 64,
            d_z: 64,
            gru_hidden: 32,
            head_hidden: 64,
            conv_layers: 1,
            tau_gumbel: 0.1,
            tau_cl: 0.5,
            l2: 1e-5,
            lambda_g: 0.5,
            lambda_cl: 1.0,
            dropout: 0.4,
            lr: 1e-4,
            batch_size: 12,
            epochs: 15,
            seed: 0,
            incidence: IncidenceMode::Hard,
            no_speaker_embedding: false,
            no_vhgae_paths: false,
            no_contrastive: false,
            data: None,
            checkpoint: None,
            embeddings: None,
        }
    }
}

impl RunConfig {
    /// The IEMOCAP column of the hyperparameter table.
    pub fn iemocap() -> Self {
        RunConfig { lambda_g: 0.8, lambda_cl: 0.1, epochs: 45, dropout: 0.3, ..RunConfig::default() }
    }

    /// Widths small enough for the finite-difference check.
    pub fn tiny() -> Self {
        RunConfig {
            d: 8,
            d_z: 8,
            gru_hidden: 4,
            head_hidden: 8,
            incidence: IncidenceMode::Soft,
            ..RunConfig::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn ablation(&self) -> Ablation {
        Ablation {
            no_speaker_embedding: self.no_speaker_embedding,
            no_vhgae_paths: self.no_vhgae_paths,
            no_contrastive: self.no_contrastive,
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights { lambda_g: self.lambda_g, lambda_cl: self.lambda_cl, l2: self.l2 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d", self.d),
            ("d_z", self.d_z),
            ("gru_hidden", self.gru_hidden),
            ("head_hidden", self.head_hidden),
            ("conv_layers", self.conv_layers),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("tau_gumbel", self.tau_gumbel), ("tau_cl", self.tau_cl), ("lr", self.lr)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        self.weights().validate()
    }

    /// Model shape for a dataset with the given header.
    pub fn model_config(&self, data: &Dataset) -> ModelConfig {
        ModelConfig {
            dims: data.dims,
            num_speakers: data.num_speakers,
            classes: data.classes,
            d: self.d,
            d_z: self.d_z,
            gru_hidden: self.gru_hidden,
            head_hidden: self.head_hidden,
            conv_layers: self.conv_layers,
            tau_gumbel: self.tau_gumbel,
            dropout: self.dropout,
            incidence: self.incidence,
            ablation: self.ablation(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            tau_cl: self.tau_cl,
            weights: self.weights(),
        }
    }
}
