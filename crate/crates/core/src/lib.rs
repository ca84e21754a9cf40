//! HAUCL: multimodal emotion recognition in conversation with a variational
//! hypergraph autoencoder and contrastive learning.
//!
//! Each dialogue becomes a hypergraph whose nodes are the text, audio and
//! visual features of every utterance. A variational autoencoder samples two
//! reconstructions of the incidence matrix, both views are convolved, pulled
//! together by a contrastive loss, fused, and classified per utterance.
//!
//! Everything runs on a small reverse-mode autodiff engine over `f64`
//! tensors ([`autodiff`], [`tensor`]).

pub mod autodiff;
pub mod checkpoint;
pub mod classifier;
pub mod config;
pub mod contrastive;
pub mod data;
pub mod encoders;
pub mod error;
pub mod gradcheck;
pub mod hyperconv;
pub mod hypergraph;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod optim;
pub mod params;
pub mod tensor;
pub mod train;
pub mod vhgae;

pub use autodiff::{Gradients, Tape, Var};
pub use config::RunConfig;
pub use data::{Dataset, DialogueFeatures, ModalityDims, SyntheticSpec, Utterance};
pub use error::{Error, Result};
pub use hypergraph::{build_initial_incidence, Hypergraph, Modality};
pub use model::{Ablation, HauclModel, ModelConfig};
pub use noise::Noise;
pub use params::ParamStore;
pub use tensor::Tensor;
pub use train::{evaluate, train, EpochLog, EvalReport, TrainConfig};
pub use vhgae::IncidenceMode;
