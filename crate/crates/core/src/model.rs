//! The end-to-end two-view pipeline for one dialogue.
//!
//! encode → speaker fusion → initial hypergraph → VHGAE (twice, shared
//! parameters, independent noise) → convolution on each reconstruction →
//! fuse views → classify.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::classifier::{classify, fuse_views, HeadParams, Prediction};
use crate::data::{DialogueFeatures, ModalityDims};
use crate::encoders::{embed_and_fuse_speakers, encode_modalities, EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::hyperconv::HyperConv;
use crate::hypergraph::build_initial_incidence;
use crate::noise::{stream_rng, Noise, Stream};
use crate::params::{Bound, ParamStore};
use crate::vhgae::{vhgae_forward, IncidenceMode, VhgaeOutput, VhgaeParams};

/// Component switches for ablation runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Skip adding speaker embeddings to the node features.
    pub no_speaker_embedding: bool,
    /// Convolve the initial hypergraph directly; no VHGAE and no contrastive term.
    pub no_vhgae_paths: bool,
    /// Keep both VHGAE views but drop the contrastive term.
    pub no_contrastive: bool,
}

impl Ablation {
    pub fn uses_contrastive(&self) -> bool {
        !self.no_vhgae_paths && !self.no_contrastive
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub dims: ModalityDims,
    pub num_speakers: usize,
    pub classes: usize,
    pub d: usize,
    pub d_z: usize,
    pub gru_hidden: usize,
    pub head_hidden: usize,
    pub conv_layers: usize,
    pub tau_gumbel: f64,
    pub dropout: f64,
    pub incidence: IncidenceMode,
    pub ablation: Ablation,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d", self.d),
            ("d_z", self.d_z),
            ("gru_hidden", self.gru_hidden),
            ("head_hidden", self.head_hidden),
            ("conv_layers", self.conv_layers),
            ("classes", self.classes),
            ("num_speakers", self.num_speakers),
            ("dims.t", self.dims.t),
            ("dims.a", self.dims.a),
            ("dims.v", self.dims.v),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.tau_gumbel > 0.0) {
            return Err(Error::Config(format!("tau_gumbel must be positive, got {}", self.tau_gumbel)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

/// Everything one dialogue's forward pass produces.
#[derive(Clone, Debug)]
pub struct DialogueForward<'t> {
    pub prediction: Prediction<'t>,
    /// Node embeddings `[3N, d]` of the two views after convolution.
    pub views: [Var<'t>; 2],
    pub fused: Var<'t>,
    /// The two autoencoder passes; absent when the VHGAE paths are ablated.
    pub vhgae: Option<[VhgaeOutput<'t>; 2]>,
}

#[derive(Clone, Debug)]
pub struct HauclModel {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub encoder: EncoderParams,
    pub vhgae: VhgaeParams,
    pub conv: HyperConv,
    pub head: HeadParams,
}

impl HauclModel {
    /// Fresh parameters drawn from the init stream of `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(seed, Stream::Init);
        let mut params = ParamStore::new();
        let encoder = EncoderParams::init(
            &mut params,
            EncoderConfig {
                dims: config.dims,
                num_speakers: config.num_speakers,
                d: config.d,
                gru_hidden: config.gru_hidden,
            },
            &mut rng,
        );
        let vhgae = VhgaeParams::init(&mut params, config.d, config.d_z, &mut rng);
        let conv = HyperConv::init(&mut params, "conv", config.d, config.conv_layers, &mut rng);
        let head = HeadParams::init(&mut params, config.d, config.head_hidden, config.classes, &mut rng);
        Ok(HauclModel { config, params, encoder, vhgae, conv, head })
    }

    /// Speaker-aware node features `V` (`[3N, d]`), with dropout drawn from `noise`.
    pub fn node_features<'t>(&self, bound: &Bound<'t>, dlg: &DialogueFeatures, noise: &mut Noise) -> Result<Var<'t>> {
        let u = encode_modalities(dlg, &self.encoder, bound)?;
        let mask = noise.dropout_mask(&u.shape(), self.config.dropout)?;
        let u = u.apply_mask(mask)?;
        embed_and_fuse_speakers(u, &dlg.speakers(), &self.encoder, bound, !self.config.ablation.no_speaker_embedding)
    }

    pub fn forward<'t>(
        &self,
        bound: &Bound<'t>,
        dlg: &DialogueFeatures,
        noise: &mut Noise,
    ) -> Result<DialogueForward<'t>> {
        let n = dlg.len();
        let h0 = build_initial_incidence(n)?;
        let x = self.node_features(bound, dlg, noise)?;
        let tape = bound.tape();

        if self.config.ablation.no_vhgae_paths {
            let (nodes, _) = self.conv.forward(bound, x, tape.constant(h0.incidence().clone()))?;
            let prediction = classify(nodes, &self.head, bound)?;
            return Ok(DialogueForward { prediction, views: [nodes, nodes], fused: nodes, vhgae: None });
        }

        let view = |noise: &mut Noise| -> Result<(VhgaeOutput<'t>, Var<'t>)> {
            let out = vhgae_forward(
                &self.vhgae,
                bound,
                x,
                h0.incidence(),
                self.config.tau_gumbel,
                self.config.incidence,
                noise,
            )?;
            let (nodes, _) = self.conv.forward(bound, x, out.incidence)?;
            Ok((out, nodes))
        };
        let (out1, x1) = view(noise)?;
        // Without noise both views are identical.
        let (out2, x2) = if noise.is_off() { (out1.clone(), x1) } else { view(noise)? };
        let fused = fuse_views(x1, x2)?;
        let prediction = classify(fused, &self.head, bound)?;
        Ok(DialogueForward { prediction, views: [x1, x2], fused, vhgae: Some([out1, out2]) })
    }

    /// Deterministic evaluation-mode predictions for one dialogue.
    pub fn predict(&self, dlg: &DialogueFeatures) -> Result<Vec<usize>> {
        let tape = Tape::new();
        let bound = self.params.bind(&tape);
        let out = self.forward(&bound, dlg, &mut Noise::off())?;
        Ok(out.prediction.preds)
    }

    /// Evaluation-mode fused node embeddings `[3N, d]`, e.g. for visualization.
    pub fn embed(&self, dlg: &DialogueFeatures) -> Result<crate::tensor::Tensor> {
        let tape = Tape::new();
        let bound = self.params.bind(&tape);
        Ok(self.forward(&bound, dlg, &mut Noise::off())?.fused.value())
    }
}
