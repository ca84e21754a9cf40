//! Batch objective, the training loop, and evaluation.

use std::fmt;

use rand::seq::SliceRandom;

use crate::autodiff::{Tape, Var};
use crate::classifier::{cross_entropy_sum, l2_norm, total_loss, LossWeights};
use crate::contrastive::contrastive_loss;
use crate::data::{Dataset, DialogueFeatures};
use crate::error::{Error, Result};
use crate::metrics::ConfusionMatrix;
use crate::model::HauclModel;
use crate::noise::{stream_rng, Noise, Stream};
use crate::optim::{Adam, AdamConfig};
use crate::params::Bound;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub tau_cl: f64,
    pub weights: LossWeights,
}

/// Loss terms of one batch, all scalars on the same tape.
#[derive(Clone, Debug)]
pub struct BatchLoss<'t> {
    pub total: Var<'t>,
    /// Mean cross-entropy over every utterance in the batch, plus the L2 term.
    pub ce: Var<'t>,
    /// Mean over dialogues of `(L_g¹ + L_g²)/2`.
    pub g: Var<'t>,
    /// Mean over dialogues of the contrastive loss.
    pub cl: Var<'t>,
}

/// Objective of a batch of dialogues, each run as its own hypergraph.
pub fn batch_loss<'t>(
    model: &HauclModel,
    bound: &Bound<'t>,
    batch: &[&DialogueFeatures],
    noise: &mut Noise,
    tau_cl: f64,
    weights: &LossWeights,
) -> Result<BatchLoss<'t>> {
    if batch.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let tape = bound.tape();
    let ablation = model.config.ablation;
    let per_dialogue = 1.0 / batch.len() as f64;
    let mut ce_sum = tape.scalar(0.0);
    let mut g1 = tape.scalar(0.0);
    let mut g2 = tape.scalar(0.0);
    let mut cl = tape.scalar(0.0);
    let mut utterances = 0;
    for dlg in batch {
        let out = model.forward(bound, dlg, noise)?;
        ce_sum = ce_sum.add(cross_entropy_sum(out.prediction.probs, &dlg.labels())?)?;
        utterances += dlg.len();
        if let Some([a, b]) = &out.vhgae {
            g1 = g1.add(a.loss.total.scale(per_dialogue))?;
            g2 = g2.add(b.loss.total.scale(per_dialogue))?;
        }
        if ablation.uses_contrastive() {
            let [v1, v2] = out.views;
            cl = cl.add(contrastive_loss(v1, v2, tau_cl)?.scale(per_dialogue))?;
        }
    }
    let mut ce = ce_sum.scale(1.0 / utterances as f64);
    if weights.l2 != 0.0 {
        ce = ce.add(l2_norm(bound.vars())?.scale(weights.l2))?;
    }
    let total = total_loss(ce, g1, g2, cl, weights)?;
    Ok(BatchLoss { total, ce, g: g1.add(g2)?.scale(0.5), cl })
}

/// One line of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub ce: f64,
    pub g: f64,
    pub cl: f64,
    pub acc: f64,
    pub wf1: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch={} loss={:.6} ce={:.6} g={:.6} cl={:.6} acc={:.4} wf1={:.4}",
            self.epoch, self.loss, self.ce, self.g, self.cl, self.acc, self.wf1
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub acc: f64,
    pub wf1: f64,
    pub confusion: ConfusionMatrix,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "acc={:.4} wf1={:.4}", self.acc, self.wf1)
    }
}

/// Errors if the dataset header does not fit the model.
pub fn check_compatible(model: &HauclModel, data: &Dataset) -> Result<()> {
    let c = &model.config;
    if c.dims != data.dims {
        return Err(Error::Mismatch(format!(
            "model expects feature widths t={} a={} v={}, data has t={} a={} v={}",
            c.dims.t, c.dims.a, c.dims.v, data.dims.t, data.dims.a, data.dims.v
        )));
    }
    if c.classes != data.classes || c.num_speakers != data.num_speakers {
        return Err(Error::Mismatch(format!(
            "model expects {} classes and {} speakers, data has {} and {}",
            c.classes, c.num_speakers, data.classes, data.num_speakers
        )));
    }
    Ok(())
}

/// Deterministic evaluation: no dropout, no latent noise, no Gumbel noise.
pub fn evaluate(model: &HauclModel, data: &Dataset) -> Result<EvalReport> {
    check_compatible(model, data)?;
    if data.num_utterances() == 0 {
        return Err(Error::EmptyDialogue);
    }
    let mut confusion = ConfusionMatrix::new(data.classes);
    for dlg in &data.dialogues {
        for (pred, label) in model.predict(dlg)?.into_iter().zip(dlg.labels()) {
            confusion.record(label, pred)?;
        }
    }
    Ok(EvalReport { acc: confusion.accuracy(), wf1: confusion.weighted_f1(), confusion })
}

/// Trains in place with Adam, calling `on_epoch` after every epoch.
///
/// The reported accuracy and F1 are evaluation-mode metrics on the
/// training set after the epoch's last update.
pub fn train(
    model: &mut HauclModel,
    data: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    check_compatible(model, data)?;
    if data.dialogues.is_empty() {
        return Err(Error::EmptyDialogue);
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    cfg.weights.validate()?;
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr), &model.params);
    let mut noise = Noise::sampling(cfg.seed);
    let mut shuffle = stream_rng(cfg.seed, Stream::Data);
    let mut order: Vec<usize> = (0..data.dialogues.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        let (mut loss, mut ce, mut g, mut cl) = (0.0, 0.0, 0.0, 0.0);
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        for (step, idx) in batches.iter().enumerate() {
            let batch: Vec<&DialogueFeatures> = idx.iter().map(|&i| &data.dialogues[i]).collect();
            let tape = Tape::new();
            let bound = model.params.bind(&tape);
            let diverged = Error::Diverged { epoch, step: step + 1 };
            // a domain error here can only come from non-finite activations
            let terms = match batch_loss(model, &bound, &batch, &mut noise, cfg.tau_cl, &cfg.weights) {
                Err(Error::Domain { .. }) => return Err(diverged),
                other => other?,
            };
            let value = terms.total.item();
            if !value.is_finite() {
                return Err(diverged);
            }
            let grads = bound.grads(&tape.backward(terms.total)?);
            if grads.iter().any(|t| !t.is_finite()) {
                return Err(diverged);
            }
            adam.step(&mut model.params, &grads)?;
            if model.params.iter().any(|(_, t)| !t.is_finite()) {
                return Err(diverged);
            }
            loss += value;
            ce += terms.ce.item();
            g += terms.g.item();
            cl += terms.cl.item();
        }
        let nb = batches.len() as f64;
        let report = match evaluate(model, data) {
            Err(Error::Domain { .. }) => return Err(Error::Diverged { epoch, step: batches.len() }),
            other => other?,
        };
        let log =
            EpochLog { epoch, loss: loss / nb, ce: ce / nb, g: g / nb, cl: cl / nb, acc: report.acc, wf1: report.wf1 };
        on_epoch(&log);
        logs.push(log);
    }
    Ok(logs)
}
