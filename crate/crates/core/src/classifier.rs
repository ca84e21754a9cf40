//! View fusion, per-utterance emotion head, and the training objective.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::params::{affine, Bound, ParamId, ParamStore};
use crate::tensor::Tensor;

/// `log P` is floored at `ln(PROB_FLOOR)` in the cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct HeadParams {
    pub w_2: ParamId,
    pub b_2: ParamId,
    pub w_3: ParamId,
    pub b_3: ParamId,
}

impl HeadParams {
    pub fn init<R: Rng + ?Sized>(store: &mut ParamStore, d: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        HeadParams {
            w_2: store.add_weight("head.w_2", 3 * d, hidden, rng),
            b_2: store.add_bias("head.b_2", 3 * d, hidden, rng),
            w_3: store.add_weight("head.w_3", hidden, classes, rng),
            b_3: store.add_bias("head.b_3", hidden, classes, rng),
        }
    }
}

/// Weights of the auxiliary terms and the L2 penalty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_g: f64,
    pub lambda_cl: f64,
    pub l2: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_g", self.lambda_g), ("lambda_cl", self.lambda_cl), ("l2", self.l2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be a finite nonnegative number, got {v}")));
            }
        }
        Ok(())
    }
}

/// Elementwise mean of the two views.
pub fn fuse_views<'t>(v1: Var<'t>, v2: Var<'t>) -> Result<Var<'t>> {
    let (s1, s2) = (v1.shape(), v2.shape());
    if s1 != s2 {
        return Err(Error::shape("fuse_views", &s1, &s2));
    }
    Ok(v1.add(v2)?.scale(0.5))
}

/// Rearranges `[3N, d]` node embeddings into `[N, 3d]` rows `concat(text_i, audio_i, visual_i)`.
pub fn utterance_rows<'t>(nodes: Var<'t>) -> Result<Var<'t>> {
    let shape = nodes.shape();
    if shape.len() != 2 || shape[0] % 3 != 0 {
        return Err(Error::shape("utterance_rows", &shape, &[3]));
    }
    let (n, d) = (shape[0] / 3, shape[1]);
    if n == 0 {
        return Err(Error::EmptyDialogue);
    }
    let indices = (0..n).flat_map(|i| (0..3).flat_map(move |m| ((m * n + i) * d)..((m * n + i) * d + d))).collect();
    nodes.gather(indices, vec![n, 3 * d])
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    (0..row.len()).fold(0, |best, j| if row[j] > row[best] { j } else { best })
}

#[derive(Clone, Debug)]
pub struct Prediction<'t> {
    /// `[N, C]` class probabilities.
    pub probs: Var<'t>,
    pub preds: Vec<usize>,
}

/// `P_i = softmax(relu(v_i · W_2 + b_2) · W_3 + b_3)` for each utterance row.
pub fn classify<'t>(fused: Var<'t>, head: &HeadParams, bound: &Bound<'t>) -> Result<Prediction<'t>> {
    let rows = utterance_rows(fused)?;
    let hidden = affine(rows, bound.var(head.w_2), bound.var(head.b_2))?.relu();
    let logits = affine(hidden, bound.var(head.w_3), bound.var(head.b_3))?;
    let probs = logits.softmax(1)?;
    let preds = {
        let p = probs.value_ref();
        (0..p.rows()).map(|i| argmax(p.row(i))).collect()
    };
    Ok(Prediction { probs, preds })
}

/// `Σ_i −log max(P_i[y_i], PROB_FLOOR)` over the rows of `probs`.
pub fn cross_entropy_sum<'t>(probs: Var<'t>, labels: &[usize]) -> Result<Var<'t>> {
    let shape = probs.shape();
    if shape.len() != 2 || shape[0] != labels.len() {
        return Err(Error::shape("cross_entropy", &shape, &[labels.len()]));
    }
    let c = shape[1];
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::Index { what: "label", index: bad, bound: c });
    }
    let picked = probs.gather(labels.iter().enumerate().map(|(i, &y)| i * c + y).collect(), vec![labels.len()])?;
    Ok(picked.clamp(PROB_FLOOR, 1.0).log()?.sum().neg())
}

/// Global L2 norm `‖θ‖₂` over every tensor in `params`.
pub fn l2_norm<'t>(params: &[Var<'t>]) -> Result<Var<'t>> {
    let first = params.first().ok_or_else(|| Error::Contract("l2 norm over no parameters".into()))?;
    let mut total = first.mul(*first)?.sum();
    for p in &params[1..] {
        total = total.add(p.mul(*p)?.sum())?;
    }
    total.sqrt()
}

/// Mean cross-entropy over all rows plus `λ‖θ‖₂`.
pub fn cross_entropy_l2<'t>(probs: Var<'t>, labels: &[usize], params: &[Var<'t>], l2: f64) -> Result<Var<'t>> {
    let ce = cross_entropy_sum(probs, labels)?.scale(1.0 / labels.len() as f64);
    if l2 == 0.0 {
        return Ok(ce);
    }
    ce.add(l2_norm(params)?.scale(l2))
}

/// `L = L_ce + λ_g · (L_g¹ + L_g²)/2 + λ_cl · L_cl`.
pub fn total_loss<'t>(l_ce: Var<'t>, l_g1: Var<'t>, l_g2: Var<'t>, l_cl: Var<'t>, w: &LossWeights) -> Result<Var<'t>> {
    let g = l_g1.add(l_g2)?.scale(0.5 * w.lambda_g);
    l_ce.add(g)?.add(l_cl.scale(w.lambda_cl))
}

/// Plain-value helper used by callers that only need probabilities.
pub fn probs_to_preds(probs: &Tensor) -> Vec<usize> {
    (0..probs.rows()).map(|i| argmax(probs.row(i))).collect()
}
