//! Variational hypergraph autoencoder.
//!
//! Encoder: one hypergraph convolution over the initial incidence gives node
//! and hyperedge embeddings. Two-layer heads map each to a Gaussian
//! (`μ`, `σ`), one pair of heads per element type. Sampler: `m = μ + σ ⊙ δ`.
//! Decoder: every (node, hyperedge) pair is scored by the inner product of
//! their latents; the two-class logits `[s, 0]` go through a Gumbel-Softmax
//! and the class-0 output is the presence probability. In hard mode the
//! probabilities are thresholded at 0.5 with a straight-through gradient and
//! any node left without a hyperedge is attached to its most probable one.
//!
//! The loss is the KL divergence of both latent Gaussians from `N(0, I)`
//! plus the binary cross-entropy between the original incidence and the
//! presence probabilities.

use rand::Rng;

use crate::autodiff::{sigmoid, Var};
use crate::error::{Error, Result};
use crate::hyperconv::HyperConv;
use crate::noise::Noise;
use crate::params::{affine, Bound, ParamId, ParamStore};
use crate::tensor::Tensor;

/// Presence probabilities are clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]` inside the BCE.
pub const BCE_CLAMP: f64 = 1e-7;

/// `σ` is floored at this value before taking its log in the KL term.
const SIGMA_FLOOR: f64 = 1e-12;

/// Mean and variance heads for one element type (nodes or hyperedges).
#[derive(Clone, Debug)]
pub struct LatentHead {
    pub w_mu: ParamId,
    pub b_mu: ParamId,
    pub w_1: ParamId,
    pub b_1: ParamId,
    pub w_sigma: ParamId,
    pub b_sigma: ParamId,
    pub w_2: ParamId,
    pub b_2: ParamId,
}

impl LatentHead {
    pub fn init<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, d: usize, d_z: usize, rng: &mut R) -> Self {
        LatentHead {
            w_mu: store.add_weight(format!("{prefix}.w_mu"), d, d, rng),
            b_mu: store.add_bias(format!("{prefix}.b_mu"), d, d, rng),
            w_1: store.add_weight(format!("{prefix}.w_1"), d, d_z, rng),
            b_1: store.add_bias(format!("{prefix}.b_1"), d, d_z, rng),
            w_sigma: store.add_weight(format!("{prefix}.w_sigma"), d, d, rng),
            b_sigma: store.add_bias(format!("{prefix}.b_sigma"), d, d, rng),
            w_2: store.add_weight(format!("{prefix}.w_2"), d, d_z, rng),
            b_2: store.add_bias(format!("{prefix}.b_2"), d, d_z, rng),
        }
    }
}

/// How the reconstructed incidence is handed to downstream convolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncidenceMode {
    /// Binary forward pass, gradient through the probabilities.
    #[default]
    Hard,
    /// Presence probabilities used directly as a weighted incidence.
    Soft,
}

#[derive(Clone, Debug)]
pub struct VhgaeParams {
    pub conv: HyperConv,
    pub node_head: LatentHead,
    pub edge_head: LatentHead,
}

impl VhgaeParams {
    pub fn init<R: Rng + ?Sized>(store: &mut ParamStore, d: usize, d_z: usize, rng: &mut R) -> Self {
        VhgaeParams {
            conv: HyperConv::init(store, "vhgae.conv", d, 1, rng),
            node_head: LatentHead::init(store, "vhgae.node", d, d_z, rng),
            edge_head: LatentHead::init(store, "vhgae.edge", d, d_z, rng),
        }
    }
}

/// A Gaussian latent: mean and (strictly positive) standard deviation.
#[derive(Clone, Copy, Debug)]
pub struct Latent<'t> {
    pub mu: Var<'t>,
    pub sigma: Var<'t>,
}

#[derive(Clone, Copy, Debug)]
pub struct VhgaeLoss<'t> {
    pub kl_nodes: Var<'t>,
    pub kl_edges: Var<'t>,
    pub bce: Var<'t>,
    pub total: Var<'t>,
}

#[derive(Clone, Debug)]
pub struct VhgaeOutput<'t> {
    /// Incidence for downstream convolution (binary forward in hard mode).
    pub incidence: Var<'t>,
    /// The binary matrix actually used in hard mode, after row repair.
    pub hard_incidence: Option<Tensor>,
    pub presence: Var<'t>,
    pub nodes: Latent<'t>,
    pub edges: Latent<'t>,
    pub loss: VhgaeLoss<'t>,
}

/// Node and hyperedge embeddings from one convolution over `h0`.
pub fn vhgae_encode<'t>(conv: &HyperConv, bound: &Bound<'t>, x: Var<'t>, h0: Var<'t>) -> Result<(Var<'t>, Var<'t>)> {
    conv.forward(bound, x, h0)
}

/// `μ = relu(k·W_μ + b_μ)·W_1 + b_1`, `σ = softplus(relu(k·W_σ + b_σ)·W_2 + b_2)`.
pub fn latent_params<'t>(head: &LatentHead, bound: &Bound<'t>, k: Var<'t>) -> Result<Latent<'t>> {
    let p = |id| bound.var(id);
    let mu = affine(affine(k, p(head.w_mu), p(head.b_mu))?.relu(), p(head.w_1), p(head.b_1))?;
    let sigma = affine(affine(k, p(head.w_sigma), p(head.b_sigma))?.relu(), p(head.w_2), p(head.b_2))?.softplus();
    Ok(Latent { mu, sigma })
}

/// Reparameterized sample `μ + σ ⊙ δ` for a given noise tensor (`None` means `δ = 0`).
pub fn sample_with<'t>(latent: Latent<'t>, delta: Option<Tensor>) -> Result<Var<'t>> {
    match delta {
        None => Ok(latent.mu),
        Some(delta) => {
            let delta = latent.mu.tape().constant(delta);
            latent.mu.add(latent.sigma.mul(delta)?)
        }
    }
}

/// Reparameterized sample with `δ ~ N(0, 1)` drawn from `noise`.
pub fn sample_latent<'t>(latent: Latent<'t>, noise: &mut Noise) -> Result<Var<'t>> {
    let delta = noise.standard_normal(&latent.mu.shape())?;
    sample_with(latent, delta)
}

/// `g = -ln(-ln u)` for already-clamped uniforms.
pub fn gumbel_from_uniform(u: &Tensor) -> Tensor {
    u.map(|x| -(-x.ln()).ln())
}

/// Presence probability: class 0 of `softmax([s + g₀, g₁] / τ)`, i.e.
/// `sigmoid((s + g₀ - g₁) / τ)`. Without noise this is `sigmoid(s / τ)`.
pub fn presence_from_scores<'t>(scores: Var<'t>, gumbel: Option<(Tensor, Tensor)>, tau: f64) -> Result<Var<'t>> {
    if !(tau > 0.0) {
        return Err(Error::Parameter(format!("Gumbel temperature must be positive, got {tau}")));
    }
    let logits = match gumbel {
        None => scores,
        Some((g0, g1)) => {
            let diff = Tensor::new(g0.shape().to_vec(), g0.data().iter().zip(g1.data()).map(|(a, b)| a - b).collect())?;
            scores.add(scores.tape().constant(diff))?
        }
    };
    Ok(logits.scale(1.0 / tau).sigmoid())
}

/// Thresholds at 0.5 (ties count as present) and attaches every empty row
/// to its highest-probability column (lowest index on ties).
pub fn binarize_with_repair(presence: &Tensor) -> Tensor {
    let (rows, cols) = (presence.rows(), presence.cols());
    let mut hard = presence.map(|p| if p >= 0.5 { 1.0 } else { 0.0 });
    for i in 0..rows {
        let row = &mut hard.data_mut()[i * cols..(i + 1) * cols];
        if row.iter().all(|&v| v == 0.0) {
            let probs = presence.row(i);
            let best = (0..cols).fold(0, |b, j| if probs[j] > probs[b] { j } else { b });
            row[best] = 1.0;
        }
    }
    hard
}

/// Decodes node and hyperedge latents into a new incidence matrix.
///
/// Returns `(incidence, presence, hard_incidence)`.
pub fn decode_incidence<'t>(
    m_nodes: Var<'t>,
    m_edges: Var<'t>,
    tau: f64,
    noise: &mut Noise,
    mode: IncidenceMode,
) -> Result<(Var<'t>, Var<'t>, Option<Tensor>)> {
    if !(tau > 0.0) {
        return Err(Error::Parameter(format!("Gumbel temperature must be positive, got {tau}")));
    }
    let scores = m_nodes.matmul(m_edges.t()?)?;
    let shape = scores.shape();
    let gumbel = match (noise.clamped_uniform(&shape)?, noise.clamped_uniform(&shape)?) {
        (Some(u0), Some(u1)) => Some((gumbel_from_uniform(&u0), gumbel_from_uniform(&u1))),
        _ => None,
    };
    let presence = presence_from_scores(scores, gumbel, tau)?;
    match mode {
        IncidenceMode::Soft => Ok((presence, presence, None)),
        IncidenceMode::Hard => {
            let hard = binarize_with_repair(&presence.value_ref());
            let incidence = presence.straight_through(hard.clone())?;
            Ok((incidence, presence, Some(hard)))
        }
    }
}

/// Mean over elements of `½(σ² + μ² − 1 − ln σ²)`.
pub fn kl_to_standard_normal<'t>(latent: Latent<'t>) -> Result<Var<'t>> {
    let Latent { mu, sigma } = latent;
    let var = sigma.mul(sigma)?;
    let log_var = sigma.clamp(SIGMA_FLOOR, f64::INFINITY).log()?.scale(2.0);
    let one = mu.tape().scalar(1.0);
    Ok(var.add(mu.mul(mu)?)?.sub(one)?.sub(log_var)?.mean().scale(0.5))
}

/// Mean binary cross-entropy of `presence` against the 0/1 `target`.
pub fn incidence_bce<'t>(presence: Var<'t>, target: &Tensor) -> Result<Var<'t>> {
    if presence.shape() != target.shape() {
        return Err(Error::shape("incidence bce", &presence.shape(), target.shape()));
    }
    let tape = presence.tape();
    let p = presence.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    let t = tape.constant(target.clone());
    let one = tape.scalar(1.0);
    let pos = t.mul(p.log()?)?;
    let neg = one.sub(t)?.mul(one.sub(p)?.log()?)?;
    Ok(pos.add(neg)?.mean().neg())
}

/// `L_g = KL(nodes) + KL(edges) + BCE(H_orig, presence)`.
pub fn vhgae_loss<'t>(
    nodes: Latent<'t>,
    edges: Latent<'t>,
    presence: Var<'t>,
    h_orig: &Tensor,
) -> Result<VhgaeLoss<'t>> {
    let kl_nodes = kl_to_standard_normal(nodes)?;
    let kl_edges = kl_to_standard_normal(edges)?;
    let bce = incidence_bce(presence, h_orig)?;
    let total = kl_nodes.add(kl_edges)?.add(bce)?;
    Ok(VhgaeLoss { kl_nodes, kl_edges, bce, total })
}

/// Full autoencoder pass over node features `x` and the initial incidence `h0`.
pub fn vhgae_forward<'t>(
    params: &VhgaeParams,
    bound: &Bound<'t>,
    x: Var<'t>,
    h0: &Tensor,
    tau: f64,
    mode: IncidenceMode,
    noise: &mut Noise,
) -> Result<VhgaeOutput<'t>> {
    let h0_var = bound.tape().constant(h0.clone());
    let (v, e) = vhgae_encode(&params.conv, bound, x, h0_var)?;
    let nodes = latent_params(&params.node_head, bound, v)?;
    let edges = latent_params(&params.edge_head, bound, e)?;
    let m_nodes = sample_latent(nodes, noise)?;
    let m_edges = sample_latent(edges, noise)?;
    let (incidence, presence, hard_incidence) = decode_incidence(m_nodes, m_edges, tau, noise, mode)?;
    let loss = vhgae_loss(nodes, edges, presence, h0)?;
    Ok(VhgaeOutput { incidence, hard_incidence, presence, nodes, edges, loss })
}

/// Closed-form probability that a hard decode marks a pair with score `s` present.
///
/// The Gumbel-max argument gives `P(s + g₀ > g₁) = sigmoid(s)`, independent of `τ`.
pub fn presence_marginal(score: f64) -> f64 {
    sigmoid(score)
}
