//! Unimodal encoders and speaker embedding.
//!
//! Acoustic and visual features go through one affine map each. Textual
//! features are contextualized by a single-layer bidirectional GRU over the
//! dialogue and then mapped to `d`. A learned speaker embedding is added to
//! every modality node of an utterance.
//!
//! All maps use the row-vector convention `y = x · W + b` with `W` shaped
//! `[fan_in, fan_out]`.

use rand::Rng;

use crate::autodiff::Var;
use crate::data::{DialogueFeatures, ModalityDims};
use crate::error::{Error, Result};
use crate::params::{affine, Bound, ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EncoderConfig {
    pub dims: ModalityDims,
    pub num_speakers: usize,
    /// Unified node dimension.
    pub d: usize,
    /// Hidden size of each GRU direction.
    pub gru_hidden: usize,
}

/// Parameters of one GRU direction (PyTorch gate layout: reset, update, candidate).
#[derive(Clone, Debug)]
pub struct GruParams {
    pub w_ir: ParamId,
    pub w_iz: ParamId,
    pub w_in: ParamId,
    pub w_hr: ParamId,
    pub w_hz: ParamId,
    pub w_hn: ParamId,
    pub b_ir: ParamId,
    pub b_iz: ParamId,
    pub b_in: ParamId,
    pub b_hr: ParamId,
    pub b_hz: ParamId,
    pub b_hn: ParamId,
}

impl GruParams {
    fn init<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        // PyTorch draws every GRU tensor from ±1/sqrt(hidden).
        let mut w =
            |name: &str, rows: usize| store.add_uniform(format!("{prefix}.{name}"), &[rows, hidden], hidden, rng);
        let w_ir = w("w_ir", input);
        let w_iz = w("w_iz", input);
        let w_in = w("w_in", input);
        let w_hr = w("w_hr", hidden);
        let w_hz = w("w_hz", hidden);
        let w_hn = w("w_hn", hidden);
        let mut b = |name: &str| store.add_uniform(format!("{prefix}.{name}"), &[hidden], hidden, rng);
        GruParams {
            w_ir,
            w_iz,
            w_in,
            w_hr,
            w_hz,
            w_hn,
            b_ir: b("b_ir"),
            b_iz: b("b_iz"),
            b_in: b("b_in"),
            b_hr: b("b_hr"),
            b_hz: b("b_hz"),
            b_hn: b("b_hn"),
        }
    }

    /// Runs the recurrence over the rows of `x` (`[N, input]`), in reverse
    /// order if `reverse`. Returns hidden states `[N, hidden]` aligned with
    /// the input rows.
    fn run<'t>(&self, bound: &Bound<'t>, x: Var<'t>, hidden: usize, reverse: bool) -> Result<Var<'t>> {
        let n = x.shape()[0];
        let tape = x.tape();
        let p = |id| bound.var(id);
        // Input projections for all steps at once.
        let xr = affine(x, p(self.w_ir), p(self.b_ir))?;
        let xz = affine(x, p(self.w_iz), p(self.b_iz))?;
        let xn = affine(x, p(self.w_in), p(self.b_in))?;

        let mut h = tape.constant(Tensor::zeros(&[1, hidden]));
        let mut states = vec![None; n];
        let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
        for &t in &order {
            let r = xr.select_rows(&[t])?.add(affine(h, p(self.w_hr), p(self.b_hr))?)?.sigmoid();
            let z = xz.select_rows(&[t])?.add(affine(h, p(self.w_hz), p(self.b_hz))?)?.sigmoid();
            let cand = xn.select_rows(&[t])?.add(r.mul(affine(h, p(self.w_hn), p(self.b_hn))?)?)?.tanh();
            // h' = (1 - z) * cand + z * h = cand + z * (h - cand)
            h = cand.add(z.mul(h.sub(cand)?)?)?;
            states[t] = Some(h);
        }
        let states: Vec<Var<'t>> = states.into_iter().map(|s| s.expect("every step visited")).collect();
        tape.concat(&states, 0)
    }
}

#[derive(Clone, Debug)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub w_a: ParamId,
    pub b_a: ParamId,
    pub w_v: ParamId,
    pub b_v: ParamId,
    pub gru_fwd: GruParams,
    pub gru_bwd: GruParams,
    pub w_t: ParamId,
    pub b_t: ParamId,
    pub w_s: ParamId,
    pub b_s: ParamId,
}

impl EncoderParams {
    pub fn init<R: Rng + ?Sized>(store: &mut ParamStore, config: EncoderConfig, rng: &mut R) -> Self {
        let EncoderConfig { dims, num_speakers, d, gru_hidden } = config;
        EncoderParams {
            config,
            w_a: store.add_weight("enc.w_a", dims.a, d, rng),
            b_a: store.add_bias("enc.b_a", dims.a, d, rng),
            w_v: store.add_weight("enc.w_v", dims.v, d, rng),
            b_v: store.add_bias("enc.b_v", dims.v, d, rng),
            gru_fwd: GruParams::init(store, "enc.gru_fwd", dims.t, gru_hidden, rng),
            gru_bwd: GruParams::init(store, "enc.gru_bwd", dims.t, gru_hidden, rng),
            w_t: store.add_weight("enc.w_t", 2 * gru_hidden, d, rng),
            b_t: store.add_bias("enc.b_t", 2 * gru_hidden, d, rng),
            w_s: store.add_weight("enc.w_s", num_speakers, d, rng),
            b_s: store.add_bias("enc.b_s", num_speakers, d, rng),
        }
    }
}

fn check_width(name: &'static str, m: &Tensor, want: usize) -> Result<()> {
    if m.cols() != want {
        return Err(Error::shape(name, m.shape(), &[m.rows(), want]));
    }
    Ok(())
}

/// Encodes a dialogue into `U`, a `[3N, d]` matrix with rows ordered
/// `[textual, acoustic, visual]`.
pub fn encode_modalities<'t>(dlg: &DialogueFeatures, p: &EncoderParams, bound: &Bound<'t>) -> Result<Var<'t>> {
    let tape = bound.tape();
    let dims = p.config.dims;
    let (text, audio, visual) = (dlg.text()?, dlg.audio()?, dlg.visual()?);
    check_width("encode text", &text, dims.t)?;
    check_width("encode audio", &audio, dims.a)?;
    check_width("encode visual", &visual, dims.v)?;

    let u_a = affine(tape.constant(audio), bound.var(p.w_a), bound.var(p.b_a))?;
    let u_v = affine(tape.constant(visual), bound.var(p.w_v), bound.var(p.b_v))?;

    let text = tape.constant(text);
    let h = p.config.gru_hidden;
    let fwd = p.gru_fwd.run(bound, text, h, false)?;
    let bwd = p.gru_bwd.run(bound, text, h, true)?;
    let context = tape.concat(&[fwd, bwd], 1)?;
    let u_t = affine(context, bound.var(p.w_t), bound.var(p.b_t))?;

    tape.concat(&[u_t, u_a, u_v], 0)
}

/// `S_i = onehot(s_i) · W_s + b_s`, shape `[N, d]`.
pub fn speaker_embeddings<'t>(speakers: &[usize], p: &EncoderParams, bound: &Bound<'t>) -> Result<Var<'t>> {
    let tape = bound.tape();
    let s = p.config.num_speakers;
    if speakers.is_empty() {
        return Err(Error::EmptyDialogue);
    }
    let mut onehot = Tensor::zeros(&[speakers.len(), s]);
    for (i, &spk) in speakers.iter().enumerate() {
        if spk >= s {
            return Err(Error::Index { what: "speaker", index: spk, bound: s });
        }
        onehot.data_mut()[i * s + spk] = 1.0;
    }
    affine(tape.constant(onehot), bound.var(p.w_s), bound.var(p.b_s))
}

/// Adds each utterance's speaker embedding to its three modality rows of `u`.
/// With `enabled == false` (the no-speaker-embedding ablation) returns `u`.
pub fn embed_and_fuse_speakers<'t>(
    u: Var<'t>,
    speakers: &[usize],
    p: &EncoderParams,
    bound: &Bound<'t>,
    enabled: bool,
) -> Result<Var<'t>> {
    let n = speakers.len();
    if u.shape()[0] != 3 * n {
        return Err(Error::shape("speaker fusion", &u.shape(), &[3 * n]));
    }
    let s = speaker_embeddings(speakers, p, bound)?;
    if !enabled {
        return Ok(u);
    }
    let tape = u.tape();
    u.add(tape.concat(&[s, s, s], 0)?)
}
