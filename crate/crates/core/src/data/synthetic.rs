//! Synthetic dialogues with contextual label inertia and speaker offsets.
//!
//! Each class owns one mean vector per modality, drawn once per dataset from
//! `N(0, I)`. Each speaker owns one offset vector per modality. An
//! utterance's features are `class mean + speaker offset + N(0, σ_obs² I)`.
//! Labels follow a Markov chain that keeps the previous label with
//! probability `ρ` and otherwise resamples uniformly. Speakers take turns in
//! order `0, 1, …, S-1, 0, …`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{Dataset, DialogueFeatures, ModalityDims, Utterance};
use crate::error::{Error, Result};
use crate::noise::{stream_rng, Stream};

/// Standard deviation of per-utterance observation noise.
pub const OBSERVATION_NOISE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub num_speakers: usize,
    pub num_dialogues: usize,
    /// Inclusive range of utterances per dialogue.
    pub len_range: (usize, usize),
    pub dims: ModalityDims,
    /// Probability of repeating the previous label.
    pub inertia: f64,
    /// Standard deviation of the per-speaker offsets.
    pub speaker_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 6,
            num_speakers: 2,
            num_dialogues: 20,
            len_range: (8, 16),
            dims: ModalityDims { t: 16, a: 12, v: 12 },
            inertia: 0.7,
            speaker_scale: 1.0,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.classes < 2 {
            return bad(format!("classes must be >= 2, got {}", self.classes));
        }
        if self.num_speakers < 2 {
            return bad(format!("num_speakers must be >= 2, got {}", self.num_speakers));
        }
        if !(0.0..=1.0).contains(&self.inertia) {
            return bad(format!("inertia must lie in [0, 1], got {}", self.inertia));
        }
        let (lo, hi) = self.len_range;
        if lo == 0 || lo > hi {
            return bad(format!("invalid length range [{lo}, {hi}]"));
        }
        if self.dims.t == 0 || self.dims.a == 0 || self.dims.v == 0 {
            return bad(format!("feature dims must be positive, got {:?}", self.dims));
        }
        if !(self.speaker_scale >= 0.0) {
            return bad(format!("speaker scale must be >= 0, got {}", self.speaker_scale));
        }
        Ok(())
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

/// Per-modality vectors for a (class or speaker) prototype.
struct Prototype {
    t: Vec<f64>,
    a: Vec<f64>,
    v: Vec<f64>,
}

impl Prototype {
    fn draw(rng: &mut ChaCha8Rng, dims: ModalityDims, scale: f64) -> Self {
        Prototype {
            t: gaussian_vec(rng, dims.t, scale),
            a: gaussian_vec(rng, dims.a, scale),
            v: gaussian_vec(rng, dims.v, scale),
        }
    }
}

fn observe(rng: &mut ChaCha8Rng, class: &[f64], speaker: &[f64]) -> Vec<f64> {
    let noise = Normal::new(0.0, OBSERVATION_NOISE).expect("positive sigma");
    class.iter().zip(speaker).map(|(c, s)| c + s + noise.sample(rng)).collect()
}

/// Generates a dataset fully determined by `spec` (including its seed).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.check()?;
    let mut rng = stream_rng(spec.seed, Stream::Data);
    let class_means: Vec<Prototype> = (0..spec.classes).map(|_| Prototype::draw(&mut rng, spec.dims, 1.0)).collect();
    let speaker_offsets: Vec<Prototype> =
        (0..spec.num_speakers).map(|_| Prototype::draw(&mut rng, spec.dims, spec.speaker_scale)).collect();

    let (lo, hi) = spec.len_range;
    let dialogues = (0..spec.num_dialogues)
        .map(|_| {
            let len = rng.random_range(lo..=hi);
            let mut label = rng.random_range(0..spec.classes);
            let utterances = (0..len)
                .map(|i| {
                    if i > 0 && rng.random::<f64>() >= spec.inertia {
                        label = rng.random_range(0..spec.classes);
                    }
                    let speaker = i % spec.num_speakers;
                    let (c, s) = (&class_means[label], &speaker_offsets[speaker]);
                    Utterance {
                        t: observe(&mut rng, &c.t, &s.t),
                        a: observe(&mut rng, &c.a, &s.a),
                        v: observe(&mut rng, &c.v, &s.v),
                        speaker,
                        label,
                    }
                })
                .collect();
            DialogueFeatures { utterances }
        })
        .collect();

    Ok(Dataset { classes: spec.classes, num_speakers: spec.num_speakers, dims: spec.dims, dialogues })
}
