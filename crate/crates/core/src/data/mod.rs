//! Dialogues, the JSON dataset format, and the synthetic generator.

mod file;
mod synthetic;

pub use file::{load_dataset, parse_dataset, save_dataset, to_json};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Raw feature dimensions of the textual, acoustic and visual modalities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityDims {
    pub t: usize,
    pub a: usize,
    pub v: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub v: Vec<f64>,
    pub speaker: usize,
    pub label: usize,
}

/// One conversation: precomputed per-utterance modality features, speakers and labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DialogueFeatures {
    pub utterances: Vec<Utterance>,
}

impl DialogueFeatures {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn speakers(&self) -> Vec<usize> {
        self.utterances.iter().map(|u| u.speaker).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.utterances.iter().map(|u| u.label).collect()
    }

    fn stack(&self, pick: impl Fn(&Utterance) -> &[f64]) -> Result<Tensor> {
        if self.utterances.is_empty() {
            return Err(Error::EmptyDialogue);
        }
        let rows: Vec<Vec<f64>> = self.utterances.iter().map(|u| pick(u).to_vec()).collect();
        Tensor::from_rows(&rows)
    }

    /// Textual features as an `N × d_t` matrix.
    pub fn text(&self) -> Result<Tensor> {
        self.stack(|u| &u.t)
    }

    pub fn audio(&self) -> Result<Tensor> {
        self.stack(|u| &u.a)
    }

    pub fn visual(&self) -> Result<Tensor> {
        self.stack(|u| &u.v)
    }
}

/// A collection of dialogues sharing label space, speaker space and feature dims.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub classes: usize,
    pub num_speakers: usize,
    pub dims: ModalityDims,
    pub dialogues: Vec<DialogueFeatures>,
}

impl Dataset {
    pub fn num_utterances(&self) -> usize {
        self.dialogues.iter().map(DialogueFeatures::len).sum()
    }

    /// Checks every declared invariant, returning a message naming the first offender.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.classes == 0 {
            return Err("\"classes\" must be at least 1".into());
        }
        if self.num_speakers == 0 {
            return Err("\"num_speakers\" must be at least 1".into());
        }
        let d = self.dims;
        if d.t == 0 || d.a == 0 || d.v == 0 {
            return Err(format!("feature dims must be positive, got {d:?}"));
        }
        for (di, dlg) in self.dialogues.iter().enumerate() {
            if dlg.utterances.is_empty() {
                return Err(format!("dialogue {di} has no utterances"));
            }
            for (ui, u) in dlg.utterances.iter().enumerate() {
                let at = || format!("dialogue {di}, utterance {ui}");
                for (name, got, want) in [("t", u.t.len(), d.t), ("a", u.a.len(), d.a), ("v", u.v.len(), d.v)] {
                    if got != want {
                        return Err(format!("{}: \"{name}\" has length {got}, expected {want}", at()));
                    }
                }
                if let Some(x) = u.t.iter().chain(&u.a).chain(&u.v).find(|x| !x.is_finite()) {
                    return Err(format!("{}: non-finite feature {x}", at()));
                }
                if u.label >= self.classes {
                    return Err(format!("{}: label {} out of range (classes = {})", at(), u.label, self.classes));
                }
                if u.speaker >= self.num_speakers {
                    return Err(format!(
                        "{}: speaker {} out of range (num_speakers = {})",
                        at(),
                        u.speaker,
                        self.num_speakers
                    ));
                }
            }
        }
        Ok(())
    }

    /// Splits off the trailing `fraction` of dialogues as a held-out set.
    pub fn split_tail(&self, fraction: f64) -> (Dataset, Dataset) {
        let n = self.dialogues.len();
        let held = ((n as f64) * fraction).round() as usize;
        let held = held.min(n.saturating_sub(1));
        let cut = n - held;
        let with = |dialogues: Vec<DialogueFeatures>| Dataset { dialogues, ..self.clone_header() };
        (with(self.dialogues[..cut].to_vec()), with(self.dialogues[cut..].to_vec()))
    }

    fn clone_header(&self) -> Dataset {
        Dataset { classes: self.classes, num_speakers: self.num_speakers, dims: self.dims, dialogues: Vec::new() }
    }
}
