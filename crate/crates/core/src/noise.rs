//! Seeded randomness, split per purpose, with record/replay of stochastic draws.
//!
//! All randomness descends from one root seed. Each purpose (parameter
//! init, dropout, latent sampling, Gumbel noise, data generation) gets its
//! own ChaCha stream so that changing how much one consumer draws never
//! shifts another.
//!
//! A [`Noise`] source feeds the model's stochastic layers. It can sample
//! live, replay a previously recorded sequence of draws (used to freeze all
//! randomness for finite-difference checks), or be switched off for
//! deterministic evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::autodiff::dropout_mask;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Uniform draws feeding the Gumbel transform are kept inside `[U_CLAMP, 1 - U_CLAMP]`.
pub const U_CLAMP: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Init = 0,
    Dropout = 1,
    Latent = 2,
    Gumbel = 3,
    Data = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Recorded draws, in the order they were requested.
#[derive(Clone, Debug, Default)]
pub struct NoiseLog {
    draws: Vec<Option<Tensor>>,
}

impl NoiseLog {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

#[derive(Debug)]
enum Mode {
    Sample { dropout: ChaCha8Rng, latent: ChaCha8Rng, gumbel: ChaCha8Rng },
    Replay { log: NoiseLog, cursor: usize },
    Off,
}

#[derive(Debug)]
pub struct Noise {
    mode: Mode,
    record: Option<NoiseLog>,
}

impl Noise {
    /// Live sampling from the dropout/latent/Gumbel streams of `seed`.
    pub fn sampling(seed: u64) -> Self {
        Noise {
            mode: Mode::Sample {
                dropout: stream_rng(seed, Stream::Dropout),
                latent: stream_rng(seed, Stream::Latent),
                gumbel: stream_rng(seed, Stream::Gumbel),
            },
            record: None,
        }
    }

    /// Evaluation mode: no dropout, zero latent noise, no Gumbel perturbation.
    pub fn off() -> Self {
        Noise { mode: Mode::Off, record: None }
    }

    pub fn replay(log: NoiseLog) -> Self {
        Noise { mode: Mode::Replay { log, cursor: 0 }, record: None }
    }

    /// Also keep a copy of every draw, retrievable with [`Noise::take_log`].
    pub fn recording(mut self) -> Self {
        self.record = Some(NoiseLog::default());
        self
    }

    pub fn take_log(&mut self) -> Option<NoiseLog> {
        self.record.take()
    }

    pub fn is_off(&self) -> bool {
        matches!(self.mode, Mode::Off)
    }

    fn draw(
        &mut self,
        shape: &[usize],
        sample: impl FnOnce(&mut Mode) -> Result<Option<Tensor>>,
    ) -> Result<Option<Tensor>> {
        let out = match &mut self.mode {
            Mode::Off => None,
            Mode::Replay { log, cursor } => {
                let d = log
                    .draws
                    .get(*cursor)
                    .cloned()
                    .ok_or_else(|| Error::Contract(format!("noise replay exhausted after {cursor} draws")))?;
                *cursor += 1;
                if let Some(t) = &d {
                    if t.shape() != shape {
                        return Err(Error::shape("noise replay", t.shape(), shape));
                    }
                }
                d
            }
            mode @ Mode::Sample { .. } => sample(mode)?,
        };
        if let Some(rec) = &mut self.record {
            rec.draws.push(out.clone());
        }
        Ok(out)
    }

    /// Inverted-dropout mask, or `None` when dropout is inactive.
    pub fn dropout_mask(&mut self, shape: &[usize], p: f64) -> Result<Option<Tensor>> {
        if p == 0.0 {
            return Ok(None);
        }
        self.draw(shape, |mode| match mode {
            Mode::Sample { dropout, .. } => dropout_mask(shape, p, dropout).map(Some),
            _ => unreachable!(),
        })
    }

    /// Standard-normal draws; `None` means zero noise.
    pub fn standard_normal(&mut self, shape: &[usize]) -> Result<Option<Tensor>> {
        self.draw(shape, |mode| match mode {
            Mode::Sample { latent, .. } => {
                let n = shape.iter().product();
                let data = (0..n).map(|_| latent.sample(StandardNormal)).collect();
                Tensor::new(shape.to_vec(), data).map(Some)
            }
            _ => unreachable!(),
        })
    }

    /// Uniform draws clamped into `[U_CLAMP, 1 - U_CLAMP]`; `None` means no Gumbel noise.
    pub fn clamped_uniform(&mut self, shape: &[usize]) -> Result<Option<Tensor>> {
        self.draw(shape, |mode| match mode {
            Mode::Sample { gumbel, .. } => {
                let n = shape.iter().product();
                let data = (0..n).map(|_| gumbel.random::<f64>().clamp(U_CLAMP, 1.0 - U_CLAMP)).collect();
                Tensor::new(shape.to_vec(), data).map(Some)
            }
            _ => unreachable!(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_reproduces_recorded_draws() {
        let mut live = Noise::sampling(11).recording();
        let a = live.standard_normal(&[2, 3]).unwrap().unwrap();
        let b = live.clamped_uniform(&[4]).unwrap().unwrap();
        let m = live.dropout_mask(&[3], 0.5).unwrap().unwrap();
        let log = live.take_log().unwrap();
        assert_eq!(log.len(), 3);

        let mut again = Noise::replay(log);
        assert!(again.standard_normal(&[2, 3]).unwrap().unwrap().bit_eq(&a));
        assert!(again.clamped_uniform(&[4]).unwrap().unwrap().bit_eq(&b));
        assert!(again.dropout_mask(&[3], 0.5).unwrap().unwrap().bit_eq(&m));
        assert!(again.standard_normal(&[1]).is_err());
    }

    #[test]
    fn replay_rejects_shape_drift() {
        let mut live = Noise::sampling(1).recording();
        live.standard_normal(&[2]).unwrap();
        let mut again = Noise::replay(live.take_log().unwrap());
        assert!(again.standard_normal(&[3]).is_err());
    }

    #[test]
    fn off_mode_draws_nothing() {
        let mut off = Noise::off();
        assert!(off.standard_normal(&[2]).unwrap().is_none());
        assert!(off.clamped_uniform(&[2]).unwrap().is_none());
        assert!(off.dropout_mask(&[2], 0.3).unwrap().is_none());
    }

    #[test]
    fn streams_are_independent() {
        let mut a = stream_rng(5, Stream::Init);
        let mut b = stream_rng(5, Stream::Data);
        let x: u64 = a.random();
        let y: u64 = b.random();
        assert_ne!(x, y);
    }
}
