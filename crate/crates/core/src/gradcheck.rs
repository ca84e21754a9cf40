//! Finite-difference check of the full training objective.
//!
//! All stochastic draws of one analytic pass are recorded and replayed for
//! every perturbed evaluation, so the objective is a deterministic function
//! of the parameters. Incidence is decoded in soft mode: the hard forward
//! pass is piecewise constant, so central differences cannot see the
//! straight-through path.

use std::fmt;

use crate::autodiff::Tape;
use crate::classifier::LossWeights;
use crate::config::RunConfig;
use crate::data::{generate_synthetic, Dataset, DialogueFeatures, ModalityDims, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::HauclModel;
use crate::noise::{Noise, NoiseLog};
use crate::params::ParamStore;
use crate::train::batch_loss;
use crate::vhgae::IncidenceMode;

pub const STEP: f64 = 1e-4;
pub const TOLERANCE: f64 = 1e-3;

/// `|a − n| / max(1, |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    /// Flat index of the worst entry.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub scalars: usize,
    pub corrupt_op: Option<String>,
}

impl GradCheckReport {
    pub fn worst(&self) -> &ParamCheck {
        self.params.iter().fold(&self.params[0], |w, p| if p.max_rel_error > w.max_rel_error { p } else { w })
    }

    pub fn max_rel_error(&self) -> f64 {
        self.worst().max_rel_error
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < TOLERANCE
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.worst();
        write!(
            f,
            "{} max_rel_err={:.3e} worst={}[{}] analytic={:.6e} numeric={:.6e} scalars={}",
            if self.passed() { "PASS" } else { "FAIL" },
            w.max_rel_error,
            w.name,
            w.worst_index,
            w.analytic,
            w.numeric,
            self.scalars
        )?;
        if let Some(op) = &self.corrupt_op {
            write!(f, " corrupted_op={op}")?;
        }
        Ok(())
    }
}

/// Objective inputs shared by the analytic and numeric passes.
#[derive(Clone, Copy, Debug)]
pub struct Objective {
    pub tau_cl: f64,
    pub weights: LossWeights,
    pub seed: u64,
}

fn loss_value(
    model: &HauclModel,
    params: &ParamStore,
    batch: &[&DialogueFeatures],
    obj: &Objective,
    log: &NoiseLog,
) -> Result<f64> {
    let tape = Tape::new();
    let bound = params.bind(&tape);
    let mut noise = Noise::replay(log.clone());
    Ok(batch_loss(model, &bound, batch, &mut noise, obj.tau_cl, &obj.weights)?.total.item())
}

/// Compares backprop against central differences for every parameter entry.
///
/// `corrupt_op` scales that op's backward pass, as a negative control.
pub fn gradcheck(
    model: &HauclModel,
    dialogues: &[DialogueFeatures],
    obj: &Objective,
    corrupt_op: Option<&str>,
) -> Result<GradCheckReport> {
    let mut model = model.clone();
    model.config.incidence = IncidenceMode::Soft;
    let batch: Vec<&DialogueFeatures> = dialogues.iter().collect();

    let tape = match corrupt_op {
        Some(op) => Tape::with_corrupted_backward(op),
        None => Tape::new(),
    };
    let bound = model.params.bind(&tape);
    let mut noise = Noise::sampling(obj.seed).recording();
    let loss = batch_loss(&model, &bound, &batch, &mut noise, obj.tau_cl, &obj.weights)?.total;
    let analytic = bound.grads(&tape.backward(loss)?);
    let log = noise.take_log().expect("recording was enabled");

    let mut params = model.params.clone();
    let mut checks = Vec::with_capacity(params.len());
    let ids: Vec<_> = params.ids().collect();
    for (k, id) in ids.into_iter().enumerate() {
        let mut check = ParamCheck {
            name: params.name(id).to_string(),
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in 0..params.get(id).numel() {
            let orig = params.get(id).data()[i];
            params.get_mut(id).data_mut()[i] = orig + STEP;
            let plus = loss_value(&model, &params, &batch, obj, &log)?;
            params.get_mut(id).data_mut()[i] = orig - STEP;
            let minus = loss_value(&model, &params, &batch, obj, &log)?;
            params.get_mut(id).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * STEP);
            let a = analytic[k].data()[i];
            let err = relative_error(a, numeric);
            if !err.is_finite() {
                return Err(Error::Domain {
                    op: "gradcheck",
                    msg: format!("non-finite gradient for {}[{i}]", check.name),
                });
            }
            if err > check.max_rel_error || i == 0 {
                check.max_rel_error = err;
                check.worst_index = i;
                check.analytic = a;
                check.numeric = numeric;
            }
        }
        checks.push(check);
    }
    Ok(GradCheckReport { scalars: params.num_scalars(), params: checks, corrupt_op: corrupt_op.map(str::to_string) })
}

/// Largest node width and dialogue length accepted by [`tiny_problem`].
pub const MAX_TINY_D: usize = 8;
pub const MAX_TINY_LEN: usize = 4;

/// A small fixed problem for the full check: dialogues of up to four
/// utterances, three classes, two speakers, and the model widths of `run`.
pub fn tiny_problem(run: &RunConfig) -> Result<(HauclModel, Vec<DialogueFeatures>)> {
    run.validate()?;
    if run.d > MAX_TINY_D || run.d_z > MAX_TINY_D {
        return Err(Error::Config(format!(
            "gradcheck needs d and d_z at most {MAX_TINY_D}, got d={} d_z={}",
            run.d, run.d_z
        )));
    }
    let dims = ModalityDims { t: 5, a: 4, v: 3 };
    let data = generate_synthetic(&SyntheticSpec {
        classes: 3,
        num_speakers: 2,
        num_dialogues: 2,
        len_range: (MAX_TINY_LEN - 1, MAX_TINY_LEN),
        dims,
        seed: run.seed,
        ..SyntheticSpec::default()
    })?;
    let config = run.model_config(&Dataset { classes: 3, num_speakers: 2, dims, dialogues: Vec::new() });
    Ok((HauclModel::new(config, run.seed)?, data.dialogues))
}

/// [`gradcheck`] on [`tiny_problem`] with the objective settings of `run`.
pub fn gradcheck_tiny(run: &RunConfig, corrupt_op: Option<&str>) -> Result<GradCheckReport> {
    let (model, dialogues) = tiny_problem(run)?;
    let obj = Objective { tau_cl: run.tau_cl, weights: run.weights(), seed: run.seed };
    gradcheck(&model, &dialogues, &obj, corrupt_op)
}
