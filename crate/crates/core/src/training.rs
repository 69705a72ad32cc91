//! Combined regression + pairwise ranking loss, optimizers, and the
//! chronological training loop with best-validation checkpointing.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureTensor;
use crate::mixer::{GradientSet, MixerError, MixerModel, ReturnScale};

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_EPOCHS: usize = 100;
/// Losses above this magnitude abort training.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("loss inputs differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite loss input")]
    NonFinite,
    #[error("training diverged at epoch {epoch}, step {step}: loss {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },
    #[error("no training windows")]
    EmptyTraining,
    #[error("no validation windows")]
    EmptyValidation,
    #[error("run has no checkpoints")]
    NoCheckpoints,
    #[error("protocol: {0}")]
    Protocol(&'static str),
    #[error(transparent)]
    Model(#[from] MixerError),
}

/// Mean squared error plus `alpha` times the hinge penalty summed over all
/// ordered pairs `(i, j)`: `max(0, -(p_i - p_j)(r_i - r_j))`.
///
/// Returns the loss and its gradient with respect to `predicted`. The hinge
/// subgradient at zero is taken as zero.
pub fn loss(predicted: &[f64], actual: &[f64], alpha: f64) -> Result<(f64, Vec<f64>), TrainError> {
    let n = predicted.len();
    if actual.len() != n {
        return Err(TrainError::LengthMismatch(n, actual.len()));
    }
    if !alpha.is_finite() || predicted.iter().chain(actual).any(|v| !v.is_finite()) {
        return Err(TrainError::NonFinite);
    }
    if n == 0 {
        return Ok((0.0, Vec::new()));
    }
    let inv_n = 1.0 / n as f64;
    let mut grad = vec![0.0; n];
    let mut mse = 0.0;
    for i in 0..n {
        let diff = predicted[i] - actual[i];
        mse += diff * diff;
        grad[i] = 2.0 * diff * inv_n;
    }
    mse *= inv_n;

    // (i, j) and (j, i) carry the same hinge value; visit each pair once.
    let mut rank = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dr = actual[i] - actual[j];
            let v = -(predicted[i] - predicted[j]) * dr;
            if v > 0.0 {
                rank += v;
                grad[i] -= 2.0 * alpha * dr;
                grad[j] += 2.0 * alpha * dr;
            }
        }
    }
    Ok((mse + alpha * 2.0 * rank, grad))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub epochs: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            epochs: DEFAULT_EPOCHS,
            learning_rate: DEFAULT_LEARNING_RATE,
            alpha: DEFAULT_ALPHA,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl Protocol {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Protocol("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(TrainError::Protocol("learning rate must be positive"));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(TrainError::Protocol("alpha must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Moment accumulators for adaptive-moment descent.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl OptimizerState {
    pub fn new(protocol: &Protocol, n_params: usize) -> Self {
        OptimizerState {
            kind: protocol.optimizer,
            learning_rate: protocol.learning_rate,
            beta1: protocol.beta1,
            beta2: protocol.beta2,
            epsilon: protocol.epsilon,
            step: 0,
            first: vec![0.0; n_params],
            second: vec![0.0; n_params],
        }
    }

    pub fn apply(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= self.learning_rate * g;
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let c1 = 1.0 - libm::pow(self.beta1, t as f64);
                let c2 = 1.0 - libm::pow(self.beta2, t as f64);
                for k in 0..params.len() {
                    let g = grads[k];
                    self.first[k] = self.beta1 * self.first[k] + (1.0 - self.beta1) * g;
                    self.second[k] = self.beta2 * self.second[k] + (1.0 - self.beta2) * g * g;
                    let m_hat = self.first[k] / c1;
                    let v_hat = self.second[k] / c2;
                    params[k] -= self.learning_rate * m_hat / (libm::sqrt(v_hat) + self.epsilon);
                }
            }
        }
    }
}

/// One training example: a window, its return scale and the realized returns.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: FeatureTensor,
    pub scale: ReturnScale,
    pub target: Vec<f64>,
}

/// Chronologically ordered examples, produced on demand.
pub trait SampleSource {
    type Error: From<TrainError>;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn sample(&self, index: usize) -> Result<Sample, Self::Error>;
}

impl SampleSource for [Sample] {
    type Error = TrainError;
    fn len(&self) -> usize {
        <[Sample]>::len(self)
    }
    fn sample(&self, index: usize) -> Result<Sample, TrainError> {
        Ok(self[index].clone())
    }
}

impl SampleSource for Vec<Sample> {
    type Error = TrainError;
    fn len(&self) -> usize {
        Vec::len(self)
    }
    fn sample(&self, index: usize) -> Result<Sample, TrainError> {
        Ok(self[index].clone())
    }
}

/// Loss and score gradient of one sample.
pub fn sample_loss(model: &MixerModel, sample: &Sample, alpha: f64) -> Result<f64, TrainError> {
    let scores = model.forward(&sample.x)?;
    let predicted = sample.scale.returns(&scores)?;
    Ok(loss(&predicted, &sample.target, alpha)?.0)
}

fn sample_step(model: &MixerModel, sample: &Sample, alpha: f64, grads: &mut GradientSet) -> Result<f64, TrainError> {
    let tape = model.forward_with_tape(&sample.x)?;
    let predicted = sample.scale.returns(&tape.scores)?;
    let (value, dret) = loss(&predicted, &sample.target, alpha)?;
    let upstream: Vec<f64> = dret.iter().zip(sample.scale.slopes()).map(|(g, s)| g * s).collect();
    grads.values.iter_mut().for_each(|v| *v = 0.0);
    model.backward_into(&tape, &upstream, grads)?;
    Ok(value)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub valid_loss: f64,
    pub params: Vec<f64>,
    pub step: u64,
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Saved whenever validation loss improved.
    pub checkpoints: Vec<Checkpoint>,
    /// Model after the final epoch; the selected checkpoint replaces its
    /// parameters.
    pub model: MixerModel,
}

impl TrainRun {
    pub fn best_epoch(&self) -> Option<usize> {
        best_epoch(&self.epochs.iter().map(|e| e.valid_loss).collect::<Vec<_>>())
    }
}

/// 1-based epoch of the minimum validation loss, earliest on ties.
pub fn best_epoch(valid_losses: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in valid_losses.iter().enumerate() {
        if best.is_none_or(|(_, b)| *v < b) {
            best = Some((k + 1, *v));
        }
    }
    best.map(|(e, _)| e)
}

/// Parameters of the minimum-validation-loss epoch.
pub fn select_checkpoint(run: &TrainRun) -> Result<MixerModel, TrainError> {
    let epoch = run.best_epoch().ok_or(TrainError::NoCheckpoints)?;
    let ckpt = run.checkpoints.iter().find(|c| c.epoch == epoch).ok_or(TrainError::NoCheckpoints)?;
    Ok(MixerModel::from_params(run.model.config().clone(), ckpt.params.clone(), run.model.seed, ckpt.step)?)
}

/// Hooks for the caller: wall clock, progress and checkpoint persistence.
pub trait TrainObserver {
    fn now_seconds(&self) -> f64 {
        0.0
    }
    fn on_epoch(&mut self, _record: &EpochRecord) {}
    fn on_checkpoint(&mut self, _epoch: usize, _model: &MixerModel) {}
}

pub struct Silent;
impl TrainObserver for Silent {}

pub fn evaluate_loss<S: SampleSource + ?Sized>(model: &MixerModel, data: &S, alpha: f64) -> Result<f64, S::Error> {
    let mut total = 0.0;
    for k in 0..data.len() {
        total += sample_loss(model, &data.sample(k)?, alpha)?;
    }
    Ok(total / data.len() as f64)
}

/// One optimizer step per window in chronological order, `epochs` passes.
/// Training loss is the mean over the pass (each measured before its update);
/// validation loss is measured after the pass.
pub fn train<S, V, O>(
    mut model: MixerModel,
    train_data: &S,
    valid_data: &V,
    protocol: &Protocol,
    observer: &mut O,
) -> Result<TrainRun, S::Error>
where
    S: SampleSource + ?Sized,
    V: SampleSource<Error = S::Error> + ?Sized,
    O: TrainObserver + ?Sized,
{
    protocol.validate()?;
    if train_data.is_empty() {
        return Err(TrainError::EmptyTraining.into());
    }
    if valid_data.is_empty() {
        return Err(TrainError::EmptyValidation.into());
    }
    let mut optimizer = OptimizerState::new(protocol, model.params().len());
    let mut grads = model.zero_gradients();
    let mut epochs = Vec::with_capacity(protocol.epochs);
    let mut checkpoints: Vec<Checkpoint> = Vec::new();
    let mut best = f64::INFINITY;
    for epoch in 1..=protocol.epochs {
        let started = observer.now_seconds();
        let mut total = 0.0;
        for step in 0..train_data.len() {
            let sample = train_data.sample(step)?;
            let value = sample_step(&model, &sample, protocol.alpha, &mut grads)?;
            if !value.is_finite() || value.abs() > DIVERGENCE_LIMIT || !grads.is_finite() {
                return Err(TrainError::Diverged { epoch, step, loss: value }.into());
            }
            total += value;
            optimizer.apply(model.params_mut(), &grads.values);
            model.step += 1;
        }
        let train_loss = total / train_data.len() as f64;
        let valid_loss = evaluate_loss(&model, valid_data, protocol.alpha)?;
        if !valid_loss.is_finite() || valid_loss.abs() > DIVERGENCE_LIMIT {
            return Err(TrainError::Diverged { epoch, step: train_data.len(), loss: valid_loss }.into());
        }
        let record = EpochRecord { epoch, train_loss, valid_loss, seconds: observer.now_seconds() - started };
        observer.on_epoch(&record);
        epochs.push(record);
        if valid_loss < best {
            best = valid_loss;
            checkpoints.push(Checkpoint { epoch, valid_loss, params: model.params().to_vec(), step: model.step });
            observer.on_checkpoint(epoch, &model);
        }
    }
    Ok(TrainRun { seed: protocol.seed, epochs, checkpoints, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixer::MixerConfig;

    #[test]
    fn identical_vectors_have_zero_loss() {
        let r = [0.03, -0.01, 0.2, 0.0];
        let (l, g) = loss(&r, &r, 0.1).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn two_stock_example() {
        let (l, _) = loss(&[0.02, 0.01], &[0.01, 0.02], 0.1).unwrap();
        assert!((l - 1.2e-4).abs() < 1e-18, "{l}");
    }

    #[test]
    fn loss_input_errors() {
        assert_eq!(loss(&[1.0], &[1.0, 2.0], 0.1).unwrap_err(), TrainError::LengthMismatch(1, 2));
        assert_eq!(loss(&[f64::NAN], &[1.0], 0.1).unwrap_err(), TrainError::NonFinite);
    }

    #[test]
    fn best_epoch_rules() {
        assert_eq!(best_epoch(&[3.0, 1.0, 2.0]), Some(2));
        assert_eq!(best_epoch(&[2.0, 1.0, 1.0]), Some(2));
        assert_eq!(best_epoch(&[5.0]), Some(1));
        assert_eq!(best_epoch(&[]), None);
    }

    fn tiny_samples(count: usize, seed: u64) -> Vec<Sample> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let x = FeatureTensor { n: 3, t: 4, d: 2, values: (0..24).map(|_| rng.random_range(-1.0..1.0)).collect() };
                let target = (0..3).map(|i| 0.1 * x.get(i, 3, 0)).collect();
                Sample { x, scale: ReturnScale::identity(3), target }
            })
            .collect()
    }

    fn tiny_model() -> MixerModel {
        let mut cfg = MixerConfig::new(3, 4, 2);
        cfg.hidden = 4;
        cfg.market_dim = 2;
        cfg.scales = vec![1, 2];
        cfg.anchor = None;
        MixerModel::init(cfg, 5).unwrap()
    }

    #[test]
    fn select_checkpoint_returns_best_parameters() {
        let train_set = tiny_samples(20, 1);
        let valid_set = tiny_samples(5, 2);
        let protocol = Protocol { epochs: 6, ..Protocol::default() };
        let run = train(tiny_model(), &train_set, &valid_set, &protocol, &mut Silent).unwrap();
        assert_eq!(run.epochs.len(), 6);
        let best = run.best_epoch().unwrap();
        let chosen = select_checkpoint(&run).unwrap();
        let ckpt = run.checkpoints.iter().find(|c| c.epoch == best).unwrap();
        assert_eq!(chosen.params(), &ckpt.params[..]);
        let recomputed = evaluate_loss(&chosen, &valid_set, protocol.alpha).unwrap();
        assert!((recomputed - run.epochs[best - 1].valid_loss).abs() < 1e-15);
    }

    #[test]
    fn empty_inputs_rejected() {
        let data = tiny_samples(3, 1);
        let empty: Vec<Sample> = Vec::new();
        let p = Protocol { epochs: 1, ..Protocol::default() };
        assert!(matches!(train(tiny_model(), &empty, &data, &p, &mut Silent), Err(TrainError::EmptyTraining)));
        assert!(matches!(train(tiny_model(), &data, &empty, &p, &mut Silent), Err(TrainError::EmptyValidation)));
    }

    #[test]
    fn divergence_is_reported() {
        let data = tiny_samples(10, 1);
        let p = Protocol { epochs: 50, learning_rate: 1e3, optimizer: OptimizerKind::Sgd, ..Protocol::default() };
        let err = train(tiny_model(), &data, &data, &p, &mut Silent).unwrap_err();
        assert!(matches!(err, TrainError::Diverged { .. } | TrainError::NonFinite), "{err:?}");
    }
}
