use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::grad::{backward, SampleGradient};
use super::loss::{sos, LossConfig};
use crate::error::{Error, Result};
use crate::metrics::{psnr, Peak};
use crate::mri::TrainingSample;
use crate::network::{forward_pass, Architecture, InitialGuess, NetworkParams, ShrinkMode};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Number of unrolled phases `T`.
    pub phases: usize,
    pub rho0: f64,
    pub alpha0: f64,
    pub arch: Architecture,
    pub shrink: ShrinkMode,
    pub init: InitialGuess,
    /// Worker threads for per-sample gradients inside a mini-batch.
    pub threads: usize,
}

impl TrainConfig {
    /// Learning rate used for the fat-suppressed knee sequence.
    pub const LR_FSPD: f64 = 1e-4;
    /// Learning rate used for the proton-density knee sequence.
    pub const LR_PD: f64 = 5e-4;

    pub fn new(coils: usize) -> Self {
        Self {
            epochs: 3000,
            batch_size: 2,
            lr: Self::LR_FSPD,
            seed: 0,
            phases: 5,
            rho0: 0.1,
            alpha0: 0.0,
            arch: Architecture::reference(coils),
            shrink: ShrinkMode::Group,
            init: InitialGuess::ZeroFilled,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.phases == 0 || self.threads == 0 {
            return Err(Error::param("batch_size, phases and threads must be positive"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::param(format!("learning rate {} must be >= 0", self.lr)));
        }
        if !(self.alpha0 >= 0.0) || !self.rho0.is_finite() {
            return Err(Error::param("rho0 must be finite and alpha0 >= 0"));
        }
        self.arch.validate()
    }

    pub fn init_params(&self) -> Result<NetworkParams> {
        let mut params = NetworkParams::xavier(self.arch, self.phases, self.rho0, self.alpha0, self.seed)?;
        params.shrink = self.shrink;
        params.init = self.init;
        Ok(params)
    }
}

/// One line of the training log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_psnr: Option<f64>,
}

/// Everything needed to continue training bit-for-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: NetworkParams,
    pub adam: AdamState,
    pub epochs_done: usize,
}

impl TrainState {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let params = cfg.init_params()?;
        let adam = AdamState::new(params.num_values(), cfg.lr);
        Ok(Self {
            params,
            adam,
            epochs_done: 0,
        })
    }
}

/// Sample order for `epoch` (0-based), a pure function of the seed.
pub fn epoch_order(seed: u64, epoch: usize, len: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    order
}

fn batch_gradients(
    batch: &[&TrainingSample],
    params: &NetworkParams,
    loss_cfg: &LossConfig,
    threads: usize,
) -> Result<Vec<SampleGradient>> {
    let run = |s: &TrainingSample| backward(&s.kspace, params, &s.truth, loss_cfg);
    if threads <= 1 || batch.len() <= 1 {
        return batch.iter().map(|s| run(s)).collect();
    }
    let mut results: Vec<Option<Result<SampleGradient>>> = (0..batch.len()).map(|_| None).collect();
    for (chunk_samples, chunk_out) in batch.chunks(threads).zip(results.chunks_mut(threads)) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunk_samples
                .iter()
                .map(|s| scope.spawn(move || run(s)))
                .collect();
            for (slot, h) in chunk_out.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("gradient worker panicked"));
            }
        });
    }
    results.into_iter().map(|r| r.expect("filled")).collect()
}

/// Mean SOS PSNR of the network over `samples`.
pub fn mean_psnr(params: &NetworkParams, samples: &[TrainingSample]) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        let rec = forward_pass(&s.kspace, params)?;
        total += psnr(&sos(&rec.coils), &sos(&s.truth), Peak::MaxOfReference)?;
    }
    Ok(total / samples.len() as f64)
}

/// Runs one epoch of shuffled mini-batch Adam on the mean loss.
///
/// On a non-finite loss or gradient the state keeps the last finite
/// parameters and [`Error::Diverged`] is returned.
pub fn train_epoch(
    state: &mut TrainState,
    train: &[TrainingSample],
    val: &[TrainingSample],
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
) -> Result<EpochRecord> {
    if train.is_empty() {
        return Err(Error::param("training set is empty"));
    }
    let epoch = state.epochs_done;
    let order = epoch_order(cfg.seed, epoch, train.len());
    let mut loss_sum = 0.0;
    for idx in order.chunks(cfg.batch_size) {
        let batch: Vec<&TrainingSample> = idx.iter().map(|&i| &train[i]).collect();
        let results = batch_gradients(&batch, &state.params, loss_cfg, cfg.threads).map_err(|e| match e {
            Error::NonFinite { phase, site } => Error::Diverged {
                epoch: epoch + 1,
                reason: format!("non-finite value in phase {phase}, {site}"),
            },
            other => other,
        })?;
        let mut grads = state.params.zeros_like().to_flat();
        // Fixed summation order keeps the reduction deterministic.
        for r in &results {
            loss_sum += r.loss;
            for (g, v) in grads.iter_mut().zip(r.grads.to_flat()) {
                *g += v;
            }
        }
        let scale = 1.0 / results.len() as f64;
        grads.iter_mut().for_each(|g| *g *= scale);
        let mut grad_params = state.params.zeros_like();
        grad_params.set_flat(&grads)?;
        let mut next = state.params.clone();
        let mut adam = state.adam.clone();
        adam_step(&mut next, &grad_params, &mut adam)?;
        if next.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch: epoch + 1,
                reason: "parameter update produced non-finite values".into(),
            });
        }
        state.params = next;
        state.adam = adam;
    }
    let mean_loss = loss_sum / train.len() as f64;
    if !mean_loss.is_finite() {
        return Err(Error::Diverged {
            epoch: epoch + 1,
            reason: format!("mean loss {mean_loss}"),
        });
    }
    let val_psnr = if val.is_empty() {
        None
    } else {
        Some(mean_psnr(&state.params, val)?)
    };
    state.epochs_done += 1;
    Ok(EpochRecord {
        epoch: state.epochs_done,
        mean_loss,
        val_psnr,
    })
}

/// Continues `state` until `cfg.epochs` epochs are done, calling `on_epoch`
/// after each one (checkpointing, logging).
pub fn train_from(
    state: &mut TrainState,
    train: &[TrainingSample],
    val: &[TrainingSample],
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    mut on_epoch: impl FnMut(&TrainState, &EpochRecord) -> Result<()>,
) -> Result<Vec<EpochRecord>> {
    loss_cfg.validate()?;
    cfg.validate()?;
    if let Some(s) = train.first() {
        if s.kspace.num_coils() != cfg.arch.coils {
            return Err(Error::shape(format!(
                "network configured for {} coils, data has {}",
                cfg.arch.coils,
                s.kspace.num_coils()
            )));
        }
    }
    let mut log = Vec::new();
    while state.epochs_done < cfg.epochs {
        let rec = train_epoch(state, train, val, cfg, loss_cfg)?;
        on_epoch(state, &rec)?;
        log.push(rec);
    }
    Ok(log)
}

/// Trains from a fresh Xavier initialization.
pub fn train(
    train_set: &[TrainingSample],
    val: &[TrainingSample],
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
) -> Result<(NetworkParams, Vec<EpochRecord>)> {
    if train_set.is_empty() {
        return Err(Error::param("training set is empty"));
    }
    let mut state = TrainState::new(cfg)?;
    let log = train_from(&mut state, train_set, val, cfg, loss_cfg, |_, _| Ok(()))?;
    Ok((state.params, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_order_is_a_permutation_per_epoch() {
        for epoch in 0..5 {
            let mut order = epoch_order(11, epoch, 9);
            assert_eq!(order, epoch_order(11, epoch, 9));
            order.sort_unstable();
            assert_eq!(order, (0..9).collect::<Vec<_>>());
        }
        assert_ne!(epoch_order(11, 0, 9), epoch_order(11, 1, 9));
    }
}
