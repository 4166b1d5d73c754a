use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{evaluate, Batching, Example, FeatureScaling, Model, Task, TrainConfig};
use crate::dsp::perturb_gaussian;
use crate::error::{Error, Result};
use crate::nn::{mse, AdamConfig, AdamState, Gradients, Mode, Network, Parameters};
use crate::par::par_map;

/// Examples per unit of parallel work. Fixed so gradient sums are reduced
/// in the same order on every machine.
const CHUNK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

/// Patience-based early stopping on the validation loss.
///
/// An epoch improves when its loss is below `best - min_delta`; training
/// stops once `patience` consecutive epochs fail to improve.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub min_delta: f64,
    best: f64,
    best_epoch: usize,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopping {
            patience,
            min_delta,
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        let improved = loss < self.best - self.min_delta;
        if improved {
            self.best = loss;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
        }
        StopDecision {
            improved,
            stop: self.bad_epochs >= self.patience,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub train_mse: f64,
    pub val_mse: f64,
    pub train_rmse: f64,
    pub val_rmse: f64,
    pub wall_seconds: f64,
}

impl TrainReport {
    /// `epoch,train_mse,val_mse`, one row per epoch.
    pub fn write_loss_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_mse", "val_mse"])?;
        for r in &self.history {
            w.write_record([
                r.epoch.to_string(),
                format!("{:.9}", r.train_mse),
                format!("{:.9}", r.val_mse),
            ])?;
        }
        w.flush().map_err(|e| Error::io("loss curve", e))?;
        Ok(())
    }
}

fn batches(examples: &[Example], batching: Batching, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = match batching {
        Batching::PerSong => {
            let mut by_song: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, ex) in examples.iter().enumerate() {
                by_song.entry(&ex.group).or_default().push(i);
            }
            by_song.into_values().collect()
        }
        Batching::Shuffled(size) => {
            let mut idx: Vec<usize> = (0..examples.len()).collect();
            idx.shuffle(rng);
            idx.chunks(size).map(<[usize]>::to_vec).collect()
        }
    };
    out.shuffle(rng);
    out
}

fn add_into(dst: &mut Gradients, src: &Gradients) {
    for (d, s) in dst.tensors_mut().into_iter().zip(src.tensors()) {
        d.iter_mut().zip(s).for_each(|(a, b)| *a += b);
    }
}

/// Mean-MSE gradient of one batch; returns the batch loss too.
fn batch_gradient(
    network: &Network,
    scaling: &FeatureScaling,
    examples: &[Example],
    batch: &[usize],
    noise_sigma: f64,
    seed: u64,
) -> Result<(f64, Gradients)> {
    let weight = 1.0 / batch.len() as f64;
    let chunks: Vec<(usize, &[usize])> = batch.chunks(CHUNK).enumerate().map(|(c, ids)| (c * CHUNK, ids)).collect();
    let partial = par_map(&chunks, |_, &(offset, ids)| -> Result<(f64, Gradients)> {
        let mut grads = network.zero_gradients();
        let mut loss = 0.0;
        for (k, &i) in ids.iter().enumerate() {
            // one stream per batch position: reproducible whatever the threading
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((offset + k) as u64);
            let ex = &examples[i];
            let mut input = ex.input.clone();
            if noise_sigma > 0.0 {
                perturb_gaussian(input.data_mut(), noise_sigma, &mut rng)?;
            }
            let (pred, cache) = network.forward(&scaling.apply(&input), Mode::Train, &mut rng)?;
            loss += mse(&pred, &ex.target);
            let d = [(pred[0] - ex.target[0]) * weight, (pred[1] - ex.target[1]) * weight];
            network.backward_into(&cache, d, &mut grads)?;
        }
        Ok((loss, grads))
    });
    let mut total = network.zero_gradients();
    let mut loss = 0.0;
    for p in partial {
        let (l, g) = p?;
        loss += l;
        add_into(&mut total, &g);
    }
    Ok((loss * weight, total))
}

/// Trains with Adam on mean-MSE batches, evaluating train and validation
/// loss (eval mode) after every epoch, and keeps the parameters of the epoch
/// with the lowest validation loss.
///
/// Emotion models get their input standardization fitted on `train_set`.
/// Fails with [`Error::Diverged`] as soon as a loss or gradient stops being
/// finite.
pub fn train(
    model: Model,
    train_set: &[Example],
    val_set: &[Example],
    config: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set has no examples".into()));
    }
    if val_set.is_empty() {
        return Err(Error::Empty("validation set has no examples".into()));
    }
    let started = Instant::now();
    let mut model = model;
    if model.task != config.task {
        return Err(Error::InvalidArgument("model and config tasks differ".into()));
    }
    if config.task == Task::Emotion {
        model.scaling = FeatureScaling::fit(train_set.iter().map(|e| &e.input));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut adam = AdamState::new(AdamConfig::with_learning_rate(config.learning_rate), &model.network)?;
    let mut stopper = EarlyStopping::new(config.early_stop_patience, config.early_stop_min_delta);
    let mut best = model.network.clone();
    let mut history = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        for batch in batches(train_set, config.batching, &mut rng) {
            let seed = rng.random::<u64>();
            let (loss, mut grads) = batch_gradient(
                &model.network,
                &model.scaling,
                train_set,
                &batch,
                config.noise_sigma,
                seed,
            )?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            if let Some(limit) = config.grad_clip {
                let norm = grads.global_norm();
                if norm > limit {
                    grads.scale(limit / norm);
                }
            }
            adam.step(&mut model.network, &grads)?;
        }

        let train_mse = evaluate(&model, train_set)?.mse;
        let val_mse = evaluate(&model, val_set)?.mse;
        for loss in [train_mse, val_mse] {
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
        }
        history.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
        });
        log::info!("epoch {epoch}: train {train_mse:.6} val {val_mse:.6}");
        let decision = stopper.observe(epoch, val_mse);
        if decision.improved {
            best = model.network.clone();
        }
        if decision.stop {
            stopped_early = epoch < config.max_epochs;
            break;
        }
    }

    model.network = best;
    let kept = history[stopper.best_epoch() - 1];
    let report = TrainReport {
        epochs_run: history.len(),
        best_epoch: kept.epoch,
        stopped_early,
        train_mse: kept.train_mse,
        val_mse: kept.val_mse,
        train_rmse: kept.train_mse.sqrt(),
        val_rmse: kept.val_mse.sqrt(),
        wall_seconds: started.elapsed().as_secs_f64(),
        history,
    };
    Ok((model, report))
}
