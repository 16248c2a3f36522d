//! Cross-entropy training with Adam, a random 70/30 split, early stopping
//! on validation loss, and seed ensembles.

use super::adam::{adam_step, AdamParams, AdamState};
use super::checkpoint::TrainMeta;
use super::model::{ResNetConfig, ResNetModel, INPUT_CHANNELS};
use super::tensor::Tensor;
use super::NnError;
use crate::chart::{apply_norm, fit_norm};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;

/// Raw (pre-normalization) images with binary labels.
pub struct Dataset {
    pub images: Vec<Vec<f32>>,
    pub labels: Vec<u8>,
    pub side: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TrainParams {
    pub lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            batch_size: 128,
            patience: 5,
            max_epochs: 50,
            val_fraction: 0.3,
            seed: 0,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub best_val_acc: f64,
    pub epochs_run: usize,
    pub noise_sigma: [f64; 3],
}

impl TrainHistory {
    /// `epoch,train_loss,val_loss,val_acc` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,val_loss,val_acc")?;
        for e in &self.epochs {
            writeln!(w, "{},{},{},{}", e.epoch, e.train_loss, e.val_loss, e.val_acc)?;
        }
        Ok(())
    }

    pub fn train_meta(&self) -> TrainMeta {
        TrainMeta {
            best_epoch: self.best_epoch,
            best_val_loss: self.best_val_loss,
            val_accuracy: self.best_val_acc,
            epochs_run: self.epochs_run,
        }
    }
}

fn batch_tensor(images: &[Vec<f32>], idx: &[usize], side: usize) -> Tensor<f32> {
    let px = side * side * INPUT_CHANNELS;
    let mut data = Vec::with_capacity(idx.len() * px);
    for &i in idx {
        data.extend_from_slice(&images[i]);
    }
    Tensor::from_vec(&[idx.len(), side, side, INPUT_CHANNELS], data)
}

fn eval_split(
    model: &ResNetModel<f32>,
    images: &[Vec<f32>],
    labels: &[u8],
    idx: &[usize],
    side: usize,
    batch: usize,
    par: bool,
) -> Result<(f64, f64), NnError> {
    let mut loss = 0.0f64;
    let mut correct = 0usize;
    for chunk in idx.chunks(batch.max(1)) {
        let input = batch_tensor(images, chunk, side);
        let cache = model.forward_batch(&input, false, par, false)?;
        for (row, &i) in cache.probs.data().chunks_exact(2).zip(chunk) {
            let y = labels[i];
            let p = if y == 1 { row[1] } else { row[0] } as f64;
            loss -= p.max(1e-12).ln();
            let pred = u8::from(row[1] > row[0]);
            correct += usize::from(pred == y);
        }
    }
    let n = idx.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Per-channel std of normalized training pixels, for the saliency noise
/// default.
fn normalized_pixel_std(images: &[Vec<f32>], idx: &[usize]) -> [f64; 3] {
    let mut count = [0u64; 3];
    let mut mean = [0.0f64; 3];
    let mut m2 = [0.0f64; 3];
    for &i in idx {
        for (j, &v) in images[i].iter().enumerate() {
            let c = j % 3;
            let v = v as f64;
            count[c] += 1;
            let d = v - mean[c];
            mean[c] += d / count[c] as f64;
            m2[c] += d * (v - mean[c]);
        }
    }
    let mut out = [0.0; 3];
    for c in 0..3 {
        out[c] = if count[c] > 0 { (m2[c] / count[c] as f64).sqrt() } else { 0.0 };
    }
    out
}

/// Train a model from scratch. Returns the parameter snapshot with the
/// smallest validation loss. Deterministic for a fixed seed (the parallel
/// flag only changes scheduling, not results).
pub fn train(
    config: ResNetConfig,
    dataset: &Dataset,
    params: &TrainParams,
) -> Result<(ResNetModel<f32>, TrainHistory), NnError> {
    if dataset.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let side = dataset.side;
    let n = dataset.len();

    const SPLIT_SALT: u64 = 0x7057_1e55;
    let mut split_rng = ChaCha8Rng::seed_from_u64(params.seed ^ SPLIT_SALT);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut split_rng);
    let n_val = ((n as f64) * params.val_fraction).round() as usize;
    let n_val = n_val.min(n.saturating_sub(1));
    let (val_idx, train_idx) = order.split_at(n_val);
    let train_idx: Vec<usize> = train_idx.to_vec();
    // degenerate single-sample datasets validate on the training point
    let val_idx: Vec<usize> =
        if val_idx.is_empty() { train_idx.clone() } else { val_idx.to_vec() };

    let stats = fit_norm(train_idx.iter().map(|&i| dataset.images[i].as_slice()))?;
    let normalized: Vec<Vec<f32>> =
        dataset.images.iter().map(|img| apply_norm(img, &stats)).collect();
    let noise_sigma = {
        let std = normalized_pixel_std(&normalized, &train_idx);
        [0.15 * std[0], 0.15 * std[1], 0.15 * std[2]]
    };

    let mut model = ResNetModel::<f32>::init(config, params.seed)?;
    model.norm = Some(stats);
    let mut adam = AdamState::zeros_like(&model.params);
    let hp = AdamParams::with_lr(params.lr);

    let mut history = TrainHistory { noise_sigma, ..Default::default() };

    // epoch 0: the initial parameters are the first early-stopping candidate
    let (val_loss, mut best_acc) = eval_split(
        &model,
        &normalized,
        &dataset.labels,
        &val_idx,
        side,
        params.batch_size,
        params.parallel,
    )?;
    let mut best_params = model.params.clone();
    let mut best_running = model.bn_running.clone();
    let mut best_epoch = 0usize;
    let mut best_val = val_loss;
    history.epochs.push(EpochStats { epoch: 0, train_loss: f64::NAN, val_loss, val_acc: best_acc });

    let mut epochs_run = 0;
    for epoch in 1..=params.max_epochs {
        if epoch - best_epoch > params.patience {
            break;
        }
        epochs_run = epoch;
        let mut epoch_rng = ChaCha8Rng::seed_from_u64(params.seed ^ ((epoch as u64) << 17));
        let mut idx = train_idx.clone();
        idx.shuffle(&mut epoch_rng);

        let mut train_loss_sum = 0.0f64;
        for chunk in idx.chunks(params.batch_size.max(1)) {
            let input = batch_tensor(&normalized, chunk, side);
            let labels: Vec<u8> = chunk.iter().map(|&i| dataset.labels[i]).collect();
            let (loss, grads) =
                model.loss_and_grads(&input, &labels, params.parallel, true)?;
            train_loss_sum += loss as f64;
            adam_step(&mut model.params, &grads, &mut adam, &hp);
        }
        let train_loss = train_loss_sum / train_idx.len() as f64;

        let (val_loss, val_acc) = eval_split(
            &model,
            &normalized,
            &dataset.labels,
            &val_idx,
            side,
            params.batch_size,
            params.parallel,
        )?;
        history.epochs.push(EpochStats { epoch, train_loss, val_loss, val_acc });

        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_acc = val_acc;
            best_params = model.params.clone();
            best_running = model.bn_running.clone();
        }
    }

    model.params = best_params;
    model.bn_running = best_running;
    history.best_epoch = best_epoch;
    history.best_val_loss = best_val;
    history.best_val_acc = best_acc;
    history.epochs_run = epochs_run;
    Ok((model, history))
}

impl ResNetModel<f32> {
    /// Normalize a raw `[0,1]` image with the model's stored statistics and
    /// run one forward pass.
    pub fn predict_raw(&self, raw: &[f32]) -> Result<super::model::ForwardTrace<f32>, NnError> {
        let side = self.input_side();
        let norm = self.norm.as_ref().ok_or_else(|| {
            NnError::Checkpoint("model has no normalization statistics".into())
        })?;
        let tensor = Tensor::from_vec(&[side, side, INPUT_CHANNELS], apply_norm(raw, norm));
        self.forward(&tensor)
    }
}

/// Average class probabilities across ensemble members; predict up iff the
/// averaged up-probability exceeds the averaged down-probability.
pub fn ensemble_predict(
    models: &[ResNetModel<f32>],
    raw_image: &[f32],
) -> Result<([f64; 2], u8), NnError> {
    if models.is_empty() {
        return Err(NnError::EmptyEnsemble);
    }
    let mut acc = [0.0f64; 2];
    for m in models {
        let trace = m.predict_raw(raw_image)?;
        acc[0] += trace.probs[0] as f64;
        acc[1] += trace.probs[1] as f64;
    }
    acc[0] /= models.len() as f64;
    acc[1] /= models.len() as f64;
    Ok((acc, u8::from(acc[1] > acc[0])))
}
