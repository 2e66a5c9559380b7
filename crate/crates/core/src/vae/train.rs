//! Minibatch Adam training with early stopping on validation loss.

use serde::{Deserialize, Serialize};

use super::{backward_batch, forward_batch, DenseLayer, VaeModel};
use crate::dataset::{fit_normalizer, normalize_mat, FeatureMatrix};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::Rng;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    /// Consecutive epochs without validation improvement before stopping.
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
    /// Weight of the KL term in the composite training objective; `None`
    /// selects 1/m. The unweighted term (the printed objective) collapses
    /// the posterior on feature-mean reconstruction scaling — the latent
    /// goes silent and every mode maps to one point — so the default keeps
    /// the two terms on the footing they'd have with a feature-summed
    /// reconstruction error. Set `Some(1.0)` to reproduce the literal
    /// objective.
    pub kl_weight: Option<f64>,
    /// Scale reparameterization noise by σ² instead of σ.
    pub variance_scaling: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 2000,
            patience: 100,
            val_fraction: 0.2,
            seed: 0,
            kl_weight: None,
            variance_scaling: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Data("batch size must be positive".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Data(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if self.patience < 1 {
            return Err(Error::Data("patience must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Data("max_epochs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn effective_kl_weight(&self, m: usize) -> f64 {
        self.kl_weight.unwrap_or(1.0 / m as f64)
    }
}

/// First/second-moment accumulators for every parameter block, plus the
/// step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(model: &VaeModel) -> Self {
        let blocks: Vec<usize> = model
            .layers()
            .iter()
            .flat_map(|l| [l.w.rows() * l.w.cols(), l.b.len()])
            .collect();
        AdamState::for_blocks(&blocks)
    }

    /// Zeroed accumulators for arbitrary parameter block sizes.
    pub fn for_blocks(block_sizes: &[usize]) -> Self {
        let m: Vec<Vec<f64>> = block_sizes.iter().map(|&s| vec![0.0; s]).collect();
        AdamState { v: m.clone(), m, t: 0 }
    }

    /// Bias-corrected Adam update applied to every parameter block;
    /// `params` and `grads` must follow the model's fixed layer order
    /// (weights then bias per layer).
    pub fn step(
        &mut self,
        params: &mut [&mut [f64]],
        grads: &[&[f64]],
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let t = self.t as i32;
        let corr1 = 1.0 - beta1.powi(t);
        let corr2 = 1.0 - beta2.powi(t);
        for ((block, grad), (m, v)) in
            params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (i, (p, &g)) in block.iter_mut().zip(grad.iter()).enumerate() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
}

/// One epoch's record. `val_loss = rec + kl` exactly, where `kl` is the
/// weighted KL contribution to the composite objective (both evaluated on
/// the validation split with ζ = 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub rec: f64,
    pub kl: f64,
}

/// Seeded shuffle split: the last `val_fraction` of the permuted row
/// indices becomes the validation set. Exposed so tests can reconstruct
/// the exact split a training run used.
pub fn validation_split(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut indices);
    let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
    let val = indices.split_off(n - n_val);
    (indices, val)
}

/// Train per the standard loop: seeded shuffle split, minibatch passes
/// with fresh Gaussian noise per sample, deterministic ζ = 0 validation
/// each epoch, best-by-validation parameters retained, early stop after
/// `patience` non-improving epochs or at `max_epochs`.
///
/// The model's normalizer is fitted on `data` here; training consumes raw
/// sensor rows.
pub fn train(
    mut model: VaeModel,
    data: &FeatureMatrix,
    config: &TrainConfig,
) -> Result<(VaeModel, Vec<LossRecord>)> {
    config.validate()?;
    if data.n_channels() != model.input_dim {
        return Err(Error::Shape(format!(
            "data has {} channels, model expects {}",
            data.n_channels(),
            model.input_dim
        )));
    }
    let n = data.n_samples();
    if n < 2 {
        return Err(Error::Data("training needs at least 2 rows".into()));
    }

    let spec = fit_normalizer(data);
    let mut values = data.values().clone();
    normalize_mat(&spec, &mut values);
    model.normalizer = Some(spec);

    let kl_weight = config.effective_kl_weight(model.input_dim);
    let mut rng = Rng::new(config.seed);
    let (mut train_idx, val_idx) = validation_split(n, config.val_fraction, rng.next_u64());
    let x_val = values.select_rows(&val_idx);

    let mut adam = AdamState::new(&model);
    let mut history: Vec<LossRecord> = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_params: Option<Vec<DenseLayer>> = None;
    let mut stale_epochs = 0usize;

    for epoch in 1..=config.max_epochs {
        rng.shuffle(&mut train_idx);
        let mut train_loss_sum = 0.0;
        let mut trained_rows = 0usize;
        for chunk in train_idx.chunks(config.batch_size) {
            let batch = values.select_rows(chunk);
            let mut zeta = Mat::zeros(batch.rows(), model.latent_dim);
            for v in zeta.data_mut() {
                *v = rng.gauss();
            }
            let pass = forward_batch(&model, &batch, Some(&zeta), config.variance_scaling);
            train_loss_sum += pass.total(kl_weight) * batch.rows() as f64;
            trained_rows += batch.rows();
            let grads = backward_batch(
                &model,
                &batch,
                &pass,
                Some(&zeta),
                kl_weight,
                config.variance_scaling,
            );

            let mut param_blocks: Vec<&mut [f64]> = Vec::new();
            for layer in model.layers_mut() {
                let DenseLayer { w, b, .. } = layer;
                param_blocks.push(w.data_mut());
                param_blocks.push(&mut b[..]);
            }
            let mut grad_blocks: Vec<&[f64]> = Vec::new();
            for g in &grads {
                grad_blocks.push(g.dw.data());
                grad_blocks.push(&g.db[..]);
            }
            adam.step(
                &mut param_blocks,
                &grad_blocks,
                config.learning_rate,
                config.beta1,
                config.beta2,
                config.epsilon,
            );
        }

        let val_pass = forward_batch(&model, &x_val, None, config.variance_scaling);
        let val_kl = kl_weight * val_pass.kl;
        let val_loss = val_pass.rec + val_kl;
        if !val_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "validation loss became non-finite at epoch {epoch}"
            )));
        }
        history.push(LossRecord {
            epoch,
            train_loss: train_loss_sum / trained_rows.max(1) as f64,
            val_loss,
            rec: val_pass.rec,
            kl: val_kl,
        });

        if val_loss < best_val {
            best_val = val_loss;
            best_params = Some(model.layers().into_iter().cloned().collect());
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= config.patience {
                break;
            }
        }
    }

    if let Some(best) = best_params {
        for (slot, saved) in model.layers_mut().into_iter().zip(best) {
            *slot = saved;
        }
    }
    Ok((model, history))
}

/// Validation loss of a trained model on a raw dataset, using the same
/// composite objective a training run would report.
#[cfg(test)]
pub(crate) fn evaluate_validation(
    model: &VaeModel,
    values: &Mat,
    kl_weight: f64,
) -> (f64, f64, f64) {
    let pass = forward_batch(model, values, None, false);
    (pass.rec, kl_weight * pass.kl, pass.rec + kl_weight * pass.kl)
}
