use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Adam, BnMode, LearnError, Model, Sample, Tape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Halve the learning rate every this many epochs.
    pub lr_halving: Option<usize>,
    pub dropout: f64,
    pub seed: u64,
    pub folds: usize,
    pub hidden: Vec<usize>,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    /// At the end of every epoch, replace the running batch-norm statistics
    /// by the exact statistics of the training set under the current
    /// parameters.
    pub bn_recalibrate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 64,
            epochs: 50,
            lr_halving: None,
            dropout: 0.0,
            seed: 0,
            folds: 10,
            hidden: vec![256, 128],
            bn_momentum: 0.99,
            bn_eps: 1e-3,
            bn_recalibrate: true,
        }
    }
}

impl TrainConfig {
    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Result<(), LearnError> {
        let mut p = Vec::new();
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            p.push(format!("lr must be positive, got {}", self.lr));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                p.push(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if self.adam_eps <= 0.0 {
            p.push("adam_eps must be positive".into());
        }
        if self.batch_size == 0 {
            p.push("batch_size must be positive".into());
        }
        if self.epochs == 0 {
            p.push("epochs must be positive".into());
        }
        if self.lr_halving == Some(0) {
            p.push("lr_halving must be positive when set".into());
        }
        if !(0.0..=0.2).contains(&self.dropout) {
            p.push(format!(
                "dropout must lie in [0, 0.2], got {}",
                self.dropout
            ));
        }
        if self.folds < 2 {
            p.push(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            p.push("hidden layer widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.bn_momentum) || self.bn_eps <= 0.0 {
            p.push("bn_momentum must lie in [0, 1) and bn_eps be positive".into());
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(LearnError::Config(p))
        }
    }

    pub fn head(&self) -> super::HeadConfig {
        super::HeadConfig {
            hidden: self.hidden.clone(),
            dropout: self.dropout,
            bn_momentum: self.bn_momentum,
            bn_eps: self.bn_eps,
        }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_halving {
            Some(k) => self.lr * 0.5f64.powi(((epoch - 1) / k) as i32),
            None => self.lr,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub fold: usize,
    pub train_loss: f64,
    pub val_acc: Option<f64>,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub logs: Vec<EpochLog>,
    pub best_val_acc: Option<f64>,
    pub best_epoch: Option<usize>,
    pub final_val_acc: Option<f64>,
    /// Batches whose gradient went through an active clamp.
    pub clamped_batches: usize,
}

pub fn accuracy(model: &Model, samples: &[Sample]) -> Result<f64, LearnError> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let pred = model.predict(samples)?;
    let hits = pred
        .iter()
        .zip(samples)
        .filter(|(p, s)| **p == s.label)
        .count();
    Ok(hits as f64 / samples.len() as f64)
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(fold as u64)
}

/// Trains `model` in place with mini-batch Adam, evaluating on `val` after
/// every epoch. Runs on a single lane and is bit-reproducible for a fixed
/// seed.
pub fn train(
    model: &mut Model,
    train_set: &[Sample],
    val: Option<&[Sample]>,
    cfg: &TrainConfig,
    fold: usize,
) -> Result<TrainOutcome, LearnError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(LearnError::Shape {
            expected: 1,
            got: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(fold_seed(cfg.seed, fold));
    let mut params = model.params_flat();
    let mut adam = Adam::new(params.len(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
    let mut tape = Tape::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize)> = None;
    let mut clamped_batches = 0;
    let mut last_acc = None;
    for epoch in 1..=cfg.epochs {
        adam.lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let masks = model.dropout_masks(batch.len(), &mut rng);
            let g = model.batch_gradient(&mut tape, &batch, BnMode::Batch, masks.as_deref())?;
            if g.clamped {
                clamped_batches += 1;
            }
            loss_sum += g.loss * batch.len() as f64;
            adam.step(&mut params, &g.grads);
            model.set_params_flat(&params);
            if let Some((mean, var)) = &g.batch_stats {
                model.bn.update(mean, var);
            }
        }
        if cfg.bn_recalibrate {
            model.recalibrate_bn(train_set)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        if !train_loss.is_finite() {
            return Err(LearnError::NonFiniteGradient { index: 0 });
        }
        let val_acc = match val {
            Some(v) if !v.is_empty() => Some(accuracy(model, v)?),
            _ => None,
        };
        if let Some(a) = val_acc {
            if best.is_none_or(|(b, _)| a > b) {
                best = Some((a, epoch));
            }
        }
        last_acc = val_acc;
        logs.push(EpochLog {
            epoch,
            fold,
            train_loss,
            val_acc,
            lr: adam.lr,
        });
    }
    Ok(TrainOutcome {
        logs,
        best_val_acc: best.map(|b| b.0),
        best_epoch: best.map(|b| b.1),
        final_val_acc: last_acc,
        clamped_batches,
    })
}

/// Fold index of every sample. Each class is shuffled and dealt round-robin,
/// continuing where the previous class stopped, so fold sizes differ by at
/// most one. Every class must have at least `k` samples.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<usize>, LearnError> {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.len() < k {
            return Err(LearnError::ClassMissing {
                class: c,
                count: idx.len(),
                folds: k,
            });
        }
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub best_val_acc: f64,
    pub best_epoch: usize,
    pub final_val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldSummary>,
    pub logs: Vec<EpochLog>,
    pub mean_best: f64,
    pub std_best: f64,
    pub mean_final: f64,
    pub std_final: f64,
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Stratified `cfg.folds`-fold cross-validation. `build` creates a fresh
/// model for each fold.
pub fn train_cv(
    samples: &[Sample],
    cfg: &TrainConfig,
    mut build: impl FnMut(usize, &mut ChaCha8Rng) -> Result<Model, LearnError>,
) -> Result<CvReport, LearnError> {
    cfg.validate()?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let assignment = stratified_folds(&labels, cfg.folds, cfg.seed)?;
    let mut folds = Vec::with_capacity(cfg.folds);
    let mut logs = Vec::new();
    for k in 0..cfg.folds {
        let mut tr = Vec::new();
        let mut val = Vec::new();
        for (s, &f) in samples.iter().zip(&assignment) {
            if f == k {
                val.push(s.clone());
            } else {
                tr.push(s.clone());
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(fold_seed(cfg.seed ^ 0xB5, k));
        let mut model = build(k, &mut rng)?;
        let out = train(&mut model, &tr, Some(&val), cfg, k)?;
        folds.push(FoldSummary {
            fold: k,
            best_val_acc: out.best_val_acc.unwrap_or(0.0),
            best_epoch: out.best_epoch.unwrap_or(0),
            final_val_acc: out.final_val_acc.unwrap_or(0.0),
        });
        logs.extend(out.logs);
    }
    let best: Vec<f64> = folds.iter().map(|f| f.best_val_acc).collect();
    let fin: Vec<f64> = folds.iter().map(|f| f.final_val_acc).collect();
    let (mean_best, std_best) = mean_std(&best);
    let (mean_final, std_final) = mean_std(&fin);
    Ok(CvReport {
        folds,
        logs,
        mean_best,
        std_best,
        mean_final,
        std_final,
    })
}
