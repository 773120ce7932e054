use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use super::{LearnError, Sample};
use crate::persistence::PersistenceDiagram;
use crate::representation::{baseline_histogram, represent_jacobian, ReprJacobian, ReprParams};

/// Per-filtration input layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputLayer {
    Representation(ReprParams),
    Histogram {
        bins: usize,
        include_essential: bool,
        max_scale: f64,
    },
}

impl InputLayer {
    pub fn feature_len(&self) -> usize {
        match self {
            Self::Representation(p) => p.feature_len(),
            Self::Histogram {
                bins,
                include_essential,
                ..
            } => {
                let per_dim = if *include_essential { 2 * bins } else { *bins };
                per_dim * crate::persistence::HOMOLOGY_DIMS
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Self::Representation(p) => p.param_count(),
            Self::Histogram { .. } => 0,
        }
    }
}

/// Running statistics of the input batch normalisation. The running
/// averages start at zero and are debiased by `1 - momentumᵗ` when read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormState {
    pub momentum: f64,
    pub eps: f64,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub updates: u64,
}

impl BatchNormState {
    fn new(n: usize, momentum: f64, eps: f64) -> Self {
        Self {
            momentum,
            eps,
            running_mean: vec![0.0; n],
            running_var: vec![0.0; n],
            updates: 0,
        }
    }

    /// Mean and (biased) variance used in evaluation mode.
    pub fn stats(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.running_mean.len();
        if self.updates == 0 {
            return (vec![0.0; n], vec![1.0; n]);
        }
        let c = 1.0 - self.momentum.powi(self.updates.min(i32::MAX as u64) as i32);
        (
            self.running_mean.iter().map(|m| m / c).collect(),
            self.running_var.iter().map(|v| v / c).collect(),
        )
    }

    pub fn update(&mut self, mean: &[f64], var: &[f64]) {
        let k = self.momentum;
        for (r, m) in self.running_mean.iter_mut().zip(mean) {
            *r = k * *r + (1.0 - k) * m;
        }
        for (r, v) in self.running_var.iter_mut().zip(var) {
            *r = k * *r + (1.0 - k) * v;
        }
        self.updates += 1;
    }

    /// Makes [`stats`](Self::stats) return exactly `mean` and `var`.
    pub fn set_stats(&mut self, mean: &[f64], var: &[f64]) {
        self.updates = self.updates.max(1);
        let c = 1.0 - self.momentum.powi(self.updates.min(i32::MAX as u64) as i32);
        self.running_mean = mean.iter().map(|m| m * c).collect();
        self.running_var = var.iter().map(|v| v * c).collect();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 128],
            dropout: 0.0,
            bn_momentum: 0.99,
            bn_eps: 1e-3,
        }
    }
}

/// Input layers, batch normalisation, ReLU dense layers, dropout after the
/// last hidden layer, and a linear output layer.
///
/// The flat head vector is laid out as `[γ, β, W_1, b_1, ..., W_L, b_L]`
/// with each `W` row-major (`out × in`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub inputs: Vec<InputLayer>,
    pub classes: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub head: Vec<f64>,
    pub bn: BatchNormState,
}

/// Batch-norm behaviour of a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Normalise with the batch's own statistics.
    Batch,
    /// Normalise with the running statistics (treated as constants).
    Frozen,
}

/// Features of one sample plus what is needed to backpropagate into `θ`.
#[derive(Debug, Clone)]
pub struct SampleFeatures {
    pub values: Vec<f64>,
    pub jacobians: Vec<Option<ReprJacobian>>,
    pub clamped: bool,
}

/// Result of one gradient evaluation.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub loss: f64,
    /// Gradient with respect to [`Model::params_flat`].
    pub grads: Vec<f64>,
    /// Batch mean and variance of the inputs (batch mode only).
    pub batch_stats: Option<(Vec<f64>, Vec<f64>)>,
    pub clamped: bool,
}

struct Layer {
    input: usize,
    output: usize,
    w: usize,
    b: usize,
}

impl Model {
    pub fn new(
        inputs: Vec<InputLayer>,
        classes: usize,
        cfg: &HeadConfig,
        rng: &mut impl Rng,
    ) -> Result<Self, LearnError> {
        let mut problems = Vec::new();
        if inputs.is_empty() {
            problems.push("at least one input layer is required".to_string());
        }
        if classes < 2 {
            problems.push(format!("need at least 2 classes, got {classes}"));
        }
        if cfg.hidden.contains(&0) {
            problems.push("hidden layer widths must be positive".into());
        }
        if !(0.0..1.0).contains(&cfg.dropout) {
            problems.push(format!("dropout {} outside [0, 1)", cfg.dropout));
        }
        if !(0.0..1.0).contains(&cfg.bn_momentum) || cfg.bn_eps <= 0.0 {
            problems.push("batch-norm momentum must lie in [0, 1) and eps be positive".into());
        }
        let f: usize = inputs.iter().map(InputLayer::feature_len).sum();
        if f == 0 && !inputs.is_empty() {
            problems.push("input layers produce no features".into());
        }
        if !problems.is_empty() {
            return Err(LearnError::Config(problems));
        }
        let mut model = Self {
            inputs,
            classes,
            hidden: cfg.hidden.clone(),
            dropout: cfg.dropout,
            head: Vec::new(),
            bn: BatchNormState::new(f, cfg.bn_momentum, cfg.bn_eps),
        };
        let layers = model.layers();
        let total = layers.last().map_or(2 * f, |l| l.b + l.output);
        let mut head = vec![0.0; total];
        head[..f].fill(1.0);
        for l in &layers {
            let limit = (6.0 / (l.input + l.output) as f64).sqrt();
            for w in &mut head[l.w..l.w + l.input * l.output] {
                *w = rng.gen_range(-limit..limit);
            }
        }
        model.head = head;
        Ok(model)
    }

    pub fn feature_len(&self) -> usize {
        self.inputs.iter().map(InputLayer::feature_len).sum()
    }

    fn layers(&self) -> Vec<Layer> {
        let f = self.feature_len();
        let mut widths = vec![f];
        widths.extend(&self.hidden);
        widths.push(self.classes);
        let mut off = 2 * f;
        widths
            .windows(2)
            .map(|w| {
                let l = Layer {
                    input: w[0],
                    output: w[1],
                    w: off,
                    b: off + w[0] * w[1],
                };
                off = l.b + l.output;
                l
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.head.len()
            + self
                .inputs
                .iter()
                .map(InputLayer::param_count)
                .sum::<usize>()
    }

    /// Head parameters followed by the `θ` of every representation input.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = self.head.clone();
        for inp in &self.inputs {
            if let InputLayer::Representation(p) = inp {
                out.extend(p.params_flat());
            }
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "parameter length mismatch");
        let h = self.head.len();
        self.head.copy_from_slice(&flat[..h]);
        let mut off = h;
        for inp in &mut self.inputs {
            if let InputLayer::Representation(p) = inp {
                let n = p.param_count();
                p.set_params_flat(&flat[off..off + n]);
                off += n;
            }
        }
    }

    /// Named ranges of [`Model::params_flat`].
    pub fn param_groups(&self) -> Vec<(String, Range<usize>)> {
        let f = self.feature_len();
        let mut out = vec![("batchnorm".to_string(), 0..2 * f)];
        let layers = self.layers();
        for (i, l) in layers.iter().enumerate() {
            let name = if i + 1 == layers.len() {
                "output".to_string()
            } else {
                format!("dense{}", i + 1)
            };
            out.push((name, l.w..l.b + l.output));
        }
        let mut off = self.head.len();
        for (i, inp) in self.inputs.iter().enumerate() {
            let n = inp.param_count();
            if n > 0 {
                out.push((format!("theta{i}"), off..off + n));
                off += n;
            }
        }
        out
    }

    /// Features of one sample, optionally with representation Jacobians.
    pub fn features(
        &self,
        diagrams: &[PersistenceDiagram],
        want_jac: bool,
    ) -> Result<SampleFeatures, LearnError> {
        if diagrams.len() != self.inputs.len() {
            return Err(LearnError::Shape {
                expected: self.inputs.len(),
                got: diagrams.len(),
            });
        }
        let mut values = Vec::with_capacity(self.feature_len());
        let mut jacobians = Vec::with_capacity(self.inputs.len());
        let mut clamped = false;
        for (inp, d) in self.inputs.iter().zip(diagrams) {
            match inp {
                InputLayer::Representation(p) => {
                    let j = represent_jacobian(d, p)?;
                    clamped |= j.output.clamped;
                    values.extend_from_slice(&j.output.features);
                    jacobians.push(want_jac.then_some(j));
                }
                InputLayer::Histogram {
                    bins,
                    include_essential,
                    max_scale,
                } => {
                    values.extend(baseline_histogram(d, *bins, *include_essential, *max_scale));
                    jacobians.push(None);
                }
            }
        }
        Ok(SampleFeatures {
            values,
            jacobians,
            clamped,
        })
    }

    fn batch_features(
        &self,
        batch: &[&Sample],
        want_jac: bool,
    ) -> Result<Vec<SampleFeatures>, LearnError> {
        batch
            .par_iter()
            .map(|s| self.features(&s.diagrams, want_jac))
            .collect()
    }

    /// Replaces the running batch-norm statistics by the mean and biased
    /// variance of the input features over `samples`.
    pub fn recalibrate_bn(&mut self, samples: &[Sample]) -> Result<(), LearnError> {
        if samples.is_empty() {
            return Ok(());
        }
        let refs: Vec<&Sample> = samples.iter().collect();
        let feats = self.batch_features(&refs, false)?;
        let f = self.feature_len();
        let n = feats.len() as f64;
        let mut mean = vec![0.0; f];
        for s in &feats {
            for (m, v) in mean.iter_mut().zip(&s.values) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; f];
        for s in &feats {
            for ((acc, v), m) in var.iter_mut().zip(&s.values).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|v| *v /= n);
        self.bn.set_stats(&mean, &var);
        Ok(())
    }

    /// Logits from precomputed features in evaluation mode.
    pub fn logits(&self, feats: &[f64]) -> Vec<f64> {
        let f = self.feature_len();
        assert_eq!(feats.len(), f, "feature length mismatch");
        let (mean, var) = self.bn.stats();
        let mut x: Vec<f64> = (0..f)
            .map(|i| {
                let k = 1.0 / (var[i] + self.bn.eps).sqrt();
                (feats[i] - mean[i]) * (self.head[i] * k) + self.head[f + i]
            })
            .collect();
        let layers = self.layers();
        for (li, l) in layers.iter().enumerate() {
            let last = li + 1 == layers.len();
            x = (0..l.output)
                .map(|o| {
                    let row = &self.head[l.w + o * l.input..l.w + (o + 1) * l.input];
                    let mut v = self.head[l.b + o];
                    for (w, xi) in row.iter().zip(&x) {
                        v += w * xi;
                    }
                    if last {
                        v
                    } else {
                        v.max(0.0)
                    }
                })
                .collect();
        }
        x
    }

    /// Class probabilities of one sample (evaluation mode).
    pub fn predict_proba(&self, diagrams: &[PersistenceDiagram]) -> Result<Vec<f64>, LearnError> {
        let f = self.features(diagrams, false)?;
        Ok(softmax(&self.logits(&f.values)))
    }

    /// Predicted classes, evaluated in parallel.
    pub fn predict(&self, samples: &[Sample]) -> Result<Vec<usize>, LearnError> {
        samples
            .par_iter()
            .map(|s| {
                let p = self.predict_proba(&s.diagrams)?;
                Ok(argmax(&p))
            })
            .collect()
    }

    /// Mean cross-entropy in evaluation mode.
    pub fn eval_loss(&self, samples: &[Sample]) -> Result<f64, LearnError> {
        if samples.is_empty() {
            return Ok(0.0);
        }
        let losses: Vec<f64> = samples
            .par_iter()
            .map(|s| {
                let f = self.features(&s.diagrams, false)?;
                let z = self.logits(&f.values);
                Ok(log_sum_exp(&z) - z[s.label])
            })
            .collect::<Result<_, LearnError>>()?;
        Ok(losses.iter().sum::<f64>() / samples.len() as f64)
    }

    /// Loss and gradient over a batch. `dropout_masks`, when given, holds
    /// one multiplier per unit of the last hidden layer per sample.
    pub fn batch_gradient(
        &self,
        tape: &mut Tape,
        batch: &[&Sample],
        mode: BnMode,
        dropout_masks: Option<&[Vec<f64>]>,
    ) -> Result<BatchGradient, LearnError> {
        if batch.is_empty() {
            return Err(LearnError::Shape {
                expected: 1,
                got: 0,
            });
        }
        for s in batch {
            if s.label >= self.classes {
                return Err(LearnError::Label {
                    label: s.label,
                    classes: self.classes,
                });
            }
        }
        let feats = self.batch_features(batch, true)?;
        let clamped = feats.iter().any(|f| f.clamped);
        tape.clear();
        let f = self.feature_len();
        let nb = batch.len();
        let params: Vec<Var> = self.head.iter().map(|&v| tape.leaf(v)).collect();
        let inputs: Vec<Vec<Var>> = feats
            .iter()
            .map(|s| s.values.iter().map(|&v| tape.leaf(v)).collect())
            .collect();

        // batch normalisation
        let mut normed: Vec<Vec<Var>> = vec![Vec::with_capacity(f); nb];
        let mut stats = None;
        match mode {
            BnMode::Batch => {
                let inv_n = 1.0 / nb as f64;
                let mut means = Vec::with_capacity(f);
                let mut vars = Vec::with_capacity(f);
                for i in 0..f {
                    let col: Vec<Var> = inputs.iter().map(|r| r[i]).collect();
                    let s = tape.sum(&col);
                    let mean = tape.scale(s, inv_n);
                    let diffs: Vec<Var> = col.iter().map(|&x| tape.sub(x, mean)).collect();
                    let sq: Vec<Var> = diffs.iter().map(|&d| tape.mul(d, d)).collect();
                    let ss = tape.sum(&sq);
                    let var = tape.scale(ss, inv_n);
                    means.push(tape.value(mean));
                    vars.push(tape.value(var));
                    let ve = tape.add_const(var, self.bn.eps);
                    let sd = tape.sqrt(ve);
                    for (b, &d) in diffs.iter().enumerate() {
                        let g = tape.mul(d, params[i]);
                        let q = tape.div(g, sd);
                        let y = tape.add(q, params[f + i]);
                        normed[b].push(y);
                    }
                }
                stats = Some((means, vars));
            }
            BnMode::Frozen => {
                let (mean, var) = self.bn.stats();
                for i in 0..f {
                    let k = 1.0 / (var[i] + self.bn.eps).sqrt();
                    let gamma = tape.value(params[i]);
                    let beta = tape.value(params[f + i]);
                    for (b, row) in inputs.iter().enumerate() {
                        let c = tape.value(row[i]) - mean[i];
                        let y = tape.custom(
                            c * gamma * k + beta,
                            &[
                                (row[i], gamma * k),
                                (params[i], c * k),
                                (params[f + i], 1.0),
                            ],
                        );
                        normed[b].push(y);
                    }
                }
            }
        }

        let layers = self.layers();
        let mut losses = Vec::with_capacity(nb);
        for (b, mut x) in normed.into_iter().enumerate() {
            for (li, l) in layers.iter().enumerate() {
                let last = li + 1 == layers.len();
                let mut next = Vec::with_capacity(l.output);
                for o in 0..l.output {
                    let row = &params[l.w + o * l.input..l.w + (o + 1) * l.input];
                    let z = tape.dot_bias(row, &x, params[l.b + o]);
                    next.push(if last { z } else { tape.relu(z) });
                }
                x = next;
                if li + 2 == layers.len() {
                    if let Some(masks) = dropout_masks {
                        x = x
                            .iter()
                            .zip(&masks[b])
                            .map(|(&v, &k)| tape.scale(v, k))
                            .collect();
                    }
                }
            }
            let lse = tape.log_sum_exp(&x);
            losses.push(tape.sub(lse, x[batch[b].label]));
        }
        let total = tape.sum(&losses);
        let loss = tape.scale(total, 1.0 / nb as f64);
        let g = tape.backward(loss)?;

        let mut grads: Vec<f64> = params.iter().map(|&p| g.get(p)).collect();
        let mut theta_off = Vec::new();
        let mut off = self.head.len();
        for inp in &self.inputs {
            theta_off.push(off);
            off += inp.param_count();
        }
        grads.resize(off, 0.0);
        for (sf, vars) in feats.iter().zip(&inputs) {
            let up: Vec<f64> = vars.iter().map(|&v| g.get(v)).collect();
            let mut foff = 0;
            for (k, inp) in self.inputs.iter().enumerate() {
                let n = inp.feature_len();
                if let Some(j) = &sf.jacobians[k] {
                    let gt = j.vjp(&up[foff..foff + n])?;
                    for (dst, v) in grads[theta_off[k]..].iter_mut().zip(gt) {
                        *dst += v;
                    }
                }
                foff += n;
            }
        }
        if let Some(i) = grads.iter().position(|v| !v.is_finite()) {
            return Err(LearnError::NonFiniteGradient { index: i });
        }
        Ok(BatchGradient {
            loss: tape.value(loss),
            grads,
            batch_stats: stats,
            clamped,
        })
    }

    /// Inverted-dropout multipliers for the last hidden layer.
    pub fn dropout_masks(&self, n: usize, rng: &mut impl Rng) -> Option<Vec<Vec<f64>>> {
        if self.dropout == 0.0 {
            return None;
        }
        let width = *self.hidden.last()?;
        let keep = 1.0 - self.dropout;
        Some(
            (0..n)
                .map(|_| {
                    (0..width)
                        .map(|_| {
                            if rng.gen::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect(),
        )
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let mx = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    mx + z.iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|v| (v - lse).exp()).collect()
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::hyperbolic::RhoConfig;
    use crate::persistence::DiagramPoint;
    use crate::representation::{EssentialPolicy, Variant};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn small_model(variant: Variant, seed: u64) -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = RhoConfig::diagonal_lattice(3, (0.0, 1.0), (-1.0, 1.0)).unwrap();
        let mut p =
            ReprParams::init(variant, 2, EssentialPolicy::MaxScale, rho, 3.0, &mut rng).unwrap();
        for t in &mut p.theta {
            t.theta[0] += 0.3;
        }
        let cfg = HeadConfig {
            hidden: vec![6, 5],
            ..HeadConfig::default()
        };
        Model::new(
            vec![
                InputLayer::Representation(p),
                InputLayer::Histogram {
                    bins: 3,
                    include_essential: true,
                    max_scale: 3.0,
                },
            ],
            3,
            &cfg,
            &mut rng,
        )
        .unwrap()
    }

    pub(crate) fn sample(seed: u64, label: usize) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = vec![DiagramPoint::essential(0, 0.0)];
        for _ in 0..3 {
            let b = rng.gen_range(0.0..1.0);
            pts.push(DiagramPoint::new(
                rng.gen_range(0..2),
                b,
                b + rng.gen_range(0.1..1.5),
            ));
        }
        let d = PersistenceDiagram::new(pts);
        Sample {
            diagrams: vec![d.clone(), d],
            label,
        }
    }

    #[test]
    fn probabilities_sum_to_one_and_eval_is_deterministic() {
        let m = small_model(Variant::Poinc, 1);
        let s = sample(3, 0);
        let p = m.predict_proba(&s.diagrams).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(p, m.predict_proba(&s.diagrams).unwrap());
    }

    #[test]
    fn frozen_tape_matches_eval_path() {
        let mut m = small_model(Variant::Hybrid, 2);
        m.bn.update(&vec![0.1; m.feature_len()], &vec![2.0; m.feature_len()]);
        let batch: Vec<Sample> = (0..4).map(|i| sample(i, (i % 3) as usize)).collect();
        let refs: Vec<&Sample> = batch.iter().collect();
        let g = m
            .batch_gradient(&mut Tape::new(), &refs, BnMode::Frozen, None)
            .unwrap();
        assert!((g.loss - m.eval_loss(&batch).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn shape_and_label_errors() {
        let m = small_model(Variant::Eucl, 3);
        assert!(matches!(
            m.predict_proba(&[PersistenceDiagram::empty()]),
            Err(LearnError::Shape { .. })
        ));
        let s = sample(0, 7);
        assert!(matches!(
            m.batch_gradient(&mut Tape::new(), &[&s], BnMode::Batch, None),
            Err(LearnError::Label { .. })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (k, v) in [Variant::Poinc, Variant::Hybrid, Variant::Eucl]
            .into_iter()
            .enumerate()
        {
            let mut m = small_model(v, 10 + k as u64);
            m.bn.update(&vec![0.2; m.feature_len()], &vec![0.5; m.feature_len()]);
            let batch: Vec<Sample> = (0..3).map(|i| sample(20 + i, i as usize)).collect();
            let refs: Vec<&Sample> = batch.iter().collect();
            let g = m
                .batch_gradient(&mut Tape::new(), &refs, BnMode::Frozen, None)
                .unwrap();
            let base = m.params_flat();
            let h = 1e-5;
            for i in 0..base.len() {
                let mut q = m.clone();
                let mut t = base.clone();
                t[i] = base[i] + h;
                q.set_params_flat(&t);
                let fp = q.eval_loss(&batch).unwrap();
                t[i] = base[i] - h;
                q.set_params_flat(&t);
                let fm = q.eval_loss(&batch).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                let err = (fd - g.grads[i]).abs() / fd.abs().max(g.grads[i].abs()).max(1e-6);
                assert!(err < 1e-3, "{v:?} param {i}: {fd} vs {}", g.grads[i]);
            }
        }
    }

    #[test]
    fn batch_mode_gradient_matches_finite_differences() {
        let m = small_model(Variant::Poinc, 30);
        let batch: Vec<Sample> = (0..4).map(|i| sample(40 + i, (i % 3) as usize)).collect();
        let refs: Vec<&Sample> = batch.iter().collect();
        let mut tape = Tape::new();
        let g = m
            .batch_gradient(&mut tape, &refs, BnMode::Batch, None)
            .unwrap();
        let base = m.params_flat();
        let h = 1e-5;
        for i in (0..base.len()).step_by(7) {
            let mut q = m.clone();
            let mut loss_at = |v: f64| {
                let mut t = base.clone();
                t[i] = v;
                q.set_params_flat(&t);
                q.batch_gradient(&mut tape, &refs, BnMode::Batch, None)
                    .unwrap()
                    .loss
            };
            let fd = (loss_at(base[i] + h) - loss_at(base[i] - h)) / (2.0 * h);
            let err = (fd - g.grads[i]).abs() / fd.abs().max(g.grads[i].abs()).max(1e-6);
            assert!(err < 1e-3, "param {i}: {fd} vs {}", g.grads[i]);
        }
    }

    #[test]
    fn untrained_predictions_are_near_uniform_on_average() {
        let mut acc = [0.0; 3];
        let n = 1000;
        for i in 0..n {
            let m = small_model(Variant::Poinc, 1000 + i);
            let p = m.predict_proba(&sample(i, 0).diagrams).unwrap();
            for c in 0..3 {
                acc[c] += p[c] / n as f64;
            }
        }
        assert!(acc.iter().all(|a| (a - 1.0 / 3.0).abs() < 0.1), "{acc:?}");
    }

    #[test]
    fn batchnorm_eval_is_independent_of_batch_composition() {
        let m = small_model(Variant::Poinc, 4);
        let s = sample(1, 0);
        let alone = m.predict(std::slice::from_ref(&s)).unwrap();
        let with: Vec<Sample> = vec![sample(9, 1), s.clone(), sample(8, 2)];
        assert_eq!(m.predict(&with).unwrap()[1], alone[0]);
        assert_eq!(
            m.predict_proba(&s.diagrams).unwrap(),
            m.predict_proba(&with[1].diagrams).unwrap()
        );
    }

    #[test]
    fn bn_running_stats_are_debiased() {
        let mut bn = BatchNormState::new(1, 0.99, 1e-3);
        bn.update(&[2.0], &[3.0]);
        let (m, v) = bn.stats();
        assert!((m[0] - 2.0).abs() < 1e-12 && (v[0] - 3.0).abs() < 1e-12);
        bn.update(&[5.0], &[1.0]);
        bn.set_stats(&[-1.0], &[0.5]);
        let (m, v) = bn.stats();
        assert!((m[0] + 1.0).abs() < 1e-12 && (v[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn recalibrated_stats_match_full_batch_statistics() {
        let mut m = small_model(Variant::Poinc, 8);
        let data: Vec<Sample> = (0..6).map(|i| sample(80 + i, i as usize % 3)).collect();
        m.recalibrate_bn(&data).unwrap();
        let refs: Vec<&Sample> = data.iter().collect();
        let g = m
            .batch_gradient(&mut Tape::new(), &refs, BnMode::Batch, None)
            .unwrap();
        let (bm, bv) = g.batch_stats.unwrap();
        let (rm, rv) = m.bn.stats();
        for i in 0..bm.len() {
            assert!((bm[i] - rm[i]).abs() < 1e-12);
            assert!((bv[i] - rv[i]).abs() < 1e-12);
        }
        let frozen = m.eval_loss(&data).unwrap();
        assert!((frozen - g.loss).abs() < 1e-9);
    }
}
