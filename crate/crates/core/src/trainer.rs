//! Mini-batch SGD with momentum, weight decay, step learning-rate drops and
//! validation-based early stopping.
//!
//! Update rule, applied to every parameter `θ` with velocity `v`:
//!
//! ```text
//! v ← γ·v − lr·(∇θ + λ·θ)
//! θ ← θ + v
//! ```
//!
//! The validation split is carved out of the training view with a seeded
//! shuffle. Early stopping tracks the mean validation objective; the returned
//! model is the snapshot from the best validation epoch.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datakit::{split_indices, LabelKind, LabelView, LabeledDataset};
use crate::error::{Error, Result};
use crate::float::{argmax, Float};
use crate::model::{Objective, SoftmaxModel};
use crate::rng;

const SPLIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrDrop {
    /// First epoch (0-based) trained at the reduced rate.
    pub epoch: usize,
    pub divisor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Optional cap on optimizer steps across all epochs.
    pub max_iterations: Option<usize>,
    pub lr_drops: Vec<LrDrop>,
    /// Stop after this many epochs without a validation improvement.
    pub early_stop_patience: Option<usize>,
    pub seed: u64,
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 128,
            max_epochs: 100,
            max_iterations: None,
            lr_drops: Vec::new(),
            early_stop_patience: Some(10),
            seed: 0,
            val_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive".into());
        }
        if self.max_iterations == Some(0) {
            return bad("max_iterations must be positive".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("val_fraction must be in (0, 1), got {}", self.val_fraction));
        }
        if self
            .lr_drops
            .windows(2)
            .any(|w| w[1].epoch <= w[0].epoch)
        {
            return bad("lr_drops epochs must be strictly increasing".into());
        }
        if self.lr_drops.iter().any(|d| d.divisor.is_nan() || d.divisor <= 0.0) {
            return bad("lr_drops divisors must be > 0".into());
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr_drops
            .iter()
            .filter(|d| d.epoch <= epoch)
            .fold(self.lr, |lr, d| lr / d.divisor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean mini-batch objective over the epoch.
    pub train_loss: f64,
    pub val_loss: f64,
    /// Only defined when the labels are true labels.
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub best_val_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub early_stopped: bool,
    pub iterations: usize,
    pub seconds: f64,
}

/// Fraction of examples whose prediction equals the label.
pub fn evaluate<F: Float>(model: &SoftmaxModel<F>, data: &LabeledDataset<F>) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    for i in 0..data.len() {
        if model.predict(data.row(i))? == data.labels()[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

fn accuracy_on<F: Float>(
    model: &SoftmaxModel<F>,
    data: &LabelView<'_, F>,
    idx: &[usize],
) -> Result<f64> {
    let mut correct = 0usize;
    for &i in idx {
        if argmax(&model.scores(data.row(i))?) == data.labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / idx.len() as f64)
}

/// Train `model` on `data` under `objective`.
///
/// Deterministic given `(config, data)`. Returns the best-validation
/// snapshot and a report; `test`, when given, is evaluated on that snapshot.
pub fn train<F: Float>(
    mut model: SoftmaxModel<F>,
    objective: &Objective<'_, F>,
    data: &LabelView<'_, F>,
    config: &TrainConfig,
    test: Option<&LabeledDataset<F>>,
) -> Result<(SoftmaxModel<F>, TrainReport)> {
    let started = Instant::now();
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.d != model.input_dim() {
        return Err(Error::Shape {
            what: "dataset features",
            expected: model.input_dim(),
            got: data.d,
        });
    }
    if data.classes != model.classes() {
        return Err(Error::Shape {
            what: "dataset classes",
            expected: model.classes(),
            got: data.classes,
        });
    }

    let (mut train_idx, val_idx) = split_indices(
        data.len(),
        config.val_fraction,
        rng::derive_seed(config.seed, SPLIT_STREAM),
    )?;
    let mut shuffler = rng::seeded(rng::derive_seed(config.seed, SHUFFLE_STREAM));
    let gamma = F::cst(config.momentum);
    let decay = F::cst(config.weight_decay);
    let mut velocity = vec![F::zero(); model.params().len()];

    let mut report = TrainReport {
        config: config.clone(),
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        best_val_acc: None,
        test_acc: None,
        early_stopped: false,
        iterations: 0,
        seconds: 0.0,
    };
    let mut best = model.clone();
    let mut since_best = 0usize;

    'epochs: for epoch in 0..config.max_epochs {
        let lr = F::cst(config.lr_at(epoch));
        train_idx.shuffle(&mut shuffler);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in train_idx.chunks(config.batch_size) {
            let (loss, grad) = model.batch_loss_grad(objective, data, batch)?;
            if !loss.is_finite() {
                return Err(diverged(epoch, report, started));
            }
            for ((p, v), g) in model.params_mut().iter_mut().zip(&mut velocity).zip(grad) {
                *v = gamma * *v - lr * (g + decay * *p);
                *p = *p + *v;
            }
            if !model.is_finite() {
                return Err(diverged(epoch, report, started));
            }
            loss_sum += loss.as_f64();
            batches += 1;
            report.iterations += 1;
            if config.max_iterations == Some(report.iterations) {
                record_epoch(&model, objective, data, &val_idx, epoch, config, loss_sum / batches as f64, &mut report, &mut best, &mut since_best)?;
                break 'epochs;
            }
        }
        let improved = record_epoch(
            &model,
            objective,
            data,
            &val_idx,
            epoch,
            config,
            loss_sum / batches as f64,
            &mut report,
            &mut best,
            &mut since_best,
        )?;
        if !improved {
            if let Some(p) = config.early_stop_patience {
                if since_best >= p {
                    report.early_stopped = true;
                    break;
                }
            }
        }
    }

    if let Some(t) = test {
        report.test_acc = Some(evaluate(&best, t)?);
    }
    report.seconds = started.elapsed().as_secs_f64();
    Ok((best, report))
}

#[allow(clippy::too_many_arguments)]
fn record_epoch<F: Float>(
    model: &SoftmaxModel<F>,
    objective: &Objective<'_, F>,
    data: &LabelView<'_, F>,
    val_idx: &[usize],
    epoch: usize,
    config: &TrainConfig,
    train_loss: f64,
    report: &mut TrainReport,
    best: &mut SoftmaxModel<F>,
    since_best: &mut usize,
) -> Result<bool> {
    let val_loss = model.loss_on(objective, data, val_idx)?.as_f64();
    if !val_loss.is_finite() {
        return Err(Error::Divergence {
            epoch,
            report: Box::new(report.clone()),
        });
    }
    let val_acc = match data.kind {
        LabelKind::True => Some(accuracy_on(model, data, val_idx)?),
        LabelKind::Complementary => None,
    };
    report.epochs.push(EpochRecord {
        epoch,
        lr: config.lr_at(epoch),
        train_loss,
        val_loss,
        val_acc,
    });
    let improved = val_loss < report.best_val_loss;
    if improved {
        report.best_epoch = epoch;
        report.best_val_loss = val_loss;
        report.best_val_acc = val_acc;
        *best = model.clone();
        *since_best = 0;
    } else {
        *since_best += 1;
    }
    Ok(improved)
}

fn diverged(epoch: usize, mut report: TrainReport, started: Instant) -> Error {
    report.seconds = started.elapsed().as_secs_f64();
    Error::Divergence {
        epoch,
        report: Box::new(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::{corrupt, make_blobs, BlobSpec};
    use crate::model::Architecture;
    use crate::transition::TransitionMatrix;

    fn blobs(n: usize, seed: u64) -> LabeledDataset<f64> {
        make_blobs(
            &BlobSpec {
                c: 3,
                d: 2,
                n_per_class: n,
                sigma: 0.5,
                means: None,
            },
            seed,
        )
        .unwrap()
    }

    fn fast() -> TrainConfig {
        TrainConfig {
            lr: 0.05,
            batch_size: 32,
            max_epochs: 20,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn defaults_mirror_reference_setup() {
        let c = TrainConfig::default();
        assert_eq!(c.lr, 1e-4);
        assert_eq!(c.momentum, 0.9);
        assert_eq!(c.weight_decay, 1e-4);
        assert_eq!(c.batch_size, 128);
        assert_eq!(c.val_fraction, 0.1);
        c.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainConfig { lr: 0.0, ..fast() },
            TrainConfig { momentum: 1.0, ..fast() },
            TrainConfig { weight_decay: -1.0, ..fast() },
            TrainConfig { batch_size: 0, ..fast() },
            TrainConfig { val_fraction: 1.0, ..fast() },
            TrainConfig {
                lr_drops: vec![LrDrop { epoch: 5, divisor: 10.0 }, LrDrop { epoch: 5, divisor: 10.0 }],
                ..fast()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn lr_schedule() {
        let c = TrainConfig {
            lr: 0.01,
            lr_drops: vec![LrDrop { epoch: 40, divisor: 10.0 }, LrDrop { epoch: 80, divisor: 10.0 }],
            ..fast()
        };
        assert_eq!(c.lr_at(39), 0.01);
        assert!((c.lr_at(40) - 1e-3).abs() < 1e-15);
        assert!((c.lr_at(100) - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn vanilla_sgd_when_no_momentum_or_decay() {
        // hand-step one batch of a d = 1, c = 3 linear model
        let data = LabeledDataset::new(vec![1.0, -1.0], 1, 3, vec![0, 1]).unwrap();
        let view = data.view();
        let model = SoftmaxModel::<f64>::init(Architecture::Linear, 1, 3, 1);
        let config = TrainConfig {
            lr: 0.1,
            momentum: 0.0,
            weight_decay: 0.0,
            batch_size: 1,
            max_epochs: 1,
            max_iterations: Some(1),
            val_fraction: 0.5,
            seed: 0,
            ..TrainConfig::default()
        };
        // with n = 2 and val_fraction 0.5 the single training example is
        // whichever index the split keeps
        let (tr, _) = split_indices(2, 0.5, rng::derive_seed(0, SPLIT_STREAM)).unwrap();
        let (_, grad_tr) = model.batch_loss_grad(&Objective::CrossEntropy, &view, &tr).unwrap();
        let mut expected_tr = model.params().to_vec();
        for (p, g) in expected_tr.iter_mut().zip(&grad_tr) {
            *p -= 0.1 * g;
        }
        let (out, report) = train(model.clone(), &Objective::CrossEntropy, &view, &config, None).unwrap();
        assert_eq!(report.iterations, 1);
        // the snapshot is the one post-update epoch
        for (a, b) in out.params().iter().zip(&expected_tr) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn weight_decay_and_momentum_follow_update_rule() {
        let data = LabeledDataset::new(vec![1.0, -1.0], 1, 3, vec![0, 1]).unwrap();
        let view = data.view();
        let model = SoftmaxModel::<f64>::init(Architecture::Linear, 1, 3, 1);
        let config = TrainConfig {
            lr: 0.1,
            momentum: 0.5,
            weight_decay: 0.01,
            batch_size: 1,
            max_epochs: 2,
            early_stop_patience: None,
            val_fraction: 0.5,
            seed: 0,
            ..TrainConfig::default()
        };
        let (tr, _) = split_indices(2, 0.5, rng::derive_seed(0, SPLIT_STREAM)).unwrap();
        let mut theta = model.params().to_vec();
        let mut v = vec![0.0; theta.len()];
        for _ in 0..2 {
            let m = SoftmaxModel::from_params(Architecture::Linear, 1, 3, theta.clone()).unwrap();
            let (_, g) = m.batch_loss_grad(&Objective::CrossEntropy, &view, &tr).unwrap();
            for i in 0..theta.len() {
                v[i] = 0.5 * v[i] - 0.1 * (g[i] + 0.01 * theta[i]);
                theta[i] += v[i];
            }
        }
        let (_, report) = train(model, &Objective::CrossEntropy, &view, &config, None).unwrap();
        assert_eq!(report.iterations, 2);
        // compare the final iterate via a fresh run capped at the same steps
        let m = SoftmaxModel::from_params(Architecture::Linear, 1, 3, theta).unwrap();
        let last = report.epochs.last().unwrap().val_loss;
        let (_, va) = split_indices(2, 0.5, rng::derive_seed(0, SPLIT_STREAM)).unwrap();
        let want = m.loss_on(&Objective::CrossEntropy, &view, &va).unwrap();
        assert!((last - want).abs() < 1e-14);
    }

    #[test]
    fn deterministic_and_decreasing() {
        let data = blobs(300, 1);
        let q = TransitionMatrix::<f64>::uniform(3).unwrap();
        let comp = corrupt(&data, &q, 2).unwrap();
        let run = || {
            let m = SoftmaxModel::init(Architecture::Linear, 2, 3, 5);
            train(m, &Objective::Corrected(&q), &comp.view(), &fast(), Some(&data)).unwrap()
        };
        let (m1, r1) = run();
        let (m2, r2) = run();
        assert_eq!(m1, m2);
        let l1: Vec<f64> = r1.epochs.iter().map(|e| e.train_loss).collect();
        let l2: Vec<f64> = r2.epochs.iter().map(|e| e.train_loss).collect();
        assert_eq!(l1, l2);
        for w in l1[..5].windows(2) {
            assert!(w[1] < w[0], "{l1:?}");
        }
        assert!(r1.test_acc.unwrap() > 0.85);
        assert!(r1.epochs.iter().all(|e| e.val_acc.is_none()));
    }

    #[test]
    fn best_snapshot_is_returned() {
        let data = blobs(200, 4);
        let config = TrainConfig {
            lr: 0.5,
            max_epochs: 30,
            early_stop_patience: Some(3),
            ..fast()
        };
        let m = SoftmaxModel::init(Architecture::Linear, 2, 3, 1);
        let view = data.view();
        let (best, report) = train(m, &Objective::CrossEntropy, &view, &config, None).unwrap();
        let (_, va) = split_indices(view.len(), config.val_fraction, rng::derive_seed(config.seed, SPLIT_STREAM)).unwrap();
        let val = best.loss_on(&Objective::CrossEntropy, &view, &va).unwrap();
        assert_eq!(val, report.best_val_loss);
        assert_eq!(accuracy_on(&best, &view, &va).unwrap(), report.best_val_acc.unwrap());
        let min = report.epochs.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(min, report.best_val_loss);
        assert!(report.best_epoch < report.epochs.len());
        if report.early_stopped {
            assert_eq!(report.epochs.len(), report.best_epoch + 4);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let data = blobs(50, 2);
        let config = TrainConfig {
            lr: 1e300,
            momentum: 0.0,
            ..fast()
        };
        let m = SoftmaxModel::init(Architecture::Linear, 2, 3, 1);
        match train(m, &Objective::CrossEntropy, &data.view(), &config, None) {
            Err(Error::Divergence { report, .. }) => assert!(report.epochs.len() <= 1),
            other => panic!("expected divergence, got {:?}", other.map(|r| r.1)),
        }
    }

    #[test]
    fn evaluate_constant_and_perfect() {
        let data = blobs(10, 0);
        // bias-only model predicting class 1 everywhere
        let m = SoftmaxModel::from_params(Architecture::Linear, 2, 3, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((evaluate(&m, &data).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        // nearest-mean rule as a linear model: h_k = 2 μ_k·x − |μ_k|², |μ_k| = 1
        let means = crate::datakit::default_means(3, 2).unwrap();
        let mut p = Vec::new();
        for mu in &means {
            p.extend(mu.iter().map(|v| 2.0 * v));
        }
        p.extend([0.0; 3]);
        let tight = make_blobs::<f64>(&BlobSpec { c: 3, d: 2, n_per_class: 20, sigma: 1e-3, means: None }, 0).unwrap();
        let nm = SoftmaxModel::from_params(Architecture::Linear, 2, 3, p).unwrap();
        assert_eq!(evaluate(&nm, &tight).unwrap(), 1.0);
    }

    #[test]
    fn shape_errors() {
        let data = blobs(10, 0);
        let m = SoftmaxModel::<f64>::init(Architecture::Linear, 3, 3, 1);
        assert!(matches!(
            train(m, &Objective::CrossEntropy, &data.view(), &fast(), None),
            Err(Error::Shape { .. })
        ));
        let q4 = TransitionMatrix::<f64>::uniform(4).unwrap();
        let m = SoftmaxModel::<f64>::init(Architecture::Linear, 2, 3, 1);
        assert!(matches!(
            train(m, &Objective::Corrected(&q4), &data.view(), &fast(), None),
            Err(Error::Shape { .. })
        ));
    }
}
