//! Softmax scorers and the transition-corrected loss.
//!
//! A scorer maps features to logits `h ∈ ℝᶜ`; `g = softmax(h)` estimates
//! `P(Y|x)` and the prediction is `argmax g`. Training on complementary labels
//! pushes `g` through the transition layer, `q = Qᵀg`, and minimizes
//! `-log q[ȳ]`. Its gradient in the logits is
//!
//! ```text
//! ∂ℓ/∂h_j = softmax(h)_j − Q[j][ȳ]·e^{h_j} / Σ_k Q[k][ȳ]·e^{h_k}
//! ```
//!
//! which is a difference of two distributions over `j`, so every component
//! lies in `[-1, 1]` and the components sum to zero.
//!
//! # Checkpoint format
//!
//! Plain text, one item per line:
//!
//! ```text
//! complabel-model 1
//! arch linear            (or: arch one-hidden)
//! d <input dimension>
//! c <class count>
//! hidden <hidden units, 0 for linear>
//! params <count>
//! <one parameter per line, 17 significant digits>
//! ```
//!
//! Parameters are row-major. Linear: `W (c×d)`, `b (c)`. One hidden layer
//! of `m` tanh units: `W1 (m×d)`, `b1 (m)`, `W2 (c×m)`, `b2 (c)`.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datakit::LabelView;
use crate::error::{Error, Result};
use crate::float::{argmax, parse_float, Float};
use crate::rng;
use crate::transition::TransitionMatrix;

/// Floor applied to `q[ȳ]` inside the log.
pub const LOSS_EPS: f64 = 1e-12;

/// Hidden width of the small `d-3-c` network.
pub const DEFAULT_HIDDEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Architecture {
    Linear,
    OneHidden { hidden: usize },
}

impl Architecture {
    pub fn one_hidden() -> Self {
        Architecture::OneHidden {
            hidden: DEFAULT_HIDDEN,
        }
    }

    pub fn param_count(&self, d: usize, c: usize) -> usize {
        match *self {
            Architecture::Linear => c * d + c,
            Architecture::OneHidden { hidden } => hidden * d + hidden + c * hidden + c,
        }
    }
}

/// What a mini-batch is scored against.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a, F> {
    /// Plain softmax cross-entropy on the supplied labels.
    CrossEntropy,
    /// Cross-entropy of `Qᵀ softmax(h)` against complementary labels.
    Corrected(&'a TransitionMatrix<F>),
}

impl<F: Float> Objective<'_, F> {
    pub fn loss(&self, h: &[F], label: usize) -> F {
        match self {
            Objective::CrossEntropy => cross_entropy(h, label),
            Objective::Corrected(q) => modified_loss(q, h, label),
        }
    }

    pub fn loss_and_grad(&self, h: &[F], label: usize) -> (F, Vec<F>) {
        match self {
            Objective::CrossEntropy => (cross_entropy(h, label), cross_entropy_grad_h(h, label)),
            Objective::Corrected(q) => (modified_loss(q, h, label), loss_grad_h(q, h, label)),
        }
    }
}

pub fn log_sum_exp<F: Float>(h: &[F]) -> F {
    let m = h.iter().copied().fold(F::neg_infinity(), F::max);
    if m == F::neg_infinity() {
        return m;
    }
    m + h.iter().map(|&v| (v - m).exp()).sum::<F>().ln()
}

/// Max-shifted softmax.
pub fn softmax<F: Float>(h: &[F]) -> Vec<F> {
    let m = h.iter().copied().fold(F::neg_infinity(), F::max);
    let e: Vec<F> = h.iter().map(|&v| (v - m).exp()).collect();
    let s: F = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `q = Qᵀ g`.
pub fn corrected_output<F: Float>(q: &TransitionMatrix<F>, g: &[F]) -> Result<Vec<F>> {
    q.flip_posterior(g)
}

/// `-log max(q[ȳ], ε)` with `q = Qᵀ softmax(h)`, evaluated in log space.
///
/// Panics if `ybar` is not a class of `q`.
pub fn modified_loss<F: Float>(q: &TransitionMatrix<F>, h: &[F], ybar: usize) -> F {
    let cap = -F::cst(LOSS_EPS).ln();
    let terms: Vec<F> = h
        .iter()
        .enumerate()
        .filter(|&(k, _)| q.get(k, ybar) > F::zero())
        .map(|(k, &hk)| hk + q.get(k, ybar).ln())
        .collect();
    if terms.is_empty() {
        return cap;
    }
    let loss = log_sum_exp(h) - log_sum_exp(&terms);
    loss.max(F::zero()).min(cap)
}

/// Gradient of [`modified_loss`] in the logits.
///
/// Both terms are normalized with their own max shift so neither underflows.
/// If column `ȳ` of `Q` is entirely zero the first term does not exist and
/// the result is `softmax(h)`.
pub fn loss_grad_h<F: Float>(q: &TransitionMatrix<F>, h: &[F], ybar: usize) -> Vec<F> {
    let mut grad = softmax(h);
    let support_max = h
        .iter()
        .enumerate()
        .filter(|&(k, _)| q.get(k, ybar) > F::zero())
        .map(|(_, &hk)| hk)
        .fold(F::neg_infinity(), F::max);
    if support_max == F::neg_infinity() {
        return grad;
    }
    let w: Vec<F> = h
        .iter()
        .enumerate()
        .map(|(k, &hk)| q.get(k, ybar) * (hk - support_max).exp())
        .collect();
    let total: F = w.iter().copied().sum();
    for (g, wk) in grad.iter_mut().zip(w) {
        *g = *g - wk / total;
    }
    grad
}

pub fn cross_entropy<F: Float>(h: &[F], y: usize) -> F {
    (log_sum_exp(h) - h[y]).max(F::zero())
}

pub fn cross_entropy_grad_h<F: Float>(h: &[F], y: usize) -> Vec<F> {
    let mut g = softmax(h);
    g[y] = g[y] - F::one();
    g
}

/// Anything that outputs a class distribution for a feature vector.
pub trait ProbabilityModel<F> {
    fn num_classes(&self) -> usize;
    fn predict_proba(&self, x: &[F]) -> Result<Vec<F>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel<F> {
    arch: Architecture,
    d: usize,
    c: usize,
    params: Vec<F>,
}

impl<F: Float> SoftmaxModel<F> {
    pub fn zeros(arch: Architecture, d: usize, c: usize) -> Self {
        Self {
            arch,
            d,
            c,
            params: vec![F::zero(); arch.param_count(d, c)],
        }
    }

    /// Weights uniform in `±sqrt(6/(fan_in+fan_out))`, biases zero.
    pub fn init(arch: Architecture, d: usize, c: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let mut model = Self::zeros(arch, d, c);
        let mut fill = |slice: &mut [F], fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in slice {
                *w = F::cst(rng.random_range(-a..a));
            }
        };
        match arch {
            Architecture::Linear => fill(&mut model.params[..c * d], d, c),
            Architecture::OneHidden { hidden } => {
                let w2 = hidden * d + hidden;
                let (first, rest) = model.params.split_at_mut(w2);
                fill(&mut first[..hidden * d], d, hidden);
                fill(&mut rest[..c * hidden], hidden, c);
            }
        }
        model
    }

    pub fn from_params(arch: Architecture, d: usize, c: usize, params: Vec<F>) -> Result<Self> {
        let want = arch.param_count(d, c);
        if params.len() != want {
            return Err(Error::Shape {
                what: "model parameters",
                expected: want,
                got: params.len(),
            });
        }
        Ok(Self { arch, d, c, params })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn classes(&self) -> usize {
        self.c
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn check_input(&self, x: &[F]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::Shape {
                what: "feature vector",
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Logits for one feature vector.
    pub fn scores(&self, x: &[F]) -> Result<Vec<F>> {
        self.check_input(x)?;
        let mut hidden = Vec::new();
        Ok(self.forward(x, &mut hidden))
    }

    /// Unchecked forward pass; fills `hidden` with the tanh activations.
    fn forward(&self, x: &[F], hidden: &mut Vec<F>) -> Vec<F> {
        let (d, c) = (self.d, self.c);
        match self.arch {
            Architecture::Linear => affine(&self.params[..c * d], &self.params[c * d..], x),
            Architecture::OneHidden { hidden: m } => {
                let p = &self.params;
                let (w1, rest) = p.split_at(m * d);
                let (b1, rest) = rest.split_at(m);
                let (w2, b2) = rest.split_at(c * m);
                *hidden = affine(w1, b1, x).into_iter().map(F::tanh).collect();
                affine(w2, b2, hidden)
            }
        }
    }

    /// Accumulate `scale · ∂(loss)/∂θ` given `∂loss/∂h`.
    fn backward(&self, x: &[F], hidden: &[F], grad_h: &[F], scale: F, grad: &mut [F]) {
        let (d, c) = (self.d, self.c);
        match self.arch {
            Architecture::Linear => {
                let (gw, gb) = grad.split_at_mut(c * d);
                outer_acc(gw, gb, grad_h, x, scale);
            }
            Architecture::OneHidden { hidden: m } => {
                let w2 = &self.params[m * d + m..m * d + m + c * m];
                let (g1, g2) = grad.split_at_mut(m * d + m);
                let (gw2, gb2) = g2.split_at_mut(c * m);
                outer_acc(gw2, gb2, grad_h, hidden, scale);
                let grad_z: Vec<F> = (0..m)
                    .map(|u| {
                        let back: F = (0..c).map(|j| w2[j * m + u] * grad_h[j]).sum();
                        back * (F::one() - hidden[u] * hidden[u])
                    })
                    .collect();
                let (gw1, gb1) = g1.split_at_mut(m * d);
                outer_acc(gw1, gb1, &grad_z, x, scale);
            }
        }
    }

    pub fn predict(&self, x: &[F]) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }

    /// Mean objective over every sample in `data`.
    pub fn mean_loss(&self, objective: &Objective<'_, F>, data: &LabelView<'_, F>) -> Result<F> {
        let idx: Vec<usize> = (0..data.len()).collect();
        self.loss_on(objective, data, &idx)
    }

    /// Mean objective over `data[indices]`.
    pub fn loss_on(
        &self,
        objective: &Objective<'_, F>,
        data: &LabelView<'_, F>,
        indices: &[usize],
    ) -> Result<F> {
        Ok(self.loss_grad(objective, data, indices, false)?.0)
    }

    /// Mean objective and its parameter gradient over `data[indices]`.
    pub fn batch_loss_grad(
        &self,
        objective: &Objective<'_, F>,
        data: &LabelView<'_, F>,
        indices: &[usize],
    ) -> Result<(F, Vec<F>)> {
        self.loss_grad(objective, data, indices, true)
    }

    fn loss_grad(
        &self,
        objective: &Objective<'_, F>,
        data: &LabelView<'_, F>,
        indices: &[usize],
        with_grad: bool,
    ) -> Result<(F, Vec<F>)> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if data.d != self.d {
            return Err(Error::Shape {
                what: "dataset features",
                expected: self.d,
                got: data.d,
            });
        }
        if let Objective::Corrected(q) = objective {
            if q.num_classes() != self.c {
                return Err(Error::Shape {
                    what: "transition matrix",
                    expected: self.c,
                    got: q.num_classes(),
                });
            }
        }
        let scale = F::one() / F::cst(indices.len() as f64);
        let mut grad = if with_grad {
            vec![F::zero(); self.params.len()]
        } else {
            Vec::new()
        };
        let mut hidden = Vec::new();
        let mut total = F::zero();
        for &i in indices {
            let label = data.labels[i];
            if label >= self.c {
                return Err(Error::LabelOutOfRange {
                    label,
                    classes: self.c,
                });
            }
            let x = data.row(i);
            let h = self.forward(x, &mut hidden);
            if with_grad {
                let (l, gh) = objective.loss_and_grad(&h, label);
                total = total + l;
                self.backward(x, &hidden, &gh, scale, &mut grad);
            } else {
                total = total + objective.loss(&h, label);
            }
        }
        Ok((total * scale, grad))
    }

    pub fn to_text(&self) -> String {
        let (arch, hidden) = match self.arch {
            Architecture::Linear => ("linear", 0),
            Architecture::OneHidden { hidden } => ("one-hidden", hidden),
        };
        let mut s = format!(
            "complabel-model 1\narch {arch}\nd {}\nc {}\nhidden {hidden}\nparams {}\n",
            self.d,
            self.c,
            self.params.len()
        );
        for p in &self.params {
            let _ = writeln!(s, "{p:.16e}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l.trim()));
        let mut field = |key: &str| -> Result<String> {
            let (n, line) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: format!("missing `{key}`"),
            })?;
            line.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| Error::Parse {
                    line: n,
                    msg: format!("expected `{key} ...`, found `{line}`"),
                })
        };
        let version = field("complabel-model")?;
        if version != "1" {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unsupported checkpoint version {version}"),
            });
        }
        let arch_name = field("arch")?;
        let int = |v: String, line: usize| {
            v.parse::<usize>().map_err(|_| Error::Parse {
                line,
                msg: format!("not an integer: `{v}`"),
            })
        };
        let d = int(field("d")?, 3)?;
        let c = int(field("c")?, 4)?;
        let hidden = int(field("hidden")?, 5)?;
        let count = int(field("params")?, 6)?;
        let arch = match arch_name.as_str() {
            "linear" => Architecture::Linear,
            "one-hidden" => Architecture::OneHidden { hidden },
            other => {
                return Err(Error::Parse {
                    line: 2,
                    msg: format!("unknown architecture `{other}`"),
                })
            }
        };
        let params = lines
            .filter(|(_, l)| !l.is_empty())
            .map(|(n, l)| {
                parse_float::<F>(l).ok_or_else(|| Error::Parse {
                    line: n,
                    msg: format!("not a number: `{l}`"),
                })
            })
            .collect::<Result<Vec<F>>>()?;
        if params.len() != count {
            return Err(Error::Shape {
                what: "checkpoint parameters",
                expected: count,
                got: params.len(),
            });
        }
        Self::from_params(arch, d, c, params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

impl<F: Float> ProbabilityModel<F> for SoftmaxModel<F> {
    fn num_classes(&self) -> usize {
        self.c
    }

    fn predict_proba(&self, x: &[F]) -> Result<Vec<F>> {
        Ok(softmax(&self.scores(x)?))
    }
}

fn affine<F: Float>(w: &[F], b: &[F], x: &[F]) -> Vec<F> {
    let d = x.len();
    b.iter()
        .enumerate()
        .map(|(r, &bias)| {
            w[r * d..(r + 1) * d]
                .iter()
                .zip(x)
                .fold(bias, |acc, (&wi, &xi)| acc + wi * xi)
        })
        .collect()
}

fn outer_acc<F: Float>(gw: &mut [F], gb: &mut [F], delta: &[F], input: &[F], scale: F) {
    let d = input.len();
    for (r, &dr) in delta.iter().enumerate() {
        let s = dr * scale;
        gb[r] = gb[r] + s;
        for (g, &xi) in gw[r * d..(r + 1) * d].iter_mut().zip(input) {
            *g = *g + s * xi;
        }
    }
}

/// Largest relative gap between analytic and central-difference gradients
/// of the mean batch loss, over every parameter.
///
/// The relative error uses `max(|analytic|, |numeric|, 1e-8)` as denominator.
pub fn grad_check<F: Float>(
    model: &SoftmaxModel<F>,
    objective: &Objective<'_, F>,
    data: &LabelView<'_, F>,
    step: F,
) -> Result<F> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let (_, analytic) = model.batch_loss_grad(objective, data, &idx)?;
    let mut probe = model.clone();
    let two = F::cst(2.0);
    let mut worst = F::zero();
    for p in 0..model.params.len() {
        let orig = probe.params[p];
        probe.params[p] = orig + step;
        let up = probe.mean_loss(objective, data)?;
        probe.params[p] = orig - step;
        let down = probe.mean_loss(objective, data)?;
        probe.params[p] = orig;
        let numeric = (up - down) / (two * step);
        let denom = analytic[p].abs().max(numeric.abs()).max(F::cst(1e-8));
        worst = worst.max((analytic[p] - numeric).abs() / denom);
    }
    Ok(worst)
}
