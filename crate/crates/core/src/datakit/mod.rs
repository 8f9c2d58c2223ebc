//! Datasets, loaders, synthetic data and complementary-label corruption.
//!
//! Labels are 0-based `usize` in memory. Files written by this module use
//! 1-based labels.

mod blobs;
mod csv_io;
mod idx;

pub use blobs::{default_means, make_blobs, BlobSpec};
pub use csv_io::{
    load_comp_csv, load_csv, save_comp_csv, save_csv, CsvSchema, LabelColumn, LabelMapping,
};
pub use idx::load_idx;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::float::Float;
use crate::rng;
use crate::transition::TransitionMatrix;

/// Whether the labels in a [`LabelView`] are true or complementary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    True,
    Complementary,
}

/// Borrowed features plus exactly one label vector. Training only ever sees
/// this view, so a complementary set never leaks its hidden true labels.
#[derive(Debug, Clone, Copy)]
pub struct LabelView<'a, F> {
    pub features: &'a [F],
    pub d: usize,
    pub labels: &'a [usize],
    pub classes: usize,
    pub kind: LabelKind,
}

impl<'a, F> LabelView<'a, F> {
    pub fn new(
        features: &'a [F],
        d: usize,
        labels: &'a [usize],
        classes: usize,
        kind: LabelKind,
    ) -> Self {
        debug_assert_eq!(features.len(), labels.len() * d);
        Self {
            features,
            d,
            labels,
            classes,
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &'a [F] {
        &self.features[i * self.d..(i + 1) * self.d]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<F> {
    x: Vec<F>,
    d: usize,
    c: usize,
    y: Vec<usize>,
}

impl<F: Float> LabeledDataset<F> {
    pub fn new(x: Vec<F>, d: usize, c: usize, y: Vec<usize>) -> Result<Self> {
        check_shape(&x, d, y.len())?;
        check_labels(&y, c)?;
        Ok(Self { x, d, c, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn classes(&self) -> usize {
        self.c
    }

    pub fn features(&self) -> &[F] {
        &self.x
    }

    pub fn features_mut(&mut self) -> &mut [F] {
        &mut self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn view(&self) -> LabelView<'_, F> {
        LabelView::new(&self.x, self.d, &self.y, self.c, LabelKind::True)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.c];
        for &y in &self.y {
            counts[y] += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let (x, y) = gather(&self.x, self.d, &self.y, indices);
        Self::new(x, self.d, self.c, y)
    }

    /// Seeded random subset of `size` examples.
    pub fn subsample(&self, size: usize, seed: u64) -> Result<Self> {
        if size == 0 || size > self.len() {
            return Err(Error::Config(format!(
                "subsample size {size} outside 1..={}",
                self.len()
            )));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut rng::seeded(seed));
        idx.truncate(size);
        self.subset(&idx)
    }

    /// Keep only examples whose class is in `keep`, relabelled `0..keep.len()`
    /// in the order given.
    pub fn filter_classes(&self, keep: &[usize]) -> Result<Self> {
        let mut map = vec![None; self.c];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.c {
                return Err(Error::LabelOutOfRange {
                    label: old,
                    classes: self.c,
                });
            }
            map[old] = Some(new);
        }
        let idx: Vec<usize> = (0..self.len()).filter(|&i| map[self.y[i]].is_some()).collect();
        let (x, y) = gather(&self.x, self.d, &self.y, &idx);
        let y = y.into_iter().map(|v| map[v].unwrap()).collect();
        Self::new(x, self.d, keep.len(), y)
    }

    pub fn split_validation(&self, val_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        let (tr, va) = split_indices(self.len(), val_fraction, seed)?;
        Ok((self.subset(&tr)?, self.subset(&va)?))
    }
}

/// Features with complementary labels. The generating true labels, when
/// known, are kept only for diagnostics and are not reachable from
/// [`CompDataset::view`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompDataset<F> {
    x: Vec<F>,
    d: usize,
    c: usize,
    ybar: Vec<usize>,
    provenance: Option<Vec<usize>>,
}

impl<F: Float> CompDataset<F> {
    pub fn new(x: Vec<F>, d: usize, c: usize, ybar: Vec<usize>) -> Result<Self> {
        check_shape(&x, d, ybar.len())?;
        check_labels(&ybar, c)?;
        Ok(Self {
            x,
            d,
            c,
            ybar,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, y_true: Vec<usize>) -> Result<Self> {
        if y_true.len() != self.ybar.len() {
            return Err(Error::Shape {
                what: "provenance labels",
                expected: self.ybar.len(),
                got: y_true.len(),
            });
        }
        check_labels(&y_true, self.c)?;
        if let Some(i) = (0..y_true.len()).find(|&i| y_true[i] == self.ybar[i]) {
            return Err(Error::Validation(format!(
                "example {i}: complementary label equals true label"
            )));
        }
        self.provenance = Some(y_true);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ybar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ybar.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn classes(&self) -> usize {
        self.c
    }

    pub fn features(&self) -> &[F] {
        &self.x
    }

    pub fn features_mut(&mut self) -> &mut [F] {
        &mut self.x
    }

    pub fn complementary_labels(&self) -> &[usize] {
        &self.ybar
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// Hidden true labels, for diagnostics only.
    pub fn provenance(&self) -> Option<&[usize]> {
        self.provenance.as_deref()
    }

    pub fn view(&self) -> LabelView<'_, F> {
        LabelView::new(&self.x, self.d, &self.ybar, self.c, LabelKind::Complementary)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let (x, ybar) = gather(&self.x, self.d, &self.ybar, indices);
        let out = Self::new(x, self.d, self.c, ybar)?;
        match &self.provenance {
            Some(p) => out.with_provenance(indices.iter().map(|&i| p[i]).collect()),
            None => Ok(out),
        }
    }

    pub fn split_validation(&self, val_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        let (tr, va) = split_indices(self.len(), val_fraction, seed)?;
        Ok((self.subset(&tr)?, self.subset(&va)?))
    }

    /// Class-conditional complementary-label frequencies (needs provenance).
    /// Rows of classes that never occur are all zero.
    pub fn empirical_transition(&self) -> Option<Vec<Vec<f64>>> {
        let y = self.provenance.as_ref()?;
        let mut counts = vec![vec![0usize; self.c]; self.c];
        for (&t, &b) in y.iter().zip(&self.ybar) {
            counts[t][b] += 1;
        }
        Some(
            counts
                .into_iter()
                .map(|row| {
                    let n: usize = row.iter().sum();
                    row.into_iter()
                        .map(|k| if n == 0 { 0.0 } else { k as f64 / n as f64 })
                        .collect()
                })
                .collect(),
        )
    }
}

fn check_shape<F>(x: &[F], d: usize, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if x.len() != n * d {
        return Err(Error::Shape {
            what: "feature matrix",
            expected: n * d,
            got: x.len(),
        });
    }
    Ok(())
}

fn check_labels(y: &[usize], c: usize) -> Result<()> {
    match y.iter().find(|&&v| v >= c) {
        Some(&label) => Err(Error::LabelOutOfRange { label, classes: c }),
        None => Ok(()),
    }
}

fn gather<F: Copy>(x: &[F], d: usize, y: &[usize], idx: &[usize]) -> (Vec<F>, Vec<usize>) {
    let mut xs = Vec::with_capacity(idx.len() * d);
    let mut ys = Vec::with_capacity(idx.len());
    for &i in idx {
        xs.extend_from_slice(&x[i * d..(i + 1) * d]);
        ys.push(y[i]);
    }
    (xs, ys)
}

/// Seeded shuffle of `0..n` cut into `(train, validation)`; the validation
/// part has `round(n · val_fraction)` elements. Not stratified.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Config(format!(
            "validation fraction {val_fraction} outside (0, 1)"
        )));
    }
    let n_val = (n as f64 * val_fraction).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::Config(format!(
            "cannot split {n} examples with validation fraction {val_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let val = idx.split_off(n - n_val);
    Ok((idx, val))
}

/// Per-feature z-scores fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<F> {
    pub mean: Vec<F>,
    pub std: Vec<F>,
}

/// Floor on the fitted standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

impl<F: Float> Standardizer<F> {
    pub fn fit(x: &[F], d: usize) -> Result<Self> {
        let n = x.len() / d.max(1);
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let nf = F::cst(n as f64);
        let mut mean = vec![F::zero(); d];
        for row in x.chunks(d) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / nf);
        let mut var = vec![F::zero(); d];
        for row in x.chunks(d) {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s = *s + (v - m) * (v - m);
            }
        }
        let floor = F::cst(STD_FLOOR);
        let std = var.into_iter().map(|s| (s / nf).sqrt().max(floor)).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &mut [F]) {
        for row in x.chunks_mut(self.mean.len()) {
            for ((v, &m), &s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
    }

    pub fn invert(&self, x: &mut [F]) {
        for row in x.chunks_mut(self.mean.len()) {
            for ((v, &m), &s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
    }
}

/// Standardize `train` in place with its own statistics and apply the same
/// transform to `others`.
pub fn standardize<F: Float>(
    train: &mut LabeledDataset<F>,
    others: &mut [&mut LabeledDataset<F>],
) -> Result<Standardizer<F>> {
    let st = Standardizer::fit(&train.x, train.d)?;
    st.apply(&mut train.x);
    for o in others.iter_mut() {
        if o.d != train.d {
            return Err(Error::Shape {
                what: "standardized dataset",
                expected: train.d,
                got: o.d,
            });
        }
        st.apply(&mut o.x);
    }
    Ok(st)
}

/// Replace every true label by a complementary label drawn from its row of `q`.
pub fn corrupt<F: Float>(
    data: &LabeledDataset<F>,
    q: &TransitionMatrix<F>,
    seed: u64,
) -> Result<CompDataset<F>> {
    if q.num_classes() != data.c {
        return Err(Error::Shape {
            what: "transition matrix",
            expected: data.c,
            got: q.num_classes(),
        });
    }
    let mut r = rng::seeded(seed);
    let ybar = data
        .y
        .iter()
        .map(|&y| q.sample_complementary(y, &mut r))
        .collect();
    CompDataset::new(data.x.clone(), data.d, data.c, ybar)?.with_provenance(data.y.clone())
}
