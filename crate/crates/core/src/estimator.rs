//! Estimating `Q` from complementary labels and a small anchor set.
//!
//! For an anchor `x` of class `y` (an instance with `P(Y = y | x) = 1`) the
//! flip process gives `P(Ȳ | x) = Q[y]`. A plain softmax classifier trained on
//! `(x, ȳ)` pairs estimates `P(Ȳ | x)`, so averaging its predictions over the
//! anchors of class `y` estimates row `y` of `Q`.
//!
//! Finite-sample estimates may put mass on the diagonal or (for arbitrary
//! predictors) fall outside the simplex, so rows are projected: zero the
//! diagonal, clamp negatives, renormalize. A row left with no mass falls back
//! to the uniform row.

use std::path::Path;

use crate::datakit::{load_csv, CompDataset, CsvSchema, LabelMapping, LabeledDataset};
use crate::error::{Error, Result};
use crate::float::Float;
use crate::model::{Architecture, Objective, ProbabilityModel, SoftmaxModel};
use crate::trainer::{train, TrainConfig, TrainReport};
use crate::transition::TransitionMatrix;

pub const DEFAULT_ANCHORS_PER_CLASS: usize = 10;

/// Instances assumed to belong to their class with certainty.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet<F> {
    d: usize,
    per_class: Vec<Vec<Vec<F>>>,
}

impl<F: Float> AnchorSet<F> {
    pub fn new(d: usize, per_class: Vec<Vec<Vec<F>>>) -> Result<Self> {
        if let Some(k) = per_class.iter().position(|a| a.is_empty()) {
            return Err(Error::EmptyAnchorClass(k));
        }
        for x in per_class.iter().flatten() {
            if x.len() != d {
                return Err(Error::Shape {
                    what: "anchor features",
                    expected: d,
                    got: x.len(),
                });
            }
        }
        Ok(Self { d, per_class })
    }

    /// Every example of `data` becomes an anchor of its labelled class.
    pub fn from_dataset(data: &LabeledDataset<F>) -> Result<Self> {
        let mut per_class = vec![Vec::new(); data.classes()];
        for i in 0..data.len() {
            per_class[data.labels()[i]].push(data.row(i).to_vec());
        }
        Self::new(data.dim(), per_class)
    }

    /// From a labelled pool, keep the `per_class` examples of each class
    /// closest to that class's centroid (ties by pool order).
    pub fn nearest_to_centroid(pool: &LabeledDataset<F>, per_class: usize) -> Result<Self> {
        let (c, d) = (pool.classes(), pool.dim());
        let mut centroids = vec![vec![F::zero(); d]; c];
        let counts = pool.class_counts();
        for i in 0..pool.len() {
            let k = pool.labels()[i];
            for (m, &v) in centroids[k].iter_mut().zip(pool.row(i)) {
                *m = *m + v;
            }
        }
        for (m, &n) in centroids.iter_mut().zip(&counts) {
            m.iter_mut().for_each(|v| *v = *v / F::cst(n.max(1) as f64));
        }
        let mut chosen = vec![Vec::new(); c];
        for (k, centroid) in centroids.iter().enumerate() {
            let mut members: Vec<(F, usize)> = (0..pool.len())
                .filter(|&i| pool.labels()[i] == k)
                .map(|i| {
                    let dist = pool
                        .row(i)
                        .iter()
                        .zip(centroid)
                        .map(|(&a, &b)| (a - b) * (a - b))
                        .sum::<F>();
                    (dist, i)
                })
                .collect();
            members.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            chosen[k] = members
                .into_iter()
                .take(per_class)
                .map(|(_, i)| pool.row(i).to_vec())
                .collect();
        }
        Self::new(d, chosen)
    }

    /// Load a single CSV (features then a 1-based class column), or a
    /// directory of `anchors_<k>.csv` files, one per class `k = 1..=classes`.
    pub fn load(path: impl AsRef<Path>, classes: usize) -> Result<Self> {
        let path = path.as_ref();
        let schema = CsvSchema {
            header: false,
            mapping: LabelMapping::OneBased { classes },
            ..CsvSchema::default()
        };
        let load_one = |p: &Path| -> Result<LabeledDataset<F>> {
            let header = std::fs::read_to_string(p)?
                .lines()
                .next()
                .is_some_and(|l| l.split(',').any(|f| f.trim().parse::<f64>().is_err()));
            Ok(load_csv::<F>(p, &CsvSchema { header, ..schema.clone() })?.0)
        };
        if path.is_dir() {
            let mut d = None;
            let mut per_class = Vec::with_capacity(classes);
            for k in 1..=classes {
                let file = path.join(format!("anchors_{k}.csv"));
                if !file.exists() {
                    return Err(Error::EmptyAnchorClass(k - 1));
                }
                let data = load_one(&file)?;
                if let Some(bad) = data.labels().iter().find(|&&y| y != k - 1) {
                    return Err(Error::Validation(format!(
                        "{} holds an anchor of class {}",
                        file.display(),
                        bad + 1
                    )));
                }
                d = Some(data.dim());
                per_class.push((0..data.len()).map(|i| data.row(i).to_vec()).collect());
            }
            Self::new(d.unwrap_or(0), per_class)
        } else {
            Self::from_dataset(&load_one(path)?)
        }
    }

    pub fn classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn class(&self, k: usize) -> &[Vec<F>] {
        &self.per_class[k]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.per_class.iter().map(Vec::len).collect()
    }

    /// Apply a feature transform (e.g. the training standardizer) to every
    /// anchor.
    pub fn transform(&mut self, mut f: impl FnMut(&mut [F])) {
        self.per_class.iter_mut().flatten().for_each(|x| f(x));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QEstimate<F> {
    /// Row `y` is the mean predicted `P(Ȳ | x)` over class-`y` anchors.
    pub raw: Vec<Vec<F>>,
    pub projected: TransitionMatrix<F>,
    pub anchor_counts: Vec<usize>,
    /// Diagonal mass dropped from each raw row.
    pub removed_diagonal: Vec<F>,
    /// Rows that had no off-diagonal mass and were replaced by the uniform row.
    pub uniform_fallback_rows: Vec<usize>,
}

impl<F: Float> QEstimate<F> {
    pub fn max_removed_diagonal(&self) -> F {
        self.removed_diagonal
            .iter()
            .copied()
            .fold(F::zero(), F::max)
    }
}

/// Train a plain softmax classifier on `(x, ȳ)` pairs; its output estimates
/// `P(Ȳ | x)`.
pub fn fit_comp_predictor<F: Float>(
    comp: &CompDataset<F>,
    arch: Architecture,
    config: &TrainConfig,
) -> Result<(SoftmaxModel<F>, TrainReport)> {
    if comp.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let model = SoftmaxModel::init(arch, comp.dim(), comp.classes(), config.seed);
    train(model, &Objective::CrossEntropy, &comp.view(), config, None)
}

/// Average the predictor over each class's anchors and project.
pub fn estimate_q<F: Float, P: ProbabilityModel<F>>(
    predictor: &P,
    anchors: &AnchorSet<F>,
) -> Result<QEstimate<F>> {
    let c = predictor.num_classes();
    if anchors.classes() != c {
        return Err(Error::Shape {
            what: "anchor classes",
            expected: c,
            got: anchors.classes(),
        });
    }
    let mut raw = Vec::with_capacity(c);
    for k in 0..c {
        let members = anchors.class(k);
        if members.is_empty() {
            return Err(Error::EmptyAnchorClass(k));
        }
        let mut row = vec![F::zero(); c];
        for x in members {
            let p = predictor.predict_proba(x)?;
            if p.len() != c {
                return Err(Error::Shape {
                    what: "predictor output",
                    expected: c,
                    got: p.len(),
                });
            }
            for (r, v) in row.iter_mut().zip(p) {
                *r = *r + v;
            }
        }
        let n = F::cst(members.len() as f64);
        row.iter_mut().for_each(|v| *v = *v / n);
        raw.push(row);
    }
    let (projected, removed_diagonal, uniform_fallback_rows) = project(&raw)?;
    Ok(QEstimate {
        raw,
        projected,
        anchor_counts: anchors.counts(),
        removed_diagonal,
        uniform_fallback_rows,
    })
}

/// Zero the diagonal, clamp negatives, renormalize rows.
pub fn project<F: Float>(raw: &[Vec<F>]) -> Result<(TransitionMatrix<F>, Vec<F>, Vec<usize>)> {
    let c = raw.len();
    let mut removed = Vec::with_capacity(c);
    let mut fallback = Vec::new();
    let mut rows = Vec::with_capacity(c);
    for (i, r) in raw.iter().enumerate() {
        if r.len() != c {
            return Err(Error::Shape {
                what: "raw transition row",
                expected: c,
                got: r.len(),
            });
        }
        removed.push(r[i]);
        let mut row: Vec<F> = r
            .iter()
            .enumerate()
            .map(|(j, &v)| if j == i || v.is_nan() || v <= F::zero() { F::zero() } else { v })
            .collect();
        let s: F = row.iter().copied().sum();
        if (s - F::one()).abs() <= F::stochastic_tolerance() {
            // already a distribution: leave it bit-for-bit alone
        } else if s > F::zero() && s.is_finite() {
            row.iter_mut().for_each(|v| *v = *v / s);
        } else {
            fallback.push(i);
            let u = F::one() / F::cst((c - 1) as f64);
            row = (0..c).map(|j| if j == i { F::zero() } else { u }).collect();
        }
        rows.push(row);
    }
    Ok((TransitionMatrix::from_rows(&rows)?, removed, fallback))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct QError {
    pub max_abs: f64,
    pub mean_abs: f64,
    pub per_row_l1: Vec<f64>,
}

pub fn q_error<F: Float>(estimate: &TransitionMatrix<F>, truth: &TransitionMatrix<F>) -> Result<QError> {
    let c = truth.num_classes();
    if estimate.num_classes() != c {
        return Err(Error::Shape {
            what: "estimated transition matrix",
            expected: c,
            got: estimate.num_classes(),
        });
    }
    let mut max_abs: f64 = 0.0;
    let mut total = 0.0;
    let mut per_row_l1 = Vec::with_capacity(c);
    for i in 0..c {
        let mut l1 = 0.0;
        for j in 0..c {
            let e = (estimate.get(i, j) - truth.get(i, j)).abs().as_f64();
            max_abs = max_abs.max(e);
            total += e;
            l1 += e;
        }
        per_row_l1.push(l1);
    }
    Ok(QError {
        max_abs,
        mean_abs: total / (c * c) as f64,
        per_row_l1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::{corrupt, make_blobs, BlobSpec};
    use crate::model::softmax;
    use approx::assert_abs_diff_eq;

    /// Outputs `Qᵀ e_k` for inputs whose first coordinate rounds to `k`.
    struct ExactFlip(TransitionMatrix<f64>);

    impl ProbabilityModel<f64> for ExactFlip {
        fn num_classes(&self) -> usize {
            self.0.num_classes()
        }
        fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(self.0.row(x[0].round() as usize).to_vec())
        }
    }

    fn anchors_at_class_index(c: usize, per: usize) -> AnchorSet<f64> {
        AnchorSet::new(
            1,
            (0..c).map(|k| (0..per).map(|s| vec![k as f64 + 0.01 * s as f64]).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn plug_in_identity() {
        let q = TransitionMatrix::<f64>::with_zero(6, 3, 2).unwrap();
        for per in [1, 5, 10] {
            let est = estimate_q(&ExactFlip(q.clone()), &anchors_at_class_index(6, per)).unwrap();
            let err = q_error(&est.projected, &q).unwrap();
            assert!(err.max_abs < 1e-15, "{per}: {err:?}");
            assert_eq!(est.max_removed_diagonal(), 0.0);
            assert!(est.uniform_fallback_rows.is_empty());
        }
    }

    #[test]
    fn single_anchor_row_is_its_prediction() {
        let model = SoftmaxModel::<f64>::init(Architecture::Linear, 2, 3, 4);
        let anchors = AnchorSet::new(
            2,
            vec![vec![vec![0.5, 1.0]], vec![vec![-1.0, 0.0]], vec![vec![0.0, 2.0]]],
        )
        .unwrap();
        let est = estimate_q(&model, &anchors).unwrap();
        let g = softmax(&model.scores(&[-1.0, 0.0]).unwrap());
        assert_eq!(est.raw[1], g);
        assert_abs_diff_eq!(est.removed_diagonal[1], g[1]);
    }

    #[test]
    fn projection_rules() {
        let q = TransitionMatrix::<f64>::without_zero(5, 1).unwrap();
        let (p, removed, fb) = project(&q.rows()).unwrap();
        assert_eq!(p, q);
        assert!(removed.iter().all(|&v| v == 0.0));
        assert!(fb.is_empty());

        let raw = vec![
            vec![0.2, 0.4, 0.4],
            vec![0.1, 0.9, -0.2],
            vec![0.0, 0.0, 1.0],
        ];
        let (p, removed, fb) = project(&raw).unwrap();
        assert_eq!(p.row(0), &[0.0, 0.5, 0.5]);
        assert_eq!(p.row(1), &[1.0, 0.0, 0.0]);
        assert_eq!(p.row(2), &[0.5, 0.5, 0.0]);
        assert_eq!(removed, vec![0.2, 0.9, 1.0]);
        assert_eq!(fb, vec![2]);
    }

    #[test]
    fn empty_anchor_class() {
        assert!(matches!(
            AnchorSet::<f64>::new(1, vec![vec![vec![0.0]], vec![]]),
            Err(Error::EmptyAnchorClass(1))
        ));
        let data = LabeledDataset::new(vec![0.0, 1.0], 1, 3, vec![0, 1]).unwrap();
        assert!(matches!(
            AnchorSet::from_dataset(&data),
            Err(Error::EmptyAnchorClass(2))
        ));
    }

    #[test]
    fn q_error_flags_swapped_rows() {
        let q = TransitionMatrix::<f64>::with_zero(5, 2, 7).unwrap();
        assert_eq!(q_error(&q, &q).unwrap().max_abs, 0.0);
        let mut rows = q.rows();
        // swap two rows' off-diagonal content while keeping the diagonal zero
        let swapped = TransitionMatrix::<f64>::uniform(5).unwrap();
        rows[1] = swapped.row(1).to_vec();
        rows[3] = swapped.row(3).to_vec();
        let other = TransitionMatrix::from_rows(&rows).unwrap();
        let err = q_error(&other, &q).unwrap();
        for (i, l1) in err.per_row_l1.iter().enumerate() {
            assert_eq!(*l1 > 0.0, i == 1 || i == 3);
        }
    }

    #[test]
    fn nearest_to_centroid_picks_central_points() {
        let data = LabeledDataset::new(vec![0.0, 10.0, 1.0, 5.0, 5.2, 4.0], 1, 2, vec![0, 0, 0, 1, 1, 1])
            .unwrap();
        let a = AnchorSet::nearest_to_centroid(&data, 1).unwrap();
        assert_eq!(a.class(0), &[vec![1.0]]);
        assert_eq!(a.class(1), &[vec![5.0]]);
    }

    #[test]
    fn anchors_from_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("all.csv"), "0.1,0.2,1\n0.3,0.4,2\n0.5,0.6,3\n").unwrap();
        let a = AnchorSet::<f64>::load(dir.path().join("all.csv"), 3).unwrap();
        assert_eq!(a.counts(), vec![1, 1, 1]);
        let sub = dir.path().join("per");
        std::fs::create_dir(&sub).unwrap();
        for k in 1..=3 {
            std::fs::write(sub.join(format!("anchors_{k}.csv")), format!("x1,x2,label\n1,2,{k}\n3,4,{k}\n")).unwrap();
        }
        let b = AnchorSet::<f64>::load(&sub, 3).unwrap();
        assert_eq!(b.counts(), vec![2, 2, 2]);
        std::fs::remove_file(sub.join("anchors_2.csv")).unwrap();
        assert!(matches!(AnchorSet::<f64>::load(&sub, 3), Err(Error::EmptyAnchorClass(1))));
    }

    #[test]
    fn deterministic_comp_predictor() {
        let data = make_blobs::<f64>(
            &BlobSpec { c: 3, d: 2, n_per_class: 100, sigma: 0.5, means: None },
            1,
        )
        .unwrap();
        let q = TransitionMatrix::<f64>::uniform(3).unwrap();
        let comp = corrupt(&data, &q, 1).unwrap();
        let config = TrainConfig { lr: 0.05, max_epochs: 5, ..TrainConfig::default() };
        let (a, _) = fit_comp_predictor(&comp, Architecture::Linear, &config).unwrap();
        let (b, _) = fit_comp_predictor(&comp, Architecture::Linear, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn deterministic_complementary_region_gives_one_hot() {
        // ȳ is a function of x: class k's points always get ȳ = (k+1) mod 3
        let data = make_blobs::<f64>(
            &BlobSpec { c: 3, d: 2, n_per_class: 300, sigma: 0.05, means: None },
            2,
        )
        .unwrap();
        let q = TransitionMatrix::<f64>::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let comp = corrupt(&data, &q, 3).unwrap();
        let config = TrainConfig {
            lr: 0.5,
            max_epochs: 60,
            early_stop_patience: None,
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        let (pred, _) = fit_comp_predictor(&comp, Architecture::Linear, &config).unwrap();
        let anchors = AnchorSet::nearest_to_centroid(&data, 5).unwrap();
        let est = estimate_q(&pred, &anchors).unwrap();
        for (i, row) in est.raw.iter().enumerate() {
            assert!(row[(i + 1) % 3] > 0.95, "{row:?}");
        }
    }
}
