//! Accuracy as a function of training-set size, per bias regime.

use complabel::datakit::corrupt;
use complabel::rng::derive_seed;
use complabel::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentSpec, QSpec, RegimeName};
use crate::experiment::{prepare_data, run_complementary, streams, train_config, true_q};

const SUBSAMPLE_STREAM: u64 = 18;

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub regime: String,
    pub size: usize,
    pub seed: u64,
    pub test_acc: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveTable {
    pub sizes: Vec<usize>,
    pub regimes: Vec<String>,
    pub seeds: Vec<u64>,
    /// `medians[r][s]`: median test accuracy over seeds for regime `r` at
    /// `sizes[s]`.
    pub medians: Vec<Vec<f64>>,
    pub points: Vec<CurvePoint>,
}

pub fn regime_label(q: &QSpec) -> String {
    match (q.regime, q.k) {
        (RegimeName::Uniform, _) => "uniform".into(),
        (RegimeName::Without0, _) => "without0".into(),
        (RegimeName::With0, Some(k)) => format!("with0(k={k})"),
        (RegimeName::With0, None) => "with0".into(),
        (RegimeName::Manual, _) => "manual".into(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Train the corrected-loss model with the generating `Q` for every
/// (regime, seed, size). Each point uses the data of `base` at that seed,
/// subsampled to `size`; at the full size the point reproduces
/// [`crate::experiment::run`] in `lm-true-q` mode.
///
/// Points run in parallel with independent seeds and are merged in a fixed
/// order, so the table does not depend on scheduling.
pub fn learning_curve(
    base: &ExperimentSpec,
    sizes: &[usize],
    seeds: &[u64],
    regimes: &[QSpec],
) -> Result<CurveTable> {
    if sizes.is_empty() || seeds.is_empty() || regimes.is_empty() {
        return Err(Error::Config("learning curve needs sizes, seeds and regimes".into()));
    }
    let jobs: Vec<(usize, u64, usize)> = (0..regimes.len())
        .flat_map(|r| seeds.iter().flat_map(move |&s| sizes.iter().map(move |&n| (r, s, n))))
        .collect();
    let points: Vec<CurvePoint> = jobs
        .par_iter()
        .map(|&(r, seed, size)| {
            let mut spec = base.clone();
            spec.seed = seed;
            spec.q = regimes[r].clone();
            let prepared = prepare_data(&spec)?;
            let c = prepared.train.classes();
            let q = true_q(&spec, c)?;
            let data = if size == prepared.train.len() {
                prepared.train
            } else {
                let sub_seed = derive_seed(derive_seed(seed, SUBSAMPLE_STREAM), size as u64);
                prepared.train.subsample(size, sub_seed)?
            };
            let comp = corrupt(&data, &q, derive_seed(seed, streams::FLIP))?;
            let config = train_config(&spec);
            let (_, report) = run_complementary(&comp, &q, spec.model, &config, Some(&prepared.test))?;
            Ok(CurvePoint {
                regime: regime_label(&regimes[r]),
                size,
                seed,
                test_acc: report.test_acc.unwrap_or(f64::NAN),
                epochs: report.epochs.len(),
            })
        })
        .collect::<Result<_>>()?;

    let labels: Vec<String> = regimes.iter().map(regime_label).collect();
    let medians = labels
        .iter()
        .map(|label| {
            sizes
                .iter()
                .map(|&n| {
                    median(
                        points
                            .iter()
                            .filter(|p| &p.regime == label && p.size == n)
                            .map(|p| p.test_acc)
                            .collect(),
                    )
                })
                .collect()
        })
        .collect();
    Ok(CurveTable {
        sizes: sizes.to_vec(),
        regimes: labels,
        seeds: seeds.to_vec(),
        medians,
        points,
    })
}

impl CurveTable {
    /// Whether each regime's median accuracy never drops as size grows.
    pub fn monotone(&self) -> Vec<bool> {
        self.medians
            .iter()
            .map(|row| row.windows(2).all(|w| w[1] >= w[0]))
            .collect()
    }

    pub fn render(&self) -> String {
        let width = self.regimes.iter().map(String::len).max().unwrap_or(0).max(8);
        let mut s = format!("{:>8}", "size");
        for r in &self.regimes {
            s += &format!("  {r:>width$}");
        }
        s.push('\n');
        for (i, n) in self.sizes.iter().enumerate() {
            s += &format!("{n:>8}");
            for row in &self.medians {
                s += &format!("  {:>width$.4}", row[i]);
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DataSource, Mode};
    use crate::experiment::run;
    use complabel::model::Architecture;
    use complabel::trainer::TrainConfig;

    fn base() -> ExperimentSpec {
        ExperimentSpec {
            name: "curve".into(),
            seed: 0,
            mode: Mode::LmTrueQ,
            data: DataSource::Blobs {
                c: 4,
                d: 4,
                n_per_class: 100,
                test_per_class: 50,
                sigma: 0.4,
                means: None,
            },
            q: QSpec::uniform(),
            model: Architecture::Linear,
            train: TrainConfig {
                lr: 0.05,
                max_epochs: 15,
                batch_size: 32,
                ..TrainConfig::default()
            },
            derive_train_seed: true,
            anchors: None,
            standardize: true,
            classes: None,
            out: None,
        }
    }

    #[test]
    fn full_size_matches_train_command() {
        let table = learning_curve(&base(), &[200, 400], &[5], &[QSpec::with_zero(2)]).unwrap();
        let mut spec = base();
        spec.seed = 5;
        spec.q = QSpec::with_zero(2);
        let direct = run(&spec).unwrap();
        assert_eq!(table.medians[0][1], direct.report.test_acc);
        assert_eq!(table.points.len(), 2);
    }

    #[test]
    fn deterministic_and_ordered() {
        let regimes = [QSpec::uniform(), QSpec::with_zero(2)];
        let a = learning_curve(&base(), &[100, 400], &[1, 2, 3], &regimes).unwrap();
        let b = learning_curve(&base(), &[100, 400], &[1, 2, 3], &regimes).unwrap();
        assert_eq!(a.medians, b.medians);
        assert_eq!(a.regimes, vec!["uniform", "with0(k=2)"]);
        assert_eq!((a.points[0].regime.as_str(), a.points[0].seed, a.points[0].size), ("uniform", 1, 100));
        assert!(a.render().lines().count() == 3);
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![0.3, 0.1, 0.2]), 0.2);
        assert_eq!(median(vec![0.4, 0.1, 0.2, 0.3]), 0.25);
    }

    #[test]
    fn oversized_request_fails() {
        assert!(learning_curve(&base(), &[10_000], &[1], &[QSpec::uniform()]).is_err());
        assert!(learning_curve(&base(), &[], &[1], &[QSpec::uniform()]).is_err());
    }
}
