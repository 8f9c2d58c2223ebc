//! The train pipeline behind `complabel train`.

use std::path::Path;
use std::time::Instant;

use complabel::datakit::{
    corrupt, load_csv, load_idx, make_blobs, split_indices, standardize, BlobSpec, CompDataset,
    Standardizer,
};
use complabel::estimator::{estimate_q, fit_comp_predictor, q_error, AnchorSet, QError};
use complabel::model::{Architecture, Objective};
use complabel::rng::derive_seed;
use complabel::trainer::{train, TrainConfig, TrainReport};
use complabel::{
    Error, LabeledDataset64, QEstimate64, Result, SoftmaxModel64, TransitionMatrix64,
};
use serde::Serialize;

use crate::config::{DataSource, ExperimentSpec, Mode};

/// Seed streams, all derived from the experiment seed.
pub mod streams {
    pub const DATA: u64 = 10;
    pub const TEST: u64 = 11;
    pub const Q: u64 = 12;
    pub const FLIP: u64 = 13;
    pub const TRAIN: u64 = 14;
    pub const ANCHOR_POOL: u64 = 15;
    pub const ESTIMATOR: u64 = 16;
    pub const HOLDOUT: u64 = 17;
}

pub struct Prepared {
    pub train: LabeledDataset64,
    pub test: LabeledDataset64,
    pub standardizer: Option<Standardizer<f64>>,
}

/// Load or generate train/test data, filter classes, standardize.
pub fn prepare_data(spec: &ExperimentSpec) -> Result<Prepared> {
    let (mut train, mut test) = match &spec.data {
        DataSource::Blobs {
            c,
            d,
            n_per_class,
            test_per_class,
            sigma,
            means,
        } => {
            let mut blobs = BlobSpec {
                c: *c,
                d: *d,
                n_per_class: *n_per_class,
                sigma: *sigma,
                means: means.clone(),
            };
            let train = make_blobs(&blobs, derive_seed(spec.seed, streams::DATA))?;
            blobs.n_per_class = *test_per_class;
            let test = make_blobs(&blobs, derive_seed(spec.seed, streams::TEST))?;
            (train, test)
        }
        DataSource::Csv {
            train,
            test,
            test_fraction,
            schema,
        } => {
            let (all, names) = load_csv::<f64>(train, schema)?;
            match test {
                Some(path) => {
                    let (test, test_names) = load_csv::<f64>(path, schema)?;
                    if test_names != names {
                        return Err(Error::Validation(format!(
                            "test labels {test_names:?} differ from training labels {names:?}"
                        )));
                    }
                    (all, test)
                }
                None => {
                    let (tr, te) = split_indices(
                        all.len(),
                        *test_fraction,
                        derive_seed(spec.seed, streams::HOLDOUT),
                    )?;
                    (all.subset(&tr)?, all.subset(&te)?)
                }
            }
        }
        DataSource::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => {
            let train = load_idx::<f64>(train_images, train_labels)?;
            let test = load_idx::<f64>(test_images, test_labels)?;
            let c = train.classes().max(test.classes());
            (with_classes(train, c)?, with_classes(test, c)?)
        }
    };
    if let Some(keep) = &spec.classes {
        train = train.filter_classes(keep)?;
        test = test.filter_classes(keep)?;
    }
    if train.classes() < 3 {
        return Err(Error::InvalidClassCount(train.classes()));
    }
    let standardizer = if spec.standardize {
        Some(standardize(&mut train, &mut [&mut test])?)
    } else {
        None
    };
    Ok(Prepared {
        train,
        test,
        standardizer,
    })
}

fn with_classes(data: LabeledDataset64, c: usize) -> Result<LabeledDataset64> {
    if data.classes() == c {
        return Ok(data);
    }
    LabeledDataset64::new(data.features().to_vec(), data.dim(), c, data.labels().to_vec())
}

pub fn q_seed(spec: &ExperimentSpec) -> u64 {
    spec.q.seed.unwrap_or_else(|| derive_seed(spec.seed, streams::Q))
}

pub fn true_q(spec: &ExperimentSpec, c: usize) -> Result<TransitionMatrix64> {
    TransitionMatrix64::generate(&spec.q.regime()?, c, q_seed(spec))
}

pub fn train_config(spec: &ExperimentSpec) -> TrainConfig {
    let mut config = spec.train.clone();
    if spec.derive_train_seed {
        config.seed = derive_seed(spec.seed, streams::TRAIN);
    }
    config
}

/// Train on complementary labels under the corrected loss for `q`.
///
/// Only `comp.view()` is read, so the true labels that generated `comp` (if
/// kept for diagnostics) cannot influence the model.
pub fn run_complementary(
    comp: &CompDataset<f64>,
    q: &TransitionMatrix64,
    arch: Architecture,
    config: &TrainConfig,
    test: Option<&LabeledDataset64>,
) -> Result<(SoftmaxModel64, TrainReport)> {
    let model = SoftmaxModel64::init(arch, comp.dim(), comp.classes(), config.seed);
    train(model, &Objective::Corrected(q), &comp.view(), config, test)
}

pub fn run_true_labels(
    data: &LabeledDataset64,
    arch: Architecture,
    config: &TrainConfig,
    test: Option<&LabeledDataset64>,
) -> Result<(SoftmaxModel64, TrainReport)> {
    let model = SoftmaxModel64::init(arch, data.dim(), data.classes(), config.seed);
    train(model, &Objective::CrossEntropy, &data.view(), config, test)
}

#[derive(Debug, Clone, Serialize)]
pub struct QDiagnostics {
    pub rows: Vec<Vec<f64>>,
    pub determinant: f64,
    pub rank: usize,
    pub condition: f64,
    pub singular: bool,
    pub zero_columns: Vec<usize>,
}

impl QDiagnostics {
    pub fn of(q: &TransitionMatrix64) -> Self {
        let inv = q.invertibility();
        Self {
            rows: q.rows(),
            determinant: inv.determinant,
            rank: inv.rank,
            condition: inv.condition,
            singular: inv.singular,
            zero_columns: inv.zero_columns,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlipDiagnostics {
    /// Per-true-class frequencies of each complementary label.
    pub empirical: Vec<Vec<f64>>,
    pub max_deviation: f64,
}

impl FlipDiagnostics {
    pub fn of(comp: &CompDataset<f64>, q: &TransitionMatrix64) -> Option<Self> {
        let empirical = comp.empirical_transition()?;
        let max_deviation = empirical
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &v)| (i, j, v)))
            .map(|(i, j, v)| (v - q.get(i, j)).abs())
            .fold(0.0, f64::max);
        Some(Self {
            empirical,
            max_deviation,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub raw: Vec<Vec<f64>>,
    pub projected: Vec<Vec<f64>>,
    pub anchor_counts: Vec<usize>,
    pub removed_diagonal: Vec<f64>,
    pub uniform_fallback_rows: Vec<usize>,
    /// Against the generating matrix, when it is known.
    pub error: Option<QError>,
    pub predictor: TrainReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub mode: Mode,
    pub seed: u64,
    /// Fully resolved configuration, including derived seeds.
    pub spec: ExperimentSpec,
    pub q_seed: u64,
    pub flip_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub classes: usize,
    pub q_true: QDiagnostics,
    /// The matrix used by the corrected loss (absent for TL).
    pub q_used: Option<Vec<Vec<f64>>>,
    pub flip: Option<FlipDiagnostics>,
    pub estimate: Option<EstimateReport>,
    pub train: TrainReport,
    pub test_acc: f64,
    pub seconds: f64,
}

pub struct Outcome {
    pub report: ExperimentReport,
    pub model: SoftmaxModel64,
    pub q_true: TransitionMatrix64,
    pub estimate: Option<QEstimate64>,
}

/// Choose anchors for the estimated-Q mode.
pub fn build_anchors(spec: &ExperimentSpec, prepared: &Prepared) -> Result<AnchorSet<f64>> {
    let a = spec.anchors.clone().unwrap_or_default();
    let c = prepared.train.classes();
    let anchors = if let Some(file) = &a.file {
        let mut set = AnchorSet::load(file, c)?;
        if let Some(st) = &prepared.standardizer {
            set.transform(|x| st.apply(x));
        }
        set
    } else if let DataSource::Blobs {
        c: bc,
        d,
        sigma,
        means,
        ..
    } = &spec.data
    {
        let blobs = BlobSpec {
            c: *bc,
            d: *d,
            n_per_class: a.pool_per_class,
            sigma: *sigma,
            means: means.clone(),
        };
        let mut pool = make_blobs::<f64>(&blobs, derive_seed(spec.seed, streams::ANCHOR_POOL))?;
        if let Some(keep) = &spec.classes {
            pool = pool.filter_classes(keep)?;
        }
        if let Some(st) = &prepared.standardizer {
            st.apply(pool.features_mut());
        }
        AnchorSet::nearest_to_centroid(&pool, a.per_class)?
    } else {
        AnchorSet::nearest_to_centroid(&prepared.train, a.per_class)?
    };
    if anchors.classes() != c {
        return Err(Error::Shape {
            what: "anchor classes",
            expected: c,
            got: anchors.classes(),
        });
    }
    Ok(anchors)
}

pub fn estimator_config(spec: &ExperimentSpec) -> TrainConfig {
    let a = spec.anchors.clone().unwrap_or_default();
    let mut config = a.train.unwrap_or_else(|| spec.train.clone());
    config.seed = derive_seed(spec.seed, streams::ESTIMATOR);
    config
}

/// Fit the `P(Ȳ | x)` scorer on `comp` and read `Q` off the anchors.
pub fn estimate_for(
    spec: &ExperimentSpec,
    prepared: &Prepared,
    comp: &CompDataset<f64>,
    truth: Option<&TransitionMatrix64>,
) -> Result<(QEstimate64, EstimateReport)> {
    let anchors = build_anchors(spec, prepared)?;
    let arch = spec.anchors.clone().unwrap_or_default().arch;
    let (predictor, predictor_report) = fit_comp_predictor(comp, arch, &estimator_config(spec))?;
    let est = estimate_q(&predictor, &anchors)?;
    let report = estimate_report(&est, truth, predictor_report)?;
    Ok((est, report))
}

pub fn estimate_report(
    est: &QEstimate64,
    truth: Option<&TransitionMatrix64>,
    predictor: TrainReport,
) -> Result<EstimateReport> {
    Ok(EstimateReport {
        raw: est.raw.clone(),
        projected: est.projected.rows(),
        anchor_counts: est.anchor_counts.clone(),
        removed_diagonal: est.removed_diagonal.clone(),
        uniform_fallback_rows: est.uniform_fallback_rows.clone(),
        error: truth.map(|q| q_error(&est.projected, q)).transpose()?,
        predictor,
    })
}

pub fn run(spec: &ExperimentSpec) -> Result<Outcome> {
    let started = Instant::now();
    spec.validate()?;
    spec.check_paths()?;
    let prepared = prepare_data(spec)?;
    let c = prepared.train.classes();
    let q = true_q(spec, c)?;
    let config = train_config(spec);
    let flip_seed = derive_seed(spec.seed, streams::FLIP);

    let mut resolved = spec.clone();
    resolved.train = config.clone();
    resolved.q.seed = Some(q_seed(spec));

    let mut flip = None;
    let mut estimate = None;
    let mut estimate_report = None;
    let mut q_used = None;
    let (model, report) = match spec.mode {
        Mode::Tl => run_true_labels(&prepared.train, spec.model, &config, Some(&prepared.test))?,
        mode => {
            let comp = corrupt(&prepared.train, &q, flip_seed)?;
            flip = FlipDiagnostics::of(&comp, &q);
            let used = match mode {
                Mode::LmTrueQ => q.clone(),
                Mode::LmUniformAssumed => TransitionMatrix64::uniform(c)?,
                _ => {
                    let (est, report) = estimate_for(spec, &prepared, &comp, Some(&q))?;
                    estimate_report = Some(report);
                    let projected = est.projected.clone();
                    estimate = Some(est);
                    projected
                }
            };
            let out = run_complementary(&comp, &used, spec.model, &config, Some(&prepared.test))?;
            q_used = Some(used.rows());
            out
        }
    };
    let test_acc = report.test_acc.unwrap_or(f64::NAN);
    Ok(Outcome {
        report: ExperimentReport {
            name: spec.name.clone(),
            mode: spec.mode,
            seed: spec.seed,
            spec: resolved,
            q_seed: q_seed(spec),
            flip_seed,
            n_train: prepared.train.len(),
            n_test: prepared.test.len(),
            classes: c,
            q_true: QDiagnostics::of(&q),
            q_used,
            flip,
            estimate: estimate_report,
            train: report,
            test_acc,
            seconds: started.elapsed().as_secs_f64(),
        },
        model,
        q_true: q,
        estimate,
    })
}

pub fn write_json(value: &impl Serialize, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// `report.json`, `q_true.txt`, `model.ckpt` and, for the estimated mode,
/// `q_est.txt` and `q_raw.txt`.
pub fn write_outputs(outcome: &Outcome, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_json(&outcome.report, dir.join("report.json"))?;
    outcome.q_true.save(dir.join("q_true.txt"))?;
    outcome.model.save(dir.join("model.ckpt"))?;
    if let Some(est) = &outcome.estimate {
        write_estimate(est, dir)?;
    }
    Ok(())
}

pub fn write_estimate(est: &QEstimate64, dir: &Path) -> Result<()> {
    est.projected.save(dir.join("q_est.txt"))?;
    std::fs::write(dir.join("q_raw.txt"), raw_text(&est.raw))?;
    Ok(())
}

/// The unprojected estimate; rows need not be distributions, so this is not
/// a loadable matrix file.
pub fn raw_text(raw: &[Vec<f64>]) -> String {
    let mut s = String::from("# raw anchor averages before projection\n");
    for row in raw {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    s
}
