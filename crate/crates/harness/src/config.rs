//! Experiment description, read from TOML.
//!
//! ```toml
//! name = "blobs-with0"
//! seed = 1
//! mode = "lm-true-q"          # tl | lm-true-q | lm-estimated-q | lm-uniform-assumed
//! standardize = true
//! classes = [0, 1, 2]         # optional class filter, applied before anything else
//!
//! [data]
//! source = "blobs"            # blobs | csv | idx
//! c = 3
//! d = 2
//! n_per_class = 3334
//! test_per_class = 2000
//! sigma = 0.5
//!
//! [q]
//! regime = "with0"            # uniform | without0 | with0 | manual
//! k = 2
//!
//! [model]
//! kind = "linear"             # linear | one-hidden (with `hidden = 3`)
//!
//! [train]                     # any TrainConfig field; `seed` is derived when absent
//! lr = 0.05
//!
//! [anchors]                   # lm-estimated-q only
//! per_class = 10
//! ```
//!
//! For `source = "csv"`, give `train` and optionally `test` paths (otherwise
//! `test_fraction` of the training file is held out) plus an optional
//! `schema` table. For `source = "idx"`, give `train_images`, `train_labels`,
//! `test_images` and `test_labels`.

use std::path::{Path, PathBuf};

use complabel::datakit::CsvSchema;
use complabel::model::Architecture;
use complabel::trainer::TrainConfig;
use complabel::transition::BiasRegime;
use complabel::{Error, Result, TransitionMatrix64};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Cross-entropy on true labels.
    Tl,
    /// Corrected loss with the transition matrix that generated the data.
    LmTrueQ,
    /// Corrected loss with a matrix estimated from anchors.
    LmEstimatedQ,
    /// Corrected loss with the uniform matrix, whatever generated the data.
    LmUniformAssumed,
}

impl Mode {
    pub fn uses_complementary_labels(self) -> bool {
        self != Mode::Tl
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    Blobs {
        c: usize,
        d: usize,
        n_per_class: usize,
        test_per_class: usize,
        sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        means: Option<Vec<Vec<f64>>>,
    },
    Csv {
        train: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test: Option<PathBuf>,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
        #[serde(default)]
        schema: CsvSchema,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

fn default_test_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeName {
    Uniform,
    Without0,
    With0,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QSpec {
    pub regime: RegimeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Generation seed; derived from the experiment seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Matrix file for the manual regime.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl QSpec {
    pub fn uniform() -> Self {
        Self {
            regime: RegimeName::Uniform,
            k: None,
            seed: None,
            file: None,
        }
    }

    pub fn with_zero(k: usize) -> Self {
        Self {
            regime: RegimeName::With0,
            k: Some(k),
            seed: None,
            file: None,
        }
    }

    pub fn manual(file: impl Into<PathBuf>) -> Self {
        Self {
            regime: RegimeName::Manual,
            k: None,
            seed: None,
            file: Some(file.into()),
        }
    }

    pub fn regime(&self) -> Result<BiasRegime<f64>> {
        Ok(match self.regime {
            RegimeName::Uniform => BiasRegime::Uniform,
            RegimeName::Without0 => BiasRegime::WithoutZero,
            RegimeName::With0 => BiasRegime::WithZero {
                k: self
                    .k
                    .ok_or_else(|| Error::Config("regime with0 needs `k`".into()))?,
            },
            RegimeName::Manual => {
                let file = self
                    .file
                    .as_ref()
                    .ok_or_else(|| Error::Config("regime manual needs `file`".into()))?;
                BiasRegime::Manual(TransitionMatrix64::load(file)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSpec {
    #[serde(default = "default_anchors_per_class")]
    pub per_class: usize,
    /// Labelled anchors supplied by the user: one CSV, or a directory of
    /// `anchors_<k>.csv` files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Size of the labelled pool anchors are picked from when no file is
    /// given. Blob pools are fresh draws; other sources use the training set.
    #[serde(default = "default_pool_per_class")]
    pub pool_per_class: usize,
    /// Scorer for `P(Ȳ | x)`.
    #[serde(default = "default_estimator_arch")]
    pub arch: Architecture,
    /// Training of the `P(Ȳ | x)` scorer; `seed` is derived when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
}

fn default_anchors_per_class() -> usize {
    complabel::estimator::DEFAULT_ANCHORS_PER_CLASS
}

fn default_pool_per_class() -> usize {
    200
}

fn default_estimator_arch() -> Architecture {
    Architecture::Linear
}

impl Default for AnchorSpec {
    fn default() -> Self {
        Self {
            per_class: default_anchors_per_class(),
            file: None,
            pool_per_class: default_pool_per_class(),
            arch: default_estimator_arch(),
            train: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub mode: Mode,
    pub data: DataSource,
    #[serde(default = "QSpec::uniform")]
    pub q: QSpec,
    #[serde(default = "default_model")]
    pub model: Architecture,
    #[serde(default)]
    pub train: TrainConfig,
    /// When false, `train.seed` is taken as written; otherwise it is derived
    /// from `seed`.
    #[serde(default = "yes")]
    pub derive_train_seed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<AnchorSpec>,
    #[serde(default = "yes")]
    pub standardize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_model() -> Architecture {
    Architecture::Linear
}

fn yes() -> bool {
    true
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Read a spec; relative paths inside it resolve against the file's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut spec = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let Some(dir) = path.parent() {
            spec.rebase(dir);
        }
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        match &mut self.data {
            DataSource::Blobs { .. } => {}
            DataSource::Csv { train, test, .. } => {
                fix(train);
                if let Some(t) = test {
                    fix(t);
                }
            }
            DataSource::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => {
                for p in [train_images, train_labels, test_images, test_labels] {
                    fix(p);
                }
            }
        }
        if let Some(f) = &mut self.q.file {
            fix(f);
        }
        if let Some(f) = self.anchors.as_mut().and_then(|a| a.file.as_mut()) {
            fix(f);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if let Some(t) = self.anchors.as_ref().and_then(|a| a.train.as_ref()) {
            t.validate()?;
        }
        match self.q.regime {
            RegimeName::With0 if self.q.k.is_none() => {
                return Err(Error::Config("regime with0 needs `k`".into()))
            }
            RegimeName::Manual if self.q.file.is_none() => {
                return Err(Error::Config("regime manual needs `file`".into()))
            }
            _ => {}
        }
        if let DataSource::Csv { test_fraction, .. } = &self.data {
            if !(*test_fraction > 0.0 && *test_fraction < 1.0) {
                return Err(Error::Config("test_fraction must lie in (0, 1)".into()));
            }
        }
        if let Some(a) = &self.anchors {
            if a.per_class == 0 {
                return Err(Error::Config("anchors.per_class must be positive".into()));
            }
        }
        Ok(())
    }

    /// Input paths that must exist before a run.
    pub fn check_paths(&self) -> Result<()> {
        let mut paths: Vec<&Path> = Vec::new();
        match &self.data {
            DataSource::Blobs { .. } => {}
            DataSource::Csv { train, test, .. } => {
                paths.push(train);
                if let Some(t) = test {
                    paths.push(t);
                }
            }
            DataSource::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => paths.extend([
                train_images.as_path(),
                train_labels,
                test_images,
                test_labels,
            ]),
        }
        if let Some(f) = &self.q.file {
            paths.push(f);
        }
        if self.mode == Mode::LmEstimatedQ {
            if let Some(f) = self.anchors.as_ref().and_then(|a| a.file.as_ref()) {
                paths.push(f);
            }
        }
        match paths.into_iter().find(|p| !p.exists()) {
            Some(p) => Err(Error::Config(format!("{} does not exist", p.display()))),
            None => Ok(()),
        }
    }
}
