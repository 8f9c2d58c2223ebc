use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use complabel::datakit::{corrupt, load_comp_csv, load_csv, save_comp_csv, CsvSchema};
use complabel::estimator::{estimate_q, fit_comp_predictor, AnchorSet};
use complabel::model::Architecture;
use complabel::trainer::TrainConfig;
use complabel::{Error, TransitionMatrix64};
use complabel_harness::config::{ExperimentSpec, Mode, QSpec, RegimeName};
use complabel_harness::curve::learning_curve;
use complabel_harness::experiment::{
    self, estimate_for, estimate_report, prepare_data, true_q, write_estimate, write_json,
    FlipDiagnostics, QDiagnostics,
};
use complabel_harness::table::{heat_pair, heat_table};
use complabel_harness::verify::{run_suite, Suite};
use serde_json::json;

#[derive(Parser)]
#[command(name = "complabel", version, about = "Learning from biased complementary labels")]
struct Cli {
    /// Seed; overrides the seed in `--config`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment spec (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Regime {
    Uniform,
    Without0,
    With0,
    Manual,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchName {
    Linear,
    OneHidden,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteName {
    All,
    Gradcheck,
    Lipschitz,
    Oracle,
    Pushforward,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a transition matrix and report its invertibility.
    GenQ {
        #[arg(long, value_enum)]
        regime: Regime,
        #[arg(long)]
        c: Option<usize>,
        /// Non-zeros per row for with0.
        #[arg(long)]
        k: Option<usize>,
        /// Matrix file for the manual regime.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Replace the labels of a CSV dataset by complementary labels.
    Flip {
        /// CSV with features and a label column.
        #[arg(long)]
        data: PathBuf,
        /// Transition matrix file.
        #[arg(long)]
        q: PathBuf,
        /// The CSV starts with a header row.
        #[arg(long)]
        header: bool,
    },
    /// Run the experiment described by `--config`.
    Train,
    /// Estimate Q from complementary labels and anchors.
    ///
    /// With `--config`, data, Q and anchors come from the spec. Otherwise give
    /// `--comp`, `--classes` and `--anchors`.
    EstimateQ {
        /// CSV of features plus a final 1-based complementary-label column.
        #[arg(long)]
        comp: Option<PathBuf>,
        #[arg(long)]
        classes: Option<usize>,
        /// Anchor CSV or directory of anchors_<k>.csv files.
        #[arg(long)]
        anchors: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "linear")]
        arch: ArchName,
        #[arg(long, default_value_t = complabel::model::DEFAULT_HIDDEN)]
        hidden: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        /// Generating matrix, for error diagnostics.
        #[arg(long)]
        q_true: Option<PathBuf>,
    },
    /// Run verification suites; exits with 1 if any fails.
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: SuiteName,
    },
    /// Accuracy versus training-set size for several bias regimes.
    LearningCurve {
        /// Comma-separated training sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3])]
        seeds: Vec<u64>,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Regime::Uniform, Regime::With0])]
        regimes: Vec<Regime>,
        /// Non-zeros per row for with0 (defaults to the spec's `q.k`).
        #[arg(long)]
        k: Option<usize>,
    },
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

enum Failure {
    /// A verification or run did not pass.
    Check(String),
    Usage(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenQ { regime, c, k, file } => gen_q(&cli, *regime, *c, *k, file.as_deref()),
        Command::Flip { data, q, header } => flip(&cli, data, q, *header),
        Command::Train => train(&cli),
        Command::EstimateQ {
            comp,
            classes,
            anchors,
            arch,
            hidden,
            lr,
            epochs,
            q_true,
        } => {
            let arch = match arch {
                ArchName::Linear => Architecture::Linear,
                ArchName::OneHidden => Architecture::OneHidden { hidden: *hidden },
            };
            estimate(&cli, comp.as_deref(), *classes, anchors.as_deref(), arch, *lr, *epochs, q_true.as_deref())
        }
        Command::Verify { suite } => verify(&cli, *suite),
        Command::LearningCurve {
            sizes,
            seeds,
            regimes,
            k,
        } => curve(&cli, sizes, seeds, regimes, *k),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_spec(cli: &Cli) -> Result<ExperimentSpec, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --config <spec.toml>".into()))?;
    let mut spec = ExperimentSpec::load(path)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(out) = &cli.out {
        spec.out = Some(out.clone());
    }
    Ok(spec)
}

fn out_dir(cli: &Cli, spec: Option<&ExperimentSpec>) -> Option<PathBuf> {
    cli.out.clone().or_else(|| {
        spec.map(|s| s.out.clone().unwrap_or_else(|| Path::new("runs").join(&s.name)))
    })
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn gen_q(cli: &Cli, regime: Regime, c: Option<usize>, k: Option<usize>, file: Option<&Path>) -> CmdResult {
    let seed = cli.seed.unwrap_or(0);
    let spec = QSpec {
        regime: match regime {
            Regime::Uniform => RegimeName::Uniform,
            Regime::Without0 => RegimeName::Without0,
            Regime::With0 => RegimeName::With0,
            Regime::Manual => RegimeName::Manual,
        },
        k,
        seed: Some(seed),
        file: file.map(Path::to_path_buf),
    };
    let regime = spec.regime()?;
    let q = match (&regime, c) {
        (complabel::transition::BiasRegime::Manual(m), _) => m.clone(),
        (_, Some(c)) => TransitionMatrix64::generate(&regime, c, seed)?,
        (_, None) => return Err(Error::Config("--c is required for generated regimes".into()).into()),
    };
    let diag = QDiagnostics::of(&q);
    print!("{}", q.to_text());
    println!(
        "# determinant {:.6e}, rank {}/{}, condition {:.3e}, {}",
        diag.determinant,
        diag.rank,
        q.num_classes(),
        diag.condition,
        if diag.singular { "singular" } else { "invertible" }
    );
    if diag.zero_columns.is_empty() {
        println!("# every complementary label is reachable");
    } else {
        println!("# unreachable complementary labels: {:?}", diag.zero_columns);
    }
    if let Some(dir) = out_dir(cli, None) {
        ensure_dir(&dir)?;
        q.save(dir.join("q_true.txt"))?;
        write_json(&json!({ "command": "gen-q", "q": spec, "diagnostics": diag }), dir.join("report.json"))?;
    }
    Ok(())
}

fn flip(cli: &Cli, data: &Path, q_path: &Path, header: bool) -> CmdResult {
    let seed = cli.seed.unwrap_or(0);
    let schema = CsvSchema {
        header,
        ..CsvSchema::default()
    };
    let (labeled, names) = load_csv::<f64>(data, &schema)?;
    let q = TransitionMatrix64::load(q_path)?;
    let comp = corrupt(&labeled, &q, seed)?;
    let diag = FlipDiagnostics::of(&comp, &q).expect("corrupt records provenance");
    print!("{}", heat_pair("Q", &q.rows(), "empirical", &diag.empirical));
    println!("max deviation {:.4} over {} examples", diag.max_deviation, comp.len());
    let dir = out_dir(cli, None).unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&dir)?;
    save_comp_csv(&comp, dir.join("comp.csv"))?;
    write_json(
        &json!({
            "command": "flip",
            "data": data,
            "q_file": q_path,
            "seed": seed,
            "label_names": names,
            "q": q.rows(),
            "flip": diag,
        }),
        dir.join("report.json"),
    )?;
    Ok(())
}

fn train(cli: &Cli) -> CmdResult {
    let spec = load_spec(cli)?;
    let dir = out_dir(cli, Some(&spec)).expect("spec gives a default");
    match experiment::run(&spec) {
        Ok(outcome) => {
            experiment::write_outputs(&outcome, &dir)?;
            let r = &outcome.report;
            println!(
                "{} [{}]: test accuracy {:.4} after {} epochs (best epoch {}), outputs in {}",
                r.name,
                serde_json::to_value(r.mode).expect("mode serializes").as_str().unwrap_or(""),
                r.test_acc,
                r.train.epochs.len(),
                r.train.best_epoch,
                dir.display()
            );
            if let Some(est) = &r.estimate {
                print!("{}", heat_pair("true Q", &r.q_true.rows, "estimated Q", &est.projected));
            }
            Ok(())
        }
        Err(Error::Divergence { epoch, report }) => {
            ensure_dir(&dir)?;
            write_json(
                &json!({ "error": "divergence", "epoch": epoch, "spec": spec, "train": report }),
                dir.join("report.json"),
            )?;
            Err(Failure::Check(format!(
                "training diverged at epoch {epoch}; partial report in {}",
                dir.display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    cli: &Cli,
    comp_path: Option<&Path>,
    classes: Option<usize>,
    anchors: Option<&Path>,
    arch: Architecture,
    lr: f64,
    epochs: usize,
    q_true: Option<&Path>,
) -> CmdResult {
    if cli.config.is_some() {
        let mut spec = load_spec(cli)?;
        spec.mode = Mode::LmEstimatedQ;
        let dir = out_dir(cli, Some(&spec)).expect("spec gives a default");
        let prepared = prepare_data(&spec)?;
        let q = true_q(&spec, prepared.train.classes())?;
        let comp = corrupt(
            &prepared.train,
            &q,
            complabel::rng::derive_seed(spec.seed, experiment::streams::FLIP),
        )?;
        let (est, report) = estimate_for(&spec, &prepared, &comp, Some(&q))?;
        ensure_dir(&dir)?;
        q.save(dir.join("q_true.txt"))?;
        write_estimate(&est, &dir)?;
        write_json(&json!({ "command": "estimate-q", "spec": spec, "estimate": report }), dir.join("report.json"))?;
        print!("{}", heat_pair("true Q", &q.rows(), "estimated Q", &report.projected));
        if let Some(e) = &report.error {
            println!("max entry error {:.4}, mean {:.4}", e.max_abs, e.mean_abs);
        }
        return Ok(());
    }
    let (Some(comp_path), Some(classes), Some(anchor_path)) = (comp_path, classes, anchors) else {
        return Err(Error::Config("estimate-q needs --config, or --comp, --classes and --anchors".into()).into());
    };
    let comp = load_comp_csv::<f64>(comp_path, classes)?;
    let anchor_set = AnchorSet::<f64>::load(anchor_path, classes)?;
    let config = TrainConfig {
        lr,
        max_epochs: epochs,
        seed: cli.seed.unwrap_or(0),
        ..TrainConfig::default()
    };
    let (predictor, predictor_report) = fit_comp_predictor(&comp, arch, &config)?;
    let est = estimate_q(&predictor, &anchor_set)?;
    let truth = q_true.map(TransitionMatrix64::load).transpose()?;
    let report = estimate_report(&est, truth.as_ref(), predictor_report)?;
    let dir = out_dir(cli, None).unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&dir)?;
    write_estimate(&est, &dir)?;
    if let Some(t) = &truth {
        t.save(dir.join("q_true.txt"))?;
        print!("{}", heat_pair("true Q", &t.rows(), "estimated Q", &report.projected));
    } else {
        print!("{}", heat_table("estimated Q", &report.projected));
    }
    if let Some(e) = &report.error {
        println!("max entry error {:.4}, mean {:.4}", e.max_abs, e.mean_abs);
    }
    if !report.uniform_fallback_rows.is_empty() {
        println!("rows replaced by the uniform row: {:?}", report.uniform_fallback_rows);
    }
    write_json(
        &json!({
            "command": "estimate-q",
            "comp": comp_path,
            "anchors": anchor_path,
            "arch": arch,
            "train": config,
            "estimate": report,
        }),
        dir.join("report.json"),
    )?;
    Ok(())
}

fn verify(cli: &Cli, suite: SuiteName) -> CmdResult {
    let seed = cli.seed.unwrap_or(0);
    let suites: Vec<Suite> = match suite {
        SuiteName::All => Suite::ALL.to_vec(),
        SuiteName::Gradcheck => vec![Suite::Gradcheck],
        SuiteName::Lipschitz => vec![Suite::Lipschitz],
        SuiteName::Oracle => vec![Suite::Oracle],
        SuiteName::Pushforward => vec![Suite::Pushforward],
    };
    let reports: Vec<_> = suites.into_iter().map(|s| run_suite(s, seed)).collect();
    for r in &reports {
        println!("{}", r.summary());
        for n in &r.notes {
            println!("    {n}");
        }
    }
    if let Some(dir) = out_dir(cli, None) {
        ensure_dir(&dir)?;
        write_json(&json!({ "command": "verify", "seed": seed, "suites": reports }), dir.join("report.json"))?;
    }
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.suite.to_string()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed: {}", failed.join(", "))))
    }
}

fn curve(cli: &Cli, sizes: &[usize], seeds: &[u64], regimes: &[Regime], k: Option<usize>) -> CmdResult {
    let spec = load_spec(cli)?;
    let qspecs: Vec<QSpec> = regimes
        .iter()
        .map(|r| {
            Ok(match r {
                Regime::Uniform => QSpec::uniform(),
                Regime::Without0 => QSpec {
                    regime: RegimeName::Without0,
                    ..QSpec::uniform()
                },
                Regime::With0 => QSpec::with_zero(
                    k.or(spec.q.k)
                        .ok_or_else(|| Error::Config("with0 needs --k or q.k in the spec".into()))?,
                ),
                Regime::Manual => spec.q.clone(),
            })
        })
        .collect::<Result<_, Error>>()?;
    let table = learning_curve(&spec, sizes, seeds, &qspecs)?;
    print!("{}", table.render());
    let dir = out_dir(cli, Some(&spec)).expect("spec gives a default");
    ensure_dir(&dir)?;
    write_json(
        &json!({ "command": "learning-curve", "spec": spec, "curve": table, "monotone": table.monotone() }),
        dir.join("report.json"),
    )?;
    Ok(())
}
