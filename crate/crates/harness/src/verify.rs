//! Fixed-seed verification suites behind `complabel verify`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use complabel::datakit::{LabelKind, LabelView};
use complabel::model::{grad_check, loss_grad_h, Architecture, Objective};
use complabel::oracle::{certify_atom, DiscreteProblem};
use complabel::rng::{derive_seed, seeded};
use complabel::transition::{singular_fixture, BiasRegime};
use complabel::{Error, SoftmaxModel64, TransitionMatrix64};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

pub const GRADCHECK_CASES: usize = 100;
pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const LIPSCHITZ_SAMPLES: usize = 10_000;
pub const ZERO_SUM_TOLERANCE: f64 = 1e-9;
pub const ORACLE_PROBLEMS: usize = 20;
pub const ORACLE_RESOLUTION: usize = 50;
pub const PUSHFORWARD_DRAWS: usize = 1_000_000;
pub const PUSHFORWARD_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Gradcheck,
    Lipschitz,
    Oracle,
    Pushforward,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Gradcheck, Suite::Lipschitz, Suite::Oracle, Suite::Pushforward];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Gradcheck => "gradcheck",
            Suite::Lipschitz => "lipschitz",
            Suite::Oracle => "oracle",
            Suite::Pushforward => "pushforward",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    /// The suite's headline number (worst case over all cases).
    pub metric: f64,
    pub threshold: f64,
    pub cases: usize,
    pub seconds: f64,
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn summary(&self) -> String {
        format!(
            "{} {}: metric {:.3e} (threshold {:.1e}) over {} cases in {:.2}s",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.metric,
            self.threshold,
            self.cases,
            self.seconds
        )
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> SuiteReport {
    match suite {
        Suite::Gradcheck => gradcheck(seed, GRADCHECK_CASES),
        Suite::Lipschitz => lipschitz(seed, LIPSCHITZ_SAMPLES),
        Suite::Oracle => oracle(seed, ORACLE_PROBLEMS),
        Suite::Pushforward => pushforward(seed, PUSHFORWARD_DRAWS),
    }
}

/// A random matrix from a random regime.
fn random_q<R: Rng>(rng: &mut R, c: usize) -> TransitionMatrix64 {
    let regime = match rng.random_range(0..3) {
        0 => BiasRegime::Uniform,
        1 => BiasRegime::WithoutZero,
        _ => BiasRegime::WithZero {
            k: rng.random_range(2..c),
        },
    };
    TransitionMatrix64::generate(&regime, c, rng.random())
        .expect("k in 2..c always admits a covering matrix")
}

/// Analytic versus central-difference parameter gradients of the corrected
/// loss, over random matrices, architectures, inputs and labels.
pub fn gradcheck(seed: u64, cases: usize) -> SuiteReport {
    let started = Instant::now();
    let results: Vec<(f64, String)> = (0..cases as u64)
        .into_par_iter()
        .map(|case| {
            let mut rng = seeded(derive_seed(seed, case));
            let c = rng.random_range(3..=6);
            let d = rng.random_range(1..=5);
            let arch = if rng.random::<bool>() {
                Architecture::Linear
            } else {
                Architecture::OneHidden {
                    hidden: rng.random_range(2..=6),
                }
            };
            let q = random_q(&mut rng, c);
            let n = 4;
            let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
            let view = LabelView::new(&x, d, &y, c, LabelKind::Complementary);
            let model = SoftmaxModel64::init(arch, d, c, rng.random());
            let err = grad_check(&model, &Objective::Corrected(&q), &view, GRADCHECK_STEP)
                .unwrap_or(f64::INFINITY);
            (err, format!("case {case}: c={c} d={d} {arch:?}"))
        })
        .collect();
    let (metric, worst) = results
        .iter()
        .cloned()
        .fold((0.0, String::new()), |acc, r| if r.0 > acc.0 { r } else { acc });
    SuiteReport {
        suite: Suite::Gradcheck,
        passed: metric <= GRADCHECK_TOLERANCE,
        metric,
        threshold: GRADCHECK_TOLERANCE,
        cases,
        seconds: started.elapsed().as_secs_f64(),
        notes: vec![format!("worst relative error at {worst}")],
    }
}

/// Every partial of the corrected loss w.r.t. the scores lies in [-1, 1]
/// and the partials sum to zero.
pub fn lipschitz(seed: u64, samples: usize) -> SuiteReport {
    let started = Instant::now();
    let mut rng = seeded(seed);
    let mut worst_abs: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    let mut outside = 0usize;
    for s in 0..samples {
        let c = rng.random_range(3..=10);
        let q = random_q(&mut rng, c);
        // mix score scales so saturated softmax regimes are covered
        let scale = [1.0, 10.0, 100.0][s % 3];
        let h: Vec<f64> = (0..c).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let ybar = rng.random_range(0..c);
        let g = loss_grad_h(&q, &h, ybar);
        let m = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if m.is_nan() || m > 1.0 {
            outside += 1;
        }
        worst_abs = worst_abs.max(m);
        worst_sum = worst_sum.max(g.iter().sum::<f64>().abs());
    }
    SuiteReport {
        suite: Suite::Lipschitz,
        passed: outside == 0 && worst_sum <= ZERO_SUM_TOLERANCE,
        metric: worst_abs,
        threshold: 1.0,
        cases: samples,
        seconds: started.elapsed().as_secs_f64(),
        notes: vec![
            format!("{outside} partials outside [-1, 1]"),
            format!("largest |sum of partials| {worst_sum:.3e} (tolerance {ZERO_SUM_TOLERANCE:.0e})"),
        ],
    }
}

/// Grid-search certificates on random invertible problems with lattice
/// posteriors, plus an informational pass over off-lattice posteriors.
pub fn oracle(seed: u64, problems: usize) -> SuiteReport {
    let started = Instant::now();
    let r = ORACLE_RESOLUTION;
    let tolerance = 1.0 / r as f64;
    let results: Vec<Result<(f64, usize, usize, f64), String>> = (0..problems as u64)
        .into_par_iter()
        .map(|p| {
            let c = if p % 2 == 0 { 3 } else { 4 };
            let problem = DiscreteProblem::<f64>::random_invertible(c, 2, derive_seed(seed, p))
                .map_err(|e| e.to_string())?;
            let off_lattice = certify_atom(&problem, 0, r)
                .map(|c| c.linf_to_posterior)
                .unwrap_or(f64::INFINITY);
            let problem = problem.snapped_to_lattice(r);
            let mut linf: f64 = 0.0;
            let mut disagreements = 0;
            let mut ties = 0;
            for atom in 0..problem.posterior.len() {
                let cert = certify_atom(&problem, atom, r).map_err(|e| format!("problem {p}: {e}"))?;
                linf = linf.max(cert.linf_to_posterior);
                match cert.argmax_agrees {
                    Some(false) => disagreements += 1,
                    None => ties += 1,
                    Some(true) => {}
                }
            }
            Ok((linf, disagreements, ties, off_lattice))
        })
        .collect();
    let mut metric: f64 = 0.0;
    let mut disagreements = 0;
    let mut ties = 0;
    let mut off: Vec<f64> = Vec::new();
    let mut notes = Vec::new();
    let mut failed = false;
    for res in results {
        match res {
            Ok((l, d, t, o)) => {
                metric = metric.max(l);
                disagreements += d;
                ties += t;
                off.push(o);
            }
            Err(e) => {
                failed = true;
                notes.push(e);
            }
        }
    }
    notes.push(format!("{disagreements} argmax disagreements, {ties} tied posteriors skipped"));
    notes.push(format!(
        "off-lattice posteriors (not gated): {}/{} within 1/{r}, worst {:.4}",
        off.iter().filter(|&&v| v <= tolerance).count(),
        off.len(),
        off.iter().copied().fold(0.0, f64::max)
    ));
    SuiteReport {
        suite: Suite::Oracle,
        passed: !failed && disagreements == 0 && metric <= tolerance,
        metric,
        threshold: tolerance,
        cases: problems,
        seconds: started.elapsed().as_secs_f64(),
        notes,
    }
}

/// The four 10-class matrices the pushforward suite samples from.
pub fn pushforward_matrices(seed: u64) -> Vec<(&'static str, TransitionMatrix64)> {
    vec![
        ("uniform", TransitionMatrix64::uniform(10).expect("c = 10")),
        (
            "without0",
            TransitionMatrix64::without_zero(10, derive_seed(seed, 1)).expect("c = 10"),
        ),
        (
            "with0",
            TransitionMatrix64::with_zero(10, 3, derive_seed(seed, 2)).expect("c = 10, k = 3"),
        ),
        ("singular fixture", singular_fixture()),
    ]
}

/// Largest gap between sampled complementary-label frequencies and `Q` rows.
pub fn flip_deviation(q: &TransitionMatrix64, draws: usize, seed: u64) -> f64 {
    let c = q.num_classes();
    (0..c)
        .into_par_iter()
        .map(|y| {
            let mut rng = seeded(derive_seed(seed, y as u64));
            let mut counts = vec![0usize; c];
            for _ in 0..draws {
                counts[q.sample_complementary(y, &mut rng)] += 1;
            }
            counts
                .iter()
                .zip(q.row(y))
                .map(|(&k, &p)| (k as f64 / draws as f64 - p).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

pub fn pushforward(seed: u64, draws: usize) -> SuiteReport {
    let started = Instant::now();
    let mut metric: f64 = 0.0;
    let mut notes = Vec::new();
    for (i, (name, q)) in pushforward_matrices(seed).into_iter().enumerate() {
        let dev = flip_deviation(&q, draws, derive_seed(seed, 100 + i as u64));
        notes.push(format!("{name}: max deviation {dev:.5}"));
        metric = metric.max(dev);
    }
    SuiteReport {
        suite: Suite::Pushforward,
        passed: metric <= PUSHFORWARD_TOLERANCE,
        metric,
        threshold: PUSHFORWARD_TOLERANCE,
        cases: 4,
        seconds: started.elapsed().as_secs_f64(),
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn small_runs_pass() {
        assert!(gradcheck(1, 10).passed);
        assert!(lipschitz(1, 500).passed);
        assert!(oracle(1, 4).passed);
        assert!(pushforward(1, 100_000).passed);
    }

    #[test]
    fn deviation_shrinks_with_draws() {
        let q = TransitionMatrix64::with_zero(5, 2, 3).unwrap();
        assert!(flip_deviation(&q, 1_000_000, 1) < flip_deviation(&q, 1_000, 1));
    }
}
