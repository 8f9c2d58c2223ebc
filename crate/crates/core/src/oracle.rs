//! Brute-force checks on small discrete problems.
//!
//! A [`DiscreteProblem`] has finitely many feature atoms, each with a known
//! class posterior `P(Y|x)`, and a transition matrix `Q`. Because everything
//! is explicit, the minimizer of the corrected conditional risk
//!
//! ```text
//! ψ̄(g) = −Σ_j p̄_j · log max((Qᵀg)_j, ε),   p̄ = Qᵀ P(Y|x)
//! ```
//!
//! can be located by exhaustive search over the simplex lattice
//! `{k/r : Σk = r}` and compared with `P(Y|x)`.
//!
//! The arithmetic here is written out independently of [`crate::model`] and
//! [`TransitionMatrix::flip_posterior`] so it can serve as their reference.

use rand::Rng;

use crate::error::{Error, Result};
use crate::float::{argmax, Float};
use crate::model::LOSS_EPS;
use crate::rng;
use crate::transition::TransitionMatrix;

pub const MAX_GRID_CLASSES: usize = 5;
pub const MIN_GRID_RESOLUTION: usize = 10;

/// Relative tolerance under which two lattice risks count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProblem<F> {
    pub px: Vec<F>,
    pub posterior: Vec<Vec<F>>,
    pub q: TransitionMatrix<F>,
}

fn on_simplex<F: Float>(p: &[F]) -> bool {
    let s: F = p.iter().copied().sum();
    p.iter().all(|&v| v >= F::zero()) && (s - F::one()).abs() <= F::cst(1e-9).max(F::epsilon() * F::cst(64.0))
}

impl<F: Float> DiscreteProblem<F> {
    pub fn new(px: Vec<F>, posterior: Vec<Vec<F>>, q: TransitionMatrix<F>) -> Result<Self> {
        if px.len() != posterior.len() {
            return Err(Error::Shape {
                what: "atom prior",
                expected: posterior.len(),
                got: px.len(),
            });
        }
        if !on_simplex(&px) {
            return Err(Error::Validation("atom prior is not a distribution".into()));
        }
        for (a, row) in posterior.iter().enumerate() {
            if row.len() != q.num_classes() {
                return Err(Error::Shape {
                    what: "posterior row",
                    expected: q.num_classes(),
                    got: row.len(),
                });
            }
            if !on_simplex(row) {
                return Err(Error::Validation(format!("posterior of atom {a} is not a distribution")));
            }
        }
        Ok(Self { px, posterior, q })
    }

    /// `m` atoms with uniform prior, flat-Dirichlet posteriors and a random
    /// invertible `Q` with 1-norm condition number at most 10.
    pub fn random_invertible(c: usize, m: usize, seed: u64) -> Result<Self> {
        let mut r = rng::seeded(seed);
        let q = loop {
            let s = r.random::<u64>();
            let cand = if r.random::<bool>() {
                TransitionMatrix::with_zero(c, c - 1, s)?
            } else {
                TransitionMatrix::without_zero(c, s)?
            };
            let inv = cand.invertibility();
            if inv.is_invertible() && inv.condition <= 10.0 {
                break cand;
            }
        };
        let posterior = (0..m)
            .map(|_| {
                let e: Vec<f64> = (0..c).map(|_| -(1.0 - r.random::<f64>()).ln()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| F::cst(v / s)).collect()
            })
            .collect();
        let px = vec![F::one() / F::cst(m as f64); m];
        Self::new(px, posterior, q)
    }

    /// Round every posterior to the nearest point of the `{k/r}` lattice
    /// (largest-remainder rounding), so the exact risk minimizer is a
    /// candidate of [`brute_force_minimizer`] at resolution `r`.
    pub fn snapped_to_lattice(mut self, r: usize) -> Self {
        let rf = F::cst(r as f64);
        for row in &mut self.posterior {
            let scaled: Vec<F> = row.iter().map(|&p| p * rf).collect();
            let mut k: Vec<usize> = scaled.iter().map(|v| v.floor().to_usize().unwrap_or(0)).collect();
            let mut order: Vec<usize> = (0..k.len()).collect();
            order.sort_by(|&a, &b| {
                let ra = scaled[a] - scaled[a].floor();
                let rb = scaled[b] - scaled[b].floor();
                rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
            });
            let missing = r.saturating_sub(k.iter().sum());
            for &i in order.iter().cycle().take(missing) {
                k[i] += 1;
            }
            *row = k.iter().map(|&ki| F::cst(ki as f64) / rf).collect();
        }
        self
    }

    pub fn classes(&self) -> usize {
        self.q.num_classes()
    }

    /// `P(Ȳ | x_atom)`, summed long-hand as `Σ_{i≠j} Q[i][j]·P(Y=i|x)`.
    pub fn complementary_posterior(&self, atom: usize) -> Vec<F> {
        let c = self.classes();
        let p = &self.posterior[atom];
        (0..c)
            .map(|j| {
                let mut acc = F::zero();
                for (i, &pi) in p.iter().enumerate() {
                    if i != j {
                        acc = acc + self.q.get(i, j) * pi;
                    }
                }
                acc
            })
            .collect()
    }
}

/// `ψ̄(g) = −Σ_j p̄_j log max((Qᵀg)_j, ε)`.
pub fn conditional_risk<F: Float>(q: &TransitionMatrix<F>, g: &[F], pbar: &[F]) -> Result<F> {
    let c = q.num_classes();
    for (what, v) in [("candidate g", g), ("complementary posterior", pbar)] {
        if v.len() != c {
            return Err(Error::Shape {
                what,
                expected: c,
                got: v.len(),
            });
        }
    }
    let eps = F::cst(LOSS_EPS);
    let mut risk = F::zero();
    for (j, &pj) in pbar.iter().enumerate() {
        if pj == F::zero() {
            continue;
        }
        let mut qj = F::zero();
        for (i, &gi) in g.iter().enumerate() {
            qj = qj + q.get(i, j) * gi;
        }
        risk = risk - pj * qj.max(eps).ln();
    }
    Ok(risk)
}

/// Visit every composition of `r` into `c` non-negative parts, in
/// lexicographic order.
pub fn for_each_lattice_point(c: usize, r: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(pos: usize, left: usize, buf: &mut [usize], visit: &mut dyn FnMut(&[usize])) {
        if pos + 1 == buf.len() {
            buf[pos] = left;
            visit(buf);
            return;
        }
        for k in 0..=left {
            buf[pos] = k;
            rec(pos + 1, left - k, buf, visit);
        }
    }
    if c == 0 {
        return;
    }
    let mut buf = vec![0; c];
    rec(0, r, &mut buf, &mut visit);
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum<F> {
    pub g: Vec<F>,
    pub risk: F,
    pub argmax: usize,
    /// Lattice points whose risk ties the minimum.
    pub ties: usize,
}

/// Exhaustive lattice search for the minimizer of [`conditional_risk`] at one
/// atom.
///
/// Ties go to the lowest argmax, then the lexicographically smallest lattice
/// point. When
/// the atom's posterior has a unique argmax and tied minima disagree on the
/// argmax, the grid cannot certify the decision and
/// [`Error::GridTooCoarse`] is returned.
pub fn brute_force_minimizer<F: Float>(
    problem: &DiscreteProblem<F>,
    atom: usize,
    resolution: usize,
) -> Result<GridMinimum<F>> {
    let c = problem.classes();
    if c > MAX_GRID_CLASSES {
        return Err(Error::Config(format!(
            "grid search supports at most {MAX_GRID_CLASSES} classes, got {c}"
        )));
    }
    if resolution < MIN_GRID_RESOLUTION {
        return Err(Error::Config(format!(
            "grid resolution must be at least {MIN_GRID_RESOLUTION}, got {resolution}"
        )));
    }
    let pbar = problem.complementary_posterior(atom);
    let rf = F::cst(resolution as f64);
    let mut best: Option<(F, Vec<usize>)> = None;
    let mut tied_argmax: Vec<usize> = Vec::new();
    let mut ties = 0usize;
    let mut err = None;
    let mut g = vec![F::zero(); c];
    for_each_lattice_point(c, resolution, |k| {
        for (gi, &ki) in g.iter_mut().zip(k) {
            *gi = F::cst(ki as f64) / rf;
        }
        let risk = match conditional_risk(&problem.q, &g, &pbar) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                return;
            }
        };
        let am = argmax(k);
        match &best {
            None => {
                best = Some((risk, k.to_vec()));
                tied_argmax = vec![am];
                ties = 1;
            }
            Some((b, _)) => {
                let tol = F::cst(TIE_TOLERANCE) * b.abs().max(F::one());
                if risk < *b - tol {
                    best = Some((risk, k.to_vec()));
                    tied_argmax = vec![am];
                    ties = 1;
                } else if (risk - *b).abs() <= tol {
                    tied_argmax.push(am);
                    ties += 1;
                    let best_am = argmax(&best.as_ref().unwrap().1);
                    let b = *b;
                    if am < best_am {
                        best = Some((risk.min(b), k.to_vec()));
                    } else if risk < b {
                        best.as_mut().unwrap().0 = risk;
                    }
                }
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let (risk, k) = best.expect("lattice is non-empty");
    let posterior = &problem.posterior[atom];
    let unique_truth = unique_argmax(posterior);
    if unique_truth.is_some() && tied_argmax.iter().any(|&a| a != tied_argmax[0]) {
        return Err(Error::GridTooCoarse);
    }
    let g: Vec<F> = k.iter().map(|&ki| F::cst(ki as f64) / rf).collect();
    Ok(GridMinimum {
        argmax: argmax(&g),
        g,
        risk,
        ties,
    })
}

/// `Some(argmax)` when the largest entry is strictly larger than the rest.
pub fn unique_argmax<F: Float>(p: &[F]) -> Option<usize> {
    let a = argmax(p);
    let tied = p
        .iter()
        .enumerate()
        .any(|(i, &v)| i != a && v == p[a]);
    (!tied).then_some(a)
}

/// Outcome of [`certify_atom`].
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub linf_to_posterior: f64,
    /// `None` when the true posterior has a tied argmax.
    pub argmax_agrees: Option<bool>,
    pub risk_at_posterior: f64,
    pub risk_at_minimum: f64,
}

/// Run the grid search at one atom and compare with the true posterior.
pub fn certify_atom<F: Float>(
    problem: &DiscreteProblem<F>,
    atom: usize,
    resolution: usize,
) -> Result<Certificate> {
    let min = brute_force_minimizer(problem, atom, resolution)?;
    let post = &problem.posterior[atom];
    let pbar = problem.complementary_posterior(atom);
    let linf = min
        .g
        .iter()
        .zip(post)
        .map(|(&a, &b)| (a - b).abs().as_f64())
        .fold(0.0, f64::max);
    Ok(Certificate {
        linf_to_posterior: linf,
        argmax_agrees: unique_argmax(post).map(|t| t == min.argmax),
        risk_at_posterior: conditional_risk(&problem.q, post, &pbar)?.as_f64(),
        risk_at_minimum: min.risk.as_f64(),
    })
}

/// Largest gap between Monte-Carlo complementary-label frequencies and the
/// analytic `P(Ȳ | x)`, over all atoms and classes.
///
/// Each draw samples `y ~ P(Y|x)` and then `ȳ` with
/// [`TransitionMatrix::sample_complementary`].
pub fn pushforward_check<F: Float>(problem: &DiscreteProblem<F>, samples_per_atom: usize, seed: u64) -> f64 {
    let c = problem.classes();
    let mut r = rng::seeded(seed);
    let mut worst: f64 = 0.0;
    for atom in 0..problem.posterior.len() {
        let cdf: Vec<f64> = problem.posterior[atom]
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p.as_f64();
                Some(*acc)
            })
            .collect();
        let mut counts = vec![0usize; c];
        for _ in 0..samples_per_atom {
            let u = r.random::<f64>() * cdf[c - 1];
            let y = cdf.iter().position(|&v| u < v).unwrap_or(c - 1);
            counts[problem.q.sample_complementary(y, &mut r)] += 1;
        }
        let analytic = problem.complementary_posterior(atom);
        for (k, a) in counts.iter().zip(analytic) {
            let freq = *k as f64 / samples_per_atom as f64;
            worst = worst.max((freq - a.as_f64()).abs());
        }
    }
    worst
}
