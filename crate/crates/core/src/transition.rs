//! Class-transition matrices for complementary labels.
//!
//! `Q[i][j] = P(Ȳ = j | Y = i)`: row `i` is the distribution of the
//! complementary label given true class `i`. Every valid matrix has a zero
//! diagonal, rows on the probability simplex, and at least three classes.
//!
//! Classes are 0-based in the API. The text format is
//!
//! ```text
//! # comment lines start with '#'
//! c=3
//! 0 0.5 0.5
//! 0.5 0 0.5
//! 0.5 0.5 0
//! ```

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::float::{parse_float, Float};
use crate::rng;

/// Maximum number of regenerations when a with-zero matrix leaves a column empty.
pub const COVERAGE_RETRIES: usize = 1000;

/// Determinant magnitude below which `Q` is reported singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;

/// Mass assigned to the three groups of a without-zero row.
const WITHOUT_ZERO_MASS: [f64; 3] = [0.6, 0.3, 0.1];

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<F> {
    c: usize,
    entries: Vec<F>,
}

/// How complementary labels are biased.
#[derive(Debug, Clone, PartialEq)]
pub enum BiasRegime<F> {
    /// Every other class equally likely.
    Uniform,
    /// All off-diagonal entries positive, split 6:3:1 across three random groups.
    WithoutZero,
    /// Only `k` random classes per row receive mass.
    WithZero { k: usize },
    /// A user-supplied matrix.
    Manual(TransitionMatrix<F>),
}

/// Outcome of [`TransitionMatrix::invertibility`].
#[derive(Debug, Clone, PartialEq)]
pub struct Invertibility {
    pub determinant: f64,
    pub rank: usize,
    pub singular: bool,
    /// 1-norm condition number `‖Q‖₁‖Q⁻¹‖₁`; infinite when singular.
    pub condition: f64,
    /// Columns with no nonzero entry. Such a class is never named as a
    /// complementary label, so nothing can be learned about it.
    pub zero_columns: Vec<usize>,
}

impl Invertibility {
    pub fn is_invertible(&self) -> bool {
        !self.singular
    }
}

impl<F: Float> TransitionMatrix<F> {
    /// Build from row-major entries, validating every invariant.
    pub fn new(c: usize, entries: Vec<F>) -> Result<Self> {
        if c <= 2 {
            return Err(Error::InvalidClassCount(c));
        }
        if entries.len() != c * c {
            return Err(Error::Shape {
                what: "transition entries",
                expected: c * c,
                got: entries.len(),
            });
        }
        let q = Self { c, entries };
        q.validate()?;
        Ok(q)
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let c = rows.len();
        let mut entries = Vec::with_capacity(c * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Shape {
                    what: "transition row",
                    expected: c,
                    got: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(c, entries)
    }

    fn validate(&self) -> Result<()> {
        let tol = F::stochastic_tolerance();
        for i in 0..self.c {
            let row = self.row(i);
            if row[i] != F::zero() {
                return Err(Error::Validation(format!(
                    "diagonal entry ({i},{i}) is {} (must be 0)",
                    row[i]
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !(v >= F::zero() && v <= F::one()) {
                    return Err(Error::Validation(format!(
                        "entry ({i},{j}) = {v} outside [0, 1]"
                    )));
                }
            }
            let sum: F = row.iter().copied().sum();
            if (sum - F::one()).abs() > tol {
                return Err(Error::Validation(format!("row {i} sums to {sum}")));
            }
        }
        Ok(())
    }

    /// Uniform complementary labels: every off-diagonal entry is `1/(c-1)`.
    pub fn uniform(c: usize) -> Result<Self> {
        if c <= 2 {
            return Err(Error::InvalidClassCount(c));
        }
        let off = F::one() / F::cst((c - 1) as f64);
        let entries = (0..c * c)
            .map(|k| if k / c == k % c { F::zero() } else { off })
            .collect();
        Ok(Self { c, entries })
    }

    /// Biased but full-support matrix.
    ///
    /// For each row the `c-1` off-diagonal positions are shuffled and cut into
    /// three groups of sizes as equal as possible (larger groups first). Group
    /// members share the masses 0.6, 0.3 and 0.1 equally. With `c = 3` only two
    /// groups are non-empty and their masses are rescaled to 2/3 and 1/3.
    pub fn without_zero(c: usize, seed: u64) -> Result<Self> {
        if c <= 2 {
            return Err(Error::InvalidClassCount(c));
        }
        let mut rng = rng::seeded(seed);
        let slots = c - 1;
        let sizes: Vec<usize> = (0..3)
            .map(|g| slots / 3 + usize::from(g < slots % 3))
            .collect();
        let live_mass: f64 = sizes
            .iter()
            .zip(WITHOUT_ZERO_MASS)
            .filter(|(&s, _)| s > 0)
            .map(|(_, m)| m)
            .sum();

        let mut entries = vec![F::zero(); c * c];
        for i in 0..c {
            let mut others: Vec<usize> = (0..c).filter(|&j| j != i).collect();
            others.shuffle(&mut rng);
            let mut cursor = 0;
            for (g, &size) in sizes.iter().enumerate() {
                if size == 0 {
                    continue;
                }
                let w = F::cst(WITHOUT_ZERO_MASS[g] / live_mass / size as f64);
                for &j in &others[cursor..cursor + size] {
                    entries[i * c + j] = w;
                }
                cursor += size;
            }
        }
        Ok(Self { c, entries })
    }

    /// Sparse biased matrix: each row puts mass on exactly `k` random classes.
    ///
    /// The masses are `k` uniform (0, 1] draws normalized to sum to one. The
    /// whole matrix is redrawn until every column has a nonzero entry.
    pub fn with_zero(c: usize, k: usize, seed: u64) -> Result<Self> {
        if c <= 2 {
            return Err(Error::InvalidClassCount(c));
        }
        if k == 0 || k > c - 1 {
            return Err(Error::InvalidRegime(format!(
                "with-zero needs 1 <= k <= {}, got k = {k}",
                c - 1
            )));
        }
        let mut rng = rng::seeded(seed);
        for _ in 0..COVERAGE_RETRIES {
            let mut entries = vec![F::zero(); c * c];
            for i in 0..c {
                let mut others: Vec<usize> = (0..c).filter(|&j| j != i).collect();
                others.shuffle(&mut rng);
                let draws: Vec<f64> = (0..k).map(|_| 1.0 - rng.random::<f64>()).collect();
                let total: f64 = draws.iter().sum();
                for (&j, &u) in others[..k].iter().zip(&draws) {
                    entries[i * c + j] = F::cst(u / total);
                }
            }
            let q = Self { c, entries };
            if q.zero_columns().is_empty() {
                return Ok(q);
            }
        }
        Err(Error::RetriesExhausted(COVERAGE_RETRIES))
    }

    /// Generate a matrix for `regime`. Pure in `(regime, c, seed)`.
    pub fn generate(regime: &BiasRegime<F>, c: usize, seed: u64) -> Result<Self> {
        match regime {
            BiasRegime::Uniform => Self::uniform(c),
            BiasRegime::WithoutZero => Self::without_zero(c, seed),
            BiasRegime::WithZero { k } => Self::with_zero(c, *k, seed),
            BiasRegime::Manual(q) => {
                if q.c != c {
                    return Err(Error::Shape {
                        what: "manual transition matrix",
                        expected: c,
                        got: q.c,
                    });
                }
                Ok(q.clone())
            }
        }
    }

    pub fn num_classes(&self) -> usize {
        self.c
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.entries[i * self.c + j]
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.entries[i * self.c..(i + 1) * self.c]
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        (0..self.c).map(|i| self.get(i, j)).collect()
    }

    pub fn entries(&self) -> &[F] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<F>> {
        (0..self.c).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn zero_columns(&self) -> Vec<usize> {
        (0..self.c)
            .filter(|&j| (0..self.c).all(|i| self.get(i, j) == F::zero()))
            .collect()
    }

    /// Push a class posterior through the flip process: `out = Qᵀ p`.
    pub fn flip_posterior(&self, p: &[F]) -> Result<Vec<F>> {
        if p.len() != self.c {
            return Err(Error::Shape {
                what: "posterior",
                expected: self.c,
                got: p.len(),
            });
        }
        let mut out = vec![F::zero(); self.c];
        for (i, &pi) in p.iter().enumerate() {
            if pi == F::zero() {
                continue;
            }
            for (o, &qij) in out.iter_mut().zip(self.row(i)) {
                *o = *o + qij * pi;
            }
        }
        Ok(out)
    }

    /// Draw a complementary label for true class `y` from row `y`.
    ///
    /// Panics if `y >= c`.
    pub fn sample_complementary<R: Rng + ?Sized>(&self, y: usize, rng: &mut R) -> usize {
        let row = self.row(y);
        let u = F::cst(rng.random::<f64>());
        let mut acc = F::zero();
        let mut last = None;
        for (j, &p) in row.iter().enumerate() {
            if p == F::zero() {
                continue;
            }
            acc = acc + p;
            last = Some(j);
            if u < acc {
                return j;
            }
        }
        // u landed in the rounding gap above the cumulative sum
        last.expect("row has positive mass")
    }

    /// Determinant, rank and condition number by Gauss-Jordan elimination
    /// with partial pivoting, plus the list of all-zero columns.
    pub fn invertibility(&self) -> Invertibility {
        let c = self.c;
        let mut a: Vec<f64> = self.entries.iter().map(|v| v.as_f64()).collect();
        let mut inv: Vec<f64> = (0..c * c)
            .map(|k| if k / c == k % c { 1.0 } else { 0.0 })
            .collect();
        let mut det = 1.0;
        let mut rank = 0;
        let mut row = 0;
        for col in 0..c {
            let (piv, mag) = (row..c)
                .map(|r| (r, a[r * c + col].abs()))
                .fold((row, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if row >= c || mag < SINGULAR_TOLERANCE {
                det = 0.0;
                continue;
            }
            if piv != row {
                for k in 0..c {
                    a.swap(piv * c + k, row * c + k);
                    inv.swap(piv * c + k, row * c + k);
                }
                det = -det;
            }
            let p = a[row * c + col];
            det *= p;
            for k in 0..c {
                a[row * c + k] /= p;
                inv[row * c + k] /= p;
            }
            for r in 0..c {
                if r == row {
                    continue;
                }
                let f = a[r * c + col];
                if f != 0.0 {
                    for k in 0..c {
                        a[r * c + k] -= f * a[row * c + k];
                        inv[r * c + k] -= f * inv[row * c + k];
                    }
                }
            }
            rank += 1;
            row += 1;
        }
        let singular = rank < c || det.abs() < SINGULAR_TOLERANCE;
        let condition = if singular {
            f64::INFINITY
        } else {
            one_norm(&self.entries.iter().map(|v| v.as_f64()).collect::<Vec<_>>(), c)
                * one_norm(&inv, c)
        };
        Invertibility {
            determinant: if rank < c { 0.0 } else { det },
            rank,
            singular,
            condition,
            zero_columns: self.zero_columns(),
        }
    }

    /// Serialize in the line-oriented text format with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = format!("c={}\n", self.c);
        for i in 0..self.c {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (n, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing `c=<int>` header".into(),
        })?;
        let c: usize = header
            .strip_prefix("c=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line: n,
                msg: format!("expected `c=<int>`, found `{header}`"),
            })?;

        let mut rows = Vec::with_capacity(c);
        for (n, line) in lines {
            if rows.len() == c {
                return Err(Error::Parse {
                    line: n,
                    msg: format!("more than {c} rows"),
                });
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    parse_float::<F>(tok).ok_or_else(|| Error::Parse {
                        line: n,
                        msg: format!("not a number: `{tok}`"),
                    })
                })
                .collect::<Result<Vec<F>>>()?;
            if row.len() != c {
                return Err(Error::InconsistentWidth {
                    line: n,
                    expected: c,
                    got: row.len(),
                });
            }
            rows.push(row);
        }
        if rows.len() != c {
            return Err(Error::Parse {
                line: text.lines().count(),
                msg: format!("expected {c} rows, found {}", rows.len()),
            });
        }
        if c <= 2 {
            return Err(Error::Validation(format!("class count {c} must exceed 2")));
        }
        let entries = rows.into_iter().flatten().collect();
        let q = Self { c, entries };
        q.validate()?;
        Ok(q)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn one_norm(a: &[f64], c: usize) -> f64 {
    (0..c)
        .map(|j| (0..c).map(|i| a[i * c + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// The 10-class singular matrix shipped in `fixtures/singular_c10.q`.
pub fn singular_fixture<F: Float>() -> TransitionMatrix<F> {
    TransitionMatrix::from_text(include_str!("../fixtures/singular_c10.q"))
        .expect("bundled fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn check_valid(q: &TransitionMatrix<f64>) {
        for i in 0..q.num_classes() {
            assert_eq!(q.get(i, i), 0.0);
            let s: f64 = q.row(i).iter().sum();
            assert!((s - 1.0).abs() <= 1e-9);
            assert!(q.row(i).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn uniform_entries() {
        let q = TransitionMatrix::<f64>::uniform(10).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let want = if i == j { 0.0 } else { 1.0 / 9.0 };
                assert_eq!(q.get(i, j), want);
            }
        }
        let q3 = TransitionMatrix::<f64>::uniform(3).unwrap();
        assert_eq!(q3.get(0, 1), 0.5);
        assert!(matches!(
            TransitionMatrix::<f64>::uniform(2),
            Err(Error::InvalidClassCount(2))
        ));
    }

    #[test]
    fn without_zero_ten_classes() {
        for seed in 0..20 {
            let q = TransitionMatrix::<f64>::without_zero(10, seed).unwrap();
            check_valid(&q);
            for i in 0..10 {
                let mut off: Vec<f64> = (0..10).filter(|&j| j != i).map(|j| q.get(i, j)).collect();
                off.sort_by(|a, b| b.partial_cmp(a).unwrap());
                for (k, v) in off.iter().enumerate() {
                    let want = [0.2, 0.1, 0.1 / 3.0][k / 3];
                    assert_abs_diff_eq!(*v, want, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn without_zero_four_classes_is_permutation() {
        let q = TransitionMatrix::<f64>::without_zero(4, 3).unwrap();
        for i in 0..4 {
            let mut off: Vec<f64> = (0..4).filter(|&j| j != i).map(|j| q.get(i, j)).collect();
            off.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert_abs_diff_eq!(off[0], 0.6, epsilon = 1e-15);
            assert_abs_diff_eq!(off[1], 0.3, epsilon = 1e-15);
            assert_abs_diff_eq!(off[2], 0.1, epsilon = 1e-15);
        }
    }

    #[test]
    fn without_zero_three_classes_two_groups() {
        let q = TransitionMatrix::<f64>::without_zero(3, 0).unwrap();
        check_valid(&q);
        for i in 0..3 {
            let mut off: Vec<f64> = (0..3).filter(|&j| j != i).map(|j| q.get(i, j)).collect();
            off.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert_abs_diff_eq!(off[0], 2.0 / 3.0, epsilon = 1e-15);
            assert_abs_diff_eq!(off[1], 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn with_zero_support_and_coverage() {
        for seed in 0..20 {
            let q = TransitionMatrix::<f64>::with_zero(10, 3, seed).unwrap();
            check_valid(&q);
            for i in 0..10 {
                assert_eq!(q.row(i).iter().filter(|&&v| v > 0.0).count(), 3);
            }
            assert!(q.zero_columns().is_empty());
        }
        let full = TransitionMatrix::<f64>::with_zero(4, 3, 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(full.get(i, j) > 0.0, i != j);
            }
        }
    }

    #[test]
    fn with_zero_rejects_bad_k() {
        assert!(matches!(
            TransitionMatrix::<f64>::with_zero(5, 0, 0),
            Err(Error::InvalidRegime(_))
        ));
        assert!(matches!(
            TransitionMatrix::<f64>::with_zero(5, 5, 0),
            Err(Error::InvalidRegime(_))
        ));
    }

    #[test]
    fn with_zero_k1_small_c_eventually_covers_or_exhausts() {
        // k = 1, c = 3: coverage needs the two rows' picks to form a derangement
        match TransitionMatrix::<f64>::with_zero(3, 1, 5) {
            Ok(q) => assert!(q.zero_columns().is_empty()),
            Err(e) => assert!(matches!(e, Error::RetriesExhausted(COVERAGE_RETRIES))),
        }
    }

    #[test]
    fn generation_is_pure() {
        let a = TransitionMatrix::<f64>::with_zero(10, 3, 42).unwrap();
        let b = TransitionMatrix::<f64>::with_zero(10, 3, 42).unwrap();
        assert_eq!(a, b);
        let c = TransitionMatrix::<f64>::without_zero(10, 42).unwrap();
        let d = TransitionMatrix::<f64>::without_zero(10, 42).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn flip_one_hot_and_uniform() {
        let q = TransitionMatrix::<f64>::with_zero(5, 2, 9).unwrap();
        let mut e = vec![0.0; 5];
        e[3] = 1.0;
        assert_eq!(q.flip_posterior(&e).unwrap(), q.row(3).to_vec());

        let u = TransitionMatrix::<f64>::uniform(3).unwrap();
        let out = u.flip_posterior(&[1.0 / 3.0; 3]).unwrap();
        for v in out {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert!(matches!(
            u.flip_posterior(&[0.5, 0.5]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn flip_singular_fixture_first_row() {
        let q = singular_fixture::<f64>();
        let mut e = vec![0.0; 10];
        e[0] = 1.0;
        let out = q.flip_posterior(&e).unwrap();
        let want = [0.0, 0.3042, 0.0, 0.0, 0.5197, 0.0, 0.0, 0.1762, 0.0, 0.0];
        for (o, w) in out.iter().zip(want) {
            assert_abs_diff_eq!(*o, w, epsilon = 1e-4);
        }
    }

    #[test]
    fn sampling_respects_support_and_seed() {
        let q = TransitionMatrix::<f64>::from_rows(&[
            vec![0.0, 0.2, 0.8],
            vec![0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ])
        .unwrap();
        let mut r = rng::seeded(1);
        for _ in 0..10_000 {
            let j = q.sample_complementary(0, &mut r);
            assert!(j == 1 || j == 2);
        }
        let mut a = rng::seeded(7);
        let mut b = rng::seeded(7);
        let sa: Vec<usize> = (0..100).map(|_| q.sample_complementary(1, &mut a)).collect();
        let sb: Vec<usize> = (0..100).map(|_| q.sample_complementary(1, &mut b)).collect();
        assert_eq!(sa, sb);
    }

    #[test]
    fn sampling_frequencies_uniform() {
        let q = TransitionMatrix::<f64>::uniform(10).unwrap();
        let mut r = rng::seeded(11);
        let n = 1_000_000;
        let mut counts = [0usize; 10];
        for _ in 0..n {
            counts[q.sample_complementary(0, &mut r)] += 1;
        }
        assert_eq!(counts[0], 0);
        for &k in &counts[1..] {
            assert!((k as f64 / n as f64 - 1.0 / 9.0).abs() <= 0.005);
        }
    }

    #[test]
    fn invertibility_checks() {
        let u = TransitionMatrix::<f64>::uniform(3).unwrap().invertibility();
        assert!(u.is_invertible());
        assert_abs_diff_eq!(u.determinant, 0.25, epsilon = 1e-12);
        assert_eq!(u.rank, 3);

        let s = singular_fixture::<f64>().invertibility();
        assert!(s.singular);
        assert_eq!(s.rank, 9);
        assert!(s.zero_columns.is_empty());

        // cyclic permutation with zero diagonal
        let cyc = TransitionMatrix::<f64>::from_rows(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 0.0],
        ])
        .unwrap()
        .invertibility();
        assert!(cyc.is_invertible());
        assert_abs_diff_eq!(cyc.determinant.abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cyc.condition, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_column_reported() {
        let q = TransitionMatrix::<f64>::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.5, 0.5, 0.0],
        ])
        .unwrap();
        let inv = q.invertibility();
        assert_eq!(inv.zero_columns, vec![2]);
        assert!(inv.singular);
    }

    #[test]
    fn text_round_trip_and_errors() {
        let q = TransitionMatrix::<f64>::with_zero(7, 3, 3).unwrap();
        let back = TransitionMatrix::<f64>::from_text(&q.to_text()).unwrap();
        assert_eq!(q, back);

        let bad_sum = "c=3\n0 0.5 0.4\n0.5 0 0.5\n0.5 0.5 0\n";
        assert!(matches!(
            TransitionMatrix::<f64>::from_text(bad_sum),
            Err(Error::Validation(_))
        ));
        let bad_diag = "c=3\n0.1 0.5 0.4\n0.5 0 0.5\n0.5 0.5 0\n";
        assert!(matches!(
            TransitionMatrix::<f64>::from_text(bad_diag),
            Err(Error::Validation(_))
        ));
        let bad_tok = "# hi\nc=3\n0 0.5 x\n0.5 0 0.5\n0.5 0.5 0\n";
        assert!(matches!(
            TransitionMatrix::<f64>::from_text(bad_tok),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            TransitionMatrix::<f64>::from_text("c=3\n0 1 0\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            TransitionMatrix::<f64>::from_text("c=3\n0 1\n1 0 0\n1 0 0\n"),
            Err(Error::InconsistentWidth { line: 2, .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.txt");
        let q = TransitionMatrix::<f64>::without_zero(6, 1).unwrap();
        q.save(&path).unwrap();
        assert_eq!(TransitionMatrix::<f64>::load(&path).unwrap(), q);
    }

    #[test]
    fn f32_matrices_validate() {
        let q = TransitionMatrix::<f32>::with_zero(10, 3, 2).unwrap();
        let s: f32 = q.row(0).iter().sum();
        assert!((s - 1.0).abs() < 1e-5);
        let _ = singular_fixture::<f32>();
    }
}
