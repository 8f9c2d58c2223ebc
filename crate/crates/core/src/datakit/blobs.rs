use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::float::Float;
use crate::rng;

/// Isotropic Gaussian classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub c: usize,
    pub d: usize,
    pub n_per_class: usize,
    pub sigma: f64,
    /// `c` rows of length `d`; [`default_means`] when absent.
    #[serde(default)]
    pub means: Option<Vec<Vec<f64>>>,
}

/// Unit-norm class centres.
///
/// For `d >= c` these are the centred simplex vertices `e_k − 1/c`, scaled to
/// norm one; otherwise `c` equally spaced points on the unit circle in the
/// first two coordinates.
pub fn default_means(c: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    if d >= c && c > 1 {
        let off = -1.0 / c as f64;
        let on = 1.0 + off;
        let norm = (on * on + (c - 1) as f64 * off * off).sqrt();
        Ok((0..c)
            .map(|k| {
                (0..d)
                    .map(|j| match j {
                        _ if j == k => on / norm,
                        _ if j < c => off / norm,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect())
    } else if d >= 2 {
        Ok((0..c)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / c as f64;
                let mut m = vec![0.0; d];
                m[0] = t.cos();
                m[1] = t.sin();
                m
            })
            .collect())
    } else {
        Err(Error::Shape {
            what: "blob dimension (default means need d >= 2)",
            expected: 2,
            got: d,
        })
    }
}

/// Draw `n_per_class` points per class, class-major order.
pub fn make_blobs<F: Float>(spec: &BlobSpec, seed: u64) -> Result<LabeledDataset<F>> {
    if spec.sigma.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Config(format!("sigma must be > 0, got {}", spec.sigma)));
    }
    let means = match &spec.means {
        Some(m) => m.clone(),
        None => default_means(spec.c, spec.d)?,
    };
    if means.len() != spec.c {
        return Err(Error::Shape {
            what: "blob means",
            expected: spec.c,
            got: means.len(),
        });
    }
    if let Some(bad) = means.iter().find(|m| m.len() != spec.d) {
        return Err(Error::Shape {
            what: "blob mean dimension",
            expected: spec.d,
            got: bad.len(),
        });
    }
    let mut r = rng::seeded(seed);
    let n = spec.c * spec.n_per_class;
    let mut x = Vec::with_capacity(n * spec.d);
    let mut y = Vec::with_capacity(n);
    for (k, mean) in means.iter().enumerate() {
        for _ in 0..spec.n_per_class {
            for &m in mean {
                let z: f64 = StandardNormal.sample(&mut r);
                x.push(F::cst(m + spec.sigma * z));
            }
            y.push(k);
        }
    }
    LabeledDataset::new(x, spec.d, spec.c, y)
}
