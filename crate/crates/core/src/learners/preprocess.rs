use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-column affine standardization fitted on one split and reused on another.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<F> {
    pub mean: Array1<F>,
    pub scale: Array1<F>,
}

impl<F: Real> Standardizer<F> {
    /// Columns with (near) zero spread keep scale 1 so they map to 0.
    pub fn fit(x: ArrayView2<'_, F>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Empty("cannot standardize zero rows".into()));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let n = F::of_usize(x.nrows());
        let mut var = Array1::<F>::zeros(x.ncols());
        for row in x.rows() {
            for ((v, &m), &xi) in var.iter_mut().zip(mean.iter()).zip(row.iter()) {
                let c = xi - m;
                *v += c * c;
            }
        }
        let tiny = F::of(1e-12);
        let scale = var.mapv(|v| {
            let s = (v / n).sqrt();
            if s > tiny { s } else { F::one() }
        });
        Ok(Self { mean, scale })
    }

    pub fn transform(&self, x: ArrayView2<'_, F>) -> Array2<F> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for ((v, &m), &s) in row.iter_mut().zip(self.mean.iter()).zip(self.scale.iter()) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

/// Splits indices per class, sending `round(test_fraction * n_c)` of each
/// class to the test side. Classes with at least two members keep at least
/// one index on each side. Both index lists are returned sorted.
pub fn stratified_split<R: Rng + ?Sized>(
    labels: &[usize],
    test_fraction: f64,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    let mut train = Vec::with_capacity(labels.len());
    let mut test = Vec::new();
    for mut group in groups {
        if group.is_empty() {
            continue;
        }
        group.shuffle(rng);
        let n = group.len();
        let mut n_test = (test_fraction * n as f64).round() as usize;
        if n >= 2 {
            n_test = n_test.clamp(1, n - 1);
        } else {
            n_test = 0;
        }
        test.extend_from_slice(&group[..n_test]);
        train.extend_from_slice(&group[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
