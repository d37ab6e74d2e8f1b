//! Utility and structure-preservation measurements.

use std::collections::{BTreeMap, HashSet};

use log::warn;
use ndarray::{ArrayView2, Axis};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{
    fit_logistic, knn_from_distances, pairwise_sq_distances, predict, stratified_split, FitConfig, Standardizer,
};
use crate::rng;
use crate::scalar::Real;

/// Linear-probe settings: standardized features, stratified split, seeded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub fit: FitConfig,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub accuracy: f64,
    pub f1_weighted: f64,
    pub knn_overlap: BTreeMap<usize, f64>,
    pub spearman_rho: f64,
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len().max(1) as f64
}

/// F1 averaged over the classes present in `truth`, weighted by support.
pub fn f1_weighted(pred: &[usize], truth: &[usize], classes: usize) -> f64 {
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut support = vec![0usize; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        support[t] += 1;
        if p == t {
            tp[p] += 1;
        } else if p < classes {
            fp[p] += 1;
        }
    }
    let total: usize = support.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for c in 0..classes {
        if support[c] == 0 {
            continue;
        }
        let fn_ = support[c] - tp[c];
        let denom = 2 * tp[c] + fp[c] + fn_;
        let f1 = if denom == 0 { 0.0 } else { 2.0 * tp[c] as f64 / denom as f64 };
        acc += f1 * support[c] as f64;
    }
    acc / total as f64
}

/// Trains a standardized logistic probe on a stratified split of `z` and
/// returns `(accuracy, weighted F1)` on the held-out side.
pub(crate) fn fit_and_score<F: Real>(
    z: ArrayView2<'_, F>,
    y: &[usize],
    classes: usize,
    cfg: &ProbeConfig,
    split_stream: u64,
) -> Result<(f64, f64)> {
    if z.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} rows vs {} labels", z.nrows(), y.len())));
    }
    let distinct: HashSet<usize> = y.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::SingleClass("labels contain a single class".into()));
    }
    let mut r = rng::stream(cfg.seed, split_stream);
    let (train, test) = stratified_split(y, cfg.test_fraction, &mut r)?;
    let test_classes: HashSet<usize> = test.iter().map(|&i| y[i]).collect();
    if test_classes.len() < 2 {
        return Err(Error::SingleClass("test fold contains a single class".into()));
    }
    let x_train = z.select(Axis(0), &train);
    let x_test = z.select(Axis(0), &test);
    let y_train: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let y_test: Vec<usize> = test.iter().map(|&i| y[i]).collect();
    let scaler = Standardizer::fit(x_train.view())?;
    let x_train = scaler.transform(x_train.view());
    let x_test = scaler.transform(x_test.view());
    let model = fit_logistic(x_train.view(), &y_train, classes, &cfg.fit)?;
    let pred = predict(&model, x_test.view())?;
    Ok((accuracy(&pred, &y_test), f1_weighted(&pred, &y_test, classes)))
}

const PROBE_STREAM: u64 = 11;

/// Linear-probe accuracy and support-weighted F1 on a stratified 80/20 split.
pub fn probe_utility<F: Real>(z: ArrayView2<'_, F>, y: &[usize], cfg: &ProbeConfig) -> Result<(f64, f64)> {
    let classes = y.iter().copied().max().map_or(0, |m| m + 1);
    fit_and_score(z, y, classes, cfg, PROBE_STREAM)
}

fn sample_rows(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if n <= cap {
        (0..n).collect()
    } else {
        let mut r = rng::stream(seed, 21);
        let mut idx = index::sample(&mut r, n, cap).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// Neighborhood overlap for several `k` over one seeded row sample; the
/// distance matrices are computed once.
pub fn knn_overlaps<F: Real>(
    x: ArrayView2<'_, F>,
    z: ArrayView2<'_, F>,
    ks: &[usize],
    sample_cap: usize,
    seed: u64,
) -> Result<BTreeMap<usize, f64>> {
    if x.nrows() != z.nrows() {
        return Err(Error::DimensionMismatch(format!("{} vs {} rows", x.nrows(), z.nrows())));
    }
    let m = x.nrows().min(sample_cap);
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k >= m) {
        return Err(Error::InvalidParameter(format!("k = {k} must lie in [1, {m})")));
    }
    let rows = sample_rows(x.nrows(), sample_cap, seed);
    let xs = x.select(Axis(0), &rows);
    let zs = z.select(Axis(0), &rows);
    let dx = pairwise_sq_distances(xs.view());
    let dz = pairwise_sq_distances(zs.view());
    let queries: Vec<usize> = (0..m).collect();
    let mut out = BTreeMap::new();
    for &k in ks {
        let nx = knn_from_distances(dx.view(), k, &queries)?;
        let nz = knn_from_distances(dz.view(), k, &queries)?;
        let total: f64 = nx
            .iter()
            .zip(&nz)
            .map(|(a, b)| {
                let set: HashSet<usize> = a.iter().copied().collect();
                b.iter().filter(|j| set.contains(j)).count() as f64 / k as f64
            })
            .sum();
        out.insert(k, total / m as f64);
    }
    Ok(out)
}

/// Mean fraction of shared k-nearest neighbors between the two spaces.
pub fn knn_overlap<F: Real>(
    x: ArrayView2<'_, F>,
    z: ArrayView2<'_, F>,
    k: usize,
    sample_cap: usize,
    seed: u64,
) -> Result<f64> {
    Ok(knn_overlaps(x, z, &[k], sample_cap, seed)?[&k])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpearmanResult {
    pub rho: f64,
    /// Set when one of the distance lists had zero variance; `rho` is 0 then.
    pub degenerate: bool,
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation of two equally long value lists. Without ties it is
/// `1 - 6 sum(d^2) / (m (m^2 - 1))`; with ties, the Pearson correlation of
/// the average ranks.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<SpearmanResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} values", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InvalidParameter("need at least two values".into()));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    spearman_from_ranks(&ra, &rb)
}

pub fn spearman_from_ranks(ra: &[f64], rb: &[f64]) -> Result<SpearmanResult> {
    let m = ra.len();
    let has_ties = |r: &[f64]| {
        let mut s: Vec<f64> = r.to_vec();
        s.sort_by(f64::total_cmp);
        s.windows(2).any(|w| w[0] == w[1])
    };
    let mean = (m as f64 + 1.0) / 2.0;
    let var = |r: &[f64]| r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    if var(ra) == 0.0 || var(rb) == 0.0 {
        warn!("spearman correlation undefined: zero variance in a distance list");
        return Ok(SpearmanResult {
            rho: 0.0,
            degenerate: true,
        });
    }
    let rho = if has_ties(ra) || has_ties(rb) {
        let ma = ra.iter().sum::<f64>() / m as f64;
        let mb = rb.iter().sum::<f64>() / m as f64;
        let cov: f64 = ra.iter().zip(rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
        let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
        cov / (va * vb).sqrt()
    } else {
        let d2: f64 = ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum();
        let m = m as f64;
        1.0 - 6.0 * d2 / (m * (m * m - 1.0))
    };
    Ok(SpearmanResult {
        rho: rho.clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Decodes the `t`-th pair `(i, j)`, `i < j`, in row-major upper-triangle order.
fn pair_from_index(t: usize, n: usize) -> (usize, usize) {
    // Row i starts at offset i*n - i*(i+1)/2.
    let mut lo = 0usize;
    let mut hi = n - 1;
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        let start = mid * n - mid * (mid + 1) / 2;
        if start <= t {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let i = lo;
    let start = i * n - i * (i + 1) / 2;
    (i, i + 1 + (t - start))
}

/// Rank correlation between pairwise distances in the two spaces, over
/// `pair_budget` distinct pairs sampled uniformly (all pairs if fewer exist).
pub fn spearman_distance_corr<F: Real>(
    x: ArrayView2<'_, F>,
    z: ArrayView2<'_, F>,
    pair_budget: usize,
    seed: u64,
) -> Result<SpearmanResult> {
    if pair_budget < 10 {
        return Err(Error::InvalidParameter(format!("pair budget must be at least 10, got {pair_budget}")));
    }
    if x.nrows() != z.nrows() {
        return Err(Error::DimensionMismatch(format!("{} vs {} rows", x.nrows(), z.nrows())));
    }
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two rows".into()));
    }
    let total = n * (n - 1) / 2;
    let picks: Vec<usize> = if pair_budget >= total {
        (0..total).collect()
    } else {
        let mut r = rng::stream(seed, 31);
        let mut v = index::sample(&mut r, total, pair_budget).into_vec();
        v.sort_unstable();
        v
    };
    let dist = |m: ArrayView2<'_, F>, i: usize, j: usize| -> f64 {
        m.row(i)
            .iter()
            .zip(m.row(j).iter())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<F>()
            .sqrt()
            .as_f64()
    };
    let mut dx = Vec::with_capacity(picks.len());
    let mut dz = Vec::with_capacity(picks.len());
    for &t in &picks {
        let (i, j) = pair_from_index(t, n);
        dx.push(dist(x, i, j));
        dz.push(dist(z, i, j));
    }
    spearman_rho(&dx, &dz)
}

/// Runs every utility measurement with shared settings.
pub fn utility_report<F: Real>(
    x: ArrayView2<'_, F>,
    z: ArrayView2<'_, F>,
    y: &[usize],
    probe: &ProbeConfig,
    settings: &StructureConfig,
) -> Result<UtilityReport> {
    let (accuracy, f1_weighted) = probe_utility(z, y, probe)?;
    let knn_overlap = knn_overlaps(x, z, &settings.k, settings.sample_cap, settings.seed)?;
    let spearman = spearman_distance_corr(x, z, settings.pair_budget, settings.seed)?;
    Ok(UtilityReport {
        accuracy,
        f1_weighted,
        knn_overlap,
        spearman_rho: spearman.rho,
    })
}

/// Settings for the structure metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureConfig {
    pub k: Vec<usize>,
    pub sample_cap: usize,
    pub pair_budget: usize,
    pub seed: u64,
}

impl Default for StructureConfig {
    fn default() -> Self {
        Self {
            k: vec![5, 10, 20],
            sample_cap: 1000,
            pair_budget: 100_000,
            seed: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn spearman_hand_example() {
        let r = spearman_from_ranks(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap();
        assert!((r.rho - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_variance_is_flagged() {
        let r = spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.rho, 0.0);
        assert!(r.degenerate);
    }

    #[test]
    fn pair_decoding_covers_triangle() {
        let n = 7;
        let mut t = 0;
        for i in 0..n {
            for j in i + 1..n {
                assert_eq!(pair_from_index(t, n), (i, j));
                t += 1;
            }
        }
    }

    #[test]
    fn f1_perfect_and_zero() {
        assert_eq!(f1_weighted(&[0, 1, 2], &[0, 1, 2], 3), 1.0);
        assert_eq!(f1_weighted(&[1, 0], &[0, 1], 2), 0.0);
        // class 0: p = 1, r = 0.5 -> 2/3 ; class 1: p = 0.5, r = 1 -> 2/3
        let f = f1_weighted(&[0, 1, 1], &[0, 0, 1], 2);
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn knn_overlap_identity_and_scaling() {
        let x = array![[0.0, 0.0], [1.0, 0.1], [0.2, 3.0], [4.0, 4.0], [2.0, 1.0], [0.5, 0.7]];
        assert_eq!(knn_overlap(x.view(), x.view(), 2, 1000, 0).unwrap(), 1.0);
        let scaled = &x * 2.0;
        assert_eq!(knn_overlap(x.view(), scaled.view(), 2, 1000, 0).unwrap(), 1.0);
        assert!(knn_overlap(x.view(), x.view(), 6, 1000, 0).is_err());
    }

    #[test]
    fn spearman_identity() {
        let x = array![[0.0, 0.0], [1.0, 0.1], [0.2, 3.0], [4.0, 4.0], [2.0, 1.0], [0.5, 0.7]];
        let r = spearman_distance_corr(x.view(), x.view(), 100, 0).unwrap();
        assert_eq!(r.rho, 1.0);
        assert!(spearman_distance_corr(x.view(), x.view(), 5, 0).is_err());
    }
}
