use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Full `n x n` matrix of squared Euclidean distances, computed from
/// coordinate differences so equal distances compare equal.
pub fn pairwise_sq_distances<F: Real>(x: ArrayView2<'_, F>) -> Array2<F> {
    let n = x.nrows();
    let mut d = Array2::<F>::zeros((n, n));
    for i in 0..n {
        let xi = x.row(i);
        for j in i + 1..n {
            let xj = x.row(j);
            let s: F = xi.iter().zip(xj.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum();
            d[[i, j]] = s;
            d[[j, i]] = s;
        }
    }
    d
}

fn by_distance_then_index<F: Real>(row: &[F]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| row[a].partial_cmp(&row[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
}

/// k nearest neighbors of each query from a precomputed distance matrix,
/// excluding the query itself; ties go to the lower index.
pub fn knn_from_distances<F: Real>(dist: ArrayView2<'_, F>, k: usize, queries: &[usize]) -> Result<Vec<Vec<usize>>> {
    let n = dist.nrows();
    if k >= n {
        return Err(Error::InvalidParameter(format!("k = {k} must be smaller than n = {n}")));
    }
    queries
        .iter()
        .map(|&q| {
            if q >= n {
                return Err(Error::InvalidParameter(format!("query {q} out of range")));
            }
            let row = dist.row(q).to_vec();
            let mut cand: Vec<usize> = (0..n).filter(|&j| j != q).collect();
            let cmp = by_distance_then_index(&row);
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, &cmp);
                cand.truncate(k);
            }
            cand.sort_unstable_by(&cmp);
            Ok(cand)
        })
        .collect()
}

/// Exact brute-force Euclidean k-NN of each query point among all rows of `x`.
pub fn knn_indices<F: Real>(x: ArrayView2<'_, F>, k: usize, queries: &[usize]) -> Result<Vec<Vec<usize>>> {
    let n = x.nrows();
    if k >= n {
        return Err(Error::InvalidParameter(format!("k = {k} must be smaller than n = {n}")));
    }
    queries
        .iter()
        .map(|&q| {
            if q >= n {
                return Err(Error::InvalidParameter(format!("query {q} out of range")));
            }
            let xq = x.row(q);
            let row: Vec<F> = x
                .rows()
                .into_iter()
                .map(|r| r.iter().zip(xq.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum())
                .collect();
            let mut cand: Vec<usize> = (0..n).filter(|&j| j != q).collect();
            cand.sort_by(by_distance_then_index(&row));
            cand.truncate(k);
            Ok(cand)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn collinear_tie_goes_to_lower_index() {
        let x = array![[0.0], [1.0], [2.0], [10.0]];
        assert_eq!(knn_indices(x.view(), 1, &[1]).unwrap(), vec![vec![0]]);
        let d = pairwise_sq_distances(x.view());
        assert_eq!(knn_from_distances(d.view(), 1, &[1]).unwrap(), vec![vec![0]]);
        assert_eq!(knn_indices(x.view(), 2, &[3]).unwrap(), vec![vec![2, 1]]);
    }

    #[test]
    fn two_points() {
        let x = array![[0.0, 0.0], [1.0, 1.0]];
        assert_eq!(knn_indices(x.view(), 1, &[0, 1]).unwrap(), vec![vec![1], vec![0]]);
    }

    #[test]
    fn k_too_large() {
        let x = array![[0.0], [1.0]];
        assert!(knn_indices(x.view(), 2, &[0]).is_err());
    }
}
