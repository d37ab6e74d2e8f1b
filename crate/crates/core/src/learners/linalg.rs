//! Dense Cholesky factorization and triangular solves.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lower-triangular `L` with `L L^T = a`. Fails if `a` is not (numerically)
/// positive definite.
pub fn cholesky<F: Real>(a: ArrayView2<'_, F>) -> Result<Array2<F>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!("cholesky of a {}x{} matrix", n, a.ncols())));
    }
    let mut l = Array2::<F>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let dot: F = {
                let li = l.row(i);
                let lj = l.row(j);
                let li = li.as_slice().expect("row-major");
                let lj = lj.as_slice().expect("row-major");
                li[..j].iter().zip(&lj[..j]).map(|(&p, &q)| p * q).sum()
            };
            let v = a[[i, j]] - dot;
            if i == j {
                if !(v > F::zero()) {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not positive definite (pivot {i} = {v})"
                    )));
                }
                l[[i, i]] = v.sqrt();
            } else {
                l[[i, j]] = v / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solves `L L^T X = b` given the Cholesky factor.
pub fn cholesky_solve<F: Real>(l: ArrayView2<'_, F>, b: ArrayView2<'_, F>) -> Array2<F> {
    let n = l.nrows();
    let q = b.ncols();
    // Forward: L Y = B, row by row.
    let mut y = b.to_owned();
    for i in 0..n {
        for k in 0..i {
            let lik = l[[i, k]];
            if lik != F::zero() {
                let (head, mut tail) = y.view_mut().split_at(ndarray::Axis(0), i);
                let src = head.row(k);
                let mut dst = tail.row_mut(0);
                dst.scaled_add(-lik, &src);
            }
        }
        let d = l[[i, i]];
        y.row_mut(i).mapv_inplace(|v| v / d);
    }
    // Backward: L^T X = Y.
    let mut x = y;
    for i in (0..n).rev() {
        for k in i + 1..n {
            let lki = l[[k, i]];
            if lki != F::zero() {
                let (mut head, tail) = x.view_mut().split_at(ndarray::Axis(0), i + 1);
                let src = tail.row(k - i - 1);
                let mut dst = head.row_mut(i);
                dst.scaled_add(-lki, &src);
            }
        }
        let d = l[[i, i]];
        x.row_mut(i).mapv_inplace(|v| v / d);
    }
    debug_assert_eq!(x.ncols(), q);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn factor_and_solve() {
        let a: Array2<f64> = array![[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let l = cholesky(a.view()).unwrap();
        let back = l.dot(&l.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        let b = array![[1.0, 0.0], [2.0, 1.0], [3.0, -1.0]];
        let x = cholesky_solve(l.view(), b.view());
        let r = a.dot(&x) - &b;
        assert!(r.iter().all(|v: &f64| v.abs() < 1e-12));
    }

    #[test]
    fn rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky(a.view()).is_err());
    }
}
