use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::linalg::{cholesky, cholesky_solve};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Affine map `x -> x M + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap<F> {
    pub coef: Array2<F>,
    pub offset: Array1<F>,
}

impl<F: Real> LinearMap<F> {
    pub fn apply(&self, a: ArrayView2<'_, F>) -> Result<Array2<F>> {
        if a.ncols() != self.coef.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "map expects {} inputs, got {}",
                self.coef.nrows(),
                a.ncols()
            )));
        }
        let mut out = a.dot(&self.coef);
        out += &self.offset;
        Ok(out)
    }
}

fn centered<F: Real>(m: ArrayView2<'_, F>) -> (Array2<F>, Array1<F>) {
    let mean = m.mean_axis(Axis(0)).expect("non-empty");
    let mut c = m.to_owned();
    c -= &mean;
    (c, mean)
}

/// Closed-form ridge regression on centered data:
/// `M = (A^T A + lambda I)^-1 A^T B`, offset restoring the column means.
/// When `A` has more columns than rows the equivalent dual form
/// `A^T (A A^T + lambda I)^-1 B` is solved instead.
pub fn fit_ridge<F: Real>(a: ArrayView2<'_, F>, b: ArrayView2<'_, F>, lambda: F) -> Result<LinearMap<F>> {
    if !(lambda > F::zero()) {
        return Err(Error::InvalidParameter(format!("ridge lambda must be positive, got {lambda}")));
    }
    if a.nrows() == 0 {
        return Err(Error::Empty("ridge regression on zero rows".into()));
    }
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!("{} input rows vs {} targets", a.nrows(), b.nrows())));
    }
    let (ac, a_mean) = centered(a);
    let (bc, b_mean) = centered(b);
    let (n, p) = ac.dim();
    let coef = if p <= n {
        let mut gram = ac.t().dot(&ac);
        for i in 0..p {
            gram[[i, i]] += lambda;
        }
        let rhs = ac.t().dot(&bc);
        let l = cholesky(gram.view())?;
        cholesky_solve(l.view(), rhs.view())
    } else {
        let mut kernel = ac.dot(&ac.t());
        for i in 0..n {
            kernel[[i, i]] += lambda;
        }
        let l = cholesky(kernel.view())?;
        let dual = cholesky_solve(l.view(), bc.view());
        ac.t().dot(&dual)
    };
    let offset = &b_mean - &a_mean.dot(&coef);
    Ok(LinearMap { coef, offset })
}
