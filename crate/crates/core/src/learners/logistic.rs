//! Multinomial logistic regression trained by full-batch gradient descent.
//!
//! Step sizes come from the Barzilai-Borwein rule and are shrunk by Armijo
//! backtracking until the objective decreases, so accepted iterates are
//! monotone in the objective.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, standard_normal};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub l2: f64,
    pub max_epochs: usize,
    /// Stop once the relative objective decrease or the gradient norm
    /// falls below this value.
    pub tol: f64,
    /// Initial step size.
    pub lr: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            max_epochs: 200,
            tol: 1e-6,
            lr: 1.0,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0) || !(self.tol > 0.0) || self.max_epochs == 0 || !(self.lr > 0.0) {
            return Err(Error::InvalidParameter(format!("invalid fit config {self:?}")));
        }
        Ok(())
    }
}

/// Weights `C x p` and biases of a softmax classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier<F> {
    pub weights: Array2<F>,
    pub bias: Array1<F>,
    pub classes: usize,
}

impl<F: Real> LinearClassifier<F> {
    pub fn zeros(classes: usize, features: usize) -> Self {
        Self {
            weights: Array2::zeros((classes, features)),
            bias: Array1::zeros(classes),
            classes,
        }
    }

    pub fn features(&self) -> usize {
        self.weights.ncols()
    }

    fn logits(&self, x: ArrayView2<'_, F>) -> Array2<F> {
        let mut z = x.dot(&self.weights.t());
        z += &self.bias;
        z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub epochs: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub converged: bool,
}

fn softmax_rows<F: Real>(z: &mut Array2<F>) {
    for mut row in z.rows_mut() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: F = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Mean cross-entropy of softmax(logits) against `y`, computed stably.
fn cross_entropy<F: Real>(logits: &Array2<F>, y: &[usize]) -> F {
    let mut total = F::zero();
    for (row, &label) in logits.rows().into_iter().zip(y) {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let lse = row.iter().map(|&v| (v - max).exp()).sum::<F>().ln() + max;
        total = total + lse - row[label];
    }
    total / F::of_usize(y.len())
}

fn penalty<F: Real>(model: &LinearClassifier<F>, l2: F) -> F {
    F::of(0.5) * l2 * model.weights.iter().map(|&w| w * w).sum::<F>()
}

/// Mean cross-entropy plus `(l2/2) ||W||^2`; the bias is not penalized.
pub fn logistic_objective<F: Real>(model: &LinearClassifier<F>, x: ArrayView2<'_, F>, y: &[usize], l2: F) -> F {
    cross_entropy(&model.logits(x), y) + penalty(model, l2)
}

fn gradient_from_logits<F: Real>(
    model: &LinearClassifier<F>,
    mut probs: Array2<F>,
    x: ArrayView2<'_, F>,
    y: &[usize],
    l2: F,
) -> LinearClassifier<F> {
    softmax_rows(&mut probs);
    for (mut row, &label) in probs.rows_mut().into_iter().zip(y) {
        row[label] -= F::one();
    }
    let inv_n = F::one() / F::of_usize(y.len());
    let mut gw = probs.t().dot(&x);
    gw.mapv_inplace(|v| v * inv_n);
    gw.scaled_add(l2, &model.weights);
    let gb = probs.sum_axis(Axis(0)).mapv(|v| v * inv_n);
    LinearClassifier {
        weights: gw,
        bias: gb,
        classes: model.classes,
    }
}

/// Analytic gradient of [`logistic_objective`], packaged as a classifier.
pub fn logistic_gradient<F: Real>(
    model: &LinearClassifier<F>,
    x: ArrayView2<'_, F>,
    y: &[usize],
    l2: F,
) -> LinearClassifier<F> {
    gradient_from_logits(model, model.logits(x), x, y, l2)
}

fn dot_params<F: Real>(a: &LinearClassifier<F>, b: &LinearClassifier<F>) -> F {
    let w: F = a.weights.iter().zip(b.weights.iter()).map(|(&p, &q)| p * q).sum();
    let c: F = a.bias.iter().zip(b.bias.iter()).map(|(&p, &q)| p * q).sum();
    w + c
}

fn axpy_params<F: Real>(base: &LinearClassifier<F>, step: F, dir: &LinearClassifier<F>) -> LinearClassifier<F> {
    let mut out = base.clone();
    out.weights.scaled_add(step, &dir.weights);
    out.bias.scaled_add(step, &dir.bias);
    out
}

fn check_inputs<F: Real>(x: ArrayView2<'_, F>, y: &[usize], classes: usize) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::Empty("no training rows".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features".into()));
    }
    if classes < 2 {
        return Err(Error::SingleClass(format!("classifier needs at least 2 classes, got {classes}")));
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidParameter(format!("label {bad} out of range [0, {classes})")));
    }
    let mut seen = vec![false; classes];
    for &l in y {
        seen[l] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::SingleClass("training labels contain a single class".into()));
    }
    Ok(())
}

pub fn fit_logistic<F: Real>(
    x: ArrayView2<'_, F>,
    y: &[usize],
    classes: usize,
    cfg: &FitConfig,
) -> Result<LinearClassifier<F>> {
    fit_logistic_with_report(x, y, classes, cfg).map(|(m, _)| m)
}

pub fn fit_logistic_with_report<F: Real>(
    x: ArrayView2<'_, F>,
    y: &[usize],
    classes: usize,
    cfg: &FitConfig,
) -> Result<(LinearClassifier<F>, FitReport)> {
    cfg.validate()?;
    check_inputs(x, y, classes)?;
    let l2 = F::of(cfg.l2);
    let tol = F::of(cfg.tol);
    let armijo = F::of(1e-4);
    let shrink = F::of(0.5);
    let min_step = F::of(1e-12);
    let max_step = F::of(1e6);

    let mut r = rng::seeded(cfg.seed);
    let init_scale = F::of(1e-3);
    let mut model = LinearClassifier::zeros(classes, x.ncols());
    model
        .weights
        .mapv_inplace(|_| init_scale * standard_normal::<F, _>(&mut r));

    let logits = model.logits(x);
    let mut objective = cross_entropy(&logits, y) + penalty(&model, l2);
    let mut grad = gradient_from_logits(&model, logits, x, y, l2);
    let mut grad_sq = dot_params(&grad, &grad);
    let mut step = F::of(cfg.lr);
    let mut epochs = 0;
    let mut converged = false;

    while epochs < cfg.max_epochs {
        if grad_sq.sqrt() <= tol {
            converged = true;
            break;
        }
        epochs += 1;
        // Backtracking along the negative gradient.
        let mut t = step;
        let accepted = loop {
            let candidate = axpy_params(&model, -t, &grad);
            let cand_logits = candidate.logits(x);
            let cand_obj = cross_entropy(&cand_logits, y) + penalty(&candidate, l2);
            if cand_obj.is_finite() && cand_obj <= objective - armijo * t * grad_sq {
                break Some((candidate, cand_logits, cand_obj));
            }
            t *= shrink;
            if t < min_step {
                break None;
            }
        };
        let Some((candidate, cand_logits, cand_obj)) = accepted else {
            converged = true;
            break;
        };
        let new_grad = gradient_from_logits(&candidate, cand_logits, x, y, l2);
        // Barzilai-Borwein step for the next iteration.
        let s = axpy_params(&candidate, -F::one(), &model);
        let g_diff = axpy_params(&new_grad, -F::one(), &grad);
        let sy = dot_params(&s, &g_diff);
        let ss = dot_params(&s, &s);
        step = if sy > F::zero() { (ss / sy).min(max_step).max(min_step) } else { t * F::of(2.0) };

        let decrease = objective - cand_obj;
        let rel = decrease / objective.abs().max(F::of(1e-300));
        model = candidate;
        objective = cand_obj;
        grad = new_grad;
        grad_sq = dot_params(&grad, &grad);
        if rel < tol {
            converged = true;
            break;
        }
    }
    let report = FitReport {
        epochs,
        objective: objective.as_f64(),
        grad_norm: grad_sq.sqrt().as_f64(),
        converged,
    };
    Ok((model, report))
}

/// Row-wise softmax probabilities, `n x C`.
pub fn predict_proba<F: Real>(model: &LinearClassifier<F>, x: ArrayView2<'_, F>) -> Result<Array2<F>> {
    if x.ncols() != model.features() {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} features, got {}",
            model.features(),
            x.ncols()
        )));
    }
    let mut p = model.logits(x);
    softmax_rows(&mut p);
    Ok(p)
}

/// Arg-max class per row; ties go to the lowest class index.
pub fn predict<F: Real>(model: &LinearClassifier<F>, x: ArrayView2<'_, F>) -> Result<Vec<usize>> {
    let p = predict_proba(model, x)?;
    Ok(p
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separable_pair() {
        let x = array![[0.0], [1.0]];
        let model = fit_logistic(x.view(), &[0, 1], 2, &FitConfig::default()).unwrap();
        assert_eq!(predict(&model, x.view()).unwrap(), vec![0, 1]);
    }

    #[test]
    fn zero_model_is_uniform() {
        let model = LinearClassifier::<f64>::zeros(3, 2);
        let p = predict_proba(&model, array![[1.0, 2.0], [-3.0, 0.5]].view()).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(predict(&model, array![[1.0, 2.0]].view()).unwrap(), vec![0]);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let model: LinearClassifier<f64> = LinearClassifier {
            weights: array![[1.0, -2.0], [0.5, 3.0], [-1.0, 0.25]],
            bias: array![0.1, -0.2, 0.3],
            classes: 3,
        };
        let p = predict_proba(&model, array![[10.0, -4.0], [0.1, 0.2]].view()).unwrap();
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let model = LinearClassifier::<f64>::zeros(2, 3);
        assert!(matches!(
            predict_proba(&model, array![[1.0, 2.0]].view()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rejects_bad_input() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(
            fit_logistic(x.view(), &[1, 1], 2, &FitConfig::default()),
            Err(Error::SingleClass(_))
        ));
        let x = array![[f64::NAN], [1.0]];
        assert!(matches!(
            fit_logistic(x.view(), &[0, 1], 2, &FitConfig::default()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn objective_monotone_over_epochs() {
        let x = array![[0.0, 1.0], [1.0, 0.2], [0.4, 0.4], [0.9, 0.8], [0.2, 0.1], [0.7, 0.3]];
        let y = [0, 1, 0, 1, 0, 1];
        let mut last = f64::INFINITY;
        for epochs in 1..30 {
            let cfg = FitConfig {
                max_epochs: epochs,
                tol: 1e-300,
                ..FitConfig::default()
            };
            let (_, report) = fit_logistic_with_report(x.view(), &y, 2, &cfg).unwrap();
            assert!(report.objective <= last + 1e-15);
            last = report.objective;
        }
    }
}
