//! Trust-adaptive Gaussian perturbation followed by reverse manifold embedding.
//!
//! The pipeline maps an inverse trust score to a privacy budget, calibrates
//! Gaussian noise to that budget, perturbs the (clipped) records, and then
//! applies the coordinate-wise map `v -> (v cos(av), v sin(av))`, doubling the
//! dimension. All randomness is consumed before the embedding, so the output
//! inherits the (epsilon, delta) guarantee of the Gaussian step.

use ndarray::{s, Array2, ArrayView2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::l2_norm;
use crate::error::{Error, Result};
use crate::rng::standard_normal;
use crate::scalar::Real;

/// Slack allowed on row norms when checking the sensitivity precondition.
pub const SENSITIVITY_SLACK: f64 = 1e-9;

/// How the embedding frequency depends on trust.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSchedule {
    /// Same frequency for every trust level.
    #[default]
    Fixed,
    /// `alpha * (1 + tau)`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig<F> {
    pub eps_min: F,
    pub eps_max: F,
    pub delta: F,
    /// L2 sensitivity, equal to the clipping radius.
    pub delta2: F,
    pub alpha: F,
    #[serde(default)]
    pub alpha_schedule: AlphaSchedule,
}

impl<F: Real> BudgetConfig<F> {
    pub fn new(eps_min: F, eps_max: F, delta: F, delta2: F, alpha: F) -> Result<Self> {
        let cfg = Self {
            eps_min,
            eps_max,
            delta,
            delta2,
            alpha,
            alpha_schedule: AlphaSchedule::Fixed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_schedule(mut self, schedule: AlphaSchedule) -> Self {
        self.alpha_schedule = schedule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let zero = F::zero();
        let finite = [self.eps_min, self.eps_max, self.delta, self.delta2, self.alpha]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidBudget("non-finite budget parameter".into()));
        }
        if !(self.eps_min > zero && self.eps_min <= self.eps_max) {
            return Err(Error::InvalidBudget(format!(
                "need 0 < eps_min <= eps_max, got [{}, {}]",
                self.eps_min, self.eps_max
            )));
        }
        if !(self.delta > zero && self.delta < F::one()) {
            return Err(Error::InvalidBudget(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.delta2 > zero) {
            return Err(Error::InvalidBudget(format!("sensitivity must be positive, got {}", self.delta2)));
        }
        if !(self.alpha > zero) {
            return Err(Error::InvalidBudget(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }

    /// Embedding frequency used at trust level `tau`.
    pub fn alpha_for(&self, tau: TrustScore<F>) -> F {
        match self.alpha_schedule {
            AlphaSchedule::Fixed => self.alpha,
            AlphaSchedule::Linear => self.alpha * (F::one() + tau.value()),
        }
    }
}

impl Default for BudgetConfig<f64> {
    /// `eps in [15, 80]`, `delta = 1e-5`, unit sensitivity, `alpha = 2 pi`.
    fn default() -> Self {
        Self {
            eps_min: 15.0,
            eps_max: 80.0,
            delta: 1e-5,
            delta2: 1.0,
            alpha: std::f64::consts::TAU,
            alpha_schedule: AlphaSchedule::Fixed,
        }
    }
}

/// Inverse trust score: 0 is fully trusted, 1 is fully untrusted.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TrustScore<F>(F);

impl<F: Real> TrustScore<F> {
    pub fn new(tau: F) -> Result<Self> {
        if !(tau >= F::zero() && tau <= F::one()) {
            return Err(Error::InvalidParameter(format!("trust score must lie in [0, 1], got {tau}")));
        }
        Ok(Self(tau))
    }

    pub fn value(self) -> F {
        self.0
    }
}

/// Output of [`protect`]: the `n x 2d` embedding plus the realized budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtectedData<F> {
    pub z: Array2<F>,
    pub tau: TrustScore<F>,
    pub epsilon: F,
    pub sigma: F,
}

/// `eps_max - tau * (eps_max - eps_min)`.
pub fn trust_budget<F: Real>(tau: TrustScore<F>, cfg: &BudgetConfig<F>) -> F {
    let eps = cfg.eps_max - tau.value() * (cfg.eps_max - cfg.eps_min);
    // Rounding can push the endpoint a hair outside the interval.
    eps.max(cfg.eps_min).min(cfg.eps_max)
}

/// Gaussian-mechanism scale `sqrt(2 D2^2 ln(1.25/delta)) / eps`.
pub fn noise_sigma<F: Real>(epsilon: F, delta: F, delta2: F) -> Result<F> {
    if !(epsilon > F::zero()) || !epsilon.is_finite() {
        return Err(Error::InvalidBudget(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    if !(delta > F::zero() && delta < F::one()) {
        return Err(Error::InvalidBudget(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(delta2 > F::zero()) {
        return Err(Error::InvalidBudget(format!("sensitivity must be positive, got {delta2}")));
    }
    let two = F::of(2.0);
    let log_term = (F::of(1.25) / delta).ln();
    Ok(delta2 * (two * log_term).sqrt() / epsilon)
}

/// Adds i.i.d. `N(0, sigma^2)` noise, drawn row-major. `sigma == 0` returns
/// a copy of `x` without touching the generator.
pub fn gaussian_perturb<F: Real, R: Rng + ?Sized>(x: ArrayView2<'_, F>, sigma: F, rng: &mut R) -> Array2<F> {
    let mut y = x.to_owned();
    if sigma > F::zero() {
        for v in y.iter_mut() {
            *v += sigma * standard_normal::<F, R>(rng);
        }
    }
    y
}

/// Coordinate-wise embedding into `2d` columns: the `d` cosine components
/// followed by the `d` sine components.
pub fn rme_embed<F: Real>(y: ArrayView2<'_, F>, alpha: F) -> Array2<F> {
    let (n, d) = y.dim();
    let mut z = Array2::zeros((n, 2 * d));
    let (mut cos_part, mut sin_part) = z.multi_slice_mut((s![.., ..d], s![.., d..]));
    Zip::from(&mut cos_part)
        .and(&mut sin_part)
        .and(&y)
        .for_each(|c, s, &v| {
            let (sin, cos) = (alpha * v).sin_cos();
            *c = v * cos;
            *s = v * sin;
        });
    z
}

fn check_sensitivity<F: Real>(x: ArrayView2<'_, F>, bound: F) -> Result<()> {
    let limit = bound + F::of(SENSITIVITY_SLACK);
    for (row, r) in x.rows().into_iter().enumerate() {
        let norm = l2_norm(r);
        if !(norm <= limit) {
            return Err(Error::SensitivityViolation {
                row,
                norm: norm.as_f64(),
                bound: bound.as_f64(),
            });
        }
    }
    Ok(())
}

/// Full pipeline for one trust level. `x` must already be clipped to the
/// sensitivity bound of `cfg`.
pub fn protect<F: Real, R: Rng + ?Sized>(
    x: ArrayView2<'_, F>,
    tau: TrustScore<F>,
    cfg: &BudgetConfig<F>,
    rng: &mut R,
) -> Result<ProtectedData<F>> {
    cfg.validate()?;
    check_sensitivity(x, cfg.delta2)?;
    let epsilon = trust_budget(tau, cfg);
    let sigma = noise_sigma(epsilon, cfg.delta, cfg.delta2)?;
    let y = gaussian_perturb(x, sigma, rng);
    let z = rme_embed(y.view(), cfg.alpha_for(tau));
    Ok(ProtectedData { z, tau, epsilon, sigma })
}

/// Pipeline with a separate trust level per record.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneousProtected<F> {
    pub z: Array2<F>,
    pub taus: Vec<TrustScore<F>>,
    pub epsilons: Vec<F>,
    pub sigmas: Vec<F>,
}

/// Each row `i` is perturbed at the budget of `taus[i]` and embedded at
/// `alpha_for(taus[i])`. Noise is drawn row-major exactly as in [`protect`].
pub fn protect_per_record<F: Real, R: Rng + ?Sized>(
    x: ArrayView2<'_, F>,
    taus: &[TrustScore<F>],
    cfg: &BudgetConfig<F>,
    rng: &mut R,
) -> Result<HeterogeneousProtected<F>> {
    cfg.validate()?;
    if taus.len() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} trust scores for {} rows",
            taus.len(),
            x.nrows()
        )));
    }
    check_sensitivity(x, cfg.delta2)?;
    let d = x.ncols();
    let mut z = Array2::zeros((x.nrows(), 2 * d));
    let mut epsilons = Vec::with_capacity(taus.len());
    let mut sigmas = Vec::with_capacity(taus.len());
    for (i, &tau) in taus.iter().enumerate() {
        let epsilon = trust_budget(tau, cfg);
        let sigma = noise_sigma(epsilon, cfg.delta, cfg.delta2)?;
        let y = gaussian_perturb(x.slice(s![i..i + 1, ..]), sigma, rng);
        let row = rme_embed(y.view(), cfg.alpha_for(tau));
        z.row_mut(i).assign(&row.row(0));
        epsilons.push(epsilon);
        sigmas.push(sigma);
    }
    Ok(HeterogeneousProtected {
        z,
        taus: taus.to_vec(),
        epsilons,
        sigmas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;
    use std::f64::consts::PI;

    fn tau(v: f64) -> TrustScore<f64> {
        TrustScore::new(v).unwrap()
    }

    #[test]
    fn budget_examples() {
        let cfg = BudgetConfig::default();
        assert_eq!(trust_budget(tau(0.0), &cfg), 80.0);
        assert_eq!(trust_budget(tau(0.5), &cfg), 47.5);
        assert_eq!(trust_budget(tau(0.25), &cfg), 63.75);
        assert_eq!(trust_budget(tau(1.0), &cfg), 15.0);
    }

    #[test]
    fn degenerate_budget_is_constant() {
        let cfg = BudgetConfig::new(20.0, 20.0, 1e-5, 1.0, 1.0).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(trust_budget(tau(t), &cfg), 20.0);
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(BudgetConfig::new(0.0, 1.0, 1e-5, 1.0, 1.0).is_err());
        assert!(BudgetConfig::new(2.0, 1.0, 1e-5, 1.0, 1.0).is_err());
        assert!(BudgetConfig::new(1.0, 2.0, 1.0, 1.0, 1.0).is_err());
        assert!(BudgetConfig::new(1.0, 2.0, 1e-5, 0.0, 1.0).is_err());
        assert!(BudgetConfig::new(1.0, 2.0, 1e-5, 1.0, 0.0).is_err());
        assert!(TrustScore::new(1.1).is_err());
        assert!(TrustScore::new(f64::NAN).is_err());
    }

    #[test]
    fn sigma_scales_with_sensitivity() {
        let a: f64 = noise_sigma(47.5, 1e-5, 1.0).unwrap();
        let b = noise_sigma(47.5, 1e-5, 2.0).unwrap();
        assert_eq!(b, 2.0 * a);
        assert!((a - 0.10200).abs() < 5e-6);
        assert!(matches!(noise_sigma(0.0, 1e-5, 1.0), Err(Error::InvalidBudget(_))));
        assert!(noise_sigma(-1.0, 1e-5, 1.0).unwrap_err().to_string().contains("invalid budget"));
    }

    #[test]
    fn zero_sigma_is_identity() {
        let x = array![[0.1, 0.2], [0.3, 0.4]];
        let mut r = rng::seeded(1);
        assert_eq!(gaussian_perturb(x.view(), 0.0, &mut r), x);
    }

    #[test]
    fn perturb_deterministic() {
        let x = Array2::<f64>::zeros((5, 3));
        let a = gaussian_perturb(x.view(), 1.0, &mut rng::seeded(4));
        let b = gaussian_perturb(x.view(), 1.0, &mut rng::seeded(4));
        assert_eq!(a, b);
    }

    #[test]
    fn embed_examples() {
        let z = rme_embed(array![[0.0]].view(), 1.0);
        assert_eq!(z, array![[0.0, 0.0]]);
        let z = rme_embed(array![[1.0]].view(), PI / 2.0);
        assert!(z[[0, 0]].abs() < 1e-15 && (z[[0, 1]] - 1.0).abs() < 1e-15);
        let z = rme_embed(array![[2.0]].view(), PI);
        assert!((z[[0, 0]] - 2.0).abs() < 1e-15 && z[[0, 1]].abs() < 1e-14);
    }

    #[test]
    fn embed_layout() {
        let y = array![[0.1, 0.2, 0.3]];
        let z = rme_embed(y.view(), 2.0);
        assert_eq!(z.ncols(), 6);
        for j in 0..3 {
            let v: f64 = y[[0, j]];
            assert_eq!(z[[0, j]], v * (2.0 * v).cos());
            assert_eq!(z[[0, j + 3]], v * (2.0 * v).sin());
        }
    }

    #[test]
    fn sensitivity_violation() {
        let x = array![[2.0, 0.0]];
        let err = protect(x.view(), tau(0.0), &BudgetConfig::default(), &mut rng::seeded(0)).unwrap_err();
        assert!(err.to_string().contains("sensitivity violation"));
    }

    #[test]
    fn linear_alpha_schedule() {
        let cfg = BudgetConfig::default().with_schedule(AlphaSchedule::Linear);
        assert_eq!(cfg.alpha_for(tau(1.0)), 2.0 * cfg.alpha);
        assert_eq!(BudgetConfig::default().alpha_for(tau(1.0)), cfg.alpha);
    }

    #[test]
    fn per_record_matches_uniform_when_taus_equal() {
        let x = array![[0.1, 0.2], [0.3, 0.1], [0.0, 0.5]];
        let cfg = BudgetConfig::default();
        let t = tau(0.5);
        let a = protect(x.view(), t, &cfg, &mut rng::seeded(3)).unwrap();
        let b = protect_per_record(x.view(), &[t; 3], &cfg, &mut rng::seeded(3)).unwrap();
        assert_eq!(a.z, b.z);
        assert!(b.sigmas.iter().all(|&s| s == a.sigma));
    }

    #[test]
    fn works_in_single_precision() {
        let x = array![[0.1f32, 0.2], [0.3, 0.1]];
        let cfg = BudgetConfig::new(15.0f32, 80.0, 1e-5, 1.0, std::f32::consts::TAU).unwrap();
        let p = protect(x.view(), TrustScore::new(0.0f32).unwrap(), &cfg, &mut rng::seeded(0)).unwrap();
        assert_eq!(p.z.dim(), (2, 4));
        assert_eq!(p.epsilon, 80.0);
    }
}
