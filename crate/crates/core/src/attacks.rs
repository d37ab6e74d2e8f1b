//! Membership, attribute and reconstruction attacks with their normalized
//! privacy scores. Each score is clamped to `[0, 1]`; 1 means the attack did
//! no better than its trivial baseline.

use ndarray::{concatenate, ArrayView2, Axis};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit_logistic, fit_ridge, predict_proba, roc_auc, stratified_split, FitConfig, Standardizer};
use crate::metrics::{fit_and_score, ProbeConfig};
use crate::rng;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    pub fit: FitConfig,
    /// Ridge penalty of the reconstruction attacker (standardized inputs).
    pub ridge_lambda: f64,
    /// Fraction of (protected, original) pairs known to the reconstruction attacker.
    pub recon_known_fraction: f64,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            ridge_lambda: 1.0,
            recon_known_fraction: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawAttackStats {
    pub mia_auc: f64,
    pub aia_accuracy: f64,
    pub recon_relative_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub priv_mia: f64,
    pub priv_aia: f64,
    pub priv_recon: f64,
    pub overall: f64,
    /// `R = 1 - P_attack`, identified with the overall privacy score.
    pub reliability: f64,
    pub raw: RawAttackStats,
}

impl AttackReport {
    pub fn from_components(priv_mia: f64, priv_aia: f64, priv_recon: f64, raw: RawAttackStats) -> Self {
        let overall = (priv_mia + priv_aia + priv_recon) / 3.0;
        Self {
            priv_mia,
            priv_aia,
            priv_recon,
            overall,
            reliability: overall,
            raw,
        }
    }

    pub const CSV_HEADER: [&'static str; 8] =
        ["mia", "aia", "recon", "overall", "reliability", "raw_auc", "raw_acc", "raw_err"];

    pub fn csv_record(&self) -> [String; 8] {
        [
            self.priv_mia,
            self.priv_aia,
            self.priv_recon,
            self.overall,
            self.reliability,
            self.raw.mia_auc,
            self.raw.aia_accuracy,
            self.raw.recon_relative_error,
        ]
        .map(|v| v.to_string())
    }
}

fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// `1 - 2 |AUC - 1/2|`.
pub fn mia_score(auc: f64) -> f64 {
    clamp01(1.0 - 2.0 * (auc - 0.5).abs())
}

/// `1 - (acc - 1/C) / (1 - 1/C)`.
pub fn aia_score(accuracy: f64, classes: usize) -> f64 {
    let base = 1.0 / classes as f64;
    clamp01(1.0 - (accuracy - base) / (1.0 - base))
}

/// The normalized reconstruction error itself, clamped: 0 when the attacker
/// recovers the originals exactly, 1 when it does no better than predicting zero.
pub fn recon_score(relative_error: f64) -> f64 {
    clamp01(relative_error)
}

/// `||X_hat - X||_F / ||X||_F`.
pub fn relative_error<F: Real>(x_hat: ArrayView2<'_, F>, x: ArrayView2<'_, F>) -> Result<f64> {
    if x_hat.dim() != x.dim() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", x_hat.dim(), x.dim())));
    }
    let norm: f64 = x.iter().map(|&v| (v * v).as_f64()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("original data has zero norm".into()));
    }
    let err: f64 = x_hat
        .iter()
        .zip(x.iter())
        .map(|(&a, &b)| ((a - b) * (a - b)).as_f64())
        .sum::<f64>()
        .sqrt();
    Ok(err / norm)
}

/// Logistic attacker separating members from non-members, both protected
/// the same way. The larger side is downsampled to balance the classes, the
/// pooled rows are split 50/50 (stratified), and the AUC is measured on the
/// held-out half. Returns `(priv_mia, auc)`.
pub fn membership_inference<F: Real, R: Rng + ?Sized>(
    z_members: ArrayView2<'_, F>,
    z_nonmembers: ArrayView2<'_, F>,
    cfg: &AttackConfig,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if z_members.nrows() == 0 || z_nonmembers.nrows() == 0 {
        return Err(Error::Empty("membership inference needs members and non-members".into()));
    }
    if z_members.ncols() != z_nonmembers.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "members have {} columns, non-members {}",
            z_members.ncols(),
            z_nonmembers.ncols()
        )));
    }
    let m = z_members.nrows().min(z_nonmembers.nrows());
    let pick = |view: ArrayView2<'_, F>, rng: &mut R| {
        if view.nrows() == m {
            view.to_owned()
        } else {
            let mut idx = index::sample(rng, view.nrows(), m).into_vec();
            idx.sort_unstable();
            view.select(Axis(0), &idx)
        }
    };
    let members = pick(z_members, rng);
    let nonmembers = pick(z_nonmembers, rng);
    let pooled = concatenate(Axis(0), &[members.view(), nonmembers.view()])
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    let labels: Vec<usize> = (0..2 * m).map(|i| usize::from(i < m)).collect();
    let (train, test) = stratified_split(&labels, 0.5, rng)?;
    let x_train = pooled.select(Axis(0), &train);
    let x_test = pooled.select(Axis(0), &test);
    let y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let y_test: Vec<bool> = test.iter().map(|&i| labels[i] == 1).collect();
    if !y_test.iter().any(|&b| b) || y_test.iter().all(|&b| b) {
        return Err(Error::SingleClass("too few rows for a membership split".into()));
    }
    let scaler = Standardizer::fit(x_train.view())?;
    let x_train = scaler.transform(x_train.view());
    let x_test = scaler.transform(x_test.view());
    let model = fit_logistic(x_train.view(), &y_train, 2, &cfg.fit)?;
    let proba = predict_proba(&model, x_test.view())?;
    let scores: Vec<F> = proba.column(1).to_vec();
    let auc = roc_auc(&scores, &y_test)?;
    Ok((mia_score(auc), auc))
}

const AIA_STREAM: u64 = 41;

/// Logistic attacker predicting the class label from protected rows on a
/// stratified 80/20 split. Returns `(priv_aia, accuracy)`.
pub fn attribute_inference<F: Real>(
    z: ArrayView2<'_, F>,
    y: &[usize],
    classes: usize,
    cfg: &AttackConfig,
) -> Result<(f64, f64)> {
    if classes < 2 {
        return Err(Error::SingleClass(format!("attribute with {classes} classes")));
    }
    let probe = ProbeConfig {
        fit: cfg.fit,
        test_fraction: 0.2,
        seed: cfg.seed,
    };
    let (acc, _) = fit_and_score(z, y, classes, &probe, AIA_STREAM)?;
    Ok((aia_score(acc, classes), acc))
}

/// Ridge regression from protected rows back to the originals. The attacker
/// knows a random `recon_known_fraction` of the row pairs; error is measured
/// on the rest. Returns `(priv_recon, relative error)`.
pub fn reconstruction_attack<F: Real>(
    z: ArrayView2<'_, F>,
    x_original: ArrayView2<'_, F>,
    cfg: &AttackConfig,
) -> Result<(f64, f64)> {
    let n = z.nrows();
    if n != x_original.nrows() {
        return Err(Error::DimensionMismatch(format!("{n} protected rows vs {} originals", x_original.nrows())));
    }
    if n < 2 {
        return Err(Error::Empty("reconstruction attack needs at least two rows".into()));
    }
    let frac = cfg.recon_known_fraction;
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::InvalidParameter(format!("known fraction must lie in (0, 1), got {frac}")));
    }
    let n_known = ((frac * n as f64).round() as usize).clamp(1, n - 1);
    let mut r = rng::stream(cfg.seed, 51);
    let perm = index::sample(&mut r, n, n).into_vec();
    let mut known = perm[..n_known].to_vec();
    let mut held = perm[n_known..].to_vec();
    known.sort_unstable();
    held.sort_unstable();
    let x_held = x_original.select(Axis(0), &held);
    let norm: f64 = x_held.iter().map(|&v| (v * v).as_f64()).sum::<f64>();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("held-out originals have zero norm".into()));
    }
    let z_known = z.select(Axis(0), &known);
    let scaler = Standardizer::fit(z_known.view())?;
    let z_known = scaler.transform(z_known.view());
    let z_held = scaler.transform(z.select(Axis(0), &held).view());
    let map = fit_ridge(z_known.view(), x_original.select(Axis(0), &known).view(), F::of(cfg.ridge_lambda))?;
    let x_hat = map.apply(z_held.view())?;
    let err = relative_error(x_hat.view(), x_held.view())?;
    Ok((recon_score(err), err))
}

/// Runs all three attacks and assembles the report.
#[allow(clippy::too_many_arguments)]
pub fn full_attack_suite<F: Real, R: Rng + ?Sized>(
    z_members: ArrayView2<'_, F>,
    z_nonmembers: ArrayView2<'_, F>,
    x_original: ArrayView2<'_, F>,
    y: &[usize],
    classes: usize,
    cfg: &AttackConfig,
    rng: &mut R,
) -> Result<AttackReport> {
    let (priv_mia, auc) = membership_inference(z_members, z_nonmembers, cfg, rng)?;
    let (priv_aia, acc) = attribute_inference(z_members, y, classes, cfg)?;
    let (priv_recon, err) = reconstruction_attack(z_members, x_original, cfg)?;
    Ok(AttackReport::from_components(
        priv_mia,
        priv_aia,
        priv_recon,
        RawAttackStats {
            mia_auc: auc,
            aia_accuracy: acc,
            recon_relative_error: err,
        },
    ))
}
