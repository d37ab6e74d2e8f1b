//! Closed-form quantities behind the inversion hardness and information
//! bounds of the mechanism. Counting is exact over big integers.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Attacker model for coordinate-pair recovery: `d` original coordinates,
/// `r` feasible solutions per recovered pair, `known` pairs leaked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InversionModel {
    d: u32,
    r: u32,
    known: u32,
}

impl InversionModel {
    pub fn new(d: u32, r: u32, known: u32) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidParameter("R must be at least 1".into()));
        }
        if known > d {
            return Err(Error::InvalidParameter(format!("known pairs {known} exceed d = {d}")));
        }
        Ok(Self { d, r, known })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn known(&self) -> u32 {
        self.known
    }

    /// Unknown pairs `l = d - m`.
    pub fn unknown(&self) -> u32 {
        self.d - self.known
    }

    /// Full search space `T_min`.
    pub fn full_space(&self) -> BigUint {
        search_space(self.d, self.r)
    }

    /// Residual search space over the unknown pairs.
    pub fn residual_space(&self) -> BigUint {
        search_space_partial(self.unknown(), self.r)
    }
}

/// Perfect matchings of `2d` labeled items: `(2d)! / (2^d d!)`, i.e. the
/// double factorial `(2d - 1)!!`. Zero items have one (empty) matching.
pub fn pairing_count(d: u32) -> BigUint {
    let mut acc = BigUint::one();
    for k in (d + 1)..=(2 * d) {
        acc *= k;
    }
    acc >> d
}

/// `pairing_count(d) * R^d`.
pub fn search_space(d: u32, r: u32) -> BigUint {
    pairing_count(d) * BigUint::from(r).pow(d)
}

/// Remaining space once all but `l` pairs are known. Same formula as
/// [`search_space`]; `l = 0` gives 1.
pub fn search_space_partial(l: u32, r: u32) -> BigUint {
    search_space(l, r)
}

/// Single-guess success when `m` of `d` pairs are known: `1 / |S_{d-m}|`.
pub fn recovery_probability_fixed(d: u32, known: u32, r: u32) -> Result<f64> {
    let model = InversionModel::new(d, r, known)?;
    Ok(reciprocal_f64(&model.residual_space()))
}

/// Expected single-guess success when each of the `d` pairs is known
/// independently with probability `known_fraction`:
/// `sum_l Binom(d, 1 - f)(l) / |S_l|`, evaluated exactly before the final
/// conversion. Agrees with [`recovery_probability_fixed`] at `f = 0` and
/// `f = 1`, and decays strictly in `d` for `f < 1` and `R >= 2`.
pub fn recovery_probability(d: u32, known_fraction: f64, r: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&known_fraction) {
        return Err(Error::InvalidParameter(format!("known fraction {known_fraction} outside [0, 1]")));
    }
    if r == 0 {
        return Err(Error::InvalidParameter("R must be at least 1".into()));
    }
    if known_fraction == 1.0 {
        return Ok(1.0);
    }
    if known_fraction == 0.0 {
        return recovery_probability_fixed(d, 0, r);
    }
    let f = BigRational::from_float(known_fraction).expect("finite fraction");
    let q = BigRational::one() - &f;
    let mut total = BigRational::zero();
    let mut binom = BigUint::one();
    for l in 0..=d {
        if l > 0 {
            binom = binom * (d - l + 1) / l;
        }
        let weight = BigRational::from_integer(binom.clone().into()) * pow(&q, l) * pow(&f, d - l);
        total += weight / BigRational::from_integer(search_space_partial(l, r).into());
    }
    Ok(total.to_f64().unwrap_or(0.0))
}

fn pow(base: &BigRational, exp: u32) -> BigRational {
    (0..exp).fold(BigRational::one(), |acc, _| acc * base)
}

fn reciprocal_f64(n: &BigUint) -> f64 {
    BigRational::new(BigUint::one().into(), n.clone().into())
        .to_f64()
        .unwrap_or(0.0)
}

/// KL bound between the output laws of two noise levels with variance ratio
/// `r`: `(d/2)(r^2 - 2 ln r - 1)`.
pub fn kl_lower_bound(r: f64, d: u32) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("variance ratio must be positive, got {r}")));
    }
    Ok(0.5 * f64::from(d) * (r * r - 2.0 * r.ln() - 1.0))
}

/// Capacity bound `(d/2) ln(1 + E||X||^2 / (d sigma^2))` in nats.
pub fn mi_upper_bound(d: u32, mean_sq_norm: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if !(mean_sq_norm >= 0.0) {
        return Err(Error::InvalidParameter(format!("mean squared norm must be non-negative, got {mean_sq_norm}")));
    }
    let d = f64::from(d);
    Ok(0.5 * d * (mean_sq_norm / (d * sigma * sigma)).ln_1p())
}

/// Forward tolerance for accepting an inverse candidate.
pub const INVERSION_TOLERANCE: f64 = 1e-9;

fn forward(x: f64, alpha: f64) -> (f64, f64) {
    let t = alpha * x;
    (x * t.cos(), x * t.sin())
}

fn reproduces(x: f64, a: f64, b: f64, alpha: f64) -> bool {
    let (fa, fb) = forward(x, alpha);
    (fa - a).hypot(fb - b) < INVERSION_TOLERANCE
}

/// Preimages of `(a, b)` under `x -> (x cos ax, x sin ax)`. Candidates are
/// `+-rho` and the phase solutions `(atan2(b, a) + 2 pi k) / alpha` (with the
/// sign-flipped branch `atan2(-b, -a)` for negative x) for `k` in `k_range`;
/// only those whose forward image matches within [`INVERSION_TOLERANCE`] are
/// kept. Sorted ascending, deduplicated to the same tolerance.
pub fn invert_candidates(a: f64, b: f64, alpha: f64, k_range: std::ops::RangeInclusive<i64>) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let rho = a.hypot(b);
    if rho == 0.0 {
        return Ok(vec![0.0]);
    }
    let two_pi = std::f64::consts::TAU;
    let mut raw = vec![rho, -rho];
    let phase_pos = b.atan2(a);
    let phase_neg = (-b).atan2(-a);
    for k in k_range {
        let shift = two_pi * k as f64;
        raw.push((phase_pos + shift) / alpha);
        raw.push((phase_neg + shift) / alpha);
    }
    let mut kept: Vec<f64> = raw.into_iter().filter(|&x| reproduces(x, a, b, alpha)).collect();
    kept.sort_by(f64::total_cmp);
    kept.dedup_by(|x, y| (*x - *y).abs() < INVERSION_TOLERANCE);
    Ok(kept)
}
