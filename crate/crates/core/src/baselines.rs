//! The eight comparison mechanisms behind one interface.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{gaussian_perturb, noise_sigma};
use crate::rng::{laplace, standard_normal};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    GaussianDp,
    LaplaceDp,
    PersonalizedDp,
    RandomProjection,
    AdditiveNoise,
    Lsh,
    BinaryEncoding,
    ReconstructionResistant,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 8] = [
        BaselineKind::GaussianDp,
        BaselineKind::LaplaceDp,
        BaselineKind::PersonalizedDp,
        BaselineKind::RandomProjection,
        BaselineKind::AdditiveNoise,
        BaselineKind::Lsh,
        BaselineKind::BinaryEncoding,
        BaselineKind::ReconstructionResistant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::GaussianDp => "gaussian_dp",
            BaselineKind::LaplaceDp => "laplace_dp",
            BaselineKind::PersonalizedDp => "personalized_dp",
            BaselineKind::RandomProjection => "random_projection",
            BaselineKind::AdditiveNoise => "additive_noise",
            BaselineKind::Lsh => "lsh",
            BaselineKind::BinaryEncoding => "binary_encoding",
            BaselineKind::ReconstructionResistant => "reconstruction_resistant",
        }
    }

    /// Whether the mechanism is calibrated to a global privacy budget.
    pub fn takes_epsilon(self) -> bool {
        matches!(self, BaselineKind::GaussianDp | BaselineKind::LaplaceDp)
    }

    /// Whether the mechanism belongs to the DP family evaluated per regime.
    pub fn is_dp(self) -> bool {
        matches!(
            self,
            BaselineKind::GaussianDp | BaselineKind::LaplaceDp | BaselineKind::PersonalizedDp
        )
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown baseline {s:?}")))
    }
}

/// Parameters shared by the baseline family. Fields irrelevant to a kind
/// are ignored by it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineParams<F> {
    pub epsilon: F,
    pub delta: F,
    pub delta2: F,
    /// Output dimension for the projection baselines; `None` picks
    /// `ceil(d/4)` (random projection) or `ceil(d/2)` (reconstruction resistant).
    pub projection_dim: Option<usize>,
    /// Gaussian noise scale added after projection.
    pub projection_noise: F,
    /// Fixed noise scale of the additive-noise control.
    pub additive_noise: F,
    pub lsh_bits: usize,
    pub flip_probability: F,
    /// Range of per-record budgets for personalized DP.
    pub pdp_eps_low: F,
    pub pdp_eps_high: F,
}

impl Default for BaselineParams<f64> {
    fn default() -> Self {
        Self {
            epsilon: 47.5,
            delta: 1e-5,
            delta2: 1.0,
            projection_dim: None,
            projection_noise: 0.5,
            additive_noise: 0.1,
            lsh_bits: 256,
            flip_probability: 0.25,
            pdp_eps_low: 0.5,
            pdp_eps_high: 5.0,
        }
    }
}

impl<F: Real> BaselineParams<F> {
    pub fn cast<G: Real>(&self) -> BaselineParams<G> {
        let c = |v: F| G::of(v.as_f64());
        BaselineParams {
            epsilon: c(self.epsilon),
            delta: c(self.delta),
            delta2: c(self.delta2),
            projection_dim: self.projection_dim,
            projection_noise: c(self.projection_noise),
            additive_noise: c(self.additive_noise),
            lsh_bits: self.lsh_bits,
            flip_probability: c(self.flip_probability),
            pdp_eps_low: c(self.pdp_eps_low),
            pdp_eps_high: c(self.pdp_eps_high),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineSpec<F> {
    pub kind: BaselineKind,
    pub params: BaselineParams<F>,
}

impl<F: Real> BaselineSpec<F> {
    pub fn new(kind: BaselineKind, params: BaselineParams<F>) -> Result<Self> {
        let spec = Self { kind, params };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let bad = |msg: String| Err(Error::InvalidParameter(format!("{}: {msg}", self.kind)));
        match self.kind {
            BaselineKind::GaussianDp => noise_sigma(p.epsilon, p.delta, p.delta2).map(|_| ()),
            BaselineKind::LaplaceDp => {
                if !(p.epsilon > F::zero()) || !(p.delta2 > F::zero()) {
                    return bad(format!("need positive epsilon and sensitivity, got {} / {}", p.epsilon, p.delta2));
                }
                Ok(())
            }
            BaselineKind::PersonalizedDp => {
                if !(p.pdp_eps_low > F::zero() && p.pdp_eps_low <= p.pdp_eps_high) {
                    return bad(format!("need 0 < low <= high, got [{}, {}]", p.pdp_eps_low, p.pdp_eps_high));
                }
                noise_sigma(p.pdp_eps_low, p.delta, p.delta2).map(|_| ())
            }
            BaselineKind::RandomProjection | BaselineKind::ReconstructionResistant => {
                if p.projection_dim == Some(0) {
                    return bad("projection dimension must be positive".into());
                }
                if !(p.projection_noise >= F::zero()) {
                    return bad(format!("noise must be non-negative, got {}", p.projection_noise));
                }
                Ok(())
            }
            BaselineKind::AdditiveNoise => {
                if !(p.additive_noise >= F::zero()) {
                    return bad(format!("noise must be non-negative, got {}", p.additive_noise));
                }
                Ok(())
            }
            BaselineKind::Lsh => {
                if p.lsh_bits == 0 {
                    return bad("bit count must be positive".into());
                }
                Ok(())
            }
            BaselineKind::BinaryEncoding => {
                if !(p.flip_probability >= F::zero() && p.flip_probability <= F::one()) {
                    return bad(format!("flip probability must lie in [0, 1], got {}", p.flip_probability));
                }
                Ok(())
            }
        }
    }

    /// Noise scale this baseline adds to each entry, when it has a single one.
    pub fn sigma(&self) -> Option<F> {
        let p = &self.params;
        match self.kind {
            BaselineKind::GaussianDp => noise_sigma(p.epsilon, p.delta, p.delta2).ok(),
            BaselineKind::AdditiveNoise => Some(p.additive_noise),
            BaselineKind::RandomProjection | BaselineKind::ReconstructionResistant => Some(p.projection_noise),
            _ => None,
        }
    }
}

fn gaussian_matrix<F: Real, R: Rng + ?Sized>(rows: usize, cols: usize, scale: F, rng: &mut R) -> Array2<F> {
    Array2::from_shape_simple_fn((rows, cols), || scale * standard_normal::<F, R>(rng))
}

fn project<F: Real, R: Rng + ?Sized>(x: ArrayView2<'_, F>, k: usize, noise: F, rng: &mut R) -> Array2<F> {
    let p = gaussian_matrix(x.ncols(), k, F::one() / F::of_usize(k).sqrt(), rng);
    let projected = x.dot(&p);
    gaussian_perturb(projected.view(), noise, rng)
}

/// Applies a baseline to clipped data. Deterministic given the generator state.
pub fn apply_baseline<F: Real, R: Rng + ?Sized>(
    spec: &BaselineSpec<F>,
    x: ArrayView2<'_, F>,
    rng: &mut R,
) -> Result<Array2<F>> {
    spec.validate()?;
    let p = &spec.params;
    let (n, d) = x.dim();
    let out = match spec.kind {
        BaselineKind::GaussianDp => {
            let sigma = noise_sigma(p.epsilon, p.delta, p.delta2)?;
            gaussian_perturb(x, sigma, rng)
        }
        BaselineKind::LaplaceDp => {
            let l1 = p.delta2 * F::of_usize(d).sqrt();
            let scale = l1 / p.epsilon;
            x.mapv(|v| v + laplace(rng, scale))
        }
        BaselineKind::PersonalizedDp => {
            let mut y = x.to_owned();
            let (lo, hi) = (p.pdp_eps_low.as_f64(), p.pdp_eps_high.as_f64());
            for mut row in y.rows_mut() {
                let eps = if hi > lo { rng.random_range(lo..hi) } else { lo };
                let sigma = noise_sigma(F::of(eps), p.delta, p.delta2)?;
                for v in row.iter_mut() {
                    *v += sigma * standard_normal::<F, R>(rng);
                }
            }
            y
        }
        BaselineKind::RandomProjection => {
            let k = p.projection_dim.unwrap_or(d.div_ceil(4));
            project(x, k, p.projection_noise, rng)
        }
        BaselineKind::AdditiveNoise => gaussian_perturb(x, p.additive_noise, rng),
        BaselineKind::Lsh => {
            let h = gaussian_matrix(d, p.lsh_bits, F::one(), rng);
            x.dot(&h)
                .mapv(|v| if v >= F::zero() { F::one() } else { -F::one() })
        }
        BaselineKind::BinaryEncoding => {
            let flip = p.flip_probability.as_f64();
            let half = F::of(0.5);
            x.mapv(|v| {
                let bit = v >= half;
                let flipped = if flip > 0.0 { bit ^ rng.random_bool(flip) } else { bit };
                if flipped { F::one() } else { F::zero() }
            })
        }
        BaselineKind::ReconstructionResistant => {
            let k = p.projection_dim.unwrap_or(d.div_ceil(2));
            let mut y = project(x, k, p.projection_noise, rng);
            for mut row in y.rows_mut() {
                let norm = row.iter().map(|&v| v * v).sum::<F>().sqrt();
                if norm > F::zero() {
                    row.mapv_inplace(|v| v / norm);
                }
            }
            y
        }
    };
    debug_assert_eq!(out.nrows(), n);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::Array2;

    fn spec(kind: BaselineKind) -> BaselineSpec<f64> {
        BaselineSpec::new(kind, BaselineParams::default()).unwrap()
    }

    fn data() -> Array2<f64> {
        Array2::from_shape_fn((20, 8), |(i, j)| ((i * 7 + j * 3) % 10) as f64 / 40.0)
    }

    #[test]
    fn additive_zero_noise_is_identity() {
        let mut s = spec(BaselineKind::AdditiveNoise);
        s.params.additive_noise = 0.0;
        let x = data();
        assert_eq!(apply_baseline(&s, x.view(), &mut rng::seeded(0)).unwrap(), x);
    }

    #[test]
    fn binary_without_flips_thresholds() {
        let mut s = spec(BaselineKind::BinaryEncoding);
        s.params.flip_probability = 0.0;
        let x = Array2::from_elem((4, 3), 0.9);
        assert_eq!(
            apply_baseline(&s, x.view(), &mut rng::seeded(0)).unwrap(),
            Array2::from_elem((4, 3), 1.0)
        );
    }

    #[test]
    fn gaussian_matches_mechanism_path() {
        let s = spec(BaselineKind::GaussianDp);
        let x = data();
        let a = apply_baseline(&s, x.view(), &mut rng::seeded(5)).unwrap();
        let sigma = noise_sigma(47.5, 1e-5, 1.0).unwrap();
        let b = gaussian_perturb(x.view(), sigma, &mut rng::seeded(5));
        assert_eq!(a, b);
    }

    #[test]
    fn output_shapes_and_ranges() {
        let x = data();
        let shape = |k| apply_baseline(&spec(k), x.view(), &mut rng::seeded(1)).unwrap();
        assert_eq!(shape(BaselineKind::RandomProjection).dim(), (20, 2));
        let rr = shape(BaselineKind::ReconstructionResistant);
        assert_eq!(rr.dim(), (20, 4));
        for row in rr.rows() {
            let n: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
        let lsh = shape(BaselineKind::Lsh);
        assert_eq!(lsh.dim(), (20, 256));
        assert!(lsh.iter().all(|&v| v == 1.0 || v == -1.0));
        let bin = shape(BaselineKind::BinaryEncoding);
        assert!(bin.iter().all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(shape(BaselineKind::LaplaceDp).dim(), (20, 8));
    }

    #[test]
    fn pdp_ignores_global_epsilon() {
        let x = data();
        let mut a = spec(BaselineKind::PersonalizedDp);
        let mut b = a;
        a.params.epsilon = 15.0;
        b.params.epsilon = 80.0;
        assert_eq!(
            apply_baseline(&a, x.view(), &mut rng::seeded(2)).unwrap(),
            apply_baseline(&b, x.view(), &mut rng::seeded(2)).unwrap()
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let x = data();
        for kind in BaselineKind::ALL {
            let s = spec(kind);
            assert_eq!(
                apply_baseline(&s, x.view(), &mut rng::seeded(9)).unwrap(),
                apply_baseline(&s, x.view(), &mut rng::seeded(9)).unwrap(),
                "{kind}"
            );
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let with = |f: fn(&mut BaselineParams<f64>)| {
            let mut p = BaselineParams::default();
            f(&mut p);
            p
        };
        assert!(BaselineSpec::new(BaselineKind::BinaryEncoding, with(|p| p.flip_probability = 1.5)).is_err());
        assert!(BaselineSpec::new(BaselineKind::Lsh, with(|p| p.lsh_bits = 0)).is_err());
        assert!(BaselineSpec::new(BaselineKind::GaussianDp, with(|p| p.epsilon = 0.0)).is_err());
        assert!(BaselineSpec::new(BaselineKind::PersonalizedDp, with(|p| p.pdp_eps_low = 6.0)).is_err());
        assert!("nope".parse::<BaselineKind>().is_err());
        assert_eq!("lsh".parse::<BaselineKind>().unwrap(), BaselineKind::Lsh);
    }
}
