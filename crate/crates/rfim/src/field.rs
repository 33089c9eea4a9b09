//! Random field distributions. Every supported model is represented as the
//! push-forward u(Z) of a standard Gaussian Z through a Lipschitz map with an
//! accessible derivative u', so one sampled realization serves both the
//! finite-temperature solvers (which consume the field values) and the
//! ground-state machinery (which differentiates through the Gaussian
//! coordinates).

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeRegion;
use crate::numeric::{normal_cdf, normal_density};
use crate::rng;

/// A per-site field distribution with push-forward representation u(Z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FieldModel {
    /// Normal(mean, stddev^2); u(z) = mean + stddev * z.
    Gaussian { mean: f64, stddev: f64 },
    /// Uniform on [a, b]; u(z) = a + (b - a) * Phi(z).
    Uniform { a: f64, b: f64 },
}

impl FieldModel {
    pub fn gaussian(mean: f64, stddev: f64) -> Self {
        FieldModel::Gaussian { mean, stddev }
    }

    pub fn uniform(a: f64, b: f64) -> Self {
        FieldModel::Uniform { a, b }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FieldModel::Gaussian { stddev, .. } if !(stddev > 0.0) => {
                Err(Error::domain("gaussian field needs stddev > 0"))
            }
            FieldModel::Uniform { a, b } if !(a < b) => {
                Err(Error::domain("uniform field needs a < b"))
            }
            _ => Ok(()),
        }
    }

    /// (u(z), u'(z)).
    pub fn pushforward_eval(&self, z: f64) -> (f64, f64) {
        match *self {
            FieldModel::Gaussian { mean, stddev } => (mean + stddev * z, stddev),
            FieldModel::Uniform { a, b } => {
                (a + (b - a) * normal_cdf(z), (b - a) * normal_density(z))
            }
        }
    }

    /// sup |u'|: stddev for the gaussian map, (b-a)/sqrt(2 pi) for the
    /// uniform one (the Gaussian-CDF map is steepest at z = 0).
    pub fn lipschitz(&self) -> f64 {
        match *self {
            FieldModel::Gaussian { stddev, .. } => stddev,
            FieldModel::Uniform { a, b } => (b - a) / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }

    /// Analytic CDF of the field value, for distribution checks.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            FieldModel::Gaussian { mean, stddev } => normal_cdf((x - mean) / stddev),
            FieldModel::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
        }
    }
}

/// One sampled field: per-site values phi_i = u(z_i) together with the
/// underlying Gaussian coordinates and derivative values u'(z_i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRealization {
    pub phi: Vec<f64>,
    pub z: Option<Vec<f64>>,
    pub uprime: Option<Vec<f64>>,
}

impl FieldRealization {
    /// Field from explicit values, with no Gaussian coordinates attached.
    pub fn from_values(phi: Vec<f64>) -> Self {
        FieldRealization {
            phi,
            z: None,
            uprime: None,
        }
    }

    /// Field from Gaussian coordinates under a model.
    pub fn from_coordinates(model: &FieldModel, z: Vec<f64>) -> Self {
        let mut phi = Vec::with_capacity(z.len());
        let mut uprime = Vec::with_capacity(z.len());
        for &zi in &z {
            let (u, du) = model.pushforward_eval(zi);
            phi.push(u);
            uprime.push(du);
        }
        FieldRealization {
            phi,
            z: Some(z),
            uprime: Some(uprime),
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn gaussian_coordinates(&self) -> Result<(&[f64], &[f64])> {
        match (&self.z, &self.uprime) {
            (Some(z), Some(up)) => Ok((z, up)),
            _ => Err(Error::MissingGaussianCoordinates),
        }
    }

    /// Copy with the field value at `i` replaced (Gaussian coordinates are
    /// dropped, since the new value need not come from the push-forward).
    pub fn with_phi(&self, i: usize, phi_i: f64) -> Self {
        let mut phi = self.phi.clone();
        phi[i] = phi_i;
        FieldRealization::from_values(phi)
    }

    /// Copy with the Gaussian coordinate at `i` replaced and the site's
    /// push-forward values recomputed.
    pub fn with_z(&self, model: &FieldModel, i: usize, z_i: f64) -> Result<Self> {
        let (z, _) = self.gaussian_coordinates()?;
        let mut z = z.to_vec();
        z[i] = z_i;
        Ok(FieldRealization::from_coordinates(model, z))
    }

    /// Restriction to a subregion given the index map from
    /// `LatticeRegion::embed_indices`.
    pub fn restrict(&self, embed: &[usize]) -> Self {
        let pick = |v: &Vec<f64>| embed.iter().map(|&j| v[j]).collect::<Vec<f64>>();
        FieldRealization {
            phi: pick(&self.phi),
            z: self.z.as_ref().map(pick),
            uprime: self.uprime.as_ref().map(pick),
        }
    }
}

/// I.i.d. field over the region's sites. Each site's Gaussian coordinate is
/// keyed by its index in the region order, so the result is independent of
/// evaluation order and bit-identical for a fixed (stream, region).
pub fn sample_field(
    model: &FieldModel,
    region: &LatticeRegion,
    stream: &mut ChaCha8Rng,
) -> FieldRealization {
    let z: Vec<f64> = (0..region.len())
        .map(|i| rng::site_normal(stream, i))
        .collect();
    FieldRealization::from_coordinates(model, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_pushforward_is_affine() {
        let m = FieldModel::gaussian(0.0, 2.0);
        let (u, du) = m.pushforward_eval(1.0);
        assert_relative_eq!(u, 2.0, max_relative = 1e-15);
        assert_relative_eq!(du, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn uniform_pushforward_at_zero() {
        let m = FieldModel::uniform(0.0, 1.0);
        let (u, du) = m.pushforward_eval(0.0);
        assert_relative_eq!(u, 0.5, max_relative = 1e-14);
        assert_relative_eq!(du, 0.3989422804014327, max_relative = 1e-12);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-5;
        for model in [
            FieldModel::gaussian(0.3, 1.7),
            FieldModel::uniform(-2.0, 5.0),
        ] {
            for z in [-2.0, -0.5, 0.0, 0.9, 3.0] {
                let (_, du) = model.pushforward_eval(z);
                let (up, _) = model.pushforward_eval(z + h);
                let (um, _) = model.pushforward_eval(z - h);
                let fd = (up - um) / (2.0 * h);
                assert_relative_eq!(fd, du, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn lipschitz_constant_dominates_derivative_grid() {
        for model in [
            FieldModel::gaussian(0.0, 1.0),
            FieldModel::gaussian(-1.0, 0.25),
            FieldModel::uniform(0.0, 1.0),
            FieldModel::uniform(-3.0, 2.0),
        ] {
            let lip = model.lipschitz();
            let mut z = -6.0;
            while z <= 6.0 {
                let (_, du) = model.pushforward_eval(z);
                assert!(du.abs() <= lip + 1e-12, "u'({z}) = {du} exceeds {lip}");
                z += 1e-3;
            }
        }
    }

    #[test]
    fn uniform_samples_stay_in_support() {
        let region = LatticeRegion::cube(2, 8).unwrap();
        let model = FieldModel::uniform(-1.0, 1.0);
        let mut s = stream(11, Domain::Field, 0);
        let field = sample_field(&model, &region, &mut s);
        assert!(field.phi.iter().all(|&v| (-1.0..=1.0).contains(&v)));
    }

    #[test]
    fn gaussian_sample_mean_is_centered() {
        let region = LatticeRegion::cube(1, 1_000_000).unwrap();
        let model = FieldModel::gaussian(0.0, 1.0);
        let mut s = stream(5, Domain::Field, 0);
        let field = sample_field(&model, &region, &mut s);
        let mean = crate::numeric::mean(&field.phi);
        assert!(mean.abs() < 4e-3, "mean {mean}");
    }

    #[test]
    fn phi_equals_pushforward_of_z() {
        let region = LatticeRegion::cube(2, 5).unwrap();
        let model = FieldModel::uniform(-2.0, 3.0);
        let mut s = stream(7, Domain::Field, 2);
        let field = sample_field(&model, &region, &mut s);
        let (z, up) = field.gaussian_coordinates().unwrap();
        for i in 0..field.len() {
            let (u, du) = model.pushforward_eval(z[i]);
            assert_eq!(field.phi[i], u);
            assert_eq!(up[i], du);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let region = LatticeRegion::cube(2, 6).unwrap();
        let model = FieldModel::gaussian(0.5, 2.0);
        let a = sample_field(&model, &region, &mut stream(99, Domain::Field, 4));
        let b = sample_field(&model, &region, &mut stream(99, Domain::Field, 4));
        assert_eq!(a, b);
        let c = sample_field(&model, &region, &mut stream(99, Domain::Field, 5));
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_cdf_matches_model_cdf() {
        // Kolmogorov-Smirnov statistic of u(Z) against the analytic CDF.
        let region = LatticeRegion::cube(1, 100_000).unwrap();
        for model in [FieldModel::gaussian(1.0, 2.0), FieldModel::uniform(-1.0, 4.0)] {
            let mut s = stream(3, Domain::Field, 0);
            let mut values = sample_field(&model, &region, &mut s).phi;
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = values.len() as f64;
            let mut ks: f64 = 0.0;
            for (i, &x) in values.iter().enumerate() {
                let c = model.cdf(x);
                ks = ks
                    .max((c - i as f64 / n).abs())
                    .max(((i + 1) as f64 / n - c).abs());
            }
            assert!(ks < 0.01, "KS statistic {ks}");
        }
    }

    #[test]
    fn validation_rejects_degenerate_parameters() {
        assert!(FieldModel::gaussian(0.0, 0.0).validate().is_err());
        assert!(FieldModel::uniform(1.0, 1.0).validate().is_err());
        assert!(FieldModel::gaussian(0.0, 1.0).validate().is_ok());
    }

    #[test]
    fn config_syntax_round_trips() {
        let m: FieldModel =
            serde_json::from_str(r#"{"kind":"gaussian","mean":0.0,"stddev":1.0}"#).unwrap();
        assert_eq!(m, FieldModel::gaussian(0.0, 1.0));
        let u: FieldModel = serde_json::from_str(r#"{"kind":"uniform","a":-1.0,"b":1.0}"#).unwrap();
        assert_eq!(u, FieldModel::uniform(-1.0, 1.0));
        let text = serde_json::to_string(&m).unwrap();
        let back: FieldModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
