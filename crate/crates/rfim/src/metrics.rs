//! Distances between an empirical sample and the standard normal law: the
//! Wasserstein distance as an exactly integrated L1 gap between the empirical
//! CDF and the normal CDF, the Kolmogorov (sup) distance, and the standard
//! consistency inequality relating the two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{mean, normal_cdf, normal_density, normal_quantile, variance_estimate};

/// Distances of one sample set from the standard normal, with the moments
/// used for standardization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceReport {
    pub n_samples: usize,
    pub d_wasserstein: f64,
    pub d_kolmogorov: f64,
    pub kkw_satisfied: bool,
    pub mean: f64,
    pub variance: f64,
}

/// Truncation point for the CDF-gap integral; the neglected tail mass of the
/// standard normal beyond +-10 is below 1e-22.
const TAIL: f64 = 10.0;

fn checked_sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::domain("distance from an empty sample is undefined"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("samples must be finite"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    Ok(xs)
}

/// Antiderivative of the standard normal CDF: A'(x) = Phi(x).
fn cdf_antiderivative(x: f64) -> f64 {
    x * normal_cdf(x) + normal_density(x)
}

/// Integral of |Phi(x) - c| over [a, b], split at the crossing point.
fn cdf_gap_on_interval(a: f64, b: f64, c: f64) -> f64 {
    debug_assert!(a <= b);
    let piece = |lo: f64, hi: f64| -> f64 {
        ((cdf_antiderivative(hi) - c * hi) - (cdf_antiderivative(lo) - c * lo)).abs()
    };
    if c <= 0.0 || c >= 1.0 {
        return piece(a, b);
    }
    let q = normal_quantile(c);
    if a < q && q < b {
        piece(a, q) + piece(q, b)
    } else {
        piece(a, b)
    }
}

/// Wasserstein distance between the empirical law of `samples` (as given,
/// no standardization) and the standard normal, computed exactly as the
/// integrated absolute gap between the two CDFs.
pub fn wasserstein_raw_to_normal(samples: &[f64]) -> Result<f64> {
    let xs = checked_sorted(samples)?;
    let n = xs.len();
    let mut total = 0.0;
    let left = TAIL.min(-TAIL).min(xs[0]);
    total += cdf_gap_on_interval(left, xs[0], 0.0);
    for j in 1..n {
        total += cdf_gap_on_interval(xs[j - 1], xs[j], j as f64 / n as f64);
    }
    let right = TAIL.max(xs[n - 1]);
    total += cdf_gap_on_interval(xs[n - 1], right, 1.0);
    Ok(total)
}

/// Wasserstein distance to the standard normal after standardizing the
/// sample by its own mean and unbiased standard deviation. Needs at least
/// two samples and a strictly positive variance.
pub fn wasserstein_to_normal(samples: &[f64]) -> Result<f64> {
    let standardized = standardize(samples)?;
    wasserstein_raw_to_normal(&standardized)
}

/// Kolmogorov (sup-norm) distance between the empirical CDF of `samples`
/// (as given) and the standard normal CDF.
pub fn kolmogorov_to_normal(samples: &[f64]) -> Result<f64> {
    let xs = checked_sorted(samples)?;
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let phi = normal_cdf(x);
        d = d.max((i as f64 + 1.0) / n - phi).max(phi - i as f64 / n);
    }
    Ok(d)
}

/// Consistency of the two distances against the standard normal: the sup
/// distance can be at most twice the square root of the Wasserstein
/// distance (up to round-off slack).
pub fn kkw_check(d_kolmogorov: f64, d_wasserstein: f64) -> bool {
    d_kolmogorov <= 2.0 * d_wasserstein.max(0.0).sqrt() + 1e-12
}

fn standardize(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::domain(
            "standardization needs at least two samples",
        ));
    }
    // sorting first makes the mean/variance sums independent of the input
    // order, so the distances are exactly permutation invariant
    let xs = checked_sorted(samples)?;
    let mu = mean(&xs);
    let var = variance_estimate(&xs).value;
    if !(var > 0.0) {
        return Err(Error::domain(
            "standardization needs a strictly positive sample variance",
        ));
    }
    let sd = var.sqrt();
    Ok(xs.iter().map(|&x| (x - mu) / sd).collect())
}

/// Full distance summary of one sample set: distances are measured after
/// standardization, alongside the raw mean and unbiased variance.
pub fn distance_report(samples: &[f64]) -> Result<DistanceReport> {
    let standardized = standardize(samples)?;
    let d_wasserstein = wasserstein_raw_to_normal(&standardized)?;
    let d_kolmogorov = kolmogorov_to_normal(&standardized)?;
    Ok(DistanceReport {
        n_samples: samples.len(),
        d_wasserstein,
        d_kolmogorov,
        kkw_satisfied: kkw_check(d_kolmogorov, d_wasserstein),
        mean: mean(samples),
        variance: variance_estimate(samples).value,
    })
}
