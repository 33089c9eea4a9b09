//! Shared numerical primitives: deterministic reductions, moment estimates
//! with standard errors, Gauss-Legendre nodes, standard-normal functions.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Estimate { value, stderr }
    }
}

/// Pairwise summation. Deterministic for a fixed input order, and the one
/// reduction used to merge per-replication results so that totals do not
/// depend on worker count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample mean with standard error s/sqrt(n).
pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let m = mean(xs);
    if xs.len() < 2 {
        return Estimate::new(m, f64::NAN);
    }
    let dev2: Vec<f64> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    let s2 = pairwise_sum(&dev2) / (n - 1.0);
    Estimate::new(m, (s2 / n).sqrt())
}

/// Unbiased sample variance; stderr from the delta-method formula
/// Var(s^2) = (mu4 - s^4 (n-3)/(n-1)) / n with plug-in central moments.
pub fn variance_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    assert!(xs.len() >= 2, "variance needs at least two samples");
    let m = mean(xs);
    let dev2: Vec<f64> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    let dev4: Vec<f64> = dev2.iter().map(|&d| d * d).collect();
    let s2 = pairwise_sum(&dev2) / (n - 1.0);
    let mu4 = pairwise_sum(&dev4) / n;
    let var_s2 = (mu4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n;
    Estimate::new(s2, var_s2.max(0.0).sqrt())
}

/// Plug-in L^p norm (mean |x|^p)^{1/p} with a jackknife standard error.
pub fn lp_norm_estimate(xs: &[f64], p: u32) -> Estimate {
    let r = xs.len();
    assert!(r >= 2, "L^p norm needs at least two samples");
    let pows: Vec<f64> = xs.iter().map(|&x| x.abs().powi(p as i32)).collect();
    let total = pairwise_sum(&pows);
    let inv_p = 1.0 / p as f64;
    let value = (total / r as f64).powf(inv_p);
    let loo: Vec<f64> = pows
        .iter()
        .map(|&y| (((total - y) / (r as f64 - 1.0)).max(0.0)).powf(inv_p))
        .collect();
    let loo_mean = mean(&loo);
    let sq: Vec<f64> = loo.iter().map(|&t| (t - loo_mean) * (t - loo_mean)).collect();
    let stderr = ((r as f64 - 1.0) / r as f64 * pairwise_sum(&sq)).sqrt();
    Estimate::new(value, stderr)
}

/// Gauss-Legendre nodes and weights on [0, 1], by Newton iteration on the
/// Legendre recurrence from the Chebyshev initial guess.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1]
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

pub fn normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal parameters are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pairwise_matches_naive_on_small_inputs() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert_relative_eq!(pairwise_sum(&xs), naive, max_relative = 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_monomials_exactly() {
        // degree <= 2n-1 on [0,1]
        for n in [2usize, 4, 8, 16, 32] {
            let (nodes, weights) = gauss_legendre_unit(n);
            for deg in 0..(2 * n) {
                let quad: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&x, &w)| w * x.powi(deg as i32))
                    .sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert_relative_eq!(quad, exact, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn gauss_legendre_weights_sum_to_one() {
        for n in 1..=40 {
            let (_, weights) = gauss_legendre_unit(n);
            assert_relative_eq!(weights.iter().sum::<f64>(), 1.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn normal_functions_reference_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, max_relative = 1e-14);
        assert_relative_eq!(normal_density(0.0), 0.3989422804014327, max_relative = 1e-13);
        assert_relative_eq!(normal_quantile(0.975), 1.959963984540054, max_relative = 1e-9);
    }

    #[test]
    fn variance_estimate_on_known_sample() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let est = variance_estimate(&xs);
        assert_relative_eq!(est.value, 2.5, max_relative = 1e-14);
    }

    #[test]
    fn lp_norm_plugin_value() {
        let xs = [-1.0, 1.0, -1.0, 1.0];
        for p in [2u32, 3, 4] {
            let est = lp_norm_estimate(&xs, p);
            assert_relative_eq!(est.value, 1.0, max_relative = 1e-14);
            assert!(est.stderr.abs() < 1e-12);
        }
    }
}
