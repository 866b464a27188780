//! Scalar random variate generators used by the generative model and the
//! data-augmentation steps.

use rand_distr::{Distribution, Gamma, StandardNormal};

use super::rng::RngStream;
use super::univariate::{norm_cdf, norm_quantile};
use crate::error::{Result, TrustError};

/// Gamma(shape, rate) draw; the mean is shape / rate.
pub fn sample_gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
        return Err(TrustError::domain(format!("gamma parameters must be positive, got ({shape}, {rate})")));
    }
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| TrustError::domain(e.to_string()))?;
    Ok(g.sample(rng))
}

pub fn sample_std_normal(rng: &mut RngStream) -> f64 {
    StandardNormal.sample(rng)
}

/// Standard normal conditioned on X > a.
pub fn sample_std_normal_above(a: f64, rng: &mut RngStream) -> f64 {
    let tail = norm_cdf(-a);
    if tail >= 1e-10 {
        let u = rng.open01();
        if a >= 0.0 {
            -norm_quantile(u * tail)
        } else {
            // the lower cut removes less than half the mass
            let lo = norm_cdf(a);
            norm_quantile(lo + u * tail).max(a)
        }
    } else {
        // exponential proposal with the optimal rate for the cut
        let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
        loop {
            let z = a - rng.open01().ln() / lambda;
            let rho = (-0.5 * (z - lambda).powi(2)).exp();
            if rng.open01() <= rho {
                return z;
            }
        }
    }
}

/// N(mean, variance) conditioned on positivity.
pub fn sample_trunc_normal_lower(mean: f64, variance: f64, rng: &mut RngStream) -> Result<f64> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(TrustError::domain(format!("variance must be positive, got {variance}")));
    }
    if !mean.is_finite() {
        return Err(TrustError::domain("mean must be finite"));
    }
    let sd = variance.sqrt();
    let x = sample_std_normal_above(-mean / sd, rng);
    Ok((mean + sd * x).max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::univariate::norm_pdf;

    fn mean_var(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    // Kolmogorov-Smirnov statistic against a CDF and its asymptotic p-value.
    pub(crate) fn ks_pvalue<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> f64 {
        sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sample.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in sample.iter().enumerate() {
            let f = cdf(x);
            d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
        }
        let t = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
        let mut p = 0.0;
        for k in 1..100 {
            let k = k as f64;
            p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * t * t).exp();
        }
        p.clamp(0.0, 1.0)
    }

    #[test]
    fn gamma_mean() {
        let mut rng = RngStream::new(11, 0);
        let n = 1_000_000;
        let x: Vec<f64> = (0..n).map(|_| sample_gamma(5.0, 5.0, &mut rng).unwrap()).collect();
        let (m, _) = mean_var(&x);
        let se = (5.0f64 / 25.0 / n as f64).sqrt();
        assert!((m - 1.0).abs() < 4.0 * se);
    }

    #[test]
    fn gamma_variance() {
        let mut rng = RngStream::new(12, 0);
        let n = 200_000;
        let x: Vec<f64> = (0..n).map(|_| sample_gamma(3.0, 0.2, &mut rng).unwrap()).collect();
        let (_, v) = mean_var(&x);
        // var of the sample variance for Gamma: (m4 - σ⁴)/n with excess kurtosis 6/shape
        let sigma2 = 75.0;
        let se = (sigma2 * sigma2 * (2.0 + 6.0 / 3.0) / n as f64).sqrt();
        assert!((v - sigma2).abs() < 4.0 * se, "v={v}");
    }

    #[test]
    fn gamma_ks() {
        use statrs::function::gamma::gamma_lr;
        let mut rng = RngStream::new(13, 0);
        let mut x: Vec<f64> = (0..100_000).map(|_| sample_gamma(2.5, 1.5, &mut rng).unwrap()).collect();
        let p = ks_pvalue(&mut x, |v| gamma_lr(2.5, 1.5 * v));
        assert!(p > 0.001, "p={p}");
    }

    #[test]
    fn gamma_rejects_bad_params() {
        let mut rng = RngStream::new(1, 0);
        assert!(sample_gamma(0.0, 1.0, &mut rng).is_err());
        assert!(sample_gamma(1.0, -1.0, &mut rng).is_err());
    }

    #[test]
    fn half_normal_mean() {
        let mut rng = RngStream::new(14, 0);
        let n = 1_000_000;
        let x: Vec<f64> = (0..n).map(|_| sample_trunc_normal_lower(0.0, 1.0, &mut rng).unwrap()).collect();
        let (m, v) = mean_var(&x);
        assert!((m - (2.0 / std::f64::consts::PI).sqrt()).abs() < 4.0 * (v / n as f64).sqrt());
        assert!(x.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn negligible_truncation_is_normal() {
        let mut rng = RngStream::new(15, 0);
        let mut x: Vec<f64> = (0..100_000).map(|_| sample_trunc_normal_lower(10.0, 1.0, &mut rng).unwrap()).collect();
        let p = ks_pvalue(&mut x, |v| norm_cdf(v - 10.0));
        assert!(p > 0.001, "p={p}");
    }

    #[test]
    fn inverse_mills_mean() {
        let mut rng = RngStream::new(16, 0);
        let n = 200_000;
        let mean = -3.0;
        let x: Vec<f64> = (0..n).map(|_| sample_trunc_normal_lower(mean, 1.0, &mut rng).unwrap()).collect();
        let (m, v) = mean_var(&x);
        let a = -mean;
        let exact = mean + norm_pdf(a) / norm_cdf(-a);
        assert!((m - exact).abs() < 4.0 * (v / n as f64).sqrt(), "{m} vs {exact}");
    }

    #[test]
    fn deep_tail_rejection() {
        let mut rng = RngStream::new(17, 0);
        let n = 100_000;
        let mean = -8.0;
        let mut x: Vec<f64> = (0..n).map(|_| sample_trunc_normal_lower(mean, 1.0, &mut rng).unwrap()).collect();
        assert!(x.iter().all(|&v| v > 0.0));
        // truncated normal CDF on (0, ∞) via the exponential-tilt form
        let a = -mean;
        let p = ks_pvalue(&mut x, |v| {
            let num = norm_cdf(-a) - norm_cdf(-(a + v));
            num / norm_cdf(-a)
        });
        assert!(p > 0.001, "p={p}");
    }

    #[test]
    fn reproducible() {
        let a: Vec<f64> = {
            let mut r = RngStream::new(3, 9);
            (0..50).map(|_| sample_trunc_normal_lower(0.3, 2.0, &mut r).unwrap()).collect()
        };
        let b: Vec<f64> = {
            let mut r = RngStream::new(3, 9);
            (0..50).map(|_| sample_trunc_normal_lower(0.3, 2.0, &mut r).unwrap()).collect()
        };
        assert_eq!(a, b);
    }
}
