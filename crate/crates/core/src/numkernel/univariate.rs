//! Univariate normal, Student-t and gamma helpers.

use statrs::function::beta::beta_reg;
use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Result, TrustError};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Degrees of freedom above which the t law is treated as normal.
pub const NU_NORMAL: f64 = 1e12;

// Beyond this the incomplete-beta route loses digits; the normal-mixture
// representation is used instead.
const NU_MIXTURE: f64 = 2e4;

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

#[inline]
pub fn norm_logpdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// log Φ(x), accurate far into the lower tail.
pub fn norm_logcdf(x: f64) -> f64 {
    if x > 5.0 {
        (-norm_cdf(-x)).ln_1p()
    } else if x > -37.0 {
        norm_cdf(x).ln()
    } else {
        // asymptotic Mills-ratio expansion
        let x2 = x * x;
        let inv = 1.0 / x2;
        let series = 1.0 - inv * (1.0 - 3.0 * inv * (1.0 - 5.0 * inv * (1.0 - 7.0 * inv * (1.0 - 9.0 * inv))));
        -0.5 * x2 - (-x).ln() - LN_SQRT_2PI + series.ln()
    }
}

#[inline]
pub fn norm_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

fn t_log_norm_const(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln()
}

/// log density of the standard (unit scale) t law; `nu = inf` gives the normal.
pub fn t_logpdf_std(x: f64, nu: f64) -> f64 {
    if nu >= NU_NORMAL {
        return norm_logpdf(x);
    }
    t_log_norm_const(nu) - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

/// Lower tail P(T <= x) of the standard t law, computed without cancellation.
pub fn t_cdf_std(x: f64, nu: f64) -> f64 {
    if nu >= NU_NORMAL {
        return norm_cdf(x);
    }
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == 0.0 {
        return 0.5;
    }
    if nu > NU_MIXTURE {
        return super::lowdim::gamma_mixture_log(nu, |w| norm_logcdf(x * w.sqrt())).exp();
    }
    let x2 = x * x;
    if x2 < nu {
        let half = 0.5 * beta_reg(0.5, 0.5 * nu, x2 / (nu + x2));
        if x < 0.0 {
            0.5 - half
        } else {
            0.5 + half
        }
    } else {
        let tail = 0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + x2));
        if x < 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }
}

/// log P(T <= x) for the standard t law.
pub fn t_logcdf_std(x: f64, nu: f64) -> f64 {
    if nu >= NU_NORMAL {
        return norm_logcdf(x);
    }
    if nu > NU_MIXTURE {
        return super::lowdim::gamma_mixture_log(nu, |w| norm_logcdf(x * w.sqrt()));
    }
    if x < 0.0 {
        t_cdf_std(x, nu).ln()
    } else {
        (-t_cdf_std(-x, nu)).ln_1p()
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if nu.is_nan() || nu <= 0.0 {
        return Err(TrustError::domain(format!("degrees of freedom must be positive, got {nu}")));
    }
    Ok(())
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(TrustError::domain(format!("scale must be positive, got {scale}")));
    }
    Ok(())
}

/// Student-t distribution function with scale parameter `scale` (the square
/// root of the scale matrix entry).
pub fn student_t_cdf(x: f64, scale: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    check_scale(scale)?;
    if !x.is_finite() {
        return Err(TrustError::domain("t cdf argument must be finite"));
    }
    Ok(t_cdf_std(x / scale, nu))
}

pub fn student_t_pdf(x: f64, scale: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    check_scale(scale)?;
    Ok((t_logpdf_std(x / scale, nu) - scale.ln()).exp())
}

/// Inverse of [`student_t_cdf`].
pub fn student_t_quantile(u: f64, scale: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    check_scale(scale)?;
    if !(u > 0.0 && u < 1.0) {
        return Err(TrustError::domain(format!("probability must lie in (0,1), got {u}")));
    }
    Ok(scale * t_quantile_std(u, nu))
}

/// Standard t quantile via safeguarded Newton on the lower tail in log space.
pub fn t_quantile_std(u: f64, nu: f64) -> f64 {
    if nu >= NU_NORMAL {
        return norm_quantile(u);
    }
    if u == 0.5 {
        return 0.0;
    }
    let (p, sign) = if u < 0.5 { (u, -1.0) } else { (1.0 - u, 1.0) };
    // p is the lower tail probability of -|x|
    let lp = p.ln();
    let z = norm_quantile(p);
    let c = t_log_norm_const(nu) + 0.5 * (nu - 1.0) * nu.ln() - nu.ln();
    let x_tail = -((c - lp) / nu).exp();
    let x0 = z.min(x_tail);
    let mut hi = 0.0_f64;
    let mut lo = if x0.is_finite() { x0 } else { -1e300 };
    while t_cdf_std(lo, nu) > p {
        hi = lo;
        lo *= 2.0;
        if !lo.is_finite() {
            return sign * f64::INFINITY;
        }
    }
    let mut x = lo;
    for _ in 0..200 {
        let g = t_cdf_std(x, nu);
        if g > p {
            hi = x;
        } else {
            lo = x;
        }
        let f = t_logpdf_std(x, nu).exp();
        let mut xn = if g > 0.0 && f > 0.0 { x - (g.ln() - lp) * g / f } else { f64::NAN };
        if !(xn > lo && xn < hi) {
            xn = 0.5 * (lo + hi);
        }
        let done = (xn - x).abs() <= 1e-15 * x.abs().max(1e-300);
        x = xn;
        if done || hi - lo <= 1e-15 * lo.abs() {
            break;
        }
    }
    -sign * x
}

/// Quantile of Gamma(shape, rate = 1).
pub fn gamma_quantile_unit(p: f64, shape: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let lg = ln_gamma(shape);
    // starting point: small-x expansion or Wilson-Hilferty
    let mut x = if shape < 1.0 && p < 0.9 {
        ((p.ln() + ln_gamma(shape + 1.0)) / shape).exp()
    } else {
        let z = norm_quantile(p);
        let c = 1.0 / (9.0 * shape);
        let v = 1.0 - c + z * c.sqrt();
        if v > 0.0 {
            shape * v * v * v
        } else {
            ((p.ln() + ln_gamma(shape + 1.0)) / shape).exp()
        }
    };
    let upper = p > 0.5;
    let target = if upper { 1.0 - p } else { p };
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    for _ in 0..100 {
        let f = if upper { gamma_ur(shape, x) } else { gamma_lr(shape, x) };
        let diff = if upper { target - f } else { f - target };
        if diff > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dens = ((shape - 1.0) * x.ln() - x - lg).exp();
        if dens <= 0.0 || !dens.is_finite() {
            x = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x + 1.0 };
            continue;
        }
        // Halley correction
        let t = diff / dens;
        let curv = (shape - 1.0) / x - 1.0;
        let mut step = t / (1.0 - 0.5 * (t * curv).clamp(-0.9, 0.9));
        if !step.is_finite() {
            step = t;
        }
        let mut xn = x - step;
        if xn <= lo || xn >= hi {
            xn = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(lo) + 1e-300 };
        }
        if (xn - x).abs() <= 1e-14 * x {
            return xn;
        }
        x = xn;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn t_cdf_at_zero_is_half() {
        for nu in [0.5, 1.0, 3.0, 10.0, 1e6] {
            assert_eq!(student_t_cdf(0.0, 1.0, nu).unwrap(), 0.5);
        }
    }

    #[test]
    fn cauchy_closed_form() {
        assert!((student_t_cdf(1.0, 1.0, 1.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((student_t_quantile(0.75, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn t_cdf_matches_quadrature() {
        // integrate the density from 0 to x and add one half
        let nu = 10.0;
        let x = 1.8125;
        let dens = |t: f64| t_logpdf_std(t, nu).exp();
        let q = 0.5 + simpson(dens, 0.0, x, 2000);
        assert!((student_t_cdf(x, 1.0, nu).unwrap() - q).abs() < 1e-8);
    }

    #[test]
    fn quantile_roundtrip() {
        for nu in [1.0, 2.5, 5.0, 10.0, 30.0, 1e7] {
            for u in [1e-12, 1e-6, 0.01, 0.3, 0.5, 0.75, 0.975, 0.999_999] {
                let x = student_t_quantile(u, 1.0, nu).unwrap();
                let back = student_t_cdf(x, 1.0, nu).unwrap();
                assert!((back - u).abs() < 1e-10 * u.max(1e-2), "nu={nu} u={u} back={back}");
            }
        }
    }

    #[test]
    fn large_nu_close_to_normal() {
        for x in [-3.0, -1.0, 0.5, 2.0] {
            assert!((t_cdf_std(x, 1e7) - norm_cdf(x)).abs() < 1e-6);
        }
        // high-precision reference values
        assert!((t_cdf_std(-1.0, 1e6) / 0.15865537491678906 - 1.0).abs() < 1e-12);
        assert!((t_cdf_std(-5.0, 1e5) / 2.8713508393208364e-7 - 1.0).abs() < 1e-10);
        assert!((t_cdf_std(-5.0, 30.0) / 1.1648342733503898e-5 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn scale_behaves() {
        let a = student_t_cdf(2.0, 2.0, 4.0).unwrap();
        let b = student_t_cdf(1.0, 1.0, 4.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(student_t_cdf(1.0, 1.0, 0.0).is_err());
        assert!(student_t_quantile(1.0, 1.0, 3.0).is_err());
        assert!(student_t_quantile(0.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn logcdf_tail() {
        // log Φ(-40) from the series against the exact recursion at -30
        let a = norm_logcdf(-30.0);
        assert!((a - norm_cdf(-30.0).ln()).abs() < 1e-12);
        // high-precision references on both sides of the series switch
        assert!((norm_logcdf(-37.0) / -689.0305855768905936 - 1.0).abs() < 1e-14);
        assert!((norm_logcdf(-36.9) - norm_cdf(-36.9).ln()).abs() < 1e-9);
        assert!((norm_logcdf(-20.0) / -203.91715537109726394 - 1.0).abs() < 1e-14);
        assert!(norm_logcdf(8.0) < 0.0);
    }

    #[test]
    fn gamma_quantile_roundtrip() {
        for shape in [0.3, 1.0, 2.5, 5.0, 60.0] {
            for p in [1e-10, 1e-4, 0.1, 0.5, 0.9, 1.0 - 1e-9] {
                let x = gamma_quantile_unit(p, shape);
                let back = gamma_lr(shape, x);
                assert!((back - p).abs() < 1e-11 + 1e-9 * p, "shape={shape} p={p} x={x} back={back}");
            }
        }
    }
}
