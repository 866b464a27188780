//! Deterministic normal and t distribution functions in one to three
//! dimensions, plus the gamma scale-mixture rule used to turn normal
//! probabilities into t probabilities.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use super::univariate::{norm_cdf, norm_logcdf, norm_logpdf, t_cdf_std, t_logcdf_std, NU_NORMAL};
use crate::error::{Result, TrustError};

const TWO_PI: f64 = 2.0 * PI;

// Gauss-Legendre half rules (weight, abscissa) on [-1, 1]
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705, -0.9324695142031522),
    (0.3607615730481384, -0.6612093864662647),
    (0.4679139345726904, -0.2386191860831970),
];
const GL12: [(f64, f64); 6] = [
    (0.04717533638651177, -0.9815606342467191),
    (0.1069393259953183, -0.9041172563704750),
    (0.1600783285433464, -0.7699026741943050),
    (0.2031674267230659, -0.5873179542866171),
    (0.2334925365383547, -0.3678314989981802),
    (0.2491470458134029, -0.1252334085114692),
];
const GL20: [(f64, f64); 10] = [
    (0.01761400713915212, -0.9931285991850949),
    (0.04060142980038694, -0.9639719272779138),
    (0.06267204833410906, -0.9122344282513259),
    (0.08327674157670475, -0.8391169718222188),
    (0.1019301198172404, -0.7463319064601508),
    (0.1181945319615184, -0.6360536807265150),
    (0.1316886384491766, -0.5108670019508271),
    (0.1420961093183821, -0.3737060887154196),
    (0.1491729864726037, -0.2277858511416451),
    (0.1527533871307259, -0.07652652113349733),
];

/// P(X > h, Y > k) for a standard bivariate normal with correlation r
/// (Drezner-Wesolowsky with Genz's refinements).
pub fn bvnu(h: f64, k0: f64, r: f64) -> f64 {
    if h == f64::NEG_INFINITY {
        return norm_cdf(-k0);
    }
    if k0 == f64::NEG_INFINITY {
        return norm_cdf(-h);
    }
    if h == f64::INFINITY || k0 == f64::INFINITY {
        return 0.0;
    }
    let mut k = k0;
    let mut hk = h * k;
    let quad: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        if r.abs() > 0.0 {
            let hs = (h * h + k * k) / 2.0;
            let asr = r.asin();
            for &(w, x) in quad {
                for is in [-1.0, 1.0] {
                    let sn = (asr * (is * x + 1.0) / 2.0).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn *= asr / (2.0 * TWO_PI);
        }
        return bvn + norm_cdf(-h) * norm_cdf(-k);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let asr = -(b_s / a_s + hk) / 2.0;
        if asr > -100.0 {
            bvn = a * asr.exp() * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        }
        if -hk < 100.0 {
            let b = b_s.sqrt();
            bvn -= (-hk / 2.0).exp()
                * TWO_PI.sqrt()
                * norm_cdf(-b / a)
                * b
                * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a /= 2.0;
        for &(w, x) in quad {
            for is in [-1.0, 1.0] {
                let xs = (a * (is * x + 1.0)).powi(2);
                let rs = (1.0 - xs).sqrt();
                let asr = -(b_s / xs + hk) / 2.0;
                if asr > -100.0 {
                    bvn += a
                        * w
                        * asr.exp()
                        * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / TWO_PI;
    }
    if r > 0.0 {
        bvn + norm_cdf(-h.max(k))
    } else {
        let mut v = -bvn;
        if k > h {
            v += norm_cdf(k) - norm_cdf(h);
        }
        v.max(0.0)
    }
}

/// P(X <= h, Y <= k), standard bivariate normal with correlation r.
#[inline]
pub fn bvn_cdf(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY {
        return norm_cdf(k);
    }
    if k == f64::INFINITY {
        return norm_cdf(h);
    }
    bvnu(-h, -k, r)
}

/// ln P(X <= h, Y <= k) with relative accuracy in the deep tails.
///
/// Small probabilities are integrated in log space as
/// ∫_{-∞}^h φ(x) Φ((k − r x)/√(1−r²)) dx; the log integrand is concave with
/// curvature at most −1, so it is integrated outward from its mode until it
/// has dropped by 40.
pub fn log_bvn_cdf(h: f64, k: f64, r: f64) -> f64 {
    let p = bvn_cdf(h, k, r);
    if p > 1e-6 || h == f64::INFINITY || k == f64::INFINITY || r.abs() > 0.999_999 {
        return if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
    }
    let (h, k) = if h <= k { (h, k) } else { (k, h) };
    let s = (1.0 - r * r).sqrt();
    let psi = |x: f64| -> f64 { norm_logpdf(x) + norm_logcdf((k - r * x) / s) };
    let mills = |u: f64| -> f64 { (norm_logpdf(u) - norm_logcdf(u)).exp() };
    let d1 = |x: f64| -> f64 { -x - (r / s) * mills((k - r * x) / s) };
    let d2 = |x: f64| -> f64 {
        let u = (k - r * x) / s;
        let l = mills(u);
        -1.0 - (r * r / (s * s)) * l * (u + l)
    };
    // mode on (-∞, h]
    let mut x = h;
    if d1(h) < 0.0 {
        let mut lo = h - 1.0;
        while d1(lo) < 0.0 {
            lo -= 2.0 * (h - lo);
        }
        let mut hi = h;
        x = 0.5 * (lo + hi);
        for _ in 0..100 {
            let g = d1(x);
            if g > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let mut xn = x - g / d2(x);
            if !(xn > lo && xn < hi) {
                xn = 0.5 * (lo + hi);
            }
            let done = (xn - x).abs() < 1e-10 * (1.0 + x.abs());
            x = xn;
            if done {
                break;
            }
        }
    }
    let top = psi(x);
    let curv = -d2(x);
    let slope = d1(x).abs();
    let mut len = 1.0 / curv.sqrt();
    if slope > 0.0 {
        len = len.min(2.0 / slope);
    }
    let rule = &GL20;
    let mut acc = 0.0;
    let panel = |a: f64, b: f64| -> f64 {
        let c = 0.5 * (a + b);
        let hw = 0.5 * (b - a);
        let mut sum = 0.0;
        for &(w, t) in rule.iter() {
            sum += w * ((psi(c + hw * t) - top).exp() + (psi(c - hw * t) - top).exp());
        }
        sum * hw
    };
    // right of the mode, up to h
    let mut a = x;
    let mut width = 2.0 * len;
    while a < h {
        let b = (a + width).min(h);
        acc += panel(a, b);
        if psi(b) - top < -40.0 {
            break;
        }
        a = b;
        width *= 1.5;
    }
    let mut b = x;
    let mut width = 2.0 * len;
    for _ in 0..200 {
        let a = b - width;
        acc += panel(a, b);
        if psi(a) - top < -40.0 {
            break;
        }
        b = a;
        width *= 1.5;
    }
    top + acc.ln()
}

/// ln Φ_q(x; R) for q <= 3, relative-accurate in the tails for q <= 2.
pub fn log_mvn_cdf_lowdim(x: &[f64], r: &DMatrix<f64>) -> f64 {
    match x.len() {
        0 => 0.0,
        1 => norm_logcdf(x[0]),
        2 => log_bvn_cdf(x[0], x[1], r[(0, 1)]),
        3 => {
            let p = tvn_cdf([x[0], x[1], x[2]], r);
            if p > 0.0 {
                p.ln()
            } else {
                f64::NEG_INFINITY
            }
        }
        _ => panic!("log_mvn_cdf_lowdim supports at most three dimensions"),
    }
}

// 20-point Gauss-Legendre on [-1, 1], full rule
fn gl20_full() -> impl Iterator<Item = (f64, f64)> {
    GL20.iter().flat_map(|&(w, x)| [(w, x), (w, -x)])
}

/// P(X <= x) for a trivariate standard normal with correlation matrix r,
/// by conditioning on the coordinate with the smallest limit.
pub fn tvn_cdf(x: [f64; 3], r: &DMatrix<f64>) -> f64 {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(std::cmp::Ordering::Equal));
    let (a, b, c) = (idx[0], idx[1], idx[2]);
    let x1 = x[a];
    if x1 == f64::NEG_INFINITY {
        return 0.0;
    }
    let r12 = r[(a, b)];
    let r13 = r[(a, c)];
    let r23 = r[(b, c)];
    let s2 = (1.0 - r12 * r12).max(0.0).sqrt();
    let s3 = (1.0 - r13 * r13).max(0.0).sqrt();
    if s2 < 1e-12 || s3 < 1e-12 {
        // degenerate conditioning coordinate: fall back to the other order
        return tvn_cdf_degenerate(x, r);
    }
    let rho = ((r23 - r12 * r13) / (s2 * s3)).clamp(-1.0, 1.0);
    let (x2, x3) = (x[b], x[c]);
    let inner = |t: f64| -> f64 {
        let u2 = if x2.is_finite() { (x2 - r12 * t) / s2 } else { x2 };
        let u3 = if x3.is_finite() { (x3 - r13 * t) / s3 } else { x3 };
        bvn_cdf(u2, u3, rho)
    };
    // integrate φ(t) inner(t) over (-inf, x1] with Gauss-Legendre panels
    let lo = if x1 > -8.0 { -8.5 } else { x1 - 8.5 / x1.abs() };
    let hi = x1.min(8.5);
    let n_panels = ((hi - lo) / 2.5).ceil().max(1.0) as usize;
    let width = (hi - lo) / n_panels as f64;
    let mut total = 0.0;
    for p in 0..n_panels {
        let a0 = lo + p as f64 * width;
        let mid = a0 + width / 2.0;
        let half = width / 2.0;
        let mut s = 0.0;
        for (w, xx) in gl20_full() {
            let t = mid + half * xx;
            s += w * (-0.5 * t * t).exp() * inner(t);
        }
        total += s * half;
    }
    total /= TWO_PI.sqrt();
    total.clamp(0.0, 1.0)
}

fn tvn_cdf_degenerate(x: [f64; 3], r: &DMatrix<f64>) -> f64 {
    // one pair perfectly correlated: reduce to a bivariate probability
    for (a, b, c) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        let rab = r[(a, b)];
        if (1.0 - rab.abs()) < 1e-12 {
            if rab > 0.0 {
                let m = if x[a] < x[b] { a } else { b };
                return bvn_cdf(x[m], x[c], r[(m, c)]);
            } else {
                // X_b = -X_a: P(-x_b <= X_a <= x_a, X_c <= x_c)
                let lo = -x[b];
                if lo >= x[a] {
                    return 0.0;
                }
                return (bvn_cdf(x[a], x[c], r[(a, c)]) - bvn_cdf(lo, x[c], r[(a, c)])).max(0.0);
            }
        }
    }
    0.0
}

/// Φ_q(x; R) for a correlation matrix R with q <= 3.
pub fn mvn_cdf_lowdim(x: &[f64], r: &DMatrix<f64>) -> f64 {
    match x.len() {
        0 => 1.0,
        1 => norm_cdf(x[0]),
        2 => bvn_cdf(x[0], x[1], r[(0, 1)]),
        3 => tvn_cdf([x[0], x[1], x[2]], r),
        _ => panic!("mvn_cdf_lowdim supports at most three dimensions"),
    }
}

/// P(X <= 0) for a zero-mean normal (or any elliptical) vector with
/// correlation matrix r, q <= 3, by the arcsine identities.
pub fn orthant_lowdim(r: &DMatrix<f64>) -> f64 {
    match r.nrows() {
        0 => 1.0,
        1 => 0.5,
        2 => 0.25 + r[(0, 1)].asin() / TWO_PI,
        3 => 0.125 + (r[(0, 1)].asin() + r[(0, 2)].asin() + r[(1, 2)].asin()) / (4.0 * PI),
        _ => panic!("orthant_lowdim supports at most three dimensions"),
    }
}

/// a ln a − a − ln Γ(a), evaluated without cancellation for large a.
fn gamma_log_const(a: f64) -> f64 {
    if a < 12.0 {
        return a * a.ln() - a - ln_gamma(a);
    }
    let inv = 1.0 / a;
    let inv2 = inv * inv;
    let corr = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    0.5 * (a / TWO_PI).ln() - corr
}

/// Integrates exp(log_f(w)) against the Gamma(m/2, m/2) density.
///
/// The integrand is written in t = log w, its mode located by damped Newton
/// steps on finite differences, and a trapezoid rule with spacing half the
/// local standard deviation stepped out until the log integrand has dropped
/// by 40. This is the identity T(x; R, m) = E_W[Φ(√W x; R)].
pub fn gamma_mixture_log<F: Fn(f64) -> f64>(m: f64, log_f: F) -> f64 {
    let a = 0.5 * m;
    let c0 = gamma_log_const(a);
    let g = |t: f64| -> f64 { c0 - a * (t.exp_m1() - t) + log_f(t.exp()) };
    let step0 = (1.0 / a.sqrt()).min(1.0);
    let e = 0.05 * step0;
    let mut t = 0.0;
    let mut gm = g(t);
    let mut sd = step0;
    for _ in 0..100 {
        let (gl, gr) = (g(t - e), g(t + e));
        let d1 = (gr - gl) / (2.0 * e);
        let d2 = (gr - 2.0 * gm + gl) / (e * e);
        let dt = if d2 < 0.0 && d2.is_finite() && d1.is_finite() {
            sd = (-1.0 / d2).sqrt();
            (-d1 / d2).clamp(-2.0, 2.0)
        } else if d1.is_finite() {
            // non-concave or flat: move uphill by one gamma standard deviation
            step0 * d1.signum()
        } else {
            0.0
        };
        if dt.abs() < 0.05 * sd || dt == 0.0 {
            break;
        }
        // backtrack until the step does not decrease the integrand
        let mut step = dt;
        let mut moved = false;
        for _ in 0..30 {
            let tn = t + step;
            let gn = g(tn);
            if gn.is_finite() && gn >= gm - 1e-12 {
                t = tn;
                gm = gn;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved || t.abs() > 200.0 {
            break;
        }
    }
    if !gm.is_finite() {
        return gm;
    }
    let h = (0.5 * sd).clamp(1e-3 * step0, 0.3);
    // log-sum-exp with a running maximum guards against a misplaced mode
    let mut top = gm;
    let mut acc = 1.0;
    let cut = -40.0;
    for dir in [-1.0, 1.0] {
        let mut k = 1.0;
        loop {
            let gv = g(t + dir * k * h);
            if !gv.is_finite() || gv - top < cut {
                break;
            }
            if gv > top {
                acc = acc * (top - gv).exp() + 1.0;
                top = gv;
            } else {
                acc += (gv - top).exp();
            }
            k += 1.0;
            if k > 5000.0 {
                break;
            }
        }
    }
    top + (acc * h).ln()
}

/// log T_q(x; I, m) for independent t-scale coordinates sharing one mixing
/// variable, i.e. log P(all L_k <= x_k) with L ~ t_m(0, I).
pub fn log_t_orthant_indep(x: &[f64], m: f64) -> f64 {
    match x.len() {
        0 => 0.0,
        1 => t_logcdf_std(x[0], m),
        _ => {
            if m >= NU_NORMAL {
                return x.iter().map(|&v| norm_logcdf(v)).sum();
            }
            gamma_mixture_log(m, |w| {
                let s = w.sqrt();
                x.iter().map(|&v| norm_logcdf(v * s)).sum()
            })
        }
    }
}

/// Standardizes a scale matrix into per-coordinate scales and a correlation matrix.
pub fn standardize(s: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let q = s.nrows();
    let mut sd = vec![0.0; q];
    for i in 0..q {
        let v = s[(i, i)];
        if !(v > 0.0) {
            return Err(TrustError::constraint("scale matrix has a non-positive diagonal"));
        }
        sd[i] = v.sqrt();
    }
    let mut r = DMatrix::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            r[(i, j)] = if i == j { 1.0 } else { s[(i, j)] / (sd[i] * sd[j]) };
        }
    }
    Ok((sd, r))
}

/// log T_q(x; S, m) for q <= 3 with a general scale matrix S. `m = inf`
/// gives the normal distribution function.
pub fn log_t_cdf_lowdim(x: &[f64], s: &DMatrix<f64>, m: f64) -> Result<f64> {
    let q = x.len();
    if q == 0 {
        return Ok(0.0);
    }
    if q > 3 {
        return Err(TrustError::domain("deterministic t cdf supports at most three dimensions"));
    }
    let (sd, r) = standardize(s)?;
    let xs: Vec<f64> = x.iter().zip(&sd).map(|(v, s)| v / s).collect();
    if q == 1 {
        return Ok(t_logcdf_std(xs[0], m));
    }
    if xs.iter().all(|&v| v == 0.0) {
        return Ok(orthant_lowdim(&r).ln());
    }
    let mut diag = true;
    for i in 0..q {
        for j in 0..i {
            if r[(i, j)] != 0.0 {
                diag = false;
            }
        }
    }
    if diag {
        return Ok(log_t_orthant_indep(&xs, m));
    }
    if m >= NU_NORMAL {
        return Ok(log_mvn_cdf_lowdim(&xs, &r));
    }
    Ok(gamma_mixture_log(m, |w| {
        let sw = w.sqrt();
        let y: Vec<f64> = xs.iter().map(|v| v * sw).collect();
        log_mvn_cdf_lowdim(&y, &r)
    }))
}

/// T_1 with unit scale; exposed here so callers need only this module.
#[inline]
pub fn t1_cdf(x: f64, m: f64) -> f64 {
    t_cdf_std(x, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::univariate::norm_pdf;

    // Brute-force bivariate normal through one-dimensional conditioning.
    fn bvn_oracle(h: f64, k: f64, r: f64) -> f64 {
        let s = (1.0 - r * r).sqrt();
        let n = 20000;
        let lo = -12.0f64;
        let hi = h.min(12.0);
        let step = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let t = lo + i as f64 * step;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * norm_pdf(t) * norm_cdf((k - r * t) / s);
        }
        acc * step / 3.0
    }

    #[test]
    fn bvn_matches_conditioning_oracle() {
        for &r in &[-0.99, -0.95, -0.93, -0.7, -0.2, 0.0, 0.3, 0.8, 0.95, 0.99] {
            for &(h, k) in &[(0.0, 0.0), (1.0, -0.5), (-2.0, 1.5), (-1.0, -1.0), (2.5, 2.0), (-3.0, 0.3)] {
                let a = bvn_cdf(h, k, r);
                let b = bvn_oracle(h, k, r);
                assert!((a - b).abs() < 1e-10, "h={h} k={k} r={r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn bvn_orthant_identity() {
        for &r in &[-0.9, -0.5, 0.0, 0.5, 0.9] {
            let v = bvn_cdf(0.0, 0.0, r);
            assert!((v - (0.25 + r.asin() / TWO_PI)).abs() < 1e-14);
        }
    }

    #[test]
    fn tvn_orthant_identity() {
        let r = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.4, 0.3, 1.0, 0.2, -0.4, 0.2, 1.0]);
        let v = tvn_cdf([0.0, 0.0, 0.0], &r);
        assert!((v - orthant_lowdim(&r)).abs() < 1e-12, "{v}");
    }

    #[test]
    fn tvn_independent_product() {
        let r = DMatrix::identity(3, 3);
        let x = [0.3, -1.2, 2.0];
        let v = tvn_cdf(x, &r);
        let p: f64 = x.iter().map(|&v| norm_cdf(v)).product();
        assert!((v - p).abs() < 1e-13);
    }

    #[test]
    fn mixture_gives_t_cdf() {
        for &m in &[3.0, 6.0, 11.0, 40.0] {
            for &x in &[-6.0, -1.0, 0.0, 0.7, 3.0] {
                let a = gamma_mixture_log(m, |w| norm_logcdf(x * w.sqrt()));
                let b = t_logcdf_std(x, m);
                assert!((a - b).abs() < 1e-10, "m={m} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn log_bvn_deep_tails() {
        let cases = [
            (-10.0, -10.0, 0.5, -72.19726717154026625),
            (-8.0, -3.0, -0.7, -111.83770666602205663),
            (-15.0, 2.0, 0.3, -116.13138484571042696),
            (-6.0, -6.0, -0.9, -369.20041956896784195),
            (-3.0, -4.0, 0.95, -10.361738902840390031),
            (-2.0, -2.0, -0.5, -12.63871235618020588),
        ];
        for (h, k, r, expect) in cases {
            let got = log_bvn_cdf(h, k, r);
            assert!((got - expect).abs() < 1e-10 * expect.abs(), "{h} {k} {r}: {got}");
            assert!((log_bvn_cdf(k, h, r) - got).abs() < 1e-10 * expect.abs());
        }
        assert!((log_bvn_cdf(0.3, -0.2, 0.4) - bvn_cdf(0.3, -0.2, 0.4).ln()).abs() < 1e-15);
    }

    #[test]
    fn log_const_continuity() {
        let a: f64 = 12.0;
        let direct = a * a.ln() - a - ln_gamma(a);
        assert!((gamma_log_const(a) - direct).abs() < 1e-13);
    }

    #[test]
    fn mixture_deep_tail() {
        let a = gamma_mixture_log(7.0, |w| norm_logcdf(-60.0 * w.sqrt()));
        let b = t_logcdf_std(-60.0, 7.0);
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn t_orthant_df_free_at_zero() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, -0.6, -0.6, 1.0]);
        for m in [3.0, 8.0] {
            let v = log_t_cdf_lowdim(&[0.0, 0.0], &r, m).unwrap().exp();
            assert!((v - orthant_lowdim(&r)).abs() < 1e-11);
        }
        let r3 = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 1.0, -0.3, 0.2, -0.3, 1.0]);
        let v = log_t_cdf_lowdim(&[0.0; 3], &r3, 5.0).unwrap().exp();
        assert!((v - orthant_lowdim(&r3)).abs() < 1e-10);
    }
}
