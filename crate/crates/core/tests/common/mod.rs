#![allow(dead_code)]

use trust_core::numkernel::quadrature::gauss_legendre;
use trust_core::numkernel::univariate::{t_logpdf_std, t_quantile_std};
use trust_core::trust::TrustParams;
use trust_core::DMatrix;

/// The nine parameter sets of the bivariate contour figure: ν = 5, α₁ = (5, 5),
/// ω ∈ {−0.5, 0, 0.5} by row and α₂ ∈ {(5,5), (0,5), (−5,5)} by column.
pub fn figure_sets() -> Vec<(f64, [f64; 2], TrustParams)> {
    let mut out = Vec::new();
    for &w in &[-0.5, 0.0, 0.5] {
        for a2 in [[5.0, 5.0], [0.0, 5.0], [-5.0, 5.0]] {
            let omega = DMatrix::from_row_slice(2, 2, &[1.0, w, w, 1.0]);
            let alpha = DMatrix::from_row_slice(2, 2, &[5.0, a2[0], 5.0, a2[1]]);
            out.push((w, a2, TrustParams::new(omega, alpha, 5.0).unwrap()));
        }
    }
    out
}

pub fn dgp_omega() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.3, 0.5, 1.0, 0.811, 0.3, 0.811, 1.0])
}

pub fn dgp1() -> TrustParams {
    TrustParams::new(dgp_omega(), DMatrix::from_column_slice(3, 1, &[-5.0, 3.0, 5.0]), 10.0).unwrap()
}

pub fn dgp2() -> TrustParams {
    let a = DMatrix::from_row_slice(3, 2, &[5.0, -10.0, 3.0, 0.0, 5.0, 5.0]);
    trust_core::trust::identify(&TrustParams::new(dgp_omega(), a, 10.0).unwrap())
}

/// Nodes z and weights for ∫_R h(z) dz, mapped through the quantile of a t
/// envelope with `env` degrees of freedom: composite Gauss–Legendre in u.
pub fn line_rule(env: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(order);
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let a = p as f64 / panels as f64;
        let b = (p + 1) as f64 / panels as f64;
        for &(x, w) in &rule {
            let u = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let z = t_quantile_std(u, env);
            let jac = (-t_logpdf_std(z, env)).exp();
            out.push((z, 0.5 * (b - a) * w * jac));
        }
    }
    out
}

/// ∫_{-∞}^z exp(log_f), in the probability scale of a t envelope.
pub fn integrate_below<F: Fn(f64) -> f64>(log_f: F, env: f64, z: f64, panels: usize) -> f64 {
    let top = trust_core::numkernel::univariate::t_cdf_std(z, env);
    let rule = gauss_legendre(8);
    let mut acc = 0.0;
    for p in 0..panels {
        let a = top * p as f64 / panels as f64;
        let b = top * (p + 1) as f64 / panels as f64;
        for &(x, w) in &rule {
            let u = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let zz = t_quantile_std(u, env);
            acc += 0.5 * (b - a) * w * (log_f(zz) - t_logpdf_std(zz, env)).exp();
        }
    }
    acc
}

pub fn integrate_1d<F: Fn(f64) -> f64>(log_f: F, env: f64, panels: usize) -> f64 {
    line_rule(env, panels, 8).iter().map(|&(z, w)| w * log_f(z).exp()).sum()
}

pub fn integrate_2d<F: Fn(f64, f64) -> f64>(log_f: F, env: f64, panels: usize) -> f64 {
    let rule = line_rule(env, panels, 8);
    let mut acc = 0.0;
    for &(z1, w1) in &rule {
        for &(z2, w2) in &rule {
            acc += w1 * w2 * log_f(z1, z2).exp();
        }
    }
    acc
}

/// One-sample Kolmogorov–Smirnov p-value (asymptotic).
pub fn ks_pvalue(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}
