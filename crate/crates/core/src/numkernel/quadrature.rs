//! Gauss–Legendre rules.

use std::f64::consts::PI;

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1],
/// by Newton iteration on P_n from the Chebyshev initial guesses.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n > 0, "rule needs at least one node");
    let mut out = vec![(0.0, 0.0); n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    out
}

/// ∫_a^b f using a precomputed rule on [-1, 1].
pub fn integrate<F: FnMut(f64) -> f64>(rule: &[(f64, f64)], a: f64, b: f64, mut f: F) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    rule.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>() * h
}
