//! Numerical distribution and quantile functions of the univariate margins.
//!
//! The margin density is f(z) = t_ν(z) g(r(z)) / P₀ with
//! r(z) = z √((ν+1)/(ν+z²)) and g(r) = T_q(r Δ_j; Σ − Δ_jΔ_jᵀ, ν+1). Since r
//! is bounded for finite ν, ln g is replaced by a Chebyshev interpolant. The
//! distribution function is tabulated on knots equally spaced in the normal
//! score of the symmetric t envelope and integrated per interval by
//! Gauss–Legendre; between knots the same rule runs from the nearer knot.
//! Quantiles start from a cubic Hermite inversion and are polished by Newton.
//! Beyond the table the tails are integrated on a rational map of the
//! half-line scaled to the local decay length.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::density::log_t_cdf;
use super::params::TrustParams;
use crate::error::{Result, TrustError};
use crate::numkernel::angles::symmetrize;
use crate::numkernel::quadrature::gauss_legendre;
use crate::numkernel::univariate::{norm_quantile, t_cdf_std, t_logpdf_std, t_quantile_std};

const KNOTS: usize = 513;
const TABLE_TAIL: f64 = 1e-7;
const CHEB_TOL: f64 = 1e-12;
const CHEB_MAX: usize = 512;
// beyond this ν the range of r is too wide for one interpolant
const CHEB_FULL_RANGE_NU: f64 = 200.0;

#[derive(Clone, Debug)]
struct Chebyshev {
    lo: f64,
    hi: f64,
    coef: Vec<f64>,
}

impl Chebyshev {
    // Interpolates at Chebyshev–Lobatto points, doubling until the trailing
    // coefficients are negligible.
    fn fit<F: Fn(f64) -> Result<f64>>(lo: f64, hi: f64, f: F) -> Result<Self> {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let node = |k: usize, n: usize| mid + half * (std::f64::consts::PI * k as f64 / n as f64).cos();
        let mut n = 32;
        let mut vals: Vec<f64> = (0..=n).map(|k| f(node(k, n))).collect::<Result<_>>()?;
        loop {
            let coef = lobatto_coefficients(&vals);
            let tail = coef[n - 2..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let size = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if tail <= CHEB_TOL * size || n >= CHEB_MAX {
                return Ok(Chebyshev { lo, hi, coef });
            }
            // nested refinement: old nodes are the even ones
            let m = 2 * n;
            let mut nv = vec![0.0; m + 1];
            for k in 0..=m {
                nv[k] = if k % 2 == 0 { vals[k / 2] } else { f(node(k, m))? };
            }
            vals = nv;
            n = m;
        }
    }

    fn contains(&self, r: f64) -> bool {
        r >= self.lo && r <= self.hi
    }

    fn eval(&self, r: f64) -> f64 {
        let x = (2.0 * r - self.lo - self.hi) / (self.hi - self.lo);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coef.iter().skip(1).rev() {
            let b0 = 2.0 * x * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        x * b1 - b2 + self.coef[0]
    }
}

// Coefficients c_j with f(x) = Σ c_j T_j(x) interpolating at cos(πk/n).
fn lobatto_coefficients(vals: &[f64]) -> Vec<f64> {
    let n = vals.len() - 1;
    let nf = n as f64;
    let cosines: Vec<f64> = (0..2 * n).map(|m| (std::f64::consts::PI * m as f64 / nf).cos()).collect();
    (0..=n)
        .map(|j| {
            let mut s = 0.0;
            for (k, &v) in vals.iter().enumerate() {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                s += w * v * cosines[j * k % (2 * n)];
            }
            let c = 2.0 * s / nf;
            if j == 0 || j == n {
                0.5 * c
            } else {
                c
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
struct ShapeFn {
    delta_j: Vec<f64>,
    scale: DMatrix<f64>,
    m: f64,
    cheb: Option<Chebyshev>,
}

impl ShapeFn {
    fn direct(&self, r: f64) -> Result<f64> {
        let x: Vec<f64> = self.delta_j.iter().map(|d| d * r).collect();
        log_t_cdf(&x, &self.scale, self.m)
    }

    fn log_g(&self, r: f64) -> f64 {
        match &self.cheb {
            Some(c) if c.contains(r) => c.eval(r).min(0.0),
            _ => self.direct(r).unwrap_or(f64::NEG_INFINITY),
        }
    }
}

/// Tabulated distribution function of margin j, with exact density.
#[derive(Clone, Debug)]
pub struct MarginalTable {
    nu: f64,
    log_p0: f64,
    shape: Option<ShapeFn>,
    knots: Vec<f64>,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
    // Hermite end slopes per interval (differ from pdf only where limited)
    slopes: Vec<(f64, f64)>,
    // reciprocal of the integrated total, which differs from one by rounding
    mass: f64,
    panel_rule: Vec<(f64, f64)>,
    tail_rule: Arc<Vec<(f64, f64)>>,
}

impl MarginalTable {
    pub fn new(p: &TrustParams, j: usize) -> Result<Self> {
        if j >= p.dim() {
            return Err(TrustError::domain("margin index out of range"));
        }
        let nu = p.nu();
        let q = p.q();
        let delta_j: Vec<f64> = (0..q).map(|k| p.delta()[(k, j)]).collect();
        let shape = if delta_j.iter().all(|&v| v == 0.0) {
            None
        } else {
            let dj = DMatrix::from_column_slice(q, 1, &delta_j);
            let scale = symmetrize(&(p.sigma() - &dj * dj.transpose()));
            Some(ShapeFn {
                delta_j,
                scale,
                m: nu + 1.0,
                cheb: None,
            })
        };
        let s_lo = norm_quantile(TABLE_TAIL);
        let knots: Vec<f64> = (0..KNOTS)
            .map(|i| {
                let s = s_lo * (1.0 - 2.0 * i as f64 / (KNOTS - 1) as f64);
                if i == (KNOTS - 1) / 2 {
                    0.0
                } else {
                    envelope_score(s, nu)
                }
            })
            .collect();
        let mut table = MarginalTable {
            nu,
            log_p0: if shape.is_some() { p.log_t0() } else { 0.0 },
            shape,
            knots,
            cdf: Vec::new(),
            pdf: Vec::new(),
            slopes: Vec::new(),
            mass: 1.0,
            panel_rule: gauss_legendre(4),
            tail_rule: Arc::new(gauss_legendre(64)),
        };
        if let Some(sh) = table.shape.as_mut() {
            let (lo, hi) = if nu <= CHEB_FULL_RANGE_NU {
                let r = (nu + 1.0).sqrt();
                (-r, r)
            } else {
                let pad = 1.5;
                (r_of(table.knots[0] * pad, nu), r_of(table.knots[KNOTS - 1] * pad, nu))
            };
            let cheb = Chebyshev::fit(lo, hi, |r| sh.direct(r))?;
            sh.cheb = Some(cheb);
        }
        if table.shape.is_none() {
            return Ok(table);
        }
        table.build()?;
        Ok(table)
    }

    /// Shared table for margin j, built on first use.
    pub fn cached(p: &TrustParams, j: usize) -> Result<Arc<MarginalTable>> {
        if j >= p.dim() {
            return Err(TrustError::domain("margin index out of range"));
        }
        let slot = p.table_slot(j);
        if let Some(t) = slot.get() {
            return Ok(t.clone());
        }
        let t = Arc::new(MarginalTable::new(p, j)?);
        Ok(slot.get_or_init(|| t).clone())
    }

    fn build(&mut self) -> Result<()> {
        let n = self.knots.len();
        self.pdf = self.knots.iter().map(|&z| self.pdf(z)).collect();
        let mut cdf = vec![0.0; n];
        cdf[0] = self.lower_tail(self.knots[0]);
        for i in 0..n - 1 {
            cdf[i + 1] = cdf[i] + self.panel(self.knots[i], self.knots[i + 1]);
        }
        let total = cdf[n - 1] + self.upper_tail(self.knots[n - 1]);
        if !cdf.iter().all(|v| v.is_finite()) || (total - 1.0).abs() > 1e-8 {
            return Err(TrustError::numeric("margin table integration failed"));
        }
        self.mass = 1.0 / total;
        for v in cdf.iter_mut() {
            *v *= self.mass;
        }
        for v in self.pdf.iter_mut() {
            *v *= self.mass;
        }
        let mut slopes = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let h = self.knots[i + 1] - self.knots[i];
            let sec = (cdf[i + 1] - cdf[i]) / h;
            let (mut m0, mut m1) = (self.pdf[i], self.pdf[i + 1]);
            if sec > 0.0 {
                let (a, b) = (m0 / sec, m1 / sec);
                let r2 = a * a + b * b;
                if r2 > 9.0 {
                    let t = 3.0 / r2.sqrt();
                    m0 = t * a * sec;
                    m1 = t * b * sec;
                }
            } else {
                m0 = 0.0;
                m1 = 0.0;
            }
            slopes.push((m0, m1));
        }
        self.cdf = cdf;
        self.slopes = slopes;
        Ok(())
    }

    // ∫_a^b f for a short panel
    fn panel(&self, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.mass * self.panel_rule.iter().map(|&(x, w)| w * self.pdf(c + h * x)).sum::<f64>() * h
    }

    // table value plus the integral from the nearer knot of interval i
    fn cdf_in(&self, i: usize, z: f64) -> f64 {
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        if z - a <= b - z {
            self.cdf[i] + self.panel(a, z)
        } else {
            self.cdf[i + 1] - self.panel(z, b)
        }
    }

    fn exact(&self) -> bool {
        self.shape.is_none()
    }

    pub fn log_pdf(&self, z: f64) -> f64 {
        let base = t_logpdf_std(z, self.nu);
        match &self.shape {
            None => base,
            Some(sh) => base + sh.log_g(r_of(z, self.nu)) - self.log_p0,
        }
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.log_pdf(z).exp()
    }

    // ∫ f over (-∞, z] (lower) or [z, ∞) (upper), with x = z ∓ L s/(1 − s)
    // and L the local decay length of the density.
    fn tail(&self, z: f64, lower: bool) -> f64 {
        let sgn = if lower { -1.0 } else { 1.0 };
        let f0 = self.pdf(z);
        if !(f0 > 0.0) {
            return 0.0;
        }
        let e = 1e-4 * (1.0 + z.abs());
        let slope = (self.pdf(z + sgn * e).ln() - f0.ln()) / e;
        let envelope = if self.nu.is_infinite() {
            1.0 / z.abs().max(1.0)
        } else {
            (self.nu + z * z) / ((self.nu + 1.0) * z.abs().max(1.0))
        };
        let len = if slope < 0.0 && slope.is_finite() { (-1.0 / slope).min(envelope) } else { envelope };
        let s: f64 = self
            .tail_rule
            .iter()
            .map(|&(x, w)| {
                let v = 0.5 * (x + 1.0);
                let u = len * v / (1.0 - v);
                w * self.pdf(z + sgn * u) * len / ((1.0 - v) * (1.0 - v))
            })
            .sum();
        0.5 * self.mass * s
    }

    fn lower_tail(&self, z: f64) -> f64 {
        self.tail(z, true)
    }

    fn upper_tail(&self, z: f64) -> f64 {
        self.tail(z, false)
    }

    fn hermite(&self, i: usize, z: f64) -> f64 {
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        let h = b - a;
        let t = (z - a) / h;
        let (m0, m1) = self.slopes[i];
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.cdf[i] + h10 * h * m0 + h01 * self.cdf[i + 1] + h11 * h * m1
    }

    fn hermite_deriv(&self, i: usize, z: f64) -> f64 {
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        let h = b - a;
        let t = (z - a) / h;
        let (m0, m1) = self.slopes[i];
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        d00 * self.cdf[i] + d10 * m0 + d01 * self.cdf[i + 1] + d11 * m1
    }

    fn interval(&self, z: f64) -> usize {
        let n = self.knots.len();
        match self.knots.binary_search_by(|k| k.partial_cmp(&z).expect("finite")) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z.is_nan() {
            return f64::NAN;
        }
        if self.exact() {
            return t_cdf_std(z, self.nu);
        }
        let n = self.knots.len();
        if z <= self.knots[0] {
            return if z == f64::NEG_INFINITY { 0.0 } else { self.lower_tail(z) };
        }
        if z >= self.knots[n - 1] {
            return if z == f64::INFINITY { 1.0 } else { 1.0 - self.upper_tail(z) };
        }
        self.cdf_in(self.interval(z), z)
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(TrustError::domain(format!("probability must lie in (0,1), got {u}")));
        }
        if self.exact() {
            return Ok(t_quantile_std(u, self.nu));
        }
        let n = self.knots.len();
        if u < self.cdf[0] {
            return Ok(self.tail_solve(u, true));
        }
        if u > self.cdf[n - 1] {
            return Ok(self.tail_solve(1.0 - u, false));
        }
        let i = match self.cdf.binary_search_by(|c| c.partial_cmp(&u).expect("finite")) {
            Ok(i) => return Ok(self.knots[i]),
            Err(i) => i - 1,
        };
        let (mut lo, mut hi) = (self.knots[i], self.knots[i + 1]);
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        let mut z = lo + (hi - lo) * (u - c0) / (c1 - c0);
        for _ in 0..60 {
            let f = self.hermite(i, z) - u;
            if f > 0.0 {
                hi = z;
            } else {
                lo = z;
            }
            let d = self.hermite_deriv(i, z);
            let mut zn = if d > 0.0 { z - f / d } else { f64::NAN };
            if !(zn > lo && zn < hi) {
                zn = 0.5 * (lo + hi);
            }
            let done = (zn - z).abs() <= 1e-14 * (1.0 + z.abs());
            z = zn;
            if done || hi - lo <= 1e-14 * (1.0 + z.abs()) {
                break;
            }
        }
        // the Hermite cubic is only a guess; polish on the integrated cdf
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        for _ in 0..3 {
            let f = self.mass * self.pdf(z);
            if !(f > 0.0) {
                break;
            }
            let step = (self.cdf_in(i, z) - u) / f;
            z = (z - step).clamp(a, b);
            // convergence is quadratic: after a small step the error is negligible
            if step.abs() <= 1e-7 * (1.0 + z.abs()) {
                break;
            }
        }
        Ok(z)
    }

    // Solves F(z) = p (lower) or S(z) = p (upper) beyond the table by Newton
    // on the log tail probability inside an expanding bracket.
    fn tail_solve(&self, p: f64, lower: bool) -> f64 {
        let n = self.knots.len();
        let sgn = if lower { -1.0 } else { 1.0 };
        let edge = if lower { self.knots[0] } else { self.knots[n - 1] };
        let tail = |z: f64| if lower { self.lower_tail(z) } else { self.upper_tail(z) };
        // w measures distance outward from the edge
        let mut near = edge;
        let mut step = edge.abs().max(1.0);
        let mut far = edge + sgn * step;
        let mut guard = 0;
        while tail(far) > p {
            near = far;
            step *= 2.0;
            far = edge + sgn * step;
            guard += 1;
            if guard > 1000 || !far.is_finite() {
                return far;
            }
        }
        let lp = p.ln();
        let mut z = 0.5 * (near + far);
        for _ in 0..100 {
            let t = tail(z);
            if t > p {
                near = z;
            } else {
                far = z;
            }
            let f = self.mass * self.pdf(z);
            // d log S / dz = -f/S for the upper tail, +f/F for the lower
            let slope = -sgn * f / t;
            let mut zn = if t > 0.0 && f > 0.0 { z - (t.ln() - lp) / slope } else { f64::NAN };
            let (a, b) = if near < far { (near, far) } else { (far, near) };
            if !(zn > a && zn < b) {
                zn = 0.5 * (near + far);
            }
            let done = (zn - z).abs() <= 1e-13 * (1.0 + z.abs());
            z = zn;
            if done || (near - far).abs() <= 1e-13 * (1.0 + z.abs()) {
                break;
            }
        }
        z
    }
}

/// Approximate t_ν quantile at normal score s: it has the normal limit and
/// the z ~ exp(s²/2ν) growth of the t tail, which is all the knots need.
fn envelope_score(s: f64, nu: f64) -> f64 {
    if nu.is_infinite() {
        return s;
    }
    s.signum() * (nu * (s * s / nu).exp_m1()).sqrt()
}

#[inline]
fn r_of(z: f64, nu: f64) -> f64 {
    if nu.is_infinite() {
        z
    } else {
        z * ((nu + 1.0) / (nu + z * z)).sqrt()
    }
}

/// Distribution function of margin j (table cached on the parameter point).
pub fn marginal_cdf(zj: f64, j: usize, p: &TrustParams) -> Result<f64> {
    Ok(MarginalTable::cached(p, j)?.cdf(zj))
}

/// Quantile function of margin j.
pub fn marginal_quantile(u: f64, j: usize, p: &TrustParams) -> Result<f64> {
    MarginalTable::cached(p, j)?.quantile(u)
}
