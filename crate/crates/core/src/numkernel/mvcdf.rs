//! Multivariate normal and t distribution functions by randomized lattice
//! quasi-Monte Carlo over Genz's separation-of-variables transform.

use nalgebra::DMatrix;

use super::rng::RngStream;
use super::univariate::{gamma_quantile_unit, norm_cdf, norm_pdf, norm_quantile, t_cdf_std, NU_NORMAL};
use crate::error::{Result, TrustError};

pub const DEFAULT_QMC_POINTS: usize = 1 << 14;
pub const DEFAULT_RANDOMIZATIONS: usize = 8;
pub const MAX_DIM: usize = 12;

const PRIMES: [f64; 13] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0, 41.0];

/// Settings of the randomized lattice rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QmcSettings {
    pub points: usize,
    pub randomizations: usize,
}

impl Default for QmcSettings {
    fn default() -> Self {
        QmcSettings {
            points: DEFAULT_QMC_POINTS,
            randomizations: DEFAULT_RANDOMIZATIONS,
        }
    }
}

impl QmcSettings {
    pub fn with_points(points: usize) -> Self {
        QmcSettings {
            points,
            ..Default::default()
        }
    }
}

// Reordered Cholesky factor of a correlation matrix together with permuted limits.
struct Prepared {
    c: Vec<Vec<f64>>,
    b: Vec<f64>,
}

fn prepare(x: &[f64], sigma: &DMatrix<f64>) -> Result<Prepared> {
    let n = x.len();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(TrustError::domain("limit vector and matrix dimensions differ"));
    }
    if n == 0 || n > MAX_DIM {
        return Err(TrustError::domain(format!("dimension {n} not supported (1..={MAX_DIM})")));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(TrustError::domain("limits must not be NaN"));
    }
    let mut c = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        let si = sigma[(i, i)];
        if !(si > 0.0) {
            return Err(TrustError::decomposition("matrix has a non-positive diagonal"));
        }
        b[i] = x[i] / si.sqrt();
        for j in 0..n {
            c[i][j] = sigma[(i, j)] / (si * sigma[(j, j)]).sqrt();
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        // choose the remaining variable with the smallest conditional probability
        let mut best = i;
        let mut best_p = f64::INFINITY;
        for j in i..n {
            let mut v = c[j][j];
            let mut m = 0.0;
            for k in 0..i {
                v -= c[j][k] * c[j][k];
                m += c[j][k] * y[k];
            }
            if v <= 1e-14 {
                continue;
            }
            let p = norm_cdf((b[j] - m) / v.sqrt());
            if p < best_p {
                best_p = p;
                best = j;
            }
        }
        if best != i {
            c.swap(i, best);
            for row in c.iter_mut() {
                row.swap(i, best);
            }
            b.swap(i, best);
        }
        let mut v = c[i][i];
        for k in 0..i {
            v -= c[i][k] * c[i][k];
        }
        if v <= 1e-14 {
            return Err(TrustError::decomposition("matrix is not positive definite"));
        }
        let d = v.sqrt();
        c[i][i] = d;
        for r in i + 1..n {
            let mut s = c[r][i];
            for k in 0..i {
                s -= c[r][k] * c[i][k];
            }
            c[r][i] = s / d;
        }
        for k in i + 1..n {
            c[i][k] = 0.0;
        }
        // expected value of the truncated coordinate, used for the ordering
        let mut m = 0.0;
        for k in 0..i {
            m += c[i][k] * y[k];
        }
        let u = (b[i] - m) / d;
        let pu = norm_cdf(u);
        y[i] = if pu > 1e-300 { -norm_pdf(u) / pu } else { u };
        if !y[i].is_finite() {
            y[i] = if u.is_finite() { u } else { 0.0 };
        }
    }
    Ok(Prepared { c, b })
}

#[inline]
fn baker(x: f64) -> f64 {
    1.0 - (2.0 * x - 1.0).abs()
}

fn integrate(prep: &Prepared, nu: Option<f64>, points: usize, reps: usize, rng: &mut RngStream) -> (f64, f64) {
    let n = prep.b.len();
    let extra = usize::from(nu.is_some());
    let dim = n - 1 + extra;
    let gen: Vec<f64> = (0..dim).map(|k| PRIMES[k].sqrt().fract()).collect();
    let mut y = vec![0.0; n];
    let mut means = Vec::with_capacity(reps);
    let points = points.max(1);
    for _ in 0..reps.max(1) {
        let shift: Vec<f64> = (0..dim).map(|_| rng.open01()).collect();
        let mut acc = 0.0;
        for k in 1..=points {
            let kf = k as f64;
            let scale = match nu {
                Some(v) => {
                    let u = baker((kf * gen[0] + shift[0]).fract()).clamp(1e-16, 1.0 - 1e-16);
                    (gamma_quantile_unit(u, 0.5 * v) / (0.5 * v)).sqrt()
                }
                None => 1.0,
            };
            let mut prod = 1.0;
            for i in 0..n {
                let mut s = 0.0;
                for m in 0..i {
                    s += prep.c[i][m] * y[m];
                }
                let lim = prep.b[i] * scale;
                let e = if lim == f64::INFINITY {
                    1.0
                } else {
                    norm_cdf((lim - s) / prep.c[i][i])
                };
                prod *= e;
                if prod == 0.0 {
                    break;
                }
                if i + 1 < n {
                    let u = baker((kf * gen[i + extra] + shift[i + extra]).fract());
                    let p = (u * e).clamp(1e-300, 1.0 - 1e-16);
                    y[i] = norm_quantile(p).clamp(-40.0, 40.0);
                }
            }
            acc += prod;
        }
        means.push(acc / points as f64);
    }
    let r = means.len() as f64;
    let mean = means.iter().sum::<f64>() / r;
    let se = if means.len() > 1 {
        (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (r - 1.0) / r).sqrt()
    } else {
        0.0
    };
    (mean, se)
}

/// Φ_d(x; Σ): probability that a zero-mean normal vector with covariance Σ
/// lies below x, with the randomization standard error.
pub fn mvn_cdf(x: &[f64], sigma: &DMatrix<f64>, qmc_points: usize, rng: &mut RngStream) -> Result<(f64, f64)> {
    mvn_cdf_with(x, sigma, QmcSettings::with_points(qmc_points), rng)
}

pub fn mvn_cdf_with(x: &[f64], sigma: &DMatrix<f64>, settings: QmcSettings, rng: &mut RngStream) -> Result<(f64, f64)> {
    let prep = prepare(x, sigma)?;
    if prep.b.len() == 1 {
        return Ok((norm_cdf(prep.b[0]), 0.0));
    }
    Ok(integrate(&prep, None, settings.points, settings.randomizations, rng))
}

/// T_d(x; Σ, ν): multivariate t distribution function with scale matrix Σ.
pub fn mvt_cdf(x: &[f64], sigma: &DMatrix<f64>, nu: f64, qmc_points: usize, rng: &mut RngStream) -> Result<(f64, f64)> {
    mvt_cdf_with(x, sigma, nu, QmcSettings::with_points(qmc_points), rng)
}

pub fn mvt_cdf_with(
    x: &[f64],
    sigma: &DMatrix<f64>,
    nu: f64,
    settings: QmcSettings,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    if nu.is_nan() || nu <= 0.0 {
        return Err(TrustError::domain("degrees of freedom must be positive"));
    }
    if nu >= NU_NORMAL {
        return mvn_cdf_with(x, sigma, settings, rng);
    }
    let prep = prepare(x, sigma)?;
    if prep.b.len() == 1 {
        return Ok((t_cdf_std(prep.b[0], nu), 0.0));
    }
    if prep.b.iter().all(|&v| v == 0.0) {
        // orthant probabilities do not depend on the mixing variable
        return Ok(integrate(&prep, None, settings.points, settings.randomizations, rng));
    }
    Ok(integrate(&prep, Some(nu), settings.points, settings.randomizations, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::lowdim::{bvn_cdf, tvn_cdf};

    fn corr2(r: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0])
    }

    #[test]
    fn diagonal_orthant() {
        let mut rng = RngStream::new(1, 0);
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0, 0.5]));
        let (p, _) = mvn_cdf(&[0.0; 3], &s, 4096, &mut rng).unwrap();
        assert!((p - 0.125).abs() < 1e-12);
    }

    #[test]
    fn bivariate_orthant_within_error() {
        let mut rng = RngStream::new(2, 0);
        let (p, se) = mvn_cdf(&[0.0, 0.0], &corr2(0.5), DEFAULT_QMC_POINTS, &mut rng).unwrap();
        assert!((p - 1.0 / 3.0).abs() <= 3.0 * se + 1e-12, "p={p} se={se}");
    }

    #[test]
    fn bivariate_against_deterministic() {
        let mut rng = RngStream::new(3, 0);
        for &(h, k, r) in &[(0.3, -0.8, 0.6), (-1.5, 2.0, -0.7), (1.0, 1.0, 0.95)] {
            let (p, se) = mvn_cdf(&[h, k], &corr2(r), DEFAULT_QMC_POINTS, &mut rng).unwrap();
            let e = bvn_cdf(h, k, r);
            assert!((p - e).abs() < 5.0 * se + 1e-7, "{p} vs {e} se {se}");
        }
    }

    #[test]
    fn trivariate_against_deterministic() {
        let mut rng = RngStream::new(4, 0);
        let r = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, -0.3, 0.4, 1.0, 0.5, -0.3, 0.5, 1.0]);
        let x = [0.5, -0.2, 1.1];
        let (p, se) = mvn_cdf(&x, &r, DEFAULT_QMC_POINTS, &mut rng).unwrap();
        let e = tvn_cdf(x, &r);
        assert!((p - e).abs() < 5.0 * se + 1e-7, "{p} vs {e} se {se}");
    }

    #[test]
    fn t_one_dim_reduces() {
        let mut rng = RngStream::new(5, 0);
        let s = DMatrix::from_element(1, 1, 2.0);
        let (p, _) = mvt_cdf(&[1.3], &s, 4.0, 1024, &mut rng).unwrap();
        assert!((p - t_cdf_std(1.3 / 2f64.sqrt(), 4.0)).abs() < 1e-14);
    }

    #[test]
    fn t_independent_orthant() {
        let mut rng = RngStream::new(6, 0);
        let (p, _) = mvt_cdf(&[0.0, 0.0], &DMatrix::identity(2, 2), 3.0, 1024, &mut rng).unwrap();
        assert!((p - 0.25).abs() < 1e-12);
    }

    #[test]
    fn t_bivariate_against_mixture() {
        use crate::numkernel::lowdim::log_t_cdf_lowdim;
        let mut rng = RngStream::new(7, 0);
        let s = corr2(-0.4);
        let x = [0.7, -0.3];
        let (p, se) = mvt_cdf(&x, &s, 5.0, DEFAULT_QMC_POINTS, &mut rng).unwrap();
        let e = log_t_cdf_lowdim(&x, &s, 5.0).unwrap().exp();
        assert!((p - e).abs() < 5.0 * se + 1e-7, "{p} vs {e} se {se}");
    }

    #[test]
    fn not_pd_is_error() {
        let mut rng = RngStream::new(8, 0);
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, 0.9, 0.9, 1.0, -0.9, 0.9, -0.9, 1.0]);
        assert!(matches!(mvn_cdf(&[0.0; 3], &s, 128, &mut rng), Err(TrustError::Decomposition(_))));
    }

    #[test]
    fn reproducible() {
        let s = corr2(0.3);
        let a = mvt_cdf(&[0.2, 0.1], &s, 4.0, 512, &mut RngStream::new(9, 1)).unwrap();
        let b = mvt_cdf(&[0.2, 0.1], &s, 4.0, 512, &mut RngStream::new(9, 1)).unwrap();
        assert_eq!(a, b);
    }
}
