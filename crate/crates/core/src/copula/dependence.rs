//! Rank correlations, quantile dependence and asymmetry of pairs of margins.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::density::CopulaParams;
use crate::error::{Result, TrustError};
use crate::numkernel::lowdim::{log_t_cdf_lowdim, orthant_lowdim, standardize};
use crate::numkernel::mvcdf::{mvn_cdf_with, mvt_cdf_with, QmcSettings};
use crate::numkernel::RngStream;
use crate::trust::MarginalTable;

const DEPENDENCE_SEED: u64 = 0x6b656e64;

/// A value with its QMC standard error (zero when computed exactly).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

fn check_pair(p: &CopulaParams, (i, j): (usize, usize)) -> Result<()> {
    if i == j || i >= p.dim() || j >= p.dim() {
        return Err(TrustError::domain(format!("invalid pair ({}, {})", i + 1, j + 1)));
    }
    Ok(())
}

/// Φ(0; R) after standardizing R, exactly up to three dimensions.
fn gaussian_orthant(r: &DMatrix<f64>, settings: QmcSettings, rng: &mut RngStream) -> Result<(f64, f64)> {
    let (_, c) = standardize(r)?;
    if c.clone().cholesky().is_none() {
        return Err(TrustError::constraint("orthant matrix is not positive definite"));
    }
    if c.nrows() <= 3 {
        return Ok((orthant_lowdim(&c), 0.0));
    }
    mvn_cdf_with(&vec![0.0; c.nrows()], &c, settings, rng)
}

/// Rows (q×2) of Δ restricted to the pair: column a is margin i, b is margin j.
fn pair_delta(p: &CopulaParams, (i, j): (usize, usize)) -> DMatrix<f64> {
    let dl = p.delta();
    DMatrix::from_fn(p.q(), 2, |k, c| dl[(k, if c == 0 { i } else { j })])
}

fn pair_omega(p: &CopulaParams, (i, j): (usize, usize)) -> f64 {
    p.omega()[(i, j)]
}

/// R_K = [[2Ω, Δ_Kᵀ], [Δ_K, I₂⊗Σ]] with Δ_K = [Δ; −Δ].
pub fn kendall_matrix(p: &CopulaParams, pair: (usize, usize)) -> Result<DMatrix<f64>> {
    check_pair(p, pair)?;
    let q = p.q();
    let dk = pair_delta(p, pair);
    let w = pair_omega(p, pair);
    let mut r = DMatrix::zeros(2 + 2 * q, 2 + 2 * q);
    r[(0, 0)] = 2.0;
    r[(1, 1)] = 2.0;
    r[(0, 1)] = 2.0 * w;
    r[(1, 0)] = 2.0 * w;
    for blk in 0..2 {
        let sign = if blk == 0 { 1.0 } else { -1.0 };
        let o = 2 + blk * q;
        for k in 0..q {
            for c in 0..2 {
                r[(o + k, c)] = sign * dk[(k, c)];
                r[(c, o + k)] = sign * dk[(k, c)];
            }
            for l in 0..q {
                r[(o + k, o + l)] = p.sigma()[(k, l)];
            }
        }
    }
    Ok(r)
}

/// R_S = [[Ω + I₂, Δ_Sᵀ], [Δ_S, I₃⊗Σ]] with Δ_S = [Δ; −(δ₁ ⊕ δ₂)], δ_c the
/// columns of the pair's Δ.
pub fn spearman_matrix(p: &CopulaParams, pair: (usize, usize)) -> Result<DMatrix<f64>> {
    check_pair(p, pair)?;
    let q = p.q();
    let dk = pair_delta(p, pair);
    let w = pair_omega(p, pair);
    let m = 2 + 3 * q;
    let mut r = DMatrix::zeros(m, m);
    r[(0, 0)] = 2.0;
    r[(1, 1)] = 2.0;
    r[(0, 1)] = w;
    r[(1, 0)] = w;
    for blk in 0..3 {
        let o = 2 + blk * q;
        for k in 0..q {
            for c in 0..2 {
                let v = match blk {
                    0 => dk[(k, c)],
                    1 if c == 0 => -dk[(k, 0)],
                    2 if c == 1 => -dk[(k, 1)],
                    _ => 0.0,
                };
                r[(o + k, c)] = v;
                r[(c, o + k)] = v;
            }
            for l in 0..q {
                r[(o + k, o + l)] = p.sigma()[(k, l)];
            }
        }
    }
    Ok(r)
}

fn sigma_orthant(p: &CopulaParams) -> f64 {
    p.log_t0().exp()
}

/// Kendall's τ = 4 Φ_{2+2q}(0; R_K) / Φ_q(0; Σ)² − 1.
pub fn kendall_with(p: &CopulaParams, pair: (usize, usize), settings: QmcSettings, rng: &mut RngStream) -> Result<Estimate> {
    let (v, se) = gaussian_orthant(&kendall_matrix(p, pair)?, settings, rng)?;
    let s = sigma_orthant(p).powi(2);
    Ok(Estimate {
        value: 4.0 * v / s - 1.0,
        std_error: 4.0 * se / s,
    })
}

/// Spearman's ρ_S = 12 Φ_{2+3q}(0; R_S) / Φ_q(0; Σ)³ − 3.
pub fn spearman_with(p: &CopulaParams, pair: (usize, usize), settings: QmcSettings, rng: &mut RngStream) -> Result<Estimate> {
    let (v, se) = gaussian_orthant(&spearman_matrix(p, pair)?, settings, rng)?;
    let s = sigma_orthant(p).powi(3);
    Ok(Estimate {
        value: 12.0 * v / s - 3.0,
        std_error: 12.0 * se / s,
    })
}

/// Kendall's τ at default QMC settings with a fixed randomization seed.
pub fn kendall(p: &CopulaParams, pair: (usize, usize)) -> Result<f64> {
    let mut rng = RngStream::new(DEPENDENCE_SEED, 0);
    Ok(kendall_with(p, pair, QmcSettings::default(), &mut rng)?.value)
}

/// Spearman's ρ_S at default QMC settings with a fixed randomization seed.
pub fn spearman(p: &CopulaParams, pair: (usize, usize)) -> Result<f64> {
    let mut rng = RngStream::new(DEPENDENCE_SEED, 1);
    Ok(spearman_with(p, pair, QmcSettings::default(), &mut rng)?.value)
}

/// C(u₁, u₂) of the pair = T_{2+q}((z₁, z₂, 0); R*, ν) / T_q(0; Σ, ν) with
/// R* = [[Ω, −Δᵀ], [−Δ, Σ]].
pub fn bivariate_copula_cdf(u1: f64, u2: f64, p: &CopulaParams, pair: (usize, usize)) -> Result<f64> {
    bivariate_copula_cdf_with(u1, u2, p, pair, QmcSettings::with_points(1 << 15))
}

/// As `bivariate_copula_cdf` with explicit QMC settings (used beyond three
/// dimensions only); the randomization seed is fixed.
pub fn bivariate_copula_cdf_with(u1: f64, u2: f64, p: &CopulaParams, pair: (usize, usize), settings: QmcSettings) -> Result<f64> {
    check_pair(p, pair)?;
    for u in [u1, u2] {
        if !(u > 0.0 && u < 1.0) {
            return Err(TrustError::domain(format!("probability must lie in (0,1), got {u}")));
        }
    }
    let z1 = MarginalTable::cached(p, pair.0)?.quantile(u1)?;
    let z2 = MarginalTable::cached(p, pair.1)?.quantile(u2)?;
    let q = p.q();
    let dk = pair_delta(p, pair);
    let m = 2 + q;
    let mut r = DMatrix::zeros(m, m);
    r[(0, 0)] = 1.0;
    r[(1, 1)] = 1.0;
    r[(0, 1)] = pair_omega(p, pair);
    r[(1, 0)] = r[(0, 1)];
    for k in 0..q {
        for c in 0..2 {
            r[(2 + k, c)] = -dk[(k, c)];
            r[(c, 2 + k)] = -dk[(k, c)];
        }
        for l in 0..q {
            r[(2 + k, 2 + l)] = p.sigma()[(k, l)];
        }
    }
    let mut x = vec![0.0; m];
    x[0] = z1;
    x[1] = z2;
    let num = if m <= 3 {
        log_t_cdf_lowdim(&x, &r, p.nu())?.exp()
    } else {
        let mut rng = RngStream::new(DEPENDENCE_SEED, 2);
        mvt_cdf_with(&x, &r, p.nu(), settings, &mut rng)?.0
    };
    Ok((num / sigma_orthant(p)).clamp(0.0, u1.min(u2)))
}

/// Conditional corner probabilities at quantile κ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadrantDependence {
    pub kappa: f64,
    /// P(U₂ < κ | U₁ < κ)
    pub ll: f64,
    /// P(U₂ > 1 − κ | U₁ > 1 − κ)
    pub ur: f64,
    /// P(U₂ > 1 − κ | U₁ < κ)
    pub lr: f64,
    /// P(U₂ < κ | U₁ > 1 − κ)
    pub ul: f64,
}

/// Quadrant probabilities from the copula CDF:
/// P(U₁ > a, U₂ > a) = 1 − 2a + C(a, a) and P(U₁ < κ, U₂ > 1 − κ) = κ − C(κ, 1 − κ).
pub fn quantile_dependence(p: &CopulaParams, pair: (usize, usize), kappa: f64) -> Result<QuadrantDependence> {
    quantile_dependence_with(p, pair, kappa, QmcSettings::with_points(1 << 15))
}

pub fn quantile_dependence_with(
    p: &CopulaParams,
    pair: (usize, usize),
    kappa: f64,
    settings: QmcSettings,
) -> Result<QuadrantDependence> {
    if !(kappa > 0.0 && kappa <= 0.5) {
        return Err(TrustError::domain(format!("κ must lie in (0, 0.5], got {kappa}")));
    }
    let c = |a: f64, b: f64| bivariate_copula_cdf_with(a, b, p, pair, settings);
    let hi = 1.0 - kappa;
    let clip = |v: f64| v.clamp(0.0, 1.0);
    Ok(QuadrantDependence {
        kappa,
        ll: clip(c(kappa, kappa)? / kappa),
        ur: clip((1.0 - 2.0 * hi + c(hi, hi)?) / kappa),
        lr: clip((kappa - c(kappa, hi)?) / kappa),
        ul: clip((kappa - c(hi, kappa)?) / kappa),
    })
}

/// (Λ_Major, Λ_Minor) = (λ_UR − λ_LL, λ_UL − λ_LR).
pub fn asymmetry_measures(l: &QuadrantDependence) -> (f64, f64) {
    (l.ur - l.ll, l.ul - l.lr)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDependence {
    /// One-based margin indices.
    pub pair: (usize, usize),
    pub kendall: f64,
    pub spearman: f64,
    pub quadrants: Vec<QuadrantDependence>,
    pub lambda_major: Vec<f64>,
    pub lambda_minor: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub kappas: Vec<f64>,
    pub pairs: Vec<PairDependence>,
}

/// Every pair i > j, on the given κ grid. The quadrant measures of pair
/// (i, j) take U₁ to be margin j, the lower index.
pub fn dependence_report(p: &CopulaParams, kappas: &[f64]) -> Result<DependenceReport> {
    let mut pairs = Vec::new();
    for i in 0..p.dim() {
        for j in 0..i {
            let quadrants = kappas
                .iter()
                .map(|&k| quantile_dependence(p, (j, i), k))
                .collect::<Result<Vec<_>>>()?;
            let (lambda_major, lambda_minor) = quadrants.iter().map(asymmetry_measures).unzip();
            pairs.push(PairDependence {
                pair: (i + 1, j + 1),
                kendall: kendall(p, (i, j))?,
                spearman: spearman(p, (i, j))?,
                quadrants,
                lambda_major,
                lambda_minor,
            });
        }
    }
    Ok(DependenceReport {
        kappas: kappas.to_vec(),
        pairs,
    })
}
