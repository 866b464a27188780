//! Copula density c(u) = f_TrUST(z) / Π f_j(z_j) with z_j = F_j⁻¹(u_j).

use std::thread;

use nalgebra::DMatrix;

use super::data::CopulaData;
use crate::error::{Result, TrustError};
use crate::trust::{log_pdf_joint, MarginalTable, TrustParams};

/// Copula parameters {Ω, A, ν}; the validity rules are those of TrustParams.
pub type CopulaParams = TrustParams;

/// log c(u; θ) at one point.
pub fn copula_log_density(u: &[f64], p: &CopulaParams) -> Result<f64> {
    if u.len() != p.dim() {
        return Err(TrustError::domain("u and the parameters differ in dimension"));
    }
    let mut z = vec![0.0; u.len()];
    let mut log_margins = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        let t = MarginalTable::cached(p, j)?;
        z[j] = t.quantile(uj)?;
        log_margins += t.log_pdf(z[j]);
    }
    Ok(log_pdf_joint(&z, p)? - log_margins)
}

/// Marginal quantiles z_ij of every observation and Σ_ij log f_j(z_ij).
/// Margins are processed in parallel; the result does not depend on
/// scheduling.
pub fn copula_scores(u: &CopulaData, p: &CopulaParams) -> Result<(DMatrix<f64>, f64)> {
    let (n, d) = (u.n(), u.d());
    if d != p.dim() {
        return Err(TrustError::domain("copula data and parameters differ in dimension"));
    }
    let columns: Vec<Result<(Vec<f64>, f64)>> = thread::scope(|s| {
        let handles: Vec<_> = (0..d)
            .map(|j| {
                s.spawn(move || -> Result<(Vec<f64>, f64)> {
                    let t = MarginalTable::cached(p, j)?;
                    let mut z = Vec::with_capacity(n);
                    let mut lp = 0.0;
                    for i in 0..n {
                        let v = t.quantile(u.u()[(i, j)])?;
                        lp += t.log_pdf(v);
                        z.push(v);
                    }
                    Ok((z, lp))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("margin worker panicked")).collect()
    });
    let mut z = DMatrix::zeros(n, d);
    let mut total = 0.0;
    for (j, c) in columns.into_iter().enumerate() {
        let (col, lp) = c?;
        z.set_column(j, &nalgebra::DVector::from_vec(col));
        total += lp;
    }
    Ok((z, total))
}

/// log c(u_i; θ) for every row.
pub fn copula_log_density_rows(u: &CopulaData, p: &CopulaParams) -> Result<Vec<f64>> {
    let (z, _) = copula_scores(u, p)?;
    let tables: Vec<_> = (0..u.d()).map(|j| MarginalTable::cached(p, j)).collect::<Result<_>>()?;
    let mut row = vec![0.0; u.d()];
    (0..u.n())
        .map(|i| {
            let mut lm = 0.0;
            for j in 0..u.d() {
                row[j] = z[(i, j)];
                lm += tables[j].log_pdf(row[j]);
            }
            Ok(log_pdf_joint(&row, p)? - lm)
        })
        .collect()
}
