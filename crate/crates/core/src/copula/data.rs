use nalgebra::DMatrix;

use crate::error::{Result, TrustError};

/// Observations on the unit cube, every value strictly inside (0, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct CopulaData {
    u: DMatrix<f64>,
}

impl CopulaData {
    pub fn new(u: DMatrix<f64>) -> Result<Self> {
        if u.nrows() == 0 || u.ncols() == 0 {
            return Err(TrustError::validation("copula data must be non-empty"));
        }
        for i in 0..u.nrows() {
            for j in 0..u.ncols() {
                let v = u[(i, j)];
                if !(v > 0.0 && v < 1.0) {
                    return Err(TrustError::validation(format!(
                        "u at row {}, column {} is {v}, outside (0, 1)",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(CopulaData { u })
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn d(&self) -> usize {
        self.u.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.u.row(i).iter().copied().collect()
    }
}

/// Average ranks of x, starting at one.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// u_ij = rank of y_ij within column j, divided by n + 1 (ties get average ranks).
pub fn pseudo_observations(y: &DMatrix<f64>) -> Result<CopulaData> {
    let (n, d) = (y.nrows(), y.ncols());
    if n < 2 {
        return Err(TrustError::validation("need at least two rows"));
    }
    let mut u = DMatrix::zeros(n, d);
    for j in 0..d {
        let col: Vec<f64> = y.column(j).iter().copied().collect();
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(TrustError::validation(format!("non-finite value at row {}, column {}", i + 1, j + 1)));
        }
        if col.iter().all(|&v| v == col[0]) {
            return Err(TrustError::validation(format!("column {} is constant: degenerate margin", j + 1)));
        }
        for (i, r) in average_ranks(&col).into_iter().enumerate() {
            u[(i, j)] = r / (n as f64 + 1.0);
        }
    }
    CopulaData::new(u)
}
