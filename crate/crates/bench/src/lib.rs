//! Fixtures shared by the benchmarks.

use trust_core::numkernel::RngStream;
use trust_core::trust::{identify, sample, TrustParams};
use trust_core::DMatrix;

pub fn omega3() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.3, 0.5, 1.0, 0.811, 0.3, 0.811, 1.0])
}

/// d = 3 with q latent factors taken from the columns (5,3,5), (−10,0,5), (1,−2,2).
pub fn params(q: usize) -> TrustParams {
    let cols = [[5.0, 3.0, 5.0], [-10.0, 0.0, 5.0], [1.0, -2.0, 2.0]];
    let alpha = DMatrix::from_fn(3, q, |j, k| cols[k][j]);
    identify(&TrustParams::new(omega3(), alpha, 10.0).expect("valid parameters"))
}

pub fn data(q: usize, n: usize) -> DMatrix<f64> {
    sample(&params(q), None, n, &mut RngStream::new(1, 0)).expect("sampling succeeds").draws
}
