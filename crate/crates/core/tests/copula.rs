mod common;

use common::*;
use proptest::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;
use trust_core::copula::*;
use trust_core::inference::{McmcConfig, PriorConfig};
use trust_core::numkernel::RngStream;
use trust_core::trust::{identify, sample, TrustParams};
use trust_core::DMatrix;

fn corr2(w: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, w, w, 1.0])
}

fn bivariate_t_logpdf(z: [f64; 2], w: f64, nu: f64) -> f64 {
    let det = 1.0 - w * w;
    let quad = (z[0] * z[0] - 2.0 * w * z[0] * z[1] + z[1] * z[1]) / det;
    ln_gamma(0.5 * (nu + 2.0)) - ln_gamma(0.5 * nu) - (nu * std::f64::consts::PI).ln() - 0.5 * det.ln()
        - 0.5 * (nu + 2.0) * (1.0 + quad / nu).ln()
}

fn negate(p: &TrustParams) -> TrustParams {
    TrustParams::new(p.omega().clone(), -p.alpha().clone(), p.nu()).unwrap()
}

#[test]
fn symmetric_copula_is_the_t_copula() {
    let (w, nu) = (0.4, 6.0);
    let p = TrustParams::symmetric(corr2(w), nu).unwrap();
    let t = StudentsT::new(0.0, 1.0, nu).unwrap();
    for &(a, b) in &[(0.1, 0.2), (0.5, 0.5), (0.93, 0.07), (0.999, 0.995), (0.02, 0.6)] {
        let z = [t.inverse_cdf(a), t.inverse_cdf(b)];
        let expect = bivariate_t_logpdf(z, w, nu) - t.ln_pdf(z[0]) - t.ln_pdf(z[1]);
        let got = copula_log_density(&[a, b], &p).unwrap();
        assert!((got - expect).abs() < 1e-8, "{got} vs {expect}");
    }
}

#[test]
fn reflection_negates_the_skew() {
    for (_, _, p) in figure_sets().into_iter().step_by(2) {
        let m = negate(&p);
        for &(a, b) in &[(0.1, 0.3), (0.6, 0.25), (0.85, 0.9), (0.03, 0.97)] {
            let x = copula_log_density(&[a, b], &p).unwrap();
            let y = copula_log_density(&[1.0 - a, 1.0 - b], &m).unwrap();
            assert!((x - y).abs() < 1e-8, "{x} {y}");
        }
    }
    let p = TrustParams::new(corr2(0.3), DMatrix::from_row_slice(2, 1, &[3.0, -1.0]), 5.0).unwrap();
    let (l, r) = (quantile_dependence(&p, (0, 1), 0.05).unwrap(), quantile_dependence(&negate(&p), (0, 1), 0.05).unwrap());
    assert!((l.ll - r.ur).abs() < 1e-6 && (l.lr - r.ul).abs() < 1e-6, "{l:?} {r:?}");
}

#[test]
fn density_ignores_latent_order() {
    let p = dgp2();
    let swapped = p.permute(&[1, 0]).unwrap();
    for &u in &[[0.2, 0.5, 0.7], [0.9, 0.05, 0.4]] {
        let a = copula_log_density(&u, &p).unwrap();
        assert!((a - copula_log_density(&u, &swapped).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn rows_agree_with_pointwise_density() {
    let p = dgp1();
    let y = sample(&p, None, 50, &mut RngStream::new(3, 0)).unwrap().draws;
    let u = pseudo_observations(&y).unwrap();
    let rows = copula_log_density_rows(&u, &p).unwrap();
    for i in 0..u.n() {
        assert!((rows[i] - copula_log_density(&u.row(i), &p).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn elliptical_rank_correlations() {
    for &w in &[-0.7, -0.2, 0.0, 0.35, 0.9] {
        let p = TrustParams::symmetric(corr2(w), 4.0).unwrap();
        let k = kendall(&p, (0, 1)).unwrap();
        let s = spearman(&p, (0, 1)).unwrap();
        assert!((k - 2.0 / std::f64::consts::PI * w.asin()).abs() < 1e-10, "{k}");
        assert!((s - 6.0 / std::f64::consts::PI * (0.5 * w).asin()).abs() < 1e-10, "{s}");
    }
}

#[test]
fn rank_correlations_are_symmetric_and_flip_with_a_margin() {
    let p = identify(&TrustParams::new(corr2(0.3), DMatrix::from_row_slice(2, 1, &[2.0, -1.0]), 5.0).unwrap());
    let flipped = TrustParams::new(corr2(-0.3), DMatrix::from_row_slice(2, 1, &[2.0, 1.0]), 5.0).unwrap();
    let (k, s) = (kendall(&p, (0, 1)).unwrap(), spearman(&p, (0, 1)).unwrap());
    assert!((k - kendall(&p, (1, 0)).unwrap()).abs() < 1e-3);
    assert!((k + kendall(&flipped, (0, 1)).unwrap()).abs() < 3e-3);
    assert!((s + spearman(&flipped, (0, 1)).unwrap()).abs() < 3e-3);
    assert!(k.abs() <= 1.0 && s.abs() <= 1.0);
}

#[test]
fn rank_correlations_invalid_pairs() {
    let p = dgp1();
    assert!(kendall(&p, (1, 1)).is_err());
    assert!(spearman(&p, (0, 3)).is_err());
    assert!(bivariate_copula_cdf(0.5, 1.0, &p, (0, 1)).is_err());
    assert!(quantile_dependence(&p, (0, 1), 0.6).is_err());
}

#[test]
fn copula_cdf_is_a_copula() {
    let bivariate = TrustParams::new(corr2(-0.4), DMatrix::from_row_slice(2, 1, &[4.0, 1.0]), 3.0).unwrap();
    for p in [dgp1(), bivariate] {
        let grid = [0.01, 0.2, 0.5, 0.77, 0.99];
        for &a in &grid {
            let edge = bivariate_copula_cdf(a, 1.0 - 1e-10, &p, (0, 1)).unwrap();
            assert!((edge - a).abs() < 1e-6, "C({a}, 1) = {edge}");
            let near0 = bivariate_copula_cdf(1e-10, a, &p, (0, 1)).unwrap();
            assert!(near0 < 1e-9);
            let mut last = 0.0;
            for &b in &grid {
                let c = bivariate_copula_cdf(a, b, &p, (0, 1)).unwrap();
                assert!(c >= (a + b - 1.0).max(0.0) - 1e-9 && c <= a.min(b) + 1e-12);
                assert!(c >= last - 1e-9);
                last = c;
            }
        }
    }
}

#[test]
fn copula_cdf_matches_integrated_density() {
    let (_, _, p) = figure_sets().remove(7);
    let (a, b) = (0.3, 0.6);
    let rule = gauss_legendre_unit(50);
    let mut total = 0.0;
    for &(x, wx) in &rule {
        for &(y, wy) in &rule {
            total += a * b * wx * wy * copula_log_density(&[a * x, b * y], &p).unwrap().exp();
        }
    }
    let c = bivariate_copula_cdf(a, b, &p, (0, 1)).unwrap();
    assert!((c - total).abs() < 2e-4, "{c} vs {total}");
}

fn gauss_legendre_unit(panels: usize) -> Vec<(f64, f64)> {
    let rule = trust_core::numkernel::quadrature::gauss_legendre(8);
    let mut out = Vec::new();
    for k in 0..panels {
        let (lo, hi) = (k as f64 / panels as f64, (k + 1) as f64 / panels as f64);
        for &(x, w) in &rule {
            out.push((0.5 * (lo + hi) + 0.5 * (hi - lo) * x, 0.5 * (hi - lo) * w));
        }
    }
    out
}

#[test]
fn independence_gives_kappa_in_every_quadrant() {
    let p = TrustParams::symmetric(DMatrix::identity(2, 2), f64::INFINITY).unwrap();
    for &k in &[0.05, 0.2, 0.5] {
        let l = quantile_dependence(&p, (0, 1), k).unwrap();
        for v in [l.ll, l.ur, l.lr, l.ul] {
            assert!((v - k).abs() < 1e-9, "{v} vs {k}");
        }
        let (major, minor) = asymmetry_measures(&l);
        assert!(major.abs() < 1e-9 && minor.abs() < 1e-9);
    }
}

#[test]
fn radially_symmetric_copula_has_no_asymmetry() {
    let p = TrustParams::symmetric(corr2(0.6), 4.0).unwrap();
    let l = quantile_dependence(&p, (0, 1), 0.05).unwrap();
    let (major, minor) = asymmetry_measures(&l);
    assert!(major.abs() < 1e-7 && minor.abs() < 1e-7, "{major} {minor}");
    assert!(l.ll > 0.05, "t copula has positive lower dependence");
}

#[test]
fn report_orientation_and_shape() {
    let p = dgp2();
    let r = dependence_report(&p, &[0.05, 0.25]).unwrap();
    assert_eq!(r.pairs.iter().map(|x| x.pair).collect::<Vec<_>>(), vec![(2, 1), (3, 1), (3, 2)]);
    let first = &r.pairs[0];
    let direct = quantile_dependence(&p, (0, 1), 0.05).unwrap();
    assert_eq!(first.quadrants[0], direct);
    assert!(first.lambda_minor[0] < 0.0);
    assert_eq!(first.kendall, kendall(&p, (1, 0)).unwrap());
}

#[test]
fn short_copula_fit() {
    let y = sample(&dgp1(), None, 120, &mut RngStream::new(4, 0)).unwrap().draws;
    let u = pseudo_observations(&y).unwrap();
    let cfg = McmcConfig {
        n_burn: 15,
        n_keep: 10,
        ..Default::default()
    };
    let draws = fit_copula_mcmc(&u, 1, &cfg, &PriorConfig::default(), &mut RngStream::new(4, 1)).unwrap();
    assert_eq!(draws.len(), 10);
    assert!(draws.theta.iter().all(|t| t.loc_scale.is_none()));
    for (t, &ll) in draws.theta.iter().zip(&draws.loglik) {
        assert!((copula_log_likelihood(t, &u, draws.eps).unwrap() - ll).abs() < 1e-8 * ll.abs().max(1.0));
    }
    let d = copula_dic(&draws, &u).unwrap();
    assert!(d.dic.is_finite());
    let s = log_score(&u, &draws).unwrap();
    assert_eq!(s.per_row.len(), u.n());
    assert!((s.cumulative[u.n() - 1] - s.per_row.iter().sum::<f64>()).abs() < 1e-9);
    let wrong = CopulaData::new(DMatrix::from_element(5, 2, 0.5)).unwrap();
    assert!(log_score(&wrong, &draws).is_err());
    let one_column = CopulaData::new(DMatrix::from_column_slice(10, 1, &[0.5; 10])).unwrap();
    assert!(fit_copula_mcmc(&one_column, 1, &cfg, &PriorConfig::default(), &mut RngStream::new(1, 1)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pseudo_observations_are_invariant_to_monotone_maps(
        xs in prop::collection::vec(-50.0f64..50.0, 4..40),
        shift in -5.0f64..5.0,
        scale in 0.1f64..10.0,
    ) {
        let n = xs.len();
        let y = DMatrix::from_fn(n, 2, |i, j| if j == 0 { xs[i] } else { xs[(i * 7 + 3) % n] + i as f64 * 0.01 });
        prop_assume!(y.column(0).iter().any(|&v| v != y[(0, 0)]));
        prop_assume!(y.column(1).iter().any(|&v| v != y[(0, 1)]));
        let mapped = y.map(|v| shift + scale * v + v.powi(3));
        let (a, b) = (pseudo_observations(&y).unwrap(), pseudo_observations(&mapped).unwrap());
        prop_assert_eq!(a.u(), b.u());
        prop_assert!(a.u().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn copula_density_is_finite_inside_the_cube(
        a in 0.001f64..0.999,
        b in 0.001f64..0.999,
        cell in 0usize..9,
    ) {
        let (_, _, p) = figure_sets().remove(cell);
        prop_assert!(copula_log_density(&[a, b], &p).unwrap().is_finite());
    }
}
