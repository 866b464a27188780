mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use statrs::distribution::{Continuous, ContinuousCDF, Gamma, Normal, StudentsT};
use trust_core::inference::sampler::{run_chain, ModelKind, PosteriorDraws};
use trust_core::inference::*;
use trust_core::numkernel::angles::{corr_to_angles, AngleSet, ANGLE_EPS};
use trust_core::numkernel::samplers::{sample_gamma, sample_std_normal};
use trust_core::numkernel::RngStream;
use trust_core::trust::{log_pdf_location_scale, sample, LocationScale, TrustParams};

fn theta_of(p: &TrustParams, ls: Option<LocationScale>) -> Theta {
    Theta {
        psi: p.angles_within(ANGLE_EPS).unwrap(),
        alpha: p.alpha().clone(),
        nu: p.nu(),
        loc_scale: ls,
    }
}

fn dgp1_data(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = RngStream::new(seed, 0);
    sample(&dgp1(), None, n, &mut rng).unwrap().draws
}

fn short_cfg(burn: usize, keep: usize) -> McmcConfig {
    McmcConfig {
        n_burn: burn,
        n_keep: keep,
        ..Default::default()
    }
}

#[test]
fn scalar_extended_likelihood_oracle() {
    let p = TrustParams::new(DMatrix::identity(1, 1), DMatrix::zeros(1, 1), 6.0).unwrap();
    let theta = theta_of(&p, Some(LocationScale::new(vec![0.0], vec![1.0]).unwrap()));
    for &(z, l, w) in &[(0.3, 0.7, 1.2), (-1.5, 0.1, 0.4), (2.0, 2.5, 3.0)] {
        let lat = LatentState::new(DMatrix::from_element(1, 1, l), DVector::from_element(1, w)).unwrap();
        let y = DMatrix::from_element(1, 1, z);
        let got = log_extended_likelihood(&theta, &lat, &y, ANGLE_EPS).unwrap();
        let sd = 1.0 / w.sqrt();
        let nz = Normal::new(0.0, sd).unwrap();
        let g = Gamma::new(3.0, 3.0).unwrap();
        let expect = nz.ln_pdf(z) + nz.ln_pdf(l) + 2f64.ln() + g.ln_pdf(w);
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }
}

#[test]
fn extended_likelihood_scale_jacobian() {
    let p = dgp2();
    let mut rng = RngStream::new(3, 0);
    let s = sample(&p, None, 20, &mut rng).unwrap();
    let lat = LatentState::new(s.l.clone(), s.w.clone()).unwrap();
    let mu = vec![0.5, -1.0, 2.0];
    let ls1 = LocationScale::new(mu.clone(), vec![1.0, 1.5, 0.7]).unwrap();
    let ls2 = LocationScale::new(mu.clone(), vec![2.0, 3.0, 1.4]).unwrap();
    let y1 = DMatrix::from_fn(20, 3, |i, j| mu[j] + ls1.s[j] * s.draws[(i, j)]);
    let y2 = DMatrix::from_fn(20, 3, |i, j| mu[j] + ls2.s[j] * s.draws[(i, j)]);
    let a = log_extended_likelihood(&theta_of(&p, Some(ls1)), &lat, &y1, ANGLE_EPS).unwrap();
    let b = log_extended_likelihood(&theta_of(&p, Some(ls2)), &lat, &y2, ANGLE_EPS).unwrap();
    assert!((b - a + 20.0 * 3.0 * 2f64.ln()).abs() < 1e-9);
}

#[test]
fn extended_density_marginalizes_to_the_joint() {
    let omega = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
    let p = TrustParams::new(omega, DMatrix::from_column_slice(2, 1, &[2.0, -1.0]), 5.0).unwrap();
    let ls = LocationScale::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let theta = theta_of(&p, Some(ls.clone()));
    let z = [0.4, -0.3];
    let y = DMatrix::from_row_slice(1, 2, &z);
    let sig = p.sigma()[(0, 0)];
    let g = Gamma::new(2.5, 2.5).unwrap();
    let mut rng = RngStream::new(11, 0);
    let m = 200_000;
    let mut vals = Vec::with_capacity(m);
    for _ in 0..m {
        let w = sample_gamma(2.5, 2.5, &mut rng).unwrap();
        let l = (sample_std_normal(&mut rng) * (sig / w).sqrt()).abs();
        let lat = LatentState::new(DMatrix::from_element(1, 1, l), DVector::from_element(1, w)).unwrap();
        let ext = log_extended_likelihood(&theta, &lat, &y, ANGLE_EPS).unwrap();
        let prior_lw = Normal::new(0.0, (sig / w).sqrt()).unwrap().ln_pdf(l) + 2f64.ln() + g.ln_pdf(w);
        vals.push((ext - prior_lw).exp());
    }
    let mean = vals.iter().sum::<f64>() / m as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    let se = (var / m as f64).sqrt();
    let exact = log_pdf_location_scale(&z, &ls, &p).unwrap().exp();
    assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
}

#[test]
fn prior_support_edges() {
    let cfg = PriorConfig::default();
    let ls = Some(LocationScale::new(vec![0.0; 3], vec![1.0; 3]).unwrap());
    let mut t = theta_of(&dgp1(), ls);
    assert!(log_prior(&t, &cfg).is_finite());
    t.nu = 2.0;
    assert_eq!(log_prior(&t, &cfg), f64::NEG_INFINITY);
    let mut t = theta_of(&dgp1(), None);
    t.psi.as_mut_slice()[0] = ANGLE_EPS / 2.0;
    assert_eq!(log_prior(&t, &cfg), f64::NEG_INFINITY);
}

#[test]
fn prior_is_the_sum_of_its_components() {
    let cfg = PriorConfig::default();
    let ls = LocationScale::new(vec![0.1, 0.2, -0.3], vec![0.5, 2.0, 1.5]).unwrap();
    let t = theta_of(&dgp1(), Some(ls));
    let e = ANGLE_EPS;
    let pi = std::f64::consts::PI;
    // angle order (2,1), (3,1), (3,2): the subdiagonal ones range over (ε, 2π − ε)
    let mut expect = -2.0 * (2.0 * pi - 2.0 * e).ln() - (pi - 2.0 * e).ln();
    let na = Normal::new(0.0, 5.0).unwrap();
    expect += t.alpha.iter().map(|&a| na.ln_pdf(a)).sum::<f64>();
    expect += Gamma::new(3.0, 0.2).unwrap().ln_pdf(t.nu - 2.0);
    expect -= 0.5f64.ln() + 2f64.ln() + 1.5f64.ln();
    let got = log_prior(&t, &cfg);
    assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
}

#[test]
fn prior_rejects_unordered_h() {
    let cfg = PriorConfig::default();
    let p = dgp2();
    let mut t = theta_of(&p, None);
    assert!(log_prior(&t, &cfg).is_finite());
    t.alpha.swap_columns(0, 1);
    assert_eq!(log_prior(&t, &cfg), f64::NEG_INFINITY);
}

#[test]
fn step1_without_skew_is_half_normal() {
    let p = TrustParams::new(dgp_omega(), DMatrix::zeros(3, 2), 8.0).unwrap();
    let z = DMatrix::from_row_slice(2, 3, &[0.1, -0.2, 0.3, 1.0, 2.0, -1.0]);
    let w = DVector::from_vec(vec![1.0, 4.0]);
    let mut rng = RngStream::new(5, 0);
    let reps = 100_000;
    let mut sums = [0.0; 2];
    for _ in 0..reps {
        let l = step1_sample_l(&p, &w, &z, &mut rng).unwrap();
        assert!(l.iter().all(|&v| v > 0.0));
        sums[0] += l[(0, 0)];
        sums[1] += l[(1, 1)];
    }
    let half = (2.0 / std::f64::consts::PI).sqrt();
    for (i, s) in sums.iter().enumerate() {
        let sd = 1.0 / w[i].sqrt();
        let mean = half * sd;
        let se = sd * (1.0 - 2.0 / std::f64::consts::PI).sqrt() / (reps as f64).sqrt();
        assert!((s / reps as f64 - mean).abs() < 4.0 * se);
    }
}

#[test]
fn step1_matches_truncated_normal_cdf() {
    let p = dgp1();
    let z = DMatrix::from_row_slice(1, 3, &[0.5, 1.2, -0.4]);
    let w = DVector::from_element(1, 0.7);
    let om_inv = p.omega().clone().try_inverse().unwrap();
    let delta = p.delta().row(0).transpose();
    let m = (delta.transpose() * &om_inv * z.row(0).transpose())[(0, 0)];
    let h = 1.0 - (delta.transpose() * &om_inv * &delta)[(0, 0)];
    let sd = (h / 0.7).sqrt();
    let n = Normal::new(m, sd).unwrap();
    let lo = n.cdf(0.0);
    let mut rng = RngStream::new(9, 0);
    let xs: Vec<f64> = (0..20_000).map(|_| step1_sample_l(&p, &w, &z, &mut rng).unwrap()[(0, 0)]).collect();
    let pv = ks_pvalue(xs, |x| (n.cdf(x) - lo) / (1.0 - lo));
    assert!(pv > 0.001, "KS p = {pv}");
}

#[test]
fn step2_shape_and_rates() {
    let p = dgp2();
    assert_eq!(step2_shape(&p), 0.5 * (3.0 + 2.0 + 10.0));
    let mut rng = RngStream::new(2, 0);
    let s = sample(&p, None, 4, &mut rng).unwrap();
    let b = step2_rates(&p, &s.l, &s.draws).unwrap();
    let sigma_inv = p.sigma().clone().try_inverse().unwrap();
    let dt = p.delta().transpose();
    let c = p.omega() - &dt * &sigma_inv * p.delta();
    let c_inv = c.try_inverse().unwrap();
    for i in 0..4 {
        let zi = s.draws.row(i).transpose();
        let li = s.l.row(i).transpose();
        let r = &zi - &dt * &sigma_inv * &li;
        let expect = 0.5 * ((r.transpose() * &c_inv * &r)[(0, 0)] + (li.transpose() * &sigma_inv * &li)[(0, 0)] + 10.0);
        assert!((b[i] - expect).abs() < 1e-12 * expect.max(1.0), "{} vs {expect}", b[i]);
    }
}

#[test]
fn step2_gamma_mean_and_distribution() {
    let p = dgp1();
    let z = DMatrix::from_row_slice(1, 3, &[0.5, 1.2, -0.4]);
    let l = DMatrix::from_element(1, 1, 0.8);
    let a = step2_shape(&p);
    let b = step2_rates(&p, &l, &z).unwrap()[0];
    let mut rng = RngStream::new(4, 0);
    let reps = 100_000;
    let xs: Vec<f64> = (0..reps).map(|_| step2_sample_w(&p, &l, &z, &mut rng).unwrap()[0]).collect();
    let mean = xs.iter().sum::<f64>() / reps as f64;
    let se = (a.sqrt() / b) / (reps as f64).sqrt();
    assert!((mean - a / b).abs() < 4.0 * se);
    let g = Gamma::new(a, b).unwrap();
    assert!(ks_pvalue(xs[..20_000].to_vec(), |x| g.cdf(x)) > 0.001);
}

#[test]
fn step2_gaussian_limit_fixes_w() {
    let p = TrustParams::new(dgp_omega(), DMatrix::from_column_slice(3, 1, &[1.0, 0.0, -1.0]), f64::INFINITY).unwrap();
    let z = DMatrix::from_element(5, 3, 0.3);
    let l = DMatrix::from_element(5, 1, 0.5);
    let mut rng = RngStream::new(1, 0);
    assert!(step2_sample_w(&p, &l, &z, &mut rng).unwrap().iter().all(|&w| w == 1.0));
}

#[test]
fn vanishing_steps_are_always_accepted() {
    let y = dgp1_data(80, 1);
    let p = dgp1();
    let ls = LocationScale::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
    let mut theta = theta_of(&p, Some(ls));
    let mut rng = RngStream::new(6, 0);
    let w = DVector::from_element(80, 1.0);
    let l = step1_sample_l(&p, &w, &y, &mut rng).unwrap();
    let mut lat = LatentState::new(l, w).unwrap();
    let mut adapt = AdaptState::new(&theta, true, 0.44, 100);
    adapt.adapting = false;
    adapt.log_step.iter_mut().for_each(|v| *v = -30.0);
    let prior = PriorConfig::default();
    for _ in 0..1000 {
        theta = step3_update_theta(&theta, &mut lat, &y, &prior, true, &mut adapt, &mut rng).unwrap();
    }
    assert!(adapt.acceptance_rates().iter().all(|&a| a > 0.99), "{:?}", adapt.acceptance_rates());
}

#[test]
fn gaussian_location_posterior_matches_student_t() {
    let mut rng = RngStream::new(21, 0);
    let n = 30;
    let y = DMatrix::from_fn(n, 1, |_, _| 1.0 + 2.0 * sample_std_normal(&mut rng));
    let cfg = McmcConfig {
        n_burn: 2000,
        n_keep: 20_000,
        thin: 5,
        fix_nu: Some(f64::INFINITY),
        ..Default::default()
    };
    let draws = run_mcmc(&y, 0, &cfg, &PriorConfig::default(), &mut RngStream::new(3, 1)).unwrap();
    let mean = y.sum() / n as f64;
    let sdev = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let t = StudentsT::new(mean, sdev / (n as f64).sqrt(), n as f64 - 1.0).unwrap();
    let mut mu: Vec<f64> = draws.theta.iter().map(|th| th.loc_scale.as_ref().unwrap().mu[0]).collect();
    mu.sort_by(f64::total_cmp);
    let m = mu.len() as f64;
    let ks = mu
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = t.cdf(x);
            ((i as f64 + 1.0) / m - f).max(f - i as f64 / m)
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.02, "Kolmogorov distance {ks}");
}

#[test]
fn every_sweep_keeps_h_ascending_and_draws_valid() {
    let mut rng = RngStream::new(8, 0);
    let y = sample(&dgp2(), None, 200, &mut rng).unwrap().draws;
    let target = DistributionTarget::new(&y, 2).unwrap();
    let prior = PriorConfig::default();
    let mut sweeps = 0;
    let draws = run_chain(&target, 2, &short_cfg(150, 150), &prior, &mut RngStream::new(1, 1), |s| {
        sweeps += 1;
        let h = s.theta.params(ANGLE_EPS).unwrap().h().clone();
        assert!(h.as_slice().windows(2).all(|v| v[0] <= v[1]), "{h:?}");
        assert!(s.ext_loglik.is_finite());
    })
    .unwrap();
    assert_eq!(sweeps, 300);
    for t in &draws.theta {
        assert!(log_prior(t, &prior).is_finite());
        let p = t.params(ANGLE_EPS).unwrap();
        assert!(p.is_identified() && p.nu() > 2.0);
        assert!(t.loc_scale.as_ref().unwrap().s.iter().all(|&s| s > 0.0));
        for (k, &v) in t.psi.as_slice().iter().enumerate() {
            let (lo, hi) = AngleSet::bounds_of(k, ANGLE_EPS);
            assert!(v > lo && v < hi);
        }
    }
}

#[test]
fn chains_are_reproducible() {
    let y = dgp1_data(100, 2);
    let cfg = short_cfg(50, 50);
    let run = || run_mcmc(&y, 1, &cfg, &PriorConfig::default(), &mut RngStream::new(4, 1)).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.flattened(), b.flattened());
    assert_eq!(a.ext_loglik, b.ext_loglik);
    assert_eq!(a.loglik, b.loglik);
}

#[test]
fn stored_loglik_is_the_observed_data_likelihood() {
    let y = dgp1_data(60, 3);
    let draws = run_mcmc(&y, 1, &short_cfg(20, 5), &PriorConfig::default(), &mut RngStream::new(1, 1)).unwrap();
    for (t, &ll) in draws.theta.iter().zip(&draws.loglik) {
        let ls = t.loc_scale.as_ref().unwrap();
        let p = t.params(ANGLE_EPS).unwrap();
        let direct: f64 = (0..60)
            .map(|i| log_pdf_location_scale(&y.row(i).iter().copied().collect::<Vec<_>>(), ls, &p).unwrap())
            .sum();
        assert!((ll - direct).abs() < 1e-9 * direct.abs());
    }
}

#[test]
fn degenerate_data_rejected() {
    let cfg = short_cfg(10, 10);
    let mut y = dgp1_data(50, 4);
    y.column_mut(1).fill(3.0);
    assert!(run_mcmc(&y, 1, &cfg, &PriorConfig::default(), &mut RngStream::new(1, 0)).is_err());
    let y = dgp1_data(5, 4);
    assert!(run_mcmc(&y, 1, &cfg, &PriorConfig::default(), &mut RngStream::new(1, 0)).is_err());
    let mut bad = cfg.clone();
    bad.n_keep = 0;
    assert!(run_mcmc(&dgp1_data(50, 4), 1, &bad, &PriorConfig::default(), &mut RngStream::new(1, 0)).is_err());
}

#[test]
fn collapsed_chain_dic() {
    let y = dgp1_data(50, 5);
    let t = theta_of(&dgp1(), Some(LocationScale::new(vec![0.0; 3], vec![1.0; 3]).unwrap()));
    let ll = log_likelihood(&t, &y, ANGLE_EPS).unwrap();
    let draws = PosteriorDraws {
        kind: ModelKind::Distribution,
        d: 3,
        q: 1,
        eps: ANGLE_EPS,
        fixed_nu: None,
        theta: vec![t.clone(); 4],
        ext_loglik: vec![0.0; 4],
        loglik: vec![ll; 4],
        components: vec![],
        acceptance: vec![],
    };
    let r = dic(&draws, &y).unwrap();
    assert!(!r.point.fallback);
    assert!((r.dic + 2.0 * ll).abs() < 1e-8 * ll.abs());
}

#[test]
fn posterior_mean_averages_angles_on_the_logit_scale() {
    let a = corr_to_angles(&DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0])).unwrap();
    let b = corr_to_angles(&DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0])).unwrap();
    let mk = |psi: AngleSet| Theta {
        psi,
        alpha: DMatrix::zeros(2, 0),
        nu: 6.0,
        loc_scale: None,
    };
    let draws = PosteriorDraws {
        kind: ModelKind::Copula,
        d: 2,
        q: 0,
        eps: ANGLE_EPS,
        fixed_nu: None,
        theta: vec![mk(a.clone()), mk(b.clone())],
        ext_loglik: vec![0.0; 2],
        loglik: vec![0.0; 2],
        components: vec![],
        acceptance: vec![],
    };
    let m = posterior_mean(&draws).unwrap();
    let (lo, hi) = AngleSet::bounds_of(0, ANGLE_EPS);
    let logit = |v: f64| ((v - lo) / (hi - v)).ln();
    let expect = 0.5 * (logit(a.as_slice()[0]) + logit(b.as_slice()[0]));
    assert!((logit(m.psi.as_slice()[0]) - expect).abs() < 1e-12);
}
