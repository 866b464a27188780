//! Deviance information criterion and the posterior plug-in point.

use nalgebra::DMatrix;

use super::sampler::PosteriorDraws;
use super::theta::{Component, Theta};
use crate::error::{Result, TrustError};
use crate::trust::LocationScale;

/// Plug-in point used by DIC and log scores.
#[derive(Clone, Debug)]
pub struct PointEstimate {
    pub theta: Theta,
    /// True when the posterior mean was unusable and the best stored draw
    /// was taken instead.
    pub fallback: bool,
}

#[derive(Clone, Debug)]
pub struct DicResult {
    pub dic: f64,
    pub mean_loglik: f64,
    pub plug_in_loglik: f64,
    pub point: PointEstimate,
}

fn permutations(q: usize) -> Vec<Vec<usize>> {
    if q == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(q - 1) {
        for pos in 0..q {
            let mut v = rest.clone();
            v.insert(pos, q - 1);
            out.push(v);
        }
    }
    out
}

/// A's columns reordered to best match `reference` in squared distance.
fn aligned_alpha(alpha: &DMatrix<f64>, reference: &DMatrix<f64>, perms: &[Vec<usize>]) -> DMatrix<f64> {
    let cost = |perm: &[usize]| -> f64 {
        perm.iter()
            .enumerate()
            .map(|(k, &src)| (alpha.column(src) - reference.column(k)).norm_squared())
            .sum()
    };
    let best = perms
        .iter()
        .min_by(|a, b| cost(a).total_cmp(&cost(b)))
        .expect("at least the identity permutation");
    DMatrix::from_fn(alpha.nrows(), alpha.ncols(), |j, k| alpha[(j, best[k])])
}

/// Posterior mean, with angles averaged on their logit scale and the latent
/// columns put into identified order.
///
/// When two h values are close the ordering constraint splits the posterior
/// and stored draws switch labels; A's columns are therefore matched to the
/// highest-likelihood draw before averaging. Without switching this is the
/// element-wise mean.
pub fn posterior_mean(draws: &PosteriorDraws) -> Result<Theta> {
    let first = draws.theta.first().ok_or_else(|| TrustError::validation("no stored draws"))?;
    let n = draws.len() as f64;
    let eps = draws.eps;
    let best = draws
        .loglik
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    let reference = &draws.theta[best].alpha;
    let perms = permutations(first.q());
    let mut out = first.clone();
    for k in 0..first.psi.len() {
        let c = Component::Angle(k);
        let m = draws.theta.iter().map(|t| t.get_free(c, eps, 0.0)).sum::<f64>() / n;
        out.set_free(c, m, eps, 0.0);
    }
    out.alpha = draws
        .theta
        .iter()
        .fold(DMatrix::zeros(first.dim(), first.q()), |acc, t| acc + aligned_alpha(&t.alpha, reference, &perms))
        / n;
    out.nu = match draws.fixed_nu {
        Some(nu) => nu,
        None => draws.theta.iter().map(|t| t.nu).sum::<f64>() / n,
    };
    if first.loc_scale.is_some() {
        let d = first.dim();
        let mut mu = vec![0.0; d];
        let mut s = vec![0.0; d];
        for t in &draws.theta {
            let ls = t.loc_scale.as_ref().expect("every draw of a distribution fit has μ, s");
            for j in 0..d {
                mu[j] += ls.mu[j] / n;
                s[j] += ls.s[j] / n;
            }
        }
        out.loc_scale = Some(LocationScale::new(mu, s)?);
    }
    let p = out.params(eps)?;
    out.identify_with(&p);
    Ok(out)
}

/// DIC = −4·E[log p(y|θ)] + 2·log p(y|θ̂), with `loglik` evaluating log p(y|θ).
pub fn dic_with(draws: &PosteriorDraws, loglik: impl Fn(&Theta) -> Result<f64>) -> Result<DicResult> {
    if draws.is_empty() {
        return Err(TrustError::validation("no stored draws"));
    }
    let mean_loglik = draws.loglik.iter().sum::<f64>() / draws.len() as f64;
    let plug = posterior_mean(draws).and_then(|t| loglik(&t).map(|ll| (t, ll)));
    let (point, plug_in_loglik) = match plug {
        Ok((theta, ll)) if ll.is_finite() => (PointEstimate { theta, fallback: false }, ll),
        _ => {
            let (i, ll) = draws
                .loglik
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
            (
                PointEstimate {
                    theta: draws.theta[i].clone(),
                    fallback: true,
                },
                ll,
            )
        }
    };
    Ok(DicResult {
        dic: -4.0 * mean_loglik + 2.0 * plug_in_loglik,
        mean_loglik,
        plug_in_loglik,
        point,
    })
}

/// DIC of a distribution fit on data y.
pub fn dic(draws: &PosteriorDraws, y: &DMatrix<f64>) -> Result<DicResult> {
    dic_with(draws, |t| super::distribution::log_likelihood(t, y, draws.eps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_are_complete() {
        assert_eq!(permutations(0).len(), 1);
        let mut p = permutations(3);
        assert_eq!(p.len(), 6);
        p.sort();
        p.dedup();
        assert_eq!(p.len(), 6);
    }

    #[test]
    fn alignment_undoes_a_column_swap() {
        let r = DMatrix::from_row_slice(2, 2, &[5.0, -10.0, 3.0, 0.0]);
        let swapped = DMatrix::from_row_slice(2, 2, &[-10.0, 5.0, 0.0, 3.0]);
        assert_eq!(aligned_alpha(&swapped, &r, &permutations(2)), r);
        assert_eq!(aligned_alpha(&r, &r, &permutations(2)), r);
    }
}
