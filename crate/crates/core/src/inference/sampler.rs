//! Data-augmentation sampler shared by the distribution and copula models.
//!
//! Each sweep draws L | W, θ, then W | L, θ, then updates every scalar
//! component of θ once, in random order, by adaptive random-walk Metropolis
//! on its unconstrained scale. After an accepted move of Ψ or A the latent
//! columns are relabeled so that h stays ascending: A's columns, L's columns
//! and the adaptive step sizes are permuted together, which leaves the
//! extended likelihood unchanged.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use super::config::{McmcConfig, PriorConfig};
use super::gibbs::{step1_sample_l, step2_sample_w};
use super::likelihood::{log_extended_core, log_prior_unordered, ExtendedTerms, LatentState};
use super::theta::{Component, Theta};
use crate::error::{Result, TrustError};
use crate::numkernel::angles::corr_to_angles_eps;
use crate::numkernel::samplers::sample_std_normal;
use crate::numkernel::RngStream;
use crate::trust::{LocationScale, TrustParams};

const INIT_ATTEMPTS: usize = 200;
const LOG_STEP_RANGE: (f64, f64) = (-12.0, 3.0);

/// Which model a chain was run for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Distribution,
    Copula,
}

/// Data mapped to the standardized scale at a given θ.
#[derive(Clone, Debug)]
pub struct Transformed {
    /// n×d standardized observations.
    pub z: DMatrix<f64>,
    /// log Jacobian of the map from the data to z, summed over rows.
    pub log_jac: f64,
}

/// A model the sampler can run on.
pub trait AugmentedTarget {
    fn kind(&self) -> ModelKind;
    fn n(&self) -> usize;
    fn d(&self) -> usize;
    /// Starting correlation matrix and location-scale (None for copulas).
    fn initial_guess(&self) -> Result<(DMatrix<f64>, Option<LocationScale>)>;
    fn transform(&self, theta: &Theta, p: &TrustParams) -> Result<Transformed>;
    /// Whether moving component c changes the transformed data.
    fn transform_depends_on(&self, c: Component) -> bool;
    /// Observed-data log likelihood (for DIC), given the transform at θ.
    fn exact_loglik(&self, theta: &Theta, p: &TrustParams, tr: &Transformed) -> Result<f64>;
}

/// Per-component random-walk scales with Robbins–Monro adaptation.
#[derive(Clone, Debug)]
pub struct AdaptState {
    pub components: Vec<Component>,
    pub log_step: Vec<f64>,
    pub accepted: Vec<u64>,
    pub proposed: Vec<u64>,
    pub target: f64,
    pub window: f64,
    pub sweeps: u64,
    pub adapting: bool,
}

impl AdaptState {
    pub fn new(theta: &Theta, nu_free: bool, target: f64, window: usize) -> Self {
        let components = theta.components(nu_free);
        let log_step = components
            .iter()
            .map(|c| match c {
                Component::Angle(_) => 0.1f64.ln(),
                Component::Alpha(..) => 0.3f64.ln(),
                Component::Nu => 0.1f64.ln(),
                Component::Mu(j) => (0.05 * theta.loc_scale.as_ref().map_or(1.0, |ls| ls.s[*j])).ln(),
                Component::Scale(_) => 0.03f64.ln(),
            })
            .collect();
        let m = components.len();
        AdaptState {
            components,
            log_step,
            accepted: vec![0; m],
            proposed: vec![0; m],
            target,
            window: window as f64,
            sweeps: 0,
            adapting: true,
        }
    }

    fn gain(&self) -> f64 {
        (1.0 + self.sweeps as f64 / self.window).powf(-0.6)
    }

    fn record(&mut self, idx: usize, accepted: bool) {
        self.proposed[idx] += 1;
        if accepted {
            self.accepted[idx] += 1;
        }
        if self.adapting {
            let a = if accepted { 1.0 } else { 0.0 };
            let v = self.log_step[idx] + self.gain() * (a - self.target);
            self.log_step[idx] = v.clamp(LOG_STEP_RANGE.0, LOG_STEP_RANGE.1);
        }
    }

    /// Carries the A-column bookkeeping along with a column permutation.
    fn permute_alpha(&mut self, perm: &[usize]) {
        let pos = |c: Component| self.components.iter().position(|&x| x == c);
        let mut steps = self.log_step.clone();
        let mut acc = self.accepted.clone();
        let mut prop = self.proposed.clone();
        for (idx, &c) in self.components.iter().enumerate() {
            if let Component::Alpha(j, k) = c {
                let src = pos(Component::Alpha(j, perm[k])).expect("every A entry is a component");
                steps[idx] = self.log_step[src];
                acc[idx] = self.accepted[src];
                prop[idx] = self.proposed[src];
            }
        }
        self.log_step = steps;
        self.accepted = acc;
        self.proposed = prop;
    }

    /// Restarts the acceptance counters (at the end of burn-in).
    fn reset_counts(&mut self) {
        self.accepted.iter_mut().for_each(|v| *v = 0);
        self.proposed.iter_mut().for_each(|v| *v = 0);
    }

    pub fn acceptance_rates(&self) -> Vec<f64> {
        self.accepted
            .iter()
            .zip(&self.proposed)
            .map(|(&a, &p)| if p > 0 { a as f64 / p as f64 } else { 0.0 })
            .collect()
    }
}

/// Current state of a chain.
pub struct ChainState {
    pub theta: Theta,
    pub params: TrustParams,
    pub transformed: Transformed,
    pub latents: LatentState,
    terms: ExtendedTerms,
    /// Extended log likelihood: core terms plus the log Jacobian.
    pub ext_loglik: f64,
    log_prior: f64,
}

impl ChainState {
    /// State at θ with given latents; θ must already be identified.
    pub fn new<T: AugmentedTarget>(target: &T, theta: Theta, latents: LatentState, prior: &PriorConfig, nu_free: bool) -> Result<Self> {
        let params = theta.params(prior.eps)?;
        let transformed = target.transform(&theta, &params)?;
        if transformed.z.nrows() != latents.n() || latents.l.ncols() != params.q() {
            return Err(TrustError::domain("latents disagree with the data or q"));
        }
        let terms = ExtendedTerms::new(&params);
        let mut state = ChainState {
            log_prior: log_prior_unordered(&theta, prior, nu_free),
            theta,
            params,
            transformed,
            latents,
            terms,
            ext_loglik: 0.0,
        };
        state.refresh_loglik();
        Ok(state)
    }

    fn core(&self) -> f64 {
        log_extended_core(&self.params, &self.terms, &self.transformed.z, &self.latents)
    }

    fn refresh_loglik(&mut self) {
        self.ext_loglik = self.core() + self.transformed.log_jac;
    }
}

/// Stored output of a chain.
#[derive(Clone, Debug)]
pub struct PosteriorDraws {
    pub kind: ModelKind,
    pub d: usize,
    pub q: usize,
    pub eps: f64,
    pub fixed_nu: Option<f64>,
    pub theta: Vec<Theta>,
    pub ext_loglik: Vec<f64>,
    /// Observed-data log likelihood of each stored draw.
    pub loglik: Vec<f64>,
    /// Component names and their post-burn-in acceptance rates.
    pub components: Vec<String>,
    pub acceptance: Vec<f64>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Column names of `flattened`.
    pub fn names(&self) -> Vec<String> {
        self.theta.first().map(|t| t.names()).unwrap_or_default()
    }

    pub fn flattened(&self) -> Vec<Vec<f64>> {
        self.theta.iter().map(|t| t.flatten()).collect()
    }

    /// Posterior mean and standard deviation of each flattened column.
    pub fn mean_sd(&self) -> (Vec<f64>, Vec<f64>) {
        let rows = self.flattened();
        let m = rows.first().map_or(0, |r| r.len());
        let n = rows.len() as f64;
        let mut mean = vec![0.0; m];
        for r in &rows {
            for (a, v) in mean.iter_mut().zip(r) {
                *a += v / n;
            }
        }
        let mut sd = vec![0.0; m];
        for r in &rows {
            for ((s, v), mu) in sd.iter_mut().zip(r).zip(&mean) {
                *s += (v - mu) * (v - mu);
            }
        }
        let denom = (n - 1.0).max(1.0);
        sd.iter_mut().for_each(|s| *s = (*s / denom).sqrt());
        (mean, sd)
    }
}

fn proposal_state<T: AugmentedTarget>(
    target: &T,
    state: &ChainState,
    theta: Theta,
    c: Component,
    eps: f64,
) -> Result<(TrustParams, Option<Transformed>)> {
    let params = if c.moves_shape() { theta.params(eps)? } else { state.params.clone() };
    let tr = if target.transform_depends_on(c) {
        Some(target.transform(&theta, &params)?)
    } else {
        None
    };
    Ok((params, tr))
}

/// One sweep of Step 3 over all components of θ.
pub fn step3_sweep<T: AugmentedTarget>(
    target: &T,
    state: &mut ChainState,
    prior: &PriorConfig,
    nu_free: bool,
    adapt: &mut AdaptState,
    rng: &mut RngStream,
) -> Result<()> {
    let eps = prior.eps;
    let shift = prior.nu_shift;
    let mut order: Vec<usize> = (0..adapt.components.len()).collect();
    order.shuffle(rng);
    for idx in order {
        let c = adapt.components[idx];
        let x = state.theta.get_free(c, eps, shift);
        let xn = x + adapt.log_step[idx].exp() * sample_std_normal(rng);
        let mut theta = state.theta.clone();
        theta.set_free(c, xn, eps, shift);
        let lp = log_prior_unordered(&theta, prior, nu_free);
        let mut accepted = false;
        if lp.is_finite() {
            match proposal_state(target, state, theta.clone(), c, eps) {
                Ok((params, tr)) => {
                    let terms = ExtendedTerms::new(&params);
                    let tr_ref = tr.as_ref().unwrap_or(&state.transformed);
                    let ll = log_extended_core(&params, &terms, &tr_ref.z, &state.latents) + tr_ref.log_jac;
                    let log_ratio = ll + lp + Theta::log_jacobian(c, xn, eps)
                        - state.ext_loglik
                        - state.log_prior
                        - Theta::log_jacobian(c, x, eps);
                    if ll.is_finite() && (log_ratio >= 0.0 || rng.open01().ln() < log_ratio) {
                        accepted = true;
                        state.theta = theta;
                        state.params = params;
                        state.terms = terms;
                        if let Some(t) = tr {
                            state.transformed = t;
                        }
                        state.ext_loglik = ll;
                        state.log_prior = lp;
                    }
                }
                Err(e) if e.is_rejection() || matches!(e, TrustError::Numeric(_)) => {}
                Err(e) => return Err(e),
            }
        }
        adapt.record(idx, accepted);
        if accepted && matches!(c, Component::Angle(_) | Component::Alpha(..)) {
            relabel(state, adapt)?;
        }
    }
    adapt.sweeps += 1;
    Ok(())
}

// Permutes the latent columns into ascending-h order.
fn relabel(state: &mut ChainState, adapt: &mut AdaptState) -> Result<()> {
    let params = state.params.clone();
    if let Some(perm) = state.theta.identify_with(&params) {
        state.params = params.permute(&perm)?;
        state.latents.permute_columns(&perm);
        adapt.permute_alpha(&perm);
        state.terms = ExtendedTerms::new(&state.params);
    }
    Ok(())
}

/// Steps 1 and 2: refresh L then W at the current θ.
pub fn gibbs_latents(state: &mut ChainState, rng: &mut RngStream) -> Result<()> {
    let l = step1_sample_l(&state.params, &state.latents.w, &state.transformed.z, rng)?;
    let w = step2_sample_w(&state.params, &l, &state.transformed.z, rng)?;
    state.latents = LatentState { l, w };
    state.refresh_loglik();
    Ok(())
}

fn shrunk_angles(corr: &DMatrix<f64>, eps: f64) -> Result<crate::numkernel::angles::AngleSet> {
    let d = corr.nrows();
    let mut shrink = 0.1;
    loop {
        let m = corr * (1.0 - shrink) + DMatrix::identity(d, d) * shrink;
        match corr_to_angles_eps(&m, eps) {
            Ok(a) => return Ok(a),
            Err(_) if shrink < 0.9 => shrink += 0.1,
            Err(e) => return Err(TrustError::Initialization(format!("no valid starting correlation: {e}"))),
        }
    }
}

/// A valid starting state: moment-based location-scale and correlation,
/// A near zero, ν = 10 unless fixed, and latents from one pass of Steps 1–2.
pub fn initial_state<T: AugmentedTarget>(
    target: &T,
    q: usize,
    prior: &PriorConfig,
    fix_nu: Option<f64>,
    rng: &mut RngStream,
) -> Result<ChainState> {
    let (corr, loc_scale) = target.initial_guess()?;
    let psi = shrunk_angles(&corr, prior.eps)?;
    let d = target.d();
    let n = target.n();
    let mut last = None;
    for _ in 0..INIT_ATTEMPTS {
        let alpha = DMatrix::from_fn(d, q, |_, _| 0.1 * sample_std_normal(rng));
        let mut theta = Theta {
            psi: psi.clone(),
            alpha,
            nu: fix_nu.unwrap_or(10.0),
            loc_scale: loc_scale.clone(),
        };
        let attempt = (|| -> Result<ChainState> {
            let p0 = theta.params(prior.eps)?;
            theta.identify_with(&p0);
            let latents = LatentState {
                l: DMatrix::from_element(n, q, 1.0),
                w: DVector::from_element(n, 1.0),
            };
            let mut state = ChainState::new(target, theta, latents, prior, fix_nu.is_none())?;
            gibbs_latents(&mut state, rng)?;
            if !(state.ext_loglik.is_finite() && state.log_prior.is_finite()) {
                return Err(TrustError::numeric("non-finite starting posterior"));
            }
            Ok(state)
        })();
        match attempt {
            Ok(s) => return Ok(s),
            Err(e) => last = Some(e),
        }
    }
    Err(TrustError::Initialization(format!(
        "no valid starting point after {INIT_ATTEMPTS} attempts: {}",
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Runs the data-augmentation sampler on any target.
pub fn run_chain<T: AugmentedTarget>(
    target: &T,
    q: usize,
    cfg: &McmcConfig,
    prior: &PriorConfig,
    rng: &mut RngStream,
    mut on_sweep: impl FnMut(&ChainState),
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    prior.validate()?;
    let nu_free = cfg.fix_nu.is_none();
    let mut state = initial_state(target, q, prior, cfg.fix_nu, rng)?;
    let mut adapt = AdaptState::new(&state.theta, nu_free, cfg.target_acceptance, cfg.adapt_window);
    let mut out = PosteriorDraws {
        kind: target.kind(),
        d: target.d(),
        q,
        eps: prior.eps,
        fixed_nu: cfg.fix_nu,
        theta: Vec::with_capacity(cfg.n_keep),
        ext_loglik: Vec::with_capacity(cfg.n_keep),
        loglik: Vec::with_capacity(cfg.n_keep),
        components: adapt.components.iter().map(|c| c.name()).collect(),
        acceptance: Vec::new(),
    };
    for sweep in 0..cfg.total_sweeps() {
        if sweep == cfg.n_burn {
            adapt.adapting = false;
            adapt.reset_counts();
        }
        gibbs_latents(&mut state, rng)?;
        step3_sweep(target, &mut state, prior, nu_free, &mut adapt, rng)?;
        on_sweep(&state);
        if sweep >= cfg.n_burn && (sweep - cfg.n_burn + 1) % cfg.thin == 0 {
            out.theta.push(state.theta.clone());
            out.ext_loglik.push(state.ext_loglik);
            out.loglik.push(target.exact_loglik(&state.theta, &state.params, &state.transformed)?);
        }
    }
    out.acceptance = adapt.acceptance_rates();
    Ok(out)
}
