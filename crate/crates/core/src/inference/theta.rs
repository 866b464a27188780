//! The full parameter point θ = {Ψ, A, ν, μ, s} and its scalar components on
//! unconstrained scales.

use nalgebra::DMatrix;

use crate::error::{Result, TrustError};
use crate::numkernel::angles::{AngleSet, angles_to_corr};
use crate::trust::{identifying_order, LocationScale, TrustParams};

#[derive(Clone, Debug, PartialEq)]
pub struct Theta {
    pub psi: AngleSet,
    /// d×q, columns α_k.
    pub alpha: DMatrix<f64>,
    pub nu: f64,
    /// Absent for copula models.
    pub loc_scale: Option<LocationScale>,
}

/// One scalar coordinate of θ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    /// Index into the angle vector.
    Angle(usize),
    Alpha(usize, usize),
    Nu,
    Mu(usize),
    Scale(usize),
}

impl Component {
    pub fn name(&self) -> String {
        match *self {
            Component::Angle(k) => {
                let (i, j) = AngleSet::index_of(k);
                format!("psi_{}_{}", i + 1, j + 1)
            }
            Component::Alpha(j, k) => format!("alpha_{}_{}", j + 1, k + 1),
            Component::Nu => "nu".to_string(),
            Component::Mu(j) => format!("mu_{}", j + 1),
            Component::Scale(j) => format!("s_{}", j + 1),
        }
    }

    /// True when changing this coordinate changes the TrustParams point.
    pub fn moves_shape(&self) -> bool {
        matches!(self, Component::Angle(_) | Component::Alpha(..) | Component::Nu)
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// ln σ(x) for all x without overflow
fn log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

impl Theta {
    pub fn dim(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn q(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn params(&self, eps: f64) -> Result<TrustParams> {
        TrustParams::new(angles_to_corr(&self.psi, eps)?, self.alpha.clone(), self.nu)
    }

    /// Scalar coordinates in a fixed canonical order.
    pub fn components(&self, nu_free: bool) -> Vec<Component> {
        let (d, q) = (self.dim(), self.q());
        let mut out: Vec<Component> = (0..self.psi.len()).map(Component::Angle).collect();
        for j in 0..d {
            for k in 0..q {
                out.push(Component::Alpha(j, k));
            }
        }
        if nu_free {
            out.push(Component::Nu);
        }
        if self.loc_scale.is_some() {
            out.extend((0..d).map(Component::Mu));
            out.extend((0..d).map(Component::Scale));
        }
        out
    }

    /// Value of a component on its unconstrained scale.
    pub fn get_free(&self, c: Component, eps: f64, nu_shift: f64) -> f64 {
        match c {
            Component::Angle(k) => {
                let (lo, hi) = AngleSet::bounds_of(k, eps);
                let p = (self.psi.as_slice()[k] - lo) / (hi - lo);
                (p / (1.0 - p)).ln()
            }
            Component::Alpha(j, k) => self.alpha[(j, k)],
            Component::Nu => (self.nu - nu_shift).ln(),
            Component::Mu(j) => self.loc_scale.as_ref().expect("location present").mu[j],
            Component::Scale(j) => self.loc_scale.as_ref().expect("scale present").s[j].ln(),
        }
    }

    /// Sets a component from its unconstrained value.
    pub fn set_free(&mut self, c: Component, x: f64, eps: f64, nu_shift: f64) {
        match c {
            Component::Angle(k) => {
                let (lo, hi) = AngleSet::bounds_of(k, eps);
                self.psi.as_mut_slice()[k] = lo + (hi - lo) * logistic(x);
            }
            Component::Alpha(j, k) => self.alpha[(j, k)] = x,
            Component::Nu => self.nu = nu_shift + x.exp(),
            Component::Mu(j) => self.loc_scale.as_mut().expect("location present").mu[j] = x,
            Component::Scale(j) => self.loc_scale.as_mut().expect("scale present").s[j] = x.exp(),
        }
    }

    /// log |dθ_c / dx| at unconstrained value x.
    pub fn log_jacobian(c: Component, x: f64, eps: f64) -> f64 {
        match c {
            Component::Angle(k) => {
                let (lo, hi) = AngleSet::bounds_of(k, eps);
                (hi - lo).ln() + log_sigmoid(x) + log_sigmoid(-x)
            }
            Component::Nu | Component::Scale(_) => x,
            Component::Alpha(..) | Component::Mu(_) => 0.0,
        }
    }

    /// Reorders the latent columns so that θ is identified; returns the
    /// permutation applied (column k of the result is old column perm[k]).
    pub fn identify_with(&mut self, p: &TrustParams) -> Option<Vec<usize>> {
        let perm = identifying_order(p.h());
        if perm.iter().enumerate().all(|(k, &v)| k == v) {
            return None;
        }
        let old = self.alpha.clone();
        for k in 0..self.q() {
            self.alpha.set_column(k, &old.column(perm[k]));
        }
        Some(perm)
    }

    /// Flattened values in the order of `names`.
    pub fn flatten(&self) -> Vec<f64> {
        let (d, q) = (self.dim(), self.q());
        let mut out = self.psi.as_slice().to_vec();
        for j in 0..d {
            for k in 0..q {
                out.push(self.alpha[(j, k)]);
            }
        }
        out.push(self.nu);
        if let Some(ls) = &self.loc_scale {
            out.extend_from_slice(&ls.mu);
            out.extend_from_slice(&ls.s);
        }
        out
    }

    /// Column names matching `flatten`.
    pub fn names(&self) -> Vec<String> {
        let mut c = self.components(true);
        // ν is always written, even when fixed
        if !c.contains(&Component::Nu) {
            c.push(Component::Nu);
        }
        c.iter().map(|c| c.name()).collect()
    }

    /// Inverse of `flatten` for a given shape.
    pub fn unflatten(d: usize, q: usize, with_loc_scale: bool, v: &[f64]) -> Result<Theta> {
        let na = d * (d - 1) / 2;
        let expect = na + d * q + 1 + if with_loc_scale { 2 * d } else { 0 };
        if v.len() != expect {
            return Err(TrustError::validation(format!("expected {expect} values, got {}", v.len())));
        }
        let psi = AngleSet::new(d, v[..na].to_vec())?;
        let alpha = DMatrix::from_fn(d, q, |j, k| v[na + j * q + k]);
        let nu = v[na + d * q];
        let loc_scale = if with_loc_scale {
            let o = na + d * q + 1;
            Some(LocationScale::new(v[o..o + d].to_vec(), v[o + d..o + 2 * d].to_vec())?)
        } else {
            None
        };
        Ok(Theta { psi, alpha, nu, loc_scale })
    }
}
