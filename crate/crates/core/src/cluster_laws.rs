//! Laws of the cluster geometry.
//!
//! A cluster that starts at a point `A` ends at `E = last point + epsilon`; its
//! length is `B = E - A`. The gap to the next cluster start is exponential with
//! rate `lambda`, independent of `B`, so the start-to-start distance is
//! `ΔA = B + D` and `U_n = ΔA_1 + ... + ΔA_n`.
//!
//! `B` is not absolutely continuous: a cluster made of a single point has
//! length exactly `epsilon`, which happens with probability `exp(-lambda eps)`.
//! [`MixedLaw`] carries that atom next to the density.

use std::sync::Arc;

use crate::component_counts::{cluster_count_prob, cluster_count_prob_derivative};
use crate::error::Result;
use crate::model::ModelParams;
use crate::quadrature::{integrate, lattice_points};

const CDF_TOL: f64 = 1e-10;
const CDF_MAX_PANELS: usize = 4000;

/// `E[exp(-s B)] = (lambda + s) / (lambda + s exp((lambda + s) eps))`.
pub fn laplace_b(params: &ModelParams, s: f64) -> f64 {
    let (lambda, eps) = (params.lambda(), params.epsilon());
    let grow = ((lambda + s) * eps).exp();
    if grow.is_infinite() {
        // s e^{(λ+s)ε} dominates: (λ+s)/s · e^{-(λ+s)ε}
        return (lambda + s) / s * (-(lambda + s) * eps).exp();
    }
    (lambda + s) / (lambda + s * grow)
}

/// `E[exp(-s ΔA)] = lambda / (lambda + s exp((lambda + s) eps))`.
pub fn laplace_delta_a(params: &ModelParams, s: f64) -> f64 {
    let (lambda, eps) = (params.lambda(), params.epsilon());
    let grow = ((lambda + s) * eps).exp();
    if grow.is_infinite() {
        return lambda / s * (-(lambda + s) * eps).exp();
    }
    lambda / (lambda + s * grow)
}

/// `E[exp(-s U_n)]`; `U_0 = 0` so `n = 0` gives 1.
pub fn laplace_u(params: &ModelParams, n: usize, s: f64) -> f64 {
    laplace_delta_a(params, s).powi(n as i32)
}

/// Mean cluster length, `(exp(lambda eps) - 1) / lambda`.
pub fn mean_b(params: &ModelParams) -> f64 {
    let x = params.lambda() * params.epsilon();
    x.exp_m1() / params.lambda()
}

/// A law on the real line made of one atom plus a density.
#[derive(Clone)]
pub struct MixedLaw {
    pub atom_location: f64,
    pub atom_mass: f64,
    pub support_lower: f64,
    density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Spacing of the points where the density may jump or kink.
    kink_step: f64,
}

impl std::fmt::Debug for MixedLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MixedLaw")
            .field("atom_location", &self.atom_location)
            .field("atom_mass", &self.atom_mass)
            .field("support_lower", &self.support_lower)
            .finish_non_exhaustive()
    }
}

impl MixedLaw {
    pub fn density(&self, x: f64) -> f64 {
        if x < self.support_lower {
            0.0
        } else {
            (self.density)(x)
        }
    }

    /// `∫_{support_lower}^{x} density`.
    pub fn density_mass(&self, x: f64) -> Result<f64> {
        self.density_mass_between(self.support_lower, x)
    }

    fn density_mass_between(&self, a: f64, b: f64) -> Result<f64> {
        let a = a.max(self.support_lower);
        if b <= a {
            return Ok(0.0);
        }
        let cuts = lattice_points(self.kink_step, a, b);
        Ok(integrate(|t| self.density(t), a, b, &cuts, CDF_TOL, CDF_MAX_PANELS)?.value)
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        let atom = if x >= self.atom_location { self.atom_mass } else { 0.0 };
        Ok(atom + self.density_mass(x)?)
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> Result<f64> {
        let atom = if x > self.atom_location { self.atom_mass } else { 0.0 };
        Ok(atom + self.density_mass(x)?)
    }

    /// `P(X >= t)`, computed as one minus the mass below `t` so that only a
    /// finite range is ever integrated.
    pub fn survival(&self, t: f64) -> Result<f64> {
        Ok(1.0 - self.cdf_left(t)?)
    }

    /// CDF at every point of an ascending slice, integrating each gap once.
    pub fn cdf_sorted(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        let mut prev = self.support_lower;
        for &x in xs {
            if x > prev {
                acc += self.density_mass_between(prev, x)?;
                prev = x;
            }
            let atom = if x >= self.atom_location { self.atom_mass } else { 0.0 };
            out.push(atom + acc);
        }
        Ok(out)
    }
}

/// Law of the cluster length `B`: atom `exp(-lambda eps)` at `eps`, and for
/// `x > eps` the density
/// `lambda e^{-lambda eps} p_0(x - eps) + e^{-lambda eps} p_0'(x - eps)`.
pub fn law_b(params: &ModelParams) -> MixedLaw {
    let p = *params;
    let eps = p.epsilon();
    let isolated = p.isolation_prob();
    let rate = p.closing_rate();
    MixedLaw {
        atom_location: eps,
        atom_mass: isolated,
        support_lower: eps,
        density: Arc::new(move |x| {
            // right limit at eps, next to the atom
            if x < eps {
                return 0.0;
            }
            let y = x - eps;
            rate * cluster_count_prob(&p, y, 0).raw
                + isolated * cluster_count_prob_derivative(&p, y, 0)
        }),
        kink_step: eps,
    }
}

/// Density of `U_n`: `lambda e^{-lambda eps} p_{n-1}(x - eps)` for `x > eps`.
pub fn density_u(params: &ModelParams, n: usize, x: f64) -> f64 {
    if n == 0 || x <= params.epsilon() {
        return 0.0;
    }
    params.closing_rate() * cluster_count_prob(params, x - params.epsilon(), n - 1).raw
}

/// Law of `U_n` as a [`MixedLaw`] with no atom.
pub fn law_u(params: &ModelParams, n: usize) -> MixedLaw {
    let p = *params;
    MixedLaw {
        atom_location: p.epsilon(),
        atom_mass: 0.0,
        support_lower: p.epsilon(),
        density: Arc::new(move |x| density_u(&p, n, x)),
        kink_step: p.epsilon(),
    }
}

/// Upper cut for normalization integrals: `eps + 20 * mean_B`.
pub fn truncation_point(params: &ModelParams) -> f64 {
    params.epsilon() + 20.0 * mean_b(params)
}
