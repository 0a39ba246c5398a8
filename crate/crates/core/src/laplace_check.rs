//! Forward Laplace transforms by quadrature, used to check the closed-form
//! transforms of the cluster-count probabilities and their moments.
//!
//! Only forward transforms are computed; nothing here inverts a transform.

use serde::Serialize;

use crate::cluster_laws::{laplace_b, law_b, truncation_point, MixedLaw};
use crate::component_counts::{cluster_count_prob, moment_beta0};
use crate::error::{Error, Result};
use crate::model::{IntervalModel, ModelParams};
use crate::quadrature::{integrate, lattice_points};
use crate::special_fn::polylog_neg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    /// Integration stops here; the remainder is bounded analytically.
    pub upper_cut: f64,
    pub max_refinements: usize,
    /// Spacing of known kinks of the integrand, if any.
    pub kink_step: Option<f64>,
}

impl QuadratureSpec {
    pub fn new(upper_cut: f64) -> Result<Self> {
        if !(upper_cut > 0.0) {
            return Err(Error::InvalidParameter {
                name: "upper_cut",
                reason: format!("must be > 0, got {upper_cut}"),
            });
        }
        Ok(Self {
            abs_tol: 1e-10,
            upper_cut,
            max_refinements: 5000,
            kink_step: None,
        })
    }

    /// Default for `p_n`: `(n + 1) eps + 40 / min(s, lambda)`, split at the
    /// lattice `k eps`.
    pub fn for_cluster_count(params: &ModelParams, n: usize, s: f64) -> Self {
        let eps = params.epsilon();
        Self {
            abs_tol: 1e-10,
            upper_cut: (n + 1) as f64 * eps + 40.0 / s.min(params.lambda()),
            max_refinements: 5000,
            kink_step: Some(eps),
        }
    }

    pub fn with_kinks(mut self, step: f64) -> Self {
        self.kink_step = Some(step);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumericTransform {
    pub value: f64,
    pub quadrature_error: f64,
    /// `sup|f| e^{-s U} / s`, the largest the truncated remainder can be when
    /// `f` stays bounded by what was seen on `[0, U]`.
    pub tail_bound: f64,
}

impl NumericTransform {
    pub fn error_budget(&self) -> f64 {
        self.quadrature_error + self.tail_bound
    }
}

/// `∫_0^U e^{-s x} f(x) dx` by adaptive Gauss–Kronrod.
pub fn numeric_laplace<F: Fn(f64) -> f64>(
    f: F,
    s: f64,
    spec: &QuadratureSpec,
) -> Result<NumericTransform> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("transform variable must be > 0, got {s}")));
    }
    let cuts = spec
        .kink_step
        .map(|step| lattice_points(step, 0.0, spec.upper_cut))
        .unwrap_or_default();
    let r = integrate(
        |x| (-s * x).exp() * f(x),
        0.0,
        spec.upper_cut,
        &cuts,
        spec.abs_tol,
        spec.max_refinements,
    )?;
    // max_abs saw e^{-sx} f(x); the bound needs sup|f|, which the nodes also give
    // after undoing the weight at the far end only when f is monotone, so
    // evaluate it directly at the cut as well.
    let sup = r.max_abs.max(f(spec.upper_cut).abs());
    Ok(NumericTransform {
        value: r.value,
        quadrature_error: r.error_estimate,
        tail_bound: sup * (-s * spec.upper_cut).exp() / s,
    })
}

/// Transform of a mixed law: `atom e^{-s x0} + ∫ e^{-s x} density`.
pub fn numeric_laplace_law(law: &MixedLaw, s: f64, spec: &QuadratureSpec) -> Result<NumericTransform> {
    let t = numeric_laplace(|x| law.density(x), s, spec)?;
    Ok(NumericTransform {
        value: t.value + law.atom_mass * (-s * law.atom_location).exp(),
        ..t
    })
}

/// Closed transform of `p_n`:
/// `lambda^n e^{(lambda+s) eps} / (s e^{(lambda+s) eps} + lambda)^{n+1}`.
pub fn laplace_pn_closed(params: &ModelParams, n: usize, s: f64) -> f64 {
    let (lambda, eps) = (params.lambda(), params.epsilon());
    // divide through by e^{(λ+s)ε (n+1)} to stay finite for large s
    let shrink = (-(lambda + s) * eps).exp();
    (lambda * shrink).powi(n as i32) / (s + lambda * shrink).powi(n as i32 + 1)
}

/// The same transform written with `a = e^{lambda eps} / lambda`:
/// `a e^{eps s} / (a s e^{eps s} + 1)^{n+1}`.
pub fn laplace_pair_closed(params: &ModelParams, n: usize, s: f64) -> f64 {
    let a = (params.lambda() * params.epsilon()).exp() / params.lambda();
    let g = (params.epsilon() * s).exp();
    a * g / (a * s * g + 1.0).powi(n as i32 + 1)
}

/// Closed transform of `x -> E[beta0(x)^m]`:
/// `alpha / (s (alpha + 1)) Li_{-m}(1 / (alpha + 1))` with
/// `alpha = e^{eps lambda} s e^{eps s} / lambda`.
pub fn laplace_moment_closed(params: &ModelParams, m: usize, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("transform variable must be > 0, got {s}")));
    }
    let (lambda, eps) = (params.lambda(), params.epsilon());
    let alpha = (eps * lambda).exp() / lambda * s * (eps * s).exp();
    if alpha.is_infinite() {
        return Ok(0.0);
    }
    Ok(alpha / (s * (alpha + 1.0)) * polylog_neg(m, 1.0 / (alpha + 1.0))?)
}

/// `x -> E[beta0(x)^m]`, zero for `x <= 0`.
pub fn moment_curve(params: &ModelParams, m: usize, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    moment_beta0(&IntervalModel::new(*params, x)?, m)
}

/// One closed-versus-quadrature comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    /// `p_n`, `moment` or `B`.
    pub quantity: &'static str,
    /// `n` for `p_n`, `m` for moments, 0 for `B`.
    pub index: usize,
    pub s: f64,
    pub closed: f64,
    pub numeric: f64,
    pub residual: f64,
}

/// Transform of `p_n` both ways.
pub fn check_pn(params: &ModelParams, n: usize, s: f64) -> Result<Residual> {
    let spec = QuadratureSpec::for_cluster_count(params, n, s);
    let numeric = numeric_laplace(|x| cluster_count_prob(params, x, n).value, s, &spec)?;
    let closed = laplace_pn_closed(params, n, s);
    Ok(Residual {
        quantity: "p_n",
        index: n,
        s,
        closed,
        numeric: numeric.value,
        residual: closed - numeric.value,
    })
}

/// Transform of the `m`-th moment curve both ways.
pub fn check_moment(params: &ModelParams, m: usize, s: f64) -> Result<Residual> {
    let eps = params.epsilon();
    let spec = QuadratureSpec::new((m + 1) as f64 * eps + 40.0 / s.min(params.lambda()))?
        .with_kinks(eps);
    let f = |x: f64| moment_curve(params, m, x).unwrap_or(f64::NAN);
    let numeric = numeric_laplace(f, s, &spec)?;
    let closed = laplace_moment_closed(params, m, s)?;
    Ok(Residual {
        quantity: "moment",
        index: m,
        s,
        closed,
        numeric: numeric.value,
        residual: closed - numeric.value,
    })
}

/// `E[e^{-sB}]` from the closed transform and from the mixed law.
pub fn check_cluster_length(params: &ModelParams, s: f64) -> Result<Residual> {
    let law = law_b(params);
    let spec = QuadratureSpec::new(truncation_point(params))?.with_kinks(params.epsilon());
    let numeric = numeric_laplace_law(&law, s, &spec)?;
    let closed = laplace_b(params, s);
    Ok(Residual {
        quantity: "B",
        index: 0,
        s,
        closed,
        numeric: numeric.value,
        residual: closed - numeric.value,
    })
}

/// Residuals for `p_n` (`n` in `counts`), moments `1..=max_moment` and `B`
/// at every `s`.
pub fn residual_table(
    params: &ModelParams,
    counts: &[usize],
    max_moment: usize,
    s_values: &[f64],
) -> Result<Vec<Residual>> {
    let mut rows = Vec::new();
    for &s in s_values {
        for &n in counts {
            rows.push(check_pn(params, n, s)?);
        }
        for m in 1..=max_moment {
            rows.push(check_moment(params, m, s)?);
        }
        rows.push(check_cluster_length(params, s)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l: f64, e: f64) -> ModelParams {
        ModelParams::new(l, e).unwrap()
    }

    #[test]
    fn elementary_transforms() {
        let spec = QuadratureSpec::new(60.0).unwrap();
        let t = numeric_laplace(|x: f64| (-x).exp(), 1.0, &spec).unwrap();
        assert!((t.value - 0.5).abs() < 1e-10);
        let t = numeric_laplace(|_| 1.0, 2.0, &spec).unwrap();
        assert!((t.value - 0.5).abs() < 1e-10);
        assert!(t.tail_bound < 1e-40);
        assert!(numeric_laplace(|_| 1.0, 0.0, &spec).is_err());
        assert!(QuadratureSpec::new(0.0).is_err());
    }

    #[test]
    fn refinement_budget_error() {
        let spec = QuadratureSpec {
            abs_tol: 1e-15,
            upper_cut: 50.0,
            max_refinements: 3,
            kink_step: None,
        };
        let err = numeric_laplace(|x: f64| (7.0 * x).sin().abs(), 0.1, &spec).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn linearity() {
        let spec = QuadratureSpec::new(40.0).unwrap().with_kinks(1.0);
        let p = params(1.0, 1.0);
        let f = |x: f64| cluster_count_prob(&p, x, 1).value;
        let g = |x: f64| (x / 3.0).cos();
        let (a, b) = (0.7, -2.5);
        let tf = numeric_laplace(f, 1.3, &spec).unwrap().value;
        let tg = numeric_laplace(g, 1.3, &spec).unwrap().value;
        let tc = numeric_laplace(|x| a * f(x) + b * g(x), 1.3, &spec).unwrap().value;
        assert!((tc - (a * tf + b * tg)).abs() < 2e-10);
    }

    #[test]
    fn p0_transform_example() {
        let p = params(1.0, 1.0);
        let e2 = 1f64.exp().powi(2);
        let want = e2 / (e2 + 1.0);
        assert!((laplace_pn_closed(&p, 0, 1.0) - want).abs() < 1e-15);
        assert!((laplace_pn_closed(&p, 0, 1.0) - 0.880797).abs() < 1e-6);
        let r = check_pn(&p, 0, 1.0).unwrap();
        assert!((r.numeric - want).abs() < 1e-9);
    }

    #[test]
    fn pn_closed_limits() {
        let p = params(1.0, 1.0);
        let s = 1e3;
        assert!(((laplace_pn_closed(&p, 0, s) * s) - 1.0).abs() < 0.01);
        let total: f64 = (0..=40).map(|n| laplace_pn_closed(&p, n, 1.0)).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pair_form_agrees() {
        for (l, e) in [(1.0, 1.0), (2.0, 0.5), (0.3, 2.0)] {
            let p = params(l, e);
            for n in 0..4 {
                for s in [0.5, 1.0, 2.0] {
                    let a = laplace_pn_closed(&p, n, s);
                    let b = laplace_pair_closed(&p, n, s);
                    assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
                }
            }
        }
    }

    #[test]
    fn moment_transform_examples() {
        let p = params(1.0, 1.0);
        let r = check_moment(&p, 1, 1.0).unwrap();
        assert!(r.residual.abs() < 1e-7, "{r:?}");
        // the mean curve is (x-1)/e past x = 1, whose transform is e^{-s}/(e s^2)
        let want = (-1.0f64).exp() * (-1.0f64).exp();
        assert!((r.closed - want).abs() < 1e-12);
        let r = check_moment(&params(2.0, 0.5), 2, 0.7).unwrap();
        assert!(r.residual.abs() < 1e-7, "{r:?}");
        let far = laplace_moment_closed(&p, 1, 1e3).unwrap();
        assert!(far >= 0.0 && far < 1e-300);
    }

    #[test]
    fn cluster_length_transform() {
        for (l, e) in [(1.0, 1.0), (2.0, 0.5), (0.5, 2.0)] {
            for s in [0.5, 1.0, 2.0] {
                let r = check_cluster_length(&params(l, e), s).unwrap();
                assert!(r.residual.abs() < 1e-7, "{r:?}");
            }
        }
    }
}
