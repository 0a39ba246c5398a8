//! Laws of the number of clusters.
//!
//! * `beta0(L)`: clusters that both start and end inside `[0, L]` (the number of
//!   connected components of the covered set).
//! * `beta0'(L)`: clusters with at least one point inside `[0, L]`.
//! * `chi(L)`: disjoint covered arcs on a circle of circumference `L`.
//!
//! All pmfs are finite alternating sums. Each term is formed and accumulated
//! in double-double so that the cancellation between them costs nothing at
//! double precision; `sum(|term|)` is tracked alongside, and when the implied
//! relative error exceeds [`CANCELLATION_LIMIT`] a [`PrecisionWarning`] is
//! attached to the value. The rate `lambda e^{-lambda eps}` is rounded once
//! and shared by every term, which shifts the whole sum smoothly instead of
//! being amplified by the cancellation.

use std::sync::OnceLock;

use serde::Serialize;
use twofloat::TwoFloat;

use crate::cluster_laws::law_b;
use crate::error::{Error, PrecisionWarning, Result};
use crate::model::{lattice_floor, IntervalModel, ModelParams};
use crate::quadrature::{integrate, lattice_points};
use crate::special_fn::{
    big_to_f64, factorial, ln_factorial, partial_exp_sum, stirling_row, CompensatedSum,
};

pub const CANCELLATION_LIMIT: f64 = 1e-9;
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Largest `|closed - quadrature|` before the closed coverage form is flagged.
/// Absolute quadrature tolerance per incomplete-count probability.
const INCOMPLETE_TOL: f64 = 1e-13;
pub const COVERAGE_MISMATCH_TOL: f64 = 1e-6;

/// A probability computed from an alternating sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checked {
    /// Value clamped to `[0, 1]`.
    pub value: f64,
    /// Unclamped sum.
    pub raw: f64,
    pub cancellation: f64,
    pub warning: Option<PrecisionWarning>,
}

impl Checked {
    fn from_sum(acc: &CompensatedSum) -> Self {
        Self::from_parts(acc.value(), acc.cancellation())
    }

    fn from_parts(raw: f64, cancellation: f64) -> Self {
        let warning = (cancellation > CANCELLATION_LIMIT).then_some(PrecisionWarning {
            estimate: cancellation,
        });
        Self {
            value: raw.clamp(0.0, 1.0),
            raw,
            cancellation,
            warning,
        }
    }

    fn exact(value: f64) -> Self {
        Self {
            value,
            raw: value,
            cancellation: 0.0,
            warning: None,
        }
    }
}

/// `y^k / (n! j!)`, in logarithms once the factorials leave `f64` range.
fn power_over_factorials(y: f64, k: usize, n: usize, j: usize) -> f64 {
    if n <= 170 && j <= 170 {
        let direct = y.powi(k as i32) / factorial(n) / factorial(j);
        if direct.is_finite() {
            return direct;
        }
    }
    if k == 0 {
        return (-ln_factorial(n) - ln_factorial(j)).exp();
    }
    (k as f64 * y.ln() - ln_factorial(n) - ln_factorial(j)).exp()
}

/// Past the peak of `y^k / k!` the terms shrink geometrically; once one is
/// negligible against what has been accumulated the rest cannot matter.
fn negligible(term: f64, y: f64, k: usize, magnitude: f64) -> bool {
    k as f64 > 2.0 * y + 2.0 && term.abs() <= 1e-34 * magnitude
}

/// Relative error of a double-double term, with room for the handful of
/// operations that form it.
const WIDE_UNIT: f64 = 1e-30;

/// `1 / n!`, built by division by integers; double-double division by a
/// double-double is only good to `f64` precision.
fn wide_inverse_factorial(n: usize) -> TwoFloat {
    static TABLE: OnceLock<Vec<TwoFloat>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![TwoFloat::from(1.0)];
        for k in 1..=WIDE_FACTORIAL_MAX {
            let next = t[k - 1] / k as f64;
            t.push(next);
        }
        t
    })[n]
}

/// Past this the low word of `1 / n!` goes subnormal.
const WIDE_FACTORIAL_MAX: usize = 160;

/// `(x - k eps) a`, with the gap itself exact.
fn wide_gap(x: f64, k: usize, eps: f64, a: f64) -> TwoFloat {
    let gap = TwoFloat::from(x) - TwoFloat::new_mul(k as f64, eps);
    if gap.hi() <= 0.0 {
        TwoFloat::from(0.0)
    } else {
        gap * a
    }
}

/// Alternating sum in double-double, tracking `sum(|term|)`.
#[derive(Debug, Default)]
struct WideSum {
    sum: TwoFloat,
    magnitude: f64,
    /// Part of `magnitude` from terms that fell back to plain `f64`.
    coarse: f64,
}

impl WideSum {
    /// Adds `sign * scale * y^k / (n! j!)` and returns the term's size.
    fn add_power(&mut self, sign: f64, scale: TwoFloat, y: TwoFloat, k: usize, n: usize, j: usize) -> f64 {
        if n <= WIDE_FACTORIAL_MAX && j <= WIDE_FACTORIAL_MAX {
            let power = if k == 0 { TwoFloat::from(1.0) } else { y.powi(k as i32) };
            let term = power * wide_inverse_factorial(n) * wide_inverse_factorial(j) * scale;
            if term.hi().is_finite() {
                self.sum += term * sign;
                self.magnitude += term.hi().abs();
                return term.hi().abs();
            }
        }
        let term = power_over_factorials(y.hi(), k, n, j) * scale.hi();
        self.sum += sign * term;
        self.magnitude += term.abs();
        self.coarse += term.abs();
        term.abs()
    }

    fn add(&mut self, x: TwoFloat) {
        self.sum += x;
        self.magnitude += x.hi().abs();
    }

    fn value(&self) -> f64 {
        self.sum.hi() + self.sum.lo()
    }

    fn checked(&self) -> Checked {
        let error = WIDE_UNIT * self.magnitude + f64::EPSILON * self.coarse;
        Checked::from_parts(self.value(), error / self.value().abs().max(1e-300))
    }
}

fn sign(i: usize) -> f64 {
    if i.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `p_n(x) = P(beta0(x) = n)` as a function of the interval length `x`:
///
/// `(1/n!) sum_{i=0}^{floor(x/eps) - n} (-1)^i / i! ((x - (n+i) eps) lambda e^{-lambda eps})^{n+i}`.
///
/// Zero for `x < 0`; at `x = 0` only the empty configuration fits, so
/// `p_0(0) = 1`.
pub fn cluster_count_prob(params: &ModelParams, x: f64, n: usize) -> Checked {
    if x < 0.0 {
        return Checked::exact(0.0);
    }
    let eps = params.epsilon();
    let top = lattice_floor(x, eps);
    if n > top {
        return Checked::exact(0.0);
    }
    let rate = params.closing_rate();
    let one = TwoFloat::from(1.0);
    let mut acc = WideSum::default();
    for i in 0..=top - n {
        let k = n + i;
        let y = wide_gap(x, k, eps, rate);
        let term = acc.add_power(sign(i), one, y, k, n, i);
        if negligible(term, y.hi(), k, acc.magnitude) {
            break;
        }
    }
    acc.checked()
}

/// Right derivative of [`cluster_count_prob`] in `x`, term by term.
pub fn cluster_count_prob_derivative(params: &ModelParams, x: f64, n: usize) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let eps = params.epsilon();
    let top = lattice_floor(x, eps);
    if n > top {
        return 0.0;
    }
    let rate = params.closing_rate();
    let mut acc = WideSum::default();
    for i in 0..=top - n {
        let k = n + i;
        if k == 0 {
            continue;
        }
        let y = wide_gap(x, k, eps, rate);
        let term = acc.add_power(sign(i), TwoFloat::new_mul(k as f64, rate), y, k - 1, n, i);
        if negligible(term, y.hi(), k, acc.magnitude) {
            break;
        }
    }
    acc.value()
}

/// A finite pmf over cluster counts `0..=support_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionTable {
    pub support_max: usize,
    pub probs: Vec<f64>,
    pub tail_mass: f64,
    /// Outcomes whose value carried a precision warning.
    pub warnings: Vec<(usize, PrecisionWarning)>,
}

impl DistributionTable {
    /// Builds a table from clamped probabilities, checking `|1 - sum| <= 1e-9`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        Self::build(probs, Vec::new())
    }

    fn from_checked(values: Vec<Checked>) -> Result<Self> {
        let warnings = values
            .iter()
            .enumerate()
            .filter_map(|(n, c)| c.warning.map(|w| (n, w)))
            .collect();
        Self::build(values.iter().map(|c| c.value).collect(), warnings)
    }

    fn build(probs: Vec<f64>, warnings: Vec<(usize, PrecisionWarning)>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Contract("a distribution needs at least one outcome".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Contract(format!("probability {bad} outside [0, 1]")));
        }
        let total: CompensatedSum = probs.iter().copied().collect();
        let tail_mass = 1.0 - total.value();
        if tail_mass.abs() > NORMALIZATION_TOL {
            return Err(Error::Normalization {
                tail_mass,
                tolerance: NORMALIZATION_TOL,
            });
        }
        Ok(Self {
            support_max: probs.len() - 1,
            probs,
            tail_mass,
            warnings,
        })
    }

    /// `P(N = n)`, zero beyond the support.
    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    /// `sum_n n^m P(N = n)`.
    pub fn moment(&self, m: u32) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64).powi(m as i32) * p)
            .collect::<CompensatedSum>()
            .value()
    }

    /// `P(N >= n)`.
    pub fn upper_tail(&self, n: usize) -> f64 {
        self.probs.iter().skip(n).sum()
    }
}

/// `P(beta0(L) = n)` with its cancellation diagnostics.
pub fn pmf_beta0_checked(model: &IntervalModel, n: usize) -> Checked {
    cluster_count_prob(&model.params, model.length(), n)
}

/// `P(beta0(L) = n)`, clamped to `[0, 1]`.
pub fn pmf_beta0(model: &IntervalModel, n: usize) -> f64 {
    pmf_beta0_checked(model, n).value
}

/// `P(beta0(L) = n)` for `n = 0..=floor(L/eps)`.
pub fn pmf_beta0_table(model: &IntervalModel) -> Result<DistributionTable> {
    DistributionTable::from_checked(
        (0..=model.max_clusters())
            .map(|n| pmf_beta0_checked(model, n))
            .collect(),
    )
}

/// `E[beta0(L)^m] = sum_{k=1}^{m} S(m,k) ((L - k eps) lambda e^{-lambda eps})^k 1{L > k eps}`.
pub fn moment_beta0(model: &IntervalModel, m: usize) -> Result<f64> {
    if m == 0 {
        return Ok(1.0);
    }
    let row = stirling_row(m)?;
    let eps = model.epsilon();
    let rate = model.params.closing_rate();
    let mut acc = CompensatedSum::default();
    for k in 1..=m {
        let room = model.length() - k as f64 * eps;
        if room <= 0.0 {
            break;
        }
        acc.add(big_to_f64(&row.get(k)) * (room * rate).powi(k as i32));
    }
    Ok(acc.value())
}

/// `E[beta0(L)] = (L - eps) lambda e^{-lambda eps} 1{L > eps}`.
pub fn mean_beta0(model: &IntervalModel) -> f64 {
    let room = model.length() - model.epsilon();
    if room <= 0.0 {
        return 0.0;
    }
    room * model.params.closing_rate()
}

/// `Var(beta0(L))`.
///
/// For `L > 2 eps` this is `(L - eps) a + eps (3 eps - 2L) a^2` with
/// `a = lambda e^{-lambda eps}`; below that the `k = 2` moment term vanishes and
/// the variance is `(L - eps) a - (L - eps)^2 a^2`.
pub fn var_beta0(model: &IntervalModel) -> f64 {
    let (l, eps) = (model.length(), model.epsilon());
    let a = model.params.closing_rate();
    if l > 2.0 * eps {
        (l - eps) * a + eps * (3.0 * eps - 2.0 * l) * a * a
    } else if l > eps {
        (l - eps) * a - (l - eps).powi(2) * a * a
    } else {
        0.0
    }
}

/// Intensity maximizing the mean count at fixed `(eps, L)`, and the maximum:
/// `(1/eps, (L/eps - 1) / e)`.
pub fn mean_argmax(model: &IntervalModel) -> Result<(f64, f64)> {
    let (l, eps) = (model.length(), model.epsilon());
    if l <= eps {
        return Err(Error::NoMaximum);
    }
    Ok((1.0 / eps, (l / eps - 1.0) * (-1.0f64).exp()))
}

/// Critical intensities of `lambda -> Var(beta0(L))` on `(0, inf)`, ascending.
///
/// `lambda = 1/eps` is always one. For `L > 2 eps` the others solve
/// `lambda e^{-lambda eps} = (L - eps) / (2 eps (2L - 3 eps))`, one on each side
/// of `1/eps` when the right side is below `1/(e eps)`.
pub fn var_critical_points(model: &IntervalModel) -> Vec<f64> {
    let (l, eps) = (model.length(), model.epsilon());
    let peak = 1.0 / eps;
    if l <= 2.0 * eps {
        return vec![peak];
    }
    let rhs = (l - eps) / (2.0 * eps * (2.0 * l - 3.0 * eps));
    let rate = |lambda: f64| lambda * (-lambda * eps).exp();
    if rhs >= rate(peak) {
        return vec![peak];
    }
    let g = |lambda: f64| rate(lambda) - rhs;
    let low = bisect(g, 0.0, peak);
    let mut far = 2.0 * peak;
    while g(far) >= 0.0 {
        far *= 2.0;
    }
    let high = bisect(g, peak, far);
    vec![low, peak, high]
}

/// Bisection for a sign change of `g` on `[a, b]` down to 1e-12 in `lambda`.
fn bisect<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64) -> f64 {
    let ga = g(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if b - a < 1e-12 {
            break;
        }
        if (g(mid) > 0.0) == (ga > 0.0) {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// `P([0, L] is covered)`, where covered means the first point lies within
/// `eps` of the origin and its cluster reaches `L`:
/// `∫_0^eps lambda e^{-lambda x} P(B >= L - x) dx`.
///
/// This quadrature is the reference value for coverage.
pub fn coverage_prob(model: &IntervalModel) -> Result<f64> {
    let (l, eps) = (model.length(), model.epsilon());
    let lambda = model.lambda();
    let law = law_b(&model.params);
    // P(B >= t) = 1 for t <= eps; kinks of the integrand sit where L - x hits the lattice.
    let cuts: Vec<f64> = lattice_points(eps, l - eps, l)
        .into_iter()
        .map(|t| l - t)
        .collect();
    let integrand = |x: f64| {
        let survival = law.survival(l - x).unwrap_or(f64::NAN);
        lambda * (-lambda * x).exp() * survival
    };
    let r = integrate(integrand, 0.0, eps, &cuts, 1e-10, 2000)?;
    if !r.value.is_finite() {
        return Err(Error::Quadrature {
            estimate: r.value,
            error_estimate: r.error_estimate,
        });
    }
    Ok(r.value.clamp(0.0, 1.0))
}

/// Closed-form coverage next to the quadrature reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageComparison {
    pub quadrature: f64,
    pub closed_form: f64,
    pub difference: f64,
    pub mismatch: bool,
}

/// `R_{m,n}(x) = sum_{i=m}^{floor(x/eps)-1} e^{-lambda eps (i+n)} sum_{j=0}^{i+n} (lambda((1-i) eps - x))^j / j!`.
fn r_sum(params: &ModelParams, m: usize, n: usize, x: f64) -> f64 {
    let eps = params.epsilon();
    let lambda = params.lambda();
    let top = lattice_floor(x, eps);
    let mut acc = CompensatedSum::default();
    for i in m..top {
        let weight = (-lambda * eps * (i + n) as f64).exp();
        let arg = lambda * ((1.0 - i as f64) * eps - x);
        acc.add(weight * partial_exp_sum(i + n, arg));
    }
    acc.value()
}

/// The printed R-combination for coverage,
/// `R01(L) - q R01(L - eps) - q R10(L) + q^2 R10(L - eps)` with `q = e^{-lambda eps}`,
/// reported against [`coverage_prob`]. Experimental: disagreement beyond
/// [`COVERAGE_MISMATCH_TOL`] sets `mismatch` rather than failing.
pub fn coverage_prob_closed(model: &IntervalModel) -> Result<CoverageComparison> {
    let p = &model.params;
    let l = model.length();
    let q = p.isolation_prob();
    let closed = r_sum(p, 0, 1, l) - q * r_sum(p, 0, 1, l - p.epsilon()) - q * r_sum(p, 1, 0, l)
        + q * q * r_sum(p, 1, 0, l - p.epsilon());
    let quadrature = coverage_prob(model)?;
    let difference = closed - quadrature;
    Ok(CoverageComparison {
        quadrature,
        closed_form: closed,
        difference,
        mismatch: !(difference.abs() <= COVERAGE_MISMATCH_TOL),
    })
}

/// `G(k)` of the incomplete-cluster law; `G(-1) = e^{-lambda L}` and for `k >= 0`
/// `(-1)^k (e^{-k lambda eps} sum_{j<=k} (lambda (k eps - L))^j / j! - e^{-lambda L}) 1{L > k eps}`.
fn incomplete_g(model: &IntervalModel, k: isize) -> f64 {
    let (l, eps, lambda) = (model.length(), model.epsilon(), model.lambda());
    if k < 0 {
        return (-lambda * l).exp();
    }
    let k = k as usize;
    if !(l > k as f64 * eps) {
        return 0.0;
    }
    let inner = (-(k as f64) * lambda * eps).exp() * partial_exp_sum(k, lambda * (k as f64 * eps - l));
    sign(k) * (inner - (-lambda * l).exp())
}

/// `P(beta0'(L) = n) = sum_{i=n}^{floor(L/eps)+1} (-1)^{i+n} C(i,n) (G(i-1) + G(i))`.
///
/// The binomial weights make this series lose digits quickly once
/// `floor(L/eps)` passes 25 or so; [`pmf_incomplete_checked`] computes the same
/// law without that cancellation.
pub fn pmf_incomplete_series(model: &IntervalModel, n: usize) -> Checked {
    let top = model.max_clusters() + 1;
    if n > top {
        return Checked::exact(0.0);
    }
    let mut acc = CompensatedSum::default();
    let mut binom = 1.0f64;
    for i in n..=top {
        if i > n {
            binom = binom * i as f64 / (i - n) as f64;
        }
        let g = incomplete_g(model, i as isize - 1) + incomplete_g(model, i as isize);
        acc.add(sign(i + n) * binom * g);
    }
    Checked::from_sum(&acc)
}

/// Cluster `n` starts an `Exp(lambda)` gap after cluster `n - 1` closes, so
/// `P(beta0'(L) = n) = ∫_0^L lambda e^{-lambda (L - t)} p_{n-1}(t) dt` for `n >= 1`
/// and `e^{-lambda L}` for `n = 0`. The integrand is an already-summed
/// probability, so nothing cancels.
fn incomplete_by_quadrature(model: &IntervalModel, n: usize) -> Result<Checked> {
    let (l, lambda) = (model.length(), model.lambda());
    if n == 0 {
        return Ok(Checked::exact((-lambda * l).exp()));
    }
    let p = &model.params;
    let at_l = cluster_count_prob(p, l, n - 1);
    // Rounding in p_{n-1}(t) peaks at t = L; asking for less than its
    // integrated size only chases noise.
    let noise = lambda * l * at_l.cancellation * at_l.raw.abs();
    let cuts = lattice_points(p.epsilon(), 0.0, l);
    let r = integrate(
        |t| lambda * (-lambda * (l - t)).exp() * cluster_count_prob(p, t, n - 1).raw,
        0.0,
        l,
        &cuts,
        INCOMPLETE_TOL.max(noise),
        50 * (cuts.len() + 1),
    )?;
    Ok(Checked::from_parts(r.value, at_l.cancellation))
}

/// `P(beta0'(L) = n)`, the number of clusters meeting `[0, L]`.
///
/// Fails only if the quadrature does not converge.
pub fn pmf_incomplete_checked(model: &IntervalModel, n: usize) -> Result<Checked> {
    if n > model.max_clusters() + 1 {
        return Ok(Checked::exact(0.0));
    }
    incomplete_by_quadrature(model, n)
}

pub fn pmf_incomplete(model: &IntervalModel, n: usize) -> Result<f64> {
    Ok(pmf_incomplete_checked(model, n)?.value)
}

/// `P(beta0'(L) = n)` for `n = 0..=floor(L/eps)+1`.
pub fn pmf_incomplete_table(model: &IntervalModel) -> Result<DistributionTable> {
    DistributionTable::from_checked(
        (0..=model.max_clusters() + 1)
            .map(|n| pmf_incomplete_checked(model, n))
            .collect::<Result<_>>()?,
    )
}

/// `E[beta0'(L)] = G(0) + G(1)`.
pub fn mean_incomplete(model: &IntervalModel) -> f64 {
    incomplete_g(model, 0) + incomplete_g(model, 1)
}

/// Circle law of the number of covered arcs:
///
/// `P(chi = n) = e^{-lambda L} 1{n=0} + (1 - e^{-lambda L}) (a / n!) sum_i (-1)^i / i!
///   ((L - (n+i) eps) a)^{n+i-1} (L + (n+i)(1/lambda - eps))`, with `a = lambda e^{-lambda eps}`.
///
/// The `n + i = 0` summand is taken as its limit `1 / a`.
pub fn pmf_circle_checked(model: &IntervalModel, n: usize) -> Checked {
    let (l, eps, lambda) = (model.length(), model.epsilon(), model.lambda());
    let top = model.max_clusters();
    let empty = (-lambda * l).exp();
    let empty_term = if n == 0 { empty } else { 0.0 };
    if n > top {
        return Checked::exact(empty_term);
    }
    let a = model.params.closing_rate();
    let slope = 1.0 / lambda - eps;
    let mut acc = WideSum::default();
    for i in 0..=top - n {
        let k = n + i;
        if k == 0 {
            acc.add(TwoFloat::from(1.0) / a);
            continue;
        }
        let y = wide_gap(l, k, eps, a);
        let weight = TwoFloat::new_mul(k as f64, slope) + l;
        let term = acc.add_power(sign(i), weight, y, k - 1, n, i);
        if negligible(term, y.hi(), k, acc.magnitude) {
            break;
        }
    }
    let scale = (1.0 - empty) * a;
    let inner = acc.checked();
    let raw = empty_term + scale * inner.raw;
    let error = scale * inner.cancellation * inner.raw.abs();
    Checked::from_parts(raw, error / raw.abs().max(1e-300))
}

pub fn pmf_circle(model: &IntervalModel, n: usize) -> f64 {
    pmf_circle_checked(model, n).value
}

/// Circle law for `n = 0..=floor(L/eps)`.
pub fn pmf_circle_table(model: &IntervalModel) -> Result<DistributionTable> {
    DistributionTable::from_checked(
        (0..=model.max_clusters())
            .map(|n| pmf_circle_checked(model, n))
            .collect(),
    )
}
