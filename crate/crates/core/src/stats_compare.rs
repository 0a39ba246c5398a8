//! Pass/fail agreement between simulated outcomes and the closed forms.
//!
//! Discrete outcomes are judged by per-outcome z-scores, continuous samples by
//! the Kolmogorov–Smirnov distance. A chi-square statistic is reported for
//! discrete comparisons but does not enter the verdict.

use serde::Serialize;

use crate::cluster_laws::MixedLaw;
use crate::component_counts::DistributionTable;
use crate::error::{Error, Result};
use crate::mc_engine::EmpiricalDistribution;

pub const DEFAULT_Z_MAX: f64 = 4.0;
pub const MIN_REPLICATIONS: u64 = 10_000;
/// Asymptotic KS quantile at about the 1% level.
pub const KS_COEFFICIENT: f64 = 1.63;
const SE_FLOOR: f64 = 1e-12;
const MIN_EXPECTED: f64 = 5.0;
const PROBE_POINTS: usize = 1000;
const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeRow {
    pub outcome: usize,
    pub analytic: f64,
    pub empirical: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub per_outcome: Vec<OutcomeRow>,
    pub max_abs_z: f64,
    pub chi_square: Option<f64>,
    pub dof: Option<usize>,
    pub ks: Option<f64>,
    pub ks_bound: Option<f64>,
    pub verdict: Verdict,
    pub tolerance_policy: String,
}

/// Compares simulated counts with a pmf.
///
/// `z = (p_hat - p) / max(sqrt(p (1 - p) / N), 1e-12)` with the analytic `p`,
/// so an outcome that never occurs in the sample does not get a zero standard
/// error. Outcomes on either side are included; the verdict passes iff every
/// `|z| <= z_max`.
pub fn compare_pmf(
    empirical: &EmpiricalDistribution,
    analytic: &DistributionTable,
    z_max: f64,
) -> Result<ComparisonReport> {
    if empirical.total == 0 {
        return Err(Error::Contract("empirical distribution is empty".into()));
    }
    if empirical.total < MIN_REPLICATIONS {
        return Err(Error::Contract(format!(
            "need at least {MIN_REPLICATIONS} replications, got {}",
            empirical.total
        )));
    }
    let total = empirical.total as f64;
    let last = empirical
        .max_outcome()
        .unwrap_or(0)
        .max(analytic.support_max);
    let per_outcome: Vec<OutcomeRow> = (0..=last)
        .map(|n| {
            let p = analytic.prob(n);
            let p_hat = empirical.estimate(n);
            let se = (p * (1.0 - p) / total).sqrt().max(SE_FLOOR);
            OutcomeRow {
                outcome: n,
                analytic: p,
                empirical: p_hat,
                z: (p_hat - p) / se,
            }
        })
        .collect();
    let max_abs_z = per_outcome.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    let (chi_square, dof) = chi_square(&per_outcome, total);
    Ok(ComparisonReport {
        per_outcome,
        max_abs_z,
        chi_square: Some(chi_square),
        dof: Some(dof),
        ks: None,
        ks_bound: None,
        verdict: if max_abs_z <= z_max { Verdict::Pass } else { Verdict::Fail },
        tolerance_policy: format!(
            "pass iff max |z| <= {z_max} with binomial standard errors of the analytic probabilities; \
             chi-square pools outcomes with expected count < {MIN_EXPECTED} and is informational"
        ),
    })
}

/// Pearson statistic with small-expectation outcomes pooled into one bucket,
/// which is merged into the smallest kept bin if it is itself too small.
fn chi_square(rows: &[OutcomeRow], total: f64) -> (f64, usize) {
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for r in rows {
        let cell = (r.analytic * total, r.empirical * total);
        if cell.0 >= MIN_EXPECTED {
            bins.push(cell);
        } else {
            pooled.0 += cell.0;
            pooled.1 += cell.1;
        }
    }
    if pooled.0 >= MIN_EXPECTED || bins.is_empty() {
        bins.push(pooled);
    } else if pooled.0 > 0.0 || pooled.1 > 0.0 {
        let smallest = bins
            .iter_mut()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("non-empty");
        smallest.0 += pooled.0;
        smallest.1 += pooled.1;
    }
    let stat = bins
        .iter()
        .map(|&(e, o)| {
            if e > 0.0 {
                (o - e).powi(2) / e
            } else if o > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum();
    (stat, bins.len().saturating_sub(1))
}

/// A distribution function that can be evaluated along an ascending grid.
pub trait Cdf {
    /// `F(x)` at each point of the ascending slice `xs`.
    fn cdf_ascending(&self, xs: &[f64]) -> Result<Vec<f64>>;

    /// `F(x) - F(x-)`.
    fn jump(&self, _x: f64) -> f64 {
        0.0
    }
}

impl<F: Fn(f64) -> f64> Cdf for F {
    fn cdf_ascending(&self, xs: &[f64]) -> Result<Vec<f64>> {
        Ok(xs.iter().map(|&x| self(x)).collect())
    }
}

impl Cdf for MixedLaw {
    fn cdf_ascending(&self, xs: &[f64]) -> Result<Vec<f64>> {
        self.cdf_sorted(xs)
    }

    fn jump(&self, x: f64) -> f64 {
        if x == self.atom_location {
            self.atom_mass
        } else {
            0.0
        }
    }
}

fn check_monotone<C: Cdf + ?Sized>(cdf: &C, lo: f64, hi: f64) -> Result<()> {
    let span = (hi - lo).max(1e-300);
    let grid: Vec<f64> = (0..PROBE_POINTS)
        .map(|i| lo + span * i as f64 / (PROBE_POINTS - 1) as f64)
        .collect();
    let values = cdf.cdf_ascending(&grid)?;
    for (i, w) in values.windows(2).enumerate() {
        if !(w[1] >= w[0] - MONOTONE_SLACK) {
            return Err(Error::Contract(format!(
                "cdf decreases between {} and {}",
                grid[i],
                grid[i + 1]
            )));
        }
    }
    if let Some(v) = values
        .iter()
        .find(|v| !(-MONOTONE_SLACK..=1.0 + MONOTONE_SLACK).contains(*v))
    {
        return Err(Error::Contract(format!("cdf value {v} outside [0, 1]")));
    }
    Ok(())
}

/// Kolmogorov–Smirnov test of an ascending sample against `cdf`.
///
/// At every distinct sample value both one-sided limits are compared, so an
/// atom in the law, matched by ties in the sample, is scored correctly. Passes
/// iff `D <= 1.63 / sqrt(N)`.
pub fn compare_continuous<C: Cdf + ?Sized>(sample: &[f64], cdf: &C) -> Result<ComparisonReport> {
    let n = sample.len();
    if (n as u64) < MIN_REPLICATIONS {
        return Err(Error::Contract(format!(
            "need at least {MIN_REPLICATIONS} sample values, got {n}"
        )));
    }
    if let Some(w) = sample.windows(2).find(|w| !(w[0] <= w[1])) {
        return Err(Error::Contract(format!(
            "sample must be ascending, found {} then {}",
            w[0], w[1]
        )));
    }
    check_monotone(cdf, sample[0], sample[n - 1])?;

    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for (i, &x) in sample.iter().enumerate() {
        match distinct.last_mut() {
            Some((v, end)) if *v == x => *end = i + 1,
            _ => distinct.push((x, i + 1)),
        }
    }
    let xs: Vec<f64> = distinct.iter().map(|d| d.0).collect();
    let right = cdf.cdf_ascending(&xs)?;
    let total = n as f64;
    let mut below = 0usize;
    let mut d = 0.0f64;
    for (&(x, upto), &f) in distinct.iter().zip(&right) {
        let f_left = f - cdf.jump(x);
        d = d
            .max((below as f64 / total - f_left).abs())
            .max((upto as f64 / total - f).abs());
        below = upto;
    }
    let bound = KS_COEFFICIENT / total.sqrt();
    Ok(ComparisonReport {
        per_outcome: Vec::new(),
        max_abs_z: 0.0,
        chi_square: None,
        dof: None,
        ks: Some(d),
        ks_bound: Some(bound),
        verdict: if d <= bound { Verdict::Pass } else { Verdict::Fail },
        tolerance_policy: format!("pass iff KS distance <= {KS_COEFFICIENT} / sqrt(N)"),
    })
}
