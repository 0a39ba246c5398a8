//! Stirling numbers of the second kind, negative-order polylogarithms and
//! truncated exponential series.

use std::sync::{Mutex, OnceLock};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest set size for which Stirling numbers are tabulated.
pub const STIRLING_MAX: usize = 64;

/// Row `m` of the Stirling triangle of the second kind, `S(m, 0..=m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StirlingRow {
    m: usize,
    values: Vec<BigUint>,
}

impl StirlingRow {
    pub fn m(&self) -> usize {
        self.m
    }

    /// `S(m, k)`; zero for `k > m`.
    pub fn get(&self, k: usize) -> BigUint {
        self.values.get(k).cloned().unwrap_or_default()
    }

    pub fn values(&self) -> &[BigUint] {
        &self.values
    }
}

fn triangle() -> &'static Mutex<Vec<Vec<BigUint>>> {
    static ROWS: OnceLock<Mutex<Vec<Vec<BigUint>>>> = OnceLock::new();
    ROWS.get_or_init(|| Mutex::new(vec![vec![BigUint::one()]]))
}

fn check_capacity(m: usize) -> Result<()> {
    if m > STIRLING_MAX {
        return Err(Error::Capacity {
            what: "Stirling number set size",
            bound: STIRLING_MAX,
            requested: m,
        });
    }
    Ok(())
}

/// Row `m` of the triangle, extending the shared cache with
/// `S(m+1, k) = k S(m, k) + S(m, k-1)` as needed.
pub fn stirling_row(m: usize) -> Result<StirlingRow> {
    check_capacity(m)?;
    let mut rows = triangle().lock().unwrap_or_else(|e| e.into_inner());
    while rows.len() <= m {
        let prev = rows.last().expect("row 0 is seeded");
        let n = prev.len();
        let mut next = vec![BigUint::zero(); n + 1];
        for (k, slot) in next.iter_mut().enumerate().skip(1) {
            let stay = if k < n { &prev[k] * k } else { BigUint::zero() };
            *slot = stay + &prev[k - 1];
        }
        rows.push(next);
    }
    Ok(StirlingRow {
        m,
        values: rows[m].clone(),
    })
}

/// Exact `S(m, k)`, the number of partitions of an `m`-set into `k` blocks.
pub fn stirling2(m: usize, k: usize) -> Result<BigUint> {
    Ok(stirling_row(m)?.get(k))
}

/// `k! * S(m, k)` as an exact integer.
pub fn surjections(m: usize, k: usize) -> Result<BigUint> {
    let s = stirling2(m, k)?;
    Ok(s * factorial_exact(k))
}

fn factorial_exact(k: usize) -> BigUint {
    (1..=k).fold(BigUint::one(), |acc, j| acc * j)
}

pub(crate) fn big_to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

/// `Li_{-m}(z)` for a positive integer `m` and `z < 1`, via the finite sum
/// `sum_k (-1)^(m+k) k! S(m+1, k+1) / (1-z)^(k+1)`.
pub fn polylog_neg(m: usize, z: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("polylog order must be a positive integer".into()));
    }
    if !(z < 1.0) {
        return Err(Error::Domain(format!("Li_-m(z) requires z < 1, got {z}")));
    }
    check_capacity(m + 1)?;
    let row = stirling_row(m + 1)?;
    let inv = 1.0 / (1.0 - z);
    let mut acc = CompensatedSum::default();
    let mut fact = BigUint::one();
    let mut pow = inv;
    for k in 0..=m {
        if k > 0 {
            fact *= k;
            pow *= inv;
        }
        let coeff = big_to_f64(&(&fact * &row.get(k + 1)));
        let sign = if (m + k) % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(sign * coeff * pow);
    }
    Ok(acc.value())
}

/// `sum_{j=0}^{j_max} y^j / j!` by ascending compensated summation.
pub fn partial_exp_sum(j_max: usize, y: f64) -> f64 {
    let mut acc = CompensatedSum::default();
    let mut term = 1.0;
    acc.add(term);
    for j in 1..=j_max {
        term *= y / j as f64;
        acc.add(term);
    }
    acc.value()
}

/// `n!` in floating point; overflows to infinity past 170.
pub fn factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(171);
        let mut f = 1.0f64;
        t.push(f);
        for k in 1..=170 {
            f *= k as f64;
            t.push(f);
        }
        t
    });
    table.get(n).copied().unwrap_or(f64::INFINITY)
}

/// `ln(n!)`: exact table through 170, Stirling series beyond.
pub fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| (0..=170).map(|k| factorial(k).ln()).collect());
    if let Some(v) = table.get(n) {
        return *v;
    }
    let x = n as f64;
    let inv = 1.0 / x;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + inv / 12.0
        - inv.powi(3) / 360.0
        + inv.powi(5) / 1260.0
}

/// Neumaier summation that also tracks `sum(|term|)` for cancellation estimates.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
    magnitude: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
        self.magnitude += x.abs();
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }

    /// Sum of absolute values of everything added.
    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    /// `eps * sum(|term|) / max(|result|, 1e-300)`.
    pub fn cancellation(&self) -> f64 {
        f64::EPSILON * self.magnitude / self.value().abs().max(1e-300)
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}
