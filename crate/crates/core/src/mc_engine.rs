//! Monte Carlo simulation of the Poisson point process on an interval or a
//! circle, with the exact cluster decomposition.
//!
//! # Random streams
//!
//! Replication `r` of a run seeded with `seed` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `r`. Streams never
//! overlap, so a replication's outcome depends only on `(seed, r)` and the
//! aggregate does not depend on how replications are scheduled over threads.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SampleConfig {
    pub seed: u64,
    pub replications: u64,
    /// Worker threads; 1 runs on the calling thread.
    pub parallelism_hint: usize,
}

impl SampleConfig {
    pub fn new(seed: u64, replications: u64) -> Result<Self> {
        if replications == 0 {
            return Err(Error::InvalidParameter {
                name: "replications",
                reason: "must be at least 1".into(),
            });
        }
        Ok(Self {
            seed,
            replications,
            parallelism_hint: 1,
        })
    }

    pub fn with_parallelism(mut self, threads: usize) -> Self {
        self.parallelism_hint = threads.max(1);
        self
    }
}

/// The random stream for replication `r`.
pub fn substream(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSample {
    pub positions: Vec<f64>,
    pub domain_length: f64,
}

impl PointSample {
    /// Checks that `positions` is strictly increasing inside `[0, L]`.
    pub fn new(positions: Vec<f64>, domain_length: f64) -> Result<Self> {
        check_sorted(&positions)?;
        if let (Some(&first), Some(&last)) = (positions.first(), positions.last()) {
            if first < 0.0 || last > domain_length {
                return Err(Error::Contract(format!(
                    "positions must lie in [0, {domain_length}]"
                )));
            }
        }
        Ok(Self {
            positions,
            domain_length,
        })
    }

    /// Shifts every position by `delta` on a circle of length `L`.
    pub fn rotated(&self, delta: f64) -> Self {
        let l = self.domain_length;
        let mut positions: Vec<f64> = self
            .positions
            .iter()
            .map(|&x| (x + delta).rem_euclid(l))
            .map(|x| if x >= l { 0.0 } else { x })
            .collect();
        positions.sort_by(f64::total_cmp);
        positions.dedup();
        Self {
            positions,
            domain_length: l,
        }
    }
}

fn check_sorted(positions: &[f64]) -> Result<()> {
    if let Some(w) = positions.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::Contract(format!(
            "positions must be strictly increasing, found {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterDecomposition {
    /// `(A_i, E_i)`: first point and last point plus epsilon.
    pub clusters: Vec<(f64, f64)>,
    pub complete_count: usize,
    pub incomplete_count: usize,
}

/// Poisson points on `[0, L]` from cumulative exponential gaps.
pub fn sample_interval<R: Rng + ?Sized>(params: &ModelParams, length: f64, rng: &mut R) -> PointSample {
    let gap = Exp::new(params.lambda()).expect("lambda validated positive");
    let mut positions = Vec::new();
    let mut x = gap.sample(rng);
    while x <= length {
        positions.push(x);
        x += gap.sample(rng);
    }
    PointSample {
        positions,
        domain_length: length,
    }
}

/// Splits at gaps strictly larger than `epsilon`.
///
/// Points past `L` never matter for the counts: whether a point starts a
/// cluster depends only on the gap before it, and a cluster whose last point
/// `p` in `[0, L]` has `p + epsilon <= L` cannot be continued by a point past
/// `L`.
pub fn decompose(points: &PointSample, epsilon: f64) -> Result<ClusterDecomposition> {
    check_sorted(&points.positions)?;
    let mut clusters = Vec::new();
    let mut iter = points.positions.iter().copied();
    if let Some(first) = iter.next() {
        let (mut start, mut last) = (first, first);
        for x in iter {
            if x - last > epsilon {
                clusters.push((start, last + epsilon));
                start = x;
            }
            last = x;
        }
        clusters.push((start, last + epsilon));
    }
    let complete_count = clusters
        .iter()
        .filter(|&&(_, end)| end <= points.domain_length)
        .count();
    Ok(ClusterDecomposition {
        incomplete_count: clusters.len(),
        clusters,
        complete_count,
    })
}

/// `N ~ Poisson(lambda L)` uniform points on `[0, L)`, sorted.
pub fn sample_circle<R: Rng + ?Sized>(params: &ModelParams, length: f64, rng: &mut R) -> PointSample {
    let mean = params.lambda() * length;
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
    } else {
        0
    };
    let mut positions: Vec<f64> = (0..count).map(|_| rng.random_range(0.0..length)).collect();
    positions.sort_by(f64::total_cmp);
    // ties have probability zero but would break the strictly increasing contract
    positions.dedup();
    PointSample {
        positions,
        domain_length: length,
    }
}

/// Number of circular gaps, wraparound included, strictly larger than `epsilon`.
pub fn circle_chi(points: &PointSample, epsilon: f64) -> usize {
    let p = &points.positions;
    let (Some(&first), Some(&last)) = (p.first(), p.last()) else {
        return 0;
    };
    let wrap = points.domain_length - last + first;
    p.windows(2).filter(|w| w[1] - w[0] > epsilon).count() + usize::from(wrap > epsilon)
}

/// Whether the first cluster starts within `epsilon` of 0 and reaches `L`.
pub fn coverage_indicator(points: &PointSample, epsilon: f64) -> bool {
    let p = &points.positions;
    let Some(&first) = p.first() else {
        return false;
    };
    if first > epsilon {
        return false;
    }
    let mut last = first;
    for &x in &p[1..] {
        if x - last > epsilon {
            break;
        }
        last = x;
    }
    last + epsilon >= points.domain_length
}

/// Length of a cluster opened at a point: linked gaps plus the closing epsilon.
pub fn sample_cluster_length<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> f64 {
    let gap = Exp::new(params.lambda()).expect("lambda validated positive");
    let eps = params.epsilon();
    let mut length = eps;
    loop {
        let g = gap.sample(rng);
        if g > eps {
            return length;
        }
        length += g;
    }
}

/// Distance from the start of one cluster to the start of the `n`-th next.
pub fn sample_start_distance<R: Rng + ?Sized>(params: &ModelParams, n: usize, rng: &mut R) -> f64 {
    let gap = Exp::new(params.lambda()).expect("lambda validated positive");
    let eps = params.epsilon();
    let (mut x, mut starts) = (0.0, 0);
    while starts < n {
        let g = gap.sample(rng);
        x += g;
        if g > eps {
            starts += 1;
        }
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Complete,
    Incomplete,
    Circle,
    Coverage,
    BLaw,
    ULaw(usize),
}

impl Scenario {
    pub fn is_continuous(&self) -> bool {
        matches!(self, Self::BLaw | Self::ULaw(_))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Complete => f.write_str("complete"),
            Self::Incomplete => f.write_str("incomplete"),
            Self::Circle => f.write_str("circle"),
            Self::Coverage => f.write_str("coverage"),
            Self::BLaw => f.write_str("B"),
            Self::ULaw(n) => write!(f, "U{n}"),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    /// Accepts `complete`, `incomplete`, `circle`, `coverage`, `B` and `U<n>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter {
            name: "scenario",
            reason: format!("unknown scenario {s:?}"),
        };
        Ok(match s {
            "complete" => Self::Complete,
            "incomplete" => Self::Incomplete,
            "circle" => Self::Circle,
            "coverage" => Self::Coverage,
            "B" | "b" => Self::BLaw,
            _ => {
                let n = s
                    .strip_prefix(['U', 'u'])
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&n| n >= 1)
                    .ok_or_else(bad)?;
                Self::ULaw(n)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmpiricalDistribution {
    pub counts: BTreeMap<usize, u64>,
    pub total: u64,
}

impl EmpiricalDistribution {
    pub fn from_outcomes<I: IntoIterator<Item = usize>>(outcomes: I) -> Self {
        let mut d = Self {
            counts: BTreeMap::new(),
            total: 0,
        };
        for n in outcomes {
            d.record(n);
        }
        d
    }

    pub fn record(&mut self, n: usize) {
        *self.counts.entry(n).or_insert(0) += 1;
        self.total += 1;
    }

    fn merge(mut self, other: Self) -> Self {
        for (n, c) in other.counts {
            *self.counts.entry(n).or_insert(0) += c;
        }
        self.total += other.total;
        self
    }

    pub fn count(&self, n: usize) -> u64 {
        self.counts.get(&n).copied().unwrap_or(0)
    }

    pub fn estimate(&self, n: usize) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.count(n) as f64 / self.total as f64
    }

    pub fn std_error(&self, n: usize) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let p = self.estimate(n);
        (p * (1.0 - p) / self.total as f64).sqrt()
    }

    pub fn max_outcome(&self) -> Option<usize> {
        self.counts.keys().next_back().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Estimate {
    Counts(EmpiricalDistribution),
    /// Sorted sample of a continuous variable.
    Sample(Vec<f64>),
}

fn run_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if threads <= 1 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Contract(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(job))
}

/// Runs `config.replications` independent experiments of `scenario`.
///
/// `length` is ignored by the B and U scenarios; coverage counts 1 for a
/// covered interval and 0 otherwise.
pub fn estimate(
    params: &ModelParams,
    scenario: Scenario,
    length: f64,
    config: &SampleConfig,
) -> Result<Estimate> {
    if !(length > 0.0 && length.is_finite()) && !scenario.is_continuous() {
        return Err(Error::InvalidParameter {
            name: "length",
            reason: format!("must be finite and > 0, got {length}"),
        });
    }
    if config.replications == 0 {
        return Err(Error::InvalidParameter {
            name: "replications",
            reason: "must be at least 1".into(),
        });
    }
    let p = *params;
    let eps = p.epsilon();
    let reps = config.replications;
    let outcome = move |r: u64| -> usize {
        let rng = &mut substream(config.seed, r);
        match scenario {
            Scenario::Complete | Scenario::Incomplete => {
                let d = decompose(&sample_interval(&p, length, rng), eps)
                    .expect("sampled points are sorted");
                if scenario == Scenario::Complete {
                    d.complete_count
                } else {
                    d.incomplete_count
                }
            }
            Scenario::Circle => circle_chi(&sample_circle(&p, length, rng), eps),
            Scenario::Coverage => usize::from(coverage_indicator(&sample_interval(&p, length, rng), eps)),
            Scenario::BLaw | Scenario::ULaw(_) => unreachable!(),
        }
    };
    let threads = config.parallelism_hint;
    match scenario {
        Scenario::BLaw | Scenario::ULaw(_) => {
            let draw = move |r: u64| {
                let rng = &mut substream(config.seed, r);
                match scenario {
                    Scenario::ULaw(n) => sample_start_distance(&p, n, rng),
                    _ => sample_cluster_length(&p, rng),
                }
            };
            let mut sample: Vec<f64> = if threads <= 1 {
                (0..reps).map(draw).collect()
            } else {
                run_pool(threads, || (0..reps).into_par_iter().map(draw).collect())?
            };
            sample.sort_by(f64::total_cmp);
            Ok(Estimate::Sample(sample))
        }
        _ => {
            let dist = if threads <= 1 {
                EmpiricalDistribution::from_outcomes((0..reps).map(outcome))
            } else {
                run_pool(threads, || {
                    (0..reps)
                        .into_par_iter()
                        .fold(
                            || EmpiricalDistribution::from_outcomes(None),
                            |mut d, r| {
                                d.record(outcome(r));
                                d
                            },
                        )
                        .reduce(|| EmpiricalDistribution::from_outcomes(None), EmpiricalDistribution::merge)
                })?
            };
            Ok(Estimate::Counts(dist))
        }
    }
}
