//! Exact laws for the number of connected components of the one-dimensional
//! Poisson random geometric graph.
//!
//! Points of a homogeneous Poisson process of intensity `lambda` are dropped on
//! an interval `[0, L]` (or a circle of circumference `L`), and two points are
//! linked when they are at most `epsilon` apart. A cluster is a maximal chain of
//! linked points; it occupies `[first point, last point + epsilon]`.
//!
//! The crate provides:
//!
//! - closed-form pmf and moments of the number of complete clusters, the number
//!   of clusters touching the interval, and the circle count ([`component_counts`]);
//! - the laws of the cluster length and of the distance between cluster starts
//!   ([`cluster_laws`]);
//! - numerical forward Laplace transforms used to cross-check every transform
//!   ([`laplace_check`]);
//! - a reproducible Monte Carlo simulator of the underlying point process
//!   ([`mc_engine`]) and the statistics that compare it with the closed forms
//!   ([`stats_compare`]).

pub mod cluster_laws;
pub mod component_counts;
pub mod error;
pub mod laplace_check;
pub mod mc_engine;
pub mod model;
pub mod quadrature;
pub mod special_fn;
pub mod stats_compare;

pub use error::{Error, PrecisionWarning, Result};
pub use model::{IntervalModel, ModelParams};
