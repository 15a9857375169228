//! Exact semi-discrete 1D TV flow with Neumann boundaries.
//!
//! The negative subgradient of a piecewise monotone signal is read off its
//! extremal structure: each extremum plateau of `m` samples moves with
//! velocity `-a/m`, where `a` is `±1` at the boundary and `±2` inside
//! (positive on maxima). Between merge events the flow is linear in time, so
//! [`evolve`] jumps from one event to the next and records the constant
//! velocity of every segment.

mod flow;
mod plateau;
mod scalar;

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use flow::{evolve, evolve_exact, evolve_with_trace, sample, ExactFlow, PiecewiseFlow};
pub use plateau::{detect_plateaus, Cluster, ExtremumKind, PlateauPartition};
pub use scalar::{FlowScalar, EVENT_TIE_RTOL};

pub(crate) use plateau::{classify, cluster_velocities, detect_runs, expand, run_value};

/// A finite 1D signal with implicit Neumann boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Signal(Vec<f64>);

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("signal must have at least one sample"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Signal(values))
    }

    pub fn constant(len: usize, value: f64) -> Result<Self> {
        Signal::new(vec![value; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn mean(&self) -> f64 {
        mean(&self.0)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// Discrete total variation `sum |f[j+1] - f[j]|`.
    pub fn total_variation(&self) -> f64 {
        self.0.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }
}

impl Deref for Signal {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Signal {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Signal::new(v)
    }
}

impl From<Signal> for Vec<f64> {
    fn from(s: Signal) -> Self {
        s.0
    }
}

/// Velocity field `p` of the flow (`-p` is a TV subgradient).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NegSubgradient(Vec<f64>);

impl NegSubgradient {
    pub fn new(values: Vec<f64>) -> Self {
        NegSubgradient(values)
    }

    pub fn zeros(len: usize) -> Self {
        NegSubgradient(vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn mean(&self) -> f64 {
        mean(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

impl Deref for NegSubgradient {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Fast negative subgradient of `J_TV` at `f`.
///
/// Samples closer than `tol` to a neighbour are treated as one plateau. The
/// result is constant on each plateau, zero on monotone runs, and has zero mean.
pub fn subgradient(f: &Signal, tol: f64) -> NegSubgradient {
    NegSubgradient(subgradient_of(f.values(), tol))
}

pub(crate) fn subgradient_of(f: &[f64], tol: f64) -> Vec<f64> {
    let tol = tol.max(0.0);
    let runs = detect_runs(f, &tol);
    let values: Vec<f64> = runs.iter().map(|r| run_value(&f[r.clone()])).collect();
    let kinds = classify(&values);
    let sizes: Vec<usize> = runs.iter().map(|r| r.len()).collect();
    let vel: Vec<f64> = cluster_velocities(&kinds, &sizes);
    let p = expand(&runs, &vel, f.len());
    debug_assert!(mean(&p).abs() <= 1e-12, "subgradient mean {}", mean(&p));
    p
}

/// Time of the next merge of two adjacent samples moving with velocity `p`,
/// or `None` when no gap is closing (steady state).
///
/// Adjacent samples that are already equal are part of a plateau and do not
/// count as a future merge.
pub fn next_merge_time(psi: &Signal, p: &NegSubgradient, t_now: f64) -> Option<f64> {
    psi.windows(2)
        .zip(p.windows(2))
        .filter_map(|(s, v)| {
            let grad = s[1] - s[0];
            let dp = v[1] - v[0];
            let ratio = -grad / dp;
            (ratio > 0.0 && ratio.is_finite()).then_some(ratio)
        })
        .min_by(f64::total_cmp)
        .map(|dt| t_now + dt)
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
