//! Decay-profile mode decomposition with Koopman modes.
//!
//! Snapshots of a zero-homogeneous flow are fitted as `Psi ~ V D`, where each
//! row of `D` samples a truncated linear profile `(1 + lambda t)^+`. Columns
//! of `V` are selected greedily from a dictionary of candidate rates.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dmd::thin_svd;
use crate::error::{Error, Result};
use crate::tv1d::Signal;

/// Largest condition number accepted for the active profile rows.
pub const MAX_CONDITION: f64 = 1e10;

/// Tolerance above 1 still accepted for a projected profile coefficient.
pub const COEFFICIENT_SLACK: f64 = 1e-9;

/// Decay profile `(1 + lambda t)^+`.
pub fn decay_profile(lambda: f64, t: f64) -> f64 {
    (1.0 + lambda * t).max(0.0)
}

/// Candidate profiles sampled on `t_j = j dt`; row 0 is the constant profile.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileDictionary {
    /// Rates of the rows, `0` first.
    pub lambdas: Vec<f64>,
    pub dt: f64,
    /// `lambdas.len() x samples`.
    pub matrix: DMatrix<f64>,
}

impl ProfileDictionary {
    pub fn samples(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).iter().copied().collect()
    }
}

/// Builds the profile dictionary for the given negative rates.
pub fn build_dictionary(lambdas: &[f64], dt: f64, samples: usize) -> Result<ProfileDictionary> {
    if lambdas.is_empty() {
        return Err(Error::invalid("dictionary needs at least one rate"));
    }
    if let Some(l) = lambdas.iter().find(|&&l| !(l < 0.0 && l.is_finite())) {
        return Err(Error::invalid(format!("dictionary rates must be negative, got {l}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt must be positive"));
    }
    if samples == 0 {
        return Err(Error::invalid("dictionary needs at least one sample"));
    }
    let mut rates = Vec::with_capacity(lambdas.len() + 1);
    rates.push(0.0);
    rates.extend_from_slice(lambdas);
    let matrix = DMatrix::from_fn(rates.len(), samples, |i, j| decay_profile(rates[i], j as f64 * dt));
    Ok(ProfileDictionary {
        lambdas: rates,
        dt,
        matrix,
    })
}

/// Sparse decay-profile fit of a snapshot matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    #[serde(rename = "lambdas")]
    pub active_lambdas: Vec<f64>,
    /// One spatial mode per active rate.
    pub modes: Vec<Vec<f64>>,
    /// `||Psi - V D||_F / ||Psi||_F` of the returned modes.
    pub residual: f64,
    /// Dictionary rows of the active rates.
    #[serde(skip)]
    pub active: Vec<usize>,
    /// Relative residual after each greedy step, starting at 1.
    #[serde(skip)]
    pub residual_history: Vec<f64>,
    /// Set when the selection stopped because the next atom made the active set ill-conditioned.
    #[serde(skip)]
    pub ill_conditioned: bool,
}

struct Refit {
    modes: DMatrix<f64>,
    residual: f64,
    condition: f64,
}

/// Least-squares modes for the rows `active` of the dictionary.
fn refit(snapshots: &DMatrix<f64>, dict: &ProfileDictionary, active: &[usize], psi_norm: f64) -> Refit {
    let d = DMatrix::from_fn(active.len(), dict.samples(), |i, j| dict.matrix[(active[i], j)]);
    // Psi^T = D^T V^T; D^T = U S W^T.
    let (u, s, w) = thin_svd(&d.transpose());
    let smax = s.first().copied().unwrap_or(0.0);
    let smin = s.last().copied().unwrap_or(0.0);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let cutoff = smax * f64::EPSILON * dict.samples() as f64;
    let s_inv = DVector::from_iterator(s.len(), s.iter().map(|&x| if x > cutoff { 1.0 / x } else { 0.0 }));
    let v_t = &w * DMatrix::from_diagonal(&s_inv) * u.transpose() * snapshots.transpose();
    let modes = v_t.transpose();
    let residual = (snapshots - &modes * &d).norm() / psi_norm;
    Refit {
        modes,
        residual,
        condition,
    }
}

/// Greedy sparse fit of `snapshots` (space x time) on `dict`.
///
/// Each step adds the dictionary row that most reduces the residual after a
/// full least-squares refit, until `budget` atoms are active or the relative
/// residual drops below `threshold`. Modes with norm below
/// `threshold * ||Psi||` are pruned at the end and the rest refitted.
pub fn fit(snapshots: &DMatrix<f64>, dict: &ProfileDictionary, budget: usize, threshold: f64) -> Result<DecayFit> {
    if snapshots.ncols() != dict.samples() {
        return Err(Error::invalid(format!(
            "snapshots have {} time samples, dictionary has {}",
            snapshots.ncols(),
            dict.samples()
        )));
    }
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::invalid("threshold must be >= 0"));
    }
    let psi_norm = snapshots.norm();
    let mut out = DecayFit {
        active_lambdas: Vec::new(),
        modes: Vec::new(),
        residual: 0.0,
        active: Vec::new(),
        residual_history: vec![1.0],
        ill_conditioned: false,
    };
    if psi_norm == 0.0 || budget == 0 {
        out.residual = if psi_norm == 0.0 { 0.0 } else { 1.0 };
        return Ok(out);
    }

    let mut active: Vec<usize> = Vec::new();
    let mut residual = 1.0;
    while active.len() < budget.min(dict.len()) && residual >= threshold {
        let scored: Vec<(usize, Refit)> = (0..dict.len())
            .into_par_iter()
            .filter(|j| !active.contains(j))
            .map(|j| {
                let mut trial = active.clone();
                trial.push(j);
                (j, refit(snapshots, dict, &trial, psi_norm))
            })
            .collect();
        let Some((j, best)) = scored
            .into_iter()
            .min_by(|a, b| a.1.residual.total_cmp(&b.1.residual).then(a.0.cmp(&b.0)))
        else {
            break;
        };
        if best.condition > MAX_CONDITION {
            out.ill_conditioned = true;
            break;
        }
        if best.residual >= residual {
            break;
        }
        active.push(j);
        residual = best.residual;
        out.residual_history.push(residual);
    }

    if active.is_empty() {
        out.residual = 1.0;
        return Ok(out);
    }

    let mut current = refit(snapshots, dict, &active, psi_norm);
    let keep: Vec<usize> = (0..active.len())
        .filter(|&i| current.modes.column(i).norm() >= threshold * psi_norm)
        .collect();
    if keep.len() < active.len() && !keep.is_empty() {
        active = keep.iter().map(|&i| active[i]).collect();
        current = refit(snapshots, dict, &active, psi_norm);
    }

    out.active_lambdas = active.iter().map(|&i| dict.lambdas[i]).collect();
    out.modes = (0..active.len())
        .map(|i| current.modes.column(i).iter().copied().collect())
        .collect();
    out.residual = current.residual;
    out.active = active;
    Ok(out)
}

/// Outcome of evaluating one Koopman eigenfunction at a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Eigenfunction {
    /// Constant profile: no time information, only the projected coefficient.
    Stationary { coefficient: f64 },
    /// Coefficient in `(0, 1]`: inferred time `t = (rho - 1) / lambda` and value `exp(t)`.
    Value { coefficient: f64, time: f64, value: f64 },
    /// Coefficient outside `(0, 1]`: the state is off the trajectory or past this mode's extinction.
    OffTrajectory { coefficient: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KoopmanEntry {
    pub lambda: f64,
    pub eigenfunction: Eigenfunction,
}

impl KoopmanEntry {
    pub fn time(&self) -> Option<f64> {
        match self.eigenfunction {
            Eigenfunction::Value { time, .. } => Some(time),
            _ => None,
        }
    }
}

/// Evaluates the Koopman eigenfunctions of a fit at `psi`.
///
/// The state is projected onto the modes by least squares, and each decaying
/// profile is inverted to the time at which it takes the projected value.
pub fn koopman_eigenfunction(fit: &DecayFit, psi: &Signal) -> Result<Vec<KoopmanEntry>> {
    if fit.modes.is_empty() {
        return Ok(Vec::new());
    }
    let m = psi.len();
    if fit.modes.iter().any(|v| v.len() != m) {
        return Err(Error::invalid("state length differs from the mode length"));
    }
    let v = DMatrix::from_fn(m, fit.modes.len(), |i, j| fit.modes[j][i]);
    let (u, s, w) = thin_svd(&v);
    let smax = s.first().copied().unwrap_or(0.0);
    if s.last().is_none_or(|&x| x <= smax * 1e-12) {
        return Err(Error::invalid("fit modes are not linearly independent"));
    }
    let s_inv = DMatrix::from_diagonal(&DVector::from_iterator(s.len(), s.iter().map(|x| 1.0 / x)));
    let rho = &w * s_inv * u.transpose() * DVector::from_column_slice(psi.values());

    Ok(fit
        .active_lambdas
        .iter()
        .zip(rho.iter())
        .map(|(&lambda, &coefficient)| {
            let eigenfunction = if lambda == 0.0 {
                Eigenfunction::Stationary { coefficient }
            } else if coefficient > 0.0 && coefficient <= 1.0 + COEFFICIENT_SLACK {
                let time = (coefficient.min(1.0) - 1.0) / lambda;
                Eigenfunction::Value {
                    coefficient,
                    time,
                    value: time.exp(),
                }
            } else {
                Eigenfunction::OffTrajectory { coefficient }
            };
            KoopmanEntry { lambda, eigenfunction }
        })
        .collect())
}
