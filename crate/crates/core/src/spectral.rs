//! Closed-form TV spectral decomposition of a 1D flow.
//!
//! The flow decays as `psi(t) = mean + sum_i (1 + lambda_i t)^+ phi_i` with
//! `lambda_i = -1/T_i` and `phi_i = (p_i - p_{i+1}) / lambda_i`. Its spectrum
//! `t psi''(t)` is a finite set of atoms located at the transition times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tv1d::{dot, norm, PiecewiseFlow, Signal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralComponent {
    /// Decay rate `-1/T_i`.
    pub lambda: f64,
    pub phi: Vec<f64>,
}

impl SpectralComponent {
    /// Transition time at which the component vanishes.
    pub fn time(&self) -> f64 {
        -1.0 / self.lambda
    }

    pub fn norm(&self) -> f64 {
        norm(&self.phi)
    }
}

/// Spectral components ordered by transition time, plus the constant part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectralFile", into = "SpectralFile")]
pub struct SpectralSet {
    pub mean: f64,
    pub components: Vec<SpectralComponent>,
}

#[derive(Serialize, Deserialize)]
struct SpectralFile {
    mean: f64,
    lambdas: Vec<f64>,
    phis: Vec<Vec<f64>>,
}

impl TryFrom<SpectralFile> for SpectralSet {
    type Error = Error;

    fn try_from(f: SpectralFile) -> Result<Self> {
        if f.lambdas.len() != f.phis.len() {
            return Err(Error::invalid("lambdas and phis differ in length"));
        }
        if f.lambdas.iter().any(|&l| !(l < 0.0 && l.is_finite())) {
            return Err(Error::invalid("spectral rates must be finite and negative"));
        }
        if f.phis.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(Error::invalid("components differ in length"));
        }
        Ok(SpectralSet {
            mean: f.mean,
            components: f
                .lambdas
                .into_iter()
                .zip(f.phis)
                .map(|(lambda, phi)| SpectralComponent { lambda, phi })
                .collect(),
        })
    }
}

impl From<SpectralSet> for SpectralFile {
    fn from(s: SpectralSet) -> Self {
        let (lambdas, phis) = s.components.into_iter().map(|c| (c.lambda, c.phi)).unzip();
        SpectralFile {
            mean: s.mean,
            lambdas,
            phis,
        }
    }
}

/// One atom of the spectrum: location `t_i = T_i` and mass `|lambda_i| ||phi_i||`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumAtom {
    pub time: f64,
    pub mass: f64,
}

impl SpectralSet {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.lambda).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.components.iter().map(SpectralComponent::time).collect()
    }

    /// Signal length, when there is at least one component.
    pub fn signal_len(&self) -> Option<usize> {
        self.components.first().map(|c| c.phi.len())
    }

    /// `mean + sum_i phi_i` over a signal of length `len`.
    pub fn reconstruct(&self, len: usize) -> Vec<f64> {
        let mut out = vec![self.mean; len];
        for c in &self.components {
            out.iter_mut().zip(&c.phi).for_each(|(o, v)| *o += v);
        }
        out
    }

    /// Closed-form flow `mean + sum_i (1 + lambda_i t)^+ phi_i`.
    pub fn evaluate(&self, len: usize, t: f64) -> Vec<f64> {
        let mut out = vec![self.mean; len];
        for c in &self.components {
            let w = (1.0 + c.lambda * t).max(0.0);
            if w > 0.0 {
                out.iter_mut().zip(&c.phi).for_each(|(o, v)| *o += w * v);
            }
        }
        out
    }

    /// Largest `|<phi_i, phi_j>| / (||phi_i|| ||phi_j||)` over pairs.
    pub fn max_cross_correlation(&self) -> f64 {
        let norms: Vec<f64> = self.components.iter().map(SpectralComponent::norm).collect();
        let mut worst: f64 = 0.0;
        for i in 0..self.components.len() {
            for j in i + 1..self.components.len() {
                let d = norms[i] * norms[j];
                if d > 0.0 {
                    worst = worst.max(dot(&self.components[i].phi, &self.components[j].phi).abs() / d);
                }
            }
        }
        worst
    }
}

/// Spectral components of an exact flow.
pub fn decompose(flow: &PiecewiseFlow) -> SpectralSet {
    let m = flow.initial().len();
    let zero = vec![0.0; m];
    let subs = flow.subgradients();
    let components = flow
        .times()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let next: &[f64] = subs.get(i + 1).map(|p| p.values()).unwrap_or(&zero);
            SpectralComponent {
                lambda: -1.0 / t,
                phi: subs[i].iter().zip(next).map(|(a, b)| -t * (a - b)).collect(),
            }
        })
        .collect();
    SpectralSet {
        mean: flow.mean(),
        components,
    }
}

/// Scalar spectrum: one atom per component at `T_i` with mass `||phi_i|| t_i lambda_i^2`.
pub fn spectrum(set: &SpectralSet) -> Vec<SpectrumAtom> {
    set.components
        .iter()
        .map(|c| {
            let t = c.time();
            SpectrumAtom {
                time: t,
                mass: c.norm() * t * c.lambda * c.lambda,
            }
        })
        .collect()
}

/// Sum of the components with `t_lo <= T_i < t_hi`, optionally plus the mean.
pub fn filter_band(set: &SpectralSet, len: usize, t_lo: f64, t_hi: f64, include_mean: bool) -> Result<Signal> {
    if !(t_lo >= 0.0 && t_lo < t_hi) {
        return Err(Error::invalid(format!("band [{t_lo}, {t_hi}) must satisfy 0 <= lo < hi")));
    }
    if let Some(n) = set.signal_len() {
        if n != len {
            return Err(Error::invalid(format!("components have length {n}, requested {len}")));
        }
    }
    let mut out = vec![if include_mean { set.mean } else { 0.0 }; len];
    for c in set.components.iter().filter(|c| {
        let t = c.time();
        t_lo <= t && t < t_hi
    }) {
        out.iter_mut().zip(&c.phi).for_each(|(o, v)| *o += v);
    }
    Signal::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tv1d::evolve;

    fn set_of(v: &[f64]) -> SpectralSet {
        decompose(&evolve(&Signal::new(v.to_vec()).unwrap(), 0.0).unwrap())
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn pulse_is_one_component() {
        let s = set_of(&[0., 0., 1., 1., 0., 0.]);
        assert!((s.mean - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.len(), 1);
        assert!((s.components[0].lambda + 1.5).abs() < 1e-14);
        let third = 1.0 / 3.0;
        assert!(close(
            &s.components[0].phi,
            &[-third, -third, 2. * third, 2. * third, -third, -third],
            1e-15
        ));
    }

    #[test]
    fn three_point_components() {
        let s = set_of(&[0., 2., 1.]);
        assert_eq!(s.mean, 1.0);
        assert!(close(&s.lambdas(), &[-3.0, -1.0], 1e-14));
        assert!(close(&s.components[0].phi, &[0., 0.5, -0.5], 1e-15));
        assert!(close(&s.components[1].phi, &[-1., 0.5, 0.5], 1e-15));
        assert!(dot(&s.components[0].phi, &s.components[1].phi).abs() < 1e-15);
        assert!(close(&s.reconstruct(3), &[0., 2., 1.], 1e-15));
    }

    #[test]
    fn constant_is_mean_only() {
        let s = set_of(&[2.5; 4]);
        assert_eq!(s.mean, 2.5);
        assert!(s.is_empty());
        assert!(spectrum(&s).is_empty());
    }

    #[test]
    fn spectrum_atom_mass() {
        let s = set_of(&[0., 0., 1., 1., 0., 0.]);
        let atoms = spectrum(&s);
        assert_eq!(atoms.len(), 1);
        assert!((atoms[0].time - 2.0 / 3.0).abs() < 1e-15);
        let expected = 1.5 * (4.0f64 / 3.0).sqrt();
        assert!((atoms[0].mass - expected).abs() < 1e-14);
    }

    #[test]
    fn band_filtering() {
        let s = set_of(&[0., 2., 1.]);
        let b = filter_band(&s, 3, 0.0, 0.5, false).unwrap();
        assert!(close(&b, &[0., 0.5, -0.5], 1e-15));
        let all = filter_band(&s, 3, 0.0, 10.0, true).unwrap();
        assert!(close(&all, &[0., 2., 1.], 1e-15));
        let empty = filter_band(&s, 3, 2.0, 3.0, false).unwrap();
        assert_eq!(empty.values(), &[0.0; 3]);
        assert!(filter_band(&s, 3, 0.5, 0.5, false).is_err());
        assert!(filter_band(&s, 4, 0.0, 1.0, false).is_err());
    }

    #[test]
    fn closed_form_matches_sampling() {
        let f = Signal::new(vec![0.2, 0.9, 0.4, 0.4, 0.8, 0.1, 0.6]).unwrap();
        let flow = evolve(&f, 0.0).unwrap();
        let s = decompose(&flow);
        for k in 0..40 {
            let t = k as f64 * flow.extinction_time() / 30.0;
            assert!(close(&s.evaluate(7, t), &flow.sample(t).unwrap(), 1e-12));
        }
    }

    #[test]
    fn json_layout() {
        let s = set_of(&[0., 2., 1.]);
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["mean"], 1.0);
        assert_eq!(v["lambdas"].as_array().unwrap().len(), 2);
        let back: SpectralSet = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }
}
