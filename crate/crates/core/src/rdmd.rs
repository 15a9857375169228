//! Time-rescaled TV flow and its DMD.
//!
//! Under the rescaling `psi_tau = -(<p, psi> / ||p||^2) p` the piecewise linear
//! TV flow becomes piecewise exponential: on segment `k` it is exactly
//! `xi1_k + exp(-tau) xi2_k` with orthogonal `xi1_k`, `xi2_k`. DMD fits such
//! data exactly, with eigenvalues `1` and `exp(-dt)`.
//!
//! Everything here works on the zero-mean part of the signal; the mean is
//! stationary under both flows and is added back by the samplers.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dmd::exact_dmd;
use crate::error::{Error, Result};
use crate::spectral::{decompose, SpectralComponent, SpectralSet};
use crate::tv1d::{dot, evolve, norm, subgradient, PiecewiseFlow, Signal};

/// The last segment is sampled until its decaying mode has shrunk by this factor.
pub const LAST_SEGMENT_DECAY: f64 = 1e-6;

/// Samples per segment when no step is given.
pub const DEFAULT_SAMPLES_PER_SEGMENT: f64 = 64.0;

/// Map between flow time `t` and rescaled time `tau`.
///
/// On segment `k` (1-based), `t(tau) = a_k exp(-tau) - c_k`, where
/// `c_k = sum_{i>=k} lambda_i ||phi_i||^2 / sum_{i>=k} lambda_i^2 ||phi_i||^2`
/// and `a_k` makes `t` continuous with `t(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reparametrization {
    pub mean: f64,
    pub lambdas: Vec<f64>,
    /// Transition times `T_1..T_L`.
    pub times: Vec<f64>,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    /// `tau_0 = 0, tau_1, ..., tau_{L-1}`; `tau_L` is infinite and not stored.
    pub tau: Vec<f64>,
}

impl Reparametrization {
    pub fn num_segments(&self) -> usize {
        self.times.len()
    }

    fn t_start(&self, k: usize) -> f64 {
        if k == 0 { 0.0 } else { self.times[k - 1] }
    }

    /// Rescaled end of segment `k` (0-based); infinite for the last one.
    pub fn tau_end(&self, k: usize) -> f64 {
        self.tau.get(k + 1).copied().unwrap_or(f64::INFINITY)
    }

    /// 0-based segment containing `tau`.
    pub fn segment_of_tau(&self, tau: f64) -> usize {
        self.tau.partition_point(|&s| s <= tau).saturating_sub(1)
    }

    pub fn t_of_tau(&self, tau: f64) -> f64 {
        let k = self.segment_of_tau(tau);
        let t0 = self.t_start(k);
        (t0 + self.c[k]) * (-(tau - self.tau[k])).exp() - self.c[k]
    }

    /// Inverse map; `t >= T_L` maps to infinity.
    pub fn tau_of_t(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&ti| ti <= t);
        if k >= self.times.len() {
            return f64::INFINITY;
        }
        let t0 = self.t_start(k);
        self.tau[k] + ((t0 + self.c[k]) / (t + self.c[k])).ln()
    }

    /// Multiplier `exp(-tau_{k-1})` relating the anchored decaying mode to `xi2_k`.
    fn anchor(&self, k: usize) -> f64 {
        (-self.tau[k]).exp()
    }
}

/// Builds the `t <-> tau` map from a spectral decomposition.
pub fn reparametrize(set: &SpectralSet) -> Result<Reparametrization> {
    let l = set.len();
    if l == 0 {
        return Err(Error::invalid("rescaling needs at least one spectral component"));
    }
    let lambdas = set.lambdas();
    let times = set.times();
    let sq: Vec<f64> = set.components.iter().map(|c| dot(&c.phi, &c.phi)).collect();

    let mut c = vec![0.0; l];
    let (mut num, mut den) = (0.0, 0.0);
    for k in (0..l).rev() {
        num += lambdas[k] * sq[k];
        den += lambdas[k] * lambdas[k] * sq[k];
        c[k] = num / den;
    }

    let mut tau: Vec<f64> = vec![0.0; l];
    let mut a = vec![0.0; l];
    a[0] = c[0];
    for k in 0..l {
        let t0 = if k == 0 { 0.0 } else { times[k - 1] };
        if k > 0 {
            a[k] = (t0 + c[k]) * tau[k].exp();
        }
        if k + 1 < l {
            let ratio = (t0 + c[k]) / (times[k] + c[k]);
            assert!(
                ratio > 1.0 && ratio.is_finite(),
                "degenerate rescaled segment {k}: ratio {ratio}"
            );
            tau[k + 1] = tau[k] + ratio.ln();
        }
    }

    Ok(Reparametrization {
        mean: set.mean,
        lambdas,
        times,
        a,
        c,
        tau,
    })
}

/// Analytic two-mode form of segment `k` (0-based): `(xi1, anchored xi2)` with
/// the flow equal to `xi1 + exp(-(tau - tau_k)) * anchored` on the segment.
fn segment_pair(set: &SpectralSet, rep: &Reparametrization, k: usize) -> (Vec<f64>, Vec<f64>) {
    let m = set.signal_len().unwrap_or(0);
    let mut sum_phi = vec![0.0; m];
    let mut sum_lphi = vec![0.0; m];
    for comp in &set.components[k..] {
        for j in 0..m {
            sum_phi[j] += comp.phi[j];
            sum_lphi[j] += comp.lambda * comp.phi[j];
        }
    }
    let xi1: Vec<f64> = sum_phi.iter().zip(&sum_lphi).map(|(p, l)| p - rep.c[k] * l).collect();
    let scale = rep.t_start(k) + rep.c[k];
    let anchored: Vec<f64> = sum_lphi.iter().map(|l| scale * l).collect();
    (xi1, anchored)
}

/// Analytic modes `(xi1_k, xi2_k)` for every segment, with `xi2_k` in the
/// absolute form `psi = xi1 + exp(-tau) xi2`.
pub fn analytic_modes(set: &SpectralSet, rep: &Reparametrization) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..set.len())
        .map(|k| {
            let (xi1, anchored) = segment_pair(set, rep, k);
            let lift = 1.0 / rep.anchor(k);
            (xi1, anchored.into_iter().map(|v| v * lift).collect())
        })
        .collect()
}

/// Zero-mean rescaled flow at `tau`.
fn rescaled_centered(set: &SpectralSet, rep: &Reparametrization, tau: f64) -> Vec<f64> {
    let k = rep.segment_of_tau(tau);
    let (xi1, anchored) = segment_pair(set, rep, k);
    let w = (-(tau - rep.tau[k])).exp();
    xi1.iter().zip(&anchored).map(|(a, b)| a + w * b).collect()
}

/// Rescaled flow `psi(t(tau))` from the two-mode form of the active segment.
pub fn rescaled_flow_sample(set: &SpectralSet, rep: &Reparametrization, tau: f64) -> Result<Signal> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::NegativeTime(tau));
    }
    let mut v = rescaled_centered(set, rep, tau);
    v.iter_mut().for_each(|x| *x += set.mean);
    Signal::new(v)
}

/// DMD of one rescaled segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentModes {
    /// 0-based segment index.
    pub segment: usize,
    pub tau_lo: f64,
    /// Upper end of the sampled range; for the last segment this is the truncation horizon.
    pub tau_hi: f64,
    pub dt: f64,
    pub samples: usize,
    /// Constant mode (zero on the last segment).
    pub xi1: Vec<f64>,
    /// Decaying mode in the absolute form `psi = xi1 + exp(-tau) xi2`.
    pub xi2: Vec<f64>,
    /// `[mu_1, mu_2]`: constant then decaying (only the decaying one on the last segment).
    pub eigenvalues: Vec<f64>,
    /// `[alpha_1, alpha_2] = [||xi1||, ||xi2||]`, matching `eigenvalues`.
    pub coefficients: Vec<f64>,
    /// Largest imaginary part among the DMD eigenvalues (0 for exact data).
    pub max_imag: f64,
    /// `||X - X_dmd||_F / ||X||_F` over the segment snapshots.
    pub reconstruction_error: f64,
}

impl SegmentModes {
    pub fn mode1(&self) -> Vec<f64> {
        unit(&self.xi1)
    }

    pub fn mode2(&self) -> Vec<f64> {
        unit(&self.xi2)
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    if n == 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| x / n).collect()
}

/// Sampling plan for segment `k`: `(tau_lo, tau_hi, dt, count)`.
fn segment_grid(rep: &Reparametrization, k: usize, dt: Option<f64>) -> Result<(f64, f64, f64, usize)> {
    let lo = rep.tau[k];
    let hi = if k + 1 == rep.num_segments() {
        lo - LAST_SEGMENT_DECAY.ln()
    } else {
        rep.tau_end(k)
    };
    let step = dt.unwrap_or((hi - lo) / DEFAULT_SAMPLES_PER_SEGMENT);
    let count = ((hi - lo) / step * (1.0 + 1e-12)).floor() as usize + 1;
    if count < 3 {
        return Err(Error::UnderSampled {
            segment: k,
            samples: count,
            tau_lo: lo,
            tau_hi: hi,
            required_dt: (hi - lo) / 2.0,
        });
    }
    Ok((lo, hi, step, count))
}

/// R-DMD: rank-2 exact DMD on every rescaled segment (rank 1 on the last).
///
/// `dt` is the uniform sampling step in `tau`; `None` samples each segment
/// with 64 steps.
pub fn rdmd(f: &Signal, dt: Option<f64>) -> Result<Vec<SegmentModes>> {
    if let Some(step) = dt {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid("dt must be positive"));
        }
    }
    let set = decompose(&evolve(f, 0.0)?);
    if set.is_empty() {
        return Ok(Vec::new());
    }
    let rep = reparametrize(&set)?;
    rdmd_from(&set, &rep, dt)
}

/// R-DMD on an existing decomposition.
pub fn rdmd_from(set: &SpectralSet, rep: &Reparametrization, dt: Option<f64>) -> Result<Vec<SegmentModes>> {
    let l = set.len();
    let grids = (0..l).map(|k| segment_grid(rep, k, dt)).collect::<Result<Vec<_>>>()?;
    grids
        .into_par_iter()
        .enumerate()
        .map(|(k, (lo, hi, step, count))| segment_dmd(set, rep, k, lo, hi, step, count))
        .collect()
}

fn segment_dmd(
    set: &SpectralSet,
    rep: &Reparametrization,
    k: usize,
    lo: f64,
    hi: f64,
    step: f64,
    count: usize,
) -> Result<SegmentModes> {
    let m = set.signal_len().unwrap_or(0);
    let last = k + 1 == rep.num_segments();
    let (xi1_exact, anchored) = segment_pair(set, rep, k);
    let snapshots = DMatrix::from_fn(m, count, |i, n| {
        let w = (-(n as f64) * step).exp();
        xi1_exact[i] + w * anchored[i]
    });
    let rank = if last { 1 } else { 2 };
    let res = exact_dmd(&snapshots, rank)?;

    let reconstruction_error = (res.reconstruct(count) - &snapshots).norm() / snapshots.norm();
    let max_imag = res.eigenvalues.iter().map(|mu| mu.im.abs()).fold(0.0, f64::max);

    // The constant mode is the one whose eigenvalue is closest to 1.
    let one = Complex64::new(1.0, 0.0);
    let const_idx = if last || res.rank < 2 {
        None
    } else {
        (0..res.rank).min_by(|&i, &j| (res.eigenvalues[i] - one).norm().total_cmp(&(res.eigenvalues[j] - one).norm()))
    };
    let decay_idx = (0..res.rank).find(|&j| Some(j) != const_idx);

    let real_term = |j: usize| -> Vec<f64> { res.term(j).iter().map(|z| z.re).collect() };
    let xi1 = const_idx.map(real_term).unwrap_or_else(|| vec![0.0; m]);
    let lift = 1.0 / rep.anchor(k);
    let xi2: Vec<f64> = decay_idx
        .map(|j| real_term(j).into_iter().map(|v| v * lift).collect())
        .unwrap_or_else(|| vec![0.0; m]);

    let mut eigenvalues = Vec::new();
    let mut coefficients = Vec::new();
    if let Some(j) = const_idx {
        eigenvalues.push(res.eigenvalues[j].re);
        coefficients.push(norm(&xi1));
    }
    if let Some(j) = decay_idx {
        eigenvalues.push(res.eigenvalues[j].re);
        coefficients.push(norm(&xi2));
    }

    Ok(SegmentModes {
        segment: k,
        tau_lo: lo,
        tau_hi: hi,
        dt: step,
        samples: count,
        xi1,
        xi2,
        eigenvalues,
        coefficients,
        max_imag,
        reconstruction_error,
    })
}

/// Recovers the spectral components from R-DMD output.
///
/// Projecting `xi2_{k+1}` out of `xi2_k` leaves `a_k lambda_k phi_k`; the
/// known `a_k` and `lambda_k` from `rep` then give `phi_k` itself.
pub fn recover_components(segmods: &[SegmentModes], rep: &Reparametrization) -> Result<SpectralSet> {
    if segmods.len() != rep.num_segments() {
        return Err(Error::invalid(format!(
            "{} segments of modes for a map with {} segments",
            segmods.len(),
            rep.num_segments()
        )));
    }
    let mut components = Vec::with_capacity(segmods.len());
    for (k, seg) in segmods.iter().enumerate() {
        let mut v = seg.xi2.clone();
        if let Some(next) = segmods.get(k + 1) {
            let nn = dot(&next.xi2, &next.xi2);
            if nn.is_nan() || nn <= 0.0 || norm(&next.xi2) <= 1e-14 * norm(&seg.xi2) {
                return Err(Error::VanishingMode(k + 1));
            }
            let coef = dot(&seg.xi2, &next.xi2) / nn;
            v.iter_mut().zip(&next.xi2).for_each(|(a, b)| *a -= coef * b);
        }
        let scale = rep.a[k] * rep.lambdas[k];
        components.push(SpectralComponent {
            lambda: rep.lambdas[k],
            phi: v.into_iter().map(|x| x / scale).collect(),
        });
    }
    Ok(SpectralSet {
        mean: rep.mean,
        components,
    })
}

/// `sum ||X_k - X_dmd,k||_F^2` over segments, relative to `sum ||X_k||_F^2`.
pub fn rdmd_relative_error(segmods: &[SegmentModes], set: &SpectralSet, rep: &Reparametrization) -> f64 {
    let (mut err, mut total) = (0.0, 0.0);
    for seg in segmods {
        let m = seg.xi1.len();
        let (xi1, anchored) = segment_pair(set, rep, seg.segment);
        for n in 0..seg.samples {
            let w = (-(n as f64) * seg.dt).exp();
            let wm = (-(seg.tau_lo + n as f64 * seg.dt)).exp();
            for i in 0..m {
                let truth = xi1[i] + w * anchored[i];
                let model = seg.xi1[i] + wm * seg.xi2[i];
                err += (truth - model).powi(2);
                total += truth * truth;
            }
        }
    }
    (err / total).sqrt()
}

/// Plain exact DMD of the zero-mean flow sampled uniformly in `t`; returns the
/// relative Frobenius reconstruction error.
pub fn plain_dmd_relative_error(flow: &PiecewiseFlow, dt: f64, count: usize, rank: usize) -> Result<f64> {
    let m = flow.initial().len();
    let mean = flow.mean();
    let mut data = DMatrix::zeros(m, count);
    for n in 0..count {
        let s = flow.sample(n as f64 * dt)?;
        for i in 0..m {
            data[(i, n)] = s[i] - mean;
        }
    }
    let res = exact_dmd(&data, rank)?;
    Ok((res.reconstruct(count) - &data).norm() / data.norm())
}

/// Explicit Euler integration of the rescaled flow, recomputing the fast
/// subgradient every step. Validation only: first order in `dtau`.
///
/// Returns the states at `tau = n * dtau` for `n = 0..=steps`.
pub fn integrate_rescaled(f: &Signal, dtau: f64, steps: usize, plateau_tol: f64) -> Result<Vec<Signal>> {
    if dtau.is_nan() || dtau <= 0.0 {
        return Err(Error::invalid("dtau must be positive"));
    }
    let mean = f.mean();
    let mut psi: Vec<f64> = f.iter().map(|v| v - mean).collect();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(f.clone());
    for _ in 0..steps {
        let p = subgradient(&Signal::new(psi.clone())?, plateau_tol);
        let pp = dot(&p, &p);
        if pp > 0.0 {
            let coef = -dot(&p, &psi) / pp;
            psi.iter_mut().zip(p.iter()).for_each(|(x, v)| *x += dtau * coef * v);
        }
        out.push(Signal::new(psi.iter().map(|v| v + mean).collect())?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_of(v: &[f64]) -> SpectralSet {
        decompose(&evolve(&Signal::new(v.to_vec()).unwrap(), 0.0).unwrap())
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn single_component_map() {
        let set = set_of(&[0., 0., 1., 1., 0., 0.]);
        let rep = reparametrize(&set).unwrap();
        assert!((rep.c[0] + 2.0 / 3.0).abs() < 1e-14);
        assert!((rep.a[0] + 2.0 / 3.0).abs() < 1e-14);
        for tau in [0.0_f64, 0.5, 2.0, 10.0] {
            let expect = 2.0 / 3.0 * (1.0 - (-tau).exp());
            assert!((rep.t_of_tau(tau) - expect).abs() < 1e-14);
        }
        assert_eq!(rep.tau_end(0), f64::INFINITY);
    }

    #[test]
    fn three_point_map() {
        let set = set_of(&[0., 2., 1.]);
        let rep = reparametrize(&set).unwrap();
        assert!((rep.c[0] + 0.5).abs() < 1e-14);
        assert!((rep.a[0] + 0.5).abs() < 1e-14);
        assert!((rep.tau[1] - 3f64.ln()).abs() < 1e-14);
        assert!((rep.t_of_tau(3f64.ln()) - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(rep.t_of_tau(0.0), 0.0);
        for t in [0.0, 0.1, 1.0 / 3.0, 0.7, 0.99] {
            assert!((rep.t_of_tau(rep.tau_of_t(t)) - t).abs() < 1e-13);
        }
    }

    #[test]
    fn rescaled_sample_matches_flow() {
        let f = Signal::new(vec![0., 2., 1.]).unwrap();
        let flow = evolve(&f, 0.0).unwrap();
        let set = decompose(&flow);
        let rep = reparametrize(&set).unwrap();
        assert!(close(&rescaled_flow_sample(&set, &rep, 0.0).unwrap(), &[0., 2., 1.], 1e-15));
        let s = rescaled_flow_sample(&set, &rep, 3f64.ln()).unwrap();
        assert!(close(&s, &[1. / 3., 4. / 3., 4. / 3.], 1e-14));
        for tau in [0.1, 0.9, 1.5, 3.0, 8.0] {
            let a = rescaled_flow_sample(&set, &rep, tau).unwrap();
            let b = flow.sample(rep.t_of_tau(tau)).unwrap();
            assert!(close(&a, &b, 1e-12));
        }
    }

    #[test]
    fn eigenfunction_decays_exponentially() {
        let f = [0., 0., 1., 1., 0., 0.];
        let set = set_of(&f);
        let rep = reparametrize(&set).unwrap();
        let mean = 1.0 / 3.0;
        for tau in [0.0, 0.3, 1.0, 4.0] {
            let s = rescaled_flow_sample(&set, &rep, tau).unwrap();
            let w = (-tau).exp();
            let expect: Vec<f64> = f.iter().map(|v| w * (v - mean) + mean).collect();
            assert!(close(&s, &expect, 1e-14));
        }
    }

    #[test]
    fn analytic_modes_are_orthogonal() {
        let set = set_of(&[0.3, 1.0, 0.2, 0.8, 0.8, 0.1, 0.5]);
        let rep = reparametrize(&set).unwrap();
        let modes = analytic_modes(&set, &rep);
        for (k, (xi1, xi2)) in modes.iter().enumerate() {
            let (n1, n2) = (norm(xi1), norm(xi2));
            assert!(dot(xi1, xi2).abs() <= 1e-10 * n1 * n2 + 1e-14 * n2 * n2, "segment {k}");
        }
        assert!(norm(&modes.last().unwrap().0) < 1e-12);
    }

    #[test]
    fn rdmd_three_point() {
        let f = Signal::new(vec![0., 2., 1.]).unwrap();
        let dt = 3f64.ln() / 32.0;
        let segs = rdmd(&f, Some(dt)).unwrap();
        assert_eq!(segs.len(), 2);
        let s0 = &segs[0];
        assert!((s0.eigenvalues[0] - 1.0).abs() < 1e-6);
        assert!((s0.eigenvalues[1] - (-dt).exp()).abs() < 1e-6);
        assert!(s0.reconstruction_error < 1e-6);
        assert_eq!(segs[1].eigenvalues.len(), 1);
        assert!((segs[1].eigenvalues[0] - (-dt).exp()).abs() < 1e-6);

        let set = set_of(&[0., 2., 1.]);
        let rep = reparametrize(&set).unwrap();
        let rec = recover_components(&segs, &rep).unwrap();
        assert!(close(&rec.components[0].phi, &[0., 0.5, -0.5], 1e-8));
        assert!(close(&rec.components[1].phi, &[-1., 0.5, 0.5], 1e-8));
        assert!(rdmd_relative_error(&segs, &set, &rep) < 1e-8);
    }

    #[test]
    fn rdmd_pulse_single_segment() {
        let f = Signal::new(vec![0., 0., 1., 1., 0., 0.]).unwrap();
        let segs = rdmd(&f, None).unwrap();
        assert_eq!(segs.len(), 1);
        assert!(norm(&segs[0].xi1) < 1e-12);
        let phi = [-1. / 3., -1. / 3., 2. / 3., 2. / 3., -1. / 3., -1. / 3.];
        let cos = dot(&segs[0].xi2, &phi) / (norm(&segs[0].xi2) * norm(&phi));
        assert!(cos.abs() > 1.0 - 1e-12);
    }

    #[test]
    fn rdmd_constant_and_undersampled() {
        assert!(rdmd(&Signal::new(vec![1.0; 5]).unwrap(), None).unwrap().is_empty());
        let f = Signal::new(vec![0., 2., 1.]).unwrap();
        match rdmd(&f, Some(1.0)) {
            Err(Error::UnderSampled { segment: 0, required_dt, .. }) => {
                assert!((required_dt - 3f64.ln() / 2.0).abs() < 1e-12)
            }
            other => panic!("expected under-sampling error, got {other:?}"),
        }
        assert!(rdmd(&f, Some(-1.0)).is_err());
    }

    #[test]
    fn vanishing_next_mode_is_rejected() {
        let f = Signal::new(vec![0., 2., 1.]).unwrap();
        let mut segs = rdmd(&f, None).unwrap();
        let rep = reparametrize(&set_of(&[0., 2., 1.])).unwrap();
        segs[1].xi2 = vec![0.0; 3];
        assert!(matches!(recover_components(&segs, &rep), Err(Error::VanishingMode(1))));
    }

    #[test]
    fn euler_rescaled_flow_tracks_exact() {
        let f = Signal::new(vec![0., 2., 1.]).unwrap();
        let set = set_of(&[0., 2., 1.]);
        let rep = reparametrize(&set).unwrap();
        let dtau = 1e-5;
        let states = integrate_rescaled(&f, dtau, 300_000, 1e-4).unwrap();
        let mut worst: f64 = 0.0;
        for n in (0..=300_000).step_by(10_000) {
            let exact = rescaled_flow_sample(&set, &rep, n as f64 * dtau).unwrap();
            let diff: Vec<f64> = exact.iter().zip(states[n].iter()).map(|(a, b)| a - b).collect();
            worst = worst.max(norm(&diff) / f.norm());
        }
        assert!(worst < 1e-3, "worst {worst}");
    }

    #[test]
    fn plain_dmd_cannot_fit_linear_decay() {
        let flow = evolve(&Signal::new(vec![0., 0., 1., 1., 0., 0.]).unwrap(), 0.0).unwrap();
        let err = plain_dmd_relative_error(&flow, 0.01, 134, 2).unwrap();
        assert!(err > 1e-3, "err {err}");
    }
}
