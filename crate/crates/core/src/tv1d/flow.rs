use std::ops::Range;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::plateau::{classify, cluster_velocities, detect_runs, expand, run_value, Cluster, PlateauPartition};
use super::scalar::FlowScalar;
use super::{NegSubgradient, Signal};
use crate::error::{Error, Result};

/// Raw output of the event engine.
struct Events<S> {
    initial: Vec<S>,
    times: Vec<S>,
    subgradients: Vec<Vec<S>>,
    partitions: Vec<(Vec<Range<usize>>, Vec<S>)>,
}

/// Event-driven TV flow on an index partition.
///
/// Clusters are tracked by index range and never re-detected from values, so
/// a merged plateau cannot split again through rounding.
fn run_events<S: FlowScalar>(values: &[S], tol: &S) -> Result<Events<S>> {
    let mut runs = detect_runs(values, tol);
    let mut levels: Vec<S> = runs.iter().map(|r| run_value(&values[r.clone()])).collect();
    let initial = expand(&runs, &levels, values.len());

    let mut sizes: Vec<usize> = runs.iter().map(|r| r.len()).collect();
    let mut vel: Vec<S> = cluster_velocities(&classify(&levels), &sizes);
    let vel_scale = S::from_count(2);

    let mut t_now = S::zero();
    let mut times = Vec::new();
    let mut subgradients = Vec::new();
    let mut partitions = Vec::new();

    while runs.len() > 1 {
        let n = runs.len();
        let mut closing: Vec<Option<S>> = Vec::with_capacity(n - 1);
        let mut best: Option<S> = None;
        for c in 0..n - 1 {
            let gap = levels[c + 1].clone() - levels[c].clone();
            let rate = vel[c + 1].clone() - vel[c].clone();
            let d = if (gap.is_positive() && rate.is_negative()) || (gap.is_negative() && rate.is_positive()) {
                Some(-gap / rate)
            } else {
                None
            };
            if let Some(d) = &d {
                if best.as_ref().is_none_or(|b| d < b) {
                    best = Some(d.clone());
                }
            }
            closing.push(d);
        }
        let Some(step) = best else {
            return Err(Error::Internal(format!(
                "{n} clusters remain but no gap is closing at t = {:?}",
                t_now.to_f64()
            )));
        };
        let t_next = t_now.clone() + step.clone();

        partitions.push((runs.clone(), levels.clone()));
        subgradients.push(expand(&runs, &vel, values.len()));
        times.push(t_next.clone());

        let before: Vec<S> = levels.clone();
        for (level, v) in levels.iter_mut().zip(&vel) {
            *level = level.clone() + v.clone() * step.clone();
        }

        // Gaps closing at the event time, plus any gap rounding pushed to zero or past it.
        let merge: Vec<bool> = (0..n - 1)
            .map(|c| {
                let tied = closing[c]
                    .as_ref()
                    .is_some_and(|d| S::same_event(d, &step, &t_next));
                let old_gap = before[c + 1].clone() - before[c].clone();
                let new_gap = levels[c + 1].clone() - levels[c].clone();
                let crossed = new_gap.is_zero() || old_gap.signum() != new_gap.signum();
                tied || crossed
            })
            .collect();

        let mut new_runs: Vec<Range<usize>> = Vec::new();
        let mut new_levels: Vec<S> = Vec::new();
        let mut new_vel: Vec<S> = Vec::new();
        let mut new_sizes: Vec<usize> = Vec::new();
        let mut c = 0;
        while c < n {
            let first = c;
            while c < n - 1 && merge[c] {
                c += 1;
            }
            let group = first..=c;
            let size: usize = sizes[group.clone()].iter().sum();
            let weighted = |xs: &[S]| {
                let total = group
                    .clone()
                    .fold(S::zero(), |acc, k| acc + xs[k].clone() * S::from_count(sizes[k]));
                total / S::from_count(size)
            };
            new_runs.push(runs[first].start..runs[c].end);
            new_levels.push(if first == c { levels[c].clone() } else { weighted(&levels) });
            new_vel.push(if first == c { vel[c].clone() } else { weighted(&vel) });
            new_sizes.push(size);
            c += 1;
        }

        // Averaged velocities must agree with a fresh subgradient of the coarser partition.
        let recomputed: Vec<S> = cluster_velocities(&classify(&new_levels), &new_sizes);
        for (k, (avg, fresh)) in new_vel.iter().zip(&recomputed).enumerate() {
            if !S::agrees(avg, fresh, &vel_scale) {
                return Err(Error::Internal(format!(
                    "cluster {k} ({:?}) velocity {:?} after averaging, {:?} from the extremal structure",
                    new_runs[k],
                    avg.to_f64(),
                    fresh.to_f64()
                )));
            }
        }

        runs = new_runs;
        levels = new_levels;
        vel = new_vel;
        sizes = new_sizes;
        t_now = t_next;
    }

    Ok(Events {
        initial,
        times,
        subgradients,
        partitions,
    })
}

/// Exact solution of the 1D TV flow: initial signal, transition times
/// `T_1 < ... < T_L` and the constant velocity `p_i` on `[T_{i-1}, T_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FlowFile", into = "FlowFile")]
pub struct PiecewiseFlow {
    initial: Signal,
    times: Vec<f64>,
    subgradients: Vec<NegSubgradient>,
    /// `psi(T_i)` for `i = 0..=L`.
    knots: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct FlowFile {
    times: Vec<f64>,
    subgradients: Vec<Vec<f64>>,
    initial: Vec<f64>,
}

impl TryFrom<FlowFile> for PiecewiseFlow {
    type Error = Error;

    fn try_from(f: FlowFile) -> Result<Self> {
        PiecewiseFlow::from_parts(
            Signal::new(f.initial)?,
            f.times,
            f.subgradients.into_iter().map(NegSubgradient::new).collect(),
        )
    }
}

impl From<PiecewiseFlow> for FlowFile {
    fn from(f: PiecewiseFlow) -> Self {
        FlowFile {
            times: f.times,
            subgradients: f.subgradients.into_iter().map(NegSubgradient::into_vec).collect(),
            initial: f.initial.into_vec(),
        }
    }
}

impl PiecewiseFlow {
    /// Builds a flow from its event list, checking shapes and time ordering.
    pub fn from_parts(initial: Signal, times: Vec<f64>, subgradients: Vec<NegSubgradient>) -> Result<Self> {
        if times.len() != subgradients.len() {
            return Err(Error::invalid(format!(
                "{} transition times but {} subgradients",
                times.len(),
                subgradients.len()
            )));
        }
        if let Some(p) = subgradients.iter().find(|p| p.len() != initial.len()) {
            return Err(Error::invalid(format!(
                "subgradient of length {} for a signal of length {}",
                p.len(),
                initial.len()
            )));
        }
        let mut prev = 0.0;
        for &t in &times {
            if !(t.is_finite() && t > prev) {
                return Err(Error::invalid("transition times must be finite and strictly increasing from 0"));
            }
            prev = t;
        }
        let knots = build_knots(&initial, &times, &subgradients);
        Ok(PiecewiseFlow {
            initial,
            times,
            subgradients,
            knots,
        })
    }

    pub fn initial(&self) -> &Signal {
        &self.initial
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn subgradients(&self) -> &[NegSubgradient] {
        &self.subgradients
    }

    /// Number of merge events `L`.
    pub fn num_events(&self) -> usize {
        self.times.len()
    }

    /// Extinction time `T_L` (0 for a constant input).
    pub fn extinction_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.initial.mean()
    }

    /// `psi(T_i)` for `i = 0..=L`.
    pub fn knots(&self) -> &[Vec<f64>] {
        &self.knots
    }

    /// Index `i` of the segment `[T_{i}, T_{i+1})` containing `t`, or `L` past extinction.
    pub fn segment_of(&self, t: f64) -> usize {
        self.times.partition_point(|&ti| ti <= t)
    }

    pub fn sample(&self, t: f64) -> Result<Signal> {
        sample(self, t)
    }
}

/// States at the transition times. Samples that a segment moves together
/// and that land within rounding of each other are snapped to their mean.
fn build_knots(initial: &Signal, times: &[f64], subgradients: &[NegSubgradient]) -> Vec<Vec<f64>> {
    let m = initial.mean();
    let scale = initial.iter().map(|v| (v - m).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let snap_tol = 1e-11 * scale;
    let mut knots = Vec::with_capacity(times.len() + 1);
    knots.push(initial.values().to_vec());
    let mut t_prev = 0.0;
    for (i, (&t, p)) in times.iter().zip(subgradients).enumerate() {
        let prev = knots.last().expect("initial knot");
        let mut next: Vec<f64> = prev.iter().zip(p.iter()).map(|(x, v)| x + (t - t_prev) * v).collect();
        if i + 1 == times.len() {
            next.iter_mut().for_each(|x| *x = m);
        } else {
            let runs = detect_runs(&next, &snap_tol);
            for r in runs.into_iter().filter(|r| r.len() > 1) {
                let v = run_value(&next[r.clone()]);
                next[r].iter_mut().for_each(|x| *x = v);
            }
        }
        knots.push(next);
        t_prev = t;
    }
    knots
}

/// Runs the accelerated event-driven flow to extinction.
///
/// With `tol > 0`, runs of samples within `tol` of each other are replaced by
/// their mean before evolving, and `flow.initial()` is that snapped signal.
pub fn evolve(f: &Signal, tol: f64) -> Result<PiecewiseFlow> {
    evolve_with_trace(f, tol).map(|(flow, _)| flow)
}

/// Like [`evolve`], also returning the plateau partition at the start of every segment.
pub fn evolve_with_trace(f: &Signal, tol: f64) -> Result<(PiecewiseFlow, Vec<PlateauPartition>)> {
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::invalid("plateau tolerance must be >= 0"));
    }
    let ev = run_events(f.values(), &tol)?;
    let trace = ev
        .partitions
        .iter()
        .map(|(runs, levels)| {
            let kinds = classify(levels);
            PlateauPartition {
                clusters: runs
                    .iter()
                    .zip(levels)
                    .zip(kinds)
                    .map(|((r, &value), kind)| Cluster {
                        start: r.start,
                        len: r.len(),
                        value,
                        kind,
                    })
                    .collect(),
            }
        })
        .collect();
    let flow = PiecewiseFlow::from_parts(
        Signal::new(ev.initial)?,
        ev.times,
        ev.subgradients.into_iter().map(NegSubgradient::new).collect(),
    )?;
    Ok((flow, trace))
}

/// Evaluates the piecewise-linear solution `psi(t) = psi(T_i) + (t - T_i) p_{i+1}`.
pub fn sample(flow: &PiecewiseFlow, t: f64) -> Result<Signal> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let i = flow.segment_of(t);
    if i == flow.times.len() {
        return Signal::new(flow.knots[i].clone());
    }
    if t == 0.0 {
        return Ok(flow.initial.clone());
    }
    let t0 = if i == 0 { 0.0 } else { flow.times[i - 1] };
    let p = &flow.subgradients[i];
    Signal::new(flow.knots[i].iter().zip(p.iter()).map(|(x, v)| x + (t - t0) * v).collect())
}

/// Event list computed in exact rational arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactFlow {
    pub initial: Vec<BigRational>,
    pub times: Vec<BigRational>,
    pub subgradients: Vec<Vec<BigRational>>,
}

impl ExactFlow {
    pub fn mean(&self) -> BigRational {
        let n = BigRational::from_count(self.initial.len());
        self.initial.iter().fold(BigRational::zero(), |a, v| a + v) / n
    }

    /// Spectral components `(lambda_i, phi_i)` with `lambda_i = -1/T_i` and
    /// `phi_i = (p_i - p_{i+1}) / lambda_i`.
    pub fn components(&self) -> Vec<(BigRational, Vec<BigRational>)> {
        let zero = vec![BigRational::zero(); self.initial.len()];
        self.times
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let next = self.subgradients.get(i + 1).unwrap_or(&zero);
                let lambda = -t.recip();
                let phi = self.subgradients[i]
                    .iter()
                    .zip(next)
                    .map(|(a, b)| -(a - b) * t)
                    .collect();
                (lambda, phi)
            })
            .collect()
    }
}

/// Exact rational event list; intended as a test oracle for small inputs.
pub fn evolve_exact(f: &[BigRational]) -> Result<ExactFlow> {
    if f.is_empty() {
        return Err(Error::invalid("signal must have at least one sample"));
    }
    let ev = run_events(f, &BigRational::zero())?;
    Ok(ExactFlow {
        initial: ev.initial,
        times: ev.times,
        subgradients: ev.subgradients,
    })
}

#[cfg(test)]
mod tests {
    use num_bigint::BigInt;

    use super::*;

    fn sig(v: &[f64]) -> Signal {
        Signal::new(v.to_vec()).unwrap()
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn pulse_single_event() {
        let flow = evolve(&sig(&[0., 0., 1., 1., 0., 0.]), 0.0).unwrap();
        assert_eq!(flow.num_events(), 1);
        assert!((flow.times()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(close(&flow.subgradients()[0], &[0.5, 0.5, -1., -1., 0.5, 0.5], 0.0));
    }

    #[test]
    fn three_point_two_events() {
        let flow = evolve(&sig(&[0., 2., 1.]), 0.0).unwrap();
        assert_eq!(flow.num_events(), 2);
        assert!(close(flow.times(), &[1.0 / 3.0, 1.0], 1e-15));
        assert!(close(&flow.subgradients()[0], &[1., -2., 1.], 0.0));
        assert!(close(&flow.subgradients()[1], &[1., -0.5, -0.5], 1e-15));
    }

    #[test]
    fn constant_has_no_events() {
        let flow = evolve(&sig(&[0.7; 5]), 0.0).unwrap();
        assert_eq!(flow.num_events(), 0);
        assert_eq!(flow.sample(3.0).unwrap().values(), &[0.7; 5]);
        assert_eq!(evolve(&sig(&[1.0]), 0.0).unwrap().num_events(), 0);
    }

    #[test]
    fn sampling() {
        let flow = evolve(&sig(&[0., 2., 1.]), 0.0).unwrap();
        assert_eq!(flow.sample(0.0).unwrap().values(), &[0., 2., 1.]);
        assert!(close(&flow.sample(1.0 / 3.0).unwrap(), &[1.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0], 1e-15));
        assert!(close(&flow.sample(5.0).unwrap(), &[1., 1., 1.], 0.0));
        assert!(matches!(flow.sample(-0.1), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn symmetric_simultaneous_merges() {
        // Both side plateaus reach the centre at the same time.
        let flow = evolve(&sig(&[1., 0., 1.]), 0.0).unwrap();
        assert_eq!(flow.num_events(), 1);
        assert!((flow.times()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!(close(&flow.sample(1.0).unwrap(), &[2.0 / 3.0; 3], 1e-15));
    }

    #[test]
    fn tolerance_snaps_initial() {
        let flow = evolve(&sig(&[0.0, 0.01, 1.0, 1.0]), 0.05).unwrap();
        assert_eq!(flow.initial().values(), &[0.005, 0.005, 1.0, 1.0]);
        assert_eq!(flow.num_events(), 1);
        assert!(evolve(&sig(&[0.0, 1.0]), -1.0).is_err());
    }

    #[test]
    fn exact_three_point() {
        let flow = evolve_exact(&[q(0, 1), q(2, 1), q(1, 1)]).unwrap();
        assert_eq!(flow.times, vec![q(1, 3), q(1, 1)]);
        assert_eq!(flow.subgradients[0], vec![q(1, 1), q(-2, 1), q(1, 1)]);
        assert_eq!(flow.subgradients[1], vec![q(1, 1), q(-1, 2), q(-1, 2)]);
        let comps = flow.components();
        assert_eq!(comps[0].0, q(-3, 1));
        assert_eq!(comps[0].1, vec![q(0, 1), q(1, 2), q(-1, 2)]);
        assert_eq!(comps[1].0, q(-1, 1));
        assert_eq!(comps[1].1, vec![q(-1, 1), q(1, 2), q(1, 2)]);
        assert_eq!(flow.mean(), q(1, 1));
    }

    #[test]
    fn json_round_trip_keeps_initial() {
        let flow = evolve(&sig(&[0.1, 0.7, 0.3, 0.9]), 0.0).unwrap();
        let text = serde_json::to_string(&flow).unwrap();
        assert!(text.contains("\"times\""));
        let back: PiecewiseFlow = serde_json::from_str(&text).unwrap();
        assert_eq!(back, flow);
        assert_eq!(back.sample(0.0).unwrap().values(), &[0.1, 0.7, 0.3, 0.9]);
    }

    #[test]
    fn rejects_bad_parts() {
        let f = sig(&[0., 1.]);
        assert!(PiecewiseFlow::from_parts(f.clone(), vec![1.0], vec![]).is_err());
        assert!(PiecewiseFlow::from_parts(
            f.clone(),
            vec![1.0, 0.5],
            vec![NegSubgradient::zeros(2), NegSubgradient::zeros(2)]
        )
        .is_err());
        assert!(PiecewiseFlow::from_parts(f, vec![1.0], vec![NegSubgradient::zeros(3)]).is_err());
    }
}
