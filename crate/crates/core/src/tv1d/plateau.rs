use std::cmp::Ordering;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::scalar::FlowScalar;
use super::Signal;

/// Role a plateau plays in the extremal structure of the signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Max,
    Min,
    Monotone,
}

/// A maximal run of (tolerance-)equal samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub start: usize,
    pub len: usize,
    pub value: f64,
    pub kind: ExtremumKind,
}

impl Cluster {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// Left-to-right cover of `0..len` by plateau clusters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauPartition {
    pub clusters: Vec<Cluster>,
}

impl PlateauPartition {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Cluster sizes in order.
    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.len).collect()
    }

    /// True when every cluster of `self` lies inside a single cluster of `coarser`.
    pub fn refines(&self, coarser: &PlateauPartition) -> bool {
        let mut j = 0;
        for c in &self.clusters {
            while j < coarser.clusters.len() && coarser.clusters[j].range().end <= c.start {
                j += 1;
            }
            match coarser.clusters.get(j) {
                Some(outer) if outer.start <= c.start && c.range().end <= outer.range().end => {}
                _ => return false,
            }
        }
        true
    }
}

/// Splits `values` into maximal runs whose adjacent samples differ by at most `tol`.
pub(crate) fn detect_runs<S: FlowScalar>(values: &[S], tol: &S) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    if values.is_empty() {
        return runs;
    }
    let mut start = 0;
    for j in 1..values.len() {
        if (values[j].clone() - values[j - 1].clone()).abs() > *tol {
            runs.push(start..j);
            start = j;
        }
    }
    runs.push(start..values.len());
    runs
}

/// Representative value of a run: the common value when all members agree
/// exactly, otherwise their mean.
pub(crate) fn run_value<S: FlowScalar>(values: &[S]) -> S {
    let first = &values[0];
    if values.iter().all(|v| v == first) {
        return first.clone();
    }
    let sum = values.iter().cloned().fold(S::zero(), |acc, v| acc + v);
    sum / S::from_count(values.len())
}

/// Labels each cluster by comparing with its neighbours. Boundary clusters
/// have a single neighbour; a lone cluster is a maximum by convention.
pub(crate) fn classify<S: FlowScalar>(cluster_values: &[S]) -> Vec<ExtremumKind> {
    let n = cluster_values.len();
    if n == 1 {
        return vec![ExtremumKind::Max];
    }
    (0..n)
        .map(|i| {
            let v = &cluster_values[i];
            let left = (i > 0).then(|| cluster_values[i - 1].partial_cmp(v));
            let right = (i + 1 < n).then(|| cluster_values[i + 1].partial_cmp(v));
            let below = |o: &Option<Option<Ordering>>| matches!(o, None | Some(Some(Ordering::Less)));
            let above = |o: &Option<Option<Ordering>>| matches!(o, None | Some(Some(Ordering::Greater)));
            if below(&left) && below(&right) {
                ExtremumKind::Max
            } else if above(&left) && above(&right) {
                ExtremumKind::Min
            } else {
                ExtremumKind::Monotone
            }
        })
        .collect()
}

/// Negative subgradient value on each cluster: `-a_i / m_i` with `a = ±1` on
/// boundary extrema, `±2` on interior extrema and 0 on monotone runs.
pub(crate) fn cluster_velocities<S: FlowScalar>(kinds: &[ExtremumKind], sizes: &[usize]) -> Vec<S> {
    let n = kinds.len();
    if n <= 1 {
        return vec![S::zero(); n];
    }
    kinds
        .iter()
        .zip(sizes)
        .enumerate()
        .map(|(i, (kind, &m))| {
            let weight = if i == 0 || i + 1 == n { 1 } else { 2 };
            let a = match kind {
                ExtremumKind::Max => S::from_count(weight),
                ExtremumKind::Min => -S::from_count(weight),
                ExtremumKind::Monotone => S::zero(),
            };
            -a / S::from_count(m)
        })
        .collect()
}

pub(crate) fn expand<S: Clone>(runs: &[Range<usize>], per_run: &[S], len: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(len);
    for (r, v) in runs.iter().zip(per_run) {
        out.extend(std::iter::repeat_n(v.clone(), r.len()));
    }
    out
}

/// Groups `f` into plateau clusters and labels each as max, min or monotone.
pub fn detect_plateaus(f: &Signal, tol: f64) -> PlateauPartition {
    let tol = tol.max(0.0);
    let runs = detect_runs(f.values(), &tol);
    let values: Vec<f64> = runs.iter().map(|r| run_value(&f.values()[r.clone()])).collect();
    let kinds = classify(&values);
    PlateauPartition {
        clusters: runs
            .into_iter()
            .zip(values)
            .zip(kinds)
            .map(|((r, value), kind)| Cluster {
                start: r.start,
                len: r.len(),
                value,
                kind,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ExtremumKind::*;

    fn shape(p: &PlateauPartition) -> Vec<(usize, usize, ExtremumKind)> {
        p.clusters.iter().map(|c| (c.start, c.len, c.kind)).collect()
    }

    fn sig(v: &[f64]) -> Signal {
        Signal::new(v.to_vec()).unwrap()
    }

    #[test]
    fn pulse_plateaus() {
        let p = detect_plateaus(&sig(&[0., 0., 1., 1., 0., 0.]), 0.0);
        assert_eq!(shape(&p), vec![(0, 2, Min), (2, 2, Max), (4, 2, Min)]);
    }

    #[test]
    fn strict_alternation() {
        let p = detect_plateaus(&sig(&[0., 2., 1.]), 0.0);
        assert_eq!(shape(&p), vec![(0, 1, Min), (1, 1, Max), (2, 1, Min)]);
    }

    #[test]
    fn monotone_ramp() {
        let p = detect_plateaus(&sig(&[0., 1., 2., 3.]), 0.0);
        assert_eq!(
            shape(&p),
            vec![(0, 1, Min), (1, 1, Monotone), (2, 1, Monotone), (3, 1, Max)]
        );
    }

    #[test]
    fn single_sample_is_max() {
        let p = detect_plateaus(&sig(&[4.0]), 0.0);
        assert_eq!(shape(&p), vec![(0, 1, Max)]);
    }

    #[test]
    fn tolerance_joins_close_samples() {
        let p = detect_plateaus(&sig(&[0.0, 0.05, 1.0, 0.98]), 0.1);
        assert_eq!(shape(&p), vec![(0, 2, Min), (2, 2, Max)]);
        assert!((p.clusters[0].value - 0.025).abs() < 1e-15);
    }

    #[test]
    fn refinement_check() {
        let fine = detect_plateaus(&sig(&[0., 2., 1.]), 0.0);
        let coarse = detect_plateaus(&sig(&[0., 1., 1.]), 0.0);
        assert!(fine.refines(&coarse));
        assert!(!coarse.refines(&fine));
    }
}
