//! Information-theoretic diagnostics over node activation events.
//!
//! An event is a normalized activation exceeding a threshold theta
//! (default 1.0, one standard deviation). The estimators work on 2x2
//! joint count tables with add-one smoothing and base-2 logarithms, so
//! values are reported in bits and every log term stays finite.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::NodeRef;

pub const DEFAULT_THETA: f64 = 1.0;
/// Minimum observations for a mutual-information estimate.
pub const MIN_MI_OBSERVATIONS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum InfoError {
    #[error("probability must lie in (0, 1], got {0}")]
    BadProbability(f64),
    #[error("node {0} is not tracked")]
    Untracked(NodeRef),
    #[error("need at least {MIN_MI_OBSERVATIONS} observations, have {0}")]
    TooFewObservations(usize),
    #[error("event rows must carry one entry per tracked node")]
    RowShape,
}

/// Shannon information of an observed probability, in bits.
pub fn surprise(p: f64) -> Result<f64, InfoError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(InfoError::BadProbability(p));
    }
    // + 0.0 folds the -0.0 at p = 1 into exact zero
    Ok(-p.log2() + 0.0)
}

/// Binary activation events for a fixed set of tracked nodes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EventLog {
    pub theta: f64,
    nodes: Vec<NodeRef>,
    #[serde(skip)]
    node_pos: BTreeMap<NodeRef, usize>,
    /// events[k][i] = did node k fire on observation i.
    events: Vec<Vec<bool>>,
}

impl EventLog {
    pub fn new(nodes: Vec<NodeRef>, theta: f64) -> Self {
        let node_pos = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let events = nodes.iter().map(|_| Vec::new()).collect();
        Self {
            theta,
            nodes,
            node_pos,
            events,
        }
    }

    /// Rebuild the position index after deserialization.
    pub fn reindex(&mut self) {
        self.node_pos = self.nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    }

    pub fn nodes(&self) -> &[NodeRef] {
        &self.nodes
    }

    pub fn n_obs(&self) -> usize {
        self.events.first().map_or(0, |e| e.len())
    }

    pub fn is_tracked(&self, node: NodeRef) -> bool {
        self.node_pos.contains_key(&node)
    }

    /// Append one observation: the normalized activation of every
    /// tracked node, thresholded at theta.
    pub fn record_values(&mut self, values: &[f64]) -> Result<(), InfoError> {
        if values.len() != self.nodes.len() {
            return Err(InfoError::RowShape);
        }
        for (k, &v) in values.iter().enumerate() {
            self.events[k].push(v > self.theta);
        }
        Ok(())
    }

    pub fn record_events(&mut self, row: &[bool]) -> Result<(), InfoError> {
        if row.len() != self.nodes.len() {
            return Err(InfoError::RowShape);
        }
        for (k, &e) in row.iter().enumerate() {
            self.events[k].push(e);
        }
        Ok(())
    }

    pub fn events_of(&self, node: NodeRef) -> Result<&[bool], InfoError> {
        let &k = self
            .node_pos
            .get(&node)
            .ok_or(InfoError::Untracked(node))?;
        Ok(&self.events[k])
    }

    /// Raw 2x2 joint counts: cells[a][b] counts observations with
    /// event(a_node) == (a == 1) and event(b_node) == (b == 1).
    fn joint_counts(&self, a: NodeRef, b: NodeRef) -> Result<[[u64; 2]; 2], InfoError> {
        let ea = self.events_of(a)?;
        let eb = self.events_of(b)?;
        let mut cells = [[0u64; 2]; 2];
        for (&x, &y) in ea.iter().zip(eb) {
            cells[x as usize][y as usize] += 1;
        }
        Ok(cells)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoincidenceStats {
    pub p_a: f64,
    pub p_b: f64,
    pub p_joint: f64,
    /// p_joint / (p_a * p_b): above 1 means super-independent
    /// coincidence, the growth signal.
    pub ratio: f64,
}

/// Smoothed 2x2 table from raw counts: (n + 1) / (N + 4) per cell.
fn smoothed(cells: [[u64; 2]; 2], n: u64) -> [[f64; 2]; 2] {
    let denom = (n + 4) as f64;
    let mut q = [[0.0; 2]; 2];
    for x in 0..2 {
        for y in 0..2 {
            q[x][y] = (cells[x][y] + 1) as f64 / denom;
        }
    }
    q
}

/// Empirical event frequencies for two nodes with add-one smoothing.
pub fn coincidence_stats(
    log: &EventLog,
    a: NodeRef,
    b: NodeRef,
) -> Result<CoincidenceStats, InfoError> {
    let cells = log.joint_counts(a, b)?;
    let q = smoothed(cells, log.n_obs() as u64);
    let p_a = q[1][0] + q[1][1];
    let p_b = q[0][1] + q[1][1];
    let p_joint = q[1][1];
    Ok(CoincidenceStats {
        p_a,
        p_b,
        p_joint,
        ratio: p_joint / (p_a * p_b),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiEstimate {
    pub value_bits: f64,
    pub n_obs: usize,
    /// Raw joint counts, cells[a][b], summing to n_obs.
    pub cells: [[u64; 2]; 2],
}

fn entropy_bits(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.log2())
        .sum()
}

/// Plug-in mutual information over the smoothed joint table, in bits,
/// clamped at zero.
pub fn mutual_information(log: &EventLog, a: NodeRef, b: NodeRef) -> Result<MiEstimate, InfoError> {
    let n = log.n_obs();
    if n < MIN_MI_OBSERVATIONS {
        return Err(InfoError::TooFewObservations(n));
    }
    let cells = log.joint_counts(a, b)?;
    let q = smoothed(cells, n as u64);
    let px = [q[0][0] + q[0][1], q[1][0] + q[1][1]];
    let py = [q[0][0] + q[1][0], q[0][1] + q[1][1]];
    let mut mi = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            if q[x][y] > 0.0 {
                mi += q[x][y] * (q[x][y] / (px[x] * py[y])).log2();
            }
        }
    }
    Ok(MiEstimate {
        value_bits: mi.max(0.0),
        n_obs: n,
        cells,
    })
}

/// Upper bound min(H(X), H(Y)) of the smoothed marginals, used by
/// consistency checks.
pub fn mi_upper_bound(log: &EventLog, a: NodeRef, b: NodeRef) -> Result<f64, InfoError> {
    let cells = log.joint_counts(a, b)?;
    let q = smoothed(cells, log.n_obs() as u64);
    let px = [q[0][0] + q[0][1], q[1][0] + q[1][1]];
    let py = [q[0][0] + q[1][0], q[0][1] + q[1][1]];
    Ok(entropy_bits(&px).min(entropy_bits(&py)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn n(layer: usize, index: usize) -> NodeRef {
        NodeRef::new(layer, index)
    }

    fn log_from_streams(streams: Vec<(NodeRef, Vec<bool>)>) -> EventLog {
        let nodes: Vec<NodeRef> = streams.iter().map(|&(node, _)| node).collect();
        let mut log = EventLog::new(nodes, DEFAULT_THETA);
        let len = streams[0].1.len();
        for i in 0..len {
            let row: Vec<bool> = streams.iter().map(|(_, s)| s[i]).collect();
            log.record_events(&row).unwrap();
        }
        log
    }

    #[test]
    fn surprise_of_certainty_is_exactly_zero() {
        let s = surprise(1.0).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(s.to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn surprise_halving_adds_one_bit() {
        assert_eq!(surprise(0.5).unwrap(), 1.0);
        assert_eq!(surprise(0.125).unwrap(), 3.0);
    }

    #[test]
    fn surprise_rejects_out_of_range() {
        assert!(surprise(0.0).is_err());
        assert!(surprise(-0.5).is_err());
        assert!(surprise(1.5).is_err());
    }

    #[test]
    fn surprise_is_strictly_decreasing_in_p() {
        let mut prev = f64::INFINITY;
        for i in 1..=1000 {
            let p = i as f64 / 1000.0;
            let s = surprise(p).unwrap();
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn identical_streams_have_maximal_coincidence_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let events: Vec<bool> = (0..10_000).map(|_| rng.gen_bool(0.3)).collect();
        let log = log_from_streams(vec![(n(1, 0), events.clone()), (n(1, 1), events)]);
        let stats = coincidence_stats(&log, n(1, 0), n(1, 1)).unwrap();
        // b identical to a: p_joint ~= p_a, ratio ~= 1 / p_a
        assert!((stats.ratio - 1.0 / stats.p_a).abs() < 0.01);
    }

    #[test]
    fn independent_streams_have_ratio_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let a: Vec<bool> = (0..10_000).map(|_| rng.gen_bool(0.4)).collect();
        let b: Vec<bool> = (0..10_000).map(|_| rng.gen_bool(0.4)).collect();
        let log = log_from_streams(vec![(n(1, 0), a), (n(1, 1), b)]);
        let stats = coincidence_stats(&log, n(1, 0), n(1, 1)).unwrap();
        assert!(stats.ratio > 0.9 && stats.ratio < 1.1, "ratio {}", stats.ratio);
    }

    #[test]
    fn disjoint_streams_have_ratio_near_zero() {
        let a: Vec<bool> = (0..10_000).map(|i| i % 2 == 0).collect();
        let b: Vec<bool> = (0..10_000).map(|i| i % 2 == 1).collect();
        let log = log_from_streams(vec![(n(1, 0), a), (n(1, 1), b)]);
        let stats = coincidence_stats(&log, n(1, 0), n(1, 1)).unwrap();
        assert!(stats.ratio < 0.01, "ratio {}", stats.ratio);
    }

    #[test]
    fn self_coincidence_ratio_is_inverse_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a: Vec<bool> = (0..10_000).map(|_| rng.gen_bool(0.25)).collect();
        let log = log_from_streams(vec![(n(1, 0), a)]);
        let stats = coincidence_stats(&log, n(1, 0), n(1, 0)).unwrap();
        assert!((stats.ratio - 1.0 / stats.p_a).abs() < 0.02);
    }

    #[test]
    fn untracked_node_is_an_error() {
        let log = log_from_streams(vec![(n(1, 0), vec![true; 200])]);
        assert_eq!(
            coincidence_stats(&log, n(1, 0), n(2, 5)).unwrap_err(),
            InfoError::Untracked(n(2, 5))
        );
    }

    #[test]
    fn mi_of_identical_fair_streams_is_one_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let events: Vec<bool> = (0..10_000).map(|_| rng.gen_bool(0.5)).collect();
        let log = log_from_streams(vec![(n(1, 0), events.clone()), (n(1, 1), events)]);
        let mi = mutual_information(&log, n(1, 0), n(1, 1)).unwrap();
        assert!(mi.value_bits >= 0.95 && mi.value_bits <= 1.0, "{}", mi.value_bits);
    }

    #[test]
    fn mi_of_independent_streams_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let a: Vec<bool> = (0..10_000).map(|_| rng.gen_bool(0.5)).collect();
        let b: Vec<bool> = (0..10_000).map(|_| rng.gen_bool(0.5)).collect();
        let log = log_from_streams(vec![(n(1, 0), a), (n(1, 1), b)]);
        let mi = mutual_information(&log, n(1, 0), n(1, 1)).unwrap();
        assert!(mi.value_bits <= 0.05, "{}", mi.value_bits);
    }

    #[test]
    fn mi_is_invariant_to_negation() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let a: Vec<bool> = (0..10_000).map(|_| rng.gen_bool(0.5)).collect();
        let not_a: Vec<bool> = a.iter().map(|&v| !v).collect();
        let log = log_from_streams(vec![(n(1, 0), a.clone()), (n(1, 1), not_a), (n(1, 2), a)]);
        let mi_not = mutual_information(&log, n(1, 0), n(1, 1)).unwrap();
        let mi_same = mutual_information(&log, n(1, 0), n(1, 2)).unwrap();
        assert!((mi_not.value_bits - mi_same.value_bits).abs() < 1e-12);
        assert!(mi_not.value_bits >= 0.95);
    }

    #[test]
    fn mi_is_symmetric_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let a: Vec<bool> = (0..5_000).map(|_| rng.gen_bool(0.3)).collect();
        let b: Vec<bool> = a.iter().map(|&v| v ^ rng.gen_bool(0.2)).collect();
        let log = log_from_streams(vec![(n(1, 0), a), (n(1, 1), b)]);
        let ab = mutual_information(&log, n(1, 0), n(1, 1)).unwrap();
        let ba = mutual_information(&log, n(1, 1), n(1, 0)).unwrap();
        assert_eq!(ab.value_bits.to_bits(), ba.value_bits.to_bits());
    }

    #[test]
    fn mi_respects_the_entropy_bound_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..50 {
            let pa: f64 = rng.gen_range(0.05..0.95);
            let flip: f64 = rng.gen_range(0.0..0.5);
            let a: Vec<bool> = (0..2_000).map(|_| rng.gen_bool(pa)).collect();
            let b: Vec<bool> = a.iter().map(|&v| v ^ rng.gen_bool(flip)).collect();
            let log = log_from_streams(vec![(n(1, 0), a), (n(1, 1), b)]);
            let mi = mutual_information(&log, n(1, 0), n(1, 1)).unwrap();
            let bound = mi_upper_bound(&log, n(1, 0), n(1, 1)).unwrap();
            assert!(mi.value_bits >= 0.0);
            assert!(mi.value_bits <= bound + 1e-9, "{} > {}", mi.value_bits, bound);
            assert_eq!(
                mi.cells.iter().flatten().sum::<u64>() as usize,
                mi.n_obs
            );
        }
    }

    #[test]
    fn mi_needs_enough_observations() {
        let log = log_from_streams(vec![(n(1, 0), vec![true; 50]), (n(1, 1), vec![true; 50])]);
        assert_eq!(
            mutual_information(&log, n(1, 0), n(1, 1)).unwrap_err(),
            InfoError::TooFewObservations(50)
        );
    }

    #[test]
    fn record_values_thresholds_at_theta() {
        let mut log = EventLog::new(vec![n(1, 0), n(1, 1)], 1.0);
        log.record_values(&[1.5, 0.5]).unwrap();
        log.record_values(&[1.0, 2.0]).unwrap(); // strict: 1.0 is not an event
        assert_eq!(log.events_of(n(1, 0)).unwrap(), &[true, false]);
        assert_eq!(log.events_of(n(1, 1)).unwrap(), &[false, true]);
    }
}
