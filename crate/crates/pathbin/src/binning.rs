//! Arrangement of MPCs into path bins by minimum normalized Euclidean
//! distance over the six channel parameters, with birth, death (temporary
//! discontinuation), and resurrection tracking, and a Markov
//! state-transition trace of every assignment decision.

use serde::{Deserialize, Serialize};

use crate::types::{LifecycleEvent, MpcVector, PathBin, Snapshot, Trajectory, NUM_PARAMS};

// ---------------------------------------------------------------------------
// Parameters and result
// ---------------------------------------------------------------------------

/// Tuning knobs of the path-bin arrangement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinningParams {
    /// Normalizing factor of the total distance.
    pub gamma: f64,
    /// New-bin threshold on the minimum normalized distance.
    pub epsilon: f64,
    /// Number of previous RX positions considered for the d_min gate;
    /// `None` means all of them.
    pub lookback: Option<usize>,
    /// How many most-recent entries of each bin the second-condition
    /// distance d_l is measured against.
    pub within_bin_window: usize,
}

impl Default for BinningParams {
    fn default() -> Self {
        BinningParams {
            gamma: 75.8,
            epsilon: 0.15,
            lookback: None,
            within_bin_window: 1,
        }
    }
}

impl BinningParams {
    pub fn from_config(config: &crate::types::ScenarioConfig) -> Self {
        BinningParams {
            gamma: config.gamma,
            epsilon: config.epsilon,
            ..Default::default()
        }
    }
}

/// One row of the Markov trace: the realized assignment decision for one
/// MPC at one RX position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub position_index: u32,
    /// Index of the MPC within its snapshot (stored descending-gain order).
    pub mpc_index: usize,
    /// Candidate (bin_id, d_l) pairs over the eligible bins.
    pub candidates: Vec<(u32, f64)>,
    pub chosen_bin_id: u32,
    /// Minimum distance to any history MPC (the first-condition gate).
    pub d_min: f64,
}

/// Output of the arrangement: the bins, the full decision trace, and the
/// decisions that created new bins.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BinningResult {
    pub bins: Vec<PathBin>,
    pub markov_trace: Vec<TraceRecord>,
    pub unassigned_births: Vec<(u32, usize)>,
}

impl BinningResult {
    pub fn bin(&self, bin_id: u32) -> Option<&PathBin> {
        self.bins.iter().find(|b| b.bin_id == bin_id)
    }
}

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

/// Distance between one channel parameter (1-based v in 1..6) of two MPCs.
/// Azimuths are compared on the circle.
pub fn param_distance(a: &MpcVector, b: &MpcVector, v: usize) -> f64 {
    let diff = a.param(v) - b.param(v);
    if MpcVector::is_azimuth_param(v) {
        let d = diff.rem_euclid(360.0);
        d.min(360.0 - d)
    } else {
        diff.abs()
    }
}

/// Total normalized distance: the per-parameter distances summed and
/// divided by gamma.
pub fn total_distance(a: &MpcVector, b: &MpcVector, gamma: f64) -> f64 {
    (1..=NUM_PARAMS)
        .map(|v| param_distance(a, b, v))
        .sum::<f64>()
        / gamma
}

// ---------------------------------------------------------------------------
// Assignment
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
enum BinState {
    Active,
    Discontinued,
}

/// Incremental tracker state folded over snapshots.
#[derive(Default)]
struct Tracker {
    result: BinningResult,
    states: Vec<BinState>,
}

impl Tracker {
    fn birth(&mut self, position_index: u32, mpc_index: usize, mpc: MpcVector, d_min: f64) {
        let bin_id = self.result.bins.len() as u32 + 1;
        self.result.bins.push(PathBin {
            bin_id,
            entries: vec![(position_index, mpc)],
            events: vec![(position_index, LifecycleEvent::Birth)],
        });
        self.states.push(BinState::Active);
        self.result.markov_trace.push(TraceRecord {
            position_index,
            mpc_index,
            candidates: Vec::new(),
            chosen_bin_id: bin_id,
            d_min,
        });
        self.result
            .unassigned_births
            .push((position_index, mpc_index));
    }
}

/// Processes one snapshot against the accumulated state. `history` must
/// hold all earlier snapshots in position order (the lookback truncation is
/// applied here).
pub fn assign_snapshot(
    state: BinningResult,
    snap: &Snapshot,
    history: &[Snapshot],
    params: &BinningParams,
) -> BinningResult {
    let states = snap_states(&state);
    let mut tracker = Tracker {
        result: state,
        states,
    };

    let lookback_start = match params.lookback {
        Some(k) => history.len().saturating_sub(k),
        None => 0,
    };
    let history = &history[lookback_start..];

    // Bins already given an MPC at this position are ineligible for the rest
    // of the snapshot. Bins born during this snapshot count as taken.
    let mut taken = vec![false; tracker.result.bins.len()];
    let mut assigned: Vec<(usize, usize, MpcVector)> = Vec::new(); // (bin idx, mpc idx, mpc)

    for (mpc_index, mpc) in snap.mpcs.iter().enumerate() {
        // First condition: minimum distance to any MPC at previous positions.
        let d_min = history
            .iter()
            .flat_map(|s| s.mpcs.iter())
            .map(|k| total_distance(mpc, k, params.gamma))
            .fold(f64::INFINITY, f64::min);

        if d_min >= params.epsilon {
            // No similar MPC in the past (or empty history): new bin.
            tracker.birth(snap.position_index, mpc_index, *mpc, d_min);
            taken.push(true);
            continue;
        }

        // Second condition: join the eligible bin with minimum d_l, where
        // d_l is measured against the most recent within_bin_window entries.
        let mut best: Option<(usize, f64)> = None;
        let mut candidates = Vec::new();
        for (idx, bin) in tracker.result.bins.iter().enumerate() {
            if taken[idx] {
                continue;
            }
            let recent = bin
                .entries
                .iter()
                .rev()
                .take(params.within_bin_window.max(1));
            let d_l = recent
                .map(|(_, e)| total_distance(mpc, e, params.gamma))
                .fold(f64::INFINITY, f64::min);
            candidates.push((bin.bin_id, d_l));
            // Strict < keeps the lowest bin_id on ties.
            if best.map_or(true, |(_, b)| d_l < b) {
                best = Some((idx, d_l));
            }
        }

        match best {
            Some((idx, _)) => {
                taken[idx] = true;
                let bin_id = tracker.result.bins[idx].bin_id;
                tracker.result.markov_trace.push(TraceRecord {
                    position_index: snap.position_index,
                    mpc_index,
                    candidates,
                    chosen_bin_id: bin_id,
                    d_min,
                });
                assigned.push((idx, mpc_index, *mpc));
            }
            None => {
                // d_min passed the gate but every bin is already occupied at
                // this position; treat as a birth to preserve the partition.
                tracker.birth(snap.position_index, mpc_index, *mpc, d_min);
                taken.push(true);
            }
        }
    }

    // Apply assignments and lifecycle events.
    let mut received = vec![false; tracker.result.bins.len()];
    // Newly born bins received their MPC by construction.
    for (i, bin) in tracker.result.bins.iter().enumerate() {
        if bin.entries.last().map(|(p, _)| *p) == Some(snap.position_index) {
            received[i] = true;
        }
    }
    for (idx, _mpc_index, mpc) in assigned {
        let event = match tracker.states[idx] {
            BinState::Active => LifecycleEvent::Continue,
            BinState::Discontinued => LifecycleEvent::Resurrect,
        };
        let bin = &mut tracker.result.bins[idx];
        bin.entries.push((snap.position_index, mpc));
        bin.events.push((snap.position_index, event));
        tracker.states[idx] = BinState::Active;
        received[idx] = true;
    }
    for idx in 0..tracker.result.bins.len() {
        if !received[idx] && tracker.states[idx] == BinState::Active {
            tracker.result.bins[idx]
                .events
                .push((snap.position_index, LifecycleEvent::Discontinue));
            tracker.states[idx] = BinState::Discontinued;
        }
    }

    tracker.result
}

// Reconstructs per-bin active/discontinued state from events. Keeps
// assign_snapshot a pure fold over BinningResult.
fn snap_states(result: &BinningResult) -> Vec<BinState> {
    result
        .bins
        .iter()
        .map(|b| match b.events.last() {
            Some((_, LifecycleEvent::Discontinue)) => BinState::Discontinued,
            _ => BinState::Active,
        })
        .collect()
}

/// Runs the arrangement over a whole trajectory in position order.
pub fn run_binning(t: &Trajectory, params: &BinningParams) -> BinningResult {
    let mut result = BinningResult::default();
    for (i, snap) in t.snapshots.iter().enumerate() {
        result = assign_snapshot(result, snap, &t.snapshots[..i], params);
    }
    result
}

/// Flat view of the Markov trace, one record per assignment decision.
pub fn export_markov_trace(r: &BinningResult) -> &[TraceRecord] {
    &r.markov_trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ScenarioConfig;

    fn mpc(params: [f64; 6]) -> MpcVector {
        MpcVector::from_params(params)
    }

    fn snap(j: u32, mpcs: Vec<MpcVector>) -> Snapshot {
        Snapshot {
            position_index: j,
            rx_position_m: [0.0, j as f64, 0.0],
            mpcs,
        }
    }

    fn traj(snaps: Vec<Snapshot>) -> Trajectory {
        Trajectory {
            config: ScenarioConfig::default(),
            snapshots: snaps,
        }
    }

    #[test]
    fn param_distance_basics() {
        let a = mpc([-80.0, 10.0, 5.0, 179.0, 0.0, 0.0]);
        let b = mpc([-86.0, 10.0, 5.0, -179.0, 0.0, 0.0]);
        assert_eq!(param_distance(&a, &a, 1), 0.0);
        assert_eq!(param_distance(&a, &b, 1), 6.0);
        assert!((param_distance(&a, &b, 4) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn total_distance_arithmetic() {
        let a = mpc([0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = mpc([6.0, 3.0, 1.0, 2.0, 1.0, 2.0]);
        assert!((total_distance(&a, &a, 75.8)).abs() < 1e-15);
        assert!((total_distance(&a, &b, 75.8) - 15.0 / 75.8).abs() < 1e-12);
        // Linearity in the differences.
        let b2 = mpc([12.0, 6.0, 2.0, 4.0, 2.0, 4.0]);
        assert!((total_distance(&a, &b2, 75.8) - 2.0 * total_distance(&a, &b, 75.8)).abs() < 1e-12);
    }

    #[test]
    fn pseudometric_properties() {
        let vecs = [
            mpc([-80.0, 10.0, 5.0, 170.0, -3.0, -170.0]),
            mpc([-90.0, 30.0, -5.0, -170.0, 3.0, 170.0]),
            mpc([-85.0, 20.0, 0.0, 0.0, 0.0, 0.0]),
        ];
        for a in &vecs {
            for b in &vecs {
                let dab = total_distance(a, b, 75.8);
                assert!(dab >= 0.0);
                assert!((dab - total_distance(b, a, 75.8)).abs() < 1e-12);
                for c in &vecs {
                    let dac = total_distance(a, c, 75.8);
                    let dcb = total_distance(c, b, 75.8);
                    assert!(dab <= dac + dcb + 1e-12);
                }
            }
        }
    }

    #[test]
    fn first_snapshot_births_all() {
        let s = snap(
            1,
            (0..5)
                .map(|i| mpc([-80.0 - 10.0 * i as f64, 0.0, 0.0, 0.0, 0.0, 0.0]))
                .collect(),
        );
        let r = run_binning(&traj(vec![s]), &BinningParams::default());
        assert_eq!(r.bins.len(), 5);
        for b in &r.bins {
            assert_eq!(b.events, vec![(1, LifecycleEvent::Birth)]);
        }
        assert_eq!(r.unassigned_births.len(), 5);
    }

    #[test]
    fn single_candidate_joins_bin() {
        let a = mpc([-80.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = mpc([-81.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let r = run_binning(
            &traj(vec![snap(1, vec![a]), snap(2, vec![b])]),
            &BinningParams::default(),
        );
        assert_eq!(r.bins.len(), 1);
        assert_eq!(r.bins[0].entries.len(), 2);
        assert_eq!(r.bins[0].events[1], (2, LifecycleEvent::Continue));
    }

    #[test]
    fn distant_mpc_births_new_bin() {
        let a = mpc([-80.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = mpc([-120.0, 300.0, 0.0, 90.0, 0.0, 90.0]);
        let r = run_binning(
            &traj(vec![snap(1, vec![a]), snap(2, vec![b])]),
            &BinningParams::default(),
        );
        assert_eq!(r.bins.len(), 2);
        // Bin 1 got no MPC at position 2.
        assert_eq!(r.bins[0].events[1], (2, LifecycleEvent::Discontinue));
    }

    #[test]
    fn resurrection_after_gap() {
        let a = mpc([-80.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let far = mpc([-120.0, 300.0, 0.0, 90.0, 0.0, 90.0]);
        let r = run_binning(
            &traj(vec![snap(1, vec![a]), snap(2, vec![far]), snap(3, vec![a])]),
            &BinningParams::default(),
        );
        let bin1 = r.bin(1).unwrap();
        assert_eq!(
            bin1.events,
            vec![
                (1, LifecycleEvent::Birth),
                (2, LifecycleEvent::Discontinue),
                (3, LifecycleEvent::Resurrect),
            ]
        );
        assert_eq!(bin1.entries.len(), 2);
    }

    #[test]
    fn partition_property() {
        let t = crate::sim::generate_trajectory(&ScenarioConfig::default()).unwrap();
        let r = run_binning(&t, &BinningParams::default());
        let total_mpcs: usize = t.snapshots.iter().map(|s| s.mpcs.len()).sum();
        let binned: usize = r.bins.iter().map(|b| b.entries.len()).sum();
        assert_eq!(total_mpcs, binned);
        assert_eq!(r.markov_trace.len(), total_mpcs);
        // No two MPCs of the same snapshot in the same bin; strictly
        // increasing positions per bin.
        for b in &r.bins {
            for w in b.entries.windows(2) {
                assert!(w[0].0 < w[1].0);
            }
        }
    }

    #[test]
    fn gamma_epsilon_matched_scaling_invariance() {
        let t = crate::sim::generate_trajectory(&ScenarioConfig::default()).unwrap();
        let base = BinningParams::default();
        let scaled = BinningParams {
            gamma: base.gamma * 3.0,
            epsilon: base.epsilon / 3.0,
            ..base.clone()
        };
        let ra = run_binning(&t, &base);
        let rb = run_binning(&t, &scaled);
        let sig = |r: &BinningResult| -> Vec<Vec<u32>> {
            r.bins
                .iter()
                .map(|b| b.entries.iter().map(|(p, _)| *p).collect())
                .collect()
        };
        assert_eq!(sig(&ra), sig(&rb));
    }

    #[test]
    fn causality_of_fold() {
        let t = crate::sim::generate_trajectory(&ScenarioConfig::default()).unwrap();
        let params = BinningParams::default();
        let full = run_binning(&t, &params);
        let mut shorter = t.clone();
        shorter.snapshots.pop();
        let partial = run_binning(&shorter, &params);
        // Every assignment at earlier positions identical.
        let last = t.snapshots.last().unwrap().position_index;
        let early: Vec<_> = full
            .markov_trace
            .iter()
            .filter(|r| r.position_index < last)
            .collect();
        assert_eq!(early.len(), partial.markov_trace.len());
        for (a, b) in early.iter().zip(partial.markov_trace.iter()) {
            assert_eq!(a.chosen_bin_id, b.chosen_bin_id);
        }
    }

    #[test]
    fn lookback_one_depends_only_on_previous_snapshot() {
        let t = crate::sim::generate_trajectory(&ScenarioConfig::default()).unwrap();
        let params = BinningParams {
            lookback: Some(1),
            ..Default::default()
        };
        // Recompute each step feeding only the previous snapshot as history;
        // result must be identical to the normal fold with lookback 1.
        let mut manual = BinningResult::default();
        for (i, snap) in t.snapshots.iter().enumerate() {
            let hist = if i == 0 {
                &t.snapshots[0..0]
            } else {
                &t.snapshots[i - 1..i]
            };
            manual = assign_snapshot(manual, snap, hist, &params);
        }
        let folded = run_binning(&t, &params);
        assert_eq!(manual, folded);
    }

    #[test]
    fn trace_rows_choose_minimum() {
        let t = crate::sim::generate_trajectory(&ScenarioConfig::default()).unwrap();
        let r = run_binning(&t, &BinningParams::default());
        for row in export_markov_trace(&r) {
            if row.candidates.is_empty() {
                continue; // birth
            }
            let min = row
                .candidates
                .iter()
                .map(|(_, d)| *d)
                .fold(f64::INFINITY, f64::min);
            let chosen = row
                .candidates
                .iter()
                .find(|(id, _)| *id == row.chosen_bin_id)
                .unwrap();
            assert!(chosen.1 <= min + 1e-15);
        }
    }
}
