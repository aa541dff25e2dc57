//! Distance-based prediction of path-bin death: each bin's average
//! normalized distance to the LOS reference bin over its populated
//! positions, thresholded.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::binning::{total_distance, BinningResult};
use crate::error::Error;

/// Per-bin death statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinDeathStats {
    /// Average normalized distance to the reference (LOS) bin.
    pub d_l: f64,
    /// Number of positions contributing to the average.
    pub n_positions: u32,
    pub predicted_dead: bool,
}

/// Death-prediction report over all non-reference bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeathReport {
    pub per_bin: BTreeMap<u32, BinDeathStats>,
    pub threshold: f64,
    pub reference_bin_id: u32,
}

/// Mean distance between a bin's entries and the reference bin's entries at
/// the same positions. Positions where the reference bin has no entry are
/// skipped (resurrection gaps are legal); erroring only when nothing
/// remains.
pub fn average_distance_to_los(
    result: &BinningResult,
    bin_id: u32,
    reference_bin_id: u32,
    gamma: f64,
) -> Result<(f64, u32), Error> {
    let bin = result
        .bin(bin_id)
        .ok_or_else(|| Error::IndexOutOfRange(format!("no bin {bin_id}")))?;
    let reference = result
        .bin(reference_bin_id)
        .ok_or_else(|| Error::IndexOutOfRange(format!("no reference bin {reference_bin_id}")))?;
    let mut sum = 0.0;
    let mut n = 0u32;
    for (pos, mpc) in &bin.entries {
        if let Some(los) = reference.entry_at(*pos) {
            sum += total_distance(mpc, los, gamma);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::MissingLosReference(bin_id));
    }
    Ok((sum / n as f64, n))
}

/// Identifier of the bin used as the LOS reference: the bin with the
/// maximum mean gain, which is bin 1 on the synthetic scenario.
pub fn default_reference_bin(result: &BinningResult) -> Option<u32> {
    result
        .bins
        .iter()
        .max_by(|a, b| {
            let mean = |bin: &crate::types::PathBin| {
                bin.entries.iter().map(|(_, m)| m.gain_db).sum::<f64>()
                    / bin.entries.len().max(1) as f64
            };
            mean(a).partial_cmp(&mean(b)).unwrap()
        })
        .map(|b| b.bin_id)
}

/// Flags every non-reference bin whose average distance to the reference
/// exceeds the threshold.
pub fn predict_deaths(
    result: &BinningResult,
    reference_bin_id: u32,
    threshold: f64,
    gamma: f64,
) -> DeathReport {
    let mut per_bin = BTreeMap::new();
    for bin in &result.bins {
        if bin.bin_id == reference_bin_id {
            continue;
        }
        if let Ok((d_l, n)) = average_distance_to_los(result, bin.bin_id, reference_bin_id, gamma) {
            per_bin.insert(
                bin.bin_id,
                BinDeathStats {
                    d_l,
                    n_positions: n,
                    predicted_dead: d_l > threshold,
                },
            );
        }
    }
    DeathReport {
        per_bin,
        threshold,
        reference_bin_id,
    }
}

/// Thresholds externally supplied averages, keyed by bin id. Used when the
/// distances come from another tool rather than our own arrangement.
pub fn predict_deaths_from_distances(
    distances: &BTreeMap<u32, f64>,
    threshold: f64,
) -> BTreeMap<u32, bool> {
    distances
        .iter()
        .map(|(&id, &d)| (id, d > threshold))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{LifecycleEvent, MpcVector, PathBin};

    fn bin_with(id: u32, entries: Vec<(u32, [f64; 6])>) -> PathBin {
        PathBin {
            bin_id: id,
            entries: entries
                .into_iter()
                .map(|(p, v)| (p, MpcVector::from_params(v)))
                .collect(),
            events: vec![(1, LifecycleEvent::Birth)],
        }
    }

    fn result(bins: Vec<PathBin>) -> BinningResult {
        BinningResult {
            bins,
            markov_trace: vec![],
            unassigned_births: vec![],
        }
    }

    #[test]
    fn identical_bins_distance_zero() {
        let e = vec![
            (1, [-80.0, 10.0, 1.0, 2.0, 3.0, 4.0]),
            (2, [-81.0, 11.0, 1.0, 2.0, 3.0, 4.0]),
        ];
        let r = result(vec![bin_with(1, e.clone()), bin_with(2, e)]);
        let (d, n) = average_distance_to_los(&r, 2, 1, 75.8).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(n, 2);
    }

    #[test]
    fn single_position_mean() {
        // Per-parameter differences summing to 7.58 at gamma 75.8 gives 0.1.
        let los = vec![(1, [-80.0, 10.0, 1.0, 2.0, 3.0, 4.0])];
        let other = vec![(1, [-82.0, 12.58, 2.0, 3.0, 4.0, 4.0])];
        let r = result(vec![bin_with(1, los), bin_with(2, other)]);
        let (d, n) = average_distance_to_los(&r, 2, 1, 75.8).unwrap();
        assert!((d - 0.1).abs() < 1e-12);
        assert_eq!(n, 1);
    }

    #[test]
    fn positions_without_reference_skipped() {
        let los = vec![(1, [-80.0, 10.0, 1.0, 2.0, 3.0, 4.0])];
        let other = vec![
            (1, [-80.0, 10.0, 1.0, 2.0, 3.0, 4.0]),
            (2, [-99.0, 10.0, 1.0, 2.0, 3.0, 4.0]),
        ];
        let r = result(vec![bin_with(1, los), bin_with(2, other)]);
        let (d, n) = average_distance_to_los(&r, 2, 1, 75.8).unwrap();
        assert_eq!(n, 1);
        assert_eq!(d, 0.0);
        // Bin sharing no position with the reference errors.
        let lonely = vec![(5, [-80.0, 10.0, 1.0, 2.0, 3.0, 4.0])];
        let r = result(vec![
            bin_with(1, vec![(1, [-80.0, 10.0, 1.0, 2.0, 3.0, 4.0])]),
            bin_with(2, lonely),
        ]);
        assert!(matches!(
            average_distance_to_los(&r, 2, 1, 75.8),
            Err(Error::MissingLosReference(2))
        ));
    }

    #[test]
    fn reference_vector_thresholding() {
        let d_l = [0.68, 5.07, 4.29, 4.45, 3.85, 4.01, 4.18];
        let distances: BTreeMap<u32, f64> = d_l
            .iter()
            .enumerate()
            .map(|(i, &d)| (i as u32 + 2, d))
            .collect();
        let flags = predict_deaths_from_distances(&distances, 4.20);
        let dead: Vec<u32> = flags
            .iter()
            .filter(|(_, &f)| f)
            .map(|(&id, _)| id)
            .collect();
        assert_eq!(dead, vec![3, 4, 5]);
        // Degenerate thresholds.
        let all = predict_deaths_from_distances(&distances, 0.0);
        assert!(all.values().all(|&f| f));
        let none = predict_deaths_from_distances(&distances, 6.0);
        assert!(none.values().all(|&f| !f));
    }

    #[test]
    fn flag_set_monotone_in_threshold() {
        let distances: BTreeMap<u32, f64> = [(2, 0.5), (3, 2.0), (4, 4.5)].into_iter().collect();
        let mut prev = usize::MAX;
        for t in [0.0, 1.0, 3.0, 5.0] {
            let count = predict_deaths_from_distances(&distances, t)
                .values()
                .filter(|&&f| f)
                .count();
            assert!(count <= prev);
            prev = count;
        }
    }

    #[test]
    fn gamma_threshold_matched_scaling() {
        let los = vec![(1, [-80.0, 10.0, 1.0, 2.0, 3.0, 4.0])];
        let other = vec![(1, [-90.0, 40.0, 5.0, 9.0, 3.0, 4.0])];
        let r = result(vec![bin_with(1, los), bin_with(2, other)]);
        let a = predict_deaths(&r, 1, 0.5, 75.8);
        let b = predict_deaths(&r, 1, 0.5 / 2.0, 75.8 * 2.0);
        assert_eq!(a.per_bin[&2].predicted_dead, b.per_bin[&2].predicted_dead);
        assert!((a.per_bin[&2].d_l - 2.0 * b.per_bin[&2].d_l).abs() < 1e-12);
    }
}
