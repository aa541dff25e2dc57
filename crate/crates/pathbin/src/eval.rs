//! End-to-end blockage experiment: forecast-to-truth matching, MSE/MAPE
//! metrics, and the unbinned per-rank AR baseline.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::binning::{run_binning, total_distance, BinningParams};
use crate::error::Error;
use crate::forecast::{fit_ar, forecast, forecast_bins, BinForecast, DEFAULT_STALE_GAP};
use crate::sim::{apply_blockage, generate_trajectory};
use crate::types::{MpcVector, ScenarioConfig, Trajectory, NUM_PARAMS};

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

/// One forecast/truth correspondence at one blocked position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub position_index: u32,
    pub bin_id: u32,
    pub forecast: MpcVector,
    pub truth: MpcVector,
    pub distance: f64,
}

/// Forecast-to-truth pairing over the blocked positions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<MatchedPair>,
    /// Hidden MPCs with no forecast (births during blockage): (position, mpc index).
    pub unpaired_truth: Vec<(u32, usize)>,
    /// Forecasts with no hidden MPC (deaths during blockage): (position, bin id).
    pub unpaired_forecasts: Vec<(u32, u32)>,
}

/// Greedy one-to-one pairing per position by ascending total distance.
pub fn match_forecast_to_truth(
    forecasts: &[BinForecast],
    hidden: &Trajectory,
    params: &BinningParams,
) -> Matching {
    let mut matching = Matching::default();
    for snap in &hidden.snapshots {
        let pos = snap.position_index;
        // Forecast vectors valid at this position.
        let candidates: Vec<(u32, MpcVector)> = forecasts
            .iter()
            .filter_map(|f| {
                let k = pos.checked_sub(f.start_position)? as usize;
                (k < f.horizon).then(|| (f.bin_id, f.mpc_at(k)))
            })
            .collect();
        let mut edges: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, truth) in snap.mpcs.iter().enumerate() {
            for (ci, (_, fc)) in candidates.iter().enumerate() {
                edges.push((total_distance(fc, truth, params.gamma), ti, ci));
            }
        }
        edges.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut truth_used = vec![false; snap.mpcs.len()];
        let mut cand_used = vec![false; candidates.len()];
        for (d, ti, ci) in edges {
            if truth_used[ti] || cand_used[ci] {
                continue;
            }
            truth_used[ti] = true;
            cand_used[ci] = true;
            matching.pairs.push(MatchedPair {
                position_index: pos,
                bin_id: candidates[ci].0,
                forecast: candidates[ci].1,
                truth: snap.mpcs[ti],
                distance: d,
            });
        }
        for (ti, used) in truth_used.iter().enumerate() {
            if !used {
                matching.unpaired_truth.push((pos, ti));
            }
        }
        for (ci, used) in cand_used.iter().enumerate() {
            if !used {
                matching.unpaired_forecasts.push((pos, candidates[ci].0));
            }
        }
    }
    matching
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Mean squared gain error in dB² over the matched pairs.
pub fn mse_db(pairs: &[MatchedPair]) -> Result<f64, Error> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairs);
    }
    Ok(pairs
        .iter()
        .map(|p| (p.forecast.gain_db - p.truth.gain_db).powi(2))
        .sum::<f64>()
        / pairs.len() as f64)
}

/// Mean absolute percentage error over all six parameters of all pairs.
/// Parameters whose true magnitude is below 1e-9 are excluded.
pub fn mape(pairs: &[MatchedPair]) -> Result<f64, Error> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairs);
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for p in pairs {
        for v in 1..=NUM_PARAMS {
            let truth = p.truth.param(v);
            if truth.abs() < 1e-9 {
                continue;
            }
            sum += ((p.forecast.param(v) - truth) / truth).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::AllValuesExcluded);
    }
    Ok(100.0 * sum / n as f64)
}

// ---------------------------------------------------------------------------
// Unbinned AR baseline
// ---------------------------------------------------------------------------

/// Baseline comparator: the k-th strongest MPC at each position forms a
/// series by rank, forecast directly without any bin arrangement. Returned
/// in the BinForecast shape with bin_id = rank + 1.
pub fn baseline_unbinned_ar(
    observed: &Trajectory,
    blockage_start: u32,
    horizon: usize,
    order: usize,
) -> Vec<BinForecast> {
    let max_rank = observed
        .snapshots
        .iter()
        .map(|s| s.mpcs.len())
        .max()
        .unwrap_or(0);
    let mut out = Vec::new();
    for rank in 0..max_rank {
        // Positions where this rank exists, in order; gaps ignored.
        let series_by_param: Vec<Vec<f64>> = (1..=NUM_PARAMS)
            .map(|v| {
                observed
                    .snapshots
                    .iter()
                    .filter_map(|s| s.mpcs.get(rank).map(|m| m.param(v)))
                    .collect()
            })
            .collect();
        let len = series_by_param[0].len();
        if len < 2 {
            continue;
        }
        let mut per_parameter = Vec::with_capacity(NUM_PARAMS);
        let mut ok = true;
        for series in &series_by_param {
            let eff_order = if len >= 2 * order + 1 {
                order
            } else {
                ((len - 1) / 2).max(1)
            };
            match fit_ar(series, eff_order).and_then(|m| forecast(&m, series, horizon)) {
                Ok(values) => per_parameter.push(values),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            out.push(BinForecast {
                bin_id: rank as u32 + 1,
                start_position: blockage_start,
                horizon,
                per_parameter,
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Experiment report
// ---------------------------------------------------------------------------

/// Aggregated metrics of one blockage experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_bin_mse_db: BTreeMap<u32, f64>,
    pub overall_mse_db: f64,
    pub overall_mape_percent: f64,
    pub baseline_mse_db: f64,
    pub baseline_mape_percent: f64,
    pub matched_pairs: usize,
    pub baseline_matched_pairs: usize,
}

/// Detailed artifacts of one experiment run, for file emission.
pub struct ExperimentArtifacts {
    pub trajectory: Trajectory,
    pub observed: Trajectory,
    pub hidden: Trajectory,
    pub binning: crate::binning::BinningResult,
    pub forecasts: Vec<BinForecast>,
    pub baseline_forecasts: Vec<BinForecast>,
    pub matching: Matching,
    pub baseline_matching: Matching,
    pub report: EvalReport,
}

/// Runs the full pipeline on an already generated trajectory.
pub fn run_blockage_experiment_on(
    trajectory: Trajectory,
    config: &ScenarioConfig,
) -> Result<ExperimentArtifacts, Error> {
    let (observed, hidden) = apply_blockage(&trajectory, config.blockage_start_index)?;
    let horizon = (config.n_positions - config.blockage_start_index + 1) as usize;
    let params = BinningParams::from_config(config);
    let binning = run_binning(&observed, &params);
    let forecasts = forecast_bins(
        &binning,
        config.blockage_start_index,
        horizon,
        config.ar_order,
        DEFAULT_STALE_GAP,
    );
    let baseline_forecasts = baseline_unbinned_ar(
        &observed,
        config.blockage_start_index,
        horizon,
        config.ar_order,
    );
    let matching = match_forecast_to_truth(&forecasts, &hidden, &params);
    let baseline_matching = match_forecast_to_truth(&baseline_forecasts, &hidden, &params);

    let mut per_bin_mse_db = BTreeMap::new();
    let mut grouped: BTreeMap<u32, Vec<MatchedPair>> = BTreeMap::new();
    for p in &matching.pairs {
        grouped.entry(p.bin_id).or_default().push(p.clone());
    }
    for (bin_id, pairs) in &grouped {
        per_bin_mse_db.insert(*bin_id, mse_db(pairs)?);
    }

    let report = EvalReport {
        per_bin_mse_db,
        overall_mse_db: mse_db(&matching.pairs)?,
        overall_mape_percent: mape(&matching.pairs)?,
        baseline_mse_db: mse_db(&baseline_matching.pairs)?,
        baseline_mape_percent: mape(&baseline_matching.pairs)?,
        matched_pairs: matching.pairs.len(),
        baseline_matched_pairs: baseline_matching.pairs.len(),
    };
    Ok(ExperimentArtifacts {
        trajectory,
        observed,
        hidden,
        binning,
        forecasts,
        baseline_forecasts,
        matching,
        baseline_matching,
        report,
    })
}

/// Generates the synthetic scenario and runs the blockage experiment.
pub fn run_blockage_experiment(config: &ScenarioConfig) -> Result<ExperimentArtifacts, Error> {
    let trajectory = generate_trajectory(config)?;
    run_blockage_experiment_on(trajectory, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Snapshot, TruthLabel};

    fn mpc(p: [f64; 6]) -> MpcVector {
        MpcVector::from_params(p)
    }

    fn forecast_of(bin_id: u32, start: u32, values: Vec<[f64; 6]>) -> BinForecast {
        let horizon = values.len();
        let per_parameter = (0..NUM_PARAMS)
            .map(|v| values.iter().map(|p| p[v]).collect())
            .collect();
        BinForecast {
            bin_id,
            start_position: start,
            horizon,
            per_parameter,
        }
    }

    fn hidden_with(snaps: Vec<(u32, Vec<MpcVector>)>) -> Trajectory {
        Trajectory {
            config: ScenarioConfig::default(),
            snapshots: snaps
                .into_iter()
                .map(|(j, mpcs)| Snapshot {
                    position_index: j,
                    rx_position_m: [0.0; 3],
                    mpcs,
                })
                .collect(),
        }
    }

    #[test]
    fn exact_forecasts_pair_at_zero_distance() {
        let truth = [-100.0, 800.0, 10.0, 90.0, -11.0, -90.0];
        let fc = forecast_of(1, 75, vec![truth, truth]);
        let hidden = hidden_with(vec![(75, vec![mpc(truth)]), (76, vec![mpc(truth)])]);
        let m = match_forecast_to_truth(&[fc], &hidden, &BinningParams::default());
        assert_eq!(m.pairs.len(), 2);
        assert!(m.pairs.iter().all(|p| p.distance == 0.0));
        assert!(m.unpaired_truth.is_empty());
        assert!(m.unpaired_forecasts.is_empty());
        assert_eq!(mse_db(&m.pairs).unwrap(), 0.0);
        assert_eq!(mape(&m.pairs).unwrap(), 0.0);
    }

    #[test]
    fn nearer_forecast_wins() {
        let truth = [-100.0, 800.0, 10.0, 90.0, -11.0, -90.0];
        let near = [-101.0, 801.0, 10.0, 90.0, -11.0, -90.0];
        let far = [-140.0, 1200.0, -10.0, -90.0, 11.0, 90.0];
        let fcs = vec![
            forecast_of(1, 75, vec![near]),
            forecast_of(2, 75, vec![far]),
        ];
        let hidden = hidden_with(vec![(75, vec![mpc(truth)])]);
        let m = match_forecast_to_truth(&fcs, &hidden, &BinningParams::default());
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].bin_id, 1);
        assert_eq!(m.unpaired_forecasts, vec![(75, 2)]);
    }

    #[test]
    fn mse_and_mape_arithmetic() {
        let t = [-100.0, 800.0, 10.0, 90.0, -11.0, -90.0];
        let mk = |gain_err: f64| MatchedPair {
            position_index: 75,
            bin_id: 1,
            forecast: mpc([t[0] + gain_err, t[1], t[2], t[3], t[4], t[5]]),
            truth: mpc(t),
            distance: 0.0,
        };
        let pairs = vec![mk(3.0), mk(-3.0)];
        assert_eq!(mse_db(&pairs).unwrap(), 9.0);

        // Single pair, gain -98 vs truth -100: only the gain parameter
        // differs, so the all-parameter MAPE is 2%/6.
        let single = vec![MatchedPair {
            position_index: 75,
            bin_id: 1,
            forecast: mpc([-98.0, t[1], t[2], t[3], t[4], t[5]]),
            truth: mpc(t),
            distance: 0.0,
        }];
        let expected = 100.0 * (2.0 / 100.0) / 6.0;
        assert!((mape(&single).unwrap() - expected).abs() < 1e-12);

        assert!(matches!(mse_db(&[]), Err(Error::EmptyPairs)));
    }

    #[test]
    fn single_path_baseline_equals_binned() {
        // One MPC per position: the rank-0 series IS the single bin's series.
        let mut c = ScenarioConfig::default();
        c.n_scatterers = 0;
        c.noise_floor_dbm = -113.0; // drops the GRC, keeps LOS
        let t = generate_trajectory(&c).unwrap();
        assert!(t.snapshots.iter().all(|s| s.mpcs.len() == 1));
        let art = run_blockage_experiment_on(t, &c).unwrap();
        assert!((art.report.overall_mse_db - art.report.baseline_mse_db).abs() < 1e-9);
    }

    #[test]
    fn rank_swap_inflates_baseline_error() {
        // Two synthetic paths whose gains cross mid-trajectory: the rank
        // series mixes them, the bins do not.
        let n = 60u32;
        let blockage = 45u32;
        let mut snaps = Vec::new();
        for j in 1..=n {
            let x = j as f64;
            let a = mpc([
                -100.0 - 0.15 * x + 0.5 * (0.10 * x).cos(),
                800.0,
                10.0,
                90.0,
                -11.0,
                -90.0,
            ]);
            let b = mpc([
                -112.0 + 0.15 * x - 0.5 * (0.13 * x).cos(),
                900.0,
                -10.0,
                60.0,
                -13.0,
                -60.0,
            ]);
            let mut snap = Snapshot {
                position_index: j,
                rx_position_m: [0.0, x, 0.0],
                mpcs: vec![
                    MpcVector {
                        truth_label: Some(TruthLabel::Los),
                        ..a
                    },
                    MpcVector {
                        truth_label: Some(TruthLabel::Scatterer(1)),
                        ..b
                    },
                ],
            };
            snap.sort_mpcs();
            snaps.push(snap);
        }
        let mut config = ScenarioConfig::default();
        config.n_positions = n;
        config.blockage_start_index = blockage;
        let t = Trajectory {
            config: config.clone(),
            snapshots: snaps,
        };
        let art = run_blockage_experiment_on(t, &config).unwrap();
        assert!(
            art.report.overall_mse_db < art.report.baseline_mse_db,
            "binned {} vs baseline {}",
            art.report.overall_mse_db,
            art.report.baseline_mse_db
        );
    }

    #[test]
    fn experiment_determinism_and_minimal_horizon() {
        let mut c = ScenarioConfig::default();
        c.blockage_start_index = c.n_positions; // horizon 1
        let a = run_blockage_experiment(&c).unwrap();
        let b = run_blockage_experiment(&c).unwrap();
        assert_eq!(a.report, b.report);
        let last = a.hidden.snapshots.last().unwrap();
        assert!(a.report.matched_pairs <= last.mpcs.len());
        assert!(a.report.matched_pairs > 0);
    }
}
