//! Dataset and report persistence: trajectory CSV/JSON, scenario config
//! files, and the CSV emissions of every pipeline stage. All writers pin a
//! fixed float formatting so identical inputs produce identical bytes.

use std::collections::BTreeMap;
use std::path::Path;

use crate::binning::BinningResult;
use crate::death::DeathReport;
use crate::error::Error;
use crate::eval::{EvalReport, Matching};
use crate::forecast::BinForecast;
use crate::types::{MpcVector, ScenarioConfig, Snapshot, Trajectory, TruthLabel, NUM_PARAMS};

const TRAJECTORY_HEADER: [&str; 11] = [
    "position_index",
    "x_m",
    "y_m",
    "z_m",
    "gain_db",
    "delay_ns",
    "aod_elev_deg",
    "aod_azim_deg",
    "aoa_elev_deg",
    "aoa_azim_deg",
    "truth_label",
];

const PARAM_NAMES: [&str; NUM_PARAMS] = [
    "gain_db",
    "delay_ns",
    "aod_elev_deg",
    "aod_azim_deg",
    "aoa_elev_deg",
    "aoa_azim_deg",
];

/// Full-precision float formatting; round-trips f64 exactly.
fn fmt(x: f64) -> String {
    format!("{x:?}")
}

// ---------------------------------------------------------------------------
// Scenario config (flat key = value)
// ---------------------------------------------------------------------------

pub fn read_config(path: &Path) -> Result<ScenarioConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    let config: ScenarioConfig = toml::from_str(&text)?;
    config.validate()?;
    Ok(config)
}

pub fn write_config(path: &Path, config: &ScenarioConfig) -> Result<(), Error> {
    let text = toml::to_string(config).expect("config serializes");
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

pub fn write_trajectory_csv(path: &Path, t: &Trajectory) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for s in &t.snapshots {
        for m in &s.mpcs {
            w.write_record([
                s.position_index.to_string(),
                fmt(s.rx_position_m[0]),
                fmt(s.rx_position_m[1]),
                fmt(s.rx_position_m[2]),
                fmt(m.gain_db),
                fmt(m.delay_ns),
                fmt(m.aod_elev_deg),
                fmt(m.aod_azim_deg),
                fmt(m.aoa_elev_deg),
                fmt(m.aoa_azim_deg),
                m.truth_label.map(|l| l.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv(path: &Path, config: ScenarioConfig) -> Result<Trajectory, Error> {
    let mut r = csv::Reader::from_path(path)?;
    let mut snapshots: Vec<Snapshot> = Vec::new();
    for record in r.records() {
        let rec = record?;
        let get = |i: usize| -> Result<f64, Error> {
            rec.get(i)
                .ok_or_else(|| Error::Parse(format!("missing column {i}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad float in column {i}: {e}")))
        };
        let position_index: u32 = rec
            .get(0)
            .ok_or_else(|| Error::Parse("missing position_index".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad position_index: {e}")))?;
        let rx = [get(1)?, get(2)?, get(3)?];
        let label = match rec.get(10) {
            Some("") | None => None,
            Some(s) => Some(s.parse::<TruthLabel>()?),
        };
        let mpc = MpcVector {
            gain_db: get(4)?,
            delay_ns: get(5)?,
            aod_elev_deg: get(6)?,
            aod_azim_deg: get(7)?,
            aoa_elev_deg: get(8)?,
            aoa_azim_deg: get(9)?,
            truth_label: label,
        };
        match snapshots.last_mut() {
            Some(s) if s.position_index == position_index => s.mpcs.push(mpc),
            _ => snapshots.push(Snapshot {
                position_index,
                rx_position_m: rx,
                mpcs: vec![mpc],
            }),
        }
    }
    Ok(Trajectory { config, snapshots })
}

pub fn write_trajectory_json(path: &Path, t: &Trajectory) -> Result<(), Error> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, t)?;
    Ok(())
}

pub fn read_trajectory_json(path: &Path) -> Result<Trajectory, Error> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(file)?)
}

/// Reads a trajectory from either representation, keyed on extension
/// (.json for JSON, anything else treated as CSV).
pub fn read_trajectory(path: &Path, config: ScenarioConfig) -> Result<Trajectory, Error> {
    if path.extension().is_some_and(|e| e == "json") {
        read_trajectory_json(path)
    } else {
        read_trajectory_csv(path, config)
    }
}

// ---------------------------------------------------------------------------
// Binning outputs
// ---------------------------------------------------------------------------

pub fn write_bins_csv(path: &Path, result: &BinningResult) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["bin_id".to_string(), "position_index".to_string()];
    header.extend(PARAM_NAMES.iter().map(|s| s.to_string()));
    header.push("truth_label".to_string());
    w.write_record(&header)?;
    for bin in &result.bins {
        for (pos, m) in &bin.entries {
            let mut rec = vec![bin.bin_id.to_string(), pos.to_string()];
            rec.extend((1..=NUM_PARAMS).map(|v| fmt(m.param(v))));
            rec.push(m.truth_label.map(|l| l.to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_events_csv(path: &Path, result: &BinningResult) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_id", "position_index", "event"])?;
    for bin in &result.bins {
        for (pos, event) in &bin.events {
            w.write_record([bin.bin_id.to_string(), pos.to_string(), event.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_markov_csv(path: &Path, result: &BinningResult) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "position_index",
        "mpc_index",
        "chosen_bin_id",
        "d_min",
        "candidates",
    ])?;
    for rec in &result.markov_trace {
        let candidates = rec
            .candidates
            .iter()
            .map(|(id, d)| format!("{id}:{}", fmt(*d)))
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            rec.position_index.to_string(),
            rec.mpc_index.to_string(),
            rec.chosen_bin_id.to_string(),
            fmt(rec.d_min),
            candidates,
        ])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Forecast and evaluation outputs
// ---------------------------------------------------------------------------

/// Forecast CSV: observed values flagged is_forecast=0, forecast values 1.
pub fn write_forecast_csv(
    path: &Path,
    binning: &BinningResult,
    forecasts: &[BinForecast],
) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "bin_id",
        "position_index",
        "parameter",
        "value",
        "is_forecast",
    ])?;
    for bin in &binning.bins {
        for (pos, m) in &bin.entries {
            for (v, name) in PARAM_NAMES.iter().enumerate() {
                w.write_record([
                    bin.bin_id.to_string(),
                    pos.to_string(),
                    name.to_string(),
                    fmt(m.param(v + 1)),
                    "0".to_string(),
                ])?;
            }
        }
    }
    for fc in forecasts {
        for k in 0..fc.horizon {
            let pos = fc.start_position + k as u32;
            for (v, name) in PARAM_NAMES.iter().enumerate() {
                w.write_record([
                    fc.bin_id.to_string(),
                    pos.to_string(),
                    name.to_string(),
                    fmt(fc.per_parameter[v][k]),
                    "1".to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_deaths_csv(path: &Path, report: &DeathReport) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_id", "d_l", "n_positions", "predicted_dead"])?;
    for (bin_id, stats) in &report.per_bin {
        w.write_record([
            bin_id.to_string(),
            fmt(stats.d_l),
            stats.n_positions.to_string(),
            stats.predicted_dead.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_eval_json(path: &Path, report: &EvalReport) -> Result<(), Error> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, report)?;
    Ok(())
}

/// Per-position gain error of every matched pair, for plotting.
pub fn write_error_csv(path: &Path, matching: &Matching) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "position_index",
        "bin_id",
        "forecast_gain_db",
        "truth_gain_db",
        "gain_error_db",
        "pair_distance",
    ])?;
    for p in &matching.pairs {
        w.write_record([
            p.position_index.to_string(),
            p.bin_id.to_string(),
            fmt(p.forecast.gain_db),
            fmt(p.truth.gain_db),
            fmt(p.forecast.gain_db - p.truth.gain_db),
            fmt(p.distance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Raw power-by-rank data behind the unbinned power plot.
pub fn write_power_by_rank_csv(path: &Path, t: &Trajectory) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["position_index", "rank", "gain_db"])?;
    for s in &t.snapshots {
        for (rank, m) in s.mpcs.iter().enumerate() {
            w.write_record([
                s.position_index.to_string(),
                rank.to_string(),
                fmt(m.gain_db),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a deaths CSV back into (bin_id -> d_l), used by the CLI when
/// thresholding externally supplied distances.
pub fn read_distances_csv(path: &Path) -> Result<BTreeMap<u32, f64>, Error> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for record in r.records() {
        let rec = record?;
        let id: u32 = rec
            .get(0)
            .ok_or_else(|| Error::Parse("missing bin_id".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad bin_id: {e}")))?;
        let d: f64 = rec
            .get(1)
            .ok_or_else(|| Error::Parse("missing d_l".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad d_l: {e}")))?;
        out.insert(id, d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::{run_binning, BinningParams};
    use crate::sim::generate_trajectory;

    #[test]
    fn trajectory_csv_round_trip() {
        let mut config = ScenarioConfig::default();
        config.n_positions = 10;
        config.blockage_start_index = 8;
        let t = generate_trajectory(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        write_trajectory_csv(&path, &t).unwrap();
        let back = read_trajectory_csv(&path, config).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn trajectory_json_round_trip() {
        let mut config = ScenarioConfig::default();
        config.n_positions = 7;
        config.blockage_start_index = 5;
        let t = generate_trajectory(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.json");
        write_trajectory_json(&path, &t).unwrap();
        let back = read_trajectory_json(&path).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn config_round_trip_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.toml");
        let config = ScenarioConfig::default();
        write_config(&path, &config).unwrap();
        assert_eq!(read_config(&path).unwrap(), config);

        // Partial file fills remaining fields with defaults.
        std::fs::write(&path, "frequency_hz = 60e9\nn_positions = 200\n").unwrap();
        let partial = read_config(&path).unwrap();
        assert_eq!(partial.frequency_hz, 60e9);
        assert_eq!(partial.n_positions, 200);
        assert_eq!(partial.h_rx_m, 50.0);

        // Unknown keys are named in the error.
        std::fs::write(&path, "frequenzy_hz = 60e9\n").unwrap();
        let err = read_config(&path).unwrap_err().to_string();
        assert!(err.contains("frequenzy_hz"), "{err}");
    }

    #[test]
    fn stage_outputs_are_writable() {
        let mut config = ScenarioConfig::default();
        config.n_positions = 12;
        config.blockage_start_index = 9;
        let t = generate_trajectory(&config).unwrap();
        let r = run_binning(&t, &BinningParams::from_config(&config));
        let dir = tempfile::tempdir().unwrap();
        write_bins_csv(&dir.path().join("bins.csv"), &r).unwrap();
        write_events_csv(&dir.path().join("events.csv"), &r).unwrap();
        write_markov_csv(&dir.path().join("markov.csv"), &r).unwrap();
        write_power_by_rank_csv(&dir.path().join("power.csv"), &t).unwrap();
    }
}
