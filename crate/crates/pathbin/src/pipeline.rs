//! Stage orchestration behind the CLI subcommands, with a run manifest
//! recording the config, file digests, and wall-clock timings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::binning::{run_binning, BinningParams};
use crate::dataset;
use crate::death::{default_reference_bin, predict_deaths};
use crate::error::Error;
use crate::eval::run_blockage_experiment_on;
use crate::forecast::{forecast_bins, DEFAULT_STALE_GAP};
use crate::sim::generate_trajectory;
use crate::types::{ScenarioConfig, Trajectory};

/// Record of one pipeline run: enough to re-check inputs and outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: ScenarioConfig,
    /// Output path -> SHA-256 hex digest.
    pub outputs: BTreeMap<String, String>,
    /// Stage -> wall-clock milliseconds.
    pub timings_ms: BTreeMap<String, u128>,
}

impl RunManifest {
    pub fn new(config: &ScenarioConfig) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            outputs: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn record_output(&mut self, path: &Path) -> Result<(), Error> {
        let digest = sha256_file(path)?;
        self.outputs.insert(
            path.file_name().unwrap().to_string_lossy().into_owned(),
            digest,
        );
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    /// Recomputes every stored digest and reports mismatches.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>, Error> {
        let mut bad = Vec::new();
        for (name, digest) in &self.outputs {
            if sha256_file(&dir.join(name))? != *digest {
                bad.push(name.clone());
            }
        }
        Ok(bad)
    }
}

pub fn sha256_file(path: &Path) -> Result<String, Error> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn timed<T>(
    manifest: &mut RunManifest,
    stage: &str,
    f: impl FnOnce() -> Result<T, Error>,
) -> Result<T, Error> {
    let start = Instant::now();
    let out = f()?;
    manifest
        .timings_ms
        .insert(stage.to_string(), start.elapsed().as_millis());
    Ok(out)
}

fn source_trajectory(config: &ScenarioConfig, input: Option<&Path>) -> Result<Trajectory, Error> {
    match input {
        Some(path) => dataset::read_trajectory(path, config.clone()),
        None => generate_trajectory(config),
    }
}

/// `simulate`: dataset + manifest.
pub fn cmd_simulate(config: &ScenarioConfig, out_dir: &Path) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(config);
    let t = timed(&mut manifest, "simulate", || generate_trajectory(config))?;
    let path = out_dir.join("trajectory.csv");
    dataset::write_trajectory_csv(&path, &t)?;
    manifest.record_output(&path)?;
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(path)
}

/// `bin`: bins, events, and Markov trace CSVs.
pub fn cmd_bin(config: &ScenarioConfig, input: Option<&Path>, out_dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(config);
    let t = source_trajectory(config, input)?;
    let r = timed(&mut manifest, "bin", || {
        Ok(run_binning(&t, &BinningParams::from_config(config)))
    })?;
    let bins = out_dir.join("bins.csv");
    dataset::write_bins_csv(&bins, &r)?;
    manifest.record_output(&bins)?;
    let events = out_dir.join("events.csv");
    dataset::write_events_csv(&events, &r)?;
    manifest.record_output(&events)?;
    let markov = out_dir.join("markov_trace.csv");
    dataset::write_markov_csv(&markov, &r)?;
    manifest.record_output(&markov)?;
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(())
}

/// `forecast`: per-bin forecast CSV over the blockage window.
pub fn cmd_forecast(
    config: &ScenarioConfig,
    input: Option<&Path>,
    out_dir: &Path,
) -> Result<(), Error> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(config);
    let t = source_trajectory(config, input)?;
    let (observed, _) = crate::sim::apply_blockage(&t, config.blockage_start_index)?;
    let binning = run_binning(&observed, &BinningParams::from_config(config));
    let horizon = (config.n_positions - config.blockage_start_index + 1) as usize;
    let forecasts = timed(&mut manifest, "forecast", || {
        Ok(forecast_bins(
            &binning,
            config.blockage_start_index,
            horizon,
            config.ar_order,
            DEFAULT_STALE_GAP,
        ))
    })?;
    let path = out_dir.join("forecast.csv");
    dataset::write_forecast_csv(&path, &binning, &forecasts)?;
    manifest.record_output(&path)?;
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(())
}

/// `deaths`: death-prediction report CSV.
pub fn cmd_deaths(
    config: &ScenarioConfig,
    input: Option<&Path>,
    reference_bin: Option<u32>,
    out_dir: &Path,
) -> Result<(), Error> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(config);
    let t = source_trajectory(config, input)?;
    let binning = run_binning(&t, &BinningParams::from_config(config));
    let reference = reference_bin
        .or_else(|| default_reference_bin(&binning))
        .ok_or_else(|| Error::InvalidConfig("no bins to take as LOS reference".into()))?;
    let report = timed(&mut manifest, "deaths", || {
        Ok(predict_deaths(
            &binning,
            reference,
            config.death_threshold,
            config.gamma,
        ))
    })?;
    let path = out_dir.join("deaths.csv");
    dataset::write_deaths_csv(&path, &report)?;
    manifest.record_output(&path)?;
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(())
}

/// `evaluate`: blockage experiment report JSON + per-position error CSV.
pub fn cmd_evaluate(
    config: &ScenarioConfig,
    input: Option<&Path>,
    out_dir: &Path,
) -> Result<(), Error> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(config);
    let t = source_trajectory(config, input)?;
    let art = timed(&mut manifest, "evaluate", || {
        run_blockage_experiment_on(t, config)
    })?;
    let report_path = out_dir.join("eval_report.json");
    dataset::write_eval_json(&report_path, &art.report)?;
    manifest.record_output(&report_path)?;
    let err_path = out_dir.join("errors.csv");
    dataset::write_error_csv(&err_path, &art.matching)?;
    manifest.record_output(&err_path)?;
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(())
}

/// `pipeline`: simulate -> bin -> forecast -> deaths -> evaluate, emitting
/// the full artifact set plus plot-ready files.
pub fn cmd_pipeline(
    config: &ScenarioConfig,
    input: Option<&Path>,
    out_dir: &Path,
) -> Result<RunManifest, Error> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(config);
    let stage = |name: &'static str| {
        move |e: Error| Error::Stage {
            stage: name,
            source: Box::new(e),
        }
    };

    let trajectory = timed(&mut manifest, "simulate", || {
        source_trajectory(config, input).map_err(stage("simulate"))
    })?;

    let art = timed(&mut manifest, "experiment", || {
        run_blockage_experiment_on(trajectory, config).map_err(stage("experiment"))
    })?;

    let full_binning = timed(&mut manifest, "bin_full", || {
        Ok(run_binning(
            &art.trajectory,
            &BinningParams::from_config(config),
        ))
    })?;
    let reference = default_reference_bin(&full_binning).ok_or_else(|| Error::Stage {
        stage: "deaths",
        source: Box::new(Error::InvalidConfig("no bins".into())),
    })?;
    let deaths = timed(&mut manifest, "deaths", || {
        Ok(predict_deaths(
            &full_binning,
            reference,
            config.death_threshold,
            config.gamma,
        ))
    })?;

    let mut emit = |name: &str, write: &dyn Fn(&Path) -> Result<(), Error>| -> Result<(), Error> {
        let path = out_dir.join(name);
        write(&path)?;
        manifest.record_output(&path)
    };
    emit("trajectory.csv", &|p| {
        dataset::write_trajectory_csv(p, &art.trajectory)
    })?;
    emit("power_by_rank.csv", &|p| {
        dataset::write_power_by_rank_csv(p, &art.trajectory)
    })?;
    emit("bins.csv", &|p| dataset::write_bins_csv(p, &full_binning))?;
    emit("events.csv", &|p| {
        dataset::write_events_csv(p, &full_binning)
    })?;
    emit("markov_trace.csv", &|p| {
        dataset::write_markov_csv(p, &full_binning)
    })?;
    emit("forecast.csv", &|p| {
        dataset::write_forecast_csv(p, &art.binning, &art.forecasts)
    })?;
    emit("deaths.csv", &|p| dataset::write_deaths_csv(p, &deaths))?;
    emit("eval_report.json", &|p| {
        dataset::write_eval_json(p, &art.report)
    })?;
    emit("errors.csv", &|p| {
        dataset::write_error_csv(p, &art.matching)
    })?;
    drop(emit);
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// `bench`: wall-clock scaling of binning and forecasting over (N, M)
/// sweep points built from scaled copies of the synthetic scenario.
pub fn cmd_bench(sweep: &[(u32, u32)], out_dir: &Path) -> Result<(), Error> {
    if sweep.is_empty() {
        return Err(Error::InvalidConfig("empty bench sweep".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut w = csv::Writer::from_path(out_dir.join("bench.csv"))?;
    w.write_record(["n_positions", "mpcs_per_position", "bin_ms", "forecast_ms"])?;
    for &(n, m) in sweep {
        let t = synthetic_bench_trajectory(n, m);
        let params = BinningParams::default();
        let start = Instant::now();
        let binning = run_binning(&t, &params);
        let bin_ms = start.elapsed().as_secs_f64() * 1e3;
        let start = Instant::now();
        let _ = forecast_bins(&binning, n + 1, 10, 4, u32::MAX);
        let forecast_ms = start.elapsed().as_secs_f64() * 1e3;
        w.write_record([
            n.to_string(),
            m.to_string(),
            format!("{bin_ms:.3}"),
            format!("{forecast_ms:.3}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Deterministic well-separated paths for benchmarking only.
fn synthetic_bench_trajectory(n: u32, m: u32) -> Trajectory {
    use crate::types::{MpcVector, Snapshot};
    let snapshots = (1..=n)
        .map(|j| Snapshot {
            position_index: j,
            rx_position_m: [0.0, j as f64, 0.0],
            mpcs: (0..m)
                .map(|k| MpcVector {
                    gain_db: -80.0 - 20.0 * k as f64 - 0.01 * j as f64,
                    delay_ns: 100.0 * (k + 1) as f64 + 0.1 * j as f64,
                    aod_elev_deg: 5.0 + k as f64,
                    aod_azim_deg: 10.0 * k as f64,
                    aoa_elev_deg: -5.0 - k as f64,
                    aoa_azim_deg: -10.0 * k as f64,
                    truth_label: None,
                })
                .collect(),
        })
        .collect();
    Trajectory {
        config: ScenarioConfig::default(),
        snapshots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pipeline_emits_expected_files_and_manifest_verifies() {
        let mut config = ScenarioConfig::default();
        config.n_positions = 20;
        config.blockage_start_index = 15;
        let dir = tempfile::tempdir().unwrap();
        let manifest = cmd_pipeline(&config, None, dir.path()).unwrap();
        for name in [
            "trajectory.csv",
            "power_by_rank.csv",
            "bins.csv",
            "events.csv",
            "markov_trace.csv",
            "forecast.csv",
            "deaths.csv",
            "eval_report.json",
            "errors.csv",
        ] {
            assert!(dir.path().join(name).exists(), "missing {name}");
            assert!(manifest.outputs.contains_key(name), "undigested {name}");
        }
        assert!(manifest.verify(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn simulate_is_idempotent() {
        let mut config = ScenarioConfig::default();
        config.n_positions = 15;
        config.blockage_start_index = 10;
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let p1 = cmd_simulate(&config, d1.path()).unwrap();
        let p2 = cmd_simulate(&config, d2.path()).unwrap();
        assert_eq!(sha256_file(&p1).unwrap(), sha256_file(&p2).unwrap());
    }

    #[test]
    fn pipeline_accepts_external_input() {
        let mut config = ScenarioConfig::default();
        config.n_positions = 20;
        config.blockage_start_index = 15;
        let dir = tempfile::tempdir().unwrap();
        let traj_path = cmd_simulate(&config, dir.path()).unwrap();
        let out = dir.path().join("from_input");
        cmd_pipeline(&config, Some(&traj_path), &out).unwrap();
        assert!(out.join("eval_report.json").exists());
    }

    #[test]
    fn bench_rejects_empty_sweep() {
        let dir = tempfile::tempdir().unwrap();
        assert!(cmd_bench(&[], dir.path()).is_err());
        cmd_bench(&[(20, 3)], dir.path()).unwrap();
        assert!(dir.path().join("bench.csv").exists());
    }
}
