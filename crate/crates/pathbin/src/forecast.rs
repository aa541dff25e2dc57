//! Autoregressive fitting and multi-step forecasting of per-bin channel
//! parameter series through a blockage window.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::binning::BinningResult;
use crate::error::Error;
use crate::types::{wrap_azimuth_deg, MpcVector, NUM_PARAMS};

/// Default staleness gap: bins discontinued more than this many positions
/// before the blockage are not forecast.
pub const DEFAULT_STALE_GAP: u32 = 5;

// ---------------------------------------------------------------------------
// AR model
// ---------------------------------------------------------------------------

/// Fitted autoregressive model of one scalar series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub order: usize,
    pub coefficients: Vec<f64>,
    /// Series mean removed before fitting.
    pub mean: f64,
    /// Residual mean square of the conditional fit.
    pub noise_variance: f64,
}

/// Fits an AR(order) model by conditional least squares with the process
/// mean estimated jointly (an intercept column), so noiseless AR series are
/// recovered exactly and adding a constant to the series shifts forecasts by
/// exactly that constant. A constant series gets zero coefficients and zero
/// variance exactly.
pub fn fit_ar(series: &[f64], order: usize) -> Result<ArModel, Error> {
    let n = series.len();
    if n <= order {
        return Err(Error::SeriesTooShort { len: n, order });
    }
    let sample_mean = series.iter().sum::<f64>() / n as f64;
    if series.iter().all(|&x| x == series[0]) {
        return Ok(ArModel {
            order,
            coefficients: vec![0.0; order],
            mean: series[0],
            noise_variance: 0.0,
        });
    }
    // Center by the sample mean for conditioning, then solve for the lag
    // coefficients and a residual intercept jointly.
    let centered: Vec<f64> = series.iter().map(|&x| x - sample_mean).collect();
    let rows = n - order;
    let mut design = DMatrix::zeros(rows, order + 1);
    let mut target = DVector::zeros(rows);
    for t in 0..rows {
        for i in 0..order {
            design[(t, i)] = centered[t + order - 1 - i];
        }
        design[(t, order)] = 1.0;
        target[t] = centered[t + order];
    }
    // SVD pseudo-inverse handles rank-deficient lag matrices (short or
    // degenerate series) with the minimum-norm solution.
    let svd = design.clone().svd(true, true);
    let solution = svd
        .solve(&target, 1e-12)
        .map_err(|e| Error::Parse(format!("AR least squares failed: {e}")))?;
    let residual = &design * &solution - &target;
    let noise_variance = residual.norm_squared() / rows as f64;
    let coefficients: Vec<f64> = solution.iter().take(order).copied().collect();
    let intercept = solution[order];
    // The model mean m satisfies c = m (1 - sum a_i) on top of the sample
    // mean. Near a unit root the mean form degenerates; fall back to the
    // sample mean (the intercept is then indistinguishable from drift).
    let one_minus = 1.0 - coefficients.iter().sum::<f64>();
    let mean = if one_minus.abs() > 1e-9 {
        sample_mean + intercept / one_minus
    } else {
        sample_mean
    };
    Ok(ArModel {
        order,
        coefficients,
        mean,
        noise_variance,
    })
}

/// Iterated one-step prediction: each forecast feeds back as a lag for the
/// next step.
pub fn forecast(model: &ArModel, series: &[f64], horizon: usize) -> Result<Vec<f64>, Error> {
    if series.len() < model.order {
        return Err(Error::HistoryTooShort {
            len: series.len(),
            order: model.order,
        });
    }
    let mut lags: Vec<f64> = series.iter().map(|&x| x - model.mean).collect();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let next: f64 = model
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, a)| a * lags[lags.len() - 1 - i])
            .sum();
        lags.push(next);
        out.push(next + model.mean);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Per-bin forecasting
// ---------------------------------------------------------------------------

/// K-step forecasts of all six channel parameters of one bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinForecast {
    pub bin_id: u32,
    /// Position index of the first forecast value.
    pub start_position: u32,
    pub horizon: usize,
    /// Forecast series per parameter, indexed v-1 for v in 1..6.
    pub per_parameter: Vec<Vec<f64>>,
}

impl BinForecast {
    /// Forecast MPC vector at the k-th blocked position (0-based).
    pub fn mpc_at(&self, k: usize) -> MpcVector {
        let mut p = [0.0; NUM_PARAMS];
        for (v, series) in self.per_parameter.iter().enumerate() {
            p[v] = series[k];
        }
        MpcVector::from_params(p)
    }
}

/// Unwraps an azimuth series so seam crossings do not corrupt the fit:
/// each step takes the shortest angular move from its predecessor.
fn unwrap_azimuth(series: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    for (i, &x) in series.iter().enumerate() {
        if i == 0 {
            out.push(x);
        } else {
            let prev = out[i - 1];
            let mut step = (x - prev).rem_euclid(360.0);
            if step >= 180.0 {
                step -= 360.0;
            }
            out.push(prev + step);
        }
    }
    out
}

/// Fits and forecasts every parameter of every sufficiently fresh bin.
///
/// Bins discontinued more than `stale_gap` positions before the blockage
/// are skipped. Series shorter than 2*order+1 fall back to a reduced order;
/// fit failures on one bin do not abort the others. Forecasts are aligned
/// to positions `blockage_start .. blockage_start + horizon - 1` even when a
/// bin's last observation predates the blockage.
pub fn forecast_bins(
    result: &BinningResult,
    blockage_start: u32,
    horizon: usize,
    order: usize,
    stale_gap: u32,
) -> Vec<BinForecast> {
    let mut out = Vec::new();
    for bin in &result.bins {
        let Some(last_pos) = bin.last_position() else {
            continue;
        };
        if last_pos >= blockage_start {
            continue; // bin computed on observed data only; defensive skip
        }
        if blockage_start - last_pos > stale_gap {
            continue;
        }
        // Steps from the last observation to the end of the horizon; the
        // leading (gap) steps are discarded.
        let gap = (blockage_start - last_pos - 1) as usize;
        let total_steps = gap + horizon;

        let mut per_parameter = Vec::with_capacity(NUM_PARAMS);
        let mut ok = true;
        for v in 1..=NUM_PARAMS {
            let raw: Vec<f64> = bin.entries.iter().map(|(_, m)| m.param(v)).collect();
            let series = if MpcVector::is_azimuth_param(v) {
                unwrap_azimuth(&raw)
            } else {
                raw
            };
            let eff_order = if series.len() >= 2 * order + 1 {
                order
            } else {
                ((series.len().saturating_sub(1)) / 2).max(1)
            };
            let fc =
                fit_ar(&series, eff_order).and_then(|model| forecast(&model, &series, total_steps));
            match fc {
                Ok(values) => {
                    let mut window: Vec<f64> = values[gap..].to_vec();
                    if MpcVector::is_azimuth_param(v) {
                        for x in &mut window {
                            *x = wrap_azimuth_deg(*x);
                        }
                    }
                    per_parameter.push(window);
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            out.push(BinForecast {
                bin_id: bin.bin_id,
                start_position: blockage_start,
                horizon,
                per_parameter,
            });
        }
    }
    out
}
