//! Shared data model: multipath components, snapshots, trajectories, path
//! bins, and scenario configuration. All other modules depend only on the
//! definitions here.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::Error;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Number of scalar channel parameters carried by one MPC.
pub const NUM_PARAMS: usize = 6;

// ---------------------------------------------------------------------------
// Ground-truth labels (synthetic mode only)
// ---------------------------------------------------------------------------

/// Physical origin of a synthetic MPC. Carried for evaluation of binning
/// purity; the binning algorithm never reads it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TruthLabel {
    Los,
    GroundReflection,
    Scatterer(u32),
}

impl fmt::Display for TruthLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruthLabel::Los => write!(f, "LOS"),
            TruthLabel::GroundReflection => write!(f, "GRC"),
            TruthLabel::Scatterer(id) => write!(f, "S{id}"),
        }
    }
}

impl std::str::FromStr for TruthLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "LOS" => Ok(TruthLabel::Los),
            "GRC" => Ok(TruthLabel::GroundReflection),
            _ => {
                if let Some(id) = s.strip_prefix('S') {
                    id.parse::<u32>()
                        .map(TruthLabel::Scatterer)
                        .map_err(|_| Error::Parse(format!("bad truth label: {s}")))
                } else {
                    Err(Error::Parse(format!("bad truth label: {s}")))
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// MPC vector
// ---------------------------------------------------------------------------

/// One multipath component: received power, delay, and the four
/// departure/arrival angles. The six fields (in declaration order) are the
/// channel parameters indexed v = 1..6 throughout the crate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcVector {
    /// Received power in dBm.
    pub gain_db: f64,
    /// Propagation delay in nanoseconds, >= 0.
    pub delay_ns: f64,
    /// Angle of departure, elevation, degrees in [-90, 90].
    pub aod_elev_deg: f64,
    /// Angle of departure, azimuth, degrees in [-180, 180).
    pub aod_azim_deg: f64,
    /// Angle of arrival, elevation, degrees in [-90, 90].
    pub aoa_elev_deg: f64,
    /// Angle of arrival, azimuth, degrees in [-180, 180).
    pub aoa_azim_deg: f64,
    /// Synthetic ground truth; never read by the binning algorithm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_label: Option<TruthLabel>,
}

impl MpcVector {
    /// Channel parameter by 1-based index v in {1..6}.
    pub fn param(&self, v: usize) -> f64 {
        match v {
            1 => self.gain_db,
            2 => self.delay_ns,
            3 => self.aod_elev_deg,
            4 => self.aod_azim_deg,
            5 => self.aoa_elev_deg,
            6 => self.aoa_azim_deg,
            _ => panic!("parameter index {v} out of range 1..6"),
        }
    }

    /// Rebuilds an MPC from six parameter values in v-order.
    pub fn from_params(p: [f64; NUM_PARAMS]) -> Self {
        MpcVector {
            gain_db: p[0],
            delay_ns: p[1],
            aod_elev_deg: p[2],
            aod_azim_deg: p[3],
            aoa_elev_deg: p[4],
            aoa_azim_deg: p[5],
            truth_label: None,
        }
    }

    /// True when parameter v is an azimuth (circular quantity).
    pub fn is_azimuth_param(v: usize) -> bool {
        v == 4 || v == 6
    }
}

/// Wraps an azimuth in degrees to [-180, 180).
pub fn wrap_azimuth_deg(a: f64) -> f64 {
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can return exactly 360.0 - tiny for inputs just below -180
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Canonicalizes the angles of an MPC: azimuths wrapped to [-180, 180),
/// elevations checked (not clamped) against [-90, 90].
pub fn canonicalize_angles(m: &MpcVector) -> Result<MpcVector, Error> {
    if m.aod_elev_deg.abs() > 90.0 {
        return Err(Error::OutOfRangeElevation(m.aod_elev_deg));
    }
    if m.aoa_elev_deg.abs() > 90.0 {
        return Err(Error::OutOfRangeElevation(m.aoa_elev_deg));
    }
    Ok(MpcVector {
        aod_azim_deg: wrap_azimuth_deg(m.aod_azim_deg),
        aoa_azim_deg: wrap_azimuth_deg(m.aoa_azim_deg),
        ..*m
    })
}

// ---------------------------------------------------------------------------
// Snapshot and trajectory
// ---------------------------------------------------------------------------

/// All MPCs observed at one RX (UAV) position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// 1-based RX position index along the trajectory.
    pub position_index: u32,
    /// RX position in meters.
    pub rx_position_m: [f64; 3],
    /// MPCs sorted by descending gain, ties broken by ascending delay.
    pub mpcs: Vec<MpcVector>,
}

impl Snapshot {
    /// Sorts MPCs by descending gain_db, ties by ascending delay_ns.
    pub fn sort_mpcs(&mut self) {
        self.mpcs.sort_by(|a, b| {
            b.gain_db
                .partial_cmp(&a.gain_db)
                .unwrap()
                .then(a.delay_ns.partial_cmp(&b.delay_ns).unwrap())
        });
    }
}

/// Ordered sequence of snapshots plus the configuration that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: ScenarioConfig,
    pub snapshots: Vec<Snapshot>,
}

// ---------------------------------------------------------------------------
// Path bins
// ---------------------------------------------------------------------------

/// Lifecycle event of a path bin at one RX position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LifecycleEvent {
    Birth,
    Continue,
    Discontinue,
    Resurrect,
}

impl fmt::Display for LifecycleEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LifecycleEvent::Birth => "birth",
            LifecycleEvent::Continue => "continue",
            LifecycleEvent::Discontinue => "discontinue",
            LifecycleEvent::Resurrect => "resurrect",
        };
        f.write_str(s)
    }
}

/// One path bin: the sequence of MPCs judged to be the same physical path,
/// with its lifecycle events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathBin {
    /// 1-based bin identifier in birth order.
    pub bin_id: u32,
    /// (position_index, MPC) pairs, strictly increasing position index,
    /// at most one entry per position.
    pub entries: Vec<(u32, MpcVector)>,
    /// (position_index, event) pairs in position order.
    pub events: Vec<(u32, LifecycleEvent)>,
}

impl PathBin {
    /// Entry at a given position index, if any.
    pub fn entry_at(&self, position_index: u32) -> Option<&MpcVector> {
        self.entries
            .iter()
            .find(|(p, _)| *p == position_index)
            .map(|(_, m)| m)
    }

    /// Position index of the most recent entry.
    pub fn last_position(&self) -> Option<u32> {
        self.entries.last().map(|(p, _)| *p)
    }
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

fn default_frequency() -> f64 {
    28e9
}
fn default_tx_power() -> f64 {
    0.0
}
fn default_h_tx() -> f64 {
    2.0
}
fn default_h_rx() -> f64 {
    50.0
}
fn default_traj_len() -> f64 {
    100.0
}
fn default_n_positions() -> u32 {
    100
}
fn default_tx_to_start() -> f64 {
    243.0
}
fn default_scat_offset() -> f64 {
    145.0
}
fn default_scat_edge() -> f64 {
    40.0
}
fn default_scat_spacing() -> f64 {
    110.0
}
fn default_n_scatterers() -> u32 {
    6
}
fn default_eps_ground() -> f64 {
    3.5
}
fn default_eps_scatterer() -> f64 {
    5.31
}
fn default_blockage_start() -> u32 {
    75
}
fn default_gamma() -> f64 {
    75.8
}
fn default_epsilon() -> f64 {
    0.15
}
fn default_ar_order() -> usize {
    4
}
fn default_death_threshold() -> f64 {
    4.20
}
fn default_noise_floor() -> f64 {
    -160.0
}

/// Geometry, materials, frequency, trajectory, and blockage window defining
/// one synthetic experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: f64,
    #[serde(default = "default_h_tx")]
    pub h_tx_m: f64,
    #[serde(default = "default_h_rx")]
    pub h_rx_m: f64,
    #[serde(default = "default_traj_len")]
    pub trajectory_length_m: f64,
    #[serde(default = "default_n_positions")]
    pub n_positions: u32,
    #[serde(default = "default_tx_to_start")]
    pub tx_to_trajectory_start_m: f64,
    #[serde(default = "default_scat_offset")]
    pub scatterer_lateral_offset_m: f64,
    #[serde(default = "default_scat_edge")]
    pub scatterer_edge_m: f64,
    #[serde(default = "default_scat_spacing")]
    pub scatterer_spacing_m: f64,
    #[serde(default = "default_n_scatterers")]
    pub n_scatterers: u32,
    #[serde(default = "default_eps_ground")]
    pub eps_ground: f64,
    #[serde(default = "default_eps_scatterer")]
    pub eps_scatterer: f64,
    #[serde(default = "default_blockage_start")]
    pub blockage_start_index: u32,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_ar_order")]
    pub ar_order: usize,
    #[serde(default = "default_death_threshold")]
    pub death_threshold: f64,
    /// Paths weaker than this are dropped by the generator.
    #[serde(default = "default_noise_floor")]
    pub noise_floor_dbm: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            frequency_hz: default_frequency(),
            tx_power_dbm: default_tx_power(),
            h_tx_m: default_h_tx(),
            h_rx_m: default_h_rx(),
            trajectory_length_m: default_traj_len(),
            n_positions: default_n_positions(),
            tx_to_trajectory_start_m: default_tx_to_start(),
            scatterer_lateral_offset_m: default_scat_offset(),
            scatterer_edge_m: default_scat_edge(),
            scatterer_spacing_m: default_scat_spacing(),
            n_scatterers: default_n_scatterers(),
            eps_ground: default_eps_ground(),
            eps_scatterer: default_eps_scatterer(),
            blockage_start_index: default_blockage_start(),
            gamma: default_gamma(),
            epsilon: default_epsilon(),
            ar_order: default_ar_order(),
            death_threshold: default_death_threshold(),
            noise_floor_dbm: default_noise_floor(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), Error> {
        fn positive(name: &str, v: f64) -> Result<(), Error> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")))
            }
        }
        positive("frequency_hz", self.frequency_hz)?;
        positive("h_tx_m", self.h_tx_m)?;
        positive("h_rx_m", self.h_rx_m)?;
        positive("trajectory_length_m", self.trajectory_length_m)?;
        positive("tx_to_trajectory_start_m", self.tx_to_trajectory_start_m)?;
        positive(
            "scatterer_lateral_offset_m",
            self.scatterer_lateral_offset_m,
        )?;
        positive("scatterer_edge_m", self.scatterer_edge_m)?;
        positive("scatterer_spacing_m", self.scatterer_spacing_m)?;
        positive("gamma", self.gamma)?;
        positive("epsilon", self.epsilon)?;
        positive("death_threshold", self.death_threshold)?;
        if self.n_positions == 0 {
            return Err(Error::InvalidConfig("n_positions must be >= 1".into()));
        }
        if self.eps_ground <= 1.0 || self.eps_scatterer <= 1.0 {
            return Err(Error::InvalidConfig(
                "relative permittivities must be > 1".into(),
            ));
        }
        if self.blockage_start_index < 1 || self.blockage_start_index > self.n_positions {
            return Err(Error::InvalidConfig(format!(
                "blockage_start_index {} out of 1..={}",
                self.blockage_start_index, self.n_positions
            )));
        }
        if self.ar_order == 0 {
            return Err(Error::InvalidConfig("ar_order must be >= 1".into()));
        }
        Ok(())
    }

    /// RX position spacing along the trajectory in meters.
    pub fn position_spacing_m(&self) -> f64 {
        self.trajectory_length_m / self.n_positions as f64
    }

    /// Carrier wavelength in meters.
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }
}
