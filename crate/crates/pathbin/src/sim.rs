//! Synthetic ground-to-air channel generator.
//!
//! Produces trajectories for the box-scatterer scenario: a direct (LOS)
//! path, a ground-reflected component via the image method, and
//! single-bounce specular reflections off the vertical faces of cube
//! scatterers, with Fresnel reflection coefficients and free-space
//! propagation.
//!
//! Scenario frame: TX at the origin at height `h_tx_m`; the UAV trajectory
//! is a straight line along +y at height `h_rx_m`, starting
//! `tx_to_trajectory_start_m` from the TX ground point. Elevation is
//! positive above horizontal at the observer; azimuth is measured
//! counterclockwise from +x.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::Error;
use crate::types::{MpcVector, ScenarioConfig, Snapshot, Trajectory, TruthLabel, SPEED_OF_LIGHT};

type Vec3 = Vector3<f64>;

// ---------------------------------------------------------------------------
// Scatterers
// ---------------------------------------------------------------------------

/// Axis-aligned cube scatterer resting on the ground plane.
#[derive(Clone, Debug)]
pub struct Scatterer {
    pub id: u32,
    /// Cube center in meters (center z = edge/2, so the cube sits on z=0).
    pub center_m: Vec3,
    /// Cube edge length in meters.
    pub edge_m: f64,
    /// Relative permittivity of the scatterer material.
    pub eps_r: f64,
}

impl Scatterer {
    /// Outward normals of the four vertical faces.
    pub fn face_normals() -> [Vec3; 4] {
        [
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
        ]
    }

    fn min(&self) -> Vec3 {
        self.center_m - Vec3::repeat(self.edge_m / 2.0)
    }

    fn max(&self) -> Vec3 {
        self.center_m + Vec3::repeat(self.edge_m / 2.0)
    }
}

/// Places the configured number of scatterers.
///
/// Layout rule (the published scenario fixes distances but not the exact
/// grid, so this is our deterministic reconstruction): scatterers alternate
/// sides of the trajectory, the lateral distance grows by
/// `scatterer_spacing_m` for each pair, and the along-track centers are
/// spread uniformly over the band of the ground from which a vertical face
/// can produce a specular bounce onto some RX position. The stagger gives
/// each reflected path a finite lifetime along the trajectory, so bins are
/// born and die as the UAV flies.
pub fn place_scatterers(config: &ScenarioConfig) -> Vec<Scatterer> {
    let n = config.n_scatterers as usize;
    if n == 0 {
        return Vec::new();
    }
    let half_edge = config.scatterer_edge_m / 2.0;
    let y_start = config.tx_to_trajectory_start_m;
    let y_end = y_start + config.trajectory_length_m;
    // With TX and trajectory in the x=0 plane, the specular point of an
    // x-facing wall sits at half the RX along-track coordinate.
    let lo = (y_start - config.scatterer_edge_m) / 2.0;
    let hi = (y_end + config.scatterer_edge_m) / 2.0;
    (0..n)
        .map(|k| {
            let side = if k % 2 == 0 { 1.0 } else { -1.0 };
            let ring = (k / 2) as f64;
            let x = side * (config.scatterer_lateral_offset_m + ring * config.scatterer_spacing_m);
            let y = lo + (k as f64 + 0.5) * (hi - lo) / n as f64;
            Scatterer {
                id: k as u32 + 1,
                center_m: Vec3::new(x, y, half_edge),
                edge_m: config.scatterer_edge_m,
                eps_r: config.eps_scatterer,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Fresnel reflection
// ---------------------------------------------------------------------------

/// Fresnel reflection coefficient for vertical polarization at a dielectric
/// half-space, angle measured from the surface normal. Returns (magnitude,
/// phase) of Γ_v = (ε cosθ − sqrt(ε − sin²θ)) / (ε cosθ + sqrt(ε − sin²θ)).
pub fn fresnel_vertical(eps_r: f64, incidence_from_normal_rad: f64) -> (f64, f64) {
    let cos_t = incidence_from_normal_rad.cos();
    let sin2_t = incidence_from_normal_rad.sin().powi(2);
    // eps_r > 1 keeps the root real for all incidence angles.
    let root = (eps_r - sin2_t).sqrt();
    let gamma = (eps_r * cos_t - root) / (eps_r * cos_t + root);
    (
        gamma.abs(),
        if gamma >= 0.0 {
            0.0
        } else {
            std::f64::consts::PI
        },
    )
}

// ---------------------------------------------------------------------------
// Geometry helpers
// ---------------------------------------------------------------------------

fn angles_deg(from: Vec3, to: Vec3) -> (f64, f64) {
    let d = to - from;
    let horiz = (d.x * d.x + d.y * d.y).sqrt();
    let elev = d.z.atan2(horiz).to_degrees();
    let azim = crate::types::wrap_azimuth_deg(d.y.atan2(d.x).to_degrees());
    (elev, azim)
}

fn fspl_gain_db(config: &ScenarioConfig, path_length_m: f64) -> f64 {
    config.tx_power_dbm
        + 20.0 * (config.wavelength_m() / (4.0 * std::f64::consts::PI * path_length_m)).log10()
}

fn path_mpc(
    config: &ScenarioConfig,
    tx: Vec3,
    rx: Vec3,
    interaction: Option<Vec3>,
    path_length_m: f64,
    reflection_mag: f64,
    label: TruthLabel,
) -> MpcVector {
    let aim_tx = interaction.unwrap_or(rx);
    let aim_rx = interaction.unwrap_or(tx);
    let (aod_elev, aod_azim) = angles_deg(tx, aim_tx);
    let (aoa_elev, aoa_azim) = angles_deg(rx, aim_rx);
    let refl_db = if reflection_mag > 0.0 {
        20.0 * reflection_mag.log10()
    } else {
        f64::NEG_INFINITY
    };
    MpcVector {
        gain_db: fspl_gain_db(config, path_length_m) + refl_db,
        delay_ns: path_length_m / SPEED_OF_LIGHT * 1e9,
        aod_elev_deg: aod_elev,
        aod_azim_deg: aod_azim,
        aoa_elev_deg: aoa_elev,
        aoa_azim_deg: aoa_azim,
        truth_label: Some(label),
    }
}

/// Segment/axis-aligned-box intersection (slab method). Endpoints on the
/// box surface do not count as hits.
fn segment_hits_box(a: Vec3, b: Vec3, bmin: Vec3, bmax: Vec3) -> bool {
    let d = b - a;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for i in 0..3 {
        if d[i].abs() < 1e-12 {
            if a[i] < bmin[i] || a[i] > bmax[i] {
                return false;
            }
        } else {
            let inv = 1.0 / d[i];
            let (mut ta, mut tb) = ((bmin[i] - a[i]) * inv, (bmax[i] - a[i]) * inv);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
    }
    // Require genuine interior penetration, not a surface graze.
    t1 - t0 > 1e-9 && t1 > 1e-9 && t0 < 1.0 - 1e-9
}

// ---------------------------------------------------------------------------
// Path classes
// ---------------------------------------------------------------------------

/// Direct line-of-sight path with free-space loss and unity antenna gains.
pub fn friis_los(config: &ScenarioConfig, tx: Vec3, rx: Vec3) -> Result<MpcVector, Error> {
    let r = (rx - tx).norm();
    if r < 1e-6 {
        return Err(Error::DegenerateGeometry(format!(
            "LOS path length {r} m below 1e-6"
        )));
    }
    Ok(path_mpc(config, tx, rx, None, r, 1.0, TruthLabel::Los))
}

/// Ground-reflected component via the image method on the z=0 plane.
pub fn ground_reflection(config: &ScenarioConfig, tx: Vec3, rx: Vec3) -> Result<MpcVector, Error> {
    if tx.z <= 0.0 || rx.z <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "ground reflection requires both endpoints above z=0".into(),
        ));
    }
    let image = Vec3::new(tx.x, tx.y, -tx.z);
    let r = (rx - image).norm();
    if r < 1e-6 {
        return Err(Error::DegenerateGeometry(format!(
            "ground-reflected path length {r} m below 1e-6"
        )));
    }
    // Specular point: where the image->rx segment crosses z=0.
    let t = tx.z / (tx.z + rx.z);
    let specular = image + t * (rx - image);
    let cos_inc = (tx.z + rx.z) / r;
    let theta_i = cos_inc.clamp(-1.0, 1.0).acos();
    let (mag, _) = fresnel_vertical(config.eps_ground, theta_i);
    Ok(path_mpc(
        config,
        tx,
        rx,
        Some(specular),
        r,
        mag,
        TruthLabel::GroundReflection,
    ))
}

/// Single-bounce specular reflections off the vertical faces of the
/// scatterers. A path is emitted only when the image-method specular point
/// lies on the face and both segments clear every other scatterer box.
pub fn scatterer_reflections(
    config: &ScenarioConfig,
    tx: Vec3,
    rx: Vec3,
    scatterers: &[Scatterer],
) -> Vec<MpcVector> {
    let mut out = Vec::new();
    for sc in scatterers {
        let half = sc.edge_m / 2.0;
        for normal in Scatterer::face_normals() {
            let face_point = sc.center_m + half * normal;
            let plane_dist = |p: Vec3| (p - face_point).dot(&normal);
            let dt = plane_dist(tx);
            let dr = plane_dist(rx);
            // Both endpoints strictly on the outward side.
            if dt <= 1e-9 || dr <= 1e-9 {
                continue;
            }
            let image = tx - 2.0 * dt * normal;
            let r_total = (rx - image).norm();
            if r_total < 1e-6 {
                continue;
            }
            // Specular point: image->rx crossing of the face plane.
            let t = dt / (dt + dr);
            let specular = image + t * (rx - image);
            // Inside the face rectangle?
            let local = specular - sc.center_m;
            let tangent = if normal.x != 0.0 { 1 } else { 0 };
            let tangents = [tangent, 2];
            let on_face = tangents
                .iter()
                .all(|&i| local[i].abs() <= half && local[i].abs().is_finite());
            if !on_face {
                continue;
            }
            // Occlusion against every other scatterer box.
            let occluded = scatterers.iter().any(|other| {
                other.id != sc.id
                    && (segment_hits_box(tx, specular, other.min(), other.max())
                        || segment_hits_box(specular, rx, other.min(), other.max()))
            });
            if occluded {
                continue;
            }
            let cos_inc = ((specular - tx).normalize().dot(&normal)).abs();
            let theta_i = cos_inc.clamp(-1.0, 1.0).acos();
            let (mag, _) = fresnel_vertical(sc.eps_r, theta_i);
            out.push(path_mpc(
                config,
                tx,
                rx,
                Some(specular),
                r_total,
                mag,
                TruthLabel::Scatterer(sc.id),
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Trajectory generation and blockage
// ---------------------------------------------------------------------------

/// TX position in the scenario frame.
pub fn tx_position(config: &ScenarioConfig) -> Vec3 {
    Vec3::new(0.0, 0.0, config.h_tx_m)
}

/// RX position at 1-based index j.
pub fn rx_position(config: &ScenarioConfig, j: u32) -> Vec3 {
    Vec3::new(
        0.0,
        config.tx_to_trajectory_start_m + (j as f64 - 1.0) * config.position_spacing_m(),
        config.h_rx_m,
    )
}

/// Generates the full synthetic trajectory: LOS + GRC + scatterer paths at
/// every RX position, sorted by descending gain, pruned at the noise floor.
pub fn generate_trajectory(config: &ScenarioConfig) -> Result<Trajectory, Error> {
    config.validate()?;
    let scatterers = place_scatterers(config);
    let tx = tx_position(config);
    let snapshots: Result<Vec<Snapshot>, Error> = (1..=config.n_positions)
        .into_par_iter()
        .map(|j| {
            let rx = rx_position(config, j);
            let mut mpcs = vec![
                friis_los(config, tx, rx)?,
                ground_reflection(config, tx, rx)?,
            ];
            mpcs.extend(scatterer_reflections(config, tx, rx, &scatterers));
            mpcs.retain(|m| m.gain_db >= config.noise_floor_dbm);
            let mut snap = Snapshot {
                position_index: j,
                rx_position_m: [rx.x, rx.y, rx.z],
                mpcs,
            };
            snap.sort_mpcs();
            Ok(snap)
        })
        .collect();
    Ok(Trajectory {
        config: config.clone(),
        snapshots: snapshots?,
    })
}

/// Splits a trajectory at the blockage start: `observed` holds positions
/// before `start_index`, `hidden` the remainder.
pub fn apply_blockage(t: &Trajectory, start_index: u32) -> Result<(Trajectory, Trajectory), Error> {
    let n = t.snapshots.len() as u32;
    if start_index < 1 || start_index > n {
        return Err(Error::IndexOutOfRange(format!(
            "blockage start {start_index} out of 1..={n}"
        )));
    }
    let (obs, hid): (Vec<_>, Vec<_>) = t
        .snapshots
        .iter()
        .cloned()
        .partition(|s| s.position_index < start_index);
    Ok((
        Trajectory {
            config: t.config.clone(),
            snapshots: obs,
        },
        Trajectory {
            config: t.config.clone(),
            snapshots: hid,
        },
    ))
}
