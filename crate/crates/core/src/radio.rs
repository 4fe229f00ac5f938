//! Signal strength, signal dominance and coverage.
//!
//! Strength follows a log-distance path-loss model with a 1 m reference
//! distance on 2-D distance:
//!
//! ```text
//! S(d) = 10 log10(1000 P) - 10 g log10(max(d, 1 m) / 1 m) - A(bearing)
//! ```
//!
//! with `P` in watts (so the first term is dBm), `g` the path-loss exponent
//! and `A` the sector attenuation. Results are floored at -300 dBm.
//! Dominance is the logistic `1 / (1 + exp(-steepness (S - midpoint)))`.
//! Antenna height, tilt and elevation do not enter the model.

use rayon::prelude::*;

use crate::config::{AntennaConfig, CellType};
use crate::geometry::{Grid, Point};
use crate::{AntennaId, TileId};

pub const STRENGTH_FLOOR_DBM: f64 = -300.0;
pub const REFERENCE_DISTANCE_M: f64 = 1.0;
/// Half-power beam width of the sector pattern, degrees.
pub const SECTOR_HALF_POWER_DEG: f64 = 70.0;
/// Attenuation at the half-power angle, dB.
pub const SECTOR_HALF_POWER_ATTENUATION_DB: f64 = 12.0;
/// Front-to-back cap on sector attenuation, dB.
pub const SECTOR_MAX_ATTENUATION_DB: f64 = 30.0;

/// Signal strength and dominance of one antenna at one tile center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalMeasure {
    pub antenna_id: AntennaId,
    pub tile_id: TileId,
    pub strength_dbm: f64,
    pub dominance: f64,
}

/// Tiles where an antenna meets both connection thresholds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageCell {
    pub antenna_id: AntennaId,
    pub covered_tiles: Vec<TileId>,
}

/// Compass bearing from `from` to `to`, degrees clockwise from +y, in [0, 360).
pub fn bearing_deg(from: Point, to: Point) -> f64 {
    let b = (to.x - from.x).atan2(to.y - from.y).to_degrees();
    if b < 0.0 {
        b + 360.0
    } else {
        b
    }
}

/// Smallest absolute difference between two angles in degrees, in [0, 180].
pub fn angular_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Horizontal pattern loss in dB: zero for omnidirectional cells, otherwise
/// `12 (delta / 70)^2` capped at 30 dB, where `delta` is the angle off
/// boresight.
pub fn directional_attenuation(antenna: &AntennaConfig, bearing: f64) -> f64 {
    match antenna.cell_type {
        CellType::Omnidirectional => 0.0,
        CellType::Directional120 => {
            let delta = angular_difference(bearing, antenna.azimuth_deg.unwrap_or(0.0));
            let ratio = delta / SECTOR_HALF_POWER_DEG;
            (SECTOR_HALF_POWER_ATTENUATION_DB * ratio * ratio).min(SECTOR_MAX_ATTENUATION_DB)
        }
    }
}

/// Emitted power in dBm.
pub fn power_dbm(power_w: f64) -> f64 {
    10.0 * (1000.0 * power_w).log10()
}

pub fn signal_strength_dbm(antenna: &AntennaConfig, point: Point) -> f64 {
    let d = antenna.position.distance(&point);
    let path_loss = 10.0
        * antenna.path_loss_exponent
        * (d.max(REFERENCE_DISTANCE_M) / REFERENCE_DISTANCE_M).log10();
    // at the antenna itself the bearing is undefined; treat it as boresight
    let attenuation = if d > 0.0 {
        directional_attenuation(antenna, bearing_deg(antenna.position, point))
    } else {
        0.0
    };
    let s = power_dbm(antenna.power_w) - path_loss - attenuation;
    if s.is_nan() {
        STRENGTH_FLOOR_DBM
    } else {
        s.max(STRENGTH_FLOOR_DBM)
    }
}

/// Numerically stable logistic function.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Dominance for a given strength under this antenna's logistic parameters.
pub fn dominance_from_strength(antenna: &AntennaConfig, strength_dbm: f64) -> f64 {
    logistic(antenna.dominance_steepness * (strength_dbm - antenna.dominance_midpoint_dbm))
}

pub fn signal_dominance(antenna: &AntennaConfig, point: Point) -> f64 {
    dominance_from_strength(antenna, signal_strength_dbm(antenna, point))
}

/// True when both the strength and dominance thresholds hold at `point`.
pub fn meets_thresholds(antenna: &AntennaConfig, point: Point) -> bool {
    let s = signal_strength_dbm(antenna, point);
    s >= antenna.min_strength_dbm && dominance_from_strength(antenna, s) >= antenna.min_dominance
}

/// One measure per antenna and tile, evaluated at tile centers, ordered by
/// antenna (input order) then tile id.
pub fn compute_signal_measures(antennas: &[AntennaConfig], grid: &Grid) -> Vec<SignalMeasure> {
    antennas
        .par_iter()
        .flat_map_iter(|a| {
            grid.tiles().map(move |t| {
                let center = grid.tile_center(t).expect("tile from grid iterator");
                let strength_dbm = signal_strength_dbm(a, center);
                SignalMeasure {
                    antenna_id: a.antenna_id,
                    tile_id: t,
                    strength_dbm,
                    dominance: dominance_from_strength(a, strength_dbm),
                }
            })
        })
        .collect()
}

pub fn compute_coverage(antennas: &[AntennaConfig], grid: &Grid) -> Vec<CoverageCell> {
    antennas
        .par_iter()
        .map(|a| CoverageCell {
            antenna_id: a.antenna_id,
            covered_tiles: grid
                .tiles()
                .filter(|&t| meets_thresholds(a, grid.tile_center(t).expect("valid tile")))
                .collect(),
        })
        .collect()
}
