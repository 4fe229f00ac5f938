//! Device-to-antenna attachment and network event records.
//!
//! Each tick, every device is matched to the feasible antenna of its own
//! operator with the highest dominance. Devices are admitted greedily in
//! ascending id order, so capacity contention resolves the same way on
//! every run.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::config::{AntennaConfig, Technology};
use crate::geometry::{Grid, Point};
use crate::radio::{dominance_from_strength, signal_strength_dbm};
use crate::{AntennaId, DeviceId, TileId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventsError {
    #[error("distance must be a non-negative number, got {0}")]
    NegativeDistance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventCode {
    Attach = 0,
    Update = 1,
    Detach = 2,
    Handover = 3,
}

impl EventCode {
    pub const ALL: [EventCode; 4] = [
        EventCode::Attach,
        EventCode::Update,
        EventCode::Detach,
        EventCode::Handover,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            EventCode::Attach => "attach",
            EventCode::Update => "update",
            EventCode::Detach => "detach",
            EventCode::Handover => "handover",
        }
    }
}

impl fmt::Display for EventCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl FromStr for EventCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventCode::ALL
            .into_iter()
            .find(|c| c.code().to_string() == s)
            .ok_or_else(|| format!("unknown event code '{s}'"))
    }
}

/// One network event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub t: i64,
    pub device_id: DeviceId,
    pub antenna_id: AntennaId,
    pub event_code: EventCode,
    pub tech: Technology,
    pub timing_advance: u64,
    /// Device position as reported in the output (millimeter precision).
    pub x: f64,
    pub y: f64,
    pub tile_id: TileId,
}

/// A device's location and subscription at one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DevicePosition {
    pub device_id: DeviceId,
    pub mno_id: u32,
    pub tech: Technology,
    /// True position, used for selection and Timing Advance.
    pub position: Point,
    /// Position as written to output files; its tile is the reported tile.
    pub reported: Point,
}

/// Current connections, shared by all operators (antenna ids are global).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttachmentState {
    counts: BTreeMap<AntennaId, u32>,
    current: BTreeMap<DeviceId, AntennaId>,
}

impl AttachmentState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn connections(&self, antenna: AntennaId) -> u32 {
        self.counts.get(&antenna).copied().unwrap_or(0)
    }

    pub fn attached_to(&self, device: DeviceId) -> Option<AntennaId> {
        self.current.get(&device).copied()
    }

    pub fn attachments(&self) -> impl Iterator<Item = (DeviceId, AntennaId)> + '_ {
        self.current.iter().map(|(d, a)| (*d, *a))
    }

    fn attach(&mut self, device: DeviceId, antenna: AntennaId) {
        *self.counts.entry(antenna).or_insert(0) += 1;
        self.current.insert(device, antenna);
    }

    fn release(&mut self, device: DeviceId) -> Option<AntennaId> {
        let antenna = self.current.remove(&device)?;
        if let Some(c) = self.counts.get_mut(&antenna) {
            *c -= 1;
            if *c == 0 {
                self.counts.remove(&antenna);
            }
        }
        Some(antenna)
    }

    /// Checks that counts match attachments and respect capacities.
    pub fn is_consistent(&self, antennas: &[AntennaConfig]) -> bool {
        let mut recount: BTreeMap<AntennaId, u32> = BTreeMap::new();
        for a in self.current.values() {
            *recount.entry(*a).or_insert(0) += 1;
        }
        recount == self.counts
            && antennas
                .iter()
                .all(|a| self.connections(a.antenna_id) <= a.max_connections)
    }
}

/// The feasible antenna with the highest dominance at `pos`, ties going to
/// the lower id. Feasible means both thresholds hold and the antenna has a
/// free slot.
pub fn best_antenna(
    pos: Point,
    antennas: &[AntennaConfig],
    state: &AttachmentState,
) -> Option<AntennaId> {
    let mut best: Option<(f64, AntennaId)> = None;
    for a in antennas {
        if state.connections(a.antenna_id) >= a.max_connections {
            continue;
        }
        let s = signal_strength_dbm(a, pos);
        let dom = dominance_from_strength(a, s);
        if s < a.min_strength_dbm || dom < a.min_dominance {
            continue;
        }
        best = match best {
            Some((d, id)) if d > dom || (d == dom && id < a.antenna_id) => Some((d, id)),
            _ => Some((dom, a.antenna_id)),
        };
    }
    best.map(|(_, id)| id)
}

/// Timing Advance code: `floor(distance / unit)`, with the unit set by the
/// technology.
pub fn timing_advance(distance_m: f64, tech: Technology) -> Result<u64, EventsError> {
    if !(distance_m >= 0.0) || !distance_m.is_finite() {
        return Err(EventsError::NegativeDistance(distance_m));
    }
    let u = tech.ta_unit_m();
    let mut q = (distance_m / u).floor();
    // keep q * u <= d < (q + 1) * u exact under rounding
    if q * u > distance_m {
        q -= 1.0;
    } else if (q + 1.0) * u <= distance_m {
        q += 1.0;
    }
    Ok(q as u64)
}

/// Updates attachments for one tick and returns the resulting events in
/// ascending device order. Only antennas of the device's own operator are
/// candidates.
pub fn tick_events(
    t: i64,
    devices: &[DevicePosition],
    antennas: &[AntennaConfig],
    grid: &Grid,
    state: &mut AttachmentState,
) -> Vec<EventRecord> {
    let by_id: BTreeMap<AntennaId, &AntennaConfig> =
        antennas.iter().map(|a| (a.antenna_id, a)).collect();
    let mut order: Vec<&DevicePosition> = devices.iter().collect();
    order.sort_by_key(|d| d.device_id);
    let mut events = Vec::new();
    let mut own: Vec<AntennaConfig> = Vec::new();
    for dev in order {
        let previous = state.release(dev.device_id);
        own.clear();
        own.extend(antennas.iter().filter(|a| a.mno_id == dev.mno_id).cloned());
        let next = best_antenna(dev.position, &own, state);
        let (code, antenna) = match (previous, next) {
            (None, None) => continue,
            (None, Some(a)) => (EventCode::Attach, a),
            (Some(p), Some(a)) if p == a => (EventCode::Update, a),
            (Some(_), Some(a)) => (EventCode::Handover, a),
            (Some(p), None) => (EventCode::Detach, p),
        };
        if let Some(a) = next {
            state.attach(dev.device_id, a);
        }
        let distance = by_id[&antenna].position.distance(&dev.position);
        events.push(EventRecord {
            t,
            device_id: dev.device_id,
            antenna_id: antenna,
            event_code: code,
            tech: dev.tech,
            timing_advance: timing_advance(distance, dev.tech).expect("distance is non-negative"),
            x: dev.reported.x,
            y: dev.reported.y,
            tile_id: grid.tile_of_clamped(dev.reported),
        });
    }
    events
}
