//! Ground-truth totals and origin-destination counts.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::{AggregateError, IndividualRow};

/// Unit for rows outside every subregion.
pub const NONE_UNIT: &str = "<none>";

/// Largest dense table that will be materialized.
const MAX_CELLS: u128 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Individuals,
    Devices,
    IndividualsDev0,
    IndividualsDev1,
    IndividualsDev2,
}

impl Measure {
    pub const ALL: [Measure; 5] = [
        Measure::Individuals,
        Measure::Devices,
        Measure::IndividualsDev0,
        Measure::IndividualsDev1,
        Measure::IndividualsDev2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Individuals => "individuals",
            Measure::Devices => "devices",
            Measure::IndividualsDev0 => "individuals_dev0",
            Measure::IndividualsDev1 => "individuals_dev1",
            Measure::IndividualsDev2 => "individuals_dev2",
        }
    }

    /// Contribution of one person with `device_count` devices.
    fn weight(self, device_count: u8) -> u64 {
        match self {
            Measure::Individuals => 1,
            Measure::Devices => device_count as u64,
            Measure::IndividualsDev0 => (device_count == 0) as u64,
            Measure::IndividualsDev1 => (device_count == 1) as u64,
            Measure::IndividualsDev2 => (device_count == 2) as u64,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = AggregateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| AggregateError::UnknownMeasure(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Key {
    Time,
    Subregion,
    Tile,
}

impl Key {
    pub fn name(self) -> &'static str {
        match self {
            Key::Time => "t",
            Key::Subregion => "Subregion_long",
            Key::Tile => "tile_id",
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Key {
    type Err = AggregateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Key::Time, Key::Subregion, Key::Tile]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| AggregateError::UnknownKey(s.to_string()))
    }
}

/// Parses a comma-separated measure list such as `individuals,devices`.
pub fn parse_measures(list: &str) -> Result<Vec<Measure>, AggregateError> {
    list.split(',').map(|s| s.trim().parse()).collect()
}

/// Parses a comma-separated key list such as `t,Subregion_long`.
pub fn parse_keys(list: &str) -> Result<Vec<Key>, AggregateError> {
    list.split(',').map(|s| s.trim().parse()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KeyValue {
    Int(i64),
    Text(String),
}

impl fmt::Display for KeyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyValue::Int(v) => write!(f, "{v}"),
            KeyValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for KeyValue {
    fn from(v: i64) -> Self {
        KeyValue::Int(v)
    }
}

impl From<&str> for KeyValue {
    fn from(v: &str) -> Self {
        KeyValue::Text(v.to_string())
    }
}

/// Every value each key can take. Tables are dense over this domain.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyDomain {
    pub times: Vec<i64>,
    /// Subregion names in map order, then [`NONE_UNIT`].
    pub units: Vec<String>,
    pub n_tiles: u64,
}

impl KeyDomain {
    pub fn new<S: Into<String>>(
        times: Vec<i64>,
        subregions: impl IntoIterator<Item = S>,
        n_tiles: u64,
    ) -> Self {
        let mut units: Vec<String> = subregions.into_iter().map(Into::into).collect();
        units.push(NONE_UNIT.to_string());
        KeyDomain {
            times,
            units,
            n_tiles,
        }
    }

    fn len(&self, key: Key) -> usize {
        match key {
            Key::Time => self.times.len(),
            Key::Subregion => self.units.len(),
            Key::Tile => self.n_tiles as usize,
        }
    }

    fn value(&self, key: Key, i: usize) -> KeyValue {
        match key {
            Key::Time => KeyValue::Int(self.times[i]),
            Key::Subregion => KeyValue::Text(self.units[i].clone()),
            Key::Tile => KeyValue::Int(i as i64),
        }
    }

    fn index(&self, key: Key, row: &IndividualRow) -> Result<usize, AggregateError> {
        let outside = |value: String| AggregateError::OutsideDomain {
            key: key.name().to_string(),
            value,
        };
        match key {
            Key::Time => self
                .times
                .iter()
                .position(|t| *t == row.t)
                .ok_or_else(|| outside(row.t.to_string())),
            Key::Subregion => {
                let name = row.subregion_long.as_deref().unwrap_or(NONE_UNIT);
                self.units
                    .iter()
                    .position(|u| u == name)
                    .ok_or_else(|| outside(name.to_string()))
            }
            Key::Tile => {
                if row.tile_id.0 < self.n_tiles {
                    Ok(row.tile_id.0 as usize)
                } else {
                    Err(outside(row.tile_id.to_string()))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateRow {
    pub keys: Vec<KeyValue>,
    pub counts: Vec<u64>,
}

/// Key columns first, then one count column per measure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateTable {
    pub key_columns: Vec<String>,
    pub measure_columns: Vec<String>,
    pub rows: Vec<AggregateRow>,
}

impl AggregateTable {
    /// Counts of the row whose keys equal `keys`.
    pub fn get(&self, keys: &[KeyValue]) -> Option<&[u64]> {
        self.rows
            .iter()
            .find(|r| r.keys == keys)
            .map(|r| r.counts.as_slice())
    }

    /// Values of one measure column, in row order.
    pub fn column(&self, measure: Measure) -> Option<Vec<u64>> {
        let i = self
            .measure_columns
            .iter()
            .position(|m| m == measure.name())?;
        Some(self.rows.iter().map(|r| r.counts[i]).collect())
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let header: Vec<&str> = self
            .key_columns
            .iter()
            .chain(&self.measure_columns)
            .map(String::as_str)
            .collect();
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let cells: Vec<String> = r
                .keys
                .iter()
                .map(ToString::to_string)
                .chain(r.counts.iter().map(ToString::to_string))
                .collect();
            w.write_record(&cells).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::File::create(path)?.write_all(self.to_csv_string().as_bytes())
    }
}

fn check_request(what: &[Measure], by: &[Key]) -> Result<(), AggregateError> {
    if what.is_empty() {
        return Err(AggregateError::NoMeasures);
    }
    for (i, m) in what.iter().enumerate() {
        if what[..i].contains(m) {
            return Err(AggregateError::Duplicate(m.name().to_string()));
        }
    }
    for (i, k) in by.iter().enumerate() {
        if by[..i].contains(k) {
            return Err(AggregateError::Duplicate(k.name().to_string()));
        }
    }
    Ok(())
}

fn dense_size(dims: &[usize]) -> Result<usize, AggregateError> {
    let cells: u128 = dims.iter().map(|d| *d as u128).product();
    if cells > MAX_CELLS {
        return Err(AggregateError::TooLarge(cells));
    }
    Ok(cells as usize)
}

/// Mixed-radix cell index to per-key indices.
fn unflatten(mut cell: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (i, d) in dims.iter().enumerate().rev() {
        out[i] = cell % d;
        cell /= d;
    }
    out
}

/// Counts per group over the full key domain.
///
/// `individuals` counts distinct persons; `devices` sums their device counts;
/// `individuals_devK` counts persons with exactly K devices. A person seen
/// several times within a group (for instance when `t` is not a key) counts
/// once, so the identities `dev0 + dev1 + dev2 = individuals` and
/// `devices = dev1 + 2 dev2` hold in every group.
pub fn compute_total(
    individuals: &[IndividualRow],
    domain: &KeyDomain,
    what: &[Measure],
    by: &[Key],
) -> Result<AggregateTable, AggregateError> {
    check_request(what, by)?;
    let dims: Vec<usize> = by.iter().map(|k| domain.len(*k)).collect();
    let n_cells = dense_size(&dims)?;
    let mut counts = vec![vec![0u64; what.len()]; n_cells];
    let mut seen: HashSet<(usize, u64)> = HashSet::new();
    for row in individuals {
        let mut cell = 0usize;
        for (k, d) in by.iter().zip(&dims) {
            cell = cell * d + domain.index(*k, row)?;
        }
        if !seen.insert((cell, row.person_id.0)) {
            continue;
        }
        for (j, m) in what.iter().enumerate() {
            counts[cell][j] += m.weight(row.device_count);
        }
    }
    let rows = counts
        .into_iter()
        .enumerate()
        .map(|(cell, c)| AggregateRow {
            keys: unflatten(cell, &dims)
                .into_iter()
                .zip(by)
                .map(|(i, k)| domain.value(*k, i))
                .collect(),
            counts: c,
        })
        .collect();
    Ok(AggregateTable {
        key_columns: by.iter().map(|k| k.name().to_string()).collect(),
        measure_columns: what.iter().map(|m| m.name().to_string()).collect(),
        rows,
    })
}

/// Transition counts between consecutive ticks.
///
/// `by` is `(t, unit)` where the unit key is `Subregion_long` or `tile_id`.
/// Each person present at both `t_from` and `t_to` contributes their measure
/// weight to `(unit at t_from, unit at t_to)`. The table is dense over tick
/// pairs and unit pairs.
pub fn compute_odmatrix(
    individuals: &[IndividualRow],
    domain: &KeyDomain,
    what: &[Measure],
    by: (Key, Key),
) -> Result<AggregateTable, AggregateError> {
    check_request(what, &[by.0, by.1])?;
    let unit_key = match by {
        (Key::Time, k @ (Key::Subregion | Key::Tile)) => k,
        (a, b) => {
            return Err(AggregateError::OdKeys(format!(
                "expected (t, Subregion_long) or (t, tile_id), got ({a}, {b})"
            )))
        }
    };
    if domain.times.len() < 2 {
        return Err(AggregateError::SingleTimePoint);
    }
    let n_units = domain.len(unit_key);
    let n_pairs = domain.times.len() - 1;
    let n_cells = dense_size(&[n_pairs, n_units, n_units])?;

    let mut located: HashMap<(usize, u64), (usize, u8)> = HashMap::new();
    for row in individuals {
        let ti = domain.index(Key::Time, row)?;
        let ui = domain.index(unit_key, row)?;
        located.insert((ti, row.person_id.0), (ui, row.device_count));
    }
    let mut counts = vec![vec![0u64; what.len()]; n_cells];
    for (&(ti, person), &(from, device_count)) in &located {
        if ti + 1 >= domain.times.len() {
            continue;
        }
        if let Some(&(to, _)) = located.get(&(ti + 1, person)) {
            let cell = (ti * n_units + from) * n_units + to;
            for (j, m) in what.iter().enumerate() {
                counts[cell][j] += m.weight(device_count);
            }
        }
    }
    let rows = counts
        .into_iter()
        .enumerate()
        .map(|(cell, c)| {
            let (ti, rest) = (cell / (n_units * n_units), cell % (n_units * n_units));
            let (from, to) = (rest / n_units, rest % n_units);
            AggregateRow {
                keys: vec![
                    KeyValue::Int(domain.times[ti]),
                    KeyValue::Int(domain.times[ti + 1]),
                    domain.value(unit_key, from),
                    domain.value(unit_key, to),
                ],
                counts: c,
            }
        })
        .collect();
    Ok(AggregateTable {
        key_columns: ["t_from", "t_to", "unit_from", "unit_to"]
            .map(String::from)
            .to_vec(),
        measure_columns: what.iter().map(|m| m.name().to_string()).collect(),
        rows,
    })
}
