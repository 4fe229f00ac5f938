//! Loading simulation outputs and computing ground-truth aggregates.

mod compute;

pub use compute::{
    compute_odmatrix, compute_total, parse_keys, parse_measures, AggregateRow, AggregateTable, Key,
    KeyDomain, KeyValue, Measure, NONE_UNIT,
};

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{AntennaConfig, MapSpec, Technology};
use crate::engine::{
    antenna_cells_file, antenna_info_file, signal_measure_file, Dictionary, Manifest,
    ANTENNAS_FILE, GRID_FILE, MANIFEST_FILE, MAP_WKT_FILE, MAP_XML_FILE, PERSONS_FILE,
};
use crate::events::EventRecord;
use crate::geometry::{Grid, Point, Territory};
use crate::radio::{CoverageCell, SignalMeasure};
use crate::{AntennaId, DeviceId, PersonId, TileId};

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("cannot read {path}: {message}")]
    Unreadable { path: PathBuf, message: String },
    #[error("{path}: column '{column}' does not match its dictionary: {message}")]
    DictionaryMismatch {
        path: PathBuf,
        column: String,
        message: String,
    },
    #[error("inconsistent outputs: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregateError {
    #[error("unknown measure '{0}'; expected one of individuals, devices, individuals_dev0, individuals_dev1, individuals_dev2")]
    UnknownMeasure(String),
    #[error("unknown key '{0}'; expected one of t, Subregion_long, tile_id")]
    UnknownKey(String),
    #[error("at least one measure is required")]
    NoMeasures,
    #[error("'{0}' requested twice")]
    Duplicate(String),
    #[error("value '{value}' of key '{key}' is outside the key domain")]
    OutsideDomain { key: String, value: String },
    #[error("origin-destination counts need at least two time points")]
    SingleTimePoint,
    #[error("invalid origin-destination keys: {0}")]
    OdKeys(String),
    #[error("dense table would have {0} cells")]
    TooLarge(u128),
}

/// Ground truth for one person at one tick, joined to its subregion.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualRow {
    pub t: i64,
    pub person_id: PersonId,
    pub x: f64,
    pub y: f64,
    pub tile_id: TileId,
    pub device_count: u8,
    pub device_ids: Vec<DeviceId>,
    /// First listed subregion containing `(x, y)`, if any.
    pub subregion_long: Option<String>,
}

/// Paths of every file of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFiles {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub grid: PathBuf,
    pub persons: PathBuf,
    pub antennas: PathBuf,
    pub map_wkt: PathBuf,
    pub map_xml: PathBuf,
}

impl SimFiles {
    /// Standard file names inside an output directory.
    pub fn in_dir(dir: &Path) -> Self {
        SimFiles {
            dir: dir.to_path_buf(),
            manifest: dir.join(MANIFEST_FILE),
            grid: dir.join(GRID_FILE),
            persons: dir.join(PERSONS_FILE),
            antennas: dir.join(ANTENNAS_FILE),
            map_wkt: dir.join(MAP_WKT_FILE),
            map_xml: dir.join(MAP_XML_FILE),
        }
    }
}

/// Everything a run produced, loaded and cross-checked.
#[derive(Debug, Clone)]
pub struct SimData {
    pub map: Territory,
    pub grid: Grid,
    pub network: Vec<AntennaConfig>,
    pub signal: Vec<SignalMeasure>,
    pub coverage: Vec<CoverageCell>,
    pub events: Vec<EventRecord>,
    pub individuals: Vec<IndividualRow>,
    pub crs_code: u32,
    /// Tick timestamps of the run.
    pub times: Vec<i64>,
    pub manifest: Manifest,
}

impl SimData {
    pub fn key_domain(&self) -> KeyDomain {
        KeyDomain::new(
            self.times.clone(),
            self.map.subregions().iter().map(|s| s.long_name.clone()),
            self.grid.n_tiles(),
        )
    }

    pub fn num_persons(&self) -> usize {
        self.individuals
            .iter()
            .map(|r| r.person_id)
            .collect::<HashSet<_>>()
            .len()
    }
}

fn must_exist(path: &Path) -> Result<(), ReadError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(ReadError::MissingFile(path.to_path_buf()))
    }
}

fn read_string(path: &Path) -> Result<String, ReadError> {
    must_exist(path)?;
    std::fs::read_to_string(path).map_err(|e| ReadError::Unreadable {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// A CSV file checked against its dictionary, as rows of named cells.
struct Table {
    path: PathBuf,
    columns: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn col(&self, name: &str) -> usize {
        self.columns
            .iter()
            .position(|c| c == name)
            .expect("column checked against dictionary")
    }

    fn parse<T: std::str::FromStr>(
        &self,
        row: &csv::StringRecord,
        name: &str,
    ) -> Result<T, ReadError> {
        let cell = &row[self.col(name)];
        cell.parse().map_err(|_| ReadError::DictionaryMismatch {
            path: self.path.clone(),
            column: name.to_string(),
            message: format!("cannot interpret '{cell}'"),
        })
    }

    fn parse_opt<T: std::str::FromStr>(
        &self,
        row: &csv::StringRecord,
        name: &str,
    ) -> Result<Option<T>, ReadError> {
        if row[self.col(name)].is_empty() {
            Ok(None)
        } else {
            self.parse(row, name).map(Some)
        }
    }
}

/// Reads `path` after checking the dictionary file in the same directory
/// against the expected layout and the CSV header and cells against the
/// dictionary.
fn read_table(path: &Path, dict_file: &str, expected: &Dictionary) -> Result<Table, ReadError> {
    must_exist(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let dict_path = dir.join(dict_file);
    let dict = Dictionary::from_xml(&read_string(&dict_path)?).map_err(|message| {
        ReadError::Unreadable {
            path: dict_path.clone(),
            message,
        }
    })?;
    let mismatch = |p: &Path, column: &str, message: String| ReadError::DictionaryMismatch {
        path: p.to_path_buf(),
        column: column.to_string(),
        message,
    };
    for (i, exp) in expected.columns.iter().enumerate() {
        match dict.columns.get(i) {
            Some(c) if c.name == exp.name && c.kind == exp.kind => {}
            Some(c) => {
                return Err(mismatch(
                    &dict_path,
                    &c.name,
                    format!("expected column '{}' of type {}", exp.name, exp.kind),
                ))
            }
            None => return Err(mismatch(&dict_path, &exp.name, "column missing".into())),
        }
    }
    if let Some(extra) = dict.columns.get(expected.columns.len()) {
        return Err(mismatch(
            &dict_path,
            &extra.name,
            "unexpected column".into(),
        ));
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| ReadError::Unreadable {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    let header = reader
        .headers()
        .map_err(|e| ReadError::Unreadable {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .clone();
    for (i, spec) in dict.columns.iter().enumerate() {
        match header.get(i) {
            Some(h) if h == spec.name => {}
            Some(h) => {
                return Err(mismatch(
                    path,
                    h,
                    format!("dictionary declares '{}' at position {}", spec.name, i + 1),
                ))
            }
            None => {
                return Err(mismatch(
                    path,
                    &spec.name,
                    "column missing from header".into(),
                ))
            }
        }
    }
    if let Some(h) = header.get(dict.columns.len()) {
        return Err(mismatch(
            path,
            h,
            "column not declared in the dictionary".into(),
        ));
    }
    let mut rows = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| ReadError::Unreadable {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        for (spec, cell) in dict.columns.iter().zip(rec.iter()) {
            let ok = if cell.is_empty() {
                spec.nullable
            } else {
                spec.kind.accepts(cell)
            };
            if !ok {
                return Err(mismatch(
                    path,
                    &spec.name,
                    format!("row {}: '{cell}' is not a valid {}", n + 1, spec.kind),
                ));
            }
        }
        rows.push(rec);
    }
    Ok(Table {
        path: path.to_path_buf(),
        columns: dict.columns.into_iter().map(|c| c.name).collect(),
        rows,
    })
}

fn ticks(start: i64, end: i64, step: i64) -> Vec<i64> {
    let mut out: Vec<i64> = (start..end).step_by(step.max(1) as usize).collect();
    out.push(end);
    out
}

/// Loads every output of the run in `files.dir`. `crs_code` overrides the
/// CRS recorded in the map.
pub fn read_sim_data(files: &SimFiles, crs_code: Option<u32>) -> Result<SimData, ReadError> {
    let manifest = Manifest::read(&files.manifest).map_err(|message| {
        if files.manifest.is_file() {
            ReadError::Unreadable {
                path: files.manifest.clone(),
                message,
            }
        } else {
            ReadError::MissingFile(files.manifest.clone())
        }
    })?;
    let spec = MapSpec::from_strs(&read_string(&files.map_wkt)?, &read_string(&files.map_xml)?)
        .map_err(|e| ReadError::Unreadable {
            path: files.map_xml.clone(),
            message: e.to_string(),
        })?;
    let map = spec.territory().map_err(|e| ReadError::Unreadable {
        path: files.map_wkt.clone(),
        message: e.to_string(),
    })?;

    let g = read_table(&files.grid, "grid_dict.xml", &Dictionary::grid())?;
    let row = g.rows.first().ok_or_else(|| {
        ReadError::Inconsistent(format!("{} has no data row", files.grid.display()))
    })?;
    let grid = Grid {
        x_origin: g.parse(row, "x_origin")?,
        y_origin: g.parse(row, "y_origin")?,
        tile_dim_x: g.parse(row, "tile_dim_x")?,
        tile_dim_y: g.parse(row, "tile_dim_y")?,
        n_cols: g.parse(row, "n_cols")?,
        n_rows: g.parse(row, "n_rows")?,
    };
    if grid.n_cols == 0 || grid.n_rows == 0 {
        return Err(ReadError::Inconsistent("grid has no tiles".into()));
    }

    let network = read_network(&files.antennas)?;
    let mut signal = Vec::new();
    let mut coverage = Vec::new();
    let mut events = Vec::new();
    for m in &manifest.mnos {
        let s = read_table(
            &files.dir.join(signal_measure_file(&m.name)),
            "signal_dict.xml",
            &Dictionary::signal(),
        )?;
        for r in &s.rows {
            signal.push(SignalMeasure {
                antenna_id: s.parse(r, "antenna_id")?,
                tile_id: s.parse(r, "tile_id")?,
                strength_dbm: s.parse(r, "strength")?,
                dominance: s.parse(r, "dominance")?,
            });
        }
        let c = read_table(
            &files.dir.join(antenna_cells_file(&m.name)),
            "coverage_dict.xml",
            &Dictionary::coverage(),
        )?;
        let mut cells: BTreeMap<AntennaId, Vec<TileId>> = network
            .iter()
            .filter(|a| a.mno_id == m.id)
            .map(|a| (a.antenna_id, Vec::new()))
            .collect();
        for r in &c.rows {
            let a: AntennaId = c.parse(r, "antenna_id")?;
            cells
                .get_mut(&a)
                .ok_or_else(|| {
                    ReadError::Inconsistent(format!("coverage lists unknown antenna {a}"))
                })?
                .push(c.parse(r, "tile_id")?);
        }
        for a in network.iter().filter(|a| a.mno_id == m.id) {
            coverage.push(CoverageCell {
                antenna_id: a.antenna_id,
                covered_tiles: cells.remove(&a.antenna_id).unwrap_or_default(),
            });
        }
        let e = read_table(
            &files.dir.join(antenna_info_file(&m.name)),
            "events_dict.xml",
            &Dictionary::events(),
        )?;
        for r in &e.rows {
            let tech: Technology = e.parse(r, "tech")?;
            events.push(EventRecord {
                t: e.parse(r, "t")?,
                device_id: e.parse(r, "device_id")?,
                antenna_id: e.parse(r, "antenna_id")?,
                event_code: e.parse(r, "event_code")?,
                tech,
                timing_advance: e.parse(r, "TA")?,
                x: e.parse(r, "x")?,
                y: e.parse(r, "y")?,
                tile_id: e.parse(r, "tile_id")?,
            });
        }
    }

    let p = read_table(&files.persons, "persons_dict.xml", &Dictionary::persons())?;
    let mut individuals = Vec::with_capacity(p.rows.len());
    for r in &p.rows {
        let device_ids: Vec<DeviceId> = [
            p.parse_opt(r, "device_id_1")?,
            p.parse_opt(r, "device_id_2")?,
        ]
        .into_iter()
        .flatten()
        .collect();
        let (x, y): (f64, f64) = (p.parse(r, "x")?, p.parse(r, "y")?);
        individuals.push(IndividualRow {
            t: p.parse(r, "t")?,
            person_id: p.parse(r, "person_id")?,
            x,
            y,
            tile_id: p.parse(r, "tile_id")?,
            device_count: device_ids.len() as u8,
            device_ids,
            subregion_long: map
                .subregion_of(Point::new(x, y))
                .map(|s| s.long_name.clone()),
        });
    }

    let data = SimData {
        crs_code: crs_code.unwrap_or(spec.crs),
        map,
        grid,
        network,
        signal,
        coverage,
        events,
        individuals,
        times: ticks(
            manifest.start_time,
            manifest.end_time,
            manifest.time_increment,
        ),
        manifest,
    };
    check_consistency(&data)?;
    Ok(data)
}

fn read_network(path: &Path) -> Result<Vec<AntennaConfig>, ReadError> {
    let a = read_table(path, "antennas_dict.xml", &Dictionary::antennas())?;
    let mut out = Vec::new();
    for r in &a.rows {
        out.push(AntennaConfig {
            antenna_id: a.parse(r, "antenna_id")?,
            mno_id: a.parse(r, "mno_id")?,
            mno_name: a.parse(r, "mno_name")?,
            max_connections: a.parse(r, "max_connections")?,
            power_w: a.parse(r, "power")?,
            path_loss_exponent: a.parse(r, "path_loss_exponent")?,
            cell_type: a.parse(r, "cell_type")?,
            min_strength_dbm: a.parse(r, "min_signal_strength")?,
            min_dominance: a.parse(r, "min_signal_dominance")?,
            dominance_midpoint_dbm: a.parse(r, "dominance_midpoint")?,
            dominance_steepness: a.parse(r, "dominance_steepness")?,
            azimuth_deg: a.parse_opt(r, "azimuth")?,
            tilt_deg: a.parse(r, "tilt")?,
            elevation_m: a.parse(r, "elevation")?,
            beam_h_deg: a.parse(r, "beam_h")?,
            beam_v_deg: a.parse(r, "beam_v")?,
            height_m: a.parse(r, "height")?,
            position: Point::new(a.parse(r, "x")?, a.parse(r, "y")?),
            tile_id: a.parse_opt(r, "tile_id")?,
        });
    }
    Ok(out)
}

fn check_consistency(data: &SimData) -> Result<(), ReadError> {
    let mut present: HashSet<(i64, DeviceId)> = HashSet::new();
    for r in &data.individuals {
        let expected = data.grid.tile_of_clamped(Point::new(r.x, r.y));
        if expected != r.tile_id {
            return Err(ReadError::Inconsistent(format!(
                "person {} at t={} is in tile {expected}, recorded as {}",
                r.person_id, r.t, r.tile_id
            )));
        }
        present.extend(r.device_ids.iter().map(|d| (r.t, *d)));
    }
    if let Some(e) = data
        .events
        .iter()
        .find(|e| !present.contains(&(e.t, e.device_id)))
    {
        return Err(ReadError::Inconsistent(format!(
            "event for device {} at t={} has no ground-truth row",
            e.device_id, e.t
        )));
    }
    Ok(())
}
