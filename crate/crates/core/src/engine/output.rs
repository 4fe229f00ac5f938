//! CSV writers, dictionaries and the run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dictionary::Dictionary;
use super::{EngineError, RunPaths, Scenario, Simulation, SimulationOutput};
use crate::config::{AntennaConfig, Mno};
use crate::events::EventRecord;
use crate::geometry::{to_wkt, Grid};
use crate::radio::{compute_coverage, compute_signal_measures};

pub const GRID_FILE: &str = "grid.csv";
pub const PERSONS_FILE: &str = "persons.csv";
pub const ANTENNAS_FILE: &str = "antennas.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MAP_WKT_FILE: &str = "map.wkt";
pub const MAP_XML_FILE: &str = "map.xml";

pub fn antenna_info_file(mno: &str) -> String {
    format!("AntennaInfo_MNO_{mno}.csv")
}

pub fn antenna_cells_file(mno: &str) -> String {
    format!("AntennaCells_{mno}.csv")
}

pub fn signal_measure_file(mno: &str) -> String {
    format!("SignalMeasure_{mno}.csv")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestMno {
    pub id: u32,
    pub name: String,
    pub tech: String,
}

/// Provenance record of a run. Contains no timestamps or absolute paths so
/// that identical runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact: String,
    pub version: String,
    pub seed: u64,
    pub start_time: i64,
    pub end_time: i64,
    pub time_increment: i64,
    pub crs: u32,
    pub mnos: Vec<ManifestMno>,
    pub inputs: BTreeMap<String, FileDigest>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EngineError + '_ {
    move |source| EngineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> EngineError + '_ {
    move |source| EngineError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

type CsvOut = csv::Writer<BufWriter<File>>;

fn create_csv(path: &Path, dict: &Dictionary) -> Result<CsvOut, EngineError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    w.write_record(dict.column_names()).map_err(csv_err(path))?;
    Ok(w)
}

fn finish(mut w: CsvOut, path: &Path) -> Result<(), EngineError> {
    w.flush().map_err(io_err(path))
}

fn mm(v: f64) -> String {
    format!("{v:.3}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(crate) fn write_grid(grid: &Grid, path: &Path) -> Result<(), EngineError> {
    let mut w = create_csv(path, &Dictionary::grid())?;
    w.write_record([
        grid.x_origin.to_string(),
        grid.y_origin.to_string(),
        grid.tile_dim_x.to_string(),
        grid.tile_dim_y.to_string(),
        grid.n_cols.to_string(),
        grid.n_rows.to_string(),
    ])
    .map_err(csv_err(path))?;
    finish(w, path)
}

pub(crate) fn write_antennas(antennas: &[AntennaConfig], path: &Path) -> Result<(), EngineError> {
    let mut w = create_csv(path, &Dictionary::antennas())?;
    for a in antennas {
        w.write_record([
            a.antenna_id.to_string(),
            a.mno_id.to_string(),
            a.mno_name.clone(),
            a.max_connections.to_string(),
            a.power_w.to_string(),
            a.path_loss_exponent.to_string(),
            a.cell_type.to_string(),
            a.min_strength_dbm.to_string(),
            a.min_dominance.to_string(),
            a.dominance_midpoint_dbm.to_string(),
            a.dominance_steepness.to_string(),
            opt(a.azimuth_deg),
            a.tilt_deg.to_string(),
            a.elevation_m.to_string(),
            a.beam_h_deg.to_string(),
            a.beam_v_deg.to_string(),
            a.height_m.to_string(),
            a.position.x.to_string(),
            a.position.y.to_string(),
            opt(a.tile_id),
        ])
        .map_err(csv_err(path))?;
    }
    finish(w, path)
}

fn write_static_network(
    antennas: &[AntennaConfig],
    grid: &Grid,
    cells_path: &Path,
    signal_path: &Path,
) -> Result<(), EngineError> {
    let mut w = create_csv(signal_path, &Dictionary::signal())?;
    for m in compute_signal_measures(antennas, grid) {
        w.write_record([
            m.antenna_id.to_string(),
            m.tile_id.to_string(),
            m.strength_dbm.to_string(),
            m.dominance.to_string(),
        ])
        .map_err(csv_err(signal_path))?;
    }
    finish(w, signal_path)?;
    let mut w = create_csv(cells_path, &Dictionary::coverage())?;
    for c in compute_coverage(antennas, grid) {
        for t in c.covered_tiles {
            w.write_record([c.antenna_id.to_string(), t.to_string()])
                .map_err(csv_err(cells_path))?;
        }
    }
    finish(w, cells_path)
}

fn write_event(w: &mut CsvOut, e: &EventRecord, path: &Path) -> Result<(), EngineError> {
    w.write_record([
        e.t.to_string(),
        e.antenna_id.to_string(),
        e.event_code.to_string(),
        e.device_id.to_string(),
        mm(e.x),
        mm(e.y),
        e.tile_id.to_string(),
        e.tech.to_string(),
        e.timing_advance.to_string(),
    ])
    .map_err(csv_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), EngineError> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn digest_input(path: &Path) -> Result<FileDigest, EngineError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(FileDigest {
        file: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: sha256_hex(&bytes),
    })
}

pub(crate) fn write_run(
    paths: &RunPaths,
    scenario: Scenario,
    seed: u64,
    dir: &Path,
) -> Result<SimulationOutput, EngineError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut inputs = BTreeMap::new();
    inputs.insert("simulation".to_string(), digest_input(&paths.simulation)?);
    inputs.insert("persons".to_string(), digest_input(&paths.persons)?);
    inputs.insert("antennas".to_string(), digest_input(&paths.antennas)?);
    inputs.insert("map_wkt".to_string(), digest_input(&paths.map_wkt)?);
    inputs.insert(
        "subdivisions".to_string(),
        digest_input(&paths.subdivisions)?,
    );

    let mut sim = Simulation::new(scenario, seed)?;
    let mnos: Vec<Mno> = sim.scenario().sim.mno_list.clone();

    let grid_path = dir.join(GRID_FILE);
    write_grid(sim.grid(), &grid_path)?;
    let antennas_path = dir.join(ANTENNAS_FILE);
    write_antennas(sim.antennas(), &antennas_path)?;

    let mut coverage = Vec::new();
    let mut signal = Vec::new();
    for m in &mnos {
        let own: Vec<AntennaConfig> = sim
            .antennas()
            .iter()
            .filter(|a| a.mno_id == m.id)
            .cloned()
            .collect();
        let cells = dir.join(antenna_cells_file(&m.name));
        let sig = dir.join(signal_measure_file(&m.name));
        write_static_network(&own, sim.grid(), &cells, &sig)?;
        coverage.push(cells);
        signal.push(sig);
    }

    let persons_path = dir.join(PERSONS_FILE);
    let mut persons_w = create_csv(&persons_path, &Dictionary::persons())?;
    let event_paths: Vec<PathBuf> = mnos
        .iter()
        .map(|m| dir.join(antenna_info_file(&m.name)))
        .collect();
    let mut event_ws = event_paths
        .iter()
        .map(|p| create_csv(p, &Dictionary::events()))
        .collect::<Result<Vec<_>, _>>()?;
    let mno_index: BTreeMap<u32, usize> = mnos.iter().enumerate().map(|(i, m)| (m.id, i)).collect();
    let antenna_mno: BTreeMap<_, _> = sim
        .antennas()
        .iter()
        .map(|a| (a.antenna_id, a.mno_id))
        .collect();

    while let Some(tick) = sim.next_tick() {
        for r in &tick.persons {
            let dev = |k: usize| opt(r.device_ids.get(k));
            persons_w
                .write_record([
                    r.t.to_string(),
                    r.person_id.to_string(),
                    mm(r.x),
                    mm(r.y),
                    r.tile_id.to_string(),
                    dev(0),
                    dev(1),
                ])
                .map_err(csv_err(&persons_path))?;
        }
        for e in &tick.events {
            let i = mno_index[&antenna_mno[&e.antenna_id]];
            write_event(&mut event_ws[i], e, &event_paths[i])?;
        }
    }
    finish(persons_w, &persons_path)?;
    for (w, p) in event_ws.into_iter().zip(&event_paths) {
        finish(w, p)?;
    }

    for (name, d) in Dictionary::all() {
        write_text(&dir.join(name), &d.to_element().to_xml_string())?;
    }
    write_text(
        &dir.join(MAP_WKT_FILE),
        &format!("{}\n", to_wkt(&sim.scenario().map.boundary)),
    )?;
    write_text(
        &dir.join(MAP_XML_FILE),
        &sim.scenario().map.to_element().to_xml_string(),
    )?;

    let output = SimulationOutput {
        dir: dir.to_path_buf(),
        grid: grid_path,
        persons: persons_path,
        antennas: antennas_path,
        events: event_paths,
        coverage,
        signal,
        manifest_path: dir.join(MANIFEST_FILE),
        manifest: build_manifest(&sim, seed, inputs),
    };
    let mut manifest = output.manifest.clone();
    for p in output
        .all_files()
        .iter()
        .filter(|p| **p != output.manifest_path)
    {
        let bytes = std::fs::read(p).map_err(io_err(p))?;
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        manifest.outputs.insert(name, sha256_hex(&bytes));
    }
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_text(&output.manifest_path, &json)?;
    Ok(SimulationOutput { manifest, ..output })
}

fn build_manifest(sim: &Simulation, seed: u64, inputs: BTreeMap<String, FileDigest>) -> Manifest {
    let cfg = &sim.scenario().sim;
    Manifest {
        artifact: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        start_time: cfg.start_time,
        end_time: cfg.end_time,
        time_increment: cfg.time_increment,
        crs: sim.scenario().map.crs,
        mnos: cfg
            .mno_list
            .iter()
            .map(|m| ManifestMno {
                id: m.id,
                name: m.name.clone(),
                tech: m.tech.to_string(),
            })
            .collect(),
        inputs,
        outputs: BTreeMap::new(),
    }
}
