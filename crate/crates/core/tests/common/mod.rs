#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mndsim::aggregates::IndividualRow;
use mndsim::config::{
    parse_antennas_config, parse_persons_config, parse_simulation_config, AntennaConfig, CellType,
    DeviceProbabilities, PersonsConfig, SimulationConfig,
};
use mndsim::engine::{RunPaths, Scenario, Simulation};
use mndsim::geometry::Point;
use mndsim::mobility::MovementPattern;
use mndsim::AntennaId;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn fixture_paths() -> RunPaths {
    RunPaths {
        simulation: fixture("simulation.xml"),
        persons: fixture("persons.xml"),
        antennas: fixture("antennas.xml"),
        map_wkt: fixture("map.wkt"),
        subdivisions: fixture("map.xml"),
    }
}

pub fn fixture_scenario() -> Scenario {
    Scenario::load(&fixture_paths()).unwrap()
}

/// Input files written to a temporary directory.
pub struct ScenarioFiles {
    pub dir: TempDir,
    pub paths: RunPaths,
}

impl ScenarioFiles {
    pub fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

pub fn write_scenario(
    sim: &SimulationConfig,
    persons: &PersonsConfig,
    antennas: &[AntennaConfig],
) -> ScenarioFiles {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    std::fs::write(p("simulation.xml"), sim.to_element().to_xml_string()).unwrap();
    std::fs::write(p("persons.xml"), persons.to_element().to_xml_string()).unwrap();
    std::fs::write(
        p("antennas.xml"),
        AntennaConfig::list_to_element(antennas).to_xml_string(),
    )
    .unwrap();
    std::fs::copy(fixture("map.wkt"), p("map.wkt")).unwrap();
    std::fs::copy(fixture("map.xml"), p("map.xml")).unwrap();
    let paths = RunPaths {
        simulation: p("simulation.xml"),
        persons: p("persons.xml"),
        antennas: p("antennas.xml"),
        map_wkt: p("map.wkt"),
        subdivisions: p("map.xml"),
    };
    // round-trip through the parsers so the files are known to be valid
    parse_simulation_config(&paths.simulation).unwrap();
    parse_persons_config(&paths.persons).unwrap();
    parse_antennas_config(&paths.antennas).unwrap();
    ScenarioFiles { dir, paths }
}

/// Omnidirectional antenna at the map center reaching every tile.
pub fn central_antenna() -> AntennaConfig {
    let mut a = parse_antennas_config(&fixture("antennas.xml"))
        .unwrap()
        .remove(0);
    a.antenna_id = AntennaId(1);
    a.cell_type = CellType::Omnidirectional;
    a.azimuth_deg = None;
    a.beam_h_deg = 360.0;
    a.max_connections = 1000;
    a.position = Point::new(100.0, 80.0);
    a
}

/// Fixture simulation with the given persons, span and seed, one device per
/// person and one antenna covering the map.
pub fn toy(num_persons: u64, end_time: i64, seed: u64, pattern: MovementPattern) -> ScenarioFiles {
    let mut sim = parse_simulation_config(&fixture("simulation.xml")).unwrap();
    sim.end_time = end_time;
    sim.random_seed = seed;
    sim.movement_pattern = pattern;
    sim.prob_devices = DeviceProbabilities {
        p0: 0.0,
        p1: 1.0,
        p2: 0.0,
    };
    let mut persons = parse_persons_config(&fixture("persons.xml")).unwrap();
    persons.num_persons = num_persons;
    write_scenario(&sim, &persons, &[central_antenna()])
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// SHA-256 of every file in `dir`, by file name.
pub fn digests(dir: &Path) -> BTreeMap<String, String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                sha256_hex(&std::fs::read(&p).unwrap()),
            )
        })
        .collect()
}

/// Runs a scenario in memory and returns ground-truth rows joined to
/// subregions, as the reader would produce them.
pub fn simulate_individuals(scenario: Scenario, seed: u64) -> (Vec<IndividualRow>, Simulation) {
    let mut sim = Simulation::new(scenario, seed).unwrap();
    let mut rows = Vec::new();
    while let Some(tick) = sim.next_tick() {
        for r in tick.persons {
            rows.push(IndividualRow {
                t: r.t,
                person_id: r.person_id,
                x: r.x,
                y: r.y,
                tile_id: r.tile_id,
                device_count: r.device_ids.len() as u8,
                subregion_long: sim
                    .territory()
                    .subregion_of(Point::new(r.x, r.y))
                    .map(|s| s.long_name.clone()),
                device_ids: r.device_ids,
            });
        }
    }
    (rows, sim)
}
