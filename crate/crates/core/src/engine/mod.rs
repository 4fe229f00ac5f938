//! Full simulation runs: load inputs, build the grid and population, step
//! through time and write every output file.

pub mod dictionary;
mod output;

pub use dictionary::{ColumnSpec, ColumnType, Dictionary};
pub use output::{
    antenna_cells_file, antenna_info_file, signal_measure_file, FileDigest, Manifest, ManifestMno,
    ANTENNAS_FILE, GRID_FILE, MANIFEST_FILE, MAP_WKT_FILE, MAP_XML_FILE, PERSONS_FILE,
};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{
    parse_antennas_config, parse_map, parse_persons_config, parse_simulation_config, AntennaConfig,
    ConfigError, MapSpec, PersonsConfig, SimulationConfig,
};
use crate::events::{tick_events, AttachmentState, DevicePosition, EventRecord};
use crate::geometry::{GeometryError, Grid, Point, Territory};
use crate::mobility::{step, synthesize_population, MobilityError, Person};
use crate::rng::{person_rng, population_rng, SimRng};
use crate::{AntennaId, DeviceId, PersonId, TileId};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid territory: {0}")]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(
        "antenna {antenna_id} belongs to operator {mno_id}, which is not listed in the simulation"
    )]
    UnknownMno { antenna_id: AntennaId, mno_id: u32 },
    #[error("operator name '{0}' cannot be used in a file name")]
    InvalidMnoName(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Locations of the five input files of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPaths {
    pub simulation: PathBuf,
    pub persons: PathBuf,
    pub antennas: PathBuf,
    pub map_wkt: PathBuf,
    pub subdivisions: PathBuf,
}

/// Parsed and validated inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sim: SimulationConfig,
    pub persons: PersonsConfig,
    pub antennas: Vec<AntennaConfig>,
    pub map: MapSpec,
}

impl Scenario {
    pub fn load(paths: &RunPaths) -> Result<Self, EngineError> {
        Ok(Scenario {
            sim: parse_simulation_config(&paths.simulation)?,
            persons: parse_persons_config(&paths.persons)?,
            antennas: parse_antennas_config(&paths.antennas)?,
            map: parse_map(&paths.map_wkt, &paths.subdivisions)?,
        })
    }
}

/// Ground truth for one person at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonRow {
    pub t: i64,
    pub person_id: PersonId,
    /// Millimeter-rounded position, as written to `persons.csv`.
    pub x: f64,
    pub y: f64,
    pub tile_id: TileId,
    pub device_ids: Vec<DeviceId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub t: i64,
    pub persons: Vec<PersonRow>,
    pub devices: Vec<DevicePosition>,
    pub events: Vec<EventRecord>,
}

/// Rounds to the millimeter, normalizing negative zero.
pub fn round_mm(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0 + 0.0
}

/// Stepwise simulation. The first call to [`Simulation::next_tick`] reports
/// the initial positions at `start_time`; each later call advances everyone
/// by the gap to the next tick.
pub struct Simulation {
    scenario: Scenario,
    seed: u64,
    territory: Territory,
    grid: Grid,
    persons: Vec<Person>,
    rngs: Vec<SimRng>,
    state: AttachmentState,
    ticks: Vec<i64>,
    next: usize,
}

impl Simulation {
    pub fn new(mut scenario: Scenario, seed: u64) -> Result<Self, EngineError> {
        for a in &scenario.antennas {
            if !scenario.sim.mno_list.iter().any(|m| m.id == a.mno_id) {
                return Err(EngineError::UnknownMno {
                    antenna_id: a.antenna_id,
                    mno_id: a.mno_id,
                });
            }
        }
        for m in &scenario.sim.mno_list {
            if m.name.is_empty()
                || !m
                    .name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(EngineError::InvalidMnoName(m.name.clone()));
            }
        }
        scenario.sim.random_seed = seed;
        let territory = scenario.map.territory()?;
        let grid = Grid::build(&territory, scenario.map.tile_dim_x, scenario.map.tile_dim_y)?;
        for a in scenario.antennas.iter_mut() {
            a.tile_id = grid.tile_of(a.position);
        }
        let persons = synthesize_population(
            &scenario.persons,
            &scenario.sim,
            &territory,
            &mut population_rng(seed),
        )?;
        let rngs = persons
            .iter()
            .map(|p| person_rng(seed, p.person_id))
            .collect();
        let ticks = scenario.sim.ticks();
        Ok(Simulation {
            scenario,
            seed,
            territory,
            grid,
            persons,
            rngs,
            state: AttachmentState::new(),
            ticks,
            next: 0,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn territory(&self) -> &Territory {
        &self.territory
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Antennas with their grid tiles filled in.
    pub fn antennas(&self) -> &[AntennaConfig] {
        &self.scenario.antennas
    }

    pub fn persons(&self) -> &[Person] {
        &self.persons
    }

    pub fn state(&self) -> &AttachmentState {
        &self.state
    }

    pub fn ticks(&self) -> &[i64] {
        &self.ticks
    }

    fn device_positions(&self) -> Vec<DevicePosition> {
        let mnos = &self.scenario.sim.mno_list;
        let mut out = Vec::new();
        for p in &self.persons {
            let reported = Point::new(round_mm(p.position.x), round_mm(p.position.y));
            for (k, d) in p.device_ids.iter().enumerate() {
                let mno = &mnos[k % mnos.len()];
                out.push(DevicePosition {
                    device_id: *d,
                    mno_id: mno.id,
                    tech: mno.tech,
                    position: p.position,
                    reported,
                });
            }
        }
        out
    }

    pub fn next_tick(&mut self) -> Option<TickOutput> {
        let t = *self.ticks.get(self.next)?;
        if self.next > 0 {
            let dt = (t - self.ticks[self.next - 1]) as f64;
            let pattern = self.scenario.sim.movement_pattern;
            let territory = &self.territory;
            self.persons
                .par_iter_mut()
                .zip(self.rngs.par_iter_mut())
                .for_each(|(p, rng)| step(p, &pattern, territory, dt, rng));
        }
        self.next += 1;
        let devices = self.device_positions();
        let events = tick_events(
            t,
            &devices,
            &self.scenario.antennas,
            &self.grid,
            &mut self.state,
        );
        let persons = self
            .persons
            .iter()
            .map(|p| {
                let (x, y) = (round_mm(p.position.x), round_mm(p.position.y));
                PersonRow {
                    t,
                    person_id: p.person_id,
                    x,
                    y,
                    tile_id: self.grid.tile_of_clamped(Point::new(x, y)),
                    device_ids: p.device_ids.clone(),
                }
            })
            .collect();
        Some(TickOutput {
            t,
            persons,
            devices,
            events,
        })
    }
}

/// Files produced by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub dir: PathBuf,
    pub grid: PathBuf,
    pub persons: PathBuf,
    pub antennas: PathBuf,
    pub events: Vec<PathBuf>,
    pub coverage: Vec<PathBuf>,
    pub signal: Vec<PathBuf>,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

impl SimulationOutput {
    /// Every data file of the run, manifest last.
    pub fn all_files(&self) -> Vec<PathBuf> {
        let mut v = vec![
            self.grid.clone(),
            self.persons.clone(),
            self.antennas.clone(),
        ];
        v.extend(self.events.iter().cloned());
        v.extend(self.coverage.iter().cloned());
        v.extend(self.signal.iter().cloned());
        v.push(self.manifest_path.clone());
        v
    }
}

/// Runs one simulation into `output_dir`. `seed` overrides the configured
/// seed when given.
pub fn run_simulation(
    paths: &RunPaths,
    output_dir: &Path,
    seed: Option<u64>,
) -> Result<SimulationOutput, EngineError> {
    let scenario = Scenario::load(paths)?;
    let seed = seed.unwrap_or(scenario.sim.random_seed);
    output::write_run(paths, scenario, seed, output_dir)
}

/// Runs `n` replications with seeds `seed, seed + 1, ...` concurrently into
/// `output_dir/rep_001`, `rep_002`, ...
pub fn run_replications(
    paths: &RunPaths,
    output_dir: &Path,
    seed: Option<u64>,
    n: u32,
) -> Result<Vec<SimulationOutput>, EngineError> {
    let scenario = Scenario::load(paths)?;
    let base = seed.unwrap_or(scenario.sim.random_seed);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let dir = output_dir.join(format!("rep_{:03}", i + 1));
            output::write_run(paths, scenario.clone(), base.wrapping_add(i as u64), &dir)
        })
        .collect()
}
