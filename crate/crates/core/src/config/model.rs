use std::fmt;
use std::str::FromStr;

use super::schema::{DocumentKind, Issue, Schema, ValidationReport};
use super::xml::{self, Element};
use super::ConfigError;
use crate::geometry::{parse_wkt, to_wkt, MultiPolygon, Point, Subregion, Territory};
use crate::mobility::{ManhattanGrid, MovementPattern};
use crate::{AntennaId, TileId};

// Accessors for already-validated trees. Values that failed the rules never
// reach them, so a parse failure here is a rule file / model mismatch.
fn req<T: FromStr>(el: &Element, name: &str) -> T {
    opt(el, name).unwrap_or_else(|| panic!("validated element <{name}> missing in <{}>", el.name))
}

fn opt<T: FromStr>(el: &Element, name: &str) -> Option<T> {
    el.child_text(name).map(|t| {
        t.parse()
            .unwrap_or_else(|_| panic!("validated element <{name}> has unparsable value '{t}'"))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Technology {
    G3,
    G4,
}

impl Technology {
    /// Distance quantum of one Timing Advance step, in meters.
    pub fn ta_unit_m(self) -> f64 {
        match self {
            Technology::G3 => 554.0,
            Technology::G4 => 78.12,
        }
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Technology::G3 => "3G",
            Technology::G4 => "4G",
        })
    }
}

impl FromStr for Technology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "3G" => Ok(Technology::G3),
            "4G" => Ok(Technology::G4),
            other => Err(format!("unknown technology '{other}'")),
        }
    }
}

/// Probabilities of a person owning 0, 1 or 2 devices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceProbabilities {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

/// A mobile network operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Mno {
    pub id: u32,
    pub name: String,
    pub tech: Technology,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub start_time: i64,
    pub end_time: i64,
    pub time_increment: i64,
    pub random_seed: u64,
    pub movement_pattern: MovementPattern,
    pub prob_devices: DeviceProbabilities,
    pub mno_list: Vec<Mno>,
}

impl SimulationConfig {
    pub(crate) fn from_element(root: &Element) -> Self {
        let probs = root.child("prob_devices").expect("validated");
        let mp = root.child("movement_pattern").expect("validated");
        let movement_pattern = if let Some(g) = mp.child("manhattan_grid") {
            MovementPattern::HomeWorkManhattan(ManhattanGrid {
                x_step: req(g, "x_step"),
                y_step: req(g, "y_step"),
                x_origin: req(g, "x_origin"),
                y_origin: req(g, "y_origin"),
            })
        } else if mp.child("home_work").is_some() {
            MovementPattern::HomeWork
        } else {
            MovementPattern::RandomWalkClosedMap
        };
        SimulationConfig {
            start_time: req(root, "start_time"),
            end_time: req(root, "end_time"),
            time_increment: opt(root, "time_increment").unwrap_or(1),
            random_seed: opt(root, "random_seed").unwrap_or(0),
            movement_pattern,
            prob_devices: DeviceProbabilities {
                p0: req(probs, "p0"),
                p1: req(probs, "p1"),
                p2: req(probs, "p2"),
            },
            mno_list: root
                .children_named("mno")
                .map(|m| Mno {
                    id: req(m, "mno_id"),
                    name: req(m, "mno_name"),
                    tech: opt(m, "tech").unwrap_or(Technology::G4),
                })
                .collect(),
        }
    }

    pub fn from_xml(text: &str) -> Result<Self, ConfigError> {
        let root = validated_str(text, DocumentKind::Simulation)?;
        Ok(Self::from_element(&root))
    }

    pub fn to_element(&self) -> Element {
        let p = &self.prob_devices;
        let pattern = match &self.movement_pattern {
            MovementPattern::RandomWalkClosedMap => Element::new("random_walk_closed_map")
                .with_attribute("type", "random_walk_closed_map"),
            MovementPattern::HomeWork => {
                Element::new("home_work").with_attribute("type", "home_work")
            }
            MovementPattern::HomeWorkManhattan(g) => Element::new("manhattan_grid")
                .with_attribute("type", "home_work_manhattan")
                .with_child(Element::leaf("x_step", g.x_step))
                .with_child(Element::leaf("y_step", g.y_step))
                .with_child(Element::leaf("x_origin", g.x_origin))
                .with_child(Element::leaf("y_origin", g.y_origin)),
        };
        let mut root = Element::new("simulation")
            .with_child(Element::leaf("start_time", self.start_time))
            .with_child(Element::leaf("end_time", self.end_time))
            .with_child(Element::leaf("time_increment", self.time_increment))
            .with_child(Element::leaf("random_seed", self.random_seed))
            .with_child(
                Element::new("prob_devices")
                    .with_child(Element::leaf("p0", p.p0))
                    .with_child(Element::leaf("p1", p.p1))
                    .with_child(Element::leaf("p2", p.p2)),
            );
        for m in &self.mno_list {
            root = root.with_child(
                Element::new("mno")
                    .with_child(Element::leaf("mno_id", m.id))
                    .with_child(Element::leaf("mno_name", &m.name))
                    .with_child(Element::leaf("tech", m.tech)),
            );
        }
        root.with_child(Element::new("movement_pattern").with_child(pattern))
    }

    /// Tick timestamps from `start_time` to `end_time` inclusive. When the
    /// increment does not divide the span, the last step is shortened so the
    /// final tick lands on `end_time`.
    pub fn ticks(&self) -> Vec<i64> {
        let step = self.time_increment.max(1);
        let mut out: Vec<i64> = (self.start_time..self.end_time)
            .step_by(step as usize)
            .collect();
        out.push(self.end_time);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonsConfig {
    pub num_persons: u64,
    pub speed_walk: f64,
    pub speed_car: f64,
    pub prob_car: f64,
    pub time_at_home: f64,
    pub time_at_work: f64,
}

impl PersonsConfig {
    pub(crate) fn from_element(root: &Element) -> Self {
        PersonsConfig {
            num_persons: req(root, "num_persons"),
            speed_walk: req(root, "speed_walk"),
            speed_car: req(root, "speed_car"),
            prob_car: opt(root, "prob_car").unwrap_or(0.0),
            time_at_home: req(root, "time_at_home"),
            time_at_work: req(root, "time_at_work"),
        }
    }

    pub fn from_xml(text: &str) -> Result<Self, ConfigError> {
        let root = validated_str(text, DocumentKind::Persons)?;
        Ok(Self::from_element(&root))
    }

    pub fn to_element(&self) -> Element {
        Element::new("persons")
            .with_child(Element::leaf("num_persons", self.num_persons))
            .with_child(Element::leaf("speed_walk", self.speed_walk))
            .with_child(Element::leaf("speed_car", self.speed_car))
            .with_child(Element::leaf("prob_car", self.prob_car))
            .with_child(Element::leaf("time_at_home", self.time_at_home))
            .with_child(Element::leaf("time_at_work", self.time_at_work))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellType {
    Omnidirectional,
    Directional120,
}

impl fmt::Display for CellType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellType::Omnidirectional => "omnidirectional",
            CellType::Directional120 => "directional_120",
        })
    }
}

impl FromStr for CellType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "omnidirectional" => Ok(CellType::Omnidirectional),
            "directional_120" => Ok(CellType::Directional120),
            other => Err(format!("unknown cell type '{other}'")),
        }
    }
}

/// Horizontal beam width of a 120-degree sector.
pub const SECTOR_BEAM_WIDTH_DEG: f64 = 120.0;

/// Parameters of one radio cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaConfig {
    pub antenna_id: AntennaId,
    pub mno_id: u32,
    pub mno_name: String,
    pub max_connections: u32,
    pub power_w: f64,
    pub path_loss_exponent: f64,
    pub cell_type: CellType,
    pub min_strength_dbm: f64,
    pub min_dominance: f64,
    pub dominance_midpoint_dbm: f64,
    pub dominance_steepness: f64,
    /// Compass bearing of the sector boresight, clockwise from +y.
    /// Required for sectors, ignored for omnidirectional cells.
    pub azimuth_deg: Option<f64>,
    pub tilt_deg: f64,
    pub elevation_m: f64,
    pub beam_h_deg: f64,
    pub beam_v_deg: f64,
    pub height_m: f64,
    pub position: Point,
    /// Grid tile of `position`, filled in once the grid is known.
    pub tile_id: Option<TileId>,
}

impl AntennaConfig {
    fn from_element(a: &Element) -> Self {
        let cell_type: CellType = req(a, "cell_type");
        let default_beam = match cell_type {
            CellType::Omnidirectional => 360.0,
            CellType::Directional120 => SECTOR_BEAM_WIDTH_DEG,
        };
        AntennaConfig {
            antenna_id: req(a, "antenna_id"),
            mno_id: req(a, "mno_id"),
            mno_name: req(a, "mno_name"),
            max_connections: req(a, "max_connections"),
            power_w: req(a, "power"),
            path_loss_exponent: req(a, "path_loss_exponent"),
            cell_type,
            min_strength_dbm: req(a, "min_signal_strength"),
            min_dominance: req(a, "min_signal_dominance"),
            dominance_midpoint_dbm: req(a, "dominance_midpoint"),
            dominance_steepness: req(a, "dominance_steepness"),
            azimuth_deg: opt(a, "azimuth"),
            tilt_deg: opt(a, "tilt").unwrap_or(0.0),
            elevation_m: opt(a, "elevation").unwrap_or(0.0),
            beam_h_deg: opt(a, "beam_h").unwrap_or(default_beam),
            beam_v_deg: opt(a, "beam_v").unwrap_or(180.0),
            height_m: opt(a, "height").unwrap_or(0.0),
            position: Point::new(req(a, "x"), req(a, "y")),
            tile_id: None,
        }
    }

    /// Builds every antenna, adding checks that the rule file cannot
    /// express (a sector's beam width is fixed at 120 degrees).
    pub(crate) fn list_from_element(root: &Element) -> Result<Vec<Self>, ValidationReport> {
        let mut report = ValidationReport::default();
        let mut out = Vec::new();
        for (i, a) in root.children_named("antenna").enumerate() {
            let antenna = Self::from_element(a);
            if antenna.cell_type == CellType::Directional120
                && antenna.beam_h_deg != SECTOR_BEAM_WIDTH_DEG
            {
                report.push(Issue::new(
                    format!("/antennas/antenna[{}]/beam_h", i + 1),
                    "fixed_beam_width",
                    format!(
                        "directional_120 cells have a 120 degree beam, got {}",
                        antenna.beam_h_deg
                    ),
                ));
            }
            out.push(antenna);
        }
        if report.is_valid() {
            Ok(out)
        } else {
            Err(report)
        }
    }

    pub fn list_from_xml(text: &str) -> Result<Vec<Self>, ConfigError> {
        let root = validated_str(text, DocumentKind::Antennas)?;
        Self::list_from_element(&root).map_err(|report| ConfigError::Invalid {
            path: "<string>".into(),
            report,
        })
    }

    pub fn to_element(&self) -> Element {
        let mut el = Element::new("antenna")
            .with_child(Element::leaf("antenna_id", self.antenna_id))
            .with_child(Element::leaf("mno_id", self.mno_id))
            .with_child(Element::leaf("mno_name", &self.mno_name))
            .with_child(Element::leaf("max_connections", self.max_connections))
            .with_child(Element::leaf("power", self.power_w))
            .with_child(Element::leaf("path_loss_exponent", self.path_loss_exponent))
            .with_child(Element::leaf("cell_type", self.cell_type))
            .with_child(Element::leaf("min_signal_strength", self.min_strength_dbm))
            .with_child(Element::leaf("min_signal_dominance", self.min_dominance))
            .with_child(Element::leaf(
                "dominance_midpoint",
                self.dominance_midpoint_dbm,
            ))
            .with_child(Element::leaf(
                "dominance_steepness",
                self.dominance_steepness,
            ));
        if let Some(az) = self.azimuth_deg {
            el = el.with_child(Element::leaf("azimuth", az));
        }
        el.with_child(Element::leaf("tilt", self.tilt_deg))
            .with_child(Element::leaf("elevation", self.elevation_m))
            .with_child(Element::leaf("beam_h", self.beam_h_deg))
            .with_child(Element::leaf("beam_v", self.beam_v_deg))
            .with_child(Element::leaf("height", self.height_m))
            .with_child(Element::leaf("x", self.position.x))
            .with_child(Element::leaf("y", self.position.y))
    }

    pub fn list_to_element(antennas: &[AntennaConfig]) -> Element {
        antennas.iter().fold(Element::new("antennas"), |root, a| {
            root.with_child(a.to_element())
        })
    }
}

/// The territory description: boundary plus subdivisions and tile size.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    pub boundary: MultiPolygon,
    pub subregions: Vec<Subregion>,
    pub tile_dim_x: f64,
    pub tile_dim_y: f64,
    /// CRS code carried as metadata (0 when absent).
    pub crs: u32,
}

impl MapSpec {
    pub(crate) fn from_element(
        boundary: MultiPolygon,
        root: &Element,
    ) -> Result<Self, ValidationReport> {
        let mut report = ValidationReport::default();
        let envelope = boundary.bbox();
        let mut subregions = Vec::new();
        for (i, s) in root.children_named("subregion").enumerate() {
            let path = format!("/map/subregion[{}]/wkt", i + 1);
            let wkt: String = req(s, "wkt");
            match parse_wkt(&wkt) {
                Ok(area) => {
                    if !envelope.contains_box(&area.bbox()) {
                        report.push(Issue::new(
                            path,
                            "subregion_outside_boundary",
                            "subregion polygon extends beyond the boundary envelope",
                        ));
                    }
                    subregions.push(Subregion {
                        id: req(s, "id"),
                        long_name: req(s, "long_name"),
                        area,
                    });
                }
                Err(e) => report.push(Issue::new(path, "invalid_wkt", e.to_string())),
            }
        }
        if !report.is_valid() {
            return Err(report);
        }
        Ok(MapSpec {
            boundary,
            subregions,
            tile_dim_x: req(root, "tile_dim_x"),
            tile_dim_y: req(root, "tile_dim_y"),
            crs: opt(root, "crs").unwrap_or(0),
        })
    }

    /// Parses WKT boundary text and subdivision XML held in memory.
    pub fn from_strs(boundary_wkt: &str, subdivisions_xml: &str) -> Result<Self, ConfigError> {
        let boundary = parse_wkt(boundary_wkt).map_err(|source| ConfigError::Geometry {
            path: "<string>".into(),
            source,
        })?;
        let root = validated_str(subdivisions_xml, DocumentKind::Map)?;
        Self::from_element(boundary, &root).map_err(|report| ConfigError::Invalid {
            path: "<string>".into(),
            report,
        })
    }

    pub fn to_element(&self) -> Element {
        let mut root = Element::new("map")
            .with_child(Element::leaf("crs", self.crs))
            .with_child(Element::leaf("tile_dim_x", self.tile_dim_x))
            .with_child(Element::leaf("tile_dim_y", self.tile_dim_y));
        for s in &self.subregions {
            root = root.with_child(
                Element::new("subregion")
                    .with_child(Element::leaf("id", s.id))
                    .with_child(Element::leaf("long_name", &s.long_name))
                    .with_child(Element::leaf("wkt", to_wkt(&s.area))),
            );
        }
        root
    }

    pub fn territory(&self) -> Result<Territory, crate::geometry::GeometryError> {
        Territory::new(self.boundary.clone(), self.subregions.clone(), self.crs)
    }
}

fn validated_str(text: &str, kind: DocumentKind) -> Result<Element, ConfigError> {
    let path = std::path::PathBuf::from("<string>");
    let root = xml::parse(text).map_err(|message| ConfigError::Xml {
        path: path.clone(),
        message,
    })?;
    let report = Schema::builtin(kind).validate(&root);
    if report.is_valid() {
        Ok(root)
    } else {
        Err(ConfigError::Invalid { path, report })
    }
}
