//! Self-describing column dictionaries written next to every CSV output.

use std::fmt;
use std::str::FromStr;

use crate::config::xml::{self, Element};
use crate::events::EventCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Integer,
    Decimal,
    String,
}

impl ColumnType {
    /// Whether `value` is a valid cell of this type.
    pub fn accepts(self, value: &str) -> bool {
        match self {
            ColumnType::Integer => value.parse::<i64>().is_ok() || value.parse::<u64>().is_ok(),
            ColumnType::Decimal => value.parse::<f64>().is_ok_and(f64::is_finite),
            ColumnType::String => true,
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Integer => "integer",
            ColumnType::Decimal => "decimal",
            ColumnType::String => "string",
        })
    }
}

impl FromStr for ColumnType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "integer" => Ok(ColumnType::Integer),
            "decimal" => Ok(ColumnType::Decimal),
            "string" => Ok(ColumnType::String),
            other => Err(format!("unknown column type '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnType,
    /// Empty cells allowed.
    pub nullable: bool,
    pub description: String,
}

/// Named code values of one column.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSpec {
    pub column: String,
    pub value: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    /// File name, or pattern with `{mno}` for per-operator files.
    pub file: String,
    pub columns: Vec<ColumnSpec>,
    pub codes: Vec<CodeSpec>,
}

fn col(name: &str, kind: ColumnType, description: &str) -> ColumnSpec {
    ColumnSpec {
        name: name.into(),
        kind,
        nullable: false,
        description: description.into(),
    }
}

fn nullable(mut c: ColumnSpec) -> ColumnSpec {
    c.nullable = true;
    c
}

use ColumnType::{Decimal, Integer, String as Text};

impl Dictionary {
    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn grid() -> Self {
        Dictionary {
            file: "grid.csv".into(),
            columns: vec![
                col("x_origin", Decimal, "x of the grid's lower-left corner, m"),
                col("y_origin", Decimal, "y of the grid's lower-left corner, m"),
                col("tile_dim_x", Decimal, "tile width, m"),
                col("tile_dim_y", Decimal, "tile height, m"),
                col("n_cols", Integer, "number of tile columns"),
                col("n_rows", Integer, "number of tile rows"),
            ],
            codes: vec![],
        }
    }

    pub fn persons() -> Self {
        Dictionary {
            file: "persons.csv".into(),
            columns: vec![
                col("t", Integer, "tick time, s"),
                col("person_id", Integer, "person identifier"),
                col("x", Decimal, "true x position, m, millimeter precision"),
                col("y", Decimal, "true y position, m, millimeter precision"),
                col(
                    "tile_id",
                    Integer,
                    "tile containing (x, y), row-major from the lower-left",
                ),
                nullable(col("device_id_1", Integer, "first device, empty if none")),
                nullable(col("device_id_2", Integer, "second device, empty if none")),
            ],
            codes: vec![],
        }
    }

    pub fn antennas() -> Self {
        Dictionary {
            file: "antennas.csv".into(),
            columns: vec![
                col("antenna_id", Integer, "antenna identifier"),
                col("mno_id", Integer, "operator identifier"),
                col("mno_name", Text, "operator name"),
                col("max_connections", Integer, "connection capacity"),
                col("power", Decimal, "emitted power, W"),
                col("path_loss_exponent", Decimal, "path-loss exponent"),
                col("cell_type", Text, "omnidirectional or directional_120"),
                col(
                    "min_signal_strength",
                    Decimal,
                    "connection strength threshold, dBm",
                ),
                col(
                    "min_signal_dominance",
                    Decimal,
                    "connection dominance threshold",
                ),
                col(
                    "dominance_midpoint",
                    Decimal,
                    "strength at dominance 0.5, dBm",
                ),
                col("dominance_steepness", Decimal, "logistic steepness, 1/dB"),
                nullable(col(
                    "azimuth",
                    Decimal,
                    "sector boresight, degrees clockwise from north",
                )),
                col("tilt", Decimal, "tilt, degrees"),
                col("elevation", Decimal, "ground elevation, m"),
                col("beam_h", Decimal, "horizontal beam width, degrees"),
                col("beam_v", Decimal, "vertical beam width, degrees"),
                col("height", Decimal, "mast height, m"),
                col("x", Decimal, "x position, m"),
                col("y", Decimal, "y position, m"),
                nullable(col(
                    "tile_id",
                    Integer,
                    "tile of the antenna, empty outside the grid",
                )),
            ],
            codes: vec![],
        }
    }

    pub fn events() -> Self {
        Dictionary {
            file: "AntennaInfo_MNO_{mno}.csv".into(),
            columns: vec![
                col("t", Integer, "tick time, s"),
                col(
                    "antenna_id",
                    Integer,
                    "serving antenna (last antenna for detach)",
                ),
                col("event_code", Integer, "event type, see codes"),
                col("device_id", Integer, "device identifier"),
                col("x", Decimal, "true device x, m, millimeter precision"),
                col("y", Decimal, "true device y, m, millimeter precision"),
                col("tile_id", Integer, "tile containing (x, y)"),
                col("tech", Text, "network technology"),
                col("TA", Integer, "timing advance, floor(distance / unit)"),
            ],
            codes: EventCode::ALL
                .iter()
                .map(|c| CodeSpec {
                    column: "event_code".into(),
                    value: c.code().to_string(),
                    name: c.name().into(),
                })
                .collect(),
        }
    }

    pub fn coverage() -> Self {
        Dictionary {
            file: "AntennaCells_{mno}.csv".into(),
            columns: vec![
                col("antenna_id", Integer, "antenna identifier"),
                col(
                    "tile_id",
                    Integer,
                    "tile where both connection thresholds hold",
                ),
            ],
            codes: vec![],
        }
    }

    pub fn signal() -> Self {
        Dictionary {
            file: "SignalMeasure_{mno}.csv".into(),
            columns: vec![
                col("antenna_id", Integer, "antenna identifier"),
                col("tile_id", Integer, "tile, evaluated at its center"),
                col("strength", Decimal, "signal strength, dBm"),
                col("dominance", Decimal, "signal dominance in [0, 1]"),
            ],
            codes: vec![],
        }
    }

    /// Dictionary file names paired with their contents.
    pub fn all() -> Vec<(&'static str, Dictionary)> {
        vec![
            ("grid_dict.xml", Self::grid()),
            ("persons_dict.xml", Self::persons()),
            ("antennas_dict.xml", Self::antennas()),
            ("events_dict.xml", Self::events()),
            ("coverage_dict.xml", Self::coverage()),
            ("signal_dict.xml", Self::signal()),
        ]
    }

    pub fn to_element(&self) -> Element {
        let mut root = Element::new("dictionary")
            .with_attribute("file", self.file.clone())
            .with_attribute("separator", ",");
        for c in &self.columns {
            root = root.with_child(
                Element::new("column")
                    .with_attribute("name", c.name.clone())
                    .with_attribute("type", c.kind.to_string())
                    .with_attribute("nullable", c.nullable.to_string())
                    .with_attribute("description", c.description.clone()),
            );
        }
        for c in &self.codes {
            root = root.with_child(
                Element::new("code")
                    .with_attribute("column", c.column.clone())
                    .with_attribute("value", c.value.clone())
                    .with_attribute("name", c.name.clone()),
            );
        }
        root
    }

    pub fn from_xml(text: &str) -> Result<Self, String> {
        let root = xml::parse(text)?;
        if root.name != "dictionary" {
            return Err(format!("expected <dictionary>, found <{}>", root.name));
        }
        let attr = |el: &Element, name: &str| {
            el.attribute(name)
                .map(str::to_string)
                .ok_or_else(|| format!("<{}> lacks attribute '{name}'", el.name))
        };
        let mut columns = Vec::new();
        for c in root.children_named("column") {
            columns.push(ColumnSpec {
                name: attr(c, "name")?,
                kind: attr(c, "type")?.parse()?,
                nullable: attr(c, "nullable")? == "true",
                description: c.attribute("description").unwrap_or_default().to_string(),
            });
        }
        let mut codes = Vec::new();
        for c in root.children_named("code") {
            codes.push(CodeSpec {
                column: attr(c, "column")?,
                value: attr(c, "value")?,
                name: attr(c, "name")?,
            });
        }
        Ok(Dictionary {
            file: attr(&root, "file")?,
            columns,
            codes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dictionaries_round_trip() {
        for (_, d) in Dictionary::all() {
            let back = Dictionary::from_xml(&d.to_element().to_xml_string()).unwrap();
            assert_eq!(back, d);
        }
    }

    #[test]
    fn event_codes_documented() {
        let d = Dictionary::events();
        let names: Vec<&str> = d.codes.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["attach", "update", "detach", "handover"]);
    }

    #[test]
    fn type_checks() {
        assert!(ColumnType::Integer.accepts("-3"));
        assert!(!ColumnType::Integer.accepts("3.5"));
        assert!(ColumnType::Decimal.accepts("3.5"));
        assert!(!ColumnType::Decimal.accepts("abc"));
        assert!(ColumnType::String.accepts(""));
    }
}
