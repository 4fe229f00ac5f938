//! Input documents: parsing, rule-based validation and programmatic updates.
//!
//! Four documents drive a run: `simulation.xml`, `persons.xml`,
//! `antennas.xml`, and the map (`map.wkt` boundary plus `map.xml`
//! subdivisions). Each XML document is checked against a rule file before
//! it is turned into a typed configuration.

mod model;
mod overrides;
pub mod schema;
pub mod xml;

pub use model::{
    AntennaConfig, CellType, DeviceProbabilities, MapSpec, Mno, PersonsConfig, SimulationConfig,
    Technology,
};
pub use overrides::{update_config, update_element, OverrideTree, OverrideValue};
pub use schema::{DocumentKind, Issue, Schema, ValidationReport};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed XML in {path}: {message}")]
    Xml { path: PathBuf, message: String },
    #[error("invalid rule file {path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path} failed validation: {report}")]
    Invalid {
        path: PathBuf,
        report: ValidationReport,
    },
    #[error("invalid geometry in {path}: {source}")]
    Geometry {
        path: PathBuf,
        #[source]
        source: GeometryError,
    },
    #[error("invalid override: {0}")]
    Override(String),
}

impl ConfigError {
    /// The validation report, when this error is a schema failure.
    pub fn report(&self) -> Option<&ValidationReport> {
        match self {
            ConfigError::Invalid { report, .. } => Some(report),
            _ => None,
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn parse_xml(path: &Path, text: &str) -> Result<xml::Element, ConfigError> {
    xml::parse(text).map_err(|message| ConfigError::Xml {
        path: path.to_path_buf(),
        message,
    })
}

/// Validates the document at `document_path` against the rule file at
/// `schema_path`. Shipped rule names such as `simulation_rules` are accepted
/// in place of a path.
pub fn validate_config(
    document_path: &Path,
    schema_path: &Path,
) -> Result<ValidationReport, ConfigError> {
    let schema = Schema::resolve(schema_path)?;
    let text = read_text(document_path)?;
    let root = parse_xml(document_path, &text)?;
    Ok(schema.validate(&root))
}

/// Reads, parses and validates a document, returning its root element.
pub(crate) fn load_valid(path: &Path, schema: &Schema) -> Result<xml::Element, ConfigError> {
    let text = read_text(path)?;
    let root = parse_xml(path, &text)?;
    let report = schema.validate(&root);
    if report.is_valid() {
        Ok(root)
    } else {
        Err(ConfigError::Invalid {
            path: path.to_path_buf(),
            report,
        })
    }
}

pub fn parse_simulation_config(path: &Path) -> Result<SimulationConfig, ConfigError> {
    let root = load_valid(path, &Schema::builtin(DocumentKind::Simulation))?;
    Ok(SimulationConfig::from_element(&root))
}

pub fn parse_persons_config(path: &Path) -> Result<PersonsConfig, ConfigError> {
    let root = load_valid(path, &Schema::builtin(DocumentKind::Persons))?;
    Ok(PersonsConfig::from_element(&root))
}

pub fn parse_antennas_config(path: &Path) -> Result<Vec<AntennaConfig>, ConfigError> {
    let root = load_valid(path, &Schema::builtin(DocumentKind::Antennas))?;
    AntennaConfig::list_from_element(&root).map_err(|report| ConfigError::Invalid {
        path: path.to_path_buf(),
        report,
    })
}

/// Reads the boundary WKT and the subdivisions document.
pub fn parse_map(wkt_path: &Path, subdivisions_path: &Path) -> Result<MapSpec, ConfigError> {
    let boundary = crate::geometry::parse_wkt(&read_text(wkt_path)?).map_err(|source| {
        ConfigError::Geometry {
            path: wkt_path.to_path_buf(),
            source,
        }
    })?;
    let root = load_valid(subdivisions_path, &Schema::builtin(DocumentKind::Map))?;
    MapSpec::from_element(boundary, &root).map_err(|report| ConfigError::Invalid {
        path: subdivisions_path.to_path_buf(),
        report,
    })
}
