//! Mobile network data simulator and ground-truth analysis toolkit.
//!
//! The crate is organised along the processing pipeline:
//!
//! - [`config`] parses and validates the XML input documents against
//!   declarative rule files and applies programmatic overrides.
//! - [`geometry`] holds the territory, its subregions and the analysis grid.
//! - [`radio`] evaluates signal strength, dominance and coverage.
//! - [`mobility`] synthesizes persons and moves them each tick.
//! - [`events`] attaches devices to antennas and emits network events.
//! - [`engine`] runs a full simulation and writes every output file.
//! - [`aggregates`] reads the outputs back and computes population totals
//!   and origin-destination matrices.
//! - [`cli`] is the command line front end.

pub mod aggregates;
pub mod cli;
pub mod config;
pub mod engine;
pub mod events;
pub mod geometry;
pub mod ids;
pub mod mobility;
pub mod radio;
pub mod rng;

pub use ids::{AntennaId, DeviceId, PersonId, TileId};
