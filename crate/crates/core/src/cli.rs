//! Command-line interface.
//!
//! Results go to standard output. Failures are written to standard error as
//! a JSON object `{"error": {"kind", "message", "report"?}}` with exit code 1;
//! malformed invocations print usage text and exit with 2.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::aggregates::{
    compute_odmatrix, compute_total, parse_keys, parse_measures, read_sim_data, AggregateError,
    ReadError, SimFiles,
};
use crate::config::{update_config, validate_config, ConfigError, OverrideTree};
use crate::engine::{run_replications, run_simulation, EngineError, RunPaths, SimulationOutput};

#[derive(Debug, Parser)]
#[command(
    name = "mndsim",
    version,
    about = "Synthetic mobile network data simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a configuration document against a rule file.
    Validate {
        #[arg(long)]
        doc: PathBuf,
        /// Rule file path or a shipped rule name such as `simulation_rules`.
        #[arg(long)]
        schema: PathBuf,
    },
    /// Write a copy of a document with overrides applied.
    UpdateConfig {
        #[arg(long)]
        doc: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `path.to.element=value` or `path.to.element@attribute=value`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// JSON object of overrides, applied before `--set`.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a simulation and write its outputs.
    Run {
        #[arg(long)]
        sim: PathBuf,
        #[arg(long)]
        persons: PathBuf,
        #[arg(long)]
        antennas: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        subdivisions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed from the simulation document.
        #[arg(long)]
        seed: Option<u64>,
        /// Independent runs with consecutive seeds, in numbered subdirectories.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        replications: u32,
    },
    /// Load a run's outputs and verify them against their dictionaries.
    ReadCheck {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        crs: Option<u32>,
    },
    /// Compute totals (or origin-destination counts with `--od`) from a run.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated measures, e.g. `individuals,devices`.
        #[arg(long)]
        what: String,
        /// Comma-separated keys, e.g. `t,Subregion_long`.
        #[arg(long)]
        by: String,
        #[arg(long)]
        od: bool,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        crs: Option<u32>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Read(#[from] ReadError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn to_json(&self) -> Value {
        let (kind, report) = match self {
            CliError::Config(e) => ("config", e.report()),
            CliError::Engine(EngineError::Config(e)) => ("config", e.report()),
            CliError::Engine(_) => ("engine", None),
            CliError::Read(_) => ("read", None),
            CliError::Aggregate(_) => ("aggregate", None),
            CliError::Other(_) => ("io", None),
        };
        let mut err = json!({"kind": kind, "message": self.to_string()});
        if let Some(r) = report {
            err["report"] = serde_json::to_value(r).expect("report serializes");
        }
        json!({ "error": err })
    }
}

fn output_summary(o: &SimulationOutput) -> Value {
    json!({
        "output_dir": o.dir,
        "seed": o.manifest.seed,
        "files": o.all_files().iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
    })
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Other(e.to_string());
    match command {
        Command::Validate { doc, schema } => {
            let report = validate_config(&doc, &schema)?;
            writeln!(
                stdout,
                "{}",
                serde_json::to_string(&report).expect("report serializes")
            )
            .map_err(io)?;
            if !report.is_valid() {
                return Err(ConfigError::Invalid { path: doc, report }.into());
            }
        }
        Command::UpdateConfig {
            doc,
            schema,
            out,
            set,
            json,
        } => {
            let mut overrides = OverrideTree::new();
            if let Some(path) = json {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Other(format!("cannot read {}: {e}", path.display())))?;
                let value: Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
                overrides = OverrideTree::from_json(&value)?;
            }
            let assigned = OverrideTree::from_assignments(&set)?;
            overrides.attributes.extend(assigned.attributes);
            overrides.children.extend(assigned.children);
            let report = update_config(&doc, &overrides, &schema, &out)?;
            writeln!(
                stdout,
                "{}",
                serde_json::to_string(&report).expect("report serializes")
            )
            .map_err(io)?;
        }
        Command::Run {
            sim,
            persons,
            antennas,
            map,
            subdivisions,
            out,
            seed,
            replications,
        } => {
            let paths = RunPaths {
                simulation: sim,
                persons,
                antennas,
                map_wkt: map,
                subdivisions,
            };
            let summary = if replications == 1 {
                output_summary(&run_simulation(&paths, &out, seed)?)
            } else {
                Value::Array(
                    run_replications(&paths, &out, seed, replications)?
                        .iter()
                        .map(output_summary)
                        .collect(),
                )
            };
            writeln!(stdout, "{summary}").map_err(io)?;
        }
        Command::ReadCheck { input, crs } => {
            let data = read_sim_data(&SimFiles::in_dir(&input), crs)?;
            let summary = json!({
                "persons": data.num_persons(),
                "ticks": data.times.len(),
                "individual_rows": data.individuals.len(),
                "events": data.events.len(),
                "antennas": data.network.len(),
                "tiles": data.grid.n_tiles(),
                "subregions": data.map.subregions().len(),
                "crs": data.crs_code,
            });
            writeln!(stdout, "{summary}").map_err(io)?;
        }
        Command::Aggregate {
            input,
            what,
            by,
            od,
            out,
            crs,
        } => {
            let data = read_sim_data(&SimFiles::in_dir(&input), crs)?;
            let what = parse_measures(&what)?;
            let by = parse_keys(&by)?;
            let domain = data.key_domain();
            let table = if od {
                match by.as_slice() {
                    [t, u] => compute_odmatrix(&data.individuals, &domain, &what, (*t, *u))?,
                    _ => {
                        return Err(AggregateError::OdKeys(
                            "--od needs exactly two keys: a time key and a unit key".into(),
                        )
                        .into())
                    }
                }
            } else {
                compute_total(&data.individuals, &domain, &what, &by)?
            };
            match out {
                Some(path) => table.write_csv(&path).map_err(|e| {
                    CliError::Other(format!("cannot write {}: {e}", path.display()))
                })?,
                None => stdout
                    .write_all(table.to_csv_string().as_bytes())
                    .map_err(io)?,
            }
        }
    }
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn invoke(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(
            std::iter::once("mndsim").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, err) = invoke(&["validate", "--bogus"]);
        assert_eq!(code, 2);
        assert!(err.contains("Usage"));
    }

    #[test]
    fn missing_document_is_json_error() {
        let (code, _, err) = invoke(&[
            "validate",
            "--doc",
            "/nonexistent.xml",
            "--schema",
            "simulation_rules",
        ]);
        assert_eq!(code, 1);
        let v: Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(v["error"]["kind"], "config");
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = invoke(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("aggregate"));
    }
}
