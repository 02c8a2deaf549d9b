//! Command-line orchestration: `run <config>` and `list-experiments`.
//!
//! Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 configuration
//! error, 3 runtime error (including rate-cap violations).

mod config;
mod experiments;

pub use config::{apply_override, resolve, ConfigError, Experiment, Resolved, RunConfig};
pub use experiments::{alpha_check, run_experiment, Outcome, Verdict};

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::error::SimError;

#[derive(Parser, Debug)]
#[command(name = "kgsim", version, about = "Continuum hop and birth-death dynamics experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Override a config value, e.g. `--set model.z=0.1`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available experiments.
    ListExperiments {
        #[arg(long)]
        json: bool,
    },
}

pub const EXIT_VERDICT: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

pub fn catalog() -> serde_json::Value {
    let items: Vec<_> = Experiment::ALL
        .iter()
        .map(|e| json!({ "name": e.name(), "description": e.description(), "required_blocks": e.required_blocks() }))
        .collect();
    json!(items)
}

fn list(json_out: bool) -> String {
    if json_out {
        return serde_json::to_string_pretty(&catalog()).expect("catalog serializes");
    }
    let mut s = String::new();
    for e in Experiment::ALL {
        s.push_str(&format!("{:<14} {}  [blocks: {}]\n", e.name(), e.description(), e.required_blocks().join(", ")));
    }
    s
}

fn write_json(path: &Path, v: &serde_json::Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(v).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text)
}

/// Runs a config file and returns the process exit code.
pub fn run_config(path: &Path, overrides: &[String], out: Option<&Path>) -> u8 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("config error: cannot read {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    let mut resolved = match resolve(&text, overrides) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(o) = out {
        resolved.config.output.dir = o.to_string_lossy().into_owned();
    }
    let dir = PathBuf::from(&resolved.config.output.dir);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("runtime error: cannot create {}: {e}", dir.display());
        return EXIT_RUNTIME;
    }
    let started = Instant::now();
    let outcome = match run_experiment(&resolved, &dir) {
        Ok(o) => o,
        Err(e @ SimError::Model(_)) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("runtime error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let enabled = resolved.config.verdict.enabled;
    let passed = !enabled || outcome.verdicts.iter().all(|v| v.passed);
    let report = json!({
        "experiment": resolved.experiment.name(),
        "config": resolved.echo(),
        "config_hash": resolved.hash(),
        "model_hash": resolved.model.hash(),
        "results": outcome.results,
        "verdicts": outcome.verdicts,
        "verdicts_enabled": enabled,
        "passed": passed,
    });
    let telemetry = json!({
        "wall_seconds": started.elapsed().as_secs_f64(),
        "events": outcome.events,
    });
    if let Err(e) = write_json(&dir.join("report.json"), &report).and_then(|_| write_json(&dir.join("telemetry.json"), &telemetry)) {
        eprintln!("runtime error: {e}");
        return EXIT_RUNTIME;
    }
    for v in &outcome.verdicts {
        println!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    println!("report written to {}", dir.join("report.json").display());
    if passed { 0 } else { EXIT_VERDICT }
}

pub fn main_with(cli: Cli) -> ExitCode {
    match cli.command {
        Command::ListExperiments { json } => {
            print!("{}", list(json));
            if json {
                println!();
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, set, out } => ExitCode::from(run_config(&config, &set, out.as_deref())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_seven_entries() {
        assert_eq!(catalog().as_array().unwrap().len(), 7);
        assert_eq!(list(false).lines().count(), 7);
    }
}
