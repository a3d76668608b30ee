//! `acim` binary: experiment front end for the invariant-density library.
//!
//! A run is described by one JSON config (see `ExperimentConfig`), optionally
//! patched by dotted-path flags, e.g.
//!
//! ```text
//! acim sweep --config experiment.json --solver.tol 1e-10 --n 1024
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 failed map validation.

mod commands;
mod config;
mod output;

use acim_core::Error;
use config::{apply_override, ExperimentConfig};

const USAGE: &str = "\
usage: acim <subcommand> [--config <file.json>] [--<key.path> <value>]...

subcommands:
  density    solve for the invariant density, write density.csv
  sweep      noise-level stability sweep, write sweep.csv and sweep.json
  osc        oscillation profile of a density CSV (config key density_file)
  ly         fit the oscillation contraction envelope, write ly.json
  spectrum   second-eigenvalue report, write spectrum.json
  simulate   Monte Carlo histogram of the noisy dynamics, write histogram.csv
  check      validate the map and print the expansion constants

Flags after the subcommand patch the config document: `--n 1024` sets n,
`--map.name sine --map.eta 0.05` selects a map, `--delta_list [0.1,0.05]`
replaces a list. Values parse as JSON, falling back to strings.

Output files go to the config's output_dir, else $ACIM_OUTPUT_DIR, else the
working directory, and all embed a SHA-256 hash of the resolved config.

exit codes: 0 success, 2 config error, 3 numerical error, 4 failed validation";

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Structural(_) | Error::Parameter(_) | Error::Dimension(_) => 2,
        Error::Validation(_) => 4,
        _ => 3,
    }
}

fn load_config(args: &[String]) -> Result<ExperimentConfig, String> {
    let mut doc = serde_json::Value::Object(serde_json::Map::new());
    let mut i = 0;
    while i < args.len() {
        let flag = &args[i];
        let key = flag
            .strip_prefix("--")
            .ok_or_else(|| format!("unexpected argument '{flag}'"))?;
        let value = args
            .get(i + 1)
            .ok_or_else(|| format!("flag '{flag}' needs a value"))?;
        if key == "config" {
            let text = std::fs::read_to_string(value)
                .map_err(|e| format!("cannot read config '{value}': {e}"))?;
            let base: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| format!("config '{value}' is not valid JSON: {e}"))?;
            if !base.is_object() {
                return Err(format!("config '{value}' must be a JSON object"));
            }
            // The file provides defaults; flags already applied stay on top.
            merge_under(&mut doc, base);
        } else {
            apply_override(&mut doc, key, value).map_err(|e| e.to_string())?;
        }
        i += 2;
    }
    let cfg: ExperimentConfig =
        serde_json::from_value(doc).map_err(|e| format!("invalid config: {e}"))?;
    Ok(cfg)
}

/// Merges `base` under `doc`: keys already present in `doc` win, recursively
/// for objects. Lets `--config` appear anywhere among the flags with the same
/// meaning: the file is the base layer, flags are patches.
fn merge_under(doc: &mut serde_json::Value, base: serde_json::Value) {
    let serde_json::Value::Object(base_map) = base else { return };
    let Some(doc_map) = doc.as_object_mut() else { return };
    for (key, base_val) in base_map {
        match doc_map.get_mut(&key) {
            None => {
                doc_map.insert(key, base_val);
            }
            Some(existing) if existing.is_object() && base_val.is_object() => {
                merge_under(existing, base_val);
            }
            Some(_) => {}
        }
    }
}

pub fn run(args: &[String]) -> i32 {
    let Some(subcommand) = args.first() else {
        eprintln!("{USAGE}");
        return 2;
    };
    if subcommand == "help" || subcommand == "--help" || subcommand == "-h" {
        println!("{USAGE}");
        return 0;
    }
    const SUBCOMMANDS: [&str; 7] =
        ["density", "sweep", "osc", "ly", "spectrum", "simulate", "check"];
    if !SUBCOMMANDS.contains(&subcommand.as_str()) {
        eprintln!("acim: unknown subcommand '{subcommand}'\n{USAGE}");
        return 2;
    }
    let cfg = match load_config(&args[1..]) {
        Ok(cfg) => cfg,
        Err(message) => {
            eprintln!("acim: {message}");
            return 2;
        }
    };
    if let Err(err) = cfg.validate() {
        eprintln!("acim: {err}");
        return exit_code(&err);
    }
    let hash = cfg.sha256();
    let dir = output::output_dir(cfg.output_dir.as_deref());
    match commands::run_subcommand(subcommand, &cfg, &dir, &hash) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("acim: {err}");
            exit_code(&err)
        }
    }
}
