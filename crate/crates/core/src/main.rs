//! Command-line scenario runner.
//!
//! Usage:
//!   dicke-sim run <config>       execute a scenario, write CSV artifacts
//!   dicke-sim validate <config>  parse and check a config, write nothing
//!   dicke-sim ledger <config>    print the approximation-validity table
//!
//! Exit codes: 0 success, 2 config error, 3 numerical-invariant abort.

use std::path::Path;
use std::process::ExitCode;

use dicke_sim::cavity::derive;
use dicke_sim::config::parse_config;
use dicke_sim::scenario::{format_ledger_table, run_scenario, ScenarioError};

const USAGE: &str = "usage: dicke-sim <run|validate|ledger> <config-file>";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 3 {
        eprintln!("{USAGE}");
        return ExitCode::from(2);
    }
    let command = args[1].as_str();
    let path = Path::new(&args[2]);

    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error in {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };

    match command {
        "validate" => {
            println!("ok: {} scenario `{}`", path.display(), config.scenario.name());
            ExitCode::SUCCESS
        }
        "ledger" => {
            let inputs = match config.lab_inputs() {
                Ok(i) => i,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            };
            match derive(&inputs) {
                Ok(params) => {
                    print!("{}", format_ledger_table(&params));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("numerical error: {e}");
                    ExitCode::from(3)
                }
            }
        }
        "run" => match run_scenario(&config) {
            Ok(files) => {
                for f in files {
                    println!("wrote {}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(ScenarioError::Config(e)) => {
                eprintln!("config error: {e}");
                ExitCode::from(2)
            }
            Err(ScenarioError::Numerics(e)) => {
                eprintln!("numerical error: {e}");
                ExitCode::from(3)
            }
            Err(ScenarioError::Io(e)) => {
                eprintln!("io error: {e}");
                ExitCode::FAILURE
            }
        },
        other => {
            eprintln!("unknown command `{other}`\n{USAGE}");
            ExitCode::from(2)
        }
    }
}
