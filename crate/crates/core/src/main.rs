use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dob_cbf::cli::{self, CliError, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "dob-cbf", version, about = "Simulate safety-critical controllers with disturbance observers")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file or preset and write its trajectory and report.
    Run {
        config: String,
        /// Output directory (overrides the scenario's `[output] dir`).
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
    /// Run several scenarios on the same plant and tabulate them.
    Compare {
        #[arg(required = true, num_args = 1..)]
        configs: Vec<String>,
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
    /// Embedded presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List preset names.
    List,
    /// Print a preset's scenario file.
    Show { name: String },
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(args: Args) -> Result<ExitCode, CliError> {
    match args.command {
        Command::Run { config, out } => {
            let file = cli::load_scenario(&config)?;
            let dir = cli::resolve_out_dir(out.as_deref(), None, file.output_dir.as_deref());
            let outcome = cli::run_command(&file, &dir)?;
            print!("{}", std::fs::read_to_string(&outcome.report_path).unwrap_or_default());
            println!("trajectory              {}", outcome.trajectory_csv.display());
            Ok(if outcome.completed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Compare { configs, out } => {
            let files = configs.iter().map(|c| cli::load_scenario(c)).collect::<Result<Vec<_>, _>>()?;
            let dir = cli::resolve_out_dir(out.as_deref(), None, files[0].output_dir.as_deref());
            let cmp = cli::compare_command(&files, &dir)?;
            print!("{}", cmp.table);
            println!("\nwritten to {}", cmp.csv_path.display());
            let all_done = cmp.rows.iter().all(|r| r.completed);
            Ok(if all_done { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Presets { action: PresetAction::List } => {
            for p in cli::PRESETS {
                println!("{:<16} {}", p.name, p.description);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets { action: PresetAction::Show { name } } => match cli::find_preset(&name) {
            Some(p) => {
                print!("{}", p.text);
                Ok(ExitCode::SUCCESS)
            }
            None => Err(CliError::Usage(format!("no preset named `{name}`"))),
        },
    }
}
