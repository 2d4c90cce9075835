//! Command-line front end: scenario files, presets, CSV output and the
//! `run` / `compare` commands.

pub mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use thiserror::Error;

use crate::sim::{run_closed_loop, trajectory_metrics, SafetyReport, Scenario, SimError, Trajectory};

pub use config::{parse_scenario, parse_scenario_str, to_toml, ConfigError, Diagnostic, ScenarioFile};
pub use output::{comparison_csv, comparison_table, csv_header, write_trajectory_csv};

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "DOB_CBF_OUT";

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub text: &'static str,
}

macro_rules! preset {
    ($name:literal, $description:literal) => {
        Preset {
            name: $name,
            description: $description,
            text: include_str!(concat!("../../../../presets/", $name, ".toml")),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("acc-nominal", "cruise control, nominal CLF-CBF-QP under a sinusoidal input disturbance"),
    preset!("acc-issf", "cruise control, input-to-state safe CBF with ε = 2.62e6"),
    preset!("acc-dob", "cruise control, observer-based robust CLF-CBF-QP (k_b = 100)"),
    preset!("segway-nominal", "Segway on a 20° incline, nominal exponential CBF with LQR baseline"),
    preset!("segway-dob", "Segway on a 20° incline, observer-based robust exponential CBF"),
];

pub fn find_preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{name}: {source}")]
    Sim { name: String, source: SimError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Loads a scenario from a file path, or from an embedded preset when no
/// such file exists and the argument names one.
pub fn load_scenario(arg: &str) -> Result<ScenarioFile, CliError> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(parse_scenario(path)?);
    }
    match find_preset(arg) {
        Some(p) => Ok(parse_scenario_str(p.text, &format!("preset {}", p.name))?),
        None => {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            Err(CliError::Usage(format!("`{arg}` is neither a file nor a preset ({})", names.join(", "))))
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub name: String,
    pub report: SafetyReport,
    pub completed: bool,
    pub trajectory_csv: PathBuf,
    pub report_path: PathBuf,
}

fn simulate(scenario: &Scenario) -> Result<(Trajectory, SafetyReport), CliError> {
    let sim_err = |source| CliError::Sim { name: scenario.name.clone(), source };
    let trajectory = run_closed_loop(scenario).map_err(sim_err)?;
    let report = trajectory_metrics(&trajectory)
        .ok_or_else(|| CliError::Usage(format!("{}: empty trajectory", scenario.name)))?;
    Ok((trajectory, report))
}

fn write_run(
    file: &ScenarioFile,
    trajectory: &Trajectory,
    report: &SafetyReport,
    out_dir: &Path,
    stem: &str,
) -> Result<RunOutcome, CliError> {
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let mut csv = Vec::new();
    write_trajectory_csv(&mut csv, trajectory).map_err(io_err(&csv_path))?;
    fs::write(&csv_path, csv).map_err(io_err(&csv_path))?;

    let report_path = out_dir.join(format!("{stem}.report.txt"));
    let mut text = format!(
        "scenario                {}\nvariant                 {}\n{report}\n",
        file.scenario.name,
        file.scenario.controller.variant.as_str()
    );
    if let crate::sim::Termination::Aborted { t, reason } = &trajectory.termination {
        text.push_str(&format!("aborted at t = {t}: {reason}\n"));
    }
    fs::write(&report_path, text).map_err(io_err(&report_path))?;

    let echo = out_dir.join(format!("{stem}.scenario.toml"));
    fs::write(&echo, to_toml(&file.scenario, file.output_dir.as_deref())).map_err(io_err(&echo))?;

    Ok(RunOutcome {
        name: file.scenario.name.clone(),
        report: report.clone(),
        completed: trajectory.completed(),
        trajectory_csv: csv_path,
        report_path,
    })
}

/// Runs one scenario and writes `<name>.csv`, `<name>.report.txt` and the
/// resolved `<name>.scenario.toml` into `out_dir`.
pub fn run_command(file: &ScenarioFile, out_dir: &Path) -> Result<RunOutcome, CliError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let (trajectory, report) = simulate(&file.scenario)?;
    write_run(file, &trajectory, &report, out_dir, &file.scenario.name)
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub rows: Vec<RunOutcome>,
    pub variants: Vec<String>,
    pub table: String,
    pub csv_path: PathBuf,
}

/// Runs scenarios that share one plant in parallel and tabulates them.
pub fn compare_command(files: &[ScenarioFile], out_dir: &Path) -> Result<Comparison, CliError> {
    if files.len() < 2 {
        return Err(CliError::Usage(
            "compare needs at least two scenarios, e.g. `compare acc-nominal acc-issf acc-dob`".into(),
        ));
    }
    let plant = &files[0].scenario.plant;
    for f in &files[1..] {
        if &f.scenario.plant != plant {
            return Err(CliError::Usage(format!(
                "scenario `{}` uses a different plant than `{}`; compare only runs scenarios that share one",
                f.scenario.name, files[0].scenario.name
            )));
        }
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let results: Vec<Result<(Trajectory, SafetyReport), CliError>> = thread::scope(|s| {
        let handles: Vec<_> = files.iter().map(|f| s.spawn(move || simulate(&f.scenario))).collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });

    let mut rows = Vec::with_capacity(files.len());
    let mut used = Vec::<String>::new();
    for (file, result) in files.iter().zip(results) {
        let (trajectory, report) = result?;
        let mut stem = file.scenario.name.clone();
        let mut k = 2;
        while used.contains(&stem) {
            stem = format!("{}-{k}", file.scenario.name);
            k += 1;
        }
        used.push(stem.clone());
        rows.push(write_run(file, &trajectory, &report, out_dir, &stem)?);
    }

    let variants: Vec<String> = files.iter().map(|f| f.scenario.controller.variant.as_str().to_string()).collect();
    let table = comparison_table(&rows, &variants);
    let csv_path = out_dir.join("comparison.csv");
    fs::write(&csv_path, comparison_csv(&rows, &variants)).map_err(io_err(&csv_path))?;
    let table_path = out_dir.join("comparison.txt");
    fs::write(&table_path, &table).map_err(io_err(&table_path))?;
    Ok(Comparison { rows, variants, table, csv_path })
}

/// Output directory precedence: command-line flag, then the environment
/// variable, then `[output] dir`, then `./out`.
pub fn resolve_out_dir(flag: Option<&Path>, env: Option<&str>, file: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| file.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for p in PRESETS {
            let f = parse_scenario_str(p.text, p.name).unwrap_or_else(|e| panic!("{e}"));
            assert_eq!(f.scenario.name, p.name);
        }
    }

    #[test]
    fn out_dir_precedence() {
        let flag = Path::new("a");
        let file = Path::new("c");
        assert_eq!(resolve_out_dir(Some(flag), Some("b"), Some(file)), PathBuf::from("a"));
        assert_eq!(resolve_out_dir(None, Some("b"), Some(file)), PathBuf::from("b"));
        assert_eq!(resolve_out_dir(None, Some(""), Some(file)), PathBuf::from("c"));
        assert_eq!(resolve_out_dir(None, None, None), PathBuf::from("out"));
    }

    #[test]
    fn unknown_argument_is_usage_error() {
        assert!(matches!(load_scenario("no-such-preset"), Err(CliError::Usage(_))));
    }
}
