use std::fs;

use proptest::prelude::*;

use dob_cbf::cli::{self, csv_header, parse_scenario_str, to_toml, write_trajectory_csv, CliError, PRESETS};
use dob_cbf::sim::{run_closed_loop, trajectory_metrics, PlantConfig, Scenario};

fn preset(name: &str) -> Scenario {
    cli::load_scenario(name).unwrap().scenario
}

fn shortened(name: &str, t_final: f64) -> Scenario {
    let mut s = preset(name);
    s.sim.t_final = t_final;
    s
}

#[test]
fn record_count_is_steps_plus_one() {
    let mut s = preset("acc-dob");
    s.sim.t_final = s.sim.dt;
    let traj = run_closed_loop(&s).unwrap();
    assert_eq!(traj.records.len(), 2);
    let mut csv = Vec::new();
    write_trajectory_csv(&mut csv, &traj).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);

    let traj = run_closed_loop(&shortened("acc-dob", 0.25)).unwrap();
    assert_eq!(traj.records.len(), 251);
    assert!((traj.records.last().unwrap().t - 0.25).abs() <= 1e-12);
}

#[test]
fn runs_are_deterministic_including_noise() {
    let mut s = shortened("acc-dob", 1.0);
    s.observer.as_mut().unwrap().noise_std = 1e-3;
    s.sim.seed = 42;
    let a = run_closed_loop(&s).unwrap();
    assert_eq!(a, run_closed_loop(&s).unwrap());
    s.sim.seed = 43;
    assert_ne!(a, run_closed_loop(&s).unwrap());
}

#[test]
fn halving_the_step_barely_moves_the_minimum_barrier() {
    let coarse = shortened("acc-dob", 20.0);
    let mut fine = coarse.clone();
    fine.sim.dt = coarse.sim.dt / 2.0;
    let a = trajectory_metrics(&run_closed_loop(&coarse).unwrap()).unwrap();
    let b = trajectory_metrics(&run_closed_loop(&fine).unwrap()).unwrap();
    assert!((a.min_h - b.min_h).abs() <= 1e-3, "{} vs {}", a.min_h, b.min_h);
}

#[test]
fn observer_envelope_holds_in_closed_loop() {
    for name in ["acc-dob", "segway-dob"] {
        let traj = run_closed_loop(&preset(name)).unwrap();
        assert!(traj.completed(), "{name}");
        for r in &traj.records {
            assert!((r.b_true - r.b_hat).abs() <= r.m_b + 1e-6, "{name} at t = {}", r.t);
        }
    }
}

#[test]
fn csv_rows_match_the_header() {
    for name in ["acc-issf", "segway-dob"] {
        let traj = run_closed_loop(&shortened(name, 0.05)).unwrap();
        let mut csv = Vec::new();
        write_trajectory_csv(&mut csv, &traj).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(header, csv_header(traj.state_dim, traj.input_dim));
        let cols = header.split(',').count();
        assert!(lines.all(|l| l.split(',').count() == cols));
    }
}

#[test]
fn every_preset_round_trips_through_toml() {
    for p in PRESETS {
        let file = parse_scenario_str(p.text, p.name).unwrap();
        let text = to_toml(&file.scenario, file.output_dir.as_deref());
        let again = parse_scenario_str(&text, "echo").unwrap_or_else(|e| panic!("{}: {e}\n{text}", p.name));
        assert_eq!(again.scenario, file.scenario, "{}", p.name);
        assert_eq!(again.output_dir, file.output_dir);
    }
}

#[test]
fn run_command_writes_trajectory_report_and_echo() {
    let dir = tempfile::tempdir().unwrap();
    let mut file = cli::load_scenario("segway-dob").unwrap();
    file.scenario.sim.t_final = 0.1;
    let out = cli::run_command(&file, dir.path()).unwrap();
    assert!(out.completed);
    let csv = fs::read_to_string(&out.trajectory_csv).unwrap();
    assert_eq!(csv.lines().count(), 102);
    assert!(fs::read_to_string(&out.report_path).unwrap().contains("segway-dob"));
    let echo = fs::read_to_string(dir.path().join("segway-dob.scenario.toml")).unwrap();
    assert_eq!(parse_scenario_str(&echo, "echo").unwrap().scenario, file.scenario);
}

#[test]
fn compare_tabulates_variants_on_one_plant() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<_> = ["acc-nominal", "acc-issf", "acc-dob"]
        .iter()
        .map(|n| {
            let mut f = cli::load_scenario(n).unwrap();
            f.scenario.sim.t_final = 0.5;
            f
        })
        .collect();
    let cmp = cli::compare_command(&files, dir.path()).unwrap();
    assert_eq!(cmp.rows.len(), 3);
    assert_eq!(cmp.variants, ["nominal", "issf", "dob-robust"]);
    let csv = fs::read_to_string(&cmp.csv_path).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(cmp.table.lines().nth(2).unwrap().starts_with("acc-nominal"));
}

#[test]
fn compare_rejects_single_or_mixed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let acc = cli::load_scenario("acc-dob").unwrap();
    let seg = cli::load_scenario("segway-dob").unwrap();
    assert!(matches!(cli::compare_command(std::slice::from_ref(&acc), dir.path()), Err(CliError::Usage(_))));
    assert!(matches!(cli::compare_command(&[acc, seg], dir.path()), Err(CliError::Usage(_))));
}

#[test]
fn unwritable_output_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let mut file = cli::load_scenario("acc-dob").unwrap();
    file.scenario.sim.t_final = 0.01;
    assert!(matches!(cli::run_command(&file, &blocker.join("sub")), Err(CliError::Io { .. })));
}

#[test]
fn config_errors_carry_line_numbers() {
    let text = "[plant]\nmodel = \"acc\"\n\n[controller]\nvariant = \"dob-robust\"\n\n[sim]\ndt = 0.001\nt_final = 1.0\n";
    let err = parse_scenario_str(text, "bad.toml").unwrap_err().to_string();
    assert!(err.contains("bad.toml:"), "{err}");
    assert!(err.contains("observer"), "{err}");
}

#[test]
fn scenario_files_load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mine.toml");
    fs::write(&path, cli::find_preset("acc-issf").unwrap().text).unwrap();
    let file = cli::load_scenario(path.to_str().unwrap()).unwrap();
    assert!(matches!(file.scenario.plant, PlantConfig::Acc(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn short_runs_record_every_step(steps in 1usize..200, dt_exp in 2u32..4) {
        let dt = 10f64.powi(-(dt_exp as i32));
        let mut s = preset("acc-dob");
        s.sim.dt = dt;
        s.sim.t_final = steps as f64 * dt;
        let traj = run_closed_loop(&s).unwrap();
        prop_assert_eq!(traj.records.len(), steps + 1);
        for (i, r) in traj.records.iter().enumerate() {
            prop_assert!((r.t - i as f64 * dt).abs() <= 1e-9);
        }
    }
}
