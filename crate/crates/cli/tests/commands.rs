use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use eldercare_cli::RunReport;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn eldercare(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eldercare"))
        .current_dir(dir)
        .env_remove("ELDERCARE_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn simulate_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = eldercare(dir.path(), &["--out-dir", "out", "simulate", "--preset", "rural"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let report = RunReport::load(&out.join("rural_report.toml")).unwrap();
    for f in [report.trajectory_file.as_ref().unwrap(), report.alerts_file.as_ref().unwrap()] {
        assert!(out.join(f).exists());
    }
    let traj = fs::read_to_string(out.join("rural_trajectory.csv")).unwrap();
    assert!(traj.starts_with("time,h,r_h,c,clamped\n"));
    assert_eq!(traj.lines().count(), 1 + 721);
    assert!(!traj.contains('\r'));
}

#[test]
fn report_round_trips_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let o = eldercare(dir.path(), &["simulate", "--preset", "low-income", "--preset", "active"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["low-income_report.toml", "active_report.toml"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(RunReport::from_toml(&text).unwrap().to_toml(), text);
    }
}

#[test]
fn linear_mode_leaves_allocation_blank() {
    let dir = tempfile::tempdir().unwrap();
    let o = eldercare(dir.path(), &["preset-list", "sedentary"]);
    let doc = stdout(&o).replace("mode = \"coupled\"", "mode = \"linear\"");
    fs::write(dir.path().join("lin.toml"), doc).unwrap();
    let o = eldercare(dir.path(), &["simulate", "lin.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = fs::read_to_string(dir.path().join("sedentary_trajectory.csv")).unwrap();
    for line in traj.lines().skip(1) {
        assert_eq!(line.split(',').nth(2), Some(""));
    }
}

#[test]
fn zero_step_is_a_validation_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let doc = stdout(&eldercare(dir.path(), &["preset-list", "rural"]));
    let doc: String = doc
        .lines()
        .map(|l| if l.starts_with("dt = ") { "dt = 0.0".to_string() } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(dir.path().join("bad.toml"), doc).unwrap();
    let o = eldercare(dir.path(), &["simulate", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dt:"), "{}", stderr(&o));
    assert!(!dir.path().join("rural_report.toml").exists());
}

#[test]
fn parse_and_usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x.toml"), "name = \"x\"\nhorizon = 1.0\ndt = 0.1\nh0 = 5.0\nbogus = 1\n").unwrap();
    let o = eldercare(dir.path(), &["simulate", "x.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
    assert_eq!(eldercare(dir.path(), &["simulate", "missing.toml"]).status.code(), Some(1));
    assert_eq!(eldercare(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(eldercare(dir.path(), &["simulate", "--preset", "nowhere"]).status.code(), Some(1));
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_eldercare"))
        .current_dir(dir.path())
        .env("ELDERCARE_OUT_DIR", "from-env")
        .args(["simulate", "--preset", "urban"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("from-env/urban_report.toml").exists());
}

#[test]
fn higher_pollution_never_ends_healthier() {
    let dir = tempfile::tempdir().unwrap();
    let o = eldercare(dir.path(), &["simulate", "--preset", "high-pollution", "--preset", "low-pollution"]);
    assert!(o.status.success());
    let h = |name: &str| {
        RunReport::load(&dir.path().join(format!("{name}_report.toml")))
            .unwrap()
            .terminal_h
            .unwrap()
    };
    assert!(h("high-pollution") <= h("low-pollution"));
}

fn write_specs(dir: &Path, specs: &[[f64; 4]]) {
    let mut doc = String::new();
    for [a, b, theta, delta_u] in specs {
        doc.push_str(&format!("[[specs]]\na = {a:?}\nb = {b:?}\ntheta = {theta:?}\ndelta_u = {delta_u:?}\n\n"));
    }
    fs::write(dir.join("specs.toml"), doc).unwrap();
}

#[test]
fn identical_specs_split_evenly() {
    let dir = tempfile::tempdir().unwrap();
    write_specs(dir.path(), &[[1.0, 0.5, 0.8, 1.0], [1.0, 0.5, 0.8, 1.0]]);
    let o = eldercare(dir.path(), &["optimize", "specs.toml", "--budget", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "participant,amount\n0,5.000000\n1,5.000000\n");
    assert!(dir.path().join("specs_allocation.toml").exists());
}

#[test]
fn linear_specs_go_to_the_corner() {
    let dir = tempfile::tempdir().unwrap();
    write_specs(dir.path(), &[[1.0, 0.0, 1.0, 1.0], [2.0, 0.0, 1.0, 1.0]]);
    let o = eldercare(dir.path(), &["optimize", "specs.toml", "--budget", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "participant,amount\n0,0.000000\n1,4.000000\n");
}

#[test]
fn optimize_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("specs.toml"), "").unwrap();
    assert_eq!(eldercare(dir.path(), &["optimize", "specs.toml", "--budget", "1"]).status.code(), Some(2));
    write_specs(dir.path(), &[[1.0, 1.0, 1.0, 1.0]]);
    assert_eq!(eldercare(dir.path(), &["optimize", "specs.toml", "--budget", "0"]).status.code(), Some(2));
}

fn spec_utility(spec: &[f64; 4], r: f64) -> f64 {
    let [a, b, theta, delta_u] = *spec;
    if r <= 0.0 {
        0.0
    } else {
        a * r.powf(theta) / (1.0 + b * r.powf(delta_u))
    }
}

/// Exhaustive search over the 3-participant simplex at step 1e-3, then at
/// step 1e-5 within ±2e-3 of the coarse optimum.
fn grid_best(specs: &[[f64; 4]], budget: f64) -> f64 {
    let k = (budget / 1e-3).round() as usize;
    let table: Vec<Vec<f64>> = specs
        .iter()
        .map(|s| (0..=k).map(|i| spec_utility(s, i as f64 * 1e-3)).collect())
        .collect();
    let (mut best, mut at) = (f64::NEG_INFINITY, (0.0, 0.0));
    for i in 0..=k {
        for j in 0..=k - i {
            let v = table[0][i] + table[1][j] + table[2][k - i - j];
            if v > best {
                best = v;
                at = (i as f64 * 1e-3, j as f64 * 1e-3);
            }
        }
    }
    for di in -200..=200 {
        for dj in -200..=200 {
            let (r0, r1) = (at.0 + di as f64 * 1e-5, at.1 + dj as f64 * 1e-5);
            let r2 = budget - r0 - r1;
            if r0 < 0.0 || r1 < 0.0 || r2 < 0.0 {
                continue;
            }
            best = best.max(spec_utility(&specs[0], r0) + spec_utility(&specs[1], r1) + spec_utility(&specs[2], r2));
        }
    }
    best
}

#[test]
fn persisted_plan_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let dir = tempfile::tempdir().unwrap();
        let specs: Vec<[f64; 4]> = (0..3)
            .map(|_| {
                let theta = rng.random_range(0.3..1.0);
                [rng.random_range(0.2..3.0), rng.random_range(0.0..2.0), theta, theta + rng.random_range(0.0..1.5)]
            })
            .collect();
        let budget = rng.random_range(200..1500) as f64 * 1e-3;
        write_specs(dir.path(), &specs);
        let o = eldercare(dir.path(), &["optimize", "specs.toml", "--budget", &budget.to_string()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let report = RunReport::load(&dir.path().join("specs_allocation.toml")).unwrap();
        let plan = report.allocation.unwrap();
        let best = grid_best(&specs, budget);
        assert!((plan.total_utility - best).abs() <= 1e-4, "{} vs {best}", plan.total_utility);
    }
}

#[test]
fn market_report_on_the_bundled_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let o = eldercare(dir.path(), &["market-report"]);
    let text = stdout(&o);
    assert!(text.contains("Real-time Monitoring,90,70,4,95,20\n"));
    assert!(text.contains("Cardiovascular,35,65,15,70,35\n"));
    let o = eldercare(dir.path(), &["--format", "structured", "market-report"]);
    let doc: toml::Table = toml::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["features"].as_array().unwrap().len(), 4);
}

#[test]
fn matched_availability_gives_zero_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let doc = "[[features]]\nname = \"A\"\nimportance = 60\navailability = 60\ndifficulty = 2\ncoverage_5y = 70\n\n\
               [[features]]\nname = \"B\"\nimportance = 10\navailability = 10\ndifficulty = 5\ncoverage_5y = 20\n\n\
               [[conditions]]\nname = \"C\"\npopulation_affected = 5\nservice_coverage = 100\nmortality = 1\npersonalization_needs = 3\n";
    fs::write(dir.path().join("m.toml"), doc).unwrap();
    let o = eldercare(dir.path(), &["market-report", "m.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("A,60,60,2,70,0\n") && text.contains("B,10,10,5,20,0\n"));
    fs::write(dir.path().join("bad.toml"), doc.replace("difficulty = 5", "difficulty = 6")).unwrap();
    assert_eq!(eldercare(dir.path(), &["market-report", "bad.toml"]).status.code(), Some(1));
}

#[test]
fn gapless_series_is_copied_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let input = "t,x,note\n0,1.50,a\n1,2,\"b, quoted\"\n2,2.25e0,c\n";
    fs::write(dir.path().join("s.csv"), input).unwrap();
    let o = eldercare(dir.path(), &["impute", "s.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(dir.path().join("s_filled.csv")).unwrap(), input);
}

#[test]
fn interior_gap_between_equal_neighbors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.csv"), "t,x\n0,3.0\n1,\n2,3.0\n").unwrap();
    let o = eldercare(
        dir.path(),
        &["impute", "s.csv", "--length-scale", "100", "--signal-variance", "1", "--noise-variance", "0"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = fs::read_to_string(dir.path().join("s_filled.csv")).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[1], "0,3.0");
    assert_eq!(lines[3], "2,3.0");
    let v: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 3.0).abs() < 1e-3, "{v}");
}

#[test]
fn long_gap_hold_last_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("t,x\n");
    for i in 0..20 {
        if (5..15).contains(&i) {
            csv.push_str(&format!("{i},\n"));
        } else {
            csv.push_str(&format!("{i},{}\n", i as f64 * 0.5));
        }
    }
    fs::write(dir.path().join("s.csv"), &csv).unwrap();
    let o = eldercare(dir.path(), &["impute", "s.csv", "--long-gap-fill", "hold-last", "-o", "f.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let filled: Vec<&str> = out.lines().skip(6).take(10).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert!(filled.iter().all(|v| *v == "2"), "{filled:?}");
}

#[test]
fn all_missing_series_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.csv"), "t,x\n0,\n1,NA\n").unwrap();
    assert_eq!(eldercare(dir.path(), &["impute", "s.csv"]).status.code(), Some(2));
}

#[test]
fn detect_flags_the_step() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.csv"), "t,x\n0,0\n1,0\n2,0\n3,5\n4,5\n5,5\n").unwrap();
    let o = eldercare(dir.path(), &["detect", "s.csv", "--calibration-window", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "index,time,direction,statistic\n3,3,up,4.5\n");
    assert_eq!(fs::read_to_string(dir.path().join("s_alerts.csv")).unwrap(), stdout(&o));
    let o = eldercare(dir.path(), &["detect", "s.csv", "--method", "rate", "--max-slope", "4"]);
    assert_eq!(stdout(&o), "index,time,direction,statistic\n3,3,up,5\n");
}

#[test]
fn preset_list_names_everything() {
    let dir = tempfile::tempdir().unwrap();
    let o = eldercare(dir.path(), &["preset-list"]);
    assert_eq!(stdout(&o).lines().count(), 13);
    let o = eldercare(dir.path(), &["--seed", "9", "preset-list", "urban"]);
    assert!(stdout(&o).contains("seed = 9\n"));
}
