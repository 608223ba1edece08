use std::path::PathBuf;

use clap::Parser;
use serde_json::Value;
use wedgeq_cli::format::{Cell, Table};
use wedgeq_cli::{execute, report, Cli, Report};
use wedgeq_core::{Error, WorkflowSpec};

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn parse(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("wedgeq").chain(args.iter().copied())).unwrap()
}

fn run(args: &[&str]) -> Result<Report, Error> {
    report(&parse(args).command)
}

fn text(args: &[&str]) -> String {
    execute(&parse(args).command).unwrap()
}

fn json(args: &[&str]) -> Value {
    match run(args).unwrap() {
        Report::Json(v) => v,
        Report::Table(_) => panic!("expected JSON"),
    }
}

fn table(args: &[&str]) -> Table {
    match run(args).unwrap() {
        Report::Table(t) => t,
        Report::Json(_) => panic!("expected a table"),
    }
}

fn num(c: &Cell) -> f64 {
    match c {
        Cell::Num(x) => *x,
        Cell::Int(n) => *n as f64,
        other => panic!("not a number: {other:?}"),
    }
}

fn header(csv: &str) -> &str {
    csv.lines().find(|l| !l.starts_with('#')).unwrap()
}

#[test]
fn golden_csv_headers() {
    let cases = [
        (vec!["sweep", "--config", "baseline.json"], "lambda,w_manual,w_ai,rho_H,rho_A,stable_H,stable_A"),
        (vec!["design", "--config", "design-grid.json"], "s,rho_H,c2_a_max"),
        (
            vec!["dist", "--config", "service-mix.json", "--samples", "1000"],
            "bin_lo,bin_hi,manual_count,ai_count,manual_density,ai_density",
        ),
        (vec!["review-curve", "--config", "review-curve.json"], "pi,theta,r_star"),
    ];
    for (mut args, want) in cases {
        let path = fixture(args[2]);
        args[2] = &path;
        assert_eq!(header(&text(&args)), want, "{args:?}");
    }
}

#[test]
fn golden_sweep_rows() {
    let out = text(&["sweep", "--config", &fixture("baseline.json"), "--grid", "0.5"]);
    assert_eq!(
        out,
        "lambda,w_manual,w_ai,rho_H,rho_A,stable_H,stable_A\n0.5,0.55,0.706793478261,0.5,0.425,true,true\n"
    );
}

#[test]
fn baseline_wait_and_wedge() {
    let w = json(&["wait", "--config", &fixture("baseline.json")]);
    assert_eq!(w["w_manual"].as_f64(), Some(0.55));
    assert!((w["w_ai"].as_f64().unwrap() - 0.706793).abs() < 1e-6);
    assert_eq!(w["method"], "pollaczek_khinchine");
    let v = json(&["wedge", "--config", &fixture("baseline.json")]);
    assert_eq!(v["report"]["ai_better"], Value::Bool(false));
    assert!((v["report"]["lambda_star"].as_f64().unwrap() - 0.7611).abs() < 1e-4);
}

#[test]
fn sweep_single_point_matches_wait() {
    let w = json(&["wait", "--config", &fixture("baseline.json")]);
    let t = table(&["sweep", "--config", &fixture("baseline.json"), "--grid", "0.5"]);
    assert_eq!(t.rows.len(), 1);
    let row = &t.rows[0];
    assert!((num(&row[1]) - w["w_manual"].as_f64().unwrap()).abs() < 1e-11);
    assert!((num(&row[2]) - w["w_ai"].as_f64().unwrap()).abs() < 1e-11);
}

#[test]
fn sweep_marks_the_ai_saturation_point_unstable() {
    let boundary = 1.0 / 0.85;
    let t = table(&["sweep", "--config", &fixture("baseline.json"), "--grid", &boundary.to_string()]);
    let row = &t.rows[0];
    assert_eq!(row[2], Cell::Empty);
    assert_eq!(row[6], Cell::Bool(false));
    assert_eq!(row[1], Cell::Empty);
    assert_eq!(row[5], Cell::Bool(false));
}

#[test]
fn overload_fixture_is_infeasible() {
    let v = json(&["stabilize", "--config", &fixture("overload-infeasible.json")]);
    assert_eq!(v["feasible"], Value::Bool(false));
    assert!(v["x_c"].is_null());
    assert!((v["rho_a"].as_f64().unwrap() - 1.02).abs() < 1e-12);
}

#[test]
fn design_rows() {
    let t = table(&["design", "--config", &fixture("design-grid.json")]);
    let at = |s: f64, rho: f64| {
        t.rows
            .iter()
            .find(|r| (num(&r[0]) - s).abs() < 1e-9 && num(&r[1]) == rho)
            .map(|r| num(&r[2]))
            .unwrap()
    };
    for rho in [0.2, 0.4, 0.6, 0.8] {
        assert_eq!(at(1.0, rho), 0.5);
    }
    assert!((at(0.85, 0.6) - 1.54325).abs() < 1e-5);
    let s_values: Vec<f64> = t.rows.iter().map(|r| num(&r[0])).filter(|&s| s < 1.0 - 1e-9).collect();
    for s in s_values {
        assert!(at(s, 0.8) > at(s, 0.2), "s={s}");
    }
}

#[test]
fn dist_spike_and_moments() {
    let t = table(&["dist", "--config", &fixture("service-mix.json")]);
    let meta = |k: &str| t.meta.iter().find(|(n, _)| n == k).unwrap().1;
    let w = meta("bin_width");
    let spike = t
        .rows
        .iter()
        .max_by(|a, b| num(&a[3]).total_cmp(&num(&b[3])))
        .unwrap();
    assert!(num(&spike[0]) <= 0.5 && 0.5 < num(&spike[1]), "spike at {:?}", spike);
    // No-escape draws are exactly r, so the spike holds about 1 - p(r) of the mass.
    assert!((num(&spike[5]) * w - 0.85).abs() < 0.005);
    assert!(((meta("ai_c2") - 1.25) / 1.25).abs() < 0.02);
}

#[test]
fn deterministic_manual_occupies_one_bin() {
    let t = table(&["dist", "--config", &fixture("deterministic-manual.json")]);
    let occupied = t.rows.iter().filter(|r| num(&r[2]) > 0.0).count();
    assert_eq!(occupied, 1);
}

#[test]
fn equilibrium_fixtures() {
    let v = json(&["equilibrium", "--config", &fixture("signal-beta22.json")]);
    let theta = v["solution"]["primary"]["theta_star"].as_f64().unwrap();
    assert!(((theta - 0.426) / 0.426).abs() < 0.005);
    let v = json(&["equilibrium", "--config", &fixture("signal-beta52.json")]);
    let wq = v["solution"]["primary"]["wq"].as_f64().unwrap();
    assert!(((wq - 1.762) / 1.762).abs() < 0.005);
    assert_eq!(v["solution"]["roots"][0], v["solution"]["primary"]);
}

#[test]
fn review_curve_values() {
    let t = table(&["review-curve", "--config", &fixture("review-curve.json"), "--theta", "1"]);
    for row in &t.rows {
        let (pi, r) = (num(&row[0]), num(&row[2]));
        if pi <= 0.05 {
            assert_eq!(r, 0.0, "pi={pi}");
        }
        if (pi - 0.5).abs() < 1e-12 {
            assert!((r - 1.151293).abs() < 1e-6);
        }
    }
}

#[test]
fn json_reports_round_trip() {
    let commands = [
        vec!["moments", "--config", "baseline.json"],
        vec!["wait", "--config", "baseline.json"],
        vec!["wedge", "--config", "baseline.json"],
        vec!["stabilize", "--config", "overload-rescue.json"],
        vec!["equilibrium", "--config", "signal-beta22.json"],
        vec!["sweep", "--config", "baseline.json", "--format", "json"],
    ];
    for mut args in commands {
        let path = fixture(args[2]);
        args[2] = &path;
        let out = text(&args);
        let parsed: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(serde_json::to_string_pretty(&parsed).unwrap() + "\n", out, "{args:?}");
    }
}

#[test]
fn fixtures_round_trip_through_the_schema() {
    for name in [
        "service-mix.json",
        "design-grid.json",
        "baseline.json",
        "signal-beta22.json",
        "signal-beta52.json",
        "review-curve.json",
        "mm1.json",
        "overload-rescue.json",
        "overload-infeasible.json",
        "deterministic-manual.json",
    ] {
        let spec = wedgeq_core::load_config(fixture(name)).unwrap();
        let again = WorkflowSpec::from_json(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, again, "{name}");
    }
}

#[test]
fn baseline_fixture_reproduces_the_calibration() {
    let spec = wedgeq_core::load_config(fixture("baseline.json")).unwrap();
    assert_eq!(spec.capacity, 1.0);
    assert_eq!(spec.manual.tau_h, 1.0);
    assert_eq!(spec.manual.c2_h, 0.10);
    let m = spec.ai_moments().unwrap();
    assert!((m.mean - 0.85).abs() < 1e-12);
    assert!((m.c2() - 1.25).abs() < 1e-12);
}

#[test]
fn flat_csv_for_json_reports() {
    let out = text(&["wait", "--config", &fixture("baseline.json"), "--format", "csv"]);
    assert!(out.starts_with("key,value\nlambda,0.5\n"));
    assert!(out.contains("\nw_manual,0.55\n"));
    assert!(!out.contains('\r'));
}

#[test]
fn out_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let stdout = text(&["sweep", "--config", &fixture("baseline.json"), "--out", path.to_str().unwrap()]);
    assert!(stdout.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    assert_eq!(written, text(&["sweep", "--config", &fixture("baseline.json")]));
}

#[test]
fn signal_commands_need_a_signal_block() {
    match run(&["equilibrium", "--config", &fixture("baseline.json")]) {
        Err(Error::Domain { field, .. }) => assert_eq!(field, "signal"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn simulate_baseline_matches_pk() {
    let v = json(&["simulate", "--config", &fixture("baseline.json")]);
    let cmp = &v["analytic"]["wq_pk"];
    assert!((cmp["value"].as_f64().unwrap() - 0.706793).abs() < 1e-6);
    assert_eq!(cmp["inside_ci99"], Value::Bool(true), "{v}");
    assert_eq!(v["stats"]["unstable"], Value::Bool(false));
}

#[test]
fn simulate_baseline_ci95_coverage_across_seeds() {
    let mut inside = 0;
    for seed in 1..=20u64 {
        let v = json(&["simulate", "--config", &fixture("baseline.json"), "--seed", &seed.to_string()]);
        if v["analytic"]["wq_pk"]["inside_ci95"] == Value::Bool(true) {
            inside += 1;
        }
    }
    // Binomial(20, 0.95) puts P(X < 16) below 0.3%.
    assert!(inside >= 16, "{inside}/20 seeds inside the 95% CI");
}

#[test]
fn simulate_mm1_matches_closed_form() {
    let v = json(&["simulate", "--config", &fixture("mm1.json")]);
    let wq = v["stats"]["wq_mean"].as_f64().unwrap();
    let hw = v["stats"]["wq_half_width_99"].as_f64().unwrap();
    assert!((wq - 1.0).abs() <= hw, "wq {wq} ± {hw}");
}

#[test]
fn simulate_is_byte_identical() {
    let args = ["simulate", "--config", &fixture("baseline.json"), "--arrivals", "50000", "--reps", "3"];
    assert_eq!(text(&args), text(&args));
}
