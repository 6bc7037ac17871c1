use std::fs;
use std::path::Path;

use clap::Parser;
use edchrom::harness::{ErrorReport, ErrorVariable};
use edchrom::SchemeKind;
use edchrom_cli::*;

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("chroma").chain(args.iter().copied())).unwrap()
}

const SMALL_TOML: &str = r#"
[isotherm]
a = [4.0, 5.0, 6.0]
b = [4.0, 5.0, 1.0]
porosity = 0.5
nu = 0.9

[stepper]
scheme = "CHR-UPW"
m = 4
t_final = 0.4
output_times = [0.2]

[[injection]]
start = 0.0
end = 0.1
concentrations = [1.0, 1.0, 0.0]

[[injection]]
start = 0.1
concentrations = [0.0, 0.0, 1.0]
"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn preset_with_flag_overrides() {
    let c =
        cli(&["--experiment", "1", "--scheme", "COMP-UPW5", "--m", "200", "--nu", "0.9", "--Da", "1e-5", "--T", "4"]);
    let cfg = resolve(&c).unwrap();
    assert_eq!(cfg.stepper.scheme, Some(SchemeKind::CompUpw5));
    assert_eq!(cfg.stepper.m, 200);
    assert_eq!(cfg.isotherm.nu, 0.9);
    assert_eq!(cfg.stepper.d_a, 1e-5);
    assert_eq!(cfg.stepper.t_final, 4.0);
    assert_eq!(cfg.stepper.output_times, vec![1.0, 4.0]);
    assert_eq!(cfg.isotherm.b, vec![4.0, 5.0, 1.0]);
    assert_eq!(cfg.stepper.cfl, 0.8);
}

#[test]
fn missing_scheme_lists_all_names() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &SMALL_TOML.replace("scheme = \"CHR-UPW\"\n", ""));
    let err = resolve(&cli(&["--config", path.to_str().unwrap()])).unwrap_err().to_string();
    for k in SchemeKind::ALL {
        assert!(err.contains(k.name()), "{err}");
    }
    let err = resolve(&cli(&["--experiment", "1", "--scheme", "WENO"])).unwrap_err().to_string();
    assert!(err.contains("CHR-GLF") && err.contains("MUSCL"), "{err}");
}

#[test]
fn rejects_cfl_above_one_and_unknown_keys() {
    assert!(resolve(&cli(&["--experiment", "2", "--K", "1.5"])).is_err());
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &SMALL_TOML.replace("nu = 0.9", "nu = 0.9\ncolour = 1"));
    let err = resolve(&cli(&["--config", path.to_str().unwrap()])).unwrap_err().to_string();
    assert!(err.contains("colour"), "{err}");
    assert!(Cli::try_parse_from(["chroma", "--experiment", "7"]).is_err());
}

#[test]
fn profiles_have_expected_shape_and_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), SMALL_TOML);
    let cfg = resolve(&cli(&["--config", path.to_str().unwrap()])).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let manifest = run_single(&cfg, &a).unwrap();
    run_single(&cfg, &b).unwrap();
    assert_eq!(manifest.profiles, vec!["profile_t0.2.csv", "profile_t0.4.csv"]);
    for name in &manifest.profiles {
        let text = fs::read_to_string(a.join(name)).unwrap();
        assert_eq!(text, fs::read_to_string(b.join(name)).unwrap());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "z,c1,c2,c3,w1,w2,w3");
        assert_eq!(lines.len(), 5);
        assert!(lines.iter().all(|l| l.split(',').count() == 7));
    }
    assert!(manifest.mass.relative_residual <= 1e-12);
    assert!(manifest.mass.max_step_residual <= 1e-12);
    assert!(manifest.mass.total_inflow[0] > 0.0);
}

#[test]
fn profile_values_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = resolve(&cli(&["--experiment", "4", "--m", "8", "--T", "0.05"])).unwrap();
    cfg.stepper.output_times.clear();
    run_single(&cfg, dir.path()).unwrap();
    let preset = cfg.preset().unwrap();
    let run = preset.run().unwrap();
    let text = fs::read_to_string(dir.path().join("profile_t0.05.csv")).unwrap();
    let snap = run.final_snapshot();
    for (j, line) in text.lines().skip(1).enumerate() {
        let vals: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(&vals[4..], preset.model.to_user(snap.w.cell(j)).as_slice());
        assert_eq!(&vals[1..4], preset.model.to_user(snap.c.cell(j)).as_slice());
    }
}

#[test]
fn rerun_from_manifest_matches() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), SMALL_TOML);
    let cfg = resolve(&cli(&["--config", path.to_str().unwrap()])).unwrap();
    let first = dir.path().join("first");
    run_single(&cfg, &first).unwrap();
    let manifest_path = first.join("manifest.json");
    let again = resolve(&cli(&["--config", manifest_path.to_str().unwrap()])).unwrap();
    assert_eq!(again, cfg);
    let second = dir.path().join("second");
    run_single(&again, &second).unwrap();
    for name in ["profile_t0.2.csv", "profile_t0.4.csv"] {
        assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(second.join(name)).unwrap());
    }
}

fn report(scheme: SchemeKind, m: usize, e: f64) -> ErrorReport {
    ErrorReport {
        scheme,
        nu: 1.0,
        d_a: 1e-4,
        t_final: 0.5,
        m,
        variable: ErrorVariable::Concentration,
        e_m: e,
        e_m_trimmed: e,
        theta_m: None,
        wall_seconds: 0.5,
        steps: 10,
    }
}

#[test]
fn error_tables() {
    assert_eq!(errors_csv(&[]), "scheme,nu,D_a,T,m,variable,e_m,e_m_trimmed,theta_m,seconds,steps\n");
    let mut rows = vec![report(SchemeKind::ChrUpw, 200, 1e-3), report(SchemeKind::ChrUpw, 100, 4e-3)];
    edchrom::harness::fill_orders(&mut rows);
    let csv = errors_csv(&rows);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[1], "CHR-UPW,1.0,0.0001,0.5,200,c,0.001,0.001,,0.5,10");
    assert_eq!(lines[2], "CHR-UPW,1.0,0.0001,0.5,100,c,0.004,0.004,2.0,0.5,10");
    let table = table1_text(&rows, &[(1e-4, 1.0)]);
    let body: Vec<&str> = table.lines().skip(2).collect();
    assert!(body[0].trim_start().starts_with("100") && body[0].contains("4000.00") && body[0].contains("2.00"));
    assert!(body[1].trim_start().starts_with("200") && body[1].trim_end().ends_with('-'));
}

#[test]
fn small_sweep_writes_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = resolve(&cli(&["--experiment", "4", "--T", "0.1", "--mref", "64"])).unwrap();
    cfg.harness.grids = vec![8, 16, 32];
    cfg.harness.schemes = vec![SchemeKind::CompUpw1];
    let reports = run_sweep(&cfg, None, true).unwrap();
    assert_eq!(reports.len(), 3);
    assert!(reports[0].e_m > reports[1].e_m && reports[1].e_m > reports[2].e_m);
    assert!(reports.iter().all(|r| r.e_m_trimmed <= r.e_m));
    assert!(reports[2].theta_m.is_none() && reports[0].theta_m.is_some());
    write_sweep(dir.path(), &cfg, &reports).unwrap();
    let csv = fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}
