use std::path::{Path, PathBuf};
use std::process::Command;

use bidomain::config::{parse_config, RunConfig};
use bidomain::output::read_csv;
use bidomain::run::{extract_config_echo, run, RunOptions, Subcommand};
use bidomain::BidomainError;

const SMALL: &str = "\
[grid]
extents = 1.0
counts = 33

[conductivity]
sigma_i = 1.0
sigma_e = 2.0

[model]
variant = fhn
a = 0.1
k = 1.0
eps = 0.05

[forcing]
period = 3.0
amplitude = 0.1
profile = patch
patch_hi = 0.3

[solver]
order = 8
probes = 20
ball_samples = 4
samples = 100
lattice_half_width = 10
lattice_step = 0.1
convergence_orders = 2, 4, 8
uniqueness_states = 2
energy_steps = 40, 80, 160, 320

[output]
plots = true
";

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.ini");
    std::fs::write(&p, text).unwrap();
    p
}

fn opts(out: &Path) -> RunOptions {
    RunOptions {
        out: Some(out.to_path_buf()),
        seed: 4,
        quiet: true,
    }
}

fn config_error_key(text: &str) -> (String, usize) {
    let dir = tempfile::tempdir().unwrap();
    match parse_config(&write_config(dir.path(), text)) {
        Err(BidomainError::Config { key, line, .. }) => (key, line),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn config_errors_name_key_and_line() {
    assert_eq!(config_error_key(&SMALL.replace("a = 0.1", "a = 1.5")), ("model.a".into(), 11));
    assert_eq!(config_error_key(&SMALL.replace("eps = 0.05", "eps = fast")), ("model.eps".into(), 13));
    assert_eq!(config_error_key(&SMALL.replace("order = 8", "order = 8\nspeed = 3")), ("solver.speed".into(), 23));
    assert_eq!(config_error_key(&SMALL.replace("period = 3.0", "period = -1")).0, "forcing.period");
    assert_eq!(config_error_key(&SMALL.replace("counts = 33\n", "")).0, "grid.counts");
    let ap = SMALL.replace("variant = fhn", "variant = aliev-panfilov\nb = 1.0\nd = 0.2");
    assert_eq!(config_error_key(&ap).0, "model.b");
    let csv = SMALL.replace("sigma_e = 2.0", "sigma_e_csv = missing.csv");
    assert_eq!(config_error_key(&csv).0, "conductivity.sigma_e_csv");
}

#[test]
fn report_echo_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), SMALL);
    let cfg = parse_config(&cfg_path).unwrap();
    let out = dir.path().join("out");
    let report = run(Subcommand::Eigens, cfg.clone(), &opts(&out)).unwrap();
    let text = std::fs::read_to_string(out.join("report-eigens.txt")).unwrap();
    let echo = extract_config_echo(&text).unwrap();
    assert_eq!(echo, report.config_echo);
    assert_eq!(RunConfig::parse_str(echo, Path::new("")).unwrap(), cfg);
    let names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
    let mut unique = names.clone();
    unique.dedup();
    assert_eq!(names.len(), unique.len());
}

#[test]
fn eigens_on_equal_conductivity() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("sigma_e = 2.0", "sigma_e = 1.0");
    let cfg = parse_config(&write_config(dir.path(), &text)).unwrap();
    let out = dir.path().join("out");
    assert!(run(Subcommand::Eigens, cfg, &opts(&out)).unwrap().passed());
    let p = out.join("eigenvalues.csv");
    let d = read_csv(&p).unwrap();
    assert_eq!(d.schema.as_deref(), Some("eigenvalues v1"));
    assert_eq!(d.header, ["j", "lambda", "residual"]);
    let lam = d.f64_column("lambda", &p).unwrap();
    assert_eq!(lam.len(), 9);
    assert!(lam[0].abs() < 1e-8);
    // equal conductivities: half the discrete Neumann Laplacian, ≈ (jπ)²/2
    assert!((lam[1] - 0.5 * std::f64::consts::PI.powi(2)).abs() < 0.01);
}

#[test]
fn periodic_then_energy_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&write_config(dir.path(), SMALL)).unwrap();
    let out = dir.path().join("out");
    let periodic = run(Subcommand::SolvePeriodic, cfg.clone(), &opts(&out)).unwrap();
    assert!(periodic.passed(), "{}", periodic.render());
    assert!(out.join("fixed_point.csv").exists() && out.join("residual_history.svg").exists());
    let energy = run(Subcommand::VerifyEnergy, cfg.clone(), &opts(&out)).unwrap();
    assert!(energy.passed(), "{}", energy.render());
    let p = out.join("energy.csv");
    let d = read_csv(&p).unwrap();
    let slack = d.f64_column("dissipation_slack", &p).unwrap();
    assert!(slack.iter().filter(|v| v.is_finite()).all(|&v| v >= 0.0));
    let plots = run(Subcommand::EmitPlots, cfg, &opts(&out)).unwrap();
    assert!(plots.passed());
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&write_config(dir.path(), SMALL)).unwrap();
    let subs = [
        Subcommand::Assemble,
        Subcommand::Eigens,
        Subcommand::CheckAssumptions,
        Subcommand::SolveIvp,
        Subcommand::SolvePeriodic,
        Subcommand::VerifyUniqueness,
        Subcommand::Convergence,
    ];
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        for s in subs {
            run(s, cfg.clone(), &opts(&out)).unwrap();
        }
        outputs.push(csv_bytes(&out));
    }
    assert_eq!(outputs[0].len(), 17);
    assert_eq!(outputs[0], outputs[1]);
    for (_, bytes) in &outputs[0] {
        assert!(!bytes.contains(&b'\r'));
    }
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_bidomain");
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), SMALL);
    let status = |args: &[&str]| Command::new(exe).args(args).status().unwrap().code();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(status(&["eigens", "--config", good.to_str().unwrap(), "--out", out, "--quiet"]), Some(0));

    let stalled = dir.path().join("stalled.ini");
    std::fs::write(&stalled, SMALL.replace("order = 8", "order = 8\nmax_iter = 1")).unwrap();
    assert_eq!(
        status(&["solve-periodic", "-c", stalled.to_str().unwrap(), "-o", out, "-q"]),
        Some(1)
    );

    let bad = dir.path().join("bad.ini");
    std::fs::write(&bad, SMALL.replace("a = 0.1", "a = 2")).unwrap();
    let o = Command::new(exe).args(["eigens", "-c", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.a"));
}

#[test]
fn shipped_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/fhn-reference.ini");
    let cfg = parse_config(&path).unwrap();
    assert_eq!(cfg.grid.counts, vec![65]);
    assert_eq!(cfg.solver.order, 16);
}
