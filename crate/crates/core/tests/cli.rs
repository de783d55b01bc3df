//! End-to-end runs of the `exdys` binary.

use std::path::Path;
use std::process::{Command, Output};

fn exdys(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exdys")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn default_run_writes_outputs_and_restores() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = exdys(&["--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["trace.csv", "timing.csv", "report.json", "restored.png", "observation.png"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let r = report(&out);
    assert_eq!(r["monotone_theta"], true);
    assert!(r["psnr_final"].as_f64().unwrap() > r["psnr_degraded"].as_f64().unwrap());
    let eff = &r["effective"];
    for key in ["gamma", "gamma_nu", "alpha", "tau", "lambda_gamma", "xi"] {
        assert!(eff[key].is_f64(), "effective.{key} missing");
    }
    assert_eq!(eff["certified"], true);
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let rows = exdys::cli::parse_trace(&trace).unwrap();
    assert_eq!(rows.len() as u64, r["iterations"].as_u64().unwrap());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = exdys(&["--seed", "5", "--set", "model=tvtik", "--set", "k_max=60", "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["trace.csv", "restored.png", "observation.png"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn seed_changes_the_observation() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (d, seed) in [(&a, "1"), (&b, "2")] {
        let o = exdys(&["--seed", seed, "--set", "k_max=3", "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_ne!(std::fs::read(a.join("trace.csv")).unwrap(), std::fs::read(b.join("trace.csv")).unwrap());
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "# small super-resolution run\ntask = superres\nmodel = debox\nsize = 16\nk_max = 20\noutput_format = pgm\n").unwrap();
    let out = dir.path().join("out");
    let o = exdys(&["--config", cfg.to_str().unwrap(), "--set", "k_max=5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&out);
    assert_eq!(r["config"]["k_max"], 5);
    assert_eq!(r["effective"]["scale"], 2);
    assert!(out.join("restored.pgm").is_file());
    let img = exdys::imaging::load_image(out.join("restored.pgm")).unwrap();
    assert_eq!(img.shape(), &[16, 16]);
}

#[test]
fn config_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "model = detik\n\nnu = zero\n").unwrap();
    let o = exdys(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = exdys(&["--set", "colour=blue", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
}

#[test]
fn missing_kernel_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_kernel.txt");
    let spec = format!("kernel=file:{}", missing.display());
    let o = exdys(&["--set", &spec, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_kernel.txt"), "{}", stderr(&o));
}

#[test]
fn kernel_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let k = dir.path().join("k.txt");
    std::fs::write(&k, "# 3x3 box\n0.1111111111111111 0.1111111111111111 0.1111111111111111\n0.1111111111111111 0.1111111111111111 0.1111111111111111\n0.1111111111111111 0.1111111111111111 0.1111111111111112\n").unwrap();
    let spec = format!("kernel=file:{}", k.display());
    let out = dir.path().join("o");
    let o = exdys(&["--set", &spec, "--set", "k_max=5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn uncertified_parameters_need_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let args = ["--set", "gamma_nu=0.5", "--set", "k_max=5", "--out", out.to_str().unwrap()];
    let o = exdys(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--uncertified"), "{}", stderr(&o));

    let mut with_flag = args.to_vec();
    with_flag.push("--uncertified");
    let o = exdys(&with_flag);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(&out)["effective"]["certified"], false);
}

#[test]
fn diverging_run_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = exdys(&["--uncertified", "--set", "gamma=1e6", "--set", "k_max=5000", "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("solver failed"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "not a directory").unwrap();
    let o = exdys(&["--set", "k_max=2", "--out", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn alpha_sweep_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = exdys(&["--sweep", "alpha_fraction=0,0.5,0.99", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for v in ["0", "0.5", "0.99"] {
        assert!(out.join(format!("alpha_fraction={v}")).join("trace.csv").is_file());
    }
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert!(summary["iterations_nonincreasing"].is_boolean());
}

#[test]
fn bad_sweep_value_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = exdys(&["--sweep", "alpha_fraction=0,1.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = exdys(&["--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}
