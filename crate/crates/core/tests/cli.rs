use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn slotqed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slotqed"))
        .args(args)
        .env_remove("SLOTQED_WORKERS")
        .output()
        .unwrap()
}

const MINIMAL: &str = r#"
seed = 5
trials = 2

[box]
kind = "free_space"
extents = [4e-7, 4e-7, 4e-7]

[mode]
kind = "uniform"

[ensemble]
n_atoms = 3
temperature = 0.0

[drive]
omega0 = 0.01
detuning = { min = -10.0, max = 10.0, points = 21 }

[dynamics]
method = "steady_state"

[sweep]
axis = "intensity"
omega0 = [0.01, 0.02]

[output]
directory = "results"
"#;

#[test]
fn verify_exits_zero() {
    let out = slotqed(&["verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS") && !text.contains("FAIL"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, MINIMAL.replace("omega0 = 0.01\n", "omega = 0.01\n")).unwrap();
    let out = slotqed(&["run", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("drive.omega"));

    let out = slotqed(&["run", "/nonexistent/x.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let out = slotqed(&["--workers", "0", "verify"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_outputs_next_to_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("minimal.toml");
    fs::write(&p, MINIMAL).unwrap();
    let out = slotqed(&["--workers", "1", "run", p.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("results");
    for f in [
        "shifts.csv",
        "fits.toml",
        "resolved.toml",
        "manifest.toml",
        "spectra/point000_interacting.csv",
    ] {
        assert!(res.join(f).is_file(), "{f} missing");
    }
    let shifts = fs::read_to_string(res.join("shifts.csv")).unwrap();
    // Header row, units row, one row per sweep point.
    assert_eq!(shifts.lines().filter(|l| !l.starts_with('#')).count(), 4);
    assert_eq!(String::from_utf8(out.stdout).unwrap().matches("shift =").count(), 2);

    let other = dir.path().join("elsewhere");
    let out = slotqed(&["-q", "run", p.to_str().unwrap(), "--out", other.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(fs::read(other.join("shifts.csv")).unwrap(), shifts.as_bytes());
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn oracle_tables_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(slotqed(&["-q", "oracle-tables", a.path().to_str().unwrap()])
        .status
        .success());
    assert!(slotqed(&["-q", "oracle-tables", b.path().to_str().unwrap()])
        .status
        .success());
    let ta = read_tree(a.path());
    assert!(!ta.is_empty());
    assert_eq!(ta, read_tree(b.path()));
}
