use std::path::Path;
use std::process::{Command, Output};

fn parastab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parastab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("PARASTAB_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_coupled_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = parastab(&["validate", "--preset", "coupled2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("result: pass"));
    for f in ["validation.csv", "summary.txt", "manifest.toml"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn holder_reports_slope_against_theta() {
    let dir = tempfile::tempdir().unwrap();
    let o = parastab(
        &[
            "holder",
            "--preset",
            "heat1d",
            "--t0",
            "0.5",
            "--T",
            "1",
            "--lambda",
            "4",
            "--eps",
            "1e-1,1e-2,1e-3,1e-4",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("holder_records.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epsilon,E_T,E_t0,E_0,D,theta,slope,product,margin,note"
    );
    assert_eq!(lines.clone().filter(|l| !l.starts_with('#')).count(), 4);
    assert!(csv
        .trim_end()
        .lines()
        .last()
        .unwrap()
        .starts_with("# summary: theta=0.0375421581189"));
}

#[test]
fn carleman_sweep_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = parastab(
        &[
            "carleman", "--preset", "heat1d", "--s", "2,4,8,16", "--lambda", "2,4",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("carleman_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    assert!(stdout(&o).contains("[PASS] sup_c_star_finite"));
}

#[test]
fn unknown_config_key_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "command = \"forward\"\nnx = 20\nbogus = 3\n").unwrap();
    let o = parastab(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("bogus"), "{err}");
}

#[test]
fn invalid_grid_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = parastab(&["forward", "--nx", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn overflowing_state_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = parastab(&["forward", "--amplitude", "1e308"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("diverged"));
}

#[test]
fn violated_invariant_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = parastab(
        &[
            "holder",
            "--eps",
            "1e-1,1e-2,1e-3",
            "--bound",
            "1e-9",
            "--nx",
            "40",
            "--nt",
            "200",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("[FAIL] a_priori_bound"));
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "nx = 20\nnt = 40\nstride = 40\n").unwrap();
    let o = parastab(
        &["forward", "--config", cfg.to_str().unwrap(), "--nx", "10"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    // two time levels × 12 nodes
    assert_eq!(csv.lines().count(), 1 + 2 * 12);
}

#[test]
fn manifest_reruns_to_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = parastab(
        &[
            "holder",
            "--preset",
            "coupled2",
            "--family",
            "random_smooth:5",
            "--seed",
            "3",
            "--nx",
            "40",
            "--nt",
            "200",
        ],
        &first,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let second = dir.path().join("second");
    let manifest = first.join("manifest.toml");
    let o = parastab(&["run", "--config", manifest.to_str().unwrap()], &second);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a = std::fs::read(first.join("holder_records.csv")).unwrap();
    let b = std::fs::read(second.join("holder_records.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn output_directory_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_parastab"))
        .args(["validate", "--preset", "heat1d"])
        .env("PARASTAB_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("validation.csv").exists());
}

#[test]
fn reconstruct_reads_terminal_data() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("terminal.csv");
    let mut text = String::from("x,component,value\n");
    let nx = 30;
    let h = std::f64::consts::PI / (nx + 1) as f64;
    for i in 0..nx + 2 {
        let x = i as f64 * h;
        text.push_str(&format!("{x},0,{}\n", (-1.0f64).exp() * x.sin()));
    }
    std::fs::write(&input, text).unwrap();
    let o = parastab(
        &[
            "reconstruct",
            "--input",
            input.to_str().unwrap(),
            "--nx",
            "30",
            "--delta",
            "1e-8",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = std::fs::read_to_string(dir.path().join("reconstruction.csv")).unwrap();
    let mid: Vec<&str> = out.lines().nth(1 + 16).unwrap().split(',').collect();
    let (x, v): (f64, f64) = (mid[0].parse().unwrap(), mid[2].parse().unwrap());
    assert!((v - x.sin()).abs() < 1e-3, "{v} vs {}", x.sin());
}
