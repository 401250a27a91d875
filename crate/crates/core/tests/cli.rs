use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cellfree-urllc"))
}

const SMALL: [&str; 16] = [
    "--set",
    "gu.count=3",
    "--set",
    "uav.count=2",
    "--set",
    "ap.count=4",
    "--set",
    "ap.antennas=2",
    "--set",
    "ap.serving=2",
    "--set",
    "co.antennas=8",
    "--set",
    "co.bs_count=1",
    "--set",
    "pzf.n_interferers=1",
];

#[test]
fn runs_a_filtered_sweep() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(SMALL)
        .args([
            "--scenarios",
            "1",
            "--network",
            "cf",
            "--beamformer",
            "pzf",
            "--scheme",
            "iia",
            "--serial",
        ])
        .arg("--out")
        .arg(out.path())
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let stdout = String::from_utf8(status.stdout).unwrap();
    assert!(stdout.contains("cf-pzf-iia-sum-ul"));
    assert!(stdout.contains("cf-pzf-iia-min-dl"));
    assert!(!stdout.contains("icba"));
    for f in ["results.csv", "summary.json", "ecdf_cf-pzf-iia-sum-dl.csv"] {
        assert!(out.path().join(f).is_file(), "{f} missing");
    }
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[gu]\ncount = 2\n\n[uav]\ncount = 1\n\n[ap]\ncount = 3\nantennas = 2\nserving = 2\n",
    )
    .unwrap();
    let status = bin()
        .arg("--config")
        .arg(&cfg)
        .args([
            "--scenarios",
            "1",
            "--network",
            "cf",
            "--beamformer",
            "mrt",
            "--scheme",
            "iia",
            "--direction",
            "dl",
        ])
        .args(["--objective", "sum"])
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
}

#[test]
fn lists_keys() {
    let out = bin().arg("--list-keys").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "sco.delta"));
    assert!(text.lines().any(|l| l == "pzf.n_interferers"));
}

#[test]
fn rejects_unknown_keys() {
    let out = bin().args(["--set", "no.such_key=1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no.such_key"));
}

#[test]
fn rejects_unsupported_combination() {
    let out = bin()
        .args(["--network", "cf", "--beamformer", "zf", "--scenarios", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
