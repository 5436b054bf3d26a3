//! End-to-end runs of the `chsurf` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chsurf::diagnostics::{DiagnosticsRow, CSV_COLUMNS};
use chsurf::harness::{read_snapshot, FieldId};

fn chsurf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chsurf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> Vec<DiagnosticsRow> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, CSV_COLUMNS);
    reader.deserialize().map(|r| r.unwrap()).collect()
}

#[test]
fn simulate_writes_series_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = chsurf(&[
        "simulate",
        "--nx", "16",
        "--scheme", "ls2",
        "--dt", "1e-3",
        "--t-end", "4e-3",
        "--seed", "11",
        "--phi-bar", "-0.2",
        "--series-every", "2",
        "--snapshot-times", "0,2.5e-3",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let series = rows(&out.join("diagnostics.csv"));
    assert_eq!(series.iter().map(|r| r.step).collect::<Vec<_>>(), vec![0, 2, 4]);
    assert!((series[0].mass_phi + 0.2).abs() < 1e-14);
    for r in &series {
        assert!((r.mass_phi - series[0].mass_phi).abs() <= 1e-10);
    }
    let (phi, header) = read_snapshot(&out.join("snapshot_001_phi.chsf")).unwrap();
    assert_eq!(header.field_id, FieldId::Phi);
    assert!((header.time - 3e-3).abs() < 1e-12);
    assert_eq!((header.nx, header.ny), (16, 16));
    assert!((phi.mean() + 0.2).abs() < 1e-12);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!(
            "[grid]\nnx = 16\n[run]\nscheme = \"ls1\"\ndt = 1e-3\nt_end = 5e-3\n[output]\ndir = {:?}\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = chsurf(&["simulate", "--config", cfg.to_str().unwrap(), "--t-end", "2e-3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let series = rows(&out.join("diagnostics.csv"));
    assert_eq!(series.last().unwrap().step, 2);
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = chsurf(&["simulate", "--dt", "-1", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("dt must be positive"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[run]\nfoo = 1\n").unwrap();
    assert!(!chsurf(&["simulate", "--config", bad.to_str().unwrap()]).status.success());

    assert!(!chsurf(&["simulate", "--scheme", "rk4"]).status.success());
    assert!(!chsurf(&["inspect", dir.path().join("missing.chsf").to_str().unwrap()]).status.success());
}

#[test]
fn inspect_rejects_flipped_magic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = chsurf(&[
        "simulate", "--nx", "8", "--dt", "1e-3", "--t-end", "1e-3",
        "--snapshot-times", "0", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let snap = out.join("snapshot_000_rho.chsf");
    let o = chsurf(&["inspect", snap.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("field  rho"));

    let mut bytes = fs::read(&snap).unwrap();
    bytes[0] = b'X';
    let bad = dir.path().join("bad.chsf");
    fs::write(&bad, bytes).unwrap();
    let o = chsurf(&["inspect", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("format error at byte 0"));
}

#[test]
fn energy_scan_and_convergence_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan");
    let o = chsurf(&[
        "energy-scan", "--nx", "16", "--t-end", "2e-2", "--ic", "spinodal", "--seed", "2",
        "--dts", "1e-2,5e-3", "--schemes", "ls1,ls2,implicit", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 6);
    for name in ["energy_ls1_dt1e-2.csv", "energy_ls2_dt5e-3.csv", "energy_implicit_dt1e-2.csv"] {
        let series = rows(&out.join(name));
        assert_eq!(series.len(), if name.contains("1e-2") { 3 } else { 5 });
    }

    let out = dir.path().join("conv");
    let o = chsurf(&[
        "converge", "--nx", "16", "--t-end", "8e-3", "--ladder", "4e-3,2e-3",
        "--benchmark-dt", "1e-3", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "scheme,dt,steps,error,error_rms,order");
    assert_eq!(text.lines().count(), 5);

    let o = chsurf(&[
        "converge", "--nx", "16", "--ladder", "1e-3,2e-3", "--out", out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
}
