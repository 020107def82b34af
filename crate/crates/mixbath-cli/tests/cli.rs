use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn mixbath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixbath"))
        .args(args)
        .env_remove("MIXBATH_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn cfg(name: &str) -> String {
    configs().join(name).display().to_string()
}

#[test]
fn asymptote_prints_markov_limit_and_writes_manifest() {
    let out = scratch("asym");
    let o = mixbath(&[
        "asymptote",
        "--config",
        &cfg("markov_bose.cfg"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    let line = text
        .lines()
        .find(|l| l.starts_with("markov_limit = "))
        .unwrap();
    let v: f64 = line["markov_limit = ".len()..].parse().unwrap();
    assert!((v - 1.0 / (std::f64::consts::E - 1.0)).abs() < 1e-9, "{v}");
    let manifests: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".manifest.json"))
        .collect();
    assert_eq!(manifests.len(), 1);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(manifests[0].path()).unwrap()).unwrap();
    assert_eq!(m["command"], "asymptote");
    assert!(m["scenario_config"]
        .as_str()
        .unwrap()
        .contains("omega_mode = bare"));
}

#[test]
fn evolve_is_reproducible_and_settles_on_the_asymptote() {
    let a = scratch("evolve-a");
    let b = scratch("evolve-b");
    let run = |dir: &Path| {
        let o = mixbath(&[
            "evolve",
            "--config",
            &cfg("fig2_ff1f2.cfg"),
            "--t-max",
            "50",
            "--dt",
            "0.005",
            "--method",
            "diffusion",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        PathBuf::from(stdout(&o).trim())
    };
    let (pa, pb) = (run(&a), run(&b));
    assert_eq!(pa.file_name(), pb.file_name());
    let (ta, tb) = (
        std::fs::read_to_string(&pa).unwrap(),
        std::fs::read_to_string(&pb).unwrap(),
    );
    // only the manifest path in the first line may differ
    assert_eq!(
        ta.lines().skip(1).collect::<Vec<_>>(),
        tb.lines().skip(1).collect::<Vec<_>>()
    );
    let mut lines = ta.lines();
    let first = lines.next().unwrap();
    assert!(first.starts_with("# manifest: ") && first.ends_with(".manifest.json"));
    assert!(Path::new(&first["# manifest: ".len()..]).exists());
    assert_eq!(lines.next(), Some("t,n,flag"));

    let last = ta.lines().last().unwrap();
    let cols: Vec<&str> = last.split(',').collect();
    assert_eq!(cols[0].parse::<f64>().unwrap(), 50.0);
    let n_end: f64 = cols[1].parse().unwrap();
    let asym = mixbath(&[
        "asymptote",
        "--config",
        &cfg("fig2_ff1f2.cfg"),
        "--out",
        a.to_str().unwrap(),
    ]);
    let text = stdout(&asym);
    let line = text
        .lines()
        .find(|l| l.starts_with("n_inf_pure = "))
        .unwrap();
    let n_inf: f64 = line["n_inf_pure = ".len()..].parse().unwrap();
    assert!((n_end - n_inf).abs() < 2e-3, "{n_end} vs {n_inf}");
}

#[test]
fn transport_columns_follow_the_config() {
    let out = scratch("transport");
    let o = mixbath(&[
        "transport",
        "--config",
        &cfg("fig2_fb1f2.cfg"),
        "--t-max",
        "2",
        "--dt",
        "0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(stdout(&o).trim()).unwrap();
    assert_eq!(
        text.lines().nth(1),
        Some("t,lambda,D,lambda_f,lambda_b,D_1,D_2,flagged")
    );
    assert_eq!(text.lines().count(), 2 + 41);
}

#[test]
fn scan_writes_one_row_per_point() {
    let out = scratch("scan");
    let o = mixbath(&[
        "scan",
        "--config",
        &cfg("fig2_bf1b2.cfg"),
        "--param",
        "alpha.2",
        "--from",
        "0.02",
        "--to",
        "0.06",
        "--points",
        "3",
        "--observable",
        "friction",
        "--t-max",
        "20",
        "--dt",
        "0.02",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(stdout(&o).trim()).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("2.0000000000000000e-2,"));
}

#[test]
fn exit_codes() {
    let out = scratch("codes");
    let dir = out.to_str().unwrap();
    let bad = out.join("bad.cfg");
    std::fs::write(&bad, "[system]\nstatistics = fermi\ncolour = red\n").unwrap();
    let o = mixbath(&["asymptote", "--config", bad.to_str().unwrap(), "--out", dir]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let o = mixbath(&["asymptote", "--config", "does-not-exist.cfg", "--out", dir]);
    assert_eq!(o.status.code(), Some(1));

    let o = mixbath(&[
        "evolve",
        "--config",
        &cfg("fig2_fb1f2.cfg"),
        "--method",
        "closed-form",
        "--out",
        dir,
    ]);
    assert_eq!(o.status.code(), Some(1));

    let o = mixbath(&[
        "evolve",
        "--config",
        &cfg("fig2_bb1b2.cfg"),
        "--method",
        "discrete",
        "--modes",
        "20000",
        "--out",
        dir,
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let o = Command::new(env!("CARGO_BIN_EXE_mixbath"))
        .args([
            "asymptote",
            "--config",
            &cfg("markov_fermi.cfg"),
            "--out",
            dir,
        ])
        .env("MIXBATH_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_mixbath"))
        .args([
            "asymptote",
            "--config",
            &cfg("markov_fermi.cfg"),
            "--out",
            dir,
        ])
        .env("MIXBATH_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn verify_exit_code_reflects_the_report() {
    let out = scratch("verify");
    let o = mixbath(&["verify", "--quick", "--out", out.to_str().unwrap()]);
    let text = stdout(&o);
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
        .collect();
    assert_eq!(lines.len(), 8, "{text}");
    let any_fail = lines.iter().any(|l| l.starts_with("FAIL"));
    assert_eq!(o.status.code(), Some(if any_fail { 3 } else { 0 }));
    assert!(out.join("verify-20240601.manifest.json").exists());
}
