use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn curvgas(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvgas"))
        .current_dir(dir)
        .env_remove("CURVGAS_THREADS")
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn listed(m: &Value) -> Vec<String> {
    m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn sample_is_byte_identical_for_a_fixed_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["--seed", "7", "--out", out, "sample", "--n", "6", "--steps", "400", "--chains", "2"];
    assert!(curvgas(tmp.path(), &args("a")).status.success());
    assert!(curvgas(tmp.path(), &args("b")).status.success());
    for f in ["samples.csv", "energy_trace.csv", "density.csv", "chains.json"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs between identical runs");
    }
    let m = manifest(&tmp.path().join("a"));
    let samples = m["outputs"].as_array().unwrap().iter().find(|f| f["path"] == "samples.csv").unwrap();
    // 2 chains × (400 / 10) stored samples × 6 particles
    assert_eq!(samples["rows"], 2 * 40 * 6);
}

#[test]
fn different_seeds_give_different_chains() {
    let tmp = tempfile::tempdir().unwrap();
    for (seed, out) in [("1", "a"), ("2", "b")] {
        assert!(curvgas(tmp.path(), &["--seed", seed, "--out", out, "sample", "--n", "4", "--steps", "200"]).status.success());
    }
    assert_ne!(
        fs::read(tmp.path().join("a/samples.csv")).unwrap(),
        fs::read(tmp.path().join("b/samples.csv")).unwrap()
    );
}

#[test]
fn meanfield_below_ground_state_is_infeasible() {
    let tmp = tempfile::tempdir().unwrap();
    let out = curvgas(tmp.path(), &["--out", "r", "meanfield", "--mode", "microcanonical", "--eps", "-5"]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("\"infeasible_energy\""), "{stderr}");
    let dir = tmp.path().join("r");
    let err: Value = serde_json::from_str(&fs::read_to_string(dir.join("error.json")).unwrap()).unwrap();
    assert_eq!(err["error"], "infeasible_energy");
    let m = manifest(&dir);
    assert_eq!(m["status"], "error");
    assert_eq!(m["exit_code"], 3);
    assert!(listed(&m).contains(&"error.json".to_string()));
}

#[test]
fn nirenberg_two_bump_benchmark() {
    let tmp = tempfile::tempdir().unwrap();
    let out = curvgas(tmp.path(), &["--out", "r", "nirenberg"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("r");
    let m = manifest(&dir);
    let files = listed(&m);
    for f in ["caloric.csv", "Q.csv", "u.csv", "residual.json"] {
        assert!(files.contains(&f.to_string()), "{f} missing from manifest");
        assert!(dir.join(f).exists());
    }
    let q = m["outputs"].as_array().unwrap().iter().find(|f| f["path"] == "Q.csv").unwrap();
    assert_eq!(q["rows"], 32 * 64);
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.join("residual.json")).unwrap()).unwrap();
    assert!((r["result"]["beta"].as_f64().unwrap() + 4.0).abs() < 1e-6);
    assert!((r["result"]["gauss_bonnet"].as_f64().unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-6);
}

#[test]
fn monotone_axial_curvature_is_obstructed() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "command = \"nirenberg\"\n[field]\nkind = \"one_bump\"\n").unwrap();
    let out = curvgas(tmp.path(), &["--config", "c.toml", "--out", "r"]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(manifest(&tmp.path().join("r"))["outcome"], "obstructed");
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "command = \"radial\"\n[radial]\nu0 = 0.5\nbogus = 1\n").unwrap();
    let out = curvgas(tmp.path(), &["--config", "c.toml", "--out", "r"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    assert!(!tmp.path().join("r").exists());
}

#[test]
fn validation_error_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "command = \"sample\"\n[ensemble]\nsigma = -1.0\n").unwrap();
    let out = curvgas(tmp.path(), &["--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ensemble.sigma"));
}

#[test]
fn missing_command_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(curvgas(tmp.path(), &[]).status.code(), Some(2));
}

#[test]
fn config_hash_ignores_key_order() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("a.toml"),
        "command = \"radial\"\nseed = 3\n[radial]\nu0 = 0.2\nr_max = 100.0\n",
    )
    .unwrap();
    fs::write(
        tmp.path().join("b.toml"),
        "[radial]\nr_max = 100.0\nu0 = 0.2\n\n[lln]\nsigma = 0.1\n",
    )
    .unwrap();
    assert!(curvgas(tmp.path(), &["--config", "a.toml", "--out", "a"]).status.success());
    assert!(curvgas(tmp.path(), &["--config", "b.toml", "--seed", "3", "--out", "b", "radial"]).status.success());
    let (a, b) = (manifest(&tmp.path().join("a")), manifest(&tmp.path().join("b")));
    assert_eq!(a["config_hash"], b["config_hash"]);
    assert!(curvgas(tmp.path(), &["--config", "a.toml", "--seed", "4", "--out", "c"]).status.success());
    assert_ne!(a["config_hash"], manifest(&tmp.path().join("c"))["config_hash"]);
}

#[test]
fn thread_flag_beats_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |args: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_curvgas"));
        c.current_dir(tmp.path()).env_remove("CURVGAS_THREADS").arg("--quiet").args(args);
        if let Some(v) = env {
            c.env("CURVGAS_THREADS", v);
        }
        c.output().unwrap()
    };
    assert!(run(&["--out", "e", "radial"], Some("3")).status.success());
    assert_eq!(manifest(&tmp.path().join("e"))["threads"], 3);
    assert!(run(&["--threads", "2", "--out", "f", "radial"], Some("3")).status.success());
    assert_eq!(manifest(&tmp.path().join("f"))["threads"], 2);
    assert_eq!(run(&["--out", "g", "radial"], Some("zero")).status.code(), Some(2));
}

#[test]
fn empty_caloric_result_keeps_header() {
    let tmp = tempfile::tempdir().unwrap();
    let out = curvgas(tmp.path(), &["--out", "r", "caloric", "--eps-min", "-5", "--eps-max", "-4", "--points", "2"]);
    assert_eq!(out.status.code(), Some(4));
    let dir = tmp.path().join("r");
    assert_eq!(fs::read_to_string(dir.join("caloric.csv")).unwrap(), "eps,s,beta_solver,beta_fd,residual\n");
    let m = manifest(&dir);
    let cal = m["outputs"].as_array().unwrap().iter().find(|f| f["path"] == "caloric.csv").unwrap();
    assert_eq!(cal["rows"], 0);
}

#[test]
fn caloric_and_dos_headers() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(curvgas(tmp.path(), &["--out", "c", "caloric", "--eps-min", "0", "--eps-max", "0.2", "--points", "3"]).status.success());
    let cal = fs::read_to_string(tmp.path().join("c/caloric.csv")).unwrap();
    assert_eq!(cal.lines().next(), Some("eps,s,beta_solver,beta_fd,residual"));
    assert_eq!(cal.lines().count(), 4);
    assert!(curvgas(tmp.path(), &["--out", "d", "dos", "--n", "2", "--bins", "10"]).status.success());
    let dos = fs::read_to_string(tmp.path().join("d/dos.csv")).unwrap();
    assert_eq!(dos.lines().next(), Some("E,lnPhiPrime,S,beta"));
    assert_eq!(dos.lines().count(), 11);
}

#[test]
fn radial_kappa_out_of_range() {
    let tmp = tempfile::tempdir().unwrap();
    let out = curvgas(tmp.path(), &["--out", "r", "radial", "--kappa", "20"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kappa_out_of_range"));
}

#[test]
fn kappa_beta_and_two_species_run() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(curvgas(tmp.path(), &["--out", "k", "kappa-beta", "--beta", "-1", "-2"]).status.success());
    let k = fs::read_to_string(tmp.path().join("k/kappa_beta.csv")).unwrap();
    assert_eq!(k.lines().count(), 3);
    assert!(curvgas(tmp.path(), &["--out", "t", "two-species", "--eps", "0.01", "0.02"]).status.success());
    let t = fs::read_to_string(tmp.path().join("t/two_species.csv")).unwrap();
    for line in t.lines().skip(1) {
        let beta: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(beta < 0.0);
    }
}

#[test]
fn manifest_row_counts_match_files() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(curvgas(tmp.path(), &["--out", "r", "sample", "--n", "4", "--steps", "100"]).status.success());
    let dir = tmp.path().join("r");
    let m = manifest(&dir);
    assert!(!dir.join(".manifest.json.tmp").exists());
    for f in m["outputs"].as_array().unwrap() {
        let path = dir.join(f["path"].as_str().unwrap());
        let text = fs::read_to_string(&path).unwrap();
        let rows = f["rows"].as_u64().unwrap() as usize;
        match f["format"].as_str().unwrap() {
            "csv" => assert_eq!(text.lines().count() - 1, rows, "{}", path.display()),
            "jsonl" => assert_eq!(text.lines().count(), rows),
            _ => assert_eq!(rows, 1),
        }
    }
}
