use std::path::{Path, PathBuf};
use std::process::Command;

fn mk() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mk"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const SMALL_LINDBLAD: &str = r#"
kind = "evolve-lindblad"
seed = 3
[physics]
beta = 1.0
hbar = 1.0
lambda = 0.5
[bath]
family = "flat"
[numerics]
dim = 32
periods = 0.25
[lindblad]
random_matrices = 4
"#;

const SMALL_CHAIN: &str = r#"
kind = "chain-oracle"
[chain]
modes = 32
samples = 400
corr_points = 5
relax_samples = 50
relax_t_max = 5.0
"#;

fn run_in(dir: &Path, kind: &str, config: &Path, seed: &str) -> std::process::Output {
    mk().args([kind, "--config"]).arg(config).arg("--out").arg(dir).args(["--seed", seed]).output().unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn lists_every_kind() {
    let out = mk().arg("--list-kinds").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 10);
    for k in ["bath-corr", "gme-compare", "secular-check", "chain-oracle"] {
        assert!(text.lines().any(|l| l.starts_with(k)), "{k}");
    }
}

#[test]
fn same_seed_gives_identical_outputs() {
    let root = scratch("determinism");
    for (kind, text) in [("evolve-lindblad", SMALL_LINDBLAD), ("chain-oracle", SMALL_CHAIN)] {
        let cfg = root.join(format!("{kind}.toml"));
        std::fs::write(&cfg, text).unwrap();
        let (a, b, c) = (root.join(format!("{kind}-a")), root.join(format!("{kind}-b")), root.join(format!("{kind}-c")));
        run_in(&a, kind, &cfg, "9");
        run_in(&b, kind, &cfg, "9");
        run_in(&c, kind, &cfg, "10");
        let (fa, fb, fc) = (files(&a), files(&b), files(&c));
        assert!(fa.iter().any(|(n, _)| n.ends_with(".csv")) && fa.iter().any(|(n, _)| n.ends_with("_manifest.json")));
        assert_eq!(fa, fb, "{kind}: outputs differ between identical runs");
        assert_ne!(fa, fc, "{kind}: seed has no effect");
    }
}

#[test]
fn manifest_records_inputs_and_assertions() {
    let root = scratch("manifest");
    let cfg = root.join("l.toml");
    std::fs::write(&cfg, SMALL_LINDBLAD).unwrap();
    let out = run_in(&root.join("out"), "evolve-lindblad", &cfg, "4");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = std::fs::read_to_string(root.join("out/evolve-lindblad_manifest.json")).unwrap();
    let m: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(m["seed"], 4);
    assert_eq!(m["passed"], true);
    assert_eq!(m["config"]["numerics"]["dim"], 32);
    assert!(m["derived"]["coefficients"]["d1"].is_number());
    assert!(m["assertions"].as_array().unwrap().iter().all(|a| a["passed"] == true));
    let csv = std::fs::read_to_string(root.join("out/evolve-lindblad_trajectory.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with('#'));
}

#[test]
fn failing_assertion_sets_exit_code() {
    let root = scratch("failing");
    let cfg = root.join("gme.toml");
    // the classical operator has a positive diffusion determinant, so the
    // "goes negative" check fails once the narrow direction is wide
    std::fs::write(&cfg, "kind = \"gme-compare\"\n[physics]\nlambda = 0.3\n[gme]\nnarrow = 0.05\nomega0_list = [1.0]\npositivity_grid_n = 64\nresidual_grid_n = 32\n").unwrap();
    let out = run_in(&root.join("out"), "gme-compare", &cfg, "1");
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(root.join("out/gme-compare_manifest.json").is_file());
}

#[test]
fn rejects_mismatched_kind_and_bad_config() {
    let root = scratch("reject");
    let cfg = root.join("l.toml");
    std::fs::write(&cfg, SMALL_LINDBLAD).unwrap();
    assert_eq!(run_in(&root, "wigner", &cfg, "1").status.code(), Some(2));
    std::fs::write(&cfg, "[physics]\nbeat = 1.0\n").unwrap();
    assert_eq!(run_in(&root, "wigner", &cfg, "1").status.code(), Some(2));
}
