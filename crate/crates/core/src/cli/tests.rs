use std::path::Path;
use std::time::Instant;

use super::*;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn call(cfg: &Path, out: &Path, cmd: &str) -> i32 {
    run(["homlab", cmd, "--quiet", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()])
}

const SMALL: &str = r#"
[geometry]
alpha = 1.0
shape = { kind = "sphere", radius = 0.35 }

[ladder]
eps = [0.5, 0.25]

[solver]
resistance = [[0.3, 0.0, 0.0], [0.0, 0.3, 0.0], [0.0, 0.0, 0.3]]
"#;

#[test]
fn configuration_errors_exit_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for body in [
        "[geometry]\nalpah = 1.5\n",
        "[physics]\ngamma = 0.5\n",
        "[ladder]\neps = [1.5]\n",
        "[geometry]\nalpha = 0.5\n",
        "[physics]\nm0 = 1.0\nrho0 = 1.0\n",
        "[geometry]\nshape = { kind = \"cube\" }\n",
        "[physics]\nf = { kind = \"vortex\" }\n",
        "[solver.stokes]\nmomentum = -1.0\n",
        "[output]\nworkers = 0\n",
        "not toml at all [",
    ] {
        let cfg = write_config(tmp.path(), body);
        assert_eq!(call(&cfg, &out, "darcy"), EXIT_CONFIG, "{body}");
        assert!(!out.exists(), "{body}");
    }
    let missing = tmp.path().join("absent.toml");
    assert_eq!(call(&missing, &out, "darcy"), EXIT_CONFIG);
}

#[test]
fn usage_errors_exit_4() {
    assert_eq!(run(["homlab", "frobnicate"]), EXIT_USAGE);
    assert_eq!(run(["homlab"]), EXIT_USAGE);
    assert_eq!(run(["homlab", "darcy", "--workers", "many"]), EXIT_USAGE);
    assert_eq!(run(["homlab", "--help"]), EXIT_OK);
}

#[test]
fn zero_forcing_darcy_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), SMALL);
    assert_eq!(call(&cfg, &out, "darcy"), EXIT_OK);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("darcy.json")).unwrap()).unwrap();
    assert_eq!(report["partial"], false);
    assert_eq!(report["records"].as_array().unwrap().len(), 2);
    for r in report["records"].as_array().unwrap() {
        assert_eq!(r["u_error"], 0.0);
        assert_eq!(r["u_rescaled_l2"], 0.0);
    }
    assert_eq!(report["config"]["geometry"]["alpha"], 1.0);
    assert_eq!(report["config"]["physics"]["gamma"], 2.0);
    assert_eq!(report["config"]["resolved"]["m0"], 1.0);
    let table = std::fs::read_to_string(out.join("darcy.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("eps,sigma,h,nx,ny,nz,u_error"));
    assert!(out.join("darcy_fits.csv").exists());
    assert!(!out.join("darcy.progress.json").exists());
}

#[test]
fn tables_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}\n[physics]\ng = {{ kind = \"vortex\", amplitude = 1.0 }}\n");
    let cfg = write_config(tmp.path(), &body);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(call(&cfg, &a, "darcy"), EXIT_OK);
    assert_eq!(run(["homlab", "darcy", "--quiet", "--workers", "2", "--config", cfg.to_str().unwrap(), "--output", b.to_str().unwrap()]), EXIT_OK);
    for f in ["darcy.csv", "darcy_fits.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn resistance_is_cached() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let body = "[geometry]\nshape = { kind = \"sphere\", radius = 1.0 }\n[solver]\nresistance_ladder = [4.0, 6.0]\n";
    let cfg = write_config(tmp.path(), body);
    assert_eq!(call(&cfg, &out, "resistance"), EXIT_OK);
    let first = std::fs::read(out.join("resistance.json")).unwrap();
    let t = Instant::now();
    assert_eq!(call(&cfg, &out, "resistance"), EXIT_OK);
    assert!(t.elapsed().as_secs_f64() < 1.0);
    assert_eq!(first, std::fs::read(out.join("resistance.json")).unwrap());
    let doc: serde_json::Value = serde_json::from_slice(&first).unwrap();
    let r = doc["resistance"]["r"][0][0].as_f64().unwrap();
    // crude truncations: only the order of magnitude of 3π/4 is checked
    assert!(r > 1.0 && r < 4.0, "{r}");
}

#[test]
fn solver_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let body = "[geometry]\nshape = { kind = \"sphere\", radius = 1.0 }\n[solver]\nresistance_ladder = [4.0, 6.0]\n[solver.stokes]\nmax_outer = 1\n";
    let cfg = write_config(tmp.path(), body);
    assert_eq!(call(&cfg, &out, "resistance"), EXIT_NUMERICAL);
    assert!(!out.join("resistance.json").exists());
}

#[test]
fn defaults_round_trip() {
    let cfg = RunConfig::default();
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    let r = cfg.resolve(None).unwrap();
    assert_eq!(r.ladder.eps.len(), 3);
    assert_eq!(r.ladder.beta, 3.0);
    assert!((r.m0 - 1.0).abs() < 1e-15);
}
