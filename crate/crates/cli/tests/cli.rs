use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BASE: &str = r#"version = 1

[model]
betas = [0.5, 0.3]
nu = 1.0
burn_in = 200

[hypothesis]
g0 = { kind = "gaussian", sigma = 1.0 }
m = 4
alpha = 0.05

[alternative]
h = { kind = "gaussian", sigma = 2.0 }
rho = [0.0, 3.0]

[contamination]
pi = { kind = "point_mass", c = 10.0 }
gamma = [0.0, 0.5, 1.0]

[experiment]
n = [300]
replications = 20
seed = 11
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symchi")).args(args).output().unwrap()
}

fn setup(config: &str) -> (TempDir, String, String) {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let (c, o) = (cfg.to_str().unwrap().to_string(), out.to_str().unwrap().to_string());
    (dir, c, o)
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn power_grid_report() {
    let (_dir, cfg, out) = setup(BASE);
    let o = run(&["power", "--config", &cfg, "--out", &out, "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("level check"));
    let rows = csv_rows(&Path::new(&out).join("power.csv"));
    assert_eq!(rows.len(), 3 * 2);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&out).join("power.json")).unwrap()).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 6);
    assert!(Path::new(&out).join("timing.json").exists());
    let resolved = fs::read_to_string(Path::new(&out).join("resolved.toml")).unwrap();
    assert!(resolved.contains("threads = 2"));
    assert!(Path::new(&out).join("plot_power_n300_gamma0.csv").exists());
}

#[test]
fn single_cell_single_replication() {
    let cfg_text = BASE
        .replace("rho = [0.0, 3.0]", "rho = [0.0]")
        .replace("gamma = [0.0, 0.5, 1.0]", "gamma = [0.0]");
    let (_dir, cfg, out) = setup(&cfg_text);
    let o = run(&["power", "--config", &cfg, "--out", &out, "--replications", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&Path::new(&out).join("power.csv"));
    assert_eq!(rows.len(), 1);
    assert!(["0", "1"].contains(&&rows[0][6]));
    assert_eq!(&rows[0][7], "0");
}

#[test]
fn seed_override_is_reproducible() {
    let (_dir, cfg, out) = setup(BASE);
    let read = |o: &str| fs::read(Path::new(o).join("power.json")).unwrap();
    assert_eq!(run(&["power", "--config", &cfg, "--out", &out, "--seed", "5", "--threads", "1"]).status.code(), Some(0));
    let a = read(&out);
    assert_eq!(run(&["power", "--config", &cfg, "--out", &out, "--seed", "5", "--threads", "3"]).status.code(), Some(0));
    assert_eq!(a, read(&out));
    assert_eq!(run(&["power", "--config", &cfg, "--out", &out, "--seed", "6"]).status.code(), Some(0));
    assert_ne!(a, read(&out));
}

#[test]
fn robustness_table() {
    let (_dir, cfg, out) = setup(BASE);
    let o = run(&["robustness", "--config", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("bound holds: true"));
    assert!(stdout.contains("decay as gamma -> 0: monotone"));
    let rows = csv_rows(&Path::new(&out).join("robustness.csv"));
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let gap: f64 = r[5].parse().unwrap();
        let bound: f64 = r[6].parse().unwrap();
        assert!(gap <= bound);
        if &r[1] == "0" {
            assert_eq!(gap, 0.0);
        }
    }
}

#[test]
fn edf_check_files() {
    let (_dir, cfg, out) = setup(&BASE.replace("rho = [0.0, 3.0]", "rho = [0.0]"));
    let o = run(&["edf-check", "--config", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&Path::new(&out).join("edf_check.csv")).len(), 3 * 9);
}

#[test]
fn simulate_then_test_round_trip() {
    let (dir, cfg, out) = setup(BASE);
    let o = run(&["simulate", "--config", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(0));
    let y = Path::new(&out).join("y.csv");
    assert_eq!(fs::read_to_string(&y).unwrap().lines().count(), 1 + 302);
    assert_eq!(csv_rows(&Path::new(&out).join("series.csv")).len(), 302);

    let with_data = format!("{BASE}\n[data]\npath = \"out/y.csv\"\n");
    let data_cfg = dir.path().join("data.toml");
    fs::write(&data_cfg, with_data).unwrap();
    let o = run(&["test", "--config", data_cfg.to_str().unwrap(), "--out", &out]);
    let code = o.status.code().unwrap();
    assert!(code == 0 || code == 1);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["dof"], 3);
    assert_eq!(v["reject"].as_bool().unwrap(), code == 1);

    // the simulated path used by `test` without data is the same series
    let o2 = run(&["test", "--config", &cfg, "--out", &out]);
    let v2: serde_json::Value = serde_json::from_slice(&o2.stdout).unwrap();
    assert_eq!(v["chi2"], v2["chi2"]);
}

#[test]
fn heavy_contamination_rejects() {
    let cfg_text = BASE
        .replace("gamma = [0.0, 0.5, 1.0]", "gamma = [30.0]")
        .replace("n = [300]", "n = [2000]");
    let (_dir, cfg, out) = setup(&cfg_text);
    let o = run(&["test", "--config", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(Path::new(&out).join("test.json").exists());
}

#[test]
fn null_p_values_spread_over_seeds() {
    let (_dir, cfg, out) = setup(&BASE.replace("n = [300]", "n = [2000]"));
    let mut p = Vec::new();
    for seed in 0..20 {
        let o = run(&["test", "--config", &cfg, "--out", &out, "--seed", &seed.to_string()]);
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        p.push(v["p_value"].as_f64().unwrap());
    }
    let below_half = p.iter().filter(|x| **x < 0.5).count();
    assert!((3..=17).contains(&below_half), "{p:?}");
}

#[test]
fn errors_exit_with_two() {
    let (dir, cfg, out) = setup(&BASE.replace("m = 4", "m = 1"));
    let o = run(&["test", "--config", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("m must exceed 1"));

    let missing = dir.path().join("nope.toml");
    assert_eq!(run(&["test", "--config", missing.to_str().unwrap()]).status.code(), Some(2));

    let (dir2, cfg2, out2) = setup(&format!("{BASE}\n[data]\npath = \"absent.csv\"\n"));
    assert_eq!(run(&["test", "--config", &cfg2, "--out", &out2]).status.code(), Some(2));

    let bad = dir2.path().join("bad.csv");
    fs::write(&bad, "y\n1.0\nabc\n").unwrap();
    let (_d3, cfg3, out3) = setup(&format!("{BASE}\n[data]\npath = \"{}\"\n", bad.display()));
    let o = run(&["test", "--config", &cfg3, "--out", &out3]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("not a number"));

    let (_d4, cfg4, out4) = setup(&BASE.replace("betas = [0.5, 0.3]", "betas = [0.7, 0.5]"));
    let o = run(&["power", "--config", &cfg4, "--out", &out4]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("not stationary"));

    let (_d5, cfg5, out5) = setup("version = 1\n[model]\norder = 1\n");
    assert_eq!(run(&["power", "--config", &cfg5, "--out", &out5]).status.code(), Some(2));

    // constant data give a singular lag design
    let flat = dir.path().join("flat.csv");
    fs::write(&flat, "5\n".repeat(50)).unwrap();
    let (_d6, cfg6, out6) = setup(&format!("{BASE}\n[data]\npath = \"{}\"\n", flat.display()));
    let o = run(&["test", "--config", &cfg6, "--out", &out6]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("singular"));
}
