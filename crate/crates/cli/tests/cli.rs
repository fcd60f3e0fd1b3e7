use std::path::Path;
use std::process::Command;

use pclamb::config::RunConfig;
use pclamb::{run_ensemble, run_lineshape, run_lsrf, run_shift_sweep, CliError};

/// Small free-space run: 27 plane waves, 6³ mesh, grid up to u = 1.5.
fn small_vacuum(dir: &Path) -> RunConfig {
    let text = format!(
        r#"
[structure]
eps_background = 1.0

[basis]
cutoff = 3.0

[lsrf]
mesh = [6, 6, 6]

[lsrf.grid]
spacing = 0.01
n_bins = 150

[quadrature]
omega_op_reduced = 1.3

[beta]
u_min = 0.05
u_max = 1.2
n_points = 24

[sweep]
steps = 4
methods = ["decomposed"]

[ensemble]
n_atoms = 12

[lineshape]
n_points = 801
half_widths = 200.0

[output]
dir = "{}"
"#,
        dir.display()
    );
    RunConfig::from_toml(&text).unwrap()
}

fn small_opal(dir: &Path) -> RunConfig {
    let mut cfg = small_vacuum(dir);
    cfg.structure.eps_background = 12.96;
    cfg
}

fn pclamb() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pclamb"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn default_config_round_trips() {
    let cfg = RunConfig::default();
    let text = cfg.to_toml();
    let back = RunConfig::from_toml(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.to_toml(), text);
    assert!(RunConfig::from_toml("").unwrap() == cfg);
}

#[test]
fn custom_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_vacuum(dir.path());
    cfg.lsrf.n_bands = Some(40);
    cfg.atom.hydrogen_n_max = 5;
    cfg.positions.points.push([0.125, 0.5, 0.0625]);
    let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn validation_rejects_out_of_range_values() {
    let cases = [
        ("[structure]\nfilling_fraction = -0.2\n", "filling"),
        ("[quadrature]\nomega_op_reduced = 3.6\n", "exceeds the frequency grid"),
        ("[sweep]\nlevels = [\"2x\"]\n", "unknown level"),
        ("[beta]\nu_max = 3.6\n", "[beta]"),
        ("[ensemble]\nn_atoms = 0\n", "[ensemble]"),
        ("[structure]\nwidth = 3\n", "unknown field"),
    ];
    for (text, needle) in cases {
        let err = RunConfig::from_toml(text).and_then(|c| c.validate());
        match err {
            Err(CliError::Config(msg)) => assert!(msg.contains(needle), "{text:?}: {msg}"),
            other => panic!("{text:?}: expected a config error, got {other:?}"),
        }
    }
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();

    let usage = pclamb().arg("no-such-command").output().unwrap();
    assert_eq!(usage.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[structure]\nfilling_fraction = 1.5\n").unwrap();
    let config = pclamb().args(["--config", bad.to_str().unwrap(), "bands"]).output().unwrap();
    assert_eq!(config.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&config.stderr).contains("configuration error"));

    // a 1-vector basis cannot reach the top of the frequency grid
    let mut cfg = small_vacuum(&dir.path().join("numeric"));
    cfg.basis.cutoff = 0.5;
    let numeric_cfg = dir.path().join("numeric.toml");
    std::fs::write(&numeric_cfg, cfg.to_toml()).unwrap();
    let numeric = pclamb().args(["--config", numeric_cfg.to_str().unwrap(), "lsrf"]).output().unwrap();
    assert_eq!(numeric.status.code(), Some(4), "{}", String::from_utf8_lossy(&numeric.stderr));

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let io = pclamb()
        .args(["--out", blocker.join("sub").to_str().unwrap(), "bands"])
        .output()
        .unwrap();
    assert_eq!(io.status.code(), Some(5));
}

#[test]
fn config_command_prints_effective_toml() {
    let out = pclamb().args(["--seed", "7", "config"]).output().unwrap();
    assert!(out.status.success());
    let cfg = RunConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.ensemble.seed, 7);
}

#[test]
fn vacuum_lsrf_is_close_to_u_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_vacuum(&dir.path().join("a"));
    let report = run_lsrf(&cfg).unwrap();
    let text = read(&cfg.output.dir.join("lsrf.csv"));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap(), vec!["position_index", "u", "g"]);
    for row in rdr.records() {
        let row = row.unwrap();
        let u: f64 = row[1].parse().unwrap();
        let g: f64 = row[2].parse().unwrap();
        if (0.3..=1.2).contains(&u) {
            assert!((g / u - 1.0).abs() < 0.1, "u = {u}, g = {g}");
        }
    }
    let meta: serde_json::Value = serde_json::from_str(&read(&report.metadata)).unwrap();
    assert_eq!(meta["command"], "lsrf");
    assert_eq!(meta["config"]["basis"]["cutoff"], 3.0);

    let cfg_b = small_vacuum(&dir.path().join("b"));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    pool.install(|| run_lsrf(&cfg_b)).unwrap();
    assert_eq!(text, read(&cfg_b.output.dir.join("lsrf.csv")));
}

#[test]
fn shift_sweep_keeps_2s_at_the_vacuum_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_opal(dir.path());
    run_shift_sweep(&cfg).unwrap();
    let text = read(&cfg.output.dir.join("shifts.csv"));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "level",
            "position_index",
            "a_nm",
            "shift_reduced",
            "shift_mhz",
            "shift_vacuum_mhz",
            "n_roots",
            "roots_mhz",
            "method"
        ]
    );
    let mut n = 0;
    for row in rdr.records() {
        let row = row.unwrap();
        if &row[0] == "2s" {
            assert_eq!(row[4], row[5]);
            n += 1;
        }
    }
    // 3 positions x 4 lattice constants
    assert_eq!(n, 12);
}

#[test]
fn ensemble_is_reproducible_from_its_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: u64| {
        let mut cfg = small_opal(&dir.path().join(name));
        cfg.ensemble.seed = seed;
        let report = run_ensemble(&cfg).unwrap();
        (read(&cfg.output.dir.join("ensemble_atoms.csv")), report.summary)
    };
    let (a, summary) = run("a", 5);
    let (b, _) = run("b", 5);
    let (c, _) = run("c", 6);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(summary["n_atoms"], 12);
    assert_eq!(summary["failures"], 0);
    assert!(summary["width_mhz"].as_f64().unwrap() > 0.0);
}

#[test]
fn lineshape_weights_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_vacuum(dir.path());
    cfg.positions.points.truncate(1);
    let report = run_lineshape(&cfg).unwrap();
    let weight = report.summary["positions"][0]["total_weight"].as_f64().unwrap();
    assert!((weight - 1.0).abs() < 0.02, "{weight}");
    // free space has no bound state, but the pole file keeps its header
    assert_eq!(read(&cfg.output.dir.join("lineshape_poles.csv")), "position_index,omega_offset,weight\n");
}
