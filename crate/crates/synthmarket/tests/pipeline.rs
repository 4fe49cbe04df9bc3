use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use synthmarket::commands::{self, guardrail_message, parallel_coverage, scenario_file, Context};
use synthmarket::config::BiasLabConfig;
use synthmarket::manifest::Manifest;
use synthmarket::{io, schema, PipelineConfig};
use synthmarket_core::bias::monte_carlo_coverage;
use synthmarket_core::generator::scenario_seed;
use synthmarket_core::sim::DeskSim;

/// 500 desk rows, the last 100 held out.
fn write_data(dir: &Path) -> (PathBuf, String) {
    let panel = DeskSim { n: 500, ..DeskSim::default() }.simulate().unwrap();
    let path = dir.join("desk.csv");
    io::write_panel(&path, &panel).unwrap();
    (path, panel.dates()[399].to_string())
}

fn small_config(dir: &Path, extra: Value) -> PathBuf {
    let (data, split) = write_data(dir);
    let mut cfg = json!({
        "data": data,
        "split": split,
        "n_clusters": 1,
        "generator": { "kind": "gaussian" },
        "residual_mode": "gaussian",
        "scenarios": { "count": 12 },
        "backtest": { "h_grid": [1, 5, 9], "block_len": 20, "bootstrap_count": 8 },
        "regurgitate": { "truth_len": 2000, "truth_count": 1, "bootstrap_count": 8, "scenario_count": 8 },
        "evaluate": { "rolling_window": 63, "score_max_lag": 20 },
        "seed": 7,
        "output": dir.join("run"),
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_vec_pretty(&cfg).unwrap()).unwrap();
    path
}

fn context(cfg: &Path, out: &Path, workers: usize) -> Context {
    Context::new(PipelineConfig::load(cfg).unwrap(), Some(out.to_path_buf()), Some(workers)).unwrap()
}

fn read(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_synthmarket"))
}

#[test]
fn full_run_is_reproducible_and_schema_valid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), json!({}));
    let a = tmp.path().join("a");
    let manifests = commands::run_all(&context(&cfg, &a, 2)).unwrap();
    let names: Vec<&str> = manifests.iter().map(|m| m.command.as_str()).collect();
    assert_eq!(names, ["fit", "generate", "evaluate", "backtest", "regurgitate"]);

    for (rel, s) in [
        ("evaluate/report.json", schema::EVALUATE_REPORT),
        ("regurgitate/report.json", schema::REGURGITATE_REPORT),
        ("fit/manifest.json", schema::MANIFEST),
        ("scenarios/manifest.json", schema::MANIFEST),
        ("backtest/manifest.json", schema::MANIFEST),
    ] {
        assert_eq!(schema::validate_str(s, &read(&a.join(rel))), Vec::<String>::new(), "{rel}");
    }

    // 12 × 400 rows exceed 10 × 400 training rows.
    let gen = &manifests[1];
    assert_eq!(gen.warnings, vec![guardrail_message(12, 400, 400, 10.0)]);
    let seed = PipelineConfig::load(&cfg).unwrap().seeds().generate;
    let want: Vec<u64> = (0..12).map(|i| scenario_seed(seed, i)).collect();
    assert_eq!(gen.derived_seeds["scenario"], want);

    // One worker gives the same bytes as two.
    let b = tmp.path().join("b");
    commands::run_all(&context(&cfg, &b, 1)).unwrap();
    for rel in [
        "fit/bundle.json",
        "evaluate/report.json",
        "backtest/sharpe_generator_long_short.csv",
        "regurgitate/report.json",
    ] {
        assert_eq!(fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel}");
    }
    for (ma, mb) in ["fit", "scenarios", "evaluate", "backtest", "regurgitate"].iter().map(|d| {
        (fs::read(a.join(d).join("manifest.json")).unwrap(), fs::read(b.join(d).join("manifest.json")).unwrap())
    }) {
        assert_eq!(ma, mb);
    }
}

#[test]
fn manifest_replays_generation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), json!({ "scenarios": { "count": 3 } }));
    let a = tmp.path().join("a");
    let ctx = context(&cfg, &a, 1);
    commands::fit(&ctx).unwrap();
    let first = commands::generate(&ctx).unwrap();
    assert!(first.warnings.is_empty());

    let replay = tmp.path().join("replay");
    let ctx = context(&a.join("scenarios/manifest.json"), &replay, 1);
    commands::fit(&ctx).unwrap();
    let second = commands::generate(&ctx).unwrap();
    assert_eq!(first.outputs, second.outputs);
    for i in 0..3 {
        assert_eq!(fs::read(a.join(scenario_file(i))).unwrap(), fs::read(replay.join(scenario_file(i))).unwrap());
    }
}

#[test]
fn scenarios_equal_to_history_have_zero_distance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), json!({ "scenarios": { "count": 2 } }));
    let out = tmp.path().join("run");
    let ctx = context(&cfg, &out, 1);
    commands::fit(&ctx).unwrap();
    commands::generate(&ctx).unwrap();

    // Replace each scenario by the training panel and re-sign the manifest.
    let (train, _) = ctx.config.load_panels().unwrap();
    let bytes = io::panel_to_csv(&train);
    let man_path = out.join("scenarios/manifest.json");
    let mut man: Manifest = io::read_json(&man_path).unwrap();
    for f in &mut man.outputs {
        fs::write(out.join(&f.path), &bytes).unwrap();
        f.sha256 = io::sha256_hex(&bytes);
    }
    man.write(&out, "scenarios/manifest.json").unwrap();

    commands::evaluate(&ctx).unwrap();
    let rep = read(&out.join("evaluate/report.json"));
    let row =
        |key: &str| rep[key].as_array().unwrap().iter().find(|r| r["model"] == "Market generator").unwrap().clone();
    assert_eq!(row("wasserstein")["in_sample"]["median"], json!(0.0));
    assert_eq!(row("wasserstein")["in_sample"]["hi"], json!(0.0));
    assert!(row("correlation")["in_sample"]["median"].as_f64().unwrap() < 1e-24);
}

#[test]
fn tampered_scenario_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), json!({ "scenarios": { "count": 2 } }));
    let out = tmp.path().join("run");
    let ctx = context(&cfg, &out, 1);
    commands::fit(&ctx).unwrap();
    commands::generate(&ctx).unwrap();
    let p = out.join(scenario_file(1));
    let mut bytes = fs::read(&p).unwrap();
    bytes.extend_from_slice(b"\n");
    fs::write(&p, bytes).unwrap();
    assert!(commands::evaluate(&ctx).is_err());
}

#[test]
fn biaslab_parallel_equals_sequential() {
    let bc = BiasLabConfig { trials: 1_000, ..BiasLabConfig::default() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    for n in [50usize, 400] {
        let par = pool.install(|| parallel_coverage(&bc, n, 11)).unwrap();
        let seq = monte_carlo_coverage(&bc.truth, &bc.learned, bc.kernel, bc.b, n, bc.trials, 11).unwrap();
        assert_eq!(par, seq);
    }
}

#[test]
fn biaslab_writes_coverage_table() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = json!({ "biaslab": {
        "kernel": "mean",
        "truth": { "law": "normal", "mean": 0.0, "sd": 1.0 },
        "learned": { "law": "normal", "mean": 0.1, "sd": 1.0 },
        "b": 0.05,
        "n_tilde": [100, 10000],
        "trials": 2000
    }});
    let cfg = small_config(tmp.path(), extra);
    let out = tmp.path().join("run");
    commands::biaslab(&context(&cfg, &out, 1)).unwrap();
    let text = fs::read_to_string(out.join("biaslab/coverage.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n_tilde,coverage,std_error,center,envelope,exact"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1][1] < 0.01 && rows[0][1] > 0.15);
    assert!((rows[0][5] - 0.2417).abs() < 1e-3);
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), json!({}));
    let out = tmp.path().join("cli");
    let run = |args: &[&str]| bin().args(args).output().unwrap();
    let c = cfg.to_str().unwrap();
    let o = out.to_str().unwrap();

    // Usage errors.
    assert_eq!(run(&["fit"]).status.code(), Some(2));
    assert_eq!(run(&["fit", "--config", c, "--workers", "0"]).status.code(), Some(2));
    // Predecessor missing.
    assert_eq!(run(&["generate", "--config", c, "--out", o]).status.code(), Some(2));

    let missing = small_config(&tmp.path().join("m"), json!({ "data": "nowhere.csv" }));
    let res = run(&["fit", "--config", missing.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("nowhere.csv"));

    let unknown = small_config(&tmp.path().join("u"), json!({ "colour": 1 }));
    assert_eq!(run(&["fit", "--config", unknown.to_str().unwrap()]).status.code(), Some(2));

    // More clusters than factors fails inside a stage.
    let stage = small_config(&tmp.path().join("s"), json!({ "n_clusters": 19 }));
    let res = run(&["fit", "--config", stage.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("stage fit"));

    let ok = bin().args(["fit", "--config", c, "--out", o]).env("SYNTHMARKET_WORKERS", "1").output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(out.join("fit/bundle.json").exists());
}

#[test]
fn simulate_writes_a_readable_panel() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("sim.csv");
    let st =
        bin().args(["simulate", "--out", path.to_str().unwrap(), "--rows", "120", "--seed", "3"]).status().unwrap();
    assert!(st.success());
    let p = io::read_panel(&path).unwrap();
    assert_eq!((p.n(), p.d()), (120, 20));
    assert_eq!(p, DeskSim { n: 120, seed: 3, ..DeskSim::default() }.simulate().unwrap());
}
