use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use cs_sgld::harness::config::{ExperimentConfig, ExperimentKind};
use cs_sgld::harness::experiments::{build_problem, sampler_config, EstimateRow, ExpectedLossRow, PhaseRow};
use cs_sgld::harness::output::ResultRow;
use cs_sgld::harness::run_experiment;
use cs_sgld::numerics::{streams, RngStream};
use cs_sgld::samplers::{warm_start, SamplerMethod};
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_json_str(text, &[]).unwrap()
}

fn rows<T: for<'de> serde::Deserialize<'de>>(dir: &Path, name: &str) -> Vec<T> {
    cs_sgld::harness::output::read_csv_file(&dir.join(name)).unwrap()
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn cscli(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cscli"));
    c.args(args).env_remove("CSCLI_THREADS");
    c
}

const SMALL_ELU: &str = r#"{
    "generator": {"netspec": {"widths": [3, 8, 12], "activations": ["elu"], "seed": 5}},
    "problem": {"f": 0.5, "seeds": [0, 1]},
    "sampler": {"beta": 1000.0, "eta": 0.01, "r": 1.0, "k_max": 300, "record_every": 10}
}"#;

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let c = cfg(SMALL_ELU);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_experiment(ExperimentKind::Compare, &c, &a).unwrap();
    run_experiment(ExperimentKind::Compare, &c, &b).unwrap();
    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv") || n.ends_with(".svg"))
        .collect();
    names.sort();
    assert!(names.iter().any(|n| n == "results.csv"));
    assert!(names.iter().any(|n| n == "plot_compare.svg"));
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n}");
    }
    assert!(a.join("timings.json").exists());
}

#[test]
fn zero_budget_reports_the_warm_start() {
    let tmp = tempfile::tempdir().unwrap();
    let c = ExperimentConfig::from_json_str(SMALL_ELU, &["sampler.k_max=0".into()]).unwrap();
    run_experiment(ExperimentKind::Recover, &c, tmp.path()).unwrap();
    let out: Vec<ResultRow> = rows(tmp.path(), "results.csv");
    let net = c.generator().unwrap();
    let (_, m) = c.problem.measurements(net.output_dim()).unwrap();
    for r in out {
        assert_eq!(r.k, 0);
        let problem = build_problem(&net, m, r.seed, 0.0).unwrap();
        let (sc, _) = sampler_config(&c, &problem, SamplerMethod::Sgld, r.seed).unwrap();
        let z0 = warm_start(&problem, sc.beta, sc.lipschitz, &mut RngStream::new(r.seed, streams::CHAIN)).unwrap();
        assert_eq!(r.mse, problem.mse(&z0).unwrap());
    }
}

#[test]
fn compare_shares_initialization_and_summarizes_rows() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(ExperimentKind::Compare, &cfg(SMALL_ELU), tmp.path()).unwrap();
    for seed in [0, 1] {
        let first = |m: &str| {
            let text = fs::read_to_string(tmp.path().join(format!("traj_{seed}_{m}.csv"))).unwrap();
            let line = text.lines().nth(1).unwrap().to_string();
            line.splitn(3, ',').nth(2).unwrap().to_string()
        };
        assert_eq!(first("gd"), first("sgld"));
    }
    let out: Vec<ResultRow> = rows(tmp.path(), "results.csv");
    let summary = json(tmp.path(), "summary.json");
    for m in ["gd", "sgld"] {
        let sel: Vec<f64> = out.iter().filter(|r| r.method == m).map(|r| r.mse).collect();
        let mean = sel.iter().sum::<f64>() / sel.len() as f64;
        assert_eq!(summary["methods"][m]["mean_mse"].as_f64().unwrap(), mean);
    }
    let reference = fs::read_to_string(tmp.path().join("paper_reference.csv")).unwrap();
    assert!(reference.lines().skip(1).all(|l| l.starts_with("paper,")));
}

#[test]
fn phase_at_full_ratio_matches_recover() {
    let text = r#"{
        "generator": {"linear": {"weights": [[1.0, 0.5], [0.0, 1.0], [-1.0, 0.25], [0.3, 0.3]], "radius": 2.0}},
        "problem": {"f": 1.0, "seeds": [3, 4]},
        "methods": ["sgld"],
        "sampler": {"method": "sgld", "beta": 100.0, "eta": 0.01, "r": 1.0, "k_max": 200},
        "phase": {"f_grid": [1.0]}
    }"#;
    let tmp = tempfile::tempdir().unwrap();
    let c = cfg(text);
    run_experiment(ExperimentKind::Recover, &c, &tmp.path().join("r")).unwrap();
    run_experiment(ExperimentKind::PhaseTransition, &c, &tmp.path().join("p")).unwrap();
    let r: Vec<ResultRow> = rows(&tmp.path().join("r"), "results.csv");
    let p: Vec<ResultRow> = rows(&tmp.path().join("p"), "results.csv");
    assert_eq!(r, p);
    let table: Vec<PhaseRow> = rows(&tmp.path().join("p"), "phase_summary.csv");
    assert_eq!(table.len(), 1);
    assert_eq!(table[0].mean_mse, (r[0].mse + r[1].mse) / 2.0);
}

#[test]
fn validate_identity_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let c = cfg(r#"{"generator": {"identity": {"dim": 3, "radius": 2.0}}, "problem": {"f": 1.0},
                    "validate": {"n_pairs": 50, "n_sensing": 2}}"#);
    run_experiment(ExperimentKind::Validate, &c, tmp.path()).unwrap();
    let est: Vec<EstimateRow> = rows(tmp.path(), "estimates.csv");
    let generator = est.iter().find(|e| e.panel == "generator").unwrap();
    assert!((generator.alpha - 1.0).abs() < 1e-9);
    assert!(generator.gamma <= 1e-9);
    assert_eq!(est.len(), 3);
    assert!(est.iter().all(|e| e.crossings == 0));
    assert!(json(tmp.path(), "estimates.json").get("warning").is_none());
    assert!(tmp.path().join("plot_validate.svg").exists());
}

#[test]
fn validate_relu_warns() {
    let tmp = tempfile::tempdir().unwrap();
    let c = cfg(r#"{"generator": {"netspec": {"widths": [2, 6, 6], "activations": ["relu"]}}, "problem": {"f": 1.0},
                    "validate": {"n_pairs": 30, "n_sensing": 1}}"#);
    run_experiment(ExperimentKind::Validate, &c, tmp.path()).unwrap();
    let report = json(tmp.path(), "estimates.json");
    assert_eq!(report["outside_theory"], true);
    assert!(report["warning"].as_str().unwrap().contains("relu"));
}

#[test]
fn chain_lab_quadratic_expected_loss() {
    let tmp = tempfile::tempdir().unwrap();
    let c = cfg(r#"{"sampler": {"beta": 4.0},
                    "chain_lab": {"target": {"quadratic": {"center": [0.5], "radius": 6.0}},
                                  "n_chains": 200, "checkpoints": [0, 100], "tv_bins": 64,
                                  "loss_betas": [1.0, 10.0, 100.0]}}"#);
    run_experiment(ExperimentKind::ChainLab, &c, tmp.path()).unwrap();
    let losses: Vec<ExpectedLossRow> = rows(tmp.path(), "expected_loss.csv");
    assert_eq!(losses.len(), 4);
    for r in &losses {
        assert!((r.expected_loss * 2.0 * r.beta - 1.0).abs() < 0.02, "{r:?}");
    }
    for name in ["grid.csv", "curve_sgld.csv", "plot_mixing.svg", "plot_gibbs.svg", "chain_lab.json"] {
        assert!(tmp.path().join(name).exists(), "{name}");
    }
}

#[test]
fn chain_lab_flat_target_at_zero_beta() {
    let tmp = tempfile::tempdir().unwrap();
    let c = cfg(r#"{"sampler": {"beta": 0.0},
                    "chain_lab": {"target": {"quadratic": {"center": [0.0], "radius": 2.0}},
                                  "n_chains": 100, "checkpoints": [0], "warm_start_beta": 1.0}}"#);
    run_experiment(ExperimentKind::ChainLab, &c, tmp.path()).unwrap();
    let report = json(tmp.path(), "chain_lab.json");
    assert!((report["cheeger"]["rho"].as_f64().unwrap() - 0.5).abs() < 0.01);
    assert!((report["log_partition"].as_f64().unwrap() - 4f64.ln()).abs() < 1e-9);

    let moving = ExperimentConfig::from_json_str(
        r#"{"sampler": {"beta": 0.0}, "chain_lab": {"target": {"quadratic": {"center": [0.0], "radius": 2.0}},
            "checkpoints": [0, 10], "warm_start_beta": 1.0}}"#,
        &[],
    )
    .unwrap();
    let err = run_experiment(ExperimentKind::ChainLab, &moving, &tmp.path().join("x")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn identity_recovery_reaches_the_posterior_floor() {
    // For square A the Gibbs law is N(A⁻¹y, (2βAᵀA)⁻¹), so E‖z − z*‖²/n = tr((AᵀA)⁻¹)/(2βn).
    let c = ExperimentConfig::load(&configs().join("recover_identity.json"), &[]).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(ExperimentKind::Recover, &c, tmp.path()).unwrap();
    let out: Vec<ResultRow> = rows(tmp.path(), "results.csv");
    let net = c.generator().unwrap();
    let n = net.output_dim();
    let beta = c.sampler.beta().unwrap();
    for r in out {
        let problem = build_problem(&net, r.m, r.seed, 0.0).unwrap();
        let a = problem.sensing().matrix();
        let mut ata = vec![vec![0.0; 2 * n]; n];
        for i in 0..n {
            for j in 0..n {
                ata[i][j] = (0..a.rows()).map(|k| a.get(k, i) * a.get(k, j)).sum();
            }
            ata[i][n + i] = 1.0;
        }
        for col in 0..n {
            let p = (col..n).max_by(|&x, &y| ata[x][col].abs().total_cmp(&ata[y][col].abs())).unwrap();
            ata.swap(col, p);
            let piv = ata[col][col];
            ata[col].iter_mut().for_each(|x| *x /= piv);
            for row in 0..n {
                if row != col {
                    let f = ata[row][col];
                    for k in 0..2 * n {
                        ata[row][k] -= f * ata[col][k];
                    }
                }
            }
        }
        let trace: f64 = (0..n).map(|i| ata[i][n + i]).sum();
        let floor = trace / (2.0 * beta * n as f64);
        assert!(r.mse <= 10.0 * floor, "seed {}: mse {} floor {floor}", r.seed, r.mse);
    }
}

#[test]
fn cli_runs_and_replots_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("c.json");
    fs::write(&cfg_path, SMALL_ELU).unwrap();
    let out = tmp.path().join("out");
    let status = cscli(&["recover", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let svg = fs::read(out.join("plot_loss.svg")).unwrap();
    fs::remove_file(out.join("plot_loss.svg")).unwrap();
    let status = cscli(&["recover", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--replot"])
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(fs::read(out.join("plot_loss.svg")).unwrap(), svg);
}

#[test]
fn cli_override_changes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("c.json");
    fs::write(&cfg_path, SMALL_ELU).unwrap();
    let out = tmp.path().join("o");
    let status = cscli(&[
        "recover",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "sampler.k_max=7",
        "--set",
        "problem.seeds=[9]",
    ])
    .status()
    .unwrap();
    assert!(status.success());
    let r: Vec<ResultRow> = rows(&out, "results.csv");
    assert_eq!(r.len(), 1);
    assert_eq!((r[0].seed, r[0].k), (9, 7));
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = tmp.path().join(name);
        fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    };
    let code = |mut c: Command| c.output().unwrap().status.code().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();

    let good = write("good.json", SMALL_ELU);
    let syntax = write("syntax.json", "{\"sampler\": ");
    let unknown = write("unknown.json", r#"{"sampler": {"beta": 1.0, "bogus": 2}}"#);
    let no_beta = write("nobeta.json", r#"{"generator": {"identity": {"dim": 2}}, "sampler": {"eta": 0.1}}"#);
    let three_d = write(
        "three.json",
        r#"{"generator": {"identity": {"dim": 3, "radius": 1.0}}, "problem": {"f": 1.0}, "sampler": {"beta": 1.0},
            "chain_lab": {"target": "generator", "n_chains": 2, "checkpoints": [0]}}"#,
    );

    assert_eq!(code(cscli(&["bogus_kind", "--config", &good])), 2);
    assert_eq!(code(cscli(&["recover"])), 2);
    assert_eq!(code(cscli(&["recover", "--config", "/nonexistent/c.json", "--out", out])), 2);
    assert_eq!(code(cscli(&["recover", "--config", &syntax, "--out", out])), 2);
    assert_eq!(code(cscli(&["recover", "--config", &unknown, "--out", out])), 2);
    assert_eq!(code(cscli(&["recover", "--config", &no_beta, "--out", out])), 2);
    assert_eq!(code(cscli(&["chain_lab", "--config", &three_d, "--out", out])), 2);
    assert_eq!(code(cscli(&["recover", "--config", &good, "--out", out, "--set", "noequals"])), 2);
    let mut bad_threads = cscli(&["recover", "--config", &good, "--out", out]);
    bad_threads.env("CSCLI_THREADS", "zero");
    assert_eq!(code(bad_threads), 2);
    let mut one_thread = cscli(&["recover", "--config", &good, "--out", out]);
    one_thread.env("CSCLI_THREADS", "1");
    assert_eq!(code(one_thread), 0);
    assert_eq!(code(cscli(&["compare", "--config", &good, "--out", &format!("{out}/missing"), "--replot"])), 2);
}

#[test]
fn shipped_configs_parse() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let c = ExperimentConfig::load(&path, &[]).unwrap();
        let kind = c.kind.unwrap_or_else(|| panic!("{} has no kind", path.display()));
        c.validate(kind).unwrap();
    }
}
