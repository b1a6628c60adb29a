//! The five experiment drivers. Each computes everything in parallel first,
//! then writes its files from the calling thread.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{ratio_measurements, ChainTarget, ExperimentConfig, ExperimentKind};
use super::output::{summarize, OutputDir, ResultRow, TimingRow, PAPER_REFERENCE_CSV};
use crate::chain_lab::{
    cheeger_report, double_well, gibbs_expected_loss, gibbs_grid, mixing_curve, quadratic_problem, warm_start_lambda,
    write_curve_csv, CurvePoint, MixingSpec,
};
use crate::error::{Error, Result};
use crate::generator::GeneratorNet;
use crate::loss::{estimate_constants, ConstantsReport, Problem};
use crate::numerics::{gaussian_vector, norm, streams, RngStream, Vector};
use crate::samplers::{gd_step_size, run, theory_step_size, SamplerConfig, SamplerMethod, Trajectory};
use crate::sensing::sample_matrix;
use crate::validators::{check_proposition1, estimate_dissipativity_sensing_with, estimate_strong_smoothness_with, SmoothnessEstimate};

/// Problem instance for `seed`: Gaussian `A` (`m × n`), `z*` uniform in the
/// latent ball, optional noise of fixed norm, `y = A G(z*) + ε`.
pub fn build_problem(net: &GeneratorNet, m: usize, seed: u64, noise_norm: f64) -> Result<Problem> {
    let a = sample_matrix(m, net.output_dim(), &mut RngStream::new(seed, streams::SENSING))?;
    let z_star = Vector::new(
        RngStream::new(seed, streams::LATENT_TARGET).uniform_in_ball(net.input_dim(), net.radius()),
    )?;
    let noise = if noise_norm > 0.0 {
        let dir = gaussian_vector(&mut RngStream::new(seed, streams::NOISE), m)?;
        let scale = noise_norm / norm(&dir);
        Some(Vector::new(dir.iter().map(|x| x * scale).collect())?)
    } else {
        None
    };
    Problem::from_latent(net.clone(), a, z_star, noise)
}

/// Sampler settings for one cell: explicit `eta` if configured, otherwise the
/// method's schedule from constants estimated on this problem.
pub fn sampler_config(cfg: &ExperimentConfig, problem: &Problem, method: SamplerMethod, seed: u64) -> Result<(SamplerConfig, ConstantsReport)> {
    let constants = estimate_constants(problem, cfg.problem.constant_samples, &mut RngStream::new(seed, streams::CONSTANTS))?;
    let beta = cfg.sampler.beta()?;
    let d = problem.latent_dim();
    let eta = cfg.sampler.eta.unwrap_or_else(|| match method {
        SamplerMethod::Gd => gd_step_size(&constants, d),
        _ => theory_step_size(&constants, beta, d),
    });
    let sc = SamplerConfig {
        eta,
        beta,
        r: cfg.sampler.r,
        k_max: cfg.sampler.k_max,
        seed,
        record_every: cfg.sampler.record_every,
        lipschitz: cfg.sampler.lipschitz.unwrap_or(constants.l),
    };
    Ok((sc, constants))
}

pub struct CellResult {
    pub row: ResultRow,
    pub trajectory: Trajectory,
    pub wall_time_s: f64,
}

/// One `(seed, f, method)` run. Every method draws its warm start from the
/// same `(seed, CHAIN)` stream, so methods sharing a seed share `z₀`.
pub fn run_cell(net: &GeneratorNet, cfg: &ExperimentConfig, seed: u64, f: f64, m: usize, method: SamplerMethod) -> Result<CellResult> {
    let start = Instant::now();
    let problem = build_problem(net, m, seed, cfg.problem.noise_norm)?;
    let (sc, _) = sampler_config(cfg, &problem, method, seed)?;
    let trajectory = run(&problem, method, &sc, &mut RngStream::new(seed, streams::CHAIN))?;
    let last = trajectory.last();
    let row = ResultRow {
        seed,
        method: method.name().to_string(),
        f,
        m,
        k: last.k,
        final_f: last.f,
        mse: problem.mse(&last.z)?,
    };
    Ok(CellResult {
        row,
        trajectory,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn run_cells(net: &GeneratorNet, cfg: &ExperimentConfig, cells: &[(u64, f64, usize, SamplerMethod)]) -> Result<Vec<CellResult>> {
    cells
        .par_iter()
        .map(|&(seed, f, m, method)| run_cell(net, cfg, seed, f, m, method))
        .collect()
}

fn write_cells(out: &OutputDir, results: &[CellResult], traj_suffix: impl Fn(&ResultRow) -> String) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::with_capacity(results.len());
    let mut timings = Vec::with_capacity(results.len());
    for r in results {
        let stem = format!("traj_{}_{}{}", r.row.seed, r.row.method, traj_suffix(&r.row));
        r.trajectory.save(out.path(&format!("{stem}.csv")), out.path(&format!("{stem}.json")))?;
        rows.push(r.row.clone());
        timings.push(TimingRow {
            seed: r.row.seed,
            method: r.row.method.clone(),
            f: r.row.f,
            wall_time_s: r.wall_time_s,
        });
    }
    out.write_rows("results.csv", &rows)?;
    out.write_json("timings.json", &timings)?;
    Ok(rows)
}

fn method_ratio(summary: &BTreeMap<String, super::output::MethodSummary>) -> Option<f64> {
    Some(summary.get("sgld")?.mean_mse / summary.get("gd")?.mean_mse)
}

pub fn run_recover(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Vec<ResultRow>> {
    cfg.validate(ExperimentKind::Recover)?;
    let net = cfg.generator()?;
    let (f, m) = cfg.problem.measurements(net.output_dim())?;
    let cells: Vec<_> = cfg.problem.seeds.iter().map(|&s| (s, f, m, cfg.sampler.method)).collect();
    let results = run_cells(&net, cfg, &cells)?;
    let rows = write_cells(out, &results, |_| String::new())?;
    let summary = summarize(&rows);
    out.write_json(
        "summary.json",
        &json!({
            "kind": "recover",
            "rows": rows.len(),
            "methods": summary,
        }),
    )?;
    Ok(rows)
}

pub fn run_compare(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Vec<ResultRow>> {
    cfg.validate(ExperimentKind::Compare)?;
    let net = cfg.generator()?;
    let (f, m) = cfg.problem.measurements(net.output_dim())?;
    let methods = cfg.methods_or(&[SamplerMethod::Gd, SamplerMethod::Sgld]);
    let cells: Vec<_> = cfg
        .problem
        .seeds
        .iter()
        .flat_map(|&s| methods.iter().map(move |&meth| (s, f, m, meth)))
        .collect();
    let results = run_cells(&net, cfg, &cells)?;
    let rows = write_cells(out, &results, |_| String::new())?;
    let summary = summarize(&rows);
    out.write(super::REFERENCE_FILE, PAPER_REFERENCE_CSV)?;
    out.write_json(
        "summary.json",
        &json!({
            "kind": "compare",
            "rows": rows.len(),
            "methods": summary,
            "sgld_over_gd": method_ratio(&summary),
            "shared_eta": cfg.sampler.eta,
        }),
    )?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct PhaseRow {
    pub f: f64,
    pub method: String,
    pub mean_mse: f64,
    pub n: usize,
}

pub fn run_phase_transition(cfg: &ExperimentConfig, out: &OutputDir) -> Result<(Vec<ResultRow>, Vec<PhaseRow>)> {
    cfg.validate(ExperimentKind::PhaseTransition)?;
    let net = cfg.generator()?;
    let n = net.output_dim();
    let methods = cfg.methods_or(&[SamplerMethod::Gd, SamplerMethod::Sgld]);
    let mut cells = Vec::new();
    for &f in &cfg.phase.f_grid {
        let (f, m) = ratio_measurements(f, n)?;
        for &s in &cfg.problem.seeds {
            for &meth in &methods {
                cells.push((s, f, m, meth));
            }
        }
    }
    let results = run_cells(&net, cfg, &cells)?;
    let rows = write_cells(out, &results, |r| format!("_f{}", r.f))?;
    let mut table = Vec::new();
    for &f in &cfg.phase.f_grid {
        for meth in &methods {
            let sel: Vec<&ResultRow> = rows.iter().filter(|r| r.f == f && r.method == meth.name()).collect();
            let s = summarize(sel.iter().copied());
            let ms = &s[meth.name()];
            table.push(PhaseRow {
                f,
                method: meth.name().to_string(),
                mean_mse: ms.mean_mse,
                n: ms.n,
            });
        }
    }
    out.write_rows("phase_summary.csv", &table)?;
    out.write(super::REFERENCE_FILE, PAPER_REFERENCE_CSV)?;
    out.write_json(
        "summary.json",
        &json!({
            "kind": "phase_transition",
            "rows": rows.len(),
            "table": table,
        }),
    )?;
    Ok((rows, table))
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct EstimateRow {
    pub panel: String,
    pub alpha: f64,
    pub gamma: f64,
    pub n_pairs: usize,
    pub exact_support: bool,
    pub crossings: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidateReport {
    pub generator: SmoothnessEstimate,
    pub sensing: Vec<SmoothnessEstimate>,
    pub proposition1: crate::validators::Proposition1Report,
    pub outside_theory: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn run_validate(cfg: &ExperimentConfig, out: &OutputDir) -> Result<ValidateReport> {
    cfg.validate(ExperimentKind::Validate)?;
    let net = cfg.generator()?;
    let (_, m) = cfg.problem.measurements(net.output_dim())?;
    let v = &cfg.validate;
    let base = cfg.problem.seeds[0];
    let generator = estimate_strong_smoothness_with(&net, v.n_pairs, &v.pairs, &mut RngStream::new(base, streams::PAIRS))?;
    let sensing = (0..v.n_sensing as u64)
        .into_par_iter()
        .map(|j| {
            let seed = base.wrapping_add(j);
            let a = sample_matrix(m, net.output_dim(), &mut RngStream::new(seed, streams::SENSING))?;
            estimate_dissipativity_sensing_with(&net, &a, v.n_pairs, &v.pairs, &mut RngStream::new(seed, streams::PAIRS))
        })
        .collect::<Result<Vec<_>>>()?;
    let proposition1 = check_proposition1(&net, v.n_pairs, &mut RngStream::new(base, streams::PAIRS))?;
    let outside_theory = net.outside_theory();
    let report = ValidateReport {
        generator,
        sensing,
        proposition1,
        outside_theory,
        warning: outside_theory
            .then(|| "generator uses relu, whose derivative is discontinuous; estimates are outside the smooth setting".to_string()),
    };

    let mut est_rows = Vec::new();
    let mut emit = |panel: String, e: &SmoothnessEstimate| -> Result<()> {
        let mut buf = Vec::new();
        e.write_scatter_csv(&mut buf)?;
        out.write(&format!("scatter_{panel}.csv"), buf)?;
        #[derive(Serialize)]
        struct Point {
            alpha: f64,
            gamma: f64,
        }
        let curve: Vec<Point> = e.curve.iter().map(|&(alpha, gamma)| Point { alpha, gamma }).collect();
        out.write_rows(&format!("tradeoff_{panel}.csv"), &curve)?;
        est_rows.push(EstimateRow {
            panel,
            alpha: e.alpha,
            gamma: e.gamma,
            n_pairs: e.n_pairs,
            exact_support: e.exact_support,
            crossings: e.crossings(),
        });
        Ok(())
    };
    emit("generator".into(), &report.generator)?;
    for (j, e) in report.sensing.iter().enumerate() {
        emit(format!("sensing_{j}"), e)?;
    }
    out.write_rows("estimates.csv", &est_rows)?;
    out.write_json("estimates.json", &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct ExpectedLossRow {
    pub beta: f64,
    pub expected_loss: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainLabReport {
    pub d: usize,
    pub beta: f64,
    pub eta: f64,
    pub lipschitz: f64,
    pub warm_start_beta: f64,
    pub log_partition: f64,
    pub cheeger: crate::chain_lab::CheegerReport,
    pub lambda: f64,
    pub expected_loss: f64,
    pub curves: BTreeMap<String, Vec<CurvePoint>>,
}

fn chain_problem(cfg: &ExperimentConfig, target: &ChainTarget) -> Result<Problem> {
    match target {
        ChainTarget::Quadratic { center, radius } => quadratic_problem(center, *radius),
        ChainTarget::DoubleWell { a, radius } => double_well(*a, *radius),
        ChainTarget::Generator => {
            let net = cfg.generator()?;
            let (_, m) = cfg.problem.measurements(net.output_dim())?;
            build_problem(&net, m, cfg.problem.seeds[0], cfg.problem.noise_norm)
        }
    }
}

pub fn run_chain_lab(cfg: &ExperimentConfig, out: &OutputDir) -> Result<ChainLabReport> {
    cfg.validate(ExperimentKind::ChainLab)?;
    let lab = cfg.chain_lab.as_ref().expect("validated");
    let problem = chain_problem(cfg, &lab.target)?;
    let d = problem.latent_dim();
    if d > 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    let beta = cfg.sampler.beta()?;
    let constants = estimate_constants(&problem, cfg.problem.constant_samples.max(2), &mut RngStream::new(lab.seed, streams::CONSTANTS))?;
    let lipschitz = cfg.sampler.lipschitz.unwrap_or(constants.l);
    let eta = cfg.sampler.eta.unwrap_or_else(|| theory_step_size(&constants, beta, d));
    let sc = SamplerConfig {
        eta,
        beta,
        r: cfg.sampler.r,
        k_max: lab.checkpoints.last().copied().unwrap_or(0),
        seed: lab.seed,
        record_every: 1,
        lipschitz,
    };
    let warm_beta = lab.warm_start_beta.unwrap_or(beta);
    let grid = gibbs_grid(&problem, beta, lab.resolution)?;
    let methods = lab.methods.clone().unwrap_or_else(|| vec![cfg.sampler.method]);
    let mut curves = BTreeMap::new();
    for method in methods {
        let spec = MixingSpec {
            method,
            n_chains: lab.n_chains,
            checkpoints: lab.checkpoints.clone(),
            tv_bins: lab.tv_bins,
            seed: lab.seed,
            warm_start_beta: Some(warm_beta),
        };
        curves.insert(method.name().to_string(), mixing_curve(&problem, &sc, &grid, &spec)?);
    }
    let cheeger = cheeger_report(&grid)?;
    let lambda = warm_start_lambda(&grid, lipschitz, warm_beta)?;
    let mut betas = lab.loss_betas.clone();
    betas.push(beta);
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    let loss_rows = betas
        .par_iter()
        .map(|&b| {
            let g = if b == beta { grid.clone() } else { gibbs_grid(&problem, b, lab.resolution)? };
            Ok(ExpectedLossRow {
                beta: b,
                expected_loss: gibbs_expected_loss(&g, &problem)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let expected_loss = loss_rows.iter().find(|r| r.beta == beta).expect("beta included").expected_loss;

    let mut buf = Vec::new();
    grid.write_csv(&mut buf)?;
    out.write("grid.csv", buf)?;
    for (name, curve) in &curves {
        let mut buf = Vec::new();
        write_curve_csv(curve, &mut buf)?;
        out.write(&format!("curve_{name}.csv"), buf)?;
    }
    out.write_rows("expected_loss.csv", &loss_rows)?;
    let report = ChainLabReport {
        d,
        beta,
        eta,
        lipschitz,
        warm_start_beta: warm_beta,
        log_partition: grid.log_partition(),
        cheeger,
        lambda,
        expected_loss,
        curves,
    };
    out.write_json("chain_lab.json", &report)?;
    Ok(report)
}
