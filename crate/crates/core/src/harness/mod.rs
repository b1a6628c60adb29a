//! Experiment driver behind the `cscli` binary.

pub mod config;
pub mod experiments;
pub mod output;
pub mod plot;

use std::path::{Path, PathBuf};

use self::config::{ExperimentConfig, ExperimentKind};
use self::experiments::{EstimateRow, ExpectedLossRow, PhaseRow};
use self::output::{OutputDir, ReferenceRow, ResultRow};
use self::plot::{panels_svg, Figure, Series, Style};
use crate::error::{Error, Result};

pub const REFERENCE_FILE: &str = "paper_reference.csv";
pub const THREADS_ENV: &str = "CSCLI_THREADS";

/// Worker count from `CSCLI_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

pub fn output_dir_for(cfg: &ExperimentConfig, kind: ExperimentKind, cli_out: Option<&Path>) -> PathBuf {
    cli_out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("cscli_out/{}", kind.name())))
}

/// Runs one experiment and renders its plots.
pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    cfg.validate(kind)?;
    let out = OutputDir::create(out_dir)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| -> Result<()> {
        match kind {
            ExperimentKind::Recover => experiments::run_recover(cfg, &out).map(drop),
            ExperimentKind::Compare => experiments::run_compare(cfg, &out).map(drop),
            ExperimentKind::PhaseTransition => experiments::run_phase_transition(cfg, &out).map(drop),
            ExperimentKind::Validate => experiments::run_validate(cfg, &out).map(drop),
            ExperimentKind::ChainLab => experiments::run_chain_lab(cfg, &out).map(drop),
        }
    })?;
    replot(kind, out_dir)
}

fn first_two_columns(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut pts = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse {
                    location: format!("{}", path.display()),
                    message: format!("column {i} is not numeric"),
                })
        };
        pts.push((get(0)?, get(1)?));
    }
    Ok(pts)
}

fn loss_figure(out: &OutputDir) -> Result<Figure> {
    let mut series = Vec::new();
    for name in out.list("traj_", ".csv")? {
        let pts = first_two_columns(&out.path(&name))?;
        let label = name.trim_start_matches("traj_").trim_end_matches(".csv").to_string();
        series.push(Series::new(label, pts, Style::Line));
    }
    Ok(Figure {
        title: "loss along trajectories".into(),
        x_label: "k".into(),
        y_label: "F(z_k)".into(),
        log_y: true,
        series,
        ..Default::default()
    })
}

fn compare_figure(out: &OutputDir) -> Result<Figure> {
    let rows: Vec<ResultRow> = out.read_rows("results.csv")?;
    let reference: Vec<ReferenceRow> = out.read_rows(REFERENCE_FILE)?;
    let mut methods: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
    methods.sort();
    methods.dedup();
    let mut series: Vec<Series> = methods
        .iter()
        .map(|m| {
            let pts = rows.iter().filter(|r| r.method == *m).map(|r| (r.seed as f64, r.mse)).collect();
            Series::new(format!("{m} (synthetic)"), pts, Style::Markers)
        })
        .collect();
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.seed as f64), b.max(r.seed as f64)));
    for r in reference.iter().filter(|r| r.figure == "figure2" || r.figure == "figure3") {
        series.push(Series::new(
            format!("{} {} {} f={} (source={})", r.figure, r.dataset, r.method, r.f, r.source),
            vec![(lo, r.mse), (hi, r.mse)],
            Style::Dashed,
        ));
    }
    Ok(Figure {
        title: "final MSE per seed".into(),
        x_label: "seed".into(),
        y_label: "MSE".into(),
        log_y: true,
        series,
        ..Default::default()
    })
}

fn phase_figure(out: &OutputDir) -> Result<Figure> {
    let table: Vec<PhaseRow> = out.read_rows("phase_summary.csv")?;
    let reference: Vec<ReferenceRow> = out.read_rows(REFERENCE_FILE)?;
    let mut series = Vec::new();
    let mut methods: Vec<&str> = table.iter().map(|r| r.method.as_str()).collect();
    methods.dedup();
    methods.sort();
    methods.dedup();
    for m in &methods {
        let pts = table.iter().filter(|r| r.method == *m).map(|r| (r.f, r.mean_mse)).collect();
        series.push(Series::new(format!("{m} (synthetic)"), pts, Style::LineMarkers));
    }
    for m in ["gd", "sgld"] {
        let pts: Vec<(f64, f64)> = reference
            .iter()
            .filter(|r| r.figure == "figure4" && r.method == m)
            .map(|r| (r.f, r.mse))
            .collect();
        if !pts.is_empty() {
            series.push(Series::new(format!("{m} mnist_dcgan (source=paper)"), pts, Style::Dashed));
        }
    }
    Ok(Figure {
        title: "phase transition".into(),
        x_label: "compression ratio f".into(),
        y_label: "mean MSE".into(),
        log_y: true,
        series,
        ..Default::default()
    })
}

fn validate_figures(out: &OutputDir) -> Result<Vec<Figure>> {
    let estimates: Vec<EstimateRow> = out.read_rows("estimates.csv")?;
    estimates
        .iter()
        .map(|e| {
            let uv = first_two_columns(&out.path(&format!("scatter_{}.csv", e.panel)))?;
            let pts = uv.iter().map(|&(u, v)| (e.alpha * v - e.gamma, u)).collect();
            Ok(Figure {
                title: format!("{}: alpha={:.4} gamma={:.4}", e.panel, e.alpha, e.gamma),
                x_label: "alpha v - gamma".into(),
                y_label: "u".into(),
                series: vec![Series::new("pairs", pts, Style::Markers)],
                diagonal: true,
                ..Default::default()
            })
        })
        .collect()
}

fn chain_lab_figures(out: &OutputDir) -> Result<Vec<(String, Figure)>> {
    let mut figs = Vec::new();
    let mut series = Vec::new();
    for name in out.list("curve_", ".csv")? {
        let pts = first_two_columns(&out.path(&name))?
            .into_iter()
            .map(|(k, tv)| (k + 1.0, tv))
            .collect();
        let label = name.trim_start_matches("curve_").trim_end_matches(".csv").to_string();
        series.push(Series::new(label, pts, Style::LineMarkers));
    }
    figs.push((
        "plot_mixing.svg".to_string(),
        Figure {
            title: "TV distance to the Gibbs target".into(),
            x_label: "k + 1".into(),
            y_label: "TV".into(),
            log_x: true,
            log_y: true,
            series,
            ..Default::default()
        },
    ));
    let losses: Vec<ExpectedLossRow> = out.read_rows("expected_loss.csv")?;
    figs.push((
        "plot_expected_loss.svg".to_string(),
        Figure {
            title: "Gibbs expected loss".into(),
            x_label: "beta".into(),
            y_label: "E[F]".into(),
            log_x: true,
            log_y: true,
            series: vec![Series::new(
                "quadrature",
                losses.iter().map(|r| (r.beta, r.expected_loss)).collect(),
                Style::LineMarkers,
            )],
            ..Default::default()
        },
    ));
    let header = csv::Reader::from_path(out.path("grid.csv"))?.headers()?.len();
    if header == 2 {
        figs.push((
            "plot_gibbs.svg".to_string(),
            Figure {
                title: "Gibbs density".into(),
                x_label: "z".into(),
                y_label: "density".into(),
                series: vec![Series::new("pi", first_two_columns(&out.path("grid.csv"))?, Style::Line)],
                ..Default::default()
            },
        ));
    }
    Ok(figs)
}

/// Regenerates every SVG of `kind` from the CSVs already in `dir`.
pub fn replot(kind: ExperimentKind, dir: &Path) -> Result<()> {
    let out = OutputDir::open(dir)?;
    match kind {
        ExperimentKind::Recover => out.write("plot_loss.svg", loss_figure(&out)?.to_svg()),
        ExperimentKind::Compare => {
            out.write("plot_loss.svg", loss_figure(&out)?.to_svg())?;
            out.write("plot_compare.svg", compare_figure(&out)?.to_svg())
        }
        ExperimentKind::PhaseTransition => out.write("plot_phase_transition.svg", phase_figure(&out)?.to_svg()),
        ExperimentKind::Validate => out.write("plot_validate.svg", panels_svg(&validate_figures(&out)?, 3)),
        ExperimentKind::ChainLab => {
            for (name, fig) in chain_lab_figures(&out)? {
                out.write(&name, fig.to_svg())?;
            }
            Ok(())
        }
    }
}
