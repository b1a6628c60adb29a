//! Empirical strong-smoothness and dissipativity estimation.
//!
//! For sampled latent pairs we form `u = ⟨G(z) − G(z′), ∇G(z)(z − z′)⟩` and
//! `v = ‖z − z′‖²` and look for supporting lines `u ≥ α v − γ`. The whole
//! trade-off curve `γ(α) = max(0, maxᵢ(α vᵢ − uᵢ))` is tabulated on a
//! 512-point grid over `[0, maxᵢ uᵢ/vᵢ]`. The reported point is the largest
//! grid `α > 0` with `γ(α) ≤ γ_tol`; when none exists, the grid point that
//! maximizes `α − γ(α)/mean(v)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::GeneratorNet;
use crate::loss::generator_constants_on_pairs;
use crate::numerics::{dot, mean, norm_sq, RngStream};
use crate::sensing::SensingMatrix;

pub const GRID_POINTS: usize = 512;
pub const GAMMA_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairLaw {
    /// `z, z′ ~ N(0, I)` on all of R^d.
    #[default]
    Gaussian,
    /// `z, z′` uniform in `B(0, R)`.
    UniformBall,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct PairOptions {
    #[serde(default)]
    pub law: PairLaw,
    /// When set, every pair uses this point as `z′`.
    #[serde(default)]
    pub fixed_base: Option<Vec<f64>>,
}

impl PairOptions {
    pub fn ball_constrained() -> Self {
        PairOptions {
            law: PairLaw::UniformBall,
            fixed_base: None,
        }
    }

    pub fn tag(&self) -> String {
        let law = match self.law {
            PairLaw::Gaussian => "gaussian",
            PairLaw::UniformBall => "uniform_ball",
        };
        if self.fixed_base.is_some() {
            format!("{law}+fixed_base")
        } else {
            law.to_string()
        }
    }
}

pub fn sample_pairs(
    net: &GeneratorNet,
    n_pairs: usize,
    options: &PairOptions,
    stream: &mut RngStream,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let d = net.input_dim();
    if let Some(base) = &options.fixed_base {
        if base.len() != d {
            return Err(Error::dim("fixed base point", d, base.len()));
        }
    }
    let draw = |stream: &mut RngStream| match options.law {
        PairLaw::Gaussian => {
            let mut z = vec![0.0; d];
            stream.fill_normal(&mut z);
            z
        }
        PairLaw::UniformBall => stream.uniform_in_ball(d, net.radius()),
    };
    Ok((0..n_pairs)
        .map(|_| {
            let z = draw(stream);
            let zp = match &options.fixed_base {
                Some(base) => base.clone(),
                None => draw(stream),
            };
            (z, zp)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothnessEstimate {
    pub alpha: f64,
    pub gamma: f64,
    /// `(α, γ(α))` over the grid.
    pub curve: Vec<(f64, f64)>,
    pub n_pairs: usize,
    pub pair_law: String,
    /// True when the reported point came from the exact-support rule.
    pub exact_support: bool,
    pub outside_theory: bool,
    #[serde(skip)]
    pub u: Vec<f64>,
    #[serde(skip)]
    pub v: Vec<f64>,
}

impl SmoothnessEstimate {
    /// Scatter CSV with header `u,v`.
    pub fn write_scatter_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["u", "v"])?;
        for (u, v) in self.u.iter().zip(&self.v) {
            w.write_record([u.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Number of pairs with `u < α v − γ` (always zero for a valid fit).
    pub fn crossings(&self) -> usize {
        self.u
            .iter()
            .zip(&self.v)
            .filter(|(u, v)| **u < self.alpha * **v - self.gamma)
            .count()
    }
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        f64::from_bits(1)
    } else if x > 0.0 {
        f64::from_bits(x.to_bits() + 1)
    } else {
        f64::from_bits(x.to_bits() - 1)
    }
}

/// Smallest `γ ≥ max(0, maxᵢ(α vᵢ − uᵢ))` for which `uᵢ ≥ α vᵢ − γ` holds in
/// floating point for every pair.
fn support_gamma(alpha: f64, u: &[f64], v: &[f64]) -> f64 {
    let mut gamma = u
        .iter()
        .zip(v)
        .map(|(ui, vi)| alpha * vi - ui)
        .fold(0.0_f64, f64::max);
    while u.iter().zip(v).any(|(ui, vi)| *ui < alpha * vi - gamma) {
        gamma = next_up(gamma);
    }
    gamma
}

/// Fits the supporting-line curve to `(uᵢ, vᵢ)` pairs. Pairs with `vᵢ = 0` are skipped.
pub fn fit_supporting_line(u: &[f64], v: &[f64], gamma_tol: f64) -> Result<(f64, f64, Vec<(f64, f64)>, bool)> {
    let (u, v): (Vec<f64>, Vec<f64>) = u.iter().zip(v).filter(|(_, v)| **v > 0.0).map(|(a, b)| (*a, *b)).unzip();
    if u.is_empty() {
        return Err(Error::InvalidArgument("all sampled pairs are degenerate (z = z′)".into()));
    }
    let max_ratio = u.iter().zip(&v).map(|(a, b)| a / b).fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let mut curve = Vec::with_capacity(GRID_POINTS);
    let mut running = 0.0_f64;
    for j in 0..GRID_POINTS {
        let alpha = max_ratio * (j as f64 / (GRID_POINTS - 1) as f64);
        running = running.max(support_gamma(alpha, &u, &v));
        curve.push((alpha, running));
    }
    let exact = curve.iter().rposition(|(a, g)| *a > 0.0 && *g <= gamma_tol);
    let (idx, exact_support) = match exact {
        Some(i) => (i, true),
        None => {
            let mv = mean(&v);
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (i, (a, g)) in curve.iter().enumerate() {
                let score = a - g / mv;
                if score > best_score {
                    best_score = score;
                    best = i;
                }
            }
            (best, false)
        }
    };
    Ok((curve[idx].0, curve[idx].1, curve, exact_support))
}

fn finish(u: Vec<f64>, v: Vec<f64>, options: &PairOptions, outside_theory: bool) -> Result<SmoothnessEstimate> {
    let (alpha, gamma, curve, exact_support) = fit_supporting_line(&u, &v, GAMMA_TOL)?;
    Ok(SmoothnessEstimate {
        alpha,
        gamma,
        curve,
        n_pairs: u.len(),
        pair_law: options.tag(),
        exact_support,
        outside_theory,
        u,
        v,
    })
}

/// Strong-smoothness fit on an explicit pair set.
pub fn strong_smoothness_on_pairs(
    net: &GeneratorNet,
    pairs: &[(Vec<f64>, Vec<f64>)],
    options: &PairOptions,
) -> Result<SmoothnessEstimate> {
    let mut u = Vec::with_capacity(pairs.len());
    let mut v = Vec::with_capacity(pairs.len());
    for (z, zp) in pairs {
        let dz: Vec<f64> = z.iter().zip(zp).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = net.forward(z)?.iter().zip(net.forward(zp)?.iter()).map(|(a, b)| a - b).collect();
        let jdz = net.jvp(z, &dz)?;
        u.push(dot(&dg, &jdz));
        v.push(norm_sq(&dz));
    }
    finish(u, v, options, net.outside_theory())
}

pub fn estimate_strong_smoothness_with(
    net: &GeneratorNet,
    n_pairs: usize,
    options: &PairOptions,
    stream: &mut RngStream,
) -> Result<SmoothnessEstimate> {
    if n_pairs < 10 {
        return Err(Error::InvalidArgument("strong-smoothness estimation needs at least 10 pairs".into()));
    }
    let pairs = sample_pairs(net, n_pairs, options, stream)?;
    strong_smoothness_on_pairs(net, &pairs, options)
}

/// `(α, γ)` with pairs `z, z′ ~ N(0, I)`.
pub fn estimate_strong_smoothness(net: &GeneratorNet, n_pairs: usize, stream: &mut RngStream) -> Result<SmoothnessEstimate> {
    estimate_strong_smoothness_with(net, n_pairs, &PairOptions::default(), stream)
}

/// Same fit for `u_A = ⟨∇(AG)(z)ᵀ(AG(z) − AG(z′)), z − z′⟩`.
pub fn estimate_dissipativity_sensing_with(
    net: &GeneratorNet,
    a: &SensingMatrix,
    n_pairs: usize,
    options: &PairOptions,
    stream: &mut RngStream,
) -> Result<SmoothnessEstimate> {
    if net.output_dim() != a.n() {
        return Err(Error::dim("generator output vs sensing columns", a.n(), net.output_dim()));
    }
    if n_pairs < 10 {
        return Err(Error::InvalidArgument("dissipativity estimation needs at least 10 pairs".into()));
    }
    let pairs = sample_pairs(net, n_pairs, options, stream)?;
    let mut u = Vec::with_capacity(n_pairs);
    let mut v = Vec::with_capacity(n_pairs);
    let mat = a.matrix();
    let mut agz = vec![0.0; a.m()];
    let mut agzp = vec![0.0; a.m()];
    let mut ajdz = vec![0.0; a.m()];
    for (z, zp) in &pairs {
        let dz: Vec<f64> = z.iter().zip(zp).map(|(x, y)| x - y).collect();
        mat.matvec_into(&net.forward(z)?, &mut agz);
        mat.matvec_into(&net.forward(zp)?, &mut agzp);
        mat.matvec_into(&net.jvp(z, &dz)?, &mut ajdz);
        let diff: Vec<f64> = agz.iter().zip(&agzp).map(|(x, y)| x - y).collect();
        u.push(dot(&diff, &ajdz));
        v.push(norm_sq(&dz));
    }
    finish(u, v, options, net.outside_theory())
}

pub fn estimate_dissipativity_sensing(
    net: &GeneratorNet,
    a: &SensingMatrix,
    n_pairs: usize,
    stream: &mut RngStream,
) -> Result<SmoothnessEstimate> {
    estimate_dissipativity_sensing_with(net, a, n_pairs, &PairOptions::default(), stream)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Proposition1Report {
    pub iota: f64,
    pub kappa: f64,
    pub m: f64,
    /// `2ι² > Mκ`.
    pub condition_holds: bool,
    /// `ι² − Mκ/2`, the implied lower bound on the strong-smoothness slope.
    pub implied_alpha: f64,
    /// Strong-smoothness fit on the same pairs.
    pub smoothness: SmoothnessEstimate,
    pub outside_theory: bool,
}

/// Estimates `ι, κ, M` on sampled pairs and evaluates `2ι² > Mκ`.
pub fn check_proposition1(net: &GeneratorNet, n_pairs: usize, stream: &mut RngStream) -> Result<Proposition1Report> {
    let options = PairOptions::default();
    let pairs = sample_pairs(net, n_pairs, &options, stream)?;
    let gc = generator_constants_on_pairs(net, &pairs)?;
    let smoothness = strong_smoothness_on_pairs(net, &pairs, &options)?;
    Ok(Proposition1Report {
        iota: gc.iota,
        kappa: gc.kappa,
        m: gc.m,
        condition_holds: 2.0 * gc.iota * gc.iota > gc.m * gc.kappa,
        implied_alpha: gc.iota * gc.iota - gc.m * gc.kappa / 2.0,
        smoothness,
        outside_theory: net.outside_theory(),
    })
}
