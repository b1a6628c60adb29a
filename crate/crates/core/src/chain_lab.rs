//! Distributional diagnostics in one and two latent dimensions, where the
//! Gibbs target `π ∝ exp(−βF) 1(‖z‖ ≤ R)` can be tabulated by quadrature.
//!
//! Grids use midpoint cells of side `h = 2R / resolution`. At `d = 2` only
//! cells whose center lies in the disk are kept. Histograms bin samples onto
//! the same cells, optionally merged into a coarser `bins`-per-axis lattice.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{Activation, ActivationKind, GeneratorNet, Layer};
use crate::loss::Problem;
use crate::numerics::{norm_sq, streams, Matrix, RngStream, Vector};
use crate::samplers::{warm_start, Chain, ChainState, SamplerConfig, SamplerMethod};
use crate::sensing::SensingMatrix;

pub const RESOLUTION_1D: usize = 2048;
pub const RESOLUTION_2D: usize = 256;

pub fn default_resolution(d: usize) -> usize {
    if d == 1 {
        RESOLUTION_1D
    } else {
        RESOLUTION_2D
    }
}

#[derive(Clone, Debug)]
pub struct GibbsGrid {
    d: usize,
    radius: f64,
    resolution: usize,
    spacing: f64,
    beta: f64,
    /// Flattened cell centers, `d` numbers per cell.
    centers: Vec<f64>,
    /// Axis indices of each cell (`iy = 0` at `d = 1`).
    axes: Vec<(u32, u32)>,
    /// `resolution^d` entries mapping lattice index to cell, `u32::MAX` outside.
    lookup: Vec<u32>,
    log_density: Vec<f64>,
    log_partition: f64,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl GibbsGrid {
    /// Tabulates `exp(−β·energy(z))` over the domain cells.
    pub fn from_energy<E>(d: usize, radius: f64, beta: f64, resolution: usize, mut energy: E) -> Result<Self>
    where
        E: FnMut(&[f64]) -> Result<f64>,
    {
        if d == 0 || d > 2 {
            return Err(Error::UnsupportedDimension(d));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid radius must be positive, got {radius}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid beta must be finite and >= 0, got {beta}")));
        }
        if resolution < 2 {
            return Err(Error::InvalidArgument("grid resolution must be >= 2".into()));
        }
        let h = 2.0 * radius / resolution as f64;
        let coord = |i: usize| -radius + (i as f64 + 0.5) * h;
        let mut centers = Vec::new();
        let mut axes = Vec::new();
        let mut lookup = vec![u32::MAX; resolution.pow(d as u32)];
        if d == 1 {
            for i in 0..resolution {
                lookup[i] = axes.len() as u32;
                centers.push(coord(i));
                axes.push((i as u32, 0));
            }
        } else {
            for ix in 0..resolution {
                for iy in 0..resolution {
                    let (x, y) = (coord(ix), coord(iy));
                    if x * x + y * y <= radius * radius {
                        lookup[ix * resolution + iy] = axes.len() as u32;
                        centers.extend([x, y]);
                        axes.push((ix as u32, iy as u32));
                    }
                }
            }
        }
        let mut log_w = Vec::with_capacity(axes.len());
        for c in centers.chunks(d) {
            let e = energy(c)?;
            if e.is_nan() {
                return Err(Error::NonFinite(format!("energy at {c:?}")));
            }
            log_w.push(if beta == 0.0 { 0.0 } else { -beta * e });
        }
        let log_vol = (d as f64) * h.ln();
        let log_partition = log_sum_exp(&log_w) + log_vol;
        if !log_partition.is_finite() {
            return Err(Error::NonFinite("grid partition sum".into()));
        }
        let log_density = log_w.iter().map(|w| w - log_partition).collect();
        Ok(GibbsGrid {
            d,
            radius,
            resolution,
            spacing: h,
            beta,
            centers,
            axes,
            lookup,
            log_density,
            log_partition,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.d as i32)
    }

    pub fn len(&self) -> usize {
        self.axes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    pub fn center(&self, cell: usize) -> &[f64] {
        &self.centers[cell * self.d..(cell + 1) * self.d]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks(self.d)
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    pub fn density(&self, cell: usize) -> f64 {
        self.log_density[cell].exp()
    }

    pub fn densities(&self) -> Vec<f64> {
        self.log_density.iter().map(|l| l.exp()).collect()
    }

    /// Quadrature partition value `Λ = Σ exp(−βF) h^d`.
    pub fn partition(&self) -> f64 {
        self.log_partition.exp()
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// `Σ density · h^d`; one up to rounding.
    pub fn total_mass(&self) -> f64 {
        let vol = self.cell_volume();
        self.log_density.iter().map(|l| l.exp() * vol).sum()
    }

    /// Cell containing `z`, if any.
    pub fn locate(&self, z: &[f64]) -> Option<usize> {
        let n = self.resolution;
        let axis = |x: f64| -> Option<usize> {
            if !(x.abs() <= self.radius) {
                return None;
            }
            Some((((x + self.radius) / self.spacing) as usize).min(n - 1))
        };
        let idx = if self.d == 1 {
            axis(z[0])?
        } else {
            axis(z[0])? * n + axis(z[1])?
        };
        match self.lookup[idx] {
            u32::MAX => None,
            c => Some(c as usize),
        }
    }

    fn bin_width(&self, bins: usize) -> Result<usize> {
        if bins == 0 || !self.resolution.is_multiple_of(bins) {
            return Err(Error::InvalidArgument(format!(
                "{bins} bins per axis do not divide grid resolution {}",
                self.resolution
            )));
        }
        Ok(self.resolution / bins)
    }

    fn bin_of(&self, cell: usize, width: usize, bins: usize) -> usize {
        let (ix, iy) = self.axes[cell];
        let bx = ix as usize / width;
        if self.d == 1 {
            bx
        } else {
            bx * bins + iy as usize / width
        }
    }

    /// π mass per bin of a `bins`-per-axis lattice.
    pub fn binned_masses(&self, bins: usize) -> Result<Vec<f64>> {
        let width = self.bin_width(bins)?;
        let vol = self.cell_volume();
        let mut masses = vec![0.0; bins.pow(self.d as u32)];
        for (cell, l) in self.log_density.iter().enumerate() {
            masses[self.bin_of(cell, width, bins)] += l.exp() * vol;
        }
        Ok(masses)
    }

    /// Sample counts per bin and the number of samples outside every cell.
    pub fn histogram<S: AsRef<[f64]>>(&self, samples: &[S], bins: usize) -> Result<(Vec<u64>, u64)> {
        let width = self.bin_width(bins)?;
        let mut counts = vec![0u64; bins.pow(self.d as u32)];
        let mut outside = 0;
        for s in samples {
            let z = s.as_ref();
            if z.len() != self.d {
                return Err(Error::dim("sample vs grid dimension", self.d, z.len()));
            }
            match self.locate(z) {
                Some(cell) => counts[self.bin_of(cell, width, bins)] += 1,
                None => outside += 1,
            }
        }
        Ok((counts, outside))
    }

    /// CSV with header `z_0[,z_1],density`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.d).map(|i| format!("z_{i}")).collect();
        header.push("density".into());
        w.write_record(&header)?;
        for (cell, c) in self.centers().enumerate() {
            let mut row: Vec<String> = c.iter().map(f64::to_string).collect();
            row.push(self.density(cell).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Gibbs grid of `problem` at inverse temperature `beta`; `resolution`
/// defaults to 2048 cells at `d = 1` and 256 per axis at `d = 2`.
pub fn gibbs_grid(problem: &Problem, beta: f64, resolution: Option<usize>) -> Result<GibbsGrid> {
    let d = problem.latent_dim();
    if d > 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    let mut ws = problem.workspace();
    GibbsGrid::from_energy(d, problem.radius(), beta, resolution.unwrap_or(default_resolution(d)), |z| {
        problem.loss_with(z, &mut ws)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TvEstimate {
    pub tv: f64,
    /// Delta-method standard error of the plug-in estimate.
    pub mc_stderr: f64,
    pub n_samples: usize,
}

/// TV between the empirical law of `samples` and the grid law, both binned on
/// `bins` cells per axis (`None` = grid cells).
pub fn tv_estimate<S: AsRef<[f64]>>(samples: &[S], grid: &GibbsGrid, bins: Option<usize>) -> Result<TvEstimate> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("TV distance needs at least one sample".into()));
    }
    let bins = bins.unwrap_or(grid.resolution());
    let (counts, outside) = grid.histogram(samples, bins)?;
    let masses = grid.binned_masses(bins)?;
    let n = samples.len() as f64;
    let mut abs_sum = outside as f64 / n;
    let mut s2p = abs_sum;
    let mut sp = abs_sum;
    for (c, p) in counts.iter().zip(&masses) {
        let q = *c as f64 / n;
        let diff = q - p;
        abs_sum += diff.abs();
        if diff != 0.0 {
            s2p += q;
            sp += diff.signum() * q;
        }
    }
    let var = ((s2p - sp * sp) / n).max(0.0);
    Ok(TvEstimate {
        tv: 0.5 * abs_sum,
        mc_stderr: 0.5 * var.sqrt(),
        n_samples: samples.len(),
    })
}

/// `½ Σ |hist − π|` over grid cells.
pub fn tv_distance<S: AsRef<[f64]>>(samples: &[S], grid: &GibbsGrid) -> Result<f64> {
    Ok(tv_estimate(samples, grid, None)?.tv)
}

/// TV between two empirical laws binned on the same grid.
pub fn tv_between<S: AsRef<[f64]>, T: AsRef<[f64]>>(
    a: &[S],
    b: &[T],
    grid: &GibbsGrid,
    bins: Option<usize>,
) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("TV distance needs at least one sample".into()));
    }
    let bins = bins.unwrap_or(grid.resolution());
    let (ca, oa) = grid.histogram(a, bins)?;
    let (cb, ob) = grid.histogram(b, bins)?;
    let (na, nb) = (a.len() as u128, b.len() as u128);
    // exact integer numerator over a common denominator
    let mut num: u128 = (oa as u128 * nb).abs_diff(ob as u128 * na);
    for (x, y) in ca.iter().zip(&cb) {
        num += (*x as u128 * nb).abs_diff(*y as u128 * na);
    }
    Ok(num as f64 / (2 * na * nb) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingSpec {
    pub method: SamplerMethod,
    pub n_chains: usize,
    /// Strictly increasing step counts.
    pub checkpoints: Vec<u64>,
    /// Histogram lattice per axis; must divide the grid resolution.
    #[serde(default)]
    pub tv_bins: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Inverse temperature of the warm start; defaults to the sampler's.
    #[serde(default)]
    pub warm_start_beta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub k: u64,
    pub tv: f64,
    pub mc_stderr: f64,
}

/// States of `n_chains` independent chains at every checkpoint, indexed
/// `[checkpoint][chain]`. Chain `i` draws from stream `CHAIN_BASE + i`.
pub fn chain_snapshots(problem: &Problem, config: &SamplerConfig, spec: &MixingSpec) -> Result<Vec<Vec<Vec<f64>>>> {
    if spec.n_chains == 0 {
        return Err(Error::InvalidArgument("mixing curve needs at least one chain".into()));
    }
    if spec.checkpoints.is_empty() || spec.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("checkpoints must be nonempty and strictly increasing".into()));
    }
    let stepping = spec.checkpoints.last().copied().unwrap_or(0) > 0;
    if stepping {
        config.validate()?;
    }
    let warm_beta = spec.warm_start_beta.unwrap_or(config.beta);
    let per_chain: Vec<Vec<Vec<f64>>> = (0..spec.n_chains)
        .into_par_iter()
        .map(|i| -> Result<Vec<Vec<f64>>> {
            let mut stream = RngStream::new(spec.seed, streams::CHAIN_BASE + i as u64);
            let z0 = warm_start(problem, warm_beta, config.lipschitz, &mut stream)?;
            let mut chain = Chain::new(problem, ChainState::new(z0))?;
            let mut out = Vec::with_capacity(spec.checkpoints.len());
            let mut k = 0;
            for &target in &spec.checkpoints {
                while k < target {
                    match spec.method {
                        SamplerMethod::Sgld => chain.sgld_step(config, &mut stream)?,
                        SamplerMethod::Gd => chain.gd_step(config.eta)?,
                        SamplerMethod::MhSgld => chain.mh_step(config, &mut stream)?,
                    }
                    k += 1;
                }
                out.push(chain.z().to_vec());
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok((0..spec.checkpoints.len())
        .map(|j| per_chain.iter().map(|c| c[j].clone()).collect())
        .collect())
}

/// TV to `grid` at each checkpoint, over independent chains started from the warm start.
pub fn mixing_curve(problem: &Problem, config: &SamplerConfig, grid: &GibbsGrid, spec: &MixingSpec) -> Result<Vec<CurvePoint>> {
    if problem.latent_dim() > 2 {
        return Err(Error::UnsupportedDimension(problem.latent_dim()));
    }
    if problem.latent_dim() != grid.d() {
        return Err(Error::dim("problem vs grid dimension", grid.d(), problem.latent_dim()));
    }
    let snaps = chain_snapshots(problem, config, spec)?;
    spec.checkpoints
        .iter()
        .zip(&snaps)
        .map(|(&k, samples)| {
            let est = tv_estimate(samples, grid, spec.tv_bins)?;
            Ok(CurvePoint {
                k,
                tv: est.tv,
                mc_stderr: est.mc_stderr,
            })
        })
        .collect()
}

/// CSV with header `k,tv,mc_stderr`.
pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "tv", "mc_stderr"])?;
    for p in curve {
        w.write_record([p.k.to_string(), p.tv.to_string(), p.mc_stderr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Every iterate of a single chain of `n_steps` steps, `z0` included.
pub fn long_run(
    problem: &Problem,
    method: SamplerMethod,
    config: &SamplerConfig,
    z0: Vector,
    n_steps: u64,
    stream: &mut RngStream,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let mut chain = Chain::new(problem, ChainState::new(z0))?;
    let mut out = Vec::with_capacity(n_steps as usize + 1);
    out.push(chain.z().to_vec());
    for _ in 0..n_steps {
        match method {
            SamplerMethod::Sgld => chain.sgld_step(config, stream)?,
            SamplerMethod::Gd => chain.gd_step(config.eta)?,
            SamplerMethod::MhSgld => chain.mh_step(config, stream)?,
        }
        out.push(chain.z().to_vec());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetailedBalanceReport {
    pub pairs_checked: usize,
    /// Largest `|N_ij − N_ji| / √(N_ij + N_ji)` among checked pairs.
    pub worst_z: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Compares forward and backward transition counts between distinct bins of
/// a trajectory, for bin pairs visited at least `min_count` times in total.
pub fn detailed_balance_check<S: AsRef<[f64]>>(
    path: &[S],
    grid: &GibbsGrid,
    bins: usize,
    min_count: u64,
    threshold: f64,
) -> Result<DetailedBalanceReport> {
    let width = grid.bin_width(bins)?;
    let nb = bins.pow(grid.d() as u32);
    let mut counts = vec![0u64; nb * nb];
    let bin = |z: &[f64]| grid.locate(z).map(|c| grid.bin_of(c, width, bins));
    for w in path.windows(2) {
        if let (Some(a), Some(b)) = (bin(w[0].as_ref()), bin(w[1].as_ref())) {
            if a != b {
                counts[a * nb + b] += 1;
            }
        }
    }
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for i in 0..nb {
        for j in i + 1..nb {
            let (f, b) = (counts[i * nb + j], counts[j * nb + i]);
            if f + b >= min_count {
                checked += 1;
                worst = worst.max(f.abs_diff(b) as f64 / ((f + b) as f64).sqrt());
            }
        }
    }
    Ok(DetailedBalanceReport {
        pairs_checked: checked,
        worst_z: worst,
        threshold,
        passed: checked > 0 && worst <= threshold,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cut {
    Point { t: f64 },
    Halfspace { angle: f64, offset: f64 },
    Disk { center: [f64; 2], radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheegerReport {
    pub rho: f64,
    pub cut: Cut,
    /// At `d = 2` the search is over a finite dictionary, so `rho` bounds the true constant from above.
    pub upper_bound_only: bool,
}

/// Best cut of a one-dimensional mass profile with bins of width `h`.
/// Returns `(ratio, index)` where the cut sits after bin `index`.
fn scan_profile(masses: &[f64], h: f64) -> Option<(f64, usize)> {
    let total: f64 = masses.iter().sum();
    let mut cum = 0.0;
    let mut best: Option<(f64, usize)> = None;
    for j in 0..masses.len().saturating_sub(1) {
        cum += masses[j];
        let smaller = cum.min(total - cum);
        if smaller <= 0.0 {
            continue;
        }
        let boundary = 0.5 * (masses[j] + masses[j + 1]) / h;
        let ratio = boundary / smaller;
        if best.is_none_or(|(b, _)| ratio < b) {
            best = Some((ratio, j));
        }
    }
    best
}

const HALFSPACE_ANGLES: usize = 64;
const DISK_CENTERS_PER_AXIS: usize = 9;

/// Isoperimetric ratio `min boundary measure / min(π(S), 1 − π(S))`.
pub fn cheeger_report(grid: &GibbsGrid) -> Result<CheegerReport> {
    let h = grid.spacing();
    let r = grid.radius();
    let vol = grid.cell_volume();
    let masses: Vec<f64> = grid.log_density().iter().map(|l| l.exp() * vol).collect();
    let degenerate = || Error::InvalidArgument("grid has no admissible cut".into());
    match grid.d() {
        1 => {
            let (rho, j) = scan_profile(&masses, h).ok_or_else(degenerate)?;
            Ok(CheegerReport {
                rho,
                cut: Cut::Point {
                    t: -r + (j + 1) as f64 * h,
                },
                upper_bound_only: false,
            })
        }
        2 => {
            let mut best: Option<(f64, Cut)> = None;
            let mut consider = |ratio: f64, cut: Cut| {
                if best.as_ref().is_none_or(|(b, _)| ratio < *b) {
                    best = Some((ratio, cut));
                }
            };
            let nb = grid.resolution();
            for a in 0..HALFSPACE_ANGLES {
                let angle = std::f64::consts::PI * a as f64 / HALFSPACE_ANGLES as f64;
                let (c, s) = (angle.cos(), angle.sin());
                let mut profile = vec![0.0; nb];
                for (cell, z) in grid.centers().enumerate() {
                    let proj = z[0] * c + z[1] * s;
                    let b = (((proj + r) / h) as usize).min(nb - 1);
                    profile[b] += masses[cell];
                }
                if let Some((ratio, j)) = scan_profile(&profile, h) {
                    consider(
                        ratio,
                        Cut::Halfspace {
                            angle,
                            offset: -r + (j + 1) as f64 * h,
                        },
                    );
                }
            }
            let n_radial = 2 * nb;
            for i in 0..DISK_CENTERS_PER_AXIS {
                for k in 0..DISK_CENTERS_PER_AXIS {
                    let step = r / (DISK_CENTERS_PER_AXIS - 1) as f64;
                    let center = [-r / 2.0 + i as f64 * step, -r / 2.0 + k as f64 * step];
                    let mut profile = vec![0.0; n_radial];
                    for (cell, z) in grid.centers().enumerate() {
                        let dist = ((z[0] - center[0]).powi(2) + (z[1] - center[1]).powi(2)).sqrt();
                        let b = ((dist / h) as usize).min(n_radial - 1);
                        profile[b] += masses[cell];
                    }
                    if let Some((ratio, j)) = scan_profile(&profile, h) {
                        consider(
                            ratio,
                            Cut::Disk {
                                center,
                                radius: (j + 1) as f64 * h,
                            },
                        );
                    }
                }
            }
            let (rho, cut) = best.ok_or_else(degenerate)?;
            Ok(CheegerReport {
                rho,
                cut,
                upper_bound_only: true,
            })
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}

pub fn cheeger_estimate(grid: &GibbsGrid) -> Result<f64> {
    Ok(cheeger_report(grid)?.rho)
}

/// `max μ₀/π` over cells, for `μ₀ = N(0, (2Lβ)⁻¹ I)` truncated to the domain
/// and normalized on the same quadrature.
pub fn warm_start_lambda(grid: &GibbsGrid, lipschitz: f64, beta: f64) -> Result<f64> {
    if !(lipschitz > 0.0 && beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "warm start needs beta, L > 0 (got {beta}, {lipschitz})"
        )));
    }
    let log_w: Vec<f64> = grid.centers().map(|z| -lipschitz * beta * norm_sq(z)).collect();
    let log_z0 = log_sum_exp(&log_w) + grid.cell_volume().ln();
    let mut worst = f64::NEG_INFINITY;
    for (lw, lp) in log_w.iter().zip(grid.log_density()) {
        let log_mu = lw - log_z0;
        if *lp == f64::NEG_INFINITY && log_mu > f64::NEG_INFINITY {
            return Err(Error::NonFinite("warm start ratio: π vanishes where μ₀ does not".into()));
        }
        worst = worst.max(log_mu - lp);
    }
    let lambda = worst.exp();
    if !lambda.is_finite() {
        return Err(Error::NonFinite(format!("warm start ratio overflows (log λ = {worst})")));
    }
    Ok(lambda)
}

/// `∫ F dπ` by quadrature on the grid.
pub fn gibbs_expected_loss(grid: &GibbsGrid, problem: &Problem) -> Result<f64> {
    if problem.latent_dim() != grid.d() {
        return Err(Error::dim("problem vs grid dimension", grid.d(), problem.latent_dim()));
    }
    let mut ws = problem.workspace();
    let vol = grid.cell_volume();
    let mut total = 0.0;
    for (cell, z) in grid.centers().enumerate() {
        total += problem.loss_with(z, &mut ws)? * grid.density(cell) * vol;
    }
    Ok(total)
}

/// `F(z) = ‖z − c‖²` on `B(0, R)`: identity generator, identity sensing, `y = c`.
pub fn quadratic_problem(center: &[f64], radius: f64) -> Result<Problem> {
    let d = center.len();
    Problem::new(
        GeneratorNet::identity(d, radius)?,
        SensingMatrix::identity(d),
        Vector::new(center.to_vec())?,
    )
}

/// One-dimensional double well `F = G(z)²` with
/// `G(z) = tanh(a(z − 1)) − tanh(a(z + 1)) + tanh(2a)`, zero at `z = ±1`.
/// Built as a genuine two-layer generator under identity sensing with `y = 0`.
pub fn double_well(a: f64, radius: f64) -> Result<Problem> {
    let hidden = Layer::new(
        Matrix::from_rows(&[vec![a], vec![a]])?,
        vec![-a, a],
        Activation::new(ActivationKind::Tanh),
    )?;
    let out = Layer::new(
        Matrix::from_rows(&[vec![1.0, -1.0]])?,
        vec![(2.0 * a).tanh()],
        Activation::new(ActivationKind::Identity),
    )?;
    Problem::new(
        GeneratorNet::new(vec![hidden, out], radius)?,
        SensingMatrix::identity(1),
        Vector::zeros(1),
    )
}
