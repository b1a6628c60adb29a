//! Constrained Langevin sampler, the gradient-descent baseline, the
//! Metropolis-adjusted auxiliary chain and the truncated-Gaussian initializer.
//!
//! A Langevin step proposes `v = z − η∇F(z) + √(2η/β) ξ` with `ξ ~ N(0, I)` and
//! keeps `v` only if it lies in `B(z, r) ∩ B(0, R)` (closed balls); otherwise
//! the chain stays at `z`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{ConstantsReport, Problem, Workspace};
use crate::numerics::{dist, norm, RngStream, Vector};

/// Rejection-sampling attempts before the warm start gives up.
pub const WARM_START_CAP: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    Sgld,
    Gd,
    MhSgld,
}

impl SamplerMethod {
    pub fn name(self) -> &'static str {
        match self {
            SamplerMethod::Sgld => "sgld",
            SamplerMethod::Gd => "gd",
            SamplerMethod::MhSgld => "mh_sgld",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub eta: f64,
    /// Inverse temperature; `f64::INFINITY` disables the noise.
    pub beta: f64,
    /// Proposal radius; `None` means `√(10 η d / β)`.
    #[serde(default)]
    pub r: Option<f64>,
    pub k_max: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub record_every: u64,
    /// Smoothness constant `L` used by the warm start `N(0, (2Lβ)⁻¹ I)`.
    pub lipschitz: f64,
}

fn one() -> u64 {
    1
}

impl SamplerConfig {
    pub fn new(eta: f64, beta: f64, lipschitz: f64, k_max: u64) -> Self {
        SamplerConfig {
            eta,
            beta,
            r: None,
            k_max,
            seed: 0,
            record_every: 1,
            lipschitz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be finite and >= 0, got {}", self.eta)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {}", self.beta)));
        }
        if let Some(r) = self.r {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument(format!("proposal radius must be positive, got {r}")));
            }
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::InvalidArgument(format!("lipschitz must be positive, got {}", self.lipschitz)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn proposal_radius(&self, d: usize) -> f64 {
        self.r.unwrap_or_else(|| (10.0 * self.eta * d as f64 / self.beta).sqrt())
    }

    pub fn noise_scale(&self) -> f64 {
        (2.0 * self.eta / self.beta).sqrt()
    }
}

/// `η = min{1/(30 L d), d/(25 β D²)}` from estimated constants.
pub fn theory_step_size(constants: &ConstantsReport, beta: f64, d: usize) -> f64 {
    let d = d as f64;
    let smooth_cap = 1.0 / (30.0 * constants.l * d);
    let noise_cap = d / (25.0 * beta * constants.d * constants.d);
    smooth_cap.min(noise_cap)
}

/// Noise-free schedule for the gradient-descent baseline: `1/(30 L d)`.
pub fn gd_step_size(constants: &ConstantsReport, d: usize) -> f64 {
    1.0 / (30.0 * constants.l * d as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainState {
    pub z: Vector,
    pub k: u64,
    pub n_accepted: u64,
    pub n_rejected_ball: u64,
    pub n_rejected_domain: u64,
    /// Lazy holds of the Metropolis-adjusted chain.
    pub n_lazy: u64,
    /// Metropolis–Hastings rejections of the adjusted chain.
    pub n_rejected_mh: u64,
}

impl ChainState {
    pub fn new(z: Vector) -> Self {
        ChainState {
            z,
            k: 0,
            n_accepted: 0,
            n_rejected_ball: 0,
            n_rejected_domain: 0,
            n_lazy: 0,
            n_rejected_mh: 0,
        }
    }

    pub fn counter_total(&self) -> u64 {
        self.n_accepted + self.n_rejected_ball + self.n_rejected_domain + self.n_lazy + self.n_rejected_mh
    }
}

/// One chain bound to a problem, with cached loss/gradient at the current point.
pub struct Chain<'p> {
    problem: &'p Problem,
    state: ChainState,
    ws: Workspace,
    f: f64,
    grad: Vec<f64>,
    cache_valid: bool,
    proposal: Vec<f64>,
    proposal_grad: Vec<f64>,
}

impl<'p> Chain<'p> {
    pub fn new(problem: &'p Problem, state: ChainState) -> Result<Self> {
        let d = problem.latent_dim();
        if state.z.len() != d {
            return Err(Error::dim("chain state", d, state.z.len()));
        }
        Ok(Chain {
            problem,
            state,
            ws: problem.workspace(),
            f: f64::NAN,
            grad: vec![0.0; d],
            cache_valid: false,
            proposal: vec![0.0; d],
            proposal_grad: vec![0.0; d],
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn into_state(self) -> ChainState {
        self.state
    }

    pub fn z(&self) -> &[f64] {
        &self.state.z
    }

    /// `F` at the current point.
    pub fn loss(&mut self) -> Result<f64> {
        self.refresh()?;
        Ok(self.f)
    }

    fn refresh(&mut self) -> Result<()> {
        if !self.cache_valid {
            self.f = self.problem.loss_grad_with(&self.state.z, &mut self.ws, &mut self.grad)?;
            self.cache_valid = true;
        }
        Ok(())
    }

    fn propose(&mut self, eta: f64, noise: f64, stream: &mut RngStream) {
        for ((v, z), g) in self.proposal.iter_mut().zip(self.state.z.iter()).zip(&self.grad) {
            *v = z - eta * g + noise * stream.normal();
        }
    }

    fn accept_proposal(&mut self) {
        self.state.z.copy_from(&self.proposal);
        self.cache_valid = false;
    }

    /// Checks the proposal against the domain and the step ball; records the outcome.
    fn screen(&mut self, r: f64) -> bool {
        if norm(&self.proposal) > self.problem.radius() {
            self.state.n_rejected_domain += 1;
            false
        } else if dist(&self.proposal, &self.state.z) > r {
            self.state.n_rejected_ball += 1;
            false
        } else {
            true
        }
    }

    pub fn sgld_step(&mut self, config: &SamplerConfig, stream: &mut RngStream) -> Result<()> {
        self.refresh()?;
        let r = config.proposal_radius(self.problem.latent_dim());
        self.propose(config.eta, config.noise_scale(), stream);
        if !self.proposal.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("Langevin proposal".into()));
        }
        if self.screen(r) {
            self.state.n_accepted += 1;
            self.accept_proposal();
        }
        self.state.k += 1;
        Ok(())
    }

    /// `z ← z − η∇F(z)`, radially projected back onto `B(0, R)`.
    pub fn gd_step(&mut self, eta: f64) -> Result<()> {
        self.refresh()?;
        for ((v, z), g) in self.proposal.iter_mut().zip(self.state.z.iter()).zip(&self.grad) {
            *v = z - eta * g;
        }
        let n = norm(&self.proposal);
        let radius = self.problem.radius();
        if n > radius {
            let mut scale = radius / n;
            self.proposal.iter_mut().for_each(|x| *x *= scale);
            // rounding can leave the rescaled point an ulp outside
            while norm(&self.proposal) > radius {
                scale = 1.0 - f64::EPSILON;
                self.proposal.iter_mut().for_each(|x| *x *= scale);
            }
        }
        if !self.proposal.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("gradient step".into()));
        }
        self.state.n_accepted += 1;
        self.accept_proposal();
        self.state.k += 1;
        Ok(())
    }

    /// One step of the 1/2-lazy chain with a Metropolis–Hastings correction.
    pub fn mh_step(&mut self, config: &SamplerConfig, stream: &mut RngStream) -> Result<()> {
        if !config.beta.is_finite() || config.eta <= 0.0 {
            return Err(Error::InvalidArgument("the adjusted chain needs finite beta and eta > 0".into()));
        }
        self.state.k += 1;
        if stream.uniform() < 0.5 {
            self.state.n_lazy += 1;
            return Ok(());
        }
        self.refresh()?;
        let r = config.proposal_radius(self.problem.latent_dim());
        self.propose(config.eta, config.noise_scale(), stream);
        if !self.proposal.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("Langevin proposal".into()));
        }
        if !self.screen(r) {
            return Ok(());
        }
        let f_w = self
            .problem
            .loss_grad_with(&self.proposal, &mut self.ws, &mut self.proposal_grad)?;
        // the workspace now reflects the proposal, not the current point
        let log_alpha = log_acceptance_parts(
            &self.state.z,
            self.f,
            &self.grad,
            &self.proposal,
            f_w,
            &self.proposal_grad,
            config.eta,
            config.beta,
        );
        if log_alpha.is_nan() {
            return Err(Error::NonFinite("Metropolis–Hastings log acceptance".into()));
        }
        if log_alpha >= 0.0 || stream.uniform() < log_alpha.exp() {
            self.state.n_accepted += 1;
            self.state.z.copy_from(&self.proposal);
            std::mem::swap(&mut self.grad, &mut self.proposal_grad);
            self.f = f_w;
            self.cache_valid = true;
        } else {
            self.state.n_rejected_mh += 1;
        }
        Ok(())
    }
}

/// `log α_u(w)` from the Gaussian parts of the forward and reverse transition densities:
/// `log P(u|w) − log P(w|u) − β (F(w) − F(u))`, with
/// `log P(v|u) = −‖v − u + η∇F(u)‖² / (4η/β)` up to a shared constant.
#[allow(clippy::too_many_arguments)]
pub fn log_acceptance_parts(
    u: &[f64],
    f_u: f64,
    g_u: &[f64],
    w: &[f64],
    f_w: f64,
    g_w: &[f64],
    eta: f64,
    beta: f64,
) -> f64 {
    let scale = 4.0 * eta / beta;
    let mut forward = 0.0;
    let mut reverse = 0.0;
    for i in 0..u.len() {
        let a = w[i] - u[i] + eta * g_u[i];
        let b = u[i] - w[i] + eta * g_w[i];
        forward += a * a;
        reverse += b * b;
    }
    (forward - reverse) / scale - beta * (f_w - f_u)
}

/// `log α_u(w)` for two points of `problem`. Returns `-∞` when `u ∉ B(w, r) ∩ D`.
pub fn log_acceptance(problem: &Problem, u: &[f64], w: &[f64], config: &SamplerConfig) -> Result<f64> {
    let r = config.proposal_radius(problem.latent_dim());
    if dist(u, w) > r || norm(u) > problem.radius() {
        return Ok(f64::NEG_INFINITY);
    }
    let g_u = problem.grad(u)?;
    let g_w = problem.grad(w)?;
    Ok(log_acceptance_parts(
        u,
        problem.loss(u)?,
        &g_u,
        w,
        problem.loss(w)?,
        &g_w,
        config.eta,
        config.beta,
    ))
}

/// Draw from `N(0, (2Lβ)⁻¹ I)` conditioned on `‖z‖ ≤ R`.
pub fn warm_start(problem: &Problem, beta: f64, lipschitz: f64, stream: &mut RngStream) -> Result<Vector> {
    if !(beta > 0.0) || !(lipschitz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "warm start needs beta, L > 0 (got {beta}, {lipschitz})"
        )));
    }
    let std = 1.0 / (2.0 * lipschitz * beta).sqrt();
    let d = problem.latent_dim();
    let radius = problem.radius();
    let mut z = vec![0.0; d];
    for _ in 0..WARM_START_CAP {
        for x in z.iter_mut() {
            *x = std * stream.normal();
        }
        if norm(&z) <= radius {
            return Vector::new(z);
        }
    }
    Err(Error::RejectionCap {
        attempts: WARM_START_CAP,
    })
}

pub fn sgld_step(state: &ChainState, problem: &Problem, config: &SamplerConfig, stream: &mut RngStream) -> Result<ChainState> {
    let mut chain = Chain::new(problem, state.clone())?;
    chain.sgld_step(config, stream)?;
    Ok(chain.into_state())
}

pub fn gd_step(state: &ChainState, problem: &Problem, eta: f64) -> Result<ChainState> {
    let mut chain = Chain::new(problem, state.clone())?;
    chain.gd_step(eta)?;
    Ok(chain.into_state())
}

pub fn mh_sgld_step(
    state: &ChainState,
    problem: &Problem,
    config: &SamplerConfig,
    stream: &mut RngStream,
) -> Result<ChainState> {
    let mut chain = Chain::new(problem, state.clone())?;
    chain.mh_step(config, stream)?;
    Ok(chain.into_state())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub k: u64,
    pub z: Vec<f64>,
    pub f: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub method: SamplerMethod,
    pub config: SamplerConfig,
    pub records: Vec<Record>,
    pub final_state: ChainState,
}

impl Trajectory {
    pub fn initial(&self) -> &Record {
        &self.records[0]
    }

    pub fn last(&self) -> &Record {
        self.records.last().unwrap()
    }

    /// CSV with header `k,f_value,z_0,…,z_{d−1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.final_state.z.len();
        let mut header = vec!["k".to_string(), "f_value".to_string()];
        header.extend((0..d).map(|i| format!("z_{i}")));
        w.write_record(&header)?;
        for rec in &self.records {
            let mut row = vec![rec.k.to_string(), rec.f.to_string()];
            row.extend(rec.z.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON sidecar with the config echo and the final counters.
    pub fn sidecar_json(&self) -> String {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            method: SamplerMethod,
            config: &'a SamplerConfig,
            final_state: &'a ChainState,
            records: usize,
        }
        serde_json::to_string_pretty(&Sidecar {
            method: self.method,
            config: &self.config,
            final_state: &self.final_state,
            records: self.records.len(),
        })
        .expect("serializable")
    }

    pub fn save(&self, csv_path: impl AsRef<Path>, json_path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(csv_path)?);
        self.write_csv(file)?;
        std::fs::write(json_path, self.sidecar_json())?;
        Ok(())
    }
}

/// Runs `k_max` steps from `z0`, recording every `record_every` steps and the final step.
pub fn run_from(
    problem: &Problem,
    method: SamplerMethod,
    config: &SamplerConfig,
    z0: Vector,
    stream: &mut RngStream,
) -> Result<Trajectory> {
    config.validate()?;
    let mut chain = Chain::new(problem, ChainState::new(z0))?;
    let mut records = vec![Record {
        k: 0,
        z: chain.z().to_vec(),
        f: chain.loss()?,
    }];
    for k in 1..=config.k_max {
        match method {
            SamplerMethod::Sgld => chain.sgld_step(config, stream)?,
            SamplerMethod::Gd => chain.gd_step(config.eta)?,
            SamplerMethod::MhSgld => chain.mh_step(config, stream)?,
        }
        if k % config.record_every == 0 || k == config.k_max {
            let f = chain.loss()?;
            records.push(Record {
                k,
                z: chain.z().to_vec(),
                f,
            });
        }
    }
    Ok(Trajectory {
        method,
        config: config.clone(),
        records,
        final_state: chain.into_state(),
    })
}

/// Warm start then `k_max` iterations. Every method draws `z₀` the same way,
/// so runs sharing a seed share their initialization.
pub fn run(problem: &Problem, method: SamplerMethod, config: &SamplerConfig, stream: &mut RngStream) -> Result<Trajectory> {
    config.validate()?;
    let z0 = warm_start(problem, config.beta, config.lipschitz, stream)?;
    run_from(problem, method, config, z0, stream)
}
