//! Experiment configuration: one JSON document per run, with dotted
//! `key=value` overrides applied before validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::generator::{load_net, GeneratorNet, NetSpec};
use crate::numerics::Matrix;
use crate::samplers::SamplerMethod;
use crate::validators::PairOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Recover,
    Compare,
    PhaseTransition,
    Validate,
    ChainLab,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Recover => "recover",
            ExperimentKind::Compare => "compare",
            ExperimentKind::PhaseTransition => "phase_transition",
            ExperimentKind::Validate => "validate",
            ExperimentKind::ChainLab => "chain_lab",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(Value::String(s.replace('-', "_"))).ok()
    }
}

/// Where the generator comes from. Exactly one variant per config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSource {
    Netspec(NetSpec),
    /// Weight file; relative paths resolve against the config file's directory.
    File(PathBuf),
    Identity {
        dim: usize,
        #[serde(default)]
        radius: Option<f64>,
    },
    Linear {
        /// Row-major `n × d` weights.
        weights: Vec<Vec<f64>>,
        #[serde(default)]
        radius: Option<f64>,
    },
}

impl GeneratorSource {
    pub fn build(&self, base_dir: &Path) -> Result<GeneratorNet> {
        match self {
            GeneratorSource::Netspec(spec) => spec.build(),
            GeneratorSource::File(path) => {
                let path = if path.is_relative() { base_dir.join(path) } else { path.clone() };
                load_net(&path)
            }
            GeneratorSource::Identity { dim, radius } => {
                if *dim == 0 {
                    return Err(Error::Config("generator.identity.dim must be >= 1".into()));
                }
                GeneratorNet::identity(*dim, radius.unwrap_or(crate::generator::default_radius(*dim)))
            }
            GeneratorSource::Linear { weights, radius } => {
                let w = Matrix::from_rows(weights)?;
                let d = w.cols();
                GeneratorNet::linear(w, radius.unwrap_or(crate::generator::default_radius(d)))
            }
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_constant_samples() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Number of measurements; exclusive with `f`.
    #[serde(default)]
    pub m: Option<usize>,
    /// Compression ratio `m / n` in `(0, 1]`.
    #[serde(default)]
    pub f: Option<f64>,
    #[serde(default)]
    pub noise_norm: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Sample count for the constant estimates behind the default step sizes.
    #[serde(default = "default_constant_samples")]
    pub constant_samples: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            m: None,
            f: None,
            noise_norm: 0.0,
            seeds: default_seeds(),
            constant_samples: default_constant_samples(),
        }
    }
}

impl ProblemConfig {
    /// `(f, m)` for output dimension `n`, with `m = round(f n)`.
    pub fn measurements(&self, n: usize) -> Result<(f64, usize)> {
        match (self.m, self.f) {
            (Some(_), Some(_)) => Err(Error::Config("problem.m and problem.f are exclusive".into())),
            (Some(m), None) => Ok((m as f64 / n as f64, m)),
            (None, f) => {
                let f = f.unwrap_or(1.0);
                ratio_measurements(f, n)
            }
        }
    }
}

fn check_ratio(f: f64) -> Result<()> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("compression ratio f must lie in (0, 1], got {f}")))
    }
}

pub fn ratio_measurements(f: f64, n: usize) -> Result<(f64, usize)> {
    check_ratio(f)?;
    let m = (f * n as f64).round() as usize;
    if m == 0 {
        return Err(Error::Config(format!("f = {f} gives zero measurements for n = {n}")));
    }
    Ok((f, m))
}

fn default_k_max() -> u64 {
    1000
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    #[serde(default = "default_method")]
    pub method: SamplerMethod,
    /// Inverse temperature. Required for every experiment that samples.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Shared step size; when absent each method uses its own schedule.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_k_max")]
    pub k_max: u64,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default = "one")]
    pub record_every: u64,
    /// Overrides the estimated smoothness constant.
    #[serde(default)]
    pub lipschitz: Option<f64>,
}

fn default_method() -> SamplerMethod {
    SamplerMethod::Sgld
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            method: default_method(),
            beta: None,
            eta: None,
            k_max: default_k_max(),
            r: None,
            record_every: 1,
            lipschitz: None,
        }
    }
}

impl SamplerSection {
    pub fn beta(&self) -> Result<f64> {
        match self.beta {
            Some(b) if b >= 0.0 && !b.is_nan() => Ok(b),
            Some(b) => Err(Error::Config(format!("sampler.beta must be >= 0, got {b}"))),
            None => Err(Error::Config("sampler.beta is required".into())),
        }
    }
}

fn default_f_grid() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    #[serde(default = "default_f_grid")]
    pub f_grid: Vec<f64>,
}

impl Default for PhaseSection {
    fn default() -> Self {
        PhaseSection { f_grid: default_f_grid() }
    }
}

fn default_pairs() -> usize {
    500
}

fn default_sensing_draws() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    #[serde(default = "default_pairs")]
    pub n_pairs: usize,
    /// Number of sensing matrices for the measured panels.
    #[serde(default = "default_sensing_draws")]
    pub n_sensing: usize,
    #[serde(default)]
    pub pairs: PairOptions,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection {
            n_pairs: default_pairs(),
            n_sensing: default_sensing_draws(),
            pairs: PairOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChainTarget {
    /// `F(z) = ‖z − center‖²`.
    Quadratic { center: Vec<f64>, radius: f64 },
    /// One-dimensional double well with zeros at `±1`.
    DoubleWell { a: f64, radius: f64 },
    /// The configured generator and problem, first seed.
    Generator,
}

fn default_chains() -> usize {
    1000
}

fn default_checkpoints() -> Vec<u64> {
    vec![0, 10, 100, 1000]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainLabSection {
    pub target: ChainTarget,
    /// Samplers whose mixing curves are drawn; defaults to `sampler.method`.
    #[serde(default)]
    pub methods: Option<Vec<SamplerMethod>>,
    #[serde(default = "default_chains")]
    pub n_chains: usize,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<u64>,
    #[serde(default)]
    pub tv_bins: Option<usize>,
    #[serde(default)]
    pub resolution: Option<usize>,
    /// Warm-start temperature; required when `sampler.beta` is zero.
    #[serde(default)]
    pub warm_start_beta: Option<f64>,
    /// Extra inverse temperatures for the expected-loss table.
    #[serde(default)]
    pub loss_betas: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub generator: Option<GeneratorSource>,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub sampler: SamplerSection,
    /// Methods run side by side in compare and phase-transition mode.
    #[serde(default)]
    pub methods: Option<Vec<SamplerMethod>>,
    #[serde(default)]
    pub phase: PhaseSection,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default)]
    pub chain_lab: Option<ChainLabSection>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Directory relative weight-file paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_value(value: Value) -> Result<Self> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("{path}: {}", e.inner()))
        })
    }

    /// Parses a JSON document and applies `key=value` overrides.
    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text, overrides)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn generator(&self) -> Result<GeneratorNet> {
        self.generator
            .as_ref()
            .ok_or_else(|| Error::Config("generator: exactly one source (netspec, file, identity, linear) is required".into()))?
            .build(&self.base_dir)
    }

    pub fn methods_or(&self, default: &[SamplerMethod]) -> Vec<SamplerMethod> {
        self.methods.clone().unwrap_or_else(|| default.to_vec())
    }

    /// Checks the fields `kind` depends on.
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(Error::Config(format!(
                    "kind: config is for `{}` but `{}` was requested",
                    k.name(),
                    kind.name()
                )));
            }
        }
        if self.problem.seeds.is_empty() {
            return Err(Error::Config("problem.seeds must not be empty".into()));
        }
        if !(self.problem.noise_norm >= 0.0 && self.problem.noise_norm.is_finite()) {
            return Err(Error::Config("problem.noise_norm must be finite and >= 0".into()));
        }
        if let Some(f) = self.problem.f {
            check_ratio(f)?;
        }
        if self.sampler.record_every == 0 {
            return Err(Error::Config("sampler.record_every must be >= 1".into()));
        }
        if let Some(eta) = self.sampler.eta {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(Error::Config(format!("sampler.eta must be finite and >= 0, got {eta}")));
            }
        }
        match kind {
            ExperimentKind::Recover | ExperimentKind::Compare | ExperimentKind::PhaseTransition => {
                if self.generator.is_none() {
                    return Err(Error::Config("generator is required".into()));
                }
                if self.sampler.beta()? == 0.0 {
                    return Err(Error::Config("sampler.beta must be positive for recovery runs".into()));
                }
                if self.problem.constant_samples < 2 {
                    return Err(Error::Config("problem.constant_samples must be >= 2".into()));
                }
                if kind == ExperimentKind::PhaseTransition {
                    if self.phase.f_grid.is_empty() {
                        return Err(Error::Config("phase.f_grid must not be empty".into()));
                    }
                    for f in &self.phase.f_grid {
                        check_ratio(*f)?;
                    }
                }
            }
            ExperimentKind::Validate => {
                if self.generator.is_none() {
                    return Err(Error::Config("generator is required".into()));
                }
                if self.validate.n_pairs < 10 {
                    return Err(Error::Config("validate.n_pairs must be >= 10".into()));
                }
            }
            ExperimentKind::ChainLab => {
                let lab = self
                    .chain_lab
                    .as_ref()
                    .ok_or_else(|| Error::Config("chain_lab section is required".into()))?;
                let beta = self.sampler.beta()?;
                if beta == 0.0 {
                    if lab.warm_start_beta.is_none() {
                        return Err(Error::Config("chain_lab.warm_start_beta is required when sampler.beta = 0".into()));
                    }
                    if lab.checkpoints.iter().any(|k| *k > 0) {
                        return Err(Error::Config(
                            "chain_lab.checkpoints: with sampler.beta = 0 only k = 0 can be evaluated".into(),
                        ));
                    }
                }
                if lab.n_chains == 0 {
                    return Err(Error::Config("chain_lab.n_chains must be >= 1".into()));
                }
                if lab.target == ChainTarget::Generator && self.generator.is_none() {
                    return Err(Error::Config("chain_lab.target = generator needs a generator".into()));
                }
            }
        }
        Ok(())
    }
}

/// Applies `a.b.c=value`. The value is parsed as JSON when possible and taken
/// as a string otherwise. Missing objects along the path are created.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    if key.is_empty() {
        return Err(Error::Config(format!("override `{assignment}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        if let Value::Array(items) = node {
            let idx: usize = part
                .parse()
                .map_err(|_| Error::Config(format!("override `{key}`: `{part}` is not an array index")))?;
            let len = items.len();
            let slot = items
                .get_mut(idx)
                .ok_or_else(|| Error::Config(format!("override `{key}`: index {idx} out of range ({len})")))?;
            if last {
                *slot = value;
                return Ok(());
            }
            node = slot;
            continue;
        }
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let map = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not inside an object")))?;
        if last {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split always yields at least one part")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_and_replace() {
        let mut v: Value = serde_json::from_str(r#"{"sampler": {"beta": 1.0}, "problem": {"seeds": [1, 2]}}"#).unwrap();
        apply_override(&mut v, "sampler.beta=10000").unwrap();
        apply_override(&mut v, "sampler.method=gd").unwrap();
        apply_override(&mut v, "problem.seeds.1=7").unwrap();
        apply_override(&mut v, "chain_lab.target.double_well.a=1.5").unwrap();
        assert_eq!(v["sampler"]["beta"], 10000);
        assert_eq!(v["sampler"]["method"], "gd");
        assert_eq!(v["problem"]["seeds"][1], 7);
        assert_eq!(v["chain_lab"]["target"]["double_well"]["a"], 1.5);
        assert!(apply_override(&mut v, "noequals").is_err());
        assert!(apply_override(&mut v, "problem.seeds.9=1").is_err());
    }

    #[test]
    fn two_generator_sources_rejected() {
        let text = r#"{"generator": {"identity": {"dim": 2}, "file": "x.gnet.json"}}"#;
        let err = ExperimentConfig::from_json_str(text, &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_field_names_path() {
        let err = ExperimentConfig::from_json_str(r#"{"sampler": {"bta": 1}}"#, &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bta"), "{msg}");
    }

    #[test]
    fn ratio_bounds() {
        assert!(ratio_measurements(0.0, 10).is_err());
        assert!(ratio_measurements(1.5, 10).is_err());
        assert_eq!(ratio_measurements(0.25, 64).unwrap(), (0.25, 16));
        let p = ProblemConfig {
            m: Some(3),
            f: Some(0.5),
            ..Default::default()
        };
        assert!(p.measurements(10).is_err());
    }

    #[test]
    fn beta_required() {
        let cfg = ExperimentConfig::from_json_str(r#"{"generator": {"identity": {"dim": 2}}}"#, &[]).unwrap();
        let err = cfg.validate(ExperimentKind::Recover).unwrap_err();
        assert!(err.to_string().contains("sampler.beta"));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [
            ExperimentKind::Recover,
            ExperimentKind::Compare,
            ExperimentKind::PhaseTransition,
            ExperimentKind::Validate,
            ExperimentKind::ChainLab,
        ] {
            assert_eq!(ExperimentKind::parse(k.name()), Some(k));
        }
        assert_eq!(ExperimentKind::parse("phase-transition"), Some(ExperimentKind::PhaseTransition));
    }
}
