//! Feed-forward generator networks `G: R^d -> R^n` with exact derivatives.
//!
//! Every layer computes `act(W x + b)` with `W` stored output×input. The
//! Jacobian is the chain-rule product `D_L W_L ⋯ D_1 W_1` with
//! `D_l = diag(act'(pre-activation_l))`; [`GeneratorNet::jvp`] and
//! [`GeneratorNet::vjp`] apply it without forming the matrix.

mod io;

use serde::{Deserialize, Serialize};

pub use io::{load_net, net_from_json, net_to_json, save_net, WEIGHT_FILE_EXTENSION};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Elu,
    Sigmoid,
    Tanh,
    Relu,
    Identity,
}

impl ActivationKind {
    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Elu => "elu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Relu => "relu",
            ActivationKind::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "elu" => ActivationKind::Elu,
            "sigmoid" => ActivationKind::Sigmoid,
            "tanh" => ActivationKind::Tanh,
            "relu" => ActivationKind::Relu,
            "identity" => ActivationKind::Identity,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Activation {
    pub kind: ActivationKind,
    /// Negative-side scale of ELU; ignored by the other kinds.
    pub elu_scale: f64,
}

impl Activation {
    pub const fn new(kind: ActivationKind) -> Self {
        Activation { kind, elu_scale: 1.0 }
    }

    pub const fn elu(scale: f64) -> Self {
        Activation {
            kind: ActivationKind::Elu,
            elu_scale: scale,
        }
    }

    /// ReLU is not continuously differentiable, so the smooth-generator theory does not cover it.
    pub fn outside_theory(&self) -> bool {
        self.kind == ActivationKind::Relu
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Elu => {
                if x > 0.0 {
                    x
                } else {
                    self.elu_scale * x.exp_m1()
                }
            }
            ActivationKind::Sigmoid => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Identity => x,
        }
    }

    /// Derivative at pre-activation `x` whose activation value is `y`.
    /// ReLU uses the convention relu'(0) = 0.
    #[inline]
    pub fn derivative(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            ActivationKind::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    y + self.elu_scale
                }
            }
            ActivationKind::Sigmoid => y * (1.0 - y),
            ActivationKind::Tanh => 1.0 - y * y,
            ActivationKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Identity => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// Output × input.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::dim("layer bias", weights.rows(), bias.len()));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("layer bias".into()));
        }
        Ok(Layer {
            weights,
            bias,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorNet {
    layers: Vec<Layer>,
    radius: f64,
}

/// Per-layer buffers reused across evaluations at different latent points.
#[derive(Clone, Debug)]
pub struct NetWorkspace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl NetWorkspace {
    /// Output of the last [`GeneratorNet::forward_into`] call.
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("network has at least one layer")
    }
}

pub fn default_radius(input_dim: usize) -> f64 {
    3.0 * (input_dim as f64).sqrt()
}

impl GeneratorNet {
    pub fn new(layers: Vec<Layer>, radius: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("generator needs at least one layer".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("domain radius must be positive, got {radius}")));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[1].input_dim() != pair[0].output_dim() {
                return Err(Error::Layer {
                    layer: l + 1,
                    message: format!(
                        "expects input of width {} but layer {l} outputs {}",
                        pair[1].input_dim(),
                        pair[0].output_dim()
                    ),
                });
            }
        }
        Ok(GeneratorNet { layers, radius })
    }

    /// `G(z) = scale · z` on R^d.
    pub fn scaled_identity(dim: usize, scale: f64, radius: f64) -> Result<Self> {
        let layer = Layer::new(
            Matrix::scaled_identity(dim, scale),
            vec![0.0; dim],
            Activation::new(ActivationKind::Identity),
        )?;
        GeneratorNet::new(vec![layer], radius)
    }

    pub fn identity(dim: usize, radius: f64) -> Result<Self> {
        Self::scaled_identity(dim, 1.0, radius)
    }

    /// Linear generator `G(z) = W z`.
    pub fn linear(weights: Matrix, radius: f64) -> Result<Self> {
        let n = weights.rows();
        let layer = Layer::new(weights, vec![0.0; n], Activation::new(ActivationKind::Identity))?;
        GeneratorNet::new(vec![layer], radius)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn with_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("domain radius must be positive, got {radius}")));
        }
        self.radius = radius;
        Ok(self)
    }

    pub fn outside_theory(&self) -> bool {
        self.layers.iter().any(|l| l.activation.outside_theory())
    }

    /// Checks `d_0 ≤ d_1 ≤ … ≤ d_L`.
    pub fn check_nondecreasing(&self) -> Result<()> {
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.output_dim() < layer.input_dim() {
                return Err(Error::Layer {
                    layer: l,
                    message: format!(
                        "width shrinks from {} to {}; layer sizes must be non-decreasing",
                        layer.input_dim(),
                        layer.output_dim()
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn workspace(&self) -> NetWorkspace {
        NetWorkspace {
            pre: self.layers.iter().map(|l| vec![0.0; l.output_dim()]).collect(),
            post: self.layers.iter().map(|l| vec![0.0; l.output_dim()]).collect(),
            delta: self.layers.iter().map(|l| vec![0.0; l.output_dim()]).collect(),
        }
    }

    /// Forward pass into `ws`; the result is `ws.output()`.
    pub fn forward_into(&self, z: &[f64], ws: &mut NetWorkspace) -> Result<()> {
        if z.len() != self.input_dim() {
            return Err(Error::dim("generator input", self.input_dim(), z.len()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = ws.post.split_at_mut(l);
            let input: &[f64] = if l == 0 { z } else { &done[l - 1] };
            let pre = &mut ws.pre[l];
            layer.weights.matvec_into(input, pre);
            let post = &mut rest[0];
            let mut finite = true;
            for ((p, q), b) in pre.iter_mut().zip(post.iter_mut()).zip(&layer.bias) {
                *p += b;
                *q = layer.activation.apply(*p);
                finite &= q.is_finite();
            }
            if !finite {
                return Err(Error::NonFinite(format!("generator layer {l} output")));
            }
        }
        Ok(())
    }

    /// `(∇G(z))ᵀ u` using the activations cached by the last `forward_into` on `ws`.
    pub fn vjp_cached(&self, ws: &mut NetWorkspace, u: &[f64], out: &mut [f64]) {
        let last = self.layers.len() - 1;
        for (i, d) in ws.delta[last].iter_mut().enumerate() {
            *d = u[i] * self.layers[last].activation.derivative(ws.pre[last][i], ws.post[last][i]);
        }
        for l in (1..=last).rev() {
            let (lower, upper) = ws.delta.split_at_mut(l);
            let target = &mut lower[l - 1];
            self.layers[l].weights.matvec_transpose_into(&upper[0], target);
            let act = &self.layers[l - 1].activation;
            for ((t, p), q) in target.iter_mut().zip(&ws.pre[l - 1]).zip(&ws.post[l - 1]) {
                *t *= act.derivative(*p, *q);
            }
        }
        self.layers[0].weights.matvec_transpose_into(&ws.delta[0], out);
    }

    pub fn forward(&self, z: &[f64]) -> Result<Vector> {
        let mut ws = self.workspace();
        self.forward_into(z, &mut ws)?;
        Vector::new(ws.output().to_vec())
    }

    /// Exact Jacobian `∂G/∂z` (n × d).
    pub fn jacobian(&self, z: &[f64]) -> Result<Matrix> {
        let mut ws = self.workspace();
        self.forward_into(z, &mut ws)?;
        let mut jac: Option<Matrix> = None;
        for (l, layer) in self.layers.iter().enumerate() {
            let wj = match &jac {
                None => layer.weights.clone(),
                Some(j) => layer.weights.matmul(j)?,
            };
            let cols = wj.cols();
            let mut data = wj.data().to_vec();
            for (i, row) in data.chunks_exact_mut(cols).enumerate() {
                let s = layer.activation.derivative(ws.pre[l][i], ws.post[l][i]);
                row.iter_mut().for_each(|x| *x *= s);
            }
            jac = Some(Matrix::new(wj.rows(), cols, data)?);
        }
        Ok(jac.unwrap())
    }

    /// `∇G(z) · v` by forward-mode propagation.
    pub fn jvp(&self, z: &[f64], v: &[f64]) -> Result<Vector> {
        if v.len() != self.input_dim() {
            return Err(Error::dim("jvp tangent", self.input_dim(), v.len()));
        }
        let mut ws = self.workspace();
        self.forward_into(z, &mut ws)?;
        let mut tangent = v.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.output_dim()];
            layer.weights.matvec_into(&tangent, &mut next);
            for (i, t) in next.iter_mut().enumerate() {
                *t *= layer.activation.derivative(ws.pre[l][i], ws.post[l][i]);
            }
            tangent = next;
        }
        Vector::new(tangent)
    }

    /// `(∇G(z))ᵀ · u` by reverse-mode propagation.
    pub fn vjp(&self, z: &[f64], u: &[f64]) -> Result<Vector> {
        if u.len() != self.output_dim() {
            return Err(Error::dim("vjp cotangent", self.output_dim(), u.len()));
        }
        let mut ws = self.workspace();
        self.forward_into(z, &mut ws)?;
        let mut out = vec![0.0; self.input_dim()];
        self.vjp_cached(&mut ws, u, &mut out);
        Vector::new(out)
    }
}

/// Recipe for a randomly initialized generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSpec {
    /// Layer widths including the latent dimension, e.g. `[4, 8, 16]`.
    pub widths: Vec<usize>,
    /// One activation per layer, or a single entry applied to all layers.
    pub activations: Vec<ActivationKind>,
    #[serde(default = "default_sigma_w")]
    pub sigma_w: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub enforce_nondecreasing: bool,
}

fn default_sigma_w() -> f64 {
    1.0
}

impl NetSpec {
    pub fn new(widths: Vec<usize>, activation: ActivationKind) -> Self {
        NetSpec {
            widths,
            activations: vec![activation],
            sigma_w: 1.0,
            seed: 0,
            radius: None,
            enforce_nondecreasing: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::InvalidArgument("net spec needs at least two widths".into()));
        }
        if self.widths.contains(&0) {
            return Err(Error::InvalidArgument("layer widths must be positive".into()));
        }
        let n_layers = self.widths.len() - 1;
        if self.activations.len() != 1 && self.activations.len() != n_layers {
            return Err(Error::InvalidArgument(format!(
                "expected 1 or {n_layers} activations, got {}",
                self.activations.len()
            )));
        }
        if !(self.sigma_w > 0.0 && self.sigma_w.is_finite()) {
            return Err(Error::InvalidArgument("sigma_w must be positive".into()));
        }
        Ok(())
    }

    /// Builds the net from its own seed.
    pub fn build(&self) -> Result<GeneratorNet> {
        random_net(self, &mut RngStream::new(self.seed, crate::numerics::streams::NETWORK))
    }
}

/// Weights i.i.d. `N(0, σ_w² / fan_in)`, biases zero.
pub fn random_net(spec: &NetSpec, stream: &mut RngStream) -> Result<GeneratorNet> {
    spec.validate()?;
    let mut layers = Vec::with_capacity(spec.widths.len() - 1);
    for (l, pair) in spec.widths.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let std = spec.sigma_w / (fan_in as f64).sqrt();
        let mut w = vec![0.0; fan_in * fan_out];
        stream.fill_normal(&mut w);
        w.iter_mut().for_each(|x| *x *= std);
        let kind = if spec.activations.len() == 1 {
            spec.activations[0]
        } else {
            spec.activations[l]
        };
        layers.push(Layer::new(
            Matrix::new(fan_out, fan_in, w)?,
            vec![0.0; fan_out],
            Activation::new(kind),
        )?);
    }
    let radius = spec.radius.unwrap_or_else(|| default_radius(spec.widths[0]));
    let net = GeneratorNet::new(layers, radius)?;
    if spec.enforce_nondecreasing {
        net.check_nondecreasing()?;
    }
    Ok(net)
}
