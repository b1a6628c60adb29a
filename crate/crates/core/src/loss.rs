//! Reconstruction objective `F(z) = ‖y − A G(z)‖²`, its gradient, and
//! sampled estimates of the smoothness constants of `F` and `G`.
//!
//! The gradient is the exact derivative `2 (∇G(z))ᵀ Aᵀ (A G(z) − y)`. The
//! composed constants `L = (M B + κ²)‖AᵀA‖` and `D = κ²‖AᵀA‖` describe the
//! un-doubled gradient `(∇G)ᵀAᵀ(AG − y)`, so bounds on [`Problem::grad`]
//! carry an extra factor 2.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::{GeneratorNet, NetWorkspace};
use crate::numerics::{dist, norm, norm_sq, spectral_norm, streams, RngStream, Vector, DEFAULT_SPECTRAL_TOL};
use crate::sensing::SensingMatrix;

#[derive(Clone, Debug)]
pub struct Problem {
    net: GeneratorNet,
    sensing: SensingMatrix,
    y: Vector,
    z_star: Option<Vector>,
    noise: Option<Vector>,
}

/// Scratch space for allocation-free loss/gradient evaluation.
#[derive(Clone, Debug)]
pub struct Workspace {
    net: NetWorkspace,
    residual: Vec<f64>,
    back: Vec<f64>,
}

impl Problem {
    /// Problem with explicit measurements `y`.
    pub fn new(net: GeneratorNet, sensing: SensingMatrix, y: Vector) -> Result<Self> {
        if net.output_dim() != sensing.n() {
            return Err(Error::dim("generator output vs sensing columns", sensing.n(), net.output_dim()));
        }
        if y.len() != sensing.m() {
            return Err(Error::dim("measurement vector", sensing.m(), y.len()));
        }
        Ok(Problem {
            net,
            sensing,
            y,
            z_star: None,
            noise: None,
        })
    }

    /// Builds `y = A G(z*) + ε`.
    pub fn from_latent(net: GeneratorNet, sensing: SensingMatrix, z_star: Vector, noise: Option<Vector>) -> Result<Self> {
        if z_star.len() != net.input_dim() {
            return Err(Error::dim("latent target", net.input_dim(), z_star.len()));
        }
        if net.output_dim() != sensing.n() {
            return Err(Error::dim("generator output vs sensing columns", sensing.n(), net.output_dim()));
        }
        let x = net.forward(&z_star)?;
        let mut y = vec![0.0; sensing.m()];
        sensing.matrix().matvec_into(&x, &mut y);
        if let Some(eps) = &noise {
            if eps.len() != y.len() {
                return Err(Error::dim("noise vector", y.len(), eps.len()));
            }
            y.iter_mut().zip(eps.iter()).for_each(|(a, b)| *a += b);
        }
        Ok(Problem {
            net,
            sensing,
            y: Vector::new(y)?,
            z_star: Some(z_star),
            noise,
        })
    }

    pub fn net(&self) -> &GeneratorNet {
        &self.net
    }

    pub fn sensing(&self) -> &SensingMatrix {
        &self.sensing
    }

    pub fn y(&self) -> &Vector {
        &self.y
    }

    pub fn z_star(&self) -> Option<&Vector> {
        self.z_star.as_ref()
    }

    pub fn noise(&self) -> Option<&Vector> {
        self.noise.as_ref()
    }

    pub fn noise_norm(&self) -> f64 {
        self.noise.as_ref().map_or(0.0, |e| e.norm())
    }

    pub fn latent_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn radius(&self) -> f64 {
        self.net.radius()
    }

    /// The signal `G(z*)`, when the target latent is known.
    pub fn signal(&self) -> Option<Result<Vector>> {
        self.z_star.as_ref().map(|z| self.net.forward(z))
    }

    /// Per-coordinate reconstruction error `‖G(z) − G(z*)‖² / n`.
    pub fn mse(&self, z: &[f64]) -> Result<f64> {
        let target = self
            .signal()
            .ok_or_else(|| Error::InvalidArgument("MSE needs a known target latent".into()))??;
        let x = self.net.forward(z)?;
        Ok(x.iter().zip(target.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64)
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            net: self.net.workspace(),
            residual: vec![0.0; self.sensing.m()],
            back: vec![0.0; self.sensing.n()],
        }
    }

    fn residual_into(&self, z: &[f64], ws: &mut Workspace) -> Result<f64> {
        self.net.forward_into(z, &mut ws.net)?;
        self.sensing.matrix().matvec_into(ws.net.output(), &mut ws.residual);
        ws.residual.iter_mut().zip(self.y.iter()).for_each(|(r, y)| *r -= y);
        Ok(norm_sq(&ws.residual))
    }

    pub fn loss_with(&self, z: &[f64], ws: &mut Workspace) -> Result<f64> {
        if z.len() != self.latent_dim() {
            return Err(Error::dim("latent vector", self.latent_dim(), z.len()));
        }
        self.residual_into(z, ws)
    }

    /// Writes `∇F(z)` into `grad` and returns `F(z)`.
    pub fn loss_grad_with(&self, z: &[f64], ws: &mut Workspace, grad: &mut [f64]) -> Result<f64> {
        if z.len() != self.latent_dim() {
            return Err(Error::dim("latent vector", self.latent_dim(), z.len()));
        }
        let f = self.residual_into(z, ws)?;
        ws.residual.iter_mut().for_each(|r| *r *= 2.0);
        self.sensing.matrix().matvec_transpose_into(&ws.residual, &mut ws.back);
        self.net.vjp_cached(&mut ws.net, &ws.back, grad);
        if !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFinite("loss gradient".into()));
        }
        Ok(f)
    }

    pub fn loss(&self, z: &[f64]) -> Result<f64> {
        self.loss_with(z, &mut self.workspace())
    }

    pub fn grad(&self, z: &[f64]) -> Result<Vector> {
        let mut g = vec![0.0; self.latent_dim()];
        self.loss_grad_with(z, &mut self.workspace(), &mut g)?;
        Vector::new(g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Analytic,
    Sampled,
}

/// Estimated constants. Sampled entries are lower bounds of the true suprema.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantsReport {
    /// `max ‖G(z)‖`.
    pub b: f64,
    pub iota: f64,
    pub kappa: f64,
    /// Lipschitz constant of the Jacobian.
    pub m: f64,
    /// `‖AᵀA‖`.
    pub gram_norm: f64,
    pub l: f64,
    pub d: f64,
    /// `D · 2R`, the gradient bound with the domain diameter made explicit.
    pub d_times_diameter: f64,
    pub method_b: Method,
    pub method_isometry: Method,
    pub method_m: Method,
    pub method_gram: Method,
    pub n_points: usize,
    pub n_pairs: usize,
}

impl ConstantsReport {
    pub fn compose(b: f64, kappa: f64, m: f64, gram_norm: f64, radius: f64) -> (f64, f64, f64) {
        let l = (m * b + kappa * kappa) * gram_norm;
        let d = kappa * kappa * gram_norm;
        (l, d, d * 2.0 * radius)
    }
}

/// Sampled isometry and Jacobian-Lipschitz constants of `G` alone.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneratorConstants {
    pub b: f64,
    pub iota: f64,
    pub kappa: f64,
    pub m: f64,
    pub n_points: usize,
    pub n_pairs: usize,
}

/// Constants over an explicit list of latent pairs.
pub fn generator_constants_on_pairs(net: &GeneratorNet, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<GeneratorConstants> {
    let mut b: f64 = 0.0;
    let mut iota = f64::INFINITY;
    let mut kappa: f64 = 0.0;
    let mut m: f64 = 0.0;
    let mut counted = 0;
    for (z, zp) in pairs {
        let gz = net.forward(z)?;
        let gzp = net.forward(zp)?;
        b = b.max(gz.norm()).max(gzp.norm());
        let dz = dist(z, zp);
        if dz == 0.0 {
            continue;
        }
        counted += 1;
        let ratio = dist(&gz, &gzp) / dz;
        iota = iota.min(ratio);
        kappa = kappa.max(ratio);
        let jdiff = net.jacobian(z)?.sub(&net.jacobian(zp)?)?;
        m = m.max(spectral_norm(&jdiff, DEFAULT_SPECTRAL_TOL)? / dz);
    }
    if counted == 0 {
        return Err(Error::InvalidArgument("all sampled pairs are degenerate".into()));
    }
    Ok(GeneratorConstants {
        b,
        iota,
        kappa,
        m,
        n_points: 2 * pairs.len(),
        n_pairs: counted,
    })
}

/// Pairs for constant estimation: half independent draws in `B(0,R)`, half
/// local pairs (`z′` within `R/10` of `z`) that probe local Lipschitz
/// behaviour. The first point of every other pair lies on the sphere
/// `‖z‖ = R` so the boundedness estimate sees the domain boundary.
pub fn constant_pairs(net: &GeneratorNet, n_samples: usize, stream: &mut RngStream) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = net.input_dim();
    let r = net.radius();
    (0..n_samples)
        .map(|i| {
            let z = if i % 2 == 0 {
                stream.uniform_on_sphere(d, r)
            } else {
                stream.uniform_in_ball(d, r)
            };
            let zp = if i % 4 < 2 {
                stream.uniform_in_ball(d, r)
            } else {
                let step = stream.uniform_in_ball(d, 0.1 * r);
                let mut p: Vec<f64> = z.iter().zip(&step).map(|(a, b)| a + b).collect();
                let np = norm(&p);
                if np > r {
                    p.iter_mut().for_each(|x| *x *= r / np);
                }
                p
            };
            (z, zp)
        })
        .collect()
}

/// Estimates `B, ι, κ, M` by sampling and composes `L` and `D`.
pub fn estimate_constants(problem: &Problem, n_samples: usize, stream: &mut RngStream) -> Result<ConstantsReport> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("estimate_constants needs n_samples >= 2".into()));
    }
    let pairs = constant_pairs(problem.net(), n_samples, stream);
    let gc = generator_constants_on_pairs(problem.net(), &pairs)?;
    let gram_norm = problem.sensing().gram_norm(DEFAULT_SPECTRAL_TOL)?;
    let (l, d, dd) = ConstantsReport::compose(gc.b, gc.kappa, gc.m, gram_norm, problem.radius());
    Ok(ConstantsReport {
        b: gc.b,
        iota: gc.iota,
        kappa: gc.kappa,
        m: gc.m,
        gram_norm,
        l,
        d,
        d_times_diameter: dd,
        method_b: Method::Sampled,
        method_isometry: Method::Sampled,
        method_m: Method::Sampled,
        method_gram: Method::Analytic,
        n_points: gc.n_points,
        n_pairs: gc.n_pairs,
    })
}

/// Convenience wrapper drawing from the conventional constants stream of `seed`.
pub fn estimate_constants_seeded(problem: &Problem, n_samples: usize, seed: u64) -> Result<ConstantsReport> {
    estimate_constants(problem, n_samples, &mut RngStream::new(seed, streams::CONSTANTS))
}
