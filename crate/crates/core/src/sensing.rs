//! Gaussian measurement operators and empirical checks of the measurement-side
//! conditions (set-restricted eigenvalue condition, Gram deviation).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::GeneratorNet;
use crate::numerics::{norm, spectral_norm, Matrix, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub struct SensingMatrix {
    a: Matrix,
    /// `(seed, stream_id)` the entries were drawn from, if random.
    provenance: Option<(u64, u64)>,
}

impl SensingMatrix {
    /// Wraps an explicit matrix, e.g. the identity.
    pub fn from_matrix(a: Matrix) -> Self {
        SensingMatrix { a, provenance: None }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_matrix(Matrix::identity(n))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn provenance(&self) -> Option<(u64, u64)> {
        self.provenance
    }

    /// `‖AᵀA‖ = σ_max(A)²`.
    pub fn gram_norm(&self, tol: f64) -> Result<f64> {
        Ok(spectral_norm(&self.a, tol)?.powi(2))
    }
}

/// `m × n` matrix with i.i.d. `N(0, 1/m)` entries.
pub fn sample_matrix(m: usize, n: usize, stream: &mut RngStream) -> Result<SensingMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!("sensing matrix needs m, n >= 1 (got {m}x{n})")));
    }
    let std = 1.0 / (m as f64).sqrt();
    let mut data = vec![0.0; m * n];
    stream.fill_normal(&mut data);
    data.iter_mut().for_each(|x| *x *= std);
    Ok(SensingMatrix {
        a: Matrix::new(m, n, data)?,
        provenance: Some((stream.seed(), stream.stream_id())),
    })
}

/// `‖I_n − AᵀA‖` in spectral norm.
pub fn gram_deviation(a: &SensingMatrix, tol: f64) -> Result<f64> {
    let at = a.a.transpose();
    let gram = at.matmul(&a.a)?;
    let dev = Matrix::identity(a.n()).sub(&gram)?;
    spectral_norm(&dev, tol)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SrecReport {
    pub tau: f64,
    pub o: f64,
    pub n_pairs: usize,
    pub violations: usize,
    /// `min_i ‖A ΔG_i‖ − (τ‖ΔG_i‖ − o)`; negative when some pair violates.
    pub worst_margin: f64,
}

/// Measured norms `(‖A ΔG‖, ‖ΔG‖)` for a fixed set of latent pairs, so the
/// condition can be re-evaluated for several `(τ, o)` on the same data.
#[derive(Clone, Debug)]
pub struct SrecSample {
    pairs: Vec<(f64, f64)>,
}

impl SrecSample {
    /// Samples `n_pairs` latent pairs uniformly in `B(0,R) × B(0,R)`.
    pub fn draw(a: &SensingMatrix, g: &GeneratorNet, n_pairs: usize, stream: &mut RngStream) -> Result<Self> {
        if g.output_dim() != a.n() {
            return Err(Error::dim("generator output vs sensing columns", a.n(), g.output_dim()));
        }
        let d = g.input_dim();
        let mut ws = g.workspace();
        let mut diff = vec![0.0; a.n()];
        let mut measured = vec![0.0; a.m()];
        let mut pairs = Vec::with_capacity(n_pairs);
        for _ in 0..n_pairs {
            let z = stream.uniform_in_ball(d, g.radius());
            let zp = stream.uniform_in_ball(d, g.radius());
            g.forward_into(&z, &mut ws)?;
            diff.copy_from_slice(ws.output());
            g.forward_into(&zp, &mut ws)?;
            diff.iter_mut().zip(ws.output()).for_each(|(x, y)| *x -= y);
            a.a.matvec_into(&diff, &mut measured);
            pairs.push((norm(&measured), norm(&diff)));
        }
        Ok(SrecSample { pairs })
    }

    pub fn report(&self, tau: f64, o: f64) -> SrecReport {
        let mut violations = 0;
        let mut worst = f64::INFINITY;
        for &(measured, raw) in &self.pairs {
            let margin = measured - (tau * raw - o);
            if margin < 0.0 {
                violations += 1;
            }
            worst = worst.min(margin);
        }
        SrecReport {
            tau,
            o,
            n_pairs: self.pairs.len(),
            violations,
            worst_margin: worst,
        }
    }
}

/// Counts violations of `‖A(G(z) − G(z′))‖ ≥ τ‖G(z) − G(z′)‖ − o` over sampled pairs.
pub fn srec_check(
    a: &SensingMatrix,
    g: &GeneratorNet,
    n_pairs: usize,
    tau: f64,
    o: f64,
    stream: &mut RngStream,
) -> Result<SrecReport> {
    Ok(SrecSample::draw(a, g, n_pairs, stream)?.report(tau, o))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{ActivationKind, NetSpec};

    #[test]
    fn entry_variance_is_one_over_m() {
        let m = 10_000;
        let a = sample_matrix(m, 4, &mut RngStream::new(5, 2)).unwrap();
        let data = a.matrix().data();
        let var = data.iter().map(|x| x * x).sum::<f64>() / data.len() as f64;
        assert!((var * m as f64 - 1.0).abs() < 0.05, "var*m = {}", var * m as f64);
    }

    #[test]
    fn sampling_is_deterministic_and_validated() {
        let a = sample_matrix(3, 4, &mut RngStream::new(1, 2)).unwrap();
        let b = sample_matrix(3, 4, &mut RngStream::new(1, 2)).unwrap();
        assert_eq!(a, b);
        assert!(sample_matrix(0, 4, &mut RngStream::new(1, 2)).is_err());
    }

    #[test]
    fn identity_has_zero_gram_deviation() {
        assert_eq!(gram_deviation(&SensingMatrix::identity(4), 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn single_row_is_rank_deficient() {
        for seed in 0..5 {
            let a = sample_matrix(1, 4, &mut RngStream::new(seed, 2)).unwrap();
            assert!(gram_deviation(&a, 1e-10).unwrap() >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn srec_trivial_cases() {
        let g = NetSpec::new(vec![3, 6], ActivationKind::Tanh).build().unwrap();
        let mut s = RngStream::new(4, 6);
        let eq = srec_check(&SensingMatrix::identity(6), &g, 200, 1.0, 0.0, &mut s).unwrap();
        assert_eq!(eq.violations, 0);
        let a = sample_matrix(2, 6, &mut RngStream::new(4, 2)).unwrap();
        let zero = srec_check(&a, &g, 200, 0.0, 0.0, &mut s).unwrap();
        assert_eq!(zero.violations, 0);
    }

    #[test]
    fn srec_dimension_mismatch() {
        let g = GeneratorNet::identity(3, 1.0).unwrap();
        let a = sample_matrix(2, 4, &mut RngStream::new(4, 2)).unwrap();
        assert!(srec_check(&a, &g, 10, 0.5, 0.0, &mut RngStream::new(0, 0)).is_err());
    }
}
