//! Seeded random streams.
//!
//! Each stream is a ChaCha8 keystream keyed by `seed` with the ChaCha stream
//! word set to `stream_id`. The generator is counter based, so any number of
//! independent streams can be split off a single seed without shared state.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::linalg::Vector;
use crate::error::{Error, Result};

/// Well-known stream ids so that experiments derive the same draws for the
/// same purpose regardless of which driver runs them.
pub mod streams {
    pub const LATENT_TARGET: u64 = 1;
    pub const SENSING: u64 = 2;
    pub const CHAIN: u64 = 3;
    pub const CONSTANTS: u64 = 4;
    pub const NETWORK: u64 = 5;
    pub const PAIRS: u64 = 6;
    pub const NOISE: u64 = 7;
    /// Chains in multi-chain runs use `CHAIN_BASE + chain index`.
    pub const CHAIN_BASE: u64 = 1 << 32;
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream with the same seed and a different id.
    pub fn split(&self, stream_id: u64) -> RngStream {
        RngStream::new(self.seed, stream_id)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in [0, 1) with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in (0, 1].
    #[inline]
    fn uniform_open0(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box–Muller; the second variate of each pair is cached).
    #[inline]
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare_normal = Some(radius * s);
        radius * c
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.normal();
        }
    }

    /// Uniform draw from the closed Euclidean ball of the given radius in R^d.
    pub fn uniform_in_ball(&mut self, d: usize, radius: f64) -> Vec<f64> {
        let mut dir = vec![0.0; d];
        loop {
            self.fill_normal(&mut dir);
            let norm = super::linalg::norm(&dir);
            if norm > 0.0 {
                let scale = radius * self.uniform().powf(1.0 / d as f64) / norm;
                dir.iter_mut().for_each(|x| *x *= scale);
                return dir;
            }
        }
    }

    /// Uniform draw from the sphere of the given radius in R^d.
    pub fn uniform_on_sphere(&mut self, d: usize, radius: f64) -> Vec<f64> {
        let mut dir = vec![0.0; d];
        loop {
            self.fill_normal(&mut dir);
            let norm = super::linalg::norm(&dir);
            if norm > 0.0 {
                dir.iter_mut().for_each(|x| *x *= radius / norm);
                return dir;
            }
        }
    }
}

/// `d` independent standard-normal draws.
pub fn gaussian_vector(stream: &mut RngStream, d: usize) -> Result<Vector> {
    if d == 0 {
        return Err(Error::InvalidArgument("gaussian_vector needs d >= 1".into()));
    }
    let mut data = vec![0.0; d];
    stream.fill_normal(&mut data);
    Vector::new(data)
}
