//! Linear algebra, random streams and scalar helpers shared by every module.

pub mod linalg;
pub mod rng;

pub use linalg::{
    dist, dot, matvec, matvec_transpose, norm, norm_sq, spectral_norm, Matrix, Vector, DEFAULT_SPECTRAL_TOL,
};
pub use rng::{gaussian_vector, streams, RngStream};

/// Arithmetic mean; `NaN` for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median of a slice (average of the middle pair for even lengths).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
