//! Dense vectors and row-major matrices.

use std::ops::Deref;

use serde::Serialize;

use super::rng::RngStream;
use crate::error::{Error, Result};

pub const POWER_ITERATION_CAP: usize = 10_000;
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-10;

/// A nonempty vector of finite values.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("vector must have at least one entry".into()));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("vector entry {i}")));
        }
        Ok(Vector(data))
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len >= 1, "vector must have at least one entry");
        Vector(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// Overwrites the entries; callers have already checked `src` is finite.
    pub(crate) fn copy_from(&mut self, src: &[f64]) {
        debug_assert!(src.iter().all(|x| x.is_finite()));
        self.0.copy_from_slice(src);
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Vector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

/// Row-major dense matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!("matrix shape {rows}x{cols} is empty")));
        }
        if data.len() != rows * cols {
            return Err(Error::dim("matrix data", rows * cols, data.len()));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry ({}, {})", i / cols, i % cols)));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::Parse {
                    location: format!("row {i}"),
                    message: format!("expected {c} columns, found {}", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::new(r, c, data)
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = scale;
        }
        Matrix { rows: n, cols: n, data }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::scaled_identity(n, 0.0);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.get(i, j);
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dim("matmul inner dimension", self.cols, other.rows));
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let out = &mut data[i * other.cols..(i + 1) * other.cols];
            for (k, a) in self.row(i).iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                for (o, b) in out.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(Matrix {
            rows: self.rows,
            cols: other.cols,
            data,
        })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim("matrix difference", self.data.len(), other.data.len()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// `out = self · v` without allocation. Caller guarantees shapes.
    #[inline]
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, v);
        }
    }

    /// `out = selfᵀ · v` without allocation. Caller guarantees shapes.
    #[inline]
    pub fn matvec_transpose_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (vi, row) in v.iter().zip(self.data.chunks_exact(self.cols)) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * vi;
            }
        }
    }
}

pub fn matvec(m: &Matrix, v: &[f64]) -> Result<Vector> {
    if v.len() != m.cols {
        return Err(Error::dim("matvec", m.cols, v.len()));
    }
    let mut out = vec![0.0; m.rows];
    m.matvec_into(v, &mut out);
    Vector::new(out)
}

pub fn matvec_transpose(m: &Matrix, v: &[f64]) -> Result<Vector> {
    if v.len() != m.rows {
        return Err(Error::dim("matvec_transpose", m.rows, v.len()));
    }
    let mut out = vec![0.0; m.cols];
    m.matvec_transpose_into(v, &mut out);
    Vector::new(out)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Largest singular value by power iteration on `MᵀM`.
///
/// Stops once the extrapolated error of the estimate (from the observed
/// contraction rate of successive changes) drops below `tol` relative.
pub fn spectral_norm(m: &Matrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("spectral_norm tol must be positive, got {tol}")));
    }
    let mut v = vec![0.0; m.cols];
    RngStream::new(0x5eed_5eed, 0).fill_normal(&mut v);
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);

    let mut mv = vec![0.0; m.rows];
    let mut w = vec![0.0; m.cols];
    let mut sigma = 0.0;
    let mut last_change = f64::INFINITY;
    for _ in 0..POWER_ITERATION_CAP {
        m.matvec_into(&v, &mut mv);
        let estimate = norm(&mv);
        if estimate == 0.0 {
            // v in the null space; with a random start this means M = 0 (or we hit it exactly)
            if m.data.iter().all(|x| *x == 0.0) {
                return Ok(0.0);
            }
        }
        m.matvec_transpose_into(&mv, &mut w);
        let wn = norm(&w);
        let change = (estimate - sigma).abs();
        sigma = estimate;
        if wn == 0.0 {
            return Ok(sigma);
        }
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / wn);

        let rate = if last_change.is_finite() && last_change > 0.0 {
            (change / last_change).min(0.999)
        } else {
            0.999
        };
        let extrapolated = change * rate / (1.0 - rate);
        if change <= tol * sigma && extrapolated <= tol * sigma {
            return Ok(sigma);
        }
        last_change = change;
    }
    Err(Error::NoConvergence {
        iterations: POWER_ITERATION_CAP,
        last_estimate: sigma,
        last_iterate: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matvec() {
        let v = [1.0, -2.0, 3.5];
        assert_eq!(matvec(&Matrix::identity(3), &v).unwrap().as_slice(), &v);
        assert_eq!(
            matvec(&Matrix::scaled_identity(3, 2.0), &v).unwrap().as_slice(),
            &[2.0, -4.0, 7.0]
        );
    }

    #[test]
    fn basis_vector_extracts_column() {
        let mut s = RngStream::new(11, 0);
        let mut data = vec![0.0; 12];
        s.fill_normal(&mut data);
        let m = Matrix::new(3, 4, data).unwrap();
        for j in 0..4 {
            let mut e = vec![0.0; 4];
            e[j] = 1.0;
            assert_eq!(matvec(&m, &e).unwrap().into_inner(), m.column(j));
        }
    }

    #[test]
    fn mismatch_errors() {
        let m = Matrix::identity(3);
        assert!(matches!(matvec(&m, &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(matvec_transpose(&m, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn spectral_norm_simple_cases() {
        assert!((spectral_norm(&Matrix::identity(4), 1e-10).unwrap() - 1.0).abs() < 1e-12);
        assert!((spectral_norm(&Matrix::diagonal(&[3.0, 1.0]), 1e-10).unwrap() - 3.0).abs() < 1e-9);
        let zero = Matrix::new(2, 3, vec![0.0; 6]).unwrap();
        assert_eq!(spectral_norm(&zero, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn bad_tol_rejected() {
        assert!(spectral_norm(&Matrix::identity(2), 0.0).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
        assert!(Vector::new(vec![]).is_err());
    }
}
