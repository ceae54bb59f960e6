//! Periodic computational box and real fields sampled on it.
//!
//! Points are laid out row-major as `(i * n + j) * n + k`, with physical
//! coordinate `x_i = -L/2 + i h` on every axis, so the origin sits at index
//! `n / 2`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Uniform cubic grid with `n` points per axis over a box of side `length`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n = {n} must be even and >= 8")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("L = {length} must be positive")));
        }
        Ok(Self { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Volume element `h^3` of the midpoint rule.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(3)
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.n;
        let j = (idx / self.n) % self.n;
        let i = idx / (self.n * self.n);
        (i, j, k)
    }

    /// Physical coordinate of grid index `i` along one axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unravel(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Angular wavenumber of FFT bin `i`: `(2 pi / L) * m` with
    /// `m` in `{0, 1, .., n/2 - 1, -n/2, .., -1}`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> f64 {
        let m = if i < self.n / 2 { i as f64 } else { i as f64 - self.n as f64 };
        2.0 * PI * m / self.length
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.wavenumber(i)).collect()
    }

    /// `|k|` for every FFT bin, in the same row-major layout as the data.
    pub fn wavenumber_magnitudes(&self) -> Vec<f64> {
        let k = self.wavenumbers();
        let n = self.n;
        let mut out = Vec::with_capacity(self.len());
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    out.push((k[i] * k[i] + k[j] * k[j] + k[l] * k[l]).sqrt());
                }
            }
        }
        out
    }
}

/// A real scalar function sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    /// Wraps sampled values; every value must be finite.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField);
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    /// Samples `f(x, y, z)` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64, f64) -> f64) -> Result<Self> {
        let x = grid.coords();
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    values.push(f(x[i], x[j], x[k]));
                }
            }
        }
        Self::new(grid, values)
    }

    /// Samples a radial profile `f(|x|)`.
    pub fn radial(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(grid, |x, y, z| f((x * x + y * y + z * z).sqrt()))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFiniteField)
        }
    }

    pub(crate) fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec_unchecked(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Field::from_vec_unchecked(self.grid, values)
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &Field, b: f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Field::from_vec_unchecked(self.grid, values)
    }

    pub fn mul(&self, other: &Field) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Field::from_vec_unchecked(self.grid, values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|u|` on the outer shell of grid points (any index 0 or n-1).
    pub fn boundary_max_abs(&self) -> f64 {
        let n = self.grid.n();
        let mut m = 0.0f64;
        for (idx, v) in self.values.iter().enumerate() {
            let (i, j, k) = self.grid.unravel(idx);
            if i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1 {
                m = m.max(v.abs());
            }
        }
        m
    }

    /// Value at the point nearest the origin.
    pub fn at_origin(&self) -> f64 {
        let c = self.grid.n() / 2;
        self.values[self.grid.index(c, c, c)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(7, 1.0).is_err());
        assert!(Grid::new(6, 1.0).is_err());
        assert!(Grid::new(9, 1.0).is_err());
        assert!(Grid::new(8, 0.0).is_err());
        assert!(Grid::new(8, f64::NAN).is_err());
        assert!(Grid::new(8, 1.0).is_ok());
    }

    #[test]
    fn wavenumbers_are_symmetric_except_nyquist() {
        let g = Grid::new(16, 3.0).unwrap();
        let k = g.wavenumbers();
        let dk = 2.0 * PI / 3.0;
        assert_eq!(k[0], 0.0);
        assert!((k[8] + 8.0 * dk).abs() < 1e-12);
        for m in 1..8 {
            assert!((k[m] + k[16 - m]).abs() < 1e-12);
        }
    }

    #[test]
    fn origin_and_mirror_indices() {
        let g = Grid::new(16, 4.0).unwrap();
        assert_eq!(g.coord(8), 0.0);
        for i in 1..16 {
            assert_eq!(g.coord(i), -g.coord(16 - i));
        }
    }

    #[test]
    fn field_rejects_non_finite() {
        let g = Grid::new(8, 1.0).unwrap();
        let mut v = vec![0.0; g.len()];
        v[3] = f64::INFINITY;
        assert_eq!(Field::new(g, v).unwrap_err(), Error::NonFiniteField);
    }

    #[test]
    fn unravel_inverts_index() {
        let g = Grid::new(8, 1.0).unwrap();
        for idx in [0, 1, 77, 300, g.len() - 1] {
            let (i, j, k) = g.unravel(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }
}
