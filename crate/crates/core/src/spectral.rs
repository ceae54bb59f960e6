//! Fourier-multiplier operators on the periodic box: the fractional
//! Laplacian, the Riesz potential (periodic and zero-padded free-space
//! backends), midpoint quadratures and the mass projection.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{Field, Grid};
use crate::quadrature::epstein_zeta_cubic;

/// How the Riesz potential of a source is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RieszMethod {
    /// Symbol `|k|^{-2t}` with the zero mode set to 0 (mean-zero gauge).
    #[default]
    Periodic,
    /// Linear convolution with `c_t |x|^{-(3-2t)}` on a doubled grid.
    FreeSpace,
}

/// Normalization constant `c_t` in front of the Riesz kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RieszConstant {
    /// `Gamma((3-2t)/2) / (pi^{3/2} 2^{2t} Gamma(t))`: the kernel is the
    /// inverse of `(-Delta)^t`.
    #[default]
    Standard,
    /// The form printed alongside the reduced equation,
    /// `Gamma(3/2 - 2t) / (pi^3 2^{2t} Gamma(t))`. Undefined at `t = 3/4`.
    Printed,
}

impl RieszConstant {
    pub fn value(self, t: f64) -> Result<f64> {
        let c = match self {
            RieszConstant::Standard => {
                gamma((3.0 - 2.0 * t) / 2.0) / (PI.powf(1.5) * 2f64.powf(2.0 * t) * gamma(t))
            }
            RieszConstant::Printed => {
                gamma(1.5 - 2.0 * t) / (PI.powi(3) * 2f64.powf(2.0 * t) * gamma(t))
            }
        };
        if c.is_finite() {
            Ok(c)
        } else {
            Err(Error::InvalidParams(format!("Riesz constant undefined at t = {t}")))
        }
    }

    /// Factor relative to the standard normalization, applied to every
    /// potential so both backends solve the same problem.
    pub fn relative_to_standard(self, t: f64) -> Result<f64> {
        Ok(self.value(t)? / RieszConstant::Standard.value(t)?)
    }
}

fn check_exponent(sigma: f64, lo_open: f64, hi_closed: f64) -> Result<()> {
    if sigma.is_finite() && sigma > lo_open && sigma <= hi_closed {
        Ok(())
    } else {
        Err(Error::ExponentOutOfRange(sigma))
    }
}

/// Multiplies the spectrum of `u` by `symbol(|k|)` and transforms back.
pub fn apply_radial_symbol(u: &Field, symbol: impl Fn(f64) -> f64 + Sync) -> Field {
    let grid = *u.grid();
    let kmag = grid.wavenumber_magnitudes();
    let mut hat = fft::forward_real(u.values(), grid.n());
    hat.par_iter_mut().zip(kmag.par_iter()).for_each(|(z, &k)| *z *= symbol(k));
    Field::from_vec_unchecked(grid, fft::inverse_real(hat, grid.n()))
}

/// Precomputed symbol `|k|^e` (zero at `k = 0`) for repeated application.
#[derive(Debug, Clone)]
pub struct Symbol {
    grid: Grid,
    values: Vec<f64>,
}

impl Symbol {
    pub fn power(grid: Grid, exponent: f64) -> Self {
        let values = grid
            .wavenumber_magnitudes()
            .into_iter()
            .map(|k| if k == 0.0 { 0.0 } else { k.powf(exponent) })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn apply(&self, u: &Field) -> Field {
        debug_assert_eq!(*u.grid(), self.grid);
        let mut hat = fft::forward_real(u.values(), self.grid.n());
        self.apply_hat(&mut hat);
        Field::from_vec_unchecked(self.grid, fft::inverse_real(hat, self.grid.n()))
    }

    pub fn apply_hat(&self, hat: &mut [Complex64]) {
        hat.par_iter_mut().zip(self.values.par_iter()).for_each(|(z, &m)| *z *= m);
    }

    /// `h^3 / N * sum_k symbol(k) |hat u(k)|^2`, the quadratic form of the
    /// multiplier by Parseval.
    pub fn quadratic_form(&self, hat: &[Complex64]) -> f64 {
        let norm = self.grid.cell_volume() / self.grid.len() as f64;
        let partial: Vec<f64> = hat
            .par_chunks(4096)
            .zip(self.values.par_chunks(4096))
            .map(|(h, m)| h.iter().zip(m).map(|(z, w)| w * z.norm_sqr()).sum())
            .collect();
        norm * partial.iter().sum::<f64>()
    }
}

/// `(-Delta)^sigma u` through the symbol `|k|^{2 sigma}`, `sigma in (0, 2]`.
pub fn frac_laplacian(u: &Field, sigma: f64) -> Result<Field> {
    u.ensure_finite()?;
    check_exponent(sigma, 0.0, 2.0)?;
    Ok(Symbol::power(*u.grid(), 2.0 * sigma).apply(u))
}

/// `||(-Delta)^{s/2} u||_2^2` evaluated in Fourier space.
pub fn hs_seminorm_sq(u: &Field, s: f64) -> Result<f64> {
    u.ensure_finite()?;
    check_exponent(s, 0.0, 2.0)?;
    let grid = *u.grid();
    let hat = fft::forward_real(u.values(), grid.n());
    Ok(Symbol::power(grid, 2.0 * s).quadratic_form(&hat))
}

/// Midpoint-rule integral `h^3 sum u`.
pub fn integrate(u: &Field) -> f64 {
    u.grid().cell_volume() * ordered_sum(u.values().iter().copied())
}

/// `h^3 sum u v`.
pub fn inner(u: &Field, v: &Field) -> Result<f64> {
    u.ensure_same_grid(v)?;
    Ok(inner_unchecked(u, v))
}

pub(crate) fn inner_unchecked(u: &Field, v: &Field) -> f64 {
    u.grid().cell_volume() * dot(u.values(), v.values())
}

/// `(h^3 sum |u|^p)^{1/p}`, `p >= 1`.
pub fn lp_norm(u: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidExponent(p));
    }
    u.ensure_finite()?;
    Ok(power_integral(u, p).powf(1.0 / p))
}

/// `h^3 sum |u|^p`, with `|0|^p = 0`.
pub fn power_integral(u: &Field, p: f64) -> f64 {
    u.grid().cell_volume() * ordered_sum(u.values().iter().map(|&v| abs_pow(v, p)))
}

/// `|v|^p` via `exp(p ln|v|)`, mapping 0 to 0.
#[inline]
pub fn abs_pow(v: f64, p: f64) -> f64 {
    let a = v.abs();
    if a == 0.0 {
        0.0
    } else if p == 2.0 {
        a * a
    } else if p == 4.0 {
        let a2 = a * a;
        a2 * a2
    } else {
        (p * a.ln()).exp()
    }
}

/// Rescales `u` to have `||u||_2 = a`.
pub fn mass_project(u: &Field, a: f64) -> Result<Field> {
    u.ensure_finite()?;
    if !(a > 0.0) {
        return Err(Error::InvalidParams(format!("mass a = {a} must be positive")));
    }
    let norm = lp_norm(u, 2.0)?;
    if norm == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(u.scaled(a / norm))
}

/// Deterministic sum in fixed blocks (independent of thread scheduling).
pub(crate) fn ordered_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut total = 0.0;
    let mut block = 0.0;
    for (i, v) in values.enumerate() {
        block += v;
        if i % 4096 == 4095 {
            total += block;
            block = 0.0;
        }
    }
    total + block
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(4096)
        .zip(b.par_chunks(4096))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    partial.iter().sum()
}

/// Riesz potential `phi` with `(-Delta)^t phi = source`.
pub fn riesz_potential(source: &Field, t: f64, method: RieszMethod) -> Result<Field> {
    riesz_potential_with(source, t, method, RieszConstant::Standard)
}

pub fn riesz_potential_with(
    source: &Field,
    t: f64,
    method: RieszMethod,
    constant: RieszConstant,
) -> Result<Field> {
    source.ensure_finite()?;
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::ExponentOutOfRange(t));
    }
    let scale = constant.relative_to_standard(t)?;
    let phi = match method {
        RieszMethod::Periodic => Symbol::power(*source.grid(), -2.0 * t).apply(source),
        RieszMethod::FreeSpace => FreeSpaceKernel::new(*source.grid(), t).convolve(source)?,
    };
    Ok(if scale == 1.0 { phi } else { phi.scaled(scale) })
}

/// Spectrum of the Riesz kernel on the zero-padded doubled grid (Hockney).
///
/// The kernel includes the quadrature weight `h^3`. The zero offset carries
/// `-c_t h^{3-p} Z(p)`, `Z` the continued lattice sum, which removes the
/// `O(h^{3-p})` error of the punctured lattice sum for smooth sources.
#[derive(Debug, Clone)]
pub struct FreeSpaceKernel {
    grid: Grid,
    hat: Vec<Complex64>,
}

impl FreeSpaceKernel {
    pub fn new(grid: Grid, t: f64) -> Self {
        let n = grid.n();
        let m = 2 * n;
        let h = grid.spacing();
        let p = 3.0 - 2.0 * t;
        let ct = RieszConstant::Standard.value(t).expect("t in (0,1)");
        let weight = ct * h.powi(3);
        let centre = -weight * h.powf(-p) * epstein_zeta_cubic(p);
        let wrap = |d: usize| -> f64 {
            let d = if d < n { d as f64 } else { d as f64 - m as f64 };
            d * h
        };
        let mut kernel = vec![Complex64::default(); m * m * m];
        kernel.par_chunks_mut(m * m).enumerate().for_each(|(i, plane)| {
            let x = wrap(i);
            for j in 0..m {
                let y = wrap(j);
                for k in 0..m {
                    let z = wrap(k);
                    let r2 = x * x + y * y + z * z;
                    let v = if r2 == 0.0 { centre } else { weight * r2.powf(-0.5 * p) };
                    plane[j * m + k] = Complex64::new(v, 0.0);
                }
            }
        });
        fft::forward(&mut kernel, m);
        Self { grid, hat: kernel }
    }

    pub fn convolve(&self, source: &Field) -> Result<Field> {
        source.ensure_same_grid(&Field::zeros(self.grid))?;
        let peak = source.max_abs();
        if peak > 0.0 {
            let ratio = source.boundary_max_abs() / peak;
            if ratio >= 1e-6 {
                return Err(Error::NotCompactlySupported(ratio));
            }
        } else {
            return Ok(Field::zeros(self.grid));
        }
        let n = self.grid.n();
        let m = 2 * n;
        let mut padded = vec![Complex64::default(); m * m * m];
        for i in 0..n {
            for j in 0..n {
                let src = &source.values()[(i * n + j) * n..(i * n + j + 1) * n];
                let dst = &mut padded[(i * m + j) * m..(i * m + j) * m + n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = Complex64::new(*s, 0.0);
                }
            }
        }
        fft::forward(&mut padded, m);
        padded.par_iter_mut().zip(self.hat.par_iter()).for_each(|(a, b)| *a *= b);
        fft::inverse(&mut padded, m);
        let mut out = Vec::with_capacity(self.grid.len());
        for i in 0..n {
            for j in 0..n {
                out.extend(padded[(i * m + j) * m..(i * m + j) * m + n].iter().map(|z| z.re));
            }
        }
        Ok(Field::from_vec_unchecked(self.grid, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(16, 2.0 * PI).unwrap()
    }

    fn cos_mode(g: Grid, m: [f64; 3]) -> Field {
        Field::from_fn(g, |x, y, z| (m[0] * x + m[1] * y + m[2] * z).cos()).unwrap()
    }

    fn rel_l2(a: &Field, b: &Field) -> f64 {
        let d = a.axpy(-1.0, b);
        lp_norm(&d, 2.0).unwrap() / lp_norm(b, 2.0).unwrap()
    }

    #[test]
    fn cosine_is_eigenfunction() {
        let g = grid();
        let u = cos_mode(g, [1.0, 2.0, 0.0]);
        let kk = 5f64.sqrt();
        for s in [0.3, 0.5, 0.75, 1.0] {
            let lu = frac_laplacian(&u, s).unwrap();
            assert!(rel_l2(&lu, &u.scaled(kk.powf(2.0 * s))) < 1e-12);
        }
    }

    #[test]
    fn constant_is_annihilated() {
        let g = grid();
        let u = Field::constant(g, 3.5);
        for s in [0.2, 0.9, 2.0] {
            assert!(frac_laplacian(&u, s).unwrap().max_abs() < 1e-12);
        }
        assert!(hs_seminorm_sq(&u, 0.5).unwrap().abs() < 1e-20);
    }

    #[test]
    fn exponent_range_errors() {
        let g = grid();
        let u = Field::constant(g, 1.0);
        assert!(matches!(frac_laplacian(&u, 0.0), Err(Error::ExponentOutOfRange(_))));
        assert!(matches!(frac_laplacian(&u, 2.5), Err(Error::ExponentOutOfRange(_))));
        assert!(matches!(lp_norm(&u, 0.5), Err(Error::InvalidExponent(_))));
        assert!(matches!(riesz_potential(&u, 1.0, RieszMethod::Periodic), Err(Error::ExponentOutOfRange(_))));
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = Grid::new(16, 3.0).unwrap();
        let one = Field::constant(g, 1.0);
        assert!((lp_norm(&one, 2.0).unwrap() - g.volume().sqrt()).abs() < 1e-12);
        let g = grid();
        let u = cos_mode(g, [0.0, 0.0, 3.0]);
        let m2 = lp_norm(&u, 2.0).unwrap().powi(2);
        assert!((m2 - g.volume() / 2.0).abs() < 1e-10);
        let kk = 3.0f64;
        let semi = hs_seminorm_sq(&u, 0.6).unwrap();
        assert!((semi - kk.powf(1.2) * m2).abs() / semi < 1e-12);
    }

    #[test]
    fn mass_projection() {
        let g = grid();
        let u = cos_mode(g, [1.0, 1.0, 1.0]);
        let v = mass_project(&u, 0.7).unwrap();
        assert!((lp_norm(&v, 2.0).unwrap() - 0.7).abs() < 1e-14);
        assert_eq!(mass_project(&Field::zeros(g), 1.0).unwrap_err(), Error::ZeroField);
    }

    #[test]
    fn periodic_riesz_on_mode() {
        let g = grid();
        let u = cos_mode(g, [2.0, 0.0, 1.0]);
        for t in [0.25, 0.5, 0.8] {
            let phi = riesz_potential(&u, t, RieszMethod::Periodic).unwrap();
            assert!(rel_l2(&phi, &u.scaled(5f64.powf(-t))) < 1e-12);
        }
        let z = riesz_potential(&Field::zeros(g), 0.5, RieszMethod::FreeSpace).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn free_space_rejects_wide_source() {
        let g = grid();
        let u = Field::constant(g, 1.0);
        assert!(matches!(
            riesz_potential(&u, 0.5, RieszMethod::FreeSpace),
            Err(Error::NotCompactlySupported(_))
        ));
    }

    #[test]
    fn riesz_constants() {
        // t = 1: standard constant reduces to 1/(4 pi) of the Newtonian kernel.
        let c = RieszConstant::Standard.value(0.999_999_9).unwrap();
        assert!((c - 1.0 / (4.0 * PI)).abs() < 1e-6);
        assert!(RieszConstant::Printed.value(0.75).is_err());
    }
}
