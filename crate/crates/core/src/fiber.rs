//! Mass-preserving dilation `(theta * u)(x) = e^{3 theta/2} u(e^theta x)`
//! and the closed-form fiber energy built from four cached integrals.

use crate::error::{Error, Result};
use crate::functional::{Params, Regime};
use crate::grid::Field;

/// `A = ||(-Delta)^{s/2}u||^2`, `B = int phi u^2`, `C = int |u|^q`,
/// `D = int |u|^{2*}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FiberCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Exponents of `e^{k theta}` for the four terms.
fn rates(p: &Params) -> [f64; 4] {
    [2.0 * p.s, 3.0 - 2.0 * p.t, 1.5 * (p.q - 2.0), p.two_star() * p.s]
}

fn weights(c: &FiberCoefficients, p: &Params) -> [f64; 4] {
    [0.5 * c.a, 0.25 * p.lambda * c.b, -p.mu * c.c / p.q, -c.d / p.two_star()]
}

fn derivative(c: &FiberCoefficients, p: &Params, theta: f64, order: i32) -> f64 {
    rates(p)
        .iter()
        .zip(weights(c, p))
        .map(|(k, w)| w * k.powi(order) * (k * theta).exp())
        .sum()
}

pub fn fiber_energy(c: &FiberCoefficients, p: &Params, theta: f64) -> f64 {
    derivative(c, p, theta, 0)
}

pub fn fiber_derivative(c: &FiberCoefficients, p: &Params, theta: f64) -> f64 {
    derivative(c, p, theta, 1)
}

pub fn fiber_second_derivative(c: &FiberCoefficients, p: &Params, theta: f64) -> f64 {
    derivative(c, p, theta, 2)
}

/// Coefficients of `theta * u` from those of `u` (exact scaling laws).
pub fn scaled_coefficients(c: &FiberCoefficients, p: &Params, theta: f64) -> FiberCoefficients {
    let k = rates(p);
    FiberCoefficients {
        a: c.a * (k[0] * theta).exp(),
        b: c.b * (k[1] * theta).exp(),
        c: c.c * (k[2] * theta).exp(),
        d: c.d * (k[3] * theta).exp(),
    }
}

/// Radius (in physical units, from the box centre) containing every point
/// where `|u| >= 1e-3 max|u|`.
pub fn support_radius(u: &Field) -> f64 {
    let g = u.grid();
    let cut = 1e-3 * u.max_abs();
    let mut r2 = 0.0f64;
    for (idx, v) in u.values().iter().enumerate() {
        if v.abs() >= cut {
            let [x, y, z] = g.point(idx);
            r2 = r2.max(x * x + y * y + z * z);
        }
    }
    r2.sqrt()
}

/// Default `|theta|` bound for grid dilations.
pub const THETA_MAX: f64 = 1.5;

/// `theta * u` by trilinear interpolation with zero extension.
pub fn scale(u: &Field, theta: f64) -> Result<Field> {
    scale_with_limit(u, theta, THETA_MAX)
}

pub fn scale_with_limit(u: &Field, theta: f64, theta_max: f64) -> Result<Field> {
    u.ensure_finite()?;
    if !theta.is_finite() || theta.abs() > theta_max {
        return Err(Error::DilationLeavesBox(theta));
    }
    if theta == 0.0 {
        return Ok(u.clone());
    }
    let g = *u.grid();
    let half = 0.5 * g.length();
    // The dilated profile occupies e^{-theta} times the original support.
    if (-theta).exp() * support_radius(u) > half {
        return Err(Error::DilationLeavesBox(theta));
    }
    let n = g.n();
    let c = (n / 2) as f64;
    let f = theta.exp();
    let amp = (1.5 * theta).exp();
    let v = u.values();
    // Per-axis source index and weight, shared by all three axes.
    let taps: Vec<Option<(usize, f64)>> = (0..n)
        .map(|i| {
            let y = c + f * (i as f64 - c);
            if y < 0.0 || y > (n - 1) as f64 {
                None
            } else {
                let i0 = (y.floor() as usize).min(n - 2);
                Some((i0, y - i0 as f64))
            }
        })
        .collect();
    let mut out = vec![0.0; g.len()];
    for i in 0..n {
        let Some((i0, wx)) = taps[i] else { continue };
        for j in 0..n {
            let Some((j0, wy)) = taps[j] else { continue };
            for k in 0..n {
                let Some((k0, wz)) = taps[k] else { continue };
                let at = |a: usize, b: usize, d: usize| v[(a * n + b) * n + d];
                let c00 = at(i0, j0, k0) * (1.0 - wz) + at(i0, j0, k0 + 1) * wz;
                let c01 = at(i0, j0 + 1, k0) * (1.0 - wz) + at(i0, j0 + 1, k0 + 1) * wz;
                let c10 = at(i0 + 1, j0, k0) * (1.0 - wz) + at(i0 + 1, j0, k0 + 1) * wz;
                let c11 = at(i0 + 1, j0 + 1, k0) * (1.0 - wz) + at(i0 + 1, j0 + 1, k0 + 1) * wz;
                let c0 = c00 * (1.0 - wy) + c01 * wy;
                let c1 = c10 * (1.0 - wy) + c11 * wy;
                out[(i * n + j) * n + k] = amp * (c0 * (1.0 - wx) + c1 * wx);
            }
        }
    }
    Field::new(g, out)
}

/// Local maximum of the fiber energy on `[-theta_max, theta_max]` with the
/// largest value: returns `(theta*, Psi(theta*))`.
pub fn fiber_maximum(c: &FiberCoefficients, p: &Params, theta_max: f64) -> Result<(f64, f64)> {
    let samples = 4000;
    let at = |i: usize| -theta_max + 2.0 * theta_max * i as f64 / samples as f64;
    let mut best: Option<(f64, f64)> = None;
    let mut prev = fiber_derivative(c, p, at(0));
    for i in 1..=samples {
        let cur = fiber_derivative(c, p, at(i));
        if prev > 0.0 && cur <= 0.0 {
            let th = refine_root(c, p, at(i - 1), at(i));
            let val = fiber_energy(c, p, th);
            if best.is_none_or(|(_, b)| val > b) {
                best = Some((th, val));
            }
        }
        prev = cur;
    }
    best.ok_or(Error::FiberMaxOutsideWindow(theta_max))
}

/// Safeguarded Newton on `Psi'` inside a sign-change bracket.
fn refine_root(c: &FiberCoefficients, p: &Params, mut lo: f64, mut hi: f64) -> f64 {
    let scale = rates(p)
        .iter()
        .zip(weights(c, p))
        .map(|(k, w)| (w * k).abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut th = 0.5 * (lo + hi);
    for _ in 0..200 {
        let d1 = fiber_derivative(c, p, th);
        if d1.abs() < 1e-13 * scale {
            break;
        }
        if d1 > 0.0 {
            lo = th;
        } else {
            hi = th;
        }
        let d2 = fiber_second_derivative(c, p, th);
        let newton = th - d1 / d2;
        th = if d2 < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 {
            break;
        }
    }
    th
}

/// Result of projecting onto the Pohozaev manifold along the fiber.
#[derive(Debug, Clone)]
pub struct Projection {
    pub theta: f64,
    pub field: Field,
}

/// Dilates `u` to the maximum of its fiber energy (supercritical only).
pub fn pohozaev_project(
    u: &Field,
    c: &FiberCoefficients,
    p: &Params,
    theta_max: f64,
) -> Result<Projection> {
    if p.regime() != Regime::Supercritical {
        return Err(Error::InvalidParams("fiber projection requires q > 2 + 4s/3".into()));
    }
    if !(c.d > 0.0) {
        return Err(Error::InvalidParams("critical integral must be positive".into()));
    }
    let (theta, _) = fiber_maximum(c, p, theta_max)?;
    let field = scale_with_limit(u, theta, theta_max)?;
    Ok(Projection { theta, field })
}

/// `(theta, Psi, Psi', Psi'')` on `count` equally spaced points.
pub fn fiber_scan(
    c: &FiberCoefficients,
    p: &Params,
    lo: f64,
    hi: f64,
    count: usize,
) -> Vec<[f64; 4]> {
    (0..count)
        .map(|i| {
            let th = if count > 1 { lo + (hi - lo) * i as f64 / (count - 1) as f64 } else { lo };
            [
                th,
                fiber_energy(c, p, th),
                fiber_derivative(c, p, th),
                fiber_second_derivative(c, p, th),
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::spectral::{hs_seminorm_sq, lp_norm};

    fn params() -> Params {
        Params::new(0.8, 0.8, 4.0, 1.0, 1.0, 0.5).unwrap()
    }

    fn coef() -> FiberCoefficients {
        FiberCoefficients { a: 2.0, b: 0.7, c: 1.3, d: 0.9 }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let (c, p) = (coef(), params());
        let e = 1e-5;
        for th in [-1.0, -0.2, 0.0, 0.4, 1.1] {
            let d1 = fiber_derivative(&c, &p, th);
            let fd = (fiber_energy(&c, &p, th + e) - fiber_energy(&c, &p, th - e)) / (2.0 * e);
            assert!((d1 - fd).abs() < 1e-8 * d1.abs().max(1.0));
            let d2 = fiber_second_derivative(&c, &p, th);
            let fd2 = (fiber_derivative(&c, &p, th + e) - fiber_derivative(&c, &p, th - e)) / (2.0 * e);
            assert!((d2 - fd2).abs() < 1e-7 * d2.abs().max(1.0));
        }
    }

    #[test]
    fn derivative_at_zero_is_pohozaev() {
        let (c, p) = (coef(), params());
        assert!((fiber_derivative(&c, &p, 0.0) - p.pohozaev_of(&c)).abs() < 1e-14);
        assert!((fiber_energy(&c, &p, 0.0) - p.energy_of(&c)).abs() < 1e-14);
    }

    #[test]
    fn limits_along_fiber() {
        let (c, p) = (coef(), params());
        let low = fiber_energy(&c, &p, -10.0);
        assert!(low > 0.0 && low < 1e-3);
        assert!(fiber_energy(&c, &p, 3.0) < 0.0);
    }

    #[test]
    fn maximum_matches_dense_scan() {
        let (c, p) = (coef(), params());
        let (th, val) = fiber_maximum(&c, &p, 3.0).unwrap();
        let n = 1_000_000;
        let (mut bt, mut bv) = (0.0, f64::NEG_INFINITY);
        for i in 0..=n {
            let x = -3.0 + 6.0 * i as f64 / n as f64;
            let v = fiber_energy(&c, &p, x);
            if v > bv {
                bv = v;
                bt = x;
            }
        }
        assert!((th - bt).abs() < 1e-5);
        assert!(val >= bv);
        assert!(fiber_second_derivative(&c, &p, th) < 0.0);
    }

    #[test]
    fn scale_is_identity_at_zero_and_rejects_overflow() {
        let g = Grid::new(32, 16.0).unwrap();
        let u = Field::radial(g, |r| (-0.5 * r * r).exp()).unwrap();
        assert_eq!(scale(&u, 0.0).unwrap(), u);
        assert!(matches!(scale(&u, -1.4), Err(Error::DilationLeavesBox(_))));
        assert!(matches!(scale(&u, 2.0), Err(Error::DilationLeavesBox(_))));
    }

    fn norm_drift(n: usize, theta: f64) -> f64 {
        let g = Grid::new(n, 16.0).unwrap();
        let u = Field::radial(g, |r| (-0.5 * r * r / 2.25).exp()).unwrap();
        let m0 = lp_norm(&u, 2.0).unwrap();
        (lp_norm(&scale(&u, theta).unwrap(), 2.0).unwrap() - m0).abs() / m0
    }

    #[test]
    fn mass_drift_is_second_order() {
        // Trilinear interpolation: halving h divides the drift by about 4.
        let (coarse, fine) = (norm_drift(32, 0.5), norm_drift(64, 0.5));
        assert!(coarse / fine > 3.0, "{coarse} {fine}");
    }

    #[test]
    fn kinetic_term_scales_with_theta() {
        // Interpolation error is 7e-3 at n = 64 and 6e-4 at n = 160.
        let g = Grid::new(160, 16.0).unwrap();
        let s = 0.8;
        let u = Field::radial(g, |r| (-0.5 * r * r / 2.25).exp()).unwrap();
        let th = 0.4;
        let lhs = hs_seminorm_sq(&scale(&u, th).unwrap(), s).unwrap();
        let rhs = (2.0 * s * th).exp() * hs_seminorm_sq(&u, s).unwrap();
        assert!((lhs - rhs).abs() / rhs < 1e-3, "{}", (lhs - rhs).abs() / rhs);
    }

    #[test]
    fn scaled_coefficients_follow_fiber() {
        let (c, p) = (coef(), params());
        let th = 0.37;
        let sc = scaled_coefficients(&c, &p, th);
        assert!((p.energy_of(&sc) - fiber_energy(&c, &p, th)).abs() < 1e-14);
        assert!((p.pohozaev_of(&sc) - fiber_derivative(&c, &p, th)).abs() < 1e-13);
    }
}
