//! Gauss-Legendre rules and the lattice sum used by the free-space kernel.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, gamma_ur};

/// Nodes and weights of the `m`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_m.
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * pm - pm1) / (x * x - 1.0);
            let dx = pm / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]` with `panels`
/// equal panels of `order` points each.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for (xi, wi) in x.iter().zip(&w) {
            total += wi * f(mid + 0.5 * width * xi);
        }
    }
    0.5 * width * total
}

/// Analytic continuation of `sum_{n in Z^3, n != 0} |n|^{-p}` by Ewald
/// splitting of the theta function at `t = 1`:
/// `pi^{-s} Gamma(s) Z = -1/s + 1/(s-3/2) + sum' [x^{-s} Gamma(s, x) + x^{s-3/2} Gamma(3/2-s, x)]`,
/// `x = pi |n|^2`, `s = p/2`, for `0 < p < 3`.
pub fn epstein_zeta_cubic(p: f64) -> f64 {
    let s = 0.5 * p;
    let r = 1.5 - s;
    let (gs, gr) = (gamma(s), gamma(r));
    let mut acc = -1.0 / s - 1.0 / r;
    const REACH: i32 = 5;
    for i in -REACH..=REACH {
        for j in -REACH..=REACH {
            for k in -REACH..=REACH {
                let n2 = (i * i + j * j + k * k) as f64;
                if n2 == 0.0 {
                    continue;
                }
                let x = PI * n2;
                acc += x.powf(-s) * gamma_ur(s, x) * gs + x.powf(-r) * gamma_ur(r, x) * gr;
            }
        }
    }
    acc * PI.powf(s) / gs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(7);
        for deg in 0..=13 {
            let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((approx - exact).abs() < 1e-13, "degree {deg}");
        }
    }

    #[test]
    fn lattice_zeta_reference_value() {
        // Continued sum' |n|^{-1} over Z^3, a classical lattice constant.
        assert!((epstein_zeta_cubic(1.0) + 2.837_297_479_480_619_6).abs() < 1e-12);
    }

    #[test]
    fn lattice_zeta_matches_regularized_sum() {
        // sum' |n|^{-p} e^{-|n|^2/R^2} - 2 pi R^{3-p} Gamma((3-p)/2)
        //   = Z(p) - Z(p-2)/R^2 + O(R^{-4}), with Z(0) = -1.
        let (p, r) = (2.0, 6.0);
        let m = 40i32;
        let mut sum = 0.0;
        for i in -m..=m {
            for j in -m..=m {
                for k in -m..=m {
                    let n2 = (i * i + j * j + k * k) as f64;
                    if n2 > 0.0 {
                        sum += n2.powf(-0.5 * p) * (-n2 / (r * r)).exp();
                    }
                }
            }
        }
        let z = sum - 2.0 * PI * r.powf(3.0 - p) * gamma(0.5 * (3.0 - p)) - 1.0 / (r * r);
        assert!((epstein_zeta_cubic(p) - z).abs() < 1e-8, "{} vs {z}", epstein_zeta_cubic(p));
    }
}
