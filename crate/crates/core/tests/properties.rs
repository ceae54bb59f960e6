//! Invariants of the operators, the energy and the exponent algebra over
//! random inputs.

use fsp_core::fiber::{fiber_derivative, fiber_energy, scaled_coefficients};
use fsp_core::functional::{delta_qs, qbar, regime_of, two_star, Model, Params, Regime};
use fsp_core::optimizer::Symmetry;
use fsp_core::spectral::{frac_laplacian, inner, lp_norm, mass_project, riesz_potential, RieszMethod};
use fsp_core::{Field, Grid};
use proptest::prelude::*;

const N: usize = 16;
const L: f64 = 8.0;

fn grid() -> Grid {
    Grid::new(N, L).unwrap()
}

/// Smooth field from a few random Gaussian bumps.
fn bumps(coef: &[(f64, f64, f64, f64)]) -> Field {
    Field::from_fn(grid(), |x, y, z| {
        coef.iter()
            .map(|&(c, cx, cy, w)| {
                let (dx, dy) = (x - cx, y - cy);
                c * (-(dx * dx + dy * dy + z * z) / (w * w)).exp()
            })
            .sum()
    })
    .unwrap()
}

fn bump_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -2.0..2.0f64, -2.0..2.0f64, 0.8..2.0f64), 1..4)
}

/// Valid `(s, t, q)` with `2s + 2t > 3` and `2 < q < 2*`.
fn exponents() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.55..0.99f64, 0.0..1.0f64, 0.01..0.99f64).prop_map(|(s, ft, fq)| {
        let t_lo = (1.5 - s).max(0.0) + 1e-3;
        let t = t_lo + ft * (1.0 - 1e-3 - t_lo);
        let q = 2.0 + fq * (two_star(s) - 2.0);
        (s, t, q)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn exponent_audit((s, _t, q) in exponents()) {
        let d = delta_qs(q, s);
        prop_assert!((3.0 * (q / 2.0 - 1.0) - s * q * d).abs() < 1e-12);
        prop_assert!(d > 0.0 && d < 1.0);
        let expected = if q < qbar(s) { Regime::Subcritical } else if q > qbar(s) { Regime::Supercritical } else { Regime::Critical };
        prop_assert_eq!(regime_of(q, s), expected);
        prop_assert_eq!(q * d < 2.0, q < qbar(s));
    }

    #[test]
    fn frac_laplacian_is_self_adjoint(u in bump_strategy(), v in bump_strategy(), s in 0.1..1.0f64) {
        let (u, v) = (bumps(&u), bumps(&v));
        let lhs = inner(&frac_laplacian(&u, s).unwrap(), &v).unwrap();
        let rhs = inner(&u, &frac_laplacian(&v, s).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn frac_laplacian_semigroup(u in bump_strategy(), a in 0.05..0.5f64, b in 0.05..0.5f64) {
        let u = bumps(&u);
        let two = frac_laplacian(&frac_laplacian(&u, a).unwrap(), b).unwrap();
        let one = frac_laplacian(&u, a + b).unwrap();
        let err = lp_norm(&two.axpy(-1.0, &one), 2.0).unwrap();
        prop_assert!(err <= 1e-10 * (1.0 + lp_norm(&one, 2.0).unwrap()));
    }

    #[test]
    fn coulomb_energy_is_nonnegative(
        u in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.4..0.9f64), 1..4),
        t in 0.3..0.99f64,
    ) {
        // Narrow bumps: the free-space solver requires a decayed source.
        let u = bumps(&u);
        let w = u.mul(&u);
        for method in [RieszMethod::Periodic, RieszMethod::FreeSpace] {
            let phi = riesz_potential(&w, t, method).unwrap();
            prop_assert!(inner(&phi, &w).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn mass_projection_is_idempotent(u in bump_strategy(), a in 0.01..10.0f64) {
        let u = bumps(&u);
        prop_assume!(lp_norm(&u, 2.0).unwrap() > 1e-6);
        let p = mass_project(&u, a).unwrap();
        prop_assert!((lp_norm(&p, 2.0).unwrap() / a - 1.0).abs() < 1e-12);
        let pp = mass_project(&p, a).unwrap();
        prop_assert!(lp_norm(&pp.axpy(-1.0, &p), 2.0).unwrap() <= 1e-12 * a);
    }

    #[test]
    fn energy_is_even_and_fiber_consistent(u in bump_strategy(), (s, t, q) in exponents(), mu in 0.1..10.0f64) {
        let p = Params::new(s, t, q, 1.0, mu, 0.1).unwrap();
        let m = Model::new(grid(), p).unwrap();
        let u = mass_project(&bumps(&u), 1.0).unwrap();
        let e = m.energy(&u).unwrap();
        let e_neg = m.energy(&u.scaled(-1.0)).unwrap();
        prop_assert!((e.total - e_neg.total).abs() <= 1e-12 * (1.0 + e.total.abs()));
        let c = m.coefficients(&u).unwrap();
        prop_assert!((fiber_energy(&c, &p, 0.0) - e.total).abs() <= 1e-12 * (1.0 + e.total.abs()));
        let pz = m.pohozaev(&u).unwrap();
        prop_assert!((fiber_derivative(&c, &p, 0.0) - pz).abs() <= 1e-10 * (1.0 + pz.abs()));
    }

    #[test]
    fn fiber_group_law((s, t, q) in exponents(), a in -1.0..1.0f64, b in -1.0..1.0f64,
                       ca in 0.1..10.0f64, cb in 0.1..10.0f64, cc in 0.1..10.0f64, cd in 0.1..10.0f64) {
        let p = Params::new(s, t, q, 1.0, 2.0, 0.5).unwrap();
        let c = fsp_core::fiber::FiberCoefficients { a: ca, b: cb, c: cc, d: cd };
        let direct = fiber_energy(&c, &p, a + b);
        let composed = fiber_energy(&scaled_coefficients(&c, &p, a), &p, b);
        prop_assert!((direct - composed).abs() <= 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn odd_projection_is_idempotent(u in bump_strategy()) {
        let u = bumps(&u);
        let once = Symmetry::OddX.apply(&u);
        let twice = Symmetry::OddX.apply(&once);
        prop_assert_eq!(once.values(), twice.values());
    }
}
