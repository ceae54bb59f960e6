//! Property suite behind `fsp verify`: each check reports a measured error
//! against its tolerance.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twofloat::TwoFloat;

use fsp_core::bubbles::{continuum_quotient, NumeratorExponent};
use fsp_core::fiber::{fiber_derivative, fiber_energy, scale};
use fsp_core::functional::{
    check_theorem_hypotheses, regime_of, DerivedConstants, Model, Params, Regime,
};
use fsp_core::quadrature::integrate;
use fsp_core::spectral::{
    frac_laplacian, inner, lp_norm, mass_project, riesz_potential, FreeSpaceKernel, RieszMethod,
};
use fsp_core::{Field, Grid, Result};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self { name: name.into(), value, tol }
    }

    pub fn pass(&self) -> bool {
        self.value.is_finite() && self.value <= self.tol
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} value={:.3e} tol={:.1e}",
            if self.pass() { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tol
        )
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

/// `cos(k.x)` for the lattice wavevector `(1, 2, 3) 2pi/L`, and `|k|`.
fn mode(grid: Grid) -> Result<(Field, f64)> {
    let k0 = 2.0 * PI / grid.length();
    let u = Field::from_fn(grid, |x, y, z| (k0 * (x + 2.0 * y + 3.0 * z)).cos())?;
    Ok((u, k0 * 14f64.sqrt()))
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> Result<Field> {
    Field::new(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Smooth localized direction with random center, width and tilt.
fn random_bump(grid: Grid, rng: &mut ChaCha8Rng) -> Result<Field> {
    let l = grid.length();
    let c: [f64; 3] = [0; 3].map(|_| rng.gen_range(-0.1..0.1) * l);
    let tilt: [f64; 3] = [0; 3].map(|_| rng.gen_range(-1.0..1.0));
    let w = rng.gen_range(0.06..0.12) * l;
    Field::from_fn(grid, |x, y, z| {
        let (dx, dy, dz) = (x - c[0], y - c[1], z - c[2]);
        let env = (-(dx * dx + dy * dy + dz * dz) / (2.0 * w * w)).exp();
        env * (1.0 + (tilt[0] * dx + tilt[1] * dy + tilt[2] * dz) / w)
    })
}

fn gaussian(grid: Grid, sigma: f64, a: f64) -> Result<Field> {
    mass_project(&Field::radial(grid, |r| (-0.5 * r * r / (sigma * sigma)).exp())?, a)
}

/// Free-space potential of `exp(-r^2 / (2 sigma^2))` at radius `r`, by the
/// radial Fourier inversion `(2 pi^2 r)^{-1} int k^{1-2t} sin(kr) f^(k) dk`
/// with `k = w^2` to tame the endpoint.
pub fn gaussian_riesz_oracle(sigma: f64, t: f64, r: f64) -> f64 {
    let fhat = |k: f64| (2.0 * PI * sigma * sigma).powf(1.5) * (-0.5 * sigma * sigma * k * k).exp();
    let top = (12.0 / sigma).sqrt();
    let f = |w: f64| {
        let k = w * w;
        let kernel = if r == 0.0 { k.powf(2.0 - 2.0 * t) } else { k.powf(1.0 - 2.0 * t) * (k * r).sin() / r };
        2.0 * w * kernel * fhat(k)
    };
    integrate(f, 0.0, top, 400, 10) / (2.0 * PI * PI)
}

/// Spectral operators: eigenfunctions, symmetry, semigroup, free-space oracle.
pub fn operator_checks(grid: Grid, t: f64, seed: u64) -> Result<Vec<Check>> {
    let (u, k) = mode(grid)?;
    let mut eig = 0.0f64;
    for sigma in [0.25, 0.5, 0.8, 1.0] {
        let lu = frac_laplacian(&u, sigma)?;
        let want = u.scaled(k.powf(2.0 * sigma));
        eig = eig.max(lu.axpy(-1.0, &want).max_abs() / want.max_abs());
    }
    let phi = riesz_potential(&u, t, RieszMethod::Periodic)?;
    let want = u.scaled(k.powf(-2.0 * t));
    let riesz = phi.axpy(-1.0, &want).max_abs() / want.max_abs();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = random_field(grid, &mut rng)?;
    let w = random_field(grid, &mut rng)?;
    let sym = rel(inner(&frac_laplacian(&v, 0.7)?, &w)?, inner(&v, &frac_laplacian(&w, 0.7)?)?);
    let lhs = frac_laplacian(&frac_laplacian(&v, 0.3)?, 0.5)?;
    let rhs = frac_laplacian(&v, 0.8)?;
    let semi = lhs.axpy(-1.0, &rhs).max_abs() / rhs.max_abs();

    let sigma = grid.length() / 16.0;
    let src = Field::radial(grid, |r| (-0.5 * r * r / (sigma * sigma)).exp())?;
    let phi = FreeSpaceKernel::new(grid, t).convolve(&src)?;
    let n = grid.n();
    let c = n / 2;
    let h = grid.spacing();
    let scale0 = gaussian_riesz_oracle(sigma, t, 0.0);
    let mut free = 0.0f64;
    for i in 0..=(3.0 * sigma / h).round() as usize {
        let r = i as f64 * h;
        let got = phi.values()[grid.index(c + i, c, c)];
        free = free.max((got - gaussian_riesz_oracle(sigma, t, r)).abs() / scale0);
    }
    Ok(vec![
        Check::new("frac_laplacian_eigenfunction", eig, 1e-12),
        Check::new("riesz_periodic_eigenfunction", riesz, 1e-12),
        Check::new("frac_laplacian_self_adjoint", sym, 1e-10),
        Check::new("frac_laplacian_semigroup", semi, 1e-10),
        Check::new("riesz_free_space_gaussian_oracle", free, 1e-3),
    ])
}

/// Central differences of the energy against `<G(u), v>` over `count`
/// random directions; worst relative error.
pub fn gradient_check(model: &Model, u: &Field, count: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = model.gradient(u)?;
    let scale = lp_norm(u, 2.0)?;
    let mut worst = 0.0f64;
    for _ in 0..count {
        let v = random_bump(*u.grid(), &mut rng)?;
        let e = 1e-4 * scale / lp_norm(&v, 2.0)?;
        let ip = model.energy(&u.axpy(e, &v))?.total;
        let im = model.energy(&u.axpy(-e, &v))?.total;
        worst = worst.max(rel((ip - im) / (2.0 * e), inner(&g, &v)?));
    }
    Ok(Check::new("gradient_directional_derivative", worst, 1e-5))
}

/// Central differences of the gradient against the Hessian action, along
/// `u` times a random bump: `|u|^{q-2} u` is only C^2 where `u` vanishes,
/// so the perturbation is kept relative to `u`.
pub fn hessian_check(model: &Model, u: &Field, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = random_bump(*u.grid(), &mut rng)?.mul(u);
    let st = model.state(u)?;
    let hv = model.hessian_vec(&st, &v)?;
    let e = 1e-4 * lp_norm(u, 2.0)? / lp_norm(&v, 2.0)?;
    let gp = model.gradient(&u.axpy(e, &v))?;
    let gm = model.gradient(&u.axpy(-e, &v))?;
    let fd = gp.lincomb(0.5 / e, &gm, -0.5 / e);
    Ok(Check::new("hessian_vector_product", fd.axpy(-1.0, &hv).max_abs() / hv.max_abs(), 1e-5))
}

/// Widest Gaussian whose `theta = -1` dilation keeps its support (where it
/// exceeds `1e-3` of the peak) inside the box.
pub fn fiber_sigma(grid: Grid) -> f64 {
    0.95 * grid.length() / (2.0 * std::f64::consts::E * (2.0 * 1000f64.ln()).sqrt())
}

/// Fiber identities on a Gaussian of width `sigma`: `Psi'(0) = P(u)`; the
/// analytic fiber against the grid energy of `scale(u, theta)` on 21
/// points of `[-1, 1]`, relative to the sum of the term magnitudes; and
/// the relative drift of `||scale(u, theta)||_2` on the same points.
pub fn fiber_checks(model: &Model, sigma: f64) -> Result<Vec<Check>> {
    let p = *model.params();
    let u = gaussian(*model.grid(), sigma, p.a)?;
    let c = model.coefficients(&u)?;
    let dpsi = rel(fiber_derivative(&c, &p, 0.0), model.pohozaev(&u)?);
    let mut scan = 0.0f64;
    let mut drift = 0.0f64;
    for i in -10..=10 {
        let th = 0.1 * i as f64;
        let w = scale(&u, th)?;
        let e = model.energy(&w)?;
        let magnitude = e.kinetic.abs() + e.poisson.abs() + e.subcrit.abs() + e.crit.abs();
        scan = scan.max((fiber_energy(&c, &p, th) - e.total).abs() / magnitude);
        drift = drift.max((lp_norm(&w, 2.0)? - p.a).abs() / p.a);
    }
    Ok(vec![
        Check::new("fiber_derivative_is_pohozaev", dpsi, 1e-10),
        Check::new("fiber_analytic_vs_grid", scan, 1e-2),
        Check::new("fiber_mass_drift", drift, 1e-3),
    ])
}

/// A resolvable `eps`-decade for the continuum quotient with cutoff radii
/// 1 and 2.
pub const QUOTIENT_DECADE: [f64; 5] = [0.005, 0.0089, 0.0158, 0.0281, 0.05];

fn spread(values: &[f64]) -> f64 {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (max - min) / min.abs()
}

/// Relative spread over [`QUOTIENT_DECADE`] of the free-space Rayleigh
/// quotient of the cut bubble, and of its critical integral with the
/// default numerator exponent.
pub fn bubble_invariance_checks(s: f64) -> Result<Vec<Check>> {
    let mut quotients = Vec::new();
    let mut crits = Vec::new();
    for eps in QUOTIENT_DECADE {
        let c = continuum_quotient(s, eps, 1.0, 2.0, NumeratorExponent::default())?;
        quotients.push(c.quotient);
        crits.push(c.crit);
    }
    Ok(vec![
        Check::new("bubble_quotient_invariance", spread(&quotients), 0.03),
        Check::new("bubble_critical_norm_invariance", spread(&crits), 0.03),
    ])
}

/// Valid tuple drawn uniformly in `(s, t, q)` and log-uniformly elsewhere.
fn random_params(rng: &mut ChaCha8Rng) -> Params {
    let s: f64 = rng.gen_range(0.55..0.99);
    let t = rng.gen_range((1.5 - s + 0.01).max(0.01)..0.99);
    let ts = 6.0 / (3.0 - 2.0 * s);
    let q = rng.gen_range(2.0 + 1e-3..ts - 1e-3);
    let log = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.gen_range(lo.ln()..hi.ln())).exp();
    Params { s, t, q, a: log(rng, 1e-2, 2.0), mu: log(rng, 0.1, 100.0), lambda: log(rng, 1e-3, 1.0) }
}

/// Regime classification of `samples` random `(q, s)` against the sign of
/// `3q - 6 - 4s` in double-double arithmetic; value is the miss count.
pub fn trichotomy_check(samples: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut misses = 0usize;
    for _ in 0..samples {
        let p = random_params(&mut rng);
        let c = DerivedConstants::from_estimates(&p, 1.0, 0.0, 1.0);
        let x = p.q * c.delta_qs;
        let got = if x < 2.0 {
            Regime::Subcritical
        } else if x > 2.0 {
            Regime::Supercritical
        } else {
            Regime::Critical
        };
        let sign = TwoFloat::from(3.0) * p.q - 6.0 - TwoFloat::from(4.0) * p.s;
        let want = if sign < 0.0 {
            Regime::Subcritical
        } else if sign > 0.0 {
            Regime::Supercritical
        } else {
            Regime::Critical
        };
        misses += usize::from(got != want || regime_of(p.q, p.s) != want);
    }
    Check::new("regime_trichotomy_misclassifications", misses as f64, 0.0)
}

type D = TwoFloat;

fn d(x: f64) -> D {
    D::from(x)
}

fn pw(x: D, y: D) -> D {
    if x == 0.0 {
        d(0.0)
    } else {
        x.powf(y)
    }
}

/// Values and decisions of the hypothesis report recomputed in double-double.
struct Reference {
    values: [f64; 7],
    smallness: bool,
    window: bool,
}

fn reference(p: &Params, s_est: f64, gamma: f64) -> Reference {
    let (s, t, q, a, mu, lam) = (d(p.s), d(p.t), d(p.q), d(p.a), d(p.mu), d(p.lambda));
    let (one, two, three) = (d(1.0), d(2.0), d(3.0));
    let se = d(s_est);
    let g = d(gamma);
    let ts = d(6.0) / (three - two * s);
    let del = three * (q - two) / (two * q * s);
    let qd = q * del;
    let d_st = pw((three - two * t) * lam * g / (two * s), (qd - two) * s / (s * ts + two * t - three));
    let d1 = pw(two, -(qd - two) / (ts - two)) * pw(se, three * (ts - q) / (two * s * (ts - two)));
    let d2 = pw(se, three * ((ts - two) - q * (one - del)) / (two * s * (ts - two))) / d_st;
    let c_qs = pw(se, -del / two);
    let e2 = ((q - two) * two * t + two * s * (ts - d(4.0))) / (s * ts + two * t - three);
    let x1 = pw(a, q * (one - del));
    let x2 = pw(a, e2);
    let lhs = mu * del * if x1 > x2 { x1 } else { x2 };
    let rhs = if d1 < d2 { d1 } else { d2 };
    let beta = if qd >= two {
        d(0.0)
    } else {
        let e = pw(se, -ts / two) / ts;
        let r = pw((two - qd) / (two * e * (ts - qd)), one / (ts - two));
        let h = (r * r / two - e * pw(r, ts)) * pw(r, -qd);
        q / c_qs * h / two
    };
    let window_max = pw(beta / mu, one / (q * (one - del)));
    let regime = regime_of(p.q, p.s);
    let sixteen = d(16.0);
    let e1 = (d(6.0) - q * (three - two * s)) / (two * (d(4.0) * s + two * t - three));
    let gamma2 = d(4.0) * s * (d(4.0) * s + two * t - three)
        / ((two * t + two * s - three) * (d(6.0) - q * (three - two * s))
            + (three * (q - two) - d(4.0) * s) * (d(4.0) * s + two * t - three));
    let first = pw(
        q * pw(sixteen * lam * g, e1) / (sixteen * mu * pw(two, three * (q - two) / (d(4.0) * s)) * c_qs),
        gamma2,
    );
    let second = pw(ts * pw(se, ts / two) / (pw(two, ts / two) * sixteen), two / (ts - two));
    let k_a = if first < second { first } else { second };
    let a_tilde = pw(pw(k_a, (two * t + two * s - three) / (two * s)) / (sixteen * lam * g), s / (d(4.0) * s + two * t - three));
    Reference {
        values: [lhs, rhs, beta, window_max, k_a, a_tilde, c_qs].map(f64::from),
        smallness: lhs < rhs,
        window: regime == Regime::Subcritical && a < window_max,
    }
}

/// `check_theorem_hypotheses` on `samples` random tuples and estimates
/// against the double-double re-evaluation: worst relative error of the
/// reported values, plus the number of differing decisions. The value
/// tolerance allows f64 rounding amplified by exponents of order 10-100.
pub fn hypotheses_precision_checks(samples: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut flips = 0usize;
    for _ in 0..samples {
        let p = random_params(&mut rng);
        let s_est = rng.gen_range(0.5..5.0);
        let gamma = rng.gen_range(0.05..1.0);
        let c = DerivedConstants::from_estimates(&p, s_est, 0.0, gamma);
        let r = check_theorem_hypotheses(&p, &c, None);
        let got = [
            r.smallness_lhs,
            r.smallness_rhs,
            r.beta,
            r.mass_window_max,
            r.geometry.k_a,
            r.geometry.a_tilde,
            c.c_qs,
        ];
        let want = reference(&p, s_est, gamma);
        for (g, w) in got.iter().zip(want.values) {
            worst = worst.max(rel(*g, w));
        }
        flips += usize::from(r.smallness_holds != want.smallness || r.mass_window_holds != want.window);
    }
    vec![
        Check::new("hypotheses_extended_precision_values", worst, 1e-9),
        Check::new("hypotheses_extended_precision_decisions", flips as f64, 0.0),
    ]
}

/// The full suite on the configured grid and parameters.
pub fn run(cfg: &RunConfig) -> Result<Vec<Check>> {
    let grid = cfg.grid();
    let p = cfg.params;
    let seed = cfg.solver.seed;
    let model = Model::with_riesz(grid, p, cfg.riesz, cfg.riesz_constant)?;
    let mut out = operator_checks(grid, p.t, seed)?;
    let u = gaussian(grid, grid.length() / 16.0, p.a)?;
    out.push(gradient_check(&model, &u, 20, seed)?);
    out.push(hessian_check(&model, &u, seed)?);
    out.extend(fiber_checks(&model, fiber_sigma(grid))?);
    out.extend(bubble_invariance_checks(p.s)?);
    out.push(trichotomy_check(10_000, seed));
    out.extend(hypotheses_precision_checks(100, seed));
    Ok(out)
}
