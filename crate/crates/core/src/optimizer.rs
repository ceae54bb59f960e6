//! Constrained critical points on the mass sphere `||u||_2 = a`.
//!
//! Mass-subcritical: preconditioned projected descent of the truncated
//! energy with Armijo backtracking. Mass-supercritical: descent on the
//! Pohozaev manifold by fiber projection, followed by a Newton-Krylov polish
//! of the constrained critical-point equations.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bubbles::sobolev_constant_estimate;
use crate::error::{Error, Result};
use crate::fiber::{fiber_maximum, scale_with_limit, FiberCoefficients};
use crate::functional::{
    tangential, EnergyReport, Model, Params, Regime, State, TruncationProfile,
};
use crate::grid::{Field, Grid};
use crate::spectral::{apply_radial_symbol, dot, hs_seminorm_sq, mass_project};

/// Window for fiber maxima evaluated on coefficients only (no interpolation).
const COEFFICIENT_THETA_MAX: f64 = 30.0;

/// Residual below which Newton steps only move rounding noise.
const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    SubcriticalMinimize,
    SupercriticalMountainPass,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SubcriticalMinimize => "subcritical_minimize",
            Mode::SupercriticalMountainPass => "supercritical_mountain_pass",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "subcritical_minimize" => Some(Mode::SubcriticalMinimize),
            "supercritical_mountain_pass" => Some(Mode::SupercriticalMountainPass),
            _ => None,
        }
    }

    pub fn for_regime(r: Regime) -> Result<Self> {
        match r {
            Regime::Subcritical => Ok(Mode::SubcriticalMinimize),
            Regime::Supercritical => Ok(Mode::SupercriticalMountainPass),
            Regime::Critical => {
                Err(Error::InvalidParams("no solver for the mass-critical exponent".into()))
            }
        }
    }
}

/// Symmetry class kept invariant along the flow. A constrained critical
/// point within an invariant class is a critical point of the full problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Symmetry {
    #[default]
    None,
    /// `u(-x, y, z) = -u(x, y, z)`.
    OddX,
}

impl Symmetry {
    pub fn as_str(self) -> &'static str {
        match self {
            Symmetry::None => "none",
            Symmetry::OddX => "odd_x",
        }
    }

    /// Projection onto the class; the reflection permutes grid points exactly.
    pub fn apply(self, u: &Field) -> Field {
        match self {
            Symmetry::None => u.clone(),
            Symmetry::OddX => {
                let g = *u.grid();
                let n = g.n();
                let v = u.values();
                let out = (0..g.len())
                    .map(|idx| {
                        let (i, j, k) = g.unravel(idx);
                        0.5 * (v[idx] - v[g.index((n - i) % n, j, k)])
                    })
                    .collect();
                Field::new(g, out).expect("finite input")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Initial (and largest) step of the preconditioned descent.
    pub step: f64,
    pub backtrack: f64,
    pub step_floor: f64,
    pub armijo: f64,
    pub tol_r: f64,
    pub tol_p: f64,
    pub tol_e: f64,
    /// Iterations over which the energy stall is measured.
    pub stall_window: usize,
    pub seed: u64,
    pub theta_max: f64,
    pub mode: Option<Mode>,
    pub symmetry: Symmetry,
    /// Flow the positive-part functional.
    pub positive: bool,
    /// Residual at which the supercritical descent hands over to Newton.
    pub handover: f64,
    pub newton_iter: usize,
    pub krylov_dim: usize,
    /// Compare the converged level with the compactness threshold.
    pub check_threshold: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            step: 1.0,
            backtrack: 0.5,
            step_floor: 1e-8,
            armijo: 1e-4,
            tol_r: 1e-6,
            tol_p: 1e-6,
            tol_e: 1e-12,
            stall_window: 50,
            seed: 0,
            theta_max: 1.5,
            mode: None,
            symmetry: Symmetry::None,
            positive: false,
            handover: 1e-3,
            newton_iter: 60,
            krylov_dim: 60,
            check_threshold: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1");
        }
        for (name, v) in [
            ("tol_r", self.tol_r),
            ("tol_p", self.tol_p),
            ("tol_e", self.tol_e),
            ("step", self.step),
            ("step_floor", self.step_floor),
            ("armijo", self.armijo),
            ("handover", self.handover),
            ("theta_max", self.theta_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive (got {v})")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if self.krylov_dim < 1 || self.stall_window < 1 {
            return bad("krylov_dim and stall_window must be at least 1");
        }
        Ok(())
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub pohozaev: f64,
    pub residual: f64,
    pub alpha: f64,
    pub step: f64,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "iter,I,P,residual,alpha,step";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.iter, self.energy, self.pohozaev, self.residual, self.alpha, self.step
        )
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Field,
    pub report: EnergyReport,
    pub theta_history: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub iterations: usize,
    pub converged: bool,
    pub regime: Regime,
    pub symmetry: Symmetry,
    pub flags: Vec<String>,
    /// Compactness threshold `(s/3) S^{3/(2s)}` when it was evaluated.
    pub threshold: Option<f64>,
    /// Seconds.
    pub wall_clock: f64,
}

impl Solution {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

/// `(|k|^{2s} + 1)^{-1}`, the Sobolev preconditioner.
fn precondition(g: &Field, s: f64) -> Field {
    apply_radial_symbol(g, |k| 1.0 / (k.powf(2.0 * s) + 1.0))
}

fn l2(u: &Field) -> f64 {
    (dot(u.values(), u.values()) * u.grid().cell_volume()).sqrt()
}

fn row(iter: usize, r: &EnergyReport, step: f64) -> TraceRow {
    TraceRow {
        iter,
        energy: r.total,
        pohozaev: r.pohozaev,
        residual: r.residual,
        alpha: r.alpha,
        step,
    }
}

/// Gaussian of width `L/8` with mass `a`; in the supercritical regime it is
/// widened until its seminorm squared lies below `0.9 k_a` when a cap is given.
pub fn default_initial(grid: Grid, p: &Params, k_a: Option<f64>) -> Result<Field> {
    let sigma = grid.length() / 8.0;
    let u = mass_project(&gaussian(grid, sigma)?, p.a)?;
    let Some(k) = k_a.filter(|k| *k > 0.0 && k.is_finite()) else {
        return Ok(u);
    };
    let a = hs_seminorm_sq(&u, p.s)?;
    if a <= 0.9 * k {
        return Ok(u);
    }
    let widened = sigma * (a / (0.9 * k)).powf(0.5 / p.s);
    mass_project(&gaussian(grid, widened.min(grid.length() / 5.0))?, p.a)
}

fn gaussian(grid: Grid, sigma: f64) -> Result<Field> {
    Field::radial(grid, |r| (-0.5 * r * r / (sigma * sigma)).exp())
}

/// Projected descent of the truncated energy on the mass sphere.
pub fn minimize_truncated(
    model: &Model,
    u0: &Field,
    prof: &TruncationProfile,
    opts: &SolverOptions,
) -> Result<Solution> {
    opts.validate()?;
    let start = Instant::now();
    let p = *model.params();
    if p.regime() != Regime::Subcritical {
        return Err(Error::InvalidParams("truncated minimization requires q < 2 + 4s/3".into()));
    }
    let model = model.clone().positive_part(opts.positive);
    let sym = opts.symmetry;
    let mut u = mass_project(&sym.apply(u0), p.a)?;
    let mut st = model.state(&u)?;
    let mut e = model.truncated_energy_at(&st, prof);
    let mut eta = opts.step;
    let mut energies = vec![e];
    let mut trace = Vec::new();
    let mut flags = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it;
        let g = model.truncated_gradient_at(&st, prof);
        let gt = tangential(&g, &u);
        let res = l2(&gt) / l2(&u);
        let rep = model.report_at(&st);
        trace.push(TraceRow { energy: e, residual: res, ..row(it, &rep, eta) });
        let stalled = energies.len() > opts.stall_window
            && energies[energies.len() - 1 - opts.stall_window] - e <= opts.tol_e;
        if res <= opts.tol_r && stalled {
            converged = true;
            break;
        }
        let d = tangential(&precondition(&gt, p.s), &u).scaled(-1.0);
        let slope = -dot(gt.values(), d.values()) * u.grid().cell_volume();
        let mut accepted = None;
        while eta >= opts.step_floor {
            let trial = mass_project(&sym.apply(&u.axpy(eta, &d)), p.a)?;
            let ts = model.state(&trial)?;
            let et = model.truncated_energy_at(&ts, prof);
            if et <= e - opts.armijo * eta * slope {
                accepted = Some((trial, ts, et));
                break;
            }
            eta *= opts.backtrack;
        }
        let Some((nu, ns, ne)) = accepted else {
            if res <= opts.tol_r {
                converged = true;
            } else {
                flags.push("step floor reached".to_string());
            }
            break;
        };
        u = nu;
        st = ns;
        e = ne;
        energies.push(e);
        if st.coef.a.sqrt() > prof.r2 && !flags.iter().any(|f| f == "left truncation plateau") {
            flags.push("left truncation plateau".to_string());
        }
        eta = (eta / opts.backtrack).min(opts.step);
        iterations = it + 1;
    }
    let report = model.report_at(&st);
    if converged && report.residual > opts.tol_r {
        converged = false;
        flags.push("truncation active at limit".to_string());
    }
    if !converged && iterations + 1 >= opts.max_iter {
        flags.push("max_iter exceeded".to_string());
    }
    Ok(Solution {
        u,
        report,
        theta_history: Vec::new(),
        trace,
        iterations,
        converged,
        regime: Regime::Subcritical,
        symmetry: sym,
        flags,
        threshold: None,
        wall_clock: start.elapsed().as_secs_f64(),
    })
}

/// Dilates `u` to its fiber maximum; `None` when the maximum lies outside
/// the interpolation window or the dilated support leaves the box.
fn fiber_project(model: &Model, u: &Field, c: &FiberCoefficients, theta_max: f64) -> Result<Option<(f64, Field)>> {
    let p = model.params();
    let Ok((theta, _)) = fiber_maximum(c, p, COEFFICIENT_THETA_MAX) else {
        return Ok(None);
    };
    if theta.abs() > theta_max {
        return Ok(None);
    }
    match scale_with_limit(u, theta, theta_max) {
        Ok(f) => Ok(Some((theta, mass_project(&f, p.a)?))),
        Err(Error::DilationLeavesBox(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Repeated clamped dilations towards the fiber maximum of the seed.
fn initial_projection(model: &Model, u: &Field, theta_max: f64, thetas: &mut Vec<f64>) -> Result<Field> {
    let p = model.params();
    let mut u = u.clone();
    for _ in 0..20 {
        let c = model.coefficients(&u)?;
        if let Some((th, f)) = fiber_project(model, &u, &c, theta_max)? {
            thetas.push(th);
            return Ok(f);
        }
        let (theta, _) = fiber_maximum(&c, p, COEFFICIENT_THETA_MAX)?;
        let step = theta.clamp(-0.5 * theta_max, 0.5 * theta_max);
        u = mass_project(&scale_with_limit(&u, step, theta_max)?, p.a)?;
        thetas.push(step);
    }
    Err(Error::FiberMaxOutsideWindow(theta_max))
}

/// Pohozaev-constrained mountain-pass critical point.
pub fn ground_state_supercritical(model: &Model, u0: &Field, opts: &SolverOptions) -> Result<Solution> {
    opts.validate()?;
    let start = Instant::now();
    let p = *model.params();
    if p.regime() != Regime::Supercritical {
        return Err(Error::InvalidParams("mountain-pass solver requires q > 2 + 4s/3".into()));
    }
    let model = model.clone().positive_part(opts.positive);
    let mut flags = Vec::new();
    let mut trace = Vec::new();
    let mut thetas = Vec::new();

    let sym = opts.symmetry;
    let u_start = mass_project(&sym.apply(u0), p.a)?;
    let mut u = initial_projection(&model, &u_start, opts.theta_max, &mut thetas)?;
    let mut st = model.state(&u)?;
    let mut eta = opts.step;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let rep = model.report_at(&st);
        trace.push(row(iterations, &rep, eta));
        if rep.residual <= opts.handover {
            break;
        }
        let g = model.gradient_at(&st);
        let gt = tangential(&g, &u);
        let d = tangential(&precondition(&gt, p.s), &u).scaled(-1.0);
        let slope = -dot(gt.values(), d.values()) * u.grid().cell_volume();
        let mut accepted = None;
        while eta >= opts.step_floor {
            let trial = mass_project(&sym.apply(&u.axpy(eta, &d)), p.a)?;
            let tc = model.coefficients(&trial)?;
            if let Some((th, proj)) = fiber_project(&model, &trial, &tc, opts.theta_max)? {
                let ts = model.state(&proj)?;
                if p.energy_of(&ts.coef) <= rep.total - opts.armijo * eta * slope {
                    accepted = Some((th, proj, ts));
                    break;
                }
            }
            eta *= opts.backtrack;
        }
        iterations += 1;
        let Some((th, nu, ns)) = accepted else {
            break;
        };
        thetas.push(th);
        u = nu;
        st = ns;
        eta = (eta / opts.backtrack).min(opts.step);
    }

    let converged = if opts.newton_iter > 0 {
        let (nu, nst, ok) = newton_polish(&model, u, st, opts, &mut trace, &mut iterations)?;
        u = nu;
        st = nst;
        ok
    } else {
        let r = model.report_at(&st);
        r.residual <= opts.tol_r && r.pohozaev.abs() <= opts.tol_p * (1.0 + r.total.abs())
    };
    let report = model.report_at(&st);
    if !converged {
        if report.residual <= opts.tol_r {
            flags.push("pohozaev tolerance not met".to_string());
        } else {
            flags.push("residual tolerance not met".to_string());
        }
    }
    let threshold = if opts.check_threshold {
        let s_est = sobolev_constant_estimate(*model.grid(), p.s)?.value;
        let thr = p.s / 3.0 * s_est.powf(1.5 / p.s);
        if report.total >= thr {
            flags.push("above compactness threshold".to_string());
        }
        Some(thr)
    } else {
        None
    };
    Ok(Solution {
        u,
        report,
        theta_history: thetas,
        trace,
        iterations,
        converged,
        regime: Regime::Supercritical,
        symmetry: sym,
        flags,
        threshold,
        wall_clock: start.elapsed().as_secs_f64(),
    })
}

/// Damped Newton on `T (G(u) - alpha u) = 0` over the tangent space of the
/// sphere, with GMRES on `T (H - alpha) T` and the Sobolev preconditioner.
fn newton_polish(
    model: &Model,
    mut u: Field,
    mut st: State,
    opts: &SolverOptions,
    trace: &mut Vec<TraceRow>,
    iterations: &mut usize,
) -> Result<(Field, State, bool)> {
    let p = *model.params();
    let mut stale = 0;
    for _ in 0..opts.newton_iter {
        let rep = model.report_at(&st);
        if rep.residual <= opts.tol_r && rep.pohozaev.abs() <= opts.tol_p * (1.0 + rep.total.abs()) {
            return Ok((u, st, true));
        }
        // Rounding floor: further steps cannot change the Pohozaev value.
        if rep.residual <= RESIDUAL_FLOOR {
            break;
        }
        let alpha = rep.alpha;
        let r = tangential(&model.gradient_at(&st), &u);
        let rhs: Vec<f64> = r.values().iter().map(|v| -v).collect();
        let grid = *u.grid();
        let op = |v: &[f64]| -> Result<Vec<f64>> {
            let vf = tangential(&Field::new(grid, v.to_vec())?, &u);
            let hv = model.hessian_vec(&st, &vf)?.axpy(-alpha, &vf);
            Ok(tangential(&hv, &u).into_values())
        };
        let prec = |v: &[f64]| -> Result<Vec<f64>> {
            let vf = tangential(&Field::new(grid, v.to_vec())?, &u);
            Ok(tangential(&precondition(&vf, p.s), &u).into_values())
        };
        let rtol = (0.1 * rep.residual).clamp(1e-6, 1e-2);
        let delta = Field::new(grid, gmres(op, prec, &rhs, opts.krylov_dim, 2, rtol)?)?;
        let mut sigma = 1.0;
        let mut next = None;
        while sigma >= 1.0 / 64.0 {
            let trial = mass_project(&opts.symmetry.apply(&u.axpy(sigma, &delta)), p.a)?;
            let ts = model.state(&trial)?;
            let tr = model.report_at(&ts);
            if tr.residual < (1.0 - 1e-4 * sigma) * rep.residual {
                next = Some((trial, ts));
                break;
            }
            sigma *= 0.5;
        }
        *iterations += 1;
        match next {
            Some((nu, ns)) => {
                u = nu;
                st = ns;
                stale = 0;
            }
            None => {
                stale += 1;
                if stale >= 2 {
                    break;
                }
            }
        }
        trace.push(row(*iterations, &model.report_at(&st), sigma));
    }
    let rep = model.report_at(&st);
    let ok = rep.residual <= opts.tol_r && rep.pohozaev.abs() <= opts.tol_p * (1.0 + rep.total.abs());
    Ok((u, st, ok))
}

/// Restarted GMRES with right preconditioning, started from zero.
fn gmres(
    op: impl Fn(&[f64]) -> Result<Vec<f64>>,
    prec: impl Fn(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    restart: usize,
    cycles: usize,
    rtol: f64,
) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    for _ in 0..cycles {
        let ax = op(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = dot(&r, &r).sqrt();
        if beta <= rtol * bnorm {
            break;
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::new();
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for j in 0..restart {
            let zj = prec(&v[j])?;
            let mut w = op(&zj)?;
            z.push(zj);
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(&w, vi);
                h[i][j] = hij;
                w.iter_mut().zip(vi).for_each(|(wk, vk)| *wk -= hij * vk);
            }
            let wn = dot(&w, &w).sqrt();
            h[j + 1][j] = wn;
            for i in 0..j {
                let tmp = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = tmp;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            cs[j] = if denom == 0.0 { 1.0 } else { h[j][j] / denom };
            sn[j] = if denom == 0.0 { 0.0 } else { h[j + 1][j] / denom };
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k_used = j + 1;
            if g[j + 1].abs() <= rtol * bnorm || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wk| wk / wn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let acc: f64 = (i + 1..k_used).map(|l| h[i][l] * y[l]).sum();
            y[i] = (g[i] - acc) / h[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            x.iter_mut().zip(zi).for_each(|(xk, zk)| *xk += yi * zk);
        }
        if g[k_used].abs() <= rtol * bnorm {
            break;
        }
    }
    Ok(x)
}

/// Upper estimate of the mountain-pass level: minimum over seeds of the
/// fiber maximum, taken before and after each seed is flowed. The flow is
/// descent only (no Newton polish); a flow stopped by the box keeps the
/// seed's value.
pub fn mountain_pass_level_estimate(model: &Model, seeds: &[Field], opts: &SolverOptions) -> Result<f64> {
    if seeds.is_empty() {
        return Err(Error::EmptySeeds);
    }
    let p = *model.params();
    let opts = SolverOptions { newton_iter: 0, ..*opts };
    let fiber_max = |u: &Field| -> Result<f64> {
        let c = model.coefficients(u)?;
        Ok(fiber_maximum(&c, &p, COEFFICIENT_THETA_MAX)?.1)
    };
    let mut best = f64::INFINITY;
    for seed in seeds {
        let u = mass_project(seed, p.a)?;
        best = best.min(fiber_max(&u)?);
        match ground_state_supercritical(model, &u, &opts) {
            Ok(sol) => best = best.min(fiber_max(&sol.u)?),
            Err(Error::DilationLeavesBox(_) | Error::FiberMaxOutsideWindow(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// Initial field for one start of `multi_start` and the class it is flowed in.
#[derive(Debug, Clone)]
pub struct Seed {
    pub field: Field,
    pub symmetry: Symmetry,
}

/// Deterministic seeds cycling through Gaussians, radial sign-changing
/// profiles and profiles odd in `x` (flowed within the odd class), with
/// geometric widths jittered by a generator seeded with `seed`.
pub fn seeds(grid: Grid, a: f64, k: usize, seed: u64) -> Result<Vec<Seed>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (grid.length() / 32.0, grid.length() / 8.0);
    let rounds = k.div_ceil(3);
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let frac = if rounds > 1 { (j / 3) as f64 / (rounds - 1) as f64 } else { 0.5 };
        let sigma = lo * (hi / lo).powf(frac) * (1.0 + 0.05 * rng.gen_range(-1.0..1.0));
        let (u, symmetry) = match j % 3 {
            0 => (gaussian(grid, sigma)?, Symmetry::None),
            1 => (
                Field::radial(grid, |r| {
                    let z = r / sigma;
                    (1.0 - z * z / 1.5) * (-0.5 * z * z).exp()
                })?,
                Symmetry::None,
            ),
            _ => (
                Field::from_fn(grid, |x, y, z| {
                    x / sigma * (-0.5 * (x * x + y * y + z * z) / (sigma * sigma)).exp()
                })?,
                Symmetry::OddX,
            ),
        };
        out.push(Seed { field: mass_project(&symmetry.apply(&u), a)?, symmetry });
    }
    Ok(out)
}

/// `min(||u - v||_2, ||u + v||_2)`: solutions are compared modulo sign.
pub fn distance(u: &Field, v: &Field) -> f64 {
    l2(&u.axpy(-1.0, v)).min(l2(&u.axpy(1.0, v)))
}

/// Flows `k` deterministic seeds with the regime's solver and merges
/// duplicates; the result is sorted by energy.
pub fn multi_start(
    model: &Model,
    k: usize,
    prof: Option<&TruncationProfile>,
    opts: &SolverOptions,
) -> Result<Vec<Solution>> {
    if k < 1 {
        return Err(Error::InvalidParams("multi_start needs k >= 1".into()));
    }
    let p = *model.params();
    let mode = match opts.mode {
        Some(m) => m,
        None => Mode::for_regime(p.regime())?,
    };
    let prof = match (mode, prof) {
        (Mode::SubcriticalMinimize, None) => {
            return Err(Error::InvalidParams("subcritical multi_start needs a truncation profile".into()))
        }
        (_, prof) => prof,
    };
    let seeds = seeds(*model.grid(), p.a, k, opts.seed)?;
    let solved: Vec<Result<Solution>> = seeds
        .par_iter()
        .map(|sd| {
            let o = SolverOptions { symmetry: sd.symmetry, ..*opts };
            match mode {
                Mode::SubcriticalMinimize => {
                    minimize_truncated(model, &sd.field, prof.expect("checked"), &o)
                }
                Mode::SupercriticalMountainPass => ground_state_supercritical(model, &sd.field, &o),
            }
        })
        .collect();
    let mut all = solved.into_iter().collect::<Result<Vec<_>>>()?;
    all.sort_by(|x, y| x.report.total.total_cmp(&y.report.total));
    Ok(dedup(all, 1e-2 * p.a))
}

/// Keeps the lowest-energy representative of each cluster (input sorted by energy).
pub fn dedup(sorted: Vec<Solution>, tol: f64) -> Vec<Solution> {
    let mut kept: Vec<Solution> = Vec::new();
    for s in sorted {
        if kept.iter().all(|k| distance(&k.u, &s.u) >= tol) {
            kept.push(s);
        }
    }
    kept
}
