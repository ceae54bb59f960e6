//! Energy functional on the mass sphere, its gradient and Hessian action,
//! the Pohozaev functional, Lagrange multipliers, named constants and the
//! truncation used in the mass-subcritical regime.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fiber::FiberCoefficients;
use crate::grid::{Field, Grid};
use crate::spectral::{
    abs_pow, dot, inner_unchecked, power_integral, FreeSpaceKernel, RieszConstant,
    RieszMethod, Symbol,
};
use crate::fft;

/// Problem tuple `(s, t, q, a, mu, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub s: f64,
    pub t: f64,
    pub q: f64,
    pub a: f64,
    pub mu: f64,
    pub lambda: f64,
}

/// Position of `q` relative to the mass-critical exponent `2 + 4s/3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Subcritical => "L2-subcritical",
            Regime::Critical => "L2-critical",
            Regime::Supercritical => "L2-supercritical",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn two_star(s: f64) -> f64 {
    6.0 / (3.0 - 2.0 * s)
}

pub fn qbar(s: f64) -> f64 {
    2.0 + 4.0 * s / 3.0
}

pub fn delta_qs(q: f64, s: f64) -> f64 {
    3.0 * (q - 2.0) / (2.0 * q * s)
}

/// Classifies `q` by the sign of `q delta_{q,s} - 2`.
pub fn regime_of(q: f64, s: f64) -> Regime {
    let x = q * delta_qs(q, s);
    if x < 2.0 {
        Regime::Subcritical
    } else if x > 2.0 {
        Regime::Supercritical
    } else {
        Regime::Critical
    }
}

impl Params {
    pub fn new(s: f64, t: f64, q: f64, a: f64, mu: f64, lambda: f64) -> Result<Self> {
        let p = Self { s, t, q, a, mu, lambda };
        p.validate()?;
        Ok(p)
    }

    /// Checks the standing assumptions. `mu = 0` and `lambda = 0` are
    /// accepted as degenerate limits.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        let all = [self.s, self.t, self.q, self.a, self.mu, self.lambda];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite".into());
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return bad(format!("s = {} must lie in (0, 1)", self.s));
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return bad(format!("t = {} must lie in (0, 1)", self.t));
        }
        if 2.0 * self.s + 2.0 * self.t <= 3.0 {
            return bad(format!(
                "requires 2s+2t > 3 (got 2s+2t = {})",
                2.0 * self.s + 2.0 * self.t
            ));
        }
        let ts = two_star(self.s);
        if !(self.q > 2.0 && self.q < ts) {
            return bad(format!("q must lie in (2, 2*_s) = (2, {ts}) (got q = {})", self.q));
        }
        if !(self.a > 0.0) {
            return bad(format!("a = {} must be positive", self.a));
        }
        if self.mu < 0.0 {
            return bad(format!("mu = {} must be nonnegative", self.mu));
        }
        if self.lambda < 0.0 {
            return bad(format!("lambda = {} must be nonnegative", self.lambda));
        }
        Ok(())
    }

    pub fn two_star(&self) -> f64 {
        two_star(self.s)
    }

    pub fn qbar(&self) -> f64 {
        qbar(self.s)
    }

    pub fn delta(&self) -> f64 {
        delta_qs(self.q, self.s)
    }

    pub fn regime(&self) -> Regime {
        regime_of(self.q, self.s)
    }

    pub fn with_mu(self, mu: f64) -> Self {
        Self { mu, ..self }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    /// `I = A/2 + lambda B/4 - mu C/q - D/2*`.
    pub fn energy_of(&self, c: &FiberCoefficients) -> f64 {
        0.5 * c.a + 0.25 * self.lambda * c.b - self.mu * c.c / self.q - c.d / self.two_star()
    }

    /// `P = s A + (3-2t)/4 lambda B - s mu delta C - s D`.
    pub fn pohozaev_of(&self, c: &FiberCoefficients) -> f64 {
        let s = self.s;
        s * c.a + (3.0 - 2.0 * self.t) / 4.0 * self.lambda * c.b
            - s * self.mu * self.delta() * c.c
            - s * c.d
    }

    /// Multiplier from pairing the equation with `u`; `mass_sq = ||u||_2^2`.
    pub fn alpha_pairing_of(&self, c: &FiberCoefficients, mass_sq: f64) -> f64 {
        (c.a + self.lambda * c.b - self.mu * c.c - c.d) / mass_sq
    }

    /// Multiplier obtained by eliminating the kinetic and critical terms
    /// with `P = 0`; agrees with the pairing value only on the manifold.
    pub fn alpha_pohozaev_of(&self, c: &FiberCoefficients, mass_sq: f64) -> f64 {
        let (s, t, q) = (self.s, self.t, self.q);
        let rhs = self.lambda * (2.0 * t + 4.0 * s - 3.0) / 4.0 * c.b
            + (q * (3.0 - 2.0 * s) - 6.0) / (2.0 * q) * self.mu * c.c;
        rhs / (s * mass_sq)
    }

    /// Threshold on `mu` above which the pairing multiplier is negative,
    /// with the two integrals taken from the current field.
    pub fn mu1_star_of(&self, c: &FiberCoefficients) -> f64 {
        let (s, t, q) = (self.s, self.t, self.q);
        q * self.lambda * (2.0 * t + 4.0 * s - 3.0) * c.b / (2.0 * (6.0 - q * (3.0 - 2.0 * s)) * c.c)
    }
}

/// How the multiplier is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultiplierMethod {
    #[default]
    Pairing,
    PohozaevFormula,
}

/// The four energy terms and the derived scalars at a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub poisson: f64,
    pub subcrit: f64,
    pub crit: f64,
    pub total: f64,
    pub pohozaev: f64,
    pub alpha: f64,
    pub alpha_pohozaev: f64,
    pub residual: f64,
    pub mass: f64,
}

impl EnergyReport {
    pub const CSV_HEADER: &'static str =
        "kinetic,poisson,subcrit,crit,total,pohozaev,alpha,alpha_pohozaev,residual,mass";

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.pairs() {
            let _ = writeln!(out, "{k}={v:.17e}");
        }
        out
    }

    pub fn csv_row(&self) -> String {
        self.pairs().iter().map(|(_, v)| format!("{v:.17e}")).collect::<Vec<_>>().join(",")
    }

    fn pairs(&self) -> [(&'static str, f64); 10] {
        [
            ("kinetic", self.kinetic),
            ("poisson", self.poisson),
            ("subcrit", self.subcrit),
            ("crit", self.crit),
            ("total", self.total),
            ("pohozaev", self.pohozaev),
            ("alpha", self.alpha),
            ("alpha_pohozaev", self.alpha_pohozaev),
            ("residual", self.residual),
            ("mass", self.mass),
        ]
    }
}

/// Everything computed at one field: the integrals, `(-Delta)^s u` and the
/// potential. Reused by energy, gradient and Hessian evaluations.
#[derive(Debug, Clone)]
pub struct State {
    pub u: Field,
    pub coef: FiberCoefficients,
    pub mass_sq: f64,
    pub lap: Field,
    pub phi: Field,
}

#[derive(Debug, Clone)]
enum Potential {
    Periodic(Symbol),
    FreeSpace(FreeSpaceKernel),
}

/// Discretized functional on a fixed grid with precomputed symbols.
#[derive(Debug, Clone)]
pub struct Model {
    grid: Grid,
    params: Params,
    kinetic: Symbol,
    potential: Potential,
    riesz_scale: f64,
    positive_part: bool,
}

impl Model {
    pub fn new(grid: Grid, params: Params) -> Result<Self> {
        Self::with_riesz(grid, params, RieszMethod::Periodic, RieszConstant::Standard)
    }

    pub fn with_riesz(
        grid: Grid,
        params: Params,
        method: RieszMethod,
        constant: RieszConstant,
    ) -> Result<Self> {
        params.validate()?;
        let potential = match method {
            RieszMethod::Periodic => Potential::Periodic(Symbol::power(grid, -2.0 * params.t)),
            RieszMethod::FreeSpace => Potential::FreeSpace(FreeSpaceKernel::new(grid, params.t)),
        };
        Ok(Self {
            grid,
            params,
            kinetic: Symbol::power(grid, 2.0 * params.s),
            potential,
            riesz_scale: constant.relative_to_standard(params.t)?,
            positive_part: false,
        })
    }

    /// Uses `u^+` in the two power nonlinearities.
    pub fn positive_part(mut self, on: bool) -> Self {
        self.positive_part = on;
        self
    }

    pub fn is_positive_part(&self) -> bool {
        self.positive_part
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Same operators with a different `(a, mu, lambda)`; `s`, `t` must match.
    pub fn reparam(&self, params: Params) -> Result<Self> {
        params.validate()?;
        if params.s != self.params.s || params.t != self.params.t {
            return Err(Error::InvalidParams("reparam may not change s or t".into()));
        }
        Ok(Self { params, ..self.clone() })
    }

    /// `phi` solving `(-Delta)^t phi = w`.
    pub fn potential_of(&self, w: &Field) -> Result<Field> {
        let phi = match &self.potential {
            Potential::Periodic(sym) => sym.apply(w),
            Potential::FreeSpace(k) => k.convolve(w)?,
        };
        Ok(if self.riesz_scale == 1.0 { phi } else { phi.scaled(self.riesz_scale) })
    }

    #[inline]
    fn nl(&self, v: f64) -> f64 {
        if self.positive_part {
            v.max(0.0)
        } else {
            v
        }
    }

    fn power_term(&self, u: &Field, p: f64) -> f64 {
        if self.positive_part {
            power_integral(&u.map(|v| v.max(0.0)), p)
        } else {
            power_integral(u, p)
        }
    }

    pub fn state(&self, u: &Field) -> Result<State> {
        u.ensure_finite()?;
        if *u.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let n = self.grid.n();
        let mut hat = fft::forward_real(u.values(), n);
        let a = self.kinetic.quadratic_form(&hat);
        self.kinetic.apply_hat(&mut hat);
        let lap = Field::from_vec_unchecked(self.grid, fft::inverse_real(hat, n));
        let phi = self.potential_of(&u.mul(u))?;
        let b = inner_unchecked(&phi, &u.mul(u));
        let p = &self.params;
        let c = self.power_term(u, p.q);
        let d = self.power_term(u, p.two_star());
        let mass_sq = inner_unchecked(u, u);
        Ok(State { u: u.clone(), coef: FiberCoefficients { a, b, c, d }, mass_sq, lap, phi })
    }

    pub fn coefficients(&self, u: &Field) -> Result<FiberCoefficients> {
        Ok(self.state(u)?.coef)
    }

    /// Unconstrained gradient `(-Delta)^s u + lambda phi u - mu |u|^{q-2}u - |u|^{2*-2}u`.
    pub fn gradient_at(&self, st: &State) -> Field {
        let p = &self.params;
        let (q, ts) = (p.q, p.two_star());
        let values = st
            .u
            .values()
            .iter()
            .zip(st.lap.values())
            .zip(st.phi.values())
            .map(|((&u, &l), &f)| {
                let w = self.nl(u);
                let aw = w.abs();
                l + p.lambda * f * u - p.mu * abs_pow(aw, q - 2.0) * w - abs_pow(aw, ts - 2.0) * w
            })
            .collect();
        Field::from_vec_unchecked(self.grid, values)
    }

    /// Hessian of the energy applied to `v`.
    pub fn hessian_vec(&self, st: &State, v: &Field) -> Result<Field> {
        let p = &self.params;
        let (q, ts) = (p.q, p.two_star());
        let lap_v = self.kinetic.apply(v);
        let phi_uv = if p.lambda != 0.0 { Some(self.potential_of(&st.u.mul(v))?) } else { None };
        let values = (0..self.grid.len())
            .map(|i| {
                let u = st.u.values()[i];
                let vi = v.values()[i];
                let w = self.nl(u);
                let active = !self.positive_part || u > 0.0;
                let aw = w.abs();
                let mut h = lap_v.values()[i] + p.lambda * st.phi.values()[i] * vi;
                if let Some(f) = &phi_uv {
                    h += 2.0 * p.lambda * f.values()[i] * u;
                }
                if active {
                    h -= p.mu * (q - 1.0) * abs_pow(aw, q - 2.0) * vi;
                    h -= (ts - 1.0) * abs_pow(aw, ts - 2.0) * vi;
                }
                h
            })
            .collect();
        Ok(Field::from_vec_unchecked(self.grid, values))
    }

    pub fn report_at(&self, st: &State) -> EnergyReport {
        let p = &self.params;
        let c = &st.coef;
        let alpha = p.alpha_pairing_of(c, st.mass_sq);
        let g = self.gradient_at(st);
        EnergyReport {
            kinetic: 0.5 * c.a,
            poisson: 0.25 * p.lambda * c.b,
            subcrit: p.mu * c.c / p.q,
            crit: c.d / p.two_star(),
            total: p.energy_of(c),
            pohozaev: p.pohozaev_of(c),
            alpha,
            alpha_pohozaev: p.alpha_pohozaev_of(c, st.mass_sq),
            residual: residual_norm(&g, &st.u, alpha, st.mass_sq),
            mass: st.mass_sq.sqrt(),
        }
    }

    pub fn energy(&self, u: &Field) -> Result<EnergyReport> {
        Ok(self.report_at(&self.state(u)?))
    }

    pub fn gradient(&self, u: &Field) -> Result<Field> {
        Ok(self.gradient_at(&self.state(u)?))
    }

    pub fn pohozaev(&self, u: &Field) -> Result<f64> {
        Ok(self.params.pohozaev_of(&self.coefficients(u)?))
    }

    pub fn lagrange_multiplier(&self, u: &Field, method: MultiplierMethod) -> Result<f64> {
        let st = self.state(u)?;
        if st.mass_sq == 0.0 {
            return Err(Error::ZeroField);
        }
        Ok(match method {
            MultiplierMethod::Pairing => self.params.alpha_pairing_of(&st.coef, st.mass_sq),
            MultiplierMethod::PohozaevFormula => self.params.alpha_pohozaev_of(&st.coef, st.mass_sq),
        })
    }

    /// `||G(u) - alpha u||_2 / ||u||_2`.
    pub fn residual(&self, u: &Field, alpha: f64) -> Result<f64> {
        let st = self.state(u)?;
        if st.mass_sq == 0.0 {
            return Err(Error::ZeroField);
        }
        Ok(residual_norm(&self.gradient_at(&st), u, alpha, st.mass_sq))
    }

    /// Energy with the critical term weighted by `tau(||(-Delta)^{s/2} u||_2)`.
    pub fn truncated_energy_at(&self, st: &State, prof: &TruncationProfile) -> f64 {
        let p = &self.params;
        let c = &st.coef;
        0.5 * c.a + 0.25 * p.lambda * c.b - p.mu * c.c / p.q
            - prof.tau(c.a.sqrt()) * c.d / p.two_star()
    }

    /// Gradient of the truncated energy.
    pub fn truncated_gradient_at(&self, st: &State, prof: &TruncationProfile) -> Field {
        let p = &self.params;
        let r = st.coef.a.sqrt();
        let tau = prof.tau(r);
        let dtau = prof.tau_prime(r);
        let kin = if r > 0.0 { 1.0 - dtau * st.coef.d / (p.two_star() * r) } else { 1.0 };
        let (q, ts) = (p.q, p.two_star());
        let values = st
            .u
            .values()
            .iter()
            .zip(st.lap.values())
            .zip(st.phi.values())
            .map(|((&u, &l), &f)| {
                let w = self.nl(u);
                let aw = w.abs();
                kin * l + p.lambda * f * u
                    - p.mu * abs_pow(aw, q - 2.0) * w
                    - tau * abs_pow(aw, ts - 2.0) * w
            })
            .collect();
        Field::from_vec_unchecked(self.grid, values)
    }

    pub fn truncated_energy(&self, u: &Field, prof: &TruncationProfile) -> Result<f64> {
        Ok(self.truncated_energy_at(&self.state(u)?, prof))
    }
}

fn residual_norm(g: &Field, u: &Field, alpha: f64, mass_sq: f64) -> f64 {
    let r = g.axpy(-alpha, u);
    (inner_unchecked(&r, &r) / mass_sq).sqrt()
}

/// Projection of `g` onto the tangent space `{v : <v, u> = 0}`.
pub fn tangential(g: &Field, u: &Field) -> Field {
    let c = dot(g.values(), u.values()) / dot(u.values(), u.values());
    g.axpy(-c, u)
}

pub fn energy(u: &Field, p: &Params) -> Result<EnergyReport> {
    Model::new(*u.grid(), *p)?.energy(u)
}

pub fn gradient(u: &Field, p: &Params) -> Result<Field> {
    Model::new(*u.grid(), *p)?.gradient(u)
}

pub fn pohozaev(u: &Field, p: &Params) -> Result<f64> {
    Model::new(*u.grid(), *p)?.pohozaev(u)
}

pub fn lagrange_multiplier(u: &Field, p: &Params, method: MultiplierMethod) -> Result<f64> {
    Model::new(*u.grid(), *p)?.lagrange_multiplier(u, method)
}

pub fn residual(u: &Field, alpha: f64, p: &Params) -> Result<f64> {
    Model::new(*u.grid(), *p)?.residual(u, alpha)
}

/// Gagliardo-Nirenberg quotient `||u||_q^q / (A^{q delta/2} ||u||_2^{q(1-delta)})`.
pub fn gn_ratio(u: &Field, q: f64, s: f64) -> Result<f64> {
    let a = crate::spectral::hs_seminorm_sq(u, s)?;
    let m = crate::spectral::lp_norm(u, 2.0)?;
    let d = delta_qs(q, s);
    Ok(power_integral(u, q) / (a.powf(0.5 * q * d) * m.powf(q * (1.0 - d))))
}

/// Constants entering the hypotheses, closed-form or estimated on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub two_star: f64,
    pub qbar: f64,
    pub delta_qs: f64,
    /// Sharp Sobolev constant estimated over the bubble family.
    pub s_est: f64,
    /// Spread of the Rayleigh quotient over the family.
    pub s_spread: f64,
    /// Largest observed `int phi u^2 / ||u||_{12/(3+2t)}^4` over Gaussians.
    pub gamma_t_est: f64,
    /// `C(q,s) = S^{-delta/2}` as printed for the GN inequality.
    pub c_qs: f64,
    pub d_st: f64,
    pub d1: f64,
    pub d2: f64,
    pub c_t: f64,
}

impl DerivedConstants {
    /// Closed-form part given the two estimated constants.
    pub fn from_estimates(p: &Params, s_est: f64, s_spread: f64, gamma_t_est: f64) -> Self {
        let (s, t, q) = (p.s, p.t, p.q);
        let ts = two_star(s);
        let d = delta_qs(q, s);
        let qd = q * d;
        let d_st = ((3.0 - 2.0 * t) * p.lambda * gamma_t_est / (2.0 * s))
            .powf((qd - 2.0) * s / (s * ts + 2.0 * t - 3.0));
        let d1 = 2f64.powf(-(qd - 2.0) / (ts - 2.0))
            * s_est.powf(3.0 * (ts - q) / (2.0 * s * (ts - 2.0)));
        let d2 = s_est.powf(3.0 * ((ts - 2.0) - q * (1.0 - d)) / (2.0 * s * (ts - 2.0))) / d_st;
        Self {
            two_star: ts,
            qbar: qbar(s),
            delta_qs: d,
            s_est,
            s_spread,
            gamma_t_est,
            c_qs: s_est.powf(-0.5 * d),
            d_st,
            d1,
            d2,
            c_t: RieszConstant::Standard.value(t).unwrap_or(f64::NAN),
        }
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (k, v) in [
            ("two_star", self.two_star),
            ("qbar", self.qbar),
            ("delta_qs", self.delta_qs),
            ("S_est", self.s_est),
            ("S_spread", self.s_spread),
            ("Gamma_t_est", self.gamma_t_est),
            ("C_qs", self.c_qs),
            ("D_st", self.d_st),
            ("D1", self.d1),
            ("D2", self.d2),
            ("c_t", self.c_t),
        ] {
            let _ = writeln!(out, "{k}={v:.12e}");
        }
        out
    }
}

/// Largest HLS ratio over a family of Gaussians resolved on `grid`, using
/// the free-space potential.
pub fn hls_ratio_estimate(grid: Grid, t: f64) -> Result<f64> {
    let l = grid.length();
    let h = grid.spacing();
    let r = 12.0 / (3.0 + 2.0 * t);
    let kernel = FreeSpaceKernel::new(grid, t);
    let mut best = 0.0f64;
    for frac in [0.04, 0.06, 0.08, 0.1] {
        let sigma = (frac * l).max(2.0 * h);
        let u = Field::radial(grid, |x| (-0.5 * x * x / (sigma * sigma)).exp())?;
        let w = u.mul(&u);
        let phi = kernel.convolve(&w)?;
        let b = inner_unchecked(&phi, &w);
        let norm = power_integral(&u, r).powf(1.0 / r);
        best = best.max(b / norm.powi(4));
    }
    Ok(best)
}

/// Estimated constants for `p` on `grid`.
pub fn derived_constants(p: &Params, grid: Grid) -> Result<DerivedConstants> {
    p.validate()?;
    let sob = crate::bubbles::sobolev_constant_estimate(grid, p.s)?;
    let gamma = hls_ratio_estimate(grid, p.t)?;
    Ok(DerivedConstants::from_estimates(p, sob.value, sob.spread, gamma))
}

/// Mountain-pass base-set constants: seminorm cap `K_a` and the mass bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub k_a: f64,
    pub a_tilde: f64,
}

pub fn geometry_constants(p: &Params, c: &DerivedConstants) -> Geometry {
    let (s, t, q, mu, lam) = (p.s, p.t, p.q, p.mu, p.lambda);
    let ts = c.two_star;
    let g = c.gamma_t_est;
    let e1 = (6.0 - q * (3.0 - 2.0 * s)) / (2.0 * (4.0 * s + 2.0 * t - 3.0));
    let gamma2 = 4.0 * s * (4.0 * s + 2.0 * t - 3.0)
        / ((2.0 * t + 2.0 * s - 3.0) * (6.0 - q * (3.0 - 2.0 * s))
            + (3.0 * (q - 2.0) - 4.0 * s) * (4.0 * s + 2.0 * t - 3.0));
    let first = (q * (16.0 * lam * g).powf(e1)
        / (16.0 * mu * 2f64.powf(3.0 * (q - 2.0) / (4.0 * s)) * c.c_qs))
        .powf(gamma2);
    let second =
        (ts * c.s_est.powf(0.5 * ts) / (2f64.powf(0.5 * ts) * 16.0)).powf(2.0 / (ts - 2.0));
    let k_a = first.min(second);
    let a_tilde = (k_a.powf((2.0 * t + 2.0 * s - 3.0) / (2.0 * s)) / (16.0 * lam * g))
        .powf(s / (4.0 * s + 2.0 * t - 3.0));
    Geometry { k_a, a_tilde }
}

/// Which hypotheses hold for a parameter tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    pub smallness_lhs: f64,
    pub smallness_rhs: f64,
    pub smallness_holds: bool,
    pub beta: f64,
    pub mass_window_max: f64,
    pub mass_window_holds: bool,
    pub geometry: Geometry,
    pub applicable: &'static str,
}

impl RegimeReport {
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "regime={}", self.regime);
        let _ = writeln!(out, "smallness_lhs={:.12e}", self.smallness_lhs);
        let _ = writeln!(out, "smallness_rhs={:.12e}", self.smallness_rhs);
        let _ = writeln!(
            out,
            "smallness={}",
            if self.smallness_holds { "SATISFIED" } else { "VIOLATED" }
        );
        let _ = writeln!(out, "beta={:.12e}", self.beta);
        let _ = writeln!(out, "mass_window_max={:.12e}", self.mass_window_max);
        let _ = writeln!(
            out,
            "mass_window={}",
            if self.mass_window_holds { "SATISFIED" } else { "VIOLATED" }
        );
        let _ = writeln!(out, "K_a={:.12e}", self.geometry.k_a);
        let _ = writeln!(out, "a_tilde={:.12e}", self.geometry.a_tilde);
        let _ = writeln!(out, "applicable={}", self.applicable);
        out
    }

    pub const CSV_HEADER: &'static str =
        "regime,smallness_lhs,smallness_rhs,smallness,beta,mass_window_max,mass_window,K_a,a_tilde,applicable";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.12e},{:.12e},{},{:.12e},{:.12e},{},{:.12e},{:.12e},{}",
            self.regime,
            self.smallness_lhs,
            self.smallness_rhs,
            self.smallness_holds,
            self.beta,
            self.mass_window_max,
            self.mass_window_holds,
            self.geometry.k_a,
            self.geometry.a_tilde,
            self.applicable
        )
    }
}

/// Left and right sides of the supercritical smallness condition on `(mu, a)`.
pub fn smallness_sides(p: &Params, c: &DerivedConstants) -> (f64, f64) {
    let (s, t, q, a) = (p.s, p.t, p.q, p.a);
    let d = c.delta_qs;
    let ts = c.two_star;
    let e2 = ((q - 2.0) * 2.0 * t + 2.0 * s * (ts - 4.0)) / (s * ts + 2.0 * t - 3.0);
    let lhs = p.mu * d * a.powf(q * (1.0 - d)).max(a.powf(e2));
    (lhs, c.d1.min(c.d2))
}

/// `beta` default: half the largest `mu a^{q(1-delta)}` for which the
/// truncation hump exists.
pub fn default_beta(p: &Params, c: &DerivedConstants) -> f64 {
    0.5 * critical_beta(p, c)
}

/// Supremum of `mu a^{q(1-delta)}` for which `g` has a positive hump.
pub fn critical_beta(p: &Params, c: &DerivedConstants) -> f64 {
    let m = p.q * c.delta_qs;
    let ts = c.two_star;
    if m >= 2.0 {
        return 0.0;
    }
    let e = c.s_est.powf(-0.5 * ts) / ts;
    // max_r (r^2/2 - e r^{2*}) r^{-m}, attained where its derivative vanishes.
    let r = ((2.0 - m) / (2.0 * e * (ts - m))).powf(1.0 / (ts - 2.0));
    let h = (0.5 * r * r - e * r.powf(ts)) * r.powf(-m);
    p.q / c.c_qs * h
}

pub fn check_theorem_hypotheses(
    p: &Params,
    c: &DerivedConstants,
    beta: Option<f64>,
) -> RegimeReport {
    let regime = p.regime();
    let (lhs, rhs) = smallness_sides(p, c);
    let beta = beta.unwrap_or_else(|| default_beta(p, c));
    let d = c.delta_qs;
    let exponent = 1.0 / (p.q * (1.0 - d));
    let mass_window_max = if p.mu > 0.0 { (beta / p.mu).powf(exponent) } else { f64::INFINITY };
    let mass_window_holds = regime == Regime::Subcritical && p.a < mass_window_max;
    let smallness_holds = lhs < rhs;
    let applicable = match regime {
        Regime::Subcritical if mass_window_holds => "subcritical-multiplicity",
        Regime::Supercritical if smallness_holds => "supercritical-ground-state",
        _ => "none",
    };
    RegimeReport {
        regime,
        smallness_lhs: lhs,
        smallness_rhs: rhs,
        smallness_holds,
        beta,
        mass_window_max,
        mass_window_holds,
        geometry: geometry_constants(p, c),
        applicable,
    }
}

/// Lower bound `g` of the energy in terms of `r = ||(-Delta)^{s/2}u||_2`
/// and the smooth cutoff `tau` between its two positive roots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationProfile {
    pub r1: f64,
    pub r2: f64,
    pub beta: f64,
    pub r_peak: f64,
    pub g_peak: f64,
    /// `r^2/2 - S^{-2*/2} r^{2*}/2* >= 0` on `[0, R1]`.
    pub side_positive: bool,
    /// `R1 < S^{3/(4s)}`.
    pub side_below_sobolev: bool,
    coef_mid: f64,
    coef_crit: f64,
    m: f64,
    two_star: f64,
}

impl TruncationProfile {
    pub fn g(&self, r: f64) -> f64 {
        0.5 * r * r - self.coef_mid * r.powf(self.m) - self.coef_crit * r.powf(self.two_star)
    }

    pub fn g_tilde(&self, r: f64) -> f64 {
        0.5 * r * r - self.coef_mid * r.powf(self.m) - self.tau(r) * self.coef_crit * r.powf(self.two_star)
    }

    /// C^2 smoothstep from 1 on `[0, R1]` to 0 on `[R2, inf)`.
    pub fn tau(&self, r: f64) -> f64 {
        if r <= self.r1 {
            1.0
        } else if r >= self.r2 {
            0.0
        } else {
            let x = (r - self.r1) / (self.r2 - self.r1);
            1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
        }
    }

    pub fn tau_prime(&self, r: f64) -> f64 {
        if r <= self.r1 || r >= self.r2 {
            0.0
        } else {
            let w = self.r2 - self.r1;
            let x = (r - self.r1) / w;
            -30.0 * x * x * (1.0 - x) * (1.0 - x) / w
        }
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Locates `R1 < R2` bounding the positive hump of `g`.
pub fn truncation_profile(
    p: &Params,
    c: &DerivedConstants,
    beta: Option<f64>,
) -> Result<TruncationProfile> {
    if p.regime() != Regime::Subcritical {
        return Err(Error::InvalidParams("truncation requires q < 2 + 4s/3".into()));
    }
    let beta = beta.unwrap_or_else(|| default_beta(p, c));
    let d = c.delta_qs;
    let load = p.mu * p.a.powf(p.q * (1.0 - d));
    if load > beta {
        return Err(Error::TruncationWindow);
    }
    let ts = c.two_star;
    let m = p.q * d;
    let coef_mid = p.mu / p.q * p.a.powf(p.q * (1.0 - d)) * c.c_qs;
    let coef_crit = c.s_est.powf(-0.5 * ts) / ts;
    let g = |r: f64| 0.5 * r * r - coef_mid * r.powf(m) - coef_crit * r.powf(ts);
    // g < 0 beyond the zero of r^2/2 - coef_crit r^{2*}; scan log-spaced
    // points below it for the peak, then refine by golden section.
    let r_end = (0.5 / coef_crit).powf(1.0 / (ts - 2.0));
    let samples = 4000;
    let lo_log = (r_end * 1e-12).ln();
    let hi_log = r_end.ln();
    let at = |i: usize| (lo_log + (hi_log - lo_log) * i as f64 / samples as f64).exp();
    let best = (0..=samples).max_by(|&i, &j| g(at(i)).total_cmp(&g(at(j)))).unwrap_or(0);
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(samples)));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if g(x1) < g(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    let r_peak = 0.5 * (a + b);
    let g_peak = g(r_peak);
    if !(g_peak > 0.0) {
        return Err(Error::TruncationWindow);
    }
    let r1 = bisect(g, at(0), r_peak);
    let r2 = bisect(g, r_peak, r_end);
    let side_positive = 0.5 * r1 * r1 - coef_crit * r1.powf(ts) >= 0.0;
    let side_below_sobolev = r1 < c.s_est.powf(3.0 / (4.0 * p.s));
    Ok(TruncationProfile {
        r1,
        r2,
        beta,
        r_peak,
        g_peak,
        side_positive,
        side_below_sobolev,
        coef_mid,
        coef_crit,
        m,
        two_star: ts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(grid: Grid, sigma: f64, amp: f64) -> Field {
        Field::radial(grid, |r| amp * (-0.5 * r * r / (sigma * sigma)).exp()).unwrap()
    }

    #[test]
    fn params_validation_messages() {
        let e = Params::new(0.4, 0.5, 2.5, 1.0, 1.0, 1.0).unwrap_err();
        assert!(e.to_string().contains("requires 2s+2t > 3"));
        let e = Params::new(0.9, 0.9, 7.0, 1.0, 1.0, 1.0).unwrap_err();
        assert!(e.to_string().contains("q must lie in (2, 2*_s)"));
        assert!(Params::new(0.8, 0.8, 4.0, 1.0, 1.0, 1e-3).is_ok());
        let e = Params::new(0.6, 0.8, 4.0, 1.0, 1.0, 1e-3).unwrap_err();
        assert!(e.to_string().contains("requires 2s+2t > 3"));
    }

    #[test]
    fn exponent_identities() {
        assert_eq!(two_star(0.5), 3.0);
        assert!((delta_qs(3.0, 0.75) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(qbar(0.75), 3.0);
        assert!((4.0 * delta_qs(4.0, 0.5) - 6.0).abs() < 1e-14);
        assert_eq!(regime_of(4.0, 0.5), Regime::Supercritical);
        assert_eq!(regime_of(3.0, 0.75), Regime::Critical);
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let g = Grid::new(16, 8.0).unwrap();
        let p = Params::new(0.8, 0.8, 4.0, 1.0, 1.0, 1.0).unwrap();
        let m = Model::new(g, p).unwrap();
        let st = m.state(&Field::zeros(g)).unwrap();
        assert_eq!(p.energy_of(&st.coef), 0.0);
        assert_eq!(m.gradient_at(&st).max_abs(), 0.0);
        assert_eq!(p.pohozaev_of(&st.coef), 0.0);
        assert_eq!(m.lagrange_multiplier(&Field::zeros(g), MultiplierMethod::Pairing), Err(Error::ZeroField));
    }

    #[test]
    fn report_total_is_sum_of_terms() {
        let g = Grid::new(32, 10.0).unwrap();
        let p = Params::new(0.6, 0.95, 3.0, 1.0, 1.0, 1.0).unwrap();
        let r = energy(&gaussian(g, 1.0, 0.8), &p).unwrap();
        assert!(r.kinetic > 0.0 && r.poisson > 0.0 && r.subcrit > 0.0 && r.crit > 0.0);
        assert_eq!(r.total, r.kinetic + r.poisson - r.subcrit - r.crit);
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let g = Grid::new(16, 8.0).unwrap();
        let p = Params::new(0.8, 0.8, 4.0, 1.0, 1.0, 0.3).unwrap();
        let m = Model::new(g, p).unwrap();
        let u = gaussian(g, 1.0, 0.9);
        let v = Field::from_fn(g, |x, y, z| (x + 0.3 * y * z).sin() * (-0.2 * (x * x + y * y + z * z)).exp()).unwrap();
        let st = m.state(&u).unwrap();
        let hv = m.hessian_vec(&st, &v).unwrap();
        let e = 1e-5;
        let gp = m.gradient(&u.axpy(e, &v)).unwrap();
        let gm = m.gradient(&u.axpy(-e, &v)).unwrap();
        let fd = gp.lincomb(0.5 / e, &gm, -0.5 / e);
        let err = fd.axpy(-1.0, &hv).max_abs() / hv.max_abs();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn multiplier_sign_for_large_mu() {
        let g = Grid::new(32, 12.0).unwrap();
        let p = Params::new(0.6, 0.95, 3.0, 1.0, 1e3, 1.0).unwrap();
        let u = gaussian(g, 1.0, 0.05);
        assert!(lagrange_multiplier(&u, &p, MultiplierMethod::Pairing).unwrap() < 0.0);
        assert!(lagrange_multiplier(&u, &p, MultiplierMethod::PohozaevFormula).unwrap() < 0.0);
    }

    #[test]
    fn residual_vanishes_on_linear_eigenpair() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let p = Params::new(0.8, 0.8, 4.0, 1.0, 0.0, 0.0).unwrap();
        let u = Field::from_fn(g, |x, _, _| 1e-6 * (2.0 * x).cos()).unwrap();
        let alpha = 2f64.powf(1.6);
        assert!(residual(&u, alpha, &p).unwrap() < 1e-8);
    }

    #[test]
    fn truncation_tau_shape() {
        let p = Params::new(0.75, 0.8, 2.5, 0.2, 1.0, 1.0).unwrap();
        let c = DerivedConstants::from_estimates(&p, 3.0, 0.0, 1.0);
        let prof = truncation_profile(&p, &c, None).unwrap();
        assert!(prof.r1 < prof.r2);
        assert!(prof.g(prof.r1).abs() < 1e-10 && prof.g(prof.r2).abs() < 1e-10);
        assert_eq!(prof.tau(0.5 * prof.r1), 1.0);
        assert_eq!(prof.tau(1.5 * prof.r2), 0.0);
        assert!(prof.g(0.5 * prof.r1) < 0.0);
        let mut last = 1.0;
        for i in 0..1000 {
            let r = 2.0 * prof.r2 * i as f64 / 999.0;
            let v = prof.tau(r);
            assert!(v <= last && (0.0..=1.0).contains(&v));
            last = v;
        }
        let p_big = p.with_mu(1e6);
        assert_eq!(truncation_profile(&p_big, &c, None).unwrap_err(), Error::TruncationWindow);
    }
}
