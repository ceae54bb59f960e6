//! Concentrating extremal profiles `U_eps = C eps^e / (eps^2 + |x|^2)^{(3-2s)/2}`,
//! their cut-off and mass-normalized versions, the numerical Sobolev
//! constant and the small-`eps` asymptotics of their norms.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fiber::fiber_maximum;
use crate::functional::{two_star, Model, Params};
use crate::grid::{Field, Grid};
use crate::quadrature;
use crate::spectral::{hs_seminorm_sq, mass_project, power_integral};

/// Power of `eps` in the numerator of the profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NumeratorExponent {
    /// `(3-2s)/2`: the critical norms are `eps`-invariant.
    #[default]
    Invariant,
    /// `3-2s`, as printed next to the normalization.
    Printed,
}

impl NumeratorExponent {
    pub fn value(self, s: f64) -> f64 {
        match self {
            NumeratorExponent::Invariant => 0.5 * (3.0 - 2.0 * s),
            NumeratorExponent::Printed => 3.0 - 2.0 * s,
        }
    }
}

/// Concentration scale and cutoff radii of a bubble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleSpec {
    pub eps: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub numerator: NumeratorExponent,
}

impl BubbleSpec {
    /// Cutoff between `L/4` and `L/2`, the widest plateau the box allows.
    pub fn new(eps: f64, grid: &Grid) -> Self {
        let l = grid.length();
        Self { eps, r_in: 0.25 * l, r_out: 0.5 * l, numerator: NumeratorExponent::Invariant }
    }

    pub fn with_radii(mut self, r_in: f64, r_out: f64) -> Self {
        self.r_in = r_in;
        self.r_out = r_out;
        self
    }

    pub fn with_numerator(mut self, numerator: NumeratorExponent) -> Self {
        self.numerator = numerator;
        self
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParams(format!("eps = {} must be positive", self.eps)));
        }
        if !(self.r_in > 0.0 && self.r_in < self.r_out && self.r_out <= 0.5 * grid.length()) {
            return Err(Error::InvalidParams(format!(
                "cutoff radii need 0 < r_in < r_out <= L/2 (got {}, {})",
                self.r_in, self.r_out
            )));
        }
        let min = 4.0 * grid.spacing();
        if self.eps < min {
            return Err(Error::BubbleUnderResolved { eps: self.eps, min });
        }
        Ok(())
    }
}

/// Ratio `kappa_s` in `(-Delta)^s U_1 = kappa_s U_1^{2*-1}` for
/// `U_1 = (1 + |x|^2)^{-(3-2s)/2}`.
pub fn talenti_ratio(s: f64) -> f64 {
    2f64.powf(2.0 * s) * gamma(1.5 + s) / gamma(1.5 - s)
}

/// `C(s)` with `||(-Delta)^{s/2}U||^2 = int U^{2*}`; the two integrals
/// of the unit-width profile differ by the factor `kappa_s`.
pub fn normalization_constant(s: f64) -> f64 {
    talenti_ratio(s).powf(1.0 / (two_star(s) - 2.0))
}

/// Common value `S^{3/(2s)}` of the two normalization integrals, with the
/// critical integral of `U_1` evaluated by radial quadrature.
pub fn normalization_level(s: f64) -> f64 {
    let ts = two_star(s);
    let c = normalization_constant(s);
    // int_0^inf r^2 (1+r^2)^{-3} dr after r = tan(x).
    let radial = quadrature::integrate(
        |x: f64| {
            let (sn, cs) = x.sin_cos();
            sn * sn * cs * cs
        },
        0.0,
        0.5 * PI,
        16,
        16,
    );
    c.powf(ts) * 4.0 * PI * radial
}

/// `U_eps(r)` with constant `C(s)`.
pub fn profile(r: f64, eps: f64, s: f64, numerator: NumeratorExponent) -> f64 {
    normalization_constant(s) * eps.powf(numerator.value(s))
        * (eps * eps + r * r).powf(-0.5 * (3.0 - 2.0 * s))
}

/// C^2 radial smoothstep equal to 1 on `[0, r_in]` and 0 beyond `r_out`.
pub fn cutoff(r: f64, r_in: f64, r_out: f64) -> f64 {
    if r <= r_in {
        1.0
    } else if r >= r_out {
        0.0
    } else {
        let x = (r - r_in) / (r_out - r_in);
        1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

/// The uncut profile sampled on `grid`.
pub fn bubble(spec: &BubbleSpec, grid: Grid, s: f64) -> Result<Field> {
    spec.validate(&grid)?;
    Field::radial(grid, |r| profile(r, spec.eps, s, spec.numerator))
}

/// `phi U_eps` without mass normalization.
pub fn cut_bubble(spec: &BubbleSpec, grid: Grid, s: f64) -> Result<Field> {
    spec.validate(&grid)?;
    cut_bubble_unchecked(spec, grid, s)
}

fn cut_bubble_unchecked(spec: &BubbleSpec, grid: Grid, s: f64) -> Result<Field> {
    Field::radial(grid, |r| {
        cutoff(r, spec.r_in, spec.r_out) * profile(r, spec.eps, s, spec.numerator)
    })
}

/// `v_eps = a u_eps / ||u_eps||_2`.
pub fn truncated_normalized_bubble(spec: &BubbleSpec, grid: Grid, p: &Params) -> Result<Field> {
    mass_project(&cut_bubble(spec, grid, p.s)?, p.a)
}

/// `||(-Delta)^{s/2}u||^2 / ||u||_{2*}^2`.
pub fn rayleigh_quotient(u: &Field, s: f64) -> Result<f64> {
    let ts = two_star(s);
    Ok(hs_seminorm_sq(u, s)? / power_integral(u, ts).powf(2.0 / ts))
}

/// Minimum of the Rayleigh quotient over a family of cut-off bubbles.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevEstimate {
    pub value: f64,
    /// `max - min` of the quotient over the family.
    pub spread: f64,
    pub eps: Vec<f64>,
    pub quotients: Vec<f64>,
}

/// Eight bubbles with `eps = 2h * 1.25^k`, cut off between `L/4` and `L/2`.
/// The cutoff raises the quotient, so the minimum sits at the narrowest
/// member, which is still resolved to about `1e-4`.
pub fn sobolev_constant_estimate(grid: Grid, s: f64) -> Result<SobolevEstimate> {
    type Key = (usize, u64, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, SobolevEstimate>>> = OnceLock::new();
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::ExponentOutOfRange(s));
    }
    let key = (grid.n(), grid.length().to_bits(), s.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return Ok(hit.clone());
    }
    let h = grid.spacing();
    let mut eps = Vec::new();
    let mut quotients = Vec::new();
    for k in 0..8 {
        let e = 2.0 * h * 1.25f64.powi(k);
        let spec = BubbleSpec::new(e, &grid);
        let u = cut_bubble_unchecked(&spec, grid, s)?;
        eps.push(e);
        quotients.push(rayleigh_quotient(&u, s)?);
    }
    let min = quotients.iter().copied().fold(f64::INFINITY, f64::min);
    let max = quotients.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let est = SobolevEstimate { value: min, spread: max - min, eps, quotients };
    cache.lock().unwrap_or_else(|e| e.into_inner()).insert(key, est.clone());
    Ok(est)
}

/// Quantities whose small-`eps` behaviour is fitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    /// `||u_eps||_2^2`.
    Mass,
    /// `int |u_eps|^p`.
    PNorm(f64),
    /// `||(-Delta)^{s/2}u_eps||^2 - S^{3/(2s)}`.
    KineticExcess,
    /// `S^{3/(2s)} - int |u_eps|^{2*}`.
    CritExcess,
}

impl Quantity {
    pub fn name(&self) -> String {
        match self {
            Quantity::Mass => "mass".into(),
            Quantity::PNorm(p) => format!("p_norm({p})"),
            Quantity::KineticExcess => "kinetic_excess".into(),
            Quantity::CritExcess => "crit_excess".into(),
        }
    }
}

/// Leading exponent of `eps` and whether a `|log eps|` factor accompanies it.
pub fn predicted_exponent(q: Quantity, s: f64) -> (f64, bool) {
    let tol = 1e-12;
    match q {
        Quantity::Mass => {
            if (s - 0.75).abs() < tol {
                (2.0 * s, true)
            } else if s < 0.75 {
                (2.0 * s, false)
            } else {
                (3.0 - 2.0 * s, false)
            }
        }
        Quantity::PNorm(p) => {
            let edge = 3.0 / (3.0 - 2.0 * s);
            if (p - edge).abs() < tol {
                (1.5, true)
            } else if p > edge {
                ((3.0 * (2.0 - p) + 2.0 * s * p) / 2.0, false)
            } else {
                ((3.0 - 2.0 * s) * p / 2.0, false)
            }
        }
        Quantity::KineticExcess => (3.0 - 2.0 * s, false),
        Quantity::CritExcess => (3.0, false),
    }
}

/// Fitted and predicted exponents for one quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub quantity: Quantity,
    pub slope: f64,
    pub predicted: f64,
    pub log_factor: bool,
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
}

impl ExponentFit {
    pub fn error(&self) -> f64 {
        (self.slope - self.predicted).abs()
    }
}

/// Radial integral `4 pi int_0^{r_out} r^2 f(r) dr`, split at `eps` and
/// `r_in` and graded towards the origin.
fn radial_integral(f: impl Fn(f64) -> f64, eps: f64, r_in: f64, r_out: f64) -> f64 {
    let g = |r: f64| 4.0 * PI * r * r * f(r);
    let mut total = 0.0;
    // Geometric panels on (0, eps] resolve the core, then [eps, r_in], [r_in, r_out].
    let mut hi = eps.min(r_in);
    for _ in 0..40 {
        let lo = 0.5 * hi;
        total += quadrature::integrate(g, lo, hi, 1, 20);
        hi = lo;
    }
    if eps < r_in {
        let (a, b) = (eps.ln(), r_in.ln());
        total += quadrature::integrate(|y: f64| g(y.exp()) * y.exp(), a, b, 64, 20);
    }
    total + quadrature::integrate(g, r_in, r_out, 16, 20)
}

/// Kinetic term, critical integral and Rayleigh quotient of the cut bubble
/// in free space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuumQuotient {
    pub kinetic: f64,
    pub crit: f64,
    pub quotient: f64,
}

/// Radial samples per `eps` and padding of the sine-transform domain.
const RADIAL_POINTS_PER_EPS: f64 = 40.0;
const RADIAL_PADDING: f64 = 8.0;

/// Free-space quotient of the cut bubble with no 3-D grid. The kinetic
/// term is `(2 pi^2)^{-1} int k^{2+2s} |u^(k)|^2 dk` with
/// `u^(k) = (4 pi / k) int r u(r) sin(kr) dr`, evaluated as a sine
/// transform on `[0, 8 r_out]` with spacing `eps/40`; the padding bounds
/// the aliasing of the algebraic kernel.
pub fn continuum_quotient(
    s: f64,
    eps: f64,
    r_in: f64,
    r_out: f64,
    numerator: NumeratorExponent,
) -> Result<ContinuumQuotient> {
    use rustfft::num_complex::Complex64;
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::ExponentOutOfRange(s));
    }
    if !(eps > 0.0 && r_in > 0.0 && r_in < r_out) {
        return Err(Error::InvalidParams(format!(
            "need eps > 0 and 0 < r_in < r_out (got {eps}, {r_in}, {r_out})"
        )));
    }
    let u = |r: f64| cutoff(r, r_in, r_out) * profile(r, eps, s, numerator);
    let dr = eps / RADIAL_POINTS_PER_EPS;
    let n = (RADIAL_PADDING * r_out / dr).ceil() as usize;
    let big_r = n as f64 * dr;
    // Odd extension of r u(r) on 2n points; X[m] = -2i sum_j g_j sin(pi m j / n).
    let mut x = vec![Complex64::default(); 2 * n];
    for j in 1..n {
        let r = j as f64 * dr;
        let g = r * u(r);
        x[j] = Complex64::new(g, 0.0);
        x[2 * n - j] = Complex64::new(-g, 0.0);
    }
    rustfft::FftPlanner::new().plan_fft_forward(2 * n).process(&mut x);
    let dk = PI / big_r;
    let mut kinetic = 0.0;
    for (m, xm) in x.iter().enumerate().take(n).skip(1) {
        let k = m as f64 * dk;
        let uhat = 4.0 * PI / k * (-0.5 * xm.im) * dr;
        kinetic += k.powf(2.0 + 2.0 * s) * uhat * uhat;
    }
    kinetic *= dk / (2.0 * PI * PI);
    let ts = two_star(s);
    let crit = radial_integral(|r| u(r).powf(ts), eps, r_in, r_out);
    Ok(ContinuumQuotient { kinetic, crit, quotient: kinetic / crit.powf(2.0 / ts) })
}

/// Points per `eps` for the kinetic-excess grids.
pub const KINETIC_POINTS_PER_EPS: f64 = 2.0;
/// Largest grid used for the kinetic excess.
pub const KINETIC_MAX_N: usize = 128;

fn kinetic_grid(eps: f64, r_out: f64) -> Result<Grid> {
    let l = 2.0 * r_out;
    let n = ((KINETIC_POINTS_PER_EPS * l / eps / 2.0).ceil() as usize * 2).max(16);
    if n > KINETIC_MAX_N {
        return Err(Error::BubbleUnderResolved { eps, min: KINETIC_POINTS_PER_EPS * l / KINETIC_MAX_N as f64 });
    }
    Grid::new(n, l)
}

/// Value of `quantity` for the cut-off bubble at `eps` with cutoff radii
/// `(r_in, r_out)`. Pointwise integrals use radial quadrature of the
/// profile; the kinetic term uses a grid with spacing about `eps/2`.
pub fn bubble_quantity(quantity: Quantity, s: f64, eps: f64, r_in: f64, r_out: f64) -> Result<f64> {
    let num = NumeratorExponent::Invariant;
    let u = |r: f64| cutoff(r, r_in, r_out) * profile(r, eps, s, num);
    let ts = two_star(s);
    Ok(match quantity {
        Quantity::Mass => radial_integral(|r| u(r).powi(2), eps, r_in, r_out),
        Quantity::PNorm(p) => radial_integral(|r| u(r).powf(p), eps, r_in, r_out),
        Quantity::CritExcess => {
            normalization_level(s) - radial_integral(|r| u(r).powf(ts), eps, r_in, r_out)
        }
        Quantity::KineticExcess => {
            let grid = kinetic_grid(eps, r_out)?;
            let spec = BubbleSpec { eps, r_in, r_out, numerator: num };
            let field = cut_bubble_unchecked(&spec, grid, s)?;
            hs_seminorm_sq(&field, s)? - normalization_level(s)
        }
    })
}

/// Least-squares slope of `log |quantity|` against `log eps`, with the
/// `|log eps|` factor divided out where one is predicted. Cutoff radii
/// are 1 and 2.
pub fn asymptotic_exponent_fit(s: f64, quantity: Quantity, eps_list: &[f64]) -> Result<ExponentFit> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::ExponentOutOfRange(s));
    }
    if eps_list.len() < 2 {
        return Err(Error::InvalidParams("need at least two eps values".into()));
    }
    if eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::InvalidParams("eps values must lie in (0, 1)".into()));
    }
    let (predicted, log_factor) = predicted_exponent(quantity, s);
    let mut values = Vec::with_capacity(eps_list.len());
    for &e in eps_list {
        values.push(bubble_quantity(quantity, s, e, 1.0, 2.0)?);
    }
    let xs: Vec<f64> = eps_list.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = values
        .iter()
        .zip(eps_list)
        .map(|(v, e)| {
            let v = v.abs();
            if log_factor {
                (v / e.ln().abs()).ln()
            } else {
                v.ln()
            }
        })
        .collect();
    Ok(ExponentFit {
        quantity,
        slope: least_squares_slope(&xs, &ys),
        predicted,
        log_factor,
        eps: eps_list.to_vec(),
        values,
    })
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Which smallness recipe for `lambda` the concentration argument uses.
pub fn lambda_recipe(s: f64, eps: f64) -> (&'static str, f64) {
    if (s - 0.75).abs() < 1e-12 {
        ("eps^(2s)", eps.powf(2.0 * s))
    } else if s < 0.75 {
        ("eps^s", eps.powf(s))
    } else {
        ("eps^(6-4s)", eps.powf(6.0 - 4.0 * s))
    }
}

/// Fiber maximum of `v_eps` against the compactness threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub eps: f64,
    pub psi_max: f64,
    pub theta_max: f64,
    pub threshold: f64,
    pub margin: f64,
    pub recipe: &'static str,
    pub recipe_lambda: f64,
    pub mass: f64,
    pub q_norm: f64,
    pub kinetic: f64,
    pub crit: f64,
    pub quotient: f64,
}

impl ThresholdReport {
    pub const CSV_HEADER: &'static str =
        "eps,mass,q_norm,kinetic,crit,quotient,psi_max,threshold,margin";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.eps,
            self.mass,
            self.q_norm,
            self.kinetic,
            self.crit,
            self.quotient,
            self.psi_max,
            self.threshold,
            self.margin
        )
    }
}

/// `(s/3) S_est^{3/(2s)}`.
pub fn compactness_threshold(s: f64, s_est: f64) -> f64 {
    s / 3.0 * s_est.powf(1.5 / s)
}

pub fn threshold_check(p: &Params, spec: &BubbleSpec, grid: Grid) -> Result<ThresholdReport> {
    let sob = sobolev_constant_estimate(grid, p.s)?;
    threshold_check_with(p, spec, grid, sob.value)
}

pub fn threshold_check_with(
    p: &Params,
    spec: &BubbleSpec,
    grid: Grid,
    s_est: f64,
) -> Result<ThresholdReport> {
    let raw = cut_bubble(spec, grid, p.s)?;
    let v = mass_project(&raw, p.a)?;
    let model = Model::new(grid, *p)?;
    let coef = model.coefficients(&v)?;
    let (theta_max, psi_max) = fiber_maximum(&coef, p, 30.0)?;
    let threshold = compactness_threshold(p.s, s_est);
    let (recipe, recipe_lambda) = lambda_recipe(p.s, spec.eps);
    let ts = p.two_star();
    Ok(ThresholdReport {
        eps: spec.eps,
        psi_max,
        theta_max,
        threshold,
        margin: threshold - psi_max,
        recipe,
        recipe_lambda,
        mass: power_integral(&raw, 2.0),
        q_norm: power_integral(&raw, p.q),
        kinetic: hs_seminorm_sq(&raw, p.s)?,
        crit: power_integral(&raw, ts),
        quotient: rayleigh_quotient(&raw, p.s)?,
    })
}
