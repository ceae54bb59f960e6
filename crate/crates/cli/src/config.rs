//! `key=value` run configuration with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use fsp_core::bubbles::NumeratorExponent;
use fsp_core::functional::Params;
use fsp_core::optimizer::{Mode, SolverOptions, Symmetry};
use fsp_core::spectral::{RieszConstant, RieszMethod};
use fsp_core::{Error, Grid};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error at `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

fn err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { key: key.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    Binary,
    Csv,
    None,
}

/// Every key with its documentation; the order is the echo order.
pub const KEYS: &[(&str, &str)] = &[
    ("s", "kinetic order, 0 < s < 1 (required)"),
    ("t", "Poisson order, 0 < t < 1, 2s+2t > 3 (required)"),
    ("q", "subcritical power, 2 < q < 2*_s, q != 2+4s/3 (required)"),
    ("a", "prescribed L2 norm (required)"),
    ("mu", "coefficient of |u|^q (required)"),
    ("lambda", "Poisson coupling (required)"),
    ("n", "grid points per axis, even"),
    ("L", "box side"),
    ("mode", "auto | subcritical_minimize | supercritical_mountain_pass"),
    ("symmetry", "none | odd_x, invariant class of a single solve"),
    ("positive", "flow the positive-part functional"),
    ("max_iter", "descent iterations"),
    ("step", "initial and largest descent step"),
    ("backtrack", "Armijo step reduction factor"),
    ("step_floor", "smallest descent step"),
    ("armijo", "sufficient-decrease constant"),
    ("tol_r", "residual tolerance"),
    ("tol_P", "Pohozaev tolerance, relative to 1+|I|"),
    ("tol_E", "energy stall tolerance (subcritical)"),
    ("stall_window", "iterations over which the stall is measured"),
    ("theta_max", "dilation window |theta| <= theta_max"),
    ("handover", "residual at which the supercritical descent hands over to Newton"),
    ("newton_iter", "Newton iterations (0 disables the polish)"),
    ("krylov_dim", "GMRES restart length"),
    ("check_threshold", "compare the supercritical level with (s/3) S^{3/(2s)}"),
    ("seed", "seed for the multi-start generator"),
    ("k", "number of starts; k > 1 runs multi_start"),
    ("beta", "auto | truncation window bound"),
    ("riesz", "periodic | free_space"),
    ("riesz_constant", "standard | printed"),
    ("numerator", "invariant | printed bubble numerator exponent"),
    ("eps_list", "auto | comma list of bubble scales"),
    ("theta_lo", "fiber-scan lower end"),
    ("theta_hi", "fiber-scan upper end"),
    ("theta_count", "fiber-scan points"),
    ("sweep_mu", "comma list; empty keeps mu"),
    ("sweep_lambda", "comma list; empty keeps lambda"),
    ("sweep_a", "comma list; empty keeps a"),
    ("field_format", "bin | csv | none"),
    ("init", "optional field dump used as initial data"),
    ("out", "output directory"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: Params,
    pub n: usize,
    pub length: f64,
    pub solver: SolverOptions,
    pub k: usize,
    pub beta: Option<f64>,
    pub riesz: RieszMethod,
    pub riesz_constant: RieszConstant,
    pub numerator: NumeratorExponent,
    pub eps_list: Option<Vec<f64>>,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub theta_count: usize,
    pub sweep_mu: Vec<f64>,
    pub sweep_lambda: Vec<f64>,
    pub sweep_a: Vec<f64>,
    pub field_format: FieldFormat,
    pub init: Option<PathBuf>,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn grid(&self) -> Grid {
        Grid::new(self.n, self.length).expect("validated at parse time")
    }

    /// Effective value of every key, parseable by [`parse_config`].
    pub fn echo(&self) -> String {
        let p = &self.params;
        let o = &self.solver;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        for (key, doc) in KEYS {
            let value = match *key {
                "s" => format!("{:?}", p.s),
                "t" => format!("{:?}", p.t),
                "q" => format!("{:?}", p.q),
                "a" => format!("{:?}", p.a),
                "mu" => format!("{:?}", p.mu),
                "lambda" => format!("{:?}", p.lambda),
                "n" => self.n.to_string(),
                "L" => format!("{:?}", self.length),
                "mode" => o.mode.map_or("auto", Mode::as_str).to_string(),
                "symmetry" => o.symmetry.as_str().to_string(),
                "positive" => o.positive.to_string(),
                "max_iter" => o.max_iter.to_string(),
                "step" => format!("{:?}", o.step),
                "backtrack" => format!("{:?}", o.backtrack),
                "step_floor" => format!("{:?}", o.step_floor),
                "armijo" => format!("{:?}", o.armijo),
                "tol_r" => format!("{:?}", o.tol_r),
                "tol_P" => format!("{:?}", o.tol_p),
                "tol_E" => format!("{:?}", o.tol_e),
                "stall_window" => o.stall_window.to_string(),
                "theta_max" => format!("{:?}", o.theta_max),
                "handover" => format!("{:?}", o.handover),
                "newton_iter" => o.newton_iter.to_string(),
                "krylov_dim" => o.krylov_dim.to_string(),
                "check_threshold" => o.check_threshold.to_string(),
                "seed" => o.seed.to_string(),
                "k" => self.k.to_string(),
                "beta" => self.beta.map_or("auto".to_string(), |b| format!("{b:?}")),
                "riesz" => match self.riesz {
                    RieszMethod::Periodic => "periodic",
                    RieszMethod::FreeSpace => "free_space",
                }
                .to_string(),
                "riesz_constant" => match self.riesz_constant {
                    RieszConstant::Standard => "standard",
                    RieszConstant::Printed => "printed",
                }
                .to_string(),
                "numerator" => match self.numerator {
                    NumeratorExponent::Invariant => "invariant",
                    NumeratorExponent::Printed => "printed",
                }
                .to_string(),
                "eps_list" => self.eps_list.as_deref().map_or("auto".to_string(), list),
                "theta_lo" => format!("{:?}", self.theta_lo),
                "theta_hi" => format!("{:?}", self.theta_hi),
                "theta_count" => self.theta_count.to_string(),
                "sweep_mu" => list(&self.sweep_mu),
                "sweep_lambda" => list(&self.sweep_lambda),
                "sweep_a" => list(&self.sweep_a),
                "field_format" => match self.field_format {
                    FieldFormat::Binary => "bin",
                    FieldFormat::Csv => "csv",
                    FieldFormat::None => "none",
                }
                .to_string(),
                "init" => self.init.as_ref().map_or(String::new(), |p| p.display().to_string()),
                "out" => self.out.display().to_string(),
                _ => unreachable!("every key is echoed"),
            };
            let _ = writeln!(out, "# {doc}\n{key}={value}");
        }
        out
    }
}

struct Raw(BTreeMap<String, String>);

impl Raw {
    fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => parse_f64(key, &v),
        }
    }

    fn required(&mut self, key: &str) -> Result<f64, ConfigError> {
        let v = self.take(key).ok_or_else(|| err(key, "missing required key"))?;
        parse_f64(key, &v)
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| err(key, format!("expected a non-negative integer, got `{v}`"))),
        }
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.take(key).as_deref() {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(err(key, format!("expected true or false, got `{v}`"))),
        }
    }

    fn list(&mut self, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(Vec::new()),
            Some(v) if v.trim().is_empty() => Ok(Vec::new()),
            Some(v) => v.split(',').map(|x| parse_f64(key, x.trim())).collect(),
        }
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)], default: T) -> Result<T, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => options.iter().find(|(name, _)| *name == v).map(|(_, t)| *t).ok_or_else(|| {
                let names: Vec<_> = options.iter().map(|(n, _)| *n).collect();
                err(key, format!("expected one of {}, got `{v}`", names.join(" | ")))
            }),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v.parse().map_err(|_| err(key, format!("expected a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(err(key, format!("must be finite, got `{v}`")));
    }
    Ok(x)
}

/// Key of the constraint a parameter error refers to.
fn params_key(message: &str) -> &'static str {
    if message.contains("2s+2t") {
        return "t";
    }
    if message.starts_with("q must") {
        return "q";
    }
    ["s", "t", "a", "mu", "lambda"]
        .into_iter()
        .find(|k| message.starts_with(&format!("{k} = ")))
        .unwrap_or("params")
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(err(&format!("line {}", no + 1), format!("expected key=value, got `{line}`")));
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.iter().any(|(name, _)| *name == k) {
            return Err(err(k, "unknown key"));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(err(k, "duplicate key"));
        }
    }
    let mut raw = Raw(map);
    let (s, t, q) = (raw.required("s")?, raw.required("t")?, raw.required("q")?);
    let (a, mu, lambda) = (raw.required("a")?, raw.required("mu")?, raw.required("lambda")?);
    let params = Params::new(s, t, q, a, mu, lambda).map_err(|e| {
        let key = match &e {
            Error::InvalidParams(m) => params_key(m),
            _ => "params",
        };
        err(key, e.to_string())
    })?;

    let n = raw.usize_or("n", 64)?;
    let length = raw.f64_or("L", 16.0)?;
    Grid::new(n, length).map_err(|e| err("n", e.to_string()))?;

    let d = SolverOptions::default();
    let modes = [
        ("auto", None),
        ("subcritical_minimize", Some(Mode::SubcriticalMinimize)),
        ("supercritical_mountain_pass", Some(Mode::SupercriticalMountainPass)),
    ];
    let solver = SolverOptions {
        mode: raw.choice("mode", &modes, None)?,
        symmetry: raw.choice("symmetry", &[("none", Symmetry::None), ("odd_x", Symmetry::OddX)], Symmetry::None)?,
        positive: raw.bool_or("positive", d.positive)?,
        max_iter: raw.usize_or("max_iter", d.max_iter)?,
        step: raw.f64_or("step", d.step)?,
        backtrack: raw.f64_or("backtrack", d.backtrack)?,
        step_floor: raw.f64_or("step_floor", d.step_floor)?,
        armijo: raw.f64_or("armijo", d.armijo)?,
        tol_r: raw.f64_or("tol_r", d.tol_r)?,
        tol_p: raw.f64_or("tol_P", d.tol_p)?,
        tol_e: raw.f64_or("tol_E", d.tol_e)?,
        stall_window: raw.usize_or("stall_window", d.stall_window)?,
        theta_max: raw.f64_or("theta_max", d.theta_max)?,
        handover: raw.f64_or("handover", d.handover)?,
        newton_iter: raw.usize_or("newton_iter", d.newton_iter)?,
        krylov_dim: raw.usize_or("krylov_dim", d.krylov_dim)?,
        check_threshold: raw.bool_or("check_threshold", d.check_threshold)?,
        seed: raw.take("seed").map_or(Ok(d.seed), |v| {
            v.parse().map_err(|_| err("seed", format!("expected an unsigned integer, got `{v}`")))
        })?,
    };
    if let Err(e) = solver.validate() {
        let key = match &e {
            // Option names are the keys up to case (`tol_p` for `tol_P`).
            Error::InvalidParams(m) => {
                KEYS.iter().map(|(k, _)| *k).find(|k| m.starts_with(&format!("{} ", k.to_lowercase())))
            }
            _ => None,
        };
        return Err(err(key.unwrap_or("solver"), e.to_string()));
    }
    if let Some(mode) = solver.mode {
        let expected = Mode::for_regime(params.regime()).map_err(|e| err("q", e.to_string()))?;
        if mode != expected {
            return Err(err("mode", format!("{} does not match the {} regime", mode.as_str(), params.regime())));
        }
    }

    let k = raw.usize_or("k", 1)?;
    if k < 1 {
        return Err(err("k", "must be at least 1"));
    }
    let beta = match raw.take("beta").as_deref() {
        None | Some("auto") => None,
        Some(v) => {
            let b = parse_f64("beta", v)?;
            if !(b > 0.0) {
                return Err(err("beta", "must be positive"));
            }
            Some(b)
        }
    };
    let riesz = raw.choice("riesz", &[("periodic", RieszMethod::Periodic), ("free_space", RieszMethod::FreeSpace)], RieszMethod::Periodic)?;
    let riesz_constant = raw.choice(
        "riesz_constant",
        &[("standard", RieszConstant::Standard), ("printed", RieszConstant::Printed)],
        RieszConstant::Standard,
    )?;
    let numerator = raw.choice(
        "numerator",
        &[("invariant", NumeratorExponent::Invariant), ("printed", NumeratorExponent::Printed)],
        NumeratorExponent::Invariant,
    )?;
    let eps_list = match raw.take("eps_list").as_deref() {
        None | Some("auto") => None,
        Some(v) => {
            let list = v.split(',').map(|x| parse_f64("eps_list", x.trim())).collect::<Result<Vec<_>, _>>()?;
            if list.is_empty() || list.iter().any(|e| !(*e > 0.0)) {
                return Err(err("eps_list", "scales must be positive"));
            }
            Some(list)
        }
    };
    let theta_lo = raw.f64_or("theta_lo", -1.5)?;
    let theta_hi = raw.f64_or("theta_hi", 1.5)?;
    if !(theta_lo < theta_hi) {
        return Err(err("theta_hi", "must exceed theta_lo"));
    }
    let theta_count = raw.usize_or("theta_count", 61)?;
    if theta_count < 2 {
        return Err(err("theta_count", "must be at least 2"));
    }
    let sweep_mu = raw.list("sweep_mu")?;
    let sweep_lambda = raw.list("sweep_lambda")?;
    let sweep_a = raw.list("sweep_a")?;
    for &m in &sweep_mu {
        params.with_mu(m).validate().map_err(|e| err("sweep_mu", e.to_string()))?;
    }
    for &l in &sweep_lambda {
        params.with_lambda(l).validate().map_err(|e| err("sweep_lambda", e.to_string()))?;
    }
    for &a in &sweep_a {
        Params { a, ..params }.validate().map_err(|e| err("sweep_a", e.to_string()))?;
    }
    let field_format = raw.choice(
        "field_format",
        &[("bin", FieldFormat::Binary), ("csv", FieldFormat::Csv), ("none", FieldFormat::None)],
        FieldFormat::Binary,
    )?;
    let init = raw.take("init").filter(|v| !v.is_empty()).map(PathBuf::from);
    let out = PathBuf::from(raw.take("out").unwrap_or_else(|| "fsp-out".to_string()));
    debug_assert!(raw.0.is_empty(), "every known key is consumed");
    Ok(RunConfig {
        params,
        n,
        length,
        solver,
        k,
        beta,
        riesz,
        riesz_constant,
        numerator,
        eps_list,
        theta_lo,
        theta_hi,
        theta_count,
        sweep_mu,
        sweep_lambda,
        sweep_a,
        field_format,
        init,
        out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "s=0.8\nt=0.8\nq=4\na=1\nmu=20\nlambda=1e-3\n";

    #[test]
    fn minimal_config_gets_defaults_and_echo_round_trips() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!((c.n, c.length, c.k), (64, 16.0, 1));
        assert_eq!(c.solver, SolverOptions::default());
        let echo = c.echo();
        for (key, _) in KEYS {
            assert!(echo.lines().any(|l| l.starts_with(&format!("{key}="))), "missing {key}");
        }
        assert_eq!(parse_config(&echo).unwrap(), c);
    }

    #[test]
    fn standing_assumption_names_key() {
        let e = parse_config("s=0.4\nt=0.5\nq=2.5\na=1\nmu=1\nlambda=1\n").unwrap_err();
        assert_eq!(e.key, "t");
        assert!(e.message.contains("requires 2s+2t > 3"));
        let e = parse_config("s=0.9\nt=0.9\nq=7\na=1\nmu=1\nlambda=1\n").unwrap_err();
        assert_eq!(e.key, "q");
        assert!(e.message.contains("q must lie in (2, 2*_s)"));
    }

    #[test]
    fn unknown_and_malformed_keys_rejected() {
        let e = parse_config(&format!("{MINIMAL}colour=blue\n")).unwrap_err();
        assert_eq!(e.key, "colour");
        let e = parse_config(&format!("{MINIMAL}n=sixty\n")).unwrap_err();
        assert_eq!(e.key, "n");
        let e = parse_config(&format!("{MINIMAL}n=63\n")).unwrap_err();
        assert_eq!(e.key, "n");
        let e = parse_config(&format!("{MINIMAL}tol_r=-1\n")).unwrap_err();
        assert_eq!(e.key, "tol_r");
        let e = parse_config(&format!("{MINIMAL}tol_P=0\n")).unwrap_err();
        assert_eq!(e.key, "tol_P");
        let e = parse_config(&format!("{MINIMAL}mode=subcritical_minimize\n")).unwrap_err();
        assert_eq!(e.key, "mode");
        let e = parse_config("s=0.8\nt=0.8\n").unwrap_err();
        assert_eq!(e.key, "q");
    }

    #[test]
    fn comments_and_lists() {
        let c = parse_config(&format!("# header\n{MINIMAL}sweep_mu = 1, 10,100 # trailing\n")).unwrap();
        assert_eq!(c.sweep_mu, vec![1.0, 10.0, 100.0]);
    }
}
