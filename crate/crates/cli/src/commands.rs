//! Subcommands and run artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use fsp_core::bubbles::{
    asymptotic_exponent_fit, sobolev_constant_estimate, threshold_check_with, BubbleSpec, Quantity,
    ThresholdReport,
};
use fsp_core::fiber::{fiber_maximum, fiber_scan, scale_with_limit};
use fsp_core::functional::{
    check_theorem_hypotheses, derived_constants, geometry_constants, truncation_profile,
    EnergyReport, Model, Params, Regime,
};
use fsp_core::io::{read_field, write_field, write_field_csv};
use fsp_core::optimizer::{
    default_initial, ground_state_supercritical, minimize_truncated, multi_start, Mode, Solution,
    TraceRow,
};
use fsp_core::spectral::mass_project;
use fsp_core::{Error, Field};

use crate::config::{FieldFormat, RunConfig};

/// Failure of a subcommand, mapped to an exit status by the caller.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(Error::InvalidParams(_) | Error::TruncationWindow) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const SUMMARY_HEADER: &str = "index,s,t,q,a,mu,lambda,n,L,regime,mode,symmetry,converged,iterations,flags,kinetic,poisson,subcrit,crit,total,pohozaev,alpha,alpha_pohozaev,residual,mass,threshold,wall_clock";

/// Solution summary; the wall-clock column comes last so reproducibility
/// checks can drop it.
pub fn summary_row(index: usize, cfg: &RunConfig, p: &Params, mode: Mode, sol: &Solution) -> String {
    format!(
        "{index},{:?},{:?},{:?},{:?},{:?},{:?},{},{:?},{},{},{},{},{},{},{},{},{:.6}",
        p.s,
        p.t,
        p.q,
        p.a,
        p.mu,
        p.lambda,
        cfg.n,
        cfg.length,
        sol.regime.as_str(),
        mode.as_str(),
        sol.symmetry.as_str(),
        sol.converged,
        sol.iterations,
        if sol.flags.is_empty() { "none".to_string() } else { sol.flags.join(";") },
        sol.report.csv_row(),
        sol.threshold.map_or("nan".to_string(), |t| format!("{t:.17e}")),
        sol.wall_clock
    )
}

fn model_for(cfg: &RunConfig, p: Params) -> CliResult<Model> {
    Ok(Model::with_riesz(cfg.grid(), p, cfg.riesz, cfg.riesz_constant)?.positive_part(cfg.solver.positive))
}

/// Constants, hypotheses and (mass-subcritical) truncation window.
pub fn regime(cfg: &RunConfig) -> CliResult<String> {
    let p = &cfg.params;
    let c = derived_constants(p, cfg.grid())?;
    let report = check_theorem_hypotheses(p, &c, cfg.beta);
    let mut out = String::new();
    let _ = writeln!(out, "s={:?}\nt={:?}\nq={:?}\na={:?}\nmu={:?}\nlambda={:?}", p.s, p.t, p.q, p.a, p.mu, p.lambda);
    out.push_str(&c.to_kv());
    out.push_str(&report.to_kv());
    if p.regime() == Regime::Subcritical {
        match truncation_profile(p, &c, cfg.beta) {
            Ok(prof) => {
                let _ = writeln!(
                    out,
                    "truncation=EXISTS\nR1={:.12e}\nR2={:.12e}\nr_peak={:.12e}\ng_peak={:.12e}\nside_positive={}\nside_below_sobolev={}",
                    prof.r1, prof.r2, prof.r_peak, prof.g_peak, prof.side_positive, prof.side_below_sobolev
                );
            }
            Err(e) => {
                let _ = writeln!(out, "truncation=NONE ({e})");
            }
        }
    }
    Ok(out)
}

fn initial_field(cfg: &RunConfig, p: &Params) -> CliResult<Field> {
    let g = cfg.grid();
    if let Some(path) = &cfg.init {
        let u = read_field(path)?;
        if *u.grid() != g {
            return Err(Error::GridMismatch.into());
        }
        return Ok(mass_project(&u, p.a)?);
    }
    let k_a = if p.regime() == Regime::Supercritical {
        let c = derived_constants(p, g)?;
        Some(geometry_constants(p, &c).k_a)
    } else {
        None
    };
    Ok(default_initial(g, p, k_a)?)
}

/// Runs the regime's solver (or multi_start when `k > 1`) for `p`.
pub fn solve_params(cfg: &RunConfig, p: Params) -> CliResult<(Mode, Vec<Solution>)> {
    let model = model_for(cfg, p)?;
    let mode = match cfg.solver.mode {
        Some(m) => m,
        None => Mode::for_regime(p.regime())?,
    };
    let opts = cfg.solver;
    let prof = if mode == Mode::SubcriticalMinimize {
        let c = derived_constants(&p, cfg.grid())?;
        Some(truncation_profile(&p, &c, cfg.beta)?)
    } else {
        None
    };
    if cfg.k > 1 {
        let sols = multi_start(&model, cfg.k, prof.as_ref(), &opts)?;
        return Ok((mode, sols));
    }
    let u0 = initial_field(cfg, &p)?;
    let sol = match mode {
        Mode::SubcriticalMinimize => minimize_truncated(&model, &u0, prof.as_ref().expect("built above"), &opts)?,
        Mode::SupercriticalMountainPass => ground_state_supercritical(&model, &u0, &opts)?,
    };
    Ok((mode, vec![sol]))
}

fn write_solution(dir: &Path, cfg: &RunConfig, sol: &Solution) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let mut trace = String::from(TraceRow::CSV_HEADER);
    trace.push('\n');
    for r in &sol.trace {
        trace.push_str(&r.csv_row());
        trace.push('\n');
    }
    fs::write(dir.join("trace.csv"), trace)?;
    match cfg.field_format {
        FieldFormat::Binary => write_field(&dir.join("u.bin"), &sol.u)?,
        FieldFormat::Csv => write_field_csv(&dir.join("u.csv"), &sol.u)?,
        FieldFormat::None => {}
    }
    Ok(())
}

/// `solve`: writes params.txt, summary.csv and per-solution trace and field.
/// Returns the summary text and whether every solution converged.
pub fn solve(cfg: &RunConfig, out: &Path) -> CliResult<(String, bool)> {
    fs::create_dir_all(out)?;
    fs::write(out.join("params.txt"), cfg.echo())?;
    let (mode, sols) = solve_params(cfg, cfg.params)?;
    let mut summary = format!("{SUMMARY_HEADER}\n");
    for (i, sol) in sols.iter().enumerate() {
        let dir = if sols.len() == 1 { out.to_path_buf() } else { out.join(format!("solution-{i:03}")) };
        write_solution(&dir, cfg, sol)?;
        summary.push_str(&summary_row(i, cfg, &cfg.params, mode, sol));
        summary.push('\n');
    }
    fs::write(out.join("summary.csv"), &summary)?;
    Ok((summary, sols.iter().all(|s| s.converged)))
}

/// `fiber-scan`: analytic fiber energy and its grid evaluation.
pub fn fiber_scan_cmd(cfg: &RunConfig, out: &Path) -> CliResult<String> {
    fs::create_dir_all(out)?;
    let p = cfg.params;
    let model = model_for(cfg, p)?;
    let u = initial_field(cfg, &p)?;
    let c = model.coefficients(&u)?;
    let rows = fiber_scan(&c, &p, cfg.theta_lo, cfg.theta_hi, cfg.theta_count);
    let mut csv = String::from("theta,psi,dpsi,d2psi,grid_energy\n");
    for [th, psi, d1, d2] in rows {
        let grid = match scale_with_limit(&u, th, th.abs().max(cfg.solver.theta_max)) {
            Ok(v) => format!("{:.17e}", model.energy(&v)?.total),
            Err(Error::DilationLeavesBox(_)) => "nan".to_string(),
            Err(e) => return Err(e.into()),
        };
        let _ = writeln!(csv, "{th:.17e},{psi:.17e},{d1:.17e},{d2:.17e},{grid}");
    }
    fs::write(out.join("fiber.csv"), csv)?;
    let mut text = format!("A={:.12e}\nB={:.12e}\nC={:.12e}\nD={:.12e}\n", c.a, c.b, c.c, c.d);
    match fiber_maximum(&c, &p, 30.0) {
        Ok((th, psi)) => {
            let _ = writeln!(text, "theta_star={th:.12e}\npsi_max={psi:.12e}");
        }
        Err(e) => {
            let _ = writeln!(text, "fiber_max=NONE ({e})");
        }
    }
    fs::write(out.join("fiber.txt"), &text)?;
    Ok(text)
}

/// Default bubble scales: `4h * 1.25^k`, `k = 0..7`.
fn bubble_scales(cfg: &RunConfig) -> Vec<f64> {
    cfg.eps_list.clone().unwrap_or_else(|| {
        let h = cfg.grid().spacing();
        (0..8).map(|k| 4.0 * h * 1.25f64.powi(k)).collect()
    })
}

/// Scales for the kinetic-excess fit (3-D grids, cutoff radii 1 and 2).
pub const FIT_SCALES: [f64; 5] = [0.0625, 0.08, 0.1, 0.125, 0.16];
/// Scales for the radial-quadrature fits, small enough for the
/// subleading powers of `eps` to settle.
pub const POINTWISE_FIT_SCALES: [f64; 5] = [0.001, 0.002, 0.004, 0.008, 0.016];

/// `bubble-check`: Sobolev estimate, threshold margins, exponent fits.
pub fn bubble_check(cfg: &RunConfig, out: &Path) -> CliResult<String> {
    fs::create_dir_all(out)?;
    let p = cfg.params;
    let g = cfg.grid();
    let sob = sobolev_constant_estimate(g, p.s)?;
    let mut csv = format!("{}\n", ThresholdReport::CSV_HEADER);
    let mut text = format!("S_est={:.12e}\nS_spread={:.12e}\n", sob.value, sob.spread);
    for eps in bubble_scales(cfg) {
        let spec = BubbleSpec::new(eps, &g).with_numerator(cfg.numerator);
        let r = threshold_check_with(&p, &spec, g, sob.value)?;
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    fs::write(out.join("bubbles.csv"), csv)?;
    let mut fits = String::from("quantity,slope,predicted,log_factor,error\n");
    for q in [Quantity::Mass, Quantity::PNorm(p.q), Quantity::KineticExcess, Quantity::CritExcess] {
        let scales = if q == Quantity::KineticExcess { &FIT_SCALES } else { &POINTWISE_FIT_SCALES };
        let f = asymptotic_exponent_fit(p.s, q, scales)?;
        let _ = writeln!(
            fits,
            "{},{:.6e},{:.6e},{},{:.3e}",
            q.name(),
            f.slope,
            f.predicted,
            f.log_factor,
            f.error()
        );
        let _ = writeln!(text, "{}_slope={:.6e} predicted={:.6e}", q.name(), f.slope, f.predicted);
    }
    fs::write(out.join("fits.csv"), fits)?;
    fs::write(out.join("bubbles.txt"), &text)?;
    Ok(text)
}

/// Parameter tuples of the sweep in row-major order `(mu, lambda, a)`.
pub fn sweep_points(cfg: &RunConfig) -> Vec<Params> {
    let p = cfg.params;
    let or = |v: &[f64], d: f64| if v.is_empty() { vec![d] } else { v.to_vec() };
    let mut pts = Vec::new();
    for &mu in &or(&cfg.sweep_mu, p.mu) {
        for &lambda in &or(&cfg.sweep_lambda, p.lambda) {
            for &a in &or(&cfg.sweep_a, p.a) {
                pts.push(Params { mu, lambda, a, ..p });
            }
        }
    }
    pts
}

/// `sweep`: independent solves on a pool of `threads` workers.
pub fn sweep(cfg: &RunConfig, out: &Path, threads: usize) -> CliResult<(String, bool)> {
    fs::create_dir_all(out)?;
    fs::write(out.join("params.txt"), cfg.echo())?;
    let pts = sweep_points(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Other(e.to_string()))?;
    let results: Vec<CliResult<(Mode, Vec<Solution>)>> =
        pool.install(|| pts.par_iter().map(|p| solve_params(cfg, *p)).collect());
    let mut summary = format!("{SUMMARY_HEADER}\n");
    let mut all_ok = true;
    for (i, (p, res)) in pts.iter().zip(results).enumerate() {
        let (mode, sols) = res?;
        let dir = out.join(format!("run-{i:03}"));
        let run_cfg = RunConfig { params: *p, sweep_mu: vec![], sweep_lambda: vec![], sweep_a: vec![], out: dir.clone(), ..cfg.clone() };
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("params.txt"), run_cfg.echo())?;
        let mut run_summary = format!("{SUMMARY_HEADER}\n");
        for (j, sol) in sols.iter().enumerate() {
            let sdir = if sols.len() == 1 { dir.clone() } else { dir.join(format!("solution-{j:03}")) };
            write_solution(&sdir, &run_cfg, sol)?;
            let row = summary_row(j, &run_cfg, p, mode, sol);
            run_summary.push_str(&row);
            run_summary.push('\n');
            summary.push_str(&summary_row(i, &run_cfg, p, mode, sol));
            summary.push('\n');
            all_ok &= sol.converged;
        }
        fs::write(dir.join("summary.csv"), run_summary)?;
    }
    fs::write(out.join("summary.csv"), &summary)?;
    Ok((summary, all_ok))
}

/// Drops the trailing wall-clock column of every summary row.
pub fn strip_wall_clock(summary: &str) -> String {
    summary
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Energy report of a field read from a dump, for re-checking artifacts.
pub fn report_of(cfg: &RunConfig, path: &Path) -> CliResult<EnergyReport> {
    let u = read_field(path)?;
    Ok(model_for(cfg, cfg.params)?.energy(&u)?)
}
