//! Acceptance criteria 1-9. Each test prints one PASS/FAIL line (written to
//! stderr directly, so it shows without `--nocapture`) and then asserts.

use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use fsp_cli::commands::{self, strip_wall_clock};
use fsp_cli::config::{parse_config, RunConfig};
use fsp_cli::verify::{self, Check};
use fsp_core::bubbles::{asymptotic_exponent_fit, least_squares_slope, Quantity};
use fsp_core::functional::{Model, Params};
use fsp_core::optimizer::{distance, mountain_pass_level_estimate, seeds, Symmetry};
use fsp_core::spectral::mass_project;
use fsp_core::{Field, Grid};

fn config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    parse_config(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn report(id: u32, title: &str, ok: bool, detail: &str) {
    let line = format!("criterion {id} {} {title}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
}

fn within(c: &Check, tol: f64) -> bool {
    c.value.is_finite() && c.value < tol
}

fn describe(checks: &[Check]) -> String {
    checks.iter().map(|c| format!("{}={:.2e}", c.name, c.value)).collect::<Vec<_>>().join(" ")
}

fn gaussian(grid: Grid, sigma: f64, a: f64) -> Field {
    mass_project(&Field::radial(grid, |r| (-0.5 * r * r / (sigma * sigma)).exp()).unwrap(), a).unwrap()
}

#[test]
fn criterion_1_operator_suite() {
    let grid = Grid::new(64, 16.0).unwrap();
    let start = Instant::now();
    let checks = verify::operator_checks(grid, 0.8, 0).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let tol = |name: &str| match name {
        "frac_laplacian_eigenfunction" | "riesz_periodic_eigenfunction" => 1e-12,
        "frac_laplacian_self_adjoint" | "frac_laplacian_semigroup" => 1e-10,
        "riesz_free_space_gaussian_oracle" => 1e-3,
        other => panic!("unexpected check {other}"),
    };
    let ok = checks.len() == 5 && checks.iter().all(|c| within(c, tol(&c.name))) && secs < 30.0;
    report(1, "operator suite", ok, &format!("{} runtime={secs:.1}s", describe(&checks)));
    assert!(ok);
}

#[test]
fn criterion_2_gradient() {
    let cfg = config("supercritical.cfg");
    let grid = cfg.grid();
    let model = Model::new(grid, cfg.params).unwrap();
    let u = gaussian(grid, grid.length() / 16.0, cfg.params.a);
    let c = verify::gradient_check(&model, &u, 20, 0).unwrap();
    let ok = within(&c, 1e-5);
    report(2, "gradient vs central differences (20 directions)", ok, &describe(&[c]));
    assert!(ok);
}

#[test]
fn criterion_3_fiber_identities() {
    let cfg = config("supercritical.cfg");
    let mut parts = Vec::new();
    let mut scans = Vec::new();
    let mut ok = true;
    for n in [64, 96] {
        let grid = Grid::new(n, cfg.length).unwrap();
        let model = Model::new(grid, cfg.params).unwrap();
        // The widest Gaussian whose theta = -1 dilation stays in the box.
        let checks = verify::fiber_checks(&model, verify::fiber_sigma(Grid::new(64, cfg.length).unwrap())).unwrap();
        let [dpsi, scan, drift] = [&checks[0], &checks[1], &checks[2]];
        ok &= within(dpsi, 1e-10);
        if n == 64 {
            ok &= within(scan, 1e-2) && within(drift, 1e-3);
        }
        scans.push(scan.value);
        parts.push(format!("n={n} {}", describe(&checks)));
    }
    ok &= scans[1] < scans[0];
    report(3, "fiber identities", ok, &parts.join("; "));
    assert!(ok);
}

#[test]
fn criterion_4_supercritical_solver() {
    let cfg = config("supercritical.cfg");
    let start = Instant::now();
    let (_, sols) = commands::solve_params(&cfg, cfg.params).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let sol = &sols[0];
    let r = &sol.report;
    let threshold = sol.threshold.unwrap();
    let alpha_agree = (r.alpha - r.alpha_pohozaev).abs() / r.alpha.abs();
    let items = [
        ("converged", sol.converged),
        ("residual<1e-6", r.residual < 1e-6),
        ("|P|<1e-6(1+|I|)", r.pohozaev.abs() < 1e-6 * (1.0 + r.total.abs())),
        ("alpha<0", r.alpha < 0.0),
        ("alpha_agree<1e-3", alpha_agree < 1e-3),
        ("I>0", r.total > 0.0),
        ("I<threshold", r.total < threshold),
        ("runtime<300s", secs < 300.0),
    ];
    let ok = items.iter().all(|(_, b)| *b);
    let failed: Vec<&str> = items.iter().filter(|(_, b)| !b).map(|(n, _)| *n).collect();
    let detail = format!(
        "residual={:.2e} P={:.3e} I={:.4e} alpha={:.4e} alpha_agree={:.2e} threshold={:.4e} runtime={secs:.1}s failed={failed:?}",
        r.residual, r.pohozaev, r.total, r.alpha, alpha_agree, threshold
    );
    report(4, "supercritical solver contracts", ok, &detail);
    assert!(ok);
}

#[test]
fn criterion_5_subcritical_multiplicity() {
    let cfg = config("subcritical.cfg");
    let single = RunConfig { k: 1, ..cfg.clone() };
    let (_, sols) = commands::solve_params(&single, cfg.params).unwrap();
    let min = &sols[0];
    let (_, many) = commands::solve_params(&cfg, cfg.params).unwrap();
    assert_eq!(cfg.k, 4);
    let a = cfg.params.a;
    let negative = many.iter().filter(|s| s.converged && s.report.total < 0.0 && s.report.alpha < 0.0).count();
    let ok = min.converged && min.report.total < 0.0 && min.report.alpha < 0.0 && negative >= 2;
    let mut min_dist = f64::INFINITY;
    for (i, x) in many.iter().enumerate() {
        for y in &many[i + 1..] {
            min_dist = min_dist.min(distance(&x.u, &y.u));
        }
    }
    let ok = ok && min_dist > 1e-2 * a;
    let detail = format!(
        "minimizer I={:.4e} alpha={:.4e} converged={}; multi_start k=4 distinct={} negative_converged={negative} min_distance/a={:.3e}",
        min.report.total,
        min.report.alpha,
        min.converged,
        many.len(),
        min_dist / a
    );
    report(5, "subcritical contracts", ok, &detail);
    assert!(ok);
}

#[test]
fn criterion_6_bubble_asymptotics() {
    let start = Instant::now();
    let pointwise = [0.001, 0.002, 0.004, 0.008, 0.016];
    let kinetic = commands::FIT_SCALES;
    // (s, quantity, scales, expected exponent, tolerance).
    let cases: [(f64, Quantity, &[f64], f64, f64); 6] = [
        (0.5, Quantity::Mass, &pointwise, 1.0, 0.15),
        (0.9, Quantity::Mass, &pointwise, 1.2, 0.15),
        (0.8, Quantity::PNorm(4.0), &pointwise, 0.2, 0.2),
        (0.75, Quantity::PNorm(2.5), &pointwise, 1.125, 0.2),
        (0.8, Quantity::KineticExcess, &kinetic, 1.4, 0.3),
        (0.8, Quantity::CritExcess, &pointwise, 3.0, 0.3),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (s, q, scales, expected, tol) in cases {
        let f = asymptotic_exponent_fit(s, q, scales).unwrap();
        assert!((f.predicted - expected).abs() < 1e-12, "{} at s = {s}", q.name());
        ok &= (f.slope - expected).abs() < tol;
        parts.push(format!("{}@s={s}: {:.3} vs {expected} (tol {tol})", q.name(), f.slope));
    }
    // Kinetic and critical excesses at the second shipped s.
    for (q, scales, expected) in [(Quantity::KineticExcess, &kinetic[..], 1.5), (Quantity::CritExcess, &pointwise[..], 3.0)] {
        let f = asymptotic_exponent_fit(0.75, q, scales).unwrap();
        ok &= (f.slope - expected).abs() < 0.3;
        parts.push(format!("{}@s=0.75: {:.3} vs {expected} (tol 0.3)", q.name(), f.slope));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 600.0;
    report(6, "bubble asymptotics", ok, &format!("{}; runtime={secs:.1}s", parts.join("; ")));
    assert!(ok);
}

#[test]
fn criterion_7_level_asymptotics() {
    let cfg = config("supercritical.cfg");
    let grid = cfg.grid();
    let p = cfg.params;
    let sd: Vec<Field> = seeds(grid, p.a, 4, cfg.solver.seed)
        .unwrap()
        .into_iter()
        .filter(|s| s.symmetry == Symmetry::None)
        .map(|s| s.field)
        .collect();
    let mus = [1.0, 10.0, 100.0];
    let levels: Vec<f64> = mus
        .iter()
        .map(|&mu| {
            let model = Model::new(grid, Params { mu, ..p }).unwrap();
            mountain_pass_level_estimate(&model, &sd, &cfg.solver).unwrap()
        })
        .collect();
    let xs: Vec<f64> = mus.iter().map(|m| m.ln()).collect();
    let ys: Vec<f64> = levels.iter().map(|c| c.ln()).collect();
    let slope = least_squares_slope(&xs, &ys);
    let rate = 4.0 * p.s / (3.0 * p.q - 6.0 - 4.0 * p.s);
    let decreasing = levels.windows(2).all(|w| w[1] < w[0]);
    let ok = decreasing && levels.iter().all(|c| *c > 0.0) && slope < 0.0 && slope <= -0.5 * rate;
    let shown: Vec<String> = levels.iter().map(|c| format!("{c:.4e}")).collect();
    let detail = format!("c(1,10,100)=[{}] slope={slope:.3} bound_rate={rate:.3}", shown.join(", "));
    report(7, "mountain-pass level decay in mu", ok, &detail);
    assert!(ok);
}

#[test]
fn criterion_8_constants_and_regimes() {
    let tri = verify::trichotomy_check(10_000, 0);
    let prec = verify::hypotheses_precision_checks(100, 0);
    let ok = tri.value == 0.0 && within(&prec[0], 1e-9) && prec[1].value == 0.0;
    report(8, "trichotomy and extended-precision hypotheses", ok, &describe(&[vec![tri], prec].concat()));
    assert!(ok);
}

#[test]
fn criterion_9_reproducibility() {
    let cfg = config("supercritical.cfg");
    let checks = verify::run(&cfg).unwrap();
    let verify_ok = checks.iter().all(Check::pass);
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = commands::solve(&cfg, &dir.path().join("a")).unwrap();
    let (b, _) = commands::solve(&cfg, &dir.path().join("b")).unwrap();
    let identical = strip_wall_clock(&a) == strip_wall_clock(&b);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass()).map(|c| c.name.as_str()).collect();
    let ok = verify_ok && identical;
    report(9, "reproducibility", ok, &format!("verify_exit={} failed={failed:?} identical_summaries={identical}", u8::from(!verify_ok)));
    assert!(ok);
}
