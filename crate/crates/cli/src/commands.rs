use std::collections::BTreeMap;
use std::io::Write;

use anyhow::{Context, Result};
use confgauge_core::smoothing::{
    default_rate_eps, ellipticity_constant, ellipticity_preservation, parametrix_residual, regularity_rate,
    smooth_split, synth_zygmund_symbol,
};
use confgauge_core::solver::solve_dirichlet;
use confgauge_core::suite::{run_suite, Check, SuiteName};
use confgauge_core::symbol::ellipticity_certificate;
use confgauge_core::tensor::{
    bach_at, contracted_christoffel, cotton_at, curvature_bundle, gamma_tilde, gauge_residual, obstruction4_at,
    schouten, weyl, WeylForm,
};
use confgauge_core::{Error, FrozenPoint, LPBundle, MetricSpec, PointTensor, SolveStatus, SolverConfig, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::run::{load_spec, num, usage, Run};
use crate::{Cli, Command, PointArgs, Quantity};

/// `Ok(true)` when every check passed.
pub fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Curvature { which, points } => curvature(cli, which, points),
        Command::Certify { at, samples } => certify(cli, at.as_deref(), *samples),
        Command::GaugeCheck { points } => gauge_check(cli, points),
        Command::Solve { config, grid, max_iter } => solve(cli, config.as_deref(), *grid, *max_iter),
        Command::Smooth { config, r, m, delta, d, grid, amplitude, j0 } => {
            let flags = SmoothFlags { r: *r, m: *m, delta: *delta, d: *d, grid: *grid, amplitude: *amplitude, j0: *j0 };
            smooth(cli, config.as_deref(), &flags)
        }
        Command::Suite { name } => suite(cli, name),
    }
}

fn emit(cli: &Cli, doc: &Value, summary: &[String]) {
    // The files are already written; a closed stdout is not an error.
    let mut out = std::io::stdout().lock();
    if cli.json {
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(doc).expect("report is valid JSON"));
    } else {
        for line in summary {
            let _ = writeln!(out, "{line}");
        }
    }
}

fn check_lines(checks: &[Check]) -> Vec<String> {
    checks.iter().map(|c| format!("{} {}", if c.pass { "ok  " } else { "FAIL" }, c.describe())).collect()
}

fn parse_point(s: &str, n: usize) -> Result<Vec<f64>> {
    let x: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| usage(format!("bad point `{s}`: {e}")))?;
    if x.len() != n {
        return Err(usage(format!("point `{s}` has {} coordinates, the metric has dimension {n}", x.len())));
    }
    Ok(x)
}

/// Explicit points, or seeded uniform points in the inner 90% of the box.
fn sample_points(spec: &MetricSpec, args: &PointArgs, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !args.at.is_empty() {
        return args.at.iter().map(|s| parse_point(s, spec.dim())).collect();
    }
    if args.points == 0 {
        return Err(usage("--points must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..args.points)
        .map(|_| spec.bounds().iter().map(|[lo, hi]| lo + (hi - lo) * (0.05 + 0.9 * rng.random::<f64>())).collect())
        .collect())
}

fn index_label(t: &PointTensor, flat: usize) -> String {
    let n = t.dim();
    let mut idx = vec![0; t.rank()];
    let mut r = flat;
    for slot in idx.iter_mut().rev() {
        *slot = r % n;
        r /= n;
    }
    idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

/// Canonical order, `all` expanded to what the dimension supports.
fn expand(which: &[Quantity], n: usize) -> Vec<Quantity> {
    use Quantity::*;
    let every = [Christoffel, Riemann, Ricci, Scalar, Schouten, Weyl, Cotton, Bach, Obstruction, Gauge];
    every.into_iter().filter(|q| which.contains(q) || (which.contains(&All) && (*q != Obstruction || n == 4))).collect()
}

fn quantity_name(q: Quantity) -> &'static str {
    match q {
        Quantity::All => "all",
        Quantity::Christoffel => "christoffel",
        Quantity::Riemann => "riemann",
        Quantity::Ricci => "ricci",
        Quantity::Scalar => "scalar",
        Quantity::Schouten => "schouten",
        Quantity::Weyl => "weyl",
        Quantity::Cotton => "cotton",
        Quantity::Bach => "bach",
        Quantity::Obstruction => "obstruction",
        Quantity::Gauge => "gauge_residual",
    }
}

fn curvature(cli: &Cli, which: &[Quantity], args: &PointArgs) -> Result<bool> {
    let spec = load_spec(cli.spec.as_deref())?;
    let n = spec.dim();
    let set = expand(which, n);
    if set.contains(&Quantity::Obstruction) && n != 4 {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "the obstruction tensor is only available for n = 4".into(),
        }
        .into());
    }
    let order = if set.iter().any(|q| matches!(q, Quantity::Bach | Quantity::Obstruction)) {
        4
    } else if set.contains(&Quantity::Cotton) {
        3
    } else {
        2
    };
    let points = sample_points(&spec, args, cli.seed)?;
    let mut run = Run::new("curvature", cli.spec.as_deref(), cli.seed, &cli.out)?;
    run.set("which", set.iter().map(|q| quantity_name(*q)).collect::<Vec<_>>());
    run.set("points", &points);
    if let Some(t) = cli.tol {
        run.set("tol", t);
    }

    let mut records = Vec::new();
    let mut rows = Vec::new();
    let mut sup: BTreeMap<&str, f64> = BTreeMap::new();
    for (ip, x) in points.iter().enumerate() {
        let jet = spec.jet(x, order)?;
        let bundle = curvature_bundle(&jet)?;
        let mut rec = serde_json::Map::new();
        rec.insert("x".into(), json!(x));
        for q in &set {
            let name = quantity_name(*q);
            let values: Vec<f64> = match q {
                Quantity::Scalar => {
                    rows.push(vec![ip.to_string(), name.into(), String::new(), num(bundle.scalar)]);
                    rec.insert(name.into(), json!(bundle.scalar));
                    vec![bundle.scalar]
                }
                Quantity::Gauge => {
                    let r = gauge_residual(&jet)?;
                    for (k, v) in r.iter().enumerate() {
                        rows.push(vec![ip.to_string(), name.into(), k.to_string(), num(*v)]);
                    }
                    rec.insert(name.into(), json!(r));
                    r
                }
                _ => {
                    let t = match q {
                        Quantity::Christoffel => bundle.christoffel.clone(),
                        Quantity::Riemann => bundle.riemann.clone(),
                        Quantity::Ricci => bundle.ricci.clone(),
                        Quantity::Schouten => schouten(&bundle, &jet)?,
                        Quantity::Weyl => weyl(&bundle, &jet, WeylForm::AllDown)?,
                        Quantity::Cotton => cotton_at(&jet)?.tensor,
                        Quantity::Bach => bach_at(&jet)?.tensor,
                        Quantity::Obstruction => obstruction4_at(&jet)?.tensor,
                        Quantity::All | Quantity::Scalar | Quantity::Gauge => unreachable!("handled above"),
                    };
                    for (k, v) in t.comps().iter().enumerate() {
                        rows.push(vec![ip.to_string(), name.into(), index_label(&t, k), num(*v)]);
                    }
                    rec.insert(name.into(), serde_json::to_value(&t)?);
                    t.comps().to_vec()
                }
            };
            let m = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let e = sup.entry(name).or_insert(0.0);
            *e = e.max(m);
        }
        records.push(Value::Object(rec));
    }

    let checks: Vec<Check> = match cli.tol {
        Some(tol) => sup.iter().map(|(k, v)| Check::at_most(format!("max |{k}|"), *v, tol)).collect(),
        None => Vec::new(),
    };
    let pass = checks.iter().all(|c| c.pass);
    run.csv("curvature.csv", &["point", "quantity", "index", "value"], rows)?;
    let doc = run.report(
        "curvature.json",
        json!({
            "spec": spec.name(),
            "dimension": n,
            "points": records,
            "max_abs": sup,
            "tolerance": cli.tol,
            "checks": checks,
            "pass": pass,
        }),
    )?;
    let mut summary: Vec<String> = sup.iter().map(|(k, v)| format!("max |{k}| = {v:.6e}")).collect();
    summary.extend(check_lines(&checks));
    emit(cli, &doc, &summary);
    Ok(pass)
}

fn certify(cli: &Cli, at: Option<&[f64]>, samples: usize) -> Result<bool> {
    let spec = load_spec(cli.spec.as_deref())?;
    let n = spec.dim();
    let x: Vec<f64> = match at {
        Some(x) if x.len() != n => {
            return Err(usage(format!("--at has {} coordinates, the metric has dimension {n}", x.len())))
        }
        Some(x) => x.to_vec(),
        None => spec.bounds().iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect(),
    };
    let mut run = Run::new("certify", cli.spec.as_deref(), cli.seed, &cli.out)?;
    run.set("at", &x);
    run.set("samples", samples);
    let fp = FrozenPoint::from_jet(&spec.jet(&x, 0)?);
    let mut cert = ellipticity_certificate(&fp, samples, &format!("{} at {x:?}", spec.name()))?;
    if let Some(t) = cli.tol {
        run.set("tol", t);
        cert.threshold = t;
        cert.pass = cert.sigma_min > t;
    }
    let header: Vec<String> = (1..=n).map(|a| format!("xi{a}")).chain(["sigma_min".to_string()]).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = cert.rows.iter().map(|(xi, s)| xi.iter().chain([s]).map(|v| num(*v)).collect());
    run.csv("certificate.csv", &header, rows)?;
    let doc = run.report("certificate.json", json!({ "certificate": cert }))?;
    let summary = vec![format!(
        "{} sigma_min = {:.6e} over {} directions (threshold {:.1e})",
        if cert.pass { "PASS" } else { "FAIL" },
        cert.sigma_min,
        cert.evaluated,
        cert.threshold
    )];
    emit(cli, &doc, &summary);
    Ok(cert.pass)
}

fn gauge_check(cli: &Cli, args: &PointArgs) -> Result<bool> {
    let spec = load_spec(cli.spec.as_deref())?;
    let points = sample_points(&spec, args, cli.seed)?;
    let tol = cli.tol.unwrap_or(1e-10);
    let mut run = Run::new("gauge-check", cli.spec.as_deref(), cli.seed, &cli.out)?;
    run.set("points", &points);
    run.set("tol", tol);
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut worst = 0.0f64;
    for (ip, x) in points.iter().enumerate() {
        let jet = spec.jet(x, 1)?;
        let gamma = contracted_christoffel(&jet)?;
        let tilde = gamma_tilde(&jet)?;
        let res = gauge_residual(&jet)?;
        for k in 0..spec.dim() {
            rows.push(vec![ip.to_string(), k.to_string(), num(gamma[k]), num(tilde[k]), num(res[k])]);
            worst = worst.max(res[k].abs());
        }
        records.push(json!({ "x": x, "gamma": gamma, "gamma_tilde": tilde, "residual": res }));
    }
    let check = Check::at_most("max_k |Γ^k − Γ̃^k|", worst, tol);
    run.csv("gauge.csv", &["point", "k", "gamma", "gamma_tilde", "residual"], rows)?;
    let doc = run.report(
        "gauge.json",
        json!({ "spec": spec.name(), "points": records, "checks": [&check], "pass": check.pass }),
    )?;
    emit(cli, &doc, &check_lines(std::slice::from_ref(&check)));
    Ok(check.pass)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn solve(cli: &Cli, config: Option<&std::path::Path>, grid: Option<usize>, max_iter: Option<usize>) -> Result<bool> {
    let spec = load_spec(cli.spec.as_deref())?;
    let n = spec.dim();
    let mut cfg: SolverConfig = match config {
        Some(p) => read_json(p)?,
        None => SolverConfig::default(),
    };
    let mut run = Run::new("solve", cli.spec.as_deref(), cli.seed, &cli.out)?;
    if let Some(p) = config {
        run.set("config", p.display().to_string());
    }
    if let Some(k) = grid {
        cfg.grid = Some(vec![k; n]);
        run.set("grid", k);
    }
    if let Some(m) = max_iter {
        cfg.max_iter = m;
        run.set("max_iter", m);
    }
    if let Some(t) = cli.tol {
        cfg.tol = t;
        run.set("tol", t);
    }
    let g = cfg.grid_for(&spec)?;
    let (u, report) = solve_dirichlet(&spec, &cfg)?;

    let mut checks = vec![
        Check::holds("converged", report.status == SolveStatus::Converged),
        Check::at_most("final gradient sup-norm", report.grad_sup, cfg.tol),
        Check::holds("orientation-preserving map", report.diffeomorphic),
    ];
    if let (Some(s), Some(i)) = (&report.gauge, &report.identity_gauge) {
        checks.push(Check::at_most("mean pulled-back gauge residual vs identity coordinates", s.mean, i.mean));
    }
    let pass = checks.iter().all(|c| c.pass);

    run.csv(
        "solve_energy.csv",
        &["iteration", "energy"],
        report.energies.iter().enumerate().map(|(i, e)| vec![i.to_string(), num(*e)]),
    )?;
    let header: Vec<String> = std::iter::once("node".to_string())
        .chain((1..=n).map(|a| format!("x{a}")))
        .chain((1..=n).map(|a| format!("u{a}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..g.node_count()).map(|k| {
        std::iter::once(k.to_string())
            .chain(g.coords(k).into_iter().map(num))
            .chain(u.at(k).into_iter().map(num))
            .collect()
    });
    run.csv("solution.csv", &header, rows)?;
    let doc = run.report(
        "solve.json",
        json!({ "spec": spec.name(), "config": cfg, "report": report, "checks": checks, "pass": pass }),
    )?;
    let mut summary = vec![format!(
        "{:?} after {} iterations, energy {:.10e}, min Jacobian {:.4e}",
        report.status, report.iterations, report.energy, report.min_jacobian
    )];
    if let (Some(s), Some(i)) = (&report.gauge, &report.identity_gauge) {
        summary.push(format!(
            "gauge residual mean {:.4e} (identity {:.4e}), max {:.4e} (identity {:.4e})",
            s.mean, i.mean, s.max, i.max
        ));
    }
    summary.extend(check_lines(&checks));
    emit(cli, &doc, &summary);
    Ok(pass)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SmoothConfig {
    symbol: SynthConfig,
    /// `ε_j = 2^{-jδ}`.
    delta: f64,
    /// Low-pass cutoff: `φ = 1` on `|ξ| ≤ tau`.
    tau: f64,
    /// First parametrix frequency is `2^j0`.
    j0: u32,
    /// `x`-grid of the one-dimensional companion symbol the rate is measured on.
    rate_grid: usize,
    /// Accepted half-width around `r` for the low-pass rate slope.
    rate_tol: f64,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        SmoothConfig { symbol: SynthConfig::default(), delta: 0.5, tau: 1.0, j0: 3, rate_grid: 1 << 16, rate_tol: 0.15 }
    }
}

struct SmoothFlags {
    r: Option<f64>,
    m: Option<f64>,
    delta: Option<f64>,
    d: Option<usize>,
    grid: Option<usize>,
    amplitude: Option<f64>,
    j0: Option<u32>,
}

fn smooth(cli: &Cli, config: Option<&std::path::Path>, f: &SmoothFlags) -> Result<bool> {
    let mut cfg: SmoothConfig = match config {
        Some(p) => read_json(p)?,
        None => SmoothConfig::default(),
    };
    let mut run = Run::new("smooth", None, cli.seed, &cli.out)?;
    if let Some(p) = config {
        run.set("config", p.display().to_string());
    }
    cfg.symbol.seed = cli.seed;
    if let Some(d) = f.d {
        cfg.symbol.d = d;
        // A 2-d torus at the 1-d default size would not fit in memory.
        if d == 2 && config.is_none() && f.grid.is_none() {
            cfg.symbol.grid = 64;
            cfg.symbol.xi_max = 15;
        }
        run.set("d", d);
    }
    if let Some(g) = f.grid {
        cfg.symbol.grid = g;
        cfg.symbol.xi_max = (g / 4).saturating_sub(1);
        run.set("grid", g);
    }
    for (key, val, slot) in [
        ("r", f.r, &mut cfg.symbol.r),
        ("m", f.m, &mut cfg.symbol.m),
        ("amplitude", f.amplitude, &mut cfg.symbol.amplitude),
        ("delta", f.delta, &mut cfg.delta),
    ] {
        if let Some(v) = val {
            *slot = v;
            run.set(key, v);
        }
    }
    if let Some(j) = f.j0 {
        cfg.j0 = j;
        run.set("j0", j);
    }
    if let Some(t) = cli.tol {
        cfg.rate_tol = t;
        run.set("tol", t);
    }

    let need = (1usize << (cfg.j0 + 4)) + 2;
    if cfg.symbol.xi_max < need {
        return Err(usage(format!(
            "the parametrix at j0 = {} needs xi_max >= {need}, the lattice has {}",
            cfg.j0, cfg.symbol.xi_max
        )));
    }
    let p = synth_zygmund_symbol(&cfg.symbol)?;
    let reach = cfg.symbol.xi_max as f64 * (cfg.symbol.d as f64).sqrt();
    let lp = LPBundle::covering(cfg.delta, cfg.tau, reach)?;
    let split = smooth_split(&p, &lp)?;
    let mut checks = Vec::new();

    let companion = synth_zygmund_symbol(&SynthConfig { d: 1, grid: cfg.rate_grid, xi_max: 1, ..cfg.symbol.clone() })?;
    let col = companion.find([1, 0]).context("companion lattice lacks ξ = 1")?;
    let rate = match regularity_rate(&companion, col, &default_rate_eps(), cfg.tau) {
        Ok(fit) => {
            checks.push(Check::within("low-pass rate slope", fit.slope, cfg.symbol.r, cfg.rate_tol));
            Some(fit)
        }
        Err(Error::DegenerateFit(msg)) => {
            checks.push(Check::holds(format!("low-pass rate slope: {msg}"), false));
            None
        }
        Err(e) => return Err(e.into()),
    };

    let c = ellipticity_constant(&p, 1.0);
    let (ellipticity, parametrix) = match ellipticity_preservation(&split, c) {
        Ok(ell) => {
            checks.push(Check::holds("ellipticity band is nonempty", ell.pass));
            checks.push(Check::at_least("min λ_min(p♯ᵗp♯)/(C|ξ|^2m) on the band", ell.band_min_ratio, 0.5));
            let table = parametrix_residual(&split, ell.band_start, cfg.j0, cli.seed)?;
            checks.push(Check::holds("parametrix residual strictly decreasing", table.strictly_decreasing));
            (Some(ell), Some(table))
        }
        Err(Error::NoEllipticityBand) => {
            checks.push(Check::holds("ellipticity band is nonempty", false));
            (None, None)
        }
        Err(e) => return Err(e.into()),
    };
    let pass = checks.iter().all(|c| c.pass);

    run.csv(
        "smooth_shells.csv",
        &["radius", "flat_sup"],
        split.flat_shells.iter().map(|(r, s)| vec![num(*r), num(*s)]),
    )?;
    if let Some(fit) = &rate {
        run.csv("smooth_rate.csv", &["eps", "sup"], fit.eps.iter().zip(&fit.sup).map(|(e, s)| vec![num(*e), num(*s)]))?;
    }
    if let Some(t) = &parametrix {
        run.csv(
            "smooth_parametrix.csv",
            &["frequency", "residual", "below_band"],
            t.rows.iter().map(|r| vec![num(r.frequency), num(r.residual), r.below_band.to_string()]),
        )?;
    }
    let doc = run.report(
        "smooth.json",
        json!({
            "config": cfg,
            "ellipticity_constant": c,
            "split": split,
            "flat_exponent_reference": cfg.symbol.m - cfg.symbol.r * cfg.delta,
            "rate": rate,
            "ellipticity": ellipticity,
            "parametrix": parametrix,
            "checks": checks,
            "pass": pass,
        }),
    )?;
    let mut summary = vec![format!(
        "p♭ shell exponent {:.4} (m − rδ = {:.4}), reconstruction defect {:.3e}",
        split.flat_exponent,
        cfg.symbol.m - cfg.symbol.r * cfg.delta,
        split.reconstruction_defect
    )];
    summary.extend(check_lines(&checks));
    emit(cli, &doc, &summary);
    Ok(pass)
}

fn suite(cli: &Cli, name: &str) -> Result<bool> {
    let which = SuiteName::parse(name)
        .ok_or_else(|| usage(format!("unknown suite `{name}` (invariance, symbols, solver, smoothing)")))?;
    let mut run = Run::new("suite", None, cli.seed, &cli.out)?;
    run.set("name", name);
    let report = run_suite(which, cli.seed);
    let doc = run.report(&format!("suite_{name}.json"), json!({ "report": report }))?;
    let mut summary = Vec::new();
    for c in &report.criteria {
        summary.push(format!("criterion {:>2} {}  {}", c.id, if c.pass { "PASS" } else { "FAIL" }, c.title));
        summary.extend(check_lines(&c.checks).into_iter().map(|l| format!("    {l}")));
    }
    summary.push(format!("suite {name}: {}", if report.pass { "PASS" } else { "FAIL" }));
    emit(cli, &doc, &summary);
    Ok(report.pass)
}
