//! Acceptance batteries. Every check records the value it measured and the
//! bound it was held to, so reports stay self-describing.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bundled::bundled;
use crate::error::Result;
use crate::expr::{parse, Expr};
use crate::metric::MetricSpec;
use crate::smoothing::{
    default_rate_eps, ellipticity_constant, ellipticity_preservation, parametrix_residual, regularity_rate,
    smooth_split, synth_zygmund_symbol, LPBundle, SynthConfig,
};
use crate::solver::{energy_gradient, n_energy, solve_dirichlet, solve_from, EnergyModel, GridMap, SolverConfig};
use crate::symbol::{
    bach_oscillation_scaling, ellipticity_certificate, loglog_slope, plane_wave_symbol_oracle, q_apply,
    q_diagonal_factored, q_eigenvalues, weyl_contraction_identity, weyl_identity_unchecked, Covector, FrozenPoint,
    OracleConfig, OracleOp, SymPerturbation,
};
use crate::tensor::{
    bach_at, contracted_christoffel, cotton_at, curvature_bundle, gamma_tilde, gauge_residual, obstruction4_at,
    schouten, weyl, WeylForm,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Within,
    Holds,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    /// Bound for `AtMost`/`AtLeast`, centre for `Within`.
    pub target: f64,
    /// Half-width for `Within`, zero otherwise.
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            value,
            relation: Relation::AtMost,
            target: bound,
            tolerance: 0.0,
            pass: value <= bound,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            value,
            relation: Relation::AtLeast,
            target: bound,
            tolerance: 0.0,
            pass: value >= bound,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, centre: f64, half_width: f64) -> Check {
        Check {
            name: name.into(),
            value,
            relation: Relation::Within,
            target: centre,
            tolerance: half_width,
            pass: (value - centre).abs() <= half_width,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Check {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            relation: Relation::Holds,
            target: 1.0,
            tolerance: 0.0,
            pass: ok,
        }
    }

    fn failed(name: &str, err: &crate::Error) -> Check {
        Check {
            name: format!("{name}: {err}"),
            value: f64::NAN,
            relation: Relation::Holds,
            target: 1.0,
            tolerance: 0.0,
            pass: false,
        }
    }

    pub fn describe(&self) -> String {
        match self.relation {
            Relation::AtMost => format!("{} = {:.3e} <= {:.1e}", self.name, self.value, self.target),
            Relation::AtLeast => format!("{} = {:.3e} >= {:.1e}", self.name, self.value, self.target),
            Relation::Within => format!("{} = {:.4} in {} ± {}", self.name, self.value, self.target, self.tolerance),
            Relation::Holds => format!("{}: {}", self.name, if self.pass { "yes" } else { "no" }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub const TITLES: [&str; 10] = [
    "flat-metric annihilation",
    "conformal scaling laws",
    "gauge identity on the conformally flat class",
    "ellipticity certificate",
    "factorization equivalence",
    "contracted Weyl and Bianchi identities",
    "plane-wave oracle cross-validation",
    "Bach gauge form oscillation scaling",
    "n-harmonic coordinate solver",
    "symbol smoothing and parametrix",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Invariance,
    Symbols,
    Solver,
    Smoothing,
}

impl SuiteName {
    pub fn parse(name: &str) -> Option<SuiteName> {
        match name {
            "invariance" => Some(SuiteName::Invariance),
            "symbols" => Some(SuiteName::Symbols),
            "solver" => Some(SuiteName::Solver),
            "smoothing" => Some(SuiteName::Smoothing),
            _ => None,
        }
    }

    pub fn criteria(self) -> &'static [u8] {
        match self {
            SuiteName::Invariance => &[1, 2, 3],
            SuiteName::Symbols => &[4, 5, 6, 7, 8],
            SuiteName::Solver => &[9],
            SuiteName::Smoothing => &[10],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: SuiteName,
    pub seed: u64,
    pub criteria: Vec<CriterionReport>,
    pub pass: bool,
}

pub fn run_suite(name: SuiteName, seed: u64) -> SuiteReport {
    let criteria: Vec<CriterionReport> = name.criteria().iter().map(|id| criterion(*id, seed)).collect();
    let pass = criteria.iter().all(|c| c.pass);
    SuiteReport { suite: name, seed, criteria, pass }
}

/// Runs acceptance criterion `id` (1 to 10).
pub fn criterion(id: u8, seed: u64) -> CriterionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(id as u64));
    let run = match id {
        1 => flat_annihilation(&mut rng),
        2 => conformal_scaling(&mut rng),
        3 => gauge_identity(&mut rng),
        4 => ellipticity(&mut rng),
        5 => factorization(&mut rng),
        6 => weyl_identities(&mut rng),
        7 => plane_wave(),
        8 => oscillation(),
        9 => solver(&mut rng),
        10 => smoothing(),
        _ => Ok(vec![Check::holds(format!("unknown criterion {id}"), false)]),
    };
    let checks = run.unwrap_or_else(|e| vec![Check::failed("evaluation error", &e)]);
    let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
    let title = TITLES.get(id.wrapping_sub(1) as usize).copied().unwrap_or("unknown");
    CriterionReport { id, title, checks, pass }
}

fn point_in(spec: &MetricSpec, rng: &mut ChaCha8Rng, shrink: f64) -> Vec<f64> {
    spec.bounds()
        .iter()
        .map(|[lo, hi]| {
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo) * shrink;
            rng.random_range(mid - half..mid + half)
        })
        .collect()
}

fn spec_from(name: &str, n: usize, bounds: f64, src: &[String]) -> Result<MetricSpec> {
    let g = src.iter().map(|s| parse(s, n)).collect::<Result<Vec<Expr>>>()?;
    MetricSpec::new(name, n, vec![[-bounds, bounds]; n], g)
}

fn conformal_spec(n: usize, c: &str) -> Result<MetricSpec> {
    let src: Vec<String> = (0..n * n).map(|i| if i / n == i % n { c.to_string() } else { "0".to_string() }).collect();
    spec_from("conformal", n, 0.5, &src)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(n, n) * 0.5
}

fn random_covector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() > 1e-2 {
            return v;
        }
    }
}

fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> SymPerturbation {
    SymPerturbation::new(DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)))
}

fn flat_annihilation(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let tilted3 = ["2", "0.3", "0", "0.3", "1", "0.1", "0", "0.1", "1.5"].map(String::from);
    let tilted4 =
        ["1", "0.2", "0", "0", "0.2", "2", "0", "0.1", "0", "0", "1", "0", "0", "0.1", "0", "3"].map(String::from);
    let specs = [
        bundled("flat3")?,
        bundled("flat4")?,
        spec_from("tilted3", 3, 1.0, &tilted3)?,
        spec_from("tilted4", 4, 1.0, &tilted4)?,
    ];
    let names = ["christoffel", "riemann", "ricci", "scalar", "schouten", "weyl", "cotton", "bach"];
    let mut worst = [0.0f64; 8];
    for spec in &specs {
        for _ in 0..20 {
            let x = point_in(spec, rng, 0.9);
            let jet = spec.jet(&x, 4)?;
            let b = curvature_bundle(&jet)?;
            let vals = [
                b.christoffel.max_abs(),
                b.riemann.max_abs(),
                b.ricci.max_abs(),
                b.scalar.abs(),
                schouten(&b, &jet)?.max_abs(),
                weyl(&b, &jet, WeylForm::AllDown)?.max_abs(),
                cotton_at(&jet)?.tensor.max_abs(),
                bach_at(&jet)?.tensor.max_abs(),
            ];
            for (w, v) in worst.iter_mut().zip(vals) {
                *w = w.max(v);
            }
        }
    }
    Ok(names.iter().zip(worst).map(|(n, w)| Check::at_most(format!("max |{n}|"), w, 1e-10)).collect())
}

fn conformal_scaling(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let c = parse("1 + 0.3*sin(x1)", 4)?;
    let g4 = bundled("poly4")?;
    let cg4 = g4.scaled(&c)?;
    let g3 = bundled("poly3")?;
    let cg3 = g3.scaled(&parse("1 + 0.3*sin(x1)", 3)?)?;
    let (mut wd, mut wd_ref) = (0.0f64, 0.0f64);
    let (mut wm, mut wm_ref) = (0.0f64, 0.0f64);
    let (mut co, mut co_ref) = (0.0f64, 0.0f64);
    let (mut ob, mut ob_ref) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let x = point_in(&g4, rng, 0.9);
        let cx = c.eval(&x);
        let (j, cj) = (g4.jet(&x, 4)?, cg4.jet(&x, 4)?);
        let (b, cb) = (curvature_bundle(&j)?, curvature_bundle(&cj)?);
        let w = weyl(&b, &j, WeylForm::AllDown)?;
        let cw = weyl(&cb, &cj, WeylForm::AllDown)?;
        wd = wd.max(cw.max_diff(&w.scaled(cx)));
        wd_ref = wd_ref.max(w.scaled(cx).max_abs());
        let m = weyl(&b, &j, WeylForm::LastUp)?;
        wm = wm.max(weyl(&cb, &cj, WeylForm::LastUp)?.max_diff(&m));
        wm_ref = wm_ref.max(m.max_abs());
        let o = obstruction4_at(&j)?.invariant;
        ob = ob.max(obstruction4_at(&cj)?.invariant.max_diff(&o));
        ob_ref = ob_ref.max(o.max_abs());

        let x3 = point_in(&g3, rng, 0.9);
        let t = cotton_at(&g3.jet(&x3, 3)?)?.tensor;
        co = co.max(cotton_at(&cg3.jet(&x3, 3)?)?.tensor.max_diff(&t));
        co_ref = co_ref.max(t.max_abs());
    }
    let mut out = Vec::new();
    for (name, d, r) in [
        ("W_abcd(cg) vs c W_abcd(g), n=4", wd, wd_ref),
        ("W_abc^d(cg) vs W_abc^d(g), n=4", wm, wm_ref),
        ("C(cg) vs C(g), n=3", co, co_ref),
        ("|cg|^(1/4) O(cg) vs |g|^(1/4) O(g), n=4", ob, ob_ref),
    ] {
        // a vanishing reference would make the comparison vacuous
        out.push(Check::at_least(format!("{name}: reference magnitude"), r, 1e-6));
        out.push(Check::at_most(format!("{name}: relative difference"), d / r, 1e-7));
    }
    Ok(out)
}

fn gauge_identity(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (mut resid, mut lhs, mut rhs) = (0.0f64, 0.0f64, 0.0f64);
    for n in [3, 4, 5] {
        let r2: Vec<String> = (1..=n).map(|i| format!("x{i}^2")).collect();
        let factors = [
            format!("4/(1 + {})^2", r2.join(" + ")),
            "1 + 0.3*sin(x1)".to_string(),
            "exp(0.2*x1*x2 - 0.1*x3)".to_string(),
        ];
        for c in &factors {
            let spec = conformal_spec(n, c)?;
            let ce = parse(c, n)?;
            let dc: Vec<Expr> = (0..n).map(|k| ce.differentiate(k)).collect();
            for _ in 0..5 {
                let x = point_in(&spec, rng, 0.9);
                let jet = spec.jet(&x, 2)?;
                let cv = ce.eval(&x);
                // (1 − n/2) c^{-1} ∂_k log c
                let closed: Vec<f64> = dc.iter().map(|d| (1.0 - n as f64 / 2.0) * d.eval(&x) / (cv * cv)).collect();
                resid = resid.max(max_abs(&gauge_residual(&jet)?));
                lhs = lhs.max(max_diff(&contracted_christoffel(&jet)?, &closed));
                rhs = rhs.max(max_diff(&gamma_tilde(&jet)?, &closed));
            }
        }
    }
    Ok(vec![
        Check::at_most("max_k |Γ^k − Γ̃^k|", resid, 1e-10),
        Check::at_most("max_k |Γ^k − closed form|", lhs, 1e-10),
        Check::at_most("max_k |Γ̃^k − closed form|", rhs, 1e-10),
    ])
}

fn ellipticity(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut worst = f64::INFINITY;
    let mut failures = 0usize;
    for k in 0..100 {
        let n = 3 + k % 3;
        let fp = FrozenPoint::new(random_spd(n, rng))?;
        let cert = ellipticity_certificate(&fp, 500, "random SPD")?;
        worst = worst.min(cert.sigma_min);
        failures += usize::from(!cert.pass);
    }
    let fp = FrozenPoint::identity(4);
    let xi = Covector::new(&fp, &[1.0, 0.0, 0.0, 0.0])?;
    let ev = q_eigenvalues(&fp, &xi)?;
    let mut want = vec![1.0; 9];
    want.push(2.0);
    let spread = ev.iter().zip(&want).fold(0.0f64, |m, (z, w)| m.max((z.re - w).abs()).max(z.im.abs()));
    Ok(vec![
        Check::at_least("min σ_min over 100 backgrounds × 500 directions", worst, 1e-8),
        Check::at_most("failed certificates", failures as f64, 0.0),
        Check::holds("10 eigenvalues at g = I, ξ = e1", ev.len() == 10),
        Check::at_most("eigenvalues vs {1 ×9, 2 ×1}", spread, 1e-8),
    ])
}

fn factorization(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let n = 3 + k % 3;
        let fp = FrozenPoint::new(random_spd(n, rng))?;
        let xi = Covector::new(&fp, &random_covector(n, rng))?;
        let h = random_sym(n, rng);
        let f = q_diagonal_factored(&fp, &xi, &h)?;
        let full = q_apply(&fp, &xi, &h)?.raised;
        let scale = full.amax().max(1.0);
        for (a, v) in f.iter().enumerate() {
            worst = worst.max((v - full[(a, a)]).abs() / scale);
        }
    }
    Ok(vec![Check::at_most("factored vs unfactored diagonal, 1000 triples", worst, 1e-10)])
}

fn weyl_identities(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for n in [4, 5, 6] {
        let (mut d, mut b1, mut b2) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..500 {
            let fp = FrozenPoint::new(random_spd(n, rng))?.normalized();
            let xi = Covector::new(&fp, &random_covector(n, rng))?;
            let h = random_sym(n, rng).trace_free(&fp);
            let id = weyl_contraction_identity(&fp, &xi, &h)?;
            let scale = id.lhs.amax().max(id.rhs.amax()).max(1.0);
            d = d.max(id.defect / scale);
            b1 = b1.max(id.bianchi_first / scale);
            b2 = b2.max(id.bianchi_second / scale);
        }
        out.push(Check::at_most(format!("n={n} contracted Weyl defect"), d, 1e-10));
        out.push(Check::at_most(format!("n={n} first Bianchi defect"), b1, 1e-10));
        out.push(Check::at_most(format!("n={n} second Bianchi defect"), b2, 1e-10));
    }
    let mut lhs = 0.0f64;
    for _ in 0..500 {
        let fp = FrozenPoint::new(random_spd(3, rng))?.normalized();
        let xi = Covector::new(&fp, &random_covector(3, rng))?;
        let h = random_sym(3, rng).trace_free(&fp);
        let id = weyl_identity_unchecked(&fp, &xi, &h);
        lhs = lhs.max(id.lhs.amax() / id.rhs.amax().max(1.0));
    }
    out.push(Check::at_most("n=3 contracted Weyl lhs", lhs, 1e-10));
    Ok(out)
}

/// Non-flat background with unit determinant.
fn unimodular4() -> Result<MetricSpec> {
    let src = [
        "exp(0.1*sin(x3) + 0.05*x4^2)",
        "0",
        "0",
        "0",
        "0",
        "exp(-0.1*sin(x3) - 0.05*x4^2)",
        "0",
        "0",
        "0",
        "0",
        "exp(0.1*x1*x2)",
        "0",
        "0",
        "0",
        "0",
        "exp(-0.1*x1*x2)",
    ]
    .map(String::from);
    spec_from("unimodular4", 4, 1.0, &src)
}

fn probe_perturbation() -> SymPerturbation {
    SymPerturbation::new(DMatrix::from_row_slice(
        4,
        4,
        &[0.3, 0.1, 0.0, -0.2, 0.1, -0.5, 0.2, 0.0, 0.0, 0.2, 0.4, 0.1, -0.2, 0.0, 0.1, -0.2],
    ))
}

const PROBE_X: [f64; 4] = [0.2, -0.1, 0.3, 0.1];
const PROBE_XI: [f64; 4] = [1.0, 0.5, -0.3, 0.2];

fn plane_wave() -> Result<Vec<Check>> {
    let spec = unimodular4()?;
    let h = probe_perturbation();
    let fp = FrozenPoint::from_jet(&spec.jet(&PROBE_X, 0)?);
    let xi = Covector::new(&fp, &PROBE_XI)?;
    let mut out = Vec::new();
    for (label, op) in [("σ(Ricci)", OracleOp::Ricci), ("q", OracleOp::BachGaugeRhs)] {
        let rep = plane_wave_symbol_oracle(op, &spec, &PROBE_X, &PROBE_XI, &h, &OracleConfig::default())?;
        let closed = op.closed_form(&fp, &xi, &h)?;
        let errs = rep.errors(&closed);
        out.push(Check::at_most(format!("{label}: relative error at ω = 64"), errs[errs.len() - 1], 1e-3));
        out.push(Check::within(format!("{label}: error slope"), loglog_slope(&rep.omegas, &errs), -1.0, 0.3));
        out.push(Check::at_most(
            format!("{label}: extrapolated relative error"),
            rep.extrapolated_error(&closed),
            1e-3,
        ));
    }
    Ok(out)
}

fn oscillation() -> Result<Vec<Check>> {
    let spec = unimodular4()?;
    let h = probe_perturbation();
    let rep = bach_oscillation_scaling(&spec, &PROBE_X, &PROBE_XI, &h, &[8.0, 16.0, 32.0, 64.0], 1e-5)?;
    Ok(vec![
        Check::within("linearized Bach slope", rep.bach_slope, 4.0, 0.2),
        Check::within("linearized gauge form slope", rep.rhs_slope, 4.0, 0.2),
        Check::at_most("defect slope", rep.defect_slope, 3.2),
        // the prefactor is pinned: the wrong sign leaves an order-four defect
        Check::at_least("defect slope with flipped prefactor", rep.flipped_slope, 3.8),
    ])
}

fn solver(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let sphere = bundled("sphere3")?;
    let cfg = SolverConfig { gauge_check: false, ..Default::default() };
    let grid = cfg.grid_for(&sphere)?;
    let h = grid.spacing()[0];
    let nodes = grid.node_count();
    let mut start = GridMap::identity(&grid);
    for node in grid.interior() {
        for j in 0..3 {
            start.values_mut()[j * nodes + node] += 0.2 * h * rng.random_range(-1.0..1.0);
        }
    }
    // gradient consistency at the perturbed state
    let grad = energy_gradient(&sphere, &grid, &start, cfg.eps_reg)?;
    let gscale = max_abs(grad.values());
    let interior = grid.interior();
    let mut gerr = 0.0f64;
    for _ in 0..12 {
        let k = rng.random_range(0..3) * nodes + interior[rng.random_range(0..interior.len())];
        let step = 1e-6;
        let (mut up, mut dn) = (start.clone(), start.clone());
        up.values_mut()[k] += step;
        dn.values_mut()[k] -= step;
        let fd =
            (n_energy(&sphere, &grid, &up, cfg.eps_reg)? - n_energy(&sphere, &grid, &dn, cfg.eps_reg)?) / (2.0 * step);
        gerr = gerr.max((fd - grad.values()[k]).abs() / gscale);
    }
    let model = EnergyModel::new(&sphere, &grid, cfg.eps_reg)?;
    let (u, rep) = solve_from(&model, start, &cfg)?;
    let dist = u.max_diff(&GridMap::identity(&grid));
    let rise = rep.energies.windows(2).fold(0.0f64, |m, w| m.max(w[1] - w[0]));

    let poly = bundled("poly3")?;
    let (_, prep) = solve_dirichlet(&poly, &SolverConfig::default())?;
    let ratio = match (&prep.gauge, &prep.identity_gauge) {
        (Some(g), Some(i)) => i.max / g.max,
        _ => f64::NAN,
    };
    Ok(vec![
        Check::holds("conformally flat solve converged", rep.status == crate::solver::SolveStatus::Converged),
        Check::at_most("sup |u − id| / spacing²", dist / (h * h), 5.0),
        Check::at_most("relative gradient error vs central differences", gerr, 1e-5),
        Check::at_most("largest energy increase", rise, 0.0),
        Check::holds("diagonal metric solve converged", prep.status == crate::solver::SolveStatus::Converged),
        Check::at_least("gauge residual improvement over identity", ratio, 5.0),
    ])
}

fn smoothing() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let lp = LPBundle::covering(0.5, 1.0, 255.0)?;
    let (mut part, mut leak) = (0.0f64, 0.0f64);
    for k in 0..=(lp.covered() as usize) {
        let r = k as f64;
        let s: f64 = (0..=lp.levels).map(|j| lp.psi(j, r)).sum();
        part = part.max((s - 1.0).abs());
        for j in 1..=lp.levels {
            let lo = 2f64.powi(j as i32 - 1);
            if r < lo || r > 4.0 * lo {
                leak = leak.max(lp.psi(j, r).abs());
            }
        }
    }
    out.push(Check::at_most("partition of unity defect", part, 1e-12));
    out.push(Check::at_most("ψ_j outside its dyadic annulus", leak, 0.0));

    let cfg = SynthConfig::default();
    let p = synth_zygmund_symbol(&cfg)?;
    let split = smooth_split(&p, &lp)?;
    let scale = max_abs(p.samples());
    out.push(Check::at_most(
        "reconstruction defect in units of ulp(max |p|)",
        split.reconstruction_defect / (f64::EPSILON * scale),
        1.0,
    ));
    out.push(Check::at_most("p♭ shell decay exponent", split.flat_exponent, cfg.m - cfg.r * lp.delta + 0.2));
    for r in [0.5, 1.0, 1.5] {
        let q = synth_zygmund_symbol(&SynthConfig { r, grid: 1 << 16, xi_max: 1, ..SynthConfig::default() })?;
        let fit = regularity_rate(&q, 2, &default_rate_eps(), lp.tau)?;
        out.push(Check::within(format!("low-pass rate slope, r = {r}"), fit.slope, r, 0.15));
    }
    let c = ellipticity_constant(&p, 1.0);
    let ell = ellipticity_preservation(&split, c)?;
    out.push(Check::holds("ellipticity band is nonempty", ell.pass));
    out.push(Check::at_least("min λ_min(p♯ᵗp♯)/(C|ξ|^2m) on the band", ell.band_min_ratio, 0.5));
    let table = parametrix_residual(&split, ell.band_start, 3, 7)?;
    out.push(Check::holds("parametrix residual strictly decreasing over 2^3..2^7", table.strictly_decreasing));
    out.push(Check::at_most(
        "largest parametrix residual in the band",
        table.rows.iter().filter(|r| !r.below_band).map(|r| r.residual).fold(0.0, f64::max),
        1.0,
    ));
    Ok(out)
}
