//! Gauge form of the Bach tensor and the high-frequency plane-wave oracle.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{curvature_symbols_unchecked, gauge_bracket, q_apply, weyl_symbol, Covector, FrozenPoint, SymPerturbation};
use crate::error::{Error, Result};
use crate::metric::{MetricJet, MetricSpec};
use crate::taylor::Series;
use crate::tensor::field::{christoffel, values, Fields};
use crate::tensor::{bach_at, conformal_normalize, PointTensor};

/// Determinant tolerance for the unimodular gauge form.
const UNIMODULAR_TOL: f64 = 1e-10;

/// Right-hand side of the gauge form of Bach, written once with the
/// contracted Christoffel symbols `Γ^l` and once with `Γ̃^l`.
#[derive(Debug, Clone, Serialize)]
pub struct BachGaugeRhs {
    pub gamma_form: PointTensor,
    pub gamma_tilde_form: PointTensor,
}

/// Requires `|g(x)| = 1` and a jet of order 4.
pub fn bach_gauge_rhs(jet: &MetricJet) -> Result<BachGaugeRhs> {
    let det = jet.det();
    if (det - 1.0).abs() > UNIMODULAR_TOL {
        return Err(Error::NotUnimodular { det });
    }
    bach_gauge_rhs_unchecked(jet)
}

/// [`bach_gauge_rhs`] without the determinant check.
pub fn bach_gauge_rhs_unchecked(jet: &MetricJet) -> Result<BachGaugeRhs> {
    if jet.order() < 4 {
        return Err(Error::InsufficientJetOrder { have: jet.order(), need: 4 });
    }
    let n = jet.dim();
    let g = jet.g_series();
    let ginv = jet.ginv_series();
    let chr = christoffel(n, g, ginv);
    let gamma_up: Vec<Series> = (0..n)
        .map(|l| {
            let mut acc = Series::zero(n);
            for a in 0..n {
                for b in 0..n {
                    acc.add_product(1.0, &ginv[a * n + b], &chr[(l * n + a) * n + b]);
                }
            }
            acc
        })
        .collect();
    // Γ̃^k = −((n−2)/2) g^{kr} g^{ka} g^{kb} ∂_r g_ab / g^{kk}
    let pref = -(n as f64 - 2.0) / 2.0;
    let tilde_up: Vec<Series> = (0..n)
        .map(|k| {
            let mut acc = Series::zero(n);
            for r in 0..n {
                for a in 0..n {
                    let gka = ginv[k * n + r].mul_series(&ginv[k * n + a]);
                    for b in 0..n {
                        let t = gka.mul_series(&ginv[k * n + b]);
                        acc.add_product(1.0, &t, &g[a * n + b].deriv(r));
                    }
                }
            }
            acc.mul_series(&ginv[k * n + k].recip()).scale(pref)
        })
        .collect();

    let lap_l = laplacian_values(n, ginv);
    let mut lg = Vec::with_capacity(n * n);
    for s in g {
        lg.push(apply_l(n, ginv, s));
    }
    let l2g: Vec<f64> = lg.iter().map(&lap_l).collect();
    let gamma_form = gauge_rhs(n, g, &l2g, &gamma_up, &lap_l)?;
    let gamma_tilde_form = gauge_rhs(n, g, &l2g, &tilde_up, &lap_l)?;
    Ok(BachGaugeRhs { gamma_form, gamma_tilde_form })
}

/// `L F = g^{ij} ∂_ij F` as a series.
fn apply_l(n: usize, ginv: &[Series], f: &Series) -> Series {
    let mut acc = Series::zero(n);
    for i in 0..n {
        let di = f.deriv(i);
        for j in 0..n {
            acc.add_product(1.0, &ginv[i * n + j], &di.deriv(j));
        }
    }
    acc
}

/// `F ↦ (L F)(x)`.
fn laplacian_values(n: usize, ginv: &[Series]) -> impl Fn(&Series) -> f64 + '_ {
    move |f: &Series| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += ginv[i * n + j].value() * f.partial(&[i, j]);
            }
        }
        s
    }
}

/// `L²g_ab − L(∂_aγ_b + ∂_bγ_a) + ((n−2)/(n−1)) ∂_abl γ^l + (1/(n−1)) L(∂_l γ^l) g_ab`.
fn gauge_rhs(
    n: usize,
    g: &[Series],
    l2g: &[f64],
    gamma_up: &[Series],
    lap_l: &impl Fn(&Series) -> f64,
) -> Result<PointTensor> {
    let nf = n as f64;
    let gamma_down: Vec<Series> = (0..n)
        .map(|b| {
            let mut acc = Series::zero(n);
            for l in 0..n {
                acc.add_product(1.0, &g[b * n + l], &gamma_up[l]);
            }
            acc
        })
        .collect();
    let mut div = Series::zero(n);
    for (l, gl) in gamma_up.iter().enumerate() {
        div.axpy(1.0, &gl.deriv(l));
    }
    let l_div = lap_l(&div);
    let mut out = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let mut sym = gamma_down[b].deriv(a);
            sym.axpy(1.0, &gamma_down[a].deriv(b));
            let third: f64 = (0..n).map(|l| gamma_up[l].partial(&[a, b, l])).sum();
            let v = l2g[a * n + b] - lap_l(&sym)
                + (nf - 2.0) / (nf - 1.0) * third
                + l_div * g[a * n + b].value() / (nf - 1.0);
            out[a * n + b] = v;
            out[b * n + a] = v;
        }
    }
    PointTensor::covariant(n, 2, out)
}

/// Operator whose principal symbol the oracle extracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleOp {
    Ricci,
    Weyl,
    /// Gauge form written with `Γ̃`; its symbol is `q`.
    BachGaugeRhs,
    /// Gauge form written with `Γ`.
    BachGaugeRhsGamma,
}

impl OracleOp {
    pub fn order(self) -> u32 {
        match self {
            OracleOp::Ricci | OracleOp::Weyl => 2,
            OracleOp::BachGaugeRhs | OracleOp::BachGaugeRhsGamma => 4,
        }
    }

    pub fn parse(name: &str) -> Option<OracleOp> {
        match name {
            "ricci" => Some(OracleOp::Ricci),
            "weyl" => Some(OracleOp::Weyl),
            "bach-gauge-rhs" => Some(OracleOp::BachGaugeRhs),
            "bach-gauge-rhs-gamma" => Some(OracleOp::BachGaugeRhsGamma),
            _ => None,
        }
    }

    fn evaluate(self, jet: &MetricJet) -> Result<PointTensor> {
        let n = jet.dim();
        match self {
            OracleOp::Ricci => PointTensor::covariant(n, 2, values(&Fields::new(jet).ricci)),
            OracleOp::Weyl => {
                let f = Fields::new(jet);
                PointTensor::covariant(n, 4, values(&f.weyl_down(&f.schouten())))
            }
            OracleOp::BachGaugeRhs => Ok(bach_gauge_rhs_unchecked(jet)?.gamma_tilde_form),
            OracleOp::BachGaugeRhsGamma => Ok(bach_gauge_rhs_unchecked(jet)?.gamma_form),
        }
    }

    /// Closed-form principal symbol at the frozen background.
    pub fn closed_form(self, fp: &FrozenPoint, xi: &Covector, h: &SymPerturbation) -> Result<PointTensor> {
        let n = fp.dim();
        let flat = |m: DMatrix<f64>| PointTensor::covariant(n, 2, m.transpose().iter().copied().collect());
        match self {
            OracleOp::Ricci => flat(curvature_symbols_unchecked(fp, xi, h).ricci),
            OracleOp::Weyl => Ok(weyl_symbol(fp, &curvature_symbols_unchecked(fp, xi, h))),
            OracleOp::BachGaugeRhs => flat(q_apply(fp, xi, h)?.lowered),
            OracleOp::BachGaugeRhsGamma => {
                let s = curvature_symbols_unchecked(fp, xi, h);
                flat(gauge_bracket(fp, xi, h, &s.gamma_up))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleConfig {
    /// Central-difference step in the perturbation amplitude.
    pub eps: f64,
    /// Increasing frequencies with a constant ratio.
    pub omegas: Vec<f64>,
    /// Relative tolerance on successive extrapolated estimates.
    pub cauchy_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { eps: 1e-5, omegas: vec![8.0, 16.0, 32.0, 64.0], cauchy_tol: 1e-3 }
    }
}

/// Estimates `S(ω) = (T'[h cos] + i T'[h sin]) / ω^m` of the principal symbol.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub op: OracleOp,
    pub order: u32,
    pub omegas: Vec<f64>,
    pub estimates_re: Vec<PointTensor>,
    pub estimates_im: Vec<PointTensor>,
    /// Richardson value from the two highest frequencies (real part).
    pub extrapolated: PointTensor,
    /// Relative gap between the last two Richardson values.
    pub cauchy_gap: f64,
}

impl OracleReport {
    /// Relative complex error of each raw estimate against `reference`.
    pub fn errors(&self, reference: &PointTensor) -> Vec<f64> {
        let scale = reference.max_abs().max(f64::MIN_POSITIVE);
        self.estimates_re
            .iter()
            .zip(&self.estimates_im)
            .map(|(re, im)| {
                re.comps()
                    .iter()
                    .zip(im.comps())
                    .zip(reference.comps())
                    .fold(0.0f64, |m, ((r, i), s)| m.max((r - s).hypot(*i)))
                    / scale
            })
            .collect()
    }

    pub fn extrapolated_error(&self, reference: &PointTensor) -> f64 {
        self.extrapolated.max_diff(reference) / reference.max_abs().max(f64::MIN_POSITIVE)
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// Jet of `g + amp · h · f(ω ξ·(y − x))` with `f` cosine or sine.
fn perturbed_jet(
    base: &MetricJet,
    xi: &[f64],
    h: &DMatrix<f64>,
    omega: f64,
    amp: f64,
    sine: bool,
) -> Result<MetricJet> {
    let n = base.dim();
    let mut phase = Series::zero(n);
    for (a, xa) in xi.iter().enumerate() {
        phase.axpy(omega * xa, &Series::variable(n, a, 0.0));
    }
    let wave = if sine { phase.sin() } else { phase.cos() };
    let g = base
        .g_series()
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mut out = s.clone();
            out.axpy(amp * h[(k / n, k % n)], &wave);
            out
        })
        .collect();
    MetricJet::from_series(base.point(), g)
}

fn central_difference(
    op: OracleOp,
    base: &MetricJet,
    xi: &[f64],
    h: &DMatrix<f64>,
    omega: f64,
    eps: f64,
    sine: bool,
) -> Result<PointTensor> {
    let plus = op.evaluate(&perturbed_jet(base, xi, h, omega, eps, sine)?)?;
    let minus = op.evaluate(&perturbed_jet(base, xi, h, omega, -eps, sine)?)?;
    let mut out = plus;
    for (o, m) in out.comps_mut().iter_mut().zip(minus.comps()) {
        *o = (*o - m) / (2.0 * eps);
    }
    Ok(out)
}

/// Extracts the principal symbol of `op` at `x` in direction `ξ` applied to
/// `h` from the response to high-frequency perturbations.
pub fn plane_wave_symbol_oracle(
    op: OracleOp,
    spec: &MetricSpec,
    x: &[f64],
    xi: &[f64],
    h: &SymPerturbation,
    config: &OracleConfig,
) -> Result<OracleReport> {
    let n = spec.dim();
    if xi.len() != n || h.lower().nrows() != n {
        return Err(Error::Shape("covector or perturbation dimension differs from the metric".into()));
    }
    if xi.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroCovector);
    }
    let w = &config.omegas;
    if w.len() < 3 || !(config.eps > 0.0) {
        return Err(Error::InvalidConfig("the oracle needs eps > 0 and at least three frequencies".into()));
    }
    let ratio = w[1] / w[0];
    if !(ratio > 1.0) || w.windows(2).any(|p| ((p[1] / p[0]) - ratio).abs() > 1e-12 * ratio) {
        return Err(Error::InvalidConfig("frequencies must grow by a constant ratio".into()));
    }
    let base = spec.jet(x, 4)?;
    let m = op.order() as i32;
    let mut estimates_re = Vec::with_capacity(w.len());
    let mut estimates_im = Vec::with_capacity(w.len());
    for &omega in w {
        let scale = omega.powi(-m);
        estimates_re.push(central_difference(op, &base, xi, h.lower(), omega, config.eps, false)?.scaled(scale));
        estimates_im.push(central_difference(op, &base, xi, h.lower(), omega, config.eps, true)?.scaled(scale));
    }
    // S(ω) = σ + c/ω + O(ω^-2) cancels the 1/ω term
    let richardson = |k: usize| -> PointTensor {
        let mut out = estimates_re[k].scaled(ratio / (ratio - 1.0));
        for (o, p) in out.comps_mut().iter_mut().zip(estimates_re[k - 1].comps()) {
            *o -= p / (ratio - 1.0);
        }
        out
    };
    let last = w.len() - 1;
    let extrapolated = richardson(last);
    let previous = richardson(last - 1);
    let cauchy_gap = extrapolated.max_diff(&previous) / extrapolated.max_abs().max(f64::MIN_POSITIVE);
    if !(cauchy_gap <= config.cauchy_tol) {
        return Err(Error::ExtrapolationDiverged { spread: cauchy_gap });
    }
    Ok(OracleReport { op, order: op.order(), omegas: w.clone(), estimates_re, estimates_im, extrapolated, cauchy_gap })
}

/// Frequency scaling of the linearized Bach tensor, the linearized gauge
/// right-hand side, and their combination, on a unimodular background.
#[derive(Debug, Clone, Serialize)]
pub struct OscillationReport {
    pub omegas: Vec<f64>,
    pub bach: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `max |(2(n−2)/(n−3)) B' − rhs'|`.
    pub defect: Vec<f64>,
    /// Same with the prefactor sign flipped.
    pub flipped_defect: Vec<f64>,
    pub bach_slope: f64,
    pub rhs_slope: f64,
    pub defect_slope: f64,
    pub flipped_slope: f64,
}

/// Perturbs `g` by `ε h cos(ω ξ·(y − x))`, normalizes to unit determinant,
/// and differentiates in `ε` by central differences.
pub fn bach_oscillation_scaling(
    spec: &MetricSpec,
    x: &[f64],
    xi: &[f64],
    h: &SymPerturbation,
    omegas: &[f64],
    eps: f64,
) -> Result<OscillationReport> {
    let n = spec.dim();
    if n < 4 {
        return Err(Error::DimensionTooSmall { n, min: 4 });
    }
    if omegas.len() < 2 || !(eps > 0.0) {
        return Err(Error::InvalidConfig("need eps > 0 and at least two frequencies".into()));
    }
    let base = spec.jet(x, 4)?;
    let nf = n as f64;
    let pref = 2.0 * (nf - 2.0) / (nf - 3.0);
    let mut rep = OscillationReport {
        omegas: omegas.to_vec(),
        bach: Vec::new(),
        rhs: Vec::new(),
        defect: Vec::new(),
        flipped_defect: Vec::new(),
        bach_slope: 0.0,
        rhs_slope: 0.0,
        defect_slope: 0.0,
        flipped_slope: 0.0,
    };
    for &omega in omegas {
        let side = |amp: f64| -> Result<(PointTensor, PointTensor)> {
            let jet = conformal_normalize(&perturbed_jet(&base, xi, h.lower(), omega, amp, false)?);
            Ok((bach_at(&jet)?.tensor, bach_gauge_rhs(&jet)?.gamma_form))
        };
        let (bp, rp) = side(eps)?;
        let (bm, rm) = side(-eps)?;
        let mut d = 0.0f64;
        let mut f = 0.0f64;
        let mut bn = 0.0f64;
        let mut rn = 0.0f64;
        for k in 0..n * n {
            let db = (bp.comps()[k] - bm.comps()[k]) / (2.0 * eps);
            let dr = (rp.comps()[k] - rm.comps()[k]) / (2.0 * eps);
            bn = bn.max(db.abs());
            rn = rn.max(dr.abs());
            d = d.max((pref * db - dr).abs());
            f = f.max((-pref * db - dr).abs());
        }
        rep.bach.push(bn);
        rep.rhs.push(rn);
        rep.defect.push(d);
        rep.flipped_defect.push(f);
    }
    rep.bach_slope = loglog_slope(omegas, &rep.bach);
    rep.rhs_slope = loglog_slope(omegas, &rep.rhs);
    rep.defect_slope = loglog_slope(omegas, &rep.defect);
    rep.flipped_slope = loglog_slope(omegas, &rep.flipped_defect);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn spec4() -> MetricSpec {
        let src = [
            ["1 + 0.1*x1^2", "0.05*x1*x2", "0", "0"],
            ["0.05*x1*x2", "1 + 0.2*x3^2", "0.03*x4", "0"],
            ["0", "0.03*x4", "exp(0.1*x2)", "0"],
            ["0", "0", "0", "1 + 0.1*sin(x1)"],
        ];
        let g = src.iter().flatten().map(|s| parse(s, 4).unwrap()).collect();
        MetricSpec::new("test", 4, vec![[-1.0, 1.0]; 4], g).unwrap()
    }

    fn h4() -> SymPerturbation {
        SymPerturbation::new(DMatrix::from_row_slice(
            4,
            4,
            &[0.3, 0.1, 0.0, -0.2, 0.1, -0.5, 0.2, 0.0, 0.0, 0.2, 0.4, 0.1, -0.2, 0.0, 0.1, -0.2],
        ))
    }

    #[test]
    fn ricci_oracle_matches_closed_form() {
        let spec = spec4();
        let x = [0.2, -0.1, 0.3, 0.1];
        let xi = [1.0, 0.5, -0.3, 0.2];
        let h = h4();
        let rep = plane_wave_symbol_oracle(OracleOp::Ricci, &spec, &x, &xi, &h, &OracleConfig::default()).unwrap();
        let fp = FrozenPoint::from_jet(&spec.jet(&x, 0).unwrap());
        let cv = Covector::new(&fp, &xi).unwrap();
        let closed = OracleOp::Ricci.closed_form(&fp, &cv, &h).unwrap();
        assert!(rep.extrapolated_error(&closed) < 1e-3);
        let slope = loglog_slope(&rep.omegas, &rep.errors(&closed));
        assert!((slope + 1.0).abs() < 0.3, "{slope}");
    }

    #[test]
    fn gauge_rhs_requires_unit_determinant() {
        let spec = spec4();
        let jet = spec.jet(&[0.5, 0.5, 0.5, 0.5], 4).unwrap();
        assert!(matches!(bach_gauge_rhs(&jet), Err(Error::NotUnimodular { .. })));
        assert!(bach_gauge_rhs(&conformal_normalize(&jet)).is_ok());
    }
}
