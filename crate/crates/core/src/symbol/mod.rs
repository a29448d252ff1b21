//! Linearized principal symbols at a frozen background.
//!
//! Derivatives map to `∂_a → iξ_a`, so for example
//! `σ(R_abcd)h = −½(ξ_aξ_c h_bd + ξ_bξ_d h_ac − ξ_aξ_d h_bc − ξ_bξ_c h_ad)`.
//! Indices are raised and lowered with the frozen metric.

mod oracle;

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::metric::MetricJet;
use crate::tensor::PointTensor;

pub use oracle::{
    bach_gauge_rhs, bach_gauge_rhs_unchecked, bach_oscillation_scaling, loglog_slope, plane_wave_symbol_oracle,
    BachGaugeRhs, OracleConfig, OracleOp, OracleReport, OscillationReport,
};

/// PASS threshold on the smallest singular value.
pub const SIGMA_MIN_THRESHOLD: f64 = 1e-8;

/// Background metric values at one point.
#[derive(Debug, Clone)]
pub struct FrozenPoint {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
}

impl FrozenPoint {
    pub fn new(g: DMatrix<f64>) -> Result<FrozenPoint> {
        let n = g.nrows();
        if g.ncols() != n || n == 0 {
            return Err(Error::Shape(format!("metric is {}x{}", g.nrows(), g.ncols())));
        }
        let g = (&g + g.transpose()) * 0.5;
        let chol = g.clone().cholesky().ok_or(Error::NotSpd { point: Vec::new() })?;
        let ginv = chol.inverse();
        let ginv = (&ginv + ginv.transpose()) * 0.5;
        Ok(FrozenPoint { g, ginv })
    }

    pub fn identity(n: usize) -> FrozenPoint {
        FrozenPoint { g: DMatrix::identity(n, n), ginv: DMatrix::identity(n, n) }
    }

    pub fn from_jet(jet: &MetricJet) -> FrozenPoint {
        FrozenPoint { g: jet.g_matrix(), ginv: jet.ginv_matrix() }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn ginv(&self) -> &DMatrix<f64> {
        &self.ginv
    }

    pub fn det(&self) -> f64 {
        self.g.determinant()
    }

    /// `|g|^{-1/n} g`.
    pub fn normalized(&self) -> FrozenPoint {
        let s = self.det().powf(-1.0 / self.dim() as f64);
        FrozenPoint { g: &self.g * s, ginv: &self.ginv / s }
    }
}

/// Nonzero covector with its raised form and squared norm cached.
#[derive(Debug, Clone)]
pub struct Covector {
    lower: DVector<f64>,
    upper: DVector<f64>,
    norm2: f64,
}

impl Covector {
    pub fn new(fp: &FrozenPoint, xi: &[f64]) -> Result<Covector> {
        if xi.len() != fp.dim() {
            return Err(Error::Shape(format!("covector has {} components in dimension {}", xi.len(), fp.dim())));
        }
        if xi.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroCovector);
        }
        let lower = DVector::from_column_slice(xi);
        let upper = &fp.ginv * &lower;
        let norm2 = lower.dot(&upper);
        Ok(Covector { lower, upper, norm2 })
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn norm2(&self) -> f64 {
        self.norm2
    }

    pub fn scaled(&self, t: f64) -> Covector {
        Covector { lower: &self.lower * t, upper: &self.upper * t, norm2: self.norm2 * t * t }
    }
}

/// Symmetric perturbation `h_ab`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymPerturbation {
    h: DMatrix<f64>,
}

impl SymPerturbation {
    /// Symmetrizes the input, so symmetry holds exactly.
    pub fn new(h: DMatrix<f64>) -> SymPerturbation {
        let n = h.nrows();
        // IEEE addition commutes, so entries (a, b) and (b, a) are bitwise equal.
        let h = DMatrix::from_fn(n, n, |a, b| 0.5 * (h[(a, b)] + h[(b, a)]));
        SymPerturbation { h }
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// `h^{ab} = g^{ak} g^{bl} h_kl`.
    pub fn raised(&self, fp: &FrozenPoint) -> DMatrix<f64> {
        &fp.ginv * &self.h * &fp.ginv
    }

    /// `g^{ab} h_ab`.
    pub fn trace(&self, fp: &FrozenPoint) -> f64 {
        fp.ginv.component_mul(&self.h).sum()
    }

    /// Removes the `g`-trace: `h − (tr h / n) g`.
    pub fn trace_free(&self, fp: &FrozenPoint) -> SymPerturbation {
        let t = self.trace(fp) / fp.dim() as f64;
        SymPerturbation::new(&self.h - &fp.g * t)
    }

    pub fn linear_combination(a: f64, h1: &SymPerturbation, b: f64, h2: &SymPerturbation) -> SymPerturbation {
        SymPerturbation::new(&h1.h * a + &h2.h * b)
    }
}

fn check_dims(fp: &FrozenPoint, xi: &Covector, h: &SymPerturbation) -> Result<()> {
    let n = fp.dim();
    if xi.lower.len() != n || h.h.nrows() != n {
        return Err(Error::Shape("frozen point, covector and perturbation dimensions differ".into()));
    }
    Ok(())
}

fn check_trace_free(fp: &FrozenPoint, h: &SymPerturbation) -> Result<()> {
    let trace = h.trace(fp);
    if trace.abs() > 1e-10 * h.h.amax().max(1.0) {
        return Err(Error::NonTraceFreePerturbation { trace });
    }
    Ok(())
}

/// `σ(−iΓ̃^k)(h) = −((n−2)/2) ξ^k h^{kk} / g^{kk}`, no sum on `k`.
pub fn gamma_tilde_symbol(fp: &FrozenPoint, xi: &Covector, h: &SymPerturbation) -> Result<Vec<f64>> {
    check_dims(fp, xi, h)?;
    let n = fp.dim();
    let hr = h.raised(fp);
    let pref = -(n as f64 - 2.0) / 2.0;
    Ok((0..n).map(|k| pref * xi.upper[k] * hr[(k, k)] / fp.ginv[(k, k)]).collect())
}

/// Both index positions of `q(ξ)h`, each from its own display.
#[derive(Debug, Clone)]
pub struct QImage {
    pub lowered: DMatrix<f64>,
    pub raised: DMatrix<f64>,
}

pub fn q_apply(fp: &FrozenPoint, xi: &Covector, h: &SymPerturbation) -> Result<QImage> {
    let s = gamma_tilde_symbol(fp, xi, h)?;
    let n = fp.dim();
    let nf = n as f64;
    let x2 = xi.norm2;
    let x4 = x2 * x2;
    let xl = &xi.lower;
    let xu = &xi.upper;
    let s_vec = DVector::from_vec(s);
    let xs = xl.dot(&s_vec);
    // g_bl σ^l
    let s_low = &fp.g * &s_vec;
    let lowered = DMatrix::from_fn(n, n, |a, b| {
        x4 * h.h[(a, b)] - x2 * (xl[a] * s_low[b] + xl[b] * s_low[a])
            + (nf - 2.0) / (nf - 1.0) * xl[a] * xl[b] * xs
            + x2 * xs * fp.g[(a, b)] / (nf - 1.0)
    });
    let hr = h.raised(fp);
    let raised = DMatrix::from_fn(n, n, |a, b| {
        x4 * hr[(a, b)] - x2 * (xu[a] * s_vec[b] + xu[b] * s_vec[a])
            + (nf - 2.0) / (nf - 1.0) * xu[a] * xu[b] * xs
            + x2 * xs * fp.ginv[(a, b)] / (nf - 1.0)
    });
    Ok(QImage { lowered, raised })
}

/// `(q(ξ)h)^{aa} = (g^{aa}|ξ|² + (n−2)(ξ^a)²) [|ξ|² h^{aa}/g^{aa} − ((n−2)/(2(n−1))) Σ_l ξ_l ξ^l h^{ll}/g^{ll}]`.
pub fn q_diagonal_factored(fp: &FrozenPoint, xi: &Covector, h: &SymPerturbation) -> Result<Vec<f64>> {
    check_dims(fp, xi, h)?;
    let n = fp.dim();
    let nf = n as f64;
    let hr = h.raised(fp);
    let x2 = xi.norm2;
    let sum: f64 = (0..n).map(|l| xi.lower[l] * xi.upper[l] * hr[(l, l)] / fp.ginv[(l, l)]).sum();
    Ok((0..n)
        .map(|a| {
            let gaa = fp.ginv[(a, a)];
            (gaa * x2 + (nf - 2.0) * xi.upper[a].powi(2))
                * (x2 * hr[(a, a)] / gaa - (nf - 2.0) / (2.0 * (nf - 1.0)) * sum)
        })
        .collect())
}

/// Basis `{E_aa} ∪ {(E_ab + E_ba)/√2, a < b}` of symmetric matrices.
pub fn sym_basis(n: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for a in 0..n {
        let mut e = DMatrix::zeros(n, n);
        e[(a, a)] = 1.0;
        out.push(e);
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..n {
        for b in a + 1..n {
            let mut e = DMatrix::zeros(n, n);
            e[(a, b)] = r;
            e[(b, a)] = r;
            out.push(e);
        }
    }
    out
}

/// Coordinates of a symmetric matrix in [`sym_basis`].
pub fn sym_coords(h: &DMatrix<f64>) -> DVector<f64> {
    let n = h.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for a in 0..n {
        out.push(h[(a, a)]);
    }
    let s = std::f64::consts::SQRT_2;
    for a in 0..n {
        for b in a + 1..n {
            out.push(s * 0.5 * (h[(a, b)] + h[(b, a)]));
        }
    }
    DVector::from_vec(out)
}

/// Matrix of `h ↦ q(ξ)h` (lowered form) in [`sym_basis`] coordinates.
pub fn q_matrix(fp: &FrozenPoint, xi: &Covector) -> Result<DMatrix<f64>> {
    let basis = sym_basis(fp.dim());
    let m = basis.len();
    let mut out = DMatrix::zeros(m, m);
    for (j, e) in basis.into_iter().enumerate() {
        let img = q_apply(fp, xi, &SymPerturbation::new(e))?;
        out.set_column(j, &sym_coords(&img.lowered));
    }
    Ok(out)
}

/// Eigenvalues of [`q_matrix`], sorted by real then imaginary part.
pub fn q_eigenvalues(fp: &FrozenPoint, xi: &Covector) -> Result<Vec<Complex<f64>>> {
    let m = q_matrix(fp, xi)?;
    let mut ev: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(ev)
}

/// Right singular vectors of [`q_matrix`] whose singular value is below
/// `rel_tol · σ_max`; empty when `q(ξ)` is injective.
pub fn q_nullspace(fp: &FrozenPoint, xi: &Covector, rel_tol: f64) -> Result<Vec<DVector<f64>>> {
    let m = q_matrix(fp, xi)?;
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    Ok(svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= rel_tol * smax)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect())
}

/// Index and value of the first smallest entry, so ties resolve by scan order.
fn first_minimum(rows: &[(Vec<f64>, f64)]) -> (usize, f64) {
    rows.iter().enumerate().fold((0, f64::INFINITY), |(bi, bs), (i, (_, s))| if *s < bs { (i, *s) } else { (bi, bs) })
}

pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    m.singular_values().min()
}

/// Quasi-uniform directions on the unit sphere of `R^n`: an additive
/// recurrence with generalized golden ratios pushed through the inverse
/// normal CDF, followed by the axes and the `e_a ± e_b` diagonals.
pub fn sphere_directions(n: usize, samples: usize) -> Vec<Vec<f64>> {
    // φ_n solves x^{n+1} = x + 1
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (n as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=n).map(|k| phi.powi(-(k as i32))).collect();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut out = Vec::with_capacity(samples + n * n);
    for i in 1..=samples {
        let v: Vec<f64> = alpha
            .iter()
            .map(|a| {
                let u = (0.5 + a * i as f64).fract();
                normal.inverse_cdf(u.clamp(1e-12, 1.0 - 1e-12))
            })
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.push(v.iter().map(|x| x / norm).collect());
        }
    }
    for a in 0..n {
        let mut e = vec![0.0; n];
        e[a] = 1.0;
        out.push(e);
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..n {
        for b in a + 1..n {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[a] = r;
                e[b] = s * r;
                out.push(e);
            }
        }
    }
    out
}

/// Ellipticity certificate for the gauge-fixed Bach symbol `q`.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub dimension: usize,
    pub background: String,
    pub samples: usize,
    pub evaluated: usize,
    pub sigma_min: f64,
    pub argmin_xi: Vec<f64>,
    pub threshold: f64,
    pub pass: bool,
    /// `(ξ, σ_min(q(ξ)))` for every evaluated direction, `ξ` normalized to `|ξ|_g = 1`.
    #[serde(skip)]
    pub rows: Vec<(Vec<f64>, f64)>,
}

pub fn ellipticity_certificate(fp: &FrozenPoint, samples: usize, background: &str) -> Result<Certificate> {
    let n = fp.dim();
    if n < 3 {
        return Err(Error::DimensionTooSmall { n, min: 3 });
    }
    if samples == 0 {
        return Err(Error::InvalidConfig("samples must be positive".into()));
    }
    let dirs = sphere_directions(n, samples);
    let rows: Vec<(Vec<f64>, f64)> = dirs
        .par_iter()
        .map(|d| {
            let raw = Covector::new(fp, d)?;
            let xi = raw.scaled(1.0 / raw.norm2.sqrt());
            let s = sigma_min(&q_matrix(fp, &xi)?);
            Ok((xi.lower.iter().copied().collect(), s))
        })
        .collect::<Result<Vec<_>>>()?;
    let (argmin, smin) = first_minimum(&rows);
    Ok(Certificate {
        dimension: n,
        background: background.to_string(),
        samples,
        evaluated: rows.len(),
        sigma_min: smin,
        argmin_xi: rows[argmin].0.clone(),
        threshold: SIGMA_MIN_THRESHOLD,
        pass: smin > SIGMA_MIN_THRESHOLD,
        rows,
    })
}

/// `σ(R_abcd)h` for any symmetric `h`.
pub fn riemann_symbol(fp: &FrozenPoint, xi: &Covector, h: &SymPerturbation) -> PointTensor {
    let n = fp.dim();
    let x = &xi.lower;
    let hh = &h.h;
    let mut comps = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    comps[((a * n + b) * n + c) * n + d] = -0.5
                        * (x[a] * x[c] * hh[(b, d)] + x[b] * x[d] * hh[(a, c)]
                            - x[a] * x[d] * hh[(b, c)]
                            - x[b] * x[c] * hh[(a, d)]);
                }
            }
        }
    }
    PointTensor::covariant(n, 4, comps).expect("n^4 components")
}

/// `R_bc = g^{ad} R_abcd` applied to a rank-4 symbol.
fn contract_first_last(fp: &FrozenPoint, r: &PointTensor) -> DMatrix<f64> {
    let n = fp.dim();
    DMatrix::from_fn(n, n, |b, c| {
        let mut s = 0.0;
        for a in 0..n {
            for d in 0..n {
                s += fp.ginv[(a, d)] * r.get(&[a, b, c, d]);
            }
        }
        s
    })
}

/// Linearized curvature symbols at a frozen point.
#[derive(Debug, Clone)]
pub struct CurvatureSymbols {
    pub riemann: PointTensor,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
    /// `σ(−iΓ_b)h = ξ^k h_kb − ½ ξ_b tr h`.
    pub gamma_down: Vec<f64>,
    /// `σ(−iΓ^l)h = ξ_k h^{kl} − ½ ξ^l tr h`.
    pub gamma_up: Vec<f64>,
}

/// Requires `g^{ab}h_ab = 0`, the tangent space of the unit-determinant slice.
pub fn linearized_curvature_symbols(fp: &FrozenPoint, xi: &Covector, h: &SymPerturbation) -> Result<CurvatureSymbols> {
    check_dims(fp, xi, h)?;
    check_trace_free(fp, h)?;
    Ok(curvature_symbols_unchecked(fp, xi, h))
}

pub(crate) fn curvature_symbols_unchecked(fp: &FrozenPoint, xi: &Covector, h: &SymPerturbation) -> CurvatureSymbols {
    let riemann = riemann_symbol(fp, xi, h);
    let ricci = contract_first_last(fp, &riemann);
    let scalar = fp.ginv.component_mul(&ricci).sum();
    let tr = h.trace(fp);
    let gamma_down: Vec<f64> = (&h.h * &xi.upper - &xi.lower * (0.5 * tr)).iter().copied().collect();
    let gamma_up: Vec<f64> = (h.raised(fp) * &xi.lower - &xi.upper * (0.5 * tr)).iter().copied().collect();
    CurvatureSymbols { riemann, ricci, scalar, gamma_down, gamma_up }
}

/// `σ(R_bc)h = ½|ξ|² h_bc − ½(ξ_b σ(−iΓ_c)h + ξ_c σ(−iΓ_b)h)`.
pub fn ricci_symbol_from_gamma(xi: &Covector, h: &SymPerturbation, gamma_down: &[f64]) -> DMatrix<f64> {
    let n = h.h.nrows();
    DMatrix::from_fn(n, n, |b, c| {
        0.5 * xi.norm2 * h.h[(b, c)] - 0.5 * (xi.lower[b] * gamma_down[c] + xi.lower[c] * gamma_down[b])
    })
}

/// `σ(W_abcd)h` from the curvature symbols and the frozen metric.
pub fn weyl_symbol(fp: &FrozenPoint, s: &CurvatureSymbols) -> PointTensor {
    let n = fp.dim();
    let nf = n as f64;
    let g = &fp.g;
    let p = DMatrix::from_fn(n, n, |a, b| (s.ricci[(a, b)] - s.scalar * g[(a, b)] / (2.0 * (nf - 1.0))) / (nf - 2.0));
    let mut out = s.riemann.clone();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let k = ((a * n + b) * n + c) * n + d;
                    out.comps_mut()[k] +=
                        p[(a, c)] * g[(b, d)] - p[(b, c)] * g[(a, d)] + p[(b, d)] * g[(a, c)] - p[(a, d)] * g[(b, c)];
                }
            }
        }
    }
    out
}

/// `|ξ|⁴h_bc − |ξ|²(ξ_b γ_c + ξ_c γ_b) + ((n−2)/(n−1)) ξ_bξ_c ξ_lγ^l + (1/(n−1))|ξ|² ξ_lγ^l g_bc`
/// for a first-order symbol `γ^l`, `γ_c = g_cl γ^l`. With `γ = σ(−iΓ)` this is the
/// symbol of the gauge form of Bach; with `γ = σ(−iΓ̃)` it is `q(ξ)h`.
pub fn gauge_bracket(fp: &FrozenPoint, xi: &Covector, h: &SymPerturbation, gamma_up: &[f64]) -> DMatrix<f64> {
    let n = fp.dim();
    let nf = n as f64;
    let gu = DVector::from_column_slice(gamma_up);
    let gd = &fp.g * &gu;
    let xs = xi.lower.dot(&gu);
    let x2 = xi.norm2;
    let x = &xi.lower;
    DMatrix::from_fn(n, n, |b, c| {
        x2 * x2 * h.h[(b, c)] - x2 * (x[b] * gd[c] + x[c] * gd[b])
            + (nf - 2.0) / (nf - 1.0) * x[b] * x[c] * xs
            + x2 * xs * fp.g[(b, c)] / (nf - 1.0)
    })
}

/// `((n−3)/(2(n−2)))` times [`gauge_bracket`].
pub fn contracted_weyl_rhs(fp: &FrozenPoint, xi: &Covector, h: &SymPerturbation, gamma_up: &[f64]) -> DMatrix<f64> {
    let nf = fp.dim() as f64;
    gauge_bracket(fp, xi, h, gamma_up) * ((nf - 3.0) / (2.0 * (nf - 2.0)))
}

/// Result of the contracted Weyl symbol identity and the two symbol-level
/// Bianchi identities.
#[derive(Debug, Clone)]
pub struct WeylIdentity {
    /// `ξ^a ξ^d σ(W_abcd)h`.
    pub lhs: DMatrix<f64>,
    pub rhs: DMatrix<f64>,
    pub defect: f64,
    /// `max |ξ^d σ(R_abcd + R_ac g_bd − R_bc g_ad)|`.
    pub bianchi_first: f64,
    /// `max |ξ^a σ(R_ab g_cd − ½ R g_ab g_cd)|`.
    pub bianchi_second: f64,
}

pub fn weyl_contraction_identity(fp: &FrozenPoint, xi: &Covector, h: &SymPerturbation) -> Result<WeylIdentity> {
    check_dims(fp, xi, h)?;
    let det = fp.det();
    if (det - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnimodular { det });
    }
    check_trace_free(fp, h)?;
    Ok(weyl_identity_unchecked(fp, xi, h))
}

/// Same computation without the unimodularity and trace checks.
pub fn weyl_identity_unchecked(fp: &FrozenPoint, xi: &Covector, h: &SymPerturbation) -> WeylIdentity {
    let n = fp.dim();
    let s = curvature_symbols_unchecked(fp, xi, h);
    let w = weyl_symbol(fp, &s);
    let xu = &xi.upper;
    let lhs = DMatrix::from_fn(n, n, |b, c| {
        let mut acc = 0.0;
        for a in 0..n {
            for d in 0..n {
                acc += xu[a] * xu[d] * w.get(&[a, b, c, d]);
            }
        }
        acc
    });
    let rhs = contracted_weyl_rhs(fp, xi, h, &s.gamma_up);
    let defect = (&lhs - &rhs).amax();
    let g = &fp.g;
    let ric = &s.ricci;
    let mut b1: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut acc = 0.0;
                for d in 0..n {
                    acc += xu[d] * (s.riemann.get(&[a, b, c, d]) + ric[(a, c)] * g[(b, d)] - ric[(b, c)] * g[(a, d)]);
                }
                b1 = b1.max(acc.abs());
            }
        }
    }
    let mut b2: f64 = 0.0;
    for b in 0..n {
        for c in 0..n {
            for d in 0..n {
                let mut acc = 0.0;
                for a in 0..n {
                    acc += xu[a] * (ric[(a, b)] * g[(c, d)] - 0.5 * s.scalar * g[(a, b)] * g[(c, d)]);
                }
                b2 = b2.max(acc.abs());
            }
        }
    }
    WeylIdentity { lhs, rhs, defect, bianchi_first: b1, bianchi_second: b2 }
}

/// Orthonormal basis (in [`sym_basis`] coordinates) of the `g`-trace-free
/// symmetric matrices.
pub fn trace_free_basis(fp: &FrozenPoint) -> Vec<DMatrix<f64>> {
    let basis = sym_basis(fp.dim());
    let m = basis.len();
    // trace functional in coordinates
    let t = DVector::from_iterator(m, basis.iter().map(|e| fp.ginv.component_mul(e).sum()));
    let t = t.normalize();
    let proj = DMatrix::identity(m, m) - &t * t.transpose();
    let svd = proj.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut out = Vec::with_capacity(m - 1);
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > 0.5 {
            let col = u.column(i);
            let mut h = DMatrix::zeros(fp.dim(), fp.dim());
            for (k, e) in basis.iter().enumerate() {
                h += e * col[k];
            }
            out.push(h);
        }
    }
    out
}

/// Matrix of the gauge-fixed Weyl symbol on trace-free `h`:
/// `h ↦ [σ(W_abcd)h ; σ(−iΓ^l)h − σ(−iΓ̃^l)h]`.
pub fn gauged_weyl_matrix(fp: &FrozenPoint, xi: &Covector) -> Result<DMatrix<f64>> {
    let n = fp.dim();
    let basis = trace_free_basis(fp);
    let rows = n.pow(4) + n;
    let mut out = DMatrix::zeros(rows, basis.len());
    for (j, e) in basis.into_iter().enumerate() {
        let h = SymPerturbation::new(e);
        let s = curvature_symbols_unchecked(fp, xi, &h);
        let w = weyl_symbol(fp, &s);
        let gt = gamma_tilde_symbol(fp, xi, &h)?;
        for (i, v) in w.comps().iter().enumerate() {
            out[(i, j)] = *v;
        }
        for l in 0..n {
            out[(n.pow(4) + l, j)] = s.gamma_up[l] - gt[l];
        }
    }
    Ok(out)
}

/// Smallest singular value of [`gauged_weyl_matrix`] over the direction scan.
pub fn gauged_weyl_certificate(fp: &FrozenPoint, samples: usize, background: &str) -> Result<Certificate> {
    let n = fp.dim();
    if n < 4 {
        return Err(Error::DimensionTooSmall { n, min: 4 });
    }
    if samples == 0 {
        return Err(Error::InvalidConfig("samples must be positive".into()));
    }
    let fp = fp.normalized();
    let dirs = sphere_directions(n, samples);
    let rows: Vec<(Vec<f64>, f64)> = dirs
        .par_iter()
        .map(|d| {
            let raw = Covector::new(&fp, d)?;
            let xi = raw.scaled(1.0 / raw.norm2.sqrt());
            Ok((xi.lower.iter().copied().collect(), sigma_min(&gauged_weyl_matrix(&fp, &xi)?)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (argmin, smin) = first_minimum(&rows);
    Ok(Certificate {
        dimension: n,
        background: background.to_string(),
        samples,
        evaluated: rows.len(),
        sigma_min: smin,
        argmin_xi: rows[argmin].0.clone(),
        threshold: SIGMA_MIN_THRESHOLD,
        pass: smin > SIGMA_MIN_THRESHOLD,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1(n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        v
    }

    #[test]
    fn gamma_tilde_at_identity() {
        let fp = FrozenPoint::identity(4);
        let xi = Covector::new(&fp, &e1(4)).unwrap();
        let h = SymPerturbation::new(DMatrix::identity(4, 4));
        assert_eq!(gamma_tilde_symbol(&fp, &xi, &h).unwrap(), vec![-1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(Covector::new(&fp, &[0.0; 4]), Err(Error::ZeroCovector)));
    }

    #[test]
    fn q_at_identity() {
        let fp = FrozenPoint::identity(4);
        let xi = Covector::new(&fp, &e1(4)).unwrap();
        let d = q_diagonal_factored(&fp, &xi, &SymPerturbation::new(DMatrix::identity(4, 4))).unwrap();
        let want = [2.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0];
        for (a, b) in d.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut off = DMatrix::zeros(4, 4);
        off[(1, 2)] = 0.7;
        off[(2, 1)] = 0.7;
        off[(0, 3)] = -0.2;
        off[(3, 0)] = -0.2;
        let img = q_apply(&fp, &xi, &SymPerturbation::new(off.clone())).unwrap();
        assert!((&img.lowered - &off).amax() < 1e-15);
        let ev = q_eigenvalues(&fp, &xi).unwrap();
        assert_eq!(ev.len(), 10);
        for (k, v) in ev.iter().enumerate() {
            let want = if k == 9 { 2.0 } else { 1.0 };
            assert!((v.re - want).abs() < 1e-12 && v.im.abs() < 1e-12, "{ev:?}");
        }
        assert!(q_nullspace(&fp, &xi, 1e-10).unwrap().is_empty());
    }

    #[test]
    fn certificate_contract() {
        let fp = FrozenPoint::identity(4);
        let c = ellipticity_certificate(&fp, 50, "identity").unwrap();
        assert!(c.pass && c.sigma_min > 0.1);
        assert!(matches!(
            ellipticity_certificate(&FrozenPoint::identity(2), 10, ""),
            Err(Error::DimensionTooSmall { .. })
        ));
        assert!(matches!(ellipticity_certificate(&fp, 0, ""), Err(Error::InvalidConfig(_))));
        let again = ellipticity_certificate(&fp, 50, "identity").unwrap();
        assert_eq!(c.sigma_min.to_bits(), again.sigma_min.to_bits());
    }

    #[test]
    fn pure_gauge_direction_is_annihilated() {
        let fp = FrozenPoint::identity(3);
        let xi = Covector::new(&fp, &[0.3, -1.0, 0.5]).unwrap();
        let h = SymPerturbation::new(&xi.lower * xi.lower.transpose());
        assert!(riemann_symbol(&fp, &xi, &h).max_abs() < 1e-15);
    }

    #[test]
    fn gauged_weyl_is_injective_at_identity() {
        let fp = FrozenPoint::identity(4);
        let c = gauged_weyl_certificate(&fp, 20, "identity").unwrap();
        assert!(c.pass, "{}", c.sigma_min);
        assert_eq!(trace_free_basis(&fp).len(), 9);
    }
}
