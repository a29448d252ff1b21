use serde::Serialize;

use super::field::{christoffel, covariant_field, values, Fields};
use super::{PointTensor, Variance};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::metric::{MetricJet, MetricSpec};
use crate::taylor::Series;

use Variance::{Down, Up};

fn need_order(jet: &MetricJet, need: usize) -> Result<()> {
    let have = jet.order();
    if have < need {
        return Err(Error::InsufficientJetOrder { have, need });
    }
    Ok(())
}

fn need_dim(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::DimensionTooSmall { n, min });
    }
    Ok(())
}

fn flat_g(jet: &MetricJet) -> (Vec<f64>, Vec<f64>) {
    let n = jet.dim();
    let g = (0..n * n).map(|i| jet.g(i / n, i % n)).collect();
    let ginv = (0..n * n).map(|i| jet.ginv(i / n, i % n)).collect();
    (g, ginv)
}

/// Curvature quantities at one point.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureBundle {
    pub x: Vec<f64>,
    /// `Γ^k_ab`, slots `[k][a][b]`.
    pub christoffel: PointTensor,
    /// `Γ^k = g^{ab} Γ^k_ab`.
    pub gamma_up: Vec<f64>,
    /// `Γ_k = g_kl Γ^l`.
    pub gamma_down: Vec<f64>,
    pub riemann: PointTensor,
    /// `R_abc^d`.
    pub riemann_mixed: PointTensor,
    pub ricci: PointTensor,
    pub scalar: f64,
    /// `max_k |Γ^k + ∂_l g^{kl} + ½ g^{kl} ∂_l log|g||`.
    pub contracted_identity_defect: f64,
}

pub fn curvature_bundle(jet: &MetricJet) -> Result<CurvatureBundle> {
    need_order(jet, 2)?;
    let n = jet.dim();
    let f = Fields::new(jet);
    let chr = values(&f.chr);
    let gamma_up: Vec<f64> = (0..n)
        .map(|k| {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += jet.ginv(a, b) * chr[(k * n + a) * n + b];
                }
            }
            s
        })
        .collect();
    let gamma_down = (0..n).map(|k| (0..n).map(|l| jet.g(k, l) * gamma_up[l]).sum()).collect();
    let mut defect: f64 = 0.0;
    for (k, gk) in gamma_up.iter().enumerate() {
        let mut alt = 0.0;
        for l in 0..n {
            alt -= jet.dginv(&[l], k, l) + 0.5 * jet.ginv(k, l) * jet.dlogdet(&[l]);
        }
        defect = defect.max((gk - alt).abs());
    }
    Ok(CurvatureBundle {
        x: jet.point().to_vec(),
        christoffel: PointTensor::new(n, vec![Up, Down, Down], chr)?,
        gamma_up,
        gamma_down,
        riemann: PointTensor::covariant(n, 4, values(&f.riemann))?,
        riemann_mixed: PointTensor::new(n, vec![Down, Down, Down, Up], values(&f.riemann_mixed))?,
        ricci: PointTensor::covariant(n, 2, values(&f.ricci))?,
        scalar: f.scalar.value(),
        contracted_identity_defect: defect,
    })
}

/// `P_ab = (R_ab − R g_ab / (2(n−1))) / (n−2)`.
pub fn schouten(bundle: &CurvatureBundle, jet: &MetricJet) -> Result<PointTensor> {
    let n = jet.dim();
    need_dim(n, 3)?;
    let nf = n as f64;
    let comps = (0..n * n)
        .map(|i| {
            let (a, b) = (i / n, i % n);
            (bundle.ricci.comps()[i] - bundle.scalar * jet.g(a, b) / (2.0 * (nf - 1.0))) / (nf - 2.0)
        })
        .collect();
    PointTensor::covariant(n, 2, comps)
}

/// Which Weyl tensor to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeylForm {
    /// `W_abcd`.
    AllDown,
    /// `W_abc^d`, built from `R_abc^d` and the Schouten tensor directly.
    LastUp,
}

pub fn weyl(bundle: &CurvatureBundle, jet: &MetricJet, form: WeylForm) -> Result<PointTensor> {
    let n = jet.dim();
    let p = schouten(bundle, jet)?;
    let p = p.comps();
    let (g, ginv) = flat_g(jet);
    let mut out = vec![0.0; n * n * n * n];
    match form {
        WeylForm::AllDown => {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            let k = ((a * n + b) * n + c) * n + d;
                            out[k] = bundle.riemann.comps()[k] + p[a * n + c] * g[b * n + d]
                                - p[b * n + c] * g[a * n + d]
                                + p[b * n + d] * g[a * n + c]
                                - p[a * n + d] * g[b * n + c];
                        }
                    }
                }
            }
            PointTensor::covariant(n, 4, out)
        }
        WeylForm::LastUp => {
            let mut p_up = vec![0.0; n * n];
            for b in 0..n {
                for d in 0..n {
                    p_up[b * n + d] = (0..n).map(|m| p[b * n + m] * ginv[m * n + d]).sum();
                }
            }
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            let k = ((a * n + b) * n + c) * n + d;
                            let mut v = bundle.riemann_mixed.comps()[k];
                            if b == d {
                                v += p[a * n + c];
                            }
                            if a == d {
                                v -= p[b * n + c];
                            }
                            v += p_up[b * n + d] * g[a * n + c] - p_up[a * n + d] * g[b * n + c];
                            out[k] = v;
                        }
                    }
                }
            }
            PointTensor::new(n, vec![Down, Down, Down, Up], out)
        }
    }
}

/// `∇t` for an all-covariant `t`, given `partials[i * n + m] = ∂_m t_i`
/// over flat component indices `i`. The new slot is last.
pub fn covariant_derivative(t: &PointTensor, bundle: &CurvatureBundle, partials: &[f64]) -> Result<PointTensor> {
    if t.variance().iter().any(|v| *v != Down) {
        return Err(Error::VarianceMismatch);
    }
    let n = t.dim();
    let r = t.rank();
    let len = t.comps().len();
    if partials.len() != len * n {
        return Err(Error::Shape(format!("{} partials for {} components", partials.len(), len)));
    }
    let chr = bundle.christoffel.comps();
    let mut out = vec![0.0; len * n];
    for i in 0..len {
        for m in 0..n {
            let mut v = partials[i * n + m];
            for s in 0..r {
                let stride = n.pow((r - 1 - s) as u32);
                let is = (i / stride) % n;
                let base = i - is * stride;
                for p in 0..n {
                    v -= t.comps()[base + p * stride] * chr[(p * n + m) * n + is];
                }
            }
            out[i * n + m] = v;
        }
    }
    PointTensor::covariant(n, r + 1, out)
}

/// Cotton tensor with its Weyl-divergence cross-check.
#[derive(Debug, Clone, Serialize)]
pub struct CottonReport {
    /// `C_abc = ∇_a P_bc − ∇_b P_ac`.
    pub tensor: PointTensor,
    /// `∇^l W_abcl / (n − 3)`, for n ≥ 4.
    pub weyl_divergence: Option<PointTensor>,
    /// Max-norm difference of the two forms.
    pub defect: Option<f64>,
}

pub fn cotton(spec: &MetricSpec, x: &[f64]) -> Result<CottonReport> {
    cotton_at(&spec.jet(x, 3)?)
}

pub fn cotton_at(jet: &MetricJet) -> Result<CottonReport> {
    need_order(jet, 3)?;
    let n = jet.dim();
    need_dim(n, 3)?;
    let f = Fields::new(jet);
    let p = f.schouten();
    let dp = values(&covariant_field(n, 2, &p, &f.chr));
    let mut c = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for cc in 0..n {
                c[(a * n + b) * n + cc] = dp[(b * n + cc) * n + a] - dp[(a * n + cc) * n + b];
            }
        }
    }
    let tensor = PointTensor::covariant(n, 3, c)?;
    if n < 4 {
        return Ok(CottonReport { tensor, weyl_divergence: None, defect: None });
    }
    let w = f.weyl_down(&p);
    let dw = values(&covariant_field(n, 4, &w, &f.chr));
    let scale = 1.0 / (n as f64 - 3.0);
    let mut alt = vec![0.0; n * n * n];
    for (abc, slot) in alt.iter_mut().enumerate() {
        let mut s = 0.0;
        for l in 0..n {
            for m in 0..n {
                s += jet.ginv(l, m) * dw[(abc * n + l) * n + m];
            }
        }
        *slot = s * scale;
    }
    let alt = PointTensor::covariant(n, 3, alt)?;
    let defect = tensor.max_diff(&alt);
    Ok(CottonReport { tensor, weyl_divergence: Some(alt), defect: Some(defect) })
}

/// Bach tensor computed from the Weyl divergence and from the Schouten tensor.
///
/// With `R_abcd = ⟨(∇_a∇_b − ∇_b∇_a)∂_c, ∂_d⟩` the contracted Bianchi identity
/// gives `∇^l W_abcl = (n−3) C_abc`, which fixes the sign of the second form.
#[derive(Debug, Clone, Serialize)]
pub struct BachReport {
    /// `∇^k∇^l W_akbl + ½ R^{kl} W_akbl`.
    pub tensor: PointTensor,
    /// `(n−3)(−∇^k∇_k P_ab + ∇^k∇_a P_bk) + ½ R^{kl} W_akbl`.
    pub alternate: PointTensor,
    pub defect: f64,
    /// `defect / max(1, max|B|)`.
    pub relative_defect: f64,
    /// `max |B_ab − B_ba|`.
    pub asymmetry: f64,
}

pub fn bach(spec: &MetricSpec, x: &[f64]) -> Result<BachReport> {
    bach_at(&spec.jet(x, 4)?)
}

pub fn bach_at(jet: &MetricJet) -> Result<BachReport> {
    need_order(jet, 4)?;
    let n = jet.dim();
    need_dim(n, 3)?;
    let f = Fields::new(jet);
    let p = f.schouten();
    let w = f.weyl_down(&p);
    let (_, ginv) = flat_g(jet);
    let ric = values(&f.ricci);
    let wv = values(&w);
    let mut ric_up = vec![0.0; n * n];
    for k in 0..n {
        for l in 0..n {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += ginv[k * n + a] * ginv[l * n + b] * ric[a * n + b];
                }
            }
            ric_up[k * n + l] = s;
        }
    }
    let idx4 = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
    let mut rw = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += ric_up[k * n + l] * wv[idx4(a, k, b, l)];
                }
            }
            rw[a * n + b] = 0.5 * s;
        }
    }

    let dw = covariant_field(n, 4, &w, &f.chr);
    let ddw = values(&covariant_field(n, 5, &dw, &f.chr));
    let mut primary = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    let base = idx4(a, k, b, l) * n * n;
                    for r in 0..n {
                        for q in 0..n {
                            s += ginv[k * n + q] * ginv[l * n + r] * ddw[base + r * n + q];
                        }
                    }
                }
            }
            primary[a * n + b] = s + rw[a * n + b];
        }
    }

    let dp = covariant_field(n, 2, &p, &f.chr);
    let ddp = values(&covariant_field(n, 3, &dp, &f.chr));
    let mut alternate = vec![0.0; n * n];
    let pref = n as f64 - 3.0;
    for a in 0..n {
        for b in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                for q in 0..n {
                    s += ginv[k * n + q] * (ddp[idx4(b, k, a, q)] - ddp[idx4(a, b, k, q)]);
                }
            }
            alternate[a * n + b] = pref * s + rw[a * n + b];
        }
    }
    let tensor = PointTensor::covariant(n, 2, primary)?;
    let alternate = PointTensor::covariant(n, 2, alternate)?;
    let defect = tensor.max_diff(&alternate);
    let mut asymmetry: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            asymmetry = asymmetry.max((tensor.get(&[a, b]) - tensor.get(&[b, a])).abs());
        }
    }
    Ok(BachReport { relative_defect: defect / tensor.max_abs().max(1.0), tensor, alternate, defect, asymmetry })
}

/// Obstruction tensor in dimension four, where it equals Bach.
#[derive(Debug, Clone, Serialize)]
pub struct ObstructionReport {
    pub tensor: PointTensor,
    /// `|g|^{1/4} O_ab`, unchanged under `g → c g`.
    pub invariant: PointTensor,
    pub bach: BachReport,
}

pub fn obstruction4(spec: &MetricSpec, x: &[f64]) -> Result<ObstructionReport> {
    check_obstruction_dim(spec.dim())?;
    obstruction4_at(&spec.jet(x, 4)?)
}

fn check_obstruction_dim(n: usize) -> Result<()> {
    if n != 4 {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "the obstruction tensor is only available for n = 4".into(),
        });
    }
    Ok(())
}

pub fn obstruction4_at(jet: &MetricJet) -> Result<ObstructionReport> {
    check_obstruction_dim(jet.dim())?;
    let bach = bach_at(jet)?;
    let factor = jet.det().powf(0.25);
    Ok(ObstructionReport { tensor: bach.tensor.clone(), invariant: bach.tensor.scaled(factor), bach })
}

/// Jet of `ĝ = |g|^{-1/n} g`.
pub fn conformal_normalize(jet: &MetricJet) -> MetricJet {
    let n = jet.dim();
    let factor = jet.logdet_series().scale(-1.0 / n as f64).exp();
    let g = jet.g_series().iter().map(|s| s.mul_series(&factor)).collect();
    MetricJet::from_series(jet.point(), g).expect("positive multiple of an SPD jet")
}

/// `Γ^k = g^{ab} Γ^k_ab`; needs order ≥ 1.
pub fn contracted_christoffel(jet: &MetricJet) -> Result<Vec<f64>> {
    need_order(jet, 1)?;
    let n = jet.dim();
    let chr = christoffel(n, jet.g_series(), jet.ginv_series());
    Ok((0..n)
        .map(|k| {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += jet.ginv(a, b) * chr[(k * n + a) * n + b].value();
                }
            }
            s
        })
        .collect())
}

/// `Γ̃^k = −((n−2)/2) Σ_{r,a,b} g^{kr} g^{ka} g^{kb} ∂_r g_ab / g^{kk}`.
///
/// `k` is a fixed index, not summed, so the result depends on the coordinates.
pub fn gamma_tilde(jet: &MetricJet) -> Result<Vec<f64>> {
    need_order(jet, 1)?;
    let n = jet.dim();
    let pref = -(n as f64 - 2.0) / 2.0;
    let mut out = vec![0.0; n];
    for (k, o) in out.iter_mut().enumerate() {
        let gkk = jet.ginv(k, k);
        let mut s = 0.0;
        for r in 0..n {
            for a in 0..n {
                for b in 0..n {
                    s += jet.ginv(k, r) * jet.ginv(k, a) * jet.ginv(k, b) * jet.dg(&[r], a, b);
                }
            }
        }
        *o = pref * s / gkk;
    }
    Ok(out)
}

/// `Γ^k − Γ̃^k`, zero in n-harmonic coordinates.
pub fn gauge_residual(jet: &MetricJet) -> Result<Vec<f64>> {
    let gamma = contracted_christoffel(jet)?;
    let tilde = gamma_tilde(jet)?;
    Ok(gamma.iter().zip(&tilde).map(|(a, b)| a - b).collect())
}

/// `δ(|du|^{p−2} du) = −|g|^{-1/2} ∂_i(|g|^{1/2} g^{ij} |du|_g^{p−2} ∂_j u)` at `x`.
pub fn p_harmonic_residual(spec: &MetricSpec, u: &Expr, p: f64, x: &[f64]) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidConfig(format!("p = {p} must exceed 1")));
    }
    let jet = spec.jet(x, 2)?;
    let n = jet.dim();
    let us = u.eval_series(x);
    let du: Vec<Series> = (0..n).map(|j| us.deriv(j)).collect();
    let ginv = jet.ginv_series();
    let mut norm2 = Series::zero(n);
    for i in 0..n {
        for j in 0..n {
            norm2.add_product(1.0, &ginv[i * n + j], &du[i].mul_series(&du[j]));
        }
    }
    let norm = norm2.value().max(0.0).sqrt();
    if norm < 1e-12 {
        return Err(Error::DegenerateGradient { norm });
    }
    let weight = norm2.powf((p - 2.0) / 2.0);
    let sqrt_det = jet.logdet_series().scale(0.5).exp();
    let common = weight.mul_series(&sqrt_det);
    let mut div = 0.0;
    for i in 0..n {
        let mut v = Series::zero(n);
        for j in 0..n {
            v.add_product(1.0, &ginv[i * n + j], &du[j]);
        }
        div += v.mul_series(&common).deriv(i).value();
    }
    Ok(-div / sqrt_det.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, g: &[&str]) -> MetricSpec {
        let bounds = vec![[-1.0, 1.0]; n];
        let exprs = g.iter().map(|s| crate::expr::parse(s, n).unwrap()).collect();
        MetricSpec::new("test", n, bounds, exprs).unwrap()
    }

    fn conformal(n: usize, c: &str) -> MetricSpec {
        let g: Vec<String> = (0..n * n).map(|i| if i / n == i % n { c.to_string() } else { "0".to_string() }).collect();
        let refs: Vec<&str> = g.iter().map(String::as_str).collect();
        spec(n, &refs)
    }

    #[test]
    fn round_sphere_scalar_curvature() {
        let s = conformal(3, "4/(1+x1^2+x2^2+x3^2)^2");
        for x in [[0.0, 0.0, 0.0], [0.3, -0.2, 0.5]] {
            let jet = s.jet(&x, 2).unwrap();
            let b = curvature_bundle(&jet).unwrap();
            assert!((b.scalar - 6.0).abs() < 1e-12, "{}", b.scalar);
            assert!(b.contracted_identity_defect < 1e-12);
            let p = schouten(&b, &jet).unwrap();
            for a in 0..3 {
                for c in 0..3 {
                    assert!((p.get(&[a, c]) - 0.5 * jet.g(a, c)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn one_term_christoffel() {
        let s = spec(3, &["1", "0", "0", "0", "1+x1^2", "0", "0", "0", "1"]);
        let b = curvature_bundle(&s.jet(&[0.5, 0.0, 0.0], 2).unwrap()).unwrap();
        assert!((b.christoffel.get(&[0, 1, 1]) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn metric_is_parallel() {
        let s = spec(3, &["1+x2^2", "0.1*x1", "0", "0.1*x1", "2+x3", "0", "0", "0", "1"]);
        let jet = s.jet(&[0.2, 0.3, -0.1], 2).unwrap();
        let b = curvature_bundle(&jet).unwrap();
        let n = 3;
        let g = PointTensor::covariant(n, 2, (0..9).map(|i| jet.g(i / 3, i % 3)).collect()).unwrap();
        let mut partials = vec![0.0; 27];
        for i in 0..9 {
            for m in 0..3 {
                partials[i * 3 + m] = jet.dg(&[m], i / 3, i % 3);
            }
        }
        let dg = covariant_derivative(&g, &b, &partials).unwrap();
        assert!(dg.max_abs() < 1e-14);
    }

    #[test]
    fn weyl_vanishes_in_three_dimensions_and_forms_agree() {
        let s = spec(3, &["1", "0", "0", "0", "1+x1^2", "0", "0", "0", "1+x2^2"]);
        let jet = s.jet(&[0.4, 0.1, 0.0], 2).unwrap();
        let b = curvature_bundle(&jet).unwrap();
        assert!(weyl(&b, &jet, WeylForm::AllDown).unwrap().max_abs() < 1e-12);
        let s4 = spec(4, &["1", "0", "0", "0", "0", "1", "0", "0", "0", "0", "1", "0", "0", "0", "0", "1+x1^2+x2^2"]);
        let jet = s4.jet(&[0.3, 0.2, 0.0, 0.0], 2).unwrap();
        let b = curvature_bundle(&jet).unwrap();
        let down = weyl(&b, &jet, WeylForm::AllDown).unwrap();
        let mixed = weyl(&b, &jet, WeylForm::LastUp).unwrap();
        let (g, _) = flat_g(&jet);
        assert!(down.max_abs() > 1e-3);
        assert!(mixed.lower(3, &g).unwrap().max_diff(&down) < 1e-12);
    }

    #[test]
    fn cotton_and_bach_cross_checks() {
        let s4 = spec(
            4,
            &["1", "0", "0", "0", "0", "1+0.2*x3^2", "0", "0", "0", "0", "1", "0", "0", "0", "0", "1+x1^2+x2^2"],
        );
        let x = [0.3, 0.2, 0.1, 0.0];
        let c = cotton(&s4, &x).unwrap();
        assert!(c.tensor.max_abs() > 1e-3);
        assert!(c.defect.unwrap() < 1e-10, "{:?}", c.defect);
        let b = bach(&s4, &x).unwrap();
        assert!(b.tensor.max_abs() > 1e-3);
        assert!(b.relative_defect < 1e-9, "{}", b.relative_defect);
        assert!(b.asymmetry < 1e-9);
    }

    #[test]
    fn gauge_residual_on_conformal_class() {
        let s = conformal(4, "exp(0.3*x1 - 0.2*x2*x3)");
        let jet = s.jet(&[0.2, -0.1, 0.4, 0.3], 1).unwrap();
        let r = gauge_residual(&jet).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-13), "{r:?}");
        let diag = spec(3, &["1", "0", "0", "0", "1+x1^2", "0", "0", "0", "1"]);
        let r = gauge_residual(&diag.jet(&[0.5, 0.0, 0.0], 1).unwrap()).unwrap();
        assert!(r[0].abs() > 0.1);
    }

    #[test]
    fn p_harmonic() {
        let s = conformal(3, "4/(1+x1^2+x2^2+x3^2)^2");
        let u = crate::expr::parse("x2", 3).unwrap();
        let x = [0.2, 0.1, -0.3];
        assert!(p_harmonic_residual(&s, &u, 3.0, &x).unwrap().abs() < 1e-12);
        assert!(p_harmonic_residual(&s, &u, 2.0, &x).unwrap().abs() > 1e-3);
        let c = crate::expr::parse("1", 3).unwrap();
        assert!(matches!(p_harmonic_residual(&s, &c, 3.0, &x), Err(Error::DegenerateGradient { .. })));
    }

    #[test]
    fn normalization_and_obstruction_dimension() {
        let s = conformal(4, "4");
        let jet = conformal_normalize(&s.jet(&[0.0; 4], 2).unwrap());
        assert!((jet.det() - 1.0).abs() < 1e-14);
        assert!((jet.g(0, 0) - 1.0).abs() < 1e-14);
        let s3 = conformal(3, "1");
        assert!(matches!(obstruction4(&s3, &[0.0; 3]), Err(Error::UnsupportedDimension { .. })));
    }
}
