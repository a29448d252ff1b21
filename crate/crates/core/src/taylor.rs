//! Truncated multivariate Taylor series in up to six variables.
//!
//! A [`Series`] stores coefficients `c_α` of `Σ c_α δ^α` around a base point,
//! graded by total degree. `valid` is the highest degree whose coefficients are
//! exact: products keep the smaller of the two, a partial derivative lowers it
//! by one. The partial derivative `∂^α f` at the base point is `α! c_α`.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use crate::expr::{Expr, Func};

pub const MAX_ORDER: usize = 4;
pub const MAX_DIM: usize = 6;

type Exponent = [u8; MAX_DIM];

/// Monomial bookkeeping shared by every series of one dimension.
pub struct TaylorSpace {
    n: usize,
    exps: Vec<Exponent>,
    start: [usize; MAX_ORDER + 2],
    factorial: Vec<f64>,
    lookup: HashMap<Exponent, usize>,
    // (i, j, k): c_k += a_i b_j, sorted by degree of k
    products: Vec<(u16, u16, u16)>,
    product_cut: [usize; MAX_ORDER + 1],
    // per axis (src, dst, factor), sorted by degree of dst
    derivs: Vec<Vec<(u16, u16, f64)>>,
    deriv_cut: Vec<[usize; MAX_ORDER + 1]>,
}

impl fmt::Debug for TaylorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TaylorSpace(n={}, monomials={})", self.n, self.exps.len())
    }
}

fn degree(e: &Exponent) -> usize {
    e.iter().map(|&v| v as usize).sum()
}

fn push_monomials(n: usize, axis: usize, left: usize, cur: &mut Exponent, out: &mut Vec<Exponent>) {
    if axis + 1 == n {
        cur[axis] = left as u8;
        out.push(*cur);
        cur[axis] = 0;
        return;
    }
    for k in (0..=left).rev() {
        cur[axis] = k as u8;
        push_monomials(n, axis + 1, left - k, cur, out);
    }
    cur[axis] = 0;
}

impl TaylorSpace {
    fn build(n: usize) -> TaylorSpace {
        let mut exps = Vec::new();
        let mut start = [0usize; MAX_ORDER + 2];
        for (d, slot) in start.iter_mut().enumerate().take(MAX_ORDER + 1) {
            *slot = exps.len();
            let mut cur = [0u8; MAX_DIM];
            if n == 0 {
                if d == 0 {
                    exps.push(cur);
                }
                continue;
            }
            push_monomials(n, 0, d, &mut cur, &mut exps);
        }
        start[MAX_ORDER + 1] = exps.len();
        let lookup: HashMap<Exponent, usize> = exps.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let factorial =
            exps.iter().map(|e| e.iter().map(|&k| (1..=k as u64).product::<u64>() as f64).product()).collect();

        let mut products = Vec::new();
        for (i, a) in exps.iter().enumerate() {
            for (j, b) in exps.iter().enumerate() {
                if degree(a) + degree(b) > MAX_ORDER {
                    continue;
                }
                let mut s = [0u8; MAX_DIM];
                for t in 0..MAX_DIM {
                    s[t] = a[t] + b[t];
                }
                products.push((i as u16, j as u16, lookup[&s] as u16));
            }
        }
        products.sort_by_key(|&(_, _, k)| (degree(&exps[k as usize]), k));
        let mut product_cut = [0usize; MAX_ORDER + 1];
        for (d, cut) in product_cut.iter_mut().enumerate() {
            *cut = products.iter().take_while(|&&(_, _, k)| degree(&exps[k as usize]) <= d).count();
        }

        let mut derivs = Vec::with_capacity(n);
        let mut deriv_cut = Vec::with_capacity(n);
        for axis in 0..n {
            let mut table = Vec::new();
            for (src, e) in exps.iter().enumerate() {
                if e[axis] == 0 {
                    continue;
                }
                let mut d = *e;
                d[axis] -= 1;
                table.push((src as u16, lookup[&d] as u16, e[axis] as f64));
            }
            table.sort_by_key(|&(_, dst, _)| dst);
            let mut cut = [0usize; MAX_ORDER + 1];
            for (d, c) in cut.iter_mut().enumerate() {
                *c = table.iter().take_while(|&&(_, dst, _)| degree(&exps[dst as usize]) <= d).count();
            }
            derivs.push(table);
            deriv_cut.push(cut);
        }

        TaylorSpace { n, exps, start, factorial, lookup, products, product_cut, derivs, deriv_cut }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of coefficients of degree at most `order`.
    pub fn len(&self, order: usize) -> usize {
        self.start[order + 1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Monomials of exactly degree `d`, as `(index, exponent)` pairs.
    pub fn monomials_of_degree(&self, d: usize) -> impl Iterator<Item = (usize, &[u8])> {
        (self.start[d]..self.start[d + 1]).map(move |i| (i, &self.exps[i][..self.n]))
    }

    /// Index of the first monomial of degree `d`.
    pub fn degree_start(&self, d: usize) -> usize {
        self.start[d]
    }

    pub fn exponent(&self, index: usize) -> &[u8] {
        &self.exps[index][..self.n]
    }

    pub fn factorial(&self, index: usize) -> f64 {
        self.factorial[index]
    }

    /// Index of the monomial `Π x_a` over the listed axes (repeats allowed).
    pub fn index_of_axes(&self, axes: &[usize]) -> usize {
        let mut e = [0u8; MAX_DIM];
        for &a in axes {
            e[a] += 1;
        }
        self.lookup[&e]
    }
}

/// Shared monomial table for dimension `n` (1 ≤ n ≤ 6).
pub fn space(n: usize) -> &'static TaylorSpace {
    static SPACES: [OnceLock<TaylorSpace>; MAX_DIM + 1] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    assert!(n <= MAX_DIM, "Taylor space dimension {n} exceeds {MAX_DIM}");
    SPACES[n].get_or_init(|| TaylorSpace::build(n))
}

/// Truncated Taylor series around an implicit base point.
#[derive(Clone)]
pub struct Series {
    space: &'static TaylorSpace,
    c: Vec<f64>,
    valid: usize,
}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Series").field("n", &self.space.n).field("valid", &self.valid).field("c", &self.c).finish()
    }
}

impl Series {
    pub fn zero(n: usize) -> Series {
        Series::constant(n, 0.0)
    }

    pub fn constant(n: usize, v: f64) -> Series {
        let sp = space(n);
        let mut c = vec![0.0; sp.len(MAX_ORDER)];
        c[0] = v;
        Series { space: sp, c, valid: MAX_ORDER }
    }

    /// The coordinate function `x_axis` expanded around `x0`.
    pub fn variable(n: usize, axis: usize, x0: f64) -> Series {
        let mut s = Series::constant(n, x0);
        let idx = s.space.index_of_axes(&[axis]);
        s.c[idx] = 1.0;
        s
    }

    /// Builds a series from coefficients exact through degree `valid`.
    pub fn from_coeffs(n: usize, mut c: Vec<f64>, valid: usize) -> Series {
        let sp = space(n);
        assert!(valid <= MAX_ORDER);
        c.resize(sp.len(valid), 0.0);
        Series { space: sp, c, valid }
    }

    pub fn dim(&self) -> usize {
        self.space.n
    }

    pub fn space(&self) -> &'static TaylorSpace {
        self.space
    }

    pub fn valid(&self) -> usize {
        self.valid
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// `∂^α f` at the base point, where α counts the listed axes.
    pub fn partial(&self, axes: &[usize]) -> f64 {
        assert!(axes.len() <= self.valid, "partial of order {} beyond valid order {}", axes.len(), self.valid);
        let idx = self.space.index_of_axes(axes);
        self.c[idx] * self.space.factorial[idx]
    }

    pub fn truncate(mut self, valid: usize) -> Series {
        if valid < self.valid {
            self.valid = valid;
            self.c.truncate(self.space.len(valid));
        }
        self
    }

    pub fn scale(&self, s: f64) -> Series {
        Series { space: self.space, c: self.c.iter().map(|v| v * s).collect(), valid: self.valid }
    }

    pub fn add_scalar(&self, s: f64) -> Series {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Series) {
        let v = self.valid.min(other.valid);
        self.c.truncate(self.space.len(v));
        self.valid = v;
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += s * b;
        }
    }

    /// `self += s * a * b`.
    pub fn add_product(&mut self, s: f64, a: &Series, b: &Series) {
        let v = self.valid.min(a.valid).min(b.valid);
        self.c.truncate(self.space.len(v));
        self.valid = v;
        for &(i, j, k) in &self.space.products[..self.space.product_cut[v]] {
            self.c[k as usize] += s * a.c[i as usize] * b.c[j as usize];
        }
    }

    pub fn mul_series(&self, o: &Series) -> Series {
        let v = self.valid.min(o.valid);
        let mut c = vec![0.0; self.space.len(v)];
        for &(i, j, k) in &self.space.products[..self.space.product_cut[v]] {
            c[k as usize] += self.c[i as usize] * o.c[j as usize];
        }
        Series { space: self.space, c, valid: v }
    }

    /// Partial derivative along `axis`; exact through `valid - 1`.
    pub fn deriv(&self, axis: usize) -> Series {
        assert!(self.valid > 0, "cannot differentiate a series exact only to order 0");
        let v = self.valid - 1;
        let mut c = vec![0.0; self.space.len(v)];
        let table = &self.space.derivs[axis];
        for &(src, dst, f) in &table[..self.space.deriv_cut[axis][v]] {
            c[dst as usize] += f * self.c[src as usize];
        }
        Series { space: self.space, c, valid: v }
    }

    /// `f(self)` given `derivs[k] = f^(k)(self.value())` for `k = 0..=valid`.
    pub fn compose(&self, derivs: &[f64]) -> Series {
        let v = self.valid;
        let mut delta = self.clone();
        delta.c[0] = 0.0;
        let mut out = Series { space: self.space, c: vec![0.0; self.space.len(v)], valid: v };
        out.c[0] = derivs[0];
        let mut power = delta.clone();
        let mut kfact = 1.0;
        for (k, d) in derivs.iter().enumerate().take(v + 1).skip(1) {
            kfact *= k as f64;
            out.axpy(d / kfact, &power);
            if k < v {
                power = power.mul_series(&delta);
            }
        }
        out
    }

    pub fn powf(&self, p: f64) -> Series {
        let s0 = self.value();
        let mut derivs = [0.0; MAX_ORDER + 1];
        let mut falling = 1.0;
        for (k, d) in derivs.iter_mut().enumerate() {
            *d = falling * s0.powf(p - k as f64);
            falling *= p - k as f64;
        }
        self.compose(&derivs)
    }

    pub fn powi(&self, p: i32) -> Series {
        let s0 = self.value();
        let mut derivs = [0.0; MAX_ORDER + 1];
        let mut falling = 1.0;
        for (k, d) in derivs.iter_mut().enumerate() {
            *d = if falling == 0.0 { 0.0 } else { falling * s0.powi(p - k as i32) };
            falling *= (p - k as i32) as f64;
        }
        self.compose(&derivs)
    }

    pub fn recip(&self) -> Series {
        self.powi(-1)
    }

    pub fn sqrt(&self) -> Series {
        self.powf(0.5)
    }

    pub fn exp(&self) -> Series {
        let e = self.value().exp();
        self.compose(&[e; MAX_ORDER + 1])
    }

    pub fn ln(&self) -> Series {
        let s0 = self.value();
        let mut derivs = [0.0; MAX_ORDER + 1];
        derivs[0] = s0.ln();
        let mut fact = 1.0;
        for (k, d) in derivs.iter_mut().enumerate().skip(1) {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            *d = sign * fact / s0.powi(k as i32);
            fact *= k as f64;
        }
        self.compose(&derivs)
    }

    pub fn sin(&self) -> Series {
        let (s, c) = self.value().sin_cos();
        self.compose(&[s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Series {
        let (s, c) = self.value().sin_cos();
        self.compose(&[c, -s, -c, s, c])
    }

    pub fn apply(&self, f: Func) -> Series {
        match f {
            Func::Exp => self.exp(),
            Func::Log => self.ln(),
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Sqrt => self.sqrt(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }
}

impl Add for &Series {
    type Output = Series;
    fn add(self, o: &Series) -> Series {
        let mut out = self.clone();
        out.axpy(1.0, o);
        out
    }
}

impl Sub for &Series {
    type Output = Series;
    fn sub(self, o: &Series) -> Series {
        let mut out = self.clone();
        out.axpy(-1.0, o);
        out
    }
}

impl Mul for &Series {
    type Output = Series;
    fn mul(self, o: &Series) -> Series {
        self.mul_series(o)
    }
}

impl Mul<f64> for &Series {
    type Output = Series;
    fn mul(self, s: f64) -> Series {
        self.scale(s)
    }
}

impl Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        self.scale(-1.0)
    }
}

impl Expr {
    /// Taylor expansion of the expression around `x0`.
    pub fn eval_series(&self, x0: &[f64]) -> Series {
        let n = x0.len();
        match self {
            Expr::Num(v) => Series::constant(n, *v),
            Expr::Var(i) => Series::variable(n, *i, x0[*i]),
            Expr::Add(ts) => {
                let mut acc = Series::zero(n);
                for t in ts {
                    acc.axpy(1.0, &t.eval_series(x0));
                }
                acc
            }
            Expr::Mul(fs) => {
                let mut acc = Series::constant(n, 1.0);
                for f in fs {
                    acc = acc.mul_series(&f.eval_series(x0));
                }
                acc
            }
            Expr::Neg(e) => e.eval_series(x0).scale(-1.0),
            Expr::Div(a, b) => a.eval_series(x0).mul_series(&b.eval_series(x0).recip()),
            Expr::Pow(b, k) => b.eval_series(x0).powi(*k),
            Expr::Call(f, a) => a.eval_series(x0).apply(*f),
        }
    }
}

/// Inverse and log-determinant of a symmetric positive definite matrix of
/// series (row-major), by Gauss-Jordan elimination without pivoting.
/// Returns `None` when a pivot value is not positive.
pub fn spd_inverse_logdet(a: &[Series], n: usize) -> Option<(Vec<Series>, Series)> {
    let dim = a[0].dim();
    let mut m: Vec<Series> = a.to_vec();
    let mut inv: Vec<Series> =
        (0..n * n).map(|i| Series::constant(dim, if i / n == i % n { 1.0 } else { 0.0 })).collect();
    let mut logdet = Series::zero(dim);
    for k in 0..n {
        let pivot = m[k * n + k].clone();
        if !(pivot.value() > 0.0) {
            return None;
        }
        logdet.axpy(1.0, &pivot.ln());
        let r = pivot.recip();
        for j in 0..n {
            m[k * n + j] = m[k * n + j].mul_series(&r);
            inv[k * n + j] = inv[k * n + j].mul_series(&r);
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = m[i * n + k].clone();
            for j in 0..n {
                let mk = m[k * n + j].clone();
                m[i * n + j].add_product(-1.0, &f, &mk);
                let ik = inv[k * n + j].clone();
                inv[i * n + j].add_product(-1.0, &f, &ik);
            }
        }
    }
    Some((inv, logdet))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn monomial_counts() {
        assert_eq!(space(3).len(MAX_ORDER), 35);
        assert_eq!(space(4).len(MAX_ORDER), 70);
        assert_eq!(space(6).len(MAX_ORDER), 210);
        assert_eq!(space(4).len(0), 1);
    }

    #[test]
    fn series_partials_match_symbolic_derivatives() {
        let x = [0.3, -0.2, 0.5];
        let e = parse("exp(x1*x2)/(2 + sin(x3)) + sqrt(3 + x1^2)*log(2 + x2)", 3).unwrap();
        let s = e.eval_series(&x);
        for axes in [vec![0], vec![1, 2], vec![0, 0, 1], vec![0, 1, 2, 2], vec![2, 2, 2, 2]] {
            let mut d = e.clone();
            for &a in &axes {
                d = d.differentiate(a);
            }
            let want = d.eval(&x);
            let got = s.partial(&axes);
            assert!((want - got).abs() < 1e-11 * (1.0 + want.abs()), "{axes:?}: {want} vs {got}");
        }
    }

    #[test]
    fn derivative_lowers_validity() {
        let s = parse("x1^3*x2", 2).unwrap().eval_series(&[1.0, 2.0]);
        let d = s.deriv(0);
        assert_eq!(d.valid(), 3);
        assert!((d.value() - 6.0).abs() < 1e-15);
        assert!((d.partial(&[0, 1]) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_and_logdet() {
        let x = [0.2, 0.4];
        let g: Vec<Series> =
            ["2 + x1^2", "x1*x2", "x1*x2", "1 + x2^2"].iter().map(|s| parse(s, 2).unwrap().eval_series(&x)).collect();
        let (inv, logdet) = spd_inverse_logdet(&g, 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Series::zero(2);
                for k in 0..2 {
                    acc.add_product(1.0, &g[i * 2 + k], &inv[k * 2 + j]);
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((acc.value() - want).abs() < 1e-14);
                assert!(acc.coeffs()[1..].iter().all(|c| c.abs() < 1e-13));
            }
        }
        let det = parse("(2 + x1^2)*(1 + x2^2) - x1^2*x2^2", 2).unwrap();
        let want = det.differentiate(0).eval(&x) / det.eval(&x);
        assert!((logdet.partial(&[0]) - want).abs() < 1e-14);
    }
}
