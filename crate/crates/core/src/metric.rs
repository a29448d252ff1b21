//! Metric definitions and their derivative jets.

use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::taylor::{space, spd_inverse_logdet, Series, MAX_DIM, MAX_ORDER};

/// On-disk form: `{"n": 3, "box": [[lo, hi], ...], "g": [["expr", ...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    pub g: Vec<Vec<String>>,
}

/// Closed-form metric on an axis-aligned box.
///
/// Components are stored as a full symmetric `n × n` array of expressions.
/// Symbolic derivative tables are built lazily, one degree at a time.
#[derive(Debug, Clone)]
pub struct MetricSpec {
    name: String,
    n: usize,
    bounds: Vec<[f64; 2]>,
    g: Vec<Expr>,
    // degree d-1 holds, per upper-triangle pair, one Expr per monomial of degree d
    tables: [OnceLock<Vec<Vec<Expr>>>; MAX_ORDER],
}

fn pair_index(n: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * n - a * (a + 1) / 2 + b
}

impl MetricSpec {
    /// Builds and validates a spec; asymmetric entries are symmetrized.
    pub fn new(name: impl Into<String>, n: usize, bounds: Vec<[f64; 2]>, g: Vec<Expr>) -> Result<MetricSpec> {
        if n < 3 {
            return Err(Error::DimensionTooSmall { n, min: 3 });
        }
        if n > MAX_DIM {
            return Err(Error::DimensionTooLarge { n, max: MAX_DIM });
        }
        if bounds.len() != n {
            return Err(Error::InvalidSpec(format!("box has {} intervals, expected {n}", bounds.len())));
        }
        for (i, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidSpec(format!("box interval {} is [{lo}, {hi}]", i + 1)));
            }
        }
        if g.len() != n * n {
            return Err(Error::InvalidSpec(format!("metric has {} entries, expected {}", g.len(), n * n)));
        }
        for e in &g {
            if let Some(v) = e.max_var() {
                if v >= n {
                    return Err(Error::VariableOutOfRange { index: v + 1, n });
                }
            }
        }
        let mut sym = g.clone();
        for a in 0..n {
            for b in a + 1..n {
                let (u, l) = (g[a * n + b].canonical(), g[b * n + a].canonical());
                let e = if u == l { u } else { Expr::mul(vec![Expr::Num(0.5), Expr::add(vec![u, l])]) };
                sym[a * n + b] = e.clone();
                sym[b * n + a] = e;
            }
        }
        let spec = MetricSpec { name: name.into(), n, bounds, g: sym, tables: Default::default() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file_struct(file: &MetricSpecFile) -> Result<MetricSpec> {
        let n = file.n;
        if file.g.len() != n || file.g.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidSpec(format!("\"g\" must be a {n}x{n} array")));
        }
        if n > MAX_DIM {
            return Err(Error::DimensionTooLarge { n, max: MAX_DIM });
        }
        let mut g = Vec::with_capacity(n * n);
        for row in &file.g {
            for src in row {
                g.push(parse(src, n)?);
            }
        }
        let name = file.name.clone().unwrap_or_else(|| "unnamed".to_string());
        MetricSpec::new(name, n, file.bounds.clone(), g)
    }

    pub fn from_json(text: &str) -> Result<MetricSpec> {
        let file: MetricSpecFile = serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        MetricSpec::from_file_struct(&file)
    }

    pub fn from_path(path: &Path) -> Result<MetricSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))?;
        MetricSpec::from_json(&text)
    }

    pub fn to_file_struct(&self) -> MetricSpecFile {
        MetricSpecFile {
            name: Some(self.name.clone()),
            n: self.n,
            bounds: self.bounds.clone(),
            g: (0..self.n).map(|a| (0..self.n).map(|b| self.g[a * self.n + b].to_string()).collect()).collect(),
        }
    }

    /// Conformal multiple `c · g` on the same box.
    pub fn scaled(&self, c: &Expr) -> Result<MetricSpec> {
        let g = self.g.iter().map(|e| Expr::mul(vec![c.clone(), e.clone()])).collect();
        MetricSpec::new(format!("({c}) * {}", self.name), self.n, self.bounds.clone(), g)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn component(&self, a: usize, b: usize) -> &Expr {
        &self.g[a * self.n + b]
    }

    /// Cell-centred validation lattice: `k` points per axis with `k^n ≤ 1024`, `k ≤ 5`.
    pub fn validation_points(&self) -> Vec<Vec<f64>> {
        let mut k = 5usize;
        while k.pow(self.n as u32) > 1024 {
            k -= 1;
        }
        let total = k.pow(self.n as u32);
        (0..total)
            .map(|mut id| {
                (0..self.n)
                    .map(|a| {
                        let i = id % k;
                        id /= k;
                        let [lo, hi] = self.bounds[a];
                        lo + (i as f64 + 0.5) / k as f64 * (hi - lo)
                    })
                    .collect()
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        for x in self.validation_points() {
            let m = self.eval(&x);
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Eval(format!("metric at {x:?}")));
            }
            if DMatrix::from_row_slice(self.n, self.n, &m).cholesky().is_none() {
                return Err(Error::NotSpd { point: x });
            }
        }
        Ok(())
    }

    /// Component values `g_ab(x)`, row-major.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.g.iter().map(|e| e.eval(x)).collect()
    }

    /// `true` when `x` lies strictly inside the box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.n && x.iter().zip(&self.bounds).all(|(v, [lo, hi])| lo < v && v < hi)
    }

    /// Symbolic partials of degree `d ≥ 1`, per upper-triangle pair and monomial.
    fn table(&self, d: usize) -> &Vec<Vec<Expr>> {
        self.tables[d - 1].get_or_init(|| {
            let sp = space(self.n);
            let prev: Option<&Vec<Vec<Expr>>> = if d > 1 { Some(self.table(d - 1)) } else { None };
            let mut out = Vec::with_capacity(self.n * (self.n + 1) / 2);
            for a in 0..self.n {
                for b in a..self.n {
                    let pair = pair_index(self.n, a, b);
                    let row: Vec<Expr> = sp
                        .monomials_of_degree(d)
                        .map(|(_, e)| {
                            // differentiate the parent along the last axis present
                            let axis = (0..self.n).rev().find(|&t| e[t] > 0).unwrap();
                            match prev {
                                None => self.g[a * self.n + b].differentiate(axis),
                                Some(p) => {
                                    let mut parent: Vec<usize> = Vec::with_capacity(d);
                                    for (t, &k) in e.iter().enumerate() {
                                        for _ in 0..k {
                                            parent.push(t);
                                        }
                                    }
                                    parent.pop();
                                    let idx = sp.index_of_axes(&parent) - sp.degree_start(d - 1);
                                    p[pair][idx].differentiate(axis)
                                }
                            }
                        })
                        .collect();
                    debug_assert_eq!(out.len(), pair);
                    out.push(row);
                }
            }
            out
        })
    }

    /// Symbolic `∂^α g_ab` for the listed axes (any order, repeats allowed).
    pub fn derivative_expr(&self, axes: &[usize], a: usize, b: usize) -> Expr {
        if axes.is_empty() {
            return self.g[a * self.n + b].clone();
        }
        let sp = space(self.n);
        let idx = sp.index_of_axes(axes) - sp.degree_start(axes.len());
        self.table(axes.len())[pair_index(self.n, a, b)][idx].clone()
    }

    /// Exact jet of the metric at `x` through derivative order `order ≤ 4`.
    pub fn jet(&self, x: &[f64], order: usize) -> Result<MetricJet> {
        if order > MAX_ORDER {
            return Err(Error::InvalidConfig(format!("jet order {order} exceeds {MAX_ORDER}")));
        }
        if !self.contains(x) {
            return Err(Error::Domain { point: x.to_vec() });
        }
        let n = self.n;
        let sp = space(n);
        let mut pairs: Vec<Series> = Vec::with_capacity(n * (n + 1) / 2);
        for a in 0..n {
            for b in a..n {
                let mut c = vec![0.0; sp.len(order)];
                c[0] = self.g[a * n + b].eval(x);
                for d in 1..=order {
                    let row = &self.table(d)[pair_index(n, a, b)];
                    let s0 = sp.degree_start(d);
                    for (k, e) in row.iter().enumerate() {
                        c[s0 + k] = e.eval(x) / sp.factorial(s0 + k);
                    }
                }
                pairs.push(Series::from_coeffs(n, c, order));
            }
        }
        let g = (0..n * n).map(|i| pairs[pair_index(n, i / n, i % n)].clone()).collect();
        MetricJet::from_series(x, g)
    }
}

/// Exact Taylor data of a metric at one point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    n: usize,
    x: Vec<f64>,
    g: Vec<Series>,
    ginv: Vec<Series>,
    logdet: Series,
}

impl MetricJet {
    /// Wraps a symmetric matrix of series; fails unless the value is SPD and finite.
    pub fn from_series(x: &[f64], g: Vec<Series>) -> Result<MetricJet> {
        let n = x.len();
        if g.len() != n * n {
            return Err(Error::Shape(format!("{} series for an {n}x{n} metric", g.len())));
        }
        if g.iter().any(|s| !s.is_finite()) {
            return Err(Error::Eval(format!("metric jet at {x:?}")));
        }
        let (ginv, logdet) = spd_inverse_logdet(&g, n).ok_or_else(|| Error::NotSpd { point: x.to_vec() })?;
        if ginv.iter().any(|s| !s.is_finite()) || !logdet.is_finite() {
            return Err(Error::Eval(format!("inverse metric at {x:?}")));
        }
        Ok(MetricJet { n, x: x.to_vec(), g, ginv, logdet })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn point(&self) -> &[f64] {
        &self.x
    }

    /// Highest derivative order that is exact for every component.
    pub fn order(&self) -> usize {
        self.g.iter().map(Series::valid).min().unwrap_or(0)
    }

    pub fn g(&self, a: usize, b: usize) -> f64 {
        self.g[a * self.n + b].value()
    }

    pub fn ginv(&self, a: usize, b: usize) -> f64 {
        self.ginv[a * self.n + b].value()
    }

    pub fn det(&self) -> f64 {
        self.logdet.value().exp()
    }

    /// `∂^α g_ab` for the listed derivative axes.
    pub fn dg(&self, axes: &[usize], a: usize, b: usize) -> f64 {
        self.g[a * self.n + b].partial(axes)
    }

    /// `∂^α g^{ab}`.
    pub fn dginv(&self, axes: &[usize], a: usize, b: usize) -> f64 {
        self.ginv[a * self.n + b].partial(axes)
    }

    /// `∂^α log|g|`.
    pub fn dlogdet(&self, axes: &[usize]) -> f64 {
        self.logdet.partial(axes)
    }

    pub fn g_series(&self) -> &[Series] {
        &self.g
    }

    pub fn ginv_series(&self) -> &[Series] {
        &self.ginv
    }

    pub fn logdet_series(&self) -> &Series {
        &self.logdet
    }

    /// Metric values as a dense matrix.
    pub fn g_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |a, b| self.g(a, b))
    }

    pub fn ginv_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |a, b| self.ginv(a, b))
    }

    /// Smallest eigenvalue of the metric at the point.
    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.g_matrix()).eigenvalues.min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_spec() -> MetricSpec {
        MetricSpec::from_json(
            r#"{"n": 4, "box": [[-1,1],[-1,1],[-1,1],[-1,1]],
                "g": [["1","0","0","0"],["0","1+x1^2","0","0"],["0","0","1","0"],["0","0","0","1"]]}"#,
        )
        .unwrap()
    }

    #[test]
    fn euclidean_jet_is_trivial() {
        let spec = MetricSpec::from_json(
            r#"{"n": 3, "box": [[-1,1],[-1,1],[-1,1]], "g": [["1","0","0"],["0","1","0"],["0","0","1"]]}"#,
        )
        .unwrap();
        let jet = spec.jet(&[0.1, 0.2, -0.3], 4).unwrap();
        assert_eq!(jet.det(), 1.0);
        assert_eq!(jet.ginv(1, 1), 1.0);
        assert_eq!(jet.dg(&[0, 1, 2, 2], 1, 1), 0.0);
    }

    #[test]
    fn polynomial_partials() {
        let jet = diag_spec().jet(&[0.5, 0.0, 0.0, 0.0], 4).unwrap();
        assert!((jet.dg(&[0], 1, 1) - 1.0).abs() < 1e-15);
        assert!((jet.dg(&[0, 0], 1, 1) - 2.0).abs() < 1e-15);
        assert_eq!(jet.dg(&[0, 0, 0], 1, 1), 0.0);
        assert_eq!(jet.dg(&[1], 1, 1), 0.0);
    }

    #[test]
    fn stereographic_factor_at_origin() {
        let c = "4/(1+x1^2+x2^2+x3^2)^2";
        let text = format!(
            r#"{{"n": 3, "box": [[-1,1],[-1,1],[-1,1]], "g": [["{c}","0","0"],["0","{c}","0"],["0","0","{c}"]]}}"#
        );
        let spec = MetricSpec::from_json(&text).unwrap();
        let jet = spec.jet(&[0.0; 3], 2).unwrap();
        assert!((jet.g(0, 0) - 4.0).abs() < 1e-15);
        assert!((jet.det() - 64.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let spec = diag_spec();
        assert!(matches!(spec.jet(&[2.0, 0.0, 0.0, 0.0], 2), Err(Error::Domain { .. })));
        let bad = MetricSpec::from_json(
            r#"{"n": 3, "box": [[-1,1],[-1,1],[-1,1]], "g": [["-1","0","0"],["0","1","0"],["0","0","1"]]}"#,
        );
        assert!(matches!(bad, Err(Error::NotSpd { .. })));
        let low = MetricSpec::from_json(r#"{"n": 2, "box": [[-1,1],[-1,1]], "g": [["1","0"],["0","1"]]}"#);
        assert!(matches!(low, Err(Error::DimensionTooSmall { .. })));
    }

    #[test]
    fn asymmetric_entries_are_symmetrized() {
        let spec = MetricSpec::from_json(
            r#"{"n": 3, "box": [[-1,1],[-1,1],[-1,1]], "g": [["2","0.2","0"],["0","2","0"],["0","0","2"]]}"#,
        )
        .unwrap();
        assert_eq!(spec.eval(&[0.0; 3])[1], 0.1);
        assert_eq!(spec.eval(&[0.0; 3])[3], 0.1);
    }
}
