//! Gauge residual `Γ^k − Γ̃^k` of the metric expressed in the coordinates `u`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::{Grid, GridMap};
use crate::error::{Error, Result};
use crate::metric::MetricSpec;

#[derive(Debug, Clone, Serialize)]
pub struct GaugeStats {
    pub max: f64,
    pub mean: f64,
    pub nodes: usize,
}

/// Pulled-back metric `J^{-T} g J^{-1}` at an interior node, `J = ∂u/∂x` by
/// central differences, together with `det J`.
fn pulled_metric(spec: &MetricSpec, grid: &Grid, u: &GridMap, node: usize) -> (DMatrix<f64>, f64) {
    let n = grid.dim();
    let j = DMatrix::from_fn(n, n, |r, a| {
        let s = grid.strides()[a];
        (u.get(r, node + s) - u.get(r, node - s)) / (2.0 * grid.spacing()[a])
    });
    let det = j.determinant();
    let g = DMatrix::from_row_slice(n, n, &spec.eval(&grid.coords(node)));
    let jinv = j.try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    let m = jinv.transpose() * g * &jinv;
    ((&m + m.transpose()) * 0.5, det)
}

/// Fits `G_ab(y) ≈ c + b·z + ½ zᵀAz`, `z = (y − y0)/h`, over the `3^n`
/// stencil around each node deep enough inside the grid, then compares the
/// contracted Christoffel symbols with the n-harmonic gauge expression.
pub fn pullback_gauge_check(spec: &MetricSpec, grid: &Grid, u: &GridMap) -> Result<GaugeStats> {
    let n = grid.dim();
    if spec.dim() != n || u.dim() != n {
        return Err(Error::InvalidConfig("metric, grid and map dimensions differ".into()));
    }
    let counts = grid.counts();
    let nodes = grid.node_count();
    let inner: Vec<usize> = grid.interior();
    let pulled: Vec<Option<(DMatrix<f64>, f64)>> =
        (0..nodes).into_par_iter().map(|k| (!grid.is_boundary(k)).then(|| pulled_metric(spec, grid, u, k))).collect();
    let min_jac =
        inner.iter().map(|k| pulled[*k].as_ref().map_or(f64::INFINITY, |p| p.1)).fold(f64::INFINITY, f64::min);
    if !(min_jac > 0.0) {
        return Err(Error::NotDiffeomorphic { min_jacobian: min_jac });
    }
    let centers: Vec<usize> = inner
        .into_iter()
        .filter(|k| grid.multi_index(*k).iter().zip(counts).all(|(i, c)| *i >= 2 && *i + 3 <= *c))
        .collect();
    if centers.is_empty() {
        return Err(Error::InvalidConfig("grid too coarse for the pullback stencil".into()));
    }
    let offsets: Vec<Vec<isize>> = (0..3usize.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let d = (k % 3) as isize - 1;
                    k /= 3;
                    d
                })
                .collect()
        })
        .collect();
    let h = grid.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
    let residuals: Vec<f64> = centers
        .par_iter()
        .map(|&k| {
            let y0 = u.at(k);
            let idx = grid.multi_index(k);
            let p = 1 + n + pairs.len();
            let mut design = DMatrix::zeros(offsets.len(), p);
            let mut rhs = DMatrix::zeros(offsets.len(), pairs.len());
            for (r, off) in offsets.iter().enumerate() {
                let nb: Vec<usize> = idx.iter().zip(off).map(|(i, o)| (*i as isize + o) as usize).collect();
                let node = grid.node_index(&nb);
                let z: Vec<f64> = u.at(node).iter().zip(&y0).map(|(y, c)| (y - c) / h).collect();
                design[(r, 0)] = 1.0;
                for a in 0..n {
                    design[(r, 1 + a)] = z[a];
                }
                for (q, (a, b)) in pairs.iter().enumerate() {
                    design[(r, 1 + n + q)] = z[*a] * z[*b];
                }
                let gm = &pulled[node].as_ref().expect("stencil is interior").0;
                for (q, (a, b)) in pairs.iter().enumerate() {
                    rhs[(r, q)] = gm[(*a, *b)];
                }
            }
            let coef = design.svd(true, true).solve(&rhs, 1e-12).expect("SVD solve");
            let g0 = &pulled[k].as_ref().expect("interior").0;
            // dg[r][a][b] = ∂_r G_ab
            let mut dg = vec![0.0; n * n * n];
            for (q, (a, b)) in pairs.iter().enumerate() {
                for r in 0..n {
                    let v = coef[(1 + r, q)] / h;
                    dg[(r * n + a) * n + b] = v;
                    dg[(r * n + b) * n + a] = v;
                }
            }
            gauge_gap(g0, &dg)
        })
        .collect();
    let max = residuals.iter().cloned().fold(0.0, f64::max);
    let mean = super::pairwise_sum(&residuals) / residuals.len() as f64;
    Ok(GaugeStats { max, mean, nodes: residuals.len() })
}

/// `max_k |Γ^k − Γ̃^k|` from `G` and `∂_r G_ab`.
pub(crate) fn gauge_gap(g: &DMatrix<f64>, dg: &[f64]) -> f64 {
    let n = g.nrows();
    let gi = g.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    let d = |r: usize, a: usize, b: usize| dg[(r * n + a) * n + b];
    // v_l = g^{ab}(∂_a g_bl − ½ ∂_l g_ab)
    let v = DVector::from_fn(n, |l, _| {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += gi[(a, b)] * (d(a, b, l) - 0.5 * d(l, a, b));
            }
        }
        s
    });
    let gamma = &gi * v;
    let pref = -(n as f64 - 2.0) / 2.0;
    (0..n)
        .map(|k| {
            let mut s = 0.0;
            for r in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        s += gi[(k, r)] * gi[(k, a)] * gi[(k, b)] * d(r, a, b);
                    }
                }
            }
            (gamma[k] - pref * s / gi[(k, k)]).abs()
        })
        .fold(0.0, f64::max)
}
