//! n-harmonic coordinates by minimizing the regularized n-Dirichlet energy
//! `Σ_j ∫ (|du^j|_g² + ε²)^{n/2} √|g| dx` with identity boundary values.
//!
//! Each cell uses the midpoint metric and the multilinear-element gradient,
//! the average of forward differences over the cell edges along each axis.
//! [`energy_gradient`] is the exact derivative of the discrete energy.

mod grid;
mod pullback;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MetricSpec;

pub use grid::{Grid, GridMap};
pub use pullback::{pullback_gauge_check, GaugeStats};

/// Sum in a fixed binary tree, independent of thread count.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Midpoint metric data of every cell.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    grid: Grid,
    bases: Vec<usize>,
    corners: Vec<usize>,
    /// `g^{ab}` per cell, row-major.
    ginv: Vec<f64>,
    /// `√|g| · cell volume`.
    weight: Vec<f64>,
    eps_reg: f64,
}

impl EnergyModel {
    pub fn new(spec: &MetricSpec, grid: &Grid, eps_reg: f64) -> Result<EnergyModel> {
        let n = spec.dim();
        if grid.dim() != n {
            return Err(Error::InvalidConfig(format!("grid dimension {} for a metric in dimension {n}", grid.dim())));
        }
        if !(eps_reg >= 0.0) {
            return Err(Error::InvalidConfig("eps_reg must be non-negative".into()));
        }
        let bases = grid.cell_bases();
        let vol = grid.cell_volume();
        let cells: Vec<(Vec<f64>, f64)> = bases
            .par_iter()
            .map(|&b| {
                let x = grid.cell_center(b);
                let g = DMatrix::from_row_slice(n, n, &spec.eval(&x));
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain { point: x });
                }
                let chol = g.cholesky().ok_or_else(|| Error::NotSpd { point: x.clone() })?;
                let det = chol.determinant();
                let inv = chol.inverse();
                Ok((inv.transpose().iter().copied().collect(), det.sqrt() * vol))
            })
            .collect::<Result<_>>()?;
        let mut ginv = Vec::with_capacity(cells.len() * n * n);
        let mut weight = Vec::with_capacity(cells.len());
        for (gi, w) in cells {
            ginv.extend(gi);
            weight.push(w);
        }
        Ok(EnergyModel { grid: grid.clone(), corners: grid.corner_offsets(), bases, ginv, weight, eps_reg })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `D_a u^j` on cell `c`, written into `du[j * n + a]`.
    fn cell_gradient(&self, u: &[f64], c: usize, du: &mut [f64]) {
        let n = self.grid.dim();
        let nodes = self.grid.node_count();
        let base = self.bases[c];
        let strides = self.grid.strides();
        let scale = 1.0 / (1usize << (n - 1)) as f64;
        for j in 0..n {
            let uj = &u[j * nodes..(j + 1) * nodes];
            for a in 0..n {
                let mut s = 0.0;
                for (bits, off) in self.corners.iter().enumerate() {
                    if bits >> a & 1 == 0 {
                        let k = base + off;
                        s += uj[k + strides[a]] - uj[k];
                    }
                }
                du[j * n + a] = s * scale / self.grid.spacing()[a];
            }
        }
    }

    fn cell_energy(&self, u: &[f64], c: usize, du: &mut [f64], w: Option<&mut [f64]>) -> f64 {
        let n = self.grid.dim();
        self.cell_gradient(u, c, du);
        let gi = &self.ginv[c * n * n..(c + 1) * n * n];
        let half = n as f64 / 2.0;
        let eps2 = self.eps_reg * self.eps_reg;
        let mut e = 0.0;
        let mut w = w;
        for j in 0..n {
            let d = &du[j * n..(j + 1) * n];
            let mut gd = [0.0f64; 8];
            let mut q = 0.0;
            for a in 0..n {
                let mut s = 0.0;
                for b in 0..n {
                    s += gi[a * n + b] * d[b];
                }
                gd[a] = s;
                q += s * d[a];
            }
            let base = q + eps2;
            e += base.powf(half);
            if let Some(w) = w.as_deref_mut() {
                // ∂/∂(D_a u^j) of (q + ε²)^{n/2} √|g| vol
                let f = n as f64 * base.powf(half - 1.0) * self.weight[c];
                for a in 0..n {
                    w[j * n + a] = f * gd[a];
                }
            }
        }
        e * self.weight[c]
    }

    pub fn energy(&self, u: &GridMap) -> Result<f64> {
        let n = self.grid.dim();
        let vals = u.values();
        let per_cell: Vec<f64> = (0..self.bases.len())
            .into_par_iter()
            .map_init(|| vec![0.0; n * n], |du, c| self.cell_energy(vals, c, du, None))
            .collect();
        let e = pairwise_sum(&per_cell);
        if !e.is_finite() {
            return Err(Error::NonFiniteEnergy);
        }
        Ok(e)
    }

    /// Energy and its gradient; the gradient vanishes on boundary nodes.
    pub fn energy_and_gradient(&self, u: &GridMap) -> Result<(f64, GridMap)> {
        let n = self.grid.dim();
        let nodes = self.grid.node_count();
        let vals = u.values();
        let cells: Vec<(f64, Vec<f64>)> = (0..self.bases.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; n * n],
                |du, c| {
                    let mut w = vec![0.0; n * n];
                    let e = self.cell_energy(vals, c, du, Some(&mut w));
                    (e, w)
                },
            )
            .collect();
        let energies: Vec<f64> = cells.iter().map(|c| c.0).collect();
        let e = pairwise_sum(&energies);
        if !e.is_finite() {
            return Err(Error::NonFiniteEnergy);
        }
        let counts = self.grid.counts();
        let cell_counts: Vec<usize> = counts.iter().map(|c| c - 1).collect();
        let scale: Vec<f64> = self.grid.spacing().iter().map(|h| 1.0 / ((1usize << (n - 1)) as f64 * h)).collect();
        // gather per node over adjacent cells in corner order
        let per_node: Vec<Vec<f64>> = (0..nodes)
            .into_par_iter()
            .map(|node| {
                let mut out = vec![0.0; n];
                if self.grid.is_boundary(node) {
                    return out;
                }
                let idx = self.grid.multi_index(node);
                for bits in 0..1usize << n {
                    let mut c = 0usize;
                    let mut ok = true;
                    for a in 0..n {
                        let b = bits >> a & 1;
                        if idx[a] < b || idx[a] - b >= cell_counts[a] {
                            ok = false;
                            break;
                        }
                        c = c * cell_counts[a] + (idx[a] - b);
                    }
                    if !ok {
                        continue;
                    }
                    let w = &cells[c].1;
                    for (j, o) in out.iter_mut().enumerate() {
                        for a in 0..n {
                            let sign = if bits >> a & 1 == 1 { 1.0 } else { -1.0 };
                            *o += sign * w[j * n + a] * scale[a];
                        }
                    }
                }
                out
            })
            .collect();
        let mut grad = vec![0.0; n * nodes];
        for (node, g) in per_node.into_iter().enumerate() {
            for (j, v) in g.into_iter().enumerate() {
                grad[j * nodes + node] = v;
            }
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEnergy);
        }
        Ok((e, GridMap::from_values(&self.grid, grad)?))
    }
}

pub fn n_energy(spec: &MetricSpec, grid: &Grid, u: &GridMap, eps_reg: f64) -> Result<f64> {
    EnergyModel::new(spec, grid, eps_reg)?.energy(u)
}

pub fn energy_gradient(spec: &MetricSpec, grid: &Grid, u: &GridMap, eps_reg: f64) -> Result<GridMap> {
    Ok(EnergyModel::new(spec, grid, eps_reg)?.energy_and_gradient(u)?.1)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Nodes per axis; defaults to 17 on every axis.
    pub grid: Option<Vec<usize>>,
    /// Solve box; defaults to the metric's box.
    #[serde(rename = "box")]
    pub bounds: Option<Vec<[f64; 2]>>,
    pub max_iter: usize,
    /// Stop when the gradient sup-norm is below this.
    pub tol: f64,
    pub eps_reg: f64,
    /// L-BFGS history length.
    pub memory: usize,
    /// Also compute the pullback gauge statistics.
    pub gauge_check: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid: None,
            bounds: None,
            max_iter: 2000,
            tol: 1e-8,
            eps_reg: 1e-8,
            memory: 10,
            gauge_check: true,
        }
    }
}

impl SolverConfig {
    pub fn grid_for(&self, spec: &MetricSpec) -> Result<Grid> {
        let n = spec.dim();
        let bounds = self.bounds.clone().unwrap_or_else(|| spec.bounds().to_vec());
        let counts = self.grid.clone().unwrap_or_else(|| vec![17; n]);
        if bounds.len() != n || counts.len() != n {
            return Err(Error::InvalidConfig(format!("solver box and grid need {n} axes")));
        }
        Grid::new(bounds, counts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// Line search could not lower the energy beyond rounding.
    Stalled,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub energy: f64,
    /// Energy after every accepted step, starting with the initial state.
    pub energies: Vec<f64>,
    pub grad_sup: f64,
    /// Gradient sup-norm of each coordinate function.
    pub grad_sup_per_component: Vec<f64>,
    pub iterations: usize,
    pub min_jacobian: f64,
    pub diffeomorphic: bool,
    pub gauge: Option<GaugeStats>,
    pub identity_gauge: Option<GaugeStats>,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimum of `det(∂u^j/∂x^a)` over interior nodes, by central differences.
pub fn min_jacobian(grid: &Grid, u: &GridMap) -> f64 {
    let n = grid.dim();
    grid.interior()
        .par_iter()
        .map(|&node| {
            let j = DMatrix::from_fn(n, n, |r, a| {
                let s = grid.strides()[a];
                (u.get(r, node + s) - u.get(r, node - s)) / (2.0 * grid.spacing()[a])
            });
            j.determinant()
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Interior unknowns `[j][interior node]`.
struct Unknowns {
    interior: Vec<usize>,
    nodes: usize,
    n: usize,
}

impl Unknowns {
    fn gather(&self, full: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.interior.len());
        for j in 0..self.n {
            out.extend(self.interior.iter().map(|k| full[j * self.nodes + k]));
        }
        out
    }

    fn scatter(&self, x: &[f64], full: &mut [f64]) {
        let m = self.interior.len();
        for j in 0..self.n {
            for (i, k) in self.interior.iter().enumerate() {
                full[j * self.nodes + k] = x[j * m + i];
            }
        }
    }
}

/// Limited-memory BFGS with backtracking from the identity map.
pub fn solve_dirichlet(spec: &MetricSpec, config: &SolverConfig) -> Result<(GridMap, SolveReport)> {
    let grid = config.grid_for(spec)?;
    let model = EnergyModel::new(spec, &grid, config.eps_reg)?;
    let (u, report) = solve_from(&model, GridMap::identity(&grid), config)?;
    let report = if config.gauge_check { with_gauge_check(spec, &grid, &u, report) } else { report };
    Ok((u, report))
}

pub fn solve_from(model: &EnergyModel, start: GridMap, config: &SolverConfig) -> Result<(GridMap, SolveReport)> {
    if config.memory == 0 || !(config.tol > 0.0) {
        return Err(Error::InvalidConfig("memory must be positive and tol > 0".into()));
    }
    let grid = model.grid().clone();
    let n = grid.dim();
    let unk = Unknowns { interior: grid.interior(), nodes: grid.node_count(), n };
    let mut u = start;
    let eval = |u: &mut GridMap, x: &[f64]| -> Result<(f64, Vec<f64>)> {
        unk.scatter(x, u.values_mut());
        let (e, g) = model.energy_and_gradient(u)?;
        Ok((e, unk.gather(g.values())))
    };
    let mut x = unk.gather(u.values());
    let (mut f, mut g) = eval(&mut u, &x)?;
    let mut energies = vec![f];
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let h_min = grid.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
    while iterations < config.max_iter {
        if sup(&g) < config.tol {
            status = SolveStatus::Converged;
            break;
        }
        let mut d = two_loop(&g, &hist);
        let mut steepest = hist.is_empty();
        if dot(&g, &d) >= 0.0 {
            hist.clear();
            d = g.iter().map(|v| -v).collect();
            steepest = true;
        }
        let accepted = loop {
            let t0 = if steepest && hist.is_empty() { 0.01 * h_min / sup(&d) } else { 1.0 };
            match line_search(&eval, &mut u, &x, f, &g, &d, t0)? {
                Some(step) => break Some(step),
                None if !steepest => {
                    hist.clear();
                    d = g.iter().map(|v| -v).collect();
                    steepest = true;
                }
                None => break None,
            }
        };
        let Some((xn, fnew, gn)) = accepted else {
            // near the tolerance the energy decrease drowns in rounding
            if sup(&g) < 1e4 * config.tol {
                status = SolveStatus::Stalled;
                break;
            }
            return Err(Error::LineSearchFailed { iteration: iterations });
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if hist.len() == config.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        f = fnew;
        g = gn;
        energies.push(f);
        iterations += 1;
    }
    unk.scatter(&x, u.values_mut());
    let (energy, full_grad) = model.energy_and_gradient(&u)?;
    let nodes = grid.node_count();
    let per: Vec<f64> = (0..n).map(|j| sup(&full_grad.values()[j * nodes..(j + 1) * nodes])).collect();
    let mj = min_jacobian(&grid, &u);
    let report = SolveReport {
        status,
        energy,
        energies,
        grad_sup: sup(&per),
        grad_sup_per_component: per,
        iterations,
        min_jacobian: mj,
        diffeomorphic: mj > 0.0,
        gauge: None,
        identity_gauge: None,
    };
    Ok((u, report))
}

/// Attaches pullback gauge statistics for the solution and for the identity map.
pub fn with_gauge_check(spec: &MetricSpec, grid: &Grid, u: &GridMap, mut report: SolveReport) -> SolveReport {
    if report.diffeomorphic {
        report.gauge = pullback_gauge_check(spec, grid, u).ok();
        report.identity_gauge = pullback_gauge_check(spec, grid, &GridMap::identity(grid)).ok();
    }
    report
}

fn two_loop(g: &[f64], hist: &std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alpha = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alpha.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in hist.iter().zip(alpha.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

type Step = (Vec<f64>, f64, Vec<f64>);

/// Armijo backtracking; falls back to the best strictly lower energy seen.
fn line_search(
    eval: &impl Fn(&mut GridMap, &[f64]) -> Result<(f64, Vec<f64>)>,
    u: &mut GridMap,
    x: &[f64],
    f: f64,
    g: &[f64],
    d: &[f64],
    t0: f64,
) -> Result<Option<Step>> {
    let slope = dot(g, d);
    let mut t = t0;
    let mut best: Option<Step> = None;
    for _ in 0..40 {
        let xn: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        match eval(u, &xn) {
            Ok((fnew, gn)) => {
                if fnew <= f + 1e-4 * t * slope {
                    return Ok(Some((xn, fnew, gn)));
                }
                if fnew < f && best.as_ref().is_none_or(|b| fnew < b.1) {
                    best = Some((xn, fnew, gn));
                }
            }
            Err(Error::NonFiniteEnergy) => {}
            Err(e) => return Err(e),
        }
        t *= 0.5;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn spec(n: usize, entries: &[&str], lo: f64, hi: f64) -> MetricSpec {
        let g = entries.iter().map(|s| parse(s, n).unwrap()).collect();
        MetricSpec::new("t", n, vec![[lo, hi]; n], g).unwrap()
    }

    fn euclid3() -> MetricSpec {
        spec(3, &["1", "0", "0", "0", "1", "0", "0", "0", "1"], 0.0, 1.0)
    }

    #[test]
    fn identity_energy_is_volume_times_n() {
        let s = euclid3();
        let grid = Grid::uniform(vec![[0.0, 1.0]; 3], 6).unwrap();
        let e = n_energy(&s, &grid, &GridMap::identity(&grid), 0.0).unwrap();
        assert!((e - 3.0).abs() < 1e-12);
        let c = spec(3, &["4", "0", "0", "0", "4", "0", "0", "0", "4"], 0.0, 1.0);
        let e = n_energy(&c, &grid, &GridMap::identity(&grid), 0.0).unwrap();
        assert!((e - 3.0).abs() < 1e-12);
        let g = energy_gradient(&s, &grid, &GridMap::identity(&grid), 0.0).unwrap();
        assert!(sup(g.values()) < 1e-14);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let s = spec(3, &["1", "0", "0", "0", "1 + x1^2", "0.1*x3", "0", "0.1*x3", "1"], -0.5, 0.5);
        let grid = Grid::uniform(vec![[-0.5, 0.5]; 3], 5).unwrap();
        let model = EnergyModel::new(&s, &grid, 1e-8).unwrap();
        let mut u = GridMap::identity(&grid);
        let nodes = grid.node_count();
        for (k, v) in u.values_mut().iter_mut().enumerate() {
            if !grid.is_boundary(k % nodes) {
                *v += 0.03 * ((k as f64) * 1.7).sin();
            }
        }
        let (_, g) = model.energy_and_gradient(&u).unwrap();
        let node = grid.node_index(&[2, 1, 3]);
        for j in 0..3 {
            let k = j * nodes + node;
            let mut up = u.clone();
            up.values_mut()[k] += 1e-6;
            let mut dn = u.clone();
            dn.values_mut()[k] -= 1e-6;
            let fd = (model.energy(&up).unwrap() - model.energy(&dn).unwrap()) / 2e-6;
            assert!((fd - g.values()[k]).abs() <= 1e-5 * fd.abs().max(1e-3), "{fd} {}", g.values()[k]);
        }
    }

    #[test]
    fn euclidean_solve_is_immediate() {
        let s = euclid3();
        let cfg = SolverConfig { grid: Some(vec![6, 6, 6]), ..Default::default() };
        let (u, rep) = solve_dirichlet(&s, &cfg).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.status, SolveStatus::Converged);
        assert_eq!(u, GridMap::identity(&cfg.grid_for(&s).unwrap()));
    }
}
