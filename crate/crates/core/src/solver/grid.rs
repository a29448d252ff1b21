use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform tensor grid on a box. Node indices are row-major with the first
/// axis most significant.
#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    bounds: Vec<[f64; 2]>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(bounds: Vec<[f64; 2]>, counts: Vec<usize>) -> Result<Grid> {
        if bounds.len() != counts.len() || bounds.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "grid has {} axes but the box has {}",
                counts.len(),
                bounds.len()
            )));
        }
        if let Some(c) = counts.iter().find(|c| **c < 5) {
            return Err(Error::InvalidConfig(format!("grid needs at least 5 nodes per axis, got {c}")));
        }
        if bounds.iter().any(|[lo, hi]| !(hi > lo) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::InvalidConfig("grid box must have finite lo < hi on every axis".into()));
        }
        let spacing = bounds.iter().zip(&counts).map(|([lo, hi], c)| (hi - lo) / (*c as f64 - 1.0)).collect();
        let mut strides = vec![1; counts.len()];
        for a in (0..counts.len() - 1).rev() {
            strides[a] = strides[a + 1] * counts[a + 1];
        }
        Ok(Grid { bounds, counts, spacing, strides })
    }

    /// Same box with `k` nodes per axis.
    pub fn uniform(bounds: Vec<[f64; 2]>, k: usize) -> Result<Grid> {
        let n = bounds.len();
        Grid::new(bounds, vec![k; n])
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn node_count(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.counts.iter().map(|c| c - 1).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut rem = node;
        self.strides
            .iter()
            .map(|s| {
                let i = rem / s;
                rem %= s;
                i
            })
            .collect()
    }

    pub fn node_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(a, i)| self.bounds[a][0] + *i as f64 * self.spacing[a])
            .collect()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.multi_index(node).iter().zip(&self.counts).any(|(i, c)| *i == 0 || *i == c - 1)
    }

    /// Interior node indices in increasing order.
    pub fn interior(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|k| !self.is_boundary(*k)).collect()
    }

    /// Node index of the lower corner of each cell, in cell order.
    pub fn cell_bases(&self) -> Vec<usize> {
        let cell_counts: Vec<usize> = self.counts.iter().map(|c| c - 1).collect();
        let total: usize = cell_counts.iter().product();
        (0..total)
            .map(|mut k| {
                let mut base = 0;
                for a in (0..self.dim()).rev() {
                    base += (k % cell_counts[a]) * self.strides[a];
                    k /= cell_counts[a];
                }
                base
            })
            .collect()
    }

    pub fn cell_center(&self, base: usize) -> Vec<f64> {
        self.coords(base).iter().zip(&self.spacing).map(|(x, h)| x + 0.5 * h).collect()
    }

    /// Node offsets of the `2^n` cell corners; bit `a` of the corner number
    /// selects the upper node along axis `a`.
    pub fn corner_offsets(&self) -> Vec<usize> {
        let n = self.dim();
        (0..1usize << n).map(|bits| (0..n).filter(|a| bits >> a & 1 == 1).map(|a| self.strides[a]).sum()).collect()
    }
}

/// Coordinate functions `u^1..u^n` on the grid, stored as `values[j * nodes + node]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMap {
    n: usize,
    nodes: usize,
    values: Vec<f64>,
}

impl GridMap {
    /// `u^j = x^j` at every node.
    pub fn identity(grid: &Grid) -> GridMap {
        let n = grid.dim();
        let nodes = grid.node_count();
        let mut values = vec![0.0; n * nodes];
        for node in 0..nodes {
            for (j, x) in grid.coords(node).into_iter().enumerate() {
                values[j * nodes + node] = x;
            }
        }
        GridMap { n, nodes, values }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<GridMap> {
        let n = grid.dim();
        let nodes = grid.node_count();
        if values.len() != n * nodes {
            return Err(Error::Shape(format!("{} values for {n} functions on {nodes} nodes", values.len())));
        }
        Ok(GridMap { n, nodes, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, j: usize, node: usize) -> f64 {
        self.values[j * self.nodes + node]
    }

    pub fn at(&self, node: usize) -> Vec<f64> {
        (0..self.n).map(|j| self.get(j, node)).collect()
    }

    pub fn max_diff(&self, other: &GridMap) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let g = Grid::new(vec![[0.0, 1.0], [-1.0, 1.0], [0.0, 2.0]], vec![5, 6, 7]).unwrap();
        assert_eq!(g.node_count(), 210);
        assert_eq!(g.cell_count(), 120);
        for k in [0, 17, 209] {
            assert_eq!(g.node_index(&g.multi_index(k)), k);
        }
        assert_eq!(g.interior().len(), 3 * 4 * 5);
        assert_eq!(g.cell_bases().len(), 120);
        assert!(Grid::uniform(vec![[0.0, 1.0]; 3], 4).is_err());
    }
}
