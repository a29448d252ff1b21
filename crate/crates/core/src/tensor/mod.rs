//! Pointwise curvature and gauge quantities.
//!
//! Index conventions:
//! `Γ^k_ab = ½ g^{kl}(∂_a g_bl + ∂_b g_al − ∂_l g_ab)`,
//! `R_abc^d = ∂_aΓ^d_bc − ∂_bΓ^d_ac + Γ^m_bcΓ^d_am − Γ^m_acΓ^d_bm`,
//! `R_bc = R_abc^a`, and a covariant derivative appends its slot last:
//! `(∇F)_{i..m} = ∇_m F_{i..}`.

pub(crate) mod field;
mod ops;

use serde::Serialize;

use crate::error::{Error, Result};

pub use ops::{
    bach, bach_at, conformal_normalize, contracted_christoffel, cotton, cotton_at, covariant_derivative,
    curvature_bundle, gamma_tilde, gauge_residual, obstruction4, obstruction4_at, p_harmonic_residual, schouten, weyl,
    BachReport, CottonReport, CurvatureBundle, ObstructionReport, WeylForm,
};

/// Slot variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Up,
    Down,
}

/// Dense tensor at a point. Components are row-major with the first slot
/// most significant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointTensor {
    n: usize,
    variance: Vec<Variance>,
    comps: Vec<f64>,
}

impl PointTensor {
    pub fn new(n: usize, variance: Vec<Variance>, comps: Vec<f64>) -> Result<PointTensor> {
        let want = n.pow(variance.len() as u32);
        if comps.len() != want {
            return Err(Error::Shape(format!(
                "{} components for rank {} in dimension {n}",
                comps.len(),
                variance.len()
            )));
        }
        Ok(PointTensor { n, variance, comps })
    }

    pub fn zeros(n: usize, variance: Vec<Variance>) -> PointTensor {
        let len = n.pow(variance.len() as u32);
        PointTensor { n, variance, comps: vec![0.0; len] }
    }

    pub fn covariant(n: usize, rank: usize, comps: Vec<f64>) -> Result<PointTensor> {
        PointTensor::new(n, vec![Variance::Down; rank], comps)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn comps(&self) -> &[f64] {
        &self.comps
    }

    pub fn comps_mut(&mut self) -> &mut [f64] {
        &mut self.comps
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.comps[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let k = self.flat_index(idx);
        self.comps[k] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-norm of the componentwise difference.
    pub fn max_diff(&self, other: &PointTensor) -> f64 {
        self.comps.iter().zip(&other.comps).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn scaled(&self, s: f64) -> PointTensor {
        PointTensor { n: self.n, variance: self.variance.clone(), comps: self.comps.iter().map(|v| v * s).collect() }
    }

    /// Contracts `slot` with a symmetric matrix (row-major `n × n`), setting its variance.
    fn transform_slot(&self, slot: usize, m: &[f64], to: Variance) -> PointTensor {
        let n = self.n;
        let r = self.rank();
        let stride = n.pow((r - 1 - slot) as u32);
        let mut out = vec![0.0; self.comps.len()];
        for (k, o) in out.iter_mut().enumerate() {
            let i = (k / stride) % n;
            let base = k - i * stride;
            let mut acc = 0.0;
            for j in 0..n {
                acc += m[i * n + j] * self.comps[base + j * stride];
            }
            *o = acc;
        }
        let mut variance = self.variance.clone();
        variance[slot] = to;
        PointTensor { n, variance, comps: out }
    }

    /// Raises `slot` with the inverse metric `ginv` (row-major).
    pub fn raise(&self, slot: usize, ginv: &[f64]) -> Result<PointTensor> {
        if self.variance[slot] != Variance::Down {
            return Err(Error::VarianceMismatch);
        }
        Ok(self.transform_slot(slot, ginv, Variance::Up))
    }

    /// Lowers `slot` with the metric `g` (row-major).
    pub fn lower(&self, slot: usize, g: &[f64]) -> Result<PointTensor> {
        if self.variance[slot] != Variance::Up {
            return Err(Error::VarianceMismatch);
        }
        Ok(self.transform_slot(slot, g, Variance::Down))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raise_lower_round_trip() {
        let g = [2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5];
        let m = nalgebra::Matrix3::from_row_slice(&g).try_inverse().unwrap();
        let ginv: Vec<f64> = m.transpose().iter().copied().collect();
        let comps: Vec<f64> = (0..27).map(|i| (i as f64 * 0.37).sin()).collect();
        let t = PointTensor::covariant(3, 3, comps).unwrap();
        let back = t.raise(1, &ginv).unwrap().lower(1, &g).unwrap();
        assert!(back.max_diff(&t) < 1e-12);
        assert!(matches!(t.lower(0, &g), Err(Error::VarianceMismatch)));
    }

    #[test]
    fn size_is_checked() {
        assert!(PointTensor::covariant(3, 2, vec![0.0; 8]).is_err());
    }
}
