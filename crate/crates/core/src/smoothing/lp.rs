//! Smooth bump and dyadic Littlewood-Paley partition.

use serde::Serialize;

use crate::error::{Error, Result};

/// `b(u) = exp(1 − 1/(1 − u²))` on `|u| < 1`, zero outside.
fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

/// Smooth step on `[0, 1]`, flat at both ends: `B(u) / (B(u) + B(1 − u))`
/// with `B(u) = b(1 − u)`.
fn step(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let a = bump(1.0 - u);
    let b = bump(u);
    a / (a + b)
}

/// `φ(t) = 1` for `|t| ≤ τ`, `0` for `|t| ≥ 2τ`, smooth and radial.
pub fn phi(t: f64, tau: f64) -> f64 {
    1.0 - step(t.abs() / tau - 1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct LPBundle {
    /// `φ = 1` on `|ξ| ≤ τ`.
    pub tau: f64,
    pub delta: f64,
    /// Partition levels `j = 0..=levels`.
    pub levels: usize,
}

impl LPBundle {
    pub fn new(delta: f64, tau: f64, levels: usize) -> Result<LPBundle> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidConfig("tau must be positive".into()));
        }
        Ok(LPBundle { tau, delta, levels })
    }

    /// Smallest number of levels whose partition covers `|ξ| ≤ radius`.
    pub fn covering(delta: f64, tau: f64, radius: f64) -> Result<LPBundle> {
        let mut levels = 0;
        while tau * 2f64.powi(levels as i32) < radius {
            levels += 1;
        }
        LPBundle::new(delta, tau, levels)
    }

    /// `Σ_j ψ_j = 1` holds exactly on `|ξ| ≤ covered()`.
    pub fn covered(&self) -> f64 {
        self.tau * 2f64.powi(self.levels as i32)
    }

    /// `ψ_0 = φ`, `ψ_j(ξ) = φ(2^{-j}ξ) − φ(2^{1−j}ξ)`.
    pub fn psi(&self, j: usize, r: f64) -> f64 {
        if j == 0 {
            phi(r, self.tau)
        } else {
            phi(r / 2f64.powi(j as i32), self.tau) - phi(r / 2f64.powi(j as i32 - 1), self.tau)
        }
    }

    /// `ε_j = 2^{-jδ}`.
    pub fn eps(&self, j: usize) -> f64 {
        2f64.powf(-(j as f64) * self.delta)
    }

    /// Levels with `ψ_j(r) ≠ 0`, with their weights.
    pub fn active(&self, r: f64) -> Vec<(usize, f64)> {
        (0..=self.levels).map(|j| (j, self.psi(j, r))).filter(|(_, w)| *w != 0.0).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_sums_to_one_and_is_dyadic() {
        let lp = LPBundle::covering(0.5, 1.0, 300.0).unwrap();
        assert_eq!(lp.levels, 9);
        for k in 0..=300 {
            let r = k as f64;
            let s: f64 = (0..=lp.levels).map(|j| lp.psi(j, r)).sum();
            assert!((s - 1.0).abs() < 1e-12);
            for j in 1..=lp.levels {
                let lo = 2f64.powi(j as i32 - 1);
                if r < lo || r > 4.0 * lo {
                    assert_eq!(lp.psi(j, r), 0.0);
                }
            }
        }
        assert_eq!(phi(1.0, 1.0), 1.0);
        assert_eq!(phi(2.0, 1.0), 0.0);
        assert!(LPBundle::new(1.0, 1.0, 3).is_err());
    }
}
