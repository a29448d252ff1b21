//! Symbol smoothing `p = p♯ + p♭` on the periodic torus `[0, 2π)^d`, `d ∈ {1, 2}`.
//!
//! `J_ε = φ(εD)` acts on the `x`-dependence by a discrete Fourier multiplier,
//! and `p♯(x, ξ) = Σ_j J_{ε_j} p(x, ξ) ψ_j(ξ)` with `ε_j = 2^{-jδ}`.

mod lp;
mod ops;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lp::{phi, LPBundle};
pub use ops::{
    default_rate_eps, ellipticity_constant, ellipticity_preservation, parametrix_residual, regularity_rate,
    smooth_split, EllipticityReport, ParametrixRow, ParametrixTable, RateFit, SplitResult,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub d: usize,
    pub rows: usize,
    pub cols: usize,
    /// Symbol order.
    pub m: f64,
    /// Zygmund regularity of the `x`-dependence.
    pub r: f64,
    /// Size of the rough part relative to the anchor.
    pub amplitude: f64,
    /// Number of lacunary terms; defaults to every octave below a quarter of the grid.
    pub terms: Option<usize>,
    pub seed: u64,
    /// Points per axis of the `x`-grid.
    pub grid: usize,
    /// Lattice `|ξ_i| ≤ xi_max` per axis.
    pub xi_max: usize,
    /// Zero the last column so `p` is not injective.
    pub degenerate: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            d: 1,
            rows: 3,
            cols: 2,
            m: 2.0,
            r: 1.5,
            amplitude: 0.1,
            terms: None,
            seed: 0,
            grid: 1024,
            xi_max: 255,
            degenerate: false,
        }
    }
}

/// Matrix symbol samples on an `x`-grid times a `ξ`-lattice.
#[derive(Debug, Clone)]
pub struct TorusSymbol {
    d: usize,
    rows: usize,
    cols: usize,
    m: f64,
    r: f64,
    grid: usize,
    xi: Vec<[i64; 2]>,
    /// `samples[((col · nx + ix) · rows + i) · cols + j]`.
    samples: Vec<f64>,
}

impl TorusSymbol {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn order(&self) -> f64 {
        self.m
    }

    pub fn regularity(&self) -> f64 {
        self.r
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn x_len(&self) -> usize {
        self.grid.pow(self.d as u32)
    }

    pub fn lattice(&self) -> &[[i64; 2]] {
        &self.xi
    }

    pub fn radius(&self, col: usize) -> f64 {
        let [a, b] = self.xi[col];
        ((a * a + b * b) as f64).sqrt()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    fn block(&self) -> usize {
        self.rows * self.cols
    }

    pub fn column(&self, col: usize) -> &[f64] {
        let len = self.x_len() * self.block();
        &self.samples[col * len..(col + 1) * len]
    }

    pub fn sample(&self, col: usize, ix: usize) -> DMatrix<f64> {
        let b = self.block();
        let s = &self.column(col)[ix * b..(ix + 1) * b];
        DMatrix::from_row_slice(self.rows, self.cols, s)
    }

    /// Column index of a lattice point.
    pub fn find(&self, xi: [i64; 2]) -> Option<usize> {
        self.xi.iter().position(|p| *p == xi)
    }

    /// Grid coordinates of `x`-sample `ix`.
    pub fn x_coords(&self, ix: usize) -> [f64; 2] {
        let h = std::f64::consts::TAU / self.grid as f64;
        if self.d == 1 {
            [ix as f64 * h, 0.0]
        } else {
            [(ix / self.grid) as f64 * h, (ix % self.grid) as f64 * h]
        }
    }

    /// Same grid and lattice with new samples.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> TorusSymbol {
        debug_assert_eq!(samples.len(), self.samples.len());
        TorusSymbol { samples, ..self.clone_meta() }
    }

    fn clone_meta(&self) -> TorusSymbol {
        TorusSymbol {
            d: self.d,
            rows: self.rows,
            cols: self.cols,
            m: self.m,
            r: self.r,
            grid: self.grid,
            xi: self.xi.clone(),
            samples: Vec::new(),
        }
    }

    /// Smallest `C` with `‖p(x, ξ)‖ ≤ C⟨ξ⟩^m` over all samples.
    pub fn order_bound(&self) -> f64 {
        let b = self.block();
        let mut c: f64 = 0.0;
        for col in 0..self.xi.len() {
            let r = self.radius(col);
            let w = (1.0 + r * r).powf(self.m / 2.0);
            for s in self.column(col).chunks(b) {
                c = c.max(gram_extremes(s, self.rows, self.cols).1.sqrt() / w);
            }
        }
        c
    }
}

/// Smallest and largest eigenvalue of `AᵗA` for a row-major `rows × cols` block.
pub(crate) fn gram_extremes(s: &[f64], rows: usize, cols: usize) -> (f64, f64) {
    let g = DMatrix::from_fn(cols, cols, |a, b| (0..rows).map(|i| s[i * cols + a] * s[i * cols + b]).sum::<f64>());
    let ev = SymmetricEigen::new(g).eigenvalues;
    (ev.min(), ev.max())
}

/// `p(x, ξ) = ⟨ξ⟩^m (1 + ξ_1/(10⟨ξ⟩)) (a₀ + A Σ_j 2^{-jr} cos(2^j θ_j·x + φ_j) A_j)`
/// with `a₀ = [I; B]` injective and `‖A_j‖ = 1`.
pub fn synth_zygmund_symbol(cfg: &SynthConfig) -> Result<TorusSymbol> {
    if !(cfg.r > 0.0 && cfg.r <= 3.0) {
        return Err(Error::BadRegularity { r: cfg.r });
    }
    if !(cfg.m >= 0.0) || !(cfg.amplitude >= 0.0) {
        return Err(Error::InvalidConfig("order and amplitude must be non-negative".into()));
    }
    if cfg.d != 1 && cfg.d != 2 {
        return Err(Error::InvalidConfig(format!("torus dimension must be 1 or 2, got {}", cfg.d)));
    }
    if cfg.rows < cfg.cols || cfg.cols == 0 {
        return Err(Error::InvalidConfig("symbol shape needs rows >= cols >= 1".into()));
    }
    if cfg.grid < 16 || 2 * cfg.xi_max >= cfg.grid {
        return Err(Error::InvalidConfig(
            "grid needs at least 16 points and xi_max below the Nyquist frequency".into(),
        ));
    }
    let (rows, cols) = (cfg.rows, cfg.cols);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let uniform = |rng: &mut ChaCha8Rng| rng.random_range(-1.0..1.0);
    let mut a0 = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            a0[(i, j)] = if i < cols {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            } else {
                0.5 * uniform(&mut rng)
            };
        }
    }
    let top = (cfg.grid as f64).log2().floor() as usize - 2;
    let terms = cfg.terms.unwrap_or(top + 1).min(top + 1);
    let mut waves = Vec::with_capacity(terms);
    for j in 0..terms {
        let mut a = DMatrix::from_fn(rows, cols, |_, _| uniform(&mut rng));
        let norm = a.singular_values().max();
        a /= norm;
        let phase = std::f64::consts::TAU * rng.random::<f64>();
        let axis = if cfg.d == 2 { rng.random_range(0..2usize) } else { 0 };
        waves.push((j, a, phase, axis));
    }
    if cfg.degenerate {
        a0.column_mut(cols - 1).fill(0.0);
        for w in waves.iter_mut() {
            w.1.column_mut(cols - 1).fill(0.0);
        }
    }
    let n = cfg.grid;
    let nx = n.pow(cfg.d as u32);
    let h = std::f64::consts::TAU / n as f64;
    let block = rows * cols;
    let mut base = vec![0.0; nx * block];
    for ix in 0..nx {
        let x = if cfg.d == 1 { [ix as f64 * h, 0.0] } else { [(ix / n) as f64 * h, (ix % n) as f64 * h] };
        let mut f = a0.clone();
        for (j, a, phase, axis) in &waves {
            let k = 2f64.powi(*j as i32);
            let c = cfg.amplitude * 2f64.powf(-(*j as f64) * cfg.r) * (k * x[*axis] + phase).cos();
            f += a * c;
        }
        for i in 0..rows {
            for j in 0..cols {
                base[ix * block + i * cols + j] = f[(i, j)];
            }
        }
    }
    let xm = cfg.xi_max as i64;
    let xi: Vec<[i64; 2]> = if cfg.d == 1 {
        (-xm..=xm).map(|a| [a, 0]).collect()
    } else {
        (-xm..=xm).flat_map(|a| (-xm..=xm).map(move |b| [a, b])).collect()
    };
    let mut samples = Vec::with_capacity(xi.len() * base.len());
    for p in &xi {
        let r2 = (p[0] * p[0] + p[1] * p[1]) as f64;
        let jb = (1.0 + r2).sqrt();
        let s = jb.powf(cfg.m) * (1.0 + 0.1 * p[0] as f64 / jb);
        samples.extend(base.iter().map(|v| v * s));
    }
    Ok(TorusSymbol { d: cfg.d, rows, cols, m: cfg.m, r: cfg.r, grid: n, xi, samples })
}
