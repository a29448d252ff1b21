use std::sync::Arc;

use nalgebra::{Complex, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use super::{gram_extremes, phi, LPBundle, TorusSymbol};
use crate::error::{Error, Result};
use crate::symbol::loglog_slope;

/// Forward and inverse FFT on the `x`-grid, `d`-dimensional by rows then columns.
struct Fourier {
    n: usize,
    d: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fourier {
    fn new(n: usize, d: usize) -> Fourier {
        let mut planner = FftPlanner::new();
        Fourier { n, d, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    fn transform(&self, data: &mut [Complex<f64>], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        let n = self.n;
        if self.d == 1 {
            plan.process(data);
        } else {
            plan.process(data);
            let mut col = vec![Complex::new(0.0, 0.0); n];
            for j in 0..n {
                for i in 0..n {
                    col[i] = data[i * n + j];
                }
                plan.process(&mut col);
                for i in 0..n {
                    data[i * n + j] = col[i];
                }
            }
        }
        if inverse {
            let s = 1.0 / (n.pow(self.d as u32)) as f64;
            for v in data.iter_mut() {
                *v *= s;
            }
        }
    }

    /// Signed integer frequency of FFT index `k` along one axis.
    fn freq(&self, k: usize) -> i64 {
        if k <= self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// `|k|` for every flattened spectral index.
    fn radii(&self) -> Vec<f64> {
        let n = self.n;
        if self.d == 1 {
            (0..n).map(|k| self.freq(k).abs() as f64).collect()
        } else {
            (0..n * n)
                .map(|k| {
                    let (a, b) = (self.freq(k / n), self.freq(k % n));
                    ((a * a + b * b) as f64).sqrt()
                })
                .collect()
        }
    }

    /// Flattened spectral index of a lattice frequency.
    fn index(&self, xi: [i64; 2]) -> usize {
        let n = self.n as i64;
        let w = |v: i64| v.rem_euclid(n) as usize;
        if self.d == 1 {
            w(xi[0])
        } else {
            w(xi[0]) * self.n + w(xi[1])
        }
    }
}

/// Spectra of every matrix entry of one `ξ`-column, entry-major.
fn column_spectra(p: &TorusSymbol, col: usize, f: &Fourier) -> Vec<Vec<Complex<f64>>> {
    let nx = p.x_len();
    let block = p.rows * p.cols;
    let data = p.column(col);
    (0..block)
        .map(|e| {
            let mut buf: Vec<Complex<f64>> = (0..nx).map(|ix| Complex::new(data[ix * block + e], 0.0)).collect();
            f.transform(&mut buf, false);
            buf
        })
        .collect()
}

/// `J_ε` applied to each entry spectrum; returns samples in column layout.
fn lowpass(spectra: &[Vec<Complex<f64>>], radii: &[f64], eps: f64, tau: f64, f: &Fourier) -> Vec<f64> {
    let block = spectra.len();
    let nx = radii.len();
    let mut out = vec![0.0; nx * block];
    let mul: Vec<f64> = radii.iter().map(|r| phi(eps * r, tau)).collect();
    for (e, s) in spectra.iter().enumerate() {
        let mut buf: Vec<Complex<f64>> = s.iter().zip(&mul).map(|(v, m)| v * *m).collect();
        f.transform(&mut buf, true);
        for (ix, v) in buf.iter().enumerate() {
            out[ix * block + e] = v.re;
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitResult {
    #[serde(skip)]
    pub sharp: TorusSymbol,
    #[serde(skip)]
    pub flat: TorusSymbol,
    pub bundle: LPBundle,
    /// `max |p♯ + p♭ − p|`.
    pub reconstruction_defect: f64,
    /// `(2^j, sup over shell j of ‖p♭‖)`.
    pub flat_shells: Vec<(f64, f64)>,
    /// Log-log slope of the shell sups.
    pub flat_exponent: f64,
}

/// Shells `2^{j−1} < |ξ| ≤ 2^j` for `j = 3..=8` that lie inside the lattice.
fn shells(p: &TorusSymbol) -> Vec<(usize, Vec<usize>)> {
    let rmax = (0..p.xi.len()).map(|c| p.radius(c)).fold(0.0, f64::max);
    (3..=8)
        .filter(|j| 2f64.powi(*j) <= rmax + 1e-9)
        .map(|j| {
            let hi = 2f64.powi(j);
            let cols = (0..p.xi.len())
                .filter(|c| {
                    let r = p.radius(*c);
                    r > hi / 2.0 && r <= hi
                })
                .collect();
            (j as usize, cols)
        })
        .collect()
}

pub fn smooth_split(p: &TorusSymbol, lp: &LPBundle) -> Result<SplitResult> {
    let rmax = (0..p.xi.len()).map(|c| p.radius(c)).fold(0.0, f64::max);
    if rmax > lp.covered() {
        return Err(Error::PartitionCoverage { covered: lp.covered(), needed: rmax });
    }
    let f = Fourier::new(p.grid, p.d);
    let radii = f.radii();
    let block = p.rows * p.cols;
    let cols: Vec<Vec<f64>> = (0..p.xi.len())
        .into_par_iter()
        .map(|c| {
            let spectra = column_spectra(p, c, &f);
            let mut sharp = vec![0.0; p.x_len() * block];
            for (j, w) in lp.active(p.radius(c)) {
                let part = lowpass(&spectra, &radii, lp.eps(j), lp.tau, &f);
                for (s, v) in sharp.iter_mut().zip(part) {
                    *s += w * v;
                }
            }
            sharp
        })
        .collect();
    let sharp_samples: Vec<f64> = cols.into_iter().flatten().collect();
    let flat_samples: Vec<f64> = p.samples.iter().zip(&sharp_samples).map(|(a, b)| a - b).collect();
    let reconstruction_defect = p
        .samples
        .iter()
        .zip(sharp_samples.iter().zip(&flat_samples))
        .fold(0.0f64, |m, (a, (s, fl))| m.max((s + fl - a).abs()));
    let sharp = p.with_samples(sharp_samples);
    let flat = p.with_samples(flat_samples);
    let flat_shells: Vec<(f64, f64)> = shells(p)
        .into_iter()
        .map(|(j, cs)| {
            let sup = cs
                .iter()
                .flat_map(|c| flat.column(*c).chunks(block))
                .map(|s| gram_extremes(s, p.rows, p.cols).1.max(0.0).sqrt())
                .fold(0.0, f64::max);
            (2f64.powi(j as i32), sup)
        })
        .collect();
    let flat_exponent = if flat_shells.len() >= 2 && flat_shells.iter().all(|s| s.1 > 0.0) {
        let (x, y): (Vec<f64>, Vec<f64>) = flat_shells.iter().cloned().unzip();
        loglog_slope(&x, &y)
    } else {
        f64::NEG_INFINITY
    };
    Ok(SplitResult { sharp, flat, bundle: lp.clone(), reconstruction_defect, flat_shells, flat_exponent })
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub eps: Vec<f64>,
    /// `sup_x ‖p(x, ξ) − J_ε p(x, ξ)‖`.
    pub sup: Vec<f64>,
    pub slope: f64,
}

/// Default `ε ∈ {2^-3, …, 2^-10}`.
pub fn default_rate_eps() -> Vec<f64> {
    (3..=10).map(|k| 2f64.powi(-k)).collect()
}

/// Measures the low-pass rate at the lattice column `col`.
pub fn regularity_rate(p: &TorusSymbol, col: usize, eps: &[f64], tau: f64) -> Result<RateFit> {
    if col >= p.xi.len() {
        return Err(Error::InvalidConfig(format!("lattice column {col} out of range")));
    }
    let (lo, hi) = eps.iter().fold((f64::INFINITY, 0.0f64), |(a, b), e| (a.min(*e), b.max(*e)));
    if eps.len() < 2 || !(lo > 0.0) || hi / lo < 100.0 {
        return Err(Error::DegenerateFit("the eps range spans less than two decades".into()));
    }
    let f = Fourier::new(p.grid, p.d);
    let radii = f.radii();
    let spectra = column_spectra(p, col, &f);
    let data = p.column(col);
    let block = p.rows * p.cols;
    let scale = data.chunks(block).map(|s| gram_extremes(s, p.rows, p.cols).1.max(0.0).sqrt()).fold(0.0, f64::max);
    let sup: Vec<f64> = eps
        .par_iter()
        .map(|e| {
            let low = lowpass(&spectra, &radii, *e, tau, &f);
            let diff: Vec<f64> = data.iter().zip(&low).map(|(a, b)| a - b).collect();
            diff.chunks(block).map(|s| gram_extremes(s, p.rows, p.cols).1.max(0.0).sqrt()).fold(0.0, f64::max)
        })
        .collect();
    if sup.iter().any(|s| !(*s > 1e-13 * scale.max(f64::MIN_POSITIVE))) {
        return Err(Error::DegenerateFit("p − J_ε p vanishes; the symbol is constant in x".into()));
    }
    let slope = loglog_slope(eps, &sup);
    Ok(RateFit { eps: eps.to_vec(), sup, slope })
}

/// `min λ_min(pᵗp) / |ξ|^{2m}` over all samples with `|ξ| ≥ k`.
pub fn ellipticity_constant(p: &TorusSymbol, k: f64) -> f64 {
    let block = p.rows * p.cols;
    (0..p.xi.len())
        .into_par_iter()
        .filter(|c| p.radius(*c) >= k.max(1e-12))
        .map(|c| {
            let w = p.radius(c).powf(2.0 * p.m);
            p.column(c).chunks(block).map(|s| gram_extremes(s, p.rows, p.cols).0 / w).fold(f64::INFINITY, f64::min)
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipticityReport {
    pub c_input: f64,
    /// Smallest lattice radius from which `λ_min(p♯ᵗp♯) ≥ ½C|ξ|^{2m}` holds.
    pub band_start: f64,
    /// `min λ_min(p♯ᵗp♯)/(C|ξ|^{2m})` over the band.
    pub band_min_ratio: f64,
    pub pass: bool,
}

pub fn ellipticity_preservation(split: &SplitResult, c: f64) -> Result<EllipticityReport> {
    let s = &split.sharp;
    if !(c > 1e-12) {
        return Err(Error::NoEllipticityBand);
    }
    let block = s.rows * s.cols;
    let mut per: Vec<(f64, f64)> = (0..s.xi.len())
        .into_par_iter()
        .filter(|col| s.radius(*col) > 0.0)
        .map(|col| {
            let w = s.radius(col).powf(2.0 * s.m);
            let min = s
                .column(col)
                .chunks(block)
                .map(|b| gram_extremes(b, s.rows, s.cols).0 / w)
                .fold(f64::INFINITY, f64::min);
            (s.radius(col), min / c)
        })
        .collect();
    per.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut band_start = None;
    let mut band_min = f64::INFINITY;
    let mut i = 0;
    while i < per.len() {
        // all lattice points of one radius enter together
        let r = per[i].0;
        let mut j = i;
        let mut worst = f64::INFINITY;
        while j < per.len() && per[j].0 == r {
            worst = worst.min(per[j].1);
            j += 1;
        }
        if worst < 0.5 {
            break;
        }
        band_min = band_min.min(worst);
        band_start = Some(r);
        i = j;
    }
    let band_start = band_start.ok_or(Error::NoEllipticityBand)?;
    Ok(EllipticityReport { c_input: c, band_start, band_min_ratio: band_min, pass: true })
}

#[derive(Debug, Clone, Serialize)]
pub struct ParametrixRow {
    pub frequency: f64,
    pub residual: f64,
    /// Test function reaches below the ellipticity band.
    pub below_band: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParametrixTable {
    pub rows: Vec<ParametrixRow>,
    pub strictly_decreasing: bool,
}

/// `E₀ = (p♯ᵗp♯)^{-1} p♯ᵗ` composed with `p♯` under the left quantization,
/// applied to packets centred at `2^j`, `j = j0..j0+4`, along the first axis.
pub fn parametrix_residual(split: &SplitResult, band_start: f64, j0: u32, seed: u64) -> Result<ParametrixTable> {
    let s = &split.sharp;
    let (rows, cols) = (s.rows, s.cols);
    let block = rows * cols;
    let nx = s.x_len();
    let f = Fourier::new(s.grid, s.d);
    let rmax = s.xi.iter().map(|p| p[0].abs()).max().unwrap_or(0);
    if (1i64 << (j0 + 4)) + 2 > rmax {
        return Err(Error::InvalidConfig(format!("frequency 2^{} exceeds the lattice half-width {rmax}", j0 + 4)));
    }
    // E₀ per column in the band, row-major cols × rows blocks
    let e0: Vec<Option<Vec<f64>>> = (0..s.xi.len())
        .into_par_iter()
        .map(|c| {
            if s.radius(c) < band_start {
                return Ok(None);
            }
            let mut out = Vec::with_capacity(nx * block);
            for ix in 0..nx {
                let a = s.sample(c, ix);
                let g = a.transpose() * &a;
                let min = g.symmetric_eigenvalues().min();
                if !(min > 1e-14 * g.amax().max(f64::MIN_POSITIVE)) {
                    return Err(Error::SingularNormalMatrix { xi: s.xi[c][..s.d].to_vec(), min_eig: min });
                }
                let e = g.cholesky().expect("positive definite").solve(&a.transpose());
                for i in 0..cols {
                    for k in 0..rows {
                        out.push(e[(i, k)]);
                    }
                }
            }
            Ok(Some(out))
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = Complex::new(0.0, 0.0);
    let mut table = Vec::new();
    for j in j0..=j0 + 4 {
        let center = 1i64 << j;
        let packet: Vec<([i64; 2], DVector<Complex<f64>>)> = (-2..=2)
            .map(|l| {
                let v = DVector::from_fn(cols, |_, _| {
                    Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                });
                ([center + l, 0], v)
            })
            .collect();
        let cols_idx: Vec<usize> = packet
            .iter()
            .map(|(xi, _)| s.find(*xi).ok_or_else(|| Error::InvalidConfig("packet outside the lattice".into())))
            .collect::<Result<_>>()?;
        let phase = |x: [f64; 2], xi: [i64; 2]| {
            let t = x[0] * xi[0] as f64 + x[1] * xi[1] as f64;
            Complex::new(t.cos(), t.sin())
        };
        // u and w = p♯(x, D)u on the grid
        let mut u = vec![zero; nx * cols];
        let mut w = vec![zero; nx * rows];
        for ix in 0..nx {
            let x = s.x_coords(ix);
            for ((xi, v), c) in packet.iter().zip(&cols_idx) {
                let e = phase(x, *xi);
                let a = &s.column(*c)[ix * block..(ix + 1) * block];
                for k in 0..cols {
                    u[ix * cols + k] += v[k] * e;
                }
                for i in 0..rows {
                    let mut acc = zero;
                    for k in 0..cols {
                        acc += v[k] * a[i * cols + k];
                    }
                    w[ix * rows + i] += acc * e;
                }
            }
        }
        let what: Vec<Vec<Complex<f64>>> = (0..rows)
            .map(|i| {
                let mut buf: Vec<Complex<f64>> = (0..nx).map(|ix| w[ix * rows + i]).collect();
                f.transform(&mut buf, false);
                let s = 1.0 / nx as f64;
                buf.iter().map(|v| v * s).collect()
            })
            .collect();
        let spec_idx: Vec<usize> = s.xi.iter().map(|xi| f.index(*xi)).collect();
        let z: Vec<Complex<f64>> = (0..nx)
            .into_par_iter()
            .flat_map_iter(|ix| {
                let x = s.x_coords(ix);
                let mut acc = vec![zero; cols];
                for (c, e) in e0.iter().enumerate() {
                    let Some(e) = e else { continue };
                    let eb = &e[ix * block..(ix + 1) * block];
                    let ph = phase(x, s.xi[c]);
                    for (k, a) in acc.iter_mut().enumerate() {
                        let mut t = zero;
                        for i in 0..rows {
                            t += what[i][spec_idx[c]] * eb[k * rows + i];
                        }
                        *a += t * ph;
                    }
                }
                acc
            })
            .collect();
        let num: f64 = z.iter().zip(&u).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = u.iter().map(|v| v.norm_sqr()).sum();
        table.push(ParametrixRow {
            frequency: center as f64,
            residual: (num / den).sqrt(),
            below_band: ((center - 2) as f64) < band_start,
        });
    }
    let strictly_decreasing = table.windows(2).all(|p| p[1].residual < p[0].residual);
    Ok(ParametrixTable { rows: table, strictly_decreasing })
}
