//! Curvature pipeline on Taylor series, so every quantity carries its own
//! exact derivatives.

use crate::metric::MetricJet;
use crate::taylor::Series;

pub(crate) fn zeros(n: usize, len: usize) -> Vec<Series> {
    vec![Series::zero(n); len]
}

/// Christoffel symbols `Γ^k_ab` at `[k][a][b]`; needs `g` exact to order ≥ 1.
pub(crate) fn christoffel(n: usize, g: &[Series], ginv: &[Series]) -> Vec<Series> {
    let mut dg = zeros(n, n * n * n);
    for x in 0..n {
        for i in 0..n {
            for j in i..n {
                let d = g[i * n + j].deriv(x);
                dg[(x * n + i) * n + j] = d.clone();
                dg[(x * n + j) * n + i] = d;
            }
        }
    }
    // Γ_lab with the lowered index first
    let mut low = zeros(n, n * n * n);
    for l in 0..n {
        for a in 0..n {
            for b in a..n {
                let mut s = dg[(a * n + b) * n + l].clone();
                s.axpy(1.0, &dg[(b * n + a) * n + l]);
                s.axpy(-1.0, &dg[(l * n + a) * n + b]);
                let s = s.scale(0.5);
                low[(l * n + b) * n + a] = s.clone();
                low[(l * n + a) * n + b] = s;
            }
        }
    }
    let mut chr = zeros(n, n * n * n);
    for k in 0..n {
        for a in 0..n {
            for b in a..n {
                let mut acc = Series::zero(n);
                for l in 0..n {
                    acc.add_product(1.0, &ginv[k * n + l], &low[(l * n + a) * n + b]);
                }
                chr[(k * n + b) * n + a] = acc.clone();
                chr[(k * n + a) * n + b] = acc;
            }
        }
    }
    chr
}

pub(crate) struct Fields {
    pub n: usize,
    pub g: Vec<Series>,
    pub chr: Vec<Series>,
    /// `R_abc^d` at `[a][b][c][d]`.
    pub riemann_mixed: Vec<Series>,
    pub riemann: Vec<Series>,
    pub ricci: Vec<Series>,
    pub scalar: Series,
}

impl Fields {
    /// Needs a jet of order ≥ 2.
    pub fn new(jet: &MetricJet) -> Fields {
        let n = jet.dim();
        let g = jet.g_series().to_vec();
        let ginv = jet.ginv_series().to_vec();
        let chr = christoffel(n, &g, &ginv);
        let idx3 = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
        let idx4 = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;

        // dchr[a][r][b][c] = ∂_a Γ^r_bc
        let mut dchr = zeros(n, n * n * n * n);
        for a in 0..n {
            for r in 0..n {
                for b in 0..n {
                    for c in b..n {
                        let d = chr[idx3(r, b, c)].deriv(a);
                        dchr[idx4(a, r, c, b)] = d.clone();
                        dchr[idx4(a, r, b, c)] = d;
                    }
                }
            }
        }
        // K_abc^r = ∂_aΓ^r_bc + Γ^m_bc Γ^r_am
        let mut k = zeros(n, n * n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for r in 0..n {
                        let mut acc = dchr[idx4(a, r, b, c)].clone();
                        for m in 0..n {
                            acc.add_product(1.0, &chr[idx3(m, b, c)], &chr[idx3(r, a, m)]);
                        }
                        k[idx4(a, b, c, r)] = acc;
                    }
                }
            }
        }
        let mut riemann_mixed = zeros(n, n * n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for r in 0..n {
                        let mut s = k[idx4(a, b, c, r)].clone();
                        s.axpy(-1.0, &k[idx4(b, a, c, r)]);
                        riemann_mixed[idx4(a, b, c, r)] = s;
                    }
                }
            }
        }
        let mut riemann = zeros(n, n * n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut acc = Series::zero(n);
                        for r in 0..n {
                            acc.add_product(1.0, &riemann_mixed[idx4(a, b, c, r)], &g[r * n + d]);
                        }
                        riemann[idx4(a, b, c, d)] = acc;
                    }
                }
            }
        }
        let mut ricci = zeros(n, n * n);
        for b in 0..n {
            for c in 0..n {
                let mut acc = Series::zero(n);
                for a in 0..n {
                    acc.axpy(1.0, &riemann_mixed[idx4(a, b, c, a)]);
                }
                ricci[b * n + c] = acc;
            }
        }
        let mut scalar = Series::zero(n);
        for b in 0..n {
            for c in 0..n {
                scalar.add_product(1.0, &ginv[b * n + c], &ricci[b * n + c]);
            }
        }
        Fields { n, g, chr, riemann_mixed, riemann, ricci, scalar }
    }

    /// `P_ab = (R_ab − R g_ab / (2(n−1))) / (n−2)`; needs n ≥ 3.
    pub fn schouten(&self) -> Vec<Series> {
        let n = self.n;
        let nf = n as f64;
        (0..n * n)
            .map(|i| {
                let mut s = self.ricci[i].clone();
                s.add_product(-1.0 / (2.0 * (nf - 1.0)), &self.scalar, &self.g[i]);
                s.scale(1.0 / (nf - 2.0))
            })
            .collect()
    }

    /// `W_abcd = R_abcd + P_ac g_bd − P_bc g_ad + P_bd g_ac − P_ad g_bc`.
    pub fn weyl_down(&self, p: &[Series]) -> Vec<Series> {
        let n = self.n;
        let g = &self.g;
        let mut out = zeros(n, n * n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut s = self.riemann[((a * n + b) * n + c) * n + d].clone();
                        s.add_product(1.0, &p[a * n + c], &g[b * n + d]);
                        s.add_product(-1.0, &p[b * n + c], &g[a * n + d]);
                        s.add_product(1.0, &p[b * n + d], &g[a * n + c]);
                        s.add_product(-1.0, &p[a * n + d], &g[b * n + c]);
                        out[((a * n + b) * n + c) * n + d] = s;
                    }
                }
            }
        }
        out
    }
}

/// `∇` of an all-covariant rank-`rank` field; the new slot is last.
pub(crate) fn covariant_field(n: usize, rank: usize, f: &[Series], chr: &[Series]) -> Vec<Series> {
    let len = n.pow(rank as u32);
    debug_assert_eq!(f.len(), len);
    let mut out = Vec::with_capacity(len * n);
    let mut idx = vec![0usize; rank];
    for flat in 0..len {
        let mut rem = flat;
        for s in (0..rank).rev() {
            idx[s] = rem % n;
            rem /= n;
        }
        for m in 0..n {
            let mut acc = f[flat].deriv(m);
            for s in 0..rank {
                let stride = n.pow((rank - 1 - s) as u32);
                let base = flat - idx[s] * stride;
                for p in 0..n {
                    acc.add_product(-1.0, &f[base + p * stride], &chr[(p * n + m) * n + idx[s]]);
                }
            }
            out.push(acc);
        }
    }
    out
}

pub(crate) fn values(s: &[Series]) -> Vec<f64> {
    s.iter().map(Series::value).collect()
}
