//! Orthonormal basis of bigraded spherical harmonics on S^{2n+1} and its quadrature grid.

use rayon::prelude::*;

use super::poly::{exponents, MonomialSet, Powers};
use crate::error::{Error, Result};
use crate::geometry::{SpherePoint, C64};
use crate::quadrature::{sphere_volume, SphereRule};

/// Default cap on dim × nodes stored values.
pub const DEFAULT_BUDGET: usize = 40_000_000;

/// Real eigenspace spanned by the harmonics of bidegree (p, q) and (q, p).
#[derive(Clone, Debug, PartialEq)]
pub struct BasisBlock {
    pub p: usize,
    pub q: usize,
    pub start: usize,
    pub len: usize,
    pub eigenvalue: f64,
}

#[derive(Debug)]
pub struct Basis {
    pub n: usize,
    pub degree: usize,
    pub blocks: Vec<BasisBlock>,
    pub eigenvalues: Vec<f64>,
    pub bidegrees: Vec<(usize, usize)>,
    pub monomials: MonomialSet,
    /// Complex monomial coefficients of each (real-valued) basis function.
    pub poly: Vec<Vec<C64>>,
    /// Quadrature nodes, flattened with stride n + 1.
    pub nodes: Vec<C64>,
    pub weights: Vec<f64>,
    /// Basis function values, row i holding φ_i at every node.
    pub values: Vec<f64>,
    pub volume: f64,
    /// Scale c in Δ_{θ0} = (Δ_round − T²)/c.
    pub scale: f64,
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Complex dimension of the space of harmonic polynomials of bidegree (p, q) in C^{n+1}.
pub fn harmonic_dim(n: usize, p: usize, q: usize) -> usize {
    let full = binom(p + n, n) * binom(q + n, n);
    if p == 0 || q == 0 {
        full
    } else {
        full - binom(p - 1 + n, n) * binom(q - 1 + n, n)
    }
}

/// Real dimension of the block {p, q}.
pub fn block_dim(n: usize, p: usize, q: usize) -> usize {
    if p == q {
        harmonic_dim(n, p, q)
    } else {
        2 * harmonic_dim(n, p, q)
    }
}

/// Eigenvalue of (Δ_round − T²) on bidegree (p, q) before scaling.
fn round_minus_reeb(n: usize, p: usize, q: usize) -> f64 {
    let k = (p + q) as f64;
    let d = p as f64 - q as f64;
    k * (k + 2.0 * n as f64) - d * d
}

/// Scale fixed so that the linear coordinates have eigenvalue n/2.
pub fn anchored_scale(n: usize) -> f64 {
    round_minus_reeb(n, 1, 0) / (n as f64 / 2.0)
}

pub fn eigenvalue(n: usize, p: usize, q: usize) -> f64 {
    round_minus_reeb(n, p, q) / anchored_scale(n)
}

/// Number of real basis functions up to total degree `degree`.
pub fn basis_dim(n: usize, degree: usize) -> usize {
    let mut d = 0;
    for k in 0..=degree {
        for q in 0..=k / 2 {
            d += block_dim(n, k - q, q);
        }
    }
    d
}

/// Quadrature degree used for a basis of degree J: products of two basis functions plus
/// a margin for the pseudo-spectral nonlinearities.
pub fn quadrature_degree(degree: usize) -> usize {
    2 * degree + 4
}

impl Basis {
    pub fn build(n: usize, degree: usize) -> Result<Self> {
        Self::build_with_budget(n, degree, DEFAULT_BUDGET)
    }

    pub fn build_with_budget(n: usize, degree: usize, budget: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if degree == 0 {
            return Err(Error::InvalidInput(
                "truncation degree must be at least 1".into(),
            ));
        }
        let m = n + 1;
        let dim = basis_dim(n, degree);
        let qdeg = quadrature_degree(degree);
        let gauss_points = (qdeg / 2) / 2 + 1;
        let nodes_count = gauss_points.pow(n as u32) * (qdeg + 1).pow(m as u32);
        if dim.saturating_mul(nodes_count) > budget {
            return Err(Error::BudgetExceeded {
                dimension: dim,
                nodes: nodes_count,
                budget,
            });
        }
        let rule = SphereRule::new(m, qdeg);
        let volume = sphere_volume(n);
        let total: f64 = rule.weights.iter().sum();
        let weights: Vec<f64> = rule.weights.iter().map(|w| w * volume / total).collect();
        let nodes: Vec<C64> = rule.nodes.iter().flatten().copied().collect();
        let nn = weights.len();
        let monomials = MonomialSet::new(m, degree);
        let powers: Vec<Powers> = rule
            .nodes
            .par_iter()
            .map(|x| Powers::new(x, degree))
            .collect();

        let mut basis = Basis {
            n,
            degree,
            blocks: Vec::new(),
            eigenvalues: Vec::with_capacity(dim),
            bidegrees: Vec::with_capacity(dim),
            monomials,
            poly: Vec::with_capacity(dim),
            nodes,
            weights,
            values: Vec::with_capacity(dim * nn),
            volume,
            scale: anchored_scale(n),
        };

        for k in 0..=degree {
            for q in 0..=k / 2 {
                let p = k - q;
                basis.add_block(p, q, &powers)?;
            }
        }
        debug_assert_eq!(basis.dim(), dim);
        Ok(basis)
    }

    fn add_block(&mut self, p: usize, q: usize, powers: &[Powers]) -> Result<()> {
        let m = self.n + 1;
        let nn = self.weights.len();
        let target = block_dim(self.n, p, q);
        let start = self.dim();
        let lambda = eigenvalue(self.n, p, q);
        let family: Vec<usize> = (0..start)
            .filter(|&i| {
                let (a, b) = self.bidegrees[i];
                a.abs_diff(b) == p - q
            })
            .collect();
        let mut accepted = 0;
        'outer: for a in exponents(p, m) {
            for b in exponents(q, m) {
                if accepted == target {
                    break 'outer;
                }
                let mi = self.monomials.index_of(&a, &b).expect("monomial in set");
                let ci = self.monomials.conjugate_index(mi);
                let raw: Vec<C64> = powers
                    .par_iter()
                    .map(|pw| self.monomials.eval_one(mi, pw))
                    .collect();
                for imaginary in [false, true] {
                    if accepted == target {
                        break;
                    }
                    let mut v: Vec<f64> = raw
                        .iter()
                        .map(|c| if imaginary { c.im } else { c.re })
                        .collect();
                    let mut poly = vec![C64::new(0.0, 0.0); self.monomials.len()];
                    if imaginary {
                        poly[mi] += C64::new(0.0, -0.5);
                        poly[ci] += C64::new(0.0, 0.5);
                    } else {
                        poly[mi] += C64::new(0.5, 0.0);
                        poly[ci] += C64::new(0.5, 0.0);
                    }
                    let norm0 = self.norm_sq(&v);
                    if norm0 < 1e-28 {
                        continue;
                    }
                    let members: Vec<usize> =
                        family.iter().copied().chain(start..self.dim()).collect();
                    for _ in 0..2 {
                        let proj: Vec<f64> =
                            members.par_iter().map(|&j| self.dot_row(j, &v)).collect();
                        for (&j, &h) in members.iter().zip(&proj) {
                            let row = &self.values[j * nn..(j + 1) * nn];
                            for (vk, rk) in v.iter_mut().zip(row) {
                                *vk -= h * rk;
                            }
                            for (pc, qc) in poly.iter_mut().zip(&self.poly[j]) {
                                *pc -= qc * h;
                            }
                        }
                    }
                    let norm = self.norm_sq(&v);
                    if norm < 1e-10 * norm0 {
                        continue;
                    }
                    let s = 1.0 / norm.sqrt();
                    v.iter_mut().for_each(|x| *x *= s);
                    poly.iter_mut().for_each(|c| *c *= s);
                    self.values.extend_from_slice(&v);
                    self.poly.push(poly);
                    self.eigenvalues.push(lambda);
                    self.bidegrees.push((p, q));
                    accepted += 1;
                }
            }
        }
        if accepted != target {
            return Err(Error::InvalidInput(format!(
                "block ({p},{q}) produced {accepted} functions, expected {target}"
            )));
        }
        self.blocks.push(BasisBlock {
            p,
            q,
            start,
            len: target,
            eigenvalue: lambda,
        });
        Ok(())
    }

    fn norm_sq(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.weights).map(|(x, w)| w * x * x).sum()
    }

    fn dot_row(&self, j: usize, v: &[f64]) -> f64 {
        let nn = self.weights.len();
        self.values[j * nn..(j + 1) * nn]
            .iter()
            .zip(v)
            .zip(&self.weights)
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    pub fn node(&self, k: usize) -> &[C64] {
        let m = self.n + 1;
        &self.nodes[k * m..(k + 1) * m]
    }

    pub fn node_point(&self, k: usize) -> SpherePoint {
        SpherePoint {
            x: self.node(k).to_vec(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let nn = self.node_count();
        &self.values[i * nn..(i + 1) * nn]
    }

    /// Grid values Σ_i c_i φ_i.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.dim());
        let nn = self.node_count();
        let chunk = 256;
        let mut out = vec![0.0; nn];
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(ci, slot)| {
                let k0 = ci * chunk;
                for (i, &c) in coeffs.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let row = &self.values[i * nn + k0..i * nn + k0 + slot.len()];
                    for (o, r) in slot.iter_mut().zip(row) {
                        *o += c * r;
                    }
                }
            });
        out
    }

    /// Quadrature projection coefficients ∫ g φ_i dV.
    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.node_count());
        let wv: Vec<f64> = values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .collect();
        (0..self.dim())
            .into_par_iter()
            .map(|i| self.row(i).iter().zip(&wv).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Largest entry of |G − I| for the quadrature Gram matrix.
    pub fn gram_defect(&self) -> f64 {
        (0..self.dim())
            .into_par_iter()
            .map(|i| {
                let wi: Vec<f64> = self
                    .row(i)
                    .iter()
                    .zip(&self.weights)
                    .map(|(a, w)| a * w)
                    .collect();
                (0..self.dim())
                    .map(|j| {
                        let g: f64 = self.row(j).iter().zip(&wi).map(|(a, b)| a * b).sum();
                        (g - if i == j { 1.0 } else { 0.0 }).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Value of basis function i at an arbitrary point.
    pub fn eval_function(&self, i: usize, x: &[C64]) -> f64 {
        self.monomials
            .eval(&self.poly[i], &Powers::new(x, self.degree))
            .re
    }

    pub fn block_of(&self, i: usize) -> &BasisBlock {
        self.blocks
            .iter()
            .find(|b| i >= b.start && i < b.start + b.len)
            .expect("index within basis")
    }

    /// Smallest eigenvalue strictly above n/2.
    pub fn spectral_gap_eigenvalue(&self) -> Option<f64> {
        let anchor = self.n as f64 / 2.0;
        self.blocks
            .iter()
            .map(|b| b.eigenvalue)
            .filter(|&l| l > anchor + 1e-12)
            .min_by(|a, b| a.total_cmp(b))
    }
}
