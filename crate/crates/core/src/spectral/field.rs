//! Band-limited fields and raw grid functions on the quadrature grid.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use super::basis::Basis;
use super::poly::Powers;
use crate::geometry::{herm, C64};

/// A scalar function Σ c_i φ_i held by coefficients plus cached grid values.
#[derive(Clone, Debug)]
pub struct Field {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
    values: Vec<f64>,
    mono: OnceLock<Vec<C64>>,
    half: OnceLock<Vec<(usize, C64)>>,
}

/// Pointwise samples on the quadrature grid, not necessarily band-limited.
#[derive(Clone, Debug)]
pub struct GridField {
    basis: Arc<Basis>,
    values: Vec<f64>,
}

/// Anything that can be evaluated at a point of the sphere.
pub trait SphereFunction: Sync {
    fn n(&self) -> usize;
    fn eval(&self, x: &[C64]) -> f64;
}

impl Field {
    pub fn from_coeffs(basis: Arc<Basis>, coeffs: Vec<f64>) -> Self {
        let values = basis.synthesize(&coeffs);
        Self {
            basis,
            coeffs,
            values,
            mono: OnceLock::new(),
            half: OnceLock::new(),
        }
    }

    pub fn zero(basis: Arc<Basis>) -> Self {
        let d = basis.dim();
        Self::from_coeffs(basis, vec![0.0; d])
    }

    pub fn constant(basis: Arc<Basis>, c: f64) -> Self {
        let mut coeffs = vec![0.0; basis.dim()];
        // The first basis function is the normalized constant; dividing by its grid value
        // makes the synthesized samples exactly c.
        coeffs[0] = c / basis.values[0];
        Self::from_coeffs(basis, coeffs)
    }

    /// Projection of grid samples onto the basis.
    pub fn analyze(basis: Arc<Basis>, values: &[f64]) -> Self {
        let coeffs = basis.analyze(values);
        Self::from_coeffs(basis, coeffs)
    }

    /// Projection of a pointwise-defined function.
    pub fn project_function<F: SphereFunction + ?Sized>(basis: Arc<Basis>, f: &F) -> Self {
        let values = sample(&basis, f);
        Self::analyze(basis, &values)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.basis.n
    }

    pub fn integrate(&self) -> f64 {
        self.basis.integrate_values(&self.values)
    }

    /// Σ c_i d_i, equal to ∫ u w dV.
    pub fn inner(&self, other: &Field) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scale(&self, s: f64) -> Field {
        Field {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            values: self.values.iter().map(|v| v * s).collect(),
            mono: OnceLock::new(),
            half: OnceLock::new(),
        }
    }

    /// self + s·other.
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        Field {
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + s * b)
                .collect(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
            mono: OnceLock::new(),
            half: OnceLock::new(),
        }
    }

    /// Δ_{θ0}: coefficient-wise multiplication by −λ.
    pub fn sub_laplacian(&self) -> Field {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&self.basis.eigenvalues)
            .map(|(c, l)| -c * l)
            .collect();
        Field::from_coeffs(self.basis.clone(), coeffs)
    }

    /// Coefficients in the ambient monomials x^a x̄^b.
    pub fn monomial_coeffs(&self) -> &[C64] {
        self.mono.get_or_init(|| {
            let mut acc = vec![C64::new(0.0, 0.0); self.basis.monomials.len()];
            for (c, row) in self.coeffs.iter().zip(&self.basis.poly) {
                if *c != 0.0 {
                    for (a, r) in acc.iter_mut().zip(row) {
                        *a += r * *c;
                    }
                }
            }
            acc
        })
    }

    /// One monomial per conjugate pair, doubled, so that u = Re Σ over the half.
    fn half_coeffs(&self) -> &[(usize, C64)] {
        self.half.get_or_init(|| {
            let set = &self.basis.monomials;
            self.monomial_coeffs()
                .iter()
                .enumerate()
                .filter_map(|(i, c)| {
                    let ci = set.conjugate_index(i);
                    if i == ci {
                        Some((i, *c))
                    } else if i < ci {
                        Some((i, 2.0 * c))
                    } else {
                        None
                    }
                })
                .filter(|(_, c)| c.norm_sqr() > 0.0)
                .collect()
        })
    }

    /// Evaluation of the polynomial representative anywhere in C^{n+1}.
    pub fn eval_at(&self, x: &[C64]) -> f64 {
        let set = &self.basis.monomials;
        let pw = Powers::new(x, self.basis.degree);
        self.half_coeffs()
            .iter()
            .map(|(i, c)| (c * set.eval_one(*i, &pw)).re)
            .sum()
    }

    /// Ambient gradient 2∂u/∂x̄ of the real polynomial representative.
    pub fn ambient_gradient(&self, x: &[C64]) -> Vec<C64> {
        self.basis
            .monomials
            .eval_dbar(self.monomial_coeffs(), &Powers::new(x, self.basis.degree))
            .into_iter()
            .map(|c| 2.0 * c)
            .collect()
    }

    /// Horizontal gradient g with |∇_{θ0}u|² = |g|² and Γ(u, w) = Re⟨g_u, g_w⟩.
    ///
    /// Projects the ambient gradient onto the complex tangent space {v : ⟨v, x⟩ = 0} and
    /// halves it, which matches the sub-Laplacian normalization λ = n/2 on coordinates.
    pub fn horizontal_gradient(&self, x: &[C64]) -> Vec<C64> {
        let w = self.ambient_gradient(x);
        let s = herm(&w, x);
        w.iter()
            .zip(x)
            .map(|(wj, xj)| 0.5 * (wj - s * xj))
            .collect()
    }

    fn horizontal_gradients_on_grid(&self) -> Vec<Vec<C64>> {
        let basis = &self.basis;
        let mono = self.monomial_coeffs();
        (0..basis.node_count())
            .into_par_iter()
            .map(|k| {
                let x = basis.node(k);
                let d = basis
                    .monomials
                    .eval_dbar(mono, &Powers::new(x, basis.degree));
                let w: Vec<C64> = d.into_iter().map(|c| 2.0 * c).collect();
                let s = herm(&w, x);
                w.iter()
                    .zip(x)
                    .map(|(wj, xj)| 0.5 * (wj - s * xj))
                    .collect()
            })
            .collect()
    }

    /// Pointwise |∇_{θ0}u|² on the grid.
    pub fn horizontal_grad_sq(&self) -> GridField {
        let g = self.horizontal_gradients_on_grid();
        GridField {
            basis: self.basis.clone(),
            values: g
                .iter()
                .map(|v| v.iter().map(|c| c.norm_sqr()).sum())
                .collect(),
        }
    }

    /// Pointwise carré du champ Γ(u, w) = ⟨∇_{θ0}u, ∇_{θ0}w⟩ on the grid.
    pub fn carre_du_champ(&self, other: &Field) -> GridField {
        let a = self.horizontal_gradients_on_grid();
        let b = other.horizontal_gradients_on_grid();
        GridField {
            basis: self.basis.clone(),
            values: a.iter().zip(&b).map(|(u, w)| herm(u, w).re).collect(),
        }
    }

    /// Grid horizontal gradient vectors, one per node.
    pub fn horizontal_gradient_grid(&self) -> Vec<Vec<C64>> {
        self.horizontal_gradients_on_grid()
    }

    pub fn to_grid(&self) -> GridField {
        GridField {
            basis: self.basis.clone(),
            values: self.values.clone(),
        }
    }
}

impl SphereFunction for Field {
    fn n(&self) -> usize {
        self.basis.n
    }
    fn eval(&self, x: &[C64]) -> f64 {
        self.eval_at(x)
    }
}

impl GridField {
    pub fn new(basis: Arc<Basis>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), basis.node_count());
        Self { basis, values }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integrate(&self) -> f64 {
        self.basis.integrate_values(&self.values)
    }

    pub fn project(&self) -> Field {
        Field::analyze(self.basis.clone(), &self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> GridField {
        GridField {
            basis: self.basis.clone(),
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64 + Sync>(&self, other: &[f64], f: F) -> GridField {
        GridField {
            basis: self.basis.clone(),
            values: self
                .values
                .par_iter()
                .zip(other)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Relative L² distance to the projection, measuring how far from band-limited the
    /// samples are.
    pub fn projection_residual(&self) -> f64 {
        let p = self.project();
        let diff: Vec<f64> = self
            .values
            .iter()
            .zip(p.values())
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        let sq: Vec<f64> = self.values.iter().map(|a| a * a).collect();
        let den = self.basis.integrate_values(&sq);
        if den > 0.0 {
            (self.basis.integrate_values(&diff) / den).sqrt()
        } else {
            0.0
        }
    }
}

/// Samples of a pointwise function at the grid nodes.
pub fn sample<F: SphereFunction + ?Sized>(basis: &Basis, f: &F) -> Vec<f64> {
    (0..basis.node_count())
        .into_par_iter()
        .map(|k| f.eval(basis.node(k)))
        .collect()
}
