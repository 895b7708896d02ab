//! Standard bubbles u_{p,ε} and conformal pullbacks of pointwise functions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{herm, CRAutomorphism, HeisenbergPoint, SpherePoint, C64};
use crate::spectral::{sample, Basis, Field, GridField, SphereFunction};

/// Default bound on the relative L² projection residual accepted by [`bubble`].
pub const DEFAULT_BUBBLE_TOLERANCE: f64 = 0.05;

/// Exact pointwise bubble u_{p,ε}(x) = (2ε / |1+ε² − (1−ε²)⟨x,p⟩|)^n.
///
/// Equals |det dφ|^{n/(2n+2)} for the automorphism with pole p, q = 0 and r = ε, so
/// that ∫u^{2+2/n} dV = Vol and the maximum ε^{−n} sits at p.
#[derive(Clone, Debug)]
pub struct BubbleProfile {
    pub p: SpherePoint,
    pub eps: f64,
}

impl BubbleProfile {
    pub fn new(p: SpherePoint, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "bubble scale must lie in (0, 1], got {eps}"
            )));
        }
        Ok(Self { p, eps })
    }

    /// Automorphism whose Jacobian generates this bubble.
    pub fn automorphism(&self) -> CRAutomorphism {
        CRAutomorphism::with_pole(&self.p, HeisenbergPoint::origin(self.p.n()), self.eps)
            .expect("unit pole and positive scale")
    }
}

impl SphereFunction for BubbleProfile {
    fn n(&self) -> usize {
        self.p.n()
    }
    fn eval(&self, x: &[C64]) -> f64 {
        let e2 = self.eps * self.eps;
        let s = herm(x, &self.p.x);
        let d = (C64::new(1.0 + e2, 0.0) - (1.0 - e2) * s).norm();
        (2.0 * self.eps / d).powi(self.p.n() as i32)
    }
}

/// x ↦ u(φ(x)) |det dφ(x)|^{n/(2n+2)}, the factor of φ*(u^{2/n} θ0) relative to θ0.
pub struct Pullback<'a, F: SphereFunction + ?Sized> {
    pub u: &'a F,
    pub phi: &'a CRAutomorphism,
}

impl<F: SphereFunction + ?Sized> SphereFunction for Pullback<'_, F> {
    fn n(&self) -> usize {
        self.u.n()
    }
    fn eval(&self, x: &[C64]) -> f64 {
        let n = self.u.n() as f64;
        match self.phi.apply_with_jacobian(&SpherePoint { x: x.to_vec() }) {
            Ok((y, jac)) => self.u.eval(&y.x) * jac.powf(n / (2.0 * n + 2.0)),
            // The chart pole is a single point: the pulled-back factor extends continuously
            // and the grid never lands on it to within 1e−12.
            Err(_) => f64::NAN,
        }
    }
}

/// Bubble projected onto the basis together with its relative projection residual.
#[derive(Clone, Debug)]
pub struct ProjectedBubble {
    pub field: Field,
    pub exact: GridField,
    pub residual: f64,
}

/// u_{p,ε} sampled exactly on the grid and projected, failing when the projection loses
/// more than `tolerance` in relative L².
pub fn bubble(
    p: &SpherePoint,
    eps: f64,
    basis: Arc<Basis>,
    tolerance: f64,
) -> Result<ProjectedBubble> {
    if p.n() != basis.n {
        return Err(Error::InvalidInput(format!(
            "point lives on S^{} but the basis is on S^{}",
            2 * p.n() + 1,
            2 * basis.n + 1
        )));
    }
    let profile = BubbleProfile::new(p.clone(), eps)?;
    let exact = GridField::new(basis.clone(), sample(&basis, &profile));
    let residual = exact.projection_residual();
    if residual > tolerance {
        return Err(Error::TruncationLoss {
            residual,
            tolerance,
        });
    }
    let field = exact.project();
    Ok(ProjectedBubble {
        field,
        exact,
        residual,
    })
}
