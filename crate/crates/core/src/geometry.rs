//! Cayley transform, Heisenberg group operations and CR automorphisms of the sphere.
//!
//! Points of S^{2n+1} live in C^{n+1} with the last coordinate playing the role of the
//! pole axis: the chart `cayley_forward` is centered at the north pole (0,…,0,1) and is
//! singular at the south pole (0,…,0,−1).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const POLE_TOLERANCE: f64 = 1e-12;
const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub x: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergPoint {
    pub z: Vec<C64>,
    pub tau: f64,
}

/// Hermitian inner product Σ a_j b̄_j.
pub fn herm(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(p, q)| p * q.conj()).sum()
}

pub fn norm_sq(a: &[C64]) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum()
}

impl SpherePoint {
    /// Wraps `x`, checking that it has unit norm.
    pub fn new(x: Vec<C64>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "sphere point needs at least 2 complex coordinates, got {}",
                x.len()
            )));
        }
        let r2 = norm_sq(&x);
        if (r2 - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "sphere point has squared norm {r2}, expected 1"
            )));
        }
        Ok(Self { x })
    }

    /// Scales a nonzero vector onto the sphere.
    pub fn normalized(x: Vec<C64>) -> Result<Self> {
        let r = norm_sq(&x).sqrt();
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        Self::new(x.into_iter().map(|c| c / r).collect())
    }

    pub fn north(n: usize) -> Self {
        let mut x = vec![C64::new(0.0, 0.0); n + 1];
        x[n] = C64::new(1.0, 0.0);
        Self { x }
    }

    pub fn south(n: usize) -> Self {
        let mut x = vec![C64::new(0.0, 0.0); n + 1];
        x[n] = C64::new(-1.0, 0.0);
        Self { x }
    }

    /// Uniformly distributed point (Gaussian vector normalized).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        loop {
            let x: Vec<C64> = (0..=n)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            if norm_sq(&x) > 1e-6 {
                return Self::normalized(x).expect("nonzero vector");
            }
        }
    }

    /// Complex dimension parameter n (the sphere is S^{2n+1}).
    pub fn n(&self) -> usize {
        self.x.len() - 1
    }

    pub fn distance(&self, other: &SpherePoint) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl HeisenbergPoint {
    pub fn new(z: Vec<C64>, tau: f64) -> Result<Self> {
        if z.is_empty()
            || !tau.is_finite()
            || z.iter().any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::InvalidInput(
                "Heisenberg point must be finite with n ≥ 1".into(),
            ));
        }
        Ok(Self { z, tau })
    }

    pub fn origin(n: usize) -> Self {
        Self {
            z: vec![C64::new(0.0, 0.0); n],
            tau: 0.0,
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> Self {
        let z = (0..n)
            .map(|_| {
                C64::new(
                    scale * rng.sample::<f64, _>(StandardNormal),
                    scale * rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect();
        let tau = scale * scale * rng.sample::<f64, _>(StandardNormal);
        Self { z, tau }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Heisenberg product a·b, so that T_a ∘ T_b = T_{a·b}.
    pub fn mul(&self, other: &HeisenbergPoint) -> HeisenbergPoint {
        translate(other, self)
    }

    pub fn inverse(&self) -> HeisenbergPoint {
        HeisenbergPoint {
            z: self.z.iter().map(|c| -c).collect(),
            tau: -self.tau,
        }
    }
}

/// π(x) = (x'/(1+x_{n+1}), Re(i(1−x_{n+1})/(1+x_{n+1}))).
pub fn cayley_forward(x: &SpherePoint) -> Result<HeisenbergPoint> {
    let n = x.n();
    let denom = C64::new(1.0, 0.0) + x.x[n];
    if denom.norm() < POLE_TOLERANCE {
        return Err(Error::PoleSingularity {
            distance: denom.norm(),
        });
    }
    let z = x.x[..n].iter().map(|c| c / denom).collect();
    let w = C64::new(0.0, 1.0) * (C64::new(1.0, 0.0) - x.x[n]) / denom;
    Ok(HeisenbergPoint { z, tau: w.re })
}

/// Ψ(z,τ) = (2z/(1+|z|²−iτ), (1−|z|²+iτ)/(1+|z|²−iτ)).
pub fn cayley_inverse(h: &HeisenbergPoint) -> SpherePoint {
    let r2 = norm_sq(&h.z);
    let w = C64::new(1.0 + r2, -h.tau);
    let mut x: Vec<C64> = h.z.iter().map(|c| 2.0 * c / w).collect();
    x.push(C64::new(1.0 - r2, h.tau) / w);
    SpherePoint { x }
}

/// D_λ(z,τ) = (λz, λ²τ).
pub fn dilate(h: &HeisenbergPoint, lambda: f64) -> Result<HeisenbergPoint> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::NonPositiveScale(lambda));
    }
    Ok(HeisenbergPoint {
        z: h.z.iter().map(|c| c * lambda).collect(),
        tau: lambda * lambda * h.tau,
    })
}

/// T_q(z,τ) = (z+z', τ+τ'+2 Im(z'·z̄)).
pub fn translate(h: &HeisenbergPoint, q: &HeisenbergPoint) -> HeisenbergPoint {
    let twist = 2.0 * herm(&q.z, &h.z).im;
    HeisenbergPoint {
        z: h.z.iter().zip(&q.z).map(|(a, b)| a + b).collect(),
        tau: h.tau + q.tau + twist,
    }
}

/// δ_{q,r}(z,τ) = (rz+z', r²τ+τ'+2r Im(z'·z̄)).
pub fn delta(h: &HeisenbergPoint, q: &HeisenbergPoint, r: f64) -> Result<HeisenbergPoint> {
    Ok(translate(&dilate(h, r)?, q))
}

/// Density K(z,τ) = (4/((1+|z|²)²+τ²))^{n+1} of the pulled-back volume form.
pub fn volume_density(h: &HeisenbergPoint, n: usize) -> f64 {
    let a = 1.0 + norm_sq(&h.z);
    (4.0 / (a * a + h.tau * h.tau)).powi(n as i32 + 1)
}

/// Unitary U with U e_{n+1} = target, built from one Householder reflection and a phase.
pub fn rotation_to(target: &SpherePoint) -> DMatrix<C64> {
    let m = target.x.len();
    let last = target.x[m - 1];
    let phase = if last.norm() > 0.0 {
        last / last.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let mut v: Vec<C64> = target.x.iter().map(|c| -c).collect();
    v[m - 1] += phase;
    let vv = norm_sq(&v);
    let mut u = DMatrix::<C64>::identity(m, m);
    if vv > 1e-28 {
        for i in 0..m {
            for j in 0..m {
                u[(i, j)] -= 2.0 * v[i] * v[j].conj() / vv;
            }
        }
    }
    for i in 0..m {
        u[(i, m - 1)] *= phase;
    }
    u
}

fn mat_vec(u: &DMatrix<C64>, x: &[C64]) -> Vec<C64> {
    (0..u.nrows())
        .map(|i| (0..u.ncols()).map(|j| u[(i, j)] * x[j]).sum())
        .collect()
}

fn adjoint_vec(u: &DMatrix<C64>, x: &[C64]) -> Vec<C64> {
    (0..u.ncols())
        .map(|j| (0..u.nrows()).map(|i| u[(i, j)].conj() * x[i]).sum())
        .collect()
}

/// φ = U ∘ Ψ ∘ T_q ∘ D_r ∘ π ∘ U⁻¹.
///
/// The automorphism concentrates mass at `pole()` = U·south when r is small and spreads
/// it from there when r is large.
#[derive(Clone, Debug, PartialEq)]
pub struct CRAutomorphism {
    pub u: DMatrix<C64>,
    pub q: HeisenbergPoint,
    pub r: f64,
}

impl CRAutomorphism {
    pub fn new(u: DMatrix<C64>, q: HeisenbergPoint, r: f64) -> Result<Self> {
        let m = q.n() + 1;
        if u.nrows() != m || u.ncols() != m {
            return Err(Error::InvalidInput(format!(
                "rotation is {}x{}, expected {m}x{m}",
                u.nrows(),
                u.ncols()
            )));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::NonPositiveScale(r));
        }
        let defect = (u.adjoint() * &u - DMatrix::<C64>::identity(m, m))
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if defect > UNIT_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "rotation is not unitary (defect {defect:.3e})"
            )));
        }
        Ok(Self { u, q, r })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            u: DMatrix::identity(n + 1, n + 1),
            q: HeisenbergPoint::origin(n),
            r: 1.0,
        }
    }

    /// Automorphism whose chart is rotated so that U·south = `pole`.
    pub fn with_pole(pole: &SpherePoint, q: HeisenbergPoint, r: f64) -> Result<Self> {
        let antipode = SpherePoint {
            x: pole.x.iter().map(|c| -c).collect(),
        };
        Self::new(rotation_to(&antipode), q, r)
    }

    pub fn n(&self) -> usize {
        self.q.n()
    }

    /// U·south, the point where the automorphism's chart is singular.
    pub fn pole(&self) -> SpherePoint {
        let n = self.n();
        SpherePoint {
            x: mat_vec(&self.u, &SpherePoint::south(n).x),
        }
    }

    fn chart_point(&self, x: &SpherePoint) -> Result<HeisenbergPoint> {
        cayley_forward(&SpherePoint {
            x: adjoint_vec(&self.u, &x.x),
        })
    }

    pub fn apply(&self, x: &SpherePoint) -> Result<SpherePoint> {
        let h = self.chart_point(x)?;
        let y = cayley_inverse(&delta(&h, &self.q, self.r)?);
        Ok(SpherePoint {
            x: mat_vec(&self.u, &y.x),
        })
    }

    /// |det dφ|(x) = r^{2n+2} K(δ_{q,r}(π(U⁻¹x))) / K(π(U⁻¹x)).
    pub fn jacobian_factor(&self, x: &SpherePoint) -> Result<f64> {
        let n = self.n();
        let h = self.chart_point(x)?;
        let moved = delta(&h, &self.q, self.r)?;
        Ok(self.r.powi(2 * n as i32 + 2) * volume_density(&moved, n) / volume_density(&h, n))
    }

    /// Image point and Jacobian together, sharing the chart evaluation.
    pub fn apply_with_jacobian(&self, x: &SpherePoint) -> Result<(SpherePoint, f64)> {
        let n = self.n();
        let h = self.chart_point(x)?;
        let moved = delta(&h, &self.q, self.r)?;
        let y = cayley_inverse(&moved);
        let jac = self.r.powi(2 * n as i32 + 2) * volume_density(&moved, n) / volume_density(&h, n);
        Ok((
            SpherePoint {
                x: mat_vec(&self.u, &y.x),
            },
            jac,
        ))
    }

    /// self ∘ other, available when both share the same rotation.
    pub fn compose(&self, other: &CRAutomorphism) -> Result<CRAutomorphism> {
        let defect = (&self.u - &other.u)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if defect > 1e-12 {
            return Err(Error::InvalidInput(
                "composition is only represented for automorphisms sharing a rotation".into(),
            ));
        }
        let q = self.q.mul(&dilate(&other.q, self.r)?);
        Ok(CRAutomorphism {
            u: self.u.clone(),
            q,
            r: self.r * other.r,
        })
    }

    /// Inverse automorphism (same rotation).
    pub fn inverse(&self) -> CRAutomorphism {
        let inv_r = 1.0 / self.r;
        let q = dilate(&self.q.inverse(), inv_r).expect("positive scale");
        CRAutomorphism {
            u: self.u.clone(),
            q,
            r: inv_r,
        }
    }

    /// Value at the ball center of the holomorphic extension of φ.
    ///
    /// By the mean value property this equals (1/Vol)∫φ dV_{θ0}, and it is exact at any
    /// scale where grid quadrature of φ would need O(r²) nodes.
    pub fn ball_center_image(&self) -> Vec<C64> {
        let i = C64::new(0.0, 1.0);
        let zq = &self.q.z;
        let w = C64::new(self.q.tau, self.r * self.r + norm_sq(zq));
        let denom = C64::new(1.0, 0.0) - i * w;
        let mut y: Vec<C64> = zq.iter().map(|c| 2.0 * c / denom).collect();
        y.push((C64::new(1.0, 0.0) + i * w) / denom);
        mat_vec(&self.u, &y)
    }

    /// Distance from the identity in the (q, log r) chart.
    pub fn distance_from_identity(&self) -> f64 {
        (norm_sq(&self.q.z) + self.q.tau * self.q.tau + self.r.ln().powi(2)).sqrt()
    }
}
