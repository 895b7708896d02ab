//! Center-of-mass normalization by CR automorphisms and the shadow point.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::Pullback;
use crate::error::{Error, Result};
use crate::geometry::{norm_sq, CRAutomorphism, HeisenbergPoint, SpherePoint, C64};
use crate::quadrature::{heisenberg_integral, sphere_volume};
use crate::spectral::{sample, Basis, Field, SphereFunction};

#[derive(Clone, Copy, Debug)]
pub struct CenteringOptions {
    pub tolerance: f64,
    pub max_iter: usize,
    /// Relative step for the finite-difference Jacobian.
    pub fd_step: f64,
    /// Condition number above which Newton falls back to bisection in log r.
    pub max_condition: f64,
}

impl Default for CenteringOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iter: 100,
            fd_step: 1e-6,
            max_condition: 1e8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CenteringResult {
    pub phi: CRAutomorphism,
    pub v: Field,
    /// |∫ x dV_h| for the normalized form h = v^{2+2/n} θ0.
    pub residual: f64,
    pub eps: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Shadow {
    pub theta: Vec<C64>,
    pub theta_hat: Vec<C64>,
    pub eps: f64,
}

/// Exponent 2 + 2/n of the volume form.
pub fn volume_exponent(n: usize) -> f64 {
    2.0 + 2.0 / n as f64
}

/// P = ∫ x u^{2+2/n} dV and P̂ (P itself when |P| ≤ 1e−12).
pub fn center_of_mass(u: &Field) -> (Vec<C64>, Vec<C64>) {
    let basis = u.basis();
    let k = volume_exponent(basis.n);
    let density: Vec<f64> = u.values().iter().map(|v| v.max(0.0).powf(k)).collect();
    let p = weighted_coordinates(basis, &density);
    let hat = unit_or_self(&p);
    (p, hat)
}

pub fn unit_or_self(p: &[C64]) -> Vec<C64> {
    let norm = norm_sq(p).sqrt();
    if norm > 1e-12 {
        p.iter().map(|c| c / norm).collect()
    } else {
        p.to_vec()
    }
}

/// ∫ x g dV from grid samples of g.
pub fn weighted_coordinates(basis: &Basis, g: &[f64]) -> Vec<C64> {
    let m = basis.n + 1;
    let mut acc = vec![C64::new(0.0, 0.0); m];
    for (k, (w, gk)) in basis.weights.iter().zip(g).enumerate() {
        let x = basis.node(k);
        for j in 0..m {
            acc[j] += x[j] * (w * gk);
        }
    }
    acc
}

fn params_to_automorphism(u: &DMatrix<C64>, params: &[f64]) -> CRAutomorphism {
    let n = (params.len() - 2) / 2;
    let z = (0..n)
        .map(|j| C64::new(params[2 * j], params[2 * j + 1]))
        .collect();
    CRAutomorphism {
        u: u.clone(),
        q: HeisenbergPoint {
            z,
            tau: params[2 * n],
        },
        r: params[2 * n + 1].exp(),
    }
}

/// ∫ x (u∘φ)^{2+2/n} |det dφ| dV as 2n+2 reals.
fn centering_map<F: SphereFunction + ?Sized>(
    u: &F,
    basis: &Basis,
    phi: &CRAutomorphism,
) -> Vec<f64> {
    let n = basis.n;
    let k = volume_exponent(n);
    let pull = Pullback { u, phi };
    let density: Vec<f64> = (0..basis.node_count())
        .into_par_iter()
        .map(|i| {
            let v = pull.eval(basis.node(i));
            if v.is_finite() {
                v.max(0.0).powf(k)
            } else {
                0.0
            }
        })
        .collect();
    weighted_coordinates(basis, &density)
        .into_iter()
        .flat_map(|c| [c.re, c.im])
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Re⟨res, pole⟩ for a residual stored as 2n+2 reals.
fn pole_component(res: &[f64], pole: &[C64]) -> f64 {
    pole.iter()
        .enumerate()
        .map(|(j, p)| res[2 * j] * p.re + res[2 * j + 1] * p.im)
        .sum()
}

/// Automorphism with pole direction P̂ centering the measure u^{2+2/n} dV.
///
/// A bracketing search in log r along the pole axis seeds a damped Newton iteration on all
/// of (q, log r) with a finite-difference Jacobian; residual norms decrease strictly across
/// accepted iterates.
pub fn find_centering<F: SphereFunction + ?Sized>(
    u: &F,
    basis: Arc<Basis>,
    opts: &CenteringOptions,
) -> Result<CenteringResult> {
    find_centering_from(u, basis, opts, None)
}

/// [`find_centering`] with the log r search started at `log_r_guess`.
pub fn find_centering_from<F: SphereFunction + ?Sized>(
    u: &F,
    basis: Arc<Basis>,
    opts: &CenteringOptions,
    log_r_guess: Option<f64>,
) -> Result<CenteringResult> {
    let n = basis.n;
    if u.n() != n {
        return Err(Error::InvalidInput(
            "function and basis live on different spheres".into(),
        ));
    }
    let k = volume_exponent(n);
    let samples = sample(&basis, u);
    if samples.iter().any(|v| !(*v > 0.0)) {
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        return Err(Error::NonPositiveFactor { min });
    }
    let density: Vec<f64> = samples.iter().map(|v| v.powf(k)).collect();
    let p = weighted_coordinates(&basis, &density);
    let rot = if norm_sq(&p).sqrt() > 1e-12 {
        let hat = unit_or_self(&p);
        CRAutomorphism::with_pole(&SpherePoint { x: hat }, HeisenbergPoint::origin(n), 1.0)?.u
    } else {
        DMatrix::identity(n + 1, n + 1)
    };
    let pole: Vec<C64> = (0..=n).map(|i| -rot[(i, n)]).collect();
    let eval = |params: &[f64]| -> Vec<f64> {
        let phi = params_to_automorphism(&rot, params);
        centering_map(u, &basis, &phi)
    };

    let dim = 2 * n + 2;
    let mut params = vec![0.0; dim];
    let mut res = eval(&params);
    let mut res_norm = norm(&res);
    let mut iterations = 0;

    // Bracket the pole component in log r, then refine by regula falsi (Illinois).
    if res_norm > opts.tolerance {
        let mut work = params.clone();
        let mut g = |lr: f64| -> f64 {
            work[dim - 1] = lr;
            iterations += 1;
            pole_component(&eval(&work), &pole)
        };
        let start = log_r_guess.unwrap_or(0.0);
        let g0 = g(start);
        if g0 != 0.0 {
            // The pole component decreases as r grows.
            let dir = g0.signum();
            let (mut a, mut ga) = (start, g0);
            let mut width = 1.0;
            let mut bracket = None;
            for _ in 0..12 {
                let b = a + dir * width;
                let gb = g(b);
                if gb.signum() != ga.signum() {
                    bracket = Some((a, ga, b, gb));
                    break;
                }
                a = b;
                ga = gb;
                width *= 2.0;
            }
            if let Some((mut a, mut ga, mut b, mut gb)) = bracket {
                let mut side = 0i8;
                for _ in 0..80 {
                    let c = (a * gb - b * ga) / (gb - ga);
                    let gc = g(c);
                    if gc == 0.0 || (b - a).abs() < 1e-12 {
                        a = c;
                        b = c;
                        break;
                    }
                    if gc.signum() == gb.signum() {
                        b = c;
                        gb = gc;
                        if side == -1 {
                            ga *= 0.5;
                        }
                        side = -1;
                    } else {
                        a = c;
                        ga = gc;
                        if side == 1 {
                            gb *= 0.5;
                        }
                        side = 1;
                    }
                    if gc.abs() < 0.1 * opts.tolerance {
                        break;
                    }
                }
                let lr = if ga.abs() < gb.abs() { a } else { b };
                let mut trial = params.clone();
                trial[dim - 1] = lr;
                let r = eval(&trial);
                let rn = norm(&r);
                if rn < res_norm {
                    params = trial;
                    res = r;
                    res_norm = rn;
                }
            }
        }
    }

    let mut newton_iter = 0;
    while res_norm > opts.tolerance && newton_iter < opts.max_iter {
        newton_iter += 1;
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        for c in 0..dim {
            let h = opts.fd_step * (1.0 + params[c].abs());
            let mut shifted = params.clone();
            shifted[c] += h;
            let rs = eval(&shifted);
            for r in 0..dim {
                jac[(r, c)] = (rs[r] - res[r]) / h;
            }
        }
        let svd = jac.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let cond = if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        };
        let step: Vec<f64> = if cond > opts.max_condition {
            // Fall back to a one-dimensional secant step in log r.
            let h = opts.fd_step;
            let mut shifted = params.clone();
            shifted[dim - 1] += h;
            let rs = eval(&shifted);
            let a0 = pole_component(&res, &pole);
            let a1 = pole_component(&rs, &pole);
            let slope = (a1 - a0) / h;
            let mut s = vec![0.0; dim];
            if slope != 0.0 {
                s[dim - 1] = -a0 / slope;
            }
            s
        } else {
            let rhs = DVector::from_vec(res.iter().map(|v| -v).collect());
            match svd.solve(&rhs, 1e-14 * smax) {
                Ok(s) => s.iter().copied().collect(),
                Err(_) => break,
            }
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = params
                .iter()
                .zip(&step)
                .map(|(p, s)| p + lambda * s)
                .collect();
            let rt = eval(&trial);
            let rn = norm(&rt);
            if rn < res_norm {
                params = trial;
                res = rt;
                res_norm = rn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let phi = params_to_automorphism(&rot, &params);
    let pull = Pullback { u, phi: &phi };
    let v = Field::project_function(basis.clone(), &pull);
    let converged = res_norm <= opts.tolerance;
    Ok(CenteringResult {
        eps: 1.0 / phi.r,
        phi,
        v,
        residual: res_norm,
        converged,
        iterations,
    })
}

/// Θ = ∫ φ dV_{θ0}, evaluated exactly by the mean value property of the holomorphic
/// extension of φ to the ball.
pub fn shadow(centering: &CenteringResult) -> Result<Shadow> {
    if !centering.converged {
        return Err(Error::NoConvergence {
            iterations: centering.iterations,
            residual: centering.residual,
        });
    }
    Ok(shadow_of(&centering.phi))
}

pub fn shadow_of(phi: &CRAutomorphism) -> Shadow {
    let vol = sphere_volume(phi.n());
    let theta: Vec<C64> = phi
        .ball_center_image()
        .into_iter()
        .map(|c| c * vol)
        .collect();
    Shadow {
        theta_hat: unit_or_self(&theta),
        theta,
        eps: 1.0 / phi.r,
    }
}

/// Θ by grid quadrature of φ; only accurate while 1/r is resolved by the grid.
pub fn shadow_quadrature(phi: &CRAutomorphism, basis: &Basis) -> Result<Vec<C64>> {
    let m = basis.n + 1;
    let images: Vec<Vec<C64>> = (0..basis.node_count())
        .into_par_iter()
        .map(|k| phi.apply(&basis.node_point(k)).map(|y| y.x))
        .collect::<Result<_>>()?;
    let mut acc = vec![C64::new(0.0, 0.0); m];
    for (w, y) in basis.weights.iter().zip(&images) {
        for j in 0..m {
            acc[j] += y[j] * *w;
        }
    }
    Ok(acc)
}

/// Last shadow component Vol − 2ε² I(ε) for a pure dilation, with I(ε) the Heisenberg
/// integral of ((ε²(|z|⁴+τ²)+|z|²)/((1+ε²|z|²)²+ε⁴τ²)) (τ²+(1+|z|²)²)^{−(n+1)} written
/// without the 4^{n+1} volume density factor.
pub fn dilation_shadow_integral(n: usize, eps: f64, rel_tol: f64) -> Result<f64> {
    let e2 = eps * eps;
    let k = n as i32 + 1;
    let est = heisenberg_integral(
        n,
        |r, tau| {
            let r2 = r * r;
            let a = 1.0 + r2;
            let num = e2 * (r2 * r2 + tau * tau) + r2;
            let b = 1.0 + e2 * r2;
            let den = b * b + e2 * e2 * tau * tau;
            num / den / (tau * tau + a * a).powi(k)
        },
        rel_tol,
    )?;
    Ok(est.value)
}
