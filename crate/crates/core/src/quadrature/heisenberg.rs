//! Integrals over H^n = C^n × R reduced to the (|z|, τ) quarter plane.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use super::adaptive::{integrate_breaks, AdaptiveOptions, Estimate};
use super::sphere_rule::SphereRule;
use crate::error::{Error, Result};
use crate::geometry::{HeisenbergPoint, C64};

/// Surface area ω_{2n−1} = 2πⁿ/(n−1)! of the unit sphere in C^n.
pub fn unit_sphere_area(n: usize) -> f64 {
    let fact: f64 = (1..n).map(|i| i as f64).product();
    2.0 * PI.powi(n as i32) / fact
}

/// ω_{2n−1} ∫₀^∞ ∫_{−∞}^{∞} g(r, τ) r^{2n−1} dτ dr.
///
/// The radial variable is mapped by r = s², s = t/(1−t) (grading the panel near the
/// origin), τ by τ = (1+r²)·v/(1−v) on each half line, with breakpoints at τ = r² and
/// τ = 1 + r² where the integrands of interest change scale. `rel_tol` applies to the
/// outer integral; inner integrals run ten times tighter.
pub fn heisenberg_integral<G: Fn(f64, f64) -> f64>(
    n: usize,
    g: G,
    rel_tol: f64,
) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let inner_opts = AdaptiveOptions {
        abs_tol: 1e-300,
        rel_tol: rel_tol * 0.1,
        max_intervals: 4000,
    };
    let tau_integral = |r: f64| -> f64 {
        let c = 1.0 + r * r;
        let sym = |v: f64| {
            if v >= 1.0 {
                return 0.0;
            }
            let om = 1.0 - v;
            let tau = c * v / om;
            let jac = c / (om * om);
            let val = (g(r, tau) + g(r, -tau)) * jac;
            if val.is_finite() {
                val
            } else {
                0.0
            }
        };
        let s1 = r * r / (c + r * r);
        match integrate_breaks(sym, &[0.0, s1, 0.5, 1.0], &inner_opts) {
            Ok(e) => e.value,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let power = 4 * n - 1;
    let radial = |t: f64| {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        let om = 1.0 - t;
        let s = t / om;
        let r = s * s;
        let val = 2.0 * s.powi(power as i32) * tau_integral(r) / (om * om);
        if val.is_finite() {
            val
        } else {
            0.0
        }
    };
    let outer_opts = AdaptiveOptions {
        abs_tol: 1e-300,
        rel_tol,
        max_intervals: 4000,
    };
    let est = integrate_breaks(radial, &[0.0, 0.25, 0.5, 0.75, 1.0], &outer_opts)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let omega = unit_sphere_area(n);
    Ok(Estimate {
        value: omega * est.value,
        abs_error: omega * est.abs_error,
    })
}

/// ∫_{H^n} g(z, τ) dz dτ for g not necessarily radial in z.
///
/// The angular average over |z| = r uses a sphere rule exact for polynomials of degree
/// `angular_degree` in (z, z̄).
pub fn heisenberg_integral_pointwise<G: Fn(&HeisenbergPoint) -> f64>(
    n: usize,
    g: G,
    angular_degree: usize,
    rel_tol: f64,
) -> Result<Estimate> {
    let rule = SphereRule::new(n, angular_degree);
    let averaged = |r: f64, tau: f64| {
        let mut acc = 0.0;
        let mut h = HeisenbergPoint {
            z: vec![C64::new(0.0, 0.0); n],
            tau,
        };
        for (w, node) in rule.weights.iter().zip(&rule.nodes) {
            for (zj, om) in h.z.iter_mut().zip(node) {
                *zj = om * r;
            }
            acc += w * g(&h);
        }
        acc
    };
    heisenberg_integral(n, averaged, rel_tol)
}

static VOLUMES: Mutex<Option<HashMap<usize, f64>>> = Mutex::new(None);

/// Vol(S^{2n+1}, θ0) = ∫_{H^n} (4/((1+|z|²)²+τ²))^{n+1} dz dτ, computed by quadrature once
/// per n and cached.
pub fn sphere_volume(n: usize) -> f64 {
    let mut guard = VOLUMES.lock().expect("volume cache poisoned");
    let cache = guard.get_or_insert_with(HashMap::new);
    if let Some(v) = cache.get(&n) {
        return *v;
    }
    let k = n as i32 + 1;
    let est = heisenberg_integral(
        n,
        |r, tau| {
            let a = 1.0 + r * r;
            (4.0 / (a * a + tau * tau)).powi(k)
        },
        1e-13,
    )
    .expect("volume integrand is smooth and integrable");
    cache.insert(n, est.value);
    est.value
}
