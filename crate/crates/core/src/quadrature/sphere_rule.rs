//! Product rule on the unit sphere of C^m in Hopf coordinates x_j = √s_j e^{iθ_j}.
//!
//! The phases use the trapezoid rule, the simplex coordinates (s_1,…,s_m) a collapsed
//! Gauss–Jacobi rule. Weights are normalized to sum to one.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::gauss::gauss_jacobi_unit;

#[derive(Clone, Debug)]
pub struct SphereRule {
    pub m: usize,
    pub degree: usize,
    pub nodes: Vec<Vec<Complex64>>,
    pub weights: Vec<f64>,
}

/// Simplex points (s_1,…,s_m) with probability weights for the uniform measure.
fn simplex_rule(m: usize, points: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut pts = vec![vec![]];
    let mut wts = vec![1.0];
    // Collapsed coordinates: s_i = t_i Π_{l<i}(1−t_l), s_m = Π_{l<m}(1−t_l).
    let mut remaining = vec![1.0];
    for i in 1..m {
        let (t, w) = gauss_jacobi_unit(points, m - 1 - i);
        let norm: f64 = w.iter().sum();
        let mut npts = Vec::with_capacity(pts.len() * t.len());
        let mut nw = Vec::with_capacity(pts.len() * t.len());
        let mut nrem = Vec::with_capacity(pts.len() * t.len());
        for (p, (&pw, &rem)) in pts.iter().zip(wts.iter().zip(&remaining)) {
            for (&ti, &wi) in t.iter().zip(&w) {
                let mut q: Vec<f64> = p.clone();
                q.push(rem * ti);
                npts.push(q);
                nw.push(pw * wi / norm);
                nrem.push(rem * (1.0 - ti));
            }
        }
        pts = npts;
        wts = nw;
        remaining = nrem;
    }
    for (p, rem) in pts.iter_mut().zip(remaining) {
        p.push(rem);
    }
    (pts, wts)
}

impl SphereRule {
    /// Rule exact for polynomials in (x, x̄) of total degree ≤ `degree`.
    pub fn new(m: usize, degree: usize) -> Self {
        assert!(m >= 1);
        let phases = degree + 1;
        let gauss_points = (degree / 2) / 2 + 1;
        let (simplex, sw) = simplex_rule(m, gauss_points);
        let phase_count = phases.pow(m as u32);
        let mut nodes = Vec::with_capacity(simplex.len() * phase_count);
        let mut weights = Vec::with_capacity(simplex.len() * phase_count);
        let unit: Vec<Complex64> = (0..phases)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / phases as f64))
            .collect();
        let pw = 1.0 / phase_count as f64;
        for (s, &w) in simplex.iter().zip(&sw) {
            let radii: Vec<f64> = s.iter().map(|v| v.max(0.0).sqrt()).collect();
            for idx in 0..phase_count {
                let mut rest = idx;
                let mut x = Vec::with_capacity(m);
                for r in &radii {
                    x.push(unit[rest % phases] * *r);
                    rest /= phases;
                }
                nodes.push(x);
                weights.push(w * pw);
            }
        }
        Self {
            m,
            degree,
            nodes,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    #[test]
    fn moments_match_uniform_measure() {
        // E|x_1|^{2a}|x_2|^{2b} over the unit sphere of C^m is a! b! (m−1)! / (m−1+a+b)!.
        for m in 1..4 {
            let rule = SphereRule::new(m, 8);
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "m={m}: {total}");
            for a in 0..=4 {
                for b in 0..=(4 - a) {
                    if m == 1 && b > 0 {
                        continue;
                    }
                    let got: f64 = rule
                        .nodes
                        .iter()
                        .zip(&rule.weights)
                        .map(|(x, w)| {
                            let second = if m > 1 {
                                x[1].norm_sqr().powi(b as i32)
                            } else {
                                1.0
                            };
                            w * x[0].norm_sqr().powi(a as i32) * second
                        })
                        .sum();
                    let exact =
                        factorial(a) * factorial(b) * factorial(m - 1) / factorial(m - 1 + a + b);
                    assert!(
                        (got - exact).abs() < 1e-12,
                        "m={m} a={a} b={b}: {got} vs {exact}"
                    );
                }
            }
            // Non-invariant monomials average to zero.
            let odd: Complex64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| x[0].powi(3) * x[0].conj() * *w)
                .sum();
            assert!(odd.norm() < 1e-15);
        }
    }
}
