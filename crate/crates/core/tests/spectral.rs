use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crflow_core::geometry::{cayley_inverse, volume_density, C64};
use crflow_core::quadrature::{heisenberg_integral_pointwise, sphere_volume};
use crflow_core::scenario::random_factor;
use crflow_core::spectral::{basis_dim, Basis, Field};

/// x^a x̄^b evaluated directly.
fn monomial(x: &[C64], a: &[usize], b: &[usize]) -> C64 {
    let mut m = C64::new(1.0, 0.0);
    for j in 0..x.len() {
        m *= x[j].powu(a[j] as u32) * x[j].conj().powu(b[j] as u32);
    }
    m
}

/// −4Δ(x^a x̄^b) = d(d+2n)M − (|a|−|b|)²M − 4Σ_j a_j b_j x^{a−e_j} x̄^{b−e_j}, from the
/// ambient formula for the sub-Laplacian restricted to the sphere.
fn monomial_laplacian(x: &[C64], a: &[usize], b: &[usize], n: usize) -> C64 {
    let (sa, sb) = (
        a.iter().sum::<usize>() as f64,
        b.iter().sum::<usize>() as f64,
    );
    let d = sa + sb;
    let mut out = monomial(x, a, b) * (d * (d + 2.0 * n as f64) - (sa - sb).powi(2));
    for j in 0..x.len() {
        if a[j] > 0 && b[j] > 0 {
            let mut a2 = a.to_vec();
            let mut b2 = b.to_vec();
            a2[j] -= 1;
            b2[j] -= 1;
            out -= monomial(x, &a2, &b2) * (4.0 * (a[j] * b[j]) as f64);
        }
    }
    -out / 4.0
}

fn node_values(basis: &Basis, g: impl Fn(&[C64]) -> f64) -> Vec<f64> {
    (0..basis.node_count()).map(|k| g(basis.node(k))).collect()
}

fn all_exponents(len: usize, max_total: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|v: Vec<usize>| {
                let used: usize = v.iter().sum();
                (0..=max_total - used).map(move |e| {
                    let mut w = v.clone();
                    w.push(e);
                    w
                })
            })
            .collect();
    }
    out
}

#[test]
fn sub_laplacian_matches_monomial_formula() {
    for (n, degree) in [(1, 4), (2, 3)] {
        let basis = Arc::new(Basis::build(n, degree).unwrap());
        let m = n + 1;
        let mut worst: f64 = 0.0;
        for a in all_exponents(m, degree) {
            let sa: usize = a.iter().sum();
            for b in all_exponents(m, degree - sa) {
                for part in [false, true] {
                    let pick = |z: C64| if part { z.im } else { z.re };
                    let vals = node_values(&basis, |x| pick(monomial(x, &a, &b)));
                    let lap = Field::analyze(basis.clone(), &vals).sub_laplacian();
                    let expect = node_values(&basis, |x| pick(monomial_laplacian(x, &a, &b, n)));
                    for (l, e) in lap.values().iter().zip(&expect) {
                        worst = worst.max((l - e).abs());
                    }
                }
            }
        }
        assert!(worst < 1e-10, "n={n}: worst {worst:.3e}");
    }
}

#[test]
fn product_of_coordinates_on_three_sphere() {
    let basis = Arc::new(Basis::build(1, 2).unwrap());
    let vals = node_values(&basis, |x| (x[0] * x[1]).re);
    let lap = Field::analyze(basis.clone(), &vals).sub_laplacian();
    for (l, v) in lap.values().iter().zip(&vals) {
        assert!((l + v).abs() < 1e-10);
    }
}

#[test]
fn coordinates_are_eigenfunctions() {
    for n in 1..3 {
        let basis = Arc::new(Basis::build(n, 2).unwrap());
        for j in 0..=n {
            for part in [false, true] {
                let vals = node_values(&basis, |x| if part { x[j].im } else { x[j].re });
                let lap = Field::analyze(basis.clone(), &vals).sub_laplacian();
                for (l, v) in lap.values().iter().zip(&vals) {
                    assert!((l + n as f64 / 2.0 * v).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn low_degree_spectrum() {
    let b = Basis::build(1, 1).unwrap();
    assert_eq!(b.dim(), 5);
    assert_eq!(b.eigenvalues, vec![0.0, 0.5, 0.5, 0.5, 0.5]);
    let b = Basis::build(1, 2).unwrap();
    assert_eq!(b.spectral_gap_eigenvalue(), Some(1.0));
    for n in 1..4 {
        let b = Basis::build(n, 2).unwrap();
        let gap = b.spectral_gap_eigenvalue().unwrap() - n as f64 / 2.0;
        assert!(gap >= 0.4, "n={n}: gap {gap}");
        assert_eq!(b.dim(), basis_dim(n, 2));
    }
}

#[test]
fn eigenvalue_formula_by_block() {
    for n in 1..3 {
        let b = Basis::build(n, 4).unwrap();
        for block in &b.blocks {
            let k = (block.p + block.q) as f64;
            let d = block.p as f64 - block.q as f64;
            let expect = (k * (k + 2.0 * n as f64) - d * d) / 4.0;
            assert!((block.eigenvalue - expect).abs() < 1e-12);
            for i in block.start..block.start + block.len {
                assert_eq!(b.eigenvalues[i], block.eigenvalue);
            }
        }
    }
}

#[test]
fn gram_matrix_is_identity() {
    for (n, degree) in [(1, 8), (2, 4), (3, 2)] {
        let b = Basis::build(n, degree).unwrap();
        assert!(
            b.gram_defect() < 1e-10,
            "n={n} J={degree}: {}",
            b.gram_defect()
        );
    }
}

#[test]
fn weights_sum_to_volume() {
    for n in 1..4 {
        let b = Basis::build(n, 2).unwrap();
        let total: f64 = b.weights.iter().sum();
        assert!((total - sphere_volume(n)).abs() < 1e-10 * total);
        // Closed form 4π^{n+1}/n! for the contact volume.
        let factorial: f64 = (1..=n).map(|k| k as f64).product();
        let closed = 4.0 * std::f64::consts::PI.powi(n as i32 + 1) / factorial;
        assert!((total - closed).abs() < 1e-9 * closed);
    }
}

#[test]
fn sphere_moments() {
    // ∫|x^α|² dV = Vol α! n!/(n+|α|)!
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    for (n, degree) in [(1, 6), (2, 4)] {
        let basis = Basis::build(n, degree).unwrap();
        let vol = sphere_volume(n);
        for a in all_exponents(n + 1, degree / 2) {
            let vals = node_values(&basis, |x| monomial(x, &a, &[0; 3][..n + 1]).norm_sqr());
            let got = basis.integrate_values(&vals);
            let s: usize = a.iter().sum();
            let expect = vol * a.iter().map(|&k| fact(k)).product::<f64>() * fact(n) / fact(n + s);
            assert!(
                (got - expect).abs() < 1e-12 * vol,
                "n={n} a={a:?}: {got} vs {expect}"
            );
        }
    }
}

#[test]
fn analyze_synthesize_round_trip_and_parseval() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (n, degree) in [(1, 6), (2, 3)] {
        let basis = Arc::new(Basis::build(n, degree).unwrap());
        let coeffs: Vec<f64> = (0..basis.dim())
            .map(|_| rng.random::<f64>() - 0.5)
            .collect();
        let u = Field::from_coeffs(basis.clone(), coeffs.clone());
        let back = Field::analyze(basis.clone(), u.values());
        for (a, b) in back.coeffs().iter().zip(&coeffs) {
            assert!((a - b).abs() < 1e-12);
        }
        let sq: Vec<f64> = u.values().iter().map(|v| v * v).collect();
        let l2 = basis.integrate_values(&sq);
        let parseval: f64 = coeffs.iter().map(|c| c * c).sum();
        assert!((l2 - parseval).abs() < 1e-10 * parseval);
        let x = basis.node(3).to_vec();
        assert!((u.eval_at(&x) - u.values()[3]).abs() < 1e-12);
    }
}

#[test]
fn constant_has_volume_root_coefficient() {
    let basis = Arc::new(Basis::build(2, 2).unwrap());
    let one = Field::constant(basis.clone(), 1.0);
    assert!((one.coeffs()[0] - sphere_volume(2).sqrt()).abs() < 1e-12);
    assert!(one.coeffs()[1..].iter().all(|c| *c == 0.0));
    assert!((one.integrate() - sphere_volume(2)).abs() < 1e-10);
}

#[test]
fn integration_by_parts_and_carre_du_champ() {
    for (n, degree) in [(1, 6), (2, 4)] {
        let basis = Arc::new(Basis::build(n, degree).unwrap());
        for seed in 0..3 {
            let u = random_factor(&basis, 0.5, degree / 2, seed);
            let grad = u.horizontal_grad_sq();
            let lap = u.sub_laplacian();
            let lhs = grad.integrate();
            let rhs = -u.inner(&lap);
            assert!(
                (lhs - rhs).abs() < 1e-9 * rhs.abs().max(1e-3),
                "n={n}: {lhs} vs {rhs}"
            );
            // |∇u|² = ½Δ(u²) − uΔu pointwise, exact because u² stays in the band.
            let sq: Vec<f64> = u.values().iter().map(|v| v * v).collect();
            let half_lap = Field::analyze(basis.clone(), &sq).sub_laplacian();
            for k in 0..basis.node_count() {
                let expect = 0.5 * half_lap.values()[k] - u.values()[k] * lap.values()[k];
                assert!((grad.values()[k] - expect).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn rayleigh_quotient_of_coordinates() {
    for n in 1..3 {
        let basis = Arc::new(Basis::build(n, 2).unwrap());
        let vals = node_values(&basis, |x| x[n].re + 0.3 * x[0].im);
        let u = Field::analyze(basis.clone(), &vals);
        let q = u.horizontal_grad_sq().integrate() / u.inner(&u);
        assert!((q - n as f64 / 2.0).abs() < 1e-10);
    }
}

#[test]
fn spectral_integral_matches_heisenberg_transport() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 1..3 {
        let basis = Arc::new(Basis::build(n, 4).unwrap());
        for _ in 0..3 {
            let coeffs: Vec<f64> = (0..basis.dim())
                .map(|i| {
                    if i == 0 {
                        2.0
                    } else {
                        0.3 * (rng.random::<f64>() - 0.5)
                    }
                })
                .collect();
            let g = Field::from_coeffs(basis.clone(), coeffs);
            let spectral = g.integrate();
            let transported = heisenberg_integral_pointwise(
                n,
                |h| g.eval_at(&cayley_inverse(h).x) * volume_density(h, n),
                4,
                1e-10,
            )
            .unwrap()
            .value;
            assert!(
                (spectral - transported).abs() < 1e-6 * spectral.abs(),
                "n={n}: {spectral} vs {transported}"
            );
        }
    }
}

#[test]
fn budget_is_enforced() {
    assert!(Basis::build_with_budget(2, 6, 1000).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sub_laplacian_is_nonpositive(seed in 0u64..10_000) {
        let basis = Arc::new(Basis::build(1, 4).unwrap());
        let u = random_factor(&basis, 0.5, 4, seed);
        prop_assert!(u.inner(&u.sub_laplacian()) <= 1e-12);
    }

    #[test]
    fn integral_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        let basis = Arc::new(Basis::build(1, 3).unwrap());
        let u = random_factor(&basis, 0.5, 3, seed);
        let v = random_factor(&basis, 0.5, 3, seed + 1);
        let w = u.scale(a).axpy(b, &v);
        let lhs = w.integrate();
        let rhs = a * u.integrate() + b * v.integrate();
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
    }
}
