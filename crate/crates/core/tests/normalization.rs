use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crflow_core::bubble::{bubble, BubbleProfile, Pullback, DEFAULT_BUBBLE_TOLERANCE};
use crflow_core::geometry::{
    norm_sq, rotation_to, CRAutomorphism, HeisenbergPoint, SpherePoint, C64,
};
use crflow_core::normalization::{
    center_of_mass, find_centering, shadow, shadow_of, shadow_quadrature, CenteringOptions,
};
use crflow_core::quadrature::sphere_volume;
use crflow_core::scenario::random_factor;
use crflow_core::spectral::{sample, Basis, Field, SphereFunction};

fn vdist(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[test]
fn constant_factor_is_already_centered() {
    for n in 1..3 {
        let basis = Arc::new(Basis::build(n, 3).unwrap());
        let one = Field::constant(basis.clone(), 1.0);
        let (p, hat) = center_of_mass(&one);
        assert!(norm_sq(&p).sqrt() < 1e-12 && norm_sq(&hat).sqrt() < 1e-12);
        let c = find_centering(&one, basis.clone(), &CenteringOptions::default()).unwrap();
        assert!(c.converged && c.residual < 1e-10);
        assert!(
            (c.phi.r - 1.0).abs() < 1e-10
                && norm_sq(&c.phi.q.z) < 1e-20
                && c.phi.q.tau.abs() < 1e-10
        );
        assert!(c.v.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
        let s = shadow(&c).unwrap();
        assert!(norm_sq(&s.theta).sqrt() < 1e-10);
    }
}

#[test]
fn bubble_mass_points_at_its_center() {
    let basis = Arc::new(Basis::build(1, 8).unwrap());
    let north = SpherePoint::north(1);
    let b = bubble(&north, 0.3, basis, DEFAULT_BUBBLE_TOLERANCE).unwrap();
    let (p, hat) = center_of_mass(&b.field);
    assert!(vdist(&hat, &north.x) < 0.05);
    assert!(p[0].norm() < 1e-10 * p[1].norm().max(1.0));
}

#[test]
fn center_of_mass_is_rotation_equivariant() {
    struct Rotated<'a> {
        u: &'a Field,
        rot: DMatrix<C64>,
    }
    impl SphereFunction for Rotated<'_> {
        fn n(&self) -> usize {
            self.u.n()
        }
        fn eval(&self, x: &[C64]) -> f64 {
            // (u∘ρ⁻¹)(x)
            let y: Vec<C64> = (0..x.len())
                .map(|j| (0..x.len()).map(|i| self.rot[(i, j)].conj() * x[i]).sum())
                .collect();
            self.u.eval_at(&y)
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..3 {
        let basis = Arc::new(Basis::build(n, 3).unwrap());
        let u = random_factor(&basis, 0.4, 2, 7);
        let rot = rotation_to(&SpherePoint::random(n, &mut rng));
        let moved = Field::project_function(
            basis.clone(),
            &Rotated {
                u: &u,
                rot: rot.clone(),
            },
        );
        let (p, _) = center_of_mass(&u);
        let (q, _) = center_of_mass(&moved);
        let rp: Vec<C64> = (0..=n)
            .map(|i| (0..=n).map(|j| rot[(i, j)] * p[j]).sum())
            .collect();
        // For n ∈ {1, 2} the density x·u^{2+2/n} is a polynomial the grid integrates exactly.
        assert!(
            vdist(&rp, &q) < 1e-10 * norm_sq(&p).sqrt().max(1.0),
            "n={n}: {:.3e}",
            vdist(&rp, &q)
        );
    }
}

#[test]
fn centering_inverts_a_bubble() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let basis = Arc::new(Basis::build(1, 8).unwrap());
    for _ in 0..3 {
        let p = SpherePoint::random(1, &mut rng);
        let profile = BubbleProfile::new(p.clone(), 0.3).unwrap();
        let c = find_centering(&profile, basis.clone(), &CenteringOptions::default()).unwrap();
        assert!(c.converged, "residual {}", c.residual);
        assert!((c.phi.r - 1.0 / 0.3).abs() < 0.05 / 0.3, "r = {}", c.phi.r);
        assert!((c.eps - 0.3).abs() < 0.05 * 0.3);
        assert!(vdist(&c.phi.pole().x, &p.x) < 0.05);
        let s = shadow(&c).unwrap();
        assert!(
            vdist(&s.theta_hat, &p.x) < 0.05,
            "shadow direction off by {}",
            vdist(&s.theta_hat, &p.x)
        );
    }
}

#[test]
fn centering_is_idempotent() {
    let basis = Arc::new(Basis::build(1, 6).unwrap());
    let u = random_factor(&basis, 0.3, 2, 5);
    let first = find_centering(&u, basis.clone(), &CenteringOptions::default()).unwrap();
    assert!(first.converged);
    let second = find_centering(&first.v, basis.clone(), &CenteringOptions::default()).unwrap();
    assert!(
        second.phi.distance_from_identity() < 1e-3,
        "{}",
        second.phi.distance_from_identity()
    );
}

#[test]
fn pullback_preserves_total_measure() {
    let basis = Arc::new(Basis::build(1, 8).unwrap());
    let vol = sphere_volume(1);
    let u = random_factor(&basis, 0.3, 2, 6);
    let scale = (vol
        / basis.integrate_values(&u.values().iter().map(|v| v.powi(4)).collect::<Vec<_>>()))
    .powf(0.25);
    let u = u.scale(scale);
    let c = find_centering(&u, basis.clone(), &CenteringOptions::default()).unwrap();
    let pulled = sample(&basis, &Pullback { u: &u, phi: &c.phi });
    let total = basis.integrate_values(&pulled.iter().map(|v| v.powi(4)).collect::<Vec<_>>());
    assert!((total - vol).abs() < 1e-8 * vol, "{total} vs {vol}");
}

#[test]
fn mean_value_shadow_matches_grid_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let basis = Basis::build(1, 10).unwrap();
    for _ in 0..3 {
        let pole = SpherePoint::random(1, &mut rng);
        let phi = CRAutomorphism::with_pole(&pole, HeisenbergPoint::random(1, 0.2, &mut rng), 1.3)
            .unwrap();
        let exact = shadow_of(&phi);
        let quad = shadow_quadrature(&phi, &basis).unwrap();
        assert!(vdist(&exact.theta, &quad) < 1e-6 * sphere_volume(1));
    }
    let id = shadow_of(&CRAutomorphism::identity(2));
    assert!(norm_sq(&id.theta).sqrt() < 1e-14 && id.eps == 1.0);
}

#[test]
fn shadow_requires_convergence() {
    let basis = Arc::new(Basis::build(1, 4).unwrap());
    let u = random_factor(&basis, 0.3, 2, 1);
    let opts = CenteringOptions {
        max_iter: 0,
        tolerance: 1e-30,
        ..CenteringOptions::default()
    };
    let c = find_centering(&u, basis, &opts).unwrap();
    assert!(!c.converged);
    assert!(shadow(&c).is_err());
}
