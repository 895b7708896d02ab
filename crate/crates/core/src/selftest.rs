//! Named invariant checks run by the `selftest` command.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constants::{constant, ConstantName};
use crate::flow::{energy, energy_quadrature, webster_curvature, Flow, FlowOptions};
use crate::geometry::{
    cayley_forward, cayley_inverse, delta, dilate, HeisenbergPoint, SpherePoint,
};
use crate::morse::{degree_sum_of_counts, solve_k};
use crate::scenario::{field_of_f, random_factor, FSpec};
use crate::spectral::{Basis, Field};

/// Fault injection for the negative controls.
#[derive(Clone, Debug)]
pub struct SelfTestOptions {
    /// Perturbs one degree-one eigenvalue before the eigen anchor runs.
    pub corrupt_eigenvalues: bool,
    /// Step size of the monotonicity smoke run; it is also the smallest step allowed.
    pub monotonicity_dt: f64,
    pub monotonicity_slack: f64,
}

impl Default for SelfTestOptions {
    fn default() -> Self {
        Self {
            corrupt_eigenvalues: false,
            monotonicity_dt: 0.05,
            monotonicity_slack: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn(&SelfTestOptions) -> std::result::Result<String, String>;

pub const CHECKS: [(&str, Check); 8] = [
    ("cayley-roundtrip", cayley_roundtrip),
    ("heisenberg-group-laws", group_laws),
    ("eigen-anchor", eigen_anchor),
    ("gram-orthonormality", gram_orthonormality),
    ("stationary-state", stationary_state),
    ("energy-identity", energy_identity),
    ("Ef-monotonicity", ef_monotonicity),
    ("constants-positivity", constants_positivity),
];

pub fn run_selftest(opts: &SelfTestOptions) -> Vec<CheckResult> {
    let mut out: Vec<CheckResult> = CHECKS
        .iter()
        .map(|(name, check)| {
            let t = Instant::now();
            let r = check(opts);
            CheckResult {
                name,
                passed: r.is_ok(),
                detail: r.unwrap_or_else(|e| e),
                seconds: t.elapsed().as_secs_f64(),
            }
        })
        .collect();
    let t = Instant::now();
    let r = morse_identity();
    out.push(CheckResult {
        name: "morse-identity",
        passed: r.is_ok(),
        detail: r.unwrap_or_else(|e| e),
        seconds: t.elapsed().as_secs_f64(),
    });
    out
}

fn cayley_roundtrip(_: &SelfTestOptions) -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        for _ in 0..200 {
            let x = SpherePoint::random(n, &mut rng);
            let h = cayley_forward(&x).map_err(|e| e.to_string())?;
            worst = worst.max(cayley_inverse(&h).distance(&x));
        }
    }
    if worst <= 1e-10 {
        Ok(format!("max error {worst:.2e}"))
    } else {
        Err(format!("round trip error {worst:.2e} > 1e-10"))
    }
}

fn heis_dist(a: &HeisenbergPoint, b: &HeisenbergPoint) -> f64 {
    let dz: f64 = a.z.iter().zip(&b.z).map(|(p, q)| (p - q).norm_sqr()).sum();
    (dz + (a.tau - b.tau).powi(2)).sqrt()
}

fn group_laws(_: &SelfTestOptions) -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    let e = |e: crate::Error| e.to_string();
    for _ in 0..200 {
        let a = HeisenbergPoint::random(2, 1.0, &mut rng);
        let b = HeisenbergPoint::random(2, 1.0, &mut rng);
        let c = HeisenbergPoint::random(2, 1.0, &mut rng);
        worst = worst.max(heis_dist(&a.mul(&b).mul(&c), &a.mul(&b.mul(&c))));
        worst = worst.max(heis_dist(&a.mul(&a.inverse()), &HeisenbergPoint::origin(2)));
        let (s, t) = (0.7, 1.9);
        worst = worst.max(heis_dist(
            &dilate(&dilate(&a, s).map_err(e)?, t).map_err(e)?,
            &dilate(&a, s * t).map_err(e)?,
        ));
        let lhs = dilate(&a.mul(&b), s).map_err(e)?;
        let rhs = dilate(&a, s).map_err(e)?.mul(&dilate(&b, s).map_err(e)?);
        worst = worst.max(heis_dist(&lhs, &rhs));
        let d = delta(&a, &b, s).map_err(e)?;
        let twist: f64 = b.z.iter().zip(&a.z).map(|(p, q)| (p * q.conj()).im).sum();
        let explicit = HeisenbergPoint {
            z: a.z.iter().zip(&b.z).map(|(p, q)| p * s + q).collect(),
            tau: s * s * a.tau + b.tau + 2.0 * s * twist,
        };
        worst = worst.max(heis_dist(&d, &explicit));
    }
    if worst <= 1e-10 {
        Ok(format!("max error {worst:.2e}"))
    } else {
        Err(format!("group law defect {worst:.2e} > 1e-10"))
    }
}

fn eigen_anchor(opts: &SelfTestOptions) -> std::result::Result<String, String> {
    let mut worst: f64 = 0.0;
    for n in 1..=2 {
        let mut basis = Basis::build(n, 2).map_err(|e| e.to_string())?;
        if opts.corrupt_eigenvalues {
            let i = basis
                .blocks
                .iter()
                .find(|b| b.p + b.q == 1)
                .map(|b| b.start)
                .unwrap_or(1);
            basis.eigenvalues[i] *= 1.01;
        }
        let basis = Arc::new(basis);
        for j in 0..=n {
            for part in [false, true] {
                let vals: Vec<f64> = (0..basis.node_count())
                    .map(|k| {
                        let x = basis.node(k)[j];
                        if part {
                            x.im
                        } else {
                            x.re
                        }
                    })
                    .collect();
                let lap = Field::analyze(basis.clone(), &vals).sub_laplacian();
                let half = n as f64 / 2.0;
                for (l, v) in lap.values().iter().zip(&vals) {
                    worst = worst.max((l + half * v).abs());
                }
            }
        }
    }
    if worst <= 1e-10 {
        Ok(format!("max |Δx + (n/2)x| = {worst:.2e}"))
    } else {
        Err(format!("Δx_i differs from -(n/2)x_i by {worst:.2e}"))
    }
}

fn gram_orthonormality(_: &SelfTestOptions) -> std::result::Result<String, String> {
    let mut worst: f64 = 0.0;
    for (n, j) in [(1, 6), (2, 3)] {
        let b = Basis::build(n, j).map_err(|e| e.to_string())?;
        worst = worst.max(b.gram_defect());
    }
    if worst <= 1e-10 {
        Ok(format!("max Gram defect {worst:.2e}"))
    } else {
        Err(format!("Gram defect {worst:.2e} > 1e-10"))
    }
}

fn stationary_state(_: &SelfTestOptions) -> std::result::Result<String, String> {
    let basis = Arc::new(Basis::build(1, 4).map_err(|e| e.to_string())?);
    let f = field_of_f(&basis, &FSpec::Constant { value: 2.0 }, 1.0).map_err(|e| e.to_string())?;
    let u = Field::constant(basis.clone(), 1.0);
    let r = webster_curvature(&u).map_err(|e| e.to_string())?;
    let r_err = r
        .values()
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    let flow = Flow::new(
        f,
        FlowOptions {
            track_centering: false,
            ..FlowOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mut state = flow.initial_state(&u).map_err(|e| e.to_string())?;
    for _ in 0..20 {
        state = flow.step(&state).map_err(|e| e.to_string())?.state;
    }
    let drift = state
        .u
        .values()
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    if r_err <= 1e-12 && drift <= 1e-12 {
        Ok(format!(
            "|R - 1| = {r_err:.1e}, drift after 20 steps {drift:.1e}"
        ))
    } else {
        Err(format!("|R - 1| = {r_err:.1e}, drift {drift:.1e}"))
    }
}

fn energy_identity(_: &SelfTestOptions) -> std::result::Result<String, String> {
    let basis = Arc::new(Basis::build(1, 6).map_err(|e| e.to_string())?);
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let u = random_factor(&basis, 0.4, 3, seed);
        let eq = energy_quadrature(&u).map_err(|e| e.to_string())?;
        worst = worst.max((energy(&u) - eq).abs() / eq.abs());
    }
    if worst <= 1e-9 {
        Ok(format!("max relative discrepancy {worst:.2e}"))
    } else {
        Err(format!(
            "spectral and quadrature energies differ by {worst:.2e}"
        ))
    }
}

fn ef_monotonicity(opts: &SelfTestOptions) -> std::result::Result<String, String> {
    let basis = Arc::new(Basis::build(1, 6).map_err(|e| e.to_string())?);
    let f = field_of_f(
        &basis,
        &FSpec::TwoPeak {
            amplitude: 0.2,
            ratio: 0.5,
        },
        1.0,
    )
    .map_err(|e| e.to_string())?;
    let flow = Flow::new(
        f,
        FlowOptions {
            dt_init: opts.monotonicity_dt,
            dt_min: opts.monotonicity_dt,
            monotonicity_slack: opts.monotonicity_slack,
            track_centering: false,
            ..FlowOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mut state = flow
        .initial_state(&random_factor(&basis, 0.3, 2, 3))
        .map_err(|e| e.to_string())?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..40 {
        let out = flow.step(&state).map_err(|e| e.to_string())?;
        worst = worst.max(out.energy_increase);
        state = out.state;
    }
    if worst <= opts.monotonicity_slack {
        Ok(format!("max ΔE_f over 40 steps {worst:.2e}"))
    } else {
        Err(format!("ΔE_f = {worst:.2e} exceeds slack"))
    }
}

fn constants_positivity(_: &SelfTestOptions) -> std::result::Result<String, String> {
    let mut values = Vec::new();
    for n in 1..=2 {
        for name in ConstantName::ALL {
            let c = constant(name, n, 0).map_err(|e| e.to_string())?;
            if !c.positive() {
                return Err(format!("{name} for n = {n} is {}", c.value));
            }
            values.push(c.value);
        }
    }
    Ok(format!("{} constants positive", values.len()))
}

/// Solvable k-systems must have degree sum −1, over all m with entries ≤ 3 for n = 1.
fn morse_identity() -> std::result::Result<String, String> {
    let len = 4;
    let mut solvable = 0;
    for code in 0..4usize.pow(len as u32) {
        let m: Vec<i64> = (0..len)
            .map(|i| ((code / 4usize.pow(i as u32)) % 4) as i64)
            .collect();
        if solve_k(&m, 1).is_some() {
            solvable += 1;
            let ds = degree_sum_of_counts(&m);
            if ds != -1 {
                return Err(format!("m = {m:?} is solvable but the degree sum is {ds}"));
            }
        }
    }
    Ok(format!(
        "{solvable} solvable count vectors, all with degree sum -1"
    ))
}
