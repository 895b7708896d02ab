//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criterion 9 is exploratory; its outcome is printed but never fails the target.
//! `CRFLOW_CONCENTRATION_SECONDS` sets the wall-clock cap per concentration run (default 60).

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crflow_core::bubble::Pullback;
use crflow_core::constants::{constant, monte_carlo, ConstantName};
use crflow_core::flow::{
    energy, energy_f, standard_curvature, webster_curvature, Flow, FlowOptions, Termination,
};
use crflow_core::geometry::{
    cayley_forward, cayley_inverse, delta, dilate, translate, CRAutomorphism, HeisenbergPoint,
    SpherePoint, C64,
};
use crflow_core::morse::{
    degree_sum_of_counts, morse_data_from_field, sbc_check, solve_k, theorem_gate, CriticalPoint,
    FinderOptions, MorseData,
};
use crflow_core::normalization::dilation_shadow_integral;
use crflow_core::quadrature::sphere_volume;
use crflow_core::scenario::{
    field_of_f, initial_factor, random_factor, FSpec, ScenarioConfig, U0Spec,
};
use crflow_core::spectral::{sample, Basis, Field, SphereFunction};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn hdist(a: &HeisenbergPoint, b: &HeisenbergPoint) -> f64 {
    let dz: f64 = a.z.iter().zip(&b.z).map(|(p, q)| (p - q).norm_sqr()).sum();
    (dz + (a.tau - b.tau).powi(2)).sqrt()
}

fn geometry_suite() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = [0.0f64; 4];
    for i in 0..1000 {
        let n = 1 + i % 3;
        let x = SpherePoint::random(n, &mut rng);
        worst[0] = worst[0]
            .max(cayley_inverse(&cayley_forward(&x).map_err(|e| e.to_string())?).distance(&x));
        let h = HeisenbergPoint::random(n, 1.0, &mut rng);
        let back = cayley_forward(&cayley_inverse(&h)).map_err(|e| e.to_string())?;
        worst[0] = worst[0].max(hdist(&back, &h));

        let a = HeisenbergPoint::random(n, 1.0, &mut rng);
        let b = HeisenbergPoint::random(n, 1.0, &mut rng);
        let (s, r) = (rng.random_range(0.2..3.0), rng.random_range(0.2..3.0));
        let dd = dilate(&dilate(&a, s).unwrap(), r).unwrap();
        worst[1] = worst[1].max(hdist(&dd, &dilate(&a, s * r).unwrap()));
        let tt = translate(&translate(&a, &b), &h);
        worst[2] = worst[2].max(hdist(&tt, &translate(&a, &h.mul(&b))));

        let d = delta(&a, &b, s).unwrap();
        let twist: f64 = b.z.iter().zip(&a.z).map(|(q, z)| (q * z.conj()).im).sum();
        let explicit = HeisenbergPoint {
            z: a.z.iter().zip(&b.z).map(|(z, q)| z * s + q).collect(),
            tau: s * s * a.tau + b.tau + 2.0 * s * twist,
        };
        worst[3] = worst[3].max(hdist(&d, &explicit));
    }
    let secs = t.elapsed().as_secs_f64();
    let max = worst.iter().copied().fold(0.0, f64::max);
    check(
        max <= 1e-10 && secs < 5.0,
        format!(
            "round trip {:.1e}, dilations {:.1e}, translations {:.1e}, delta {:.1e}; {secs:.2} s",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn eigen_anchor() -> Outcome {
    let t = Instant::now();
    let mut anchor: f64 = 0.0;
    let mut gram: f64 = 0.0;
    for n in 1..=2 {
        let basis =
            Arc::new(Basis::build(n, if n == 1 { 8 } else { 4 }).map_err(|e| e.to_string())?);
        gram = gram.max(basis.gram_defect());
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
                for (l, v) in lap.values().iter().zip(&vals) {
                    anchor = anchor.max((l + n as f64 / 2.0 * v).abs());
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        anchor <= 1e-10 && gram <= 1e-10 && secs < 30.0,
        format!("max |Δx + (n/2)x| {anchor:.1e}, Gram defect {gram:.1e}; {secs:.2} s"),
    )
}

fn stationary_state() -> Outcome {
    let mut worst_r: f64 = 0.0;
    let mut worst_f2: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for n in 1..=2 {
        let basis = Arc::new(Basis::build(n, 3).map_err(|e| e.to_string())?);
        let one = Field::constant(basis.clone(), 1.0);
        let r0 = standard_curvature(n);
        let r = webster_curvature(&one).map_err(|e| e.to_string())?;
        worst_r = worst_r.max(
            r.values()
                .iter()
                .map(|v| (v - r0).abs())
                .fold(0.0, f64::max),
        );
        let opts = FlowOptions {
            track_centering: false,
            ..FlowOptions::default()
        };
        let flow =
            Flow::new(Field::constant(basis.clone(), 1.7), opts).map_err(|e| e.to_string())?;
        // Relative RMS of the defect αf − R over the sphere.
        let f2 = flow.f2(&one).map_err(|e| e.to_string())?;
        worst_f2 = worst_f2.max((f2 / basis.volume).sqrt() / r0);
        let mut state = flow.initial_state(&one).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            state = flow.step(&state).map_err(|e| e.to_string())?.state;
        }
        drift = drift.max(
            state
                .u
                .values()
                .iter()
                .map(|v| (v - 1.0).abs())
                .fold(0.0, f64::max),
        );
    }
    check(
        worst_r <= 1e-12 && worst_f2 <= 1e-12 && drift <= 1e-12,
        format!("max |R − R0| {worst_r:.1e}, relative RMS of αf − R {worst_f2:.1e}, drift after 100 steps {drift:.1e}"),
    )
}

fn energy_monotonicity() -> Outcome {
    let t = Instant::now();
    let basis = Arc::new(Basis::build(1, 6).map_err(|e| e.to_string())?);
    let spec = FSpec::TwoPeak {
        amplitude: 0.2,
        ratio: 0.5,
    };
    let f = field_of_f(&basis, &spec, 1.0).map_err(|e| e.to_string())?;
    let sbc = sbc_check(f.max(), f.min(), 1).map_err(|e| e.to_string())?;
    let flow = Flow::new(
        f,
        FlowOptions {
            track_centering: false,
            ..FlowOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mut worst = f64::NEG_INFINITY;
    let mut steps = 0;
    for seed in 0..20 {
        let u0 = random_factor(&basis, 0.4, 3, 1000 + seed);
        let mut state = flow.initial_state(&u0).map_err(|e| e.to_string())?;
        for _ in 0..60 {
            let out = flow.step(&state).map_err(|e| e.to_string())?;
            worst = worst.max(out.energy_increase);
            steps += 1;
            state = out.state;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        sbc && worst <= 1e-10 && secs < 180.0,
        format!("sbc {sbc}, max ΔE_f over {steps} accepted steps {worst:.2e}; {secs:.1} s"),
    )
}

struct Composed<'a> {
    f: &'a Field,
    phi: &'a CRAutomorphism,
}

impl SphereFunction for Composed<'_> {
    fn n(&self) -> usize {
        self.f.n()
    }
    fn eval(&self, x: &[C64]) -> f64 {
        match self.phi.apply(&SpherePoint { x: x.to_vec() }) {
            Ok(y) => self.f.eval_at(&y.x),
            Err(_) => f64::NAN,
        }
    }
}

/// Worst relative gap |E_f(u) − E_{f∘φ}(v)|/E_f(u) over random pairs at one degree.
fn conformal_gap(degree: usize, pairs: usize) -> Result<f64, String> {
    let basis = Arc::new(Basis::build(1, degree).map_err(|e| e.to_string())?);
    let f =
        field_of_f(&basis, &FSpec::Dipole { amplitude: 0.2 }, 1.0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    for i in 0..pairs {
        let u = random_factor(&basis, 0.2, 2, 50 + i as u64);
        let pole = SpherePoint::random(1, &mut rng);
        let r = rng.random_range(-0.15f64..0.15).exp();
        let phi = CRAutomorphism::with_pole(&pole, HeisenbergPoint::random(1, 0.05, &mut rng), r)
            .map_err(|e| e.to_string())?;
        let v = Field::analyze(
            basis.clone(),
            &sample(&basis, &Pullback { u: &u, phi: &phi }),
        );
        let fphi = sample(&basis, &Composed { f: &f, phi: &phi });
        let lhs = energy_f(&u, &f).map_err(|e| e.to_string())?;
        let denom: Vec<f64> = fphi
            .iter()
            .zip(v.values())
            .map(|(f, v)| f * v.powi(4))
            .collect();
        let rhs = energy(&v) / basis.integrate_values(&denom).sqrt();
        worst = worst.max((lhs - rhs).abs() / lhs);
    }
    Ok(worst)
}

fn conformal_invariance() -> Outcome {
    let fine = conformal_gap(8, 10)?;
    let coarse = conformal_gap(6, 10)?;
    check(
        fine <= 1e-4 && coarse <= 1e-3,
        format!("max relative gap {fine:.2e} at J = 8, {coarse:.2e} at J = 6"),
    )
}

fn kazdan_warner() -> Outcome {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/constant.json");
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let cfg = ScenarioConfig::from_json(&text).map_err(|e| e.to_string())?;
    let sc = cfg.prepare().map_err(|e| e.to_string())?;
    let flow = Flow::new(sc.f.clone(), sc.options.clone()).map_err(|e| e.to_string())?;
    let run = flow.run(&sc.u0, |_| {}).map_err(|e| e.to_string())?;
    let d = &run.records.last().unwrap().diagnostics;
    let bound = 1e-6 * sc.f.max().abs().max(sc.f.min().abs()) * sc.basis.volume;
    check(
        run.status == Termination::Converged && d.kw_residual <= bound,
        format!(
            "status {:?}, kw_residual {:.2e} (bound {bound:.2e}), F2 {:.1e}",
            run.status, d.kw_residual, d.f2
        ),
    )
}

fn constants_suite() -> Outcome {
    let t = Instant::now();
    let mut worst_z: f64 = 0.0;
    let mut worst_refine: f64 = 0.0;
    let mut min_value = f64::INFINITY;
    let mut a2 = 0.0;
    let mut a5 = 0.0;
    for n in 1..=4 {
        for name in ConstantName::ALL {
            let c0 = constant(name, n, 0).map_err(|e| e.to_string())?;
            let c1 = constant(name, n, 1).map_err(|e| e.to_string())?;
            min_value = min_value.min(c0.value).min(c1.value);
            worst_refine = worst_refine.max((c0.value - c1.value).abs() / c1.value.abs());
            let mc = monte_carlo(n, name.integrand(n), 400_000, 7 * n as u64 + name as u64);
            worst_z = worst_z.max((mc.value - c1.value).abs() / mc.std_error);
            if n == 2 && name == ConstantName::A2 {
                a2 = c1.value;
            }
            if n == 2 && name == ConstantName::A5 {
                a5 = c1.value;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        min_value > 0.0 && worst_z < 3.0 && worst_refine <= 1e-6 && secs < 120.0,
        format!(
            "min value {min_value:.3e}, A2(n=2) {a2:.6e}, A5(n=2) {a5:.6e}, max |z| vs MC {worst_z:.2}, \
             refinement {worst_refine:.1e}; {secs:.1} s"
        ),
    )
}

fn shadow_asymptotics() -> Outcome {
    let n = 2;
    let vol = sphere_volume(n);
    let a3 = constant(ConstantName::A3, n, 2)
        .map_err(|e| e.to_string())?
        .value;
    let target = 4.0 * vol * a3;
    let mut ratios = Vec::new();
    for eps in [0.2, 0.1, 0.05] {
        let i = dilation_shadow_integral(n, eps, 1e-11).map_err(|e| e.to_string())?;
        let theta = vol - 2.0 * eps * eps * i;
        ratios.push((vol * vol - theta * theta) / (eps * eps));
    }
    let gaps: Vec<f64> = ratios.iter().map(|r| (r - target).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let rel = gaps[2] / target;
    check(
        monotone && rel <= 0.05,
        format!(
            "ratios {:.6}, {:.6}, {:.6} toward 4·Vol·A3 = {target:.6}; final gap {:.2}%",
            ratios[0],
            ratios[1],
            ratios[2],
            100.0 * rel
        ),
    )
}

struct ConcentrationRun {
    seed: u64,
    status: Termination,
    steps: usize,
    eps: f64,
    max_u: f64,
    mass: f64,
    laplacian_f: f64,
    gradient: f64,
}

fn concentration_behavior() -> Outcome {
    let cap: f64 = std::env::var("CRFLOW_CONCENTRATION_SECONDS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(60.0f64)
        .min(600.0);
    let basis = Arc::new(Basis::build(1, 8).map_err(|e| e.to_string())?);
    let spec = FSpec::TiltedTwoPeak {
        amplitude: 0.2,
        saddle: 0.5,
        low: 0.1,
        tilt: 0.05,
    };
    let f = field_of_f(&basis, &spec, 1.0).map_err(|e| e.to_string())?;
    let finder = FinderOptions {
        max_seeds: basis.node_count(),
        ..FinderOptions::default()
    };
    let data = morse_data_from_field(&f, &finder).map_err(|e| e.to_string())?;
    let gate = theorem_gate(&data).map_err(|e| e.to_string())?;
    if gate.hypotheses_satisfied || gate.k.is_none() {
        return Err(format!(
            "f does not sit in the solvable direction: m = {:?}",
            gate.m
        ));
    }
    let opts = FlowOptions {
        t_max: 1e6,
        max_wall_seconds: Some(cap),
        record_every: 200,
        ..FlowOptions::default()
    };
    let flow = Flow::new(f, opts).map_err(|e| e.to_string())?;
    let runs: Vec<Result<ConcentrationRun, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = (1..=5u64)
            .map(|seed| {
                let flow = &flow;
                let basis = &basis;
                s.spawn(move || {
                    let u0 = initial_factor(
                        basis,
                        &U0Spec::Random {
                            amplitude: 0.3,
                            max_degree: 2,
                        },
                        seed,
                    )
                    .map_err(|e| e.to_string())?;
                    let run = flow.run(&u0, |_| {}).map_err(|e| e.to_string())?;
                    let d = &run.records.last().unwrap().diagnostics;
                    let x = d
                        .centering
                        .as_ref()
                        .map(|c| c.theta_hat.clone())
                        .unwrap_or_else(|| d.p_hat.clone());
                    let report = run
                        .shadow_report
                        .clone()
                        .unwrap_or_else(|| crflow_core::flow::point_report(flow.f(), &x));
                    Ok(ConcentrationRun {
                        seed,
                        status: run.status,
                        steps: run.accepted_steps,
                        eps: d.centering.as_ref().map(|c| c.eps).unwrap_or(f64::NAN),
                        max_u: d.max_u,
                        mass: d.mass_concentration,
                        laplacian_f: report.laplacian_f,
                        gradient: report.f_gradient_norm,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut lines = Vec::new();
    let mut success = false;
    for r in runs {
        let r = r?;
        let hit =
            r.status == Termination::Concentrated && r.laplacian_f <= 0.0 && r.gradient < 0.05;
        success |= hit;
        lines.push(format!(
            "seed {} {:?} after {} steps: eps {:.3}, max_u {:.2}, mass {:.2}, Δf(Θ̂) {:+.3e}, |f′(Θ̂)| {:.3e}",
            r.seed, r.status, r.steps, r.eps, r.max_u, r.mass, r.laplacian_f, r.gradient
        ));
    }
    let detail = format!(
        "m = {:?}, cap {cap} s per run\n      {}",
        gate.m,
        lines.join("\n      ")
    );
    check(success, detail)
}

fn morse_gate() -> Outcome {
    let mut solvable = 0;
    for n in 1..=2 {
        let len = 2 * n + 2;
        for code in 0..4usize.pow(len as u32) {
            let m: Vec<i64> = (0..len)
                .map(|i| ((code / 4usize.pow(i as u32)) % 4) as i64)
                .collect();
            if solve_k(&m, n).is_some() {
                solvable += 1;
                if degree_sum_of_counts(&m) != -1 {
                    return Err(format!(
                        "m = {m:?} solvable with degree sum {}",
                        degree_sum_of_counts(&m)
                    ));
                }
            }
        }
    }
    let cp = |index| CriticalPoint {
        index,
        laplacian_sign: -1,
        f_value: 1.0,
        location: None,
    };
    let mut examples = true;
    for n in 1..=2 {
        let top = 2 * n + 1;
        let single = MorseData {
            n,
            critical_points: vec![cp(top)],
            f_max: 1.0,
            f_min: 1.0,
        };
        let double = MorseData {
            critical_points: vec![cp(top), cp(top)],
            ..single.clone()
        };
        let s = theorem_gate(&single).map_err(|e| e.to_string())?;
        let d = theorem_gate(&double).map_err(|e| e.to_string())?;
        examples &=
            s.k.is_some() && !s.hypotheses_satisfied && d.k.is_none() && d.hypotheses_satisfied;
    }
    let thresholds = !sbc_check(2.0, 1.0, 1).unwrap()
        && sbc_check(2.0 - 1e-12, 1.0, 1).unwrap()
        && !sbc_check(2f64.sqrt(), 1.0, 2).unwrap()
        && sbc_check(2f64.sqrt() * (1.0 - 1e-12), 1.0, 2).unwrap()
        && sbc_check(1.9, 1.0, 1).unwrap()
        && !sbc_check(1.5, 1.0, 2).unwrap();
    check(
        examples && thresholds,
        format!("{solvable} solvable count vectors all with degree sum −1; examples {examples}; sbc thresholds {thresholds}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, bool); 10] = [
        ("geometry suite", geometry_suite, true),
        ("eigen anchor and Gram", eigen_anchor, true),
        ("stationary Yamabe state", stationary_state, true),
        ("energy monotonicity", energy_monotonicity, true),
        ("conformal invariance", conformal_invariance, true),
        ("Kazdan-Warner residual", kazdan_warner, true),
        ("bubble constants", constants_suite, true),
        ("shadow asymptotics", shadow_asymptotics, true),
        (
            "concentration behavior (exploratory)",
            concentration_behavior,
            false,
        ),
        ("Morse gate", morse_gate, true),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run, required)) in criteria.iter().enumerate() {
        let label = format!("criterion {}: {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {label} [{secs:.1} s] {d}"),
            Err(d) => {
                let tag = if *required {
                    "FAIL"
                } else {
                    "FAIL (exploratory, not counted)"
                };
                println!("{tag} {label} [{secs:.1} s] {d}");
                if *required {
                    failed += 1;
                }
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} required criteria failed");
        ExitCode::FAILURE
    }
}
