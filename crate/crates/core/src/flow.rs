//! The Webster scalar curvature flow ∂u/∂t = (n/2)(αf − R_θ)u with volume renormalization.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{herm, norm_sq, CRAutomorphism, SpherePoint, C64};
use crate::normalization::{
    center_of_mass, find_centering_from, shadow_of, unit_or_self, volume_exponent,
    weighted_coordinates, CenteringOptions,
};
use crate::spectral::{Basis, Field, GridField};

/// R_{θ0} = n(n+1)/2.
pub fn standard_curvature(n: usize) -> f64 {
    (n * (n + 1)) as f64 / 2.0
}

/// L u = −(2+2/n)Δ_{θ0}u + R_{θ0}u, applied spectrally.
pub fn conformal_laplacian(u: &Field) -> Field {
    let n = u.n();
    let c = 2.0 + 2.0 / n as f64;
    let r0 = standard_curvature(n);
    let coeffs = u
        .coeffs()
        .iter()
        .zip(&u.basis().eigenvalues)
        .map(|(a, l)| (c * l + r0) * a)
        .collect();
    Field::from_coeffs(u.basis().clone(), coeffs)
}

fn check_positive(u: &Field) -> Result<()> {
    let min = u.min();
    if !(min > 0.0) {
        return Err(Error::NonPositiveFactor { min });
    }
    Ok(())
}

/// R_θ = u^{−(1+2/n)} L u on the grid.
pub fn webster_curvature(u: &Field) -> Result<GridField> {
    check_positive(u)?;
    let p = 1.0 + 2.0 / u.n() as f64;
    let lu = conformal_laplacian(u);
    Ok(GridField::new(
        u.basis().clone(),
        u.values()
            .par_iter()
            .zip(lu.values())
            .map(|(&v, &l)| l / v.powf(p))
            .collect(),
    ))
}

/// E(u) = Σ ((2+2/n)λ_i + R_{θ0}) c_i².
pub fn energy(u: &Field) -> f64 {
    let n = u.n();
    let c = 2.0 + 2.0 / n as f64;
    let r0 = standard_curvature(n);
    u.coeffs()
        .iter()
        .zip(&u.basis().eigenvalues)
        .map(|(a, l)| (c * l + r0) * a * a)
        .sum()
}

/// E(u) = ∫ R_θ dV_θ evaluated by grid quadrature.
pub fn energy_quadrature(u: &Field) -> Result<f64> {
    let k = volume_exponent(u.n());
    let r = webster_curvature(u)?;
    let vals: Vec<f64> = r
        .values()
        .iter()
        .zip(u.values())
        .map(|(r, v)| r * v.powf(k))
        .collect();
    Ok(u.basis().integrate_values(&vals))
}

/// ∫ f u^{2+2/n} dV (f ≡ 1 when absent).
pub fn weighted_volume(u: &Field, f: Option<&Field>) -> f64 {
    let k = volume_exponent(u.n());
    let vals: Vec<f64> = match f {
        Some(f) => u
            .values()
            .iter()
            .zip(f.values())
            .map(|(v, f)| f * v.max(0.0).powf(k))
            .collect(),
        None => u.values().iter().map(|v| v.max(0.0).powf(k)).collect(),
    };
    u.basis().integrate_values(&vals)
}

/// α = E(u) / ∫ f u^{2+2/n} dV.
pub fn alpha(u: &Field, f: &Field) -> Result<f64> {
    check_positive(u)?;
    let d = weighted_volume(u, Some(f));
    if !(d.abs() > 1e-300) {
        return Err(Error::DegenerateDenominator(d));
    }
    Ok(energy(u) / d)
}

/// E_f(u) = E(u) / (∫ f u^{2+2/n} dV)^{n/(n+1)}.
pub fn energy_f(u: &Field, f: &Field) -> Result<f64> {
    check_positive(u)?;
    let d = weighted_volume(u, Some(f));
    if !(d > 0.0) {
        return Err(Error::DegenerateDenominator(d));
    }
    let n = u.n() as f64;
    Ok(energy(u) / d.powf(n / (n + 1.0)))
}

/// (n/2)(αf − R_θ)u, evaluated on the grid and projected.
pub fn flow_rhs(u: &Field, f: &Field) -> Result<Field> {
    let r = webster_curvature(u)?;
    let a = alpha(u, f)?;
    let half_n = u.n() as f64 / 2.0;
    let vals: Vec<f64> = r
        .values()
        .par_iter()
        .zip(f.values())
        .zip(u.values())
        .map(|((r, f), v)| half_n * (a * f - r) * v)
        .collect();
    Ok(Field::analyze(u.basis().clone(), &vals))
}

/// σu with σ chosen so that ∫(σu)^{2+2/n} dV = Vol.
pub fn renormalize(u: &Field) -> Field {
    let n = u.n() as f64;
    let vol = u.basis().volume;
    let sigma = (vol / weighted_volume(u, None)).powf(n / (2.0 * n + 2.0));
    u.scale(sigma)
}

/// The energy threshold β = (1+ε0) Y (min f)^{−n/(n+1)} of the initial-data gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaThreshold {
    pub beta: f64,
    pub eps0: f64,
    /// Y = E(1)/Vol^{n/(n+1)}, the CR Yamabe constant of θ0.
    pub yamabe: f64,
    pub ratio: f64,
}

pub fn beta_threshold(n: usize, vol: f64, f_max: f64, f_min: f64) -> Result<BetaThreshold> {
    if !(f_min > 0.0) {
        return Err(Error::NonPositiveMin(f_min));
    }
    let nf = n as f64;
    let ratio = f_max / f_min;
    let rho = ratio.powf(nf / (nf + 1.0)) / 2f64.powf(1.0 / (nf + 1.0));
    let eps0 = (1.0 - rho) / (1.0 + rho);
    let yamabe = standard_curvature(n) * vol.powf(1.0 / (nf + 1.0));
    Ok(BetaThreshold {
        beta: (1.0 + eps0) * yamabe * f_min.powf(-nf / (nf + 1.0)),
        eps0,
        yamabe,
        ratio,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowOptions {
    pub dt_init: f64,
    pub dt_min: f64,
    pub t_max: f64,
    pub tol_converge: f64,
    pub blowup_factor: f64,
    pub mass_threshold: f64,
    pub ball_radius: f64,
    pub record_every: usize,
    pub monotonicity_slack: f64,
    pub dt_growth: f64,
    pub enforce_beta: bool,
    pub max_steps: Option<usize>,
    pub max_wall_seconds: Option<f64>,
    /// Solve the centering problem at each record (needed for ε, Θ and normalized b).
    pub track_centering: bool,
    pub max_centers: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            dt_init: 0.05,
            dt_min: 1e-7,
            t_max: 50.0,
            tol_converge: 1e-8,
            blowup_factor: 50.0,
            mass_threshold: 0.9,
            ball_radius: 0.5,
            record_every: 10,
            monotonicity_slack: 1e-10,
            dt_growth: 1.25,
            enforce_beta: false,
            max_steps: None,
            max_wall_seconds: None,
            track_centering: true,
            max_centers: 512,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub u: Field,
    pub alpha: f64,
    pub e_f: f64,
    /// Step size to try next.
    pub dt: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CenteringSummary {
    pub eps: f64,
    pub r: f64,
    pub theta: Vec<C64>,
    pub theta_hat: Vec<C64>,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostics {
    pub e: f64,
    /// |E spectral − ∫R_θ dV_θ|.
    pub e_discrepancy: f64,
    pub e_f: f64,
    pub alpha: f64,
    pub f2: f64,
    pub g2: f64,
    pub p: Vec<C64>,
    pub p_hat: Vec<C64>,
    pub b: Vec<C64>,
    pub b_scaled: Vec<C64>,
    /// Whether b was evaluated in the normalized frame (else in the θ frame).
    pub b_normalized: bool,
    pub kw_residual: f64,
    pub max_u: f64,
    pub min_u: f64,
    pub mass_concentration: f64,
    pub centering: Option<CenteringSummary>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Record {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    Concentrated,
    TimeLimit,
    StepFailure,
}

impl Termination {
    pub fn exit_code(self) -> i32 {
        match self {
            Termination::Converged => 0,
            Termination::Concentrated => 2,
            Termination::TimeLimit => 3,
            Termination::StepFailure => 4,
        }
    }
}

/// f-data at the shadow point of a concentrating run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointReport {
    pub point: Vec<C64>,
    pub f_value: f64,
    /// Norm of the round-metric gradient of f.
    pub f_gradient_norm: f64,
    pub f_horizontal_gradient_norm: f64,
    pub laplacian_f: f64,
}

#[derive(Clone, Debug)]
pub struct FlowRun {
    pub status: Termination,
    pub records: Vec<Record>,
    pub final_state: FlowState,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest E_f(after) − E_f(before) over accepted steps.
    pub max_energy_increase: f64,
    pub shadow_report: Option<PointReport>,
    pub failure: Option<Error>,
}

pub struct StepOutcome {
    pub state: FlowState,
    pub dt_taken: f64,
    pub retries: usize,
    pub energy_increase: f64,
}

/// Round-metric gradient, horizontal gradient and Δ_{θ0} of f at a point.
pub fn point_report(f: &Field, x: &[C64]) -> PointReport {
    let w = f.ambient_gradient(x);
    let radial = herm(&w, x).re;
    let tangential: Vec<C64> = w.iter().zip(x).map(|(wj, xj)| wj - xj * radial).collect();
    let hg = f.horizontal_gradient(x);
    PointReport {
        point: x.to_vec(),
        f_value: f.eval_at(x),
        f_gradient_norm: norm_sq(&tangential).sqrt(),
        f_horizontal_gradient_norm: norm_sq(&hg).sqrt(),
        laplacian_f: f.sub_laplacian().eval_at(x),
    }
}

pub struct Flow {
    basis: Arc<Basis>,
    f: Field,
    opts: FlowOptions,
    centers: Vec<usize>,
    centering: CenteringOptions,
}

impl Flow {
    pub fn new(f: Field, opts: FlowOptions) -> Result<Self> {
        let min = f.min();
        if !(min > 0.0) {
            return Err(Error::NonPositiveMin(min));
        }
        for (name, v) in [
            ("dt_init", opts.dt_init),
            ("dt_min", opts.dt_min),
            ("t_max", opts.t_max),
            ("tol_converge", opts.tol_converge),
            ("blowup_factor", opts.blowup_factor),
            ("ball_radius", opts.ball_radius),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if opts.monotonicity_slack < 0.0 {
            return Err(Error::InvalidInput(
                "monotonicity_slack must be nonnegative".into(),
            ));
        }
        let basis = f.basis().clone();
        let nn = basis.node_count();
        let stride = nn.div_ceil(opts.max_centers.max(1)).max(1);
        let centers = (0..nn).step_by(stride).collect();
        Ok(Self {
            basis,
            f,
            opts,
            centers,
            centering: CenteringOptions::default(),
        })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn f(&self) -> &Field {
        &self.f
    }

    pub fn options(&self) -> &FlowOptions {
        &self.opts
    }

    pub fn beta(&self) -> Result<BetaThreshold> {
        beta_threshold(self.basis.n, self.basis.volume, self.f.max(), self.f.min())
    }

    /// Renormalized initial state; applies the β gate when enabled.
    pub fn initial_state(&self, u0: &Field) -> Result<FlowState> {
        check_positive(u0)?;
        let u = renormalize(u0);
        let e_f = energy_f(&u, &self.f)?;
        if self.opts.enforce_beta {
            let beta = self.beta()?;
            if e_f > beta.beta {
                return Err(Error::BetaGate {
                    energy: e_f,
                    beta: beta.beta,
                });
            }
        }
        Ok(FlowState {
            t: 0.0,
            alpha: alpha(&u, &self.f)?,
            e_f,
            u,
            dt: self.opts.dt_init,
        })
    }

    /// One classical RK4 step followed by renormalization.
    pub fn rk4(&self, u: &Field, dt: f64) -> Result<Field> {
        let f = &self.f;
        let k1 = flow_rhs(u, f)?;
        let k2 = flow_rhs(&u.axpy(0.5 * dt, &k1), f)?;
        let k3 = flow_rhs(&u.axpy(0.5 * dt, &k2), f)?;
        let k4 = flow_rhs(&u.axpy(dt, &k3), f)?;
        let coeffs: Vec<f64> = (0..u.coeffs().len())
            .map(|i| {
                u.coeffs()[i]
                    + dt / 6.0
                        * (k1.coeffs()[i]
                            + 2.0 * k2.coeffs()[i]
                            + 2.0 * k3.coeffs()[i]
                            + k4.coeffs()[i])
            })
            .collect();
        let next = Field::from_coeffs(u.basis().clone(), coeffs);
        check_positive(&next)?;
        Ok(renormalize(&next))
    }

    /// Monotonicity-gated step: halves dt on positivity loss or energy increase.
    pub fn step(&self, state: &FlowState) -> Result<StepOutcome> {
        let mut dt = state.dt.min(self.opts.dt_init);
        let mut retries = 0;
        loop {
            let failure = match self.rk4(&state.u, dt) {
                Ok(u) => match energy_f(&u, &self.f) {
                    Ok(e_f) => {
                        let increase = e_f - state.e_f;
                        if increase <= self.opts.monotonicity_slack {
                            let alpha = alpha(&u, &self.f)?;
                            let next_dt = (dt * self.opts.dt_growth).min(self.opts.dt_init);
                            return Ok(StepOutcome {
                                state: FlowState {
                                    t: state.t + dt,
                                    u,
                                    alpha,
                                    e_f,
                                    dt: next_dt,
                                },
                                dt_taken: dt,
                                retries,
                                energy_increase: increase,
                            });
                        }
                        Error::StepRejected {
                            t: state.t,
                            increase,
                            dt,
                        }
                    }
                    Err(e) => e,
                },
                Err(Error::NonPositiveFactor { min }) => Error::PositivityLoss {
                    t: state.t,
                    min_u: min,
                    dt,
                },
                Err(e) => return Err(e),
            };
            retries += 1;
            dt *= 0.5;
            if dt < self.opts.dt_min {
                return Err(failure);
            }
        }
    }

    /// max over centers c of the θ-volume of the round ball B_ρ(c), divided by Vol.
    pub fn mass_concentration(&self, u: &Field) -> f64 {
        let basis = &self.basis;
        let k = volume_exponent(basis.n);
        let dens: Vec<f64> = u
            .values()
            .iter()
            .zip(&basis.weights)
            .map(|(v, w)| w * v.max(0.0).powf(k))
            .collect();
        let total: f64 = dens.iter().sum();
        let argmax = u
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let cos_r = self.opts.ball_radius.cos();
        let mut centers = self.centers.clone();
        centers.push(argmax);
        let best = centers
            .par_iter()
            .map(|&c| {
                let xc = basis.node(c);
                let mut mass = 0.0;
                for (i, d) in dens.iter().enumerate() {
                    if herm(basis.node(i), xc).re > cos_r {
                        mass += d;
                    }
                }
                mass
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(0.0, f64::max);
        if total > 0.0 {
            best / total
        } else {
            0.0
        }
    }

    /// F2 = ∫ (R_θ − αf)² dV_θ.
    pub fn f2(&self, u: &Field) -> Result<f64> {
        let r = webster_curvature(u)?;
        let a = alpha(u, &self.f)?;
        let k = volume_exponent(self.basis.n);
        let vals: Vec<f64> = r
            .values()
            .iter()
            .zip(self.f.values())
            .zip(u.values())
            .map(|((r, f), v)| (r - a * f).powi(2) * v.powf(k))
            .collect();
        Ok(self.basis.integrate_values(&vals))
    }

    pub fn diagnostics(&self, u: &Field, log_r_guess: Option<f64>) -> Result<Diagnostics> {
        let basis = &self.basis;
        let n = basis.n;
        let k = volume_exponent(n);
        let r = webster_curvature(u)?;
        let a = alpha(u, &self.f)?;
        let e = energy(u);
        let e_quad = energy_quadrature(u)?;
        let e_f = energy_f(u, &self.f)?;
        let uk: Vec<f64> = u.values().iter().map(|v| v.powf(k)).collect();
        let defect: Vec<f64> = r
            .values()
            .iter()
            .zip(self.f.values())
            .map(|(r, f)| a * f - r)
            .collect();
        let f2 = basis.integrate_values(
            &defect
                .iter()
                .zip(&uk)
                .map(|(d, w)| d * d * w)
                .collect::<Vec<_>>(),
        );
        let defect_field = Field::analyze(basis.clone(), &defect);
        let g2_vals: Vec<f64> = defect_field
            .horizontal_grad_sq()
            .values()
            .iter()
            .zip(u.values())
            .map(|(g, v)| g * v * v)
            .collect();
        let g2 = basis.integrate_values(&g2_vals);

        // Kazdan–Warner integrals ∫ Γ(x_j, R) dV_θ, with Γ(x_j, R) = (∇R)_j / 2.
        let r_field = r.project();
        let grads = r_field.horizontal_gradient_grid();
        let mut kw = vec![C64::new(0.0, 0.0); n + 1];
        for ((g, w), d) in grads.iter().zip(&basis.weights).zip(&uk) {
            for j in 0..=n {
                kw[j] += g[j] * (0.5 * w * d);
            }
        }
        let kw_residual = (2.0 * norm_sq(&kw)).sqrt();

        let (p, p_hat) = center_of_mass(u);

        let centering = if self.opts.track_centering {
            find_centering_from(u, basis.clone(), &self.centering, log_r_guess).ok()
        } else {
            None
        };
        let inverse: Option<CRAutomorphism> = centering.as_ref().map(|c| c.phi.inverse());
        let weights: Vec<f64> = defect.iter().zip(&uk).map(|(d, w)| d * w).collect();
        let (b, b_normalized) = match &inverse {
            Some(inv) => {
                let images: Vec<Option<Vec<C64>>> = (0..basis.node_count())
                    .into_par_iter()
                    .map(|i| inv.apply(&basis.node_point(i)).ok().map(|y| y.x))
                    .collect();
                let mut acc = vec![C64::new(0.0, 0.0); n + 1];
                for ((img, w), g) in images.iter().zip(&basis.weights).zip(&weights) {
                    if let Some(y) = img {
                        for j in 0..=n {
                            acc[j] += y[j] * (w * g);
                        }
                    }
                }
                (acc, true)
            }
            None => (weighted_coordinates(basis, &weights), false),
        };
        let b: Vec<C64> = b
            .iter()
            .copied()
            .chain(b.iter().map(|c| c.conj()))
            .collect();
        let scale = ((n + 1) as f64).sqrt();
        let b_scaled = b.iter().map(|c| c * scale).collect();

        let centering = centering.map(|c| {
            let sh = shadow_of(&c.phi);
            CenteringSummary {
                eps: c.eps,
                r: c.phi.r,
                theta: sh.theta,
                theta_hat: sh.theta_hat,
                residual: c.residual,
                converged: c.converged,
            }
        });

        Ok(Diagnostics {
            e,
            e_discrepancy: (e - e_quad).abs(),
            e_f,
            alpha: a,
            f2,
            g2,
            p,
            p_hat,
            b,
            b_scaled,
            b_normalized,
            kw_residual,
            max_u: u.max(),
            min_u: u.min(),
            mass_concentration: self.mass_concentration(u),
            centering,
        })
    }

    fn record(&self, step: usize, state: &FlowState, log_r: &mut Option<f64>) -> Result<Record> {
        let d = self.diagnostics(&state.u, *log_r)?;
        if let Some(c) = &d.centering {
            *log_r = Some(c.r.ln());
        }
        Ok(Record {
            step,
            t: state.t,
            dt: state.dt,
            diagnostics: d,
        })
    }

    /// Integrates from u0 until convergence, concentration, the time limit or a step failure.
    pub fn run<O: FnMut(&Record)>(&self, u0: &Field, mut observer: O) -> Result<FlowRun> {
        let started = Instant::now();
        let mut state = self.initial_state(u0)?;
        let mut log_r = None;
        let mut records = Vec::new();
        let first = self.record(0, &state, &mut log_r)?;
        observer(&first);
        records.push(first);
        let mut accepted = 0usize;
        let mut rejected = 0usize;
        let mut max_increase = f64::NEG_INFINITY;
        let mut failure = None;
        let status = loop {
            if self.f2(&state.u)? < self.opts.tol_converge {
                break Termination::Converged;
            }
            if state.u.max() > self.opts.blowup_factor
                && self.mass_concentration(&state.u) > self.opts.mass_threshold
            {
                break Termination::Concentrated;
            }
            if state.t >= self.opts.t_max
                || self.opts.max_steps.is_some_and(|m| accepted >= m)
                || self
                    .opts
                    .max_wall_seconds
                    .is_some_and(|s| started.elapsed().as_secs_f64() > s)
            {
                break Termination::TimeLimit;
            }
            let mut trial = state.clone();
            trial.dt = trial
                .dt
                .min(self.opts.t_max - state.t)
                .max(self.opts.dt_min);
            match self.step(&trial) {
                Ok(out) => {
                    accepted += 1;
                    rejected += out.retries;
                    max_increase = max_increase.max(out.energy_increase);
                    state = out.state;
                    if accepted % self.opts.record_every.max(1) == 0 {
                        let rec = self.record(accepted, &state, &mut log_r)?;
                        observer(&rec);
                        records.push(rec);
                    }
                }
                Err(e) => {
                    failure = Some(e);
                    break Termination::StepFailure;
                }
            }
        };
        if records.last().map(|r| r.step) != Some(accepted) {
            let rec = self.record(accepted, &state, &mut log_r)?;
            observer(&rec);
            records.push(rec);
        }
        let shadow_report = if status == Termination::Concentrated {
            records
                .last()
                .and_then(|r| r.diagnostics.centering.as_ref())
                .map(|c| {
                    let x = SpherePoint::normalized(c.theta_hat.clone())
                        .map(|p| p.x)
                        .unwrap_or_else(|_| unit_or_self(&c.theta_hat));
                    point_report(&self.f, &x)
                })
        } else {
            None
        };
        Ok(FlowRun {
            status,
            records,
            final_state: state,
            accepted_steps: accepted,
            rejected_steps: rejected,
            max_energy_increase: max_increase,
            shadow_report,
            failure,
        })
    }
}
