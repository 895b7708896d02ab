//! Morse-theoretic hypotheses for the prescribed curvature problem: index counts, the
//! k-system, the degree sum and the simple bubble condition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm_sq, SpherePoint, C64};
use crate::spectral::Field;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    /// Morse index, in [0, 2n+1].
    pub index: usize,
    /// Sign of Δ_{θ0}f at the point, −1 or +1.
    pub laplacian_sign: i8,
    pub f_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<SpherePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseData {
    pub n: usize,
    pub critical_points: Vec<CriticalPoint>,
    pub f_max: f64,
    pub f_min: f64,
}

impl MorseData {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if !(self.f_min > 0.0) {
            return Err(Error::NonPositiveMin(self.f_min));
        }
        if !(self.f_max >= self.f_min) {
            return Err(Error::InvalidInput(format!(
                "f_max = {} is below f_min = {}",
                self.f_max, self.f_min
            )));
        }
        let max_index = 2 * self.n + 1;
        for (i, p) in self.critical_points.iter().enumerate() {
            if p.index > max_index {
                return Err(Error::IndexOutOfRange {
                    index: p.index,
                    max: max_index,
                });
            }
            if p.laplacian_sign != 1 && p.laplacian_sign != -1 {
                return Err(Error::InvalidInput(format!(
                    "critical point {i}: laplacian_sign must be -1 or +1, got {}",
                    p.laplacian_sign
                )));
            }
            if !(p.f_value >= self.f_min && p.f_value <= self.f_max) {
                return Err(Error::InvalidInput(format!(
                    "critical point {i}: f_value {} outside [f_min, f_max]",
                    p.f_value
                )));
            }
            if let Some(loc) = &p.location {
                if loc.n() != self.n {
                    return Err(Error::InvalidInput(format!(
                        "critical point {i}: location has wrong dimension"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// m_i = #{critical points with Δf < 0 and index 2n+1−i}, i = 0..=2n+1.
pub fn counts(data: &MorseData) -> Result<Vec<i64>> {
    let top = 2 * data.n + 1;
    let mut m = vec![0i64; top + 1];
    for p in &data.critical_points {
        if p.index > top {
            return Err(Error::IndexOutOfRange {
                index: p.index,
                max: top,
            });
        }
        if p.laplacian_sign < 0 {
            m[top - p.index] += 1;
        }
    }
    Ok(m)
}

/// Nonnegative solution of m_0 = 1 + k_0, m_i = k_{i−1} + k_i, k_{2n+1} = 0, if any.
pub fn solve_k(m: &[i64], n: usize) -> Option<Vec<i64>> {
    if m.len() != 2 * n + 2 {
        return None;
    }
    let mut k = Vec::with_capacity(m.len());
    let mut prev = m[0] - 1;
    k.push(prev);
    for &mi in &m[1..] {
        prev = mi - prev;
        k.push(prev);
    }
    (k.iter().all(|&x| x >= 0) && *k.last().unwrap() == 0).then_some(k)
}

/// Σ (−1)^{ind} over critical points with Δf < 0.
pub fn degree_sum(data: &MorseData) -> i64 {
    data.critical_points
        .iter()
        .filter(|p| p.laplacian_sign < 0)
        .map(|p| if p.index % 2 == 0 { 1 } else { -1 })
        .sum()
}

/// The degree sum recovered from counts: Σ_i (−1)^{2n+1−i} m_i = Σ_i (−1)^{i+1} m_i.
pub fn degree_sum_of_counts(m: &[i64]) -> i64 {
    m.iter()
        .enumerate()
        .map(|(i, &mi)| if i % 2 == 0 { -mi } else { mi })
        .sum()
}

/// max f / min f < 2^{1/n}, strictly.
pub fn sbc_check(f_max: f64, f_min: f64, n: usize) -> Result<bool> {
    if !(f_min > 0.0) {
        return Err(Error::NonPositiveMin(f_min));
    }
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let threshold = 2f64.powf(1.0 / n as f64);
    // Compare f_max < threshold·f_min; exact powers of two keep the tie case exact.
    Ok(f_max < threshold * f_min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub n: usize,
    pub m: Vec<i64>,
    pub k: Option<Vec<i64>>,
    pub degree_sum: i64,
    /// Whether the degree sum differs from −1.
    pub degree_condition: bool,
    pub sbc: bool,
    pub hypotheses_satisfied: bool,
    pub warning: Option<String>,
}

pub fn theorem_gate(data: &MorseData) -> Result<GateReport> {
    data.validate()?;
    let m = counts(data)?;
    let k = solve_k(&m, data.n);
    let ds = degree_sum(data);
    let sbc = sbc_check(data.f_max, data.f_min, data.n)?;
    let warning = (data.n == 1).then(|| {
        "n = 1 is outside the proven range of the existence theorem; the verdict is informational".to_string()
    });
    Ok(GateReport {
        n: data.n,
        hypotheses_satisfied: k.is_none() && sbc,
        m,
        k,
        degree_sum: ds,
        degree_condition: ds != -1,
        sbc,
        warning,
    })
}

impl std::fmt::Display for GateReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "n = {}", self.n)?;
        writeln!(f, "m = {:?}", self.m)?;
        match &self.k {
            Some(k) => writeln!(f, "k = {k:?} (nonnegative solution exists)")?,
            None => writeln!(f, "k = none")?,
        }
        writeln!(
            f,
            "degree sum = {} (condition != -1: {})",
            self.degree_sum, self.degree_condition
        )?;
        writeln!(f, "simple bubble condition: {}", self.sbc)?;
        if let Some(w) = &self.warning {
            writeln!(f, "warning: {w}")?;
        }
        write!(
            f,
            "verdict: {}",
            if self.hypotheses_satisfied {
                "hypotheses satisfied"
            } else {
                "hypotheses not satisfied"
            }
        )
    }
}

/// A critical point located numerically, with its Hessian spectrum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoundCritical {
    pub point: SpherePoint,
    pub f_value: f64,
    pub index: usize,
    pub laplacian: f64,
    pub gradient_norm: f64,
    pub hessian_eigenvalues: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FinderOptions {
    /// Newton is started from every stride-th grid node. A regular stride can alias
    /// with the grid and skip basins, so fine grids want this near the node count.
    pub max_seeds: usize,
    pub max_iter: usize,
    pub gradient_tol: f64,
    pub fd_step: f64,
    /// Points closer than this are merged.
    pub merge_distance: f64,
    /// Hessian eigenvalues below this in magnitude flag a degenerate point.
    pub degeneracy_tol: f64,
}

impl Default for FinderOptions {
    fn default() -> Self {
        Self {
            max_seeds: 400,
            max_iter: 50,
            gradient_tol: 1e-11,
            fd_step: 1e-5,
            merge_distance: 1e-6,
            degeneracy_tol: 1e-6,
        }
    }
}

/// Real orthonormal basis of the tangent space {v : Re⟨v, x⟩ = 0} at x.
fn tangent_frame(x: &[C64]) -> Vec<Vec<C64>> {
    let m = x.len();
    let mut frame: Vec<Vec<C64>> = vec![x.to_vec()];
    let mut candidates = Vec::with_capacity(2 * m);
    for j in 0..m {
        for unit in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
            let mut v = vec![C64::new(0.0, 0.0); m];
            v[j] = unit;
            candidates.push(v);
        }
    }
    // Project every candidate and keep the 2m−1 largest residuals greedily.
    while frame.len() < 2 * m {
        let mut best: Option<(f64, Vec<C64>)> = None;
        for c in &candidates {
            let mut v = c.clone();
            for _ in 0..2 {
                for e in &frame {
                    let d = real_dot(&v, e);
                    for (vi, ei) in v.iter_mut().zip(e) {
                        *vi -= ei * d;
                    }
                }
            }
            let nv = norm_sq(&v).sqrt();
            if best.as_ref().is_none_or(|(b, _)| nv > *b) {
                best = Some((nv, v.into_iter().map(|c| c / nv).collect()));
            }
        }
        frame.push(best.unwrap().1);
    }
    frame.remove(0);
    frame
}

fn real_dot(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p * q.conj()).re).sum()
}

fn retract(x: &[C64], frame: &[Vec<C64>], y: &[f64]) -> Vec<C64> {
    let mut p = x.to_vec();
    for (e, yi) in frame.iter().zip(y) {
        for (pi, ei) in p.iter_mut().zip(e) {
            *pi += ei * *yi;
        }
    }
    let s = norm_sq(&p).sqrt();
    p.into_iter().map(|c| c / s).collect()
}

/// Round-metric gradient of f in the frame at x, evaluated at retract(x, y).
fn frame_gradient(f: &Field, x: &[C64], frame: &[Vec<C64>], y: &[f64]) -> DVector<f64> {
    let p = retract(x, frame, y);
    let w = f.ambient_gradient(&p);
    let radial = real_dot(&w, &p);
    let tangential: Vec<C64> = w.iter().zip(&p).map(|(wi, pi)| wi - pi * radial).collect();
    DVector::from_iterator(frame.len(), frame.iter().map(|e| real_dot(&tangential, e)))
}

fn frame_hessian(f: &Field, x: &[C64], frame: &[Vec<C64>], h: f64) -> DMatrix<f64> {
    let d = frame.len();
    let mut hess = DMatrix::zeros(d, d);
    let mut y = vec![0.0; d];
    for j in 0..d {
        y[j] = h;
        let gp = frame_gradient(f, x, frame, &y);
        y[j] = -h;
        let gm = frame_gradient(f, x, frame, &y);
        y[j] = 0.0;
        hess.set_column(j, &((gp - gm) / (2.0 * h)));
    }
    (&hess + hess.transpose()) * 0.5
}

/// Newton iteration on the round gradient from a seed; None if it fails to converge.
pub fn newton_critical_point(
    f: &Field,
    seed: &[C64],
    opts: &FinderOptions,
) -> Option<FoundCritical> {
    let mut x = seed.to_vec();
    for _ in 0..opts.max_iter {
        let frame = tangent_frame(&x);
        let zero = vec![0.0; frame.len()];
        let g = frame_gradient(f, &x, &frame, &zero);
        let hess = frame_hessian(f, &x, &frame, opts.fd_step);
        if g.norm() < opts.gradient_tol {
            let eig = SymmetricEigen::new(hess);
            let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            if ev.iter().any(|l| l.abs() < opts.degeneracy_tol) {
                return None;
            }
            return Some(FoundCritical {
                point: SpherePoint::normalized(x.clone()).ok()?,
                f_value: f.eval_at(&x),
                index: ev.iter().filter(|&&l| l < 0.0).count(),
                laplacian: f.sub_laplacian().eval_at(&x),
                gradient_norm: g.norm(),
                hessian_eigenvalues: ev,
            });
        }
        let step = hess.clone().svd(true, true).solve(&g, 1e-12).ok()?;
        let len = step.norm();
        let scale = if len > 0.3 { 0.3 / len } else { 1.0 };
        let y: Vec<f64> = step.iter().map(|s| -s * scale).collect();
        x = retract(&x, &frame, &y);
    }
    None
}

/// Critical points of f reached by Newton from grid seeds, deduplicated, sorted by f.
pub fn find_critical_points(f: &Field, opts: &FinderOptions) -> Vec<FoundCritical> {
    use rayon::prelude::*;
    let basis = f.basis();
    let nn = basis.node_count();
    let stride = nn.div_ceil(opts.max_seeds.max(1)).max(1);
    let found: Vec<FoundCritical> = (0..nn)
        .step_by(stride)
        .collect::<Vec<_>>()
        .into_par_iter()
        .filter_map(|k| newton_critical_point(f, basis.node(k), opts))
        .collect();
    let mut unique: Vec<FoundCritical> = Vec::new();
    for c in found {
        if !unique
            .iter()
            .any(|u| u.point.distance(&c.point) < opts.merge_distance)
        {
            unique.push(c);
        }
    }
    unique.sort_by(|a, b| b.f_value.total_cmp(&a.f_value));
    unique
}

/// MorseData assembled from numerically located critical points; f range from the grid
/// extended by the critical values.
pub fn morse_data_from_field(f: &Field, opts: &FinderOptions) -> Result<MorseData> {
    let found = find_critical_points(f, opts);
    if found.iter().any(|c| c.laplacian == 0.0) {
        return Err(Error::InvalidInput(
            "degenerate critical point with vanishing sub-Laplacian".into(),
        ));
    }
    let mut f_max = f.max();
    let mut f_min = f.min();
    for c in &found {
        f_max = f_max.max(c.f_value);
        f_min = f_min.min(c.f_value);
    }
    Ok(MorseData {
        n: f.n(),
        critical_points: found
            .into_iter()
            .map(|c| CriticalPoint {
                index: c.index,
                laplacian_sign: if c.laplacian < 0.0 { -1 } else { 1 },
                f_value: c.f_value,
                location: Some(c.point),
            })
            .collect(),
        f_max,
        f_min,
    })
}
