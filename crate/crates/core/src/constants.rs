//! The bubble-expansion constants A₁…A₆ as integrals over the Heisenberg group.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{heisenberg_integral, unit_sphere_area};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstantName {
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
}

impl ConstantName {
    pub const ALL: [ConstantName; 6] = [
        ConstantName::A1,
        ConstantName::A2,
        ConstantName::A3,
        ConstantName::A4,
        ConstantName::A5,
        ConstantName::A6,
    ];

    /// Integrand g(r, τ) with r = |z|, so that the constant is ∫_{H^n} g dz dτ.
    pub fn integrand(self, n: usize) -> impl Fn(f64, f64) -> f64 {
        let nf = n as f64;
        let k = n as i32;
        let four_n1 = 4f64.powi(k + 1);
        move |r: f64, tau: f64| {
            let r2 = r * r;
            let a = 1.0 + r2;
            let d = tau * tau + a * a;
            let t2 = tau * tau;
            let r4 = r2 * r2;
            match self {
                ConstantName::A1 => four_n1 * r2 * a / d.powi(k + 2) / nf,
                ConstantName::A2 => {
                    4f64.powi(k) * (r4 + t2 - 1.0) * r2 / d.powi(k + 2) / (2.0 * nf)
                }
                ConstantName::A3 => r2 / d.powi(k + 1),
                ConstantName::A4 => {
                    let s = r4 + t2;
                    if s == 0.0 {
                        return 0.0;
                    }
                    2.0 * r2 / s * four_n1 / d.powi(k + 1)
                }
                ConstantName::A5 => {
                    let s = r4 + t2;
                    if s == 0.0 {
                        return 0.0;
                    }
                    4.0 * r2 * (r4 - t2) / (s * s) * four_n1 / d.powi(k + 1)
                }
                ConstantName::A6 => four_n1 * r2 / d.powi(k + 1) / (2.0 * nf),
            }
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for ConstantName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstantName::A1 => "A1",
            ConstantName::A2 => "A2",
            ConstantName::A3 => "A3",
            ConstantName::A4 => "A4",
            ConstantName::A5 => "A5",
            ConstantName::A6 => "A6",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub name: ConstantName,
    pub n: usize,
    pub value: f64,
    pub abs_error_estimate: f64,
    pub method: String,
}

impl ConstantEstimate {
    pub fn positive(&self) -> bool {
        self.value > 0.0
    }
}

/// Relative tolerance used at a refinement level.
pub fn level_tolerance(level: usize) -> f64 {
    10f64.powi(-(5 + level as i32))
}

/// Highest supported refinement level.
pub const MAX_LEVEL: usize = 5;

/// Value at tolerance of level+1, error from the difference with level.
pub fn constant(name: ConstantName, n: usize, level: usize) -> Result<ConstantEstimate> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if level > MAX_LEVEL {
        return Err(Error::InvalidInput(format!(
            "refinement level must be at most {MAX_LEVEL}"
        )));
    }
    let coarse = heisenberg_integral(n, name.integrand(n), level_tolerance(level))?;
    let fine = heisenberg_integral(n, name.integrand(n), level_tolerance(level + 1))?;
    let abs_error_estimate = (fine.value - coarse.value).abs().max(fine.abs_error);
    Ok(ConstantEstimate {
        name,
        n,
        value: fine.value,
        abs_error_estimate,
        method: format!(
            "adaptive G7K15 in (r, tau), rel tol {:.0e} vs {:.0e}",
            level_tolerance(level),
            level_tolerance(level + 1)
        ),
    })
}

pub fn all_constants(n: usize, level: usize) -> Result<Vec<ConstantEstimate>> {
    ConstantName::ALL
        .iter()
        .map(|&c| constant(c, n, level))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Importance-sampling estimate of ∫_{H^n} g dz dτ for a radial g.
///
/// Proposal: r² = y/(1−y) with y ~ Beta(n, 1); τ given r from an even mixture of Cauchy
/// laws with scales 1 + r² and r², matching the two scales of the integrands.
pub fn monte_carlo<G: Fn(f64, f64) -> f64>(
    n: usize,
    g: G,
    samples: usize,
    seed: u64,
) -> MonteCarloEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = n as f64;
    let omega = unit_sphere_area(n);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut count = 0usize;
    while count < samples {
        let y: f64 = rng.random::<f64>().powf(1.0 / nf);
        if y <= 0.0 || y >= 1.0 {
            continue;
        }
        let u = y / (1.0 - y);
        let r = u.sqrt();
        let pr = nf * y.powf(nf - 1.0) * 2.0 * r / ((1.0 + u) * (1.0 + u));
        let wide = 1.0 + u;
        let narrow = u;
        let scale = if rng.random::<bool>() { wide } else { narrow };
        let tau = scale * (PI * (rng.random::<f64>() - 0.5)).tan();
        let cauchy = |s: f64| s / (PI * (s * s + tau * tau));
        let pt = 0.5 * cauchy(wide) + 0.5 * cauchy(narrow);
        if !(pr > 0.0 && pt > 0.0) || !tau.is_finite() {
            continue;
        }
        let x = g(r, tau) * omega * r.powi(2 * n as i32 - 1) / (pr * pt);
        count += 1;
        let delta = x - mean;
        mean += delta / count as f64;
        m2 += delta * (x - mean);
    }
    let var = m2 / (count as f64 - 1.0);
    MonteCarloEstimate {
        value: mean,
        std_error: (var / count as f64).sqrt(),
        samples: count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::sphere_volume;

    #[test]
    fn a6_and_a3_in_closed_form() {
        // ∫|z|² K dz dτ = ∫K dz dτ = Vol, hence A6 = Vol/(2n) and A3 = Vol/4^{n+1}.
        for n in 1..4 {
            let vol = sphere_volume(n);
            let a6 = constant(ConstantName::A6, n, 1).unwrap();
            assert!(
                (a6.value - vol / (2.0 * n as f64)).abs() < 1e-8 * vol,
                "n={n}: {}",
                a6.value
            );
            let a3 = constant(ConstantName::A3, n, 1).unwrap();
            assert!((a3.value - vol / 4f64.powi(n as i32 + 1)).abs() < 1e-8 * vol);
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!(ConstantName::parse("a4"), Some(ConstantName::A4));
        assert_eq!(ConstantName::parse("A7"), None);
    }
}
