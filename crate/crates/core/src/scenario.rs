//! Scenario configuration: curvature candidate f, initial factor u0 and flow settings.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bubble::{bubble, DEFAULT_BUBBLE_TOLERANCE};
use crate::error::{Error, Result};
use crate::flow::{standard_curvature, FlowOptions};
use crate::geometry::{SpherePoint, C64};
use crate::morse::MorseData;
use crate::spectral::{Basis, Field};

/// Highest total degree accepted for polynomial f.
pub const MAX_F_DEGREE: usize = 4;

/// coeff · x^hol · x̄^anti; a polynomial is the real part of a sum of terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub coeff: C64,
    #[serde(default)]
    pub hol: Vec<u32>,
    #[serde(default)]
    pub anti: Vec<u32>,
}

impl PolyTerm {
    pub fn degree(&self) -> usize {
        (self.hol.iter().sum::<u32>() + self.anti.iter().sum::<u32>()) as usize
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.hol.len() > n + 1 || self.anti.len() > n + 1 {
            return Err(Error::InvalidInput(format!(
                "monomial exponent list longer than the {} coordinates",
                n + 1
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[C64]) -> C64 {
        let mut v = self.coeff;
        for (xi, &a) in x.iter().zip(&self.hol) {
            v *= xi.powu(a);
        }
        for (xi, &b) in x.iter().zip(&self.anti) {
            v *= xi.conj().powu(b);
        }
        v
    }
}

pub fn eval_poly(terms: &[PolyTerm], x: &[C64]) -> f64 {
    terms.iter().map(|t| t.eval(x).re).sum()
}

/// Curvature candidate f.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum FSpec {
    /// f ≡ value.
    Constant { value: f64 },
    /// f = 1 + amplitude·Re x_{n+1}.
    Dipole { amplitude: f64 },
    /// f = 1 + amplitude·Σ_j ratio^j y_j² over real coordinates y, last weight 0: a Morse
    /// function with two antipodal maxima.
    TwoPeak { amplitude: f64, ratio: f64 },
    /// f = 1 + amplitude·(y_0² + saddle·s² + low·Σ 2^{1−j} y_j²) + tilt·s, where s = Re x_{n+1}
    /// and y_j runs over the remaining real coordinates except Im x_{n+1}. Two equal peaks
    /// at ±e_1; the tilt splits the sub-Laplacian signs at ±Re x_{n+1}.
    TiltedTwoPeak {
        amplitude: f64,
        saddle: f64,
        low: f64,
        tilt: f64,
    },
    /// f = Re Σ terms.
    Polynomial { terms: Vec<PolyTerm> },
}

impl FSpec {
    pub fn check(&self, n: usize) -> Result<()> {
        match self {
            FSpec::Constant { value } if !(*value > 0.0) => Err(Error::NonPositiveMin(*value)),
            FSpec::Dipole { amplitude } if !(amplitude.abs() < 1.0) => Err(Error::InvalidInput(
                format!("dipole amplitude must lie in (-1, 1), got {amplitude}"),
            )),
            FSpec::TwoPeak { amplitude, ratio }
                if !(*amplitude > -1.0 && *ratio > 0.0 && *ratio < 1.0) =>
            {
                Err(Error::InvalidInput(
                    "two_peak needs amplitude > -1 and ratio in (0, 1)".into(),
                ))
            }
            FSpec::TiltedTwoPeak {
                amplitude,
                saddle,
                low,
                tilt,
            } if !(*amplitude > 0.0
                && *saddle > *low
                && *low > 0.0
                && *saddle < 1.0
                && tilt.abs() < 1.0) =>
            {
                Err(Error::InvalidInput(
                    "tilted_two_peak needs amplitude > 0, 0 < low < saddle < 1 and |tilt| < 1"
                        .into(),
                ))
            }
            FSpec::Polynomial { terms } => {
                for t in terms {
                    t.check(n)?;
                    if t.degree() > MAX_F_DEGREE {
                        return Err(Error::InvalidInput(format!(
                            "polynomial term of degree {} exceeds {MAX_F_DEGREE}",
                            t.degree()
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Pointwise value, before the global scale.
    pub fn eval(&self, x: &[C64]) -> f64 {
        match self {
            FSpec::Constant { value } => *value,
            FSpec::Dipole { amplitude } => 1.0 + amplitude * x[x.len() - 1].re,
            FSpec::TwoPeak { amplitude, ratio } => {
                let real: Vec<f64> = x.iter().flat_map(|c| [c.re, c.im]).collect();
                let last = real.len() - 1;
                let s: f64 = real
                    .iter()
                    .enumerate()
                    .take(last)
                    .map(|(j, y)| ratio.powi(j as i32) * y * y)
                    .sum();
                1.0 + amplitude * s
            }
            FSpec::TiltedTwoPeak {
                amplitude,
                saddle,
                low,
                tilt,
            } => {
                let m = x.len();
                let s = x[m - 1].re;
                let mut q = x[0].re * x[0].re + saddle * s * s;
                let mut w = *low;
                for (j, c) in x.iter().enumerate().take(m - 1) {
                    if j > 0 {
                        q += w * c.re * c.re;
                        w *= 0.5;
                    }
                    q += w * c.im * c.im;
                    w *= 0.5;
                }
                1.0 + amplitude * q + tilt * s
            }
            FSpec::Polynomial { terms } => eval_poly(terms, x),
        }
    }
}

/// Initial conformal factor u0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum U0Spec {
    Constant,
    /// The standard bubble at p with scale eps.
    Bubble {
        p: Vec<C64>,
        eps: f64,
    },
    /// u0 = 1 + Re Σ terms.
    Perturbation {
        terms: Vec<PolyTerm>,
    },
    /// u0 = 1 + amplitude·g with g a seeded random combination of low modes, max |g| = 1.
    Random {
        amplitude: f64,
        #[serde(default = "default_random_degree")]
        max_degree: usize,
    },
}

fn default_random_degree() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    /// Truncation degree J of the spectral basis.
    #[serde(rename = "J", alias = "degree")]
    pub degree: usize,
    pub f: FSpec,
    /// Multiplies f; 1 by default.
    #[serde(default = "one")]
    pub f_scale: f64,
    #[serde(default = "default_u0")]
    pub u0: U0Spec,
    #[serde(default = "defaults::dt_init")]
    pub dt_init: f64,
    #[serde(default = "defaults::t_max")]
    pub t_max: f64,
    #[serde(default = "defaults::tol_converge")]
    pub tol_converge: f64,
    #[serde(default = "defaults::blowup_factor")]
    pub blowup_factor: f64,
    #[serde(default = "defaults::record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub enforce_beta: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::dt_min")]
    pub dt_min: f64,
    #[serde(default = "defaults::monotonicity_slack")]
    pub monotonicity_slack: f64,
    #[serde(default = "defaults::ball_radius")]
    pub ball_radius: f64,
    #[serde(default = "defaults::mass_threshold")]
    pub mass_threshold: f64,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub max_wall_seconds: Option<f64>,
    #[serde(default = "defaults::track_centering")]
    pub track_centering: bool,
    /// Critical-point data of f, echoed through the gate in the run summary.
    #[serde(default)]
    pub morse: Option<MorseData>,
}

fn one() -> f64 {
    1.0
}

fn default_u0() -> U0Spec {
    U0Spec::Constant
}

mod defaults {
    use crate::flow::FlowOptions;

    fn d() -> FlowOptions {
        FlowOptions::default()
    }
    pub fn dt_init() -> f64 {
        d().dt_init
    }
    pub fn t_max() -> f64 {
        d().t_max
    }
    pub fn tol_converge() -> f64 {
        d().tol_converge
    }
    pub fn blowup_factor() -> f64 {
        d().blowup_factor
    }
    pub fn record_every() -> usize {
        d().record_every
    }
    pub fn dt_min() -> f64 {
        d().dt_min
    }
    pub fn monotonicity_slack() -> f64 {
        d().monotonicity_slack
    }
    pub fn ball_radius() -> f64 {
        d().ball_radius
    }
    pub fn mass_threshold() -> f64 {
        d().mass_threshold
    }
    pub fn track_centering() -> bool {
        d().track_centering
    }
}

/// A validated scenario ready to run.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub basis: Arc<Basis>,
    pub f: Field,
    pub u0: Field,
    pub options: FlowOptions,
}

/// A configuration problem tied to the JSON field (and source line, when known).
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of the first occurrence of "key" in the source text.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let pat = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&pat)).map(|i| i + 1)
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError {
            line: Some(e.line()),
            column: Some(e.column()),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|(key, e)| ConfigError {
            line: key_line(text, key),
            column: None,
            message: format!("{key}: {e}"),
        })?;
        Ok(cfg)
    }

    /// Checks ranges; the error names the offending key.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, Error)> {
        let positive = |key: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err((
                    key,
                    Error::InvalidInput(format!("must be positive, got {v}")),
                ))
            }
        };
        if self.n == 0 {
            return Err(("n", Error::InvalidInput("must be at least 1".into())));
        }
        if self.degree == 0 {
            return Err(("J", Error::InvalidInput("must be at least 1".into())));
        }
        positive("f_scale", self.f_scale)?;
        positive("dt_init", self.dt_init)?;
        positive("dt_min", self.dt_min)?;
        positive("t_max", self.t_max)?;
        positive("tol_converge", self.tol_converge)?;
        positive("blowup_factor", self.blowup_factor)?;
        positive("ball_radius", self.ball_radius)?;
        positive("mass_threshold", self.mass_threshold)?;
        if self.dt_min > self.dt_init {
            return Err((
                "dt_min",
                Error::InvalidInput("must not exceed dt_init".into()),
            ));
        }
        if !(self.monotonicity_slack >= 0.0) {
            return Err((
                "monotonicity_slack",
                Error::InvalidInput("must be nonnegative".into()),
            ));
        }
        if self.record_every == 0 {
            return Err((
                "record_every",
                Error::InvalidInput("must be at least 1".into()),
            ));
        }
        self.f.check(self.n).map_err(|e| ("f", e))?;
        match &self.u0 {
            U0Spec::Bubble { p, eps } => {
                if p.len() != self.n + 1 {
                    return Err((
                        "u0",
                        Error::InvalidInput(format!(
                            "bubble center needs {} coordinates",
                            self.n + 1
                        )),
                    ));
                }
                if !(*eps > 0.0 && *eps <= 1.0) {
                    return Err((
                        "u0",
                        Error::InvalidInput(format!("bubble eps must lie in (0, 1], got {eps}")),
                    ));
                }
            }
            U0Spec::Perturbation { terms } => {
                for t in terms {
                    t.check(self.n).map_err(|e| ("u0", e))?;
                    if t.degree() > self.degree {
                        return Err((
                            "u0",
                            Error::InvalidInput(format!(
                                "perturbation degree exceeds J = {}",
                                self.degree
                            )),
                        ));
                    }
                }
            }
            U0Spec::Random { amplitude, .. } => {
                if !(*amplitude >= 0.0 && *amplitude < 1.0) {
                    return Err((
                        "u0",
                        Error::InvalidInput("random amplitude must lie in [0, 1)".into()),
                    ));
                }
            }
            U0Spec::Constant => {}
        }
        if let Some(m) = &self.morse {
            m.validate().map_err(|e| ("morse", e))?;
        }
        Ok(())
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            dt_init: self.dt_init,
            dt_min: self.dt_min,
            t_max: self.t_max,
            tol_converge: self.tol_converge,
            blowup_factor: self.blowup_factor,
            mass_threshold: self.mass_threshold,
            ball_radius: self.ball_radius,
            record_every: self.record_every,
            monotonicity_slack: self.monotonicity_slack,
            enforce_beta: self.enforce_beta,
            max_steps: self.max_steps,
            max_wall_seconds: self.max_wall_seconds,
            track_centering: self.track_centering,
            ..FlowOptions::default()
        }
    }

    /// Builds the basis and the fields; rejects f or u0 that are not positive on the grid.
    pub fn prepare(&self) -> Result<Scenario> {
        self.validate().map_err(|(_, e)| e)?;
        let basis = Arc::new(Basis::build(self.n, self.degree)?);
        let f = field_of_f(&basis, &self.f, self.f_scale)?;
        let u0 = initial_factor(&basis, &self.u0, self.seed)?;
        Ok(Scenario {
            config: self.clone(),
            basis,
            f,
            u0,
            options: self.flow_options(),
        })
    }
}

fn grid_field(basis: &Arc<Basis>, g: impl Fn(&[C64]) -> f64) -> Field {
    let vals: Vec<f64> = (0..basis.node_count()).map(|k| g(basis.node(k))).collect();
    Field::analyze(basis.clone(), &vals)
}

/// scale·f as a band-limited field; f must be positive on the grid.
pub fn field_of_f(basis: &Arc<Basis>, spec: &FSpec, scale: f64) -> Result<Field> {
    spec.check(basis.n)?;
    let f = grid_field(basis, |x| scale * spec.eval(x));
    let min = f.min();
    if !(min > 0.0) {
        return Err(Error::NonPositiveMin(min));
    }
    Ok(f)
}

/// f = R_{θ0}·spec, the normalization used by the presets in the command-line tools.
pub fn curvature_scaled_f(basis: &Arc<Basis>, spec: &FSpec) -> Result<Field> {
    field_of_f(basis, spec, standard_curvature(basis.n))
}

pub fn initial_factor(basis: &Arc<Basis>, spec: &U0Spec, seed: u64) -> Result<Field> {
    let u = match spec {
        U0Spec::Constant => Field::constant(basis.clone(), 1.0),
        U0Spec::Bubble { p, eps } => {
            let p = SpherePoint::normalized(p.clone())?;
            bubble(&p, *eps, basis.clone(), DEFAULT_BUBBLE_TOLERANCE)?.field
        }
        U0Spec::Perturbation { terms } => grid_field(basis, |x| 1.0 + eval_poly(terms, x)),
        U0Spec::Random {
            amplitude,
            max_degree,
        } => random_factor(basis, *amplitude, *max_degree, seed),
    };
    let min = u.min();
    if !(min > 0.0) {
        return Err(Error::NonPositiveFactor { min });
    }
    Ok(u)
}

/// 1 + amplitude·g, g a Gaussian combination of modes of degree 1..=max_degree scaled to
/// max |g| = 1 on the grid.
pub fn random_factor(basis: &Arc<Basis>, amplitude: f64, max_degree: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![0.0; basis.dim()];
    for b in &basis.blocks {
        let k = b.p + b.q;
        if k >= 1 && k <= max_degree {
            for c in &mut coeffs[b.start..b.start + b.len] {
                *c = StandardNormal.sample(&mut rng);
            }
        }
    }
    let g = Field::from_coeffs(basis.clone(), coeffs);
    let m = g.max().abs().max(g.min().abs());
    let s = if m > 0.0 { amplitude / m } else { 0.0 };
    Field::constant(basis.clone(), 1.0).axpy(s, &g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_line_errors() {
        let text = r#"{
  "n": 1,
  "J": 4,
  "f": {"preset": "constant", "value": 1.0},
  "dt_init": -1.0
}"#;
        let err = ScenarioConfig::from_json(text).unwrap_err();
        assert_eq!(err.line, Some(5));
        let ok = ScenarioConfig::from_json(
            r#"{"n": 1, "J": 4, "f": {"preset": "dipole", "amplitude": 0.2}}"#,
        )
        .unwrap();
        assert_eq!(ok.u0, U0Spec::Constant);
        assert_eq!(ok.dt_init, FlowOptions::default().dt_init);
        let bad =
            ScenarioConfig::from_json("{\"n\": 1,\n \"J\": 4,\n \"f\": {\"preset\": \"nope\"}}")
                .unwrap_err();
        assert_eq!(bad.line, Some(3));
    }

    #[test]
    fn two_peak_has_antipodal_maxima() {
        let f = FSpec::TwoPeak {
            amplitude: 0.2,
            ratio: 0.5,
        };
        let e1 = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let m1 = [C64::new(-1.0, 0.0), C64::new(0.0, 0.0)];
        assert_eq!(f.eval(&e1), 1.2);
        assert_eq!(f.eval(&m1), 1.2);
        let g = FSpec::TiltedTwoPeak {
            amplitude: 0.2,
            saddle: 0.5,
            low: 0.1,
            tilt: 0.05,
        };
        let y = [C64::new(0.3, 0.4), C64::new(-0.5, 0.2)];
        let expect = 1.0 + 0.2 * (0.09 + 0.1 * 0.16 + 0.5 * 0.25) - 0.05 * 0.5;
        assert!((g.eval(&y) - expect).abs() < 1e-15);
    }
}
