//! Globally adaptive Gauss–Kronrod (7, 15) integration on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-10,
            max_intervals: 2000,
        }
    }
}

/// One G7K15 panel: (Kronrod value, |Kronrod − Gauss|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates f over [a, b], bisecting the worst panel until the summed error estimate
/// meets max(abs_tol, rel_tol·|value|).
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    opts: &AdaptiveOptions,
) -> Result<Estimate> {
    integrate_breaks(f, &[a, b], opts)
}

/// Like [`integrate`] with the initial partition given by `breaks` (sorted).
pub fn integrate_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    opts: &AdaptiveOptions,
) -> Result<Estimate> {
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gk15(&f, w[0], w[1]);
            value += v;
            error += e;
            heap.push(Panel {
                a: w[0],
                b: w[1],
                value: v,
                error: e,
            });
        }
    }
    while error > opts.abs_tol.max(opts.rel_tol * value.abs()) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::NonConvergentQuadrature {
                error,
                tolerance: opts.abs_tol.max(opts.rel_tol * value.abs()),
            });
        }
        let worst = heap.pop().expect("nonempty panel set");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Panel cannot be split further in floating point.
            return Err(Error::NonConvergentQuadrature {
                error,
                tolerance: opts.abs_tol.max(opts.rel_tol * value.abs()),
            });
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum in a fixed order to avoid drift from incremental updates.
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().map(|p| p.value).sum();
    let error = panels.iter().map(|p| p.error).sum();
    Ok(Estimate {
        value,
        abs_error: error,
    })
}

/// ∫₀^∞ f, through the substitution x = s/(1−s).
pub fn integrate_half_line<F: Fn(f64) -> f64>(
    f: F,
    scale: f64,
    opts: &AdaptiveOptions,
) -> Result<Estimate> {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - s;
        let x = scale * s / one_minus;
        let v = f(x) * scale / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_smooth() {
        let opts = AdaptiveOptions::default();
        let e = integrate(|x| x.powi(5), 0.0, 2.0, &opts).unwrap();
        assert!((e.value - 64.0 / 6.0).abs() < 1e-12);
        let e = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, &opts).unwrap();
        assert!((e.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn half_line_lorentzian() {
        let opts = AdaptiveOptions {
            rel_tol: 1e-12,
            ..Default::default()
        };
        let e = integrate_half_line(|x| 1.0 / (1.0 + x * x), 1.0, &opts).unwrap();
        assert!((e.value - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn divergence_is_reported() {
        let opts = AdaptiveOptions {
            max_intervals: 50,
            ..Default::default()
        };
        let r = integrate(|x: f64| 1.0 / x, 0.0, 1.0, &opts);
        assert!(matches!(r, Err(Error::NonConvergentQuadrature { .. })));
    }
}
