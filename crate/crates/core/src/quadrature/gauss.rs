//! Gauss rules from the three-term recurrence (Golub–Welsch).

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of the m-point Gauss rule on [0, 1] for the weight (1−t)^k.
///
/// Weights sum to ∫₀¹ (1−t)^k dt = 1/(k+1). The rule integrates p(t)(1−t)^k exactly for
/// deg p ≤ 2m − 1.
pub fn gauss_jacobi_unit(m: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "rule needs at least one node");
    let a = k as f64;
    let b = 0.0;
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let kk = i as f64;
        let s = 2.0 * kk + a + b;
        let alpha = if i == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        jac[(i, i)] = alpha;
        if i + 1 < m {
            let j = kk + 1.0;
            let s1 = 2.0 * j + a + b;
            let beta =
                4.0 * j * (j + a) * (j + b) * (j + a + b) / (s1 * s1 * (s1 + 1.0) * (s1 - 1.0));
            jac[(i, i + 1)] = beta.sqrt();
            jac[(i + 1, i)] = beta.sqrt();
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            ((1.0 + x) / 2.0, v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let scale = 1.0 / ((k as f64 + 1.0) * total);
    pairs.into_iter().map(|(t, w)| (t, w * scale)).unzip()
}

/// Gauss–Legendre rule on [0, 1].
pub fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi_unit(m, 0)
}
