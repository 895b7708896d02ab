//! Monomials x^a x̄^b in the ambient coordinates of C^{n+1}.

use std::collections::HashMap;

use crate::geometry::C64;

#[derive(Clone, Debug)]
pub struct MonomialSet {
    /// Number of complex coordinates, n + 1.
    pub dim: usize,
    pub degree: usize,
    pub exps: Vec<(Vec<u8>, Vec<u8>)>,
    index: HashMap<(Vec<u8>, Vec<u8>), usize>,
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if parts == 1 {
        prefix.push(total as u8);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first as u8);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// Exponent vectors of length `parts` summing to `total`, lexicographically descending.
pub fn exponents(total: usize, parts: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    compositions(total, parts, &mut Vec::new(), &mut out);
    out
}

/// Power tables x_j^e and x̄_j^e for e ≤ degree.
pub struct Powers {
    pub hol: Vec<Vec<C64>>,
    pub anti: Vec<Vec<C64>>,
}

impl Powers {
    pub fn new(x: &[C64], degree: usize) -> Self {
        let mut hol = Vec::with_capacity(x.len());
        let mut anti = Vec::with_capacity(x.len());
        for &xj in x {
            let mut h = Vec::with_capacity(degree + 1);
            let mut a = Vec::with_capacity(degree + 1);
            h.push(C64::new(1.0, 0.0));
            a.push(C64::new(1.0, 0.0));
            for e in 1..=degree {
                h.push(h[e - 1] * xj);
                a.push(a[e - 1] * xj.conj());
            }
            hol.push(h);
            anti.push(a);
        }
        Self { hol, anti }
    }
}

impl MonomialSet {
    pub fn new(dim: usize, degree: usize) -> Self {
        let mut exps = Vec::new();
        for total in 0..=degree {
            for p in (0..=total).rev() {
                let q = total - p;
                for a in exponents(p, dim) {
                    for b in exponents(q, dim) {
                        exps.push((a.clone(), b));
                    }
                }
            }
        }
        let index = exps
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, e)| (e, i))
            .collect();
        Self {
            dim,
            degree,
            exps,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn index_of(&self, a: &[u8], b: &[u8]) -> Option<usize> {
        self.index.get(&(a.to_vec(), b.to_vec())).copied()
    }

    /// Index of the conjugate monomial x^b x̄^a.
    pub fn conjugate_index(&self, i: usize) -> usize {
        let (a, b) = &self.exps[i];
        self.index[&(b.clone(), a.clone())]
    }

    pub fn bidegree(&self, i: usize) -> (usize, usize) {
        let (a, b) = &self.exps[i];
        (
            a.iter().map(|&e| e as usize).sum(),
            b.iter().map(|&e| e as usize).sum(),
        )
    }

    pub fn eval_one(&self, i: usize, pw: &Powers) -> C64 {
        let (a, b) = &self.exps[i];
        let mut v = C64::new(1.0, 0.0);
        for j in 0..self.dim {
            if a[j] > 0 {
                v *= pw.hol[j][a[j] as usize];
            }
            if b[j] > 0 {
                v *= pw.anti[j][b[j] as usize];
            }
        }
        v
    }

    /// Σ_m c_m x^{a_m} x̄^{b_m}.
    pub fn eval(&self, coeffs: &[C64], pw: &Powers) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (i, c) in coeffs.iter().enumerate() {
            if c.re != 0.0 || c.im != 0.0 {
                acc += c * self.eval_one(i, pw);
            }
        }
        acc
    }

    /// Wirtinger derivatives (∂P/∂x̄_j)_j of P = Σ c_m x^{a_m} x̄^{b_m}.
    pub fn eval_dbar(&self, coeffs: &[C64], pw: &Powers) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for (i, c) in coeffs.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let (a, b) = &self.exps[i];
            for j in 0..self.dim {
                if b[j] == 0 {
                    continue;
                }
                let mut v = *c * b[j] as f64;
                for l in 0..self.dim {
                    if a[l] > 0 {
                        v *= pw.hol[l][a[l] as usize];
                    }
                    let e = if l == j { b[l] - 1 } else { b[l] };
                    if e > 0 {
                        v *= pw.anti[l][e as usize];
                    }
                }
                out[j] += v;
            }
        }
        out
    }
}
