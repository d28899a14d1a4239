//! Chebyshev collocation on the normalized cell coordinate ξ ∈ [0, 1].
//!
//! Nodes are the Gauss–Lobatto points ordered from the entrance (ξ = 0) to
//! the exit (ξ = 1).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn nodes(n: usize) -> Vec<f64> {
    let m = (n - 1) as f64;
    (0..n).map(|i| 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / m).cos())).collect()
}

/// Differentiation matrix `D[i][j]` with `(d f/dξ)(ξ_i) ≈ Σ_j D[i][j] f(ξ_j)`.
pub fn diff_matrix(n: usize) -> Vec<Vec<f64>> {
    let m = n - 1;
    let x: Vec<f64> = (0..n).map(|i| (std::f64::consts::PI * i as f64 / m as f64).cos()).collect();
    let c: Vec<f64> = (0..n)
        .map(|i| {
            let base = if i == 0 || i == m { 2.0 } else { 1.0 };
            if i % 2 == 0 {
                base
            } else {
                -base
            }
        })
        .collect();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d[i][j] = c[i] / c[j] / (x[i] - x[j]);
            }
        }
    }
    for i in 0..n {
        let s: f64 = (0..n).filter(|&j| j != i).map(|j| d[i][j]).sum();
        d[i][i] = -s;
    }
    // ξ = (1 - x) / 2, so d/dξ = -2 d/dx.
    for row in &mut d {
        for v in row.iter_mut() {
            *v *= -2.0;
        }
    }
    d
}

/// Clenshaw–Curtis weights for ∫₀¹ f(ξ) dξ on the nodes.
pub fn quadrature_weights(n: usize) -> Vec<f64> {
    let m = n - 1;
    let theta: Vec<f64> = (0..n).map(|i| std::f64::consts::PI * i as f64 / m as f64).collect();
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut v = 1.0;
        for k in 1..=m / 2 {
            let b = if 2 * k == m { 1.0 } else { 2.0 };
            v -= b * (2.0 * k as f64 * theta[i]).cos() / (4.0 * (k * k) as f64 - 1.0);
        }
        let c = if i == 0 || i == m { 1.0 } else { 2.0 };
        w[i] = c * v / m as f64;
    }
    // Weights above integrate over [-1, 1]; rescale to [0, 1].
    w.iter().map(|x| 0.5 * x).collect()
}

/// Solves `∂ξ E + K E = s(ξ)` with `E(0)` given, for an `nq`-component field
/// and a constant `nq × nq` coupling `K`, by collocation. The inverse of the
/// collocation operator is precomputed.
#[derive(Debug, Clone)]
pub struct FieldSolver {
    n: usize,
    nq: usize,
    inv: Vec<Complex64>,
}

impl FieldSolver {
    pub fn new(n: usize, k: &[Complex64], nq: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::validation(format!("need at least 4 Chebyshev points, got {n}")));
        }
        assert_eq!(k.len(), nq * nq);
        let d = diff_matrix(n);
        let dim = n * nq;
        let mut a = DMatrix::<Complex64>::zeros(dim, dim);
        for i in 0..n {
            for q in 0..nq {
                let row = i * nq + q;
                if i == 0 {
                    a[(row, row)] = Complex64::ONE;
                    continue;
                }
                for j in 0..n {
                    a[(row, j * nq + q)] += Complex64::new(d[i][j], 0.0);
                }
                for p in 0..nq {
                    a[(row, i * nq + p)] += k[q * nq + p];
                }
            }
        }
        let inv = a
            .try_inverse()
            .ok_or_else(|| Error::Divergence { tau_ns: f64::NAN, msg: "singular field collocation operator".into() })?;
        let mut flat = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                flat.push(inv[(r, c)]);
            }
        }
        Ok(FieldSolver { n, nq, inv: flat })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nq(&self) -> usize {
        self.nq
    }

    /// `source` holds `s(ξ_i)` at index `i*nq + q`; entries for `i = 0` are
    /// ignored and replaced by `e_in`. Writes `E(ξ_i)` into `out`.
    pub fn solve(&self, e_in: &[Complex64], source: &[Complex64], out: &mut [Complex64]) {
        let dim = self.n * self.nq;
        for r in 0..dim {
            let row = &self.inv[r * dim..(r + 1) * dim];
            let mut acc: Complex64 = (0..self.nq).map(|q| row[q] * e_in[q]).sum();
            for (c, s) in row.iter().zip(source).skip(self.nq) {
                acc += c * s;
            }
            out[r] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_span_cell() {
        let x = nodes(16);
        assert_eq!(x[0], 0.0);
        assert!((x[15] - 1.0).abs() < 1e-15);
        assert!(x.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn differentiates_polynomials_exactly() {
        let n = 9;
        let x = nodes(n);
        let d = diff_matrix(n);
        for i in 0..n {
            let deriv: f64 = (0..n).map(|j| d[i][j] * x[j].powi(5)).sum();
            assert!((deriv - 5.0 * x[i].powi(4)).abs() < 1e-11, "{i}");
        }
    }

    #[test]
    fn quadrature_integrates_polynomials() {
        let n = 8;
        let x = nodes(n);
        let w = quadrature_weights(n);
        for p in 0..7 {
            let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(p)).sum();
            assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-13, "degree {p}");
        }
    }

    #[test]
    fn constant_absorption_is_exponential() {
        let n = 16;
        let k = [Complex64::new(2.0, 0.5)];
        let solver = FieldSolver::new(n, &k, 1).unwrap();
        let mut out = vec![Complex64::ZERO; n];
        solver.solve(&[Complex64::ONE], &vec![Complex64::ZERO; n], &mut out);
        for (xi, e) in nodes(n).iter().zip(&out) {
            let exact = (-k[0] * xi).exp();
            assert!((e - exact).norm() < 1e-10);
        }
    }
}
