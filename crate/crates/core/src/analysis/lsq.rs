//! Damped Gauss–Newton (Levenberg–Marquardt) least squares for the small
//! analytic models used here.

use nalgebra::{DMatrix, DVector};

pub(crate) trait Model {
    fn n_params(&self) -> usize;
    fn value(&self, p: &[f64], x: f64) -> f64;
    /// ∂value/∂p written into `g`.
    fn gradient(&self, p: &[f64], x: f64, g: &mut [f64]);
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub params: Vec<f64>,
    /// Σ residual².
    pub rss: f64,
    pub converged: bool,
}

pub(crate) fn rss<M: Model>(m: &M, p: &[f64], x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&xi, &yi)| (m.value(p, xi) - yi).powi(2)).sum()
}

/// Minimizes Σ (model(x_i) − y_i)² from `p0`.
pub(crate) fn levenberg_marquardt<M: Model>(m: &M, x: &[f64], y: &[f64], p0: &[f64]) -> Solution {
    const MAX_ITER: usize = 500;
    let np = m.n_params();
    let n = x.len();
    let mut p = p0.to_vec();
    let mut cost = rss(m, &p, x, y);
    let mut lambda = 1e-3;
    let mut g = vec![0.0; np];
    let mut jac = DMatrix::<f64>::zeros(n, np);
    let mut res = DVector::<f64>::zeros(n);
    let scale = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_ITER {
        for i in 0..n {
            m.gradient(&p, x[i], &mut g);
            for k in 0..np {
                jac[(i, k)] = g[k];
            }
            res[i] = y[i] - m.value(&p, x[i]);
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &res;
        if jtr.amax() <= 1e-15 * scale.sqrt() {
            return Solution { params: p, rss: cost, converged: true };
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..np {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let c = rss(m, &trial, x, y);
            if c.is_finite() && c <= cost {
                let small_step = step.norm() <= 1e-14 * (1.0 + DVector::from_column_slice(&p).norm());
                let small_gain = cost - c <= 1e-15 * cost.max(1e-300) || c <= 1e-30 * scale;
                p = trial;
                cost = c;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                if small_step || small_gain {
                    return Solution { params: p, rss: cost, converged: true };
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            // No downhill step at any damping: stationary to machine precision.
            return Solution { params: p, rss: cost, converged: cost.is_finite() };
        }
    }
    Solution { params: p, rss: cost, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Line;
    impl Model for Line {
        fn n_params(&self) -> usize {
            2
        }
        fn value(&self, p: &[f64], x: f64) -> f64 {
            p[0] + p[1] * x
        }
        fn gradient(&self, _p: &[f64], x: f64, g: &mut [f64]) {
            g[0] = 1.0;
            g[1] = x;
        }
    }

    struct Decay;
    impl Model for Decay {
        fn n_params(&self) -> usize {
            2
        }
        fn value(&self, p: &[f64], x: f64) -> f64 {
            p[0] * (-x / p[1]).exp()
        }
        fn gradient(&self, p: &[f64], x: f64, g: &mut [f64]) {
            let e = (-x / p[1]).exp();
            g[0] = e;
            g[1] = p[0] * e * x / (p[1] * p[1]);
        }
    }

    #[test]
    fn linear_model_in_one_pass() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.1, 4.9, 7.0];
        let s = levenberg_marquardt(&Line, &x, &y, &[0.0, 0.0]);
        assert!(s.converged);
        // Normal-equation solution.
        assert!((s.params[1] - 1.98).abs() < 1e-10);
        assert!((s.params[0] - 1.03).abs() < 1e-10);
    }

    #[test]
    fn recovers_exponential_exactly() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 20.0).collect();
        let y: Vec<f64> = x.iter().map(|t| 0.7 * (-t / 140.0).exp()).collect();
        let s = levenberg_marquardt(&Decay, &x, &y, &[0.5, 60.0]);
        assert!(s.converged);
        assert!((s.params[0] - 0.7).abs() < 1e-12);
        assert!((s.params[1] - 140.0).abs() < 1e-9);
    }
}
