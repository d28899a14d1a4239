//! Grid search over the storage-level hyperfine constants (A, B) of the d
//! manifold: simulate the data's storage times at every node, form the sum
//! of squared residuals, interpolate bicubically and polish the minimum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::efficiency::EfficiencyTrace;
use crate::atomics::Label;
use crate::error::{Error, Result};
use crate::solver::SolverConfig;

/// Largest tolerated fraction of failed nodes.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridOptions {
    /// Resampled data sets used for the uncertainty of the minimum.
    pub n_resample: usize,
    pub seed: u64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { n_resample: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualGrid {
    pub a_axis_mhz: Vec<f64>,
    pub b_axis_mhz: Vec<f64>,
    /// `residual[i][j]` at (A_i, B_j); NaN at failed nodes.
    pub residual: Vec<Vec<f64>>,
    pub failed: Vec<(usize, usize)>,
    pub best_node: (usize, usize),
    /// Interpolated minimum (A*, B*) in MHz and its value.
    pub minimum: (f64, f64),
    pub minimum_value: f64,
    /// Standard deviation of (A*, B*) over resampled data sets.
    pub uncertainty: (f64, f64),
    /// The residual surface has no usable curvature; the minimum is just the
    /// tie-broken best node.
    pub flat: bool,
    pub n_resample: usize,
    pub seed: u64,
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.len() < 3 {
        return Err(Error::validation(format!("{name} axis needs at least 3 points, got {}", axis.len())));
    }
    if axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::validation(format!("{name} axis must increase strictly")));
    }
    Ok(())
}

/// Bicubic interpolant on a rectilinear grid with finite-difference node
/// derivatives.
struct Bicubic<'a> {
    x: &'a [f64],
    y: &'a [f64],
    f: &'a [Vec<f64>],
}

impl Bicubic<'_> {
    fn d_axis(axis: &[f64], i: usize, val: impl Fn(usize) -> f64) -> f64 {
        let n = axis.len();
        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
        (val(hi) - val(lo)) / (axis[hi] - axis[lo])
    }

    fn node(&self, i: usize, j: usize) -> [f64; 4] {
        let fx = Self::d_axis(self.x, i, |k| self.f[k][j]);
        let fy = Self::d_axis(self.y, j, |k| self.f[i][k]);
        let fxy = {
            let n = self.x.len();
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (Self::d_axis(self.y, j, |k| self.f[hi][k]) - Self::d_axis(self.y, j, |k| self.f[lo][k]))
                / (self.x[hi] - self.x[lo])
        };
        [self.f[i][j], fx, fy, fxy]
    }

    fn eval(&self, a: f64, b: f64) -> f64 {
        let cell = |axis: &[f64], v: f64| {
            let n = axis.len();
            let k = axis.partition_point(|&t| t <= v).clamp(1, n - 1) - 1;
            let h = axis[k + 1] - axis[k];
            (k, h, ((v - axis[k]) / h).clamp(0.0, 1.0))
        };
        let (i, hx, t) = cell(self.x, a);
        let (j, hy, u) = cell(self.y, b);
        // Hermite basis on [0, 1].
        let h = |s: f64| {
            [
                2.0 * s.powi(3) - 3.0 * s * s + 1.0,
                s.powi(3) - 2.0 * s * s + s,
                -2.0 * s.powi(3) + 3.0 * s * s,
                s.powi(3) - s * s,
            ]
        };
        let (ht, hu) = (h(t), h(u));
        let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
        let mut out = 0.0;
        for &(ci, cj) in &corners {
            let [f, fx, fy, fxy] = self.node(ci, cj);
            let (bx0, bx1) = if ci == i { (ht[0], ht[1]) } else { (ht[2], ht[3]) };
            let (by0, by1) = if cj == j { (hu[0], hu[1]) } else { (hu[2], hu[3]) };
            out += f * bx0 * by0 + fx * hx * bx1 * by0 + fy * hy * bx0 * by1 + fxy * hx * hy * bx1 * by1;
        }
        out
    }
}

/// Quasi-Newton (BFGS, numerical gradient) polish of the interpolant from
/// `start`, kept inside the grid hull.
fn polish(surface: &Bicubic, start: (f64, f64)) -> (f64, f64, f64) {
    let (x0, x1) = (surface.x[0], *surface.x.last().unwrap());
    let (y0, y1) = (surface.y[0], *surface.y.last().unwrap());
    let clamp = |p: [f64; 2]| [p[0].clamp(x0, x1), p[1].clamp(y0, y1)];
    let hx = 1e-6 * (x1 - x0);
    let hy = 1e-6 * (y1 - y0);
    let f = |p: [f64; 2]| surface.eval(p[0], p[1]);
    let grad = |p: [f64; 2]| {
        let gx = (f(clamp([p[0] + hx, p[1]])) - f(clamp([p[0] - hx, p[1]]))) / (2.0 * hx);
        let gy = (f(clamp([p[0], p[1] + hy])) - f(clamp([p[0], p[1] - hy]))) / (2.0 * hy);
        [gx, gy]
    };
    let mut p = [start.0, start.1];
    let mut fp = f(p);
    let mut g = grad(p);
    // Inverse Hessian, scaled to the grid.
    let mut hinv = [[(x1 - x0).powi(2), 0.0], [0.0, (y1 - y0).powi(2)]];
    let norm0 = (fp.abs() + 1e-300).max(1e-300);
    for _ in 0..100 {
        let dir = [-(hinv[0][0] * g[0] + hinv[0][1] * g[1]), -(hinv[1][0] * g[0] + hinv[1][1] * g[1])];
        let mut step = 1.0;
        let mut next = None;
        while step > 1e-10 {
            let q = clamp([p[0] + step * dir[0], p[1] + step * dir[1]]);
            let fq = f(q);
            if fq < fp {
                next = Some((q, fq));
                break;
            }
            step *= 0.5;
        }
        let Some((q, fq)) = next else { break };
        let gq = grad(q);
        let s = [q[0] - p[0], q[1] - p[1]];
        let yv = [gq[0] - g[0], gq[1] - g[1]];
        let sy = s[0] * yv[0] + s[1] * yv[1];
        if sy > 1e-300 {
            let hy_ = [hinv[0][0] * yv[0] + hinv[0][1] * yv[1], hinv[1][0] * yv[0] + hinv[1][1] * yv[1]];
            let yhy = yv[0] * hy_[0] + yv[1] * hy_[1];
            for r in 0..2 {
                for c in 0..2 {
                    hinv[r][c] += (sy + yhy) * s[r] * s[c] / (sy * sy) - (hy_[r] * s[c] + s[r] * hy_[c]) / sy;
                }
            }
        }
        let done = (fp - fq).abs() <= 1e-14 * norm0;
        p = q;
        fp = fq;
        g = gq;
        if done {
            break;
        }
    }
    (p[0], p[1], fp)
}

/// Best node with ties broken toward smaller |A|, then smaller |B|.
fn best_node(a: &[f64], b: &[f64], s: &[Vec<f64>]) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_val = f64::INFINITY;
    for i in 0..a.len() {
        for j in 0..b.len() {
            let v = s[i][j];
            if !v.is_finite() {
                continue;
            }
            let better =
                v < best_val || (v == best_val && (a[i].abs(), b[j].abs()) < (a[best.0].abs(), b[best.1].abs()));
            if better {
                best = (i, j);
                best_val = v;
            }
        }
    }
    best
}

struct Located {
    node: (usize, usize),
    min: (f64, f64),
    value: f64,
    flat: bool,
}

fn locate(a: &[f64], b: &[f64], s: &[Vec<f64>]) -> Located {
    let node = best_node(a, b, s);
    let finite = s.iter().flatten().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let flat = hi - lo <= 1e-12 * hi.abs().max(1e-300);
    if flat {
        return Located { node, min: (a[node.0], b[node.1]), value: s[node.0][node.1], flat };
    }
    // Failed nodes take the largest finite residual for interpolation.
    let filled: Vec<Vec<f64>> =
        s.iter().map(|row| row.iter().map(|&v| if v.is_finite() { v } else { hi }).collect()).collect();
    let surface = Bicubic { x: a, y: b, f: &filled };
    let (ma, mb, mv) = polish(&surface, (a[node.0], b[node.1]));
    Located { node, min: (ma, mb), value: mv, flat }
}

/// `simulate(cfg, t)` returns the model efficiency at storage time `t` for a
/// node configuration (already normalized the same way as `data`). Node
/// configurations are `base` with the d-manifold constants replaced.
pub fn hyperfine_grid_search<F>(
    data: &EfficiencyTrace,
    a_axis_mhz: &[f64],
    b_axis_mhz: &[f64],
    base: &SolverConfig,
    simulate: F,
    opts: GridOptions,
) -> Result<ResidualGrid>
where
    F: Fn(&SolverConfig, &[f64]) -> Result<Vec<f64>> + Sync,
{
    check_axis("A", a_axis_mhz)?;
    check_axis("B", b_axis_mhz)?;
    let times = data.times();
    let y = data.efficiencies();
    let sigma = data.sigmas();
    let (na, nb) = (a_axis_mhz.len(), b_axis_mhz.len());

    let nodes: Vec<(usize, usize)> = (0..na).flat_map(|i| (0..nb).map(move |j| (i, j))).collect();
    let sims: Vec<Option<Vec<f64>>> = nodes
        .par_iter()
        .map(|&(i, j)| {
            let run = || -> Result<Vec<f64>> {
                let mut cfg = base.clone();
                cfg.scheme = base.scheme.with_hyperfine_constants(Label::D, a_axis_mhz[i], b_axis_mhz[j])?;
                let v = simulate(&cfg, &times)?;
                if v.len() != times.len() || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::validation("simulation returned a malformed trace"));
                }
                Ok(v)
            };
            match run() {
                Ok(v) => Some(v),
                Err(e) => {
                    log::warn!("grid node A = {} MHz, B = {} MHz failed: {e}", a_axis_mhz[i], b_axis_mhz[j]);
                    None
                }
            }
        })
        .collect();
    let failed: Vec<(usize, usize)> = nodes.iter().zip(&sims).filter(|(_, s)| s.is_none()).map(|(&n, _)| n).collect();
    if failed.len() as f64 > MAX_FAILED_FRACTION * nodes.len() as f64 {
        return Err(Error::fit(format!(
            "{} of {} grid nodes failed (more than {:.0} %)",
            failed.len(),
            nodes.len(),
            100.0 * MAX_FAILED_FRACTION
        )));
    }

    let surface_for = |target: &[f64]| -> Vec<Vec<f64>> {
        let mut s = vec![vec![f64::NAN; nb]; na];
        for (&(i, j), sim) in nodes.iter().zip(&sims) {
            if let Some(v) = sim {
                s[i][j] = v.iter().zip(target).map(|(m, d)| (m - d).powi(2)).sum();
            }
        }
        s
    };
    let residual = surface_for(&y);
    let found = locate(a_axis_mhz, b_axis_mhz, &residual);
    if found.flat {
        log::warn!("flat surface: the residual does not vary over the grid, the minimum is ill-defined");
    }

    let minima: Vec<(f64, f64)> = (0..opts.n_resample)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(r as u64);
            let yr: Vec<f64> = y
                .iter()
                .zip(&sigma)
                .map(|(&v, &s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v + s * z
                })
                .collect();
            locate(a_axis_mhz, b_axis_mhz, &surface_for(&yr)).min
        })
        .collect();
    let sd = |k: usize| {
        let n = minima.len();
        if n < 2 {
            return 0.0;
        }
        let v: Vec<f64> = minima.iter().map(|m| if k == 0 { m.0 } else { m.1 }).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };

    Ok(ResidualGrid {
        a_axis_mhz: a_axis_mhz.to_vec(),
        b_axis_mhz: b_axis_mhz.to_vec(),
        residual,
        failed,
        best_node: found.node,
        minimum: found.min,
        minimum_value: found.value,
        uncertainty: (sd(0), sd(1)),
        flat: found.flat,
        n_resample: opts.n_resample,
        seed: opts.seed,
    })
}
