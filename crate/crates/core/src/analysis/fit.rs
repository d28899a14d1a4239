//! Rabi (cos²) and lifetime fits with parametric-bootstrap uncertainties.
//!
//! Bootstrap replica `i` draws its noise from a ChaCha stream keyed by
//! `(seed, i)`, so results do not depend on how replicas are scheduled.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::efficiency::EfficiencyTrace;
use super::lsq::{levenberg_marquardt, rss, Model, Solution};
use crate::error::{Error, Result};

pub const DEFAULT_BOOTSTRAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub n_boot: usize,
    pub seed: u64,
}

impl BootstrapOptions {
    pub fn new(n_boot: usize, seed: u64) -> Self {
        BootstrapOptions { n_boot, seed }
    }
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions { n_boot: DEFAULT_BOOTSTRAP, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    /// Bootstrap standard deviation.
    pub uncertainty: f64,
    /// 2.5 and 97.5 percentiles of the bootstrap distribution.
    pub interval95: (f64, f64),
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.interval95.0 && x <= self.interval95.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    /// Fitted model parameters.
    pub parameters: Vec<Estimate>,
    /// Quantities computed from the parameters (π energy, fidelity, ...).
    pub derived: Vec<Estimate>,
    /// sqrt(Σ residual²) of the best fit.
    pub residual_norm: f64,
    pub n_boot: usize,
    /// Replicas whose refit failed and were left out of the statistics.
    pub n_failed: usize,
    pub seed: u64,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<&Estimate> {
        self.parameters.iter().chain(&self.derived).find(|e| e.name == name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |e| e.value)
    }
}

/// η(E) = η₀·[1 − V·cos²(a·√E + φ)], parameters `[η₀, V, a, φ]`.
struct Rabi;

impl Model for Rabi {
    fn n_params(&self) -> usize {
        4
    }

    fn value(&self, p: &[f64], e: f64) -> f64 {
        let c = (p[2] * e.sqrt() + p[3]).cos();
        p[0] * (1.0 - p[1] * c * c)
    }

    fn gradient(&self, p: &[f64], e: f64, g: &mut [f64]) {
        let u = p[2] * e.sqrt() + p[3];
        let c = u.cos();
        let s2 = (2.0 * u).sin();
        g[0] = 1.0 - p[1] * c * c;
        g[1] = -p[0] * c * c;
        g[2] = p[0] * p[1] * s2 * e.sqrt();
        g[3] = p[0] * p[1] * s2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LifetimeModel {
    /// η₀·exp(−(t/t_c)²)
    Gaussian,
    /// η₀·exp(−t/t_c)
    Exponential,
}

impl std::str::FromStr for LifetimeModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(LifetimeModel::Gaussian),
            "exponential" => Ok(LifetimeModel::Exponential),
            other => Err(Error::config(format!("unknown lifetime model '{other}' (gaussian | exponential)"))),
        }
    }
}

impl Model for LifetimeModel {
    fn n_params(&self) -> usize {
        2
    }

    fn value(&self, p: &[f64], t: f64) -> f64 {
        match self {
            LifetimeModel::Gaussian => p[0] * (-(t / p[1]).powi(2)).exp(),
            LifetimeModel::Exponential => p[0] * (-t / p[1]).exp(),
        }
    }

    fn gradient(&self, p: &[f64], t: f64, g: &mut [f64]) {
        match self {
            LifetimeModel::Gaussian => {
                let e = (-(t / p[1]).powi(2)).exp();
                g[0] = e;
                g[1] = p[0] * e * 2.0 * t * t / p[1].powi(3);
            }
            LifetimeModel::Exponential => {
                let e = (-t / p[1]).exp();
                g[0] = e;
                g[1] = p[0] * e * t / (p[1] * p[1]);
            }
        }
    }
}

fn check_data(x: &[f64], y: &[f64], sigma: &[f64], min_points: usize) -> Result<()> {
    if x.len() != y.len() || x.len() != sigma.len() {
        return Err(Error::fit("data columns have different lengths"));
    }
    if x.len() < min_points {
        return Err(Error::fit(format!("need at least {min_points} points, got {}", x.len())));
    }
    if x.iter().chain(y).chain(sigma).any(|v| !v.is_finite()) || sigma.iter().any(|&s| s < 0.0) {
        return Err(Error::fit("data contain non-finite values or negative uncertainties"));
    }
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi - lo <= 1e-12 * hi.abs().max(1e-300) {
        return Err(Error::fit(format!(
            "fit did not converge: all {} efficiencies are equal ({lo}); the model parameters are not identifiable",
            y.len()
        )));
    }
    Ok(())
}

/// Linear least squares for `y ≈ c0 − c1·cos²(a√E + φ)`; returns (rss, c0, c1).
fn linear_rabi(e: &[f64], y: &[f64], a: f64, phi: f64) -> (f64, f64, f64) {
    let n = e.len() as f64;
    let f: Vec<f64> = e.iter().map(|&x| (a * x.sqrt() + phi).cos().powi(2)).collect();
    let (sf, sff) = (f.iter().sum::<f64>(), f.iter().map(|v| v * v).sum::<f64>());
    let (sy, sfy) = (y.iter().sum::<f64>(), f.iter().zip(y).map(|(a, b)| a * b).sum::<f64>());
    let det = n * sff - sf * sf;
    if det.abs() < 1e-14 * n * sff.max(1e-300) {
        return (f64::INFINITY, 0.0, 0.0);
    }
    let c0 = (sy * sff - sf * sfy) / det;
    let slope = (n * sfy - sf * sy) / det;
    let c1 = -slope;
    let r: f64 = e.iter().zip(y).zip(&f).map(|((_, yi), fi)| (c0 - c1 * fi - yi).powi(2)).sum();
    (r, c0, c1)
}

/// Puts the parameters in the canonical branch V ≥ 0, a > 0, φ ∈ [0, π).
/// η₀(1 − V cos²u) equals η₀(1 − V)·(1 − V' cos²(u + π/2)) with
/// V' = −V/(1 − V), which maps V < 0 onto the canonical branch.
fn canonical_rabi(mut p: Vec<f64>) -> Vec<f64> {
    if p[1] < 0.0 {
        let v = p[1];
        p[0] *= 1.0 - v;
        p[1] = -v / (1.0 - v);
        p[3] += 0.5 * PI;
    }
    if p[2] < 0.0 {
        p[2] = -p[2];
        p[3] = -p[3];
    }
    p[3] = p[3].rem_euclid(PI);
    p
}

/// Smallest positive energy with cos²(a√E + φ) = 1, or the branch closest
/// to `near` when given.
fn pi_energy(p: &[f64], near: Option<f64>) -> f64 {
    let (a, phi) = (p[2], p[3]);
    let branch = |k: f64| ((k * PI - phi) / a).powi(2);
    match near {
        Some(target) => {
            let k0 = (a * target.sqrt() + phi) / PI;
            [k0.floor(), k0.ceil()]
                .into_iter()
                .filter(|&k| k * PI - phi > 0.0)
                .map(branch)
                .min_by(|x, y| (x - target).abs().total_cmp(&(y - target).abs()))
                .unwrap_or(f64::NAN)
        }
        // φ ∈ [0, π) so k = 1 is the first positive branch.
        None => branch(1.0),
    }
}

fn rabi_best(e: &[f64], y: &[f64]) -> Option<Solution> {
    let lo = e.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0).sqrt();
    let hi = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max).sqrt();
    let span = (hi - lo).max(1e-12);
    // Frequencies from a quarter period to eight periods over the data.
    let (a_min, a_max) = (0.25 * PI / span, 8.0 * PI / span);
    let grid: Vec<f64> = (0..120).map(|i| a_min * (a_max / a_min).powf(i as f64 / 119.0)).collect();
    let mut best: Option<Solution> = None;
    for phi0 in [0.0, 0.5 * PI, PI, 1.5 * PI] {
        let Some((_, a, c0, c1)) = grid
            .iter()
            .map(|&a| {
                let (r, c0, c1) = linear_rabi(e, y, a, phi0);
                (r, a, c0, c1)
            })
            .filter(|t| t.0.is_finite() && t.2 != 0.0)
            .min_by(|p, q| p.0.total_cmp(&q.0))
        else {
            continue;
        };
        let sol = levenberg_marquardt(&Rabi, e, y, &[c0, c1 / c0, a, phi0]);
        if sol.converged && sol.params.iter().all(|v| v.is_finite()) && best.as_ref().is_none_or(|b| sol.rss < b.rss) {
            best = Some(sol);
        }
    }
    best
}

fn percentile_interval(mut v: Vec<f64>) -> (f64, f64) {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let at = |q: f64| {
        let pos = q * (n - 1) as f64;
        let (i, f) = (pos.floor() as usize, pos.fract());
        if i + 1 < n {
            v[i] * (1.0 - f) + v[i + 1] * f
        } else {
            v[i]
        }
    };
    (at(0.025), at(0.975))
}

fn estimate(name: &str, value: f64, samples: Vec<f64>) -> Estimate {
    let n = samples.len();
    let sd = if n > 1 {
        let mean = samples.iter().sum::<f64>() / n as f64;
        (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let interval95 = if n > 0 { percentile_interval(samples) } else { (value, value) };
    Estimate { name: name.to_string(), value, uncertainty: sd, interval95 }
}

/// Runs the parametric bootstrap: replica `i` refits `y_j + σ_j·N(0, 1)` with
/// noise from stream `i` of ChaCha8 seeded by `seed`. Returns per-replica
/// outputs of `refit` (failed refits are `None`).
fn bootstrap<F>(y: &[f64], sigma: &[f64], opts: BootstrapOptions, refit: F) -> Vec<Option<Vec<f64>>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>> + Sync,
{
    (0..opts.n_boot)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let yb: Vec<f64> = y
                .iter()
                .zip(sigma)
                .map(|(&v, &s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v + s * z
                })
                .collect();
            refit(&yb)
        })
        .collect()
}

fn assemble(
    model: &str,
    names: &[&str],
    best: &[f64],
    derived_names: &[&str],
    derived_best: &[f64],
    replicas: Vec<Option<Vec<f64>>>,
    residual_norm: f64,
    opts: BootstrapOptions,
) -> Result<FitResult> {
    let n_failed = replicas.iter().filter(|r| r.is_none()).count();
    let ok: Vec<Vec<f64>> = replicas.into_iter().flatten().collect();
    if opts.n_boot > 0 && ok.len() * 2 < opts.n_boot {
        return Err(Error::fit(format!("bootstrap refits failed for {n_failed} of {} replicas", opts.n_boot)));
    }
    if n_failed > 0 {
        log::warn!("{n_failed} of {} bootstrap refits failed and were skipped", opts.n_boot);
    }
    let column = |k: usize| ok.iter().map(|r| r[k]).collect::<Vec<f64>>();
    let parameters = names.iter().enumerate().map(|(k, n)| estimate(n, best[k], column(k))).collect();
    let derived =
        derived_names.iter().enumerate().map(|(k, n)| estimate(n, derived_best[k], column(names.len() + k))).collect();
    Ok(FitResult {
        model: model.to_string(),
        parameters,
        derived,
        residual_norm,
        n_boot: opts.n_boot,
        n_failed,
        seed: opts.seed,
    })
}

/// Fits η(E) = η₀·[1 − V·cos²(a·√E + φ)] to (pulse energy nJ, efficiency, σ)
/// triples. Parameters `eta0, visibility, a, phi` (a > 0, φ ∈ [0, π));
/// derived `pi_energy_nj` (first energy where cos² = 1, i.e. the extremum a
/// π rotation produces) and `pi_fidelity` (= V).
pub fn fit_rabi(energy_nj: &[f64], eta: &[f64], sigma: &[f64], opts: BootstrapOptions) -> Result<FitResult> {
    check_data(energy_nj, eta, sigma, 4)?;
    if energy_nj.iter().any(|&e| e < 0.0) {
        return Err(Error::fit("pulse energies must be non-negative"));
    }
    let best = rabi_best(energy_nj, eta).ok_or_else(|| Error::fit("cos² fit did not converge from any start"))?;
    let p = canonical_rabi(best.params.clone());
    let lo = energy_nj.iter().cloned().fold(f64::INFINITY, f64::min).sqrt();
    let hi = energy_nj.iter().cloned().fold(f64::NEG_INFINITY, f64::max).sqrt();
    if p[2] * (hi - lo) < 0.5 * PI * (1.0 - 1e-6) {
        return Err(Error::fit(format!(
            "data span {:.3} rad of Rabi phase, less than half a period (π/2); residual norm {:.3e}",
            p[2] * (hi - lo),
            best.rss.sqrt()
        )));
    }
    let e_pi = pi_energy(&p, None);
    let derived_best = [e_pi, p[1]];
    let replicas = bootstrap(eta, sigma, opts, |yb| {
        let s = levenberg_marquardt(&Rabi, energy_nj, yb, &p);
        let s = if s.converged { s } else { rabi_best(energy_nj, yb)? };
        // Keep the phase branch of the best fit.
        let mut q = canonical_rabi(s.params);
        if q[3] - p[3] > 0.5 * PI {
            q[3] -= PI;
        } else if p[3] - q[3] > 0.5 * PI {
            q[3] += PI;
        }
        let mut out = q.clone();
        out.push(pi_energy(&q, Some(e_pi)));
        out.push(q[1]);
        out.iter().all(|v| v.is_finite()).then_some(out)
    });
    assemble(
        "rabi-cos2",
        &["eta0", "visibility", "a", "phi"],
        &p,
        &["pi_energy_nj", "pi_fidelity"],
        &derived_best,
        replicas,
        best.rss.sqrt(),
        opts,
    )
}

fn lifetime_start(model: LifetimeModel, t: &[f64], y: &[f64]) -> Option<[f64; 2]> {
    // Log-linear regression on the positive points.
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&ti, &v)| {
            let x = match model {
                LifetimeModel::Gaussian => ti * ti,
                LifetimeModel::Exponential => ti,
            };
            (x, v.ln())
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return None;
    }
    let tc = match model {
        LifetimeModel::Gaussian => (-1.0 / slope).sqrt(),
        LifetimeModel::Exponential => -1.0 / slope,
    };
    Some([(my - slope * mx).exp(), tc])
}

fn lifetime_solve(model: LifetimeModel, t: &[f64], y: &[f64], start: &[f64]) -> Option<Vec<f64>> {
    let s = levenberg_marquardt(&model, t, y, start);
    (s.converged && s.params[1].is_finite() && s.params[1] != 0.0).then(|| vec![s.params[0], s.params[1].abs()])
}

/// Fits a Gaussian or exponential decay to a trace. Parameters `eta0`,
/// `t_c_ns`.
pub fn fit_lifetime(trace: &EfficiencyTrace, model: LifetimeModel, opts: BootstrapOptions) -> Result<FitResult> {
    let (t, y, sigma) = (trace.times(), trace.efficiencies(), trace.sigmas());
    check_data(&t, &y, &sigma, 3)?;
    let start = lifetime_start(model, &t, &y)
        .ok_or_else(|| Error::fit("fit did not converge: efficiencies do not decay with storage time"))?;
    let p = lifetime_solve(model, &t, &y, &start)
        .ok_or_else(|| Error::fit("lifetime fit did not converge from the log-linear start"))?;
    let r = rss(&model, &p, &t, &y).sqrt();
    let replicas = bootstrap(&y, &sigma, opts, |yb| {
        lifetime_solve(model, &t, yb, &p).or_else(|| lifetime_solve(model, &t, yb, &lifetime_start(model, &t, yb)?))
    });
    let name = match model {
        LifetimeModel::Gaussian => "gaussian",
        LifetimeModel::Exponential => "exponential",
    };
    assemble(name, &["eta0", "t_c_ns"], &p, &[], &[], replicas, r, opts)
}

/// Efficiency predicted by a Rabi fit at pulse energy `e_nj`.
pub fn rabi_curve(fit: &FitResult, e_nj: f64) -> f64 {
    let p: Vec<f64> = ["eta0", "visibility", "a", "phi"].iter().map(|n| fit.value(n)).collect();
    Rabi.value(&p, e_nj)
}
