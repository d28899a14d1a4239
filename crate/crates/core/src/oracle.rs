//! Independent reference results for tests: closed-form Rabi and Doppler
//! formulas, and a slow brute-force integrator for small four-level
//! instances.
//!
//! The integrator deliberately shares no numerical code with `solver`: it
//! steps in τ with Heun's explicit method at 0.05 ps, and obtains the field
//! by marching ∂ξE in ξ (RK4, many sub-steps) through a barycentric
//! interpolant of the atomic source, instead of collocation.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::Channel;
use crate::protocol::PulseSequence;
use crate::solver::{InitialCoherence, SimulationRecord, SolverConfig, Tier};

/// Oracle time step, ps.
pub const ORACLE_DTAU_PS: f64 = 0.05;
pub const MAX_CLASSES: usize = 9;
pub const MAX_NZ: usize = 8;
/// RK4 sub-steps per interval between neighbouring ξ nodes.
const XI_SUBSTEPS: usize = 24;
/// Spacing of recorded samples, ps.
const SAMPLE_PS: f64 = 1.0;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Transfer probability of a two-level rotation. With `detuning = 0` this is
/// sin²(area/2); otherwise the square-pulse generalized-Rabi result for a
/// pulse of duration `area / peak_rabi`.
pub fn analytic_rabi(area: f64, detuning: f64, peak_rabi: f64) -> f64 {
    if detuning == 0.0 {
        return (0.5 * area).sin().powi(2);
    }
    let duration = area / peak_rabi;
    let general = (peak_rabi * peak_rabi + detuning * detuning).sqrt();
    (peak_rabi / general).powi(2) * (0.5 * general * duration).sin().powi(2)
}

/// |∫ f(v) e^{ikvt} dv| for a Gaussian f of width σ_v: exp(−(kσ_v t)²/2).
/// Units must make `k · sigma_v · t` dimensionless (rad/m, m/s, s).
pub fn analytic_doppler_decay(k: f64, sigma_v: f64, t: f64) -> f64 {
    (-0.5 * (k * sigma_v * t).powi(2)).exp()
}

#[derive(Debug, Clone)]
pub struct ReferenceRun {
    pub record: SimulationRecord,
    pub method: &'static str,
    pub dtau_ps: f64,
    pub xi_substeps: usize,
}

struct Gaussian {
    center: f64,
    fwhm: f64,
    peak: Complex64,
    chirp: f64,
}

impl Gaussian {
    fn new(center: f64, fwhm_ps: f64, area: f64, phase: f64, chirp: f64) -> Self {
        let fwhm = fwhm_ps * 1e-3;
        let peak = area / (fwhm * (PI / (4.0 * LN_2)).sqrt());
        Gaussian { center, fwhm, peak: Complex64::from_polar(peak, phase), chirp }
    }

    fn at(&self, tau: f64) -> Complex64 {
        let x = tau - self.center;
        let chirp = Complex64::from_polar(1.0, PI * self.chirp * 1e-9 * x * x);
        self.peak * (-4.0 * LN_2 * (x / self.fwhm).powi(2)).exp() * chirp
    }

    fn reach(&self) -> (f64, f64) {
        (self.center - 4.0 * self.fwhm, self.center + 4.0 * self.fwhm)
    }
}

/// Barycentric Lagrange interpolation through Chebyshev–Lobatto points.
struct Interpolant {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Interpolant {
    fn new(n: usize) -> Self {
        let m = n - 1;
        let nodes = (0..n).map(|j| 0.5 - 0.5 * (PI * j as f64 / m as f64).cos()).collect();
        let weights = (0..n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == m {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        Interpolant { nodes, weights }
    }

    fn eval(&self, values: &[Complex64], x: f64) -> Complex64 {
        let mut num = Complex64::ZERO;
        let mut den = 0.0;
        for ((&xj, &wj), &fj) in self.nodes.iter().zip(&self.weights).zip(values) {
            let d = x - xj;
            if d == 0.0 {
                return fj;
            }
            num += fj * (wj / d);
            den += wj / d;
        }
        num / den
    }
}

struct Class {
    sqrt_d: f64,
    a: Complex64,
    dec_s: Complex64,
    dec_d: Complex64,
}

struct Reference {
    classes: Vec<Class>,
    nz: usize,
    populated_k: Complex64,
    interp: Interpolant,
    control: Vec<Gaussian>,
    transfer: Vec<Gaussian>,
    signal: Vec<Gaussian>,
}

impl Reference {
    fn drive(&self, tau: f64) -> (Complex64, Complex64, Complex64) {
        let sum = |g: &[Gaussian]| g.iter().map(|p| p.at(tau)).sum::<Complex64>();
        (0.5 * sum(&self.control), 0.5 * sum(&self.transfer), sum(&self.signal))
    }

    /// E at every node, by marching from the entrance.
    fn field(&self, s: &[Complex64], c: Complex64, e_in: Complex64) -> Vec<Complex64> {
        let nz = self.nz;
        let mut src = vec![Complex64::ZERO; nz];
        for (v, cl) in self.classes.iter().enumerate() {
            for z in 0..nz {
                src[z] += I * cl.sqrt_d * c * s[v * nz + z] / cl.a;
            }
        }
        let k = self.populated_k;
        let f = |x: f64, e: Complex64| self.interp.eval(&src, x) - k * e;
        let mut out = vec![Complex64::ZERO; nz];
        out[0] = e_in;
        let mut e = e_in;
        for z in 1..nz {
            let (x0, x1) = (self.interp.nodes[z - 1], self.interp.nodes[z]);
            let h = (x1 - x0) / XI_SUBSTEPS as f64;
            for i in 0..XI_SUBSTEPS {
                let x = x0 + i as f64 * h;
                let k1 = f(x, e);
                let k2 = f(x + 0.5 * h, e + 0.5 * h * k1);
                let k3 = f(x + 0.5 * h, e + 0.5 * h * k2);
                let k4 = f(x + h, e + h * k3);
                e += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            out[z] = e;
        }
        out
    }

    /// Time derivative of (S, D) given the drive; also returns the field.
    fn rates(&self, s: &[Complex64], d: &[Complex64], tau: f64) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
        let (c, t, e_in) = self.drive(tau);
        let e = self.field(s, c, e_in);
        let nz = self.nz;
        let mut ds = vec![Complex64::ZERO; s.len()];
        let mut dd = vec![Complex64::ZERO; d.len()];
        for (v, cl) in self.classes.iter().enumerate() {
            for z in 0..nz {
                let i = v * nz + z;
                let alpha = cl.sqrt_d * e[z] - I * c * s[i];
                ds[i] = -cl.dec_s * s[i] - I * c.conj() * alpha / cl.a - I * t * d[i];
                dd[i] = -cl.dec_d * d[i] - I * t.conj() * s[i];
            }
        }
        (ds, dd, e)
    }

    /// ∫dξ Σ(|S|² + |D|²) by dense trapezoid on the interpolant.
    fn stored(&self, s: &[Complex64], d: &[Complex64]) -> f64 {
        const DENSE: usize = 256;
        let nz = self.nz;
        let mut total = 0.0;
        for v in 0..self.classes.len() {
            for field in [&s[v * nz..(v + 1) * nz], &d[v * nz..(v + 1) * nz]] {
                let vals: Vec<f64> =
                    (0..=DENSE).map(|i| self.interp.eval(field, i as f64 / DENSE as f64).norm_sqr()).collect();
                let inner: f64 = vals[1..DENSE].iter().sum();
                total += (inner + 0.5 * (vals[0] + vals[DENSE])) / DENSE as f64;
            }
        }
        total
    }
}

/// Brute-force integration of the four-level equations for small instances
/// (≤ 9 velocity classes, ≤ 8 ξ nodes). Ideal transfer events are applied
/// as instantaneous rotations at the nearest step. Snapshot times and
/// `tau_end_ns` are ignored.
pub fn reference_integrate(cfg: &SolverConfig, seq: &PulseSequence) -> Result<ReferenceRun> {
    reference_integrate_at(cfg, seq, ORACLE_DTAU_PS)
}

/// As [`reference_integrate`] with a different step; `dtau_ps` must divide
/// the 1 ps sample spacing.
pub fn reference_integrate_at(cfg: &SolverConfig, seq: &PulseSequence, dtau_ps: f64) -> Result<ReferenceRun> {
    let per_sample = (SAMPLE_PS / dtau_ps).round();
    if !(dtau_ps > 0.0) || (per_sample * dtau_ps - SAMPLE_PS).abs() > 1e-9 {
        return Err(Error::validation(format!("oracle step {dtau_ps} ps does not divide {SAMPLE_PS} ps")));
    }
    let sample_every = per_sample as usize;
    if cfg.tier != Tier::FourLevel {
        return Err(Error::validation("the reference integrator only handles the four-level tier"));
    }
    if cfg.velocity.len() > MAX_CLASSES || cfg.nz > MAX_NZ || cfg.nz < 4 {
        return Err(Error::validation(format!(
            "instance too large for the reference integrator: {} classes (max {MAX_CLASSES}), {} ξ nodes (4 to {MAX_NZ})",
            cfg.velocity.len(),
            cfg.nz
        )));
    }
    if cfg.initial != InitialCoherence::Empty {
        return Err(Error::validation("the reference integrator starts from an empty memory"));
    }
    let d_rate = cfg.d_rate();
    let k_low = cfg.k_lower();
    let k_gs = cfg.wavevectors.k_gs();
    let k_gd = cfg.wavevectors.k_gd().unwrap_or(k_gs);
    let classes: Vec<Class> = cfg
        .velocity
        .velocities()
        .iter()
        .zip(cfg.velocity.weights())
        .map(|(&v, &w)| Class {
            sqrt_d: (d_rate * w).sqrt(),
            a: Complex64::new(cfg.gamma_e, cfg.detuning + k_low * v * 1e-9),
            dec_s: Complex64::new(cfg.gamma_s, cfg.two_photon_detuning + k_gs * v * 1e-9),
            dec_d: Complex64::new(cfg.gamma_d, cfg.transfer_detuning + k_gd * v * 1e-9),
        })
        .collect();
    let populated_k = if cfg.populated_transition {
        classes.iter().map(|c| c.sqrt_d * c.sqrt_d / c.a).sum()
    } else {
        Complex64::ZERO
    };

    let mut control = Vec::new();
    let mut transfer = Vec::new();
    let mut ideal = Vec::new();
    for e in &seq.events {
        let g = Gaussian::new(e.center_ns, e.fwhm_ps, e.area, e.phase, e.chirp_hz_per_ns);
        match (e.channel, e.ideal) {
            (Channel::Transfer, true) => ideal.push((e.center_ns, e.area, e.phase)),
            (_, true) => return Err(Error::config("only transfer pulses may be ideal")),
            (Channel::Control, false) => control.push(g),
            (Channel::Transfer, false) => transfer.push(g),
            (Channel::Signal, false) => return Err(Error::config("signal pulses belong in the input bins")),
        }
    }
    let signal: Vec<Gaussian> = seq
        .inputs
        .iter()
        .map(|b| Gaussian {
            center: b.center_ns,
            fwhm: seq.signal_fwhm_ps * 1e-3,
            peak: Complex64::from_polar(b.amplitude, b.phase),
            chirp: 0.0,
        })
        .collect();

    let (mut t0, mut t1) = (f64::INFINITY, f64::NEG_INFINITY);
    for g in control.iter().chain(&transfer).chain(&signal) {
        let (a, b) = g.reach();
        t0 = t0.min(a);
        t1 = t1.max(b);
    }
    if !t0.is_finite() {
        return Err(Error::validation("sequence has no pulses"));
    }
    let h = dtau_ps * 1e-3;
    let steps = ((t1 - t0) / h).ceil() as usize;
    ideal.sort_by(|a, b| a.0.total_cmp(&b.0));

    let nz = cfg.nz;
    let r = Reference { nz, populated_k, interp: Interpolant::new(nz), control, transfer, signal, classes };
    let n = r.classes.len() * nz;
    let mut s = vec![Complex64::ZERO; n];
    let mut d = vec![Complex64::ZERO; n];
    let mut record = SimulationRecord::new(cfg, seq, 1);
    record.dtau_ns = SAMPLE_PS * 1e-3;
    let mut next_ideal = 0;
    for step in 0..=steps {
        let tau = t0 + step as f64 * h;
        while next_ideal < ideal.len() && ideal[next_ideal].0 < tau + 0.5 * h {
            let (_, area, phase) = ideal[next_ideal];
            let (sn, cs) = (0.5 * area).sin_cos();
            let ph = Complex64::from_polar(1.0, phase);
            for i in 0..n {
                let (a, b) = (s[i], d[i]);
                s[i] = cs * a - I * ph * sn * b;
                d[i] = -I * ph.conj() * sn * a + cs * b;
            }
            next_ideal += 1;
        }
        let (k1s, k1d, e) = r.rates(&s, &d, tau);
        if step % sample_every == 0 {
            let e_in = r.drive(tau).2;
            record.push_sample(tau, &[e[nz - 1]], &[e_in], r.stored(&s, &d));
        }
        if step == steps {
            break;
        }
        let s1: Vec<Complex64> = s.iter().zip(&k1s).map(|(a, k)| a + h * k).collect();
        let d1: Vec<Complex64> = d.iter().zip(&k1d).map(|(a, k)| a + h * k).collect();
        let (k2s, k2d, _) = r.rates(&s1, &d1, tau + h);
        for i in 0..n {
            s[i] += 0.5 * h * (k1s[i] + k2s[i]);
            d[i] += 0.5 * h * (k1d[i] + k2d[i]);
        }
        if !s.iter().chain(&d).all(|x| x.re.is_finite() && x.im.is_finite()) {
            return Err(Error::Divergence {
                tau_ns: tau,
                msg: "reference integrator produced non-finite values".into(),
            });
        }
    }
    record.final_tau_ns = t0 + steps as f64 * h;
    record.final_stored = r.stored(&s, &d);
    Ok(ReferenceRun { record, method: "heun-tau/rk4-xi-march", dtau_ps, xi_substeps: XI_SUBSTEPS })
}
