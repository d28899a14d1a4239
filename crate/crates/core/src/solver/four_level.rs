//! Four-level model: per velocity class one S (g–s) and one D (g–d)
//! coherence at every ξ node, channels `[S, D]`.
//!
//! With `a = γ_e + iΔ_s`, half Rabi frequencies `c = Ω_c/2`, `t = Ω_d/2` and
//! `α = √d_v E − i c S`:
//!
//! ```text
//! ∂ξ E = −Σ_v √d_v α / a            (E part of α only with the populated-transition term)
//! ∂τ S = −(γ_s + iΔ_II) S − i c* α / a − i t D
//! ∂τ D = −(γ_d + iΔ_III) D − i t* S
//! ```

use num_complex::Complex64;

use super::engine::{Drive, Medium};
use super::SolverConfig;
use crate::error::Result;

const I: Complex64 = Complex64::new(0.0, 1.0);

struct Class {
    sqrt_d: f64,
    inv_a: Complex64,
    dec_s: Complex64,
    dec_d: Complex64,
    amp: f64,
}

pub(crate) struct FourLevel {
    nz: usize,
    classes: Vec<Class>,
    populated: bool,
}

impl FourLevel {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        let d = cfg.d_rate();
        let k_low = cfg.k_lower();
        let k_gs = cfg.wavevectors.k_gs();
        let k_gd = cfg.k_gd_or_gs();
        let classes = cfg
            .velocity
            .velocities()
            .iter()
            .zip(cfg.velocity.weights())
            .map(|(&v, &w)| {
                let shift = |k: f64| k * v * 1e-9;
                let a = Complex64::new(cfg.gamma_e, cfg.detuning + shift(k_low));
                Class {
                    sqrt_d: (d * w).sqrt(),
                    inv_a: a.inv(),
                    dec_s: Complex64::new(cfg.gamma_s, cfg.two_photon_detuning + shift(k_gs)),
                    dec_d: Complex64::new(cfg.gamma_d, cfg.transfer_detuning + shift(k_gd)),
                    amp: w.sqrt(),
                }
            })
            .collect();
        Ok(FourLevel { nz: cfg.nz, classes, populated: cfg.populated_transition })
    }
}

impl Medium for FourLevel {
    fn nq(&self) -> usize {
        1
    }

    fn nz(&self) -> usize {
        self.nz
    }

    fn n_classes(&self) -> usize {
        self.classes.len()
    }

    fn channels(&self) -> usize {
        2
    }

    fn self_coupling(&self) -> Vec<Complex64> {
        if !self.populated {
            return vec![Complex64::ZERO];
        }
        vec![self.classes.iter().map(|c| c.sqrt_d * c.sqrt_d * c.inv_a).sum()]
    }

    fn max_rate(&self) -> f64 {
        self.classes.iter().map(|c| c.dec_s.im.abs().max(c.dec_d.im.abs())).fold(0.0, f64::max)
    }

    fn source(&self, v: usize, d: &Drive, y: &[Complex64], src: &mut [Complex64]) {
        let c = &self.classes[v];
        let f = I * c.sqrt_d * d.control * c.inv_a;
        for z in 0..self.nz {
            src[z] = f * y[2 * z];
        }
    }

    fn derivative(&self, v: usize, d: &Drive, y: &[Complex64], e: &[Complex64], dy: &mut [Complex64]) {
        let c = &self.classes[v];
        let ctl = d.control;
        let tr = d.transfer;
        let ctl_conj = ctl.conj();
        let tr_conj = tr.conj();
        for z in 0..self.nz {
            let s = y[2 * z];
            let dd = y[2 * z + 1];
            let alpha = c.sqrt_d * e[z] - I * ctl * s;
            dy[2 * z] = -c.dec_s * s - I * ctl_conj * alpha * c.inv_a - I * tr * dd;
            dy[2 * z + 1] = -c.dec_d * dd - I * tr_conj * s;
        }
    }

    fn free_evolve(&self, v: usize, dt: f64, y: &mut [Complex64]) {
        let c = &self.classes[v];
        let fs = (-c.dec_s * dt).exp();
        let fd = (-c.dec_d * dt).exp();
        for z in 0..self.nz {
            y[2 * z] *= fs;
            y[2 * z + 1] *= fd;
        }
    }

    fn ideal_transfer(&self, _v: usize, area: f64, phase: f64, y: &mut [Complex64]) {
        let (sn, cs) = (0.5 * area).sin_cos();
        let ph = Complex64::from_polar(1.0, phase);
        for z in 0..self.nz {
            let s = y[2 * z];
            let dd = y[2 * z + 1];
            y[2 * z] = cs * s - I * ph * sn * dd;
            y[2 * z + 1] = -I * ph.conj() * sn * s + cs * dd;
        }
    }

    fn class_amplitude(&self, v: usize) -> f64 {
        self.classes[v].amp
    }
}
