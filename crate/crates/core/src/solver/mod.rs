//! Maxwell–Bloch integration in the co-moving frame τ = t − z/c.
//!
//! Two tiers share one stepping engine:
//!
//! * the four-level model (one coherence S between g and s, one D between g
//!   and d, per velocity class), and
//! * the hyperfine model, which resolves every Zeeman sublevel and sums the
//!   two-photon pathways through the intermediate manifold.
//!
//! The intermediate state is adiabatically eliminated. Coherences are
//! advanced with classical RK4 in τ; at every RK stage the signal field is
//! recomputed along the cell by Chebyshev collocation in ξ = z/L. Between
//! pulse windows the equations are diagonal and are advanced exactly.

pub mod chebyshev;
mod engine;
mod four_level;
mod hyperfine;
pub mod record;

use serde::{Deserialize, Serialize};

use crate::atomics::{Label, LevelScheme, VelocityGrid};
use crate::error::{Error, Result};
use crate::fields::{Polarization, WavevectorSet};
use crate::protocol::PulseSequence;
use engine::Medium;

pub use engine::{propagate_field_slice, CoherenceState};
pub use record::{collective_coherence, AppliedEvent, CoherenceSnapshot, SimulationRecord};

/// 2π · 10⁻³: converts MHz to rad/ns.
pub const MHZ_TO_RAD_PER_NS: f64 = 2.0 * std::f64::consts::PI * 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    FourLevel,
    Hyperfine,
}

/// Which transition the signal drives; the control drives the other one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalLeg {
    /// Signal on e ↔ s, control on g ↔ e.
    Upper,
    /// Signal on g ↔ e (the populated transition), control on e ↔ s.
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polarizations {
    pub signal: Polarization,
    pub control: Polarization,
    pub transfer: Polarization,
}

impl Polarizations {
    pub fn all_sigma_plus() -> Self {
        Polarizations {
            signal: Polarization::sigma_plus(),
            control: Polarization::sigma_plus(),
            transfer: Polarization::sigma_plus(),
        }
    }
}

/// Initial coherence before the first event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCoherence {
    /// Everything in the ground state.
    Empty,
    /// A phased spin wave already written into s: every velocity class holds
    /// amplitude `sqrt(w_v)` at every ξ, so the collective coherence is 1.
    /// Four-level tier only.
    Uniform,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub scheme: LevelScheme,
    pub velocity: VelocityGrid,
    pub wavevectors: WavevectorSet,
    /// Single-photon detuning Δ from the intermediate level, rad/ns.
    pub detuning: f64,
    /// Offset of the two-photon resonance, rad/ns.
    pub two_photon_detuning: f64,
    /// Offset of the three-photon (transfer) resonance, rad/ns.
    pub transfer_detuning: f64,
    pub gamma_e: f64,
    pub gamma_s: f64,
    pub gamma_d: f64,
    pub nz: usize,
    pub cell_length_m: f64,
    pub dtau_ps: f64,
    pub tier: Tier,
    pub signal_leg: SignalLeg,
    /// Linear absorption and dispersion of the signal on its own transition.
    pub populated_transition: bool,
    pub polarizations: Polarizations,
    pub initial: InitialCoherence,
    pub snapshot_times: Vec<f64>,
    /// Keep integrating (exactly, field-free) up to this time.
    pub tau_end_ns: Option<f64>,
}

impl SolverConfig {
    /// Defaults: decay rates from the scheme lifetimes, 16 Chebyshev points,
    /// 2 ps steps, four-level tier, σ+ fields.
    pub fn new(scheme: LevelScheme, velocity: VelocityGrid, wavevectors: WavevectorSet) -> Self {
        let gamma = |l: Label| scheme.manifold(l).level.coherence_decay();
        let (gamma_e, gamma_s, gamma_d) = (gamma(Label::E), gamma(Label::S), gamma(Label::D));
        SolverConfig {
            scheme,
            velocity,
            wavevectors,
            detuning: 0.0,
            two_photon_detuning: 0.0,
            transfer_detuning: 0.0,
            gamma_e,
            gamma_s,
            gamma_d,
            nz: 16,
            cell_length_m: 0.075,
            dtau_ps: 2.0,
            tier: Tier::FourLevel,
            signal_leg: SignalLeg::Upper,
            populated_transition: false,
            polarizations: Polarizations::all_sigma_plus(),
            initial: InitialCoherence::Empty,
            snapshot_times: Vec::new(),
            tau_end_ns: None,
        }
    }

    /// Optical-depth rate d = OD · γ_e in rad/ns, using the radiative γ_e of
    /// the intermediate level so that d does not vanish when the configured
    /// γ_e is set to zero.
    pub fn d_rate(&self) -> f64 {
        self.scheme.optical_depth * self.scheme.manifold(Label::E).level.coherence_decay()
    }

    pub fn dtau_ns(&self) -> f64 {
        self.dtau_ps * 1e-3
    }

    /// Wavevector of whichever field drives g ↔ e.
    pub fn k_lower(&self) -> f64 {
        match self.signal_leg {
            SignalLeg::Upper => self.wavevectors.k_c,
            SignalLeg::Lower => self.wavevectors.k_s,
        }
    }

    /// k_gd, or k_gs when no transfer field is defined.
    pub fn k_gd_or_gs(&self) -> f64 {
        self.wavevectors.k_gd().unwrap_or(self.wavevectors.k_gs())
    }

    pub fn without_decay(mut self) -> Self {
        self.gamma_e = 0.0;
        self.gamma_s = 0.0;
        self.gamma_d = 0.0;
        self
    }

    /// 1/(|k_gs| σ_v) in ns.
    pub fn dephasing_time_ns(&self) -> f64 {
        self.wavevectors.dephasing_time_ns(self.velocity.sigma_v)
    }

    pub fn fingerprint(&self, seq: &PulseSequence) -> String {
        use sha2::{Digest, Sha256};
        let body = serde_json::json!({ "config": self, "sequence": seq });
        hex::encode(Sha256::digest(body.to_string().as_bytes()))
    }

    /// Copy with the velocity classes in canonical order.
    fn canonical(&self) -> Self {
        let mut out = self.clone();
        out.velocity = self.velocity.sorted();
        out
    }

    fn check_basic(&self) -> Result<()> {
        if self.nz < 4 {
            return Err(Error::validation(format!("N_z = {} is below the minimum of 4", self.nz)));
        }
        if !(self.dtau_ps > 0.0) {
            return Err(Error::validation("time step must be positive"));
        }
        for (name, g) in [("gamma_e", self.gamma_e), ("gamma_s", self.gamma_s), ("gamma_d", self.gamma_d)] {
            if !(g >= 0.0) {
                return Err(Error::validation(format!("{name} must be non-negative")));
            }
        }
        if !(self.scheme.optical_depth >= 0.0) {
            return Err(Error::validation("optical depth must be non-negative"));
        }
        Ok(())
    }

    fn check_rate(&self, max_rate: f64) -> Result<()> {
        let phase = self.dtau_ns() * max_rate;
        if phase >= 0.1 {
            return Err(Error::validation(format!(
                "time step too coarse: δτ·max|Δ_III| = {phase:.4} rad violates the bound 0.1 rad \
                 (δτ = {} ps, max|Δ_III| = {max_rate:.4} rad/ns)",
                self.dtau_ps
            )));
        }
        Ok(())
    }
}

/// Integrates the four-level model.
pub fn run_four_level(cfg: &SolverConfig, seq: &PulseSequence) -> Result<SimulationRecord> {
    if cfg.tier != Tier::FourLevel {
        return Err(Error::config("run_four_level called with a hyperfine-tier configuration"));
    }
    cfg.check_basic()?;
    let cfg = &cfg.canonical();
    let medium = four_level::FourLevel::new(cfg)?;
    cfg.check_rate(medium.max_rate())?;
    engine::integrate(&medium, cfg, seq)
}

/// Integrates the hyperfine/Zeeman model.
pub fn run_hyperfine(cfg: &SolverConfig, seq: &PulseSequence) -> Result<SimulationRecord> {
    if cfg.tier != Tier::Hyperfine {
        return Err(Error::config("run_hyperfine called with a four-level-tier configuration"));
    }
    if cfg.initial != InitialCoherence::Empty {
        return Err(Error::config("a pre-written spin wave is only supported in the four-level tier"));
    }
    cfg.check_basic()?;
    let cfg = &cfg.canonical();
    let medium = hyperfine::Hyperfine::new(cfg)?;
    cfg.check_rate(medium.max_rate())?;
    engine::integrate(&medium, cfg, seq)
}

/// Dispatches on `cfg.tier`.
pub fn run(cfg: &SolverConfig, seq: &PulseSequence) -> Result<SimulationRecord> {
    match cfg.tier {
        Tier::FourLevel => run_four_level(cfg, seq),
        Tier::Hyperfine => run_hyperfine(cfg, seq),
    }
}
