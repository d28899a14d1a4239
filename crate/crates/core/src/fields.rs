//! Optical pulse envelopes, polarizations and wavevector bookkeeping.
//!
//! Envelopes are Gaussian in the Rabi frequency (the field amplitude) with the
//! FWHM measured on that amplitude. Rabi frequencies are in rad/ns.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Signal,
    Control,
    Transfer,
}

/// Spherical components `[σ−, π, σ+]` of a unit polarization vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolarizationSpec", into = "PolarizationSpec")]
pub struct Polarization([Complex64; 3]);

impl Polarization {
    pub fn sigma_plus() -> Self {
        Polarization([Complex64::ZERO, Complex64::ZERO, Complex64::ONE])
    }

    pub fn sigma_minus() -> Self {
        Polarization([Complex64::ONE, Complex64::ZERO, Complex64::ZERO])
    }

    pub fn pi() -> Self {
        Polarization([Complex64::ZERO, Complex64::ONE, Complex64::ZERO])
    }

    /// Linear polarization along x, transverse to the propagation axis z.
    pub fn horizontal() -> Self {
        let a = FRAC_1_SQRT_2;
        Polarization([Complex64::new(a, 0.0), Complex64::ZERO, Complex64::new(-a, 0.0)])
    }

    /// Linear polarization along y.
    pub fn vertical() -> Self {
        let a = FRAC_1_SQRT_2;
        Polarization([Complex64::new(0.0, a), Complex64::ZERO, Complex64::new(0.0, a)])
    }

    /// Normalizes the given spherical components.
    pub fn from_components(c: [Complex64; 3]) -> Result<Self> {
        let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::domain("polarization vector must be nonzero and finite"));
        }
        Ok(Polarization(c.map(|z| z / norm)))
    }

    pub fn components(&self) -> &[Complex64; 3] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Default for Polarization {
    fn default() -> Self {
        Polarization::sigma_plus()
    }
}

/// Config-file form of a polarization: a named basis state or explicit
/// `[[re, im], [re, im], [re, im]]` spherical components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolarizationSpec {
    Named(String),
    Components([[f64; 2]; 3]),
}

impl TryFrom<PolarizationSpec> for Polarization {
    type Error = String;

    fn try_from(spec: PolarizationSpec) -> std::result::Result<Self, String> {
        match spec {
            PolarizationSpec::Named(n) => match n.as_str() {
                "sigma+" => Ok(Polarization::sigma_plus()),
                "sigma-" => Ok(Polarization::sigma_minus()),
                "pi" => Ok(Polarization::pi()),
                "horizontal" | "H" => Ok(Polarization::horizontal()),
                "vertical" | "V" => Ok(Polarization::vertical()),
                other => Err(format!("unknown polarization '{other}'")),
            },
            PolarizationSpec::Components(c) => {
                Polarization::from_components(c.map(|[re, im]| Complex64::new(re, im))).map_err(|e| e.to_string())
            }
        }
    }
}

impl From<Polarization> for PolarizationSpec {
    fn from(p: Polarization) -> Self {
        PolarizationSpec::Components(p.0.map(|z| [z.re, z.im]))
    }
}

const GAUSS_AREA_FACTOR: f64 = 1.064_467_019_431_226_4; // sqrt(π / (4 ln 2))

/// A Gaussian pulse on one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseEnvelope {
    pub channel: Channel,
    pub center_ns: f64,
    pub fwhm_ps: f64,
    /// Peak Rabi frequency in rad/ns. The phase of the complex value sets the
    /// carrier phase of the pulse.
    pub peak_rabi: Complex64,
    /// Carrier detuning from the addressed transition in rad/ns.
    #[serde(default)]
    pub detuning: f64,
    /// Linear frequency sweep rate in Hz/ns.
    #[serde(default)]
    pub chirp_hz_per_ns: f64,
    #[serde(default)]
    pub polarization: Polarization,
}

impl PulseEnvelope {
    pub fn new(channel: Channel, center_ns: f64, fwhm_ps: f64, peak_rabi: f64) -> Result<Self> {
        if !(fwhm_ps > 0.0) {
            return Err(Error::domain(format!("pulse FWHM must be positive, got {fwhm_ps} ps")));
        }
        Ok(PulseEnvelope {
            channel,
            center_ns,
            fwhm_ps,
            peak_rabi: Complex64::new(peak_rabi, 0.0),
            detuning: 0.0,
            chirp_hz_per_ns: 0.0,
            polarization: Polarization::default(),
        })
    }

    pub fn with_polarization(mut self, p: Polarization) -> Self {
        self.polarization = p;
        self
    }

    pub fn with_chirp(mut self, hz_per_ns: f64) -> Self {
        self.chirp_hz_per_ns = hz_per_ns;
        self
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.peak_rabi = Complex64::from_polar(self.peak_rabi.norm(), phase);
        self
    }

    pub fn fwhm_ns(&self) -> f64 {
        self.fwhm_ps * 1e-3
    }

    /// Scalar envelope value (no polarization) at τ, including chirp and
    /// detuning phases.
    pub fn amplitude(&self, tau_ns: f64) -> Complex64 {
        let dt = tau_ns - self.center_ns;
        let w = self.fwhm_ns();
        let mag = (-4.0 * LN_2 * dt * dt / (w * w)).exp();
        let phase = PI * self.chirp_hz_per_ns * 1e-9 * dt * dt - self.detuning * dt;
        self.peak_rabi * mag * Complex64::from_polar(1.0, phase)
    }

    /// Time after which the envelope is below 2·10⁻¹⁵ of its peak.
    pub fn half_extent_ns(&self) -> f64 {
        3.5 * self.fwhm_ns()
    }
}

/// ∫ |Ω(τ)| dτ in radians.
pub fn pulse_area(p: &PulseEnvelope) -> f64 {
    p.peak_rabi.norm() * p.fwhm_ns() * GAUSS_AREA_FACTOR
}

/// Peak Rabi frequency (rad/ns) giving `area` for a pulse of the given FWHM.
pub fn area_to_peak(area: f64, fwhm_ps: f64) -> Result<f64> {
    if !(fwhm_ps > 0.0) {
        return Err(Error::domain(format!("pulse FWHM must be positive, got {fwhm_ps} ps")));
    }
    Ok(area / (fwhm_ps * 1e-3 * GAUSS_AREA_FACTOR))
}

/// Envelope times polarization at τ: the Rabi frequency on each spherical
/// component `[σ−, π, σ+]`.
pub fn rabi_at(p: &PulseEnvelope, tau_ns: f64) -> [Complex64; 3] {
    let a = p.amplitude(tau_ns);
    p.polarization.components().map(|c| c * a)
}

/// Maps pulse energy to area through one calibration constant: the energy of
/// a π pulse. Area scales with the square root of energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyCalibration {
    pub pi_energy_nj: f64,
}

impl EnergyCalibration {
    pub fn new(pi_energy_nj: f64) -> Result<Self> {
        if !(pi_energy_nj > 0.0) {
            return Err(Error::domain("π-pulse energy must be positive"));
        }
        Ok(EnergyCalibration { pi_energy_nj })
    }

    pub fn area(&self, energy_nj: f64) -> Result<f64> {
        if energy_nj < 0.0 {
            return Err(Error::domain("pulse energy must be non-negative"));
        }
        Ok(PI * (energy_nj / self.pi_energy_nj).sqrt())
    }

    pub fn energy(&self, area: f64) -> f64 {
        self.pi_energy_nj * (area / PI).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// Signed wavevector projections on the propagation axis (rad/m).
///
/// The stored coherence S (g ↔ s) carries the phase of the absorbed signal
/// and control photons, `k_gs = k_s + k_c`; transfer to d adds the transfer
/// photon, `k_gd = k_gs + k_t`. With the signal forward and the control
/// backward this is the familiar mismatch `|k_s| − |k_c|` in magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavevectorSet {
    pub k_s: f64,
    pub k_c: f64,
    pub k_t: Option<f64>,
}

fn signed_k(lambda_nm: f64, dir: Direction) -> Result<f64> {
    if !(lambda_nm > 0.0) {
        return Err(Error::domain(format!("wavelength must be positive, got {lambda_nm} nm")));
    }
    Ok(dir.sign() * 2.0 * PI / (lambda_nm * 1e-9))
}

/// Builds signed wavevectors; `transfer` is `None` when no transfer field is
/// present.
pub fn wavevectors(
    signal: (f64, Direction),
    control: (f64, Direction),
    transfer: Option<(f64, Direction)>,
) -> Result<WavevectorSet> {
    Ok(WavevectorSet {
        k_s: signed_k(signal.0, signal.1)?,
        k_c: signed_k(control.0, control.1)?,
        k_t: transfer.map(|(l, d)| signed_k(l, d)).transpose()?,
    })
}

impl WavevectorSet {
    pub fn k_gs(&self) -> f64 {
        self.k_s + self.k_c
    }

    pub fn k_gd(&self) -> Result<f64> {
        let k_t = self.k_t.ok_or_else(|| Error::validation("k_gd requested but no transfer field is defined"))?;
        Ok(self.k_gs() + k_t)
    }

    /// r = |k_gd| / |k_gs|.
    pub fn ratio(&self) -> Result<f64> {
        let gs = self.k_gs().abs();
        if gs == 0.0 {
            return Err(Error::domain("k_gs vanishes; rephasing ratio undefined"));
        }
        Ok(self.k_gd()?.abs() / gs)
    }

    /// 1 / (|k_gs| σ_v) in ns: the Gaussian dephasing time of the stored
    /// efficiency.
    pub fn dephasing_time_ns(&self, sigma_v: f64) -> f64 {
        1e9 / (self.k_gs().abs() * sigma_v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn main_geometry_wavevectors() {
        let w =
            wavevectors((1529.3, Direction::Forward), (780.2, Direction::Backward), Some((792.7, Direction::Forward)))
                .unwrap();
        assert_relative_eq!(w.k_gs().abs(), 3.945e6, max_relative = 2e-3);
        assert_relative_eq!(w.k_gd().unwrap().abs(), 3.981e6, max_relative = 2e-3);
        assert!(w.k_gs() * w.k_gd().unwrap() < 0.0);
        assert_relative_eq!(w.ratio().unwrap(), 1.009, max_relative = 1e-3);
    }

    #[test]
    fn counter_propagating_transfer_keeps_sign() {
        let w =
            wavevectors((1529.3, Direction::Forward), (780.2, Direction::Backward), Some((792.7, Direction::Backward)))
                .unwrap();
        assert!(w.k_gs() * w.k_gd().unwrap() > 0.0);
    }

    #[test]
    fn equal_wavelengths_counter_propagating_cancel() {
        let w = wavevectors((800.0, Direction::Forward), (800.0, Direction::Backward), None).unwrap();
        assert_eq!(w.k_gs(), 0.0);
        assert!(w.k_gd().is_err());
    }

    #[test]
    fn flipping_transfer_flips_its_contribution() {
        let f =
            wavevectors((1529.3, Direction::Forward), (780.2, Direction::Backward), Some((792.7, Direction::Forward)))
                .unwrap();
        let b =
            wavevectors((1529.3, Direction::Forward), (780.2, Direction::Backward), Some((792.7, Direction::Backward)))
                .unwrap();
        assert_eq!(f.k_gd().unwrap() - f.k_gs(), -(b.k_gd().unwrap() - b.k_gs()));
    }

    #[test]
    fn area_round_trip() {
        let peak = area_to_peak(PI, 330.0).unwrap();
        let p = PulseEnvelope::new(Channel::Transfer, 0.0, 330.0, peak).unwrap();
        assert_relative_eq!(pulse_area(&p), PI, max_relative = 1e-12);
        assert_relative_eq!(area_to_peak(PI / 2.0, 330.0).unwrap(), peak / 2.0, max_relative = 1e-12);
        assert_eq!(area_to_peak(0.0, 330.0).unwrap(), 0.0);
    }

    #[test]
    fn area_matches_numerical_integral() {
        let p = PulseEnvelope::new(Channel::Control, 1.0, 250.0, 3.0).unwrap();
        let n = 20_000;
        let h = 4.0 / n as f64;
        let s: f64 = (0..=n).map(|i| p.amplitude(-1.0 + i as f64 * h).norm()).sum::<f64>() * h;
        assert_relative_eq!(s, pulse_area(&p), max_relative = 1e-9);
    }

    #[test]
    fn envelope_landmarks() {
        let p = PulseEnvelope::new(Channel::Signal, 2.0, 330.0, 5.0).unwrap();
        assert_eq!(rabi_at(&p, 2.0)[2], Complex64::new(5.0, 0.0));
        assert_relative_eq!(p.amplitude(2.165).norm(), 2.5, max_relative = 1e-12);
        assert_relative_eq!(p.amplitude(1.835).norm(), 2.5, max_relative = 1e-12);
        assert_eq!(p.amplitude(2.1).im, 0.0);
    }

    #[test]
    fn chirp_adds_quadratic_phase() {
        let p = PulseEnvelope::new(Channel::Transfer, 0.0, 500.0, 1.0).unwrap().with_chirp(2e9);
        let a = p.amplitude(0.1);
        assert_relative_eq!(a.arg(), PI * 2e9 * 1e-9 * 0.01, max_relative = 1e-12);
    }

    #[test]
    fn linear_polarizations_are_unit_and_orthogonal() {
        let h = Polarization::horizontal();
        let v = Polarization::vertical();
        assert_relative_eq!(h.norm(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(v.norm(), 1.0, max_relative = 1e-15);
        let overlap: Complex64 = h.components().iter().zip(v.components()).map(|(a, b)| a.conj() * b).sum();
        assert!(overlap.norm() < 1e-15);
    }

    #[test]
    fn explicit_polarization_is_normalized() {
        let p = Polarization::from_components([Complex64::new(3.0, 0.0), Complex64::ZERO, Complex64::new(0.0, 4.0)])
            .unwrap();
        assert_relative_eq!(p.norm(), 1.0, max_relative = 1e-15);
        assert!(Polarization::from_components([Complex64::ZERO; 3]).is_err());
    }

    #[test]
    fn energy_calibration_anchor() {
        let c = EnergyCalibration::new(2.24).unwrap();
        assert_relative_eq!(c.area(2.24).unwrap(), PI, max_relative = 1e-15);
        assert_relative_eq!(c.energy(PI / 2.0), 0.56, max_relative = 1e-12);
    }

    #[test]
    fn zero_fwhm_rejected() {
        assert!(PulseEnvelope::new(Channel::Signal, 0.0, 0.0, 1.0).is_err());
        assert!(area_to_peak(1.0, -3.0).is_err());
    }
}
