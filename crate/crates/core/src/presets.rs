//! Named parameter sets for the two vapor-cell setups.
//!
//! `paper-main`: 7.5 cm cell at 120 °C, 1529 nm signal with a counter-
//! propagating 780 nm control, 793 nm transfer co-propagating with the
//! signal, Δ = 6 GHz, 330 ps pulses, 984 ps retrieval window.
//!
//! `paper-appB`: 14 cm cell at about 70 °C with the signal and control
//! wavelengths swapped (780 nm signal on the populated transition), 500 ps
//! signal, 1.2 ns window.
//!
//! The optical depth and control area are not published; the values here
//! give roughly 80 % storage efficiency on the Doppler-broadened ensemble.

use std::f64::consts::PI;

use crate::atomics::{build_level_scheme, velocity_grid, SpeciesConfig};
use crate::error::{Error, Result};
use crate::fields::{wavevectors, Direction, EnergyCalibration, Polarization};
use crate::protocol::PulseSettings;
use crate::solver::{Polarizations, SignalLeg, SolverConfig, Tier};

pub const PRESET_NAMES: [&str; 2] = ["paper-main", "paper-appB"];

pub const DEFAULT_CLASSES: usize = 101;
pub const DEFAULT_SPAN: f64 = 4.0;

/// Energy of a π transfer pulse in the main setup, nJ.
pub const TRANSFER_PI_ENERGY_NJ: f64 = 2.24;

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub solver: SolverConfig,
    pub pulses: PulseSettings,
    pub transfer_calibration: EnergyCalibration,
    pub temperature_k: f64,
}

pub fn by_name(name: &str) -> Result<Preset> {
    match name {
        "paper-main" => paper_main(),
        "paper-appB" => paper_app_b(),
        other => Err(Error::config(format!("unknown preset '{other}' (known: {})", PRESET_NAMES.join(", ")))),
    }
}

fn ghz(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn paper_main() -> Result<Preset> {
    let mut species = SpeciesConfig::rubidium87();
    species.optical_depth = MAIN_OPTICAL_DEPTH;
    let scheme = build_level_scheme(&species)?;
    let temperature_k = 393.15;
    let velocity = velocity_grid(temperature_k, scheme.mass_kg, DEFAULT_CLASSES, DEFAULT_SPAN)?;
    let wl = scheme.wavelengths;
    let k = wavevectors(
        (wl.es_nm, Direction::Forward),
        (wl.ge_nm, Direction::Backward),
        Some((wl.sd_nm, Direction::Forward)),
    )?;
    let mut solver = SolverConfig::new(scheme, velocity, k);
    solver.detuning = ghz(6.0);
    solver.cell_length_m = 0.075;
    solver.tier = Tier::FourLevel;
    solver.signal_leg = SignalLeg::Upper;
    solver.populated_transition = false;
    solver.polarizations = Polarizations {
        signal: Polarization::horizontal(),
        control: Polarization::vertical(),
        transfer: Polarization::vertical(),
    };
    let pulses = PulseSettings {
        signal_fwhm_ps: 330.0,
        control_fwhm_ps: 330.0,
        control_area: MAIN_CONTROL_AREA,
        transfer_fwhm_ps: 330.0,
        transfer_area: PI,
        transfer_chirp_hz_per_ns: 0.0,
        ideal_transfers: false,
        window_ns: Some(0.984),
        dephasing_time_ns: solver.dephasing_time_ns(),
    };
    Ok(Preset {
        name: "paper-main",
        solver,
        pulses,
        transfer_calibration: EnergyCalibration::new(TRANSFER_PI_ENERGY_NJ)?,
        temperature_k,
    })
}

pub fn paper_app_b() -> Result<Preset> {
    let mut species = SpeciesConfig::rubidium87();
    species.optical_depth = APP_B_OPTICAL_DEPTH;
    let scheme = build_level_scheme(&species)?;
    let temperature_k = 343.15;
    let velocity = velocity_grid(temperature_k, scheme.mass_kg, DEFAULT_CLASSES, DEFAULT_SPAN)?;
    let wl = scheme.wavelengths;
    let k = wavevectors(
        (wl.ge_nm, Direction::Forward),
        (wl.es_nm, Direction::Backward),
        Some((wl.sd_nm, Direction::Backward)),
    )?;
    let mut solver = SolverConfig::new(scheme, velocity, k);
    solver.detuning = ghz(6.0);
    solver.cell_length_m = 0.14;
    solver.tier = Tier::FourLevel;
    solver.signal_leg = SignalLeg::Lower;
    solver.populated_transition = true;
    solver.polarizations = Polarizations {
        signal: Polarization::horizontal(),
        control: Polarization::vertical(),
        transfer: Polarization::vertical(),
    };
    let pulses = PulseSettings {
        signal_fwhm_ps: 500.0,
        control_fwhm_ps: 500.0,
        control_area: APP_B_CONTROL_AREA,
        transfer_fwhm_ps: 500.0,
        transfer_area: PI,
        transfer_chirp_hz_per_ns: 0.0,
        ideal_transfers: false,
        window_ns: Some(1.2),
        dephasing_time_ns: solver.dephasing_time_ns(),
    };
    Ok(Preset {
        name: "paper-appB",
        solver,
        pulses,
        transfer_calibration: EnergyCalibration::new(TRANSFER_PI_ENERGY_NJ)?,
        temperature_k,
    })
}

const MAIN_OPTICAL_DEPTH: f64 = 6000.0;
const MAIN_CONTROL_AREA: f64 = 8.0;
const APP_B_OPTICAL_DEPTH: f64 = 8000.0;
const APP_B_CONTROL_AREA: f64 = 8.0;
