//! Windowed efficiencies, efficiency traces and multimode weight ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::SimulationRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t_storage_ns: f64,
    pub efficiency: f64,
    /// One standard uncertainty; 0 for deterministic solver output.
    pub sigma: f64,
}

/// Efficiency against storage time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyTrace {
    points: Vec<TracePoint>,
    pub protocol: String,
    pub fingerprint: String,
}

impl EfficiencyTrace {
    /// Checks efficiencies in [0, 1], finite non-negative uncertainties and
    /// strictly increasing times.
    pub fn new(points: Vec<TracePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::validation("efficiency trace is empty"));
        }
        for p in &points {
            if !(0.0..=1.0).contains(&p.efficiency) {
                return Err(Error::validation(format!(
                    "efficiency {} at t = {} ns is outside [0, 1]",
                    p.efficiency, p.t_storage_ns
                )));
            }
            if !(p.sigma >= 0.0) || !p.sigma.is_finite() {
                return Err(Error::validation(format!("invalid uncertainty {} at t = {} ns", p.sigma, p.t_storage_ns)));
            }
            if !p.t_storage_ns.is_finite() {
                return Err(Error::validation("storage time must be finite"));
            }
        }
        if let Some(w) = points.windows(2).find(|w| w[1].t_storage_ns <= w[0].t_storage_ns) {
            return Err(Error::validation(format!(
                "storage times must increase strictly ({} ns followed by {} ns)",
                w[0].t_storage_ns, w[1].t_storage_ns
            )));
        }
        Ok(EfficiencyTrace { points, protocol: String::new(), fingerprint: String::new() })
    }

    pub fn from_columns(t: &[f64], eta: &[f64], sigma: &[f64]) -> Result<Self> {
        if t.len() != eta.len() || t.len() != sigma.len() {
            return Err(Error::validation("trace columns have different lengths"));
        }
        let points =
            (0..t.len()).map(|i| TracePoint { t_storage_ns: t[i], efficiency: eta[i], sigma: sigma[i] }).collect();
        Self::new(points)
    }

    pub fn with_metadata(mut self, protocol: &str, fingerprint: &str) -> Self {
        self.protocol = protocol.to_string();
        self.fingerprint = fingerprint.to_string();
        self
    }

    pub fn points(&self) -> &[TracePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t_storage_ns).collect()
    }

    pub fn efficiencies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.efficiency).collect()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.sigma).collect()
    }

    /// Divide by the efficiency at the shortest storage time.
    pub fn normalized_to_first(&self) -> Result<Self> {
        let first = self.points[0].efficiency;
        if first <= 0.0 {
            return Err(Error::validation("cannot normalize: efficiency at the shortest storage time is zero"));
        }
        let mut out = self.clone();
        for p in &mut out.points {
            p.efficiency /= first;
            p.sigma /= first;
        }
        Ok(out)
    }

    /// Pointwise ratio to a reference trace on the same storage times.
    pub fn ratio_to(&self, reference: &EfficiencyTrace) -> Result<Self> {
        if self.len() != reference.len() {
            return Err(Error::validation("traces have different lengths"));
        }
        let mut out = self.clone();
        for (p, r) in out.points.iter_mut().zip(&reference.points) {
            if p.t_storage_ns != r.t_storage_ns {
                return Err(Error::validation(format!(
                    "storage times differ: {} ns vs {} ns",
                    p.t_storage_ns, r.t_storage_ns
                )));
            }
            if r.efficiency <= 0.0 {
                return Err(Error::validation(format!("reference efficiency is zero at {} ns", r.t_storage_ns)));
            }
            p.efficiency /= r.efficiency;
            p.sigma /= r.efficiency;
        }
        Ok(out)
    }
}

/// ∫_window |E_out|² dτ divided by `reference` (normally the input energy).
/// A window that contains no samples gives 0 and logs a warning.
pub fn window_efficiency(record: &SimulationRecord, window: (f64, f64), reference: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(Error::validation(format!("reference energy must be positive, got {reference}")));
    }
    let (start, end) = window;
    if !(end > start) {
        return Err(Error::validation(format!("empty window [{start}, {end}] ns")));
    }
    if !record.tau.iter().any(|&t| t >= start && t < end) {
        log::warn!("window [{start}, {end}] ns contains no field samples");
        return Ok(0.0);
    }
    Ok(record.window_energy(start, end) / reference)
}

/// Retrieved energy in each window relative to the first.
pub fn mode_weights(record: &SimulationRecord, windows: &[(f64, f64)]) -> Result<Vec<f64>> {
    let Some(&(s0, e0)) = windows.first() else {
        return Err(Error::validation("at least one window is required"));
    };
    let first = record.window_energy(s0, e0);
    if !(first > 0.0) {
        return Err(Error::validation("first window holds no retrieved energy"));
    }
    Ok(windows.iter().map(|&(s, e)| record.window_energy(s, e) / first).collect())
}
