//! Simulation output and its serialized forms.
//!
//! A record is written as a JSON manifest (metadata, energies, snapshots)
//! plus a CSV trace with columns `tau_ps, reE, imE, Q`, one row per sample
//! and field component (`Q` is -1, 0, +1 in the hyperfine tier and 0 in the
//! four-level tier).

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use super::{SolverConfig, Tier};
use crate::error::{Error, Result};
use crate::fields::Channel;
use crate::protocol::PulseSequence;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedEvent {
    pub tau_ns: f64,
    pub channel: Channel,
    pub area: f64,
    pub ideal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceSnapshot {
    pub tau_ns: f64,
    /// Σ_v sqrt(w_v) ∫dξ y for every coherence channel, g–s channels first
    /// and g–d channels after them.
    pub collective: Vec<Complex64>,
    /// Total excitation ∫dξ Σ (|S|² + |D|²).
    pub stored: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRecord {
    pub tier: Tier,
    pub fingerprint: String,
    pub dtau_ns: f64,
    /// Field components per sample.
    pub nq: usize,
    /// Sample times. Only pulse windows are sampled; the field vanishes
    /// between them.
    pub tau: Vec<f64>,
    /// Output field at the cell exit, `tau.len() * nq` values.
    pub e_out: Vec<Complex64>,
    /// Input field at the cell entrance, same layout.
    pub e_in: Vec<Complex64>,
    /// Stored excitation at each sample.
    pub stored: Vec<f64>,
    pub events: Vec<AppliedEvent>,
    pub snapshots: Vec<CoherenceSnapshot>,
    pub final_tau_ns: f64,
    pub final_stored: f64,
    pub final_collective: Vec<Complex64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tier: Tier,
    fingerprint: &'a str,
    dtau_ns: f64,
    nq: usize,
    samples: usize,
    input_energy: f64,
    output_energy: f64,
    events: &'a [AppliedEvent],
    snapshots: &'a [CoherenceSnapshot],
    final_tau_ns: f64,
    final_stored: f64,
}

impl SimulationRecord {
    pub(crate) fn new(cfg: &SolverConfig, seq: &PulseSequence, nq: usize) -> Self {
        SimulationRecord {
            tier: cfg.tier,
            fingerprint: cfg.fingerprint(seq),
            dtau_ns: cfg.dtau_ns(),
            nq,
            tau: Vec::new(),
            e_out: Vec::new(),
            e_in: Vec::new(),
            stored: Vec::new(),
            events: Vec::new(),
            snapshots: Vec::new(),
            final_tau_ns: 0.0,
            final_stored: 0.0,
            final_collective: Vec::new(),
        }
    }

    pub(crate) fn push_sample(&mut self, tau: f64, e_out: &[Complex64], e_in: &[Complex64], stored: f64) {
        self.tau.push(tau);
        self.e_out.extend_from_slice(e_out);
        self.e_in.extend_from_slice(e_in);
        self.stored.push(stored);
    }

    pub fn output_intensity(&self, i: usize) -> f64 {
        self.e_out[i * self.nq..(i + 1) * self.nq].iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn input_intensity(&self, i: usize) -> f64 {
        self.e_in[i * self.nq..(i + 1) * self.nq].iter().map(|c| c.norm_sqr()).sum()
    }

    /// ∫|E_out|² dτ over samples with `start <= τ < end`.
    pub fn window_energy(&self, start: f64, end: f64) -> f64 {
        self.tau
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= start && t < end)
            .map(|(i, _)| self.output_intensity(i))
            .sum::<f64>()
            * self.dtau_ns
    }

    pub fn input_window_energy(&self, start: f64, end: f64) -> f64 {
        self.tau
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= start && t < end)
            .map(|(i, _)| self.input_intensity(i))
            .sum::<f64>()
            * self.dtau_ns
    }

    pub fn output_energy(&self) -> f64 {
        (0..self.tau.len()).map(|i| self.output_intensity(i)).sum::<f64>() * self.dtau_ns
    }

    pub fn input_energy(&self) -> f64 {
        (0..self.tau.len()).map(|i| self.input_intensity(i)).sum::<f64>() * self.dtau_ns
    }

    /// Multiply every field and coherence amplitude by `c` (for scaling tests).
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.e_out.iter_mut().chain(out.e_in.iter_mut()).for_each(|z| *z *= c);
        out.stored.iter_mut().for_each(|s| *s *= c * c);
        out
    }

    pub fn manifest_json(&self) -> String {
        let m = Manifest {
            tier: self.tier,
            fingerprint: &self.fingerprint,
            dtau_ns: self.dtau_ns,
            nq: self.nq,
            samples: self.tau.len(),
            input_energy: self.input_energy(),
            output_energy: self.output_energy(),
            events: &self.events,
            snapshots: &self.snapshots,
            final_tau_ns: self.final_tau_ns,
            final_stored: self.final_stored,
        };
        serde_json::to_string_pretty(&m).expect("manifest serializes")
    }

    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau_ps,reE,imE,Q")?;
        for (i, t) in self.tau.iter().enumerate() {
            for q in 0..self.nq {
                let e = self.e_out[i * self.nq + q];
                let label = if self.nq == 1 { 0 } else { q as i32 - 1 };
                writeln!(w, "{},{:e},{:e},{}", t * 1e3, e.re, e.im, label)?;
            }
        }
        Ok(())
    }

    /// Writes `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn save(&self, dir: &std::path::Path, stem: &str) -> Result<()> {
        let io = |path: &std::path::Path, source| Error::Io { path: path.display().to_string(), source };
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, self.manifest_json()).map_err(|e| io(&json, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        let f = std::fs::File::create(&csv).map_err(|e| io(&csv, e))?;
        self.write_trace_csv(std::io::BufWriter::new(f)).map_err(|e| io(&csv, e))?;
        Ok(())
    }
}

/// Collective coherence at snapshot time `t` (matched within half a step).
pub fn collective_coherence(record: &SimulationRecord, t: f64) -> Result<Vec<Complex64>> {
    record
        .snapshots
        .iter()
        .find(|s| (s.tau_ns - t).abs() <= 0.5 * record.dtau_ns + 1e-12)
        .map(|s| s.collective.clone())
        .ok_or_else(|| Error::Lookup(format!("no coherence snapshot at τ = {t} ns")))
}
