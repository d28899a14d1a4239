//! Pulse-sequence protocols: standard ORCA, dynamic rephasing, multimode
//! storage, time-bin reordering and two-bin interference.
//!
//! Timings are derived from phase closure. A stored coherence accumulates
//! Doppler phase at `k_gs·v` while in s and at `k_gd·v ≈ -r·k_gs·v` while
//! shelved in d, so a coherence is rephased when its time in s equals `r`
//! times its time in d.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Channel;

pub const DEFAULT_DEPHASING_NS: f64 = 1.1;

/// What an event does in the protocol; used by validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventRole {
    /// Control that writes input bin `bin` into the medium.
    Storage { bin: usize },
    /// Control that reads out the coherence written by `source_bin`.
    Retrieval { source_bin: Option<usize> },
    /// π transfer between s and d.
    Transfer,
    /// Partial transfer used as a beamsplitter between two coherences.
    Mix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseEvent {
    pub channel: Channel,
    pub center_ns: f64,
    /// Pulse area in radians.
    pub area: f64,
    pub fwhm_ps: f64,
    #[serde(default)]
    pub chirp_hz_per_ns: f64,
    /// Carrier phase of the pulse in radians.
    #[serde(default)]
    pub phase: f64,
    /// Apply as an instantaneous rotation instead of integrating the pulse.
    #[serde(default)]
    pub ideal: bool,
    pub role: EventRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalBin {
    pub center_ns: f64,
    /// Peak field amplitude relative to a unit-amplitude input.
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalWindow {
    pub start_ns: f64,
    pub end_ns: f64,
    #[serde(default)]
    pub source_bin: Option<usize>,
}

impl RetrievalWindow {
    pub fn centered(center: f64, width: f64, source_bin: Option<usize>) -> Self {
        RetrievalWindow { start_ns: center - width / 2.0, end_ns: center + width / 2.0, source_bin }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.start_ns + self.end_ns)
    }
}

/// Pulse shapes and areas shared by all builders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSettings {
    pub signal_fwhm_ps: f64,
    pub control_fwhm_ps: f64,
    pub control_area: f64,
    pub transfer_fwhm_ps: f64,
    pub transfer_area: f64,
    pub transfer_chirp_hz_per_ns: f64,
    pub ideal_transfers: bool,
    /// Retrieval-window width; defaults to three signal FWHMs.
    pub window_ns: Option<f64>,
    pub dephasing_time_ns: f64,
}

impl Default for PulseSettings {
    fn default() -> Self {
        PulseSettings {
            signal_fwhm_ps: 330.0,
            control_fwhm_ps: 330.0,
            control_area: 5.0,
            transfer_fwhm_ps: 330.0,
            transfer_area: PI,
            transfer_chirp_hz_per_ns: 0.0,
            ideal_transfers: false,
            window_ns: None,
            dephasing_time_ns: DEFAULT_DEPHASING_NS,
        }
    }
}

impl PulseSettings {
    pub fn window_width(&self) -> f64 {
        self.window_ns.unwrap_or(3.0 * self.signal_fwhm_ps * 1e-3)
    }

    fn control(&self, t: f64, role: EventRole) -> PulseEvent {
        PulseEvent {
            channel: Channel::Control,
            center_ns: t,
            area: self.control_area,
            fwhm_ps: self.control_fwhm_ps,
            chirp_hz_per_ns: 0.0,
            phase: 0.0,
            ideal: false,
            role,
        }
    }

    fn transfer(&self, t: f64, area: f64, role: EventRole) -> PulseEvent {
        PulseEvent {
            channel: Channel::Transfer,
            center_ns: t,
            area,
            fwhm_ps: self.transfer_fwhm_ps,
            chirp_hz_per_ns: self.transfer_chirp_hz_per_ns,
            phase: 0.0,
            ideal: self.ideal_transfers,
            role,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSequence {
    pub name: String,
    pub events: Vec<PulseEvent>,
    pub inputs: Vec<SignalBin>,
    pub windows: Vec<RetrievalWindow>,
    pub signal_fwhm_ps: f64,
    pub dephasing_time_ns: f64,
    /// |k_gd| / |k_gs| assumed when the timings were derived.
    pub ratio: f64,
}

impl PulseSequence {
    fn new(name: &str, s: &PulseSettings, ratio: f64) -> Self {
        PulseSequence {
            name: name.to_string(),
            events: Vec::new(),
            inputs: Vec::new(),
            windows: Vec::new(),
            signal_fwhm_ps: s.signal_fwhm_ps,
            dephasing_time_ns: s.dephasing_time_ns,
            ratio,
        }
    }

    fn sort(&mut self) {
        self.events.sort_by(|a, b| a.center_ns.total_cmp(&b.center_ns));
    }

    pub fn with_dephasing_time(mut self, t_deph: f64) -> Self {
        self.dephasing_time_ns = t_deph;
        self
    }

    /// Replace the relative input amplitudes (one per bin).
    pub fn with_input_amplitudes(mut self, amps: &[f64]) -> Result<Self> {
        if amps.len() != self.inputs.len() {
            return Err(Error::validation(format!(
                "{} amplitudes given for {} input bins",
                amps.len(),
                self.inputs.len()
            )));
        }
        for (b, &a) in self.inputs.iter_mut().zip(amps) {
            b.amplitude = a;
        }
        Ok(self)
    }

    pub fn retrieval_times(&self) -> Vec<f64> {
        self.events.iter().filter(|e| matches!(e.role, EventRole::Retrieval { .. })).map(|e| e.center_ns).collect()
    }

    pub fn transfer_times(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| matches!(e.role, EventRole::Transfer | EventRole::Mix))
            .map(|e| e.center_ns)
            .collect()
    }

    /// Earliest and latest pulse centers.
    pub fn span(&self) -> (f64, f64) {
        let times = self.events.iter().map(|e| e.center_ns).chain(self.inputs.iter().map(|b| b.center_ns));
        times.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sequence serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut seq: PulseSequence = serde_json::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        seq.sort();
        Ok(seq)
    }
}

/// Control at 0 and a retrieval control at `t`, no transfers.
pub fn build_standard_orca(t: f64, s: &PulseSettings) -> Result<PulseSequence> {
    if !(t >= 0.0) {
        return Err(Error::validation(format!("storage time must be non-negative, got {t} ns")));
    }
    let mut seq = PulseSequence::new("standard", s, 1.0);
    seq.inputs.push(SignalBin { center_ns: 0.0, amplitude: 1.0, phase: 0.0 });
    seq.events.push(s.control(0.0, EventRole::Storage { bin: 0 }));
    seq.events.push(s.control(t, EventRole::Retrieval { source_bin: Some(0) }));
    seq.windows.push(RetrievalWindow::centered(t, s.window_width(), Some(0)));
    seq.sort();
    Ok(seq)
}

/// Store at 0, transfer at `t` and `t + 2t/r`, retrieve at `2t + 2t/r`.
pub fn build_rephased(t: f64, r: f64, s: &PulseSettings) -> Result<PulseSequence> {
    if !(r > 0.0) {
        return Err(Error::validation(format!("wavevector ratio must be positive, got {r}")));
    }
    if !(t > s.dephasing_time_ns) {
        return Err(Error::validation(format!(
            "T = {t} ns does not exceed the dephasing time {} ns: coherence not yet dephased is retrievable early",
            s.dephasing_time_ns
        )));
    }
    let shelved = 2.0 * t / r;
    let t_ret = 2.0 * t + shelved;
    let mut seq = PulseSequence::new("rephased", s, r);
    seq.inputs.push(SignalBin { center_ns: 0.0, amplitude: 1.0, phase: 0.0 });
    seq.events.push(s.control(0.0, EventRole::Storage { bin: 0 }));
    seq.events.push(s.transfer(t, s.transfer_area, EventRole::Transfer));
    seq.events.push(s.transfer(t + shelved, s.transfer_area, EventRole::Transfer));
    seq.events.push(s.control(t_ret, EventRole::Retrieval { source_bin: Some(0) }));
    seq.windows.push(RetrievalWindow::centered(t_ret, s.window_width(), Some(0)));
    seq.sort();
    Ok(seq)
}

/// How bins are grouped for multimode storage: consecutive groups of
/// `group_size` bins share one pair of transfers and are each retrieved
/// `storage_ns` after they were written.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentPlan {
    pub storage_ns: f64,
    pub group_size: usize,
    #[serde(default = "unit_ratio")]
    pub ratio: f64,
}

fn unit_ratio() -> f64 {
    1.0
}

impl SegmentPlan {
    /// Four bins at 0, 4, 12.5 and 16.5 ns in two groups, 25 ns storage.
    pub fn four_bin() -> (Vec<f64>, SegmentPlan) {
        (vec![0.0, 4.0, 12.5, 16.5], SegmentPlan { storage_ns: 25.0, group_size: 2, ratio: 1.0 })
    }
}

fn check_separation(bins: &[f64], t_deph: f64) -> Result<()> {
    for w in bins.windows(2) {
        let sep = w[1] - w[0];
        if sep < t_deph {
            return Err(Error::validation(format!(
                "bins at {} and {} ns are separated by {sep} ns, below the dephasing time {t_deph} ns",
                w[0], w[1]
            )));
        }
        if sep < 3.0 * t_deph {
            log::warn!("bins at {} and {} ns are closer than 3 dephasing times", w[0], w[1]);
        }
    }
    Ok(())
}

/// Multimode storage of several time bins. Within each group the first bin
/// sets the transfer timing; each bin is retrieved `storage_ns` after input.
pub fn build_multimode(bins: &[f64], plan: &SegmentPlan, s: &PulseSettings) -> Result<PulseSequence> {
    if bins.is_empty() {
        return Err(Error::validation("no input bins"));
    }
    if plan.group_size == 0 || !(plan.storage_ns > 0.0) || !(plan.ratio > 0.0) {
        return Err(Error::validation("segment plan needs positive storage time, ratio and group size"));
    }
    if bins.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("bin times must be strictly increasing"));
    }
    check_separation(bins, s.dephasing_time_ns)?;
    let shelved = plan.storage_ns / (1.0 + plan.ratio);
    let lead = (plan.storage_ns - shelved) / 2.0;
    let mut seq = PulseSequence::new("multimode", s, plan.ratio);
    let mut transfers: Vec<f64> = Vec::new();
    for (k, group) in bins.chunks(plan.group_size).enumerate() {
        let a = group[0];
        for t in [a + lead, a + lead + shelved] {
            if !transfers.iter().any(|&x| (x - t).abs() < 1e-9) {
                transfers.push(t);
            }
        }
        for (i, &b) in group.iter().enumerate() {
            let bin = k * plan.group_size + i;
            if b >= a + lead {
                return Err(Error::validation(format!("bin at {b} ns arrives after its group's first transfer")));
            }
            seq.inputs.push(SignalBin { center_ns: b, amplitude: 1.0, phase: 0.0 });
            seq.events.push(s.control(b, EventRole::Storage { bin }));
            let t_ret = b + plan.storage_ns;
            seq.events.push(s.control(t_ret, EventRole::Retrieval { source_bin: Some(bin) }));
            seq.windows.push(RetrievalWindow::centered(t_ret, s.window_width(), Some(bin)));
        }
    }
    transfers.sort_by(f64::total_cmp);
    let min_gap = 3.0 * s.transfer_fwhm_ps * 1e-3;
    if let Some(w) = transfers.windows(2).find(|w| w[1] - w[0] < min_gap) {
        return Err(Error::validation(format!(
            "transfers at {:.3} and {:.3} ns overlap; groups cannot share a transfer at ratio {}",
            w[0], w[1], plan.ratio
        )));
    }
    for t in transfers {
        seq.events.push(s.transfer(t, s.transfer_area, EventRole::Transfer));
    }
    seq.sort();
    Ok(seq)
}

fn check_pair(t1: f64, t2: f64, s: &PulseSettings) -> Result<f64> {
    let dt = t2 - t1;
    if !(dt >= 3.0 * s.dephasing_time_ns) {
        return Err(Error::validation(format!(
            "bins at {t1} and {t2} ns must be at least 3 dephasing times ({} ns) apart",
            3.0 * s.dephasing_time_ns
        )));
    }
    Ok(dt)
}

/// Store two bins and retrieve them in reverse order: bin 2 at `t3`, then
/// bin 1 at `t4` (r = 1 timing).
pub fn build_reorder_pair(t1: f64, t2: f64, s: &PulseSettings) -> Result<PulseSequence> {
    let dt = check_pair(t1, t2, s)?;
    let h = dt / 2.0;
    let x1 = t2 + h;
    let x2 = x1 + 2.0 * h;
    let t3 = x2 + h;
    let x3 = t3 + h;
    let x4 = x3 + dt + 2.0 * h;
    let t4 = x4 + h;
    let mut seq = PulseSequence::new("reorder", s, 1.0);
    seq.inputs.push(SignalBin { center_ns: t1, amplitude: 1.0, phase: 0.0 });
    seq.inputs.push(SignalBin { center_ns: t2, amplitude: 1.0, phase: 0.0 });
    seq.events.push(s.control(t1, EventRole::Storage { bin: 0 }));
    seq.events.push(s.control(t2, EventRole::Storage { bin: 1 }));
    for x in [x1, x2, x3, x4] {
        seq.events.push(s.transfer(x, s.transfer_area, EventRole::Transfer));
    }
    seq.events.push(s.control(t3, EventRole::Retrieval { source_bin: Some(1) }));
    seq.events.push(s.control(t4, EventRole::Retrieval { source_bin: Some(0) }));
    seq.windows.push(RetrievalWindow::centered(t3, s.window_width(), Some(1)));
    seq.windows.push(RetrievalWindow::centered(t4, s.window_width(), Some(0)));
    seq.sort();
    Ok(seq)
}

/// Store two bins, bring them to identical per-class phase in s and d, mix
/// them with a transfer of area `mix_area`, then retrieve both ports.
pub fn build_interference_pair(t1: f64, t2: f64, mix_area: f64, s: &PulseSettings) -> Result<PulseSequence> {
    let dt = check_pair(t1, t2, s)?;
    let h = dt / 2.0;
    let x1 = t1 + h;
    let x2 = t2 + h;
    let x3 = x2 + h;
    let x4 = x3 + h;
    let t3 = x4 + h;
    let x5 = t3 + h;
    let t4 = x5 + h;
    let mut seq = PulseSequence::new("interference", s, 1.0);
    seq.inputs.push(SignalBin { center_ns: t1, amplitude: 1.0, phase: 0.0 });
    seq.inputs.push(SignalBin { center_ns: t2, amplitude: 1.0, phase: 0.0 });
    seq.events.push(s.control(t1, EventRole::Storage { bin: 0 }));
    seq.events.push(s.control(t2, EventRole::Storage { bin: 1 }));
    seq.events.push(s.transfer(x1, s.transfer_area, EventRole::Transfer));
    seq.events.push(s.transfer(x2, s.transfer_area, EventRole::Transfer));
    seq.events.push(s.transfer(x3, mix_area, EventRole::Mix));
    seq.events.push(s.transfer(x4, s.transfer_area, EventRole::Transfer));
    seq.events.push(s.transfer(x5, s.transfer_area, EventRole::Transfer));
    seq.events.push(s.control(t3, EventRole::Retrieval { source_bin: Some(1) }));
    seq.events.push(s.control(t4, EventRole::Retrieval { source_bin: Some(0) }));
    seq.windows.push(RetrievalWindow::centered(t3, s.window_width(), Some(1)));
    seq.windows.push(RetrievalWindow::centered(t4, s.window_width(), Some(0)));
    seq.sort();
    Ok(seq)
}

/// Protocol names understood by the command-line front end.
pub const PROTOCOL_NAMES: [&str; 5] = ["standard", "rephased", "multimode", "reorder", "interference"];

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> Result<Vec<String>> {
        if self.errors.is_empty() {
            Ok(self.warnings)
        } else {
            Err(Error::Validation(self.errors.join("; ")))
        }
    }
}

/// Structural checks on a sequence. `tau_span`, if given, is the simulated
/// interval every event must fall in.
pub fn validate(seq: &PulseSequence, tau_span: Option<(f64, f64)>) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let t_deph = seq.dephasing_time_ns;

    for e in &seq.events {
        if !(e.center_ns >= 0.0) {
            rep.errors.push(format!("event at {} ns has negative time", e.center_ns));
        }
        if !(e.fwhm_ps > 0.0) {
            rep.errors.push(format!("event at {} ns has non-positive FWHM", e.center_ns));
        }
        if let Some((lo, hi)) = tau_span {
            if e.center_ns < lo || e.center_ns > hi {
                rep.errors.push(format!("event at {} ns lies outside the simulated span [{lo}, {hi}] ns", e.center_ns));
            }
        }
    }
    if seq.events.windows(2).any(|w| w[1].center_ns < w[0].center_ns) {
        rep.errors.push("events are not sorted by time".into());
    }

    let mut bins: Vec<f64> = seq.inputs.iter().map(|b| b.center_ns).collect();
    bins.sort_by(f64::total_cmp);
    for w in bins.windows(2) {
        let sep = w[1] - w[0];
        if sep < t_deph {
            rep.errors.push(format!("bins at {} and {} ns are closer than one dephasing time", w[0], w[1]));
        } else if sep < 3.0 * t_deph {
            rep.warnings.push(format!(
                "bins at {} and {} ns are separated by {:.2} dephasing times (< 3)",
                w[0],
                w[1],
                sep / t_deph
            ));
        }
    }

    let half_bin = 0.5 * seq.signal_fwhm_ps * 1e-3;
    for w in &seq.windows {
        if w.end_ns <= w.start_ns {
            rep.errors.push(format!("retrieval window [{}, {}] ns is empty", w.start_ns, w.end_ns));
        }
        for b in &seq.inputs {
            if b.center_ns + half_bin > w.start_ns && b.center_ns - half_bin < w.end_ns {
                rep.errors.push(format!(
                    "retrieval window [{:.3}, {:.3}] ns overlaps the input bin at {} ns",
                    w.start_ns, w.end_ns, b.center_ns
                ));
            }
        }
    }

    let storage: Vec<f64> =
        seq.events.iter().filter(|e| matches!(e.role, EventRole::Storage { .. })).map(|e| e.center_ns).collect();
    let retrieval = seq.retrieval_times();
    let first_store = storage.iter().cloned().fold(f64::INFINITY, f64::min);
    let last_retrieve = retrieval.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for e in seq.events.iter().filter(|e| matches!(e.role, EventRole::Transfer | EventRole::Mix)) {
        if !(e.center_ns > first_store && e.center_ns < last_retrieve) {
            rep.errors.push(format!("transfer at {} ns is not between storage and retrieval", e.center_ns));
        }
    }

    for e in &seq.events {
        let EventRole::Retrieval { source_bin } = e.role else { continue };
        let source_time = match source_bin {
            Some(i) => match seq.inputs.get(i) {
                Some(b) => b.center_ns,
                None => {
                    rep.errors.push(format!("retrieval at {} ns names unknown bin {i}", e.center_ns));
                    continue;
                }
            },
            None => match bins.iter().rev().find(|&&b| b < e.center_ns) {
                Some(&b) => b,
                None => {
                    rep.errors.push(format!("retrieval at {} ns precedes every input bin", e.center_ns));
                    continue;
                }
            },
        };
        let path: Vec<f64> = seq
            .events
            .iter()
            .filter(|x| x.role == EventRole::Transfer && x.center_ns > source_time && x.center_ns < e.center_ns)
            .map(|x| x.center_ns)
            .collect();
        if path.len() % 2 == 1 {
            rep.errors.push(format!(
                "coherence shelved at retrieval: {} transfers between {source_time} and {} ns",
                path.len(),
                e.center_ns
            ));
            continue;
        }
        let mut phase = 0.0;
        let mut shelved = false;
        let mut last = source_time;
        for &x in path.iter().chain(std::iter::once(&e.center_ns)) {
            let dt = x - last;
            phase += if shelved { -seq.ratio * dt } else { dt };
            shelved = !shelved;
            last = x;
        }
        if path.is_empty() {
            continue;
        }
        if phase.abs() > 0.5 * t_deph {
            rep.warnings.push(format!(
                "retrieval at {} ns: residual Doppler phase corresponds to {phase:.3} ns of dephasing",
                e.center_ns
            ));
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times(seq: &PulseSequence) -> Vec<f64> {
        seq.events.iter().map(|e| e.center_ns).collect()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
    }

    #[test]
    fn rephased_timing_at_6_25_ns() {
        let seq = build_rephased(6.25, 1.0, &PulseSettings::default()).unwrap();
        assert!(close(&times(&seq), &[0.0, 6.25, 18.75, 25.0]));
        assert!(validate(&seq, None).errors.is_empty());
    }

    #[test]
    fn rephased_ratio_rescales_shelving() {
        let seq = build_rephased(6.25, 1.009, &PulseSettings::default()).unwrap();
        let t = times(&seq);
        assert!((t[2] - t[1] - 12.5 / 1.009).abs() < 1e-12);
        let rep = validate(&seq, None);
        assert!(rep.errors.is_empty() && rep.warnings.is_empty(), "{rep:?}");
    }

    #[test]
    fn rephased_retrieval_at_four_t() {
        for t in [2.0, 5.0, 11.3] {
            let seq = build_rephased(t, 1.0, &PulseSettings::default()).unwrap();
            assert!((seq.retrieval_times()[0] - 4.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn rephased_rejects_short_t() {
        assert!(matches!(build_rephased(1.0, 1.0, &PulseSettings::default()), Err(Error::Validation(_))));
    }

    #[test]
    fn standard_has_two_controls() {
        let seq = build_standard_orca(0.5, &PulseSettings::default()).unwrap();
        assert_eq!(seq.events.len(), 2);
        assert!(seq.transfer_times().is_empty());
    }

    #[test]
    fn four_bin_multimode_plan() {
        let (bins, plan) = SegmentPlan::four_bin();
        let seq = build_multimode(&bins, &plan, &PulseSettings::default()).unwrap();
        assert!(close(&seq.transfer_times(), &[6.25, 18.75, 31.25]));
        assert!(close(&seq.retrieval_times(), &[25.0, 29.0, 37.5, 41.5]));
        let rep = validate(&seq, None);
        assert!(rep.errors.is_empty(), "{rep:?}");
    }

    #[test]
    fn multimode_separation_rules() {
        let plan = SegmentPlan { storage_ns: 25.0, group_size: 2, ratio: 1.0 };
        assert!(build_multimode(&[0.0, 4.0], &plan, &PulseSettings::default()).is_ok());
        assert!(build_multimode(&[0.0, 0.5], &plan, &PulseSettings::default()).is_err());
        let (bins, mut plan) = SegmentPlan::four_bin();
        plan.ratio = 1.009;
        assert!(build_multimode(&bins, &plan, &PulseSettings::default()).is_err());
    }

    #[test]
    fn reorder_timing_and_order() {
        let seq = build_reorder_pair(0.0, 4.0, &PulseSettings::default()).unwrap();
        assert!(close(&seq.transfer_times(), &[6.0, 10.0, 14.0, 22.0]));
        assert!(close(&seq.retrieval_times(), &[12.0, 24.0]));
        assert!(validate(&seq, None).is_ok());
        assert!(build_reorder_pair(3.0, 3.0, &PulseSettings::default()).is_err());
    }

    #[test]
    fn interference_timing() {
        let seq = build_interference_pair(0.0, 4.0, PI / 2.0, &PulseSettings::default()).unwrap();
        assert!(close(&seq.transfer_times(), &[2.0, 6.0, 8.0, 10.0, 14.0]));
        assert!(close(&seq.retrieval_times(), &[12.0, 16.0]));
        let rep = validate(&seq, None);
        assert!(rep.errors.is_empty() && rep.warnings.is_empty(), "{rep:?}");
    }

    #[test]
    fn odd_transfer_count_is_error() {
        let mut seq = build_rephased(6.25, 1.0, &PulseSettings::default()).unwrap();
        seq.events.remove(2);
        let rep = validate(&seq, None);
        assert!(rep.errors.iter().any(|e| e.contains("coherence shelved at retrieval")), "{rep:?}");
    }

    #[test]
    fn close_bins_warn_not_error() {
        let mut seq = build_reorder_pair(0.0, 4.0, &PulseSettings::default()).unwrap();
        seq.inputs[1].center_ns = 2.75;
        let rep = validate(&seq, None);
        assert!(rep.errors.is_empty(), "{rep:?}");
        assert!(!rep.warnings.is_empty());
    }

    #[test]
    fn events_outside_span() {
        let seq = build_rephased(6.25, 1.0, &PulseSettings::default()).unwrap();
        assert!(!validate(&seq, Some((0.0, 20.0))).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let seq = build_interference_pair(0.0, 4.0, 1.0, &PulseSettings::default()).unwrap();
        let back = PulseSequence::from_json(&seq.to_json()).unwrap();
        assert_eq!(seq, back);
    }
}
