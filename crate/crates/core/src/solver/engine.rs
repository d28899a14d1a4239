//! Time stepping shared by both tiers.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::chebyshev::{quadrature_weights, FieldSolver};
use super::record::{AppliedEvent, CoherenceSnapshot, SimulationRecord};
use super::{four_level, hyperfine, InitialCoherence, SolverConfig, Tier};
use crate::error::{Error, Result};
use crate::fields::{area_to_peak, Channel, PulseEnvelope};
use crate::protocol::PulseSequence;

/// Field amplitudes acting at one instant. Control and transfer values are
/// half Rabi frequencies (rad/ns), the couplings that enter the equations.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Drive {
    pub control: Complex64,
    pub transfer: Complex64,
    pub signal_in: [Complex64; 3],
}

/// One tier's equations for a single velocity class.
///
/// A class state holds `nz * channels` values laid out z-major.
pub(crate) trait Medium: Sync {
    fn nq(&self) -> usize;
    fn nz(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn channels(&self) -> usize;
    /// Row-major `nq × nq` self-coupling K of the field equation.
    fn self_coupling(&self) -> Vec<Complex64>;
    /// Largest |two- or three-photon detuning| over classes and channels.
    fn max_rate(&self) -> f64;
    /// Writes this class's contribution to the field source, `nz * nq` values.
    fn source(&self, v: usize, d: &Drive, y: &[Complex64], src: &mut [Complex64]);
    fn derivative(&self, v: usize, d: &Drive, y: &[Complex64], e: &[Complex64], dy: &mut [Complex64]);
    /// Exact field-free evolution over `dt`.
    fn free_evolve(&self, v: usize, dt: f64, y: &mut [Complex64]);
    /// Instantaneous s ↔ d rotation of the given area and phase.
    fn ideal_transfer(&self, v: usize, area: f64, phase: f64, y: &mut [Complex64]);
    /// sqrt of the class weight used for the collective coherence.
    fn class_amplitude(&self, v: usize) -> f64;
}

/// Snapshot of the atomic state at one τ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceState {
    pub tau_ns: f64,
    pub nz: usize,
    pub n_classes: usize,
    pub channels: usize,
    /// Index `(v * nz + z) * channels + c`.
    pub data: Vec<Complex64>,
}

impl CoherenceState {
    pub fn zeros(nz: usize, n_classes: usize, channels: usize) -> Self {
        CoherenceState { tau_ns: 0.0, nz, n_classes, channels, data: vec![Complex64::ZERO; nz * n_classes * channels] }
    }

    pub fn get(&self, z: usize, v: usize, c: usize) -> Complex64 {
        self.data[(v * self.nz + z) * self.channels + c]
    }

    pub fn set(&mut self, z: usize, v: usize, c: usize, value: Complex64) {
        self.data[(v * self.nz + z) * self.channels + c] = value;
    }
}

struct FinitePulse {
    env: PulseEnvelope,
    lo: f64,
    hi: f64,
}

#[derive(Debug, Clone, Copy)]
enum Instant {
    Transfer { area: f64, phase: f64 },
    Snapshot,
}

struct Workspace {
    y: Vec<Complex64>,
    tmp: Vec<Complex64>,
    acc: Vec<Complex64>,
    k: Vec<Complex64>,
    src_class: Vec<Complex64>,
    src: Vec<Complex64>,
    e: Vec<Complex64>,
}

struct Engine<'a, M: Medium> {
    m: &'a M,
    solver: FieldSolver,
    pulses: Vec<FinitePulse>,
    signal_pol: [Complex64; 3],
    class_len: usize,
    quad: Vec<f64>,
}

impl<'a, M: Medium> Engine<'a, M> {
    fn drive(&self, tau: f64) -> Drive {
        let mut d = Drive { control: Complex64::ZERO, transfer: Complex64::ZERO, signal_in: [Complex64::ZERO; 3] };
        for p in &self.pulses {
            if tau < p.lo || tau > p.hi {
                continue;
            }
            let a = p.env.amplitude(tau);
            match p.env.channel {
                Channel::Control => d.control += 0.5 * a,
                Channel::Transfer => d.transfer += 0.5 * a,
                Channel::Signal => {
                    for (q, c) in self.signal_pol.iter().enumerate() {
                        d.signal_in[q] += a * c;
                    }
                }
            }
        }
        d
    }

    /// Field along the cell for state `y`, written into `ws.e`.
    fn field(
        &self,
        d: &Drive,
        y: &[Complex64],
        src_class: &mut [Complex64],
        src: &mut [Complex64],
        e: &mut [Complex64],
    ) {
        let m = self.m;
        let stride = m.nz() * m.nq();
        src_class
            .par_chunks_mut(stride)
            .zip(y.par_chunks(self.class_len))
            .enumerate()
            .for_each(|(v, (s, yv))| m.source(v, d, yv, s));
        src.iter_mut().for_each(|x| *x = Complex64::ZERO);
        // Fixed class order keeps the reduction independent of thread count.
        for chunk in src_class.chunks(stride) {
            for (acc, x) in src.iter_mut().zip(chunk) {
                *acc += x;
            }
        }
        self.solver.solve(&d.signal_in[..m.nq()], src, e);
    }

    fn rhs(
        &self,
        tau: f64,
        y: &[Complex64],
        dy: &mut [Complex64],
        src_class: &mut [Complex64],
        src: &mut [Complex64],
        e: &mut [Complex64],
    ) {
        let d = self.drive(tau);
        self.field(&d, y, src_class, src, e);
        let m = self.m;
        let e: &[Complex64] = e;
        dy.par_chunks_mut(self.class_len)
            .zip(y.par_chunks(self.class_len))
            .enumerate()
            .for_each(|(v, (dv, yv))| m.derivative(v, &d, yv, e, dv));
    }

    fn rk4_step(&self, tau: f64, h: f64, ws: &mut Workspace) {
        let Workspace { y, tmp, acc, k, src_class, src, e } = ws;
        self.rhs(tau, y, k, src_class, src, e);
        for i in 0..y.len() {
            acc[i] = k[i];
            tmp[i] = y[i] + 0.5 * h * k[i];
        }
        self.rhs(tau + 0.5 * h, tmp, k, src_class, src, e);
        for i in 0..y.len() {
            acc[i] += 2.0 * k[i];
            tmp[i] = y[i] + 0.5 * h * k[i];
        }
        self.rhs(tau + 0.5 * h, tmp, k, src_class, src, e);
        for i in 0..y.len() {
            acc[i] += 2.0 * k[i];
            tmp[i] = y[i] + h * k[i];
        }
        self.rhs(tau + h, tmp, k, src_class, src, e);
        for i in 0..y.len() {
            y[i] += h / 6.0 * (acc[i] + k[i]);
        }
    }

    fn free(&self, dt: f64, y: &mut [Complex64]) {
        if dt <= 0.0 {
            return;
        }
        let m = self.m;
        y.par_chunks_mut(self.class_len).enumerate().for_each(|(v, yv)| m.free_evolve(v, dt, yv));
    }

    fn transfer(&self, area: f64, phase: f64, y: &mut [Complex64]) {
        let m = self.m;
        y.par_chunks_mut(self.class_len).enumerate().for_each(|(v, yv)| m.ideal_transfer(v, area, phase, yv));
    }

    /// ∫dξ Σ_v Σ_c |y|².
    fn stored(&self, y: &[Complex64]) -> f64 {
        let (nz, ch) = (self.m.nz(), self.m.channels());
        let mut total = 0.0;
        for yv in y.chunks(self.class_len) {
            for z in 0..nz {
                let s: f64 = yv[z * ch..(z + 1) * ch].iter().map(|c| c.norm_sqr()).sum();
                total += self.quad[z] * s;
            }
        }
        total
    }

    /// Σ_v sqrt(w_v) · ∫dξ y for every coherence channel.
    fn collective(&self, y: &[Complex64]) -> Vec<Complex64> {
        let (nz, ch) = (self.m.nz(), self.m.channels());
        let mut out = vec![Complex64::ZERO; ch];
        for (v, yv) in y.chunks(self.class_len).enumerate() {
            let w = self.m.class_amplitude(v);
            for z in 0..nz {
                for (o, c) in out.iter_mut().zip(&yv[z * ch..(z + 1) * ch]) {
                    *o += w * self.quad[z] * c;
                }
            }
        }
        out
    }
}

fn check_finite(y: &[Complex64], tau: f64) -> Result<()> {
    let s: f64 = y.iter().map(|c| c.norm_sqr()).sum();
    if !s.is_finite() {
        return Err(Error::Divergence { tau_ns: tau, msg: "non-finite coherence".into() });
    }
    Ok(())
}

pub(crate) fn integrate<M: Medium>(m: &M, cfg: &SolverConfig, seq: &PulseSequence) -> Result<SimulationRecord> {
    let dt = cfg.dtau_ns();
    let nq = m.nq();
    let class_len = m.nz() * m.channels();
    let solver = FieldSolver::new(m.nz(), &m.self_coupling(), nq)?;

    let mut pulses = Vec::new();
    for b in &seq.inputs {
        let env =
            PulseEnvelope::new(Channel::Signal, b.center_ns, seq.signal_fwhm_ps, b.amplitude)?.with_phase(b.phase);
        let env = if b.amplitude < 0.0 { env.with_phase(b.phase + std::f64::consts::PI) } else { env };
        pulses.push(env);
    }
    let mut instants: Vec<(f64, Instant)> = Vec::new();
    let mut applied = Vec::new();
    for e in &seq.events {
        if e.ideal {
            if e.channel != Channel::Transfer {
                return Err(Error::config(format!("only transfer pulses may be ideal (event at {} ns)", e.center_ns)));
            }
            instants.push((e.center_ns, Instant::Transfer { area: e.area, phase: e.phase }));
        } else {
            let peak = area_to_peak(e.area, e.fwhm_ps)?;
            let env = PulseEnvelope::new(e.channel, e.center_ns, e.fwhm_ps, peak)?
                .with_chirp(e.chirp_hz_per_ns)
                .with_phase(e.phase);
            pulses.push(env);
        }
        applied.push(AppliedEvent { tau_ns: e.center_ns, channel: e.channel, area: e.area, ideal: e.ideal });
    }
    for &t in &cfg.snapshot_times {
        instants.push((t, Instant::Snapshot));
    }
    instants.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Active windows on the global grid τ = i·dt.
    let mut windows: Vec<(i64, i64)> = pulses
        .iter()
        .map(|p| {
            let h = p.half_extent_ns();
            (((p.center_ns - h) / dt).floor() as i64, ((p.center_ns + h) / dt).ceil() as i64)
        })
        .collect();
    windows.sort();
    let mut merged: Vec<(i64, i64)> = Vec::new();
    for w in windows {
        match merged.last_mut() {
            Some(last) if w.0 <= last.1 => last.1 = last.1.max(w.1),
            _ => merged.push(w),
        }
    }

    let engine = Engine {
        m,
        solver,
        pulses: pulses
            .into_iter()
            .map(|env| {
                let h = env.half_extent_ns();
                FinitePulse { env, lo: env.center_ns - h, hi: env.center_ns + h }
            })
            .collect(),
        // The four-level tier has a single scalar field component.
        signal_pol: if nq == 1 {
            [Complex64::ONE, Complex64::ZERO, Complex64::ZERO]
        } else {
            *cfg.polarizations.signal.components()
        },
        class_len,
        quad: quadrature_weights(m.nz()),
    };

    let n_total = class_len * m.n_classes();
    let mut ws = Workspace {
        y: vec![Complex64::ZERO; n_total],
        tmp: vec![Complex64::ZERO; n_total],
        acc: vec![Complex64::ZERO; n_total],
        k: vec![Complex64::ZERO; n_total],
        src_class: vec![Complex64::ZERO; m.nz() * nq * m.n_classes()],
        src: vec![Complex64::ZERO; m.nz() * nq],
        e: vec![Complex64::ZERO; m.nz() * nq],
    };
    if cfg.initial == InitialCoherence::Uniform {
        for (v, yv) in ws.y.chunks_mut(class_len).enumerate() {
            let a = m.class_amplitude(v);
            for z in 0..m.nz() {
                yv[z * m.channels()] = Complex64::new(a, 0.0);
            }
        }
    }

    let mut rec = SimulationRecord::new(cfg, seq, nq);
    rec.events = applied;

    let t_first = merged
        .first()
        .map(|w| w.0 as f64 * dt)
        .into_iter()
        .chain(instants.first().map(|i| i.0))
        .fold(f64::INFINITY, f64::min);
    // A pre-written spin wave is defined at τ = 0; otherwise nothing happens
    // before the first event.
    let mut tau = match cfg.initial {
        InitialCoherence::Uniform if t_first < 0.0 => {
            return Err(Error::validation("events before τ = 0 cannot act on a pre-written spin wave"));
        }
        InitialCoherence::Uniform => 0.0,
        InitialCoherence::Empty if t_first.is_finite() => t_first,
        InitialCoherence::Empty => 0.0,
    };
    let mut next_instant = 0;

    let take_snapshot = |rec: &mut SimulationRecord, y: &[Complex64], tau: f64| {
        rec.snapshots.push(CoherenceSnapshot {
            tau_ns: tau,
            collective: engine.collective(y),
            stored: engine.stored(y),
        });
    };
    let apply = |inst: Instant, y: &mut [Complex64], rec: &mut SimulationRecord, tau: f64| match inst {
        Instant::Transfer { area, phase } => engine.transfer(area, phase, y),
        Instant::Snapshot => take_snapshot(rec, y, tau),
    };

    for &(i0, i1) in &merged {
        let t0 = i0 as f64 * dt;
        while next_instant < instants.len() && instants[next_instant].0 < t0 - 0.5 * dt {
            let (t, inst) = instants[next_instant];
            engine.free(t - tau, &mut ws.y);
            tau = t;
            apply(inst, &mut ws.y, &mut rec, tau);
            next_instant += 1;
        }
        engine.free(t0 - tau, &mut ws.y);
        for i in i0..=i1 {
            tau = i as f64 * dt;
            while next_instant < instants.len() && instants[next_instant].0 < tau + 0.5 * dt {
                apply(instants[next_instant].1, &mut ws.y, &mut rec, tau);
                next_instant += 1;
            }
            let d = engine.drive(tau);
            let Workspace { y, src_class, src, e, .. } = &mut ws;
            engine.field(&d, y, src_class, src, e);
            rec.push_sample(tau, &e[(m.nz() - 1) * nq..], &d.signal_in[..nq], engine.stored(y));
            if i < i1 {
                engine.rk4_step(tau, dt, &mut ws);
                check_finite(&ws.y, tau + dt)?;
            }
        }
    }
    while next_instant < instants.len() {
        let (t, inst) = instants[next_instant];
        engine.free(t - tau, &mut ws.y);
        tau = t;
        apply(inst, &mut ws.y, &mut rec, tau);
        next_instant += 1;
    }
    if let Some(t_end) = cfg.tau_end_ns {
        if t_end > tau {
            engine.free(t_end - tau, &mut ws.y);
            tau = t_end;
        }
    }
    rec.final_tau_ns = tau;
    rec.final_stored = engine.stored(&ws.y);
    rec.final_collective = engine.collective(&ws.y);
    Ok(rec)
}

/// Signal field along the cell for a given atomic state, input boundary
/// value (one entry per field component) and half control Rabi frequency.
/// Returns `E(ξ_i, Q)` at index `i * nq + Q`.
pub fn propagate_field_slice(
    cfg: &SolverConfig,
    state: &CoherenceState,
    e_in: &[Complex64],
    control: Complex64,
) -> Result<Vec<Complex64>> {
    fn go<M: Medium>(m: &M, state: &CoherenceState, e_in: &[Complex64], control: Complex64) -> Result<Vec<Complex64>> {
        let nq = m.nq();
        if e_in.len() != nq {
            return Err(Error::validation(format!("boundary value needs {nq} components, got {}", e_in.len())));
        }
        if state.nz != m.nz() || state.n_classes != m.n_classes() || state.channels != m.channels() {
            return Err(Error::validation("coherence state shape does not match the configuration"));
        }
        let solver = FieldSolver::new(m.nz(), &m.self_coupling(), nq)?;
        let mut signal_in = [Complex64::ZERO; 3];
        signal_in[..nq].copy_from_slice(e_in);
        let d = Drive { control, transfer: Complex64::ZERO, signal_in };
        let class_len = m.nz() * m.channels();
        let mut src = vec![Complex64::ZERO; m.nz() * nq];
        let mut buf = vec![Complex64::ZERO; m.nz() * nq];
        for (v, yv) in state.data.chunks(class_len).enumerate() {
            m.source(v, &d, yv, &mut buf);
            for (a, b) in src.iter_mut().zip(&buf) {
                *a += b;
            }
        }
        let mut out = vec![Complex64::ZERO; m.nz() * nq];
        solver.solve(e_in, &src, &mut out);
        Ok(out)
    }
    match cfg.tier {
        Tier::FourLevel => go(&four_level::FourLevel::new(cfg)?, state, e_in, control),
        Tier::Hyperfine => go(&hyperfine::Hyperfine::new(cfg)?, state, e_in, control),
    }
}
