//! Hyperfine/Zeeman model.
//!
//! Each populated ground sublevel g is an independent sub-ensemble with
//! weight ρ_g. Coherences `S[g, q]` (q in s) and `D[g, b]` (b in d) are the
//! channels; only those reachable from the populated ground sublevels with
//! the configured polarizations are kept.
//!
//! The adiabatically eliminated intermediate amplitude is organised in
//! *groups*. With the signal on the upper leg a group is a single pathway
//! `g → j → q`; with the signal on the lower leg a group is a pair `(g, j)`
//! shared by every q the control reaches from j. For group G with signal
//! coupling vector `ε_G` and control couplings `m_{G,c}`:
//!
//! ```text
//! α_G   = √(d w_v ρ_g) Σ_Q ε_G[Q] E^Q − i c Σ_c m_{G,c} S_c
//! ∂τ S_c += −i (c m_{G,c})* α_G / a_G
//! ∂ξ E^Q = −Σ_G √(d w_v ρ_g) ε_G[Q] α_G / a_G
//! ```
//!
//! with `a_G = γ_e + iΔ_s^{(g,j,v)}` and `c` half the control Rabi frequency.
//! The transfer couples `S[g, q]` and `D[g, b]` through the s → d table.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::engine::{Drive, Medium};
use super::{SignalLeg, SolverConfig, MHZ_TO_RAD_PER_NS};
use crate::atomics::{Label, Manifold, Transition};
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

struct Group {
    /// Index into `ground`.
    g: usize,
    eps: [f64; 3],
    members: Vec<(usize, Complex64)>,
    /// Index into the per-class `inv_a` table.
    a_idx: usize,
}

/// Unitary acting on the S and D channels of one ground sublevel.
/// Bit patterns of the (area, phase) a set of transfer blocks was built for.
type BlockKey = (u64, u64);

struct Block {
    idx: Vec<usize>,
    u: Vec<Complex64>,
}

pub(crate) struct Hyperfine {
    nz: usize,
    n_s: usize,
    n_d: usize,
    groups: Vec<Group>,
    /// Signal self-coupling terms (ground, eps, a_idx) for the populated-transition term.
    self_terms: Vec<(usize, [f64; 3], usize)>,
    populated: bool,
    /// `(s channel, d channel, coefficient)` for the transfer.
    transfer: Vec<(usize, usize, Complex64)>,
    /// Per class: √(d w_v).
    sqrt_dw: Vec<f64>,
    sqrt_rho: Vec<f64>,
    amp: Vec<f64>,
    /// Per class, per intermediate pair: 1/a.
    inv_a: Vec<Vec<Complex64>>,
    dec: Vec<Vec<Complex64>>,
    /// S/D channel ground index.
    channel_ground: Vec<usize>,
    n_ground: usize,
    cache: Mutex<Vec<(BlockKey, Arc<Vec<Block>>)>>,
}

fn offsets(m: &Manifold) -> Vec<f64> {
    let top = m.sublevels.iter().max_by_key(|s| s.f).map_or(0.0, |s| s.offset_mhz);
    m.sublevels.iter().map(|s| (s.offset_mhz - top) * MHZ_TO_RAD_PER_NS).collect()
}

impl Hyperfine {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        let sch = &cfg.scheme;
        let ge = sch.coupling_table(Transition::GroundIntermediate);
        let es = sch.coupling_table(Transition::IntermediateStorage);
        let sd = sch.coupling_table(Transition::StorageShelving);
        let rho = sch.ground_population();
        let pol = &cfg.polarizations;

        let ground: Vec<usize> = (0..rho.len()).filter(|&g| rho[g] > 0.0).collect();
        let ground_pos: HashMap<usize, usize> = ground.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        let mut s_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut s_list: Vec<(usize, usize)> = Vec::new();
        let mut s_chan = |key: (usize, usize), s_list: &mut Vec<(usize, usize)>| -> usize {
            *s_index.entry(key).or_insert_with(|| {
                s_list.push(key);
                s_list.len() - 1
            })
        };

        // Intermediate pairs (g, j) that need a detuning denominator.
        let mut pair_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut pair = |g: usize, j: usize, pairs: &mut Vec<(usize, usize)>| -> usize {
            *pair_index.entry((g, j)).or_insert_with(|| {
                pairs.push((g, j));
                pairs.len() - 1
            })
        };

        let mut groups = Vec::new();
        let mut self_terms = Vec::new();
        match cfg.signal_leg {
            SignalLeg::Upper => {
                let ctl = ge.contract(pol.control.components());
                for &(g, j, mc) in &ctl {
                    let Some(&gi) = ground_pos.get(&g) else { continue };
                    let mut by_q: Vec<(usize, [f64; 3])> = Vec::new();
                    for e in es.entries().iter().filter(|e| e.lower == j) {
                        match by_q.iter_mut().find(|(q, _)| *q == e.upper) {
                            Some((_, eps)) => eps[(e.q + 1) as usize] += e.coef,
                            None => {
                                let mut eps = [0.0; 3];
                                eps[(e.q + 1) as usize] = e.coef;
                                by_q.push((e.upper, eps));
                            }
                        }
                    }
                    for (q, eps) in by_q {
                        let c = s_chan((g, q), &mut s_list);
                        let a_idx = pair(g, j, &mut pairs);
                        groups.push(Group { g: gi, eps, members: vec![(c, mc)], a_idx });
                        self_terms.push((gi, eps, a_idx));
                    }
                }
            }
            SignalLeg::Lower => {
                let ctl = es.contract(pol.control.components());
                for &g in &ground {
                    let gi = ground_pos[&g];
                    let mut by_j: Vec<(usize, [f64; 3])> = Vec::new();
                    for e in ge.entries().iter().filter(|e| e.lower == g) {
                        match by_j.iter_mut().find(|(j, _)| *j == e.upper) {
                            Some((_, eps)) => eps[(e.q + 1) as usize] += e.coef,
                            None => {
                                let mut eps = [0.0; 3];
                                eps[(e.q + 1) as usize] = e.coef;
                                by_j.push((e.upper, eps));
                            }
                        }
                    }
                    for (j, eps) in by_j {
                        let a_idx = pair(g, j, &mut pairs);
                        self_terms.push((gi, eps, a_idx));
                        let members: Vec<(usize, Complex64)> = ctl
                            .iter()
                            .filter(|(jj, _, _)| *jj == j)
                            .map(|&(_, q, m)| (s_chan((g, q), &mut s_list), m))
                            .collect();
                        if !members.is_empty() {
                            groups.push(Group { g: gi, eps, members, a_idx });
                        }
                    }
                }
            }
        }
        if groups.is_empty() {
            return Err(Error::validation("no two-photon pathway connects the populated ground sublevels"));
        }

        // Close the channel set under the transfer coupling.
        let tr = sd.contract(pol.transfer.components());
        let mut d_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut d_list: Vec<(usize, usize)> = Vec::new();
        let mut links: Vec<(usize, usize, Complex64)> = Vec::new();
        let mut done_s = 0;
        let mut done_d = 0;
        loop {
            let mut changed = false;
            while done_s < s_list.len() {
                let (g, q) = s_list[done_s];
                for &(qq, b, m) in tr.iter().filter(|(qq, _, _)| *qq == q) {
                    let _ = qq;
                    let di = *d_index.entry((g, b)).or_insert_with(|| {
                        d_list.push((g, b));
                        d_list.len() - 1
                    });
                    if !links.iter().any(|&(c, d, _)| c == done_s && d == di) {
                        links.push((done_s, di, m));
                    }
                }
                done_s += 1;
                changed = true;
            }
            while done_d < d_list.len() {
                let (g, b) = d_list[done_d];
                for &(q, _, m) in tr.iter().filter(|(_, bb, _)| *bb == b) {
                    let c = s_chan((g, q), &mut s_list);
                    if !links.iter().any(|&(cc, d, _)| cc == c && d == done_d) {
                        links.push((c, done_d, m));
                    }
                }
                done_d += 1;
                changed = true;
            }
            if !changed {
                break;
            }
        }
        let n_s = s_list.len();
        let n_d = d_list.len();
        let transfer: Vec<(usize, usize, Complex64)> = links.into_iter().map(|(c, d, m)| (c, n_s + d, m)).collect();

        let off_g = offsets(sch.manifold(Label::G));
        let off_e = offsets(sch.manifold(Label::E));
        let off_s = offsets(sch.manifold(Label::S));
        let off_d = offsets(sch.manifold(Label::D));
        // Ground offsets are measured from the highest included ground level.
        let g_ref = sch.ground_reference_mhz() * MHZ_TO_RAD_PER_NS;
        let g_top = {
            let m = sch.manifold(Label::G);
            let top = m.sublevels.iter().max_by_key(|s| s.f).map_or(0.0, |s| s.offset_mhz);
            top * MHZ_TO_RAD_PER_NS
        };
        let w_g = |g: usize| off_g[g] + g_top - g_ref;

        let d = cfg.d_rate();
        let k_low = cfg.k_lower();
        let k_gs = cfg.wavevectors.k_gs();
        let k_gd = cfg.k_gd_or_gs();
        let vel = cfg.velocity.velocities();
        let wts = cfg.velocity.weights();
        let mut inv_a = Vec::with_capacity(vel.len());
        let mut dec = Vec::with_capacity(vel.len());
        for &v in vel {
            let sh = |k: f64| k * v * 1e-9;
            inv_a.push(
                pairs
                    .iter()
                    .map(|&(g, j)| Complex64::new(cfg.gamma_e, cfg.detuning + off_e[j] - w_g(g) + sh(k_low)).inv())
                    .collect::<Vec<_>>(),
            );
            let mut row = Vec::with_capacity(n_s + n_d);
            for &(g, q) in &s_list {
                row.push(Complex64::new(cfg.gamma_s, cfg.two_photon_detuning + off_s[q] - w_g(g) + sh(k_gs)));
            }
            for &(g, b) in &d_list {
                row.push(Complex64::new(cfg.gamma_d, cfg.transfer_detuning + off_d[b] - w_g(g) + sh(k_gd)));
            }
            dec.push(row);
        }

        let channel_ground = s_list.iter().chain(&d_list).map(|&(g, _)| ground_pos[&g]).collect();
        Ok(Hyperfine {
            nz: cfg.nz,
            n_s,
            n_d,
            groups,
            self_terms,
            populated: cfg.populated_transition,
            transfer,
            sqrt_dw: wts.iter().map(|w| (d * w).sqrt()).collect(),
            sqrt_rho: ground.iter().map(|&g| rho[g].sqrt()).collect(),
            amp: wts.iter().map(|w| w.sqrt()).collect(),
            inv_a,
            dec,
            channel_ground,
            n_ground: ground.len(),
            cache: Mutex::new(Vec::new()),
        })
    }

    pub fn max_rate(&self) -> f64 {
        self.dec.iter().flatten().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    fn blocks(&self, area: f64, phase: f64) -> Arc<Vec<Block>> {
        let key = (area.to_bits(), phase.to_bits());
        let mut cache = self.cache.lock().expect("transfer cache poisoned");
        if let Some((_, b)) = cache.iter().find(|(k, _)| *k == key) {
            return b.clone();
        }
        let ph = Complex64::from_polar(1.0, phase);
        let mut blocks = Vec::new();
        for g in 0..self.n_ground {
            let idx: Vec<usize> = (0..self.n_s + self.n_d).filter(|&c| self.channel_ground[c] == g).collect();
            let n = idx.len();
            let pos: HashMap<usize, usize> = idx.iter().enumerate().map(|(i, &c)| (c, i)).collect();
            let mut h = DMatrix::<Complex64>::zeros(n, n);
            for &(c, dch, m) in &self.transfer {
                if let (Some(&i), Some(&j)) = (pos.get(&c), pos.get(&dch)) {
                    h[(i, j)] += ph * m;
                    h[(j, i)] += (ph * m).conj();
                }
            }
            let eig = SymmetricEigen::new(h);
            let mut u = vec![Complex64::ZERO; n * n];
            for r in 0..n {
                for c in 0..n {
                    let mut acc = Complex64::ZERO;
                    for k in 0..n {
                        let lam = eig.eigenvalues[k];
                        acc += eig.eigenvectors[(r, k)]
                            * Complex64::from_polar(1.0, -0.5 * area * lam)
                            * eig.eigenvectors[(c, k)].conj();
                    }
                    u[r * n + c] = acc;
                }
            }
            blocks.push(Block { idx, u });
        }
        let blocks = Arc::new(blocks);
        cache.push((key, blocks.clone()));
        blocks
    }
}

impl Medium for Hyperfine {
    fn nq(&self) -> usize {
        3
    }

    fn nz(&self) -> usize {
        self.nz
    }

    fn n_classes(&self) -> usize {
        self.sqrt_dw.len()
    }

    fn channels(&self) -> usize {
        self.n_s + self.n_d
    }

    fn self_coupling(&self) -> Vec<Complex64> {
        let mut k = vec![Complex64::ZERO; 9];
        if !self.populated {
            return k;
        }
        for v in 0..self.n_classes() {
            let dw = self.sqrt_dw[v] * self.sqrt_dw[v];
            for &(g, eps, a) in &self.self_terms {
                let f = dw * self.sqrt_rho[g] * self.sqrt_rho[g] * self.inv_a[v][a];
                for q in 0..3 {
                    for p in 0..3 {
                        k[q * 3 + p] += f * eps[q] * eps[p];
                    }
                }
            }
        }
        k
    }

    fn max_rate(&self) -> f64 {
        Hyperfine::max_rate(self)
    }

    fn source(&self, v: usize, d: &Drive, y: &[Complex64], src: &mut [Complex64]) {
        src.iter_mut().for_each(|x| *x = Complex64::ZERO);
        if d.control == Complex64::ZERO {
            return;
        }
        let ch = self.channels();
        let inv_a = &self.inv_a[v];
        for gr in &self.groups {
            let f = I * self.sqrt_dw[v] * self.sqrt_rho[gr.g] * d.control * inv_a[gr.a_idx];
            for z in 0..self.nz {
                let yz = &y[z * ch..(z + 1) * ch];
                let coh: Complex64 = gr.members.iter().map(|&(c, m)| m * yz[c]).sum();
                let t = f * coh;
                for q in 0..3 {
                    if gr.eps[q] != 0.0 {
                        src[z * 3 + q] += gr.eps[q] * t;
                    }
                }
            }
        }
    }

    fn derivative(&self, v: usize, d: &Drive, y: &[Complex64], e: &[Complex64], dy: &mut [Complex64]) {
        let ch = self.channels();
        let dec = &self.dec[v];
        for z in 0..self.nz {
            for c in 0..ch {
                dy[z * ch + c] = -dec[c] * y[z * ch + c];
            }
        }
        let ctl = d.control;
        if ctl != Complex64::ZERO {
            let inv_a = &self.inv_a[v];
            for gr in &self.groups {
                let sq = self.sqrt_dw[v] * self.sqrt_rho[gr.g];
                let ia = inv_a[gr.a_idx];
                for z in 0..self.nz {
                    let yz = &y[z * ch..(z + 1) * ch];
                    let ez = &e[z * 3..z * 3 + 3];
                    let drive: Complex64 = (0..3).filter(|&q| gr.eps[q] != 0.0).map(|q| gr.eps[q] * ez[q]).sum();
                    let coh: Complex64 = gr.members.iter().map(|&(c, m)| m * yz[c]).sum();
                    let t = (sq * drive - I * ctl * coh) * ia;
                    for &(c, m) in &gr.members {
                        dy[z * ch + c] -= I * (ctl * m).conj() * t;
                    }
                }
            }
        }
        let tr = d.transfer;
        if tr != Complex64::ZERO {
            for &(c, dc, m) in &self.transfer {
                let k = tr * m;
                let kc = k.conj();
                for z in 0..self.nz {
                    let base = z * ch;
                    dy[base + c] -= I * k * y[base + dc];
                    dy[base + dc] -= I * kc * y[base + c];
                }
            }
        }
    }

    fn free_evolve(&self, v: usize, dt: f64, y: &mut [Complex64]) {
        let ch = self.channels();
        let f: Vec<Complex64> = self.dec[v].iter().map(|d| (-d * dt).exp()).collect();
        for z in 0..self.nz {
            for c in 0..ch {
                y[z * ch + c] *= f[c];
            }
        }
    }

    fn ideal_transfer(&self, _v: usize, area: f64, phase: f64, y: &mut [Complex64]) {
        let blocks = self.blocks(area, phase);
        let ch = self.channels();
        let mut buf = Vec::new();
        for z in 0..self.nz {
            let yz = &mut y[z * ch..(z + 1) * ch];
            for b in blocks.iter() {
                let n = b.idx.len();
                buf.clear();
                buf.extend(b.idx.iter().map(|&c| yz[c]));
                for r in 0..n {
                    yz[b.idx[r]] = (0..n).map(|k| b.u[r * n + k] * buf[k]).sum();
                }
            }
        }
    }

    fn class_amplitude(&self, v: usize) -> f64 {
        self.amp[v]
    }
}
