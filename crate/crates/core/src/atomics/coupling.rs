//! Relative dipole coupling strengths between hyperfine/Zeeman sublevels.
//!
//! The angular factor for absorption of a photon with spherical component `q`
//! taking `|J I F m⟩` to `|J' I F' m'⟩` is
//!
//! ```text
//! (-1)^(J' + I + F + 1) · sqrt(2F + 1) · {J' J 1; F F' I} · ⟨F m; 1 q | F' m'⟩
//! ```
//!
//! Each table is rescaled so that the stretched σ+ transition
//! `(F_max, +F_max) → (F'_max, +F'_max)` has coefficient exactly 1. With that
//! choice the sum of squared coefficients out of any lower sublevel is the
//! same constant, `1 / ((2J + 1) · c_stretched²)`, which
//! [`CouplingTable::manifold_constant`] reports.

use serde::Serialize;

use super::angular::{clebsch_gordan, wigner_6j, HalfInt};
use super::scheme::Sublevel;

const ONE: HalfInt = HalfInt::from_int(1);

/// Unnormalized angular factor for `(j_lo, f_lo, m_lo) → (j_up, f_up, m_up)`
/// driven by spherical component `q`.
pub fn dipole_factor(
    nuclear_spin: HalfInt,
    j_lo: HalfInt,
    f_lo: HalfInt,
    m_lo: HalfInt,
    j_up: HalfInt,
    f_up: HalfInt,
    m_up: HalfInt,
    q: i32,
) -> f64 {
    let q = HalfInt::from_int(q);
    if m_up != m_lo + q {
        return 0.0;
    }
    let cg = clebsch_gordan(f_lo, m_lo, ONE, q, f_up, m_up);
    if cg == 0.0 {
        return 0.0;
    }
    let six_j = wigner_6j(j_up, j_lo, ONE, f_lo, f_up, nuclear_spin);
    let phase = (j_up + nuclear_spin + f_lo + ONE).doubled() / 2;
    let sign = if phase.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    sign * ((f_lo.doubled() + 1) as f64).sqrt() * six_j * cg
}

/// One nonzero entry: lower sublevel index, upper sublevel index, spherical
/// component and normalized coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingEntry {
    pub lower: usize,
    pub upper: usize,
    pub q: i32,
    pub coef: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingTable {
    entries: Vec<CouplingEntry>,
    n_lower: usize,
    n_upper: usize,
    stretched: f64,
    lower_j: HalfInt,
}

impl CouplingTable {
    pub(crate) fn build(
        nuclear_spin: HalfInt,
        j_lo: HalfInt,
        lower: &[Sublevel],
        j_up: HalfInt,
        upper: &[Sublevel],
    ) -> Option<Self> {
        let f_lo_max = lower.iter().map(|s| s.f).max()?;
        let f_up_max = upper.iter().map(|s| s.f).max()?;
        let stretched = dipole_factor(nuclear_spin, j_lo, f_lo_max, f_lo_max, j_up, f_up_max, f_up_max, 1);
        if stretched == 0.0 {
            return None;
        }
        let mut entries = Vec::new();
        for (li, lo) in lower.iter().enumerate() {
            for (ui, up) in upper.iter().enumerate() {
                for q in -1..=1 {
                    let c = dipole_factor(nuclear_spin, j_lo, lo.f, lo.m, j_up, up.f, up.m, q);
                    if c.abs() > 1e-15 {
                        entries.push(CouplingEntry { lower: li, upper: ui, q, coef: c / stretched });
                    }
                }
            }
        }
        Some(CouplingTable {
            entries,
            n_lower: lower.len(),
            n_upper: upper.len(),
            stretched: stretched.abs(),
            lower_j: j_lo,
        })
    }

    /// Table with a single unit-strength σ+ entry, used by the
    /// single-pathway reduced model.
    pub(crate) fn unit() -> Self {
        let entries = vec![CouplingEntry { lower: 0, upper: 0, q: 1, coef: 1.0 }];
        CouplingTable { entries, n_lower: 1, n_upper: 1, stretched: 1.0, lower_j: HalfInt::ZERO }
    }

    pub fn entries(&self) -> &[CouplingEntry] {
        &self.entries
    }

    pub fn n_lower(&self) -> usize {
        self.n_lower
    }

    pub fn n_upper(&self) -> usize {
        self.n_upper
    }

    pub fn get(&self, lower: usize, q: i32, upper: usize) -> f64 {
        self.entries.iter().find(|e| e.lower == lower && e.upper == upper && e.q == q).map_or(0.0, |e| e.coef)
    }

    /// Σ over (q, upper) of coef² for any fixed lower sublevel.
    pub fn manifold_constant(&self) -> f64 {
        1.0 / ((self.lower_j.doubled() + 1) as f64 * self.stretched * self.stretched)
    }

    /// Polarization-contracted coupling matrix, `M[lower][upper] = Σ_q ε_q c_q`,
    /// stored sparsely as (lower, upper, value).
    pub fn contract(&self, pol: &[num_complex::Complex64; 3]) -> Vec<(usize, usize, num_complex::Complex64)> {
        let mut out: Vec<(usize, usize, num_complex::Complex64)> = Vec::new();
        for e in &self.entries {
            let amp = pol[(e.q + 1) as usize];
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let v = amp * e.coef;
            match out.iter_mut().find(|(l, u, _)| *l == e.lower && *u == e.upper) {
                Some(slot) => slot.2 += v,
                None => out.push((e.lower, e.upper, v)),
            }
        }
        out.retain(|(_, _, v)| v.norm() > 1e-15);
        out
    }
}
