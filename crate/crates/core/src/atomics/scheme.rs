//! The four-manifold ladder g → e → s → d with hyperfine/Zeeman sublevels.

use serde::Serialize;

use super::angular::HalfInt;
use super::coupling::CouplingTable;
use super::hyperfine::{allowed_f, hyperfine_energy};
use super::species::{GroundPopulationSpec, SpeciesConfig};
use crate::error::{Error, Result};

pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const BOLTZMANN: f64 = 1.380_649e-23;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Label {
    G,
    E,
    S,
    D,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::G, Label::E, Label::S, Label::D];

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "g" => Some(Label::G),
            "e" => Some(Label::E),
            "s" => Some(Label::S),
            "d" => Some(Label::D),
            _ => None,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FineLevel {
    pub label: Label,
    pub j: HalfInt,
    /// Radiative lifetime; `None` for the stable ground state.
    pub lifetime_ns: Option<f64>,
    pub a_mhz: f64,
    pub b_mhz: f64,
}

impl FineLevel {
    /// Coherence decay rate γ = Γ/2 = 1/(2·lifetime), in 1/ns.
    pub fn coherence_decay(&self) -> f64 {
        self.lifetime_ns.map_or(0.0, |t| 0.5 / t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sublevel {
    pub f: HalfInt,
    pub m: HalfInt,
    pub offset_mhz: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifold {
    pub level: FineLevel,
    pub sublevels: Vec<Sublevel>,
}

impl Manifold {
    pub fn index_of(&self, f: HalfInt, m: HalfInt) -> Option<usize> {
        self.sublevels.iter().position(|s| s.f == f && s.m == m)
    }

    pub fn hyperfine_levels(&self) -> Vec<HalfInt> {
        let mut fs: Vec<HalfInt> = self.sublevels.iter().map(|s| s.f).collect();
        fs.dedup();
        fs
    }

    /// Energy offset (MHz) of hyperfine level `f`, if present.
    pub fn offset_of(&self, f: HalfInt) -> Option<f64> {
        self.sublevels.iter().find(|s| s.f == f).map(|s| s.offset_mhz)
    }
}

/// Which transition of the ladder a coupling table describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Transition {
    /// g → e, driven by the 780 nm field.
    GroundIntermediate,
    /// e → s, driven by the 1529 nm field.
    IntermediateStorage,
    /// s → d, driven by the transfer field.
    StorageShelving,
}

impl Transition {
    fn manifolds(self) -> (Label, Label) {
        match self {
            Transition::GroundIntermediate => (Label::G, Label::E),
            Transition::IntermediateStorage => (Label::E, Label::S),
            Transition::StorageShelving => (Label::S, Label::D),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Wavelengths {
    pub ge_nm: f64,
    pub es_nm: f64,
    pub sd_nm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelScheme {
    pub name: String,
    pub nuclear_spin: HalfInt,
    pub mass_kg: f64,
    manifolds: [Manifold; 4],
    couplings: [CouplingTable; 3],
    pub wavelengths: Wavelengths,
    /// Population of each (included) ground sublevel; sums to 1.
    ground_population: Vec<f64>,
    /// Dimensionless resonant optical depth (field amplitude attenuation
    /// `exp(-optical_depth)` for atoms at rest on resonance).
    pub optical_depth: f64,
}

impl LevelScheme {
    pub fn manifold(&self, label: Label) -> &Manifold {
        &self.manifolds[label.index()]
    }

    pub fn coupling_table(&self, t: Transition) -> &CouplingTable {
        &self.couplings[t as usize]
    }

    pub fn ground_population(&self) -> &[f64] {
        &self.ground_population
    }

    /// Relative transition amplitude for `(F, m) → (F', m')` driven by
    /// spherical component `q`. Zero when selection rules forbid it.
    pub fn coupling_coefficient(
        &self,
        transition: Transition,
        f: HalfInt,
        m: HalfInt,
        q: i32,
        f_up: HalfInt,
        m_up: HalfInt,
    ) -> Result<f64> {
        let (lo, up) = transition.manifolds();
        let li = self
            .manifold(lo)
            .index_of(f, m)
            .ok_or_else(|| Error::domain(format!("no sublevel F = {f}, m = {m} in manifold {lo:?}")))?;
        let ui = self
            .manifold(up)
            .index_of(f_up, m_up)
            .ok_or_else(|| Error::domain(format!("no sublevel F = {f_up}, m = {m_up} in manifold {up:?}")))?;
        if !(-1..=1).contains(&q) {
            return Err(Error::domain(format!("spherical component q = {q} outside -1..=1")));
        }
        Ok(self.coupling_table(transition).get(li, q, ui))
    }

    /// Offset (MHz) that ground-referenced detunings subtract: the energy of
    /// the highest included ground hyperfine level.
    pub fn ground_reference_mhz(&self) -> f64 {
        let g = self.manifold(Label::G);
        g.sublevels.iter().max_by_key(|s| s.f).map_or(0.0, |s| s.offset_mhz)
    }

    /// A copy with the ground population replaced.
    pub fn with_ground_population(&self, spec: &GroundPopulationSpec) -> Result<Self> {
        let mut out = self.clone();
        out.ground_population = resolve_population(spec, &out.manifolds[0].sublevels)?;
        Ok(out)
    }

    /// A copy with different hyperfine constants on one manifold; offsets are
    /// recomputed, couplings are unchanged (they depend only on quantum numbers).
    pub fn with_hyperfine_constants(&self, label: Label, a_mhz: f64, b_mhz: f64) -> Result<Self> {
        let mut out = self.clone();
        let i = out.nuclear_spin;
        let m = &mut out.manifolds[label.index()];
        m.level.a_mhz = a_mhz;
        m.level.b_mhz = b_mhz;
        let j = m.level.j;
        for s in &mut m.sublevels {
            s.offset_mhz = hyperfine_energy(a_mhz, b_mhz, i, j, s.f)?;
        }
        Ok(out)
    }

    /// A copy with every hyperfine constant set to zero.
    pub fn without_hyperfine_splitting(&self) -> Result<Self> {
        let mut out = self.clone();
        for l in Label::ALL {
            out = out.with_hyperfine_constants(l, 0.0, 0.0)?;
        }
        Ok(out)
    }

    pub fn with_optical_depth(&self, od: f64) -> Self {
        let mut out = self.clone();
        out.optical_depth = od;
        out
    }

    /// A scheme with one sublevel per manifold and unit couplings: the
    /// ideal four-level atom expressed in the hyperfine data model.
    pub fn single_pathway(&self) -> Self {
        let mut out = self.clone();
        for m in &mut out.manifolds {
            m.sublevels = vec![Sublevel { f: HalfInt::ZERO, m: HalfInt::ZERO, offset_mhz: 0.0 }];
        }
        out.couplings = [CouplingTable::unit(), CouplingTable::unit(), CouplingTable::unit()];
        out.ground_population = vec![1.0];
        out
    }
}

fn resolve_population(spec: &GroundPopulationSpec, ground: &[Sublevel]) -> Result<Vec<f64>> {
    let mut pop = vec![0.0; ground.len()];
    match spec {
        GroundPopulationSpec::Preset(name) => match name.as_str() {
            "thermal" => pop.iter_mut().for_each(|p| *p = 1.0 / ground.len() as f64),
            "stretched" => {
                let top = ground
                    .iter()
                    .enumerate()
                    .max_by_key(|(_, s)| (s.f, s.m))
                    .map(|(i, _)| i)
                    .ok_or_else(|| Error::validation("empty ground manifold"))?;
                pop[top] = 1.0;
            }
            other => return Err(Error::config(format!("unknown ground population preset '{other}'"))),
        },
        GroundPopulationSpec::Explicit(entries) => {
            for e in entries {
                let f = HalfInt::try_from(e.f).map_err(Error::config)?;
                let m = HalfInt::try_from(e.m).map_err(Error::config)?;
                let idx = ground
                    .iter()
                    .position(|s| s.f == f && s.m == m)
                    .ok_or_else(|| Error::validation(format!("ground sublevel F = {f}, m = {m} is not included")))?;
                if e.weight < 0.0 {
                    return Err(Error::validation("negative ground population weight"));
                }
                pop[idx] += e.weight;
            }
        }
    }
    let total: f64 = pop.iter().sum();
    if !(total > 0.0) {
        return Err(Error::validation("ground population has zero total weight"));
    }
    pop.iter_mut().for_each(|p| *p /= total);
    Ok(pop)
}

fn sublevels(i: HalfInt, level: &FineLevel, only_f: Option<&[HalfInt]>) -> Result<Vec<Sublevel>> {
    let mut out = Vec::new();
    for f in allowed_f(i, level.j) {
        if let Some(keep) = only_f {
            if !keep.contains(&f) {
                continue;
            }
        }
        let offset = hyperfine_energy(level.a_mhz, level.b_mhz, i, level.j, f)?;
        out.extend(f.projections().map(|m| Sublevel { f, m, offset_mhz: offset }));
    }
    Ok(out)
}

/// Build the full scheme from a species description: hyperfine offsets for
/// every manifold and the three coupling tables.
pub fn build_level_scheme(cfg: &SpeciesConfig) -> Result<LevelScheme> {
    let i = HalfInt::try_from(cfg.nuclear_spin).map_err(Error::config)?;
    if i.doubled() < 0 {
        return Err(Error::validation("negative nuclear spin"));
    }
    if !(cfg.mass_u > 0.0) {
        return Err(Error::validation("atomic mass must be positive"));
    }
    let mut levels: [Option<FineLevel>; 4] = Default::default();
    for spec in &cfg.levels {
        let label = Label::parse(&spec.label)
            .ok_or_else(|| Error::validation(format!("unknown level label '{}'", spec.label)))?;
        let j = HalfInt::try_from(spec.j).map_err(Error::config)?;
        if j.doubled() < 0 {
            return Err(Error::validation(format!("negative J for level {}", spec.label)));
        }
        if label != Label::G {
            match spec.lifetime_ns {
                Some(t) if t > 0.0 => {}
                _ => return Err(Error::validation(format!("level {} needs a positive lifetime", spec.label))),
            }
        }
        if levels[label.index()].is_some() {
            return Err(Error::validation(format!("level {} given twice", spec.label)));
        }
        levels[label.index()] =
            Some(FineLevel { label, j, lifetime_ns: spec.lifetime_ns, a_mhz: spec.a_mhz, b_mhz: spec.b_mhz });
    }
    let levels: Vec<FineLevel> = levels
        .into_iter()
        .zip(Label::ALL)
        .map(|(l, label)| l.ok_or_else(|| Error::validation(format!("missing level {label:?}"))))
        .collect::<Result<_>>()?;

    for pair in levels.windows(2) {
        let (a, b) = (pair[0].j, pair[1].j);
        let dj = (a - b).abs().doubled();
        if dj > 2 || (a.doubled() == 0 && b.doubled() == 0) || !(a - b).is_integer() {
            return Err(Error::validation(format!(
                "no dipole-allowed step {:?} (J = {a}) → {:?} (J = {b})",
                pair[0].label, pair[1].label
            )));
        }
    }

    let ground_f: Option<Vec<HalfInt>> = cfg
        .ground_f
        .as_ref()
        .map(|v| v.iter().map(|&f| HalfInt::try_from(f).map_err(Error::config)).collect::<Result<_>>())
        .transpose()?;
    let mut manifolds = Vec::with_capacity(4);
    for (k, level) in levels.iter().enumerate() {
        let only = if k == 0 { ground_f.as_deref() } else { None };
        let subs = sublevels(i, level, only)?;
        if subs.is_empty() {
            return Err(Error::validation(format!("manifold {:?} has no sublevels", level.label)));
        }
        manifolds.push(Manifold { level: level.clone(), sublevels: subs });
    }
    let manifolds: [Manifold; 4] = manifolds.try_into().expect("four manifolds");

    let table = |lo: usize, up: usize| {
        CouplingTable::build(
            i,
            manifolds[lo].level.j,
            &manifolds[lo].sublevels,
            manifolds[up].level.j,
            &manifolds[up].sublevels,
        )
        .ok_or_else(|| {
            Error::validation(format!(
                "stretched transition {:?} → {:?} has zero strength",
                manifolds[lo].level.label, manifolds[up].level.label
            ))
        })
    };
    let couplings = [table(0, 1)?, table(1, 2)?, table(2, 3)?];

    for (name, wl) in [("ge", cfg.wavelengths_nm.ge), ("es", cfg.wavelengths_nm.es), ("sd", cfg.wavelengths_nm.sd)] {
        if !(wl > 0.0) {
            return Err(Error::validation(format!("wavelength {name} must be positive")));
        }
    }
    if !(cfg.optical_depth >= 0.0) {
        return Err(Error::validation("optical depth must be non-negative"));
    }
    let ground_population = resolve_population(&cfg.ground_population, &manifolds[0].sublevels)?;

    Ok(LevelScheme {
        name: cfg.name.clone(),
        nuclear_spin: i,
        mass_kg: cfg.mass_u * ATOMIC_MASS_UNIT,
        manifolds,
        couplings,
        wavelengths: Wavelengths {
            ge_nm: cfg.wavelengths_nm.ge,
            es_nm: cfg.wavelengths_nm.es,
            sd_nm: cfg.wavelengths_nm.sd,
        },
        ground_population,
        optical_depth: cfg.optical_depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomics::species::SpeciesConfig;

    fn h(twice: i32) -> HalfInt {
        HalfInt::from_doubled(twice)
    }

    fn default_scheme() -> LevelScheme {
        build_level_scheme(&SpeciesConfig::rubidium87()).unwrap()
    }

    #[test]
    fn storage_manifold_has_f_one_highest() {
        let s = default_scheme();
        let m = s.manifold(Label::S);
        assert_eq!(m.hyperfine_levels(), vec![h(2), h(4), h(6), h(8)]);
        let top = m.sublevels.iter().max_by(|a, b| a.offset_mhz.total_cmp(&b.offset_mhz)).unwrap();
        assert_eq!(top.f, h(2));
    }

    #[test]
    fn shelving_manifold_levels() {
        let s = default_scheme();
        assert_eq!(s.manifold(Label::D).hyperfine_levels(), vec![h(4), h(6), h(8), h(10)]);
        assert_eq!(s.manifold(Label::D).sublevels.len(), 5 + 7 + 9 + 11);
    }

    #[test]
    fn default_ground_is_f2_only_and_normalized() {
        let s = default_scheme();
        let g = s.manifold(Label::G);
        assert!(g.sublevels.iter().all(|l| l.f == h(4)));
        assert_eq!(g.sublevels.len(), 5);
        let total: f64 = s.ground_population().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stretched_preset_population() {
        let s = default_scheme().with_ground_population(&GroundPopulationSpec::Preset("stretched".into())).unwrap();
        let g = s.manifold(Label::G);
        for (sub, &p) in g.sublevels.iter().zip(s.ground_population()) {
            if sub.m == h(4) {
                assert_eq!(p, 1.0);
            } else {
                assert_eq!(p, 0.0);
            }
        }
    }

    #[test]
    fn selection_rules_in_tables() {
        let s = default_scheme();
        for t in [Transition::GroundIntermediate, Transition::IntermediateStorage, Transition::StorageShelving] {
            let (lo, up) = t.manifolds();
            let (lo, up) = (s.manifold(lo), s.manifold(up));
            for e in s.coupling_table(t).entries() {
                let (a, b) = (lo.sublevels[e.lower], up.sublevels[e.upper]);
                assert_eq!(b.m, a.m + HalfInt::from_int(e.q));
                assert!((b.f - a.f).abs().doubled() <= 2);
            }
        }
    }

    #[test]
    fn forbidden_m_change_gives_zero() {
        let s = default_scheme();
        let c = s.coupling_coefficient(Transition::StorageShelving, h(4), h(2), 1, h(6), h(6)).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn stretched_pathway_is_unique_and_unit() {
        let s = default_scheme();
        let stretched = [
            (Transition::GroundIntermediate, h(4), h(6)),
            (Transition::IntermediateStorage, h(6), h(8)),
            (Transition::StorageShelving, h(8), h(10)),
        ];
        for (t, f_lo, f_up) in stretched {
            let (lo, up) = t.manifolds();
            let li = s.manifold(lo).index_of(f_lo, f_lo).unwrap();
            let reachable: Vec<_> =
                s.coupling_table(t).entries().iter().filter(|e| e.lower == li && e.q == 1).collect();
            assert_eq!(reachable.len(), 1, "{t:?}");
            let target = s.manifold(up).sublevels[reachable[0].upper];
            assert_eq!((target.f, target.m), (f_up, f_up));
            assert!((reachable[0].coef - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn manifold_sum_rule_by_brute_force() {
        let s = default_scheme();
        for t in [Transition::GroundIntermediate, Transition::IntermediateStorage, Transition::StorageShelving] {
            let table = s.coupling_table(t);
            let mut sums = vec![0.0; table.n_lower()];
            for e in table.entries() {
                sums[e.lower] += e.coef * e.coef;
            }
            for v in sums {
                assert!((v - table.manifold_constant()).abs() < 1e-10, "{t:?}: {v} vs {}", table.manifold_constant());
            }
        }
    }

    #[test]
    fn unknown_sublevel_is_domain_error() {
        let s = default_scheme();
        assert!(s.coupling_coefficient(Transition::GroundIntermediate, h(2), h(0), 0, h(2), h(0)).is_err());
    }

    #[test]
    fn broken_ladder_is_rejected() {
        let mut cfg = SpeciesConfig::rubidium87();
        cfg.levels[3].j = 11.0 / 2.0;
        assert!(matches!(build_level_scheme(&cfg), Err(Error::Validation(_))));
    }

    #[test]
    fn decay_rates_follow_lifetimes() {
        let s = default_scheme();
        assert!((s.manifold(Label::S).level.coherence_decay() - 0.5 / 84.0).abs() < 1e-15);
        assert!((s.manifold(Label::D).level.coherence_decay() - 0.5 / 370.0).abs() < 1e-15);
    }
}
