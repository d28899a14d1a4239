//! Run configuration files.
//!
//! ```toml
//! schema_version = 1
//! preset = "paper-main"            # or "paper-appB"
//! species = "rb87.toml"            # optional, relative to this file
//! output_dir = "out"               # relative to this file
//! seed = 0
//! workers = 4                      # optional; else REPHASE_WORKERS, else all cores
//!
//! [solver]                         # every key optional
//! tier = "hyperfine"               # or "four-level"
//! velocity_classes = 65
//! velocity_span = 4.0              # in units of σ_v
//! nz = 16
//! dtau_ps = 2.0
//! optical_depth = 6000.0
//! detuning_ghz = 6.0
//! two_photon_detuning_mhz = 0.0
//! transfer_detuning_mhz = 0.0
//! decay = true
//! ground_population = "thermal"    # or "stretched", or explicit entries
//! polarizations = "preset"         # or "sigma-plus"
//! hyperfine = [{ level = "d", A_MHz = 3.4, B_MHz = -4.0 }]
//! snapshot_times_ns = [1.0]
//!
//! [pulses]                         # overrides of the preset pulse settings
//! ideal_transfers = true
//!
//! [protocol]
//! name = "rephased"                # standard | rephased | multimode | reorder | interference
//! storage_ns = 25.0
//!
//! [[sweep]]
//! path = "protocol.storage_ns"
//! values = [5.0, 10.0, 15.0]       # or start / stop / count
//! ```
//!
//! A protocol is either `name` plus its parameters or `events = "seq.json"`,
//! a serialized pulse sequence. Unknown keys are errors.

use std::path::{Path, PathBuf};

use rephase_core::atomics::{build_level_scheme, velocity_grid, GroundPopulationSpec, Label, SpeciesConfig};
use rephase_core::presets::{self, Preset};
use rephase_core::protocol::{
    build_interference_pair, build_multimode, build_reorder_pair, build_rephased, build_standard_orca, PulseSequence,
    PulseSettings, SegmentPlan,
};
use rephase_core::solver::{Polarizations, SolverConfig, Tier, MHZ_TO_RAD_PER_NS};
use rephase_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const WORKERS_ENV: &str = "REPHASE_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_preset")]
    pub preset: String,
    pub species: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub workers: Option<usize>,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default)]
    pub pulses: PulseOverrides,
    pub protocol: ProtocolSpec,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
}

fn default_preset() -> String {
    "paper-main".into()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolarizationChoice {
    Preset,
    SigmaPlus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperfineOverride {
    pub level: String,
    #[serde(rename = "A_MHz")]
    pub a_mhz: f64,
    #[serde(rename = "B_MHz", default)]
    pub b_mhz: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub tier: Option<Tier>,
    pub velocity_classes: Option<usize>,
    pub velocity_span: Option<f64>,
    pub nz: Option<usize>,
    pub dtau_ps: Option<f64>,
    pub optical_depth: Option<f64>,
    pub detuning_ghz: Option<f64>,
    pub two_photon_detuning_mhz: Option<f64>,
    pub transfer_detuning_mhz: Option<f64>,
    pub decay: Option<bool>,
    pub ground_population: Option<GroundPopulationSpec>,
    pub polarizations: Option<PolarizationChoice>,
    #[serde(default)]
    pub hyperfine: Vec<HyperfineOverride>,
    #[serde(default)]
    pub snapshot_times_ns: Vec<f64>,
    pub tau_end_ns: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseOverrides {
    pub signal_fwhm_ps: Option<f64>,
    pub control_fwhm_ps: Option<f64>,
    pub control_area: Option<f64>,
    pub transfer_fwhm_ps: Option<f64>,
    pub transfer_area: Option<f64>,
    /// Transfer area from a pulse energy through the preset calibration.
    pub transfer_energy_nj: Option<f64>,
    pub transfer_chirp_hz_per_ns: Option<f64>,
    pub ideal_transfers: Option<bool>,
    pub window_ns: Option<f64>,
    pub dephasing_time_ns: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub name: Option<String>,
    /// Explicit sequence file (JSON), instead of `name`.
    pub events: Option<PathBuf>,
    /// standard: read time; rephased: total storage (write to read).
    pub storage_ns: Option<f64>,
    /// rephased: first transfer time T, instead of `storage_ns`.
    pub t_ns: Option<f64>,
    /// |k_gd| / |k_gs| used for the timings; defaults to the configured
    /// wavevectors.
    pub ratio: Option<f64>,
    #[serde(default)]
    pub bins_ns: Vec<f64>,
    pub group_size: Option<usize>,
    pub t1_ns: Option<f64>,
    pub t2_ns: Option<f64>,
    pub mix_area: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path of a numeric config key, e.g. `protocol.storage_ns`.
    pub path: String,
    #[serde(default)]
    pub values: Vec<f64>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub count: Option<usize>,
}

impl SweepAxis {
    pub fn points(&self) -> Result<Vec<f64>> {
        let pts = match (self.start, self.stop, self.count) {
            (None, None, None) => self.values.clone(),
            (Some(a), Some(b), Some(n)) if self.values.is_empty() => match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            },
            _ => {
                return Err(Error::Config(format!(
                    "sweep axis '{}': give either `values` or all of `start`, `stop`, `count`",
                    self.path
                )))
            }
        };
        if pts.is_empty() {
            return Err(Error::Config(format!("sweep axis '{}' is empty", self.path)));
        }
        Ok(pts)
    }
}

/// A parsed config together with the raw document (for sweep overrides) and
/// the directory relative paths are resolved against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub document: toml::Table,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        let document: toml::Table =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let config = parse(&document).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Ok(LoadedConfig { config, document, base_dir })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output_dir)
    }

    /// The config with numeric keys replaced, `(dotted path, value)` each.
    pub fn with_values(&self, assignments: &[(String, f64)]) -> Result<RunConfig> {
        let mut doc = self.document.clone();
        for (path, value) in assignments {
            set_path(&mut doc, path, *value)?;
        }
        parse(&doc).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("after setting sweep values: {msg}")),
            other => other,
        })
    }
}

fn parse(doc: &toml::Table) -> Result<RunConfig> {
    let cfg: RunConfig = doc.clone().try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "schema_version {} unsupported (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

fn set_path(doc: &mut toml::Table, path: &str, value: f64) -> Result<()> {
    let bad = || Error::Config(format!("sweep path '{path}' does not name a config key"));
    let mut parts: Vec<&str> = path.split('.').collect();
    let leaf = parts.pop().filter(|s| !s.is_empty()).ok_or_else(bad)?;
    let mut table = doc;
    for part in parts {
        table = table
            .entry(part)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(bad)?;
    }
    // Integer keys stay integers so that e.g. `solver.nz` deserializes.
    let v = match table.get(leaf) {
        Some(toml::Value::Integer(_)) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
        _ if value.fract() == 0.0 && INTEGER_KEYS.contains(&leaf) => toml::Value::Integer(value as i64),
        _ => toml::Value::Float(value),
    };
    table.insert(leaf.to_string(), v);
    Ok(())
}

const INTEGER_KEYS: [&str; 5] = ["velocity_classes", "nz", "group_size", "seed", "workers"];

/// Everything needed to run one simulation.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub solver: SolverConfig,
    pub pulses: PulseSettings,
    pub sequence: PulseSequence,
}

pub fn resolve(cfg: &RunConfig, base: &LoadedConfig) -> Result<Resolved> {
    let preset = presets::by_name(&cfg.preset)?;
    let mut solver = preset.solver.clone();
    let o = &cfg.solver;

    if let Some(path) = &cfg.species {
        let species = SpeciesConfig::load(&base.resolve(path))?;
        solver.scheme = build_level_scheme(&species)?;
    }
    if let Some(od) = o.optical_depth {
        solver.scheme = solver.scheme.with_optical_depth(od);
    }
    if let Some(pop) = &o.ground_population {
        solver.scheme = solver.scheme.with_ground_population(pop)?;
    }
    for h in &o.hyperfine {
        let label = Label::parse(&h.level)
            .ok_or_else(|| Error::Config(format!("unknown level '{}' in solver.hyperfine", h.level)))?;
        solver.scheme = solver.scheme.with_hyperfine_constants(label, h.a_mhz, h.b_mhz)?;
    }
    let classes = o.velocity_classes.unwrap_or(presets::DEFAULT_CLASSES);
    let span = o.velocity_span.unwrap_or(presets::DEFAULT_SPAN);
    solver.velocity = velocity_grid(preset.temperature_k, solver.scheme.mass_kg, classes, span)?;
    if let Some(t) = o.tier {
        solver.tier = t;
    }
    if let Some(n) = o.nz {
        solver.nz = n;
    }
    if let Some(d) = o.dtau_ps {
        solver.dtau_ps = d;
    }
    if let Some(g) = o.detuning_ghz {
        solver.detuning = g * 1e3 * MHZ_TO_RAD_PER_NS;
    }
    if let Some(m) = o.two_photon_detuning_mhz {
        solver.two_photon_detuning = m * MHZ_TO_RAD_PER_NS;
    }
    if let Some(m) = o.transfer_detuning_mhz {
        solver.transfer_detuning = m * MHZ_TO_RAD_PER_NS;
    }
    if o.decay == Some(false) {
        solver = solver.without_decay();
    }
    if o.polarizations == Some(PolarizationChoice::SigmaPlus) {
        solver.polarizations = Polarizations::all_sigma_plus();
    }
    solver.snapshot_times = o.snapshot_times_ns.clone();
    solver.tau_end_ns = o.tau_end_ns;

    let pulses = apply_pulses(&preset, &cfg.pulses)?;
    let sequence = compile(&cfg.protocol, &solver, &pulses, base)?;
    Ok(Resolved { solver, pulses, sequence })
}

fn apply_pulses(preset: &Preset, o: &PulseOverrides) -> Result<PulseSettings> {
    let mut p = preset.pulses;
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut p.signal_fwhm_ps, o.signal_fwhm_ps);
    set(&mut p.control_fwhm_ps, o.control_fwhm_ps);
    set(&mut p.control_area, o.control_area);
    set(&mut p.transfer_fwhm_ps, o.transfer_fwhm_ps);
    set(&mut p.transfer_chirp_hz_per_ns, o.transfer_chirp_hz_per_ns);
    set(&mut p.dephasing_time_ns, o.dephasing_time_ns);
    match (o.transfer_area, o.transfer_energy_nj) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("give pulses.transfer_area or pulses.transfer_energy_nj, not both".into()))
        }
        (Some(a), None) => p.transfer_area = a,
        (None, Some(e)) => p.transfer_area = preset.transfer_calibration.area(e)?,
        (None, None) => {}
    }
    if let Some(b) = o.ideal_transfers {
        p.ideal_transfers = b;
    }
    if o.window_ns.is_some() {
        p.window_ns = o.window_ns;
    }
    Ok(p)
}

fn need(v: Option<f64>, what: &str, name: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("protocol '{name}' needs protocol.{what}")))
}

/// Builds the pulse sequence named in `spec`.
pub fn compile(
    spec: &ProtocolSpec,
    solver: &SolverConfig,
    s: &PulseSettings,
    base: &LoadedConfig,
) -> Result<PulseSequence> {
    let ratio = || -> Result<f64> {
        match spec.ratio {
            Some(r) => Ok(r),
            None => solver.wavevectors.ratio(),
        }
    };
    match (&spec.name, &spec.events) {
        (Some(_), Some(_)) => Err(Error::Config("protocol takes either `name` or `events`, not both".into())),
        (None, None) => Err(Error::Config("protocol needs `name` or `events`".into())),
        (None, Some(path)) => {
            let path = base.resolve(path);
            let text = std::fs::read_to_string(&path)
                .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
            PulseSequence::from_json(&text)
        }
        (Some(name), None) => match name.as_str() {
            "standard" => build_standard_orca(need(spec.storage_ns, "storage_ns", name)?, s),
            "rephased" => {
                let r = ratio()?;
                let t = match (spec.t_ns, spec.storage_ns) {
                    (Some(t), None) => t,
                    (None, Some(total)) => total / (2.0 + 2.0 / r),
                    _ => return Err(Error::Config("protocol 'rephased' needs exactly one of t_ns, storage_ns".into())),
                };
                build_rephased(t, r, s)
            }
            "multimode" => {
                let (default_bins, default_plan) = SegmentPlan::four_bin();
                let bins = if spec.bins_ns.is_empty() { default_bins } else { spec.bins_ns.clone() };
                let plan = SegmentPlan {
                    storage_ns: spec.storage_ns.unwrap_or(default_plan.storage_ns),
                    group_size: spec.group_size.unwrap_or(default_plan.group_size),
                    ratio: spec.ratio.unwrap_or(default_plan.ratio),
                };
                build_multimode(&bins, &plan, s)
            }
            "reorder" => build_reorder_pair(need(spec.t1_ns, "t1_ns", name)?, need(spec.t2_ns, "t2_ns", name)?, s),
            "interference" => build_interference_pair(
                need(spec.t1_ns, "t1_ns", name)?,
                need(spec.t2_ns, "t2_ns", name)?,
                need(spec.mix_area, "mix_area", name)?,
                s,
            ),
            other => Err(Error::Config(format!(
                "unknown protocol '{other}' (known: {})",
                rephase_core::protocol::PROTOCOL_NAMES.join(", ")
            ))),
        },
    }
}

/// Worker count: config, then the environment, then all cores.
pub fn workers(cfg_value: Option<usize>) -> Result<usize> {
    if let Some(n) = cfg_value {
        return if n == 0 { Err(Error::Config("workers must be at least 1".into())) } else { Ok(n) };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loaded(text: &str) -> Result<LoadedConfig> {
        let document: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let config = parse(&document)?;
        Ok(LoadedConfig { config, document, base_dir: PathBuf::new() })
    }

    const MINIMAL: &str = "schema_version = 1\n[protocol]\nname = \"standard\"\nstorage_ns = 1.0\n";

    #[test]
    fn minimal_config_uses_preset_defaults() {
        let l = loaded(MINIMAL).unwrap();
        assert_eq!(l.config.preset, "paper-main");
        let r = resolve(&l.config, &l).unwrap();
        assert_eq!(r.solver.velocity.len(), presets::DEFAULT_CLASSES);
        assert_eq!(r.sequence.retrieval_times(), vec![1.0]);
    }

    #[test]
    fn unknown_keys_and_versions_are_rejected() {
        assert!(matches!(loaded(&format!("{MINIMAL}[solver]\nnz_typo = 3\n")), Err(Error::Config(_))));
        assert!(matches!(loaded(&MINIMAL.replace("= 1\n", "= 2\n")), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_values_are_written_into_the_document() {
        let l = loaded(MINIMAL).unwrap();
        let c = l.with_values(&[("protocol.storage_ns".into(), 2.5), ("solver.nz".into(), 10.0)]).unwrap();
        assert_eq!(c.protocol.storage_ns, Some(2.5));
        assert_eq!(c.solver.nz, Some(10));
        assert!(l.with_values(&[("protocol.nope".into(), 1.0)]).is_err());
        assert!(l.with_values(&[("protocol.storage_ns.x".into(), 1.0)]).is_err());
    }

    #[test]
    fn sweep_axis_forms() {
        let a = SweepAxis { path: "x".into(), values: vec![], start: Some(1.0), stop: Some(3.0), count: Some(3) };
        assert_eq!(a.points().unwrap(), vec![1.0, 2.0, 3.0]);
        let empty = SweepAxis { path: "x".into(), values: vec![], start: None, stop: None, count: None };
        assert!(empty.points().is_err());
    }

    #[test]
    fn rephased_storage_time_sets_t() {
        let l =
            loaded("schema_version = 1\n[protocol]\nname = \"rephased\"\nstorage_ns = 25.0\nratio = 1.0\n").unwrap();
        let r = resolve(&l.config, &l).unwrap();
        let tr = r.sequence.transfer_times();
        assert!((tr[0] - 6.25).abs() < 1e-12 && (tr[1] - 18.75).abs() < 1e-12);
    }
}
