//! `rephase simulate`.

use std::path::Path;
use std::time::Instant;

use rephase_core::protocol::{validate, PulseSequence};
use rephase_core::solver::{self, SimulationRecord};
use rephase_core::Result;
use serde::{Deserialize, Serialize};

use crate::config::{self, LoadedConfig, Resolved, RunConfig};
use crate::output;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub source_bin: Option<usize>,
    pub start_ns: f64,
    pub end_ns: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// One minus the signal energy leaking through during the input pulses.
    pub storage_efficiency: f64,
    pub input_energy: f64,
    pub windows: Vec<WindowSummary>,
}

pub fn summarize(rec: &SimulationRecord, seq: &PulseSequence) -> Summary {
    let e_in = rec.input_energy();
    let half = 3.5 * seq.signal_fwhm_ps * 1e-3;
    let leak: f64 = seq.inputs.iter().map(|b| rec.window_energy(b.center_ns - half, b.center_ns + half)).sum();
    let ratio = |x: f64| if e_in > 0.0 { x / e_in } else { 0.0 };
    Summary {
        storage_efficiency: 1.0 - ratio(leak),
        input_energy: e_in,
        windows: seq
            .windows
            .iter()
            .map(|w| WindowSummary {
                source_bin: w.source_bin,
                start_ns: w.start_ns,
                end_ns: w.end_ns,
                efficiency: ratio(rec.window_energy(w.start_ns, w.end_ns)),
            })
            .collect(),
    }
}

/// Validates the sequence (warnings are logged) and runs it.
pub fn execute(r: &Resolved) -> Result<(SimulationRecord, Summary)> {
    for w in validate(&r.sequence, None).into_result()? {
        log::warn!("{w}");
    }
    let rec = solver::run(&r.solver, &r.sequence)?;
    let summary = summarize(&rec, &r.sequence);
    Ok((rec, summary))
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    seed: u64,
    preset: &'a str,
    protocol: &'a str,
    fingerprint: &'a str,
    config: &'a RunConfig,
    summary: &'a Summary,
    record: serde_json::Value,
}

pub fn print_summary(s: &Summary) {
    println!("storage efficiency  {:.6}", s.storage_efficiency);
    println!("{:>6} {:>10} {:>10} {:>12}", "window", "start_ns", "end_ns", "efficiency");
    for (i, w) in s.windows.iter().enumerate() {
        println!("{i:>6} {:>10.4} {:>10.4} {:>12.6e}", w.start_ns, w.end_ns, w.efficiency);
    }
}

pub fn run(path: &Path, workers: Option<usize>) -> Result<()> {
    let clock = Instant::now();
    let loaded = LoadedConfig::load(path)?;
    let cfg = &loaded.config;
    let resolved = config::resolve(cfg, &loaded)?;
    let n = config::workers(workers.or(cfg.workers))?;
    let (rec, summary) = output::pool(n)?.install(|| execute(&resolved))?;

    let dir = loaded.output_dir();
    output::create_dir(&dir)?;
    let manifest = Manifest {
        schema_version: config::SCHEMA_VERSION,
        seed: cfg.seed,
        preset: &cfg.preset,
        protocol: &resolved.sequence.name,
        fingerprint: &rec.fingerprint,
        config: cfg,
        summary: &summary,
        record: serde_json::from_str(&rec.manifest_json()).expect("record manifest is JSON"),
    };
    output::write_json(&dir.join("manifest.json"), &manifest)?;
    output::write(&dir.join("sequence.json"), resolved.sequence.to_json() + "\n")?;
    let fields = dir.join("fields.csv");
    let f = std::fs::File::create(&fields).map_err(output::io_err(&fields))?;
    rec.write_trace_csv(std::io::BufWriter::new(f)).map_err(output::io_err(&fields))?;
    output::write_sidecar(&dir.join("run.meta.json"), clock.elapsed(), n)?;

    print_summary(&summary);
    println!("wrote {}", dir.display());
    Ok(())
}
