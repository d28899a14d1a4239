//! `rephase sweep`: Cartesian parameter scans with per-point result files.
//!
//! Every point is stored as `points/<fingerprint>.json`; a point whose file
//! already exists is read back instead of simulated, so interrupted or
//! repeated sweeps only run what is missing.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rephase_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{self, LoadedConfig};
use crate::output;
use crate::simulate::{execute, Summary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PointResult {
    fingerprint: String,
    values: Vec<(String, f64)>,
    t_storage_ns: f64,
    summary: Summary,
}

impl PointResult {
    fn efficiency(&self) -> f64 {
        self.summary.windows.first().map_or(0.0, |w| w.efficiency)
    }
}

enum Outcome {
    Simulated(PointResult),
    Reused(PointResult),
    Failed(Vec<(String, f64)>, Error),
}

#[derive(Serialize)]
struct Failure<'a> {
    values: &'a [(String, f64)],
    exit_code: u8,
    error: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    seed: u64,
    axes: Vec<(&'a str, Vec<f64>)>,
    points: Vec<&'a PointResult>,
    failed: usize,
}

fn cartesian(axes: &[(String, Vec<f64>)]) -> Vec<Vec<(String, f64)>> {
    let mut out: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for (path, values) in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push((path.clone(), v));
                    p
                })
            })
            .collect();
    }
    out
}

fn point(loaded: &LoadedConfig, dir: &Path, values: Vec<(String, f64)>) -> Outcome {
    let attempt = || -> Result<Outcome> {
        let cfg = loaded.with_values(&values)?;
        let resolved = config::resolve(&cfg, loaded)?;
        let fingerprint = resolved.solver.fingerprint(&resolved.sequence);
        let file = dir.join(format!("{fingerprint}.json"));
        if let Ok(text) = std::fs::read_to_string(&file) {
            match serde_json::from_str::<PointResult>(&text) {
                Ok(done) => return Ok(Outcome::Reused(PointResult { values: values.clone(), ..done })),
                Err(e) => log::warn!("ignoring unreadable point file {}: {e}", file.display()),
            }
        }
        let (_, summary) = execute(&resolved)?;
        let seq = &resolved.sequence;
        let t_storage_ns = match (seq.windows.first(), seq.inputs.first()) {
            (Some(w), Some(b)) => w.center() - b.center_ns,
            _ => f64::NAN,
        };
        let result = PointResult { fingerprint, values: values.clone(), t_storage_ns, summary };
        output::write_json(&file, &result)?;
        Ok(Outcome::Simulated(result))
    };
    attempt().unwrap_or_else(|e| Outcome::Failed(values.clone(), e))
}

fn write_tables(dir: &Path, axes: &[(String, Vec<f64>)], done: &[&PointResult]) -> Result<()> {
    let csv_err = |path: &PathBuf, e: csv::Error| Error::Io { path: path.display().to_string(), source: e.into() };

    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let mut header: Vec<String> = axes.iter().map(|(p, _)| p.clone()).collect();
    header.extend(["t_storage_ns", "efficiency", "storage_efficiency", "fingerprint"].map(String::from));
    w.write_record(&header).map_err(|e| csv_err(&path, e))?;
    for p in done {
        let mut row: Vec<String> = p.values.iter().map(|(_, v)| v.to_string()).collect();
        row.push(p.t_storage_ns.to_string());
        row.push(p.efficiency().to_string());
        row.push(p.summary.storage_efficiency.to_string());
        row.push(p.fingerprint.clone());
        w.write_record(&row).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(output::io_err(&path))?;

    let mut by_time: Vec<&PointResult> = done.to_vec();
    by_time.sort_by(|a, b| a.t_storage_ns.total_cmp(&b.t_storage_ns));
    let path = dir.join("trace.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["t_storage_ns", "efficiency", "sigma"]).map_err(|e| csv_err(&path, e))?;
    let mut dat = String::from("# t_storage_ns efficiency\n");
    for p in &by_time {
        w.write_record([p.t_storage_ns.to_string(), p.efficiency().to_string(), "0".into()])
            .map_err(|e| csv_err(&path, e))?;
        dat.push_str(&format!("{} {}\n", p.t_storage_ns, p.efficiency()));
    }
    w.flush().map_err(output::io_err(&path))?;
    output::write(&dir.join("trace.dat"), dat)
}

pub fn run(path: &Path, workers: Option<usize>) -> Result<()> {
    let clock = Instant::now();
    let loaded = LoadedConfig::load(path)?;
    let cfg = &loaded.config;
    if cfg.sweep.is_empty() {
        return Err(Error::Config(format!("{}: no [[sweep]] axis given", path.display())));
    }
    let axes: Vec<(String, Vec<f64>)> =
        cfg.sweep.iter().map(|a| Ok((a.path.clone(), a.points()?))).collect::<Result<_>>()?;
    // Catch misspelled paths before any work is done.
    let first: Vec<(String, f64)> = axes.iter().map(|(p, v)| (p.clone(), v[0])).collect();
    loaded.with_values(&first)?;

    let dir = loaded.output_dir();
    let points_dir = dir.join("points");
    output::create_dir(&points_dir)?;
    let n = config::workers(workers.or(cfg.workers))?;
    let outcomes: Vec<Outcome> =
        output::pool(n)?.install(|| cartesian(&axes).into_par_iter().map(|v| point(&loaded, &points_dir, v)).collect());

    let (mut simulated, mut reused) = (0, 0);
    let mut done = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Simulated(p) => {
                simulated += 1;
                done.push(p);
            }
            Outcome::Reused(p) => {
                reused += 1;
                done.push(p);
            }
            Outcome::Failed(values, e) => failures.push((values, e)),
        }
    }
    let total = done.len() + failures.len();
    println!("{total} points: {simulated} simulated, {reused} reused, {} failed", failures.len());
    if !failures.is_empty() {
        let report: Vec<Failure> = failures
            .iter()
            .map(|(values, e)| Failure { values, exit_code: crate::exit_code(e), error: e.to_string() })
            .collect();
        for f in &report {
            eprintln!("point {:?} failed: {}", f.values, f.error);
        }
        output::write_json(&dir.join("failures.json"), &report)?;
    }
    let failed = failures.len();
    if done.is_empty() {
        let (_, first) = failures.into_iter().next().expect("a sweep has at least one point");
        return Err(first);
    }
    let done: Vec<&PointResult> = done.iter().collect();

    write_tables(&dir, &axes, &done)?;
    let manifest = Manifest {
        schema_version: config::SCHEMA_VERSION,
        seed: cfg.seed,
        axes: axes.iter().map(|(p, v)| (p.as_str(), v.clone())).collect(),
        points: done,
        failed,
    };
    output::write_json(&dir.join("sweep.json"), &manifest)?;
    output::write_sidecar(&dir.join("sweep.meta.json"), clock.elapsed(), n)?;
    println!("wrote {}", dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_product_order() {
        let axes = vec![("a".to_string(), vec![1.0, 2.0]), ("b".to_string(), vec![5.0, 6.0, 7.0])];
        let pts = cartesian(&axes);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![("a".to_string(), 1.0), ("b".to_string(), 5.0)]);
        assert_eq!(pts[5], vec![("a".to_string(), 2.0), ("b".to_string(), 7.0)]);
    }
}
