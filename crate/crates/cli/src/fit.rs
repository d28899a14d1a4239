//! `rephase fit`: cos² Rabi fits, lifetime fits and the hyperfine-constant
//! grid search.

use std::path::{Path, PathBuf};

use clap::Subcommand;
use rephase_core::analysis::{
    fit::DEFAULT_BOOTSTRAP, fit_lifetime, fit_rabi, hyperfine_grid_search, BootstrapOptions, EfficiencyTrace,
    GridOptions, LifetimeModel,
};
use rephase_core::solver;
use rephase_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{self, LoadedConfig};
use crate::output;
use crate::simulate::summarize;

#[derive(Debug, Subcommand)]
pub enum FitCommand {
    /// η(E) = η₀·[1 − V·cos²(a·√E + φ)] to a CSV with columns
    /// energy_nj,efficiency,sigma.
    Rabi {
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Gaussian or exponential decay to a CSV with columns
    /// t_storage_ns,efficiency,sigma.
    Lifetime {
        data: PathBuf,
        #[arg(long, default_value = "gaussian")]
        model: LifetimeModel,
        #[command(flatten)]
        common: Common,
    },
    /// Residual grid over the d-manifold constants (A, B), simulating the
    /// config's rephased protocol at every storage time of the data.
    HfsGrid {
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// A axis in MHz, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        a: Vec<f64>,
        /// B axis in MHz, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        b: Vec<f64>,
        /// Divide data and simulations by their first point before comparing.
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, clap::Args)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bootstrap replicas (resampled data sets for hfs-grid).
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
    boot: usize,
    /// Manifest path; defaults to `<data>.fit.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    data: String,
    data_sha256: String,
    seed: u64,
    result: T,
}

/// Reads a three-column numeric CSV with the given header.
fn read_columns(path: &Path, header: [&str; 3]) -> Result<(Vec<[f64; 3]>, String)> {
    let bytes = std::fs::read(path).map_err(output::io_err(path))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let bad = |msg: String| Error::Config(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
    let found: Vec<String> = reader.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    if found != header {
        return Err(bad(format!("expected columns {}, found {}", header.join(","), found.join(","))));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let mut row = [0.0; 3];
        for (k, cell) in row.iter_mut().enumerate() {
            let text = record.get(k).unwrap_or("");
            *cell = text.parse().map_err(|_| bad(format!("row {}: '{text}' is not a number", line + 2)))?;
        }
        rows.push(row);
    }
    Ok((rows, digest))
}

fn column(rows: &[[f64; 3]], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

fn trace(rows: &[[f64; 3]]) -> Result<EfficiencyTrace> {
    // Malformed content is an input error, not a validation failure.
    EfficiencyTrace::from_columns(&column(rows, 0), &column(rows, 1), &column(rows, 2)).map_err(|e| match e {
        Error::Validation(m) => Error::Config(m),
        other => other,
    })
}

fn finish<T: Serialize>(kind: &str, data: &Path, digest: String, c: &Common, result: T) -> Result<()> {
    let out = c.out.clone().unwrap_or_else(|| data.with_extension("fit.json"));
    let manifest = Manifest {
        schema_version: config::SCHEMA_VERSION,
        kind,
        data: data.display().to_string(),
        data_sha256: digest,
        seed: c.seed,
        result,
    };
    output::write_json(&out, &manifest)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn print_estimates(fit: &rephase_core::analysis::FitResult) {
    println!("{:<16} {:>14} {:>14} {:>14} {:>14}", "parameter", "value", "sigma", "2.5%", "97.5%");
    for e in fit.parameters.iter().chain(&fit.derived) {
        println!(
            "{:<16} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
            e.name, e.value, e.uncertainty, e.interval95.0, e.interval95.1
        );
    }
}

pub fn run(cmd: FitCommand) -> Result<()> {
    match cmd {
        FitCommand::Rabi { data, common } => {
            let (rows, digest) = read_columns(&data, ["energy_nj", "efficiency", "sigma"])?;
            let opts = BootstrapOptions::new(common.boot, common.seed);
            let fit = fit_rabi(&column(&rows, 0), &column(&rows, 1), &column(&rows, 2), opts)?;
            print_estimates(&fit);
            finish("rabi", &data, digest, &common, fit)
        }
        FitCommand::Lifetime { data, model, common } => {
            let (rows, digest) = read_columns(&data, ["t_storage_ns", "efficiency", "sigma"])?;
            let fit = fit_lifetime(&trace(&rows)?, model, BootstrapOptions::new(common.boot, common.seed))?;
            print_estimates(&fit);
            finish("lifetime", &data, digest, &common, fit)
        }
        FitCommand::HfsGrid { data, config: cfg_path, a, b, normalize, workers, common } => {
            let (rows, digest) = read_columns(&data, ["t_storage_ns", "efficiency", "sigma"])?;
            let mut measured = trace(&rows)?;
            if normalize {
                measured = measured.normalized_to_first()?;
            }
            let loaded = LoadedConfig::load(&cfg_path)?;
            let cfg = &loaded.config;
            if cfg.protocol.name.as_deref() != Some("rephased") {
                return Err(Error::Config("hfs-grid needs a config with protocol.name = \"rephased\"".into()));
            }
            let base = config::resolve(cfg, &loaded)?;
            let simulate = |node: &solver::SolverConfig, times: &[f64]| -> Result<Vec<f64>> {
                let mut eta = Vec::with_capacity(times.len());
                for &t in times {
                    let mut spec = cfg.protocol.clone();
                    spec.storage_ns = Some(t);
                    spec.t_ns = None;
                    let seq = config::compile(&spec, node, &base.pulses, &loaded)?;
                    let rec = solver::run(node, &seq)?;
                    eta.push(summarize(&rec, &seq).windows.first().map_or(0.0, |w| w.efficiency));
                }
                if normalize {
                    let first = eta[0];
                    if first <= 0.0 || first.is_nan() {
                        return Err(Error::Validation("simulated efficiency at the first time is zero".into()));
                    }
                    eta.iter_mut().for_each(|x| *x /= first);
                }
                Ok(eta)
            };
            let opts = GridOptions { n_resample: common.boot, seed: common.seed };
            let n = config::workers(workers.or(cfg.workers))?;
            let grid =
                output::pool(n)?.install(|| hyperfine_grid_search(&measured, &a, &b, &base.solver, simulate, opts))?;
            println!(
                "minimum A = {:.4} ± {:.4} MHz, B = {:.4} ± {:.4} MHz{}",
                grid.minimum.0,
                grid.uncertainty.0,
                grid.minimum.1,
                grid.uncertainty.1,
                if grid.flat { " (flat surface)" } else { "" }
            );
            finish("hfs-grid", &data, digest, &common, grid)
        }
    }
}
