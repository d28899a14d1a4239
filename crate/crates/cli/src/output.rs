//! File output helpers shared by the subcommands.

use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rephase_core::{Error, Result};
use serde::Serialize;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("manifest serializes");
    write(path, text + "\n")
}

#[derive(Serialize)]
struct Sidecar<'a> {
    tool: &'a str,
    version: &'a str,
    finished_unix_s: u64,
    elapsed_s: f64,
    workers: usize,
}

/// Wall-clock facts kept out of the deterministic manifest.
pub fn write_sidecar(path: &Path, elapsed: Duration, workers: usize) -> Result<()> {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    write_json(
        path,
        &Sidecar {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            finished_unix_s: now,
            elapsed_s: elapsed.as_secs_f64(),
            workers,
        },
    )
}

pub fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} worker threads: {e}")))
}
