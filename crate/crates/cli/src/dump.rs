//! Binary path dump.
//!
//! Layout, all little-endian: magic `NLKW`, `u32` version, `u64` path
//! count, `u64` step count, `f64` horizon, `f64` rho, `u64` master seed,
//! then every `w1` row followed by every `w2` row as `f64`. Only uniform
//! grids are stored; `w` is rebuilt on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use nlkw_core::{PathBatch, PathBundle, PathGenerator, PathSource, TimeGrid};

use crate::error::RunError;

pub const MAGIC: &[u8; 4] = b"NLKW";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 48;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpHeader {
    pub n_paths: u64,
    pub n_steps: u64,
    pub horizon: f64,
    pub rho: f64,
    pub master_seed: u64,
}

impl DumpHeader {
    fn payload_len(&self) -> Option<u64> {
        self.n_paths
            .checked_mul(self.n_steps.checked_add(1)?)?
            .checked_mul(16)
    }
}

fn format_error(path: &Path, message: impl Into<String>) -> RunError {
    RunError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Streams the generator to disk, regenerating each path once per component.
pub fn write_dump(paths: &PathGenerator, file: &Path) -> Result<DumpHeader, RunError> {
    let grid = paths.grid();
    let header = DumpHeader {
        n_paths: paths.n_paths() as u64,
        n_steps: grid.n_steps() as u64,
        horizon: grid.horizon(),
        rho: paths.rho(),
        master_seed: paths.master_seed(),
    };
    let io = |e| RunError::io(file, e);
    let mut out = BufWriter::new(File::create(file).map_err(io)?);
    out.write_all(MAGIC).map_err(io)?;
    out.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&header.n_paths.to_le_bytes()).map_err(io)?;
    out.write_all(&header.n_steps.to_le_bytes()).map_err(io)?;
    out.write_all(&header.horizon.to_le_bytes()).map_err(io)?;
    out.write_all(&header.rho.to_le_bytes()).map_err(io)?;
    out.write_all(&header.master_seed.to_le_bytes())
        .map_err(io)?;
    for component in [PathBundle::w1 as fn(&PathBundle) -> &[f64], PathBundle::w2] {
        for id in 0..paths.n_paths() {
            for v in component(&paths.generate(id)) {
                out.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)?;
    Ok(header)
}

fn take<const N: usize>(input: &mut impl Read, file: &Path) -> Result<[u8; N], RunError> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|e| RunError::io(file, e))?;
    Ok(buf)
}

pub fn read_dump(file: &Path) -> Result<PathBatch, RunError> {
    let io = |e| RunError::io(file, e);
    let handle = File::open(file).map_err(io)?;
    let len = handle.metadata().map_err(io)?.len();
    let mut input = BufReader::new(handle);
    if len < HEADER_LEN {
        return Err(format_error(file, "truncated header"));
    }
    if &take::<4>(&mut input, file)? != MAGIC {
        return Err(format_error(file, "not an NLKW path dump"));
    }
    let version = u32::from_le_bytes(take(&mut input, file)?);
    if version != VERSION {
        return Err(format_error(
            file,
            format!("unsupported dump version {version}"),
        ));
    }
    let header = DumpHeader {
        n_paths: u64::from_le_bytes(take(&mut input, file)?),
        n_steps: u64::from_le_bytes(take(&mut input, file)?),
        horizon: f64::from_le_bytes(take(&mut input, file)?),
        rho: f64::from_le_bytes(take(&mut input, file)?),
        master_seed: u64::from_le_bytes(take(&mut input, file)?),
    };
    match header.payload_len() {
        Some(payload) if payload == len - HEADER_LEN => {}
        _ => return Err(format_error(file, "payload size does not match header")),
    }
    let grid = TimeGrid::uniform(header.horizon, header.n_steps as usize)
        .map_err(|e| format_error(file, e.to_string()))?;
    let grid = Arc::new(grid);
    let n = header.n_paths as usize;
    let width = header.n_steps as usize + 1;
    let mut read_rows = || -> Result<Vec<Vec<f64>>, RunError> {
        (0..n)
            .map(|_| {
                (0..width)
                    .map(|_| Ok(f64::from_le_bytes(take(&mut input, file)?)))
                    .collect()
            })
            .collect()
    };
    let w1 = read_rows()?;
    let w2 = read_rows()?;
    let paths = w1
        .into_iter()
        .zip(w2)
        .enumerate()
        .map(|(id, (a, b))| PathBundle::from_components(grid.clone(), header.rho, id as u64, a, b))
        .collect::<nlkw_core::Result<Vec<_>>>()
        .map_err(|e| format_error(file, e.to_string()))?;
    PathBatch::from_paths(grid, header.rho, header.master_seed, paths)
        .map_err(|e| format_error(file, e.to_string()))
}
