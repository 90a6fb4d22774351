//! File formats: CSV tables, raw snapshots and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::DiagnosticsRow;
use crate::error::{Error, Result};
use crate::fixed_point::IterationTrace;
use crate::phase_space::DistSlice;

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const TRACE_FILE: &str = "iteration_trace.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const TRACE_HEADER: &str = "window,k,dE,dA,dxA_delta,dF,sup_dxxA,sup_dxF";

pub(crate) fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn diagnostics_csv(rows: &[DiagnosticsRow<f64>]) -> String {
    let mut s = String::from(DiagnosticsRow::<f64>::HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

/// One trace per window, in order; `window` is the 0-based window index.
pub fn trace_csv<'a>(traces: impl IntoIterator<Item = (usize, &'a IterationTrace<f64>)>) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for (w, trace) in traces {
        for e in &trace.entries {
            let _ = writeln!(
                s,
                "{w},{},{:e},{:e},{:e},{:e},{:e},{:e}",
                e.k, e.de, e.da, e.dxa_delta, e.df, e.sup_dxxa, e.sup_dxf
            );
        }
    }
    s
}

pub fn snapshot_name(index: usize) -> String {
    format!("f_t{index:06}.bin")
}

/// Raw little-endian `f64`, x outermost then p.
pub fn snapshot_bytes(f: &DistSlice<f64>) -> Vec<u8> {
    f.values().iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn write_snapshot(dir: &Path, index: usize, f: &DistSlice<f64>) -> Result<PathBuf> {
    let path = dir.join(snapshot_name(index));
    write_file(&path, &snapshot_bytes(f))?;
    Ok(path)
}

/// Reads a snapshot back as a flat `nx * np` array.
pub fn read_snapshot(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Io {
            path: path.display().to_string(),
            message: format!("length {} is not a multiple of 8", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Contents of `manifest.txt`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub status: String,
    pub model: String,
    pub nx: usize,
    pub np: usize,
    pub length: f64,
    pub p_max: f64,
    pub dt: f64,
    pub config_hash: String,
    /// `(slice index, time, file name)` of each saved snapshot.
    pub snapshots: Vec<(usize, f64, String)>,
    /// Extra `key = value` lines (window counts, sentinel notes, ...).
    pub extra: Vec<(String, String)>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "status = {}", self.status);
        let _ = writeln!(s, "model = {}", self.model);
        let _ = writeln!(s, "nx = {}", self.nx);
        let _ = writeln!(s, "np = {}", self.np);
        let _ = writeln!(s, "L = {}", self.length);
        let _ = writeln!(s, "p_max = {}", self.p_max);
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "config_hash = {}", self.config_hash);
        for (k, v) in &self.extra {
            let _ = writeln!(s, "{k} = {v}");
        }
        let times: Vec<String> = self.snapshots.iter().map(|(_, t, _)| t.to_string()).collect();
        let _ = writeln!(s, "slice_times = {}", times.join(","));
        for (i, t, name) in &self.snapshots {
            let _ = writeln!(s, "snapshot = {i} {t} {name}");
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join(MANIFEST_FILE), self.render().as_bytes())
    }
}
