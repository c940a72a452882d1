//! Run outputs: the per-step time series, stop events, legacy-VTK field
//! snapshots and binary checkpoints.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::waveform::csv_error;
use crate::error::{Error, Result};
use crate::fem::Field;
use crate::geometry::{smeared_delta, LevelSet};
use crate::valve::{Stop, ValveState};

/// Column order of the time-series CSV.
pub const TIMESERIES_COLUMNS: [&str; 12] =
    ["t", "c", "cdot", "OA", "flux", "dp_probe", "F_fluid", "F_elastic", "denom", "rhs", "iters", "res"];

/// One completed step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepRecord {
    /// [s]
    pub t: f64,
    pub c: f64,
    /// [1/s]
    pub cdot: f64,
    /// Orifice area [m^2].
    #[serde(rename = "OA")]
    pub orifice_area: f64,
    /// Volume flux through the probe plane [m^3/s] (per unit depth in 2D).
    pub flux: f64,
    /// Band-averaged pressure jump across the valve [Pa].
    pub dp_probe: f64,
    #[serde(rename = "F_fluid")]
    pub f_fluid: f64,
    #[serde(rename = "F_elastic")]
    pub f_elastic: f64,
    pub denom: f64,
    pub rhs: f64,
    /// Krylov iterations of the fluid solve.
    pub iters: usize,
    /// Final relative residual of the fluid solve.
    pub res: f64,
}

impl StepRecord {
    fn fields(&self) -> [String; 12] {
        let f = |v: f64| format!("{v:.16e}");
        [
            f(self.t),
            f(self.c),
            f(self.cdot),
            f(self.orifice_area),
            f(self.flux),
            f(self.dp_probe),
            f(self.f_fluid),
            f(self.f_elastic),
            f(self.denom),
            f(self.rhs),
            self.iters.to_string(),
            f(self.res),
        ]
    }
}

/// Streaming writer for the time-series CSV; every row is flushed so a
/// failed run leaves all completed steps on disk.
pub struct TimeseriesWriter {
    inner: csv::Writer<File>,
    path: std::path::PathBuf,
}

impl TimeseriesWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        inner.write_record(TIMESERIES_COLUMNS).map_err(|e| csv_error(path, e))?;
        Ok(Self { inner, path: path.to_path_buf() })
    }

    pub fn write(&mut self, row: &StepRecord) -> Result<()> {
        self.inner.write_record(row.fields()).map_err(|e| csv_error(&self.path, e))?;
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_timeseries(path: &Path, rows: &[StepRecord]) -> Result<()> {
    let mut w = TimeseriesWriter::create(path)?;
    rows.iter().try_for_each(|r| w.write(r))
}

pub fn read_timeseries(path: &Path) -> Result<Vec<StepRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?;
    if headers.iter().ne(TIMESERIES_COLUMNS) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected columns {}", TIMESERIES_COLUMNS.join(",")),
        });
    }
    reader.deserialize().map(|r| r.map_err(|e| csv_error(path, e))).collect()
}

/// A stop hit by the valve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub step: usize,
    pub t: f64,
    pub stop: Stop,
}

pub fn write_events(path: &Path, events: &[Event]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["step", "t", "event"]).map_err(|e| csv_error(path, e))?;
    for e in events {
        w.write_record([e.step.to_string(), format!("{:.16e}", e.t), e.stop.describe().to_string()])
            .map_err(|err| csv_error(path, err))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Legacy ASCII VTK of the mesh with vertex data: velocity, pressure, level
/// set and smeared delta.
pub fn write_snapshot(path: &Path, flow: &Field, level_set: &LevelSet) -> Result<()> {
    let space = flow.space();
    let mesh = space.mesh();
    let dim = mesh.dim();
    let nv = mesh.n_vertices();
    let corners = 1usize << dim;
    let mut u = vec![[0.0; 3]; nv];
    let mut p = vec![0.0; nv];
    let mut phi = vec![0.0; nv];
    let mut delta = vec![0.0; nv];
    for cell in 0..mesh.n_cells() {
        for (k, &v) in mesh.cell_vertices(cell).iter().enumerate() {
            let mut xi = [0.0; 3];
            for (a, x) in xi.iter_mut().enumerate().take(dim) {
                *x = if (k >> a) & 1 == 1 { 1.0 } else { -1.0 };
            }
            for (i, ui) in u[v].iter_mut().enumerate().take(dim) {
                *ui = flow.evaluate(i, cell, xi, false)?.value;
            }
            p[v] = flow.evaluate(dim, cell, xi, false)?.value;
            let s = level_set.space().shape_at(cell, xi, false)?;
            phi[v] = level_set.field().combine(0, cell, &s, false).value;
            delta[v] = smeared_delta(level_set.delta_distance(cell, &s, phi[v]), level_set.epsilon());
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "# vtk DataFile Version 3.0\nriis-fsi snapshot\nASCII\nDATASET UNSTRUCTURED_GRID").map_err(io)?;
    writeln!(w, "POINTS {nv} double").map_err(io)?;
    for x in mesh.vertices() {
        writeln!(w, "{:.16e} {:.16e} {:.16e}", x[0], x[1], x[2]).map_err(io)?;
    }
    // tensor order to VTK quad/hexahedron order
    let order: &[usize] = if dim == 2 { &[0, 1, 3, 2] } else { &[0, 1, 3, 2, 4, 5, 7, 6] };
    let nc = mesh.n_cells();
    writeln!(w, "CELLS {nc} {}", nc * (corners + 1)).map_err(io)?;
    for cell in 0..nc {
        let verts = mesh.cell_vertices(cell);
        let ids: Vec<String> = order.iter().map(|&k| verts[k].to_string()).collect();
        writeln!(w, "{corners} {}", ids.join(" ")).map_err(io)?;
    }
    writeln!(w, "CELL_TYPES {nc}").map_err(io)?;
    let kind = if dim == 2 { 9 } else { 12 };
    for _ in 0..nc {
        writeln!(w, "{kind}").map_err(io)?;
    }
    writeln!(w, "POINT_DATA {nv}\nVECTORS u double").map_err(io)?;
    for v in &u {
        writeln!(w, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]).map_err(io)?;
    }
    for (name, data) in [("p", &p), ("phi", &phi), ("delta", &delta)] {
        writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default").map_err(io)?;
        for x in data {
            writeln!(w, "{x:.16e}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"RIISCKPT";
const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to continue a run bitwise: the step index, the valve
/// state and the fluid history (newest first).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    pub valve: ValveState,
    pub fluid_history: Vec<Vec<f64>>,
}

/// Layout (little endian): magic, `u32` version, `u64` step, `f64` c,
/// `f64` cdot, `u64` valve step, `u64` levels, `u64` length, then the
/// coefficient vectors.
pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let n = ck.fluid_history.first().map_or(0, Vec::len);
    if ck.fluid_history.iter().any(|h| h.len() != n) {
        return Err(Error::State("checkpoint history vectors differ in length".into()));
    }
    let mut buf = Vec::with_capacity(48 + 8 * n * ck.fluid_history.len());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(ck.step as u64).to_le_bytes());
    buf.extend_from_slice(&ck.valve.c.to_le_bytes());
    buf.extend_from_slice(&ck.valve.cdot.to_le_bytes());
    buf.extend_from_slice(&(ck.valve.step as u64).to_le_bytes());
    buf.extend_from_slice(&(ck.fluid_history.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for v in ck.fluid_history.iter().flatten() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Parse { path: path.to_path_buf(), line: 0, message: format!("checkpoint {m}") };
    let mut at = 0;
    let mut take = |k: usize| -> Result<&[u8]> {
        let s = bytes.get(at..at + k).ok_or_else(|| bad("truncated"))?;
        at += k;
        Ok(s)
    };
    if take(8)? != CHECKPOINT_MAGIC {
        return Err(bad("has the wrong magic bytes"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(bad(&format!("version {version} unsupported (expected {CHECKPOINT_VERSION})")));
    }
    let mut u64_at = || -> Result<u64> { Ok(u64::from_le_bytes(take(8)?.try_into().unwrap())) };
    let step = u64_at()? as usize;
    let c = f64::from_bits(u64_at()?);
    let cdot = f64::from_bits(u64_at()?);
    let valve_step = u64_at()? as usize;
    let levels = u64_at()? as usize;
    let n = u64_at()? as usize;
    let mut history = Vec::with_capacity(levels);
    for _ in 0..levels {
        history.push((0..n).map(|_| u64_at().map(f64::from_bits)).collect::<Result<Vec<_>>>()?);
    }
    if at != bytes.len() {
        return Err(bad("has trailing bytes"));
    }
    Ok(Checkpoint { step, valve: ValveState { c, cdot, step: valve_step }, fluid_history: history })
}
