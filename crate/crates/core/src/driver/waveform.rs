//! Boundary pressure waveforms: piecewise-linear samples, the builtin
//! systolic surrogate and CSV import/export.

use std::path::Path;

use crate::error::{Error, Result};

/// Pascal per millimetre of mercury.
pub const MMHG: f64 = 133.322_387_415;

/// Piecewise-linear signal over strictly increasing sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Waveform {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::Config("waveform needs as many values as sample times, at least one".into()));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!(
                "waveform sample times must increase strictly (sample {} at t = {} follows t = {})",
                i + 1,
                times[i + 1],
                times[i]
            )));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Config("waveform samples must be finite".into()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation, held constant outside the sampled range.
    pub fn value(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let k = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.values[k - 1] + w * (self.values[k] - self.values[k - 1])
    }

    pub fn covers(&self, start: f64, end: f64) -> bool {
        self.times[0] <= start && *self.times.last().unwrap() >= end
    }
}

/// Systole length of the builtin surrogate [s].
pub const SYSTOLE: f64 = 0.4;
/// Zero crossing of the builtin transvalvular jump [s].
pub const JUMP_INVERSION: f64 = 0.2;
const JUMP_DECAY: f64 = 0.06;
const JUMP_PEAK_MMHG: f64 = 10.0;

fn jump_shape(t: f64) -> f64 {
    (std::f64::consts::PI * t / JUMP_INVERSION).sin() * (-t / JUMP_DECAY).exp()
}

/// Time of the jump maximum: `tan(pi t / T0) = pi tau / T0`.
fn jump_peak_time() -> f64 {
    let k = std::f64::consts::PI / JUMP_INVERSION;
    (k * JUMP_DECAY).atan() / k
}

/// Outlet pressure of the surrogate [Pa]: 80 to 120 mmHg over systole.
pub fn builtin_p_out(t: f64) -> f64 {
    let s = (t / SYSTOLE).clamp(0.0, 1.0);
    (80.0 + 20.0 * (1.0 - (std::f64::consts::PI * s).cos())) * MMHG
}

/// Transvalvular jump of the surrogate [Pa]: zero at `t = 0`, a 10 mmHg
/// peak after about 50 ms, inversion at 0.2 s.
pub fn builtin_jump(t: f64) -> f64 {
    let t = t.clamp(0.0, SYSTOLE);
    JUMP_PEAK_MMHG * MMHG * jump_shape(t) / jump_shape(jump_peak_time())
}

pub fn builtin_p_in(t: f64) -> f64 {
    builtin_p_out(t) + builtin_jump(t)
}

/// Builtin `(p_in, p_out)` sampled every 0.1 ms over systole.
pub fn builtin_waveforms() -> (Waveform, Waveform) {
    let n = 4000;
    let times: Vec<f64> = (0..=n).map(|i| SYSTOLE * i as f64 / n as f64).collect();
    let p_in = times.iter().map(|&t| builtin_p_in(t)).collect();
    let p_out = times.iter().map(|&t| builtin_p_out(t)).collect();
    (Waveform::new(times.clone(), p_in).expect("valid samples"), Waveform::new(times, p_out).expect("valid samples"))
}

/// Read `t,p_in,p_out[,...]` (seconds, pascal) with a header row.
pub fn read_waveform_csv(path: &Path) -> Result<(Waveform, Waveform)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("missing column {name:?}"),
        })
    };
    let (ct, ci, co) = (column("t")?, column("p_in")?, column("p_out")?);
    let (mut t, mut pin, mut pout) = (Vec::new(), Vec::new(), Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = row + 2;
        let field = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or("").trim();
            raw.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("not a number: {raw:?}"),
            })
        };
        t.push(field(ct)?);
        pin.push(field(ci)?);
        pout.push(field(co)?);
    }
    let wrap = |e: Error| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        e => e,
    };
    Ok((Waveform::new(t.clone(), pin).map_err(wrap)?, Waveform::new(t, pout).map_err(wrap)?))
}

/// Write `t,p_in,p_out,jump` (seconds, pascal) at full precision.
pub fn write_waveform_csv(path: &Path, p_in: &Waveform, p_out: &Waveform) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["t", "p_in", "p_out", "jump"]).map_err(|e| csv_error(path, e))?;
    for &t in p_in.times() {
        let (a, b) = (p_in.value(t), p_out.value(t));
        w.write_record([t, a, b, a - b].map(|v| format!("{v:.16e}"))).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Parse { path: path.to_path_buf(), line, message: format!("{kind:?}") },
    }
}
