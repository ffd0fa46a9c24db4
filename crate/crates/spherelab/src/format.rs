//! CSV layouts of an experiment directory.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! every value reads back bit for bit. Missing values are empty fields.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use spherelab_core::analysis::{StationaryEstimate, TemperatureInterval, UniformBaseline};
use spherelab_core::sphere::Checkpoint;
use spherelab_core::Snr;

use crate::error::{LabError, Result};

pub const SERIES_HEADER: [&str; 6] = [
    "iter",
    "loss",
    "full_grad_norm",
    "mean_stoch_grad_norm",
    "snr",
    "entropy",
];
pub const SUMMARY_HEADER: [&str; 6] = ["lr", "U", "U_std", "S", "S_std", "stabilized"];
pub const TEMPERATURE_HEADER: [&str; 5] = ["lr", "t_lo", "t_hi", "bound_only", "empty"];
pub const BASELINE_HEADER: [&str; 5] = ["U", "U_std", "S", "S_std", "windows"];

pub const CONFIG_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const BASELINE_FILE: &str = "baseline.csv";
pub const SERIES_DIR: &str = "series";

/// Path of the series file for the `index`-th learning rate.
pub fn series_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(SERIES_DIR).join(format!("lr_{index:03}.csv"))
}

/// Formats a float with 17 significant digits.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

/// One row of a series file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub iter: u64,
    pub loss: f64,
    pub full_grad_norm: f64,
    pub mean_stoch_grad_norm: f64,
    pub snr: Option<f64>,
    pub entropy: Option<f64>,
}

impl SeriesRow {
    pub fn new(c: &Checkpoint, entropy: Option<f64>) -> Self {
        SeriesRow {
            iter: c.iter,
            loss: c.loss,
            full_grad_norm: c.full_grad_norm,
            mean_stoch_grad_norm: c.mean_stoch_grad_norm,
            snr: c.snr.value(),
            entropy,
        }
    }

    /// Back to a checkpoint; a blank SNR becomes [`Snr::Undefined`].
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            iter: self.iter,
            loss: self.loss,
            full_grad_norm: self.full_grad_norm,
            mean_stoch_grad_norm: self.mean_stoch_grad_norm,
            snr: self.snr.map_or(Snr::Undefined, Snr::Value),
        }
    }
}

/// A table of strings about to be written as CSV.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|s| s.as_ref().to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| match e.into_kind() {
            csv::ErrorKind::Io(e) => LabError::io(path, e),
            other => LabError::format(path, format!("{other:?}")),
        };
        let file = File::create(path).map_err(|e| LabError::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush().map_err(|e| LabError::io(path, e))
    }
}

pub fn write_series(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    let mut t = Table::new(&SERIES_HEADER);
    for r in rows {
        t.push(vec![
            r.iter.to_string(),
            float(r.loss),
            float(r.full_grad_norm),
            float(r.mean_stoch_grad_norm),
            opt_float(r.snr),
            opt_float(r.entropy),
        ]);
    }
    t.write(path)
}

/// Stationary estimates; a NaN entropy (none measured) is left blank.
pub fn write_summary(path: &Path, estimates: &[StationaryEstimate]) -> Result<()> {
    let mut t = Table::new(&SUMMARY_HEADER);
    let s = |x: f64| if x.is_nan() { String::new() } else { float(x) };
    for e in estimates {
        t.push(vec![
            float(e.lr),
            float(e.loss),
            float(e.loss_std),
            s(e.entropy),
            s(e.entropy_std),
            e.stabilized.to_string(),
        ]);
    }
    t.write(path)
}

pub fn write_temperature(path: &Path, intervals: &[TemperatureInterval]) -> Result<()> {
    let mut t = Table::new(&TEMPERATURE_HEADER);
    for i in intervals {
        t.push(vec![
            float(i.lr),
            float(i.t_lo),
            float(i.t_hi),
            i.bound_only.to_string(),
            i.empty.to_string(),
        ]);
    }
    t.write(path)
}

pub fn write_baseline(path: &Path, b: &UniformBaseline) -> Result<()> {
    let mut t = Table::new(&BASELINE_HEADER);
    t.push(vec![
        float(b.loss),
        float(b.loss_std),
        float(b.entropy),
        float(b.entropy_std),
        b.windows.to_string(),
    ]);
    t.write(path)
}

fn read_records(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let file = File::open(path).map_err(|e| LabError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let got = r
        .headers()
        .map_err(|e| LabError::format(path, e.to_string()))?
        .clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(LabError::format(
            path,
            format!(
                "expected columns {}, found {}",
                header.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    r.records()
        .map(|rec| rec.map_err(|e| LabError::format(path, e.to_string())))
        .collect()
}

struct Fields<'a> {
    path: &'a Path,
    rec: &'a csv::StringRecord,
}

impl Fields<'_> {
    fn raw(&self, i: usize) -> &str {
        self.rec.get(i).unwrap_or("")
    }

    fn parse<T: std::str::FromStr>(&self, i: usize, what: &str) -> Result<T> {
        self.raw(i)
            .trim()
            .parse()
            .map_err(|_| LabError::format(self.path, format!("bad {what}: {:?}", self.raw(i))))
    }

    fn opt(&self, i: usize, what: &str) -> Result<Option<f64>> {
        if self.raw(i).trim().is_empty() {
            Ok(None)
        } else {
            self.parse(i, what).map(Some)
        }
    }
}

pub fn read_series(path: &Path) -> Result<Vec<SeriesRow>> {
    read_records(path, &SERIES_HEADER)?
        .iter()
        .map(|rec| {
            let f = Fields { path, rec };
            Ok(SeriesRow {
                iter: f.parse(0, "iter")?,
                loss: f.parse(1, "loss")?,
                full_grad_norm: f.parse(2, "full_grad_norm")?,
                mean_stoch_grad_norm: f.parse(3, "mean_stoch_grad_norm")?,
                snr: f.opt(4, "snr")?,
                entropy: f.opt(5, "entropy")?,
            })
        })
        .collect()
}

/// Reads a summary; blank entropies come back as NaN.
pub fn read_summary(path: &Path) -> Result<Vec<StationaryEstimate>> {
    read_records(path, &SUMMARY_HEADER)?
        .iter()
        .map(|rec| {
            let f = Fields { path, rec };
            Ok(StationaryEstimate {
                lr: f.parse(0, "lr")?,
                loss: f.parse(1, "U")?,
                loss_std: f.parse(2, "U_std")?,
                entropy: f.opt(3, "S")?.unwrap_or(f64::NAN),
                entropy_std: f.opt(4, "S_std")?.unwrap_or(f64::NAN),
                stabilized: f.parse(5, "stabilized")?,
            })
        })
        .collect()
}

pub fn read_baseline(path: &Path) -> Result<UniformBaseline> {
    let recs = read_records(path, &BASELINE_HEADER)?;
    let rec = recs
        .first()
        .ok_or_else(|| LabError::format(path, "no baseline row"))?;
    let f = Fields { path, rec };
    Ok(UniformBaseline {
        loss: f.parse(0, "U")?,
        loss_std: f.parse(1, "U_std")?,
        entropy: f.parse(2, "S")?,
        entropy_std: f.parse(3, "S_std")?,
        windows: f.parse(4, "windows")?,
    })
}

/// Writes `text` to `path`.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| LabError::io(path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| LabError::io(path, e))
}
