use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEADER: [&str; 10] = [
    "method",
    "pilot_dim",
    "dl_snr_db",
    "sum_lb",
    "sum_ub",
    "served_users",
    "selected_beams",
    "feedback_symbols",
    "wall_time_s",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Jomp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Jomp => "jomp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One `(seed, T, SNR, method)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub pilot_dim: usize,
    pub dl_snr_db: f64,
    /// Bits per channel use.
    pub sum_lb: f64,
    pub sum_ub: f64,
    /// Mean number of users the ZF precoder served per trial.
    pub served_users: f64,
    /// `|𝓑|` for the proposed method, 0 for J-OMP.
    pub selected_beams: usize,
    /// Complex symbols fed back per user.
    pub feedback_symbols: usize,
    pub wall_time_s: f64,
    /// Geometry seed; every stream of the cell derives from it.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub seed: u64,
    pub pilot_dim: Option<usize>,
    pub dl_snr_db: Option<f64>,
    pub method: Option<Method>,
    pub message: String,
}

impl fmt::Display for CellFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seed {}", self.seed)?;
        if let Some(t) = self.pilot_dim {
            write!(f, ", T = {t}")?;
        }
        if let Some(s) = self.dl_snr_db {
            write!(f, ", SNR = {s} dB")?;
        }
        if let Some(m) = self.method {
            write!(f, ", {m}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub failures: Vec<CellFailure>,
}

/// `%g` with six significant digits.
pub fn format_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        trim(&format!("{:.*}", (5 - exp) as usize, x))
    }
}

fn record(row: &ReportRow) -> [String; 10] {
    [
        row.method.to_string(),
        row.pilot_dim.to_string(),
        format_g(row.dl_snr_db),
        format_g(row.sum_lb),
        format_g(row.sum_ub),
        format_g(row.served_users),
        row.selected_beams.to_string(),
        row.feedback_symbols.to_string(),
        format_g(row.wall_time_s),
        row.seed.to_string(),
    ]
}

pub fn report_to_string(rows: &[ReportRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // writes to a Vec cannot fail
    w.write_record(HEADER).expect("in-memory write");
    for row in rows {
        w.write_record(record(row)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn write_report(rows: &[ReportRow], path: &Path) -> Result<()> {
    std::fs::write(path, report_to_string(rows)).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?;
    if header.iter().ne(HEADER) {
        return Err(Error::InvalidArgument(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        )));
    }
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)
}
