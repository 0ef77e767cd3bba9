//! CSV output shared by the harness commands. Every metric file starts with
//! `config_hash` and `seed` columns.

use std::fs::File;
use std::path::{Path, PathBuf};

use crate::error::{HipError, Result};

pub struct MetricWriter {
    path: PathBuf,
    out: csv::Writer<File>,
    prefix: [String; 2],
}

impl MetricWriter {
    pub fn create(path: &Path, config_hash: &str, seed: u64, header: &[&str]) -> Result<Self> {
        let out = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut w = MetricWriter {
            path: path.to_path_buf(),
            out,
            prefix: [config_hash.to_string(), seed.to_string()],
        };
        let cols = ["config_hash", "seed"].into_iter().chain(header.iter().copied());
        w.out.write_record(cols).map_err(|e| csv_error(path, e))?;
        Ok(w)
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        let cols = self.prefix.iter().chain(fields);
        self.out.write_record(cols).map_err(|e| csv_error(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| HipError::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> HipError {
    HipError::io(path, std::io::Error::other(e))
}

/// Mean and normal-approximation 95% half-width.
pub fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Pearson correlation; NaN when either side is constant.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HipError::io(dir, e))
}
