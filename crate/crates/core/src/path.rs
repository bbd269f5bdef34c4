use std::io::{BufRead, Write};
use std::ops::Deref;

use crate::error::{Error, Result};

/// A finite realisation of a univariate time series.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SamplePath(Vec<f64>);

impl SamplePath {
    pub fn new(values: Vec<f64>) -> Self {
        SamplePath(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Single-column CSV with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &str) -> Result<()> {
        writeln!(w, "{header}")?;
        for v in &self.0 {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    /// Reads a single-column CSV. Lines starting with `#` are skipped and the
    /// first remaining line is taken as the header.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut values = Vec::new();
        let mut header_seen = false;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                header_seen = true;
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| Error::Csv(format!("line {}: `{line}` is not a number", lineno + 1)))?;
            values.push(v);
        }
        Ok(SamplePath(values))
    }
}

impl Deref for SamplePath {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for SamplePath {
    fn from(v: Vec<f64>) -> Self {
        SamplePath(v)
    }
}
