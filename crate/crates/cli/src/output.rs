//! CSV formatting. Numbers carry 10 significant digits in scientific
//! notation; undefined values are empty fields.

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::Context;

/// `x` with 10 significant digits, or an empty string when `x` is NaN.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.9e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), num)
}

/// Axis value as written in the first column.
pub fn axis_value(x: f64, integer: bool) -> String {
    if integer {
        format!("{}", x as u64)
    } else {
        num(x)
    }
}

pub struct Table {
    path: PathBuf,
    w: csv::Writer<File>,
}

impl Table {
    pub fn create(path: &Path, header: &[String]) -> anyhow::Result<Self> {
        let w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        let mut t = Self { path: path.to_path_buf(), w };
        t.row(header)?;
        Ok(t)
    }

    pub fn row<S: AsRef<[u8]>>(&mut self, fields: &[S]) -> anyhow::Result<()> {
        self.w.write_record(fields).with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn finish(mut self) -> anyhow::Result<PathBuf> {
        self.w.flush().with_context(|| format!("writing {}", self.path.display()))?;
        Ok(self.path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(num(0.1), "1.000000000e-1");
        assert_eq!(num(-2.0 / 3.0), "-6.666666667e-1");
        assert_eq!(num(0.0), "0.000000000e0");
        assert_eq!(num(f64::NAN), "");
        assert_eq!(axis_value(18.0, true), "18");
    }
}
