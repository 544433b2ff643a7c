//! CSV plumbing shared by every output file.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};

/// Formats a float with nine significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

pub(crate) fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(file))
}

pub(crate) fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Reads a CSV file back as its header plus string records.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let io = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    let header = r.headers().map_err(io)?.iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_owned).collect()))
        .collect::<std::result::Result<_, _>>()
        .map_err(io)?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_f64(1.5), "1.50000000e0");
        assert_eq!(fmt_f64(2_548_975.606194513), "2.54897561e6");
        let x = 0.123456789123;
        let back: f64 = fmt_f64(x).parse().unwrap();
        assert!(((back - x) / x).abs() < 1e-8);
    }
}
