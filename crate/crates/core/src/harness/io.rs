//! Matrix files: a `# rows cols` header line, then one comma separated row
//! per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cumulant::SampleMatrix;
use crate::error::{RcaError, Result};
use crate::tensor::LinearMap;

pub fn matrix_to_csv(m: &LinearMap) -> String {
    let mut out = format!("# {} {}\n", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            // `{}` prints the shortest representation that parses back exactly
            let _ = write!(out, "{}", m[(r, c)]);
        }
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<LinearMap> {
    let bad = |msg: String| RcaError::Config(format!("matrix file: {msg}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let dims: Vec<usize> = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| bad(format!("header '{header}' must start with '#'")))?
        .split_whitespace()
        .map(|x| x.parse().map_err(|_| bad(format!("bad dimension '{x}'"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(bad(format!("header '{header}' must hold two dimensions")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (i, line) in lines.enumerate() {
        let values: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse().map_err(|_| bad(format!("row {}: bad value '{x}'", i + 1))))
            .collect::<Result<_>>()?;
        if values.len() != cols {
            return Err(bad(format!("row {} has {} values, expected {cols}", i + 1, values.len())));
        }
        data.extend(values);
        seen += 1;
    }
    if seen != rows {
        return Err(bad(format!("{seen} rows, header says {rows}")));
    }
    Ok(LinearMap::from_row_slice(rows, cols, &data))
}

pub fn write_matrix(path: &Path, m: &LinearMap) -> Result<()> {
    fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<LinearMap> {
    matrix_from_csv(&read_text(path)?)
}

/// Reads a whole file, naming the path in the error.
pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| RcaError::Config(format!("{}: {e}", path.display())))
}

pub fn write_samples(path: &Path, x: &SampleMatrix) -> Result<()> {
    write_matrix(path, &x.to_matrix())
}

pub fn read_samples(path: &Path) -> Result<SampleMatrix> {
    SampleMatrix::from_matrix(&read_matrix(path)?).map_err(|e| RcaError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = LinearMap::from_row_slice(2, 3, &[0.1, -1e-300, 1.0 / 3.0, 7.0, f64::MAX, -0.0]);
        let text = matrix_to_csv(&m);
        assert!(text.starts_with("# 2 3\n"));
        assert_eq!(matrix_from_csv(&text).unwrap(), m);
    }

    #[test]
    fn malformed_files_are_config_errors() {
        for text in ["", "2 2\n1,2\n3,4", "# 2 2\n1,2\n3", "# 2 2\n1,2", "# 1 2\n1,x", "# 2\n1"] {
            assert!(matches!(matrix_from_csv(text), Err(RcaError::Config(_))), "{text:?}");
        }
    }
}
