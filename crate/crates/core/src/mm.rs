//! Matrix Market `array real general` read/write (dense, column-major).

use std::fmt::Write as _;
use std::path::Path;

use crate::dense::{self, Mat};
use crate::{Error, Result};

const HEADER: &str = "%%MatrixMarket matrix array real general";

pub fn to_string(m: &Mat) -> String {
    let mut s = String::with_capacity(32 + 26 * m.len());
    s.push_str(HEADER);
    s.push('\n');
    let _ = writeln!(s, "{} {}", m.nrows(), m.ncols());
    for x in m.iter() {
        // `{:e}` on f64 is the shortest representation that round-trips
        let _ = writeln!(s, "{x:e}");
    }
    s
}

pub fn parse(text: &str) -> Result<Mat> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty Matrix Market input".into()))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(Error::Parse(format!("bad Matrix Market header: {header}")));
    }
    if fields[2] != "array" || fields[3] != "real" || fields[4] != "general" {
        return Err(Error::Parse(format!("unsupported Matrix Market format: {}", fields[2..].join(" "))));
    }
    let mut body = lines.map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size = body.next().ok_or_else(|| Error::Parse("missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad size line: {size}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("size line needs two integers: {size}")));
    };
    let values: Vec<f64> = body
        .flat_map(str::split_whitespace)
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad entry: {t}"))))
        .collect::<Result<_>>()?;
    if values.len() != rows * cols {
        return Err(Error::Parse(format!("expected {} entries, found {}", rows * cols, values.len())));
    }
    let m = Mat::from_column_slice(rows, cols, &values);
    dense::check_finite(&m)?;
    Ok(m)
}

pub fn read_file(path: &Path) -> Result<Mat> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn write_file(path: &Path, m: &Mat) -> Result<()> {
    std::fs::write(path, to_string(m))?;
    Ok(())
}
