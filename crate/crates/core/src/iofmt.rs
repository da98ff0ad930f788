//! Text output helpers shared by every serialized artifact.
//!
//! Floating-point values are printed with 17 significant digits
//! (`{:.16e}`), enough to make every double round-trip bit-exactly. JSON
//! documents and the dense matrix text format both go through
//! [`format_f64`] so files are byte-stable across runs.

use std::io::{self, BufRead, Write};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::{Error, Result};

/// 17-significant-digit representation; parses back to the identical bits.
pub fn format_f64(value: f64) -> String {
    format!("{value:.16e}")
}

struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        writer.write_all(format_f64(value).as_bytes())
    }
}

/// Serializes to JSON with 17-significant-digit floats and a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigitFormatter);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn write_json_file<T: Serialize>(path: impl AsRef<std::path::Path>, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn read_json_file<T: serde::de::DeserializeOwned>(
    path: impl AsRef<std::path::Path>,
) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes a dense matrix: `rows cols` header, then one line per row.
pub fn write_matrix_text(out: &mut impl Write, m: &DMatrix<f64>) -> io::Result<()> {
    writeln!(out, "{} {}", m.nrows(), m.ncols())?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.write_all(b" ")?;
            }
            out.write_all(format_f64(m[(r, c)]).as_bytes())?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_matrix_text(reader: impl BufRead) -> Result<DMatrix<f64>> {
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing matrix header".into()))??;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_err(1, format!("header must be `rows cols`, got `{header}`")));
    }
    let rows: usize = dims[0]
        .parse()
        .map_err(|_| parse_err(1, format!("invalid row count `{}`", dims[0])))?;
    let cols: usize = dims[1]
        .parse()
        .map_err(|_| parse_err(1, format!("invalid column count `{}`", dims[1])))?;

    let mut values = Vec::with_capacity(rows * cols);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            return Err(parse_err(line_no, "empty line".into()));
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(line_no, format!("invalid value `{tok}`")))?;
            values.push(v);
        }
        if values.len() > rows * cols {
            return Err(parse_err(line_no, "more values than declared".into()));
        }
    }
    if values.len() != rows * cols {
        return Err(Error::Parse {
            line: rows + 1,
            message: format!("expected {} values, found {}", rows * cols, values.len()),
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}
