//! Minimal CSV plumbing shared by the design and results tables. Fields never
//! contain commas or quotes, so no quoting is needed.

use std::io::BufRead;

use crate::{Error, Result};

/// 17 significant digits; parses back to the identical `f64`.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_real(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        reason: format!("{s:?} is not a real number: {e}"),
    })
}

pub fn parse_int<T: std::str::FromStr>(s: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.trim().parse::<T>().map_err(|e| Error::Parse {
        line,
        reason: format!("{s:?} is not an integer: {e}"),
    })
}

/// Reads a header plus rows; returns `(line number, fields)` per data row.
pub fn read_rows<R: BufRead>(reader: R, expected_header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::NoData("empty CSV input".into()))??;
    if header.trim_end_matches('\r') != expected_header {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header {expected_header:?}, found {header:?}"),
        });
    }
    let width = expected_header.split(',').count();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if fields.len() != width {
            return Err(Error::Parse {
                line: idx + 2,
                reason: format!("expected {width} fields, found {}", fields.len()),
            });
        }
        rows.push((idx + 2, fields));
    }
    Ok(rows)
}
