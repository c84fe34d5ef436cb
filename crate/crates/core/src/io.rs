//! Plain numeric CSV (RFC-4180, `.` decimal separator, 17 significant digits)
//! and JSON file helpers shared by every exporter.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CalibError, Result};

/// Formats a double with 17 significant digits so it round-trips exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Quotes a text field only when RFC-4180 requires it.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

/// Writes a numeric table with a header row. Lines end in CRLF per RFC-4180.
pub fn write_numeric_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    let head: Vec<String> = header.iter().map(|h| csv_field(h)).collect();
    write!(w, "{}\r\n", head.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        write!(w, "{}\r\n", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes pre-formatted rows (mixed text and numbers).
pub fn write_text_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    write!(w, "{}\r\n", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| csv_field(c)).collect();
        write!(w, "{}\r\n", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric CSV written by [`write_numeric_csv`]: returns header and rows.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or(CalibError::Empty("csv header"))?
        .split(',')
        .map(|s| s.trim().trim_matches('"').to_string())
        .collect::<Vec<_>>();
    let rows = lines
        .enumerate()
        .map(|(i, line)| {
            line.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|e| CalibError::Parse(format!("row {}: {c:?}: {e}", i + 1)))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(bad) = rows.iter().position(|r| r.len() != header.len()) {
        return Err(CalibError::Parse(format!(
            "row {} has {} fields, header has {}",
            bad + 1,
            rows[bad].len(),
            header.len()
        )));
    }
    Ok((header, rows))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_csv_round_trips_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![vec![0.1, 1.0 / 3.0, -2.5e-300], vec![f64::MAX, 0.0, 1e10]];
        write_numeric_csv(&path, &["a".into(), "b".into(), "c".into()], &rows).unwrap();
        let (h, back) = read_numeric_csv(&path).unwrap();
        assert_eq!(h, vec!["a", "b", "c"]);
        for (r, b) in rows.iter().zip(&back) {
            for (x, y) in r.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn text_fields_are_quoted_when_needed() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
