//! CSV and JSON file handling for the command-line tool.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{invalid_data, PenseError, Result};

fn is_missing(field: &str) -> bool {
    matches!(field.to_ascii_lowercase().as_str(), "" | "na" | "nan" | "null" | "n/a")
}

/// Reads a dataset from CSV text with a header row, the response in the
/// first column and predictors in the remaining ones.
pub fn parse_dataset<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.is_empty() {
        return Err(invalid_data("missing header row"));
    }
    let p = header.len() - 1;
    if p == 0 {
        return Err(invalid_data("no predictor columns: need a response and at least one predictor"));
    }
    let mut y = Vec::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |pos| pos.line() as usize);
        for (k, field) in record.iter().enumerate() {
            if is_missing(field) {
                return Err(PenseError::Parse {
                    line,
                    message: format!("missing value in column '{}'", &header[k]),
                });
            }
            let v: f64 = field.parse().map_err(|_| PenseError::Parse {
                line,
                message: format!("'{field}' in column '{}' is not a number", &header[k]),
            })?;
            if !v.is_finite() {
                return Err(PenseError::Parse {
                    line,
                    message: format!("non-finite value in column '{}'", &header[k]),
                });
            }
            if k == 0 {
                y.push(v);
            } else {
                rows.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(invalid_data("no observations"));
    }
    Dataset::from_rows(y, &rows, p)
}

fn csv_error(e: csv::Error) -> PenseError {
    let line = e.position().map_or(0, |pos| pos.line() as usize);
    match e.kind() {
        csv::ErrorKind::Io(_) => PenseError::Io(std::io::Error::other(e.to_string())),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => PenseError::Parse {
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        _ => PenseError::Parse {
            line,
            message: e.to_string(),
        },
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| PenseError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(open(path)?)
}

/// Writes `y,x1,...,xp` with shortest round-trip float formatting.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    writeln!(w, "{}", header.join(","))?;
    let x = data.x();
    for (i, yi) in data.y().iter().enumerate() {
        write!(w, "{yi}")?;
        for j in 0..data.p() {
            write!(w, ",{}", x[(i, j)])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let mut text = String::new();
    std::io::Read::read_to_string(&mut open(path)?, &mut text)?;
    serde_json::from_str(&text).map_err(|e| PenseError::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_response_first() {
        let d = parse_dataset("y,a,b\n1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.p(), 2);
        assert_eq!(d.y(), &[1.0, 4.0]);
        assert_eq!(d.column(1), &[3.0, 6.0]);
    }

    #[test]
    fn reports_line_of_bad_field() {
        match parse_dataset("y,a\n1,2\n3,x\n".as_bytes()) {
            Err(PenseError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match parse_dataset("y,a\n1,2\n3,NA\n".as_bytes()) {
            Err(PenseError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("missing"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_dataset("y,a\n1,2\n3\n".as_bytes()),
            Err(PenseError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn rejects_response_only() {
        assert!(matches!(
            parse_dataset("y\n1\n2\n".as_bytes()),
            Err(PenseError::InvalidData(_))
        ));
    }
}
