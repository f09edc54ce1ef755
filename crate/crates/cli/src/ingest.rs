//! CSV ingestion and emission.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use cctc_core::Series;
use serde::Serialize;

use crate::error::{CliError, Result};

/// Header names taken as the timestamp column when none is given.
const TIME_NAMES: &[&str] = &["t", "time", "timestamp", "date", "datetime"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schema {
    /// Data columns to keep; `None` keeps every non-timestamp column.
    pub columns: Option<Vec<String>>,
    pub time_column: Option<String>,
    /// Columns whose sign is reversed after parsing.
    pub flip: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRow {
    /// 1-based line in the file (the header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub series: Vec<Series>,
    pub rejected: Vec<RejectedRow>,
    pub time_column: Option<String>,
}

fn parse_value(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn ingest_reader<R: Read>(reader: R, schema: &Schema) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::data(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.iter().all(String::is_empty) {
        return Err(CliError::data("missing header row"));
    }
    for (i, h) in headers.iter().enumerate() {
        if headers[..i].contains(h) {
            return Err(CliError::data(format!("line 1: duplicate column '{h}'")));
        }
    }
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::data(format!(
                "line 1: unknown column '{name}'; available: {}",
                headers.join(", ")
            ))
        })
    };

    let time_column = match &schema.time_column {
        Some(t) => {
            find(t)?;
            Some(t.clone())
        }
        None => headers
            .first()
            .filter(|h| TIME_NAMES.contains(&h.to_ascii_lowercase().as_str()))
            .cloned(),
    };
    let names: Vec<String> = match &schema.columns {
        Some(c) => c.clone(),
        None => headers
            .iter()
            .filter(|h| Some(*h) != time_column.as_ref())
            .cloned()
            .collect(),
    };
    if names.is_empty() {
        return Err(CliError::data("no data columns selected"));
    }
    let mut selected = Vec::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        if names[..i].contains(name) {
            return Err(CliError::usage(format!("column '{name}' selected twice")));
        }
        selected.push(find(name)?);
    }
    let mut flipped = vec![false; names.len()];
    for f in &schema.flip {
        let at = names.iter().position(|n| n == f).ok_or_else(|| {
            find(f).err().unwrap_or_else(|| {
                CliError::usage(format!("flipped column '{f}' is not among the selected columns"))
            })
        })?;
        flipped[at] = true;
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut rejected = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(match e.kind() {
                    csv::ErrorKind::UnequalLengths { expected_len, len, .. } => CliError::data(format!(
                        "line {line}: expected {expected_len} fields, found {len}"
                    )),
                    _ => CliError::data(format!("line {line}: {e}")),
                });
            }
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut row = Vec::with_capacity(selected.len());
        let mut bad = None;
        for (j, &col) in selected.iter().enumerate() {
            let field = record.get(col).unwrap_or("");
            match parse_value(field) {
                Some(v) => row.push(if flipped[j] { -v } else { v }),
                None => {
                    bad = Some(format!("column '{}': '{field}' is not a finite number", names[j]));
                    break;
                }
            }
        }
        match bad {
            Some(reason) => rejected.push(RejectedRow { line, reason }),
            None => {
                for (c, v) in columns.iter_mut().zip(row) {
                    c.push(v);
                }
            }
        }
    }
    if columns[0].is_empty() {
        return Err(CliError::data(format!(
            "no usable rows ({} rejected)",
            rejected.len()
        )));
    }
    let series = names
        .into_iter()
        .zip(columns)
        .map(|(name, values)| Series::new(name, values).map_err(CliError::from))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ingested {
        series,
        rejected,
        time_column,
    })
}

pub fn cmd_ingest(path: &Path, schema: &Schema) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    ingest_reader(std::io::BufReader::new(file), schema)
}

/// Scientific notation with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with a leading integer `t` column and one column per series.
pub fn series_csv(series: &[Series]) -> String {
    let n = series.first().map_or(0, Series::len);
    let mut out = String::from("t");
    for s in series {
        out.push(',');
        out.push_str(s.name());
    }
    out.push('\n');
    for i in 0..n {
        let _ = write!(out, "{i}");
        for s in series {
            out.push(',');
            out.push_str(&fmt_real(s.values()[i]));
        }
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, schema: &Schema) -> Result<Ingested> {
        ingest_reader(text.as_bytes(), schema)
    }

    #[test]
    fn timestamp_column_is_skipped() {
        let got = read("t,ae,sym\n0,1.5,2\n1,2.5,-3\n", &Schema::default()).unwrap();
        assert_eq!(got.series.len(), 2);
        assert_eq!(got.series[0].name(), "ae");
        assert_eq!(got.series[1].values(), &[2.0, -3.0]);
        assert_eq!(got.time_column.as_deref(), Some("t"));
    }

    #[test]
    fn na_rows_are_rejected_with_line_numbers() {
        let got = read("t,a,b\n0,1,2\n1,NA,3\n2,4,\n3,5e-1,6\n", &Schema::default()).unwrap();
        assert_eq!(got.series[0].values(), &[1.0, 0.5]);
        let lines: Vec<u64> = got.rejected.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![3, 4]);
        assert!(got.rejected[0].reason.contains("'a'"));
    }

    #[test]
    fn flip_negates() {
        let schema = Schema {
            flip: vec!["sym".into()],
            ..Default::default()
        };
        let got = read("t,ae,sym\n0,1,2\n1,3,-4.5\n", &schema).unwrap();
        assert_eq!(got.series[0].values(), &[1.0, 3.0]);
        assert_eq!(got.series[1].values(), &[-2.0, 4.5]);
    }

    #[test]
    fn selection_and_unselected_text_columns() {
        let schema = Schema {
            columns: Some(vec!["b".into()]),
            ..Default::default()
        };
        let got = read("label,a,b\nx,1,2\ny,oops,3\n", &schema).unwrap();
        assert_eq!(got.series.len(), 1);
        assert_eq!(got.series[0].values(), &[2.0, 3.0]);
        assert!(got.rejected.is_empty());
    }

    #[test]
    fn structural_errors() {
        let e = read("a,b\n1,2\n3\n", &Schema::default()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("line 3"), "{e}");

        let schema = Schema {
            columns: Some(vec!["zz".into()]),
            ..Default::default()
        };
        let e = read("a,b\n1,2\n", &schema).unwrap_err();
        assert!(e.to_string().contains("unknown column 'zz'"), "{e}");

        let e = read("a,b\nNA,1\nx,2\n", &Schema::default()).unwrap_err();
        assert!(e.to_string().contains("no usable rows (2 rejected)"), "{e}");

        let schema = Schema {
            flip: vec!["q".into()],
            ..Default::default()
        };
        assert_eq!(read("a,b\n1,2\n", &schema).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn emitted_csv_round_trips() {
        let s = vec![
            Series::new("X", vec![0.1, 1e-300, -2.5e17, std::f64::consts::PI]).unwrap(),
            Series::new("Y", vec![1.0 / 3.0, 7.0, -0.0, 1e308]).unwrap(),
        ];
        let text = series_csv(&s);
        let got = read(&text, &Schema::default()).unwrap();
        assert_eq!(got.series, s);
    }
}
