// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV ingestion and atomic output.

use std::io::{Read, Write};
use std::path::Path;

use cssd::{validate_and_sort, DataSeries64, RawSample};

use crate::error::CliError;

fn open_input(path: &str) -> Result<Box<dyn Read>, CliError> {
    if path == "-" {
        Ok(Box::new(std::io::stdin()))
    } else {
        std::fs::File::open(path)
            .map(|f| Box::new(f) as Box<dyn Read>)
            .map_err(|e| CliError::Data(format!("cannot read {path}: {e}")))
    }
}

/// Column layout of an input file.
struct Layout {
    x: usize,
    ys: Vec<usize>,
    delta: Option<usize>,
}

fn layout(headers: &csv::StringRecord) -> Result<Layout, CliError> {
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
    };
    let x = find("x").ok_or_else(|| CliError::Data("missing column 'x'".into()))?;
    let ys = match find("y") {
        Some(i) => vec![i],
        None => {
            let cols: Vec<usize> = (1..).map_while(|k| find(&format!("y{k}"))).collect();
            if cols.is_empty() {
                return Err(CliError::Data("missing column 'y' or 'y1'".into()));
            }
            cols
        }
    };
    Ok(Layout {
        x,
        ys,
        delta: find("delta"),
    })
}

fn parse(field: Option<&str>, line: u64, column: &str) -> Result<f64, CliError> {
    let text = field.map(str::trim).unwrap_or("");
    text.parse::<f64>()
        .map_err(|_| CliError::Data(format!("line {line}: cannot parse {column} value '{text}'")))
}

/// Reads raw samples from a CSV file or `-` for standard input.
pub fn read_samples(path: &str) -> Result<Vec<RawSample<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open_input(path)?);
    let layout = layout(reader.headers()?)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let x = parse(record.get(layout.x), line, "x")?;
        let y = layout
            .ys
            .iter()
            .map(|&c| parse(record.get(c), line, "y"))
            .collect::<Result<Vec<_>, _>>()?;
        let delta = layout
            .delta
            .map(|c| parse(record.get(c), line, "delta"))
            .transpose()?;
        out.push(RawSample::new(x, y, delta));
    }
    Ok(out)
}

/// Reads, validates and sorts an input file.
pub fn read_series(path: &str) -> Result<DataSeries64, CliError> {
    Ok(validate_and_sort(&read_samples(path)?)?)
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// or to standard output when `path` is `None` or `-`.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        None => write_stdout(bytes),
        Some(p) if p.as_os_str() == "-" => write_stdout(bytes),
        Some(p) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.flush()?;
            tmp.persist(p).map_err(|e| {
                CliError::Data(format!("cannot write {}: {}", p.display(), e.error))
            })?;
            Ok(())
        }
    }
}

fn write_stdout(bytes: &[u8]) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

/// CSV with a header row and one row per record.
pub fn csv_bytes(
    header: &[String],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

/// Column names for the ordinates of a `dim`-dimensional series.
pub fn y_headers(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["y".into()]
    } else {
        (1..=dim).map(|k| format!("y{k}")).collect()
    }
}
