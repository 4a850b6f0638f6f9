//! File formats and atomic persistence.

use std::fs;
use std::io::Write;
use std::path::Path;

use eldercare_core::detection::Alert;
use eldercare_core::dynamics::HealthTrajectory;
use eldercare_core::imputation::TimeSeries;
use tempfile::NamedTempFile;

use crate::error::CliError;

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

/// `time,h,r_h,c,clamped`; `r_h` is blank for linear-mode runs.
pub fn trajectory_csv(traj: &HealthTrajectory) -> Vec<u8> {
    let rows = (0..traj.len()).map(|i| {
        [
            traj.times[i].to_string(),
            traj.h[i].to_string(),
            traj.r_h.as_ref().map_or(String::new(), |r| r[i].to_string()),
            traj.c[i].to_string(),
            traj.clamped[i].to_string(),
        ]
    });
    csv_bytes(&["time", "h", "r_h", "c", "clamped"], rows)
}

pub fn alerts_csv(alerts: &[Alert]) -> Vec<u8> {
    let rows = alerts.iter().map(|a| {
        [
            a.index.to_string(),
            a.time.to_string(),
            a.direction.as_str().to_string(),
            a.statistic.to_string(),
        ]
    });
    csv_bytes(&["index", "time", "direction", "statistic"], rows)
}

/// A CSV series with the original text of every row retained.
#[derive(Debug, Clone)]
pub struct SeriesTable {
    pub header: Vec<u8>,
    pub column_names: Vec<String>,
    pub value_column: usize,
    pub rows: Vec<SeriesRow>,
}

#[derive(Debug, Clone)]
pub struct SeriesRow {
    pub raw: Vec<u8>,
    pub fields: Vec<String>,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan")
}

fn trim_line(bytes: &[u8]) -> Vec<u8> {
    let mut end = bytes.len();
    while end > 0 && matches!(bytes[end - 1], b'\n' | b'\r') {
        end -= 1;
    }
    bytes[..end].to_vec()
}

/// Reads a headed CSV whose first column is time. `column` selects the value
/// column by name; the second column is used otherwise. Blank, `NA` and
/// `NaN` cells are missing.
pub fn read_series(path: &Path, column: Option<&str>) -> Result<(SeriesTable, TimeSeries), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
    let headers = reader.headers().map_err(|e| CliError::parse(path, e))?.clone();
    let column_names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    if column_names.len() < 2 {
        return Err(CliError::parse(path, "expected a time column and at least one value column"));
    }
    let value_column = match column {
        Some(name) => column_names
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::parse(path, format!("no column named `{name}`")))?,
        None => 1,
    };
    if value_column == 0 {
        return Err(CliError::parse(path, "the value column cannot be the time column"));
    }

    let mut starts = Vec::new();
    let mut records = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                starts.push(record.position().map_or(0, |p| p.byte() as usize));
                records.push(record.clone());
            }
            Err(e) => return Err(CliError::parse(path, e)),
        }
    }
    let header_end = starts.first().copied().unwrap_or(bytes.len());
    let header = trim_line(&bytes[..header_end]);

    let mut rows = Vec::with_capacity(records.len());
    let mut times = Vec::with_capacity(records.len());
    let mut values = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let line = i + 2;
        let end = starts.get(i + 1).copied().unwrap_or(bytes.len());
        let t: f64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| CliError::parse(path, format!("line {line}: bad time `{}`", &rec[0])))?;
        let cell = &rec[value_column];
        let v = if is_missing(cell) {
            None
        } else {
            Some(
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::parse(path, format!("line {line}: bad value `{cell}`")))?,
            )
        };
        times.push(t);
        values.push(v);
        rows.push(SeriesRow {
            raw: trim_line(&bytes[starts[i]..end]),
            fields: rec.iter().map(str::to_string).collect(),
        });
    }
    let label = column_names[value_column].clone();
    let series = TimeSeries::new(label, times, values).map_err(|e| CliError::parse(path, e))?;
    Ok((
        SeriesTable {
            header,
            column_names,
            value_column,
            rows,
        },
        series,
    ))
}

/// Re-emits `table` with the value column taken from `filled`. Rows whose
/// value did not change are copied byte for byte.
pub fn write_series_bytes(table: &SeriesTable, original: &TimeSeries, filled: &TimeSeries) -> Vec<u8> {
    let mut out = table.header.clone();
    out.push(b'\n');
    for (i, row) in table.rows.iter().enumerate() {
        match (original.values[i], filled.values[i]) {
            (None, Some(v)) => {
                let mut fields = row.fields.clone();
                fields[table.value_column] = v.to_string();
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(Vec::new());
                w.write_record(&fields).expect("in-memory csv");
                out.extend(w.into_inner().expect("in-memory csv"));
            }
            _ => {
                out.extend_from_slice(&row.raw);
                out.push(b'\n');
            }
        }
    }
    out
}
