//! Comma-separated panels and tables.
//!
//! Dialect: comma separator, `.` decimal point, one required header line, no
//! quoting — cells must not contain commas, quotes, or line breaks. Floats
//! are written in the shortest decimal form that parses back to the same
//! bits, so a written panel reads back bit-identically.

use std::io::{BufRead, BufReader, Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sim::TimeSeriesPanel;

/// Shortest decimal representation of `v` that round-trips through
/// [`str::parse::<f64>`] to exactly the same bits.
pub fn float_repr(v: f64) -> String {
    ryu::Buffer::new().format(v).to_string()
}

/// Column names used when a panel carries none: `x1`, `x2`, ..., `xp`.
pub fn default_labels(p: usize) -> Vec<String> {
    (1..=p).map(|k| format!("x{k}")).collect()
}

fn check_cell(cell: &str, what: &str) -> Result<()> {
    if cell.is_empty() {
        return Err(Error::InvalidInput(format!("{what} must not be empty")));
    }
    if cell.contains([',', '"', '\n', '\r']) {
        return Err(Error::InvalidInput(format!(
            "{what} {cell:?} contains a comma, quote, or line break, which the \
             unquoted csv dialect cannot represent"
        )));
    }
    Ok(())
}

/// Parses one numeric cell, reporting 1-based file coordinates on failure.
pub fn parse_float(cell: &str, row: usize, column: usize) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|e| Error::CsvParse {
        row,
        column,
        message: format!("{cell:?} is not a number ({e})"),
    })
}

/// Writes `panel` as CSV using its labels (or `x1..xp` when it has none).
pub fn write_panel<W: Write>(mut writer: W, panel: &TimeSeriesPanel) -> Result<()> {
    let p = panel.n_vars();
    let labels = match &panel.labels {
        Some(labels) => labels.clone(),
        None => default_labels(p),
    };
    if labels.len() != p {
        return Err(Error::InvalidInput(format!(
            "panel has {p} variables but {} labels",
            labels.len()
        )));
    }
    for label in &labels {
        check_cell(label, "column name")?;
    }
    writeln!(writer, "{}", labels.join(","))?;
    let mut digits = ryu::Buffer::new();
    let mut line = String::new();
    for row in panel.data.rows() {
        line.clear();
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(digits.format(*v));
        }
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

/// Reads a panel in the crate dialect; header names become the labels.
///
/// Every row must have exactly as many cells as the header, and every body
/// cell must parse as a float; violations are reported with 1-based file
/// coordinates (the header is row 1).
pub fn read_panel<R: Read>(reader: R) -> Result<TimeSeriesPanel> {
    let mut lines = BufReader::new(reader).lines();
    let header = match lines.next() {
        Some(header) => header?,
        None => {
            return Err(Error::CsvParse {
                row: 1,
                column: 1,
                message: "empty file: a header line is required".into(),
            })
        }
    };
    let labels: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    let p = labels.len();
    for (k, label) in labels.iter().enumerate() {
        if label.is_empty() {
            return Err(Error::CsvParse {
                row: 1,
                column: k + 1,
                message: "empty column name".into(),
            });
        }
    }

    let mut values = Vec::new();
    let mut body_rows = 0usize;
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let file_row = idx + 2;
        let mut cells = 0usize;
        for (col, cell) in line.split(',').enumerate() {
            if cells == p {
                break;
            }
            values.push(parse_float(cell, file_row, col + 1)?);
            cells += 1;
        }
        let total = line.split(',').count();
        if total != p {
            return Err(Error::CsvParse {
                row: file_row,
                column: total.min(p) + 1,
                message: format!("expected {p} cells to match the header, found {total}"),
            });
        }
        body_rows += 1;
    }

    let data = Array2::from_shape_vec((body_rows, p), values)
        .expect("cell count was checked row by row");
    let mut panel = TimeSeriesPanel::new(data)?;
    panel.labels = Some(labels);
    Ok(panel)
}

/// Writes a generic table; every row must match the header width and no cell
/// may need quoting.
pub fn write_table<W: Write>(
    mut writer: W,
    headers: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    if headers.is_empty() {
        return Err(Error::InvalidInput("a table needs at least one column".into()));
    }
    for header in headers {
        check_cell(header, "column name")?;
    }
    writeln!(writer, "{}", headers.join(","))?;
    for row in rows {
        if row.len() != headers.len() {
            return Err(Error::InvalidInput(format!(
                "table row has {} cells but the header has {}",
                row.len(),
                headers.len()
            )));
        }
        for cell in row {
            check_cell(cell, "cell")?;
        }
        writeln!(writer, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a generic table: `(headers, rows)` with whitespace-trimmed cells.
/// Rows must be rectangular but cells are not parsed.
pub fn read_table<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = BufReader::new(reader).lines();
    let header = match lines.next() {
        Some(header) => header?,
        None => {
            return Err(Error::CsvParse {
                row: 1,
                column: 1,
                message: "empty file: a header line is required".into(),
            })
        }
    };
    let headers: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        if cells.len() != headers.len() {
            return Err(Error::CsvParse {
                row: idx + 2,
                column: cells.len().min(headers.len()) + 1,
                message: format!(
                    "expected {} cells to match the header, found {}",
                    headers.len(),
                    cells.len()
                ),
            });
        }
        rows.push(cells);
    }
    Ok((headers, rows))
}
