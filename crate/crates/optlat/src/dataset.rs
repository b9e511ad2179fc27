//! Tabular outputs and their CSV form.
//!
//! Every header names its unit (`t_ms`, `sigma_um`, `rate_mm_s`, …).
//! Floats are written in Rust's shortest round-trip form, so parsing a file
//! back and writing it again reproduces the same bytes.

use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("dataset `{dataset}` has no column `{column}`")]
    MissingColumn { dataset: String, column: String },
    #[error("dataset `{dataset}`, column `{column}`, row {row}: `{value}` is not a number")]
    NotNumeric {
        dataset: String,
        column: String,
        row: usize,
        value: String,
    },
    #[error("row {row} has {got} fields, header has {want}")]
    Ragged { row: usize, got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Text(_) => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v:?}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// File stem of the CSV.
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, headers: &[&str]) -> Self {
        Self {
            name: name.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.headers.len(), "row width for `{}`", self.name);
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn column_index(&self, column: &str) -> Result<usize, DatasetError> {
        self.headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| DatasetError::MissingColumn {
                dataset: self.name.clone(),
                column: column.to_string(),
            })
    }

    pub fn numeric(&self, column: &str) -> Result<Vec<f64>, DatasetError> {
        let c = self.column_index(column)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[c].as_f64().ok_or_else(|| DatasetError::NotNumeric {
                    dataset: self.name.clone(),
                    column: column.to_string(),
                    row: i + 1,
                    value: r[c].to_string(),
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, DatasetError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_string))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?)
    }

    /// Parse a CSV written by [`Dataset::to_csv`]. Integers come back as
    /// `Int`, other numbers as `Num`, everything else as `Text`.
    pub fn from_csv(name: impl Into<String>, bytes: &[u8]) -> Result<Self, DatasetError> {
        let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(bytes);
        let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != headers.len() {
                return Err(DatasetError::Ragged {
                    row: i + 1,
                    got: rec.len(),
                    want: headers.len(),
                });
            }
            rows.push(rec.iter().map(parse_cell).collect());
        }
        Ok(Self {
            name: name.into(),
            headers,
            rows,
        })
    }
}

fn parse_cell(s: &str) -> Cell {
    if let Ok(i) = s.parse::<i64>() {
        Cell::Int(i)
    } else if let Ok(v) = s.parse::<f64>() {
        Cell::Num(v)
    } else {
        Cell::Text(s.to_string())
    }
}
