use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("column {column} has {got} rows, expected {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        got: usize,
    },
    #[error("scalar n = {value} does not match row count {rows}")]
    RowCountMismatch { value: f64, rows: usize },
    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    BadValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("duplicate column {0}")]
    DuplicateColumn(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Named data bound to a model: equal-length columns (entries may be missing)
/// plus scalars. `n` is kept equal to the row count whenever columns exist.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    columns: IndexMap<String, Vec<Option<f64>>>,
    scalars: IndexMap<String, f64>,
    row_count: usize,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty() && self.scalars.is_empty()
    }

    pub fn add_column(&mut self, name: &str, values: Vec<Option<f64>>) -> Result<(), DataError> {
        if self.columns.contains_key(name) {
            return Err(DataError::DuplicateColumn(name.to_string()));
        }
        if self.columns.is_empty() {
            self.row_count = values.len();
        } else if values.len() != self.row_count {
            return Err(DataError::LengthMismatch {
                column: name.to_string(),
                expected: self.row_count,
                got: values.len(),
            });
        }
        self.columns.insert(name.to_string(), values);
        self.scalars.insert("n".to_string(), self.row_count as f64);
        Ok(())
    }

    pub fn add_values(&mut self, name: &str, values: &[f64]) -> Result<(), DataError> {
        self.add_column(name, values.iter().copied().map(Some).collect())
    }

    pub fn set_scalar(&mut self, name: &str, value: f64) -> Result<(), DataError> {
        if name == "n" && !self.columns.is_empty() && value != self.row_count as f64 {
            return Err(DataError::RowCountMismatch {
                value,
                rows: self.row_count,
            });
        }
        self.scalars.insert(name.to_string(), value);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.get(name).copied()
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn scalars(&self) -> impl Iterator<Item = (&str, f64)> {
        self.scalars.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Every name a model may reference as data.
    pub fn names(&self) -> HashSet<String> {
        self.columns
            .keys()
            .chain(self.scalars.keys())
            .cloned()
            .collect()
    }

    pub fn row(&self, i: usize) -> Vec<Option<f64>> {
        self.columns.values().map(|c| c[i]).collect()
    }

    /// Row concatenation; both sides must carry the same column set. An empty
    /// dataset is the identity.
    pub fn merge(&self, other: &Dataset) -> Result<Dataset, DataError> {
        if other.columns.is_empty() {
            return Ok(self.clone());
        }
        if self.columns.is_empty() {
            return Ok(other.clone());
        }
        let mine: HashSet<&String> = self.columns.keys().collect();
        let theirs: HashSet<&String> = other.columns.keys().collect();
        if mine != theirs {
            let mut a: Vec<&str> = self.column_names().collect();
            let mut b: Vec<&str> = other.column_names().collect();
            a.sort_unstable();
            b.sort_unstable();
            return Err(DataError::Schema(format!(
                "columns [{}] vs [{}]",
                a.join(", "),
                b.join(", ")
            )));
        }
        let mut out = Dataset::new();
        for (name, values) in &self.columns {
            let mut joined = values.clone();
            joined.extend_from_slice(&other.columns[name]);
            out.add_column(name, joined)?;
        }
        for (name, value) in &self.scalars {
            if name != "n" {
                out.scalars.insert(name.clone(), *value);
            }
        }
        Ok(out)
    }

    /// Read a CSV with a header row. Empty cells and `NA` are missing values;
    /// `n` is set to the number of data rows.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Dataset, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); headers.len()];
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            for (j, cell) in record.iter().enumerate() {
                let value = if cell.is_empty() || cell == "NA" {
                    None
                } else {
                    Some(cell.parse::<f64>().map_err(|_| DataError::BadValue {
                        row: row + 1,
                        column: headers[j].clone(),
                        value: cell.to_string(),
                    })?)
                };
                cols[j].push(value);
            }
        }
        let mut ds = Dataset::new();
        for (name, values) in headers.iter().zip(cols) {
            ds.add_column(name, values)?;
        }
        if !headers.is_empty() {
            ds.scalars.insert("n".to_string(), ds.row_count as f64);
        }
        Ok(ds)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
        let file = std::fs::File::open(path)?;
        Dataset::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.keys())?;
        for i in 0..self.row_count {
            let row: Vec<String> = self
                .columns
                .values()
                .map(|c| c[i].map_or_else(|| "NA".to_string(), |v| v.to_string()))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
