//! Fixed CSV dialect: comma separators, one header row, LF line endings,
//! floats at 17 significant digits (round-trip exact for f64).

use crate::CliError;

/// Formats a float with 17 significant digits.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Incremental CSV builder.
pub struct CsvWriter {
    buffer: String,
    columns: usize,
}

impl CsvWriter {
    pub fn new(header: &[&str]) -> Self {
        let mut buffer = header.join(",");
        buffer.push('\n');
        Self {
            buffer,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        assert_eq!(fields.len(), self.columns, "row width mismatch");
        self.buffer.push_str(&fields.join(","));
        self.buffer.push('\n');
    }

    pub fn finish(self) -> String {
        self.buffer
    }
}

/// Parsed CSV with header.
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| CliError::Config("empty CSV".into()))?
            .split(',')
            .map(str::to_owned)
            .collect();
        let mut rows = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let row: Vec<String> = line.split(',').map(str::to_owned).collect();
            if row.len() != header.len() {
                return Err(CliError::Config(format!(
                    "CSV row has {} fields, header has {}",
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("CSV column {name} missing")))
    }

    pub fn float_at(&self, row: usize, col: usize) -> Result<f64, CliError> {
        self.rows[row][col]
            .parse()
            .map_err(|_| CliError::Config(format!("bad float in CSV at row {row}")))
    }
}
