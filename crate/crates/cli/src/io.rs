//! CSV input and output.

use std::fs;
use std::path::Path;

use trust_core::DMatrix;

use crate::error::{CliError, CliResult};

/// A numeric table with its column names.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub data: DMatrix<f64>,
}

/// Reads a CSV file with a header row and an all-numeric body. Rows are
/// numbered from 1 after the header in error messages.
pub fn load_csv(path: &Path) -> CliResult<Table> {
    let text = fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

pub fn parse_csv(text: &str) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::validation(format!("bad header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() || names.iter().all(|n| n.is_empty()) {
        return Err(CliError::validation("empty file"));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::validation(format!("row {}: {e}", r + 1)))?;
        if rec.len() != names.len() {
            return Err(CliError::validation(format!("row {} has {} cells, expected {}", r + 1, rec.len(), names.len())));
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                CliError::validation(format!("row {}, column \"{}\": non-numeric or missing value {cell:?}", r + 1, names[c]))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::validation("no data rows"));
    }
    Ok(Table {
        data: DMatrix::from_row_slice(rows, names.len(), &values),
        names,
    })
}

/// Shortest decimal form that reads back to the same double.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

pub fn csv_string(names: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = names.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_csv(names: &[String], m: &DMatrix<f64>) -> String {
    csv_string(names, (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()))
}

/// Output files of a command, written only once every one of them is ready.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write_all(&self, dir: &Path) -> CliResult<()> {
        fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            let tmp = dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, contents)?;
            fs::rename(&tmp, dir.join(name))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_integer_table() {
        let t = parse_csv("a,b\n1,2\n3,4\n5,6\n").unwrap();
        assert_eq!(t.names, vec!["a", "b"]);
        assert_eq!(t.data, DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    }

    #[test]
    fn missing_cell_is_located() {
        let e = parse_csv("NSW,VIC\n1,2\n3,NA\n").unwrap_err().to_string();
        assert!(e.contains("row 2") && e.contains("\"VIC\""), "{e}");
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(parse_csv("").is_err());
        assert!(parse_csv("a,b\n").is_err());
        assert!(parse_csv("a,b\n1\n").is_err());
    }

    #[test]
    fn roundtrip_is_exact() {
        let vals = [0.1, -1.0 / 3.0, 1e-300, 123456789.123456789, f64::MIN_POSITIVE, 2.0f64.sqrt()];
        let m = DMatrix::from_row_slice(3, 2, &vals);
        let names = vec!["x".to_string(), "y".to_string()];
        let back = parse_csv(&matrix_csv(&names, &m)).unwrap();
        assert_eq!(back.data, m);
    }
}
