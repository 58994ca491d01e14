use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::config::Format;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    /// Written as a JSON array, or `;`-joined in CSV.
    List(Vec<f64>),
    Empty,
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

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Vec<f64>> for Cell {
    fn from(v: Vec<f64>) -> Self {
        Cell::List(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Scalar results go out as one JSON object, tables as CSV with a header row.
#[derive(Debug, Clone)]
pub enum Report {
    Record(Vec<(String, Cell)>),
    Table { header: Vec<String>, rows: Vec<Vec<Cell>>, note: Option<String> },
}

impl Report {
    pub fn record() -> Self {
        Report::Record(Vec::new())
    }

    pub fn table(header: &[&str]) -> Self {
        Report::Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new(), note: None }
    }

    pub fn field(mut self, key: &str, v: impl Into<Cell>) -> Self {
        if let Report::Record(f) = &mut self {
            f.push((key.to_string(), v.into()));
        }
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        if let Report::Table { rows, .. } = self {
            rows.push(row);
        }
    }

    pub fn note(mut self, text: &str) -> Self {
        if let Report::Table { note, .. } = &mut self {
            *note = Some(text.to_string());
        }
        self
    }

    fn natural(&self) -> Format {
        match self {
            Report::Record(_) => Format::Json,
            Report::Table { .. } => Format::Csv,
        }
    }

    pub fn write_to(&self, path: Option<&Path>, format: Option<Format>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        match format.unwrap_or(self.natural()) {
            Format::Json => {
                serde_json::to_writer_pretty(&mut buf, &self.to_json())?;
                buf.push(b'\n');
            }
            Format::Csv => self.write_csv(&mut buf)?,
        }
        match path {
            Some(p) => std::fs::write(p, buf)?,
            None => std::io::stdout().lock().write_all(&buf)?,
        }
        Ok(())
    }

    fn to_json(&self) -> Value {
        match self {
            Report::Record(fields) => {
                Value::Object(fields.iter().map(|(k, v)| (k.clone(), cell_json(v))).collect::<Map<_, _>>())
            }
            Report::Table { header, rows, .. } => Value::Array(
                rows.iter()
                    .map(|r| Value::Object(header.iter().cloned().zip(r.iter().map(cell_json)).collect()))
                    .collect(),
            ),
        }
    }

    fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut out = out;
        let (header, rows) = match self {
            Report::Record(fields) => {
                let h: Vec<String> = fields.iter().map(|(k, _)| k.clone()).collect();
                let r = vec![fields.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>()];
                (h, r)
            }
            Report::Table { header, rows, note } => {
                if let Some(n) = note {
                    writeln!(out, "# {n}")?;
                }
                (header.clone(), rows.clone())
            }
        };
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&header)?;
        for r in &rows {
            w.write_record(r.iter().map(cell_text))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rounds to 15 significant digits.
pub fn sig15(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.14e}").parse().unwrap_or(v)
}

pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    let r = sig15(v);
    if r == 0.0 {
        "0".into()
    } else if r.abs() >= 1e-4 && r.abs() < 1e15 {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Num(v) => fmt_num(*v),
        Cell::Int(i) => i.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::List(v) => v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(";"),
        Cell::Empty => String::new(),
    }
}

fn cell_json(c: &Cell) -> Value {
    match c {
        Cell::Num(v) => serde_json::Number::from_f64(sig15(*v)).map_or(Value::Null, Value::Number),
        Cell::Int(i) => Value::from(*i),
        Cell::Text(s) => Value::String(s.clone()),
        Cell::List(v) => Value::Array(v.iter().map(|x| cell_json(&Cell::Num(*x))).collect()),
        Cell::Empty => Value::Null,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_digits() {
        assert_eq!(fmt_num(std::f64::consts::PI), "3.14159265358979");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333333");
        assert_eq!(fmt_num(-1.5326346916618441e-15), "-1.53263469166184e-15");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(2.5), "2.5");
    }

    #[test]
    fn record_csv_is_one_row() {
        let r = Report::record().field("a", 1.0).field("b", "x").field("c", None::<f64>);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b,c\n1,x,\n");
    }
}
