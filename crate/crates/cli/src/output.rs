//! Tabular output as CSV or aligned text.

use std::io::Write;
use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Text(String),
    /// Printed as `N/A`.
    Missing,
}

impl Cell {
    fn render(&self, format: Format) -> String {
        match (self, format) {
            (Cell::Real(v), Format::Csv) => format!("{v:.16e}"),
            (Cell::Real(v), Format::Table) => format!("{v:.6e}"),
            (Cell::Int(v), _) => v.to_string(),
            (Cell::Text(s), _) => s.clone(),
            (Cell::Missing, _) => "N/A".into(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let j = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| &r[j]).collect())
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Table => self.to_text(),
        }
    }

    fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(|c| c.render(Format::Csv)))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|c| c.render(Format::Table)).collect())
            .collect();
        let mut width: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for r in &cells {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |items: &[String]| -> String {
            items
                .iter()
                .zip(&width)
                .map(|(s, &w)| format!("{s:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = line(&self.headers) + "\n";
        out += &(width.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  ") + "\n");
        for r in &cells {
            out += &(line(r) + "\n");
        }
        out
    }

    pub fn write_to(&self, path: &Path, format: Format) -> Result<()> {
        std::fs::write(path, self.render(format)).map_err(|e| CliError::io(path, e))
    }
}

/// Where a command's main table and summary lines go.
#[derive(Debug, Clone, Default)]
pub struct Sink {
    pub out: Option<std::path::PathBuf>,
    pub format: Format,
}

impl Sink {
    /// Table to `--out` or stdout. Summary lines go to stdout unless CSV is
    /// already there, in which case they go to stderr.
    pub fn emit(&self, table: &Table, summary: &[String]) -> Result<()> {
        match &self.out {
            Some(p) => {
                table.write_to(p, self.format)?;
                print_lines(&mut std::io::stdout(), summary);
            }
            None => {
                print!("{}", table.render(self.format));
                match self.format {
                    Format::Csv => print_lines(&mut std::io::stderr(), summary),
                    Format::Table => {
                        if !summary.is_empty() {
                            println!();
                        }
                        print_lines(&mut std::io::stdout(), summary)
                    }
                }
            }
        }
        Ok(())
    }
}

fn print_lines(w: &mut dyn Write, lines: &[String]) {
    for l in lines {
        let _ = writeln!(w, "{l}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["n", "value", "bound"]);
        t.push(vec![1usize.into(), 0.1.into(), Cell::Missing]);
        t.push(vec![2usize.into(), (1.0 / 3.0).into(), 2.5.into()]);
        t
    }

    #[test]
    fn csv_reals_round_trip() {
        let csv = sample().render(Format::Csv);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("n,value,bound"));
        assert_eq!(lines.next(), Some("1,1.0000000000000001e-1,N/A"));
        let v: f64 = lines.next().unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v.to_bits(), (1.0f64 / 3.0).to_bits());
    }

    #[test]
    fn text_columns_align() {
        let txt = sample().render(Format::Table);
        let widths: Vec<usize> = txt.lines().map(|l| l.len()).collect();
        assert_eq!(widths[0], widths[2]);
        assert!(txt.contains("N/A"));
    }
}
