use std::fmt::Write as _;
use std::path::Path;

use crate::container;
use crate::error::Result;

/// Column-oriented numeric table rendered as whitespace-separated text.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Values are written with `{:e}`, the shortest form that parses back
    /// to the same f64.
    pub fn render(&self) -> String {
        let mut out = self.columns.join(" ");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v:e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Option<Table> {
        let mut lines = text.lines();
        let columns: Vec<String> = lines.next()?.split_whitespace().map(str::to_string).collect();
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let row: Vec<f64> = line.split_whitespace().map(|v| v.parse().ok()).collect::<Option<_>>()?;
            if row.len() != columns.len() {
                return None;
            }
            rows.push(row);
        }
        Some(Table { columns, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        container::write_file(path, self.render().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parses_back_exactly() {
        let mut t = Table::new(&["time", "mse"]);
        t.push(vec![0.1, 1.0 / 3.0]);
        t.push(vec![0.2, 5e-310]);
        assert_eq!(Table::parse(&t.render()).unwrap(), t);
    }
}
