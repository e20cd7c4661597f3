//! CSV result tables: UTF-8, comma-separated, LF line endings, header row,
//! '#'-prefixed comment lines carrying the run configuration.

use std::fs;
use std::path::Path;

use crate::error::Result;

/// Real values are serialized with 9 significant digits.
pub fn fmt_sig9(x: f64) -> String {
    format!("{:.8e}", x)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            comments: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "ragged CSV row");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_comments_header_rows() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.comments.push("cfg".to_string());
        t.push_row(vec!["1".into(), "2".into()]);
        assert_eq!(t.render(), "# cfg\na,b\n1,2\n");
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig9(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(fmt_sig9(0.0), "0.00000000e0");
    }
}
