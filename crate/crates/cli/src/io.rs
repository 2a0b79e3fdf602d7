//! Trajectory CSV layout.
//!
//! Columns: the index (`t` or `n`), `x_0..x_{k-1}`, `xbar_0..xbar_{k-1}`,
//! `gap`, `reg_gap`, `potential`, `fenchel_<ref>...`, `regret_<ref>...`,
//! `energy`, `r_n`. Floats carry 17 significant digits; undefined values are
//! empty fields.

use std::io::{BufRead, Write};

use popdyn_core::record::IndexColumn;
use popdyn_core::TableView;

use crate::error::{HarnessError, Result};

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// Header for a table, excluding extras (which only reach the summary).
pub fn header(view: &TableView<'_>) -> Vec<String> {
    let k = view.states.first().map(|s| s.dim()).unwrap_or(0);
    let mut cols = vec![match view.index {
        IndexColumn::Time(_) => "t".to_string(),
        IndexColumn::Step(_) => "n".to_string(),
    }];
    cols.extend((0..k).map(|i| format!("x_{i}")));
    cols.extend((0..k).map(|i| format!("xbar_{i}")));
    let n_extra = view.channels.extra.len();
    let named = view.channels.named();
    cols.extend(named[..named.len() - n_extra].iter().map(|(name, _)| name.clone()));
    cols
}

pub fn write_csv<W: Write>(view: &TableView<'_>, mut out: W) -> std::io::Result<()> {
    let head = header(view);
    writeln!(out, "{}", head.join(","))?;
    let named = view.channels.named();
    let series = &named[..named.len() - view.channels.extra.len()];
    for row in 0..view.states.len() {
        let mut fields = Vec::with_capacity(head.len());
        fields.push(match view.index {
            IndexColumn::Time(t) => fmt_float(t[row]),
            IndexColumn::Step(n) => n[row].to_string(),
        });
        fields.extend(view.states[row].as_slice().iter().map(|v| fmt_float(*v)));
        fields.extend(view.means[row].as_slice().iter().map(|v| fmt_float(*v)));
        fields.extend(series.iter().map(|(_, s)| fmt_opt(s[row])));
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()
}

/// A parsed trajectory CSV, column-major.
#[derive(Clone, Debug)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub columns: Vec<Vec<Option<f64>>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.header.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map(|c| c.len()).unwrap_or(0)
    }

    /// Last row of the `prefix_0, prefix_1, ...` block.
    pub fn final_vector(&self, prefix: &str) -> Vec<f64> {
        let mut out = Vec::new();
        while let Some(col) = self.column(&format!("{prefix}_{}", out.len())) {
            out.push(col.last().copied().flatten().unwrap_or(f64::NAN));
        }
        out
    }
}

fn format_err(message: impl Into<String>) -> HarnessError {
    HarnessError::Format {
        what: "trajectory csv",
        message: message.into(),
    }
}

pub fn read_csv<R: BufRead>(input: R) -> Result<CsvTable> {
    let mut lines = input.lines();
    let head = lines
        .next()
        .ok_or_else(|| format_err("empty file"))?
        .map_err(|e| HarnessError::io("reading csv", e))?;
    let header: Vec<String> = head.split(',').map(str::to_string).collect();
    let mut columns = vec![Vec::new(); header.len()];
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| HarnessError::io("reading csv", e))?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(format_err(format!("row {} has {} fields, expected {}", i + 1, fields.len(), header.len())));
        }
        for (col, f) in columns.iter_mut().zip(fields) {
            col.push(if f.is_empty() {
                None
            } else {
                Some(f.parse::<f64>().map_err(|e| format_err(format!("row {}: `{f}`: {e}", i + 1)))?)
            });
        }
    }
    Ok(CsvTable { header, columns })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789, f64::MIN_POSITIVE] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let text = "n,x_0\n1,0.5,3\n";
        assert!(read_csv(text.as_bytes()).is_err());
    }
}
