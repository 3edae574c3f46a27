//! Result tables from `aggregated.csv`: one row per (goal set, fraction), one
//! column per (learner, metric), cells `mean ± std` of macro F1.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

const REQUIRED: [&str; 6] = ["goals", "fraction", "learner", "metric", "f1_macro_mean", "f1_macro_std"];

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    /// Row label and one optional `(mean, std)` per column.
    pub rows: Vec<(String, Vec<Option<(f64, f64)>>)>,
}

impl Table {
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
        let headers = r.headers()?.clone();
        let idx: HashMap<&str, usize> = REQUIRED
            .iter()
            .map(|c| {
                headers
                    .iter()
                    .position(|h| h == *c)
                    .map(|i| (*c, i))
                    .with_context(|| format!("{} lacks column {c}", path.display()))
            })
            .collect::<Result<_>>()?;
        let mut columns: Vec<String> = Vec::new();
        let mut rows: Vec<(String, Vec<Option<(f64, f64)>>)> = Vec::new();
        let mut cells: Vec<(String, String, (f64, f64))> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let get = |c: &str| rec.get(idx[c]).unwrap_or("");
            let row = format!("{} @ {}", get("goals"), get("fraction"));
            let col = format!("{}+{}", get("learner"), get("metric"));
            let mean: f64 = get("f1_macro_mean").parse().context("f1_macro_mean")?;
            let std: f64 = get("f1_macro_std").parse().context("f1_macro_std")?;
            if !columns.contains(&col) {
                columns.push(col.clone());
            }
            if !rows.iter().any(|(r, _)| *r == row) {
                rows.push((row.clone(), Vec::new()));
            }
            cells.push((row, col, (mean, std)));
        }
        for (label, values) in rows.iter_mut() {
            *values = columns
                .iter()
                .map(|c| cells.iter().find(|(r, cc, _)| r == label && cc == c).map(|x| x.2))
                .collect();
        }
        Ok(Table { columns, rows })
    }

    fn best(values: &[Option<(f64, f64)>]) -> Option<f64> {
        values.iter().flatten().map(|v| v.0).fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }

    fn cell(v: &Option<(f64, f64)>) -> String {
        match v {
            Some((m, s)) => format!("{m:.2} ± {s:.2}"),
            None => "-".into(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut grid: Vec<Vec<String>> = vec![std::iter::once("goals @ fraction".to_string()).chain(self.columns.clone()).collect()];
        for (label, values) in &self.rows {
            grid.push(std::iter::once(label.clone()).chain(values.iter().map(Self::cell)).collect());
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, r) in grid.iter().enumerate() {
            let line: Vec<String> = r.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
                out.push('\n');
            }
        }
        out
    }

    /// Markdown with every best cell in a row bolded.
    pub fn to_markdown(&self) -> String {
        let mut out = format!("| goals @ fraction | {} |\n", self.columns.join(" | "));
        out.push_str(&format!("|---|{}\n", "---|".repeat(self.columns.len())));
        for (label, values) in &self.rows {
            let best = Self::best(values);
            let cells: Vec<String> = values
                .iter()
                .map(|v| match v {
                    Some((m, _)) if Some(*m) == best => format!("**{}**", Self::cell(v)),
                    _ => Self::cell(v),
                })
                .collect();
            out.push_str(&format!("| {label} | {} |\n", cells.join(" | ")));
        }
        out
    }
}

/// Renders `dir/aggregated.csv` into `dir/report.txt` and `dir/report.md`.
pub fn report(dir: impl AsRef<Path>) -> Result<Table> {
    let dir = dir.as_ref();
    let table = Table::from_csv(dir.join("aggregated.csv"))?;
    fs::write(dir.join("report.txt"), table.to_text())?;
    fs::write(dir.join("report.md"), table.to_markdown())?;
    Ok(table)
}
