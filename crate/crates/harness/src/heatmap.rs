//! Q-learning visit counts as CSV.

use std::path::Path;

use anyhow::{bail, Context, Result};
use grail_core::bank::{PolicyBank, TrainedPolicy};
use grail_core::learners::qlearn::position_visits;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VisitRow {
    pub goal: String,
    pub x: i32,
    pub y: i32,
    /// Heading code, or `all` for the per-cell total.
    pub dir: String,
    pub visits: u64,
}

/// Per-state rows followed by per-cell totals, goal by goal.
pub fn visit_rows(bank: &PolicyBank) -> Result<Vec<VisitRow>> {
    let mut rows = Vec::new();
    for e in &bank.entries {
        let TrainedPolicy::Q(q) = &e.policy else {
            bail!("goal {} holds a {} policy; visit counts need a Q-learning bank", e.goal.label, e.policy.format_tag());
        };
        for i in 0..q.grid.num_states() {
            let s = q.grid.state_at(i);
            if q.grid.is_valid(&s) {
                rows.push(VisitRow {
                    goal: e.goal.label.clone(),
                    x: s.x,
                    y: s.y,
                    dir: s.dir.to_string(),
                    visits: q.table.state_visits(i, 4),
                });
            }
        }
        for ((x, y), visits) in position_visits(&q.grid, &q.table) {
            rows.push(VisitRow {
                goal: e.goal.label.clone(),
                x,
                y,
                dir: "all".into(),
                visits,
            });
        }
    }
    Ok(rows)
}

pub fn export_visit_heatmap(bank: &PolicyBank, path: impl AsRef<Path>) -> Result<Vec<VisitRow>> {
    let path = path.as_ref();
    let rows = visit_rows(bank)?;
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}
