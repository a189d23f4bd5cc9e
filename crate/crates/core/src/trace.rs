//! Per-iteration optimization log.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// Primary score (maximized).
    pub s: f64,
    /// Secondary loss (minimized); zero for single-objective runs.
    pub l: f64,
    pub lambda: f64,
    pub gnorm_s: f64,
    pub gnorm_l: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTrace {
    rows: Vec<TraceRow>,
}

impl ScoreTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a row; iterations must strictly increase from 0.
    pub fn push(&mut self, row: TraceRow) -> Result<()> {
        let expected_min = self.rows.last().map_or(0, |r| r.iter + 1);
        if (self.rows.is_empty() && row.iter != 0) || row.iter < expected_min {
            return Err(Error::InvalidParams(format!(
                "trace iteration {} does not follow {:?}",
                row.iter,
                self.rows.last().map(|r| r.iter)
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.s).collect()
    }
}
