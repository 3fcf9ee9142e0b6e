use std::io::Write;

use crate::error::Result;

pub const TRACE_HEADER: &str = "level,iter,eta,objective,stationarity,feasibility,seconds";

/// One iteration of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateRecord {
    pub level: usize,
    pub iter: usize,
    pub eta: f64,
    pub objective: f64,
    pub stationarity: f64,
    /// Distance of the residual (`A x - b`, or the observed residual in the
    /// low-rank solver) to the constraint ball.
    pub feasibility: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterateTrace {
    pub records: Vec<IterateRecord>,
}

impl IterateTrace {
    pub fn push(&mut self, r: IterateRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterateRecord> {
        self.records.last()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// CSV with [`TRACE_HEADER`]; `include_time = false` writes `0` in the
    /// seconds column so that output is reproducible byte-for-byte.
    pub fn write_csv<W: Write>(&self, mut out: W, include_time: bool) -> Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.records {
            let secs = if include_time { r.seconds } else { 0.0 };
            writeln!(
                out,
                "{},{},{:e},{:.17e},{:.17e},{:.17e},{:.6}",
                r.level, r.iter, r.eta, r.objective, r.stationarity, r.feasibility, secs
            )?;
        }
        Ok(())
    }
}
