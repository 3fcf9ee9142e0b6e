use std::io::Write;

use crate::error::Result;

pub const REPORT_HEADER: &str = "method,ball,status,snr_db,snr_w_db,seconds";

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

/// One method of a study. SNRs are `None` for failed rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub ball: String,
    pub status: RowStatus,
    /// SNR of the recovered signal against ground truth.
    pub snr_db: Option<f64>,
    /// SNR of the splitting variable (`w1` or `W`) against ground truth.
    pub snr_w_db: Option<f64>,
    pub seconds: f64,
}

impl ReportRow {
    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
}

impl RunReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    pub fn row(&self, method: &str, ball: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method && r.ball == ball)
    }

    /// CSV with [`REPORT_HEADER`]. With `include_time = false` the seconds
    /// column is written as `0` so reports can be diffed across runs.
    pub fn write_csv<W: Write>(&self, mut out: W, include_time: bool) -> Result<()> {
        writeln!(out, "{REPORT_HEADER}")?;
        for r in &self.rows {
            let status = match &r.status {
                RowStatus::Ok => "ok".to_string(),
                // Keep the message on one CSV field.
                RowStatus::Failed(msg) => format!("failed: {}", msg.replace([',', '\n', '\r'], ";")),
            };
            let num = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
            let secs = if include_time { r.seconds } else { 0.0 };
            writeln!(
                out,
                "{},{},{},{},{},{:.3}",
                r.method,
                r.ball,
                status,
                num(r.snr_db),
                num(r.snr_w_db),
                secs
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_rows_stay_one_field() {
        let report = RunReport {
            rows: vec![
                ReportRow {
                    method: "alg3".into(),
                    ball: "l1".into(),
                    status: RowStatus::Ok,
                    snr_db: Some(31.25),
                    snr_w_db: None,
                    seconds: 2.0,
                },
                ReportRow {
                    method: "alg1".into(),
                    ball: "l0".into(),
                    status: RowStatus::Failed("bad, worse\nworst".into()),
                    snr_db: None,
                    snr_w_db: None,
                    seconds: 0.5,
                },
            ],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "alg3,l1,ok,31.250000,,0.000");
        assert_eq!(lines[2].split(',').count(), 6);
        assert_eq!(report.failures(), 1);
        assert!(report.row("alg1", "l0").is_some());
    }
}
