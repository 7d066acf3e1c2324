use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::eval::EvalSummary;

pub const METRICS_HEADER: &str =
    "step,task_id,mean_reward,std_reward,success_ratio,mean_steps,loss_sf,loss_phi,loss_q,epsilon,wall_ms";

pub const MATRIX_HEADER: &str =
    "pretrain_task,eval_task,success_num,success_den,mean_reward,std_reward,mean_steps,std_steps";

/// One periodic evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub task_id: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub success_ratio: f64,
    pub mean_steps: f64,
    pub loss_sf: Option<f64>,
    pub loss_phi: Option<f64>,
    pub loss_q: Option<f64>,
    pub epsilon: f64,
    pub wall_ms: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.step,
            self.task_id,
            self.mean_reward,
            self.std_reward,
            self.success_ratio,
            self.mean_steps,
            opt(self.loss_sf),
            opt(self.loss_phi),
            opt(self.loss_q),
            self.epsilon,
            opt(self.wall_ms),
        )
    }
}

/// One cell of the cross-task evaluation matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixRow {
    /// Index of the last task trained before this evaluation.
    pub pretrain_task: usize,
    pub eval_task: usize,
    pub summary: EvalSummary,
}

impl MatrixRow {
    pub fn to_csv(&self) -> String {
        let s = &self.summary;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.pretrain_task,
            self.eval_task,
            s.successes,
            s.episodes,
            s.mean_reward,
            s.std_reward,
            s.mean_steps,
            s.std_steps
        )
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv());
    }
    out
}

pub fn matrix_csv(rows: &[MatrixRow]) -> String {
    let mut out = String::from(MATRIX_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv());
    }
    out
}

/// Writes `contents` to a sibling temporary file and renames it into place,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::file(&tmp, e))?;
    f.write_all(contents).map_err(|e| Error::file(&tmp, e))?;
    f.sync_all().map_err(|e| Error::file(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unused_columns_are_empty() {
        let r = MetricsRow {
            step: 5000,
            task_id: 0,
            mean_reward: 0.5,
            std_reward: 0.25,
            success_ratio: 1.0,
            mean_steps: 7.0,
            loss_sf: None,
            loss_phi: None,
            loss_q: Some(0.125),
            epsilon: 0.1,
            wall_ms: None,
        };
        assert_eq!(r.to_csv(), "5000,0,0.5,0.25,1,7,,,0.125,0.1,");
        assert_eq!(METRICS_HEADER.split(',').count(), r.to_csv().split(',').count());
    }
}
