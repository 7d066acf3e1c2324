//! Merging learning curves from several runs and summarising convergence.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::harness::{steps_to_convergence, METRICS_HEADER};

/// One learning curve: a run's rows for one task.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub run: String,
    pub task_id: usize,
    /// `(step, mean_reward, std_reward, success_ratio)`
    pub points: Vec<(u64, f64, f64, f64)>,
}

impl Series {
    pub fn label(&self) -> String {
        format!("{}/task{}", self.run, self.task_id)
    }

    pub fn steps_to_convergence(&self) -> Option<u64> {
        let evals: Vec<(u64, f64)> = self.points.iter().map(|p| (p.0, p.3)).collect();
        steps_to_convergence(&evals)
    }
}

fn field<T: std::str::FromStr>(cols: &[&str], i: usize, line: usize, run: &str) -> Result<T> {
    cols.get(i)
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| Error::InvalidArgument(format!("{run}: line {line}: bad value in column {}", i + 1)))
}

/// Splits a metrics CSV into per-task series.
pub fn parse_metrics(run: &str, text: &str) -> Result<Vec<Series>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.trim() != METRICS_HEADER {
        return Err(Error::InvalidArgument(format!(
            "{run}: unexpected header {header:?}; expected {METRICS_HEADER:?}"
        )));
    }
    let mut by_task: BTreeMap<usize, Vec<(u64, f64, f64, f64)>> = BTreeMap::new();
    for (i, l) in lines.enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = l.split(',').collect();
        let line = i + 2;
        if cols.len() != METRICS_HEADER.split(',').count() {
            return Err(Error::InvalidArgument(format!("{run}: line {line}: wrong column count")));
        }
        let task: usize = field(&cols, 1, line, run)?;
        by_task.entry(task).or_default().push((
            field(&cols, 0, line, run)?,
            field(&cols, 2, line, run)?,
            field(&cols, 3, line, run)?,
            field(&cols, 4, line, run)?,
        ));
    }
    Ok(by_task
        .into_iter()
        .map(|(task_id, points)| Series {
            run: run.to_string(),
            task_id,
            points,
        })
        .collect())
}

/// Learning curves side by side on the union of their steps; missing
/// points are left empty.
pub fn merge_curves(series: &[Series]) -> String {
    let mut steps: Vec<u64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    steps.sort_unstable();
    steps.dedup();
    let mut out = String::from("step");
    for s in series {
        let l = s.label();
        let _ = write!(out, ",{l}:mean_reward,{l}:std_reward,{l}:success_ratio");
    }
    out.push('\n');
    for step in steps {
        let _ = write!(out, "{step}");
        for s in series {
            match s.points.iter().find(|p| p.0 == step) {
                Some(p) => {
                    let _ = write!(out, ",{},{},{}", p.1, p.2, p.3);
                }
                None => out.push_str(",,,"),
            }
        }
        out.push('\n');
    }
    out
}

/// Steps to 0.9 success per series, with the ratio to the first series.
pub fn convergence_summary(series: &[Series]) -> String {
    let mut out = String::from("series,steps_to_0.9,final_success,ratio_to_first\n");
    let first = series.first().and_then(Series::steps_to_convergence);
    for s in series {
        let conv = s.steps_to_convergence();
        let ratio = match (conv, first) {
            (Some(c), Some(f)) if f > 0 => (c as f64 / f as f64).to_string(),
            _ => String::new(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{}",
            s.label(),
            conv.map(|c| c.to_string()).unwrap_or_default(),
            s.points.last().map(|p| p.3.to_string()).unwrap_or_default(),
            ratio
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: &str = "step,task_id,mean_reward,std_reward,success_ratio,mean_steps,loss_sf,loss_phi,loss_q,epsilon,wall_ms\n\
                     10,0,0.1,0.2,0.5,9,,,,0.5,\n20,0,0.7,0.1,0.95,6,,,,0.1,\n30,0,0.8,0.1,1,6,,,,0.1,\n";
    const B: &str = "step,task_id,mean_reward,std_reward,success_ratio,mean_steps,loss_sf,loss_phi,loss_q,epsilon,wall_ms\n\
                     15,0,0.7,0.1,0.9,6,,,,0.1,\n30,0,0.8,0.1,1,6,,,,0.1,\n";

    #[test]
    fn single_input_passes_through() {
        let s = parse_metrics("a", A).unwrap();
        let merged = merge_curves(&s);
        assert_eq!(merged.lines().count(), 4);
        assert!(merged.contains("20,0.7,0.1,0.95"));
        assert!(convergence_summary(&s).contains("a/task0,20,1,1"));
    }

    #[test]
    fn mismatched_cadence_aligns_on_union() {
        let mut s = parse_metrics("a", A).unwrap();
        s.extend(parse_metrics("b", B).unwrap());
        let merged = merge_curves(&s);
        let steps: Vec<&str> = merged.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(steps, vec!["10", "15", "20", "30"]);
        assert!(merged.contains("15,,,,0.7,0.1,0.9"));
        assert!(convergence_summary(&s).contains("b/task0,15,1,0.75"));
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(parse_metrics("x", "step,reward\n1,2\n").is_err());
    }
}
