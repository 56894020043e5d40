//! Comma-separated plot tables.
//!
//! | kind              | input          | columns                                          |
//! |-------------------|----------------|--------------------------------------------------|
//! | `exceedance_bars` | metrics report | `class,probability` (empty when undefined)        |
//! | `trajectory`      | one record     | `t,robot_x,robot_y,ped<id>_x,ped<id>_y,...`       |
//! | `training_curve`  | training log   | `steps,mean_reward,success_rate`                  |

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::metrics::MetricsReport;
use super::record::EpisodeRecord;
use super::EvalError;
use crate::learner::TrainingLogRow;
use crate::sim::AgentClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    ExceedanceBars,
    Trajectory,
    TrainingCurve,
}

impl FromStr for PlotKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exceedance_bars" => Ok(Self::ExceedanceBars),
            "trajectory" => Ok(Self::Trajectory),
            "training_curve" => Ok(Self::TrainingCurve),
            other => Err(EvalError::Usage(format!(
                "unknown plot kind `{other}` (expected exceedance_bars, trajectory or training_curve)"
            ))),
        }
    }
}

pub enum PlotInput<'a> {
    Report(&'a MetricsReport),
    Record(&'a EpisodeRecord),
    TrainingLog(&'a [TrainingLogRow]),
}

/// Write the table for `kind` to `out`.
pub fn export_plot_data<W: Write>(kind: PlotKind, input: PlotInput<'_>, out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    match (kind, input) {
        (PlotKind::ExceedanceBars, PlotInput::Report(r)) => {
            w.write_record(["class", "probability"])?;
            for c in AgentClass::ALL {
                w.write_record([c.name().to_string(), opt(r.exceedance.get(c))])?;
            }
        }
        (PlotKind::Trajectory, PlotInput::Record(rec)) => {
            if rec.rows.is_empty() {
                return Err(EvalError::Usage("record has no steps".into()));
            }
            let ids: Vec<u32> = rec.rows[0].pedestrians.iter().map(|p| p.id).collect();
            let mut header = vec!["t".to_string(), "robot_x".into(), "robot_y".into()];
            for id in &ids {
                header.push(format!("ped{id}_x"));
                header.push(format!("ped{id}_y"));
            }
            w.write_record(&header)?;
            for row in &rec.rows {
                let mut fields = vec![row.t.to_string(), row.x.to_string(), row.y.to_string()];
                for p in &row.pedestrians {
                    fields.push(p.x.to_string());
                    fields.push(p.y.to_string());
                }
                w.write_record(&fields)?;
            }
        }
        (PlotKind::TrainingCurve, PlotInput::TrainingLog(log)) => {
            if log.is_empty() {
                return Err(EvalError::Usage("training log is empty".into()));
            }
            w.write_record(["steps", "mean_reward", "success_rate"])?;
            for r in log {
                w.write_record([
                    r.steps.to_string(),
                    r.mean_return.to_string(),
                    r.success_rate.to_string(),
                ])?;
            }
        }
        (kind, _) => {
            return Err(EvalError::Usage(format!("{kind:?} cannot be built from this input")));
        }
    }
    w.flush().map_err(|e| EvalError::io(Path::new("<plot output>"), e))
}

/// Read a training log written by the trainer.
pub fn read_training_log(path: &Path) -> Result<Vec<TrainingLogRow>, EvalError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<_>, _>>()?)
}
