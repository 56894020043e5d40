//! Aggregate navigation and social-compliance metrics over episode records.
//!
//! * Time and path length average over successful episodes only.
//! * `d_*` is, per episode, the mean over steps of the centre distance to
//!   the nearest pedestrian of that class, counting only steps where that
//!   pedestrian is within the sensing radius; episodes are then averaged.
//! * `t_*` is the mean per-episode time spent inside a zone of that class,
//!   over episodes where the class is present.
//! * Exceedance pools steps over all episodes where the class is present
//!   and reports the fraction closer than the threshold.
//!
//! Per-class values are `None` when the class never appears.

use serde::{Deserialize, Serialize};

use super::record::{EpisodeRecord, StepRow};
use crate::env::TerminationCause;
use crate::sim::AgentClass;
use crate::zones::ZoneModel;

pub const DEFAULT_EXCEEDANCE_THRESHOLD: f64 = 1.5;
pub const DEFAULT_DISTANCE_WINDOW: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassValues {
    pub adult: Option<f64>,
    pub child: Option<f64>,
    pub elder: Option<f64>,
}

impl ClassValues {
    pub fn get(&self, class: AgentClass) -> Option<f64> {
        match class {
            AgentClass::Adult => self.adult,
            AgentClass::Child => self.child,
            AgentClass::Elder => self.elder,
        }
    }

    fn set(&mut self, class: AgentClass, v: Option<f64>) {
        match class {
            AgentClass::Adult => self.adult = v,
            AgentClass::Child => self.child = v,
            AgentClass::Elder => self.elder = v,
        }
    }

    fn from_fn(mut f: impl FnMut(AgentClass) -> Option<f64>) -> Self {
        let mut out = Self::default();
        for c in AgentClass::ALL {
            out.set(c, f(c));
        }
        out
    }

    /// Mean of the defined entries.
    pub fn mean_available(&self) -> Option<f64> {
        mean(AgentClass::ALL.iter().filter_map(|c| self.get(*c)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub zone_model: ZoneModel,
    pub exceedance_threshold: f64,
    /// Steps farther than this from every pedestrian of a class do not
    /// contribute to that class's distance mean, m.
    pub distance_window: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            zone_model: ZoneModel::Static,
            exceedance_threshold: DEFAULT_EXCEEDANCE_THRESHOLD,
            distance_window: DEFAULT_DISTANCE_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub episodes: usize,
    /// Mean time to goal over successful episodes, s.
    pub time: Option<f64>,
    /// Mean path length over successful episodes, m.
    pub path_length: Option<f64>,
    /// Percentages.
    pub success_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    pub d_a: Option<f64>,
    pub d_c: Option<f64>,
    pub d_e: Option<f64>,
    pub d_avg: Option<f64>,
    pub t_a: Option<f64>,
    pub t_c: Option<f64>,
    pub t_e: Option<f64>,
    pub t_avg: Option<f64>,
    pub exceedance: ClassValues,
    pub exceedance_threshold: f64,
    pub zone_model: ZoneModel,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Distance from the robot to the nearest pedestrian of `class` at this step.
pub fn nearest_of_class(row: &StepRow, class: AgentClass) -> Option<f64> {
    row.pedestrians
        .iter()
        .filter(|p| p.class == class)
        .map(|p| p.distance)
        .min_by(f64::total_cmp)
}

fn in_zone_of_class(row: &StepRow, class: AgentClass, model: ZoneModel) -> bool {
    row.pedestrians.iter().any(|p| {
        p.class == class
            && match model {
                ZoneModel::None => false,
                ZoneModel::Static => p.in_static_zone,
                ZoneModel::Dynamic => p.in_dynamic_zone,
            }
    })
}

/// Per-class fraction of steps with the robot closer than `threshold` to the
/// nearest pedestrian of that class.
pub fn compute_exceedance(records: &[EpisodeRecord], threshold: f64) -> ClassValues {
    ClassValues::from_fn(|class| {
        let mut steps = 0usize;
        let mut close = 0usize;
        for rec in records.iter().filter(|r| r.has_class(class)) {
            for row in &rec.rows {
                steps += 1;
                if nearest_of_class(row, class).is_some_and(|d| d < threshold) {
                    close += 1;
                }
            }
        }
        (steps > 0).then(|| close as f64 / steps as f64)
    })
}

/// Mean per-episode time inside a zone of each class; the average field is
/// the mean of the defined classes.
pub fn compute_zone_time(records: &[EpisodeRecord], model: ZoneModel) -> (ClassValues, Option<f64>) {
    let times = ClassValues::from_fn(|class| {
        mean(records.iter().filter(|r| r.has_class(class)).map(|rec| {
            rec.rows
                .iter()
                .filter(|row| in_zone_of_class(row, class, model))
                .count() as f64
                * rec.env.step_dt
        }))
    });
    (times, times.mean_available())
}

/// Per-class mean nearest-pedestrian distance within `window`.
pub fn compute_class_distance(records: &[EpisodeRecord], window: f64) -> ClassValues {
    ClassValues::from_fn(|class| {
        mean(records.iter().filter_map(|rec| {
            mean(
                rec.rows
                    .iter()
                    .filter_map(|row| nearest_of_class(row, class))
                    .filter(|d| *d <= window),
            )
        }))
    })
}

pub fn compute_metrics(records: &[EpisodeRecord], cfg: &MetricsConfig) -> MetricsReport {
    let n = records.len();
    let pct = |cause: TerminationCause| {
        if n == 0 {
            0.0
        } else {
            100.0 * records.iter().filter(|r| r.cause == cause).count() as f64 / n as f64
        }
    };
    let successes = || records.iter().filter(|r| r.cause == TerminationCause::Goal);
    let d = compute_class_distance(records, cfg.distance_window);
    let (t, t_avg) = compute_zone_time(records, cfg.zone_model);
    MetricsReport {
        episodes: n,
        time: mean(successes().map(|r| r.duration)),
        path_length: mean(successes().map(|r| r.path_length)),
        success_rate: pct(TerminationCause::Goal),
        collision_rate: pct(TerminationCause::Collision),
        timeout_rate: pct(TerminationCause::Timeout),
        d_a: d.adult,
        d_c: d.child,
        d_e: d.elder,
        d_avg: d.mean_available(),
        t_a: t.adult,
        t_c: t.child,
        t_e: t.elder,
        t_avg,
        exceedance: compute_exceedance(records, cfg.exceedance_threshold),
        exceedance_threshold: cfg.exceedance_threshold,
        zone_model: cfg.zone_model,
    }
}
