//! Batch evaluation, episode records, metrics and plot-data export.

pub mod export;
pub mod metrics;
pub mod record;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::env::{EnvConfig, EnvError, NavEnv, Scenario, ScenarioError, ScenarioSource, TerminationCause};
use crate::learner::{LearnerError, PolicyNetwork};
use crate::rewards::RewardBreakdown;
use crate::sensing::Observation;
use crate::sim::{Action, MAX_ANGULAR_VELOCITY, MAX_LINEAR_VELOCITY};

pub use export::{export_plot_data, read_training_log, PlotInput, PlotKind};
pub use metrics::{
    compute_class_distance, compute_exceedance, compute_metrics, compute_zone_time, ClassValues, MetricsConfig,
    MetricsReport,
};
pub use record::{load_records, save_records, EpisodeRecord, PedestrianRow, StepRow, RECORD_VERSION};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("cannot load policy: {0}")]
    Load(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("record format: {0}")]
    Json(#[from] serde_json::Error),
    #[error("table format: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
    #[error("replay diverged at step {step}: {detail}")]
    ReplayMismatch { step: usize, detail: String },
}

impl EvalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Anything that maps observations to actions.
pub trait Controller {
    fn act(&mut self, obs: &Observation) -> Result<Action, EvalError>;
}

/// Deterministic policy: the squashed mean action.
impl Controller for PolicyNetwork {
    fn act(&mut self, obs: &Observation) -> Result<Action, EvalError> {
        self.act_deterministic(obs).map_err(|e| match e {
            LearnerError::ShapeMismatch(m) => EvalError::Load(m),
            other => EvalError::Learner(other),
        })
    }
}

/// Turn toward the goal, drive once roughly aligned. Ignores obstacles.
#[derive(Debug, Clone, Copy, Default)]
pub struct GoalSeeker;

impl Controller for GoalSeeker {
    fn act(&mut self, obs: &Observation) -> Result<Action, EvalError> {
        let g = obs.goal_in_robot_frame;
        let bearing = g.y.atan2(g.x);
        let w = (2.0 * bearing).clamp(-MAX_ANGULAR_VELOCITY, MAX_ANGULAR_VELOCITY);
        let v = if bearing.abs() < std::f64::consts::FRAC_PI_4 {
            MAX_LINEAR_VELOCITY * bearing.cos()
        } else {
            0.0
        };
        Ok(Action::new(v.clamp(0.0, MAX_LINEAR_VELOCITY), w))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub episodes: usize,
    pub seed: u64,
    pub env: EnvConfig,
    pub metrics: MetricsConfig,
}

/// Seed of evaluation episode `index` (SplitMix64 of the run seed).
pub fn episode_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Run one episode to termination, recording every step.
pub fn run_episode<C: Controller + ?Sized>(
    controller: &mut C,
    scenario: Scenario,
    env_cfg: EnvConfig,
    episode: usize,
    seed: u64,
) -> Result<EpisodeRecord, EvalError> {
    let (mut env, mut obs) = NavEnv::reset(scenario, env_cfg)?;
    let mut rows = Vec::new();
    let mut prev = env.world().robot.position;
    let mut path_length = 0.0;
    loop {
        let action = controller.act(&obs)?;
        let step = env.step(action)?;
        let pos = env.world().robot.position;
        path_length += pos.distance(prev);
        prev = pos;
        rows.push(StepRow::capture(env.world(), step.reward));
        obs = step.observation;
        if step.done {
            break;
        }
    }
    Ok(EpisodeRecord {
        version: RECORD_VERSION,
        episode,
        seed,
        scenario: env.scenario().clone(),
        env: env_cfg,
        cause: env.cause(),
        duration: env.world().sim_time(),
        path_length,
        rows,
    })
}

/// Evaluate `controller` on `cfg.episodes` episodes drawn from `source`,
/// persisting records under `out_dir` when given.
pub fn run_evaluation<C: Controller + ?Sized>(
    controller: &mut C,
    source: &ScenarioSource,
    cfg: &EvalConfig,
    out_dir: Option<&Path>,
) -> Result<(Vec<EpisodeRecord>, MetricsReport), EvalError> {
    source.validate()?;
    let mut records = Vec::with_capacity(cfg.episodes);
    for k in 0..cfg.episodes {
        let seed = episode_seed(cfg.seed, k);
        let scenario = source.episode(k, seed)?;
        records.push(run_episode(controller, scenario, cfg.env, k, seed)?);
    }
    let report = compute_metrics(&records, &cfg.metrics);
    if let Some(dir) = out_dir {
        save_records(dir, &records)?;
    }
    Ok((records, report))
}

/// Re-simulate a record from its scenario and recorded actions and check
/// that every pose, pedestrian position and reward is bit-identical.
pub fn replay(record: &EpisodeRecord) -> Result<(), EvalError> {
    let (mut env, _) = NavEnv::reset(record.scenario.clone(), record.env)?;
    for (k, row) in record.rows.iter().enumerate() {
        let step = env.step(Action::new(row.v_linear, row.v_angular))?;
        let fresh = StepRow::capture(env.world(), step.reward);
        if fresh != *row {
            return Err(EvalError::ReplayMismatch {
                step: k,
                detail: describe_difference(row, &fresh),
            });
        }
        if step.done != (k + 1 == record.rows.len()) {
            return Err(EvalError::ReplayMismatch {
                step: k,
                detail: format!("termination differs (replayed {:?})", step.cause),
            });
        }
    }
    if env.cause() != record.cause && !(record.rows.is_empty() && record.cause == TerminationCause::Running) {
        return Err(EvalError::ReplayMismatch {
            step: record.rows.len(),
            detail: format!("cause {:?} vs recorded {:?}", env.cause(), record.cause),
        });
    }
    Ok(())
}

fn describe_difference(a: &StepRow, b: &StepRow) -> String {
    if (a.x, a.y, a.heading) != (b.x, b.y, b.heading) {
        format!(
            "robot pose ({}, {}, {}) vs ({}, {}, {})",
            a.x, a.y, a.heading, b.x, b.y, b.heading
        )
    } else if a.reward != b.reward {
        let r = |x: &RewardBreakdown| x.total;
        format!("reward {} vs {}", r(&a.reward), r(&b.reward))
    } else {
        "pedestrian state differs".to_string()
    }
}
