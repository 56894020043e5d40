//! Episode engine: reset from a scenario, step with a twist, check the task
//! constraints in the order collision, goal, timeout.

pub mod curriculum;
pub mod scenario;
pub mod source;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rewards::{reward_total, RewardBreakdown, RewardConfig, RewardError, RewardSystem};
use crate::sensing::{build_observation, raycast, Observation, SensingConfig};
use crate::sim::{Action, SimError, World, DEFAULT_ROBOT_RADIUS, DEFAULT_STEP_DT};
use crate::zones::ZoneModel;

pub use curriculum::{curriculum_update, Curriculum, CurriculumSchedule, CurriculumStage};
pub use scenario::{
    corridor_scenario, jitter_scenario, sample_random_scenario, scripted_library, MapSpec, PedSpec,
    RandomScenarioSettings, RobotSpec, Scenario, ScenarioError,
};
pub use source::ScenarioSource;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("step called on a finished episode")]
    EpisodeFinished,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskConstraints {
    pub goal_radius: f64,
    pub robot_radius: f64,
    /// Source of the zone radius reported in observations.
    pub zone_model: ZoneModel,
    /// Episode horizon in simulated seconds.
    pub timeout: f64,
}

impl Default for TaskConstraints {
    fn default() -> Self {
        Self {
            goal_radius: 0.3,
            robot_radius: DEFAULT_ROBOT_RADIUS,
            zone_model: ZoneModel::None,
            timeout: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminationCause {
    Running,
    Goal,
    Collision,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub cause: TerminationCause,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub constraints: TaskConstraints,
    pub reward_system: RewardSystem,
    pub reward: RewardConfig,
    pub sensing: SensingConfig,
    pub step_dt: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            constraints: TaskConstraints::default(),
            reward_system: RewardSystem::Raw,
            reward: RewardConfig::default(),
            sensing: SensingConfig::default(),
            step_dt: DEFAULT_STEP_DT,
        }
    }
}

impl EnvConfig {
    pub fn new(zone_model: ZoneModel, reward_system: RewardSystem) -> Self {
        let mut cfg = Self::default();
        cfg.constraints.zone_model = zone_model;
        cfg.reward_system = reward_system;
        cfg
    }
}

/// One running episode.
#[derive(Debug, Clone)]
pub struct NavEnv {
    cfg: EnvConfig,
    scenario: Scenario,
    world: World,
    prev_goal_distance: f64,
    cause: TerminationCause,
}

impl NavEnv {
    /// Build the world for `scenario` and return the initial observation.
    pub fn reset(scenario: Scenario, cfg: EnvConfig) -> Result<(Self, Observation), EnvError> {
        scenario.validate(cfg.constraints.robot_radius)?;
        let mut robot = scenario.robot_state();
        robot.radius = cfg.constraints.robot_radius;
        let world = World::new(scenario.map.to_geometry(), robot, scenario.pedestrians(), cfg.step_dt)?;
        let prev_goal_distance = world.robot.distance_to_goal();
        let env = Self {
            cfg,
            scenario,
            world,
            prev_goal_distance,
            cause: TerminationCause::Running,
        };
        let obs = env.observe();
        Ok((env, obs))
    }

    pub fn observe(&self) -> Observation {
        build_observation(
            &self.world,
            raycast(&self.world),
            self.cfg.constraints.zone_model,
            &self.cfg.sensing,
            self.cfg.constraints.timeout,
        )
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if self.cause != TerminationCause::Running {
            return Err(EnvError::EpisodeFinished);
        }
        self.world.step(action)?;
        let observation = self.observe();
        let reward = reward_total(
            &self.cfg.reward,
            &self.world,
            &observation,
            self.prev_goal_distance,
            self.cfg.reward_system,
        )?;
        self.prev_goal_distance = self.world.robot.distance_to_goal();

        let c = &self.cfg.constraints;
        self.cause = if observation.lidar.min_range() < c.robot_radius {
            TerminationCause::Collision
        } else if self.prev_goal_distance < c.goal_radius {
            TerminationCause::Goal
        } else if self.world.sim_time() >= c.timeout - 1e-9 {
            TerminationCause::Timeout
        } else {
            TerminationCause::Running
        };
        Ok(StepResult {
            observation,
            reward,
            done: self.cause != TerminationCause::Running,
            cause: self.cause,
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn cause(&self) -> TerminationCause {
        self.cause
    }

    pub fn is_done(&self) -> bool {
        self.cause != TerminationCause::Running
    }
}
