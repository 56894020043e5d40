//! Base, static-zone and dynamic-zone reward systems with per-term breakdown.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensing::{LidarScan, Observation};
use crate::sim::World;
use crate::zones::{in_dynamic_zone, ZoneModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("dynamic zone length {length} does not exceed body radius {body}")]
    DegenerateZone { length: f64, body: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum RewardSystem {
    /// Success, collision and progress terms only.
    #[default]
    #[serde(rename = "raw")]
    Raw,
    /// Base terms plus the static-zone penalty.
    #[serde(rename = "sz")]
    StaticZone,
    /// Base terms plus the dynamic-zone penalty.
    #[serde(rename = "dz")]
    DynamicZone,
}

impl RewardSystem {
    /// The zone model whose penalties this system charges.
    pub fn zone_model(self) -> ZoneModel {
        match self {
            RewardSystem::Raw => ZoneModel::None,
            RewardSystem::StaticZone => ZoneModel::Static,
            RewardSystem::DynamicZone => ZoneModel::Dynamic,
        }
    }
}

impl std::str::FromStr for RewardSystem {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(RewardSystem::Raw),
            "sz" => Ok(RewardSystem::StaticZone),
            "dz" => Ok(RewardSystem::DynamicZone),
            other => Err(format!("unknown reward system `{other}` (raw|sz|dz)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub arrival: f64,
    pub collision: f64,
    /// Progress reward is `progress_scale * e^(1 - t)` with `t` in seconds.
    pub progress_scale: f64,
    pub stationary: f64,
    pub retreat: f64,
    pub static_zone_gain: f64,
    pub dynamic_zone_contact: f64,
    pub goal_radius: f64,
    /// Progress magnitudes at or below this count as standing still, m.
    pub progress_tolerance: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            arrival: 2.0,
            collision: -4.0,
            progress_scale: 0.018,
            stationary: -0.03,
            retreat: -0.14,
            static_zone_gain: -0.08,
            dynamic_zone_contact: 0.15,
            goal_radius: 0.3,
            progress_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub success: f64,
    pub collision: f64,
    pub progress: f64,
    pub static_zone: f64,
    pub dynamic_zone: f64,
    pub total: f64,
}

impl RewardBreakdown {
    /// Total of the terms shared by every reward system.
    pub fn base(&self) -> f64 {
        self.success + self.collision + self.progress
    }
}

pub fn reward_success(cfg: &RewardConfig, goal_distance: f64) -> f64 {
    if goal_distance < cfg.goal_radius {
        cfg.arrival
    } else {
        0.0
    }
}

pub fn reward_collision(cfg: &RewardConfig, scan: &LidarScan, robot_radius: f64) -> f64 {
    if scan.min_range() < robot_radius {
        cfg.collision
    } else {
        0.0
    }
}

pub fn reward_progress(cfg: &RewardConfig, prev_goal_distance: f64, goal_distance: f64, t: f64) -> f64 {
    let delta = prev_goal_distance - goal_distance;
    if delta.abs() <= cfg.progress_tolerance {
        cfg.stationary
    } else if delta > 0.0 {
        cfg.progress_scale * (1.0 - t).exp()
    } else {
        cfg.retreat
    }
}

/// Penalty for one pedestrian whose static zone of radius `zone_radius`
/// contains the robot centre at distance `distance`. The boundary itself is
/// penalised, so the penalty runs from `gain * e` at the centre to `gain`.
pub fn reward_static_zone(cfg: &RewardConfig, distance: f64, zone_radius: f64) -> f64 {
    if distance <= zone_radius {
        cfg.static_zone_gain * (1.0 - distance / zone_radius).exp()
    } else {
        0.0
    }
}

/// Penalty for one pedestrian, linear in surface clearance: `-contact` at
/// touching distance, 0 on the zone boundary `length - body_radius`.
pub fn reward_dynamic_zone(
    cfg: &RewardConfig,
    clearance: f64,
    zone_length: f64,
    body_radius: f64,
    inside: bool,
) -> Result<f64, RewardError> {
    if !inside {
        return Ok(0.0);
    }
    let span = zone_length - body_radius;
    if span <= 0.0 {
        return Err(RewardError::DegenerateZone {
            length: zone_length,
            body: body_radius,
        });
    }
    let c = cfg.dynamic_zone_contact;
    Ok(-(clearance * (-c / span) + c))
}

/// Reward for the state reached by the last step. Elapsed time is taken from
/// the world clock. A collision suppresses the arrival bonus.
pub fn reward_total(
    cfg: &RewardConfig,
    world: &World,
    obs: &Observation,
    prev_goal_distance: f64,
    system: RewardSystem,
) -> Result<RewardBreakdown, RewardError> {
    let robot = &world.robot;
    let goal_distance = robot.distance_to_goal();
    let collision = reward_collision(cfg, &obs.lidar, robot.radius);
    let success = if collision != 0.0 {
        0.0
    } else {
        reward_success(cfg, goal_distance)
    };
    let progress = reward_progress(cfg, prev_goal_distance, goal_distance, world.sim_time());

    let mut static_zone = 0.0;
    let mut dynamic_zone = 0.0;
    match system {
        RewardSystem::Raw => {}
        RewardSystem::StaticZone => {
            for p in &world.pedestrians {
                let d = robot.position.distance(p.position);
                static_zone += reward_static_zone(cfg, d, p.class.static_zone_radius());
            }
        }
        RewardSystem::DynamicZone => {
            for p in &world.pedestrians {
                let check = in_dynamic_zone(robot, p);
                dynamic_zone += reward_dynamic_zone(cfg, check.clearance, check.zone.length, p.radius(), check.inside)?;
            }
        }
    }
    Ok(RewardBreakdown {
        success,
        collision,
        progress,
        static_zone,
        dynamic_zone,
        total: success + collision + progress + static_zone + dynamic_zone,
    })
}
