//! Simulated 360-beam lidar and the semantic observation handed to policies.

use std::cmp::Ordering;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::geometry::{ray_circle, ray_segment, Aabb, Segment, Vec2};
use crate::sim::World;
use crate::zones::{dynamic_zone_for, ZoneModel};

pub const NUM_BEAMS: usize = 360;
pub const MAX_RANGE: f64 = 3.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    /// Beam `k` points at `2*pi*k/360` in the robot frame.
    pub ranges: Vec<f64>,
    pub max_range: f64,
}

impl LidarScan {
    pub fn empty() -> Self {
        Self {
            ranges: vec![MAX_RANGE; NUM_BEAMS],
            max_range: MAX_RANGE,
        }
    }

    pub fn min_range(&self) -> f64 {
        self.ranges.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn beam_angle(k: usize) -> f64 {
        TAU * k as f64 / NUM_BEAMS as f64
    }
}

/// Cast every beam from the robot centre against walls, block edges and
/// pedestrian discs.
pub fn raycast(world: &World) -> LidarScan {
    let circles: Vec<(Vec2, f64)> = world.pedestrians.iter().map(|p| (p.position, p.radius())).collect();
    scan_from(
        world.robot.position,
        world.robot.heading,
        world.segments(),
        &world.map.blocks,
        &circles,
    )
}

/// Lidar scan of an arbitrary scene. `blocks` only matter for detecting a
/// centre that sits inside one; their edges must already be in `segments`.
/// A beam starting inside an obstacle reads 0 when it points toward that
/// obstacle's centre; the remaining beams ignore it.
pub fn scan_from(
    origin: Vec2,
    heading: f64,
    segments: &[Segment],
    blocks: &[Aabb],
    circles: &[(Vec2, f64)],
) -> LidarScan {
    let reach = MAX_RANGE;
    let near: Vec<(Vec2, f64)> = circles
        .iter()
        .copied()
        .filter(|(c, r)| c.distance(origin) - r <= reach)
        .collect();
    let engulfing: Vec<Vec2> = near
        .iter()
        .filter(|(c, r)| c.distance(origin) < *r)
        .map(|(c, _)| *c)
        .chain(blocks.iter().filter(|b| b.contains(origin)).map(|b| b.center()))
        .collect();

    let ranges = (0..NUM_BEAMS)
        .map(|k| {
            let dir = Vec2::from_angle(heading + LidarScan::beam_angle(k));
            if engulfing.iter().any(|c| (*c - origin).dot(dir) >= 0.0) {
                return 0.0;
            }
            let mut best = reach;
            for seg in segments {
                if let Some(t) = ray_segment(origin, dir, seg) {
                    best = best.min(t);
                }
            }
            for (c, r) in &near {
                if let Some(t) = ray_circle(origin, dir, *c, *r) {
                    best = best.min(t);
                }
            }
            best
        })
        .collect();
    LidarScan {
        ranges,
        max_range: reach,
    }
}

/// Per-pedestrian semantic state, expressed relative to the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticHumanState {
    pub rel_position: Vec2,
    pub body_radius: f64,
    /// Centre-to-centre distance to the robot.
    pub distance: f64,
    pub zone_radius: f64,
    /// Robot radius plus zone radius.
    pub clearance: f64,
    pub class_id: u8,
    pub pedestrian_id: u32,
}

impl SemanticHumanState {
    pub fn features(&self) -> [f64; 7] {
        [
            self.rel_position.x,
            self.rel_position.y,
            self.body_radius,
            self.distance,
            self.zone_radius,
            self.clearance,
            self.class_id as f64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticRobotState {
    pub goal_distance: f64,
    pub position: Vec2,
    pub v_linear: f64,
    pub v_angular: f64,
    pub radius: f64,
}

impl SemanticRobotState {
    pub fn features(&self) -> [f64; 6] {
        [
            self.goal_distance,
            self.position.x,
            self.position.y,
            self.v_linear,
            self.v_angular,
            self.radius,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub lidar: LidarScan,
    /// Sorted farthest-first.
    pub humans: Vec<SemanticHumanState>,
    pub robot: SemanticRobotState,
    pub goal_in_robot_frame: Vec2,
    /// Elapsed time over the episode timeout, in `[0, 1]`.
    pub time_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingConfig {
    pub sensing_radius: f64,
    pub max_humans: usize,
}

impl Default for SensingConfig {
    fn default() -> Self {
        Self {
            sensing_radius: 4.0,
            max_humans: 10,
        }
    }
}

/// Assemble lidar and semantic state. Keeps the `max_humans` nearest
/// pedestrians inside the sensing radius, ordered by descending distance
/// with ties broken by lower class id, then lower pedestrian id.
pub fn build_observation(
    world: &World,
    lidar: LidarScan,
    zone_model: ZoneModel,
    cfg: &SensingConfig,
    episode_timeout: f64,
) -> Observation {
    let robot = &world.robot;
    let mut humans: Vec<SemanticHumanState> = world
        .pedestrians
        .iter()
        .filter_map(|p| {
            let rel = robot.to_robot_frame(p.position);
            let distance = rel.norm();
            if distance > cfg.sensing_radius {
                return None;
            }
            let zone_radius = match zone_model {
                ZoneModel::None => 0.0,
                ZoneModel::Static => p.class.static_zone_radius(),
                ZoneModel::Dynamic => dynamic_zone_for(p).length,
            };
            Some(SemanticHumanState {
                rel_position: rel,
                body_radius: p.radius(),
                distance,
                zone_radius,
                clearance: robot.radius + zone_radius,
                class_id: p.class.id(),
                pedestrian_id: p.id,
            })
        })
        .collect();

    // nearest first to truncate, then reverse into farthest-first
    humans.sort_by(|a, b| {
        nearest_first(a, b)
            .then(b.class_id.cmp(&a.class_id))
            .then(b.pedestrian_id.cmp(&a.pedestrian_id))
    });
    humans.truncate(cfg.max_humans);
    humans.reverse();

    Observation {
        lidar,
        humans,
        robot: SemanticRobotState {
            goal_distance: robot.distance_to_goal(),
            position: robot.position,
            v_linear: robot.v_linear,
            v_angular: robot.v_angular,
            radius: robot.radius,
        },
        goal_in_robot_frame: robot.to_robot_frame(robot.goal),
        time_fraction: (world.sim_time() / episode_timeout).clamp(0.0, 1.0),
    }
}

fn nearest_first(a: &SemanticHumanState, b: &SemanticHumanState) -> Ordering {
    a.distance.total_cmp(&b.distance)
}
