//! Normalised network inputs derived from an [`Observation`].

use serde::{Deserialize, Serialize};

use crate::sensing::Observation;
use crate::sim::{MAX_ANGULAR_VELOCITY, MAX_LINEAR_VELOCITY};

/// Per-human recurrent input: 7 semantic human values followed by 6 robot
/// values.
pub const HUMAN_FEATURES: usize = 13;
/// Goal in robot frame as (distance, bearing) and normalised episode time.
pub const EXTRA_FEATURES: usize = 3;
/// Distances are divided by this many metres.
pub const DISTANCE_SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    /// Farthest human first, as in the observation.
    pub humans: Vec<[f64; HUMAN_FEATURES]>,
    pub lidar: Vec<f64>,
    pub extra: [f64; EXTRA_FEATURES],
}

pub fn encode(obs: &Observation) -> Features {
    let r = &obs.robot;
    let robot = [
        r.goal_distance / DISTANCE_SCALE,
        r.position.x / DISTANCE_SCALE,
        r.position.y / DISTANCE_SCALE,
        r.v_linear / MAX_LINEAR_VELOCITY,
        r.v_angular / MAX_ANGULAR_VELOCITY,
        r.radius / DISTANCE_SCALE,
    ];
    let humans = obs
        .humans
        .iter()
        .map(|h| {
            let mut f = [0.0; HUMAN_FEATURES];
            f[0] = h.rel_position.x / DISTANCE_SCALE;
            f[1] = h.rel_position.y / DISTANCE_SCALE;
            f[2] = h.body_radius / DISTANCE_SCALE;
            f[3] = h.distance / DISTANCE_SCALE;
            f[4] = h.zone_radius / DISTANCE_SCALE;
            f[5] = h.clearance / DISTANCE_SCALE;
            f[6] = h.class_id as f64 / 2.0;
            f[7..].copy_from_slice(&robot);
            f
        })
        .collect();
    let max = obs.lidar.max_range;
    Features {
        humans,
        lidar: obs.lidar.ranges.iter().map(|d| d / max).collect(),
        extra: [
            obs.goal_in_robot_frame.norm() / DISTANCE_SCALE,
            goal_bearing(obs) / std::f64::consts::PI,
            obs.time_fraction,
        ],
    }
}

/// Bearing of the goal in the robot frame, radians in (-pi, pi]; zero when
/// the robot sits on the goal.
fn goal_bearing(obs: &Observation) -> f64 {
    let g = obs.goal_in_robot_frame;
    if g.norm() < 1e-12 {
        0.0
    } else {
        g.y.atan2(g.x)
    }
}
