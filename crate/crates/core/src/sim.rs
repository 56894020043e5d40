//! World state, social-force pedestrians and the differential-drive robot.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Aabb, Segment, Vec2};
use crate::sensing;

pub const MAX_LINEAR_VELOCITY: f64 = 0.6;
pub const MAX_ANGULAR_VELOCITY: f64 = PI / 6.0;
pub const DEFAULT_ROBOT_RADIUS: f64 = 0.3;
pub const DEFAULT_STEP_DT: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("action (v={v_linear}, w={v_angular}) outside [0, 0.6] x [-pi/6, pi/6]")]
    ActionOutOfBounds { v_linear: f64, v_angular: f64 },
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("pedestrian {id} spawns overlapping {what}")]
    SpawnOverlap { id: u32, what: &'static str },
    #[error("pedestrian {0} has no waypoints")]
    NoWaypoints(u32),
    #[error("duplicate pedestrian id {0}")]
    DuplicateId(u32),
}

/// Pedestrian behaviour class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentClass {
    Adult = 0,
    Child = 1,
    Elder = 2,
}

impl AgentClass {
    pub const ALL: [AgentClass; 3] = [AgentClass::Adult, AgentClass::Child, AgentClass::Elder];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    /// Free-walking speed in m/s.
    pub fn desired_speed(self) -> f64 {
        match self {
            AgentClass::Adult => 0.6,
            AgentClass::Child => 0.4,
            AgentClass::Elder => 0.1,
        }
    }

    pub fn body_radius(self) -> f64 {
        match self {
            AgentClass::Adult => 0.3,
            AgentClass::Child => 0.2,
            AgentClass::Elder => 0.3,
        }
    }

    /// Radius of the class-specific static safety zone in m.
    pub fn static_zone_radius(self) -> f64 {
        match self {
            AgentClass::Adult => 1.0,
            AgentClass::Child => 1.2,
            AgentClass::Elder => 1.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentClass::Adult => "adult",
            AgentClass::Child => "child",
            AgentClass::Elder => "elder",
        }
    }
}

impl std::fmt::Display for AgentClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianState {
    pub id: u32,
    pub class: AgentClass,
    pub position: Vec2,
    pub velocity: Vec2,
    pub heading: f64,
    /// Waypoints are visited in order and loop.
    pub waypoints: Vec<Vec2>,
    pub next_waypoint: usize,
}

impl PedestrianState {
    pub fn new(id: u32, class: AgentClass, position: Vec2, waypoints: Vec<Vec2>) -> Self {
        let heading = waypoints.first().map(|w| (*w - position).angle()).unwrap_or(0.0);
        Self {
            id,
            class,
            position,
            velocity: Vec2::ZERO,
            heading,
            waypoints,
            next_waypoint: 0,
        }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    pub fn radius(&self) -> f64 {
        self.class.body_radius()
    }

    pub fn target(&self) -> Option<Vec2> {
        self.waypoints.get(self.next_waypoint).copied()
    }
}

/// Commanded twist.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub v_linear: f64,
    pub v_angular: f64,
}

impl Action {
    pub const fn new(v_linear: f64, v_angular: f64) -> Self {
        Self { v_linear, v_angular }
    }

    pub fn is_within_bounds(&self) -> bool {
        (0.0..=MAX_LINEAR_VELOCITY).contains(&self.v_linear)
            && (-MAX_ANGULAR_VELOCITY..=MAX_ANGULAR_VELOCITY).contains(&self.v_angular)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub position: Vec2,
    pub heading: f64,
    pub v_linear: f64,
    pub v_angular: f64,
    pub radius: f64,
    pub goal: Vec2,
}

impl RobotState {
    pub fn new(position: Vec2, heading: f64, goal: Vec2) -> Self {
        Self {
            position,
            heading,
            v_linear: 0.0,
            v_angular: 0.0,
            radius: DEFAULT_ROBOT_RADIUS,
            goal,
        }
    }

    pub fn distance_to_goal(&self) -> f64 {
        self.position.distance(self.goal)
    }

    /// Express a world-frame point in the robot frame.
    pub fn to_robot_frame(&self, p: Vec2) -> Vec2 {
        (p - self.position).rotate(-self.heading)
    }
}

/// Static obstacle layout. The map spans `[0, width] x [0, height]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapGeometry {
    pub width: f64,
    pub height: f64,
    pub walls: Vec<Segment>,
    pub blocks: Vec<Aabb>,
}

impl MapGeometry {
    /// An open rectangle enclosed by four perimeter walls.
    pub fn open(width: f64, height: f64) -> Self {
        let bounds = Aabb::new(Vec2::ZERO, Vec2::new(width, height));
        Self {
            width,
            height,
            walls: bounds.edges().to_vec(),
            blocks: Vec::new(),
        }
    }

    /// Every wall segment plus the edges of every block.
    pub fn segments(&self) -> Vec<Segment> {
        let mut out = self.walls.clone();
        for b in &self.blocks {
            out.extend_from_slice(&b.edges());
        }
        out
    }

    pub fn in_bounds(&self, p: Vec2) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    /// Distance from `p` to the nearest static obstacle surface; zero when
    /// inside a block.
    pub fn clearance(&self, p: Vec2) -> f64 {
        let walls = self.walls.iter().map(|w| w.distance_to(p));
        let blocks = self.blocks.iter().map(|b| b.distance_to(p));
        walls.chain(blocks).fold(f64::INFINITY, f64::min)
    }
}

/// Social-force parameters shared by all pedestrians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocialForceParams {
    /// Relaxation time of the goal-attraction term, s.
    pub relaxation_time: f64,
    /// Repulsion strength, m/s^2.
    pub repulsion_strength: f64,
    /// Repulsion range, m.
    pub repulsion_range: f64,
    pub waypoint_radius: f64,
    /// Speeds are clamped to this multiple of the class desired speed.
    pub speed_cap_factor: f64,
    pub react_to_robot: bool,
}

impl Default for SocialForceParams {
    fn default() -> Self {
        Self {
            relaxation_time: 0.5,
            repulsion_strength: 2.0,
            repulsion_range: 0.35,
            waypoint_radius: 0.3,
            speed_cap_factor: 1.3,
            react_to_robot: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub map: MapGeometry,
    segments: Vec<Segment>,
    pub pedestrians: Vec<PedestrianState>,
    pub robot: RobotState,
    pub step_dt: f64,
    steps: u64,
    pub sfm: SocialForceParams,
}

impl World {
    pub fn new(
        map: MapGeometry,
        robot: RobotState,
        pedestrians: Vec<PedestrianState>,
        step_dt: f64,
    ) -> Result<Self, SimError> {
        if !(step_dt > 0.0 && step_dt.is_finite()) {
            return Err(SimError::InvalidTimeStep(step_dt));
        }
        let mut ids = std::collections::BTreeSet::new();
        for p in &pedestrians {
            if !ids.insert(p.id) {
                return Err(SimError::DuplicateId(p.id));
            }
            if p.waypoints.is_empty() {
                return Err(SimError::NoWaypoints(p.id));
            }
            if p.position.distance(robot.position) < p.radius() + robot.radius {
                return Err(SimError::SpawnOverlap {
                    id: p.id,
                    what: "the robot",
                });
            }
            if map.clearance(p.position) < p.radius() {
                return Err(SimError::SpawnOverlap {
                    id: p.id,
                    what: "a wall",
                });
            }
        }
        let segments = map.segments();
        Ok(Self {
            map,
            segments,
            pedestrians,
            robot,
            step_dt,
            steps: 0,
            sfm: SocialForceParams::default(),
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Elapsed simulated time; always `steps * step_dt`.
    pub fn sim_time(&self) -> f64 {
        self.steps as f64 * self.step_dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Advance pedestrians, then the robot, then the clock by one `step_dt`.
    pub fn step(&mut self, action: Action) -> Result<(), SimError> {
        let dt = self.step_dt;
        self.step_pedestrians(dt)?;
        self.step_robot(action, dt)?;
        self.steps += 1;
        Ok(())
    }

    /// Social-force update of every pedestrian. Forces are evaluated on the
    /// pre-step snapshot, then velocities and positions are integrated with
    /// semi-implicit Euler.
    pub fn step_pedestrians(&mut self, dt: f64) -> Result<(), SimError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidTimeStep(dt));
        }
        let p = self.sfm;
        let mut accels = Vec::with_capacity(self.pedestrians.len());
        for (i, ped) in self.pedestrians.iter().enumerate() {
            let target = ped.target().ok_or(SimError::NoWaypoints(ped.id))?;
            let to_goal = target - ped.position;
            let dist = to_goal.norm();
            let desired = if dist > 1e-9 {
                to_goal * (ped.class.desired_speed() / dist)
            } else {
                Vec2::ZERO
            };
            let mut force = (desired - ped.velocity) * (1.0 / p.relaxation_time);

            for (j, other) in self.pedestrians.iter().enumerate() {
                if i == j {
                    continue;
                }
                force +=
                    repulsion(ped.position, other.position, ped.radius() + other.radius(), &p).ok_or_else(|| {
                        SimError::Degenerate(format!("pedestrians {} and {} share a position", ped.id, other.id))
                    })?;
            }
            if p.react_to_robot {
                force += repulsion(ped.position, self.robot.position, ped.radius() + self.robot.radius, &p)
                    .ok_or_else(|| SimError::Degenerate(format!("pedestrian {} sits on the robot", ped.id)))?;
            }
            for seg in &self.segments {
                let closest = seg.closest_point(ped.position);
                force += repulsion(ped.position, closest, ped.radius(), &p)
                    .ok_or_else(|| SimError::Degenerate(format!("pedestrian {} lies on a wall", ped.id)))?;
            }
            if !force.is_finite() {
                return Err(SimError::Degenerate(format!(
                    "non-finite force on pedestrian {}",
                    ped.id
                )));
            }
            accels.push(force);
        }

        for (ped, accel) in self.pedestrians.iter_mut().zip(accels) {
            let mut v = ped.velocity + accel * dt;
            let cap = p.speed_cap_factor * ped.class.desired_speed();
            let speed = v.norm();
            if speed > cap {
                v = v * (cap / speed);
            }
            ped.velocity = v;
            ped.position += v * dt;
            if v.norm() > 1e-9 {
                ped.heading = v.angle();
            }
            if let Some(t) = ped.target() {
                if ped.position.distance(t) < p.waypoint_radius {
                    ped.next_waypoint = (ped.next_waypoint + 1) % ped.waypoints.len();
                }
            }
        }
        Ok(())
    }

    /// Unicycle update: heading first, then translation along the new heading.
    /// Out-of-bounds actions are rejected, never clamped.
    pub fn step_robot(&mut self, action: Action, dt: f64) -> Result<(), SimError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidTimeStep(dt));
        }
        if !action.is_within_bounds() {
            return Err(SimError::ActionOutOfBounds {
                v_linear: action.v_linear,
                v_angular: action.v_angular,
            });
        }
        let r = &mut self.robot;
        r.heading = wrap_angle(r.heading + action.v_angular * dt);
        r.position += Vec2::from_angle(r.heading) * (action.v_linear * dt);
        r.v_linear = action.v_linear;
        r.v_angular = action.v_angular;
        Ok(())
    }
}

/// Exponential repulsion on an agent at `at` from a source at `from`, with
/// contact distance `contact`. `None` when the two points coincide.
fn repulsion(at: Vec2, from: Vec2, contact: f64, p: &SocialForceParams) -> Option<Vec2> {
    let diff = at - from;
    let d = diff.norm();
    if d < 1e-12 {
        return None;
    }
    let mag = p.repulsion_strength * ((contact - d) / p.repulsion_range).exp();
    Some(diff * (mag / d))
}

/// True iff the current scan reports an obstacle closer than the robot radius.
pub fn check_collision(world: &World) -> bool {
    let scan = sensing::raycast(world);
    scan.min_range() < world.robot.radius
}
