//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations are exposed:
//! * [`zone_outline`]: polygon of a pedestrian's dynamic safety zone;
//! * [`zone_penalty_profile`]: static and dynamic zone penalties along a ray;
//! * [`DemoSim`]: a scripted crowd scene driven by the straight-line goal
//!   seeker, with lidar, per-step rewards and zone membership.

use std::f64::consts::PI;

use wasm_bindgen::prelude::*;

use crowdnav::env::{corridor_scenario, scripted_library, EnvConfig, NavEnv, Scenario};
use crowdnav::eval::{Controller, GoalSeeker};
use crowdnav::rewards::{reward_dynamic_zone, reward_static_zone, RewardConfig, RewardSystem};
use crowdnav::sensing::Observation;
use crowdnav::sim::AgentClass;
use crowdnav::zones::{in_dynamic_zone, DynamicZone, ZoneModel};
use crowdnav::Vec2;

fn class_from(name: &str) -> Result<AgentClass, JsError> {
    AgentClass::ALL
        .into_iter()
        .find(|c| c.name() == name)
        .ok_or_else(|| JsError::new(&format!("unknown class `{name}`")))
}

/// Dynamic zone of a pedestrian of `class` walking at `speed` along +x from
/// the origin, as a flat `[x0, y0, x1, y1, ...]` polygon with `samples`
/// points on the arc (the apex is included for sectors).
#[wasm_bindgen]
pub fn zone_outline(class: &str, speed: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    let c = class_from(class)?;
    let zone = DynamicZone::new(c.static_zone_radius(), speed.max(0.0), 0.0);
    Ok(outline_points(&zone, samples.max(3)))
}

fn outline_points(zone: &DynamicZone, samples: usize) -> Vec<f64> {
    let mut pts = Vec::with_capacity(2 * samples + 2);
    let (from, span) = if zone.is_full_disc() {
        (0.0, 2.0 * PI)
    } else {
        pts.extend([0.0, 0.0]);
        (zone.orientation - zone.angle / 2.0, zone.angle)
    };
    for k in 0..samples {
        let a = from + span * k as f64 / (samples - 1) as f64;
        pts.push(zone.length * a.cos());
        pts.push(zone.length * a.sin());
    }
    pts
}

/// Zone penalties for a robot at distance `d` straight ahead of a pedestrian
/// of `class` walking at `speed`, for `n` distances in `[0, max_distance]`.
/// Returns `[d, static, dynamic]` triples, flattened.
#[wasm_bindgen]
pub fn zone_penalty_profile(class: &str, speed: f64, max_distance: f64, n: usize) -> Result<Vec<f64>, JsError> {
    let c = class_from(class)?;
    let cfg = RewardConfig::default();
    let zone = DynamicZone::new(c.static_zone_radius(), speed.max(0.0), 0.0);
    let robot_radius = crowdnav::sim::DEFAULT_ROBOT_RADIUS;
    let n = n.max(2);
    let mut out = Vec::with_capacity(3 * n);
    for k in 0..n {
        let d = max_distance * k as f64 / (n - 1) as f64;
        let sz = reward_static_zone(&cfg, d, c.static_zone_radius());
        let clearance = (d - c.body_radius() - robot_radius).max(0.0);
        let inside = clearance < zone.length - c.body_radius();
        let dz = reward_dynamic_zone(&cfg, clearance, zone.length, c.body_radius(), inside)
            .map_err(|e| JsError::new(&e.to_string()))?;
        out.extend([d, sz, dz]);
    }
    Ok(out)
}

/// A running scripted scene.
#[wasm_bindgen]
pub struct DemoSim {
    env: NavEnv,
    obs: Observation,
    last_reward: f64,
    total_reward: f64,
}

/// Names accepted by [`DemoSim::new`].
#[wasm_bindgen]
pub fn scenario_names() -> Vec<String> {
    all_scenarios().into_iter().map(|s| s.name).collect()
}

fn all_scenarios() -> Vec<Scenario> {
    let mut v = scripted_library();
    v.push(corridor_scenario());
    v
}

#[wasm_bindgen]
impl DemoSim {
    /// `zone` is `none`, `static` or `dynamic`; it selects both the
    /// observation zone model and the matching reward system.
    #[wasm_bindgen(constructor)]
    pub fn new(scenario: &str, zone: &str) -> Result<DemoSim, JsError> {
        let zone: ZoneModel = zone
            .parse()
            .map_err(|_| JsError::new("zone must be none, static or dynamic"))?;
        let system = match zone {
            ZoneModel::None => RewardSystem::Raw,
            ZoneModel::Static => RewardSystem::StaticZone,
            ZoneModel::Dynamic => RewardSystem::DynamicZone,
        };
        let s = all_scenarios()
            .into_iter()
            .find(|s| s.name == scenario)
            .ok_or_else(|| JsError::new(&format!("unknown scenario `{scenario}`")))?;
        let (env, obs) = NavEnv::reset(s, EnvConfig::new(zone, system)).map_err(|e| JsError::new(&e.to_string()))?;
        Ok(DemoSim {
            env,
            obs,
            last_reward: 0.0,
            total_reward: 0.0,
        })
    }

    /// Advance one step; returns false once the episode has ended.
    pub fn step(&mut self) -> Result<bool, JsError> {
        if self.env.is_done() {
            return Ok(false);
        }
        let action = GoalSeeker.act(&self.obs).map_err(|e| JsError::new(&e.to_string()))?;
        let r = self.env.step(action).map_err(|e| JsError::new(&e.to_string()))?;
        self.last_reward = r.reward.total;
        self.total_reward += r.reward.total;
        self.obs = r.observation;
        Ok(!r.done)
    }

    pub fn map_width(&self) -> f64 {
        self.env.scenario().map.width
    }

    pub fn map_height(&self) -> f64 {
        self.env.scenario().map.height
    }

    /// `[x, y, heading, radius, goal_x, goal_y]`.
    pub fn robot(&self) -> Vec<f64> {
        let r = &self.env.world().robot;
        vec![r.position.x, r.position.y, r.heading, r.radius, r.goal.x, r.goal.y]
    }

    /// Per pedestrian: `[x, y, vx, vy, radius, class_id, in_dynamic_zone]`.
    pub fn pedestrians(&self) -> Vec<f64> {
        let w = self.env.world();
        w.pedestrians
            .iter()
            .flat_map(|p| {
                let inside = in_dynamic_zone(&w.robot, p).inside;
                [
                    p.position.x,
                    p.position.y,
                    p.velocity.x,
                    p.velocity.y,
                    p.radius(),
                    p.class.id() as f64,
                    if inside { 1.0 } else { 0.0 },
                ]
            })
            .collect()
    }

    /// Dynamic zone polygon of pedestrian `index` in world coordinates.
    pub fn pedestrian_zone(&self, index: usize, samples: usize) -> Vec<f64> {
        let Some(p) = self.env.world().pedestrians.get(index) else {
            return Vec::new();
        };
        let zone = crowdnav::zones::dynamic_zone_for(p);
        outline_points(&zone, samples.max(3))
            .chunks(2)
            .flat_map(|xy| {
                let v = Vec2::new(xy[0], xy[1]);
                [p.position.x + v.x, p.position.y + v.y]
            })
            .collect()
    }

    /// Latest lidar ranges, one per degree.
    pub fn lidar(&self) -> Vec<f64> {
        self.obs.lidar.ranges.clone()
    }

    /// Map wall segments, flattened `[x1, y1, x2, y2, ...]`.
    pub fn walls(&self) -> Vec<f64> {
        self.env
            .world()
            .segments()
            .iter()
            .flat_map(|s| [s.a.x, s.a.y, s.b.x, s.b.y])
            .collect()
    }

    pub fn time(&self) -> f64 {
        self.env.world().sim_time()
    }

    pub fn last_reward(&self) -> f64 {
        self.last_reward
    }

    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }

    /// `running`, `goal`, `collision` or `timeout`.
    pub fn status(&self) -> String {
        format!("{:?}", self.env.cause()).to_lowercase()
    }
}
