//! Scenario description, TOML file format, validation and random sampling.
//!
//! A scenario file looks like:
//!
//! ```toml
//! version = 1
//! name = "frontal-3"
//! seed = 0
//!
//! [map]
//! width = 20.0
//! height = 15.0
//! boundary = true                 # add the four perimeter walls
//! walls = [[5.0, 0.0, 5.0, 4.0]]  # x1, y1, x2, y2
//! blocks = [[9.0, 9.0, 10.0, 11.0]] # xmin, ymin, xmax, ymax
//!
//! [robot]
//! start = [2.0, 7.5, 0.0]         # x, y, heading
//! goal = [18.0, 7.5]
//!
//! [[peds]]
//! class = "adult"                 # adult | child | elder
//! start = [15.0, 7.0]
//! waypoints = [[3.0, 7.0], [15.0, 7.0]]
//! ```

use std::collections::VecDeque;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Segment, Vec2};
use crate::sim::{AgentClass, MapGeometry, PedestrianState, RobotState, DEFAULT_ROBOT_RADIUS};

use super::curriculum::CurriculumStage;

pub const SCENARIO_VERSION: u32 = 1;
/// Rejection-sampling budget for each placed entity.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("failed to serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unsupported scenario version {0} (expected {SCENARIO_VERSION})")]
    UnsupportedVersion(u32),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("could not place {what} after {attempts} attempts")]
    Placement { what: String, attempts: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub width: f64,
    pub height: f64,
    #[serde(default = "default_true")]
    pub boundary: bool,
    #[serde(default)]
    pub walls: Vec<[f64; 4]>,
    #[serde(default)]
    pub blocks: Vec<[f64; 4]>,
}

fn default_true() -> bool {
    true
}

impl MapSpec {
    pub fn open(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            boundary: true,
            walls: Vec::new(),
            blocks: Vec::new(),
        }
    }

    pub fn to_geometry(&self) -> MapGeometry {
        let mut map = if self.boundary {
            MapGeometry::open(self.width, self.height)
        } else {
            MapGeometry {
                width: self.width,
                height: self.height,
                walls: Vec::new(),
                blocks: Vec::new(),
            }
        };
        map.walls.extend(
            self.walls
                .iter()
                .map(|w| Segment::new(Vec2::new(w[0], w[1]), Vec2::new(w[2], w[3]))),
        );
        map.blocks.extend(
            self.blocks
                .iter()
                .map(|b| Aabb::new(Vec2::new(b[0], b[1]), Vec2::new(b[2], b[3]))),
        );
        map
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    /// x, y, heading.
    pub start: [f64; 3],
    pub goal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedSpec {
    pub class: AgentClass,
    pub start: [f64; 2],
    pub waypoints: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub map: MapSpec,
    pub robot: RobotSpec,
    #[serde(default)]
    pub peds: Vec<PedSpec>,
}

fn v2(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        if s.version != SCENARIO_VERSION {
            return Err(ScenarioError::UnsupportedVersion(s.version));
        }
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        std::fs::write(path, self.to_toml()?).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Load a single file, or every `*.toml` in a directory sorted by name.
    pub fn load_set(path: &Path) -> Result<Vec<Self>, ScenarioError> {
        if path.is_dir() {
            let io = |source| ScenarioError::Io {
                path: path.display().to_string(),
                source,
            };
            let mut files: Vec<_> = std::fs::read_dir(path)
                .map_err(io)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "toml"))
                .collect();
            files.sort();
            files.iter().map(|p| Self::load(p)).collect()
        } else {
            Ok(vec![Self::load(path)?])
        }
    }

    pub fn robot_state(&self) -> RobotState {
        let [x, y, th] = self.robot.start;
        RobotState::new(Vec2::new(x, y), th, v2(self.robot.goal))
    }

    pub fn pedestrians(&self) -> Vec<PedestrianState> {
        self.peds
            .iter()
            .enumerate()
            .map(|(i, p)| {
                PedestrianState::new(
                    i as u32,
                    p.class,
                    v2(p.start),
                    p.waypoints.iter().copied().map(v2).collect(),
                )
            })
            .collect()
    }

    pub fn class_count(&self, class: AgentClass) -> usize {
        self.peds.iter().filter(|p| p.class == class).count()
    }

    /// Check placement, clearances and goal reachability for a robot of
    /// radius `robot_radius`.
    pub fn validate(&self, robot_radius: f64) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.version != SCENARIO_VERSION {
            return Err(ScenarioError::UnsupportedVersion(self.version));
        }
        if !(self.map.width > 0.0 && self.map.height > 0.0) {
            return bad("map dimensions must be positive".into());
        }
        let map = self.map.to_geometry();
        let start = Vec2::new(self.robot.start[0], self.robot.start[1]);
        let goal = v2(self.robot.goal);
        let finite = self.robot.start.iter().chain(&self.robot.goal).all(|v| v.is_finite());
        if !finite {
            return bad("robot start/goal must be finite".into());
        }
        for (what, p) in [("start", start), ("goal", goal)] {
            if !map.in_bounds(p) {
                return bad(format!("robot {what} {p:?} lies outside the map"));
            }
            if map.clearance(p) < robot_radius {
                return bad(format!("robot {what} {p:?} overlaps a wall or block"));
            }
        }
        let mut placed: Vec<(Vec2, f64)> = Vec::new();
        for (i, p) in self.peds.iter().enumerate() {
            let pos = v2(p.start);
            let r = p.class.body_radius();
            if p.waypoints.is_empty() {
                return bad(format!("pedestrian {i} has no waypoints"));
            }
            if !map.in_bounds(pos) || map.clearance(pos) < r {
                return bad(format!("pedestrian {i} spawns outside the map or on a wall"));
            }
            if pos.distance(start) < r + robot_radius {
                return bad(format!("pedestrian {i} spawns overlapping the robot"));
            }
            if placed.iter().any(|(q, rq)| pos.distance(*q) < r + rq) {
                return bad(format!("pedestrian {i} spawns overlapping another pedestrian"));
            }
            placed.push((pos, r));
        }
        if !goal_reachable(&map, start, goal, robot_radius) {
            return bad("goal is not reachable from the start".into());
        }
        Ok(())
    }
}

/// Straight-line check, then a 4-connected search on a coarse grid whose
/// cells are free when their centre keeps `radius` clearance.
pub fn goal_reachable(map: &MapGeometry, start: Vec2, goal: Vec2, radius: f64) -> bool {
    let dist = start.distance(goal);
    let n = (dist / 0.05).ceil().max(1.0) as usize;
    if (0..=n).all(|i| map.clearance(start + (goal - start) * (i as f64 / n as f64)) >= radius) {
        return true;
    }
    let cell = 0.25;
    let nx = (map.width / cell).ceil() as usize;
    let ny = (map.height / cell).ceil() as usize;
    let centre = |ix: usize, iy: usize| Vec2::new((ix as f64 + 0.5) * cell, (iy as f64 + 0.5) * cell);
    let free: Vec<bool> = (0..nx * ny)
        .map(|i| map.clearance(centre(i % nx, i / nx)) >= radius)
        .collect();
    let near = |p: Vec2| -> Vec<usize> {
        (0..nx * ny)
            .filter(|&i| free[i] && centre(i % nx, i / nx).distance(p) <= cell * 1.5)
            .collect()
    };
    let targets = near(goal);
    let mut seen = vec![false; nx * ny];
    let mut queue: VecDeque<usize> = near(start).into_iter().collect();
    for &i in &queue {
        seen[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        if targets.contains(&i) {
            return true;
        }
        let (ix, iy) = (i % nx, i / nx);
        let mut push = |j: usize| {
            if free[j] && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        };
        if ix > 0 {
            push(i - 1);
        }
        if ix + 1 < nx {
            push(i + 1);
        }
        if iy > 0 {
            push(i - nx);
        }
        if iy + 1 < ny {
            push(i + nx);
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomScenarioSettings {
    pub min_goal_distance: f64,
    pub max_goal_distance: f64,
    /// Minimum distance kept from walls for the robot start and goal.
    pub wall_margin: f64,
    /// Minimum spawn distance between a pedestrian and the robot start.
    pub pedestrian_spawn_clearance: f64,
    pub robot_radius: f64,
}

impl Default for RandomScenarioSettings {
    fn default() -> Self {
        Self {
            min_goal_distance: 3.0,
            max_goal_distance: f64::INFINITY,
            wall_margin: 0.8,
            pedestrian_spawn_clearance: 1.5,
            robot_radius: DEFAULT_ROBOT_RADIUS,
        }
    }
}

/// Draw a random scenario on `map` with the stage's pedestrian roster.
/// Every placement is rejection-sampled with [`MAX_PLACEMENT_ATTEMPTS`].
pub fn sample_random_scenario(
    seed: u64,
    stage: &CurriculumStage,
    map: &MapSpec,
    settings: &RandomScenarioSettings,
) -> Result<Scenario, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geom = map.to_geometry();
    let margin = settings.wall_margin.max(settings.robot_radius);

    let uniform_point = |rng: &mut ChaCha8Rng, m: f64| -> Option<Vec2> {
        if map.width <= 2.0 * m || map.height <= 2.0 * m {
            return None;
        }
        Some(Vec2::new(
            rng.random_range(m..map.width - m),
            rng.random_range(m..map.height - m),
        ))
    };
    let place =
        |what: &str, rng: &mut ChaCha8Rng, accept: &dyn Fn(Vec2) -> bool, m: f64| -> Result<Vec2, ScenarioError> {
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                if let Some(p) = uniform_point(rng, m) {
                    if accept(p) {
                        return Ok(p);
                    }
                }
            }
            Err(ScenarioError::Placement {
                what: what.to_string(),
                attempts: MAX_PLACEMENT_ATTEMPTS,
            })
        };

    let start = place("robot start", &mut rng, &|p| geom.clearance(p) >= margin, margin)?;
    let goal = place(
        "goal",
        &mut rng,
        &|p| {
            let d = p.distance(start);
            geom.clearance(p) >= margin
                && d >= settings.min_goal_distance
                && d <= settings.max_goal_distance
                && goal_reachable(&geom, start, p, settings.robot_radius)
        },
        margin,
    )?;
    let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);

    let classes = stage.roster(&mut rng);
    let mut peds: Vec<PedSpec> = Vec::with_capacity(classes.len());
    for (i, class) in classes.into_iter().enumerate() {
        let r = class.body_radius();
        let taken: Vec<(Vec2, f64)> = peds.iter().map(|p| (v2(p.start), p.class.body_radius())).collect();
        let pos = place(
            &format!("pedestrian {i}"),
            &mut rng,
            &|p| {
                geom.clearance(p) >= r + 0.1
                    && p.distance(start) >= settings.pedestrian_spawn_clearance.max(r + settings.robot_radius)
                    && p.distance(goal) >= r + settings.robot_radius
                    && taken.iter().all(|(q, rq)| p.distance(*q) >= r + rq + 0.1)
            },
            r + 0.1,
        )?;
        // first waypoint near the robot's straight route, second anywhere
        let along = start + (goal - start) * rng.random_range(0.2..0.8);
        let lateral = (goal - start).rotate(std::f64::consts::FRAC_PI_2);
        let lateral = lateral * (1.0 / lateral.norm().max(1e-9));
        let w1 = along + lateral * rng.random_range(-2.0..2.0);
        let w1 = Vec2::new(
            w1.x.clamp(r + 0.2, map.width - r - 0.2),
            w1.y.clamp(r + 0.2, map.height - r - 0.2),
        );
        let w2 = place(
            &format!("pedestrian {i} waypoint"),
            &mut rng,
            &|p| geom.clearance(p) >= r + 0.1,
            r + 0.1,
        )?;
        peds.push(PedSpec {
            class,
            start: [pos.x, pos.y],
            waypoints: vec![[w1.x, w1.y], [w2.x, w2.y]],
        });
    }

    Ok(Scenario {
        version: SCENARIO_VERSION,
        name: format!("random-stage{}-seed{seed}", stage.index),
        seed,
        map: map.clone(),
        robot: RobotSpec {
            start: [start.x, start.y, heading],
            goal: [goal.x, goal.y],
        },
        peds,
    })
}

/// Copy of `base` with pedestrian starts and waypoints shifted by up to
/// `jitter` metres per axis, optionally mirrored across the horizontal
/// mid-line. Used to randomise scripted layouts between episodes.
pub fn jitter_scenario(base: &Scenario, seed: u64, jitter: f64, mirror: bool) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flip = mirror && rng.random_bool(0.5);
    let h = base.map.height;
    let fy = |y: f64| if flip { h - y } else { y };
    let mut s = base.clone();
    s.seed = seed;
    s.robot.start[1] = fy(s.robot.start[1]);
    if flip {
        s.robot.start[2] = -s.robot.start[2];
    }
    s.robot.goal[1] = fy(s.robot.goal[1]);
    for w in s.map.walls.iter_mut() {
        w[1] = fy(w[1]);
        w[3] = fy(w[3]);
    }
    for b in s.map.blocks.iter_mut() {
        let (y0, y1) = (fy(b[1]), fy(b[3]));
        b[1] = y0.min(y1);
        b[3] = y0.max(y1);
    }
    for p in s.peds.iter_mut() {
        let r = p.class.body_radius() + 0.1;
        let shift = |pt: &mut [f64; 2], rng: &mut ChaCha8Rng| {
            let (dx, dy) = if jitter > 0.0 {
                (rng.random_range(-jitter..jitter), rng.random_range(-jitter..jitter))
            } else {
                (0.0, 0.0)
            };
            pt[0] = (pt[0] + dx).clamp(r, base.map.width - r);
            pt[1] = (fy(pt[1]) + dy).clamp(r, h - r);
        };
        shift(&mut p.start, &mut rng);
        for w in p.waypoints.iter_mut() {
            shift(w, &mut rng);
        }
    }
    s
}

fn ped(class: AgentClass, start: [f64; 2], waypoints: &[[f64; 2]]) -> PedSpec {
    PedSpec {
        class,
        start,
        waypoints: waypoints.to_vec(),
    }
}

/// Six fixed-start evaluation layouts on a 20 m x 15 m open map: 3, 6 and 9
/// pedestrians crossing the robot's route from the side, then the same
/// counts approaching head-on.
pub fn scripted_library() -> Vec<Scenario> {
    let classes = [AgentClass::Adult, AgentClass::Child, AgentClass::Elder];
    let mut out = Vec::new();
    for (kind, counts) in [("side", [3usize, 6, 9]), ("frontal", [3, 6, 9])] {
        for n in counts {
            let peds = (0..n)
                .map(|i| {
                    let class = classes[i % 3];
                    if kind == "side" {
                        // evenly spread crossings, alternating bottom-up and top-down
                        let x = 5.0 + 10.0 * i as f64 / (n - 1) as f64;
                        let (y0, y1) = if i % 2 == 0 { (1.5, 13.5) } else { (13.5, 1.5) };
                        ped(class, [x, y0], &[[x, y1], [x, y0]])
                    } else {
                        // columns of three walking head-on toward the start
                        let (col, row) = ((i / 3) as f64, (i % 3) as f64);
                        let x = 13.0 + 1.5 * col;
                        let y = 7.5 + 1.6 * (row - 1.0) + 0.4 * (col % 2.0);
                        ped(class, [x, y], &[[2.5, y], [x, y]])
                    }
                })
                .collect();
            out.push(Scenario {
                version: SCENARIO_VERSION,
                name: format!("{kind}-{n}"),
                seed: 0,
                map: MapSpec::open(20.0, 15.0),
                robot: RobotSpec {
                    start: [2.0, 7.5, 0.0],
                    goal: [18.0, 7.5],
                },
                peds,
            });
        }
    }
    out
}

/// A 20 m x 5 m corridor with one adult walking toward the robot in one lane
/// and a slow elder in the other.
pub fn corridor_scenario() -> Scenario {
    Scenario {
        version: SCENARIO_VERSION,
        name: "corridor-adult-elder".into(),
        seed: 0,
        map: MapSpec::open(20.0, 5.0),
        robot: RobotSpec {
            start: [1.5, 2.5, 0.0],
            goal: [18.5, 2.5],
        },
        peds: vec![
            ped(AgentClass::Adult, [13.0, 1.5], &[[1.0, 1.5], [19.0, 1.5]]),
            ped(AgentClass::Elder, [8.0, 3.5], &[[12.0, 3.5], [4.0, 3.5]]),
        ],
    }
}
