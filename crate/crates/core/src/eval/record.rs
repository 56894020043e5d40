//! Per-episode trajectory records and their on-disk layout: one gzip
//! compressed JSON file per episode plus an `index.json` manifest.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::env::{EnvConfig, Scenario, TerminationCause};
use crate::rewards::RewardBreakdown;
use crate::sim::{AgentClass, World};
use crate::zones::{in_dynamic_zone, in_static_zone};

pub const RECORD_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "index.json";

/// One pedestrian's relation to the robot after a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedestrianRow {
    pub id: u32,
    pub class: AgentClass,
    pub x: f64,
    pub y: f64,
    /// Centre-to-centre distance to the robot, m.
    pub distance: f64,
    pub in_static_zone: bool,
    pub in_dynamic_zone: bool,
}

/// State after one executed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    /// Simulated time after the step, s.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v_linear: f64,
    pub v_angular: f64,
    pub reward: RewardBreakdown,
    pub pedestrians: Vec<PedestrianRow>,
}

impl StepRow {
    pub fn capture(world: &World, reward: RewardBreakdown) -> Self {
        let r = &world.robot;
        Self {
            t: world.sim_time(),
            x: r.position.x,
            y: r.position.y,
            heading: r.heading,
            v_linear: r.v_linear,
            v_angular: r.v_angular,
            reward,
            pedestrians: world
                .pedestrians
                .iter()
                .map(|p| PedestrianRow {
                    id: p.id,
                    class: p.class,
                    x: p.position.x,
                    y: p.position.y,
                    distance: r.position.distance(p.position),
                    in_static_zone: in_static_zone(r, p),
                    in_dynamic_zone: in_dynamic_zone(r, p).inside,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub version: u32,
    pub episode: usize,
    /// Seed the episode's scenario was generated from.
    pub seed: u64,
    pub scenario: Scenario,
    /// Environment configuration the episode ran under.
    pub env: EnvConfig,
    pub rows: Vec<StepRow>,
    pub cause: TerminationCause,
    /// Simulated duration, s.
    pub duration: f64,
    /// Sum of robot displacements from the start pose, m.
    pub path_length: f64,
}

impl EpisodeRecord {
    /// Recompute the path length from the start pose and the rows.
    pub fn measured_path_length(&self) -> f64 {
        let [mut px, mut py, _] = self.scenario.robot.start;
        let mut total = 0.0;
        for r in &self.rows {
            total += (r.x - px).hypot(r.y - py);
            px = r.x;
            py = r.y;
        }
        total
    }

    pub fn has_class(&self, class: AgentClass) -> bool {
        self.scenario.class_count(class) > 0
    }

    pub fn file_name(&self) -> String {
        format!("episode_{:05}.json.gz", self.episode)
    }

    pub fn write_gz(&self, path: &Path) -> Result<(), EvalError> {
        let file = File::create(path).map_err(|e| EvalError::io(path, e))?;
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        serde_json::to_writer(&mut enc, self)?;
        enc.finish()
            .and_then(|mut w| w.flush())
            .map_err(|e| EvalError::io(path, e))
    }

    pub fn read_gz(path: &Path) -> Result<Self, EvalError> {
        let file = File::open(path).map_err(|e| EvalError::io(path, e))?;
        let rec: Self = serde_json::from_reader(GzDecoder::new(BufReader::new(file)))?;
        if rec.version != RECORD_VERSION {
            return Err(EvalError::Format(format!(
                "{}: unsupported record version {}",
                path.display(),
                rec.version
            )));
        }
        Ok(rec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub episode: usize,
    pub file: String,
    pub scenario: String,
    pub seed: u64,
    pub cause: TerminationCause,
    pub duration: f64,
    pub path_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub episodes: Vec<ManifestEntry>,
}

/// Write every record plus the manifest into `dir` (created if missing).
pub fn save_records(dir: &Path, records: &[EpisodeRecord]) -> Result<PathBuf, EvalError> {
    fs::create_dir_all(dir).map_err(|e| EvalError::io(dir, e))?;
    let mut episodes = Vec::with_capacity(records.len());
    for rec in records {
        let file = rec.file_name();
        rec.write_gz(&dir.join(&file))?;
        episodes.push(ManifestEntry {
            episode: rec.episode,
            file,
            scenario: rec.scenario.name.clone(),
            seed: rec.seed,
            cause: rec.cause,
            duration: rec.duration,
            path_length: rec.path_length,
        });
    }
    let manifest = Manifest {
        version: RECORD_VERSION,
        episodes,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text).map_err(|e| EvalError::io(&path, e))?;
    Ok(path)
}

/// Load all records listed in `dir/index.json`, in manifest order.
pub fn load_records(dir: &Path) -> Result<Vec<EpisodeRecord>, EvalError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| EvalError::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    manifest
        .episodes
        .iter()
        .map(|e| EpisodeRecord::read_gz(&dir.join(&e.file)))
        .collect()
}
