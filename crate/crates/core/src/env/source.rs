//! Where episodes come from: fixed lists, perturbed scripted layouts, or
//! random layouts (optionally staged by a curriculum).

use rand::Rng;

use super::curriculum::{CurriculumSchedule, CurriculumStage};
use super::scenario::{
    jitter_scenario, sample_random_scenario, MapSpec, RandomScenarioSettings, Scenario, ScenarioError,
};

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    /// A fixed list of scenarios.
    Fixed(Vec<Scenario>),
    /// Scripted layouts perturbed by up to `jitter` metres and mirrored with
    /// probability one half when `mirror` is set.
    Jittered {
        base: Vec<Scenario>,
        jitter: f64,
        mirror: bool,
    },
    /// Random layouts at a fixed stage.
    Random {
        map: MapSpec,
        stage: CurriculumStage,
        settings: RandomScenarioSettings,
    },
    /// Random layouts whose crowd size follows the curriculum.
    Curriculum {
        map: MapSpec,
        schedule: CurriculumSchedule,
        settings: RandomScenarioSettings,
    },
}

impl ScenarioSource {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        match self {
            Self::Fixed(v) | Self::Jittered { base: v, .. } if v.is_empty() => {
                Err(ScenarioError::Invalid("scenario set is empty".into()))
            }
            Self::Curriculum { schedule, .. } if schedule.stages.is_empty() => {
                Err(ScenarioError::Invalid("curriculum has no stages".into()))
            }
            _ => Ok(()),
        }
    }

    /// Draw a training scenario. List entries are picked uniformly; `stage`
    /// selects the crowd for curriculum sources.
    pub fn draw<R: Rng>(&self, rng: &mut R, stage: Option<&CurriculumStage>) -> Result<Scenario, ScenarioError> {
        self.validate()?;
        let seed = rng.next_u64();
        match self {
            Self::Fixed(list) => Ok(list[rng.random_range(0..list.len())].clone()),
            Self::Jittered { base, jitter, mirror } => {
                let b = &base[rng.random_range(0..base.len())];
                Ok(jitter_scenario(b, seed, *jitter, *mirror))
            }
            Self::Random { map, stage, settings } => sample_random_scenario(seed, stage, map, settings),
            Self::Curriculum {
                map,
                schedule,
                settings,
            } => {
                let stage = stage.unwrap_or(&schedule.stages[0]);
                sample_random_scenario(seed, stage, map, settings)
            }
        }
    }

    /// Scenario for evaluation episode `index`: list entries are visited
    /// round-robin; generated layouts use `seed`. Curriculum sources are
    /// evaluated at their final stage.
    pub fn episode(&self, index: usize, seed: u64) -> Result<Scenario, ScenarioError> {
        self.validate()?;
        match self {
            Self::Fixed(list) => Ok(list[index % list.len()].clone()),
            Self::Jittered { base, jitter, mirror } => {
                Ok(jitter_scenario(&base[index % base.len()], seed, *jitter, *mirror))
            }
            Self::Random { map, stage, settings } => sample_random_scenario(seed, stage, map, settings),
            Self::Curriculum {
                map,
                schedule,
                settings,
            } => {
                let last = schedule.stages.last().expect("validated non-empty");
                sample_random_scenario(seed, last, map, settings)
            }
        }
    }
}
