//! Staged training: pedestrian count follows the recent mean episode return.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sim::AgentClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumStage {
    pub index: usize,
    pub pedestrians: usize,
    /// Fixed (adult, child, elder) counts; when `None` each pedestrian's
    /// class is drawn uniformly.
    pub class_counts: Option<[usize; 3]>,
    pub promotion_threshold: f64,
    pub demotion_threshold: f64,
}

impl CurriculumStage {
    /// Classes of this stage's pedestrians, in spawn order.
    pub fn roster<R: Rng>(&self, rng: &mut R) -> Vec<AgentClass> {
        match self.class_counts {
            Some(counts) => AgentClass::ALL
                .iter()
                .zip(counts)
                .flat_map(|(c, n)| std::iter::repeat_n(*c, n))
                .collect(),
            None => (0..self.pedestrians)
                .map(|_| AgentClass::ALL[rng.random_range(0..3)])
                .collect(),
        }
    }
}

pub const DEFAULT_STAGE_COUNTS: [usize; 6] = [1, 2, 3, 5, 7, 9];
pub const DEFAULT_WINDOW: usize = 100;

/// Ordered stage table. Pedestrian counts never decrease with the index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumSchedule {
    pub stages: Vec<CurriculumStage>,
    /// Episodes averaged before a stage decision is taken.
    pub window: usize,
}

impl Default for CurriculumSchedule {
    fn default() -> Self {
        Self::from_counts(&DEFAULT_STAGE_COUNTS, 1.0, 0.0)
    }
}

impl CurriculumSchedule {
    pub fn from_counts(counts: &[usize], promote: f64, demote: f64) -> Self {
        let stages = counts
            .iter()
            .enumerate()
            .map(|(index, &pedestrians)| CurriculumStage {
                index,
                pedestrians,
                class_counts: None,
                promotion_threshold: promote,
                demotion_threshold: demote,
            })
            .collect();
        Self {
            stages,
            window: DEFAULT_WINDOW,
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.stages.windows(2).all(|w| w[0].pedestrians <= w[1].pedestrians)
    }
}

/// Next stage given the mean episode return over a full window: promote at
/// or above the promotion threshold, demote at or below the demotion
/// threshold (floored at stage 0, capped at the last stage).
pub fn curriculum_update<'a>(
    schedule: &'a CurriculumSchedule,
    stage: &CurriculumStage,
    mean_reward: f64,
) -> &'a CurriculumStage {
    let last = schedule.stages.len() - 1;
    let i = stage.index.min(last);
    let next = if mean_reward >= stage.promotion_threshold {
        (i + 1).min(last)
    } else if mean_reward <= stage.demotion_threshold {
        i.saturating_sub(1)
    } else {
        i
    };
    &schedule.stages[next]
}

/// Rolling tracker that applies [`curriculum_update`] once the window is
/// full and clears the window on every stage change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub schedule: CurriculumSchedule,
    current: usize,
    history: VecDeque<f64>,
}

impl Curriculum {
    pub fn new(schedule: CurriculumSchedule) -> Self {
        assert!(!schedule.stages.is_empty(), "curriculum needs at least one stage");
        Self {
            schedule,
            current: 0,
            history: VecDeque::new(),
        }
    }

    pub fn stage(&self) -> &CurriculumStage {
        &self.schedule.stages[self.current]
    }

    /// Feed one finished episode's return; returns the new stage index if it
    /// changed.
    pub fn record(&mut self, episode_return: f64) -> Option<usize> {
        self.history.push_back(episode_return);
        if self.history.len() > self.schedule.window {
            self.history.pop_front();
        }
        if self.history.len() < self.schedule.window {
            return None;
        }
        let mean = self.history.iter().sum::<f64>() / self.history.len() as f64;
        let next = curriculum_update(&self.schedule, self.stage(), mean).index;
        if next != self.current {
            self.current = next;
            self.history.clear();
            Some(next)
        } else {
            None
        }
    }
}
