use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("noise levels must be positive and strictly decreasing")]
    Levels,
    #[error("steps per level must be at least 1")]
    Steps,
    #[error("step size must be positive and finite")]
    StepSize,
}

/// Decreasing noise levels `σ_1 > … > σ_L > 0`, `T` Langevin steps per level
/// and base step size `ε`. Level `l` uses step `α_l = ε σ_l² / σ_L²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    levels: Vec<f64>,
    steps_per_level: usize,
    epsilon: f64,
}

impl NoiseSchedule {
    pub fn new(levels: Vec<f64>, steps_per_level: usize, epsilon: f64) -> Result<Self, ScheduleError> {
        if levels.is_empty()
            || levels.iter().any(|s| !(s.is_finite() && *s > 0.0))
            || levels.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(ScheduleError::Levels);
        }
        if steps_per_level == 0 {
            return Err(ScheduleError::Steps);
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(ScheduleError::StepSize);
        }
        Ok(NoiseSchedule {
            levels,
            steps_per_level,
            epsilon,
        })
    }

    /// `count` levels evenly spaced from `first` down to `last`.
    pub fn linear(
        first: f64,
        last: f64,
        count: usize,
        steps_per_level: usize,
        epsilon: f64,
    ) -> Result<Self, ScheduleError> {
        let levels = match count {
            0 => Vec::new(),
            1 => vec![first],
            _ => (0..count)
                .map(|l| first + (last - first) * l as f64 / (count - 1) as f64)
                .collect(),
        };
        Self::new(levels, steps_per_level, epsilon)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn steps_per_level(&self) -> usize {
        self.steps_per_level
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Step size of level `l` (0-based).
    pub fn step_size(&self, l: usize) -> f64 {
        let last = *self.levels.last().expect("non-empty by construction");
        self.epsilon * self.levels[l] * self.levels[l] / (last * last)
    }
}

impl Default for NoiseSchedule {
    /// Ten levels from 0.5 to 0.03, 300 steps per level, `ε = 1e-6`.
    fn default() -> Self {
        NoiseSchedule::linear(0.5, 0.03, 10, 300, 1e-6).expect("valid constants")
    }
}
