//! Stopping rules shared by the solvers: a wall-clock deadline, a step cap,
//! or both. Budgets are only consulted between steps, so a step that has
//! started always runs to completion.

use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Budget {
    deadline: Option<Instant>,
    max_steps: Option<u64>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    /// A deadline `seconds` from now. Non-finite values mean no deadline.
    pub fn seconds(seconds: f64) -> Self {
        Self::unlimited().with_seconds(seconds)
    }

    pub fn steps(max_steps: u64) -> Self {
        Self::unlimited().with_steps(max_steps)
    }

    pub fn with_seconds(mut self, seconds: f64) -> Self {
        self.deadline = Duration::try_from_secs_f64(seconds)
            .ok()
            .and_then(|d| Instant::now().checked_add(d));
        self
    }

    pub fn with_deadline(mut self, deadline: Option<Instant>) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn with_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = Some(max_steps);
        self
    }

    pub fn deadline(&self) -> Option<Instant> {
        self.deadline
    }

    pub fn max_steps(&self) -> Option<u64> {
        self.max_steps
    }

    /// True when at least one limit is set.
    pub fn is_bounded(&self) -> bool {
        self.deadline.is_some() || self.max_steps.is_some()
    }

    pub fn exhausted(&self, steps_done: u64) -> bool {
        self.max_steps.is_some_and(|cap| steps_done >= cap)
            || self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}
