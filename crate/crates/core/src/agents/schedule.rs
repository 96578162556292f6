use serde::{Deserialize, Serialize};

/// Linearly decaying exploration rate, held at `end` after `decay_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn at(&self, t: u64) -> f64 {
        if self.decay_steps == 0 || t >= self.decay_steps {
            return self.end;
        }
        let frac = t as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

/// Consolidation weight that grows linearly from `start` to `end` over `horizon` steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule {
    pub start: f64,
    pub end: f64,
    pub horizon: u64,
}

impl LambdaSchedule {
    pub fn at(&self, t: u64) -> f64 {
        if self.horizon == 0 {
            return self.end;
        }
        let frac = (t.min(self.horizon)) as f64 / self.horizon as f64;
        self.start + (self.end - self.start) * frac
    }

    /// True when the weight is zero at every step, i.e. consolidation is switched off.
    pub fn is_disabled(&self) -> bool {
        self.start == 0.0 && self.end == 0.0
    }
}
