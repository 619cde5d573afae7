use crate::eval::Direction;

/// Cosine cyclic learning rate:
/// `base + 0.5 (max - base) (1 - cos(2π (t mod T) / T))`.
/// Exactly `base` at `t ≡ 0 (mod T)` and exactly `max` at `t ≡ T/2`.
pub fn cosine_cyclic_lr(step: u64, base_lr: f64, max_lr: f64, cycle_steps: u64) -> f64 {
    debug_assert!(cycle_steps >= 2);
    let phase = (step % cycle_steps) as f64 / cycle_steps as f64;
    let raw = base_lr + 0.5 * (max_lr - base_lr) * (1.0 - (std::f64::consts::TAU * phase).cos());
    raw.clamp(base_lr, max_lr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    /// New best metric; snapshot the parameters.
    Improved,
    Continue,
    /// No improvement for a full patience window; halt.
    Stop,
}

/// Patience-based early stopping over a stream of `(step, metric)`
/// observations. Stops once the current step is at least `patience` update
/// steps past the best step.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: u64,
    direction: Direction,
    best: Option<(u64, f64)>,
}

impl EarlyStopper {
    pub fn new(patience: usize, direction: Direction) -> Self {
        Self {
            patience: patience as u64,
            direction,
            best: None,
        }
    }

    pub fn best(&self) -> Option<(u64, f64)> {
        self.best
    }

    pub fn observe(&mut self, step: u64, metric: f64) -> StopDecision {
        let improved = match self.best {
            None => true,
            Some((_, best)) => match self.direction {
                Direction::HigherBetter => metric > best,
                Direction::LowerBetter => metric < best,
            },
        };
        if improved {
            self.best = Some((step, metric));
            return StopDecision::Improved;
        }
        let (best_step, _) = self.best.expect("set above");
        if step >= best_step + self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}
