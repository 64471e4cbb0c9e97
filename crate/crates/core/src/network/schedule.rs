use serde::{Deserialize, Serialize};

/// Cuts the learning rate when the epoch loss stops improving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlateauScheduler {
    pub patience: usize,
    pub factor: f64,
    /// Relative improvement required to reset the stall counter.
    pub min_improvement: f64,
    #[serde(skip)]
    pub best_loss: f64,
    #[serde(skip)]
    pub stall_count: usize,
}

impl Default for PlateauScheduler {
    fn default() -> Self {
        Self {
            patience: 5,
            factor: 0.5,
            min_improvement: 1e-4,
            best_loss: f64::INFINITY,
            stall_count: 0,
        }
    }
}

impl PlateauScheduler {
    pub fn observe(&mut self, epoch_loss: f64, lr: f64) -> f64 {
        let (next_lr, next) = plateau_schedule(*self, epoch_loss, lr);
        *self = next;
        next_lr
    }
}

pub fn plateau_schedule(mut sched: PlateauScheduler, epoch_loss: f64, lr: f64) -> (f64, PlateauScheduler) {
    if epoch_loss < sched.best_loss * (1.0 - sched.min_improvement) {
        sched.best_loss = epoch_loss;
        sched.stall_count = 0;
        return (lr, sched);
    }
    sched.stall_count += 1;
    if sched.stall_count > sched.patience {
        sched.stall_count = 0;
        (lr * sched.factor, sched)
    } else {
        (lr, sched)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decreasing_losses_keep_lr() {
        let mut s = PlateauScheduler::default();
        let mut lr = 0.001;
        for i in 0..50 {
            lr = s.observe(10.0 - i as f64 * 0.1, lr);
        }
        assert_eq!(lr, 0.001);
    }

    #[test]
    fn flat_loss_halves_once_after_patience() {
        let mut s = PlateauScheduler::default();
        let mut lr = s.observe(1.0, 0.001);
        // first observation sets best; then patience + 1 stalls
        let mut history = vec![];
        for _ in 0..=s.patience {
            lr = s.observe(1.0, lr);
            history.push(lr);
        }
        assert_eq!(&history[..5], &[0.001; 5]);
        assert_eq!(history[5], 0.0005);
        assert_eq!(s.stall_count, 0);
    }

    #[test]
    fn tiny_improvement_counts_as_stall() {
        let mut s = PlateauScheduler::default();
        s.observe(1.0, 0.1);
        s.observe(1.0 - 1e-6, 0.1);
        assert_eq!(s.stall_count, 1);
        assert_eq!(s.best_loss, 1.0);
        s.observe(0.99, 0.1);
        assert_eq!(s.stall_count, 0);
    }
}
