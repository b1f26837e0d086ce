use crate::error::Result;
use crate::model::{HistoryFunction, Trajectory};

/// Anything that can be evaluated as a pair `(x(t), tau(t))`: computed
/// trajectories as well as closed-form solutions.
pub trait Solution: Send + Sync {
    fn dim(&self) -> usize;

    /// Right-continuous state.
    fn x(&self, t: f64) -> Result<Vec<f64>>;

    /// Left limit of the state; equal to [`x`](Self::x) away from jumps.
    fn x_left(&self, t: f64) -> Result<Vec<f64>> {
        self.x(t)
    }

    fn tau(&self, t: f64) -> Result<f64>;
}

/// An EPCA trajectory bundled with the history it extends.
#[derive(Debug, Clone)]
pub struct EpcaSolution {
    pub trajectory: Trajectory,
    pub history: HistoryFunction,
}

impl Solution for EpcaSolution {
    fn dim(&self) -> usize {
        self.history.dim()
    }

    fn x(&self, t: f64) -> Result<Vec<f64>> {
        self.trajectory.eval_x(&self.history, t)
    }

    fn x_left(&self, t: f64) -> Result<Vec<f64>> {
        self.trajectory.eval_x_left(&self.history, t)
    }

    fn tau(&self, t: f64) -> Result<f64> {
        self.trajectory.eval_tau(t)
    }
}
