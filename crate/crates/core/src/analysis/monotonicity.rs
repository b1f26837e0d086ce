use serde::{Deserialize, Serialize};

use crate::model::{ProblemSpec, Trajectory};

/// Behaviour of the delayed time function `t - tau_h(t)` along a trajectory.
///
/// Its slope on `[jh, (j+1)h)` is `1 - m_j` with `m_j = g(jh, x_j, tau_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub max_g_along_path: f64,
    /// `min_j |1 - m_j|`.
    pub min_margin: f64,
    /// `max_j m_j < 1`.
    pub strictly_increasing: bool,
    /// Node times where the sign of `1 - m_j` differs from the previous node.
    pub sign_changes: Vec<f64>,
    pub piecewise_monotone_segments: usize,
    /// Consecutive nodes with `m_j == 1` (flat stretches of `t - tau_h`).
    pub flat_steps: usize,
    pub nodes_checked: usize,
}

/// Overall verdict of a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    StrictlyIncreasing,
    PiecewiseMonotone,
    Failed,
}

impl MonotonicityReport {
    pub fn verdict(&self) -> Verdict {
        if self.nodes_checked == 0 || self.flat_steps > 0 || !self.max_g_along_path.is_finite() {
            Verdict::Failed
        } else if self.strictly_increasing {
            Verdict::StrictlyIncreasing
        } else {
            Verdict::PiecewiseMonotone
        }
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

pub fn monotonicity_certificate(traj: &Trajectory, problem: &ProblemSpec) -> MonotonicityReport {
    let mut max_g = f64::NEG_INFINITY;
    let mut min_margin = f64::INFINITY;
    let mut sign_changes = Vec::new();
    let mut segments = 0;
    let mut flat_steps = 0;
    let mut prev: Option<i8> = None;
    for node in &traj.nodes {
        let m = problem.eval_g(node.time, &node.x, node.tau);
        max_g = max_g.max(m);
        min_margin = min_margin.min((1.0 - m).abs());
        let s = sign(1.0 - m);
        match prev {
            None => segments = 1,
            Some(p) if p != s => {
                sign_changes.push(node.time);
                segments += 1;
            }
            Some(0) => flat_steps += 1,
            Some(_) => {}
        }
        prev = Some(s);
    }
    MonotonicityReport {
        max_g_along_path: max_g,
        min_margin,
        strictly_increasing: max_g < 1.0,
        sign_changes,
        piecewise_monotone_segments: segments,
        flat_steps,
        nodes_checked: traj.nodes.len(),
    }
}
