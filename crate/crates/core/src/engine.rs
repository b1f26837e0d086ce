//! The piecewise-constant-argument scheme.
//!
//! On each mesh interval `[jh, (j+1)h)` the right-hand sides are frozen at the
//! left node, so the scheme becomes the explicit recursion
//!
//! ```text
//!   d_j       = j - floor(tau_j / h)
//!   s_j       = f(jh, x_j, x(d_j h))
//!   x_{j+1}   = x_j + h s_j
//!   tau_{j+1} = tau_j + h g(jh, x_j, tau_j)
//! ```
//!
//! An impulse `t_k` owned by step `j` splits the state update with the same
//! frozen slope: `x_left = x_j + (t_k - jh) s_j`, `x_right = x_left + I_k(x_left)`,
//! `x_{j+1} = x_right + ((j+1)h - t_k) s_j`. The delay is not affected.
//!
//! Step ownership uses [`floor_to_mesh`], so an impulse that lands on a mesh
//! point `jh` belongs to step `j` with a zero left offset: node `j` keeps the
//! value produced by the recursion (the left limit) and the jump is recorded
//! as an impulse node. [`Trajectory::eval_x`] still reports the right value
//! at `t_k`.
//!
//! The recursion is explicit only while `tau_j >= 0`; a negative delay stops
//! the solve with [`SolveStatus::TauNegative`].

use crate::error::{Error, Result};
use crate::model::{HistoryFunction, ImpulseNode, MeshConfig, Node, ProblemSpec, SolveStatus, Trajectory};

/// Width of the snapping window used by [`floor_to_mesh`], in units of the
/// spacing of doubles near the quotient.
pub const SNAP_ULPS: f64 = 4.0;

fn snap(q: f64) -> Option<f64> {
    let r = q.round();
    if (q - r).abs() <= SNAP_ULPS * f64::EPSILON * r.abs().max(1.0) {
        Some(r)
    } else {
        None
    }
}

/// `j = floor(t / h)` so that `jh <= t < (j+1)h`, except that quotients
/// within a few ulps of an integer snap to it (`0.3 / 0.1` gives 3).
pub fn floor_to_mesh(t: f64, h: f64) -> i64 {
    let q = t / h;
    snap(q).unwrap_or_else(|| q.floor()) as i64
}

/// `Some(j)` when `t` is the mesh point `jh` up to snapping.
pub fn mesh_index(t: f64, h: f64) -> Option<i64> {
    snap(t / h).map(|r| r as i64)
}

/// Mesh index of the delayed argument `[jh]_h - [tau_j]_h`.
pub fn delayed_index(j: i64, tau: f64, h: f64) -> i64 {
    j - floor_to_mesh(tau, h)
}

/// `h0`: the smallest gap between consecutive elements of `{0, t_1, ..., t_K, T}`.
pub fn min_impulse_gap(problem: &ProblemSpec) -> f64 {
    let mut prev = 0.0;
    let mut gap = f64::INFINITY;
    for t in problem.impulses.iter().map(|i| i.time).chain(std::iter::once(problem.horizon)) {
        gap = gap.min(t - prev);
        prev = t;
    }
    gap
}

/// `x_h(dh)`: a stored node for `d >= 0`, the history for `d < 0`.
/// Never interpolates.
pub fn eval_mesh_state(traj: &Trajectory, history: &HistoryFunction, d: i64) -> Result<Vec<f64>> {
    if d < 0 {
        return Ok(history.eval(d as f64 * traj.h));
    }
    if d == 0 {
        return Ok(history.eval(0.0));
    }
    traj.node(d).map(|n| n.x.clone()).ok_or(Error::OutOfRange {
        t: d as f64 * traj.h,
        frontier: traj.frontier(),
    })
}

/// Result of advancing one mesh interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub x_next: Vec<f64>,
    pub tau_next: f64,
    pub impulse: Option<ImpulseNode>,
}

/// Frozen slopes at node `j`: `(s_j, g_j)`.
fn frozen_slopes(j: i64, traj: &Trajectory, problem: &ProblemSpec) -> Result<(Vec<f64>, f64)> {
    let h = traj.h;
    let node = traj.node(j).ok_or(Error::OutOfRange {
        t: j as f64 * h,
        frontier: traj.frontier(),
    })?;
    let t = j as f64 * h;
    let d = delayed_index(j, node.tau, h);
    let xd = eval_mesh_state(traj, &problem.history, d)?;
    let s = problem.eval_f(t, &node.x, &xd);
    let g = problem.eval_g(t, &node.x, node.tau);
    if s.iter().any(|v| !v.is_finite()) || !g.is_finite() {
        return Err(Error::NonFiniteRhs { t });
    }
    Ok((s, g))
}

fn check_tau(j: i64, traj: &Trajectory) -> Result<()> {
    match traj.node(j) {
        Some(n) if n.tau >= 0.0 => Ok(()),
        Some(n) => Err(Error::Validation(format!(
            "tau_h({}) = {} is negative; the recursion is not explicit",
            n.time, n.tau
        ))),
        None => Err(Error::OutOfRange {
            t: j as f64 * traj.h,
            frontier: traj.frontier(),
        }),
    }
}

/// Advances from node `j` by `len <= h`, optionally across impulse `k` (0-based).
fn advance(
    j: i64,
    len: f64,
    impulse: Option<usize>,
    traj: &Trajectory,
    problem: &ProblemSpec,
) -> Result<StepOutcome> {
    check_tau(j, traj)?;
    let (s, g) = frozen_slopes(j, traj, problem)?;
    let h = traj.h;
    let node = &traj.nodes[j as usize];
    let tau_next = node.tau + len * g;
    let Some(k) = impulse else {
        let x_next = node.x.iter().zip(&s).map(|(x, s)| x + len * s).collect();
        return Ok(StepOutcome { x_next, tau_next, impulse: None });
    };

    let event = &problem.impulses[k];
    let t_left = j as f64 * h;
    let (before, after) = if mesh_index(event.time, h) == Some(j) {
        (0.0, len)
    } else {
        (event.time - t_left, t_left + len - event.time)
    };
    let x_left: Vec<f64> = node.x.iter().zip(&s).map(|(x, s)| x + before * s).collect();
    let jump = event.apply(&x_left);
    let x_right: Vec<f64> = x_left.iter().zip(&jump).map(|(x, i)| x + i).collect();
    if x_right.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteRhs { t: event.time });
    }
    let x_next = x_right.iter().zip(&s).map(|(x, s)| x + after * s).collect();
    Ok(StepOutcome {
        x_next,
        tau_next,
        impulse: Some(ImpulseNode {
            k: k + 1,
            time: event.time,
            x_left,
            x_right,
            step: j,
        }),
    })
}

/// One step from node `j` with no impulse in the interval.
pub fn step_interior(j: i64, traj: &Trajectory, problem: &ProblemSpec) -> Result<StepOutcome> {
    advance(j, traj.h, None, traj, problem)
}

/// One step from node `j` across impulse `k` (0-based), which must satisfy
/// `jh <= t_k < (j+1)h`.
pub fn step_with_impulse(j: i64, k: usize, traj: &Trajectory, problem: &ProblemSpec) -> Result<StepOutcome> {
    let event = problem
        .impulses
        .get(k)
        .ok_or_else(|| Error::Validation(format!("no impulse with index {k}")))?;
    if floor_to_mesh(event.time, traj.h) != j {
        return Err(Error::Validation(format!(
            "impulse at t = {} is not inside step {j} for h = {}",
            event.time, traj.h
        )));
    }
    advance(j, traj.h, Some(k), traj, problem)
}

/// Runs the recursion from `x_0 = phi(0)`, `tau_0 = lambda` up to `t_end`.
///
/// `t_end` beyond the horizon is clipped to it. A non-mesh `t_end` gets a
/// final partial step with the same frozen-slope rule.
pub fn solve(problem: &ProblemSpec, h: f64, t_end: f64) -> Result<Trajectory> {
    let mesh = MeshConfig::new(h, problem)?;
    if !(t_end > 0.0) {
        return Err(Error::Validation(format!("t_end must be positive, got {t_end}")));
    }
    let (t_stop, end_status) = if t_end >= problem.horizon {
        (problem.horizon, SolveStatus::EndOfHorizon)
    } else {
        (t_end, SolveStatus::Completed)
    };
    let h = mesh.h;
    let n = floor_to_mesh(t_stop, h);
    let owners: Vec<(i64, usize)> = problem
        .impulses
        .iter()
        .enumerate()
        .map(|(k, imp)| (floor_to_mesh(imp.time, h), k))
        .collect();
    let owned = |j: i64| owners.iter().find(|(s, _)| *s == j).map(|(_, k)| *k);

    let mut traj = Trajectory {
        h,
        lambda: problem.lambda,
        nodes: vec![Node {
            index: 0,
            time: 0.0,
            x: problem.history.eval(0.0),
            tau: problem.lambda,
        }],
        impulse_nodes: Vec::new(),
        end_node: None,
        t_end: 0.0,
        status: end_status,
    };

    for j in 0..n {
        if traj.nodes[j as usize].tau < 0.0 {
            traj.status = SolveStatus::TauNegative { index: j };
            break;
        }
        let out = match owned(j) {
            Some(k) => step_with_impulse(j, k, &traj, problem)?,
            None => step_interior(j, &traj, problem)?,
        };
        traj.impulse_nodes.extend(out.impulse);
        traj.nodes.push(Node {
            index: j + 1,
            time: (j + 1) as f64 * h,
            x: out.x_next,
            tau: out.tau_next,
        });
    }

    let last = traj.nodes.last().expect("node 0 exists");
    let last_index = last.index;
    if traj.status.is_success() && last.tau < 0.0 {
        traj.status = SolveStatus::TauNegative { index: last_index };
    }
    traj.t_end = last.time;

    let partial = t_stop - last.time;
    if traj.status.is_success() && partial > 0.0 {
        let k = owned(last_index).filter(|&k| problem.impulses[k].time < t_stop);
        let out = advance(last_index, partial, k, &traj, problem)?;
        traj.impulse_nodes.extend(out.impulse);
        traj.end_node = Some(Node {
            index: last_index,
            time: t_stop,
            x: out.x_next,
            tau: out.tau_next,
        });
        traj.t_end = t_stop;
    }
    Ok(traj)
}

fn lerp(t: f64, (t0, x0): (f64, &[f64]), (t1, x1): (f64, &[f64])) -> Vec<f64> {
    if t == t0 {
        return x0.to_vec();
    }
    if t1 == t0 {
        return x1.to_vec();
    }
    let w = (t - t0) / (t1 - t0);
    x0.iter().zip(x1).map(|(a, b)| a + w * (b - a)).collect()
}

impl Trajectory {
    pub fn node(&self, j: i64) -> Option<&Node> {
        usize::try_from(j).ok().and_then(|j| self.nodes.get(j))
    }

    pub fn last_index(&self) -> i64 {
        self.nodes.last().map_or(0, |n| n.index)
    }

    /// Last covered time.
    pub fn frontier(&self) -> f64 {
        self.t_end
    }

    pub fn impulse_in_step(&self, j: i64) -> Option<&ImpulseNode> {
        self.impulse_nodes.iter().find(|i| i.step == j)
    }

    /// Bracketing interval `(left, right, step)` for `0 < t <= t_end`, or
    /// `None` when `t` is exactly the last node.
    fn interval(&self, t: f64) -> Result<Option<(&Node, &Node, i64)>> {
        if t > self.t_end {
            return Err(Error::OutOfRange { t, frontier: self.t_end });
        }
        let last = self.nodes.last().expect("node 0 exists");
        if let Some(end) = &self.end_node {
            if t > last.time {
                return Ok(Some((last, end, last.index)));
            }
        }
        let j = floor_to_mesh(t, self.h).clamp(0, last.index);
        if j == last.index {
            return Ok(None);
        }
        Ok(Some((&self.nodes[j as usize], &self.nodes[j as usize + 1], j)))
    }

    fn eval_x_side(&self, history: &HistoryFunction, t: f64, right: bool) -> Result<Vec<f64>> {
        if t < 0.0 || (t == 0.0 && !right) {
            return Ok(history.eval(t));
        }
        let Some((a, b, j)) = self.interval(t)? else {
            let last = self.nodes.last().expect("node 0 exists");
            return Ok(match self.impulse_in_step(last.index) {
                Some(imp) if right && imp.time == t => imp.x_right.clone(),
                _ => last.x.clone(),
            });
        };
        match self.impulse_in_step(j) {
            Some(imp) if t > imp.time || (right && t == imp.time) => {
                Ok(lerp(t, (imp.time, &imp.x_right), (b.time, &b.x)))
            }
            Some(imp) if t >= a.time && t <= imp.time => {
                Ok(lerp(t, (a.time, &a.x), (imp.time, &imp.x_left)))
            }
            // coincident impulse slightly above a.time after snapping
            Some(imp) => Ok(lerp(t, (imp.time, &imp.x_right), (b.time, &b.x))),
            None => Ok(lerp(t, (a.time, &a.x), (b.time, &b.x))),
        }
    }

    /// Right-continuous `x_h(t)`; the history for `t <= 0`.
    pub fn eval_x(&self, history: &HistoryFunction, t: f64) -> Result<Vec<f64>> {
        self.eval_x_side(history, t, true)
    }

    /// Left limit `x_h(t-)`; differs from [`eval_x`](Self::eval_x) only at impulse times.
    pub fn eval_x_left(&self, history: &HistoryFunction, t: f64) -> Result<Vec<f64>> {
        self.eval_x_side(history, t, false)
    }

    /// Continuous, piecewise linear `tau_h(t)`; `lambda` for `t <= 0`.
    pub fn eval_tau(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(self.lambda);
        }
        match self.interval(t)? {
            None => Ok(self.nodes.last().expect("node 0 exists").tau),
            Some((a, b, _)) => Ok(lerp(t, (a.time, &[a.tau]), (b.time, &[b.tau]))[0]),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{HistoryFunction, ImpulseEvent, JumpMap, ProblemSpec};

    fn trivial(c: f64, impulses: Vec<ImpulseEvent>, horizon: f64) -> ProblemSpec {
        ProblemSpec::new(
            1,
            Arc::new(|_t: f64, _x: &[f64], _xd: &[f64], out: &mut [f64]| out[0] = 0.0),
            Arc::new(|_t: f64, _x: &[f64], _tau: f64| 1.0),
            impulses,
            HistoryFunction::constant(vec![c]),
            1.0,
            horizon,
        )
        .unwrap()
    }

    fn constant_jump(v: f64) -> Arc<dyn JumpMap> {
        Arc::new(move |_u: &[f64], out: &mut [f64]| out[0] = v)
    }

    #[test]
    fn floor_examples() {
        assert_eq!(floor_to_mesh(0.35, 0.1), 3);
        assert_eq!(floor_to_mesh(0.3, 0.1), 3);
        assert_eq!(floor_to_mesh(-0.05, 0.1), -1);
        assert_eq!(floor_to_mesh(0.75, 0.01), 75);
        assert_eq!(floor_to_mesh(1.5, 0.1), 15);
        assert_eq!(mesh_index(0.35, 0.1), None);
        assert_eq!(mesh_index(2.0, 0.001), Some(2000));
    }

    #[test]
    fn delayed_index_examples() {
        assert_eq!(delayed_index(0, 2.0, 0.1), -20);
        assert_eq!(delayed_index(10, 1.91672237, 0.1), -9);
        assert_eq!(delayed_index(5, 0.0, 0.1), 5);
    }

    #[test]
    fn gap_examples() {
        assert_eq!(min_impulse_gap(&trivial(0.0, vec![], 4.0)), 4.0);
        let p = trivial(
            0.0,
            vec![ImpulseEvent::new(1.0, constant_jump(0.0)), ImpulseEvent::new(1.1, constant_jump(0.0))],
            4.0,
        );
        assert!((min_impulse_gap(&p) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn trivial_problem_is_exact() {
        let p = trivial(3.5, vec![], 2.0);
        let traj = solve(&p, 0.1, 2.0).unwrap();
        assert_eq!(traj.status, SolveStatus::EndOfHorizon);
        for n in &traj.nodes {
            assert_eq!(n.x, vec![3.5]);
            assert!((n.tau - (1.0 + n.time)).abs() < 1e-13);
        }
        let h = &p.history;
        assert_eq!(traj.eval_x(h, 1.234).unwrap(), vec![3.5]);
        assert!((traj.eval_tau(1.234).unwrap() - 2.234).abs() < 1e-13);
        assert_eq!(traj.eval_tau(-5.0).unwrap(), 1.0);
    }

    #[test]
    fn node_times_are_index_times_h() {
        let p = trivial(1.0, vec![], 3.0);
        let h = 0.01;
        let traj = solve(&p, h, 3.0).unwrap();
        for n in &traj.nodes {
            assert_eq!(n.time.to_bits(), (n.index as f64 * h).to_bits());
        }
    }

    #[test]
    fn zero_jump_matches_interior() {
        let p = trivial(1.0, vec![ImpulseEvent::new(0.55, constant_jump(0.0))], 2.0);
        let traj = solve(&p, 0.1, 1.0).unwrap();
        let mut cut = traj.clone();
        cut.nodes.truncate(6);
        let a = step_interior(5, &cut, &p).unwrap();
        let b = step_with_impulse(5, 0, &cut, &p).unwrap();
        assert_eq!(a.x_next, b.x_next);
        assert_eq!(a.tau_next, b.tau_next);
        assert!(step_with_impulse(4, 0, &cut, &p).is_err());
    }

    #[test]
    fn partial_final_step() {
        let p = trivial(2.0, vec![], 3.0);
        let traj = solve(&p, 0.1, 1.05).unwrap();
        assert_eq!(traj.status, SolveStatus::Completed);
        assert_eq!(traj.t_end, 1.05);
        let end = traj.end_node.as_ref().unwrap();
        assert!((end.tau - 2.05).abs() < 1e-13);
        assert!((traj.eval_tau(1.05).unwrap() - 2.05).abs() < 1e-13);
        assert!(traj.eval_tau(1.06).is_err());
    }

    #[test]
    fn step_size_guard() {
        let p = trivial(0.0, vec![ImpulseEvent::new(1.0, constant_jump(1.0))], 5.0);
        assert!(matches!(solve(&p, 1.0, 5.0), Err(Error::StepSizeTooLarge { .. })));
        assert!(matches!(solve(&p, 5.0, 5.0), Err(Error::StepSizeTooLarge { .. })));
        assert!(solve(&p, 0.5, 5.0).is_ok());
    }

    #[test]
    fn negative_tau_stops() {
        let p = ProblemSpec::new(
            1,
            Arc::new(|_t: f64, _x: &[f64], _xd: &[f64], out: &mut [f64]| out[0] = 1.0),
            Arc::new(|_t: f64, _x: &[f64], _tau: f64| -1.0),
            vec![],
            HistoryFunction::constant(vec![0.0]),
            0.5,
            2.0,
        )
        .unwrap();
        let traj = solve(&p, 0.1, 2.0).unwrap();
        // tau_j = 0.5 - 0.1 j; zero is allowed, first negative at j = 6
        assert_eq!(traj.status, SolveStatus::TauNegative { index: 6 });
        assert_eq!(traj.last_index(), 6);
        assert!(traj.nodes[5].tau >= 0.0 && traj.nodes[5].tau < 1e-12);
        assert!(traj.eval_x(&p.history, 0.7).is_err());
    }

    #[test]
    fn non_finite_rhs_is_reported() {
        let p = ProblemSpec::new(
            1,
            Arc::new(|_t: f64, x: &[f64], _xd: &[f64], out: &mut [f64]| out[0] = 1.0 / x[0]),
            Arc::new(|_t: f64, _x: &[f64], _tau: f64| 0.0),
            vec![],
            HistoryFunction::constant(vec![0.0]),
            0.5,
            2.0,
        )
        .unwrap();
        assert!(matches!(solve(&p, 0.1, 1.0), Err(Error::NonFiniteRhs { .. })));
    }

    #[test]
    fn impulse_on_mesh_point_keeps_left_value_in_node() {
        let p = trivial(1.0, vec![ImpulseEvent::new(0.5, constant_jump(2.0))], 2.0);
        let traj = solve(&p, 0.1, 1.0).unwrap();
        let imp = &traj.impulse_nodes[0];
        assert_eq!(imp.step, 5);
        assert_eq!(imp.x_left, vec![1.0]);
        assert_eq!(imp.x_right, vec![3.0]);
        assert_eq!(traj.nodes[5].x, vec![1.0]);
        assert_eq!(traj.nodes[6].x, vec![3.0]);
        assert_eq!(traj.eval_x(&p.history, 0.5).unwrap(), vec![3.0]);
        assert_eq!(traj.eval_x_left(&p.history, 0.5).unwrap(), vec![1.0]);
    }
}
