//! Independent reference integrator used to cross-check EPCA.
//!
//! Classical RK4 on the coupled `(x, tau)` system with the method of steps:
//! the delayed term reads the cubic Hermite interpolant of the already
//! computed path (or the history for non-positive arguments). Steps end
//! exactly at impulse times, and a step in which the delayed argument
//! `t - tau(t)` crosses a point where the past is not smooth (history
//! breakpoints, 0, impulse times) is cut at the crossing, located by
//! bisection on the trial interpolant.

use serde::{Deserialize, Serialize};

use crate::engine::min_impulse_gap;
use crate::error::{Error, Result};
use crate::model::{HistoryFunction, ImpulseNode, ProblemSpec, SolveStatus};
use crate::solution::Solution;

/// Time tolerance of the crossing bisection.
pub const CROSSING_TOL: f64 = 1e-12;

/// One step of the dense output: cubic Hermite data for `x` and `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseSegment {
    pub t0: f64,
    pub t1: f64,
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub dx0: Vec<f64>,
    pub dx1: Vec<f64>,
    pub tau0: f64,
    pub tau1: f64,
    pub dtau0: f64,
    pub dtau1: f64,
}

fn hermite(t: f64, t0: f64, t1: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return y0;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * m0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * m1
}

impl DenseSegment {
    pub fn x_into(&self, t: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = hermite(t, self.t0, self.t1, self.x0[i], self.x1[i], self.dx0[i], self.dx1[i]);
        }
    }

    pub fn tau(&self, t: f64) -> f64 {
        hermite(t, self.t0, self.t1, self.tau0, self.tau1, self.dtau0, self.dtau1)
    }
}

/// Dense reference solution. `x` is right-continuous at impulse times.
#[derive(Debug, Clone)]
pub struct DenseTrajectory {
    pub base_step: f64,
    pub lambda: f64,
    pub segments: Vec<DenseSegment>,
    pub impulse_nodes: Vec<ImpulseNode>,
    pub history: HistoryFunction,
    pub t_end: f64,
    pub status: SolveStatus,
}

impl DenseTrajectory {
    /// Segment with `t0 <= t < t1`, or the last one at `t_end`.
    fn segment_right(&self, t: f64) -> Option<&DenseSegment> {
        let i = self.segments.partition_point(|s| s.t1 <= t);
        self.segments.get(i).or_else(|| self.segments.last().filter(|s| s.t1 == t))
    }

    /// Segment with `t0 < t <= t1`.
    fn segment_left(&self, t: f64) -> Option<&DenseSegment> {
        let i = self.segments.partition_point(|s| s.t1 < t);
        self.segments.get(i)
    }

    fn check(&self, t: f64) -> Result<()> {
        if t > self.t_end || t.is_nan() {
            return Err(Error::OutOfRange { t, frontier: self.t_end });
        }
        Ok(())
    }

    /// Mesh of accepted step end points, starting at 0.
    pub fn grid(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.segments.iter().map(|s| s.t1)).collect()
    }
}

impl Solution for DenseTrajectory {
    fn dim(&self) -> usize {
        self.history.dim()
    }

    fn x(&self, t: f64) -> Result<Vec<f64>> {
        self.check(t)?;
        if t <= 0.0 {
            return Ok(self.history.eval(t));
        }
        let seg = self.segment_right(t).ok_or(Error::OutOfRange { t, frontier: self.t_end })?;
        let mut out = vec![0.0; self.dim()];
        seg.x_into(t, &mut out);
        Ok(out)
    }

    fn x_left(&self, t: f64) -> Result<Vec<f64>> {
        self.check(t)?;
        if t <= 0.0 {
            return Ok(self.history.eval_side(t, crate::model::Side::Left));
        }
        let seg = self.segment_left(t).ok_or(Error::OutOfRange { t, frontier: self.t_end })?;
        let mut out = vec![0.0; self.dim()];
        seg.x_into(t, &mut out);
        Ok(out)
    }

    fn tau(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        if t <= 0.0 {
            return Ok(self.lambda);
        }
        let seg = self.segment_right(t).ok_or(Error::OutOfRange { t, frontier: self.t_end })?;
        Ok(seg.tau(t))
    }
}

/// Integrates over the whole horizon.
pub fn integrate_reference(problem: &ProblemSpec, base_step: f64) -> Result<DenseTrajectory> {
    integrate_reference_to(problem, base_step, problem.horizon)
}

struct Integrator<'a> {
    problem: &'a ProblemSpec,
    /// Sorted points where the past may be non-smooth.
    breaks: Vec<f64>,
    segments: Vec<DenseSegment>,
}

/// State at the start of a step plus its first-stage slopes.
struct StepStart {
    t: f64,
    x: Vec<f64>,
    tau: f64,
    dx: Vec<f64>,
    dtau: f64,
    /// Representative delayed argument selecting the smooth piece of the past.
    theta_ref: f64,
}

impl<'a> Integrator<'a> {
    fn piece_of(&self, theta: f64) -> usize {
        self.breaks.partition_point(|&d| d <= theta)
    }

    /// Past state at `s`, read from the smooth piece containing `theta_ref`.
    /// Arguments beyond the computed range are extrapolated linearly from
    /// the step start.
    fn past(&self, s: f64, start: &StepStart, out: &mut [f64]) {
        if s > start.t {
            for ((o, x), dx) in out.iter_mut().zip(&start.x).zip(&start.dx) {
                *o = x + (s - start.t) * dx;
            }
            return;
        }
        let p = self.piece_of(start.theta_ref);
        let lo = if p == 0 { f64::NEG_INFINITY } else { self.breaks[p - 1] };
        let hi = self.breaks.get(p).copied().unwrap_or(f64::INFINITY);
        // selector stays inside the piece; evaluation happens at s itself
        let sel = if s < lo {
            lo
        } else if s >= hi {
            hi - (hi - lo).min(1.0) * 1e-9
        } else {
            s
        };
        if sel < 0.0 || (sel == 0.0 && self.segments.is_empty()) {
            let hist = &self.problem.history;
            hist.piece(hist.piece_index(sel)).eval(s, out);
            return;
        }
        let i = self.segments.partition_point(|seg| seg.t1 <= sel);
        match self.segments.get(i).or(self.segments.last()) {
            Some(seg) => seg.x_into(s, out),
            None => self.problem.history.piece(0).eval(s, out),
        }
    }

    fn rhs(&self, t: f64, x: &[f64], tau: f64, start: &StepStart) -> Result<(Vec<f64>, f64)> {
        let mut xd = vec![0.0; x.len()];
        self.past(t - tau, start, &mut xd);
        let dx = self.problem.eval_f(t, x, &xd);
        let dtau = self.problem.eval_g(t, x, tau);
        if dx.iter().any(|v| !v.is_finite()) || !dtau.is_finite() {
            return Err(Error::NonFiniteRhs { t });
        }
        Ok((dx, dtau))
    }

    fn start(&self, t: f64, x: Vec<f64>, tau: f64) -> Result<StepStart> {
        let theta = t - tau;
        let mut st = StepStart { t, x, tau, dx: Vec::new(), dtau: 0.0, theta_ref: theta };
        // direction of the delayed argument decides which side of a break we read
        let g = self.problem.eval_g(t, &st.x, tau);
        let eps = 1e-9 * theta.abs().max(1.0);
        if 1.0 - g > 0.0 {
            st.theta_ref = theta + eps;
        } else if 1.0 - g < 0.0 {
            st.theta_ref = theta - eps;
        }
        let (dx, dtau) = self.rhs(t, &st.x, tau, &st)?;
        st.dx = dx;
        st.dtau = dtau;
        Ok(st)
    }

    fn rk4(&self, st: &StepStart, h: f64) -> Result<(Vec<f64>, f64)> {
        let n = st.x.len();
        let shift = |c: f64, k: &[f64]| -> Vec<f64> { (0..n).map(|i| st.x[i] + c * k[i]).collect() };
        let (k1, l1) = (st.dx.clone(), st.dtau);
        let (k2, l2) = self.rhs(st.t + h / 2.0, &shift(h / 2.0, &k1), st.tau + h / 2.0 * l1, st)?;
        let (k3, l3) = self.rhs(st.t + h / 2.0, &shift(h / 2.0, &k2), st.tau + h / 2.0 * l2, st)?;
        let (k4, l4) = self.rhs(st.t + h, &shift(h, &k3), st.tau + h * l3, st)?;
        let x = (0..n)
            .map(|i| st.x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let tau = st.tau + h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
        Ok((x, tau))
    }

    fn segment(&self, st: &StepStart, t1: f64, x1: Vec<f64>, tau1: f64) -> Result<DenseSegment> {
        let (dx1, dtau1) = self.rhs(t1, &x1, tau1, st)?;
        Ok(DenseSegment {
            t0: st.t,
            t1,
            x0: st.x.clone(),
            x1,
            dx0: st.dx.clone(),
            dx1,
            tau0: st.tau,
            tau1,
            dtau0: st.dtau,
            dtau1,
        })
    }

    /// First time in `(t0, t1]` where the delayed argument leaves the piece
    /// of `theta_ref`, if any.
    fn crossing(&self, seg: &DenseSegment, piece: usize) -> Option<f64> {
        let leaves = |t: f64| self.piece_of(t - seg.tau(t)) != piece;
        let probes = [0.25, 0.5, 0.75, 1.0];
        let hit = probes.iter().map(|p| seg.t0 + p * (seg.t1 - seg.t0)).find(|&t| leaves(t))?;
        let (mut lo, mut hi) = (seg.t0, hit);
        while hi - lo > CROSSING_TOL {
            let mid = 0.5 * (lo + hi);
            if leaves(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }
}

/// Integrates up to `t_end` (clipped to the horizon).
///
/// Requires `base_step < h0 / 4`; the error reports `h0 / 4` as the bound.
pub fn integrate_reference_to(problem: &ProblemSpec, base_step: f64, t_end: f64) -> Result<DenseTrajectory> {
    if !(base_step > 0.0 && base_step.is_finite()) {
        return Err(Error::InvalidStep(base_step));
    }
    let bound = min_impulse_gap(problem) / 4.0;
    if base_step >= bound {
        return Err(Error::StepSizeTooLarge { h: base_step, h0: bound });
    }
    if !(t_end > 0.0) {
        return Err(Error::Validation(format!("t_end must be positive, got {t_end}")));
    }
    let (t_stop, end_status) = if t_end >= problem.horizon {
        (problem.horizon, SolveStatus::EndOfHorizon)
    } else {
        (t_end, SolveStatus::Completed)
    };

    let mut breaks: Vec<f64> = problem.history.breakpoints().to_vec();
    breaks.push(0.0);
    breaks.extend(problem.impulse_times());
    breaks.sort_by(f64::total_cmp);

    let mut it = Integrator { problem, breaks, segments: Vec::new() };
    let mut impulse_nodes = Vec::new();
    let mut status = end_status;
    let mut t = 0.0;
    let mut x = problem.history.eval(0.0);
    let mut tau = problem.lambda;
    let mut next_impulse = 0;
    let mut steps: i64 = 0;

    while t < t_stop {
        if tau < 0.0 {
            status = SolveStatus::TauNegative { index: steps };
            break;
        }
        let st = it.start(t, x.clone(), tau)?;
        let target = problem.impulses.get(next_impulse).map_or(t_stop, |imp| imp.time.min(t_stop));
        let mut t1 = if target - t <= base_step * (1.0 + 1e-9) { target } else { t + base_step };

        let (mut x1, mut tau1) = it.rk4(&st, t1 - t)?;
        let trial = it.segment(&st, t1, x1.clone(), tau1)?;
        if let Some(tc) = it.crossing(&trial, it.piece_of(st.theta_ref)) {
            if tc - t > CROSSING_TOL && tc < t1 {
                t1 = tc;
                (x1, tau1) = it.rk4(&st, t1 - t)?;
            }
        }
        let seg = it.segment(&st, t1, x1.clone(), tau1)?;
        it.segments.push(seg);
        steps += 1;
        t = t1;
        x = x1;
        tau = tau1;

        if let Some(imp) = problem.impulses.get(next_impulse) {
            if t == imp.time && t < t_stop {
                let jump = imp.apply(&x);
                let right: Vec<f64> = x.iter().zip(&jump).map(|(a, b)| a + b).collect();
                if right.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteRhs { t });
                }
                impulse_nodes.push(ImpulseNode {
                    k: next_impulse + 1,
                    time: t,
                    x_left: x.clone(),
                    x_right: right.clone(),
                    step: steps,
                });
                x = right;
                next_impulse += 1;
            }
        }
    }
    if status.is_success() && tau < 0.0 {
        status = SolveStatus::TauNegative { index: steps };
    }

    Ok(DenseTrajectory {
        base_step,
        lambda: problem.lambda,
        segments: it.segments,
        impulse_nodes,
        history: problem.history.clone(),
        t_end: t,
        status,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{ImpulseEvent, JumpMap};

    struct AddOne;
    impl JumpMap for AddOne {
        fn jump(&self, _u: &[f64], out: &mut [f64]) {
            out[0] = 1.0;
        }
    }

    fn still(impulses: Vec<ImpulseEvent>) -> ProblemSpec {
        ProblemSpec::new(
            1,
            Arc::new(|_t: f64, _x: &[f64], _xd: &[f64], out: &mut [f64]| out[0] = 0.0),
            Arc::new(|_t: f64, _x: &[f64], _tau: f64| 0.0),
            impulses,
            HistoryFunction::constant(vec![3.0]),
            1.0,
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_field_is_constant_between_impulses() {
        let p = still(vec![ImpulseEvent::new(1.0, Arc::new(AddOne))]);
        let r = integrate_reference(&p, 0.01).unwrap();
        assert_eq!(r.status, SolveStatus::EndOfHorizon);
        assert_eq!(r.x(0.5).unwrap(), vec![3.0]);
        assert_eq!(r.x_left(1.0).unwrap(), vec![3.0]);
        assert_eq!(r.x(1.0).unwrap(), vec![4.0]);
        assert_eq!(r.x(2.0).unwrap(), vec![4.0]);
        assert_eq!(r.impulse_nodes.len(), 1);
    }

    #[test]
    fn step_guard() {
        let p = still(vec![ImpulseEvent::new(1.0, Arc::new(AddOne))]);
        assert!(matches!(integrate_reference(&p, 0.25), Err(Error::StepSizeTooLarge { .. })));
        assert!(integrate_reference(&p, 0.2).is_ok());
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| t * t * t - 2.0 * t;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let v = hermite(0.3, 0.0, 1.0, f(0.0), f(1.0), df(0.0), df(1.0));
        assert!((v - f(0.3)).abs() < 1e-15);
    }

    #[test]
    fn negative_delay_stops() {
        let p = ProblemSpec::new(
            1,
            Arc::new(|_t: f64, _x: &[f64], _xd: &[f64], out: &mut [f64]| out[0] = 0.0),
            Arc::new(|_t: f64, _x: &[f64], _tau: f64| -1.0),
            vec![],
            HistoryFunction::constant(vec![0.0]),
            0.5,
            2.0,
        )
        .unwrap();
        let r = integrate_reference(&p, 0.01).unwrap();
        assert!(matches!(r.status, SolveStatus::TauNegative { .. }));
        assert!(r.t_end < 0.52 && r.t_end > 0.5);
    }
}
