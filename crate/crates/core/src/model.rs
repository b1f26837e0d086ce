//! Domain types shared by the solvers, the analysis layer and the problem DSL.
//!
//! A problem is
//!
//! ```text
//!   x'(t)   = f(t, x(t), x(t - tau(t)))      t in [0, T]
//!   tau'(t) = g(t, x(t), tau(t))
//!   x(t_k)  = x(t_k-) + I_k(x(t_k-))          0 < t_1 < ... < t_K < T
//!   x(t)    = phi(t),  t <= 0;   tau(0) = lambda > 0
//! ```
//!
//! Every callable piece is a trait object so that problems can be built from
//! Rust closures or from parsed DSL expressions interchangeably. The optional
//! `source` methods let DSL-backed problems be written back to text.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side `f(t, x, x_delayed)` of the state equation.
pub trait StateRhs: Send + Sync {
    fn eval(&self, t: f64, x: &[f64], xd: &[f64], out: &mut [f64]);

    /// One DSL expression per component, if the field came from text.
    fn source(&self) -> Option<Vec<String>> {
        None
    }
}

/// Right-hand side `g(t, x, tau)` of the adaptive delay equation.
pub trait DelayRhs: Send + Sync {
    fn eval(&self, t: f64, x: &[f64], tau: f64) -> f64;

    fn source(&self) -> Option<String> {
        None
    }
}

/// Jump function `u -> I_k(u)`; the post-impulse state is `u + I_k(u)`.
pub trait JumpMap: Send + Sync {
    fn jump(&self, u: &[f64], out: &mut [f64]);

    /// DSL expressions for the post-jump state in `u1..un`.
    fn source(&self) -> Option<Vec<String>> {
        None
    }
}

/// A time-parametrized vector function, used for history segments.
pub trait PathFn: Send + Sync {
    fn eval(&self, t: f64, out: &mut [f64]);

    fn source(&self) -> Option<Vec<String>> {
        None
    }
}

impl<F> StateRhs for F
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
{
    fn eval(&self, t: f64, x: &[f64], xd: &[f64], out: &mut [f64]) {
        self(t, x, xd, out)
    }
}

impl<F> DelayRhs for F
where
    F: Fn(f64, &[f64], f64) -> f64 + Send + Sync,
{
    fn eval(&self, t: f64, x: &[f64], tau: f64) -> f64 {
        self(t, x, tau)
    }
}

impl<F> JumpMap for F
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn jump(&self, u: &[f64], out: &mut [f64]) {
        self(u, out)
    }
}

impl<F> PathFn for F
where
    F: Fn(f64, &mut [f64]) + Send + Sync,
{
    fn eval(&self, t: f64, out: &mut [f64]) {
        self(t, out)
    }
}

/// Constant path, the usual history tail.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantPath(pub Vec<f64>);

impl PathFn for ConstantPath {
    fn eval(&self, _t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }

    fn source(&self) -> Option<Vec<String>> {
        Some(self.0.iter().map(|v| crate::dsl::format_number(*v)).collect())
    }
}

/// Which one-sided value to take at a discontinuity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Initial function on `(-inf, 0]`.
///
/// `breakpoints` are `b_1 > b_2 > ... > b_m`, all strictly negative.
/// Segment 0 covers `[b_1, 0]`, segment `i` covers `[b_{i+1}, b_i)`, and the
/// tail covers `(-inf, b_m)`. With no breakpoints the tail covers everything.
/// At a breakpoint the value is taken from the segment on its right.
#[derive(Clone)]
pub struct HistoryFunction {
    dim: usize,
    breakpoints: Vec<f64>,
    segments: Vec<Arc<dyn PathFn>>,
    tail: Arc<dyn PathFn>,
    bound_hint: Option<f64>,
    lipschitz_hint: Option<f64>,
}

impl fmt::Debug for HistoryFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HistoryFunction")
            .field("dim", &self.dim)
            .field("breakpoints", &self.breakpoints)
            .field("bound_hint", &self.bound_hint)
            .field("lipschitz_hint", &self.lipschitz_hint)
            .finish_non_exhaustive()
    }
}

impl HistoryFunction {
    pub fn new(
        dim: usize,
        breakpoints: Vec<f64>,
        segments: Vec<Arc<dyn PathFn>>,
        tail: Arc<dyn PathFn>,
    ) -> Result<Self> {
        if breakpoints.len() != segments.len() {
            return Err(Error::Validation(format!(
                "history has {} breakpoints but {} segments",
                breakpoints.len(),
                segments.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite() || *b >= 0.0) {
            return Err(Error::Validation(
                "history breakpoints must be finite and negative".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Validation(
                "history breakpoints must be strictly decreasing".into(),
            ));
        }
        Ok(Self {
            dim,
            breakpoints,
            segments,
            tail,
            bound_hint: None,
            lipschitz_hint: None,
        })
    }

    /// History equal to `value` everywhere.
    pub fn constant(value: Vec<f64>) -> Self {
        let dim = value.len();
        Self {
            dim,
            breakpoints: Vec::new(),
            segments: Vec::new(),
            tail: Arc::new(ConstantPath(value)),
            bound_hint: None,
            lipschitz_hint: None,
        }
    }

    pub fn with_bound_hint(mut self, bound: f64) -> Self {
        self.bound_hint = Some(bound);
        self
    }

    pub fn with_lipschitz_hint(mut self, lipschitz: f64) -> Self {
        self.lipschitz_hint = Some(lipschitz);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Arc<dyn PathFn>] {
        &self.segments
    }

    pub fn tail(&self) -> &Arc<dyn PathFn> {
        &self.tail
    }

    pub fn bound_hint(&self) -> Option<f64> {
        self.bound_hint
    }

    pub fn lipschitz_hint(&self) -> Option<f64> {
        self.lipschitz_hint
    }

    /// Index of the piece covering `t` from the right: `0..m` are segments,
    /// `m` is the tail.
    pub fn piece_index(&self, t: f64) -> usize {
        self.breakpoints
            .iter()
            .position(|&b| t >= b)
            .unwrap_or(self.breakpoints.len())
    }

    /// Piece `idx` as numbered by [`piece_index`](Self::piece_index).
    pub fn piece(&self, idx: usize) -> &Arc<dyn PathFn> {
        self.segments.get(idx).unwrap_or(&self.tail)
    }

    /// Right-continuous value `phi(t)`. Values for `t > 0` are extrapolated
    /// from the first piece.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        self.piece(self.piece_index(t)).eval(t, out);
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    /// One-sided value; differs from [`eval`](Self::eval) only at breakpoints.
    pub fn eval_side(&self, t: f64, side: Side) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        match side {
            Side::Right => self.eval_into(t, &mut out),
            Side::Left => {
                let idx = self.piece_index(t);
                let at_break = self.breakpoints.get(idx).is_some_and(|&b| b == t);
                let piece = if at_break { idx + 1 } else { idx };
                self.piece(piece).eval(t, &mut out);
            }
        }
        out
    }
}

/// An impulse at `time` with jump `I_k`.
#[derive(Clone)]
pub struct ImpulseEvent {
    pub time: f64,
    pub jump: Arc<dyn JumpMap>,
}

impl fmt::Debug for ImpulseEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImpulseEvent")
            .field("time", &self.time)
            .finish_non_exhaustive()
    }
}

impl ImpulseEvent {
    pub fn new(time: f64, jump: Arc<dyn JumpMap>) -> Self {
        Self { time, jump }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.jump.jump(u, &mut out);
        out
    }
}

/// Optional declared constants used by the diagnostics in place of sampling.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Hints {
    /// Lipschitz constant of f in (x, x_delayed) on the a-priori ball.
    pub l1: Option<f64>,
    /// Lipschitz constant of g in (x, tau) on the a-priori ball.
    pub l2: Option<f64>,
    /// Global Lipschitz constant of the jump maps.
    pub l3: Option<f64>,
    /// Lipschitz constant of the history on its segments.
    pub l4: Option<f64>,
    /// Sup norm of the history.
    pub n_phi: Option<f64>,
    /// `max_t |f(t, 0, 0)|`.
    pub sup_f0: Option<f64>,
    /// `max_t |g(t, 0, 0)|`.
    pub sup_g0: Option<f64>,
    /// Sup of |f| on the a-priori ball.
    pub sup_f: Option<f64>,
    /// Sup of |g| on the a-priori ball.
    pub sup_g: Option<f64>,
}

impl Hints {
    pub fn is_empty(&self) -> bool {
        *self == Hints::default()
    }
}

/// Full description of an impulsive initial value problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub dim: usize,
    pub f: Arc<dyn StateRhs>,
    pub g: Arc<dyn DelayRhs>,
    pub impulses: Vec<ImpulseEvent>,
    pub history: HistoryFunction,
    pub lambda: f64,
    pub horizon: f64,
    pub hints: Hints,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("dim", &self.dim)
            .field("impulses", &self.impulses)
            .field("history", &self.history)
            .field("lambda", &self.lambda)
            .field("horizon", &self.horizon)
            .field("hints", &self.hints)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Builds and validates a problem. Impulses must already be sorted.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        f: Arc<dyn StateRhs>,
        g: Arc<dyn DelayRhs>,
        impulses: Vec<ImpulseEvent>,
        history: HistoryFunction,
        lambda: f64,
        horizon: f64,
    ) -> Result<Self> {
        let spec = Self {
            dim,
            f,
            g,
            impulses,
            history,
            lambda,
            horizon,
            hints: Hints::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_hints(mut self, hints: Hints) -> Self {
        self.hints = hints;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Validation("dimension must be positive".into()));
        }
        if self.history.dim() != self.dim {
            return Err(Error::Validation(format!(
                "history dimension {} does not match state dimension {}",
                self.history.dim(),
                self.dim
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Validation(format!(
                "initial delay lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Validation(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        let mut prev = 0.0;
        for (k, imp) in self.impulses.iter().enumerate() {
            if !(imp.time > prev && imp.time < self.horizon) {
                return Err(Error::Validation(format!(
                    "impulse {} at t = {} must lie strictly inside (0, {}) after the previous one",
                    k + 1,
                    imp.time,
                    self.horizon
                )));
            }
            prev = imp.time;
        }
        Ok(())
    }

    pub fn eval_f(&self, t: f64, x: &[f64], xd: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.f.eval(t, x, xd, &mut out);
        out
    }

    pub fn eval_g(&self, t: f64, x: &[f64], tau: f64) -> f64 {
        self.g.eval(t, x, tau)
    }

    pub fn impulse_times(&self) -> Vec<f64> {
        self.impulses.iter().map(|i| i.time).collect()
    }
}

/// Validated step size, `0 < h < h0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    pub h: f64,
    pub h0: f64,
}

impl MeshConfig {
    pub fn new(h: f64, problem: &ProblemSpec) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidStep(h));
        }
        let h0 = crate::engine::min_impulse_gap(problem);
        if h >= h0 {
            return Err(Error::StepSizeTooLarge { h, h0 });
        }
        Ok(Self { h, h0 })
    }
}

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SolveStatus {
    /// The requested end time (before the horizon) was reached.
    Completed,
    /// The delay became negative at mesh index `index`; the recursion stops.
    TauNegative { index: i64 },
    /// The problem horizon was reached.
    EndOfHorizon,
}

impl SolveStatus {
    pub fn is_success(&self) -> bool {
        !matches!(self, SolveStatus::TauNegative { .. })
    }
}

/// Mesh node `j` at time `j*h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub index: i64,
    pub time: f64,
    pub x: Vec<f64>,
    pub tau: f64,
}

/// Impulse handled inside step `step` (`step*h <= time < (step+1)*h`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseNode {
    /// 1-based impulse number.
    pub k: usize,
    pub time: f64,
    pub x_left: Vec<f64>,
    pub x_right: Vec<f64>,
    pub step: i64,
}

/// The discrete EPCA solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub h: f64,
    pub lambda: f64,
    pub nodes: Vec<Node>,
    pub impulse_nodes: Vec<ImpulseNode>,
    /// Value at `t_end` when it is not a mesh point.
    pub end_node: Option<Node>,
    pub t_end: f64,
    pub status: SolveStatus,
}

/// Parameters of the delayed impulsive Gronwall estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallParams {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    pub c: f64,
    pub k: u32,
}

impl GronwallParams {
    pub fn new(a0: f64, a1: f64, a2: f64, b: f64, c: f64, k: u32) -> Result<Self> {
        let p = Self { a0, a1, a2, b, c, k };
        if [a0, a1, a2, b, c].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Validation(format!(
                "Gronwall parameters must be nonnegative: {p:?}"
            )));
        }
        Ok(p)
    }
}

/// One row of an error table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub s: f64,
    pub i: i64,
    pub x_h: Vec<f64>,
    pub tau_h: f64,
    pub e_x: f64,
    pub e_tau: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_piece_history() -> HistoryFunction {
        // exp(-t) + 1 on [-3, 0], e^3 + 1 below
        let seg: Arc<dyn PathFn> = Arc::new(|t: f64, out: &mut [f64]| out[0] = (-t).exp() + 1.0);
        let tail = Arc::new(ConstantPath(vec![3f64.exp() + 1.0]));
        HistoryFunction::new(1, vec![-3.0], vec![seg], tail).unwrap()
    }

    #[test]
    fn history_pieces() {
        let h = two_piece_history();
        assert_eq!(h.eval(0.0), vec![2.0]);
        assert_eq!(h.piece_index(-3.0), 0);
        assert_eq!(h.piece_index(-3.0000001), 1);
        assert_eq!(h.eval(-10.0), vec![3f64.exp() + 1.0]);
    }

    #[test]
    fn history_right_continuity() {
        // jump at -1: value 5 on [-1, 0], 0 below
        let seg: Arc<dyn PathFn> = Arc::new(|_t: f64, out: &mut [f64]| out[0] = 5.0);
        let h = HistoryFunction::new(1, vec![-1.0], vec![seg], Arc::new(ConstantPath(vec![0.0])))
            .unwrap()
            .with_lipschitz_hint(0.0);
        let eps = 1e-9;
        let lip = h.lipschitz_hint().unwrap();
        assert!((h.eval(-1.0)[0] - h.eval(-1.0 + eps)[0]).abs() <= lip * eps + 1e-15);
        assert_eq!(h.eval_side(-1.0, Side::Left), vec![0.0]);
        assert_eq!(h.eval_side(-1.0, Side::Right), vec![5.0]);

        let h = two_piece_history();
        for &b in h.breakpoints() {
            let d = (h.eval(b)[0] - h.eval(b + eps)[0]).abs();
            // Lipschitz constant of exp(-t)+1 on [-3,0] is e^3
            assert!(d <= 3f64.exp() * eps * 1.0001);
        }
    }

    #[test]
    fn history_rejects_bad_breakpoints() {
        let seg: Arc<dyn PathFn> = Arc::new(ConstantPath(vec![0.0]));
        let tail: Arc<dyn PathFn> = Arc::new(ConstantPath(vec![0.0]));
        assert!(HistoryFunction::new(1, vec![-1.0, -0.5], vec![seg.clone(), seg.clone()], tail.clone()).is_err());
        assert!(HistoryFunction::new(1, vec![0.0], vec![seg.clone()], tail.clone()).is_err());
        assert!(HistoryFunction::new(1, vec![-1.0], vec![], tail).is_err());
    }

    fn simple(impulses: Vec<ImpulseEvent>, lambda: f64, horizon: f64) -> Result<ProblemSpec> {
        ProblemSpec::new(
            1,
            Arc::new(|_t: f64, _x: &[f64], _xd: &[f64], out: &mut [f64]| out[0] = 0.0),
            Arc::new(|_t: f64, _x: &[f64], _tau: f64| 1.0),
            impulses,
            HistoryFunction::constant(vec![0.0]),
            lambda,
            horizon,
        )
    }

    #[test]
    fn problem_validation() {
        let zero: Arc<dyn JumpMap> = Arc::new(|_u: &[f64], out: &mut [f64]| out[0] = 0.0);
        assert!(simple(vec![], 1.0, 1.0).is_ok());
        assert!(simple(vec![], 0.0, 1.0).is_err());
        assert!(simple(vec![], 1.0, -1.0).is_err());
        assert!(simple(vec![ImpulseEvent::new(0.0, zero.clone())], 1.0, 1.0).is_err());
        assert!(simple(vec![ImpulseEvent::new(1.0, zero.clone())], 1.0, 1.0).is_err());
        assert!(simple(
            vec![ImpulseEvent::new(0.6, zero.clone()), ImpulseEvent::new(0.4, zero.clone())],
            1.0,
            1.0
        )
        .is_err());
        assert!(simple(vec![ImpulseEvent::new(0.5, zero)], 1.0, 1.0).is_ok());
    }

    #[test]
    fn mesh_config_guard() {
        let p = simple(vec![], 1.0, 4.0).unwrap();
        assert!(MeshConfig::new(0.1, &p).is_ok());
        assert!(matches!(MeshConfig::new(4.0, &p), Err(Error::StepSizeTooLarge { .. })));
        assert!(matches!(MeshConfig::new(0.0, &p), Err(Error::InvalidStep(_))));
    }

    #[test]
    fn gronwall_params_nonnegative() {
        assert!(GronwallParams::new(1.0, 0.0, 0.0, 0.0, 0.0, 0).is_ok());
        assert!(GronwallParams::new(-1.0, 0.0, 0.0, 0.0, 0.0, 0).is_err());
        assert!(GronwallParams::new(1.0, 0.0, 0.0, f64::NAN, 0.0, 0).is_err());
    }
}
