use serde::{Deserialize, Serialize};

use crate::engine::{mesh_index, solve};
use crate::error::{Error, Result};
use crate::model::{ErrorRow, HistoryFunction, ProblemSpec, Trajectory};
use crate::solution::Solution;

/// Errors below this are treated as rounding noise when fitting an order.
pub const ERROR_FLOOR: f64 = 1e-12;

fn max_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// Errors of a trajectory against a reference at mesh points `times`.
pub fn error_table(
    traj: &Trajectory,
    history: &HistoryFunction,
    exact: &dyn Solution,
    times: &[f64],
) -> Result<Vec<ErrorRow>> {
    times
        .iter()
        .map(|&s| {
            let i = mesh_index(s, traj.h).ok_or(Error::NotAMeshPoint { t: s, h: traj.h })?;
            let x_h = traj.eval_x(history, s)?;
            let tau_h = traj.eval_tau(s)?;
            let e_x = max_norm_diff(&x_h, &exact.x(s)?);
            let e_tau = (tau_h - exact.tau(s)?).abs();
            Ok(ErrorRow { s, i, x_h, tau_h, e_x, e_tau })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelError {
    pub h: f64,
    /// Max of `e_x` over the sample times.
    pub e_x: f64,
    pub e_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelFailure {
    pub h: f64,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderStatus {
    Fitted,
    /// Fewer than two levels have errors above [`ERROR_FLOOR`].
    FloorLimited,
    /// No usable levels at all.
    Undefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub levels: Vec<LevelError>,
    /// `e(h_i) / e(h_{i+1})` for consecutive successful levels.
    pub ratios: Vec<f64>,
    pub fitted_order: Option<f64>,
    pub status: OrderStatus,
    pub failures: Vec<LevelFailure>,
}

fn level_error(problem: &ProblemSpec, exact: &dyn Solution, h: f64, times: &[f64]) -> Result<LevelError> {
    let t_end = times.iter().copied().fold(0.0, f64::max);
    let traj = solve(problem, h, t_end)?;
    if !traj.status.is_success() {
        return Err(Error::Validation(format!("solve stopped early: {:?}", traj.status)));
    }
    let rows = error_table(&traj, &problem.history, exact, times)?;
    Ok(LevelError {
        h,
        e_x: rows.iter().map(|r| r.e_x).fold(0.0, f64::max),
        e_tau: rows.iter().map(|r| r.e_tau).fold(0.0, f64::max),
    })
}

/// Least-squares slope of `ln e` against `ln h`.
pub fn fit_order(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| *e >= ERROR_FLOOR && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Solves at every level (concurrently), measures the max state error over
/// `times` and fits the observed order.
pub fn convergence_order(
    problem: &ProblemSpec,
    exact: &dyn Solution,
    h_levels: &[f64],
    times: &[f64],
) -> Result<OrderEstimate> {
    if h_levels.len() < 3 {
        return Err(Error::TooFewLevels(h_levels.len()));
    }
    let results: Vec<Result<LevelError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = h_levels
            .iter()
            .map(|&h| scope.spawn(move || level_error(problem, exact, h, times)))
            .collect();
        handles
            .into_iter()
            .map(|handle| handle.join().expect("level worker panicked"))
            .collect()
    });

    let mut levels = Vec::new();
    let mut failures = Vec::new();
    for (h, r) in h_levels.iter().zip(results) {
        match r {
            Ok(l) => levels.push(l),
            Err(e) => failures.push(LevelFailure { h: *h, error: e.to_string() }),
        }
    }
    let ratios = levels.windows(2).map(|w| w[0].e_x / w[1].e_x).collect();
    let points: Vec<(f64, f64)> = levels.iter().map(|l| (l.h, l.e_x)).collect();
    let fitted_order = fit_order(&points);
    let status = if fitted_order.is_some() {
        OrderStatus::Fitted
    } else if levels.is_empty() || levels.iter().all(|l| l.e_x == 0.0) {
        OrderStatus::Undefined
    } else {
        OrderStatus::FloorLimited
    };
    Ok(OrderEstimate { levels, ratios, fitted_order, status, failures })
}
