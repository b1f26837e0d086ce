//! The two bundled example problems and their closed-form solutions.

use std::sync::Arc;

use super::problem::parse_problem;
use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::solution::Solution;

pub const EXAMPLE1_SRC: &str = include_str!("../../problems/example1.prob");
pub const EXAMPLE1_RAW_SRC: &str = include_str!("../../problems/example1-raw.prob");
pub const EXAMPLE2_SRC: &str = include_str!("../../problems/example2.prob");

pub const BUILTIN_NAMES: [&str; 3] = ["example1", "example1-raw", "example2"];

/// A bundled problem with its exact solution.
#[derive(Clone)]
pub struct Builtin {
    pub name: &'static str,
    pub source: &'static str,
    pub problem: ProblemSpec,
    pub exact: Arc<dyn ExactSolution>,
}

/// Closed-form solution with known smooth pieces.
pub trait ExactSolution: Solution {
    /// Interior points of `[0, T]` where the solution or its derivative may
    /// be non-smooth, in increasing order.
    fn breaks(&self) -> Vec<f64>;
}

pub fn builtin(name: &str) -> Result<Builtin> {
    let (name, source, exact): (&'static str, &'static str, Arc<dyn ExactSolution>) = match name {
        "example1" => ("example1", EXAMPLE1_SRC, Arc::new(Example1Exact)),
        "example1-raw" => ("example1-raw", EXAMPLE1_RAW_SRC, Arc::new(Example1Exact)),
        "example2" => ("example2", EXAMPLE2_SRC, Arc::new(Example2Exact)),
        other => return Err(Error::UnknownProblem(other.to_string())),
    };
    Ok(Builtin {
        name,
        source,
        problem: parse_problem(source)?,
        exact,
    })
}

/// `x = e^{-t} + 1`, `tau = 0.3 e^{-t} sin 5t + 2`, extended by the history.
#[derive(Debug, Clone, Copy, Default)]
pub struct Example1Exact;

impl Solution for Example1Exact {
    fn dim(&self) -> usize {
        1
    }

    fn x(&self, t: f64) -> Result<Vec<f64>> {
        Ok(vec![if t >= -3.0 { (-t).exp() + 1.0 } else { 3f64.exp() + 1.0 }])
    }

    fn tau(&self, t: f64) -> Result<f64> {
        Ok(if t <= 0.0 { 2.0 } else { 0.3 * (-t).exp() * (5.0 * t).sin() + 2.0 })
    }
}

impl ExactSolution for Example1Exact {
    fn breaks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Branch switch points of the impulsive example: the two impulses, then the
/// times where `t - tau(t)` reaches 0, 3/4 and 3/2.
pub const EXAMPLE2_BREAKS: [f64; 5] = [0.75, 1.5, 2.702320978, 3.488254843, 4.218920247];

const RATE_FAST: f64 = 0.4791287848;
const RATE_SLOW: f64 = 0.02087121525;

/// Piecewise closed form of the impulsive example. The last three branches use
/// coefficients rounded to ten significant digits.
///
/// The switch at 3.488254843 is early: integrating accurately puts the
/// crossing of `t - tau(t)` through 3/4 near 3.48897, so from there on these
/// branches are off by about 3e-4. They are kept as given because reference
/// error values were computed against them.
#[derive(Debug, Clone, Copy, Default)]
pub struct Example2Exact;

impl Example2Exact {
    fn branch(t: f64) -> usize {
        EXAMPLE2_BREAKS.iter().take_while(|&&b| t >= b).count()
    }

    fn x_branch(branch: usize, t: f64) -> f64 {
        let fast = (-RATE_FAST * t).exp();
        let slow = (-RATE_SLOW * t).exp();
        match branch {
            0 => -t / 5.0 + 1.0,
            1 => -t / 5.0 + 3.0,
            2 => -t / 5.0 + 9.0 / 4.0,
            3 => -110.0000000 - 0.1490476191 * fast + 112.5160738 * slow + 2.000000001 * t,
            4 => -130.0000000 - 0.3512993334 * fast + 134.0673650 * slow + 2.000000001 * t,
            _ => -122.5000000 - 0.2436621429 * fast + 125.8614408 * slow + 2.000000001 * t,
        }
    }

    fn tau_branch(branch: usize, t: f64) -> f64 {
        let fast = (-RATE_FAST * t).exp();
        let slow = (-RATE_SLOW * t).exp();
        let half = (-t / 2.0).exp();
        let e38 = (3.0f64 / 8.0).exp();
        let e34 = (3.0f64 / 4.0).exp();
        match branch {
            0 => 27.0 / 10.0 - t / 10.0 - 7.0 / 10.0 * half,
            1 => 37.0 / 10.0 - t / 10.0 - half / 10.0 * (10.0 * e38 + 7.0),
            2 => 133.0 / 40.0 - t / 10.0 - half / 40.0 * (-15.0 * e34 + 40.0 * e38 + 28.0),
            3 => -55.00000002 + 58.70867993 * slow - 1.785325143 * fast + 1.000000001 * t,
            4 => -65.00000002 + 69.95372081 * slow - 4.207940644 * fast + 1.000000001 * t,
            _ => -61.25000002 + 65.67203060 * slow - 2.918638192 * fast + 1.000000001 * t,
        }
    }
}

impl Solution for Example2Exact {
    fn dim(&self) -> usize {
        1
    }

    fn x(&self, t: f64) -> Result<Vec<f64>> {
        Ok(vec![if t < 0.0 { 1.0 } else { Self::x_branch(Self::branch(t), t) }])
    }

    fn x_left(&self, t: f64) -> Result<Vec<f64>> {
        if t <= 0.0 {
            return Ok(vec![1.0]);
        }
        let b = Self::branch(t);
        let at_switch = b > 0 && EXAMPLE2_BREAKS[b - 1] == t;
        Ok(vec![Self::x_branch(if at_switch { b - 1 } else { b }, t)])
    }

    fn tau(&self, t: f64) -> Result<f64> {
        Ok(if t <= 0.0 { 2.0 } else { Self::tau_branch(Self::branch(t), t) })
    }
}

impl ExactSolution for Example2Exact {
    fn breaks(&self) -> Vec<f64> {
        EXAMPLE2_BREAKS.to_vec()
    }
}
