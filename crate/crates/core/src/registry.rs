//! Integrators selectable by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::engine::solve;
use crate::error::{Error, Result};
use crate::model::{ImpulseNode, ProblemSpec, SolveStatus};
use crate::oracle::integrate_reference_to;
use crate::solution::{EpcaSolution, Solution};

/// Output of an integrator run.
pub trait Solved: Solution {
    fn status(&self) -> SolveStatus;

    /// Last covered time.
    fn t_end(&self) -> f64;

    /// Times of the stored nodes, ascending, starting at 0.
    fn grid(&self) -> Vec<f64>;

    fn impulses(&self) -> &[ImpulseNode];
}

impl Solved for EpcaSolution {
    fn status(&self) -> SolveStatus {
        self.trajectory.status
    }

    fn t_end(&self) -> f64 {
        self.trajectory.t_end
    }

    fn grid(&self) -> Vec<f64> {
        let mut g: Vec<f64> = self.trajectory.nodes.iter().map(|n| n.time).collect();
        g.extend(self.trajectory.end_node.as_ref().map(|n| n.time));
        g
    }

    fn impulses(&self) -> &[ImpulseNode] {
        &self.trajectory.impulse_nodes
    }
}

impl Solved for crate::oracle::DenseTrajectory {
    fn status(&self) -> SolveStatus {
        self.status
    }

    fn t_end(&self) -> f64 {
        self.t_end
    }

    fn grid(&self) -> Vec<f64> {
        crate::oracle::DenseTrajectory::grid(self)
    }

    fn impulses(&self) -> &[ImpulseNode] {
        &self.impulse_nodes
    }
}

pub trait Integrator: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn integrate(&self, problem: &ProblemSpec, step: f64, t_end: f64) -> Result<Box<dyn Solved>>;
}

pub struct EpcaIntegrator;

impl Integrator for EpcaIntegrator {
    fn name(&self) -> &'static str {
        "epca"
    }

    fn description(&self) -> &'static str {
        "piecewise constant argument scheme (first order)"
    }

    fn integrate(&self, problem: &ProblemSpec, step: f64, t_end: f64) -> Result<Box<dyn Solved>> {
        let trajectory = solve(problem, step, t_end)?;
        Ok(Box::new(EpcaSolution { trajectory, history: problem.history.clone() }))
    }
}

pub struct ReferenceIntegrator;

impl Integrator for ReferenceIntegrator {
    fn name(&self) -> &'static str {
        "reference"
    }

    fn description(&self) -> &'static str {
        "RK4 method of steps with dense Hermite output"
    }

    fn integrate(&self, problem: &ProblemSpec, step: f64, t_end: f64) -> Result<Box<dyn Solved>> {
        Ok(Box::new(integrate_reference_to(problem, step, t_end)?))
    }
}

#[derive(Clone)]
pub struct IntegratorRegistry {
    entries: BTreeMap<&'static str, Arc<dyn Integrator>>,
}

impl Default for IntegratorRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(EpcaIntegrator));
        r.register(Arc::new(ReferenceIntegrator));
        r
    }
}

impl IntegratorRegistry {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    /// Adds or replaces an integrator under its own name.
    pub fn register(&mut self, integrator: Arc<dyn Integrator>) {
        self.entries.insert(integrator.name(), integrator);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Integrator>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownIntegrator(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}
