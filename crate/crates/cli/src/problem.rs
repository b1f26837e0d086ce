use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use epca_core::dsl::{builtin, parse_problem, ExactSolution, BUILTIN_NAMES};
use epca_core::{integrate_reference, ProblemSpec, Solution};

pub struct Loaded {
    pub name: String,
    pub problem: ProblemSpec,
    pub exact: Option<Arc<dyn ExactSolution>>,
}

/// A built-in name or a path to a problem file.
pub fn load(arg: &str) -> Result<Loaded> {
    if BUILTIN_NAMES.contains(&arg) {
        let b = builtin(arg)?;
        return Ok(Loaded { name: b.name.to_string(), problem: b.problem, exact: Some(b.exact) });
    }
    let path = Path::new(arg);
    let text = std::fs::read_to_string(path).with_context(|| {
        format!("`{arg}` is neither a built-in problem ({}) nor a readable file", BUILTIN_NAMES.join(", "))
    })?;
    let problem = parse_problem(&text).with_context(|| format!("{}", path.display()))?;
    Ok(Loaded { name: arg.to_string(), problem, exact: None })
}

/// Base step of the reference solution used in place of a closed form.
pub fn oracle_step(problem: &ProblemSpec) -> f64 {
    (epca_core::engine::min_impulse_gap(problem) / 8.0).min(1e-4)
}

/// The closed-form solution, or the reference integrator when asked for
/// (or when no closed form exists).
pub fn reference(loaded: &Loaded, from_oracle: bool) -> Result<Arc<dyn Solution>> {
    match (&loaded.exact, from_oracle) {
        (Some(exact), false) => Ok(exact.clone() as Arc<dyn Solution>),
        _ => {
            let r = integrate_reference(&loaded.problem, oracle_step(&loaded.problem))
                .context("reference integration failed")?;
            Ok(Arc::new(r))
        }
    }
}
