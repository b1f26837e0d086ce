use serde::{Deserialize, Serialize};

use super::gronwall::gronwall_bound;
use crate::engine::min_impulse_gap;
use crate::error::{Error, Result};
use crate::model::{GronwallParams, ProblemSpec};

/// Where a constant came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Taken from a problem hint.
    Declared,
    /// Grid sampling; a lower estimate of the true supremum.
    Sampled { grid: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub method: Method,
}

impl Estimate {
    fn declared(value: f64) -> Self {
        Self { value, method: Method::Declared }
    }

    fn sampled(value: f64, grid: usize) -> Self {
        Self { value, method: Method::Sampled { grid } }
    }
}

/// Constants of the a-priori estimate for the EPCA solution.
///
/// `h_star` is reported as `h0`: the uniform-continuity modulus that would
/// refine it is not constructive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsEstimate {
    pub h0: f64,
    pub h_star: f64,
    pub n_phi: Estimate,
    pub sup_f0: Estimate,
    pub sup_g0: Estimate,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub l1: Estimate,
    pub l2: Estimate,
    pub l3: Estimate,
    pub l4: Estimate,
    /// `L = L1 + L2`.
    pub l: f64,
    /// Gronwall bound at `t = 0` that the a-priori radius must exceed.
    pub gronwall: f64,
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: Estimate,
    #[serde(rename = "M3")]
    pub m3: Estimate,
    /// Largest grid value `alpha <= T` with `gronwall * e^{2 L alpha} < M1`.
    pub alpha: Option<f64>,
    pub caveats: Vec<String>,
}

/// Samples per axis used when the caller does not choose.
pub const DEFAULT_GRID: usize = 21;

/// Upper limit on grid points per sampled supremum.
const POINT_BUDGET: usize = 2_000_000;

const SAFETY: f64 = 1.01;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
}

/// Per-axis resolution keeping `res_t * res^axes` within the point budget.
fn axis_resolution(res: usize, res_t: usize, axes: usize) -> usize {
    let mut r = res.max(2);
    while r > 2 && res_t.saturating_mul(r.saturating_pow(axes as u32)) > POINT_BUDGET {
        r -= 1;
    }
    r
}

/// Sup norm of `eval` over the product grid and the largest difference
/// quotient between neighbours along every axis except the first.
fn sample(axes: &[Vec<f64>], eval: &mut dyn FnMut(&[f64]) -> Vec<f64>) -> (f64, f64) {
    let total: usize = axes.iter().map(Vec::len).product();
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(total);
    let mut idx = vec![0usize; axes.len()];
    let mut point: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut sup = 0.0f64;
    for _ in 0..total {
        for (k, &i) in idx.iter().enumerate() {
            point[k] = axes[k][i];
        }
        let v = eval(&point);
        sup = sup.max(norm(&v));
        values.push(v);
        // odometer, last axis fastest
        for k in (0..axes.len()).rev() {
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }

    let mut lip = 0.0f64;
    let mut stride = 1;
    for k in (1..axes.len()).rev() {
        let len = axes[k].len();
        for flat in 0..total {
            let i = (flat / stride) % len;
            if i + 1 < len {
                let dq = diff_norm(&values[flat], &values[flat + stride]) / (axes[k][i + 1] - axes[k][i]);
                lip = lip.max(dq);
            }
        }
        stride *= len;
    }
    (sup, lip)
}

fn require(value: Option<f64>, name: &str, grid: Option<usize>, missing: &mut Vec<String>) -> Option<Estimate> {
    match (value, grid) {
        (Some(v), _) => Some(Estimate::declared(v)),
        (None, Some(_)) => None,
        (None, None) => {
            missing.push(name.to_string());
            None
        }
    }
}

/// Sampled `max |g|` over `[t0, t1] x box(x_lo, x_hi) x [tau_lo, tau_hi]`.
pub fn sup_g_over_box(
    problem: &ProblemSpec,
    t: (f64, f64),
    x_lo: &[f64],
    x_hi: &[f64],
    tau: (f64, f64),
    res: usize,
) -> f64 {
    let n = problem.dim;
    let r = axis_resolution(res, res, n + 1);
    let mut axes = vec![linspace(t.0, t.1, res.max(2))];
    axes.extend((0..n).map(|i| linspace(x_lo[i], x_hi[i], r)));
    axes.push(linspace(tau.0, tau.1, r));
    sample(&axes, &mut |p: &[f64]| vec![problem.eval_g(p[0], &p[1..=n], p[n + 1])]).0
}

/// Computes the a-priori constants from hints, sampling whatever is missing
/// when `grid` is given. With `grid = None` every needed hint must be present.
pub fn estimate_constants(problem: &ProblemSpec, grid: Option<usize>) -> Result<ConstantsEstimate> {
    let hints = &problem.hints;
    let n = problem.dim;
    let horizon = problem.horizon;
    let res = grid.map(|g| g.max(2));
    let mut caveats = vec!["h_star is reported as h0".to_string()];
    let mut missing = Vec::new();

    let n_phi_hint = hints.n_phi.or(problem.history.bound_hint());
    let l4_hint = hints.l4.or(problem.history.lipschitz_hint());
    let k = problem.impulses.len();
    let l3_hint = if k == 0 { Some(0.0) } else { hints.l3 };

    let declared = [
        require(n_phi_hint, "n_phi", res, &mut missing),
        require(hints.sup_f0, "sup_f0", res, &mut missing),
        require(hints.sup_g0, "sup_g0", res, &mut missing),
        require(l3_hint, "l3", res, &mut missing),
        require(hints.l1, "l1", res, &mut missing),
        require(hints.l2, "l2", res, &mut missing),
        require(l4_hint, "l4", res, &mut missing),
        require(hints.sup_f, "sup_f", res, &mut missing),
        require(hints.sup_g, "sup_g", res, &mut missing),
    ];
    if !missing.is_empty() {
        return Err(Error::MissingHints(missing.join(", ")));
    }
    let [n_phi, sup_f0, sup_g0, l3, l1, l2, l4, sup_f, sup_g] = declared;
    let res = res.unwrap_or(DEFAULT_GRID);
    let times = linspace(0.0, horizon, res);
    let zero = vec![0.0; n];

    let n_phi = n_phi.unwrap_or_else(|| {
        let lo = problem.history.breakpoints().last().copied().unwrap_or(0.0).min(0.0)
            - problem.lambda.max(horizon)
            - 1.0;
        let ts = linspace(lo, 0.0, res * 10);
        let sup = ts.iter().fold(0.0f64, |m, &t| m.max(norm(&problem.history.eval(t))));
        Estimate::sampled(sup, res * 10)
    });
    let sup_f0 = sup_f0.unwrap_or_else(|| {
        let sup = times.iter().fold(0.0f64, |m, &t| m.max(norm(&problem.eval_f(t, &zero, &zero))));
        Estimate::sampled(sup, res)
    });
    let sup_g0 = sup_g0.unwrap_or_else(|| {
        let sup = times.iter().fold(0.0f64, |m, &t| m.max(problem.eval_g(t, &zero, 0.0).abs()));
        Estimate::sampled(sup, res)
    });

    let a0 = n_phi.value + problem.lambda;
    let a1 = horizon * (sup_f0.value + sup_g0.value);
    let a2 = problem.impulses.iter().fold(0.0f64, |m, imp| m.max(norm(&imp.apply(&zero))));

    let l3 = l3.unwrap_or_else(|| {
        let radius = 10.0 * (a0 + a1 + a2) + 1.0;
        let r = axis_resolution(res, 1, n);
        let mut axes = vec![vec![0.0]];
        axes.extend((0..n).map(|_| linspace(-radius, radius, r)));
        let lip = problem.impulses.iter().fold(0.0f64, |m, imp| {
            let mut out = vec![0.0; n];
            let (_, lip) = sample(&axes, &mut |p: &[f64]| {
                imp.jump.jump(&p[1..], &mut out);
                out.clone()
            });
            m.max(lip)
        });
        Estimate::sampled(lip, r)
    });
    if l3.value.is_infinite() || l3.value.is_nan() {
        return Err(Error::Validation("jump maps are not Lipschitz on the sampled cube".into()));
    }

    let params = GronwallParams::new(a0, a1, a2, 0.0, l3.value, k as u32)?;
    let gronwall = gronwall_bound(&params, 0.0);
    let m1 = SAFETY * gronwall;

    let ball = linspace(-m1, m1, axis_resolution(res, res, 2 * n));
    let (sampled_f, sampled_l1) = if sup_f.is_none() || l1.is_none() {
        let mut axes = vec![times.clone()];
        axes.extend((0..2 * n).map(|_| ball.clone()));
        let mut out = vec![0.0; n];
        let (s, l) = sample(&axes, &mut |p: &[f64]| {
            problem.f.eval(p[0], &p[1..=n], &p[n + 1..], &mut out);
            out.clone()
        });
        (Some(s), Some(l))
    } else {
        (None, None)
    };
    let (sampled_g, sampled_l2) = if sup_g.is_none() || l2.is_none() {
        let r = axis_resolution(res, res, n + 1);
        let mut axes = vec![times.clone()];
        axes.extend((0..n).map(|_| linspace(-m1, m1, r)));
        axes.push(linspace(-m1, m1, r));
        let (_, l) = sample(&axes, &mut |p: &[f64]| vec![problem.eval_g(p[0], &p[1..=n], p[n + 1])]);
        *axes.last_mut().expect("tau axis") = linspace(0.0, m1, r);
        let (s, _) = sample(&axes, &mut |p: &[f64]| vec![problem.eval_g(p[0], &p[1..=n], p[n + 1])]);
        (Some(s), Some(l))
    } else {
        (None, None)
    };
    let l1 = l1.unwrap_or_else(|| Estimate::sampled(sampled_l1.unwrap_or(0.0), res));
    let l2 = l2.unwrap_or_else(|| Estimate::sampled(sampled_l2.unwrap_or(0.0), res));
    let sup_f = sup_f.unwrap_or_else(|| Estimate::sampled(sampled_f.unwrap_or(0.0), res));
    let m3 = sup_g.unwrap_or_else(|| Estimate::sampled(sampled_g.unwrap_or(0.0), res));

    let l4 = l4.unwrap_or_else(|| {
        let hist = &problem.history;
        let mut lip = 0.0f64;
        let mut edges = vec![0.0];
        edges.extend(hist.breakpoints().iter().copied().filter(|b| *b > -m1));
        edges.push(-m1);
        for w in edges.windows(2) {
            let (hi, lo) = (w[0], w[1]);
            // pieces are closed on the left; stay off the right end except at 0
            let top = if hi == 0.0 { 0.0 } else { hi - (hi - lo) * 1e-9 };
            let ts = linspace(lo, top, res * 10);
            for p in ts.windows(2) {
                let dq = diff_norm(&hist.eval(p[1]), &hist.eval(p[0])) / (p[1] - p[0]);
                lip = lip.max(dq);
            }
        }
        Estimate::sampled(lip, res * 10)
    });

    let m2 = Estimate {
        value: sup_f.value.max(l4.value),
        method: if matches!(sup_f.method, Method::Declared) && matches!(l4.method, Method::Declared) {
            Method::Declared
        } else {
            Method::Sampled { grid: res }
        },
    };

    let l = l1.value + l2.value;
    let alpha = linspace(0.0, horizon, res.max(101))
        .into_iter()
        .skip(1)
        .rfind(|a| gronwall * (2.0 * l * a).exp() < m1);
    if matches!(m2.method, Method::Sampled { .. }) || matches!(m3.method, Method::Sampled { .. }) {
        caveats.push("sampled suprema are lower estimates".to_string());
    }

    let h0 = min_impulse_gap(problem);
    Ok(ConstantsEstimate {
        h0,
        h_star: h0,
        n_phi,
        sup_f0,
        sup_g0,
        a0,
        a1,
        a2,
        l1,
        l2,
        l3,
        l4,
        l,
        gronwall,
        m1,
        m2,
        m3,
        alpha,
        caveats,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::HistoryFunction;

    fn trivial() -> ProblemSpec {
        ProblemSpec::new(
            1,
            Arc::new(|_t: f64, _x: &[f64], _xd: &[f64], out: &mut [f64]| out[0] = 0.0),
            Arc::new(|_t: f64, _x: &[f64], _tau: f64| 1.0),
            vec![],
            HistoryFunction::constant(vec![0.0]),
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn trivial_problem_constants() {
        let c = estimate_constants(&trivial(), Some(11)).unwrap();
        assert_eq!((c.a0, c.a1, c.a2), (1.0, 1.0, 0.0));
        assert!((c.m1 - 2.02).abs() < 1e-12);
        assert_eq!(c.m3.value, 1.0);
        assert_eq!(c.l3.value, 0.0);
        assert_eq!(c.m2.value, 0.0);
        assert_eq!(c.alpha, Some(1.0));
        assert_eq!(c.h0, 1.0);
    }

    #[test]
    fn missing_hints_without_sampling() {
        match estimate_constants(&trivial(), None) {
            Err(Error::MissingHints(names)) => assert!(names.contains("l1")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn declared_hints_skip_sampling() {
        let p = trivial().with_hints(crate::model::Hints {
            l1: Some(0.0),
            l2: Some(0.0),
            l4: Some(0.0),
            n_phi: Some(0.0),
            sup_f0: Some(0.0),
            sup_g0: Some(1.0),
            sup_f: Some(0.0),
            sup_g: Some(1.0),
            ..Default::default()
        });
        let c = estimate_constants(&p, None).unwrap();
        assert!((c.m1 - 2.02).abs() < 1e-12);
        assert_eq!(c.m3.method, Method::Declared);
    }
}
