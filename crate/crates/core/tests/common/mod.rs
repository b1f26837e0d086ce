#![allow(dead_code)]

use epca_core::dsl::{BinOp, CmpOp, Cond, Expr, Func, Var};
use rand::Rng;

const VARS: [Var; 5] = [Var::T, Var::Tau, Var::X(1), Var::Xd(1), Var::U(1)];
const OPS: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow];
const CMPS: [CmpOp; 6] = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne];

fn literal<R: Rng>(rng: &mut R) -> f64 {
    match rng.gen_range(0..4) {
        0 => rng.gen_range(0..100) as f64,
        1 => rng.gen_range(0.0..10.0),
        2 => rng.gen_range(0.0..1e-6),
        _ => rng.gen_range(0.0..1e12),
    }
}

fn leaf<R: Rng>(rng: &mut R) -> Expr {
    if rng.gen_bool(0.5) {
        Expr::Num(literal(rng))
    } else {
        Expr::Var(VARS[rng.gen_range(0..VARS.len())])
    }
}

/// Random expression tree of at most `depth` levels with nonnegative literals.
pub fn random_expr<R: Rng>(rng: &mut R, depth: u32) -> Expr {
    if depth <= 1 || rng.gen_bool(0.2) {
        return leaf(rng);
    }
    let d = depth - 1;
    match rng.gen_range(0..10) {
        0 => Expr::Neg(Box::new(random_expr(rng, d))),
        1 | 2 => {
            let f = Func::ALL[rng.gen_range(0..Func::ALL.len())];
            Expr::Call(f, (0..f.arity()).map(|_| random_expr(rng, d)).collect())
        }
        3 if depth >= 3 => {
            let arms = (0..rng.gen_range(1..3))
                .map(|_| {
                    let cond = Cond {
                        lhs: random_expr(rng, d - 1),
                        op: CMPS[rng.gen_range(0..CMPS.len())],
                        rhs: random_expr(rng, d - 1),
                    };
                    (cond, random_expr(rng, d))
                })
                .collect();
            Expr::Piecewise { arms, otherwise: Box::new(random_expr(rng, d)) }
        }
        _ => Expr::bin(OPS[rng.gen_range(0..OPS.len())], random_expr(rng, d), random_expr(rng, d)),
    }
}

pub fn depth(e: &Expr) -> u32 {
    match e {
        Expr::Num(_) | Expr::Var(_) => 1,
        Expr::Neg(a) => 1 + depth(a),
        Expr::Bin(_, a, b) => 1 + depth(a).max(depth(b)),
        Expr::Call(_, args) => 1 + args.iter().map(depth).max().unwrap_or(0),
        Expr::Piecewise { arms, otherwise } => {
            let inner = arms
                .iter()
                .map(|(c, v)| depth(&c.lhs).max(depth(&c.rhs)).max(depth(v)))
                .max()
                .unwrap_or(0);
            1 + inner.max(depth(otherwise))
        }
    }
}

/// `(x, tau)` central differences of a solution at `t`.
pub fn central_diff(sol: &dyn epca_core::Solution, t: f64, dt: f64) -> (Vec<f64>, f64) {
    let xp = sol.x(t + dt).unwrap();
    let xm = sol.x(t - dt).unwrap();
    let dx = xp.iter().zip(&xm).map(|(a, b)| (a - b) / (2.0 * dt)).collect();
    let dtau = (sol.tau(t + dt).unwrap() - sol.tau(t - dt).unwrap()) / (2.0 * dt);
    (dx, dtau)
}
