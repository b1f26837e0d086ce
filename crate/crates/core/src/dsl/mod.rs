//! Expression language and problem files.

mod builtin;
mod expr;
mod parser;
mod problem;

pub use builtin::{
    builtin, Builtin, Example1Exact, Example2Exact, ExactSolution, BUILTIN_NAMES, EXAMPLE1_RAW_SRC, EXAMPLE1_SRC,
    EXAMPLE2_BREAKS, EXAMPLE2_SRC,
};
pub use expr::{format_number, BinOp, CmpOp, Cond, Env, Expr, Func, Var};
pub use parser::{parse_expression, ParseError};
pub use problem::{
    constant_tail, parse_problem, serialize_problem, ExprDelayRhs, ExprPath, ExprReset, ExprStateRhs,
};
