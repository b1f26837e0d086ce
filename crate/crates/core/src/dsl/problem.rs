//! Line-oriented problem files.
//!
//! ```text
//! # comment
//! dim = 1
//! lambda = 2
//! horizon = 5
//!
//! [f]
//! x1 = -1/5*xd1
//!
//! [g]
//! tau = 1 + 1/4*x1 - 1/2*tau
//!
//! [history]
//! breakpoints = -3          # comma separated, strictly decreasing, < 0
//! segment = exp(-t) + 1     # one per breakpoint, from 0 backwards
//! tail = exp(3) + 1         # below the last breakpoint
//! bound = 21.1              # optional sup-norm hint
//! lipschitz = 20.1          # optional Lipschitz hint
//!
//! [impulses]
//! 0.75 = u1 + 2             # post-jump state in terms of u = x(t_k-)
//!
//! [hints]
//! l3 = 0
//! ```
//!
//! Vector-valued entries separate components with `;`. Top-level values and
//! impulse times may be constant expressions.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::expr::{format_number, Env, Expr, Var};
use super::parser::{parse_expression, ParseError};
use crate::error::{Error, Result};
use crate::model::{
    ConstantPath, DelayRhs, Hints, HistoryFunction, ImpulseEvent, JumpMap, PathFn, ProblemSpec, StateRhs,
};

/// `f` given by one expression per component in `t`, `x<i>`, `xd<i>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprStateRhs(pub Vec<Expr>);

impl StateRhs for ExprStateRhs {
    fn eval(&self, t: f64, x: &[f64], xd: &[f64], out: &mut [f64]) {
        let env = Env { t, x, xd, tau: f64::NAN, u: &[] };
        for (o, e) in out.iter_mut().zip(&self.0) {
            *o = e.eval(&env);
        }
    }

    fn source(&self) -> Option<Vec<String>> {
        Some(self.0.iter().map(|e| e.to_string()).collect())
    }
}

/// `g` given by an expression in `t`, `x<i>`, `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprDelayRhs(pub Expr);

impl DelayRhs for ExprDelayRhs {
    fn eval(&self, t: f64, x: &[f64], tau: f64) -> f64 {
        self.0.eval(&Env { t, x, tau, xd: &[], u: &[] })
    }

    fn source(&self) -> Option<String> {
        Some(self.0.to_string())
    }
}

/// Impulse given by the post-jump state; the jump is `expr(u) - u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprReset(pub Vec<Expr>);

impl JumpMap for ExprReset {
    fn jump(&self, u: &[f64], out: &mut [f64]) {
        let env = Env { u, t: f64::NAN, tau: f64::NAN, x: &[], xd: &[] };
        for ((o, e), ui) in out.iter_mut().zip(&self.0).zip(u) {
            *o = e.eval(&env) - ui;
        }
    }

    fn source(&self) -> Option<Vec<String>> {
        Some(self.0.iter().map(|e| e.to_string()).collect())
    }
}

/// History piece as expressions in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprPath(pub Vec<Expr>);

impl PathFn for ExprPath {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let env = Env { t, tau: f64::NAN, x: &[], xd: &[], u: &[] };
        for (o, e) in out.iter_mut().zip(&self.0) {
            *o = e.eval(&env);
        }
    }

    fn source(&self) -> Option<Vec<String>> {
        Some(self.0.iter().map(|e| e.to_string()).collect())
    }
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    key: String,
    value: String,
    /// 0-based column where `value` starts.
    value_col: usize,
}

impl Entry {
    fn expr(&self, text: &str, offset: usize) -> Result<Expr> {
        parse_expression(text).map_err(|e| Error::Parse(e.relocate(self.line, self.value_col + offset)))
    }

    /// Splits the value on `sep` and parses each part.
    fn exprs(&self, sep: char) -> Result<Vec<Expr>> {
        let mut out = Vec::new();
        let mut offset = 0;
        for part in self.value.split(sep) {
            let lead = part.len() - part.trim_start().len();
            out.push(self.expr(part.trim(), offset + lead)?);
            offset += part.len() + 1;
        }
        Ok(out)
    }

    fn constant(&self, text: &str, offset: usize) -> Result<f64> {
        let e = self.expr(text, offset)?;
        if let Some(v) = e.vars().into_iter().next() {
            return Err(self.invalid(format!("`{}` must be a constant, found variable `{v}`", self.key)));
        }
        Ok(e.eval(&Env::default()))
    }

    fn invalid(&self, msg: String) -> Error {
        Error::Validation(format!("line {}: {msg}", self.line))
    }
}

fn check_vars(entry: &Entry, exprs: &[Expr], dim: usize, allowed: &[&str]) -> Result<()> {
    for e in exprs {
        for v in e.vars() {
            let ok = match v {
                Var::T => allowed.contains(&"t"),
                Var::Tau => allowed.contains(&"tau"),
                Var::X(i) => allowed.contains(&"x") && i <= dim,
                Var::Xd(i) => allowed.contains(&"xd") && i <= dim,
                Var::U(i) => allowed.contains(&"u") && i <= dim,
            };
            if !ok {
                return Err(entry.invalid(format!("variable `{v}` is not allowed in `{}`", entry.key)));
            }
        }
    }
    Ok(())
}

fn split_sections(src: &str) -> Result<BTreeMap<String, Vec<Entry>>> {
    const SECTIONS: [&str; 6] = ["", "f", "g", "history", "impulses", "hints"];
    let mut sections: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
    let mut current = String::new();
    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        let text = raw.split('#').next().unwrap_or("");
        let trimmed = text.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| {
                Error::Parse(ParseError::at(line, raw.len() + 1, "unterminated section header"))
            })?;
            let name = name.trim();
            if !SECTIONS[1..].contains(&name) {
                return Err(Error::Validation(format!("line {line}: unknown section [{name}]")));
            }
            if sections.contains_key(name) {
                return Err(Error::Validation(format!("line {line}: duplicate section [{name}]")));
            }
            current = name.to_string();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let Some(eq) = text.find('=') else {
            let col = text.len() - text.trim_start().len() + 1;
            return Err(Error::Parse(ParseError {
                line,
                column: col,
                message: "expected `key = value`".into(),
                expected: vec!["`=`".into()],
            }));
        };
        let key = text[..eq].trim().to_string();
        let after = &text[eq + 1..];
        let lead = after.len() - after.trim_start().len();
        sections.entry(current.clone()).or_default().push(Entry {
            line,
            key,
            value: after.trim().to_string(),
            value_col: text[..eq + 1].chars().count() + lead,
        });
    }
    Ok(sections)
}

fn take_unique<'a>(entries: &'a [Entry], key: &str) -> Result<Option<&'a Entry>> {
    let mut found = entries.iter().filter(|e| e.key == key);
    let first = found.next();
    if let Some(dup) = found.next() {
        return Err(dup.invalid(format!("duplicate key `{key}`")));
    }
    Ok(first)
}

fn required<'a>(entries: &'a [Entry], key: &str, section: &str) -> Result<&'a Entry> {
    take_unique(entries, key)?
        .ok_or_else(|| Error::Validation(format!("missing `{key}` in {section}")))
}

fn reject_unknown(entries: &[Entry], known: &dyn Fn(&str) -> bool) -> Result<()> {
    match entries.iter().find(|e| !known(&e.key)) {
        Some(e) => Err(e.invalid(format!("unknown key `{}`", e.key))),
        None => Ok(()),
    }
}

/// Parses a problem file into a validated [`ProblemSpec`].
pub fn parse_problem(src: &str) -> Result<ProblemSpec> {
    let sections = split_sections(src)?;
    let empty = Vec::new();
    let section = |name: &str| sections.get(name).unwrap_or(&empty);

    let top = section("");
    reject_unknown(top, &|k| matches!(k, "dim" | "lambda" | "horizon"))?;
    let dim_entry = required(top, "dim", "the header")?;
    let dim_value = dim_entry.constant(&dim_entry.value, 0)?;
    if !(dim_value >= 1.0 && dim_value.fract() == 0.0) {
        return Err(dim_entry.invalid(format!("dim must be a positive integer, got {dim_value}")));
    }
    let dim = dim_value as usize;
    let lambda_entry = required(top, "lambda", "the header")?;
    let lambda = lambda_entry.constant(&lambda_entry.value, 0)?;
    let horizon_entry = required(top, "horizon", "the header")?;
    let horizon = horizon_entry.constant(&horizon_entry.value, 0)?;

    let fs = section("f");
    let names: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    reject_unknown(fs, &|k| names.iter().any(|n| n == k))?;
    let mut f_exprs = Vec::with_capacity(dim);
    for name in &names {
        let e = required(fs, name, "[f]")?;
        let expr = e.expr(&e.value, 0)?;
        check_vars(e, std::slice::from_ref(&expr), dim, &["t", "x", "xd"])?;
        f_exprs.push(expr);
    }

    let gs = section("g");
    reject_unknown(gs, &|k| k == "tau")?;
    let g_entry = required(gs, "tau", "[g]")?;
    let g_expr = g_entry.expr(&g_entry.value, 0)?;
    check_vars(g_entry, std::slice::from_ref(&g_expr), dim, &["t", "x", "tau"])?;

    let hs = section("history");
    reject_unknown(hs, &|k| matches!(k, "breakpoints" | "segment" | "tail" | "bound" | "lipschitz"))?;
    let mut breakpoints = Vec::new();
    if let Some(e) = take_unique(hs, "breakpoints")? {
        let mut offset = 0;
        for part in e.value.split(',') {
            let lead = part.len() - part.trim_start().len();
            if !part.trim().is_empty() {
                breakpoints.push(e.constant(part.trim(), offset + lead)?);
            }
            offset += part.len() + 1;
        }
    }
    let vector_path = |e: &Entry| -> Result<Arc<dyn PathFn>> {
        let exprs = e.exprs(';')?;
        if exprs.len() != dim {
            return Err(e.invalid(format!("expected {dim} component(s), got {}", exprs.len())));
        }
        check_vars(e, &exprs, dim, &["t"])?;
        Ok(Arc::new(ExprPath(exprs)))
    };
    let segments = hs
        .iter()
        .filter(|e| e.key == "segment")
        .map(vector_path)
        .collect::<Result<Vec<_>>>()?;
    let tail = vector_path(required(hs, "tail", "[history]")?)?;
    let mut history = HistoryFunction::new(dim, breakpoints, segments, tail)?;
    if let Some(e) = take_unique(hs, "bound")? {
        history = history.with_bound_hint(e.constant(&e.value, 0)?);
    }
    if let Some(e) = take_unique(hs, "lipschitz")? {
        history = history.with_lipschitz_hint(e.constant(&e.value, 0)?);
    }

    let mut impulses = Vec::new();
    for e in section("impulses") {
        let time_expr = parse_expression(&e.key).map_err(|p| Error::Parse(p.relocate(e.line, 0)))?;
        if !time_expr.vars().is_empty() {
            return Err(e.invalid(format!("impulse time `{}` must be a constant", e.key)));
        }
        let time = time_expr.eval(&Env::default());
        let exprs = e.exprs(';')?;
        if exprs.len() != dim {
            return Err(e.invalid(format!("expected {dim} component(s), got {}", exprs.len())));
        }
        check_vars(e, &exprs, dim, &["u"])?;
        impulses.push(ImpulseEvent::new(time, Arc::new(ExprReset(exprs))));
    }

    let mut hints = Hints::default();
    for e in section("hints") {
        let slot = match e.key.as_str() {
            "l1" => &mut hints.l1,
            "l2" => &mut hints.l2,
            "l3" => &mut hints.l3,
            "l4" => &mut hints.l4,
            "n_phi" => &mut hints.n_phi,
            "sup_f0" => &mut hints.sup_f0,
            "sup_g0" => &mut hints.sup_g0,
            "sup_f" => &mut hints.sup_f,
            "sup_g" => &mut hints.sup_g,
            other => return Err(e.invalid(format!("unknown hint `{other}`"))),
        };
        if slot.is_some() {
            return Err(e.invalid(format!("duplicate hint `{}`", e.key)));
        }
        *slot = Some(e.constant(&e.value, 0)?);
    }

    Ok(ProblemSpec::new(
        dim,
        Arc::new(ExprStateRhs(f_exprs)),
        Arc::new(ExprDelayRhs(g_expr)),
        impulses,
        history,
        lambda,
        horizon,
    )?
    .with_hints(hints))
}

fn not_text(what: &str) -> Error {
    Error::NotSerializable(format!("{what} is not defined by expressions"))
}

/// Writes a problem back to the file format. Fails when any evaluator was
/// built from native code rather than expressions.
pub fn serialize_problem(spec: &ProblemSpec) -> Result<String> {
    use std::fmt::Write;

    let mut out = String::new();
    let _ = writeln!(out, "dim = {}", spec.dim);
    let _ = writeln!(out, "lambda = {}", format_number(spec.lambda));
    let _ = writeln!(out, "horizon = {}", format_number(spec.horizon));

    let _ = writeln!(out, "\n[f]");
    let f = spec.f.source().ok_or_else(|| not_text("f"))?;
    for (i, e) in f.iter().enumerate() {
        let _ = writeln!(out, "x{} = {e}", i + 1);
    }

    let _ = writeln!(out, "\n[g]");
    let _ = writeln!(out, "tau = {}", spec.g.source().ok_or_else(|| not_text("g"))?);

    let h = &spec.history;
    let _ = writeln!(out, "\n[history]");
    if !h.breakpoints().is_empty() {
        let bps: Vec<String> = h.breakpoints().iter().map(|b| format_number(*b)).collect();
        let _ = writeln!(out, "breakpoints = {}", bps.join(", "));
    }
    for seg in h.segments() {
        let src = seg.source().ok_or_else(|| not_text("history segment"))?;
        let _ = writeln!(out, "segment = {}", src.join("; "));
    }
    let tail = h.tail().source().ok_or_else(|| not_text("history tail"))?;
    let _ = writeln!(out, "tail = {}", tail.join("; "));
    if let Some(b) = h.bound_hint() {
        let _ = writeln!(out, "bound = {}", format_number(b));
    }
    if let Some(l) = h.lipschitz_hint() {
        let _ = writeln!(out, "lipschitz = {}", format_number(l));
    }

    if !spec.impulses.is_empty() {
        let _ = writeln!(out, "\n[impulses]");
        for imp in &spec.impulses {
            let src = imp.jump.source().ok_or_else(|| not_text("impulse map"))?;
            let _ = writeln!(out, "{} = {}", format_number(imp.time), src.join("; "));
        }
    }

    let hints = &spec.hints;
    let named = [
        ("l1", hints.l1),
        ("l2", hints.l2),
        ("l3", hints.l3),
        ("l4", hints.l4),
        ("n_phi", hints.n_phi),
        ("sup_f0", hints.sup_f0),
        ("sup_g0", hints.sup_g0),
        ("sup_f", hints.sup_f),
        ("sup_g", hints.sup_g),
    ];
    if named.iter().any(|(_, v)| v.is_some()) {
        let _ = writeln!(out, "\n[hints]");
        for (name, v) in named {
            if let Some(v) = v {
                let _ = writeln!(out, "{name} = {}", format_number(v));
            }
        }
    }
    Ok(out)
}

/// Constant history tail helper for programmatic problems that should still
/// serialize.
pub fn constant_tail(values: Vec<f64>) -> Arc<dyn PathFn> {
    Arc::new(ConstantPath(values))
}
