use std::io::Write;

use anyhow::Result;
use epca_core::analysis::OrderEstimate;
use epca_core::{ErrorRow, Solved};
use serde_json::{json, Value};

pub const SCHEMA: u32 = 1;

/// Significant digits of error columns (scientific notation).
const ERROR_DIGITS: usize = 3;

pub fn fixed(v: f64, precision: usize) -> String {
    format!("{v:.precision$}")
}

pub fn sci(v: f64) -> String {
    format!("{v:.ERROR_DIGITS$e}")
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

/// Trajectory rows: one per grid point, plus one per impulse placed after
/// the grid points at or before it. Impulse rows carry `k`, `x_left` and
/// `x_right`; `x` is the right value there.
pub fn trajectory_csv(out: &mut dyn Write, sol: &dyn Solved, precision: usize) -> Result<()> {
    let n = sol.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["j".to_string(), "t".to_string()];
    header.extend(numbered("x", n));
    header.push("tau".into());
    header.push("k".into());
    header.extend(numbered("x_left", n));
    header.extend(numbered("x_right", n));
    w.write_record(&header)?;

    let f = |v: f64| fixed(v, precision);
    let grid = sol.grid();
    let mut impulses = sol.impulses().iter().peekable();
    for (j, &t) in grid.iter().enumerate() {
        let mut row = vec![j.to_string(), f(t)];
        row.extend(sol.x(t)?.into_iter().map(f));
        row.push(f(sol.tau(t)?));
        row.extend(std::iter::repeat_n(String::new(), 1 + 2 * n));
        w.write_record(&row)?;
        let next_t = grid.get(j + 1).copied().unwrap_or(f64::INFINITY);
        while let Some(imp) = impulses.next_if(|imp| imp.time < next_t) {
            let mut row = vec![j.to_string(), f(imp.time)];
            row.extend(imp.x_right.iter().copied().map(f));
            row.push(f(sol.tau(imp.time)?));
            row.push(imp.k.to_string());
            row.extend(imp.x_left.iter().copied().map(f));
            row.extend(imp.x_right.iter().copied().map(f));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    drop(w);
    Ok(())
}

pub fn trajectory_json(sol: &dyn Solved, problem: &str, method: &str, step: f64) -> Result<Value> {
    let nodes = sol
        .grid()
        .into_iter()
        .enumerate()
        .map(|(j, t)| Ok(json!({ "j": j, "t": t, "x": sol.x(t)?, "tau": sol.tau(t)? })))
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "schema": SCHEMA,
        "kind": "trajectory",
        "problem": problem,
        "method": method,
        "h": step,
        "status": sol.status(),
        "t_end": sol.t_end(),
        "nodes": nodes,
        "impulses": sol.impulses(),
    }))
}

pub struct TableBlock {
    pub h: f64,
    pub rows: Vec<ErrorRow>,
}

pub fn table_csv(out: &mut dyn Write, blocks: &[TableBlock], dim: usize, precision: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["h".to_string(), "s".into(), "i".into()];
    if dim == 1 {
        header.push("x_h".into());
    } else {
        header.extend(numbered("x_h", dim));
    }
    header.extend(["tau_h", "e_x", "e_tau"].map(String::from));
    w.write_record(&header)?;
    for b in blocks {
        for r in &b.rows {
            let mut row = vec![b.h.to_string(), fixed(r.s, precision), r.i.to_string()];
            row.extend(r.x_h.iter().map(|v| fixed(*v, precision)));
            row.push(fixed(r.tau_h, precision));
            row.push(sci(r.e_x));
            row.push(sci(r.e_tau));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn table_json(blocks: &[TableBlock], problem: &str, exact: &str) -> Value {
    let blocks: Vec<Value> = blocks.iter().map(|b| json!({ "h": b.h, "rows": b.rows })).collect();
    json!({
        "schema": SCHEMA,
        "kind": "error_table",
        "problem": problem,
        "reference": exact,
        "blocks": blocks,
    })
}

pub fn order_json(est: &OrderEstimate, problem: &str, times: &[f64]) -> Value {
    let pairs: Vec<[f64; 2]> = est.levels.iter().map(|l| [l.h, l.e_x]).collect();
    json!({
        "schema": SCHEMA,
        "kind": "order",
        "problem": problem,
        "times": times,
        "pairs": pairs,
        "estimate": est,
    })
}

pub fn write_json(out: &mut dyn Write, v: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}
