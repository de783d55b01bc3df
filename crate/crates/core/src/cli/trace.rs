//! `trace.csv`: one row per iteration, fixed columns.
//!
//! Columns, in order: `k, theta, h_gamma, dx_norm, dy_norm, yz_gap,
//! crit_residual, objective, psnr, kl_ratio`. Reals are written with 17
//! significant digits (`{:.16e}`), so parsing them back is exact. Absent
//! optional values are empty fields; an infinite objective is `inf`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::problem::Value;
use crate::solver::TraceRow;

pub const TRACE_HEADER: &str = "k,theta,h_gamma,dx_norm,dy_norm,yz_gap,crit_residual,objective,psnr,kl_ratio";

fn real(out: &mut String, v: f64) {
    write!(out, ",{v:.16e}").unwrap();
}

fn opt(out: &mut String, v: Option<f64>) {
    match v {
        Some(v) => real(out, v),
        None => out.push(','),
    }
}

pub fn format_trace(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(64 + rows.len() * 240);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        write!(out, "{}", r.k).unwrap();
        real(&mut out, r.theta);
        real(&mut out, r.h_gamma);
        real(&mut out, r.dx_norm);
        opt(&mut out, r.dy_norm);
        real(&mut out, r.yz_gap);
        real(&mut out, r.crit_residual);
        match r.objective {
            Value::Finite(v) => real(&mut out, v),
            Value::Infinite => out.push_str(",inf"),
        }
        opt(&mut out, r.psnr);
        opt(&mut out, r.kl_ratio);
        out.push('\n');
    }
    out
}

pub fn write_trace_csv(rows: &[TraceRow], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_trace(rows)).map_err(|e| Error::io(path, e))
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(Error::Format("trace: missing or unexpected header".into()));
    }
    let mut rows = Vec::new();
    for (no, line) in lines.enumerate() {
        let bad = |what: &str| Error::Format(format!("trace line {}: bad {what}", no + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(bad("field count"));
        }
        let req = |i: usize, name: &str| f[i].parse::<f64>().map_err(|_| bad(name));
        let opt = |i: usize, name: &str| -> Result<Option<f64>> {
            if f[i].is_empty() {
                Ok(None)
            } else {
                req(i, name).map(Some)
            }
        };
        rows.push(TraceRow {
            k: f[0].parse().map_err(|_| bad("k"))?,
            theta: req(1, "theta")?,
            h_gamma: req(2, "h_gamma")?,
            dx_norm: req(3, "dx_norm")?,
            dy_norm: opt(4, "dy_norm")?,
            yz_gap: req(5, "yz_gap")?,
            crit_residual: req(6, "crit_residual")?,
            objective: if f[7] == "inf" { Value::Infinite } else { Value::Finite(req(7, "objective")?) },
            psnr: opt(8, "psnr")?,
            kl_ratio: opt(9, "kl_ratio")?,
        });
    }
    Ok(rows)
}

/// `timing.csv`: wall time per iteration, kept out of the reproducible trace.
pub fn format_timing(elapsed_s: &[f64]) -> String {
    let mut out = String::from("k,elapsed_s\n");
    for (i, t) in elapsed_s.iter().enumerate() {
        writeln!(out, "{},{t:.6e}", i + 1).unwrap();
    }
    out
}
