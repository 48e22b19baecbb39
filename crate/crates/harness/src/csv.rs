//! Trajectory CSV files.
//!
//! Column order is fixed and every float is written in 17-significant-digit
//! scientific notation (`{:.16e}`), which round-trips `f64` exactly and does not
//! depend on a shortest-representation algorithm.

use std::fmt::Write as _;

use eos_core::dynamics::{Trajectory, TrajectoryRecord};
use eos_core::{model, ModelConfig, Params};

pub const HEADER: &str = "t,alpha,beta1,beta2,loss,l1,l2,lhat,sharpness,cos_beta1,clipped";

/// Tolerance used when recomputing derived columns from stored parameters.
pub const DERIVED_TOLERANCE: f64 = 1e-12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CsvError {
    #[error("expected header `{HEADER}`")]
    Header,
    #[error("line {line}: expected 11 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: cannot parse {field} from {text:?}")]
    Field {
        line: usize,
        field: &'static str,
        text: String,
    },
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_row(out: &mut String, r: &TrajectoryRecord) {
    let vals = [
        r.params.alpha,
        r.params.beta1,
        r.params.beta2,
        r.parts.total,
        r.parts.l1,
        r.parts.l2,
        r.parts.lhat,
        r.sharp.value,
        r.sharp.cos_beta1,
    ];
    let _ = write!(out, "{}", r.t);
    for v in vals {
        let _ = write!(out, ",{v:.16e}");
    }
    let _ = writeln!(out, ",{}", u8::from(r.beta1_clipped));
}

pub fn trajectory_to_string(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(256 * (traj.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in &traj.records {
        push_row(&mut out, r);
    }
    out
}

/// One parsed CSV row, exactly as stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub t: usize,
    pub params: Params,
    pub loss: f64,
    pub l1: f64,
    pub l2: f64,
    pub lhat: f64,
    pub sharpness: f64,
    pub cos_beta1: f64,
    pub clipped: bool,
}

pub fn parse_trajectory(text: &str) -> Result<Vec<CsvRow>, CsvError> {
    // leading `#` lines carry run tags such as `out-of-region`
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(CsvError::Header),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 11 {
            return Err(CsvError::FieldCount {
                line: line_no,
                found: fields.len(),
            });
        }
        let bad = |field: &'static str, text: &str| CsvError::Field {
            line: line_no,
            field,
            text: text.to_string(),
        };
        let num = |k: usize, name: &'static str| fields[k].parse::<f64>().map_err(|_| bad(name, fields[k]));
        rows.push(CsvRow {
            t: fields[0].parse().map_err(|_| bad("t", fields[0]))?,
            params: Params::new(num(1, "alpha")?, num(2, "beta1")?, num(3, "beta2")?),
            loss: num(4, "loss")?,
            l1: num(5, "l1")?,
            l2: num(6, "l2")?,
            lhat: num(7, "lhat")?,
            sharpness: num(8, "sharpness")?,
            cos_beta1: num(9, "cos_beta1")?,
            clipped: match fields[10] {
                "0" => false,
                "1" => true,
                other => return Err(bad("clipped", other)),
            },
        });
    }
    Ok(rows)
}

/// A stored derived column that disagrees with its recomputation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub t: usize,
    pub column: &'static str,
    pub stored: f64,
    pub recomputed: f64,
}

/// Recomputes loss parts and sharpness from each row's parameters and reports
/// every column off by more than `DERIVED_TOLERANCE·max(1, |value|)`.
pub fn check_derived(cfg: &ModelConfig, rows: &[CsvRow]) -> Vec<Mismatch> {
    let mut out = Vec::new();
    for row in rows {
        let (Ok(parts), Ok(sharp)) = (
            model::loss_parts(cfg, &row.params),
            model::sharpness_info(cfg, &row.params),
        ) else {
            out.push(Mismatch {
                t: row.t,
                column: "params",
                stored: f64::NAN,
                recomputed: f64::NAN,
            });
            continue;
        };
        let pairs = [
            ("loss", row.loss, parts.total),
            ("l1", row.l1, parts.l1),
            ("l2", row.l2, parts.l2),
            ("lhat", row.lhat, parts.lhat),
            ("sharpness", row.sharpness, sharp.value),
            ("cos_beta1", row.cos_beta1, sharp.cos_beta1),
        ];
        for (column, stored, recomputed) in pairs {
            let diff = (stored - recomputed).abs();
            if !(diff <= DERIVED_TOLERANCE * recomputed.abs().max(1.0)) {
                out.push(Mismatch {
                    t: row.t,
                    column,
                    stored,
                    recomputed,
                });
            }
        }
    }
    out
}
