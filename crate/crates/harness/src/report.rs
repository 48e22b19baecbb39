//! Plain-text verification reports.
//!
//! Header lines start with `#`. Every check takes one line with fields joined
//! by ` | `: name, bound, worst slack, verdict, and an optional note.

use std::fmt::Write as _;

use eos_core::analysis::{CheckResult, VerificationReport};

pub const SEPARATOR: &str = " | ";

pub fn verdict(c: &CheckResult) -> &'static str {
    if c.passed {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn check_line(c: &CheckResult) -> String {
    let slack = if c.evaluated == 0 && c.passed {
        String::from("n/a")
    } else {
        format!("{:.6e}", c.worst_slack)
    };
    let mut line = [c.name, c.bound.as_str(), slack.as_str(), verdict(c)].join(SEPARATOR);
    let mut extra = Vec::new();
    if c.is_skipped() {
        extra.push(format!("skipped: {}", c.note.as_deref().unwrap_or("")));
    } else if let Some(n) = &c.note {
        extra.push(n.clone());
    }
    if let Some(t) = c.first_violation {
        extra.push(format!("first violation at t={t}"));
    }
    if c.evaluated > 0 {
        extra.push(format!("{} evaluations", c.evaluated));
    }
    if !extra.is_empty() {
        line.push_str(SEPARATOR);
        line.push_str(&extra.join("; "));
    }
    line
}

/// `meta` entries become `# key = value` header lines.
pub fn render(meta: &[(&str, String)], report: &VerificationReport) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k} = {v}");
    }
    let failed = report.failures().count();
    let _ = writeln!(
        out,
        "# checks = {}, failed = {failed}, verdict = {}",
        report.checks.len(),
        if failed == 0 { "PASS" } else { "FAIL" }
    );
    for c in &report.checks {
        out.push_str(&check_line(c));
        out.push('\n');
    }
    out
}
