//! Grids of gradient-descent runs over learning rates and seeds.
//!
//! Cells run on scoped worker threads and are gathered back in input order
//! (η-major, then seed), so the summary does not depend on scheduling.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;
use std::thread;

use eos_core::analysis::{self, PhaseReport};
use eos_core::dynamics::{self, UpdateRule};

use crate::config::{ConfigError, Mode, RunConfig};
use crate::csv;
use crate::run::{fitted_slope, initial_point};
use crate::HarnessError;

pub const SUMMARY_HEADER: &str = "eta,seed,t1,t2,t3,t4,slope,final_loss,max_sharpness,status";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eta: f64,
    pub seed: Option<u64>,
    pub phases: Option<PhaseReport>,
    pub slope: Option<f64>,
    pub final_loss: Option<f64>,
    pub max_sharpness: Option<f64>,
    /// `ok`, `diverged at step N` or `error: ...`.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub row: SweepRow,
    /// Trajectory CSV, kept only when requested.
    pub csv: Option<String>,
}

fn resolve_threads(requested: usize, cells: usize) -> usize {
    let n = if requested == 0 {
        thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        requested
    };
    n.clamp(1, cells.max(1))
}

fn run_cell(cfg: &RunConfig, keep_csv: bool) -> SweepCell {
    let mut row = SweepRow {
        eta: cfg.eta,
        seed: cfg.seed(),
        phases: None,
        slope: None,
        final_loss: None,
        max_sharpness: None,
        status: String::from("ok"),
    };
    let prepared = cfg
        .model()
        .map_err(HarnessError::from)
        .and_then(|m| Ok((m, initial_point(cfg)?)));
    let (m, p0) = match prepared {
        Ok(v) => v,
        Err(e) => {
            row.status = format!("error: {e}").replace(',', ";");
            return SweepCell { row, csv: None };
        }
    };
    let rule = match (cfg.mode, cfg.clip_variant) {
        (Mode::GdUnclipped, _) => UpdateRule::Unclipped,
        (_, v) => UpdateRule::Clipped(v),
    };
    let traj = match dynamics::simulate_with(&m, p0, cfg.steps, rule) {
        Ok(t) => t,
        Err(partial) => {
            row.status = format!("diverged at step {}", partial.trajectory.len());
            partial.trajectory
        }
    };
    row.phases = analysis::detect_phases(&traj).ok();
    if row.status == "ok" {
        row.slope = fitted_slope(&traj, row.phases.as_ref());
    }
    row.final_loss = traj.last().map(|r| r.parts.total);
    row.max_sharpness = traj.records.iter().map(|r| r.sharp.value).reduce(f64::max);
    let csv = keep_csv.then(|| csv::trajectory_to_string(&traj));
    SweepCell { row, csv }
}

/// Runs every `(η, seed)` pair. An empty `etas` means the base η; an empty
/// `seeds` means the base seed (or the explicit start). All η are validated
/// before any cell starts; per-cell failures are recorded in the row.
pub fn sweep(base: &RunConfig, etas: &[f64], seeds: &[u64], keep_csv: bool) -> Result<Vec<SweepCell>, HarnessError> {
    if !matches!(base.mode, Mode::Gd | Mode::GdUnclipped) {
        return Err(ConfigError::Domain(format!(
            "sweep runs gradient descent; mode `{}` is not supported",
            base.mode.name()
        ))
        .into());
    }
    let etas = if etas.is_empty() { vec![base.eta] } else { etas.to_vec() };
    let mut specs = Vec::with_capacity(etas.len() * seeds.len().max(1));
    for &eta in &etas {
        let at_eta = base.with_eta(eta)?;
        if seeds.is_empty() {
            specs.push(at_eta);
        } else {
            specs.extend(seeds.iter().map(|&s| at_eta.with_seed(s)));
        }
    }
    let slots: Vec<OnceLock<SweepCell>> = specs.iter().map(|_| OnceLock::new()).collect();
    let next = AtomicUsize::new(0);
    let workers = resolve_threads(base.threads, specs.len());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(spec) = specs.get(i) else { break };
                let _ = slots[i].set(run_cell(spec, keep_csv));
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|c| c.into_inner().expect("every cell ran"))
        .collect())
}

fn opt_usize(v: Option<usize>) -> String {
    v.map(|t| t.to_string()).unwrap_or_default()
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(csv::fmt_f64).unwrap_or_default()
}

pub fn summary_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for c in cells {
        let r = &c.row;
        let ph = r.phases.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            csv::fmt_f64(r.eta),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            opt_usize(ph.and_then(|p| p.t1)),
            opt_usize(ph.and_then(|p| p.t2)),
            opt_usize(ph.and_then(|p| p.t3)),
            opt_usize(ph.and_then(|p| p.t4)),
            opt_f64(r.slope),
            opt_f64(r.final_loss),
            opt_f64(r.max_sharpness),
            r.status
        );
    }
    out
}

/// File name for one cell's trajectory CSV.
pub fn cell_file_name(base: &RunConfig, index: usize, row: &SweepRow) -> String {
    match row.seed {
        Some(s) => format!("{}_cell{index}_seed{s}.csv", base.name),
        None => format!("{}_cell{index}.csv", base.name),
    }
}
