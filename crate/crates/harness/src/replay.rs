//! Re-verification of a stored trajectory CSV against its configuration.

use eos_core::analysis::{CheckResult, VerificationReport};
use eos_core::constrained::{self, ConstrainedState};
use eos_core::dynamics::{self, ClipVariant, Trajectory};

use crate::config::{Mode, Profile, RunConfig};
use crate::csv::{self, CsvRow};
use crate::run::{gd_suite, initial_point};
use crate::HarnessError;

fn same(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits()
}

fn step_matches(cfg: &RunConfig, prev: &CsvRow, next: &CsvRow) -> bool {
    let Ok(m) = cfg.model() else { return false };
    let stepped = match cfg.mode {
        Mode::Gd => dynamics::gd_step_with(&m, &prev.params, cfg.clip_variant).map(|o| (o.next, o.beta1_clipped)),
        Mode::GdUnclipped => dynamics::gd_step_unclipped(&m, &prev.params).map(|o| (o.next, o.beta1_clipped)),
        Mode::Constrained => constrained::pgd_step(&m, &ConstrainedState::project(&prev.params), cfg.product_bound)
            .map(|s| (s.params(), false)),
        Mode::Gf => return true,
    };
    match stepped {
        Ok((p, clipped)) => {
            same(p.alpha, next.params.alpha)
                && same(p.beta1, next.params.beta1)
                && same(p.beta2, next.params.beta2)
                && clipped == next.clipped
        }
        Err(_) => false,
    }
}

/// Parses `text` and checks that it is exactly what `cfg` produces: rows
/// numbered from 0, first row at the configured start, every row one exact
/// update of the previous one, and derived columns consistent with the
/// parameters. The applicable theorem checks then run on the stored states.
pub fn replay(cfg: &RunConfig, text: &str) -> Result<VerificationReport, HarnessError> {
    let m = cfg.model()?;
    let rows = csv::parse_trajectory(text)?;
    let p0 = initial_point(cfg)?;

    let mut numbering = CheckResult::new("replay_rows", "row k has t = k");
    let mut start = CheckResult::new("replay_start", "row 0 equals the configured initial point");
    let mut derived = CheckResult::new(
        "replay_derived",
        format!("derived columns within {:e} of recomputation", csv::DERIVED_TOLERANCE),
    );
    let mut steps = CheckResult::new(
        "replay_steps",
        format!("row k+1 is one exact {} update of row k", cfg.mode.name()),
    );

    for (k, r) in rows.iter().enumerate() {
        numbering.observe(k, 0.0, r.t == k);
    }
    match rows.first() {
        Some(r) => {
            let expected = match cfg.mode {
                Mode::Constrained => ConstrainedState::project(&p0).params(),
                _ => p0,
            };
            let ok = same(r.params.alpha, expected.alpha)
                && same(r.params.beta1, expected.beta1)
                && same(r.params.beta2, expected.beta2);
            start.observe(0, 0.0, ok);
        }
        None => start.fail(0),
    }
    let bad = csv::check_derived(&m, &rows);
    for r in &rows {
        derived.observe(r.t, 0.0, !bad.iter().any(|b| b.t == r.t));
    }
    if let Some(b) = bad.first() {
        derived.note = Some(format!(
            "{} at t={}: stored {:e}, recomputed {:e}",
            b.column, b.t, b.stored, b.recomputed
        ));
    }
    if cfg.mode == Mode::Gf {
        steps = CheckResult::skipped(steps.name, steps.bound, "gradient-flow output is subsampled");
    } else {
        for (k, w) in rows.windows(2).enumerate() {
            steps.observe(k + 1, 0.0, step_matches(cfg, &w[0], &w[1]));
        }
    }

    let mut rep = VerificationReport::from(vec![numbering, start, derived, steps]);
    let Ok(traj) = Trajectory::from_params(m, rows.iter().map(|r| r.params)) else {
        return Ok(rep);
    };
    match cfg.mode {
        Mode::Gd | Mode::GdUnclipped => {
            let (suite, _) = gd_suite(&traj, cfg.profile == Profile::XTilde);
            if cfg.mode == Mode::Gd && cfg.clip_variant == ClipVariant::Cap {
                rep.extend(suite);
            }
        }
        Mode::Constrained => {
            let states: Vec<_> = rows.iter().map(|r| ConstrainedState::project(&r.params)).collect();
            let cap = m.clip_alpha();
            let tt = states.iter().position(|s| s.alpha == cap).unwrap_or(states.len());
            rep.extend(constrained::verify_constrained_decay(&m, &states, tt));
        }
        Mode::Gf => {}
    }
    Ok(rep)
}
