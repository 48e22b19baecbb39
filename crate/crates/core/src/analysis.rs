//! Phase detection and per-step bound checking over trajectories.
//!
//! Every verifier returns a [`VerificationReport`]: one [`CheckResult`] per
//! bound, each carrying the first violating step and the worst signed slack
//! (positive means satisfied with room to spare). Two-sided bands allow an
//! additive slack of `1e-9·|bound|`; monotonicity checks are strict with no
//! tolerance.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use crate::dynamics::{self, Trajectory, TrajectoryRecord};
use crate::model::{ModelConfig, Params};
use crate::num::{ln, sqrt};
use crate::regions::{self, Region};
use crate::{Error, Result};

/// Relative slack allowed on band checks.
pub const BAND_SLACK: f64 = 1e-9;

/// Default `λ1ηα²` level below which α counts as collapsed.
pub const DEFAULT_COLLAPSE_THRESHOLD: f64 = 0.1;

/// Phase markers of a gradient-descent run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseReport {
    /// First `t` with `λ1ηα² ≥ 1.5`.
    pub t1: Option<usize>,
    /// Last step of the strict increase of α that starts at `t = 0`.
    pub t2: Option<usize>,
    /// Last step of the strict decrease of α that follows `t2`.
    pub t3: Option<usize>,
    /// First `t` with `β2 ≥ ½√(λ1η/2)`.
    pub t4: Option<usize>,
    /// First step the constrained α sits at its cap (constrained runs only).
    pub t_tilde: Option<usize>,
    /// Steps with `L(t) > L(t−1)`.
    pub spikes: Vec<usize>,
}

fn alpha_scale(cfg: &ModelConfig, alpha: f64) -> f64 {
    cfg.lambda1() * cfg.eta() * alpha * alpha
}

/// The β2 level that defines `T4`.
pub fn t4_threshold(cfg: &ModelConfig) -> f64 {
    0.5 * sqrt(cfg.lambda1() * cfg.eta() / 2.0)
}

pub fn detect_phases(traj: &Trajectory) -> Result<PhaseReport> {
    let recs = &traj.records;
    if recs.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let cfg = &traj.config;
    let alpha = |i: usize| recs[i].params.alpha;

    let t1 = recs.iter().position(|r| alpha_scale(cfg, r.params.alpha) >= 1.5);
    let b4 = t4_threshold(cfg);
    let t4 = recs.iter().position(|r| r.params.beta2 >= b4);

    let mut end = 0;
    while end + 1 < recs.len() && alpha(end + 1) > alpha(end) {
        end += 1;
    }
    let t2 = (end > 0).then_some(end);
    let t3 = t2.and_then(|t2| {
        let mut end = t2;
        while end + 1 < recs.len() && alpha(end + 1) < alpha(end) {
            end += 1;
        }
        (end > t2).then_some(end)
    });

    let spikes = recs
        .windows(2)
        .filter(|w| w[1].parts.total > w[0].parts.total)
        .map(|w| w[1].t)
        .collect();

    Ok(PhaseReport {
        t1,
        t2,
        t3,
        t4,
        t_tilde: None,
        spikes,
    })
}

/// Outcome of one bound over a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    /// Human-readable statement of the bound.
    pub bound: String,
    pub passed: bool,
    pub first_violation: Option<usize>,
    /// Smallest signed slack seen (`+∞` if nothing was evaluated).
    pub worst_slack: f64,
    pub worst_step: Option<usize>,
    /// Number of steps at which the bound was evaluated.
    pub evaluated: usize,
    /// Set when the check was skipped or only partly applicable.
    pub note: Option<String>,
}

impl CheckResult {
    pub fn new(name: &'static str, bound: impl Into<String>) -> Self {
        Self {
            name,
            bound: bound.into(),
            passed: true,
            first_violation: None,
            worst_slack: f64::INFINITY,
            worst_step: None,
            evaluated: 0,
            note: None,
        }
    }

    pub fn skipped(name: &'static str, bound: impl Into<String>, why: impl Into<String>) -> Self {
        Self {
            note: Some(why.into()),
            ..Self::new(name, bound)
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.evaluated == 0 && self.note.is_some()
    }

    /// Records one evaluation at step `t`.
    pub fn observe(&mut self, t: usize, slack: f64, ok: bool) {
        self.evaluated += 1;
        // NaN slack is both a violation and the worst case
        if slack < self.worst_slack || slack.is_nan() {
            self.worst_slack = slack;
            self.worst_step = Some(t);
        }
        if !ok && self.first_violation.is_none() {
            self.first_violation = Some(t);
            self.passed = false;
        }
    }

    /// `x ≥ lo` up to `BAND_SLACK·|lo|`.
    pub fn at_least(&mut self, t: usize, x: f64, lo: f64) {
        let slack = x - lo;
        self.observe(t, slack, slack >= -BAND_SLACK * lo.abs());
    }

    /// `x ≤ hi` up to `BAND_SLACK·|hi|`.
    pub fn at_most(&mut self, t: usize, x: f64, hi: f64) {
        let slack = hi - x;
        self.observe(t, slack, slack >= -BAND_SLACK * hi.abs());
    }

    /// `x > lo`, no tolerance.
    pub fn strictly_above(&mut self, t: usize, x: f64, lo: f64) {
        self.observe(t, x - lo, x > lo);
    }

    /// `x < hi`, no tolerance.
    pub fn strictly_below(&mut self, t: usize, x: f64, hi: f64) {
        self.observe(t, hi - x, x < hi);
    }

    /// Marks a failure that has no numeric slack (e.g. a missing phase marker).
    pub fn fail(&mut self, t: usize) {
        self.observe(t, f64::NEG_INFINITY, false);
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }
}

impl From<Vec<CheckResult>> for VerificationReport {
    fn from(checks: Vec<CheckResult>) -> Self {
        Self { checks }
    }
}

fn require_x_start(traj: &Trajectory) -> Result<&[TrajectoryRecord]> {
    let first = traj.records.first().ok_or(Error::EmptyTrajectory)?;
    if !regions::in_x(&traj.config, &first.params).member {
        return Err(Error::NotInRegion(Region::X));
    }
    Ok(&traj.records)
}

/// For an `X(η)` start, at every step:
/// `λ1α² ≤ S ≤ 1.12λ1α²`, `|cos(v, e_β1)| > 0.9`, `β2` strictly increasing and
/// `0 < αβ2 < 1`.
pub fn verify_param_lemma(traj: &Trajectory) -> Result<VerificationReport> {
    let recs = require_x_start(traj)?;
    let l1 = traj.config.lambda1();
    let mut lower = CheckResult::new("sharpness_lower", "lambda1*alpha^2 <= S");
    let mut upper = CheckResult::new("sharpness_upper", "S <= 1.12*lambda1*alpha^2");
    let mut align = CheckResult::new("eigvec_alignment", "|cos(v, e_beta1)| > 0.9");
    let mut beta2 = CheckResult::new("beta2_increasing", "beta2(t+1) > beta2(t)");
    let mut product = CheckResult::new("product_in_unit_interval", "0 < alpha*beta2 < 1");
    for r in recs {
        let a2 = l1 * r.params.alpha * r.params.alpha;
        lower.at_least(r.t, r.sharp.value, a2);
        upper.at_most(r.t, r.sharp.value, 1.12 * a2);
        let cos = r.sharp.cos_beta1;
        align.observe(r.t, cos - 0.9, cos > 0.9 * (1.0 - BAND_SLACK));
        let ab = r.params.alpha * r.params.beta2;
        product.observe(r.t, ab.min(1.0 - ab), ab > 0.0 && ab < 1.0);
    }
    for w in recs.windows(2) {
        beta2.strictly_above(w[1].t, w[1].params.beta2, w[0].params.beta2);
    }
    Ok(vec_report([lower, upper, align, beta2, product]))
}

fn vec_report<const N: usize>(checks: [CheckResult; N]) -> VerificationReport {
    VerificationReport {
        checks: checks.into_iter().collect(),
    }
}

/// Sharpness bands around `T1` (taken as the end of the run when absent):
/// `S ∈ [1.1/η, 1.7/η]` before, `S ∈ [1.5/η, 4.71/η]` and `λ1ηα² ∈ [1.5, 4.2]`
/// from `T1` on, and α strictly increasing before `T1`.
pub fn verify_sharpness_bands(traj: &Trajectory, phases: &PhaseReport) -> Result<VerificationReport> {
    let recs = require_x_start(traj)?;
    let cfg = &traj.config;
    let eta = cfg.eta();
    let t1 = phases.t1.unwrap_or(recs.len());
    let (pre_lo, pre_hi) = (1.1 / eta, 1.7 / eta);
    let (post_lo, post_hi) = (1.5 / eta, 4.71 / eta);
    let mut pre = CheckResult::new("pre_t1_band", format!("S in [{pre_lo}, {pre_hi}] for t < T1"));
    let mut post = CheckResult::new("post_t1_band", format!("S in [{post_lo}, {post_hi}] for t >= T1"));
    let mut scale = CheckResult::new("post_t1_alpha_scale", "lambda1*eta*alpha^2 in [1.5, 4.2] for t >= T1");
    let mut rising = CheckResult::new("pre_t1_alpha_increasing", "alpha(t+1) > alpha(t) for t+1 < T1");
    for r in recs {
        let s = r.sharp.value;
        if r.t < t1 {
            pre.at_least(r.t, s, pre_lo);
            pre.at_most(r.t, s, pre_hi);
        } else {
            post.at_least(r.t, s, post_lo);
            post.at_most(r.t, s, post_hi);
            let a = alpha_scale(cfg, r.params.alpha);
            scale.at_least(r.t, a, 1.5);
            scale.at_most(r.t, a, 4.2);
        }
    }
    for w in recs.windows(2).filter(|w| w[1].t < t1) {
        rising.strictly_above(w[1].t, w[1].params.alpha, w[0].params.alpha);
    }
    if phases.t1.is_none() {
        post.note = Some("T1 not reached within the horizon".into());
        scale.note = post.note.clone();
    }
    Ok(vec_report([pre, post, scale, rising]))
}

/// Per-step bracket `[(1 − 4λ2/λ1)², (1 − λ2/λ1)²]` on `L̂(t+1)/L̂(t)`.
pub fn lhat_ratio_bracket(cfg: &ModelConfig) -> (f64, f64) {
    let q = cfg.lambda2() / cfg.lambda1();
    let lo = 1.0 - 4.0 * q;
    let hi = 1.0 - q;
    (lo * lo, hi * hi)
}

/// Surrogate-loss checks on `t ≤ T4`: `0.75·L2 ≤ L̂ ≤ 3.3·L2` (upper factor 1
/// while `α ≤ √(2/(λ1η))`), the per-step ratio bracket for `t < T4`, and the
/// fitted log-slope over `[0, T4]` inside the same bracket in log form.
///
/// When `T4` is absent every check is skipped with a note.
pub fn verify_lhat(traj: &Trajectory, phases: &PhaseReport) -> Result<VerificationReport> {
    let recs = require_x_start(traj)?;
    let cfg = &traj.config;
    let (rlo, rhi) = lhat_ratio_bracket(cfg);
    let sandwich_bound = "0.75*L2 <= Lhat <= 3.3*L2 (<= L2 while alpha <= sqrt(2/(lambda1*eta)))";
    let ratio_bound = format!("Lhat(t+1)/Lhat(t) in [{rlo}, {rhi}] for t < T4");
    let slope_bound = format!("fitted log-slope in [{}, {}] over [0, T4]", ln(rlo), ln(rhi));
    let Some(t4) = phases.t4 else {
        let why = "T4 not reached within the horizon";
        return Ok(vec_report([
            CheckResult::skipped("lhat_sandwich", sandwich_bound, why),
            CheckResult::skipped("lhat_ratio", ratio_bound, why),
            CheckResult::skipped("lhat_slope", slope_bound, why),
        ]));
    };
    let cap = cfg.clip_alpha();
    let mut sandwich = CheckResult::new("lhat_sandwich", sandwich_bound);
    let mut ratio = CheckResult::new("lhat_ratio", ratio_bound);
    let mut slope = CheckResult::new("lhat_slope", slope_bound);
    let window = &recs[..=t4.min(recs.len() - 1)];
    for r in window {
        let (lhat, l2) = (r.parts.lhat, r.parts.l2);
        sandwich.at_least(r.t, lhat, 0.75 * l2);
        let factor = if r.params.alpha <= cap { 1.0 } else { 3.3 };
        sandwich.at_most(r.t, lhat, factor * l2);
    }
    for w in window.windows(2) {
        if w[0].parts.lhat > 0.0 {
            let q = w[1].parts.lhat / w[0].parts.lhat;
            ratio.at_least(w[0].t, q, rlo);
            ratio.at_most(w[0].t, q, rhi);
        }
    }
    if window.len() < 2 {
        let why = "[0, T4] holds fewer than two records";
        ratio.note = Some(why.into());
        slope.note = Some(why.into());
    } else {
        match fit_decay_slope(traj, 0..window.len()) {
            Ok(k) => {
                slope.at_least(t4, k, ln(rlo));
                slope.at_most(t4, k, ln(rhi));
            }
            Err(e) => {
                slope.fail(t4);
                slope.note = Some(format!("{e}"));
            }
        }
    }
    Ok(vec_report([sandwich, ratio, slope]))
}

/// Least-squares slope of `ln L̂` against `t` over the record indices in `window`.
pub fn fit_decay_slope(traj: &Trajectory, window: Range<usize>) -> Result<f64> {
    let end = window.end.min(traj.records.len());
    let recs = traj.records.get(window.start..end).unwrap_or(&[]);
    if recs.len() < 2 {
        return Err(Error::WindowTooShort);
    }
    let mut pts = Vec::with_capacity(recs.len());
    for r in recs {
        if !(r.parts.lhat > 0.0) {
            return Err(Error::NonPositive(r.t));
        }
        pts.push((r.t as f64, ln(r.parts.lhat)));
    }
    Ok(least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in pts {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// `2·ln(1 − 2λ2/λ1)`: the log-loss decay per step on the constrained trajectory.
pub fn reference_slope(cfg: &ModelConfig) -> f64 {
    2.0 * ln(1.0 - 2.0 * cfg.lambda2() / cfg.lambda1())
}

/// Two-sided bound on the gradient-flow-solution sharpness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfsBounds {
    pub lower: f64,
    pub upper: f64,
}

pub fn gfs_bounds(cfg: &ModelConfig, p: &Params) -> GfsBounds {
    let (l1, eta) = (cfg.lambda1(), cfg.eta());
    let b2 = p.beta2 * p.beta2;
    // (c − λ1ηβ2²)/(2η) + λ1·√(4 + (c/(ηλ1) − β2²)²)/2, with c = 1 or 4.2
    let bound = |c: f64| {
        let d = c / (eta * l1) - b2;
        (c - l1 * eta * b2) / (2.0 * eta) + l1 * sqrt(4.0 + d * d) / 2.0
    };
    GfsBounds {
        lower: bound(1.0),
        upper: bound(4.2),
    }
}

/// `lower(t) ≤ φ(θ(t)) ≤ upper(t)` at every step, both bound sequences
/// nonincreasing, and `φ(θ(0)) ≥ λ1 − 1` when `α(0) = β2(0)`.
pub fn verify_gfs(traj: &Trajectory) -> Result<VerificationReport> {
    let recs = require_x_start(traj)?;
    let cfg = &traj.config;
    let mut lower = CheckResult::new("gfs_lower", "lower(t) <= phi(t)");
    let mut upper = CheckResult::new("gfs_upper", "phi(t) <= upper(t)");
    let mut lower_mono = CheckResult::new("gfs_lower_nonincreasing", "lower(t+1) <= lower(t)");
    let mut upper_mono = CheckResult::new("gfs_upper_nonincreasing", "upper(t+1) <= upper(t)");
    let mut prev: Option<GfsBounds> = None;
    for r in recs {
        let phi = dynamics::gfs_analytic(cfg, &r.params)?.phi;
        let b = gfs_bounds(cfg, &r.params);
        lower.at_least(r.t, phi, b.lower);
        upper.at_most(r.t, phi, b.upper);
        if let Some(pb) = prev {
            lower_mono.observe(r.t, pb.lower - b.lower, b.lower <= pb.lower);
            upper_mono.observe(r.t, pb.upper - b.upper, b.upper <= pb.upper);
        }
        prev = Some(b);
    }
    let p0 = recs[0].params;
    let floor = cfg.lambda1() - 1.0;
    let bound = format!("phi(0) >= {floor} when alpha(0) = beta2(0)");
    let initial = if p0.alpha == p0.beta2 {
        let mut c = CheckResult::new("gfs_initial", bound);
        c.at_least(0, dynamics::gfs_analytic(cfg, &p0)?.phi, floor);
        c
    } else {
        CheckResult::skipped("gfs_initial", bound, "alpha(0) != beta2(0)")
    };
    Ok(vec_report([lower, upper, lower_mono, upper_mono, initial]))
}

/// Edge-of-stability markers: `T2` and `T3` present, `T2 < T3`,
/// `S(T2) > 2.37/η` and `S(T3) < 2/η + η`.
pub fn verify_eos_phases(traj: &Trajectory, phases: &PhaseReport) -> VerificationReport {
    let eta = traj.config.eta();
    let mut order = CheckResult::new("eos_t2_before_t3", "T2 and T3 present with T2 < T3");
    let mut peak = CheckResult::new("eos_peak", format!("S(T2) > {}", 2.37 / eta));
    let mut trough = CheckResult::new("eos_trough", format!("S(T3) < {}", 2.0 / eta + eta));
    let at = |t: usize| traj.records.get(t).map(|r| r.sharp.value);
    match (phases.t2, phases.t3) {
        (Some(t2), Some(t3)) => order.observe(t3, (t3 as f64) - (t2 as f64), t2 < t3),
        (t2, _) => order.fail(t2.unwrap_or(0)),
    }
    match phases.t2.and_then(|t| at(t).map(|s| (t, s))) {
        Some((t, s)) => peak.strictly_above(t, s, 2.37 / eta),
        None => peak.fail(0),
    }
    match phases.t3.and_then(|t| at(t).map(|s| (t, s))) {
        Some((t, s)) => trough.strictly_below(t, s, 2.0 / eta + eta),
        None => trough.fail(0),
    }
    vec_report([order, peak, trough])
}

/// First step from which `L ≤ loss_tol` and `S ≤ sharpness_tol` hold through the
/// end of the trajectory, or `None` if the final record misses either.
pub fn convergence_time(traj: &Trajectory, loss_tol: f64, sharpness_tol: f64) -> Option<usize> {
    let ok = |r: &TrajectoryRecord| r.parts.total <= loss_tol && r.sharp.value <= sharpness_tol;
    let tail = traj.records.iter().rev().take_while(|r| ok(r)).count();
    (tail > 0).then(|| traj.records[traj.records.len() - tail].t)
}

/// Final loss `≤ loss_tol` and final sharpness `≤ sharpness_factor/η`.
pub fn verify_convergence(traj: &Trajectory, loss_tol: f64, sharpness_factor: f64) -> Result<VerificationReport> {
    let last = traj.last().ok_or(Error::EmptyTrajectory)?;
    let s_tol = sharpness_factor / traj.config.eta();
    let mut loss = CheckResult::new("final_loss", format!("L(end) <= {loss_tol:e}"));
    let mut sharp = CheckResult::new("final_sharpness", format!("S(end) <= {s_tol}"));
    loss.at_most(last.t, last.parts.total, loss_tol);
    sharp.at_most(last.t, last.sharp.value, s_tol);
    let note = match convergence_time(traj, loss_tol, s_tol) {
        Some(t) => format!("both hold from step {t} on"),
        None => String::from("not reached within horizon"),
    };
    loss.note = Some(note.clone());
    sharp.note = Some(note);
    Ok(vec_report([loss, sharp]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AbnormalEvent {
    /// α changed sign between `t − 1` and `t`.
    SignFlip { t: usize },
    /// First step where `λ1ηα²` fell below the collapse threshold.
    Collapse { t: usize, alpha_scale: f64 },
}

pub fn detect_abnormal(traj: &Trajectory, collapse_threshold: f64) -> Vec<AbnormalEvent> {
    let cfg = &traj.config;
    let mut events = Vec::new();
    let mut collapsed = false;
    for (i, r) in traj.records.iter().enumerate() {
        if i > 0 {
            let (a0, a1) = (traj.records[i - 1].params.alpha, r.params.alpha);
            if a0 != 0.0 && a1 != 0.0 && (a0 > 0.0) != (a1 > 0.0) {
                events.push(AbnormalEvent::SignFlip { t: r.t });
            }
        }
        let a = alpha_scale(cfg, r.params.alpha);
        if !collapsed && a < collapse_threshold {
            collapsed = true;
            events.push(AbnormalEvent::Collapse { t: r.t, alpha_scale: a });
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::simulate;
    use alloc::vec;

    fn cfg() -> ModelConfig {
        ModelConfig::new(100.0, 0.01, 0.05).unwrap()
    }

    fn synthetic(alphas: &[f64]) -> Trajectory {
        Trajectory::from_params(cfg(), alphas.iter().map(|&a| Params::new(a, 0.001, 0.6))).unwrap()
    }

    #[test]
    fn constant_alpha_has_no_t2() {
        let ph = detect_phases(&synthetic(&[0.5; 6])).unwrap();
        assert_eq!((ph.t2, ph.t3), (None, None));
    }

    #[test]
    fn rise_then_fall() {
        let ph = detect_phases(&synthetic(&[0.5, 0.55, 0.6, 0.58, 0.57, 0.59])).unwrap();
        assert_eq!((ph.t2, ph.t3), (Some(2), Some(4)));
        // λ1ηα² ≥ 1.5 needs α ≥ √0.3
        assert_eq!(ph.t1, Some(1));
    }

    #[test]
    fn empty_trajectory_errors() {
        let t = Trajectory {
            config: cfg(),
            records: vec![],
        };
        assert_eq!(detect_phases(&t), Err(Error::EmptyTrajectory));
    }

    #[test]
    fn t4_threshold_value() {
        assert!((t4_threshold(&cfg()) - 0.790_569_415_042_094_8).abs() < 1e-15);
    }

    #[test]
    fn ratio_bracket_values() {
        let (lo, hi) = lhat_ratio_bracket(&cfg());
        assert!((lo - 0.999_200_16).abs() < 1e-15);
        assert!((hi - 0.999_800_01).abs() < 1e-15);
    }

    #[test]
    fn gfs_bounds_example() {
        let b = gfs_bounds(&cfg(), &Params::new(0.5, 0.0, 0.5));
        assert!((b.lower - (-2.5 + 50.0 * sqrt(4.0025))).abs() < 1e-12);
        assert!((b.upper - (29.5 + 50.0 * sqrt(4.3481))).abs() < 1e-12);
        assert!((b.lower - 97.531).abs() < 1e-3);
        assert!((b.upper - 133.76).abs() < 1e-2);
        let z = gfs_bounds(&cfg(), &Params::new(0.5, 0.0, 0.0));
        assert!((z.lower - (10.0 + 50.0 * sqrt(4.0 + 0.04))).abs() < 1e-12);
    }

    #[test]
    fn geometric_slope_is_exact() {
        let c = cfg();
        let rho: f64 = 0.9995;
        // β2 values whose L̂ is c·ρᵗ
        let k = sqrt(2.0) / sqrt(c.lambda1() * c.eta());
        let params = (0..50).map(|t| {
            let lhat = 1e-3 * libm::pow(rho, t as f64);
            let r = sqrt(2.0 * lhat / c.lambda2());
            Params::new(0.5, 0.0, (1.0 - r) / k)
        });
        let traj = Trajectory::from_params(c, params).unwrap();
        let slope = fit_decay_slope(&traj, 0..50).unwrap();
        assert!((slope - ln(rho)).abs() < 1e-12, "{slope}");
        assert_eq!(fit_decay_slope(&traj, 3..4), Err(Error::WindowTooShort));
    }

    #[test]
    fn abnormal_events() {
        let t = synthetic(&[0.5, -0.3, -0.3]);
        let ev = detect_abnormal(&t, DEFAULT_COLLAPSE_THRESHOLD);
        assert_eq!(ev, vec![AbnormalEvent::SignFlip { t: 1 }]);
        // λ1ηα² = 5α² drops below 0.1 once α < √0.02
        let mut alphas = vec![0.5; 7];
        alphas.extend([0.1, 0.1, 0.5]);
        let ev = detect_abnormal(&synthetic(&alphas), DEFAULT_COLLAPSE_THRESHOLD);
        assert_eq!(ev.len(), 1);
        assert!(matches!(ev[0], AbnormalEvent::Collapse { t: 7, .. }));
    }

    #[test]
    fn check_result_bookkeeping() {
        let mut c = CheckResult::new("x", "x >= 1");
        c.at_least(0, 2.0, 1.0);
        c.at_least(1, 1.0 - 1e-10, 1.0);
        assert!(c.passed);
        c.at_least(2, 0.5, 1.0);
        c.at_least(3, 0.2, 1.0);
        assert!(!c.passed);
        assert_eq!(c.first_violation, Some(2));
        assert_eq!(c.worst_step, Some(3));
        assert!((c.worst_slack + 0.8).abs() < 1e-15);
    }

    #[test]
    fn lemma_reports_misaligned_step() {
        let c = cfg();
        let p0 = crate::regions::sample_x(&c, 3).unwrap();
        let mut traj = simulate(&c, p0, 20).unwrap();
        let mut p = traj.records[10].params;
        p.beta1 = p.alpha;
        traj.records[10] = TrajectoryRecord::new(&c, 10, p, false).unwrap();
        let rep = verify_param_lemma(&traj).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.get("eigvec_alignment").unwrap().first_violation, Some(10));
    }

    #[test]
    fn bands_fail_at_step_zero() {
        let c = cfg();
        let p0 = crate::regions::sample_x(&c, 5).unwrap();
        let mut traj = simulate(&c, p0, 5).unwrap();
        traj.records[0].sharp.value = 1.0 / c.eta();
        let ph = detect_phases(&traj).unwrap();
        let rep = verify_sharpness_bands(&traj, &ph).unwrap();
        assert_eq!(rep.get("pre_t1_band").unwrap().first_violation, Some(0));
    }

    #[test]
    fn gfs_monotonicity_catches_decreasing_beta2() {
        let c = cfg();
        let p0 = crate::regions::sample_x(&c, 7).unwrap();
        let p1 = Params::new(p0.alpha, p0.beta1, p0.beta2 * 0.99);
        let traj = Trajectory::from_params(c, [p0, p1]).unwrap();
        let rep = verify_gfs(&traj).unwrap();
        assert!(!rep.get("gfs_lower_nonincreasing").unwrap().passed);
        assert!(!rep.get("gfs_upper_nonincreasing").unwrap().passed);
    }

    #[test]
    fn verifiers_require_x_start() {
        let traj = synthetic(&[0.1, 0.2]);
        assert_eq!(verify_param_lemma(&traj), Err(Error::NotInRegion(Region::X)));
        assert_eq!(verify_gfs(&traj), Err(Error::NotInRegion(Region::X)));
    }

    #[test]
    fn convergence_time_scans_the_tail() {
        let c = cfg();
        let traj = Trajectory::from_params(
            c,
            [
                Params::new(0.5, 0.0, 2.0),
                Params::new(0.5, 0.0, 1.0),
                Params::new(0.5, 0.0, 2.0),
                Params::new(0.5, 0.0, 2.0),
            ],
        )
        .unwrap();
        assert_eq!(convergence_time(&traj, 1e-12, 100.0), Some(2));
        assert_eq!(convergence_time(&traj, 1e-12, 1.0), None);
    }
}
