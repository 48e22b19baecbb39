//! Gradient descent (with and without the β1 cap), gradient-flow integration and
//! the closed-form gradient-flow solution.

use alloc::vec::Vec;

use crate::model::{self, LossParts, ModelConfig, Params, SharpnessInfo};
use crate::num::sqrt;
use crate::{Error, Result};

/// Runs stop once `|α|` exceeds this.
pub const ALPHA_RUNAWAY: f64 = 1e6;

/// How the β1 update is limited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClipVariant {
    /// `sign(x)·min{|x|, c}`: a magnitude cap. This is what the bounds assume.
    #[default]
    Cap,
    /// `sign(x)·max{|x|, c}`, the clip operator exactly as printed. Exploration only.
    PrintedMax,
}

/// Update rule used by [`simulate_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    Clipped(ClipVariant),
    Unclipped,
}

impl Default for UpdateRule {
    fn default() -> Self {
        UpdateRule::Clipped(ClipVariant::Cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next: Params,
    /// The cap changed the raw β1 update.
    pub beta1_clipped: bool,
    /// α changed sign (both old and new α nonzero).
    pub alpha_sign_flip: bool,
}

fn clip(x: f64, c: f64, variant: ClipVariant) -> (f64, bool) {
    match variant {
        ClipVariant::Cap => {
            if x.abs() > c {
                (c.copysign(x), true)
            } else {
                (x, false)
            }
        }
        ClipVariant::PrintedMax => {
            if x.abs() < c {
                (c.copysign(x), true)
            } else {
                (x, false)
            }
        }
    }
}

fn step_impl(cfg: &ModelConfig, p: &Params, clip_with: Option<ClipVariant>) -> Result<StepOutcome> {
    if !p.is_finite() {
        return Err(Error::Diverged { step: 0, last: *p });
    }
    let eta = cfg.eta();
    let Params { alpha, beta1, beta2 } = *p;
    let res2 = 1.0 - alpha * beta2;
    let next_alpha = alpha - eta * (cfg.lambda1() * beta1 * beta1 * alpha - cfg.lambda2() * beta2 * res2);
    let raw = beta1 - eta * cfg.lambda1() * alpha * alpha * beta1;
    let (next_beta1, beta1_clipped) = match clip_with {
        Some(variant) => clip(raw, cfg.clip_beta1(), variant),
        None => (raw, false),
    };
    let next_beta2 = beta2 + eta * cfg.lambda2() * alpha * res2;
    let next = Params::new(next_alpha, next_beta1, next_beta2);
    if !next.is_finite() || next.alpha.abs() > ALPHA_RUNAWAY {
        return Err(Error::Diverged { step: 1, last: *p });
    }
    Ok(StepOutcome {
        next,
        beta1_clipped,
        alpha_sign_flip: alpha != 0.0 && next_alpha != 0.0 && (alpha > 0.0) != (next_alpha > 0.0),
    })
}

/// One gradient-descent step with the β1 magnitude cap.
pub fn gd_step(cfg: &ModelConfig, p: &Params) -> Result<StepOutcome> {
    step_impl(cfg, p, Some(ClipVariant::Cap))
}

/// One gradient-descent step with an explicit clip variant.
pub fn gd_step_with(cfg: &ModelConfig, p: &Params, variant: ClipVariant) -> Result<StepOutcome> {
    step_impl(cfg, p, Some(variant))
}

/// Plain gradient descent, no limit on β1.
pub fn gd_step_unclipped(cfg: &ModelConfig, p: &Params) -> Result<StepOutcome> {
    step_impl(cfg, p, None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub params: Params,
    pub parts: LossParts,
    pub sharp: SharpnessInfo,
    /// The step that produced this record engaged the β1 cap (false at t = 0).
    pub beta1_clipped: bool,
}

impl TrajectoryRecord {
    pub fn new(cfg: &ModelConfig, t: usize, params: Params, beta1_clipped: bool) -> Result<Self> {
        Ok(Self {
            t,
            params,
            parts: model::loss_parts(cfg, &params)?,
            sharp: model::sharpness_info(cfg, &params)?,
            beta1_clipped,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config: ModelConfig,
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    /// Builds a trajectory from bare parameter vectors, recomputing derived fields.
    pub fn from_params<I>(config: ModelConfig, params: I) -> Result<Self>
    where
        I: IntoIterator<Item = Params>,
    {
        let records = params
            .into_iter()
            .enumerate()
            .map(|(t, p)| TrajectoryRecord::new(&config, t, p, false))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }

    pub fn params(&self) -> impl Iterator<Item = Params> + '_ {
        self.records.iter().map(|r| r.params)
    }
}

/// A run that stopped early; `trajectory` holds every record up to the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialRun {
    pub trajectory: Trajectory,
    pub error: Error,
}

impl core::fmt::Display for PartialRun {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{} ({} records kept)", self.error, self.trajectory.len())
    }
}

impl core::error::Error for PartialRun {}

/// Clipped gradient descent for `steps` steps starting at `p0`.
pub fn simulate(cfg: &ModelConfig, p0: Params, steps: usize) -> core::result::Result<Trajectory, PartialRun> {
    simulate_with(cfg, p0, steps, UpdateRule::default())
}

pub fn simulate_with(
    cfg: &ModelConfig,
    p0: Params,
    steps: usize,
    rule: UpdateRule,
) -> core::result::Result<Trajectory, PartialRun> {
    let mut traj = Trajectory {
        config: *cfg,
        records: Vec::with_capacity(steps + 1),
    };
    let first = match TrajectoryRecord::new(cfg, 0, p0, false) {
        Ok(r) => r,
        Err(error) => {
            return Err(PartialRun {
                trajectory: traj,
                error,
            })
        }
    };
    traj.records.push(first);
    let mut p = p0;
    for t in 1..=steps {
        let out = match rule {
            UpdateRule::Clipped(v) => gd_step_with(cfg, &p, v),
            UpdateRule::Unclipped => gd_step_unclipped(cfg, &p),
        };
        let rec = out.and_then(|o| TrajectoryRecord::new(cfg, t, o.next, o.beta1_clipped));
        match rec {
            Ok(r) => {
                p = r.params;
                traj.records.push(r);
            }
            Err(_) => {
                return Err(PartialRun {
                    trajectory: traj,
                    error: Error::Diverged { step: t, last: p },
                })
            }
        }
    }
    Ok(traj)
}

/// Conserved quantity of gradient flow, `α² − β1² − β2²`.
pub fn layer_gap(p: &Params) -> f64 {
    p.alpha * p.alpha - p.beta1 * p.beta1 - p.beta2 * p.beta2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfOptions {
    /// Stop once `‖∇L‖∞ ≤ grad_tol`.
    pub grad_tol: f64,
    pub max_steps: u64,
    /// RK4 step size.
    pub h: f64,
    /// Keep every `sample_every`-th state (0 keeps only endpoints).
    pub sample_every: u64,
}

impl GfOptions {
    /// `grad_tol = 1e-10`, `max_steps = 10⁸`, `h = min(1e-2, 1/(10λ1))`.
    pub fn for_config(cfg: &ModelConfig) -> Self {
        Self {
            grad_tol: 1e-10,
            max_steps: 100_000_000,
            h: (1e-2f64).min(1.0 / (10.0 * cfg.lambda1())),
            sample_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GfRun {
    pub terminal: Params,
    /// Number of RK4 steps taken.
    pub steps: u64,
    /// Integration time reached, `steps·h`.
    pub time: f64,
    /// `(time, state)` samples, always including the start and the terminal point.
    pub samples: Vec<(f64, Params)>,
    /// Largest `|γ(t) − γ(0)|` seen, with `γ = α² − β1² − β2²`.
    pub max_gap_drift: f64,
}

fn grad_inf(cfg: &ModelConfig, p: &Params) -> f64 {
    let g = model::gradient_unchecked(cfg, p);
    g[0].abs().max(g[1].abs()).max(g[2].abs())
}

fn axpy(p: &Params, s: f64, g: &[f64; 3]) -> Params {
    Params::new(p.alpha + s * g[0], p.beta1 + s * g[1], p.beta2 + s * g[2])
}

/// Integrates `θ̇ = −∇L(θ)` with fixed-step classical RK4.
pub fn gf_integrate(cfg: &ModelConfig, p0: Params, opts: &GfOptions) -> Result<GfRun> {
    if !p0.is_finite() {
        return Err(Error::Diverged { step: 0, last: p0 });
    }
    let h = opts.h;
    let gap0 = layer_gap(&p0);
    let mut p = p0;
    let mut samples = Vec::new();
    samples.push((0.0, p0));
    let mut max_drift = 0.0f64;
    let mut steps = 0u64;
    while grad_inf(cfg, &p) > opts.grad_tol {
        if steps >= opts.max_steps {
            return Err(Error::NotConverged { steps, state: p });
        }
        let k1 = model::gradient_unchecked(cfg, &p);
        let k2 = model::gradient_unchecked(cfg, &axpy(&p, -0.5 * h, &k1));
        let k3 = model::gradient_unchecked(cfg, &axpy(&p, -0.5 * h, &k2));
        let k4 = model::gradient_unchecked(cfg, &axpy(&p, -h, &k3));
        let mut d = [0.0; 3];
        for i in 0..3 {
            d[i] = k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i];
        }
        let next = axpy(&p, -h / 6.0, &d);
        steps += 1;
        if !next.is_finite() || next.alpha.abs() > ALPHA_RUNAWAY {
            return Err(Error::Diverged {
                step: steps as usize,
                last: p,
            });
        }
        p = next;
        max_drift = max_drift.max((layer_gap(&p) - gap0).abs());
        if opts.sample_every > 0 && steps % opts.sample_every == 0 {
            samples.push((steps as f64 * h, p));
        }
    }
    let sampled_last = opts.sample_every > 0 && steps % opts.sample_every == 0;
    if steps > 0 && !sampled_last {
        samples.push((steps as f64 * h, p));
    }
    Ok(GfRun {
        terminal: p,
        steps,
        time: steps as f64 * h,
        samples,
        max_gap_drift: max_drift,
    })
}

/// Closed-form limit of gradient flow started at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfsEstimate {
    /// `α² − β1² − β2²`, conserved along the flow.
    pub gamma: f64,
    /// `α(∞)²  = (γ + √(4 + γ²))/2`.
    pub alpha_inf_sq: f64,
    /// Sharpness of the limit point, `max{λ1·α∞², λ2·α∞² + λ2/α∞²}`.
    pub phi: f64,
}

impl GfsEstimate {
    /// The limit point, taking α(∞) with the sign of the start α.
    pub fn limit(&self, start: &Params) -> Params {
        let a = sqrt(self.alpha_inf_sq).copysign(start.alpha);
        Params::new(a, 0.0, 1.0 / a)
    }
}

pub fn gfs_analytic(cfg: &ModelConfig, p: &Params) -> Result<GfsEstimate> {
    if !p.is_finite() {
        return Err(Error::Diverged { step: 0, last: *p });
    }
    let gamma = layer_gap(p);
    let alpha_inf_sq = alpha_inf_sq(gamma);
    let phi = (cfg.lambda1() * alpha_inf_sq).max(cfg.lambda2() * alpha_inf_sq + cfg.lambda2() / alpha_inf_sq);
    Ok(GfsEstimate {
        gamma,
        alpha_inf_sq,
        phi,
    })
}

/// Positive root `x` of `x − 1/x = γ`.
pub(crate) fn alpha_inf_sq(gamma: f64) -> f64 {
    let disc = sqrt(4.0 + gamma * gamma);
    // (γ + √(4+γ²))/2 cancels badly for γ ≪ 0; use 2/(√(4+γ²) − γ) there.
    if gamma >= 0.0 {
        0.5 * (gamma + disc)
    } else {
        2.0 / (disc - gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig::new(100.0, 0.01, 0.05).unwrap()
    }

    #[test]
    fn gd_step_hand_example() {
        let out = gd_step(&cfg(), &Params::new(0.5, 0.05, 0.5)).unwrap();
        assert!((out.next.alpha - 0.493_937_5).abs() < 1e-15);
        assert!((out.next.beta1 + 0.0125).abs() < 1e-15);
        assert!((out.next.beta2 - 0.500_187_5).abs() < 1e-15);
        assert!(!out.beta1_clipped);
        assert!(!out.alpha_sign_flip);
    }

    #[test]
    fn gd_step_cap() {
        let c = cfg();
        let out = gd_step(&c, &Params::new(0.5, 0.2, 0.5)).unwrap();
        assert!(!out.beta1_clipped);
        assert!((out.next.beta1 + 0.05).abs() < 1e-15);
        let out = gd_step(&c, &Params::new(0.5, 0.5, 0.5)).unwrap();
        assert!(out.beta1_clipped);
        assert_eq!(out.next.beta1, -(sqrt(10.0) / 60.0));
    }

    #[test]
    fn printed_max_variant_floors_magnitude() {
        let c = cfg();
        let out = gd_step_with(&c, &Params::new(0.5, 0.01, 0.5), ClipVariant::PrintedMax).unwrap();
        assert!(out.beta1_clipped);
        assert_eq!(out.next.beta1, -c.clip_beta1());
    }

    #[test]
    fn fixed_points() {
        let c = cfg();
        for &a in &[0.5, 1.0, 2.0] {
            let p = Params::new(a, 0.0, 1.0 / a);
            // αβ2 may round away from 1; only exact products are exact fixed points
            if a * (1.0 / a) == 1.0 {
                assert_eq!(gd_step(&c, &p).unwrap().next, p);
                assert_eq!(gd_step_unclipped(&c, &p).unwrap().next, p);
            }
        }
        let p = Params::new(1.0, 0.0, 1.0);
        assert_eq!(gd_step(&c, &p).unwrap().next, p);
    }

    #[test]
    fn sign_flip_flag() {
        let c = ModelConfig::out_of_theory(100.0, 0.01, 0.1).unwrap();
        let out = gd_step_unclipped(&c, &Params::new(0.5, 1.0, 0.5)).unwrap();
        // α − 0.1·(100·0.5 − 0.00375) < 0
        assert!(out.next.alpha < 0.0);
        assert!(out.alpha_sign_flip);
    }

    #[test]
    fn divergence_is_reported() {
        let c = ModelConfig::out_of_theory(100.0, 0.01, 0.1).unwrap();
        let err = simulate_with(&c, Params::new(3.0, 1.0, 0.5), 200, UpdateRule::Unclipped).unwrap_err();
        assert!(matches!(err.error, Error::Diverged { .. }));
        assert!(!err.trajectory.is_empty());
        assert!(err.trajectory.params().all(|p| p.is_finite()));
    }

    #[test]
    fn simulate_zero_steps() {
        let traj = simulate(&cfg(), Params::new(0.5, 0.005, 0.5), 0).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.records[0].t, 0);
    }

    #[test]
    fn gf_equilibrium_returns_immediately() {
        let c = cfg();
        let run = gf_integrate(&c, Params::new(1.0, 0.0, 1.0), &GfOptions::for_config(&c)).unwrap();
        assert_eq!(run.steps, 0);
        assert_eq!(run.terminal, Params::new(1.0, 0.0, 1.0));
    }

    #[test]
    fn gf_budget_exhaustion() {
        let c = cfg();
        let opts = GfOptions {
            max_steps: 10,
            ..GfOptions::for_config(&c)
        };
        let err = gf_integrate(&c, Params::new(0.5, 0.005, 0.5), &opts).unwrap_err();
        assert!(matches!(err, Error::NotConverged { steps: 10, .. }));
    }

    #[test]
    fn gfs_symmetric_case() {
        let g = gfs_analytic(&cfg(), &Params::new(0.5, 0.0, 0.5)).unwrap();
        assert_eq!(g.gamma, 0.0);
        assert_eq!(g.alpha_inf_sq, 1.0);
        assert_eq!(g.phi, 100.0);
    }

    #[test]
    fn alpha_inf_sq_solves_balance() {
        for &gamma in &[-50.0, -3.0, -0.1, 0.0, 0.2, 4.0, 30.0] {
            let x = alpha_inf_sq(gamma);
            let closed = 0.5 * (gamma + sqrt(4.0 + gamma * gamma));
            assert!((x - closed).abs() <= 1e-12 * closed.max(1e-3), "{gamma}");
            // β2(∞) = 1/α(∞) and α² − β2² = γ
            assert!((x - 1.0 / x - gamma).abs() < 1e-12 * gamma.abs().max(1.0));
        }
    }
}
