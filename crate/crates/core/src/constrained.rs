//! Projected gradient descent on the stable set `M†(η)`.
//!
//! On `M†` the projection reduces to an explicit rule: β1 stays at zero, α takes
//! a gradient step and is capped at `√(2/(ηλ1))`, β2 takes a plain gradient step.
//! Once α reaches the cap the loss contracts by exactly `(1 − 2λ2/λ1)²` per step.

use alloc::format;
use alloc::vec::Vec;

use crate::analysis::{CheckResult, VerificationReport};
use crate::model::{ModelConfig, Params};
use crate::regions::{self, Region};
use crate::{Error, Result};

/// Relative tolerance on the post-cap loss ratio.
pub const RATIO_TOLERANCE: f64 = 1e-10;

/// `(α†, β2†)`; β1† is identically zero and not stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedState {
    pub alpha: f64,
    pub beta2: f64,
}

impl ConstrainedState {
    pub const fn new(alpha: f64, beta2: f64) -> Self {
        Self { alpha, beta2 }
    }

    /// Drops β1 from a full parameter vector.
    pub fn project(p: &Params) -> Self {
        Self::new(p.alpha, p.beta2)
    }

    pub fn params(&self) -> Params {
        Params::new(self.alpha, 0.0, self.beta2)
    }

    /// `½λ2(αβ2 − 1)²`.
    pub fn loss(&self, cfg: &ModelConfig) -> f64 {
        let r = self.alpha * self.beta2 - 1.0;
        0.5 * cfg.lambda2() * r * r
    }
}

/// Exact per-step loss ratio once α sits at the cap.
pub fn decay_ratio(cfg: &ModelConfig) -> f64 {
    let q = 1.0 - 2.0 * cfg.lambda2() / cfg.lambda1();
    q * q
}

fn require_member(cfg: &ModelConfig, s: &ConstrainedState, product_bound: f64) -> Result<()> {
    if regions::in_m_dagger(cfg, &s.params(), product_bound).member {
        Ok(())
    } else {
        Err(Error::NotInRegion(Region::MDagger))
    }
}

pub fn pgd_step(cfg: &ModelConfig, s: &ConstrainedState, product_bound: f64) -> Result<ConstrainedState> {
    require_member(cfg, s, product_bound)?;
    let g = cfg.eta() * cfg.lambda2() * (1.0 - s.alpha * s.beta2);
    let next = ConstrainedState {
        alpha: (s.alpha + g * s.beta2).min(cfg.clip_alpha()),
        beta2: s.beta2 + g * s.alpha,
    };
    require_member(cfg, &next, product_bound)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedRun {
    pub states: Vec<ConstrainedState>,
    /// First index at which α equals the cap exactly.
    pub t_tilde: Option<usize>,
}

pub fn simulate_constrained(
    cfg: &ModelConfig,
    s0: ConstrainedState,
    steps: usize,
    product_bound: f64,
) -> Result<ConstrainedRun> {
    require_member(cfg, &s0, product_bound)?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(s0);
    let mut s = s0;
    for _ in 0..steps {
        s = pgd_step(cfg, &s, product_bound)?;
        states.push(s);
    }
    let cap = cfg.clip_alpha();
    let t_tilde = states.iter().position(|s| s.alpha == cap);
    Ok(ConstrainedRun { states, t_tilde })
}

/// Before `t_tilde`: α strictly increases and the loss strictly decreases. From
/// `t_tilde` on: α equals the cap exactly and every nonzero-loss step contracts
/// the loss by `(1 − 2λ2/λ1)²` within [`RATIO_TOLERANCE`] relative. β2 strictly
/// increases while `αβ2 < 1`.
pub fn verify_constrained_decay(cfg: &ModelConfig, states: &[ConstrainedState], t_tilde: usize) -> VerificationReport {
    let rho = decay_ratio(cfg);
    let cap = cfg.clip_alpha();
    let mut ratio = CheckResult::new(
        "constrained_ratio",
        format!("|L(t+1)/L(t) - {rho}| <= {RATIO_TOLERANCE:e} relative for t >= t~"),
    );
    let mut at_cap = CheckResult::new("constrained_alpha_at_cap", format!("alpha(t) = {cap} for t >= t~"));
    let mut rising = CheckResult::new("constrained_alpha_increasing", "alpha(t+1) > alpha(t) for t < t~");
    let mut falling = CheckResult::new("constrained_loss_decreasing", "L(t+1) < L(t) for t < t~");
    let mut beta2 = CheckResult::new(
        "constrained_beta2_increasing",
        "beta2(t+1) > beta2(t) while alpha*beta2 < 1",
    );
    for (t, s) in states.iter().enumerate().skip(t_tilde) {
        at_cap.observe(t, 0.0 - (s.alpha - cap).abs(), s.alpha == cap);
    }
    for (t, w) in states.windows(2).enumerate() {
        let (l0, l1) = (w[0].loss(cfg), w[1].loss(cfg));
        if t < t_tilde {
            rising.strictly_above(t, w[1].alpha, w[0].alpha);
            falling.strictly_below(t, l1, l0);
        } else if l0 > 0.0 {
            let err = (l1 / l0 - rho).abs();
            let tol = RATIO_TOLERANCE * rho;
            ratio.observe(t, tol - err, err <= tol);
        }
        if w[0].alpha * w[0].beta2 < 1.0 {
            beta2.strictly_above(t, w[1].beta2, w[0].beta2);
        }
    }
    VerificationReport {
        checks: [ratio, at_cap, rising, falling, beta2].into_iter().collect(),
    }
}
