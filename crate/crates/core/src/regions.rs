//! Membership tests and seeded samplers for the parameter sets used by the
//! analysis:
//!
//! * `X(η)`: the initialization set;
//! * `X̃(η)`: its flatter subset (α ≤ √(1.5/(λ1η)), β2 ≤ 0.2/α, tighter β1);
//! * `Y`: an η-independent set whose points lie in `X(rη)` for a whole range of `r`;
//! * `M†(η)`: the stable set the constrained trajectory moves on.
//!
//! Every bound keeps the strictness it is stated with: `<` is tested strictly,
//! `≤` inclusively, both with zero tolerance. Samplers draw `α`, then `β2` given
//! `α`, then `β1²` (log-uniform) given both, so no rejection is needed except
//! when rounding grazes a boundary.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{ModelConfig, Params};
use crate::num::{exp, ln, next_down, sqrt};
use crate::{Error, Result};

/// Rejection budget for samplers.
pub const SAMPLER_BUDGET: usize = 100_000;

/// Relative shrink applied to open endpoints when sampling.
const OPEN_SHRINK: f64 = 1e-12;

/// Relative tie tolerance used by [`proposition_c`].
pub const PROPOSITION_ROUNDING: f64 = 1e-12;

/// Default `αβ2` ceiling of `M†`.
pub const DEFAULT_PRODUCT_BOUND: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    X,
    XTilde,
    Y,
    MDagger,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::X => "X",
            Region::XTilde => "X~",
            Region::Y => "Y",
            Region::MDagger => "M-dagger",
        })
    }
}

/// One failed constraint and its signed slack (negative or zero: violated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub constraint: &'static str,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionReport {
    pub member: bool,
    pub violated: Vec<Violation>,
}

impl RegionReport {
    pub fn violates(&self, constraint: &str) -> bool {
        self.violated.iter().any(|v| v.constraint == constraint)
    }
}

#[derive(Default)]
struct Checker {
    violated: Vec<Violation>,
}

impl Checker {
    /// `x ≥ lo`
    fn at_least(&mut self, name: &'static str, x: f64, lo: f64) {
        if !(x >= lo) {
            self.violated.push(Violation {
                constraint: name,
                slack: x - lo,
            });
        }
    }
    /// `x ≤ hi`
    fn at_most(&mut self, name: &'static str, x: f64, hi: f64) {
        if !(x <= hi) {
            self.violated.push(Violation {
                constraint: name,
                slack: hi - x,
            });
        }
    }
    /// `x < hi`
    fn below(&mut self, name: &'static str, x: f64, hi: f64) {
        if !(x < hi) {
            self.violated.push(Violation {
                constraint: name,
                slack: hi - x,
            });
        }
    }
    /// `x > lo`
    fn above(&mut self, name: &'static str, x: f64, lo: f64) {
        if !(x > lo) {
            self.violated.push(Violation {
                constraint: name,
                slack: x - lo,
            });
        }
    }
    fn finish(self) -> RegionReport {
        RegionReport {
            member: self.violated.is_empty(),
            violated: self.violated,
        }
    }
}

struct XBounds {
    alpha_lo: f64,
    alpha_hi: f64,
    beta2_floor: f64,
}

fn x_bounds(lambda1: f64, eta: f64) -> XBounds {
    XBounds {
        alpha_lo: sqrt(1.1 / (lambda1 * eta)),
        alpha_hi: sqrt(2.0 / (lambda1 * eta)),
        beta2_floor: sqrt(6.0 * eta * lambda1) / 20.0,
    }
}

/// `λ2β2(1 − αβ2)/(λ1α)`: the upper end of the `β1²` window.
fn beta1_sq_scale(lambda1: f64, lambda2: f64, alpha: f64, beta2: f64) -> f64 {
    lambda2 * beta2 / (lambda1 * alpha) * (1.0 - alpha * beta2)
}

fn check_x(ch: &mut Checker, lambda1: f64, lambda2: f64, eta: f64, p: &Params) {
    let b = x_bounds(lambda1, eta);
    let Params { alpha, beta1, beta2 } = *p;
    ch.at_least("alpha_lower", alpha, b.alpha_lo);
    ch.at_most("alpha_upper", alpha, b.alpha_hi);
    let floor = b.beta2_floor.max(3.0 / (20.0 * alpha)).max(alpha);
    ch.at_least("beta2_lower", beta2, floor);
    ch.below("beta2_upper", beta2, 1.0 / alpha);
    let s = beta1_sq_scale(lambda1, lambda2, alpha, beta2);
    let b1sq = beta1 * beta1;
    ch.at_least("beta1_sq_lower", b1sq, s / 500.0);
    ch.at_most("beta1_sq_upper", b1sq, s);
}

pub fn in_x(cfg: &ModelConfig, p: &Params) -> RegionReport {
    let mut ch = Checker::default();
    check_x(&mut ch, cfg.lambda1(), cfg.lambda2(), cfg.eta(), p);
    ch.finish()
}

pub fn in_x_tilde(cfg: &ModelConfig, p: &Params) -> RegionReport {
    let mut ch = Checker::default();
    check_x(&mut ch, cfg.lambda1(), cfg.lambda2(), cfg.eta(), p);
    let (l1, l2, eta) = (cfg.lambda1(), cfg.lambda2(), cfg.eta());
    ch.at_most("alpha_tilde_upper", p.alpha, sqrt(1.5 / (l1 * eta)));
    ch.at_most("beta2_tilde_upper", p.beta2, 0.2 / p.alpha);
    let s = beta1_sq_scale(l1, l2, p.alpha, p.beta2);
    ch.at_most("beta1_sq_tilde_upper", p.beta1 * p.beta1, s / 50.0);
    ch.finish()
}

pub fn in_y(p: &Params, lambda1: f64, lambda2: f64) -> RegionReport {
    let mut ch = Checker::default();
    let Params { alpha, beta1, beta2 } = *p;
    ch.at_least("alpha_lower", alpha, 2.0 * sqrt(5.0) / sqrt(lambda1));
    ch.below("alpha_upper", alpha, 1.0);
    ch.at_least("beta2_lower", beta2, alpha.max(sqrt(3.0) / (10.0 * alpha)));
    ch.below("beta2_upper", beta2, 1.0 / alpha);
    let ratio = beta1 * beta1 / (1.0 - alpha * beta2);
    let s = lambda2 * beta2 / (lambda1 * alpha);
    ch.at_least("beta1_ratio_lower", ratio, s / 500.0);
    ch.at_most("beta1_ratio_upper", ratio, s);
    ch.finish()
}

/// Membership in `M†(η)`; `product_bound` caps `αβ2` (see [`DEFAULT_PRODUCT_BOUND`]).
pub fn in_m_dagger(cfg: &ModelConfig, p: &Params, product_bound: f64) -> RegionReport {
    let mut ch = Checker::default();
    let le = cfg.lambda1() * cfg.eta();
    ch.at_least("alpha_lower", p.alpha, 1.0 / sqrt(le));
    ch.at_most("alpha_upper", p.alpha, sqrt(2.0 / le));
    if p.beta1 != 0.0 {
        ch.violated.push(Violation {
            constraint: "beta1_zero",
            slack: -p.beta1.abs(),
        });
    }
    let prod = p.alpha * p.beta2;
    ch.above("product_positive", prod, 0.0);
    ch.at_most("product_upper", prod, product_bound);
    ch.finish()
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        lo
    } else {
        lo + (hi - lo) * rng.gen::<f64>()
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo || lo <= 0.0 {
        return uniform(rng, lo, hi);
    }
    exp(uniform(rng, ln(lo), ln(hi)))
}

fn signed(rng: &mut ChaCha8Rng, magnitude: f64) -> f64 {
    if rng.gen::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

fn shrink_open(hi: f64) -> f64 {
    hi - OPEN_SHRINK * hi.abs()
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws until `accept` holds or the budget runs out.
fn draw<F, A>(region: Region, seed: u64, mut propose: F, accept: A) -> Result<Params>
where
    F: FnMut(&mut ChaCha8Rng) -> Option<Params>,
    A: Fn(&Params) -> bool,
{
    let mut rng = rng_for(seed);
    for _ in 0..SAMPLER_BUDGET {
        if let Some(p) = propose(&mut rng) {
            if accept(&p) {
                return Ok(p);
            }
        }
    }
    Err(Error::SamplerBudget(region))
}

/// Feasible α range for `X` (and `X̃` when `tilde`), or `None` when empty.
fn alpha_window(cfg: &ModelConfig, tilde: bool) -> Option<(f64, f64)> {
    let (l1, eta) = (cfg.lambda1(), cfg.eta());
    let b = x_bounds(l1, eta);
    // β2 ≥ max(c, 3/(20α), α) and β2 < 1/α need α < 1 and c·α < 1
    let mut hi = b.alpha_hi.min(next_down(1.0)).min(next_down(1.0 / b.beta2_floor));
    if tilde {
        // β2 ≤ 0.2/α together with β2 ≥ α and β2 ≥ c
        hi = hi.min(sqrt(1.5 / (l1 * eta))).min(sqrt(0.2)).min(0.2 / b.beta2_floor);
    }
    (b.alpha_lo <= hi).then_some((b.alpha_lo, hi))
}

fn propose_x(cfg: &ModelConfig, rng: &mut ChaCha8Rng, tilde: bool) -> Option<Params> {
    let (alpha_lo, alpha_hi) = alpha_window(cfg, tilde)?;
    let b = x_bounds(cfg.lambda1(), cfg.eta());
    let alpha = uniform(rng, alpha_lo, alpha_hi);
    let beta2_lo = b.beta2_floor.max(3.0 / (20.0 * alpha)).max(alpha);
    let beta2_hi = if tilde {
        (0.2 / alpha).min(shrink_open(1.0 / alpha))
    } else {
        shrink_open(1.0 / alpha)
    };
    if beta2_lo > beta2_hi {
        return None;
    }
    let beta2 = uniform(rng, beta2_lo, beta2_hi);
    let s = beta1_sq_scale(cfg.lambda1(), cfg.lambda2(), alpha, beta2);
    let upper = if tilde { s / 50.0 } else { s };
    let b1sq = log_uniform(rng, s / 500.0, upper);
    Some(Params::new(alpha, signed(rng, sqrt(b1sq)), beta2))
}

/// Seeded draw from `X(η)`.
pub fn sample_x(cfg: &ModelConfig, seed: u64) -> Result<Params> {
    alpha_window(cfg, false).ok_or(Error::EmptyRegion(Region::X))?;
    draw(
        Region::X,
        seed,
        |rng| propose_x(cfg, rng, false),
        |p| in_x(cfg, p).member,
    )
}

/// Seeded draw from `X̃(η)`. Fails with [`Error::EmptyRegion`] when the set is
/// empty, which happens whenever `λ1η < 5.5` (then `β2 ≥ α` and `β2 ≤ 0.2/α`
/// cannot both hold on the α window).
pub fn sample_x_tilde(cfg: &ModelConfig, seed: u64) -> Result<Params> {
    alpha_window(cfg, true).ok_or(Error::EmptyRegion(Region::XTilde))?;
    draw(
        Region::XTilde,
        seed,
        |rng| propose_x(cfg, rng, true),
        |p| in_x_tilde(cfg, p).member,
    )
}

/// Seeded draw from `X(η)` restricted to `α = β2`.
pub fn sample_x_balanced(cfg: &ModelConfig, seed: u64) -> Result<Params> {
    let (lo, hi) = alpha_window(cfg, false).ok_or(Error::EmptyRegion(Region::X))?;
    let b = x_bounds(cfg.lambda1(), cfg.eta());
    // α ≥ c and α ≥ 3/(20α)
    let lo = lo.max(b.beta2_floor).max(sqrt(0.15));
    if lo > hi {
        return Err(Error::EmptyRegion(Region::X));
    }
    draw(
        Region::X,
        seed,
        |rng| {
            let alpha = uniform(rng, lo, hi);
            let s = beta1_sq_scale(cfg.lambda1(), cfg.lambda2(), alpha, alpha);
            let b1sq = log_uniform(rng, s / 500.0, s);
            Some(Params::new(alpha, signed(rng, sqrt(b1sq)), alpha))
        },
        |p| in_x(cfg, p).member,
    )
}

/// Seeded draw from `Y`.
pub fn sample_y(lambda1: f64, lambda2: f64, seed: u64) -> Result<Params> {
    let alpha_lo = 2.0 * sqrt(5.0) / sqrt(lambda1);
    if alpha_lo >= 1.0 {
        return Err(Error::EmptyRegion(Region::Y));
    }
    draw(
        Region::Y,
        seed,
        |rng| {
            let alpha = uniform(rng, alpha_lo, shrink_open(1.0));
            let beta2_lo = alpha.max(sqrt(3.0) / (10.0 * alpha));
            let beta2_hi = shrink_open(1.0 / alpha);
            if beta2_lo > beta2_hi {
                return None;
            }
            let beta2 = uniform(rng, beta2_lo, beta2_hi);
            let s = lambda2 * beta2 / (lambda1 * alpha) * (1.0 - alpha * beta2);
            let b1sq = log_uniform(rng, s / 500.0, s);
            Some(Params::new(alpha, signed(rng, sqrt(b1sq)), beta2))
        },
        |p| in_y(p, lambda1, lambda2).member,
    )
}

/// Seeded draw from `M†(η)`; `β1` is exactly zero.
pub fn sample_m_dagger(cfg: &ModelConfig, product_bound: f64, seed: u64) -> Result<Params> {
    let le = cfg.lambda1() * cfg.eta();
    let (lo, hi) = (1.0 / sqrt(le), sqrt(2.0 / le));
    if lo > hi || !(product_bound > 0.0) {
        return Err(Error::EmptyRegion(Region::MDagger));
    }
    draw(
        Region::MDagger,
        seed,
        |rng| {
            let alpha = uniform(rng, lo, hi);
            // αβ2 ∈ (0, bound]
            let prod = product_bound * (1.0 - rng.gen::<f64>());
            Some(Params::new(alpha, 0.0, prod / alpha))
        },
        |p| in_m_dagger(cfg, p, product_bound).member,
    )
}

/// Learning rate at which `λ1α²η = 2`, nudged down by ulps if rounding would put
/// `α` above `√(2/(λ1η))`.
pub fn matching_eta(alpha: f64, lambda1: f64) -> f64 {
    let mut eta = 2.0 / (lambda1 * alpha * alpha);
    while x_bounds(lambda1, eta).alpha_hi < alpha {
        eta = next_down(eta);
    }
    eta
}

/// For `p ∈ Y`, picks `η` with `λ1α²η = 2` and checks `p ∈ X(rη)` for every `r`
/// in `r_grid`, up to rounding ties at the endpoints of `[0.55, 1]`. Returns
/// `false` if that `η` exceeds 0.1.
pub fn proposition_c(p: &Params, lambda1: f64, lambda2: f64, r_grid: &[f64]) -> Result<bool> {
    if !in_y(p, lambda1, lambda2).member {
        return Err(Error::NotInRegion(Region::Y));
    }
    let eta = matching_eta(p.alpha, lambda1);
    if eta > 0.1 {
        return Ok(false);
    }
    for &r in r_grid {
        let mut ch = Checker::default();
        check_x(&mut ch, lambda1, lambda2, r * eta, p);
        if !ch.violated.iter().all(|v| within_rounding(p, v)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The α window of `X(rη)` meets α exactly at `r = 0.55`, and the `√(6ηλ1)/20`
/// floor meets the `√3/(10α)` floor of `Y` exactly at `r = 1`, so boundary ties
/// are decided by rounding. Violations within `PROPOSITION_ROUNDING` relative to
/// the constrained quantity are treated as ties.
fn within_rounding(p: &Params, v: &Violation) -> bool {
    let value = if v.constraint.starts_with("alpha") {
        p.alpha
    } else if v.constraint.starts_with("beta2") {
        p.beta2
    } else {
        p.beta1 * p.beta1
    };
    v.slack >= -PROPOSITION_ROUNDING * value.abs()
}
