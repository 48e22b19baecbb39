//! Loss, gradient, Hessian and sharpness of the population square loss
//!
//! ```text
//! L(α, β1, β2) = ½·λ1·(α·β1)² + ½·λ2·(α·β2 − 1)²
//! ```

use crate::eigen::{self, Sym3};
use crate::num::sqrt;
use crate::{Error, Result};

/// Problem constants and learning rate.
///
/// Built through [`ModelConfig::new`], which enforces `λ1 ≥ 100`, `λ1·λ2 ≤ 1`
/// and `η ∈ [2/λ1, 0.1]`, or [`ModelConfig::out_of_theory`], which only requires
/// positive finite values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    lambda1: f64,
    lambda2: f64,
    eta: f64,
    clip_beta1: f64,
    clip_alpha: f64,
    in_theory: bool,
}

impl ModelConfig {
    pub fn new(lambda1: f64, lambda2: f64, eta: f64) -> Result<Self> {
        let cfg = Self::out_of_theory(lambda1, lambda2, eta)?;
        if lambda1 < 100.0 {
            return Err(Error::InvalidConfig("lambda1 must be at least 100"));
        }
        if lambda1 * lambda2 > 1.0 {
            return Err(Error::InvalidConfig("lambda1 * lambda2 must not exceed 1"));
        }
        if eta < 2.0 / lambda1 || eta > 0.1 {
            return Err(Error::InvalidConfig("eta must lie in [2/lambda1, 0.1]"));
        }
        Ok(Self { in_theory: true, ..cfg })
    }

    /// Accepts any positive finite constants. Theorem checks may not apply.
    pub fn out_of_theory(lambda1: f64, lambda2: f64, eta: f64) -> Result<Self> {
        for v in [lambda1, lambda2, eta] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(
                    "lambda1, lambda2 and eta must be positive and finite",
                ));
            }
        }
        Ok(Self {
            lambda1,
            lambda2,
            eta,
            clip_beta1: sqrt(10.0) / (6.0 * sqrt(lambda1)),
            clip_alpha: sqrt(2.0 / (eta * lambda1)),
            in_theory: false,
        })
    }

    /// Same constants with a different learning rate; validity rules follow `self`.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        if self.in_theory {
            Self::new(self.lambda1, self.lambda2, eta)
        } else {
            Self::out_of_theory(self.lambda1, self.lambda2, eta)
        }
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    /// Magnitude cap on β1 updates, `√10 / (6√λ1)`.
    pub fn clip_beta1(&self) -> f64 {
        self.clip_beta1
    }
    /// Cap on α in the constrained trajectory, `√(2/(ηλ1))`.
    pub fn clip_alpha(&self) -> f64 {
        self.clip_alpha
    }
    /// Whether the standing assumptions of the analysis hold.
    pub fn in_theory(&self) -> bool {
        self.in_theory
    }
    /// Stability threshold `2/η`.
    pub fn threshold(&self) -> f64 {
        2.0 / self.eta
    }
}

/// `θ = (α, β1, β2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Params {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Params {
    pub const fn new(alpha: f64, beta1: f64, beta2: f64) -> Self {
        Self { alpha, beta1, beta2 }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.is_finite() && self.beta1.is_finite() && self.beta2.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.alpha, self.beta1, self.beta2]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    fn check(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Diverged { step: 0, last: *self })
        }
    }
}

/// `L = l1 + l2`, plus the surrogate `lhat` of the convergence term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    /// `½λ1(αβ1)²`, the oscillatory term.
    pub l1: f64,
    /// `½λ2(αβ2 − 1)²`, the convergence term.
    pub l2: f64,
    /// `½λ2(1 − √2·β2/√(λ1η))²`: the convergence term with α pinned at `√(2/(λ1η))`.
    pub lhat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpnessInfo {
    /// Largest Hessian eigenvalue `S(θ)`.
    pub value: f64,
    /// Unit eigenvector for `value`.
    pub eigvec: [f64; 3],
    /// `|cos(v, e_β1)|`.
    pub cos_beta1: f64,
    /// The top eigenvalue is (numerically) repeated.
    pub degenerate: bool,
}

pub fn loss(cfg: &ModelConfig, p: &Params) -> Result<f64> {
    p.check()?;
    let r1 = p.alpha * p.beta1;
    let r2 = p.alpha * p.beta2 - 1.0;
    Ok(0.5 * cfg.lambda1 * r1 * r1 + 0.5 * cfg.lambda2 * r2 * r2)
}

/// `(1 − √2·β2/√(λ1η))`, the residual the surrogate loss squares.
pub(crate) fn lhat_residual(cfg: &ModelConfig, beta2: f64) -> f64 {
    1.0 - sqrt(2.0) * beta2 / sqrt(cfg.lambda1 * cfg.eta)
}

pub fn loss_parts(cfg: &ModelConfig, p: &Params) -> Result<LossParts> {
    p.check()?;
    let r1 = p.alpha * p.beta1;
    let r2 = p.alpha * p.beta2 - 1.0;
    let l1 = 0.5 * cfg.lambda1 * r1 * r1;
    let l2 = 0.5 * cfg.lambda2 * r2 * r2;
    let rh = lhat_residual(cfg, p.beta2);
    Ok(LossParts {
        total: l1 + l2,
        l1,
        l2,
        lhat: 0.5 * cfg.lambda2 * rh * rh,
    })
}

/// `(∂L/∂α, ∂L/∂β1, ∂L/∂β2)`.
pub fn gradient(cfg: &ModelConfig, p: &Params) -> Result<[f64; 3]> {
    p.check()?;
    Ok(gradient_unchecked(cfg, p))
}

#[inline]
pub(crate) fn gradient_unchecked(cfg: &ModelConfig, p: &Params) -> [f64; 3] {
    let Params { alpha, beta1, beta2 } = *p;
    let res2 = 1.0 - alpha * beta2;
    [
        cfg.lambda1 * beta1 * beta1 * alpha - cfg.lambda2 * beta2 * res2,
        cfg.lambda1 * alpha * alpha * beta1,
        -cfg.lambda2 * alpha * res2,
    ]
}

pub fn hessian(cfg: &ModelConfig, p: &Params) -> Result<Sym3> {
    p.check()?;
    let Params { alpha, beta1, beta2 } = *p;
    let (l1, l2) = (cfg.lambda1, cfg.lambda2);
    let h01 = 2.0 * l1 * alpha * beta1;
    let h02 = 2.0 * l2 * alpha * beta2 - l2;
    Ok([
        [l1 * beta1 * beta1 + l2 * beta2 * beta2, h01, h02],
        [h01, l1 * alpha * alpha, 0.0],
        [h02, 0.0, l2 * alpha * alpha],
    ])
}

pub fn sharpness_info(cfg: &ModelConfig, p: &Params) -> Result<SharpnessInfo> {
    let h = hessian(cfg, p)?;
    let top = eigen::top_eigen(&h);
    Ok(SharpnessInfo {
        value: top.value,
        eigvec: top.vector,
        cos_beta1: top.vector[1].abs(),
        degenerate: top.degenerate,
    })
}

/// `S(θ)` on the minimizer manifold `{β1 = 0, αβ2 = 1}`:
/// `max{λ1α², λ2α² + λ2β2²}`.
pub fn minimizer_sharpness(cfg: &ModelConfig, alpha: f64, beta2: f64) -> f64 {
    let a2 = alpha * alpha;
    (cfg.lambda1 * a2).max(cfg.lambda2 * a2 + cfg.lambda2 * beta2 * beta2)
}
