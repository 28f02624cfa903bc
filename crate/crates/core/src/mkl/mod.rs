//! Kernel weight learning: controlled-sparsity training on the capped
//! simplex, plus the SimpleMKL and Lp-norm baselines.

mod simplex;
mod trace;
mod train;

pub use simplex::{
    descent_direction, largest_index, lp_direction, max_step, pivot_index, topt_gamma, topt_value,
    StepBound,
};
pub use trace::{OptTrace, Termination, TraceEntry};
pub use train::{
    cskl_train, gamma_objective, lp_gamma_step, lpnorm_mkl_train, lpnorm_weights,
    reduced_gradient_gamma_step, simplemkl_train, CsklConfig, GammaStep, GammaStepOutcome,
    MklConfig, MklModel,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights within this of 0 or 1 are snapped to the bound after each step.
pub const SNAP: f64 = 1e-12;

/// Feasible set a weight vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightConstraint {
    /// `sum(gamma) = t`, `0 <= gamma <= 1`.
    CappedSimplex { t: usize },
    /// `sum(gamma) = 1`, `gamma >= 0`.
    UnitSimplex,
    /// `|gamma|_p <= 1`, `gamma >= 0`.
    LpBall { p: f64 },
}

impl WeightConstraint {
    pub fn check(&self, gamma: &[f64]) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if let Some(g) = gamma.iter().find(|g| !g.is_finite() || **g < 0.0) {
            return bad(format!("weight {g} is negative or non-finite"));
        }
        let sum: f64 = gamma.iter().sum();
        match *self {
            WeightConstraint::CappedSimplex { t } => {
                if t == 0 || t > gamma.len() {
                    return bad(format!("t must lie in 1..={}, got {t}", gamma.len()));
                }
                if let Some(g) = gamma.iter().find(|&&g| g > 1.0 + 1e-12) {
                    return bad(format!("weight {g} exceeds 1"));
                }
                if (sum - t as f64).abs() > 1e-8 {
                    return bad(format!("weights sum to {sum}, expected {t}"));
                }
            }
            WeightConstraint::UnitSimplex => {
                if (sum - 1.0).abs() > 1e-8 {
                    return bad(format!("weights sum to {sum}, expected 1"));
                }
            }
            WeightConstraint::LpBall { p } => {
                if !(p > 1.0) {
                    return bad(format!("p must exceed 1, got {p}"));
                }
                let norm = gamma.iter().map(|g| g.powf(p)).sum::<f64>().powf(1.0 / p);
                if norm > 1.0 + 1e-8 {
                    return bad(format!("weights have {p}-norm {norm} > 1"));
                }
            }
        }
        Ok(())
    }

    /// Feasible starting point: `t/N` everywhere on the capped simplex,
    /// `1/N` on the unit simplex, `N^(-1/p)` on the Lp ball.
    pub fn uniform(&self, n: usize) -> Vec<f64> {
        let value = match *self {
            WeightConstraint::CappedSimplex { t } => t as f64 / n as f64,
            WeightConstraint::UnitSimplex => 1.0 / n as f64,
            WeightConstraint::LpBall { p } => (n as f64).powf(-1.0 / p),
        };
        vec![value; n]
    }
}

/// Kernel weight vector together with the set it was learned on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MklWeights {
    gamma: Vec<f64>,
    constraint: WeightConstraint,
}

impl MklWeights {
    pub fn new(gamma: Vec<f64>, constraint: WeightConstraint) -> Result<Self> {
        constraint.check(&gamma)?;
        Ok(Self { gamma, constraint })
    }

    pub(crate) fn new_unchecked(gamma: Vec<f64>, constraint: WeightConstraint) -> Self {
        Self { gamma, constraint }
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn into_gamma(self) -> Vec<f64> {
        self.gamma
    }

    pub fn constraint(&self) -> WeightConstraint {
        self.constraint
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.gamma.iter().zip(v).map(|(g, x)| g * x).sum()
    }

    /// Number of weights strictly above `threshold`.
    pub fn selected(&self, threshold: f64) -> usize {
        self.gamma.iter().filter(|&&g| g > threshold).count()
    }

    /// Re-validates against the stored constraint.
    pub fn validate(&self) -> Result<()> {
        self.constraint.check(&self.gamma)
    }
}
