//! Sample-and-hold feedback laws.
//!
//! The derivative-free law only ever sees output samples: the derivative
//! term of `e₂` is replaced by the backward difference over one sampling
//! period. The derivative-based law is kept for comparison.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signals::{AlphaSpec, ReferenceSample, SignalError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    /// `‖e₁‖ = φ‖e‖` reached 1 at a sampling instant.
    #[error("funnel violated at sample {sample}: |e1| = {norm_e1}")]
    FunnelViolation { sample: u64, norm_e1: f64 },
    #[error("configuration error: {0}")]
    Config(String),
}

impl From<SignalError> for ControlError {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::AlphaDomain(s) => ControlError::FunnelViolation {
                sample: u64::MAX,
                norm_e1: s.max(0.0).sqrt(),
            },
            other => ControlError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Uses the finite-difference surrogate `E(t_k)`; never reads `ẏ`.
    DerivativeFree,
    /// Uses `e₂(t_k)` built from a measured `ẏ(t_k)`.
    DerivativeBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLawConfig {
    pub beta: f64,
    pub lambda: f64,
    #[serde(default)]
    pub alpha: AlphaSpec,
    pub variant: Variant,
}

impl ControlLawConfig {
    pub fn new(beta: f64, lambda: f64, variant: Variant) -> Result<Self, ControlError> {
        let cfg = ControlLawConfig {
            beta,
            lambda,
            alpha: AlphaSpec::Reciprocal,
            variant,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(ControlError::Config(format!(
                "beta = {} must be finite and >= 0",
                self.beta
            )));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(ControlError::Config(format!(
                "lambda = {} must lie in (0, 1)",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn with_variant(self, variant: Variant) -> Self {
        ControlLawConfig { variant, ..self }
    }
}

/// Which case of the switching law produced the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `‖E‖ < λ`: `u = -βE`
    Linear,
    /// `‖E‖ ≥ λ`: `u = -βE/‖E‖²`
    Normalized,
}

/// `e₁ = φ·e`
pub fn aux_e1(e: &DVector<f64>, phi: f64) -> DVector<f64> {
    e * phi
}

/// `e₂ = φ·ė + α(‖e₁‖²)·e₁`
pub fn aux_e2(
    e: &DVector<f64>,
    edot: &DVector<f64>,
    phi: f64,
    alpha: AlphaSpec,
) -> Result<DVector<f64>, SignalError> {
    let e1 = aux_e1(e, phi);
    let a = alpha.value(e1.norm_squared())?;
    Ok(edot * phi + e1 * a)
}

/// `E(t_k) = φ(t_k)·(e(t_k) - e(t_k - τ))/τ + α(‖e₁(t_k)‖²)·e₁(t_k)`
pub fn surrogate_e(
    e_k: &DVector<f64>,
    e_prev: &DVector<f64>,
    phi: f64,
    tau: f64,
    alpha: AlphaSpec,
) -> Result<DVector<f64>, SignalError> {
    let e1 = aux_e1(e_k, phi);
    let a = alpha.value(e1.norm_squared())?;
    Ok((e_k - e_prev) * (phi / tau) + e1 * a)
}

fn switching_law(signal: &DVector<f64>, beta: f64, lambda: f64) -> (DVector<f64>, Branch) {
    let norm_sq = signal.norm_squared();
    if norm_sq.sqrt() < lambda {
        (signal * -beta, Branch::Linear)
    } else {
        (signal * (-beta / norm_sq), Branch::Normalized)
    }
}

/// Derivative-free law applied to the surrogate `E(t_k)`. `‖u‖ ≤ β/λ`.
pub fn zoh_law(signal: &DVector<f64>, cfg: &ControlLawConfig) -> DVector<f64> {
    switching_law(signal, cfg.beta, cfg.lambda).0
}

/// Same switching structure applied to `e₂(t_k)`.
pub fn zoh_deriv_law(e2: &DVector<f64>, cfg: &ControlLawConfig) -> DVector<f64> {
    switching_law(e2, cfg.beta, cfg.lambda).0
}

pub fn branch(signal: &DVector<f64>, lambda: f64) -> Branch {
    if signal.norm() < lambda {
        Branch::Linear
    } else {
        Branch::Normalized
    }
}

/// State threaded from one sampling instant to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    /// `e(t_{k-1})`
    pub prev_error: DVector<f64>,
    /// `u_{k-1}`
    pub held_input: DVector<f64>,
    pub sample_index: u64,
    pub tau: f64,
}

impl ControllerState {
    /// State at `k = 0` for an initial history sampled at `t = -τ`:
    /// `e(-τ) = y⁰(-τ) - y_ref(-τ)` and `u₋₁ = 0`.
    pub fn from_history(
        history_output: &DVector<f64>,
        reference_at_minus_tau: &DVector<f64>,
        tau: f64,
    ) -> Self {
        let m = history_output.len();
        ControllerState {
            prev_error: history_output - reference_at_minus_tau,
            held_input: DVector::zeros(m),
            sample_index: 0,
            tau,
        }
    }

    /// Initial history lying on the reference, so `e(-τ) = 0`.
    pub fn on_reference(m: usize, tau: f64) -> Self {
        ControllerState {
            prev_error: DVector::zeros(m),
            held_input: DVector::zeros(m),
            sample_index: 0,
            tau,
        }
    }
}

/// Output of one controller update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub input: DVector<f64>,
    /// `E(t_k)` or `e₂(t_k)`, depending on the variant.
    pub signal: DVector<f64>,
    pub branch: Branch,
    pub error: DVector<f64>,
}

/// One sampling instant: builds `E(t_k)` (or `e₂(t_k)`), applies the matching
/// law and advances the state. `ydot` must be present exactly for the
/// derivative-based variant.
pub fn controller_step(
    state: &ControllerState,
    y: &DVector<f64>,
    ydot: Option<&DVector<f64>>,
    reference: &ReferenceSample,
    phi: f64,
    cfg: &ControlLawConfig,
) -> Result<(StepOutput, ControllerState), ControlError> {
    let error = y - &reference.value;
    let norm_e1 = phi * error.norm();
    if norm_e1 >= 1.0 {
        return Err(ControlError::FunnelViolation {
            sample: state.sample_index,
            norm_e1,
        });
    }
    let signal = match (cfg.variant, ydot) {
        (Variant::DerivativeFree, None) => {
            surrogate_e(&error, &state.prev_error, phi, state.tau, cfg.alpha)?
        }
        (Variant::DerivativeBased, Some(ydot)) => {
            let edot = ydot - &reference.velocity;
            aux_e2(&error, &edot, phi, cfg.alpha)?
        }
        (Variant::DerivativeBased, None) => {
            return Err(ControlError::Config(
                "derivative-based law needs an output derivative sample".into(),
            ))
        }
        (Variant::DerivativeFree, Some(_)) => {
            return Err(ControlError::Config(
                "derivative-free law must not be given an output derivative".into(),
            ))
        }
    };
    let (input, branch) = switching_law(&signal, cfg.beta, cfg.lambda);
    let next = ControllerState {
        prev_error: error.clone(),
        held_input: input.clone(),
        sample_index: state.sample_index + 1,
        tau: state.tau,
    };
    Ok((
        StepOutput {
            input,
            signal,
            branch,
            error,
        },
        next,
    ))
}
