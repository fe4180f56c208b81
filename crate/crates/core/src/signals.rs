//! Funnel functions, reference trajectories and the gain bijection.
//!
//! Everything here is an immutable value type with closed-form evaluation.
//! The norm constants consumed by [`crate::design`] are computed in closed
//! form as well; none of them depend on a simulation horizon.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("invalid funnel parameter `{name}` = {value}: {constraint}")]
    InvalidFunnel {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("invalid reference: {0}")]
    InvalidReference(String),
    /// The argument of the gain bijection left `[0, 1)`; upstream this means
    /// the weighted error reached the funnel boundary.
    #[error("gain function evaluated outside [0, 1) at s = {0}")]
    AlphaDomain(f64),
}

/// Shape of the performance function `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunnelFamily {
    /// `φ ≡ 1/tolerance`.
    Constant { tolerance: f64 },
    /// `φ(t) = 1 / (a·exp(-b·t) + c)`: funnel width `a + c` at `t = 0` shrinking to `c`.
    ExponentialWidth { a: f64, b: f64, c: f64 },
}

/// A validated performance function `φ` with `inf φ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FunnelFamily", into = "FunnelFamily")]
pub struct FunnelSpec {
    family: FunnelFamily,
}

impl TryFrom<FunnelFamily> for FunnelSpec {
    type Error = SignalError;

    fn try_from(family: FunnelFamily) -> Result<Self, Self::Error> {
        FunnelSpec::new(family)
    }
}

impl From<FunnelSpec> for FunnelFamily {
    fn from(spec: FunnelSpec) -> Self {
        spec.family
    }
}

fn check(
    name: &'static str,
    value: f64,
    ok: bool,
    constraint: &'static str,
) -> Result<(), SignalError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(SignalError::InvalidFunnel {
            name,
            value,
            constraint,
        })
    }
}

/// Sup/inf constants of a funnel over `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBlock {
    pub sup_phi: f64,
    pub inf_phi: f64,
    /// `‖φ̇/φ‖∞`
    pub ratio: f64,
    /// `max{sup φ, 1/inf φ}`, used wherever the design formulas need `‖φ‖∞`.
    pub m_phi: f64,
}

impl FunnelSpec {
    pub fn new(family: FunnelFamily) -> Result<Self, SignalError> {
        match family {
            FunnelFamily::Constant { tolerance } => {
                check("tolerance", tolerance, tolerance > 0.0, "must be > 0")?;
            }
            FunnelFamily::ExponentialWidth { a, b, c } => {
                check("a", a, a >= 0.0, "must be >= 0")?;
                check("b", b, b >= 0.0, "must be >= 0")?;
                check("c", c, c > 0.0, "must be > 0")?;
            }
        }
        Ok(FunnelSpec { family })
    }

    pub fn constant(tolerance: f64) -> Result<Self, SignalError> {
        Self::new(FunnelFamily::Constant { tolerance })
    }

    pub fn exponential(a: f64, b: f64, c: f64) -> Result<Self, SignalError> {
        Self::new(FunnelFamily::ExponentialWidth { a, b, c })
    }

    pub fn family(&self) -> FunnelFamily {
        self.family
    }

    /// Returns `(φ(t), φ̇(t))`. For `t < 0` the funnel is extended by its value at `0`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self.family {
            FunnelFamily::Constant { tolerance } => (1.0 / tolerance, 0.0),
            FunnelFamily::ExponentialWidth { a, b, c } => {
                let t = t.max(0.0);
                let decay = a * (-b * t).exp();
                let width = decay + c;
                let phi = 1.0 / width;
                // ψ̇ = -b·a·e^{-bt}, φ̇ = -ψ̇/ψ²
                let phi_dot = if t > 0.0 || b == 0.0 {
                    b * decay / (width * width)
                } else {
                    // right derivative at the origin
                    b * a / (width * width)
                };
                (phi, phi_dot)
            }
        }
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    /// Closed-form norm constants over `[0, ∞)`.
    pub fn norms(&self) -> NormBlock {
        let (sup_phi, inf_phi, ratio) = match self.family {
            FunnelFamily::Constant { tolerance } => (1.0 / tolerance, 1.0 / tolerance, 0.0),
            FunnelFamily::ExponentialWidth { a, b, c } => {
                if b == 0.0 || a == 0.0 {
                    let v = 1.0 / (a + c);
                    (v, v, 0.0)
                } else {
                    // φ̇/φ = b·a·e^{-bt} / (a·e^{-bt} + c) decreases in t
                    (1.0 / c, 1.0 / (a + c), b * a / (a + c))
                }
            }
        };
        NormBlock {
            sup_phi,
            inf_phi,
            ratio,
            m_phi: sup_phi.max(1.0 / inf_phi),
        }
    }
}

/// One sinusoid `amplitude · sin(angular_frequency · t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub angular_frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Sinusoid {
    pub fn new(amplitude: f64, angular_frequency: f64, phase: f64) -> Self {
        Sinusoid {
            amplitude,
            angular_frequency,
            phase,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSpec {
    /// One list of sinusoids per output channel; the channel value is their sum.
    SinusoidSum {
        channels: Vec<Vec<Sinusoid>>,
    },
    Constant {
        value: Vec<f64>,
    },
}

/// `(y_ref, ẏ_ref, ÿ_ref)` at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSample {
    pub value: DVector<f64>,
    pub velocity: DVector<f64>,
    pub acceleration: DVector<f64>,
}

/// Upper bounds of `‖y_ref‖`, `‖ẏ_ref‖`, `‖ÿ_ref‖` over all times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBounds {
    pub value: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

impl ReferenceSpec {
    pub fn sinusoid(amplitude: f64, angular_frequency: f64) -> Self {
        ReferenceSpec::SinusoidSum {
            channels: vec![vec![Sinusoid::new(amplitude, angular_frequency, 0.0)]],
        }
    }

    pub fn constant(value: Vec<f64>) -> Self {
        ReferenceSpec::Constant { value }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        match self {
            ReferenceSpec::SinusoidSum { channels } => {
                if channels.is_empty() {
                    return Err(SignalError::InvalidReference("no output channels".into()));
                }
                let finite = channels.iter().flatten().all(|s| {
                    s.amplitude.is_finite()
                        && s.angular_frequency.is_finite()
                        && s.phase.is_finite()
                });
                if !finite {
                    return Err(SignalError::InvalidReference(
                        "non-finite sinusoid parameter".into(),
                    ));
                }
            }
            ReferenceSpec::Constant { value } => {
                if value.is_empty() {
                    return Err(SignalError::InvalidReference("no output channels".into()));
                }
                if value.iter().any(|v| !v.is_finite()) {
                    return Err(SignalError::InvalidReference(
                        "non-finite constant value".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ReferenceSpec::SinusoidSum { channels } => channels.len(),
            ReferenceSpec::Constant { value } => value.len(),
        }
    }

    pub fn eval(&self, t: f64) -> ReferenceSample {
        match self {
            ReferenceSpec::SinusoidSum { channels } => {
                let m = channels.len();
                let mut value = DVector::zeros(m);
                let mut velocity = DVector::zeros(m);
                let mut acceleration = DVector::zeros(m);
                for (i, terms) in channels.iter().enumerate() {
                    for s in terms {
                        let w = s.angular_frequency;
                        let (sin, cos) = (w * t + s.phase).sin_cos();
                        value[i] += s.amplitude * sin;
                        velocity[i] += s.amplitude * w * cos;
                        acceleration[i] -= s.amplitude * w * w * sin;
                    }
                }
                ReferenceSample {
                    value,
                    velocity,
                    acceleration,
                }
            }
            ReferenceSpec::Constant { value } => {
                let m = value.len();
                ReferenceSample {
                    value: DVector::from_column_slice(value),
                    velocity: DVector::zeros(m),
                    acceleration: DVector::zeros(m),
                }
            }
        }
    }

    /// Sup-norm bounds; exact for a single sinusoid per channel, otherwise the
    /// triangle-inequality bound.
    pub fn bounds(&self) -> ReferenceBounds {
        match self {
            ReferenceSpec::SinusoidSum { channels } => {
                let per_order = |order: i32| {
                    channels
                        .iter()
                        .map(|terms| {
                            terms
                                .iter()
                                .map(|s| s.amplitude.abs() * s.angular_frequency.abs().powi(order))
                                .sum::<f64>()
                                .powi(2)
                        })
                        .sum::<f64>()
                        .sqrt()
                };
                ReferenceBounds {
                    value: per_order(0),
                    velocity: per_order(1),
                    acceleration: per_order(2),
                }
            }
            ReferenceSpec::Constant { value } => ReferenceBounds {
                value: value.iter().map(|v| v * v).sum::<f64>().sqrt(),
                velocity: 0.0,
                acceleration: 0.0,
            },
        }
    }
}

/// Bijection `α: [0, 1) → [1, ∞)` shaping the gain near the funnel boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSpec {
    /// `α(s) = 1/(1 - s)`
    #[default]
    Reciprocal,
}

impl AlphaSpec {
    /// Returns `(α(s), α'(s))`.
    pub fn eval(&self, s: f64) -> Result<(f64, f64), SignalError> {
        if !(0.0..1.0).contains(&s) {
            return Err(SignalError::AlphaDomain(s));
        }
        match self {
            AlphaSpec::Reciprocal => {
                let inv = 1.0 / (1.0 - s);
                Ok((inv, inv * inv))
            }
        }
    }

    pub fn value(&self, s: f64) -> Result<f64, SignalError> {
        self.eval(s).map(|(a, _)| a)
    }
}
