//! Closed-loop sample-and-hold simulation.
//!
//! The input is frozen on every `[t_k, t_k + τ)` and the plant is integrated
//! with classical RK4 on a grid aligned to the sampling instants, so no step
//! ever straddles an input discontinuity.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{self, Branch, ControlError, ControlLawConfig, ControllerState, Variant};
use crate::linalg;
use crate::plant::PlantModel;
use crate::signals::{AlphaSpec, FunnelSpec, ReferenceSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation setup: {0}")]
    Config(String),
    #[error("non-finite state at t = {time} (substep {substep})")]
    Blowup { time: f64, substep: usize },
    #[error("input gain lost positive definiteness at t = {time} (min eigenvalue {value})")]
    GainNotPositive { time: f64, value: f64 },
    #[error(transparent)]
    Control(#[from] ControlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub tau: f64,
    pub horizon: f64,
    pub substeps_per_sample: usize,
    #[serde(default)]
    pub integrator: Integrator,
    pub record_stride: usize,
}

impl SimConfig {
    pub fn new(tau: f64, horizon: f64) -> Self {
        SimConfig {
            tau,
            horizon,
            substeps_per_sample: 20,
            integrator: Integrator::Rk4Fixed,
            record_stride: 1,
        }
    }

    pub fn with_substeps(self, substeps_per_sample: usize) -> Self {
        SimConfig {
            substeps_per_sample,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(SimError::Config(format!("tau = {} must be > 0", self.tau)));
        }
        if !(self.horizon >= self.tau && self.horizon.is_finite()) {
            return Err(SimError::Config(format!(
                "horizon = {} must be >= tau = {}",
                self.horizon, self.tau
            )));
        }
        if self.horizon / self.tau > 1e12 {
            return Err(SimError::Config("too many sampling intervals".into()));
        }
        if self.substeps_per_sample == 0 || self.record_stride == 0 {
            return Err(SimError::Config(
                "substeps_per_sample and record_stride must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Number of hold intervals; the last one is truncated at the horizon.
    pub fn sample_count(&self) -> u64 {
        let ratio = self.horizon / self.tau;
        let n = ratio.round();
        if (ratio - n).abs() <= 1e-9 * ratio.max(1.0) {
            n.max(1.0) as u64
        } else {
            ratio.ceil() as u64
        }
    }
}

/// `(y, ẏ, η)`
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub y: DVector<f64>,
    pub ydot: DVector<f64>,
    pub eta: DVector<f64>,
}

impl PlantState {
    fn stack(&self) -> DVector<f64> {
        let (m, l) = (self.y.len(), self.eta.len());
        let mut x = DVector::zeros(2 * m + l);
        x.rows_mut(0, m).copy_from(&self.y);
        x.rows_mut(m, m).copy_from(&self.ydot);
        x.rows_mut(2 * m, l).copy_from(&self.eta);
        x
    }

    fn unstack(x: &DVector<f64>, m: usize, l: usize) -> Self {
        PlantState {
            y: x.rows(0, m).into_owned(),
            ydot: x.rows(m, m).into_owned(),
            eta: x.rows(2 * m, l).into_owned(),
        }
    }

    fn is_finite(&self) -> bool {
        self.y
            .iter()
            .chain(self.ydot.iter())
            .chain(self.eta.iter())
            .all(|v| v.is_finite())
    }
}

fn vector_field<P: PlantModel + ?Sized>(
    plant: &P,
    t: f64,
    x: &DVector<f64>,
    u: &DVector<f64>,
    m: usize,
    l: usize,
) -> DVector<f64> {
    let s = PlantState::unstack(x, m, l);
    let d = plant.disturbance(t);
    let acc = plant.drift(&d, &s.y, &s.ydot, &s.eta) + plant.gain(&d, &s.y, &s.ydot, &s.eta) * u;
    let deta = plant.internal(&s.eta, &s.y, &s.ydot);
    let mut dx = DVector::zeros(2 * m + l);
    dx.rows_mut(0, m).copy_from(&s.ydot);
    dx.rows_mut(m, m).copy_from(&acc);
    dx.rows_mut(2 * m, l).copy_from(&deta);
    dx
}

/// Integrates the plant over `[t0, t1]` with the input held at `u`, using
/// `substeps` equal RK4 steps. Returns the state after every substep.
pub fn integrate_hold<P: PlantModel + ?Sized>(
    plant: &P,
    state: &PlantState,
    u: &DVector<f64>,
    t0: f64,
    t1: f64,
    substeps: usize,
) -> Result<Vec<(f64, PlantState)>, SimError> {
    if !(t1 > t0) || substeps == 0 {
        return Err(SimError::Config(format!(
            "hold interval [{t0}, {t1}] with {substeps} substeps is empty"
        )));
    }
    let (m, l) = (state.y.len(), state.eta.len());
    let h = (t1 - t0) / substeps as f64;
    let mut x = state.stack();
    let mut out = Vec::with_capacity(substeps);
    for i in 0..substeps {
        let t = t0 + i as f64 * h;
        let k1 = vector_field(plant, t, &x, u, m, l);
        let k2 = vector_field(plant, t + 0.5 * h, &(&x + &k1 * (0.5 * h)), u, m, l);
        let k3 = vector_field(plant, t + 0.5 * h, &(&x + &k2 * (0.5 * h)), u, m, l);
        let k4 = vector_field(plant, t + h, &(&x + &k3 * h), u, m, l);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let t_next = if i + 1 == substeps {
            t1
        } else {
            t0 + (i + 1) as f64 * h
        };
        let s = PlantState::unstack(&x, m, l);
        if !s.is_finite() {
            return Err(SimError::Blowup {
                time: t_next,
                substep: i + 1,
            });
        }
        out.push((t_next, s));
    }
    Ok(out)
}

/// One recorded point of the closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub y: DVector<f64>,
    pub ydot: DVector<f64>,
    pub eta: DVector<f64>,
    pub e: DVector<f64>,
    pub norm_e1: f64,
    /// From the exact `ẏ`; for auditing only. Infinite once `‖e₁‖ ≥ 1`.
    pub norm_e2: f64,
    pub u: DVector<f64>,
    /// `E(t_k)` (or `e₂(t_k)` for the derivative-based law) on sampling rows.
    pub signal: Option<DVector<f64>>,
}

impl TraceRow {
    pub fn is_sample(&self) -> bool {
        self.signal.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TraceStatus {
    Complete,
    /// The weighted error reached the funnel boundary at `time`; the trace
    /// ends with the offending row.
    FunnelViolation {
        time: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub output_dim: usize,
    pub internal_dim: usize,
    pub tau: f64,
    pub rows: Vec<TraceRow>,
    /// Branch taken at each sampling instant. Not serialized.
    pub branches: Vec<Branch>,
    pub status: TraceStatus,
}

impl Trace {
    pub fn is_feasible(&self) -> bool {
        self.status == TraceStatus::Complete
    }

    pub fn samples(&self) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(|r| r.is_sample())
    }

    pub fn input_max(&self) -> f64 {
        self.rows.iter().map(|r| r.u.norm()).fold(0.0, f64::max)
    }

    pub fn funnel_margin(&self, funnel: &FunnelSpec) -> f64 {
        self.rows
            .iter()
            .map(|r| funnel.phi(r.t) * r.e.norm())
            .fold(0.0, f64::max)
    }
}

fn make_row(
    t: f64,
    s: &PlantState,
    reference: &ReferenceSpec,
    funnel: &FunnelSpec,
    alpha: AlphaSpec,
    u: &DVector<f64>,
    signal: Option<DVector<f64>>,
) -> TraceRow {
    let r = reference.eval(t);
    let phi = funnel.phi(t);
    let e = &s.y - &r.value;
    let edot = &s.ydot - &r.velocity;
    let norm_e1 = phi * e.norm();
    let norm_e2 = controller::aux_e2(&e, &edot, phi, alpha)
        .map(|v| v.norm())
        .unwrap_or(f64::INFINITY);
    TraceRow {
        t,
        y: s.y.clone(),
        ydot: s.ydot.clone(),
        eta: s.eta.clone(),
        e,
        norm_e1,
        norm_e2,
        u: u.clone(),
        signal,
    }
}

/// Runs the sampled-data closed loop from an initial history on the
/// reference: `y⁰ = y_ref` on `[-τ, 0]`, hence `e(-τ) = e(0) = 0`, `ė(0) = 0`
/// and `u₋₁ = 0`.
pub fn simulate<P: PlantModel + ?Sized>(
    plant: &P,
    reference: &ReferenceSpec,
    funnel: &FunnelSpec,
    law: &ControlLawConfig,
    cfg: &SimConfig,
) -> Result<Trace, SimError> {
    cfg.validate()?;
    law.validate()?;
    let (m, l) = (plant.output_dim(), plant.internal_dim());
    if reference.output_dim() != m {
        return Err(SimError::Config(format!(
            "reference has {} channels, plant has {m} outputs",
            reference.output_dim()
        )));
    }
    let eta0 = plant.initial_internal();
    if eta0.len() != l {
        return Err(SimError::Config(
            "initial internal state has wrong dimension".into(),
        ));
    }
    let r0 = reference.eval(0.0);
    let mut state = PlantState {
        y: r0.value,
        ydot: r0.velocity,
        eta: eta0,
    };
    let mut ctrl = ControllerState::on_reference(m, cfg.tau);
    let n = cfg.sample_count();
    let substeps = cfg.substeps_per_sample;
    let mut rows =
        Vec::with_capacity((n as usize).saturating_mul(substeps / cfg.record_stride + 1) + 1);
    let mut branches = Vec::with_capacity(n as usize);

    for k in 0..n {
        let t_k = k as f64 * cfg.tau;
        let t_next = if k + 1 == n {
            cfg.horizon
        } else {
            (k + 1) as f64 * cfg.tau
        };

        let d = plant.disturbance(t_k);
        let g_min =
            linalg::min_symmetric_eigenvalue(&plant.gain(&d, &state.y, &state.ydot, &state.eta));
        if !(g_min > 0.0) {
            return Err(SimError::GainNotPositive {
                time: t_k,
                value: g_min,
            });
        }

        let reference_k = reference.eval(t_k);
        let phi_k = funnel.phi(t_k);
        let ydot = match law.variant {
            Variant::DerivativeFree => None,
            Variant::DerivativeBased => Some(&state.ydot),
        };
        let (out, next) =
            match controller::controller_step(&ctrl, &state.y, ydot, &reference_k, phi_k, law) {
                Ok(v) => v,
                Err(ControlError::FunnelViolation { .. }) => {
                    let u = ctrl.held_input.clone();
                    rows.push(make_row(
                        t_k, &state, reference, funnel, law.alpha, &u, None,
                    ));
                    return Ok(Trace {
                        output_dim: m,
                        internal_dim: l,
                        tau: cfg.tau,
                        rows,
                        branches,
                        status: TraceStatus::FunnelViolation { time: t_k },
                    });
                }
                Err(e) => return Err(e.into()),
            };
        ctrl = next;
        branches.push(out.branch);
        let u = out.input;
        rows.push(make_row(
            t_k,
            &state,
            reference,
            funnel,
            law.alpha,
            &u,
            Some(out.signal),
        ));

        let points = integrate_hold(plant, &state, &u, t_k, t_next, substeps)?;
        for (i, (t, s)) in points.into_iter().enumerate() {
            let step = i + 1;
            let row = make_row(t, &s, reference, funnel, law.alpha, &u, None);
            let violated = !(row.norm_e1 < 1.0);
            let last = step == substeps;
            if violated || (last && k + 1 == n) || (!last && step % cfg.record_stride == 0) {
                rows.push(row);
            }
            state = s;
            if violated {
                return Ok(Trace {
                    output_dim: m,
                    internal_dim: l,
                    tau: cfg.tau,
                    rows,
                    branches,
                    status: TraceStatus::FunnelViolation { time: t },
                });
            }
        }
    }

    Ok(Trace {
        output_dim: m,
        internal_dim: l,
        tau: cfg.tau,
        rows,
        branches,
        status: TraceStatus::Complete,
    })
}

/// Both laws on identical grids.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantComparison {
    pub free: Trace,
    pub deriv: Trace,
    /// `max_k ‖u_free(t_k) - u_deriv(t_k)‖` over common sampling instants.
    pub input_gap: f64,
    /// `max_t ‖y_free(t) - y_deriv(t)‖` over common rows.
    pub output_gap: f64,
}

pub fn compare_variants<P: PlantModel + ?Sized>(
    plant: &P,
    reference: &ReferenceSpec,
    funnel: &FunnelSpec,
    law: &ControlLawConfig,
    cfg: &SimConfig,
) -> Result<VariantComparison, SimError> {
    let free = simulate(
        plant,
        reference,
        funnel,
        &law.with_variant(Variant::DerivativeFree),
        cfg,
    )?;
    let deriv = simulate(
        plant,
        reference,
        funnel,
        &law.with_variant(Variant::DerivativeBased),
        cfg,
    )?;
    let mut input_gap: f64 = 0.0;
    let mut output_gap: f64 = 0.0;
    for (a, b) in free.rows.iter().zip(&deriv.rows) {
        debug_assert_eq!(a.t, b.t);
        output_gap = output_gap.max((&a.y - &b.y).norm());
        if a.is_sample() && b.is_sample() {
            input_gap = input_gap.max((&a.u - &b.u).norm());
        }
    }
    Ok(VariantComparison {
        free,
        deriv,
        input_gap,
        output_gap,
    })
}
