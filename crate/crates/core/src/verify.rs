//! Post-hoc audit of closed-loop traces against the feasibility guarantees.
//!
//! Strict inequalities are checked on recorded values without slack,
//! non-strict ones with an absolute slack of [`SLACK`]. Verification may use
//! the exact output derivative recorded by the simulator.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{self, ControlLawConfig, Variant};
use crate::design::DesignParameters;
use crate::plant::PlantModel;
use crate::signals::{AlphaSpec, FunnelSpec, ReferenceSpec};
use crate::sim::{self, SimConfig, SimError, Trace};

pub const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("need at least 3 sampling periods, got {0}")]
    InsufficientData(usize),
    #[error("sampling period {tau} produced an infeasible run")]
    Infeasible { tau: f64 },
    #[error("surrogate gap vanished at tau = {0}; no slope can be fitted")]
    DegenerateGap(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// `φ(t)‖e(t)‖ < 1` on every row.
    Funnel,
    /// `‖e₂(t_k)‖ ≤ 1` at sampling instants.
    E2Samples,
    /// `‖e₂(t)‖ ≤ 1` on every row.
    E2Dense,
    /// `‖u‖ ≤ β/λ`.
    InputBound,
    /// `‖e₁(t)‖ ≤ ε₁` while `‖e₂‖ ≤ 1` has held so far.
    E1E2Coupling,
    /// `‖E(t_k) - e₂(t_k)‖ ≤ τ·M_φ·F̃`.
    SurrogateGap,
    /// `‖ẏ - ẏ_ref‖ ≤ ε̂`.
    DerivativeBound,
    /// `‖E(t_k)‖ ≤ Ê`.
    SurrogateBound,
    /// `‖e₂(t_k)‖ ≤ ‖E(t_k)‖ + τ·M_φ·F̃`.
    E2Estimate,
}

impl Check {
    pub const ALL: [Check; 9] = [
        Check::Funnel,
        Check::E2Samples,
        Check::E2Dense,
        Check::InputBound,
        Check::E1E2Coupling,
        Check::SurrogateGap,
        Check::DerivativeBound,
        Check::SurrogateBound,
        Check::E2Estimate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Check::Funnel => "funnel",
            Check::E2Samples => "e2_samples",
            Check::E2Dense => "e2_dense",
            Check::InputBound => "input_bound",
            Check::E1E2Coupling => "e1e2_coupling",
            Check::SurrogateGap => "surrogate_gap",
            Check::DerivativeBound => "derivative_bound",
            Check::SurrogateBound => "surrogate_bound",
            Check::E2Estimate => "e2_estimate",
        }
    }
}

/// First offending row of a failed check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub time: f64,
    pub check: Check,
    pub value: f64,
}

/// Everything the checker needs besides the trace itself.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyContext {
    pub funnel: FunnelSpec,
    pub reference: ReferenceSpec,
    pub alpha: AlphaSpec,
    pub params: DesignParameters,
    /// Sampling period the trace was produced with.
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `max_t φ(t)‖e(t)‖`
    pub funnel_margin: f64,
    pub e2_max_samples: f64,
    pub e2_max_dense: f64,
    pub input_max: f64,
    pub input_bound: f64,
    pub e1e2_coupling_ok: bool,
    /// `max (‖e₁(t)‖ - ε₁)` over the prefix on which `‖e₂‖ ≤ 1` holds.
    pub e1e2_worst_offset: f64,
    /// `max_k ‖E(t_k) - e₂(t_k)‖`
    pub surrogate_gap_max: f64,
    pub surrogate_gap_bound: f64,
    /// `max_t ‖ẏ - ẏ_ref‖`
    pub derivative_error_max: f64,
    /// `max_k ‖E(t_k)‖`
    pub surrogate_max: f64,
    /// `max_k (‖e₂(t_k)‖ - ‖E(t_k)‖)`
    pub e2_excess_max: f64,
    pub samples: usize,
    pub rows: usize,
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn check_passed(&self, check: Check) -> bool {
        !self.violations.iter().any(|v| v.check == check)
    }

    /// `name = value` lines.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("passed", self.passed().to_string());
        kv("funnel_margin", format!("{:e}", self.funnel_margin));
        kv("e2_max_samples", format!("{:e}", self.e2_max_samples));
        kv("e2_max_dense", format!("{:e}", self.e2_max_dense));
        kv("input_max", format!("{:e}", self.input_max));
        kv("input_bound", format!("{:e}", self.input_bound));
        kv("e1e2_coupling_ok", self.e1e2_coupling_ok.to_string());
        kv("e1e2_worst_offset", format!("{:e}", self.e1e2_worst_offset));
        kv("surrogate_gap_max", format!("{:e}", self.surrogate_gap_max));
        kv(
            "surrogate_gap_bound",
            format!("{:e}", self.surrogate_gap_bound),
        );
        kv(
            "derivative_error_max",
            format!("{:e}", self.derivative_error_max),
        );
        kv("surrogate_max", format!("{:e}", self.surrogate_max));
        kv("e2_excess_max", format!("{:e}", self.e2_excess_max));
        kv("samples", self.samples.to_string());
        kv("rows", self.rows.to_string());
        for check in Check::ALL {
            kv(
                &format!("check.{}", check.name()),
                if self.check_passed(check) {
                    "pass"
                } else {
                    "fail"
                }
                .into(),
            );
        }
        for v in &self.violations {
            kv(
                &format!("violation.{}", v.check.name()),
                format!("t={:e} value={:e}", v.time, v.value),
            );
        }
        out
    }
}

/// `e₂(t)` recomputed from the recorded output, its derivative and the reference.
fn e2_at(
    ctx: &VerifyContext,
    t: f64,
    y: &DVector<f64>,
    ydot: &DVector<f64>,
) -> Option<DVector<f64>> {
    let r = ctx.reference.eval(t);
    let phi = ctx.funnel.phi(t);
    controller::aux_e2(&(y - &r.value), &(ydot - &r.velocity), phi, ctx.alpha).ok()
}

pub fn check_trace(trace: &Trace, ctx: &VerifyContext) -> VerificationReport {
    let p = &ctx.params;
    let m_phi = ctx.funnel.norms().m_phi;
    let gap_bound = ctx.tau * m_phi * p.f_tilde;
    let input_bound = p.beta / p.lambda;

    let mut violations: Vec<Violation> = Vec::new();
    let mut flag = |check: Check, time: f64, value: f64| {
        if !violations.iter().any(|v| v.check == check) {
            violations.push(Violation { time, check, value });
        }
    };

    let mut funnel_margin: f64 = 0.0;
    let mut e2_max_samples: f64 = 0.0;
    let mut e2_max_dense: f64 = 0.0;
    let mut input_max: f64 = 0.0;
    let mut coupling_worst = f64::NEG_INFINITY;
    let mut coupling_active = true;
    let mut gap_max: f64 = 0.0;
    let mut deriv_max: f64 = 0.0;
    let mut surrogate_max: f64 = 0.0;
    let mut excess_max = f64::NEG_INFINITY;
    let mut samples = 0;

    for row in &trace.rows {
        let t = row.t;
        let weighted = ctx.funnel.phi(t) * row.e.norm();
        funnel_margin = funnel_margin.max(weighted);
        if !(weighted < 1.0) {
            flag(Check::Funnel, t, weighted);
        }

        e2_max_dense = e2_max_dense.max(row.norm_e2);
        if !(row.norm_e2 <= 1.0 + SLACK) {
            flag(Check::E2Dense, t, row.norm_e2);
            coupling_active = false;
        }
        if coupling_active {
            let offset = row.norm_e1 - p.eps1;
            coupling_worst = coupling_worst.max(offset);
            if !(offset <= SLACK) {
                flag(Check::E1E2Coupling, t, row.norm_e1);
            }
        }

        let u = row.u.norm();
        input_max = input_max.max(u);
        if !(u <= input_bound + SLACK) {
            flag(Check::InputBound, t, u);
        }

        let dev = (&row.ydot - ctx.reference.eval(t).velocity).norm();
        deriv_max = deriv_max.max(dev);
        if !(dev <= p.eps_hat + SLACK) {
            flag(Check::DerivativeBound, t, dev);
        }

        if let Some(signal) = &row.signal {
            samples += 1;
            e2_max_samples = e2_max_samples.max(row.norm_e2);
            if !(row.norm_e2 <= 1.0 + SLACK) {
                flag(Check::E2Samples, t, row.norm_e2);
            }
            let s_norm = signal.norm();
            surrogate_max = surrogate_max.max(s_norm);
            if !(s_norm <= p.e_hat + SLACK) {
                flag(Check::SurrogateBound, t, s_norm);
            }
            let excess = row.norm_e2 - s_norm;
            excess_max = excess_max.max(excess);
            if !(excess <= gap_bound + SLACK) {
                flag(Check::E2Estimate, t, row.norm_e2);
            }
            match e2_at(ctx, t, &row.y, &row.ydot) {
                Some(e2) => {
                    let gap = (signal - e2).norm();
                    gap_max = gap_max.max(gap);
                    if !(gap <= gap_bound + SLACK) {
                        flag(Check::SurrogateGap, t, gap);
                    }
                }
                None => flag(Check::SurrogateGap, t, f64::INFINITY),
            }
        }
    }

    let e1e2_coupling_ok = !violations.iter().any(|v| v.check == Check::E1E2Coupling);
    violations.sort_by(|a, b| a.time.total_cmp(&b.time));
    VerificationReport {
        funnel_margin,
        e2_max_samples,
        e2_max_dense,
        input_max,
        input_bound,
        e1e2_coupling_ok,
        e1e2_worst_offset: if coupling_worst.is_finite() {
            coupling_worst
        } else {
            0.0
        },
        surrogate_gap_max: gap_max,
        surrogate_gap_bound: gap_bound,
        derivative_error_max: deriv_max,
        surrogate_max,
        e2_excess_max: if excess_max.is_finite() {
            excess_max
        } else {
            0.0
        },
        samples,
        rows: trace.rows.len(),
        violations,
    }
}

/// `max_k ‖E(t_k) - e₂(t_k)‖` over a trace produced by the derivative-free law.
pub fn surrogate_gap_max(
    trace: &Trace,
    reference: &ReferenceSpec,
    funnel: &FunnelSpec,
    alpha: AlphaSpec,
) -> f64 {
    trace
        .samples()
        .filter_map(|row| {
            let r = reference.eval(row.t);
            let phi = funnel.phi(row.t);
            let e2 =
                controller::aux_e2(&(&row.y - &r.value), &(&row.ydot - &r.velocity), phi, alpha)
                    .ok()?;
            Some((row.signal.as_ref()? - e2).norm())
        })
        .fold(0.0, f64::max)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x.ln(), sy + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(num, den), (x, y)| {
        let dx = x.ln() - mx;
        (num + dx * (y.ln() - my), den + dx * dx)
    });
    num / den
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateStudy {
    /// `(τ, max_k ‖E(t_k) - e₂(t_k)‖)`
    pub rows: Vec<(f64, f64)>,
    pub slope: f64,
}

/// Runs the derivative-free law at each sampling period and fits the
/// convergence order of the finite-difference remainder.
pub fn surrogate_consistency_study<P: PlantModel + ?Sized>(
    plant: &P,
    reference: &ReferenceSpec,
    funnel: &FunnelSpec,
    law: &ControlLawConfig,
    base: &SimConfig,
    taus: &[f64],
) -> Result<SurrogateStudy, VerifyError> {
    if taus.len() < 3 {
        return Err(VerifyError::InsufficientData(taus.len()));
    }
    let law = law.with_variant(Variant::DerivativeFree);
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let cfg = SimConfig { tau, ..*base };
        let trace = sim::simulate(plant, reference, funnel, &law, &cfg)?;
        if !trace.is_feasible() {
            return Err(VerifyError::Infeasible { tau });
        }
        let gap = surrogate_gap_max(&trace, reference, funnel, law.alpha);
        if !(gap > 0.0) {
            return Err(VerifyError::DegenerateGap(tau));
        }
        rows.push((tau, gap));
    }
    let slope = log_log_slope(&rows);
    Ok(SurrogateStudy { rows, slope })
}
