//! Controller design constants and the sufficient sampling-time bound.
//!
//! The pipeline is: funnel norms and the gain bijection give `ξ`, `ε₁` and the
//! derivative bound `ε̂`; those fix the operating set on which the plant's
//! worst-case constants are taken; everything else follows in closed form.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{self, LinearIOPlant, OperatingSet, PlantError, WorstCaseBounds};
use crate::signals::{AlphaSpec, FunnelSpec, NormBlock, ReferenceSpec, SignalError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("invalid design input `{name}` = {value}: {constraint}")]
    InvalidInput {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("initial weighted error bound eps1 = {0} is not below 1")]
    InitialCondition(f64),
    #[error("no admissible sampling time: {term} term is {value}")]
    Infeasible { term: TauTerm, value: f64 },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

/// The three candidates whose minimum bounds the sampling period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauTerm {
    /// `(inf φ·g_min·β - 2κ₀) / (M_φ²·F̃·Ê)`
    NormalizedBranch,
    /// `κ₀ / κ₁²`
    GrowthRate,
    /// `(1 - λ) / (M_φ(F̃ + g_max λ) + κ₀)`
    LinearBranch,
}

impl TauTerm {
    pub const ALL: [TauTerm; 3] = [
        TauTerm::NormalizedBranch,
        TauTerm::GrowthRate,
        TauTerm::LinearBranch,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TauTerm::NormalizedBranch => "normalized_branch",
            TauTerm::GrowthRate => "growth_rate",
            TauTerm::LinearBranch => "linear_branch",
        }
    }
}

impl fmt::Display for TauTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Full block of design constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignParameters {
    pub xi: f64,
    pub eps1: f64,
    pub gamma_bar: f64,
    pub kappa0: f64,
    pub eps_hat: f64,
    pub e_hat: f64,
    pub beta: f64,
    pub f_tilde: f64,
    pub kappa1: f64,
    pub lambda: f64,
    pub tau_max: f64,
    /// Candidates in [`TauTerm::ALL`] order; `tau_max` is their minimum.
    pub tau_terms: [f64; 3],
}

/// `ξ`, `ε₁` and the derived error bounds that do not depend on the plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMargins {
    pub xi: f64,
    pub eps1: f64,
    /// `α(ε₁²)·ε₁`
    pub alpha_eps1: f64,
    /// `ε̂ = M_φ(1 + α(ε₁²)ε₁)`, bound on `‖ė‖`.
    pub eps_hat: f64,
}

/// Unique root of `α(ξ²)·ξ = 1 + r` in `(0, 1)`, by bisection down to
/// floating-point resolution.
pub fn solve_xi(alpha: AlphaSpec, r: f64) -> f64 {
    assert!(
        r >= 0.0 && r.is_finite(),
        "ratio must be finite and non-negative"
    );
    let target = 1.0 + r;
    let residual = |x: f64| {
        alpha
            .value(x * x)
            .map(|a| a * x - target)
            .unwrap_or(f64::INFINITY)
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if residual(lo).abs() <= residual(hi).abs() {
        lo
    } else {
        hi
    }
}

fn require(
    name: &'static str,
    value: f64,
    ok: bool,
    constraint: &'static str,
) -> Result<(), DesignError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(DesignError::InvalidInput {
            name,
            value,
            constraint,
        })
    }
}

pub fn error_margins(
    norms: &NormBlock,
    alpha: AlphaSpec,
    e1_initial_norm: f64,
) -> Result<ErrorMargins, DesignError> {
    require(
        "e1_initial_norm",
        e1_initial_norm,
        e1_initial_norm >= 0.0,
        "must be >= 0",
    )?;
    let xi = solve_xi(alpha, norms.ratio);
    let eps1 = e1_initial_norm.max(xi);
    if eps1 >= 1.0 {
        return Err(DesignError::InitialCondition(eps1));
    }
    let alpha_eps1 = alpha.value(eps1 * eps1)? * eps1;
    Ok(ErrorMargins {
        xi,
        eps1,
        alpha_eps1,
        eps_hat: norms.m_phi * (1.0 + alpha_eps1),
    })
}

/// Design block for a given `β`. The sampling bound may come out non-positive;
/// use [`DesignParameters::check_feasible`] or [`derive_design_parameters`]
/// to reject that.
pub fn design_with_beta(
    norms: &NormBlock,
    bounds: &WorstCaseBounds,
    yref_acc_bound: f64,
    e1_initial_norm: f64,
    lambda: f64,
    alpha: AlphaSpec,
    beta: f64,
) -> Result<DesignParameters, DesignError> {
    require(
        "lambda",
        lambda,
        lambda > 0.0 && lambda < 1.0,
        "must lie in (0, 1)",
    )?;
    require("beta", beta, beta >= 0.0, "must be >= 0")?;
    require("f_max", bounds.f_max, bounds.f_max >= 0.0, "must be >= 0")?;
    require("g_min", bounds.g_min, bounds.g_min > 0.0, "must be > 0")?;
    require(
        "g_max",
        bounds.g_max,
        bounds.g_max >= bounds.g_min,
        "must be >= g_min",
    )?;
    require(
        "yref_acc_bound",
        yref_acc_bound,
        yref_acc_bound >= 0.0,
        "must be >= 0",
    )?;

    let m = norms.m_phi;
    let margins = error_margins(norms, alpha, e1_initial_norm)?;
    let ErrorMargins {
        xi,
        eps1,
        alpha_eps1,
        eps_hat,
    } = margins;
    let (a_eps, da_eps) = alpha.eval(eps1 * eps1)?;
    let alpha_xi = alpha.value(xi * xi)? * xi;

    let gamma_bar = (2.0 * da_eps * eps1 * eps1 + a_eps) * (alpha_xi + alpha_eps1);
    let kappa0 = norms.ratio * (1.0 + alpha_eps1) + m * (bounds.f_max + yref_acc_bound) + gamma_bar;
    let e_hat = m * eps_hat + alpha_eps1;
    let f_tilde = 0.5 * (bounds.f_max + bounds.g_max * m * beta / lambda);
    let kappa1 = kappa0 + m * beta * bounds.g_max;

    let tau_terms = [
        (norms.inf_phi * bounds.g_min * beta - 2.0 * kappa0) / (m * m * f_tilde * e_hat),
        kappa0 / (kappa1 * kappa1),
        (1.0 - lambda) / (m * (f_tilde + bounds.g_max * lambda) + kappa0),
    ];
    let tau_max = tau_terms.iter().copied().fold(f64::INFINITY, f64::min);

    Ok(DesignParameters {
        xi,
        eps1,
        gamma_bar,
        kappa0,
        eps_hat,
        e_hat,
        beta,
        f_tilde,
        kappa1,
        lambda,
        tau_max,
        tau_terms,
    })
}

/// Smallest admissible gain `2·M_φ·κ₀/g_min`. `κ₀` does not depend on `β`.
pub fn minimal_beta(
    norms: &NormBlock,
    bounds: &WorstCaseBounds,
    yref_acc_bound: f64,
    e1_initial_norm: f64,
    lambda: f64,
    alpha: AlphaSpec,
) -> Result<f64, DesignError> {
    let probe = design_with_beta(
        norms,
        bounds,
        yref_acc_bound,
        e1_initial_norm,
        lambda,
        alpha,
        0.0,
    )?;
    Ok(2.0 * norms.m_phi * probe.kappa0 / bounds.g_min)
}

/// Computes all design constants with `β = beta_margin · 2M_φκ₀/g_min` and
/// rejects designs without a positive sampling bound.
pub fn derive_design_parameters(
    norms: &NormBlock,
    bounds: &WorstCaseBounds,
    yref_acc_bound: f64,
    e1_initial_norm: f64,
    lambda: f64,
    alpha: AlphaSpec,
    beta_margin: f64,
) -> Result<DesignParameters, DesignError> {
    require(
        "beta_margin",
        beta_margin,
        beta_margin >= 1.0,
        "must be >= 1",
    )?;
    let beta = beta_margin
        * minimal_beta(
            norms,
            bounds,
            yref_acc_bound,
            e1_initial_norm,
            lambda,
            alpha,
        )?;
    let params = design_with_beta(
        norms,
        bounds,
        yref_acc_bound,
        e1_initial_norm,
        lambda,
        alpha,
        beta,
    )?;
    params.check_feasible()?;
    Ok(params)
}

impl DesignParameters {
    /// The candidate attaining `tau_max`.
    pub fn binding_term(&self) -> TauTerm {
        let mut best = 0;
        for i in 1..3 {
            if self.tau_terms[i] < self.tau_terms[best] {
                best = i;
            }
        }
        TauTerm::ALL[best]
    }

    pub fn check_feasible(&self) -> Result<(), DesignError> {
        for (term, value) in TauTerm::ALL.iter().zip(self.tau_terms) {
            if !(value > 0.0) || !value.is_finite() {
                return Err(DesignError::Infeasible { term: *term, value });
            }
        }
        Ok(())
    }

    /// Input bound `β/λ` implied by the control law.
    pub fn input_bound(&self) -> f64 {
        self.beta / self.lambda
    }
}

/// Ordered derivation trail of the sampling bound.
#[derive(Debug, Clone, PartialEq)]
pub struct TauReport {
    pub candidates: Vec<(TauTerm, f64)>,
    pub binding: TauTerm,
    pub tau_max: f64,
}

pub fn explain_tau(params: &DesignParameters) -> TauReport {
    TauReport {
        candidates: TauTerm::ALL.iter().copied().zip(params.tau_terms).collect(),
        binding: params.binding_term(),
        tau_max: params.tau_max,
    }
}

impl fmt::Display for TauReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (term, value) in &self.candidates {
            let mark = if *term == self.binding {
                "  <- binding"
            } else {
                ""
            };
            writeln!(f, "  {:<18} {:.10e}{}", term.name(), value, mark)?;
        }
        write!(f, "  {:<18} {:.10e}", "tau_max", self.tau_max)
    }
}

/// Everything needed to run and audit a design for a linear plant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantDesign {
    pub norms: NormBlock,
    pub operating_set: OperatingSet,
    pub bounds: WorstCaseBounds,
    pub params: DesignParameters,
}

/// Operating set implied by funnel containment and the derivative bound:
/// `Y = ‖y_ref‖∞ + 1/inf φ`, `Ẏ = ‖ẏ_ref‖∞ + ε̂`, `H` from the BIBS estimate.
pub fn operating_set(
    plant: &LinearIOPlant,
    reference: &ReferenceSpec,
    norms: &NormBlock,
    margins: &ErrorMargins,
) -> Result<OperatingSet, DesignError> {
    let rb = reference.bounds();
    let output = rb.value + 1.0 / norms.inf_phi;
    let output_rate = rb.velocity + margins.eps_hat;
    let internal = plant::bibs_state_bound(plant.q(), plant.p(), plant.eta0(), output)?;
    Ok(OperatingSet {
        output,
        output_rate,
        internal,
    })
}

/// Worst-case constants and the design block for a linear plant starting on
/// the reference (`e(0) = 0`). With `beta = None` the gain is the minimal
/// admissible one times `beta_margin` and infeasibility is an error; with an
/// explicit gain the block is returned as computed.
pub fn design_for_linear_plant(
    plant: &LinearIOPlant,
    reference: &ReferenceSpec,
    funnel: &FunnelSpec,
    alpha: AlphaSpec,
    lambda: f64,
    beta_margin: f64,
    beta: Option<f64>,
) -> Result<PlantDesign, DesignError> {
    let norms = funnel.norms();
    let margins = error_margins(&norms, alpha, 0.0)?;
    let operating_set = operating_set(plant, reference, &norms, &margins)?;
    let bounds = plant::worst_case_bounds(plant, &operating_set)?;
    let acc = reference.bounds().acceleration;
    let params = match beta {
        Some(beta) => design_with_beta(&norms, &bounds, acc, 0.0, lambda, alpha, beta)?,
        None => derive_design_parameters(&norms, &bounds, acc, 0.0, lambda, alpha, beta_margin)?,
    };
    Ok(PlantDesign {
        norms,
        operating_set,
        bounds,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant_norms(tolerance: f64) -> NormBlock {
        FunnelSpec::constant(tolerance).unwrap().norms()
    }

    #[test]
    fn xi_matches_quadratic_roots() {
        let a = AlphaSpec::Reciprocal;
        // ξ/(1-ξ²) = 1 + r  <=>  (1+r)ξ² + ξ - (1+r) = 0
        let oracle = |r: f64| {
            let c = 1.0 + r;
            (-1.0 + (1.0 + 4.0 * c * c).sqrt()) / (2.0 * c)
        };
        assert!((oracle(0.0) - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        assert!((oracle(1.0) - (17f64.sqrt() - 1.0) / 4.0).abs() < 1e-15);
        for r in [0.0, 1.0] {
            assert!((solve_xi(a, r) - oracle(r)).abs() < 1e-12);
        }
        let xi = solve_xi(a, 0.0);
        assert!((a.value(xi * xi).unwrap() * xi - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_funnel_gamma_bar() {
        let bounds = WorstCaseBounds {
            f_max: 2.0,
            g_max: 1.0,
            g_min: 1.0,
        };
        let p = design_with_beta(
            &constant_norms(0.08),
            &bounds,
            0.986960,
            0.0,
            0.7,
            AlphaSpec::Reciprocal,
            1.0,
        )
        .unwrap();
        let xi = (5f64.sqrt() - 1.0) / 2.0;
        assert!((p.xi - xi).abs() < 1e-12);
        assert_eq!(p.eps1, p.xi);
        assert!((p.gamma_bar - (4.0 + 2.0 / xi)).abs() < 1e-10);
        assert!((p.gamma_bar - 7.2360680).abs() < 1e-7);
    }

    #[test]
    fn conservative_gain_for_benchmark_constants() {
        let bounds = WorstCaseBounds {
            f_max: 2.0,
            g_max: 1.0,
            g_min: 1.0,
        };
        let norms = constant_norms(0.08);
        let p = derive_design_parameters(
            &norms,
            &bounds,
            0.986960,
            0.0,
            0.7,
            AlphaSpec::Reciprocal,
            1.0,
        )
        .unwrap();
        let gamma_bar = 4.0 + 5f64.sqrt() + 1.0;
        let kappa0 = 12.5 * (2.0 + 0.986960) + gamma_bar;
        assert!((p.kappa0 - kappa0).abs() < 1e-9);
        assert!((p.kappa0 - 44.573068).abs() < 1e-6);
        assert!((p.beta - 2.0 * 12.5 * kappa0).abs() < 1e-9);
        assert!((p.beta - 1114.3267).abs() < 1e-3);
        // remaining formulas by hand
        assert!((p.eps_hat - 12.5 * 2.0).abs() < 1e-9);
        assert!((p.e_hat - (12.5 * 25.0 + 1.0)).abs() < 1e-9);
        let f_tilde = 0.5 * (2.0 + 12.5 * p.beta / 0.7);
        assert!((p.f_tilde - f_tilde).abs() < 1e-9);
        assert!((p.kappa1 - (kappa0 + 12.5 * p.beta)).abs() < 1e-9);
        let t1 = (12.5 * p.beta - 2.0 * kappa0) / (156.25 * f_tilde * p.e_hat);
        let t2 = kappa0 / p.kappa1.powi(2);
        let t3 = 0.3 / (12.5 * (f_tilde + 0.7) + kappa0);
        assert_eq!(p.tau_terms.len(), 3);
        for (got, want) in p.tau_terms.iter().zip([t1, t2, t3]) {
            assert!((got / want - 1.0).abs() < 1e-12);
        }
        assert!((p.tau_max / t1.min(t2).min(t3) - 1.0).abs() < 1e-12);
        assert!(p.beta >= 2.0 * norms.m_phi * p.kappa0 / bounds.g_min);
    }

    #[test]
    fn activation_threshold_near_one_forces_tiny_tau() {
        let bounds = WorstCaseBounds {
            f_max: 2.0,
            g_max: 1.0,
            g_min: 1.0,
        };
        let norms = constant_norms(0.5);
        let p = derive_design_parameters(
            &norms,
            &bounds,
            1.0,
            0.0,
            0.999,
            AlphaSpec::Reciprocal,
            1.01,
        )
        .unwrap();
        assert_eq!(p.binding_term(), TauTerm::LinearBranch);
        let q = derive_design_parameters(
            &norms,
            &bounds,
            1.0,
            0.0,
            1.0 - 1e-9,
            AlphaSpec::Reciprocal,
            1.01,
        )
        .unwrap();
        assert!(q.tau_max < 1e-9 * 1e-2 && q.tau_max > 0.0);
        let report = explain_tau(&p);
        assert_eq!(report.binding, TauTerm::LinearBranch);
        assert_eq!(report, explain_tau(&p));
        assert_eq!(report.to_string(), explain_tau(&p).to_string());
    }

    #[test]
    fn explain_tau_lists_three_positive_candidates() {
        let bounds = WorstCaseBounds {
            f_max: 1.0,
            g_max: 2.0,
            g_min: 1.0,
        };
        let p = derive_design_parameters(
            &constant_norms(0.08),
            &bounds,
            0.98696,
            0.0,
            0.7,
            AlphaSpec::Reciprocal,
            1.01,
        )
        .unwrap();
        let report = explain_tau(&p);
        assert_eq!(report.candidates.len(), 3);
        assert!(report.candidates.iter().all(|(_, v)| *v > 0.0));
        let min = report
            .candidates
            .iter()
            .map(|c| c.1)
            .fold(f64::INFINITY, f64::min);
        let binding = report
            .candidates
            .iter()
            .find(|c| c.0 == report.binding)
            .unwrap()
            .1;
        assert_eq!(min, binding);
        assert!(report.to_string().contains("<- binding"));
    }

    #[test]
    fn infeasible_gain_names_term() {
        // unit funnel with beta exactly minimal: first numerator vanishes
        let bounds = WorstCaseBounds {
            f_max: 1.0,
            g_max: 1.0,
            g_min: 1.0,
        };
        let err = derive_design_parameters(
            &constant_norms(1.0),
            &bounds,
            0.0,
            0.0,
            0.5,
            AlphaSpec::Reciprocal,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            DesignError::Infeasible {
                term: TauTerm::NormalizedBranch,
                ..
            }
        ));
        let err = derive_design_parameters(
            &constant_norms(1.0),
            &bounds,
            0.0,
            0.99,
            0.5,
            AlphaSpec::Reciprocal,
            1.01,
        );
        assert!(err.is_ok());
        let err = derive_design_parameters(
            &constant_norms(1.0),
            &bounds,
            0.0,
            1.0,
            0.5,
            AlphaSpec::Reciprocal,
            1.01,
        );
        assert_eq!(err.unwrap_err(), DesignError::InitialCondition(1.0));
        let err = derive_design_parameters(
            &constant_norms(1.0),
            &bounds,
            0.0,
            0.0,
            1.3,
            AlphaSpec::Reciprocal,
            1.01,
        );
        assert!(matches!(
            err,
            Err(DesignError::InvalidInput { name: "lambda", .. })
        ));
    }

    proptest! {
        #[test]
        fn xi_residual_small(r in 0.0..100.0f64) {
            let a = AlphaSpec::Reciprocal;
            let xi = solve_xi(a, r);
            prop_assert!(xi > 0.0 && xi < 1.0);
            prop_assert!((a.value(xi * xi).unwrap() * xi - (1.0 + r)).abs() < 1e-10);
        }

        #[test]
        fn tau_monotone_in_plant_constants(
            f_max in 0.0..5.0f64,
            g_min in 0.2..2.0f64,
            spread in 1.0..3.0f64,
            bump in 0.01..1.0f64,
            tol in 0.05..1.0f64,
        ) {
            let norms = constant_norms(tol);
            let base = WorstCaseBounds { f_max, g_max: g_min * spread, g_min };
            let tau = |b: WorstCaseBounds| {
                derive_design_parameters(&norms, &b, 1.0, 0.0, 0.7, AlphaSpec::Reciprocal, 1.01)
                    .map(|p| p.tau_max)
                    .unwrap_or(0.0)
            };
            let t0 = tau(base);
            let rel = 1e-12 * t0.abs();
            let more_drift = WorstCaseBounds { f_max: f_max + bump, ..base };
            let more_gain = WorstCaseBounds { g_max: base.g_max + bump, ..base };
            prop_assert!(tau(more_drift) <= t0 + rel);
            prop_assert!(tau(more_gain) <= t0 + rel);
            let up = WorstCaseBounds { g_min: (g_min + bump).min(base.g_max), ..base };
            prop_assert!(tau(up) >= t0 - rel);
        }

        #[test]
        fn normalized_numerator_positive_with_margin(
            f_max in 0.0..5.0f64, g_min in 0.2..2.0f64, tol in 0.05..0.99f64, margin in 1.001..2.0f64,
        ) {
            let norms = constant_norms(tol);
            prop_assume!(norms.m_phi * norms.inf_phi > 1.0);
            let bounds = WorstCaseBounds { f_max, g_max: g_min, g_min };
            let beta = margin * minimal_beta(&norms, &bounds, 1.0, 0.0, 0.7, AlphaSpec::Reciprocal).unwrap();
            let p = design_with_beta(&norms, &bounds, 1.0, 0.0, 0.7, AlphaSpec::Reciprocal, beta).unwrap();
            prop_assert!(norms.inf_phi * g_min * p.beta - 2.0 * p.kappa0 > 0.0);
        }

        #[test]
        fn doubling_kappa0_raises_growth_term(f_max in 0.0..5.0f64, beta in 1e3..1e5f64) {
            // with κ₁ dominated by M_φβg_max, κ₀/κ₁² grows with κ₀
            let norms = constant_norms(0.08);
            let bounds = WorstCaseBounds { f_max, g_max: 1.0, g_min: 1.0 };
            let p = design_with_beta(&norms, &bounds, 1.0, 0.0, 0.7, AlphaSpec::Reciprocal, beta).unwrap();
            let doubled = WorstCaseBounds { f_max: f_max + p.kappa0 / norms.m_phi, ..bounds };
            let q = design_with_beta(&norms, &doubled, 1.0, 0.0, 0.7, AlphaSpec::Reciprocal, beta).unwrap();
            prop_assert!((q.kappa0 / p.kappa0 - 2.0).abs() < 1e-12);
            prop_assume!(norms.m_phi * beta > 4.0 * p.kappa0);
            prop_assert!(q.tau_terms[1] > p.tau_terms[1]);
        }
    }
}
