//! Design certificates: the constants of a design plus everything needed to
//! audit a trace against them.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use zoh_funnel::design::{
    self, derive_design_parameters, design_with_beta, error_margins, explain_tau, DesignError,
    DesignParameters,
};
use zoh_funnel::plant::{worst_case_bounds, OperatingSet, WorstCaseBounds};
use zoh_funnel::signals::{AlphaSpec, FunnelSpec, NormBlock, ReferenceSpec};
use zoh_funnel::verify::VerifyContext;

use crate::config::Experiment;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Sampling period actually used.
    pub tau: f64,
    /// `0 < τ ≤ τ_max`, i.e. the closed loop is covered by the guarantee.
    pub certified: bool,
    pub binding_term: String,
    pub alpha: AlphaSpec,
    pub funnel: FunnelSpec,
    pub reference: ReferenceSpec,
    pub norms: NormBlock,
    pub operating_set: OperatingSet,
    pub bounds: WorstCaseBounds,
    pub params: DesignParameters,
}

fn design_error(err: DesignError) -> CliError {
    match err {
        DesignError::InvalidInput { name, .. } => {
            let key = match name {
                "lambda" => "controller.lambda",
                "beta" => "controller.beta",
                "beta_margin" => "design.beta_margin",
                "f_max" => "design.f_max",
                "g_max" => "design.g_max",
                "g_min" => "design.g_min",
                _ => "design",
            };
            CliError::config(key, err.to_string())
        }
        DesignError::Infeasible { .. } | DesignError::InitialCondition(_) => {
            CliError::Infeasible(err.to_string())
        }
        DesignError::Signal(_) | DesignError::Plant(_) => {
            CliError::config("plant", err.to_string())
        }
    }
}

/// Worst-case constants with the config overrides applied.
fn bounds_for(
    x: &Experiment,
    norms: &NormBlock,
) -> Result<(OperatingSet, WorstCaseBounds), CliError> {
    let margins = error_margins(norms, x.alpha, 0.0).map_err(design_error)?;
    let set =
        design::operating_set(&x.plant, &x.reference, norms, &margins).map_err(design_error)?;
    let mut bounds =
        worst_case_bounds(&x.plant, &set).map_err(|e| CliError::config("plant", e.to_string()))?;
    if let Some(f) = x.design.f_max {
        bounds.f_max = f;
    }
    if let Some(g) = x.design.g_max {
        bounds.g_max = g;
    }
    if let Some(g) = x.design.g_min {
        bounds.g_min = g;
    }
    if bounds.g_max < bounds.g_min {
        return Err(CliError::config(
            "design.g_max",
            format!("g_max = {} is below g_min = {}", bounds.g_max, bounds.g_min),
        ));
    }
    Ok((set, bounds))
}

/// Design constants for gain `beta` (or the designed gain when `None`) and
/// threshold `lambda`.
pub fn parameters(x: &Experiment, beta: Option<f64>, lambda: f64) -> Result<Certificate, CliError> {
    let norms = x.funnel.norms();
    let (operating_set, bounds) = bounds_for(x, &norms)?;
    let acc = x.reference.bounds().acceleration;
    let params = match beta {
        Some(beta) => design_with_beta(&norms, &bounds, acc, 0.0, lambda, x.alpha, beta),
        None => derive_design_parameters(
            &norms,
            &bounds,
            acc,
            0.0,
            lambda,
            x.alpha,
            x.design.beta_margin,
        ),
    }
    .map_err(design_error)?;
    Ok(Certificate {
        tau: params.tau_max,
        certified: params.tau_max > 0.0,
        binding_term: params.binding_term().name().to_string(),
        alpha: x.alpha,
        funnel: x.funnel,
        reference: x.reference.clone(),
        norms,
        operating_set,
        bounds,
        params,
    })
}

/// Resolves `β` and `τ` for an experiment. Without `allow_unsafe`, the run
/// must be covered by the guarantee: a positive `τ_max` and `τ ≤ τ_max`.
pub fn certify(x: &Experiment, allow_unsafe: bool) -> Result<Certificate, CliError> {
    let mut cert = parameters(x, x.beta, x.lambda)?;
    let tau_max = cert.params.tau_max;
    if !(tau_max > 0.0) && !allow_unsafe {
        return Err(CliError::Infeasible(format!(
            "no admissible sampling time: {} term is {:e} (pass --unsafe to run anyway)",
            cert.binding_term, tau_max
        )));
    }
    match x.tau {
        Some(tau) => {
            if tau > tau_max && !allow_unsafe {
                return Err(CliError::config(
                    "controller.tau",
                    format!("{tau:e} exceeds tau_max = {tau_max:e} (pass --unsafe to run anyway)"),
                ));
            }
            cert.tau = tau;
            cert.certified = tau_max > 0.0 && tau <= tau_max;
        }
        None => {
            if !(tau_max > 0.0) {
                return Err(CliError::config(
                    "controller.tau",
                    "required when the design has no admissible sampling time",
                ));
            }
        }
    }
    Ok(cert)
}

impl Certificate {
    pub fn verify_context(&self) -> VerifyContext {
        VerifyContext {
            funnel: self.funnel,
            reference: self.reference.clone(),
            alpha: self.alpha,
            params: self.params,
            tau: self.tau,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("certificate fields are TOML-representable")
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text)
            .map_err(|e| CliError::config("certificate", e.to_string().trim().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_toml()).map_err(|e| CliError::io(path, e))
    }

    /// Human-readable summary with the sampling-bound trail.
    pub fn render(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "funnel        M_phi = {:.6}  |dphi/phi| = {:.6}",
            self.norms.m_phi, self.norms.ratio
        );
        let _ = writeln!(
            out,
            "bounds        f_max = {:.6e}  g_max = {:.6e}  g_min = {:.6e}",
            self.bounds.f_max, self.bounds.g_max, self.bounds.g_min
        );
        let _ = writeln!(out, "xi            {:.12}", p.xi);
        let _ = writeln!(out, "eps1          {:.12}", p.eps1);
        let _ = writeln!(out, "gamma_bar     {:.12e}", p.gamma_bar);
        let _ = writeln!(out, "kappa0        {:.12e}", p.kappa0);
        let _ = writeln!(out, "kappa1        {:.12e}", p.kappa1);
        let _ = writeln!(out, "eps_hat       {:.12e}", p.eps_hat);
        let _ = writeln!(out, "E_hat         {:.12e}", p.e_hat);
        let _ = writeln!(out, "F_tilde       {:.12e}", p.f_tilde);
        let _ = writeln!(out, "beta          {:.12e}", p.beta);
        let _ = writeln!(out, "lambda        {}", p.lambda);
        let _ = writeln!(out, "input bound   {:.12e}", p.input_bound());
        let _ = writeln!(out, "sampling bound:");
        let _ = writeln!(out, "{}", explain_tau(p));
        let _ = write!(
            out,
            "tau           {:.12e} ({})",
            self.tau,
            if self.certified {
                "certified"
            } else {
                "NOT certified"
            }
        );
        out
    }
}
