//! Experiment configuration files (TOML).
//!
//! ```toml
//! [plant]
//! benchmark = "mass_on_car"        # or explicit r0, r1, s, gamma, q, p
//! initial_internal = "reference_periodic"
//!
//! [reference]
//! kind = "sinusoid_sum"
//! channels = [[{ amplitude = 0.4, angular_frequency = 1.5707963267948966 }]]
//!
//! [funnel]
//! kind = "constant"
//! tolerance = 0.08
//!
//! [controller]
//! lambda = 0.7
//! beta = 25.2                       # optional, designed when absent
//! tau = 1.8e-3                      # optional, tau_max when absent
//!
//! [sim]
//! horizon = 2.0
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use zoh_funnel::controller::Variant;
use zoh_funnel::plant::{LinearIOPlant, MassOnCar, PlantError};
use zoh_funnel::signals::{AlphaSpec, FunnelFamily, FunnelSpec, ReferenceSpec, SignalError};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    plant: RawPlant,
    reference: ReferenceSpec,
    funnel: FunnelFamily,
    controller: RawController,
    #[serde(default)]
    design: DesignSection,
    sim: RawSim,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawInternal {
    Named(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    benchmark: Option<String>,
    m1: Option<f64>,
    m2: Option<f64>,
    k: Option<f64>,
    d: Option<f64>,
    theta: Option<f64>,
    r0: Option<Vec<Vec<f64>>>,
    r1: Option<Vec<Vec<f64>>>,
    s: Option<Vec<Vec<f64>>>,
    gamma: Option<Vec<Vec<f64>>>,
    q: Option<Vec<Vec<f64>>>,
    p: Option<Vec<Vec<f64>>>,
    initial_internal: Option<RawInternal>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    #[default]
    Free,
    Deriv,
}

impl From<VariantName> for Variant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Free => Variant::DerivativeFree,
            VariantName::Deriv => Variant::DerivativeBased,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    lambda: f64,
    #[serde(default)]
    variant: VariantName,
    beta: Option<f64>,
    tau: Option<f64>,
    #[serde(default)]
    alpha: AlphaSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    #[serde(default = "default_beta_margin")]
    pub beta_margin: f64,
    pub f_max: Option<f64>,
    pub g_max: Option<f64>,
    pub g_min: Option<f64>,
}

fn default_beta_margin() -> f64 {
    1.01
}

impl Default for DesignSection {
    fn default() -> Self {
        DesignSection {
            beta_margin: default_beta_margin(),
            f_max: None,
            g_max: None,
            g_min: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    horizon: f64,
    #[serde(default = "default_substeps")]
    substeps: usize,
    #[serde(default = "default_stride")]
    record_stride: usize,
}

fn default_substeps() -> usize {
    20
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub trace: Option<PathBuf>,
    pub certificate: Option<PathBuf>,
    pub compare: Option<PathBuf>,
    pub sweep: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSection {
    pub horizon: f64,
    pub substeps: usize,
    pub record_stride: usize,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub plant: LinearIOPlant,
    pub reference: ReferenceSpec,
    pub funnel: FunnelSpec,
    pub alpha: AlphaSpec,
    pub lambda: f64,
    pub variant: Variant,
    pub beta: Option<f64>,
    pub tau: Option<f64>,
    pub design: DesignSection,
    pub sim: SimSection,
    pub output: OutputSection,
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(toml_error)?;
        resolve(raw)
    }
}

/// Turns a deserialization error into a config error naming the key path.
fn toml_error(err: toml::de::Error) -> CliError {
    let message = err.message().to_string();
    let key = match err.span() {
        Some(_) => message
            .split('`')
            .nth(1)
            .filter(|_| {
                message.starts_with("unknown field") || message.starts_with("missing field")
            })
            .unwrap_or("<document>")
            .to_string(),
        None => "<document>".to_string(),
    };
    CliError::config(key, err.to_string().trim().replace('\n', " "))
}

fn positive(key: &str, value: f64) -> Result<f64, CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::config(key, format!("must be > 0, got {value}")))
    }
}

fn matrix(
    key: &str,
    rows: &[Vec<f64>],
    cols_hint: Option<usize>,
) -> Result<DMatrix<f64>, CliError> {
    let ncols = rows.first().map_or(cols_hint.unwrap_or(0), Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::config(key, "rows have different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::config(key, "entries must be finite"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

fn plant_error(err: PlantError) -> CliError {
    match err {
        PlantError::Shape { name, .. } => {
            CliError::config(format!("plant.{name}"), err.to_string())
        }
        PlantError::NotHurwitz => CliError::config("plant.q", err.to_string()),
        PlantError::GainNotPositive(_) => CliError::config("plant.gamma", err.to_string()),
        PlantError::InvalidParameter { name, .. } => {
            CliError::config(format!("plant.{name}"), err.to_string())
        }
        PlantError::Lyapunov => CliError::config("plant.q", err.to_string()),
    }
}

fn build_plant(raw: &RawPlant) -> Result<LinearIOPlant, CliError> {
    let matrices = [
        ("r0", &raw.r0),
        ("r1", &raw.r1),
        ("s", &raw.s),
        ("gamma", &raw.gamma),
        ("q", &raw.q),
        ("p", &raw.p),
    ];
    match raw.benchmark.as_deref() {
        Some("mass_on_car") => {
            if let Some((name, _)) = matrices.iter().find(|(_, m)| m.is_some()) {
                return Err(CliError::config(
                    format!("plant.{name}"),
                    "explicit matrices cannot be combined with a benchmark plant",
                ));
            }
            let default = MassOnCar::default();
            let car = MassOnCar {
                m1: raw.m1.unwrap_or(default.m1),
                m2: raw.m2.unwrap_or(default.m2),
                k: raw.k.unwrap_or(default.k),
                d: raw.d.unwrap_or(default.d),
                theta: raw.theta.unwrap_or(default.theta),
            };
            car.io_plant().map_err(plant_error)
        }
        Some(other) => Err(CliError::config(
            "plant.benchmark",
            format!("unknown benchmark `{other}` (expected `mass_on_car`)"),
        )),
        None => {
            for (name, value) in [
                ("m1", raw.m1),
                ("m2", raw.m2),
                ("k", raw.k),
                ("d", raw.d),
                ("theta", raw.theta),
            ] {
                if value.is_some() {
                    return Err(CliError::config(
                        format!("plant.{name}"),
                        "physical parameters require `benchmark = \"mass_on_car\"`",
                    ));
                }
            }
            let gamma = raw.gamma.as_ref().ok_or_else(|| {
                CliError::config("plant.gamma", "required for an explicit linear plant")
            })?;
            let gamma = matrix("plant.gamma", gamma, None)?;
            let m = gamma.nrows();
            let q = match &raw.q {
                Some(q) => matrix("plant.q", q, Some(0))?,
                None => DMatrix::zeros(0, 0),
            };
            let l = q.nrows();
            let get =
                |key: &str, value: &Option<Vec<Vec<f64>>>, rows: usize, cols: usize| match value {
                    Some(v) => matrix(key, v, Some(cols)),
                    None => Ok(DMatrix::zeros(rows, cols)),
                };
            let r0 = get("plant.r0", &raw.r0, m, m)?;
            let r1 = get("plant.r1", &raw.r1, m, m)?;
            let s = get("plant.s", &raw.s, m, l)?;
            let p = get("plant.p", &raw.p, l, m)?;
            LinearIOPlant::new(r0, r1, s, gamma, q, p, DVector::zeros(l)).map_err(plant_error)
        }
    }
}

fn signal_error(section: &str, err: SignalError) -> CliError {
    match err {
        SignalError::InvalidFunnel { name, .. } => {
            CliError::config(format!("{section}.{name}"), err.to_string())
        }
        _ => CliError::config(section, err.to_string()),
    }
}

fn resolve(raw: RawConfig) -> Result<Experiment, CliError> {
    let plant = build_plant(&raw.plant)?;

    raw.reference
        .validate()
        .map_err(|e| signal_error("reference", e))?;
    let m = plant.gamma().nrows();
    if raw.reference.output_dim() != m {
        return Err(CliError::config(
            "reference",
            format!(
                "has {} channels but the plant has {m} outputs",
                raw.reference.output_dim()
            ),
        ));
    }

    let plant = match raw.plant.initial_internal.clone() {
        None => plant,
        Some(RawInternal::Named(name)) => match name.as_str() {
            "reference_periodic" => {
                let eta0 = plant
                    .reference_periodic_internal(&raw.reference)
                    .map_err(plant_error)?;
                plant.with_initial_internal(eta0).map_err(plant_error)?
            }
            "zero" => plant,
            other => {
                return Err(CliError::config(
                    "plant.initial_internal",
                    format!(
                        "unknown start `{other}` (expected `zero`, `reference_periodic` or a list)"
                    ),
                ))
            }
        },
        Some(RawInternal::Values(v)) => plant
            .with_initial_internal(DVector::from_vec(v))
            .map_err(|e| CliError::config("plant.initial_internal", e.to_string()))?,
    };

    let funnel = FunnelSpec::new(raw.funnel).map_err(|e| signal_error("funnel", e))?;

    let c = &raw.controller;
    if !(c.lambda > 0.0 && c.lambda < 1.0) {
        return Err(CliError::config(
            "controller.lambda",
            format!("must lie in (0, 1), got {}", c.lambda),
        ));
    }
    if let Some(beta) = c.beta {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(CliError::config(
                "controller.beta",
                format!("must be >= 0, got {beta}"),
            ));
        }
    }
    if let Some(tau) = c.tau {
        positive("controller.tau", tau)?;
    }

    let d = raw.design;
    if !(d.beta_margin >= 1.0 && d.beta_margin.is_finite()) {
        return Err(CliError::config(
            "design.beta_margin",
            format!("must be >= 1, got {}", d.beta_margin),
        ));
    }
    if let Some(f) = d.f_max {
        if !(f >= 0.0 && f.is_finite()) {
            return Err(CliError::config(
                "design.f_max",
                format!("must be >= 0, got {f}"),
            ));
        }
    }
    if let Some(g) = d.g_max {
        positive("design.g_max", g)?;
    }
    if let Some(g) = d.g_min {
        positive("design.g_min", g)?;
    }

    let s = &raw.sim;
    positive("sim.horizon", s.horizon)?;
    if s.substeps == 0 {
        return Err(CliError::config("sim.substeps", "must be >= 1"));
    }
    if s.record_stride == 0 {
        return Err(CliError::config("sim.record_stride", "must be >= 1"));
    }
    if let Some(tau) = c.tau {
        if s.horizon < tau {
            return Err(CliError::config(
                "sim.horizon",
                format!("must be >= controller.tau = {tau}, got {}", s.horizon),
            ));
        }
    }

    Ok(Experiment {
        plant,
        reference: raw.reference,
        funnel,
        alpha: c.alpha,
        lambda: c.lambda,
        variant: c.variant.into(),
        beta: c.beta,
        tau: c.tau,
        design: d,
        sim: SimSection {
            horizon: s.horizon,
            substeps: s.substeps,
            record_stride: s.record_stride,
        },
        output: raw.output,
    })
}
