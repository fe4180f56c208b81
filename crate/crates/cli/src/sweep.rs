//! Parameter sweeps over `τ`, `β` and `λ`.

use rayon::prelude::*;
use zoh_funnel::controller::{ControlLawConfig, Variant};
use zoh_funnel::sim::{simulate, SimConfig, SimError, TraceStatus};

use crate::certificate::parameters;
use crate::config::Experiment;
use crate::error::CliError;
use crate::trace_csv::float;

/// Environment variable holding the worker count; unset or `0` uses all cores.
pub const WORKERS_ENV: &str = "ZOH_FUNNEL_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Tau,
    Beta,
    Lambda,
}

impl Axis {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "tau" => Some(Axis::Tau),
            "beta" => Some(Axis::Beta),
            "lambda" => Some(Axis::Lambda),
            _ => None,
        }
    }
}

/// Cartesian grid; the first axis varies slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub axes: Vec<(Axis, Vec<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GridPoint {
    pub tau: Option<f64>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
}

impl Grid {
    /// Parses `tau=1e-3,0.07;beta=5;lambda=0.5,0.7`.
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let mut axes: Vec<(Axis, Vec<f64>)> = Vec::new();
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, values) = part.split_once('=').ok_or_else(|| {
                CliError::config("--grid", format!("`{part}` is not of the form key=v1,v2"))
            })?;
            let name = name.trim();
            let axis = Axis::parse(name).ok_or_else(|| {
                CliError::config(
                    "--grid",
                    format!("unknown axis `{name}` (expected tau, beta, lambda)"),
                )
            })?;
            if axes.iter().any(|(a, _)| *a == axis) {
                return Err(CliError::config(
                    "--grid",
                    format!("axis `{name}` given twice"),
                ));
            }
            let values = values
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|e| {
                        CliError::config("--grid", format!("{name} value `{}`: {e}", v.trim()))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            axes.push((axis, values));
        }
        if axes.is_empty() {
            return Err(CliError::config("--grid", "grid is empty"));
        }
        Ok(Grid { axes })
    }

    pub fn points(&self) -> Vec<GridPoint> {
        let mut points = vec![GridPoint::default()];
        for (axis, values) in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p;
                        match axis {
                            Axis::Tau => q.tau = Some(v),
                            Axis::Beta => q.beta = Some(v),
                            Axis::Lambda => q.lambda = Some(v),
                        }
                        q
                    })
                })
                .collect();
        }
        points
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub tau: f64,
    pub beta: f64,
    pub lambda: f64,
    pub tau_max: f64,
    pub certified: bool,
    pub feasible: bool,
    pub funnel_margin: f64,
    pub input_max: f64,
    pub violation_time: Option<f64>,
    pub error: Option<String>,
}

pub const SWEEP_HEADER: [&str; 11] = [
    "index",
    "tau",
    "beta",
    "lambda",
    "tau_max",
    "certified",
    "feasible",
    "funnel_margin",
    "input_max",
    "violation_time",
    "error",
];

impl SweepRow {
    pub fn record(&self) -> Vec<String> {
        let opt = |x: f64| if x.is_nan() { String::new() } else { float(x) };
        vec![
            self.index.to_string(),
            opt(self.tau),
            opt(self.beta),
            opt(self.lambda),
            opt(self.tau_max),
            self.certified.to_string(),
            self.feasible.to_string(),
            opt(self.funnel_margin),
            opt(self.input_max),
            self.violation_time.map(float).unwrap_or_default(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

fn run_point(x: &Experiment, variant: Variant, index: usize, p: GridPoint) -> SweepRow {
    let lambda = p.lambda.unwrap_or(x.lambda);
    let mut row = SweepRow {
        index,
        tau: p.tau.or(x.tau).unwrap_or(f64::NAN),
        beta: p.beta.or(x.beta).unwrap_or(f64::NAN),
        lambda,
        tau_max: f64::NAN,
        certified: false,
        feasible: false,
        funnel_margin: f64::NAN,
        input_max: f64::NAN,
        violation_time: None,
        error: None,
    };
    let cert = match parameters(x, p.beta.or(x.beta), lambda) {
        Ok(c) => c,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.beta = cert.params.beta;
    row.tau_max = cert.params.tau_max;
    if row.tau.is_nan() {
        row.tau = row.tau_max;
    }
    row.certified = row.tau > 0.0 && row.tau <= row.tau_max;
    let law = match ControlLawConfig::new(row.beta, lambda, variant) {
        Ok(l) => ControlLawConfig {
            alpha: x.alpha,
            ..l
        },
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let cfg = SimConfig {
        record_stride: x.sim.record_stride,
        ..SimConfig::new(row.tau, x.sim.horizon).with_substeps(x.sim.substeps)
    };
    match simulate(&x.plant, &x.reference, &x.funnel, &law, &cfg) {
        Ok(trace) => {
            row.feasible = trace.is_feasible();
            row.funnel_margin = trace.funnel_margin(&x.funnel);
            row.input_max = trace.input_max();
            if let TraceStatus::FunnelViolation { time } = trace.status {
                row.violation_time = Some(time);
            }
        }
        Err(e @ SimError::Blowup { .. }) => row.error = Some(format!("blowup: {e}")),
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn worker_count() -> Result<usize, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|e| CliError::config(WORKERS_ENV, format!("`{v}`: {e}"))),
        Err(_) => Ok(0),
    }
}

/// Runs every grid point; rows come back in grid order.
pub fn run_sweep(x: &Experiment, variant: Variant, grid: &Grid) -> Result<Vec<SweepRow>, CliError> {
    let points = grid.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| CliError::config(WORKERS_ENV, e.to_string()))?;
    Ok(pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, &p)| run_point(x, variant, i, p))
            .collect()
    }))
}
