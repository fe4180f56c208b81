//! Browser bindings: every export takes and returns a JSON string so the page
//! needs no generated type glue beyond `wasm-bindgen`'s string passing.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;
use zoh_funnel::benchmark::{Benchmark, InternalStart};
use zoh_funnel::controller::{ControlLawConfig, Variant};
use zoh_funnel::design::{design_for_linear_plant, explain_tau, DesignParameters};
use zoh_funnel::plant::{MassOnCar, WorstCaseBounds};
use zoh_funnel::signals::{AlphaSpec, FunnelSpec, ReferenceSpec};
use zoh_funnel::sim::{Trace, TraceStatus};
use zoh_funnel::verify::surrogate_consistency_study;

/// Mass-on-car setup as edited on the page.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Setup {
    pub m1: f64,
    pub m2: f64,
    pub k: f64,
    pub d: f64,
    pub theta: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub tolerance: f64,
    pub lambda: f64,
    pub beta: f64,
    pub tau: f64,
    pub horizon: f64,
    pub substeps: usize,
    /// `true`: internal dynamics start on the orbit forced by the reference.
    pub periodic_start: bool,
    /// Upper bound on plotted points per curve.
    pub max_points: usize,
}

impl Default for Setup {
    fn default() -> Self {
        let car = MassOnCar::default();
        Setup {
            m1: car.m1,
            m2: car.m2,
            k: car.k,
            d: car.d,
            theta: car.theta,
            amplitude: 0.4,
            omega: std::f64::consts::FRAC_PI_2,
            tolerance: 0.08,
            lambda: 0.7,
            beta: 25.2,
            tau: 1.8e-3,
            horizon: 2.0,
            substeps: 20,
            periodic_start: true,
            max_points: 2000,
        }
    }
}

impl Setup {
    fn car(&self) -> MassOnCar {
        MassOnCar {
            m1: self.m1,
            m2: self.m2,
            k: self.k,
            d: self.d,
            theta: self.theta,
        }
    }

    fn benchmark(&self) -> Result<Benchmark, String> {
        if !(self.horizon >= self.tau && self.horizon <= 60.0) {
            return Err("horizon must lie in [tau, 60]".into());
        }
        if self.horizon / self.tau * self.substeps as f64 > 5e6 {
            return Err(
                "too many integration steps for the browser (reduce horizon or raise tau)".into(),
            );
        }
        let start = if self.periodic_start {
            InternalStart::ReferencePeriodic
        } else {
            InternalStart::Zero
        };
        let mut b =
            Benchmark::new(self.car(), self.beta, self.tau, start).map_err(|e| e.to_string())?;
        b.reference = ReferenceSpec::sinusoid(self.amplitude, self.omega);
        if self.periodic_start {
            let eta0 = b
                .plant
                .reference_periodic_internal(&b.reference)
                .map_err(|e| e.to_string())?;
            b.plant = b
                .plant
                .with_initial_internal(eta0)
                .map_err(|e| e.to_string())?;
        }
        b.funnel = FunnelSpec::constant(self.tolerance).map_err(|e| e.to_string())?;
        b.law = ControlLawConfig::new(self.beta, self.lambda, Variant::DerivativeFree)
            .map_err(|e| e.to_string())?;
        b.sim.horizon = self.horizon;
        b.sim.substeps_per_sample = self.substeps.max(1);
        b.sim.validate().map_err(|e| e.to_string())?;
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub feasible: bool,
    pub violation_time: Option<f64>,
    pub funnel_margin: f64,
    pub input_max: f64,
}

fn curve(trace: &Trace, funnel: &FunnelSpec, max_points: usize) -> Curve {
    let stride = trace.rows.len().div_ceil(max_points.max(2)).max(1);
    let mut picked: Vec<_> = trace.rows.iter().step_by(stride).collect();
    if let Some(last) = trace.rows.last() {
        if picked.last().map(|r| r.t) != Some(last.t) {
            picked.push(last);
        }
    }
    Curve {
        t: picked.iter().map(|r| r.t).collect(),
        y: picked.iter().map(|r| r.y[0]).collect(),
        u: picked.iter().map(|r| r.u[0]).collect(),
        feasible: trace.is_feasible(),
        violation_time: match trace.status {
            TraceStatus::FunnelViolation { time } => Some(time),
            TraceStatus::Complete => None,
        },
        funnel_margin: trace.funnel_margin(funnel),
        input_max: trace.input_max(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub reference_t: Vec<f64>,
    pub reference: Vec<f64>,
    pub tolerance: f64,
    pub input_bound: f64,
    pub free: Curve,
    pub deriv: Curve,
    pub input_gap: f64,
    pub output_gap: f64,
}

/// Both laws on the same setup, thinned to at most `max_points` per curve.
pub fn compare(setup: &Setup) -> Result<Comparison, String> {
    let b = setup.benchmark()?;
    let c = b.compare().map_err(|e| e.to_string())?;
    let n = setup.max_points.max(2);
    let reference_t: Vec<f64> = (0..=n)
        .map(|i| setup.horizon * i as f64 / n as f64)
        .collect();
    let reference = reference_t
        .iter()
        .map(|&t| b.reference.eval(t).value[0])
        .collect();
    Ok(Comparison {
        reference_t,
        reference,
        tolerance: setup.tolerance,
        input_bound: setup.beta / setup.lambda,
        free: curve(&c.free, &b.funnel, setup.max_points),
        deriv: curve(&c.deriv, &b.funnel, setup.max_points),
        input_gap: c.input_gap,
        output_gap: c.output_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSummary {
    pub bounds: WorstCaseBounds,
    pub params: DesignParameters,
    pub binding: String,
    pub report: String,
    /// Whether the chosen `τ` is covered by the guarantee for the chosen `β`.
    pub certified: bool,
    /// Gain and sampling bound when `β` is left to the design (`None` if the
    /// worst-case design is infeasible).
    pub designed: Option<DesignParameters>,
}

/// Worst-case constants of the setup, for the chosen `β` and for the designed one.
pub fn design(setup: &Setup) -> Result<DesignSummary, String> {
    let b = setup.benchmark()?;
    let run = |beta| {
        design_for_linear_plant(
            &b.plant,
            &b.reference,
            &b.funnel,
            AlphaSpec::Reciprocal,
            setup.lambda,
            1.01,
            beta,
        )
    };
    let chosen = run(Some(setup.beta)).map_err(|e| e.to_string())?;
    let p = chosen.params;
    Ok(DesignSummary {
        bounds: chosen.bounds,
        binding: p.binding_term().name().to_string(),
        report: explain_tau(&p).to_string(),
        certified: p.tau_max > 0.0 && setup.tau <= p.tau_max,
        params: p,
        designed: run(None).ok().map(|d| d.params),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapStudy {
    pub tau: Vec<f64>,
    pub gap: Vec<f64>,
    pub slope: f64,
}

/// `max_k ‖E(t_k) - e₂(t_k)‖` for `points` sampling periods log-spaced in
/// `[tau_min, tau_max]`.
pub fn gap_study(
    setup: &Setup,
    tau_min: f64,
    tau_max: f64,
    points: usize,
) -> Result<GapStudy, String> {
    if !(tau_min > 0.0 && tau_max > tau_min) || points < 3 {
        return Err("need 0 < tau_min < tau_max and at least 3 points".into());
    }
    let b = setup.benchmark()?;
    let taus: Vec<f64> = (0..points)
        .map(|i| tau_min * (tau_max / tau_min).powf(i as f64 / (points - 1) as f64))
        .collect();
    if setup.horizon / tau_min * setup.substeps as f64 > 5e6 {
        return Err("too many integration steps for the browser (raise tau_min)".into());
    }
    let study =
        surrogate_consistency_study(&b.plant, &b.reference, &b.funnel, &b.law, &b.sim, &taus)
            .map_err(|e| e.to_string())?;
    Ok(GapStudy {
        tau: study.rows.iter().map(|r| r.0).collect(),
        gap: study.rows.iter().map(|r| r.1).collect(),
        slope: study.slope,
    })
}

fn parse(json: &str) -> Result<Setup, JsError> {
    serde_json::from_str(json).map_err(|e| JsError::new(&format!("setup: {e}")))
}

fn emit<T: Serialize>(value: Result<T, String>) -> Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = defaultSetup)]
pub fn default_setup() -> String {
    serde_json::to_string(&Setup::default()).expect("plain struct")
}

#[wasm_bindgen(js_name = compareVariants)]
pub fn compare_variants_js(setup: &str) -> Result<String, JsError> {
    emit(compare(&parse(setup)?))
}

#[wasm_bindgen(js_name = designConstants)]
pub fn design_constants_js(setup: &str) -> Result<String, JsError> {
    emit(design(&parse(setup)?))
}

#[wasm_bindgen(js_name = surrogateGapStudy)]
pub fn surrogate_gap_study_js(
    setup: &str,
    tau_min: f64,
    tau_max: f64,
    points: usize,
) -> Result<String, JsError> {
    emit(gap_study(&parse(setup)?, tau_min, tau_max, points))
}
