#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zoh_funnel::controller::{zoh_law, ControlLawConfig, Variant};
use zoh_funnel::design::{design_for_linear_plant, PlantDesign};
use zoh_funnel::plant::LinearIOPlant;
use zoh_funnel::signals::{AlphaSpec, FunnelSpec, ReferenceSpec, Sinusoid};
use zoh_funnel::sim::{integrate_hold, simulate, PlantState, SimConfig, Trace};
use zoh_funnel::verify::{check_trace, VerificationReport, VerifyContext};

/// Hold intervals simulated per random plant at most.
pub const SUITE_SAMPLES: f64 = 10_000.0;
pub const SUITE_HORIZON: f64 = 2.0;
pub const SUITE_LAMBDA: f64 = 0.5;
pub const SUITE_BETA_MARGIN: f64 = 1.01;

pub struct Scenario {
    pub plant: LinearIOPlant,
    pub reference: ReferenceSpec,
    pub funnel: FunnelSpec,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// Random Hurwitz linear plant with a sinusoidal reference and a constant
/// or exponentially narrowing funnel.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=2usize);
    let l = rng.random_range(0..=3usize);
    let r0 = uniform(&mut rng, m, m, 0.3);
    let r1 = uniform(&mut rng, m, m, 0.3);
    let s = uniform(&mut rng, m, l, 0.3);
    let p = uniform(&mut rng, l, m, 0.5);
    let mut q = uniform(&mut rng, l, l, 0.3);
    for j in 0..l {
        q[(j, j)] -= rng.random_range(1.0..3.0);
    }
    let mut g = uniform(&mut rng, m, m, 0.1);
    for j in 0..m {
        g[(j, j)] += rng.random_range(0.5..2.0);
    }
    let g = (&g + g.transpose()) * 0.5;
    let eta0 = DVector::from_fn(l, |_, _| rng.random_range(-0.5..0.5));
    let plant =
        LinearIOPlant::new(r0, r1, s, g, q, p, eta0).expect("diagonally dominant Q is Hurwitz");
    let channels = (0..m)
        .map(|_| {
            vec![Sinusoid::new(
                rng.random_range(0.2..1.0),
                rng.random_range(1.0..4.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )]
        })
        .collect();
    let reference = ReferenceSpec::SinusoidSum { channels };
    let funnel = if rng.random_bool(0.5) {
        FunnelSpec::constant(rng.random_range(0.1..0.5)).unwrap()
    } else {
        let c = rng.random_range(0.1..0.3);
        FunnelSpec::exponential(rng.random_range(0.1..0.5), rng.random_range(0.5..2.0), c).unwrap()
    };
    Scenario {
        plant,
        reference,
        funnel,
    }
}

pub struct SuiteRun {
    pub design: PlantDesign,
    pub trace: Trace,
    pub report: VerificationReport,
}

/// Designs with worst-case constants and simulates at `τ = τ_max`.
pub fn guarantee_run(seed: u64) -> SuiteRun {
    let sc = random_scenario(seed);
    let alpha = AlphaSpec::Reciprocal;
    let design = design_for_linear_plant(
        &sc.plant,
        &sc.reference,
        &sc.funnel,
        alpha,
        SUITE_LAMBDA,
        SUITE_BETA_MARGIN,
        None,
    )
    .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    let tau = design.params.tau_max;
    let law =
        ControlLawConfig::new(design.params.beta, SUITE_LAMBDA, Variant::DerivativeFree).unwrap();
    let horizon = (SUITE_SAMPLES * tau).min(SUITE_HORIZON);
    let cfg = SimConfig::new(tau, horizon).with_substeps(4);
    let trace = simulate(&sc.plant, &sc.reference, &sc.funnel, &law, &cfg).unwrap();
    let ctx = VerifyContext {
        funnel: sc.funnel,
        reference: sc.reference.clone(),
        alpha,
        params: design.params,
        tau,
    };
    let report = check_trace(&trace, &ctx);
    SuiteRun {
        design,
        trace,
        report,
    }
}

/// `ÿ = -y`, `y(0) = 1`, `ẏ(0) = 0` integrated over `[0, 2]`; error against
/// `cos t` for each substep count.
pub fn oscillator_errors(substeps: &[usize]) -> Vec<f64> {
    let plant = LinearIOPlant::new(
        DMatrix::from_element(1, 1, -1.0),
        DMatrix::zeros(1, 1),
        DMatrix::zeros(1, 0),
        DMatrix::identity(1, 1),
        DMatrix::zeros(0, 0),
        DMatrix::zeros(0, 1),
        DVector::zeros(0),
    )
    .unwrap();
    let start = PlantState {
        y: DVector::from_element(1, 1.0),
        ydot: DVector::zeros(1),
        eta: DVector::zeros(0),
    };
    let horizon = 2.0;
    substeps
        .iter()
        .map(|&n| {
            let path = integrate_hold(&plant, &start, &DVector::zeros(1), 0.0, horizon, n).unwrap();
            let end = &path.last().unwrap().1;
            ((end.y[0] - horizon.cos()).powi(2) + (end.ydot[0] + horizon.sin()).powi(2)).sqrt()
        })
        .collect()
}

pub struct FuzzOutcome {
    pub draws: usize,
    /// `max (‖u‖ - β/λ)`
    pub worst_excess: f64,
    pub non_finite: usize,
}

/// Random `(β, λ, E)`, with a share of draws placed on the switching surface.
pub fn fuzz_input_bound(draws: usize, seed: u64) -> FuzzOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut non_finite = 0;
    for i in 0..draws {
        let beta = rng.random_range(0.0..40.0);
        let lambda = rng.random_range(0.05..0.95);
        let cfg = ControlLawConfig::new(beta, lambda, Variant::DerivativeFree).unwrap();
        let m = rng.random_range(1..=4usize);
        let scale = 10f64.powf(rng.random_range(-6.0..6.0));
        let mut signal = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0) * scale);
        if i % 4 == 0 && signal.norm() > 0.0 {
            signal *= lambda / signal.norm();
        }
        let u = zoh_law(&signal, &cfg);
        let norm = u.norm();
        if !norm.is_finite() {
            non_finite += 1;
            continue;
        }
        worst = worst.max(norm - beta / lambda);
    }
    FuzzOutcome {
        draws,
        worst_excess: worst,
        non_finite,
    }
}
