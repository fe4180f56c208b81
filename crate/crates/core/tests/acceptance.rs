//! One line per acceptance criterion; exits non-zero if any fails.

mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use zoh_funnel::benchmark::{self, Benchmark};
use zoh_funnel::controller::Variant;
use zoh_funnel::design::DesignParameters;
use zoh_funnel::design::{design_for_linear_plant, design_with_beta};
use zoh_funnel::plant::WorstCaseBounds;
use zoh_funnel::signals::{AlphaSpec, FunnelSpec};
use zoh_funnel::sim::Trace;
use zoh_funnel::verify::{
    check_trace, surrogate_consistency_study, Check, VerificationReport, VerifyContext,
};

const FINE_RUNTIME: Duration = Duration::from_secs(5);
const COARSE_GAP_FACTOR: f64 = 10.0;
const HALVING_RATIO: (f64, f64) = (1.6, 2.4);
const CLOSED_FORM_TOL: f64 = 1e-10;
const SUITE_RUNS: u64 = 50;
const SUITE_RUNTIME: Duration = Duration::from_secs(60);
const E2_SLACK: f64 = 1e-9;
const SLOPE: (f64, f64) = (0.85, 1.15);
const SURROGATE_TAUS: [f64; 3] = [1e-2, 1e-3, 1e-4];
const RK4_RATIO: (f64, f64) = (12.8, 19.2);
const FUZZ_DRAWS: usize = 1_000_000;
const FUZZ_TOL: f64 = 1e-12;

type Outcome = Result<String, String>;

struct Audit {
    name: String,
    report: VerificationReport,
    params: DesignParameters,
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fine_reproduction() -> Outcome {
    let bench = Benchmark::fine();
    let start = Instant::now();
    let trace = bench
        .simulate(Variant::DerivativeFree)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let margin = trace.funnel_margin(&bench.funnel);
    let bound = bench.law.beta / bench.law.lambda;
    let u = trace.input_max();
    verdict(
        trace.is_feasible() && margin < 1.0 && u <= bound && elapsed < FINE_RUNTIME,
        format!("max φ|e| = {margin:.4}, max |u| = {u:.3} <= {bound:.1}, {elapsed:.2?}"),
    )
}

fn coarse_reproduction() -> Outcome {
    let fine = Benchmark::fine().compare().map_err(|e| e.to_string())?;
    let bench = Benchmark::coarse();
    let coarse = bench.compare().map_err(|e| e.to_string())?;
    let feasible = coarse.free.is_feasible() && coarse.deriv.is_feasible();
    let ratio = coarse.input_gap / fine.input_gap;
    verdict(
        feasible && ratio > COARSE_GAP_FACTOR,
        format!(
            "feasible = {feasible}, max φ|e| = {:.4}/{:.4}, input gap {:.4} vs {:.4} (x{ratio:.1})",
            coarse.free.funnel_margin(&bench.funnel),
            coarse.deriv.funnel_margin(&bench.funnel),
            coarse.input_gap,
            fine.input_gap
        ),
    )
}

fn variant_agreement() -> Outcome {
    let taus = [3.6e-3, 1.8e-3, 9e-4];
    let mut gaps = Vec::new();
    for tau in taus {
        let c = Benchmark::fine()
            .with_tau(tau)
            .compare()
            .map_err(|e| e.to_string())?;
        if !(c.free.is_feasible() && c.deriv.is_feasible()) {
            return Err(format!("infeasible at tau = {tau}"));
        }
        gaps.push(c.input_gap);
    }
    let ratios = [gaps[0] / gaps[1], gaps[1] / gaps[2]];
    let ok = ratios
        .iter()
        .all(|r| (HALVING_RATIO.0..=HALVING_RATIO.1).contains(r));
    verdict(
        ok,
        format!(
            "gaps {:.4e} {:.4e} {:.4e}, ratios {:.3} {:.3}",
            gaps[0], gaps[1], gaps[2], ratios[0], ratios[1]
        ),
    )
}

fn closed_form_design() -> Outcome {
    let norms = FunnelSpec::constant(benchmark::TOLERANCE).unwrap().norms();
    let bounds = WorstCaseBounds {
        f_max: 1.0,
        g_max: 1.0,
        g_min: 1.0,
    };
    let p = design_with_beta(&norms, &bounds, 1.0, 0.0, 0.5, AlphaSpec::Reciprocal, 1.0)
        .map_err(|e| e.to_string())?;
    // ξ/(1-ξ²) = 1  <=>  ξ² + ξ - 1 = 0
    let xi = (-1.0 + 5f64.sqrt()) / 2.0;
    let gamma_bar = 4.0 + 2.0 / xi;
    let (dx, dg) = ((p.xi - xi).abs(), (p.gamma_bar - gamma_bar).abs());
    verdict(
        dx <= CLOSED_FORM_TOL && dg <= CLOSED_FORM_TOL,
        format!(
            "ξ = {:.12} (|Δ| {dx:.1e}), γ̄ = {:.12} (|Δ| {dg:.1e})",
            p.xi, p.gamma_bar
        ),
    )
}

fn guarantee_suite(audits: &mut Vec<Audit>) -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst_e1: f64 = 0.0;
    let mut worst_e2: f64 = 0.0;
    for seed in 0..SUITE_RUNS {
        let run = support::guarantee_run(seed);
        let r = &run.report;
        let e1 = run
            .trace
            .rows
            .iter()
            .map(|row| row.norm_e1)
            .fold(0.0, f64::max);
        worst_e1 = worst_e1.max(e1);
        worst_e2 = worst_e2.max(r.e2_max_samples);
        if !(run.trace.is_feasible() && e1 < 1.0 && r.e2_max_samples <= 1.0 + E2_SLACK) {
            failures.push(seed);
        }
        if run.trace.is_feasible() {
            audits.push(Audit {
                name: format!("plant {seed}"),
                params: run.design.params,
                report: run.report,
            });
        }
    }
    let elapsed = start.elapsed();
    verdict(
        failures.is_empty() && elapsed < SUITE_RUNTIME,
        format!(
            "{}/{SUITE_RUNS} contained, max |e1| = {worst_e1:.4}, max |e2(t_k)| = {worst_e2:.4}, {elapsed:.2?}{}",
            SUITE_RUNS as usize - failures.len(),
            if failures.is_empty() { String::new() } else { format!(", failing seeds {failures:?}") }
        ),
    )
}

fn benchmark_audit(name: &str, bench: &Benchmark, trace: &Trace) -> Result<Audit, String> {
    let design = design_for_linear_plant(
        &bench.plant,
        &bench.reference,
        &bench.funnel,
        bench.law.alpha,
        bench.law.lambda,
        1.0,
        Some(bench.law.beta),
    )
    .map_err(|e| e.to_string())?;
    let ctx = VerifyContext {
        funnel: bench.funnel,
        reference: bench.reference.clone(),
        alpha: bench.law.alpha,
        params: design.params,
        tau: bench.sim.tau,
    };
    Ok(Audit {
        name: name.to_string(),
        report: check_trace(trace, &ctx),
        params: design.params,
    })
}

fn intermediate_bounds(audits: &mut Vec<Audit>) -> Outcome {
    for (name, bench) in [
        ("fine benchmark", Benchmark::fine()),
        ("coarse benchmark", Benchmark::coarse()),
    ] {
        let trace = bench
            .simulate(Variant::DerivativeFree)
            .map_err(|e| e.to_string())?;
        if trace.is_feasible() {
            audits.push(benchmark_audit(name, &bench, &trace)?);
        }
    }
    let checks = [
        Check::DerivativeBound,
        Check::SurrogateBound,
        Check::E2Estimate,
    ];
    let failing: Vec<String> = audits
        .iter()
        .flat_map(|a| {
            checks
                .iter()
                .filter(|c| !a.report.check_passed(**c))
                .map(move |c| format!("{}: {}", a.name, c.name()))
        })
        .collect();
    let tightest =
        |f: &dyn Fn(&Audit) -> f64| audits.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let deriv = tightest(&|a| a.report.derivative_error_max / a.params.eps_hat);
    let surrogate = tightest(&|a| a.report.surrogate_max / a.params.e_hat);
    let excess = tightest(&|a| a.report.e2_excess_max / a.report.surrogate_gap_bound);
    verdict(
        failing.is_empty(),
        format!(
            "{} traces, worst ratios |ẏ-ẏ_ref|/ε̂ {deriv:.3}, |E|/Ê {surrogate:.3}, (|e2|-|E|)/(τMF̃) {excess:.3}{}",
            audits.len(),
            if failing.is_empty() { String::new() } else { format!(", failing {failing:?}") }
        ),
    )
}

fn surrogate_consistency() -> Outcome {
    let bench = Benchmark::fine();
    let study = surrogate_consistency_study(
        &bench.plant,
        &bench.reference,
        &bench.funnel,
        &bench.law,
        &bench.sim,
        &SURROGATE_TAUS,
    )
    .map_err(|e| e.to_string())?;
    let rows: Vec<String> = study
        .rows
        .iter()
        .map(|(t, g)| format!("{t:.0e}:{g:.3e}"))
        .collect();
    verdict(
        (SLOPE.0..=SLOPE.1).contains(&study.slope),
        format!("slope {:.4} over {}", study.slope, rows.join(" ")),
    )
}

fn integrator_order() -> Outcome {
    let errors = support::oscillator_errors(&[10, 20, 40, 80]);
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios
        .iter()
        .all(|r| (RK4_RATIO.0..=RK4_RATIO.1).contains(r));
    verdict(ok, format!("error ratios {ratios:.2?}"))
}

fn input_bound_fuzz() -> Outcome {
    let outcome = catch_unwind(|| support::fuzz_input_bound(FUZZ_DRAWS, 9))
        .map_err(|_| "panicked".to_string())?;
    verdict(
        outcome.non_finite == 0 && outcome.worst_excess <= FUZZ_TOL,
        format!(
            "{} draws, worst |u| - β/λ = {:.2e}, non-finite {}",
            outcome.draws, outcome.worst_excess, outcome.non_finite
        ),
    )
}

fn main() {
    let mut audits = Vec::new();
    let mut failed = 0;
    failed += report(
        1,
        "fine-sampling benchmark contained",
        &mut fine_reproduction,
    );
    failed += report(
        2,
        "coarse-sampling benchmark contained, inputs differ",
        &mut coarse_reproduction,
    );
    failed += report(
        3,
        "variant input gap is first order in tau",
        &mut variant_agreement,
    );
    failed += report(4, "closed-form xi and gamma_bar", &mut closed_form_design);
    failed += report(5, "randomized plants at tau_max stay feasible", &mut || {
        guarantee_suite(&mut audits)
    });
    failed += report(6, "intermediate bounds on feasible traces", &mut || {
        intermediate_bounds(&mut audits)
    });
    failed += report(7, "surrogate gap slope", &mut surrogate_consistency);
    failed += report(8, "RK4 fourth-order convergence", &mut integrator_order);
    failed += report(9, "input bound fuzz", &mut input_bound_fuzz);
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn report(index: usize, name: &str, f: &mut dyn FnMut() -> Outcome) -> usize {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
    match outcome {
        Ok(detail) => {
            println!("PASS {index} {name}: {detail}");
            0
        }
        Err(detail) => {
            println!("FAIL {index} {name}: {detail}");
            1
        }
    }
}
