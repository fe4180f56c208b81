//! The subcommands as library functions; `main` only maps results to exit codes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use zoh_funnel::controller::{ControlLawConfig, Variant};
use zoh_funnel::sim::{
    compare_variants, simulate, SimConfig, SimError, Trace, TraceStatus, VariantComparison,
};
use zoh_funnel::verify::{check_trace, VerificationReport};

use crate::certificate::{certify, Certificate};
use crate::config::Experiment;
use crate::error::CliError;
use crate::sweep::{run_sweep, Grid, SweepRow, SWEEP_HEADER};
use crate::trace_csv::{float, load_trace, save_trace};

/// Text for stdout plus the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { stdout, code: 0 }
    }
}

fn sim_error(err: SimError) -> CliError {
    match err {
        SimError::Blowup { .. } => CliError::Blowup(err.to_string()),
        SimError::GainNotPositive { .. } => CliError::Infeasible(err.to_string()),
        SimError::Config(_) | SimError::Control(_) => CliError::config("sim", err.to_string()),
    }
}

fn law_for(
    x: &Experiment,
    cert: &Certificate,
    variant: Variant,
) -> Result<ControlLawConfig, CliError> {
    let law = ControlLawConfig::new(cert.params.beta, x.lambda, variant)
        .map_err(|e| CliError::config("controller", e.to_string()))?;
    Ok(ControlLawConfig {
        alpha: x.alpha,
        ..law
    })
}

fn sim_config(x: &Experiment, tau: f64) -> SimConfig {
    SimConfig {
        record_stride: x.sim.record_stride,
        ..SimConfig::new(tau, x.sim.horizon).with_substeps(x.sim.substeps)
    }
}

fn target(out: Option<&Path>, configured: &Option<PathBuf>) -> Option<PathBuf> {
    out.map(Path::to_path_buf).or_else(|| configured.clone())
}

pub fn cmd_design(
    x: &Experiment,
    out: Option<&Path>,
    allow_unsafe: bool,
) -> Result<Outcome, CliError> {
    let cert = certify(x, allow_unsafe)?;
    let mut text = cert.render();
    if let Some(path) = target(out, &x.output.certificate) {
        cert.save(&path)?;
        let _ = write!(text, "\ncertificate written to {}", path.display());
    }
    Ok(Outcome::ok(text))
}

pub fn summary(trace: &Trace, x: &Experiment, tau: f64) -> String {
    let mut s = format!(
        "feasible={} funnel_margin={:.6} input_max={:.6} tau={tau:e} samples={} rows={}",
        trace.is_feasible(),
        trace.funnel_margin(&x.funnel),
        trace.input_max(),
        trace.samples().count(),
        trace.rows.len()
    );
    if let TraceStatus::FunnelViolation { time } = trace.status {
        let _ = write!(s, " violation_time={time:e}");
    }
    s
}

/// Simulates the experiment. Without an output path the CSV goes to stdout
/// and the summary line is the only text returned.
pub fn cmd_simulate(
    x: &Experiment,
    out: Option<&Path>,
    variant: Option<Variant>,
    allow_unsafe: bool,
) -> Result<(Outcome, Option<Trace>), CliError> {
    let cert = certify(x, allow_unsafe)?;
    let law = law_for(x, &cert, variant.unwrap_or(x.variant))?;
    let trace = simulate(
        &x.plant,
        &x.reference,
        &x.funnel,
        &law,
        &sim_config(x, cert.tau),
    )
    .map_err(sim_error)?;
    let line = summary(&trace, x, cert.tau);
    let code = if trace.is_feasible() { 0 } else { 2 };
    match target(out, &x.output.trace) {
        Some(path) => {
            save_trace(&trace, &path)?;
            Ok((Outcome { stdout: line, code }, Some(trace)))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            crate::trace_csv::write_trace(&trace, &mut lock)
                .map_err(|e| CliError::io("<stdout>", e))?;
            lock.flush().map_err(|e| CliError::io("<stdout>", e))?;
            eprintln!("{line}");
            Ok((
                Outcome {
                    stdout: String::new(),
                    code,
                },
                Some(trace),
            ))
        }
    }
}

pub fn verify_files(trace: &Path, certificate: &Path) -> Result<VerificationReport, CliError> {
    let cert = Certificate::load(certificate)?;
    let trace = load_trace(trace, cert.tau)?;
    Ok(check_trace(&trace, &cert.verify_context()))
}

pub fn cmd_verify(trace: &Path, certificate: &Path) -> Result<Outcome, CliError> {
    let report = verify_files(trace, certificate)?;
    let code = if report.passed() { 0 } else { 2 };
    Ok(Outcome {
        stdout: report.to_key_values().trim_end().to_string(),
        code,
    })
}

pub fn write_sweep(rows: &[SweepRow], path: Option<&Path>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::io("<sweep>", e);
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.record()).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io("<sweep>", e.to_string()))?;
    let text = String::from_utf8(bytes).expect("csv output is utf-8");
    match path {
        Some(p) => {
            std::fs::write(p, &text).map_err(|e| CliError::io(p, e))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

pub fn cmd_sweep(
    x: &Experiment,
    grid: &Grid,
    out: Option<&Path>,
    variant: Option<Variant>,
) -> Result<Outcome, CliError> {
    let rows = run_sweep(x, variant.unwrap_or(x.variant), grid)?;
    let path = target(out, &x.output.sweep);
    let mut text = write_sweep(&rows, path.as_deref())?;
    let feasible = rows.iter().filter(|r| r.feasible).count();
    if let Some(p) = path {
        text = format!(
            "{} grid points, {feasible} feasible, written to {}",
            rows.len(),
            p.display()
        );
    }
    Ok(Outcome::ok(text.trim_end().to_string()))
}

/// Plot-ready columns for both variants on the common grid:
/// `t, yref*, y_free*, y_deriv*, psi, u_free*, u_deriv*`.
pub fn comparison_csv(x: &Experiment, c: &VariantComparison) -> String {
    let m = c.free.output_dim;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    for prefix in ["yref", "y_free", "y_deriv"] {
        header.extend((1..=m).map(|i| format!("{prefix}{i}")));
    }
    header.push("psi".into());
    for prefix in ["u_free", "u_deriv"] {
        header.extend((1..=m).map(|i| format!("{prefix}{i}")));
    }
    w.write_record(&header).expect("in-memory write");
    for (a, b) in c.free.rows.iter().zip(&c.deriv.rows) {
        let mut rec = vec![float(a.t)];
        rec.extend(x.reference.eval(a.t).value.iter().map(|&v| float(v)));
        rec.extend(a.y.iter().map(|&v| float(v)));
        rec.extend(b.y.iter().map(|&v| float(v)));
        rec.push(float(1.0 / x.funnel.phi(a.t)));
        rec.extend(a.u.iter().map(|&v| float(v)));
        rec.extend(b.u.iter().map(|&v| float(v)));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv output is utf-8")
}

pub fn cmd_compare(
    x: &Experiment,
    out: Option<&Path>,
    allow_unsafe: bool,
) -> Result<(Outcome, VariantComparison), CliError> {
    let cert = certify(x, allow_unsafe)?;
    let law = law_for(x, &cert, Variant::DerivativeFree)?;
    let c = compare_variants(
        &x.plant,
        &x.reference,
        &x.funnel,
        &law,
        &sim_config(x, cert.tau),
    )
    .map_err(sim_error)?;
    let csv = comparison_csv(x, &c);
    let line = format!(
        "free_feasible={} deriv_feasible={} input_gap={:.6e} output_gap={:.6e} free_margin={:.6} deriv_margin={:.6}",
        c.free.is_feasible(),
        c.deriv.is_feasible(),
        c.input_gap,
        c.output_gap,
        c.free.funnel_margin(&x.funnel),
        c.deriv.funnel_margin(&x.funnel)
    );
    let code = if c.free.is_feasible() && c.deriv.is_feasible() {
        0
    } else {
        2
    };
    let stdout = match target(out, &x.output.compare) {
        Some(p) => {
            std::fs::write(&p, csv).map_err(|e| CliError::io(&p, e))?;
            line
        }
        None => {
            eprintln!("{line}");
            csv.trim_end().to_string()
        }
    };
    Ok((Outcome { stdout, code }, c))
}
