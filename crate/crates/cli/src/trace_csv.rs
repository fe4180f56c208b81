//! Trace CSV: `t, y1..ym, ydot1..ydotm, eta1..etal, e1..em, norm_e1, norm_e2,
//! u1..um, is_sample, E1..Em`, one row per recorded point. `E` columns are
//! empty off the sampling instants. Floats carry 17 significant digits so a
//! re-read trace is bit-identical.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;
use zoh_funnel::sim::{Trace, TraceRow, TraceStatus};

use crate::error::CliError;

pub fn header(m: usize, l: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    let group = |h: &mut Vec<String>, prefix: &str, n: usize| {
        h.extend((1..=n).map(|i| format!("{prefix}{i}")))
    };
    group(&mut h, "y", m);
    group(&mut h, "ydot", m);
    group(&mut h, "eta", l);
    group(&mut h, "e", m);
    h.push("norm_e1".into());
    h.push("norm_e2".into());
    group(&mut h, "u", m);
    h.push("is_sample".into());
    group(&mut h, "E", m);
    h
}

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trace<W: Write>(trace: &Trace, out: W) -> Result<(), csv::Error> {
    let (m, l) = (trace.output_dim, trace.internal_dim);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(m, l))?;
    let mut record: Vec<String> = Vec::with_capacity(5 * m + l + 4);
    for row in &trace.rows {
        record.clear();
        record.push(float(row.t));
        for v in [&row.y, &row.ydot, &row.eta, &row.e] {
            record.extend(v.iter().map(|&x| float(x)));
        }
        record.push(float(row.norm_e1));
        record.push(float(row.norm_e2));
        record.extend(row.u.iter().map(|&x| float(x)));
        match &row.signal {
            Some(s) => {
                record.push("1".into());
                record.extend(s.iter().map(|&x| float(x)));
            }
            None => {
                record.push("0".into());
                record.extend(std::iter::repeat_n(String::new(), m));
            }
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trace(trace: &Trace, path: &Path) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_trace(trace, std::io::BufWriter::new(file)).map_err(|e| CliError::io(path, e))
}

fn count(header: &csv::StringRecord, prefix: &str) -> usize {
    header
        .iter()
        .filter(|h| {
            h.strip_prefix(prefix)
                .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
        })
        .count()
}

/// Reads a trace written by [`write_trace`]. The sampling period is not part
/// of the file and is taken from `tau`; the status is reconstructed from the
/// last row.
pub fn read_trace<R: Read>(input: R, tau: f64) -> Result<Trace, String> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    let (m, l) = (count(&header, "y"), count(&header, "eta"));
    let expected = header_record(m, l);
    if header != expected {
        return Err(format!("unexpected header (m = {m}, l = {l})"));
    }
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let num = |i: usize| -> Result<f64, String> {
            record[i]
                .parse::<f64>()
                .map_err(|e| format!("row {}: column `{}`: {e}", line + 1, &header[i]))
        };
        let vec = |start: usize, n: usize| -> Result<DVector<f64>, String> {
            (start..start + n)
                .map(num)
                .collect::<Result<Vec<_>, _>>()
                .map(DVector::from_vec)
        };
        let mut i = 1;
        let y = vec(i, m)?;
        i += m;
        let ydot = vec(i, m)?;
        i += m;
        let eta = vec(i, l)?;
        i += l;
        let e = vec(i, m)?;
        i += m;
        let norm_e1 = num(i)?;
        let norm_e2 = num(i + 1)?;
        i += 2;
        let u = vec(i, m)?;
        i += m;
        let signal = match &record[i] {
            "1" => Some(vec(i + 1, m)?),
            "0" => None,
            other => {
                return Err(format!(
                    "row {}: is_sample must be 0 or 1, got `{other}`",
                    line + 1
                ))
            }
        };
        rows.push(TraceRow {
            t: num(0)?,
            y,
            ydot,
            eta,
            e,
            norm_e1,
            norm_e2,
            u,
            signal,
        });
    }
    let status = match rows.last() {
        Some(last) if !(last.norm_e1 < 1.0) => TraceStatus::FunnelViolation { time: last.t },
        _ => TraceStatus::Complete,
    };
    Ok(Trace {
        output_dim: m,
        internal_dim: l,
        tau,
        rows,
        branches: Vec::new(),
        status,
    })
}

fn header_record(m: usize, l: usize) -> csv::StringRecord {
    csv::StringRecord::from(header(m, l))
}

pub fn load_trace(path: &Path, tau: f64) -> Result<Trace, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_trace(std::io::BufReader::new(file), tau).map_err(|e| CliError::io(path, e))
}
