//! Delimited-text trace output, one row per accepted iteration.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::solver::IterationTrace;

pub const TRACE_HEADER: [&str; 10] = [
    "k",
    "lambda",
    "xi",
    "tau",
    "U",
    "L",
    "residual",
    "phi_y",
    "phi_ymin",
    "inner_repeats",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub lambda: f64,
    pub xi: f64,
    pub tau: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub residual: f64,
    pub phi_y: f64,
    pub phi_ymin: f64,
    pub inner_repeats: usize,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn trace_records<T: Scalar>(trace: &IterationTrace<T>) -> Vec<TraceRecord> {
    trace
        .rows
        .iter()
        .map(|r| TraceRecord {
            k: r.k,
            lambda: r.lambda.to_f64_lossy(),
            xi: r.xi.to_f64_lossy(),
            tau: r.tau.to_f64_lossy(),
            u: r.u.to_f64_lossy(),
            l: r.l.to_f64_lossy(),
            residual: r.residual.to_f64_lossy(),
            phi_y: r.phi_y.to_f64_lossy(),
            phi_ymin: r.phi_ymin.to_f64_lossy(),
            inner_repeats: r.inner_repeats,
        })
        .collect()
}

/// Writes the trace as comma-separated text with a header row.
pub fn write_trace<T: Scalar, W: Write>(trace: &IterationTrace<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for rec in trace_records(trace) {
        w.serialize(rec).map_err(csv_err)?;
    }
    if trace.rows.is_empty() {
        w.write_record(TRACE_HEADER).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: std::io::Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(TRACE_HEADER) {
        return Err(Error::Io(format!("unexpected trace header {headers:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::TraceRow;

    #[test]
    fn header_row_is_exact() {
        let trace = IterationTrace {
            phi_y0: 0.0,
            rows: vec![TraceRow {
                k: 1,
                lambda: 0.5,
                xi: 0.0,
                tau: 0.0,
                u: 2.0,
                l: 0.0,
                residual: 1e-3,
                phi_y: -1.5,
                phi_ymin: -1.5,
                inner_repeats: 2,
                a: 4.0,
            }],
        };
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,lambda,xi,tau,U,L,residual,phi_y,phi_ymin,inner_repeats"
        );
        assert_eq!(
            lines.next().unwrap(),
            "1,0.5,0.0,0.0,2.0,0.0,0.001,-1.5,-1.5,2"
        );
        let back = read_trace(buf.as_slice()).unwrap();
        assert_eq!(back, trace_records(&trace));
    }

    #[test]
    fn empty_trace_still_has_header() {
        let trace: IterationTrace<f64> = IterationTrace {
            phi_y0: 0.0,
            rows: vec![],
        };
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().trim(),
            TRACE_HEADER.join(",")
        );
    }
}
