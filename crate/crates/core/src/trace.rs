//! Line-delimited JSON traces: one header line, then one record per
//! accepted iteration.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{Mode, SolverConfig};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub kind: String,
    pub config: SolverConfig,
    pub n: usize,
    /// Edges of the input graph.
    pub m_input: usize,
    /// Edges the interior point method runs on.
    pub m: usize,
    pub cap_bound: f64,
    pub f_star: f64,
    pub threshold: f64,
    pub eta: Option<f64>,
    pub big_w: Option<f64>,
    pub p: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub mode: Mode,
    pub value: f64,
    pub gap: f64,
    pub delta: f64,
    pub halvings: u32,
    pub potential: f64,
    pub congestion: f64,
    pub step_max: f64,
    pub w_l1: f64,
    /// `‖w″‖₁` of the step (weighted mode).
    pub w_added: Option<f64>,
    /// `‖r′‖_q - W` (weighted mode).
    pub q_norm_error: Option<f64>,
    pub coupling: f64,
    pub coupling_tol: f64,
    pub dual_fit: f64,
    pub inner_iters: usize,
    /// Smallest `û_e` over preconditioner edges after the step.
    pub precond_slack: f64,
    pub wall_time: Option<f64>,
}

/// Writes `value` as one JSON line.
pub fn emit_trace<T: Serialize>(out: &mut impl Write, value: &T) -> Result<()> {
    let line = serde_json::to_string(value).map_err(|e| crate::error::FlowError::Io(e.to_string()))?;
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Writes a full trace.
pub fn write_trace(out: &mut impl Write, header: &TraceHeader, records: &[TraceRecord]) -> Result<()> {
    emit_trace(out, header)?;
    for r in records {
        emit_trace(out, r)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> TraceHeader {
        TraceHeader {
            kind: "header".into(),
            config: SolverConfig::default(),
            n: 2,
            m_input: 1,
            m: 2,
            cap_bound: 1.0,
            f_star: 3.0,
            threshold: 2f64.sqrt(),
            eta: None,
            big_w: None,
            p: None,
        }
    }

    fn record(i: usize) -> TraceRecord {
        TraceRecord {
            iteration: i,
            mode: Mode::Warmup,
            value: i as f64,
            gap: 3.0 - i as f64,
            delta: 0.1,
            halvings: 0,
            potential: -1.5,
            congestion: 0.01,
            step_max: 0.05,
            w_l1: 4.0,
            w_added: None,
            q_norm_error: None,
            coupling: 0.0,
            coupling_tol: 3e-8,
            dual_fit: 0.0,
            inner_iters: 9,
            precond_slack: 1.0,
            wall_time: None,
        }
    }

    #[test]
    fn empty_run_is_header_only() {
        let mut buf = Vec::new();
        write_trace(&mut buf, &header(), &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }

    #[test]
    fn three_records_make_four_lines() {
        let mut buf = Vec::new();
        let recs: Vec<_> = (1..=3).map(record).collect();
        write_trace(&mut buf, &header(), &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        let back: TraceRecord = serde_json::from_str(text.lines().nth(2).unwrap()).unwrap();
        assert_eq!(back, record(2));
        assert!(text.lines().next().unwrap().starts_with("{\"kind\":\"header\""));
    }
}
