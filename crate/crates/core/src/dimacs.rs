//! DIMACS max-flow format: `p max n m`, `n <id> s|t`, `a <u> <v> <cap>`,
//! 1-based vertex ids, `c` comment lines.

use std::io::{BufRead, Write};

use crate::error::{FlowError, Result};
use crate::graph::FlowInstance;

/// Parses a DIMACS instance. Each arc becomes a one-sided edge with
/// `u⁺ = cap`, `u⁻ = 0`.
pub fn parse_dimacs(input: impl BufRead) -> Result<FlowInstance> {
    let mut n = None;
    let mut declared = 0usize;
    let mut source = None;
    let mut sink = None;
    let mut edges = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let err = |msg: &str| FlowError::Parse {
            line: lineno,
            msg: msg.to_string(),
        };
        let mut tok = line.split_whitespace();
        let Some(kind) = tok.next() else { continue };
        let mut num = |what: &str| -> Result<f64> {
            tok.next()
                .ok_or_else(|| err(&format!("missing {what}")))?
                .parse::<f64>()
                .map_err(|_| err(&format!("bad {what}")))
        };
        match kind {
            "c" => {}
            "p" => {
                let fmt = line.split_whitespace().nth(1).unwrap_or("");
                if fmt != "max" {
                    return Err(err("expected 'p max n m'"));
                }
                let mut t = line.split_whitespace().skip(2);
                let nn = t.next().and_then(|x| x.parse::<usize>().ok()).ok_or_else(|| err("bad n"))?;
                let mm = t.next().and_then(|x| x.parse::<usize>().ok()).ok_or_else(|| err("bad m"))?;
                n = Some(nn);
                declared = mm;
            }
            "n" => {
                let v = num("node id")? as usize;
                let which = line.split_whitespace().nth(2).ok_or_else(|| err("missing s|t"))?;
                if v == 0 {
                    return Err(err("node ids are 1-based"));
                }
                match which {
                    "s" => source = Some(v - 1),
                    "t" => sink = Some(v - 1),
                    _ => return Err(err("node designator must be s or t")),
                }
            }
            "a" => {
                let u = num("tail")?;
                let v = num("head")?;
                let cap = num("capacity")?;
                if u < 1.0 || v < 1.0 {
                    return Err(err("node ids are 1-based"));
                }
                if !(cap >= 0.0 && cap.is_finite()) {
                    return Err(err("capacity must be non-negative"));
                }
                edges.push((u as usize - 1, v as usize - 1, cap, 0.0));
            }
            _ => return Err(err("unknown line type")),
        }
    }
    let n = n.ok_or(FlowError::Parse {
        line: 0,
        msg: "missing problem line".into(),
    })?;
    if edges.len() != declared {
        return Err(FlowError::Parse {
            line: 0,
            msg: format!("declared {declared} arcs, found {}", edges.len()),
        });
    }
    let source = source.ok_or(FlowError::Parse { line: 0, msg: "missing source".into() })?;
    let sink = sink.ok_or(FlowError::Parse { line: 0, msg: "missing sink".into() })?;
    for &(a, b, _, _) in &edges {
        if a >= n || b >= n {
            return Err(FlowError::VertexOutOfRange { index: a.max(b), n });
        }
    }
    Ok(FlowInstance { n, source, sink, edges })
}

fn fmt_cap(c: f64) -> String {
    if c.fract() == 0.0 && c.abs() < 1e15 {
        format!("{}", c as i64)
    } else {
        format!("{c}")
    }
}

/// Writes an instance; a two-sided edge becomes two antiparallel arcs.
pub fn write_dimacs(inst: &FlowInstance, out: &mut impl Write) -> Result<()> {
    let mut arcs = Vec::new();
    for &(a, b, up, um) in &inst.edges {
        if up > 0.0 {
            arcs.push((a, b, up));
        }
        if um > 0.0 {
            arcs.push((b, a, um));
        }
    }
    writeln!(out, "p max {} {}", inst.n, arcs.len())?;
    writeln!(out, "n {} s", inst.source + 1)?;
    writeln!(out, "n {} t", inst.sink + 1)?;
    for (a, b, c) in arcs {
        writeln!(out, "a {} {} {}", a + 1, b + 1, fmt_cap(c))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "c toy\np max 4 5\nn 1 s\nn 4 t\na 1 2 1\na 2 4 1\na 1 3 1\na 3 4 1\na 2 3 1\n";

    #[test]
    fn parses_toy() {
        let inst = parse_dimacs(TOY.as_bytes()).unwrap();
        assert_eq!((inst.n, inst.source, inst.sink, inst.edges.len()), (4, 0, 3, 5));
        assert_eq!(inst.edges[0], (0, 1, 1.0, 0.0));
    }

    #[test]
    fn round_trips() {
        let inst = FlowInstance {
            n: 3,
            source: 0,
            sink: 2,
            edges: vec![(0, 1, 2.0, 2.0), (1, 2, 3.0, 0.0)],
        };
        let mut buf = Vec::new();
        write_dimacs(&inst, &mut buf).unwrap();
        let back = parse_dimacs(buf.as_slice()).unwrap();
        assert_eq!(back.edges, vec![(0, 1, 2.0, 0.0), (1, 0, 2.0, 0.0), (1, 2, 3.0, 0.0)]);
    }

    #[test]
    fn reports_bad_lines() {
        assert!(matches!(parse_dimacs("p max 2 1\nn 1 s\nn 2 t\na 1 x 1\n".as_bytes()), Err(FlowError::Parse { line: 4, .. })));
        assert!(matches!(parse_dimacs("p max 2 2\nn 1 s\nn 2 t\na 1 2 1\n".as_bytes()), Err(FlowError::Parse { .. })));
        assert!(matches!(parse_dimacs("p min 2 1\n".as_bytes()), Err(FlowError::Parse { line: 1, .. })));
    }
}
