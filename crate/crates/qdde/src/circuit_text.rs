//! Line-oriented circuit text.
//!
//! ```text
//! width 4
//! register state 2 2
//! H 2 [] [] StatePrep
//! RZ 3 [7.853981633974483e-1] [] QFT
//! MCX 0,1,3 [] [0,1] OAA
//! ```
//!
//! A `width` header, optional `register NAME START LEN` lines, then one
//! gate per line: kind, operands, parameters, control polarities (`1`
//! fires on `|1⟩`) and tag. Calls are flattened on output and simulator
//! kernels are dropped; parameters are written in shortest round-trip
//! form so reading back gives bit-identical angles. Blank lines and `#`
//! comments are ignored.

use std::fmt::Write as _;

use qdde_core::circuit::{Circuit, Gate, GateKind, Register, Tag};

use crate::error::{CliError, Result};

pub fn to_text(c: &Circuit) -> String {
    let mut s = String::new();
    writeln!(s, "width {}", c.width()).unwrap();
    for r in c.registers() {
        writeln!(s, "register {} {} {}", r.name, r.start, r.len).unwrap();
    }
    c.visit(&mut |g, p| {
        let g = p.resolve(g);
        s.push_str(&gate_line(&g));
        s.push('\n');
    });
    s
}

pub fn gate_line(g: &Gate) -> String {
    let qubits: Vec<String> = g.qubits.iter().map(|q| q.to_string()).collect();
    let params: Vec<String> = g.params.iter().map(|p| format!("{p:e}")).collect();
    let pols: Vec<&str> = g.polarities.iter().map(|&b| if b { "1" } else { "0" }).collect();
    format!("{} {} [{}] [{}] {}", g.kind, qubits.join(","), params.join(","), pols.join(","), g.tag)
}

pub fn from_text(text: &str) -> Result<Circuit> {
    let mut width = None;
    let mut registers = Vec::new();
    let mut gates = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |msg: String| CliError::CircuitText { line, msg };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields[0] {
            "width" => {
                if width.is_some() || !gates.is_empty() || !registers.is_empty() {
                    return Err(err("`width` must come first, once".into()));
                }
                let [_, w] = fields[..] else { return Err(err("expected `width N`".into())) };
                width = Some(w.parse::<usize>().map_err(|_| err(format!("bad width `{w}`")))?);
            }
            "register" => {
                let [_, name, start, len] = fields[..] else {
                    return Err(err("expected `register NAME START LEN`".into()));
                };
                let n = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad register bound `{s}`")));
                registers.push(Register { name: name.to_string(), start: n(start)?, len: n(len)? });
            }
            _ => gates.push(parse_gate(&fields).map_err(err)?),
        }
    }
    let width = width.ok_or(CliError::CircuitText { line: 0, msg: "missing `width` header".into() })?;
    let mut c = Circuit::with_registers(width, registers)?;
    for g in gates {
        c.append(g)?;
    }
    Ok(c)
}

fn bracketed<'a>(s: &'a str, what: &str) -> std::result::Result<Vec<&'a str>, String> {
    let inner = s.strip_prefix('[').and_then(|s| s.strip_suffix(']')).ok_or_else(|| format!("{what} must be bracketed, got `{s}`"))?;
    Ok(if inner.is_empty() { Vec::new() } else { inner.split(',').collect() })
}

fn parse_gate(fields: &[&str]) -> std::result::Result<Gate, String> {
    let [kind, qubits, params, pols, tag] = fields[..] else {
        return Err(format!("expected `KIND QUBITS [PARAMS] [POLARITIES] TAG`, got {} fields", fields.len()));
    };
    let kind: GateKind = kind.parse().map_err(|e: qdde_core::Error| e.to_string())?;
    let qubits = qubits
        .split(',')
        .map(|q| q.parse::<usize>().map_err(|_| format!("bad operand `{q}`")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let params = bracketed(params, "parameters")?
        .into_iter()
        .map(|p| p.parse::<f64>().map_err(|_| format!("bad parameter `{p}`")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let polarities = bracketed(pols, "polarities")?
        .into_iter()
        .map(|p| match p {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(format!("bad polarity `{p}`")),
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let tag: Tag = tag.parse().map_err(|e: qdde_core::Error| e.to_string())?;
    Gate::new(kind, qubits, params, polarities, tag).map_err(|e| e.to_string())
}
