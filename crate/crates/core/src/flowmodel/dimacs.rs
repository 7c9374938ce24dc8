use std::fmt::Write as _;

use super::network::{Arc, Capacity, FlowNetwork, Node, NodeId};
use super::{EmitError, ParseError};

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::SyntaxError { line, msg: msg.into() }
}

fn int_field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, ParseError> {
    let tok = tok.ok_or_else(|| syntax(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| syntax(line, format!("bad {what} {tok:?}")))
}

/// Parses a DIMACS `min` instance. Nodes are numbered `1..=n` and arcs get ids
/// `1..=m` in file order. A capacity of `inf` denotes an unbounded arc.
pub fn parse_dimacs(text: &str) -> Result<FlowNetwork, ParseError> {
    let mut header: Option<(u32, usize)> = None;
    let mut demands: Vec<Option<i64>> = Vec::new();
    let mut arcs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let mut toks = raw.split_whitespace();
        let Some(kind) = toks.next() else { continue };
        match kind {
            "c" => continue,
            "p" => {
                if header.is_some() {
                    return Err(syntax(line, "duplicate problem line"));
                }
                if toks.next() != Some("min") {
                    return Err(syntax(line, "expected \"p min <n> <m>\""));
                }
                let n: u32 = int_field(toks.next(), line, "node count")?;
                let m: usize = int_field(toks.next(), line, "arc count")?;
                header = Some((n, m));
                demands = vec![None; n as usize];
            }
            "n" | "a" => {
                let Some((n, _)) = header else {
                    return Err(syntax(line, "descriptor before problem line"));
                };
                let node = |tok: Option<&str>, what: &str| -> Result<u32, ParseError> {
                    let id: u32 = int_field(tok, line, what)?;
                    if id == 0 || id > n {
                        return Err(ParseError::Inconsistent(format!("line {line}: node {id} outside 1..={n}")));
                    }
                    Ok(id)
                };
                if kind == "n" {
                    let id = node(toks.next(), "node id")?;
                    let flow: i64 = int_field(toks.next(), line, "node flow")?;
                    let slot = &mut demands[id as usize - 1];
                    if slot.is_some() {
                        return Err(ParseError::Inconsistent(format!("line {line}: node {id} listed twice")));
                    }
                    *slot = Some(flow);
                } else {
                    let tail = node(toks.next(), "arc tail")?;
                    let head = node(toks.next(), "arc head")?;
                    let lower: i64 = int_field(toks.next(), line, "lower bound")?;
                    if lower != 0 {
                        return Err(ParseError::NonZeroLowerBound { line, lower });
                    }
                    let capacity = match toks.next() {
                        Some("inf") => Capacity::Unbounded,
                        tok => Capacity::Finite(int_field(tok, line, "capacity")?),
                    };
                    if matches!(capacity, Capacity::Finite(u) if u < 0) {
                        return Err(syntax(line, "negative capacity"));
                    }
                    let cost: i64 = int_field(toks.next(), line, "cost")?;
                    let id = arcs.len() as u32 + 1;
                    arcs.push(Arc::linear(id, tail, head, capacity, cost));
                }
                if let Some(extra) = toks.next() {
                    return Err(syntax(line, format!("unexpected token {extra:?}")));
                }
            }
            other => return Err(syntax(line, format!("unknown descriptor {other:?}"))),
        }
    }
    let Some((_, m)) = header else {
        return Err(syntax(0, "missing problem line"));
    };
    if arcs.len() != m {
        return Err(ParseError::Inconsistent(format!("header declares {m} arcs, found {}", arcs.len())));
    }
    let nodes = demands
        .into_iter()
        .enumerate()
        .map(|(i, d)| Node { id: NodeId(i as u32 + 1), demand: d.unwrap_or(0) })
        .collect();
    Ok(FlowNetwork::new(nodes, arcs)?)
}

/// Writes a network with linear costs in DIMACS `min` format. Nodes and arcs
/// are numbered by position, so canonical instances (ids `1..=n`, `1..=m` in
/// order) round-trip exactly.
pub fn emit_dimacs(network: &FlowNetwork) -> Result<String, EmitError> {
    let mut out = String::new();
    writeln!(out, "p min {} {}", network.node_count(), network.arc_count()).unwrap();
    for (i, n) in network.nodes().iter().enumerate() {
        if n.demand != 0 {
            writeln!(out, "n {} {}", i + 1, n.demand).unwrap();
        }
    }
    for a in network.arcs() {
        let cost = a.linear_cost().ok_or(EmitError::NonLinearCost(a.id))?;
        let cost = cost.to_i64().ok_or(EmitError::CostTooLarge(a.id))?;
        let cap = match a.capacity {
            Capacity::Finite(u) => u.to_string(),
            Capacity::Unbounded => "inf".to_string(),
        };
        let tail = network.node_position(a.tail).unwrap() + 1;
        let head = network.node_position(a.head).unwrap() + 1;
        writeln!(out, "a {tail} {head} 0 {cap} {cost}").unwrap();
    }
    Ok(out)
}
