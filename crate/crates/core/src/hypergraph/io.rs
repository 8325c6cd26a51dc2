//! Text serialisation: header `HG v1 N M`, then one line per hyperedge,
//! `id kind key member,member,...`. Keys are percent-escaped so they never
//! contain whitespace.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Hyperedge, Hypergraph};
use crate::error::{Error, Result};

fn escape_key(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    for c in key.chars() {
        if c == '%' || c.is_whitespace() || c.is_control() {
            let mut buf = [0u8; 4];
            for b in c.encode_utf8(&mut buf).bytes() {
                write!(out, "%{b:02X}").unwrap();
            }
        } else {
            out.push(c);
        }
    }
    if out.is_empty() {
        out.push_str("%00");
    }
    out
}

fn unescape_key(raw: &str) -> Result<String> {
    if raw == "%00" {
        return Ok(String::new());
    }
    let bytes = raw.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = raw
                .get(i + 1..i + 3)
                .and_then(|h| u8::from_str_radix(h, 16).ok())
                .ok_or_else(|| Error::Format(format!("bad escape in hyperedge key `{raw}`")))?;
            out.push(hex);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map_err(|_| Error::Format(format!("hyperedge key `{raw}` is not UTF-8")))
}

impl Hypergraph {
    pub fn to_text(&self) -> String {
        let mut out = format!("HG v1 {} {}\n", self.n_nodes(), self.n_hyperedges());
        for edge in self.hyperedges() {
            let members: Vec<String> = edge.members.iter().map(usize::to_string).collect();
            writeln!(
                out,
                "{} {} {} {}",
                edge.id,
                edge.kind,
                escape_key(&edge.key),
                members.join(",")
            )
            .unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Hypergraph> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty hypergraph file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "HG" || fields[1] != "v1" {
            return Err(Error::Format(format!("bad hypergraph header `{header}`")));
        }
        let parse_count = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad count `{s}` in hypergraph header")))
        };
        let n_nodes = parse_count(fields[2])?;
        let n_edges = parse_count(fields[3])?;
        let mut edges = Vec::with_capacity(n_edges);
        for (line_no, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |what: &str| Error::Format(format!("hypergraph line {}: {what}", line_no + 2));
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(bad("expected `id kind key members`"));
            }
            let id: usize = parts[0].parse().map_err(|_| bad("bad id"))?;
            if id != edges.len() {
                return Err(bad("hyperedge ids must be consecutive from 0"));
            }
            let members = parts[3]
                .split(',')
                .map(|m| m.parse::<usize>().map_err(|_| bad("bad member index")))
                .collect::<Result<Vec<_>>>()?;
            edges.push(Hyperedge {
                id,
                kind: parts[1].parse()?,
                key: unescape_key(parts[2])?,
                members,
            });
        }
        if edges.len() != n_edges {
            return Err(Error::Format(format!(
                "header promises {n_edges} hyperedges, found {}",
                edges.len()
            )));
        }
        Hypergraph::new(n_nodes, edges)
    }
}

pub fn write_hypergraph(path: &Path, graph: &Hypergraph) -> Result<()> {
    fs::write(path, graph.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_hypergraph(path: &Path) -> Result<Hypergraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Hypergraph::from_text(&text)
}
