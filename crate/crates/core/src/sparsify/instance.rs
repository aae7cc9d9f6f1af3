//! Plain-text dump of a selection problem.
//!
//! ```text
//! # comment
//! T 4
//! M 128
//! beams 3 5 7
//! users 0 1
//! w 3 0 1
//! w 5 1 1
//! w 7 0 1
//! ```
//!
//! `w` lines name a beam index and a user id; the trailing weight must be 1.

use std::fmt::Write as _;
use std::path::Path;

use super::BeamUserGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IlpInstance {
    pub pilots: usize,
    pub antennas: usize,
    pub graph: BeamUserGraph,
}

pub fn write_instance(inst: &IlpInstance) -> String {
    let g = &inst.graph;
    let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut out = String::new();
    let _ = writeln!(out, "T {}", inst.pilots);
    let _ = writeln!(out, "M {}", inst.antennas);
    let _ = writeln!(out, "beams {}", join(g.beams()));
    let _ = writeln!(out, "users {}", join(g.users()));
    for (a, k) in g.edges() {
        let _ = writeln!(out, "w {} {} 1", g.beams()[a], g.users()[k]);
    }
    out
}

pub fn parse_instance(text: &str) -> Result<IlpInstance> {
    let mut pilots = None;
    let mut antennas = None;
    let mut beams: Option<Vec<usize>> = None;
    let mut users: Option<Vec<usize>> = None;
    let mut raw_edges = Vec::new();

    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let nums: Vec<usize> = parts
            .map(|p| p.parse().map_err(|_| err(format!("not a non-negative integer: {p:?}"))))
            .collect::<Result<_>>()?;
        let scalar = |nums: &[usize]| match nums {
            [v] => Ok(*v),
            _ => Err(err(format!("{key} takes exactly one value"))),
        };
        match key {
            "T" => pilots = Some(scalar(&nums)?),
            "M" => antennas = Some(scalar(&nums)?),
            "beams" => beams = Some(nums),
            "users" => users = Some(nums),
            "w" => match nums[..] {
                [b, u, 1] => raw_edges.push((line_no, b, u)),
                [_, _, _] => return Err(err("edge weight must be 1".into())),
                _ => return Err(err("w takes beam, user and weight".into())),
            },
            other => return Err(err(format!("unknown key {other:?}"))),
        }
    }

    let missing = |what: &str| Error::Parse {
        line: 0,
        msg: format!("missing {what} line"),
    };
    let pilots = pilots.ok_or_else(|| missing("T"))?;
    let antennas = antennas.ok_or_else(|| missing("M"))?;
    let beams = beams.ok_or_else(|| missing("beams"))?;
    let users = users.ok_or_else(|| missing("users"))?;
    if pilots == 0 {
        return Err(Error::InvalidArgument("T must be ≥ 1".into()));
    }
    if beams.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("beams must be strictly increasing".into()));
    }
    if let Some(b) = beams.iter().find(|&&b| b >= antennas) {
        return Err(Error::InvalidArgument(format!("beam {b} outside M = {antennas}")));
    }
    let mut edges = Vec::with_capacity(raw_edges.len());
    for (line, b, u) in raw_edges {
        let a = beams.iter().position(|&x| x == b).ok_or(Error::Parse {
            line,
            msg: format!("beam {b} not listed"),
        })?;
        let k = users.iter().position(|&x| x == u).ok_or(Error::Parse {
            line,
            msg: format!("user {u} not listed"),
        })?;
        edges.push((a, k));
    }
    let graph = BeamUserGraph::new(beams, users, edges)?;
    Ok(IlpInstance {
        pilots,
        antennas,
        graph,
    })
}

pub fn read_instance(path: &Path) -> Result<IlpInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_instance(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# two users\nT 4\nM 128\nbeams 3 5 7\nusers 0 1\nw 3 0 1\nw 5 1 1\nw 7 0 1\n";

    #[test]
    fn round_trip() {
        let inst = parse_instance(SAMPLE).unwrap();
        assert_eq!(inst.pilots, 4);
        assert_eq!(inst.graph.beams(), &[3, 5, 7]);
        assert!(inst.graph.is_adjacent(1, 1));
        assert!(!inst.graph.is_adjacent(1, 0));
        let again = parse_instance(&write_instance(&inst)).unwrap();
        assert_eq!(again, inst);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = SAMPLE.replace("w 5 1 1", "w 5 9 1");
        match parse_instance(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
        assert!(parse_instance("T 2\nM 8\nbeams 1\nusers 0\nw 1 0 2\n").is_err());
        assert!(parse_instance("T 2\nbeams 1\nusers 0\nw 1 0 1\n").is_err());
        assert!(parse_instance("T x\n").is_err());
        // beam without an edge
        assert!(parse_instance("T 2\nM 8\nbeams 1 2\nusers 0\nw 1 0 1\n").is_err());
    }
}
