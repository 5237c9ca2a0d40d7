//! Lasso traces, trace assignments and the counterexample text format.
//!
//! The text format is line based:
//!
//! ```text
//! cex traces=2 stem=1 loop=1
//! # <trace> <timestep> <variable> <0|1>
//! 0 0 i 1
//! 1 1 o1 1
//! ```
//!
//! Unlisted `(trace, timestep, variable)` triples are 0.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Set of atomic propositions present at one position.
pub type Letter = BTreeSet<String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Input,
    Output,
    Latch,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
}

impl VarDecl {
    pub fn new(name: impl Into<String>, kind: VarKind) -> Self {
        VarDecl { name: name.into(), kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {0}: malformed line")]
    MalformedLine(usize),
    #[error("line {0}: malformed header, expected `cex traces=<k> stem=<s> loop=<l>`")]
    MalformedHeader(usize),
    #[error("line {line}: unknown variable `{name}`")]
    UnknownVariable { line: usize, name: String },
    #[error("line {0}: trace or timestep index out of range")]
    IndexOutOfRange(usize),
    #[error("line {0}: value given twice")]
    DuplicateEntry(usize),
    #[error("loop must contain at least one position")]
    EmptyLoop,
    #[error("traces do not share the same stem and loop lengths")]
    ShapeMismatch,
    #[error("expected {expected} trace variables, got {got}")]
    TraceCountMismatch { expected: usize, got: usize },
    #[error("duplicate variable declaration `{0}`")]
    DuplicateDecl(String),
}

/// Finite carrier of a lasso: positions `0..stem+loop`, where the last
/// position steps back to the first loop position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Carrier {
    pub stem_len: usize,
    pub loop_len: usize,
}

impl Carrier {
    pub fn new(stem_len: usize, loop_len: usize) -> Self {
        assert!(loop_len >= 1, "lasso loop must be non-empty");
        Carrier { stem_len, loop_len }
    }

    pub fn position_count(&self) -> usize {
        self.stem_len + self.loop_len
    }

    pub fn succ(&self, i: usize) -> usize {
        if i + 1 < self.position_count() {
            i + 1
        } else {
            self.stem_len
        }
    }

    /// Positions visited from `i` in path order, each exactly once.
    pub fn path_from(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let reachable = if i < self.stem_len { self.position_count() - i } else { self.loop_len };
        std::iter::successors(Some(i), move |&j| Some(self.succ(j))).take(reachable)
    }

    /// Carrier position of an arbitrary index into the infinite word.
    pub fn fold(&self, i: usize) -> usize {
        if i < self.stem_len {
            i
        } else {
            self.stem_len + (i - self.stem_len) % self.loop_len
        }
    }
}

/// An ultimately periodic word `stem · loop^ω`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LassoTrace {
    pub stem: Vec<Letter>,
    #[serde(rename = "loop")]
    pub cycle: Vec<Letter>,
}

impl LassoTrace {
    pub fn new(stem: Vec<Letter>, cycle: Vec<Letter>) -> Result<Self, TraceError> {
        if cycle.is_empty() {
            return Err(TraceError::EmptyLoop);
        }
        Ok(LassoTrace { stem, cycle })
    }

    pub fn carrier(&self) -> Carrier {
        Carrier::new(self.stem.len(), self.cycle.len())
    }

    /// Letter at index `i` of the infinite word.
    pub fn letter(&self, i: usize) -> &Letter {
        let pos = self.carrier().fold(i);
        if pos < self.stem.len() {
            &self.stem[pos]
        } else {
            &self.cycle[pos - self.stem.len()]
        }
    }

    pub fn contains(&self, i: usize, name: &str) -> bool {
        self.letter(i).contains(name)
    }

    /// First `n` letters of the infinite word.
    pub fn unroll(&self, n: usize) -> Vec<Letter> {
        (0..n).map(|i| self.letter(i).clone()).collect()
    }

    /// Restriction to the given names, e.g. the input projection.
    pub fn project<'a>(&self, names: impl IntoIterator<Item = &'a str> + Clone) -> LassoTrace {
        let keep = |l: &Letter| -> Letter {
            names.clone().into_iter().filter(|n| l.contains(*n)).map(str::to_string).collect()
        };
        LassoTrace { stem: self.stem.iter().map(keep).collect(), cycle: self.cycle.iter().map(keep).collect() }
    }
}

/// Letter from a list of names.
pub fn letter<'a>(names: impl IntoIterator<Item = &'a str>) -> Letter {
    names.into_iter().map(str::to_string).collect()
}

/// Binding of trace variables to shape-aligned lasso traces over a declared
/// alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceAssignment {
    decls: Vec<VarDecl>,
    binding: Vec<(String, LassoTrace)>,
    carrier: Carrier,
}

impl TraceAssignment {
    pub fn new(decls: Vec<VarDecl>, binding: Vec<(String, LassoTrace)>) -> Result<Self, TraceError> {
        check_decls(&decls)?;
        let first = binding.first().ok_or(TraceError::TraceCountMismatch { expected: 1, got: 0 })?;
        let carrier = first.1.carrier();
        if binding.iter().any(|(_, t)| t.carrier() != carrier) {
            return Err(TraceError::ShapeMismatch);
        }
        Ok(TraceAssignment { decls, binding, carrier })
    }

    pub fn decls(&self) -> &[VarDecl] {
        &self.decls
    }

    pub fn decl(&self, name: &str) -> Option<&VarDecl> {
        self.decls.iter().find(|d| d.name == name)
    }

    pub fn binding(&self) -> &[(String, LassoTrace)] {
        &self.binding
    }

    pub fn trace(&self, var: &str) -> Option<&LassoTrace> {
        self.binding.iter().find(|(v, _)| v == var).map(|(_, t)| t)
    }

    pub fn trace_vars(&self) -> Vec<&str> {
        self.binding.iter().map(|(v, _)| v.as_str()).collect()
    }

    pub fn carrier(&self) -> Carrier {
        self.carrier
    }

    pub fn stem_len(&self) -> usize {
        self.carrier.stem_len
    }

    pub fn loop_len(&self) -> usize {
        self.carrier.loop_len
    }

    pub fn position_count(&self) -> usize {
        self.carrier.position_count()
    }

    pub fn succ(&self, i: usize) -> usize {
        self.carrier.succ(i)
    }

    /// Value of `name` on trace `var` at carrier position `pos`; `None` when
    /// the trace variable or the proposition is not part of the assignment.
    pub fn value(&self, var: &str, name: &str, pos: usize) -> Option<bool> {
        self.decl(name)?;
        Some(self.trace(var)?.contains(pos, name))
    }

    /// Same traces bound to new variable names, in order.
    pub fn rebind(&self, vars: &[&str]) -> Result<Self, TraceError> {
        if vars.len() != self.binding.len() {
            return Err(TraceError::TraceCountMismatch { expected: self.binding.len(), got: vars.len() });
        }
        let binding = vars.iter().zip(&self.binding).map(|(v, (_, t))| (v.to_string(), t.clone())).collect();
        Ok(TraceAssignment { decls: self.decls.clone(), binding, carrier: self.carrier })
    }

    /// Serializes to the counterexample text format; only present values are
    /// listed.
    pub fn to_counterexample_text(&self) -> String {
        let mut out = format!("cex traces={} stem={} loop={}\n", self.binding.len(), self.stem_len(), self.loop_len());
        for (k, (_, t)) in self.binding.iter().enumerate() {
            for pos in 0..self.position_count() {
                for d in &self.decls {
                    if t.contains(pos, &d.name) {
                        let _ = writeln!(out, "{k} {pos} {} 1", d.name);
                    }
                }
            }
        }
        out
    }
}

fn check_decls(decls: &[VarDecl]) -> Result<(), TraceError> {
    let mut seen = BTreeSet::new();
    for d in decls {
        if !seen.insert(d.name.as_str()) {
            return Err(TraceError::DuplicateDecl(d.name.clone()));
        }
    }
    Ok(())
}

fn parse_header(line: &str, line_no: usize) -> Result<(usize, usize, usize), TraceError> {
    let bad = || TraceError::MalformedHeader(line_no);
    let mut words = line.split_whitespace();
    if words.next() != Some("cex") {
        return Err(bad());
    }
    let mut fields = [None::<usize>; 3];
    for w in words {
        let (key, value) = w.split_once('=').ok_or_else(bad)?;
        let idx = match key {
            "traces" => 0,
            "stem" => 1,
            "loop" => 2,
            _ => return Err(bad()),
        };
        if fields[idx].is_some() {
            return Err(bad());
        }
        fields[idx] = Some(value.parse().map_err(|_| bad())?);
    }
    match fields {
        [Some(k), Some(s), Some(l)] if k >= 1 && l >= 1 => Ok((k, s, l)),
        _ => Err(bad()),
    }
}

/// Parses a counterexample listing. Trace variables are named `t0`, `t1`, …
/// until rebound with [`TraceAssignment::rebind`].
pub fn parse_counterexample(text: &str, decls: &[VarDecl]) -> Result<TraceAssignment, TraceError> {
    check_decls(decls)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (header_no, header) = lines.next().ok_or(TraceError::MalformedHeader(1))?;
    let (traces, stem, cycle) = parse_header(header, header_no)?;
    let count = stem + cycle;

    let mut grid: Vec<Vec<Vec<Option<bool>>>> = vec![vec![vec![None; decls.len()]; count]; traces];
    for (line_no, line) in lines {
        let words: Vec<&str> = line.split_whitespace().collect();
        let [trace, step, var, value] = words[..] else {
            return Err(TraceError::MalformedLine(line_no));
        };
        let trace: usize = trace.parse().map_err(|_| TraceError::MalformedLine(line_no))?;
        let step: usize = step.parse().map_err(|_| TraceError::MalformedLine(line_no))?;
        let value = match value {
            "0" => false,
            "1" => true,
            _ => return Err(TraceError::MalformedLine(line_no)),
        };
        let var_idx = decls
            .iter()
            .position(|d| d.name == var)
            .ok_or_else(|| TraceError::UnknownVariable { line: line_no, name: var.to_string() })?;
        if trace >= traces || step >= count {
            return Err(TraceError::IndexOutOfRange(line_no));
        }
        let cell = &mut grid[trace][step][var_idx];
        if cell.is_some() {
            return Err(TraceError::DuplicateEntry(line_no));
        }
        *cell = Some(value);
    }

    let binding = grid
        .into_iter()
        .enumerate()
        .map(|(k, rows)| {
            let mut letters: Vec<Letter> = rows
                .into_iter()
                .map(|row| {
                    decls.iter().zip(row).filter(|(_, v)| *v == Some(true)).map(|(d, _)| d.name.clone()).collect()
                })
                .collect();
            let cycle_letters = letters.split_off(stem);
            (format!("t{k}"), LassoTrace { stem: letters, cycle: cycle_letters })
        })
        .collect();
    TraceAssignment::new(decls.to_vec(), binding)
}
