//! Deterministic, input-complete Moore machines.
//!
//! Machines come either from the JSON format
//!
//! ```json
//! {"aps": {"inputs": ["i"], "outputs": ["o"]},
//!  "states": [{"id": 0, "outputs": []}, {"id": 1, "outputs": ["o"]}],
//!  "initial": 0,
//!  "edges": [{"src": 0, "dst": 1, "guard": {"i": 1}}, ...]}
//! ```
//!
//! where each edge guard is a single cube, or from an AIGER circuit by
//! reachability over latch valuations.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aiger::AigCircuit;
use crate::trace::{Letter, VarDecl, VarKind};

pub type StateId = u32;

/// Input-widths above this are rejected by anything that enumerates
/// valuations.
pub const MAX_INPUTS: usize = 16;

#[derive(Debug, Error)]
pub enum MachineError {
    #[error("invalid machine JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("state {0} declared twice")]
    DuplicateState(StateId),
    #[error("unknown state {0}")]
    UnknownState(StateId),
    #[error("unknown input `{0}` in guard")]
    UnknownInput(String),
    #[error("unknown output `{0}` in state label")]
    UnknownOutput(String),
    #[error("guard literal for `{0}` must be 0 or 1")]
    BadGuardValue(String),
    #[error("proposition `{0}` declared twice")]
    DuplicateProposition(String),
    #[error("state {state}: several edges enabled under {valuation}")]
    NondeterministicGuards { state: StateId, valuation: String },
    #[error("state {state}: no edge enabled under {valuation}")]
    PartialGuards { state: StateId, valuation: String },
    #[error("{count} inputs exceed the supported maximum of {max}")]
    TooManyInputs { count: usize, max: usize },
    #[error("output `{0}` depends combinationally on inputs")]
    OutputDependsOnInputs(String),
    #[error("more than {0} reachable states")]
    StateBudgetExceeded(usize),
}

/// A conjunction of input literals, aligned with the machine inputs;
/// `None` is a don't-care.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cube(pub Vec<Option<bool>>);

impl Cube {
    pub fn matches(&self, valuation: &[bool]) -> bool {
        self.0.iter().zip(valuation).all(|(c, v)| c.is_none_or(|c| c == *v))
    }

    pub fn text(&self, inputs: &[String]) -> String {
        let lits: Vec<String> = self
            .0
            .iter()
            .zip(inputs)
            .filter_map(|(c, name)| c.map(|b| if b { name.clone() } else { format!("!{name}") }))
            .collect();
        if lits.is_empty() {
            "*".to_string()
        } else {
            lits.join(" & ")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MooreState {
    pub id: StateId,
    pub outputs: BTreeSet<String>,
    /// Latch names that are high; empty for machines read from JSON.
    pub latches: BTreeSet<String>,
}

/// All transitions from `src` to `dst`, as a disjunction of cubes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub src: StateId,
    pub dst: StateId,
    pub guard: Vec<Cube>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MooreMachine {
    inputs: Vec<String>,
    outputs: Vec<String>,
    latch_names: Vec<String>,
    states: Vec<MooreState>,
    initial: usize,
    edges: Vec<Edge>,
    /// `delta[state index][valuation index]` as a state index.
    delta: Vec<Vec<usize>>,
}

/// Input valuation for index `v`; the first input is the most significant bit.
pub fn valuation(v: usize, width: usize) -> Vec<bool> {
    (0..width).map(|j| (v >> (width - 1 - j)) & 1 == 1).collect()
}

pub fn valuation_index(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

fn valuation_text(inputs: &[String], v: usize) -> String {
    let bits = valuation(v, inputs.len());
    if bits.is_empty() {
        return "the empty valuation".into();
    }
    inputs.iter().zip(bits).map(|(n, b)| format!("{n}={}", b as u8)).collect::<Vec<_>>().join(",")
}

/// Cube cover of the valuations for which `member` holds, merging Shannon
/// cofactors that agree.
pub fn cover(member: &[bool], width: usize) -> Vec<Cube> {
    fn go(bits: &[bool], prefix: &mut Vec<Option<bool>>, width: usize, out: &mut Vec<Cube>) {
        if bits.iter().all(|b| !b) {
            return;
        }
        if bits.iter().all(|&b| b) {
            let mut c = prefix.clone();
            c.resize(width, None);
            out.push(Cube(c));
            return;
        }
        let (lo, hi) = bits.split_at(bits.len() / 2);
        if lo == hi {
            prefix.push(None);
            go(lo, prefix, width, out);
        } else {
            prefix.push(Some(false));
            go(lo, prefix, width, out);
            prefix.pop();
            prefix.push(Some(true));
            go(hi, prefix, width, out);
        }
        prefix.pop();
    }
    assert_eq!(member.len(), 1 << width);
    let mut out = Vec::new();
    go(member, &mut Vec::new(), width, &mut out);
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonMachine {
    aps: JsonAps,
    states: Vec<JsonState>,
    initial: StateId,
    edges: Vec<JsonEdge>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonAps {
    inputs: Vec<String>,
    outputs: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonState {
    id: StateId,
    #[serde(default)]
    outputs: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonEdge {
    src: StateId,
    dst: StateId,
    #[serde(default)]
    guard: BTreeMap<String, u8>,
}

pub fn parse_machine_json(text: &str) -> Result<MooreMachine, MachineError> {
    let raw: JsonMachine = serde_json::from_str(text)?;
    let mut names = BTreeSet::new();
    for n in raw.aps.inputs.iter().chain(&raw.aps.outputs) {
        if !names.insert(n.as_str()) {
            return Err(MachineError::DuplicateProposition(n.clone()));
        }
    }
    let mut states = Vec::new();
    let mut ids = BTreeSet::new();
    for s in raw.states {
        if !ids.insert(s.id) {
            return Err(MachineError::DuplicateState(s.id));
        }
        if let Some(o) = s.outputs.iter().find(|o| !raw.aps.outputs.contains(o)) {
            return Err(MachineError::UnknownOutput(o.clone()));
        }
        states.push(MooreState { id: s.id, outputs: s.outputs.into_iter().collect(), latches: BTreeSet::new() });
    }
    let mut edges = Vec::new();
    for e in raw.edges {
        for id in [e.src, e.dst] {
            if !ids.contains(&id) {
                return Err(MachineError::UnknownState(id));
            }
        }
        let mut cube = vec![None; raw.aps.inputs.len()];
        for (name, value) in e.guard {
            let j = raw
                .aps
                .inputs
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| MachineError::UnknownInput(name.clone()))?;
            cube[j] = match value {
                0 => Some(false),
                1 => Some(true),
                _ => return Err(MachineError::BadGuardValue(name)),
            };
        }
        edges.push((e.src, e.dst, Cube(cube)));
    }
    if !ids.contains(&raw.initial) {
        return Err(MachineError::UnknownState(raw.initial));
    }
    MooreMachine::new(raw.aps.inputs, raw.aps.outputs, Vec::new(), states, raw.initial, edges)
}

impl MooreMachine {
    /// Builds a machine from single-cube edges. Every valuation must enable
    /// exactly one edge per state; edges sharing `(src, dst)` are merged.
    pub fn new(
        inputs: Vec<String>,
        outputs: Vec<String>,
        latch_names: Vec<String>,
        states: Vec<MooreState>,
        initial: StateId,
        edges: Vec<(StateId, StateId, Cube)>,
    ) -> Result<Self, MachineError> {
        if inputs.len() > MAX_INPUTS {
            return Err(MachineError::TooManyInputs { count: inputs.len(), max: MAX_INPUTS });
        }
        let index: HashMap<StateId, usize> = states.iter().enumerate().map(|(k, s)| (s.id, k)).collect();
        let lookup = |id: StateId| index.get(&id).copied().ok_or(MachineError::UnknownState(id));
        let initial = lookup(initial)?;
        let width = inputs.len();
        let mut delta = vec![vec![usize::MAX; 1 << width]; states.len()];
        let mut merged: BTreeMap<(StateId, StateId), Vec<Cube>> = BTreeMap::new();
        for (src, dst, cube) in edges {
            let (s, d) = (lookup(src)?, lookup(dst)?);
            for (v, slot) in delta[s].iter_mut().enumerate() {
                if cube.matches(&valuation(v, width)) {
                    if *slot != usize::MAX {
                        return Err(MachineError::NondeterministicGuards {
                            state: src,
                            valuation: valuation_text(&inputs, v),
                        });
                    }
                    *slot = d;
                }
            }
            merged.entry((src, dst)).or_default().push(cube);
        }
        for (s, row) in delta.iter().enumerate() {
            if let Some(v) = row.iter().position(|&d| d == usize::MAX) {
                return Err(MachineError::PartialGuards { state: states[s].id, valuation: valuation_text(&inputs, v) });
            }
        }
        let edges = merged.into_iter().map(|((src, dst), guard)| Edge { src, dst, guard }).collect();
        Ok(MooreMachine { inputs, outputs, latch_names, states, initial, edges, delta })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn latch_names(&self) -> &[String] {
        &self.latch_names
    }

    pub fn states(&self) -> &[MooreState] {
        &self.states
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn initial(&self) -> StateId {
        self.states[self.initial].id
    }

    pub fn initial_index(&self) -> usize {
        self.initial
    }

    pub fn state_index(&self, id: StateId) -> Option<usize> {
        self.states.iter().position(|s| s.id == id)
    }

    pub fn state(&self, id: StateId) -> Option<&MooreState> {
        self.state_index(id).map(|k| &self.states[k])
    }

    /// Successor state index under input valuation index `v`.
    pub fn delta(&self, state: usize, v: usize) -> usize {
        self.delta[state][v]
    }

    pub fn step(&self, id: StateId, inputs: &[bool]) -> Option<StateId> {
        let k = self.state_index(id)?;
        Some(self.states[self.delta(k, valuation_index(inputs))].id)
    }

    /// Outputs and high latches of a state.
    pub fn label(&self, state: usize) -> Letter {
        let s = &self.states[state];
        s.outputs.iter().chain(&s.latches).cloned().collect()
    }

    /// Trace alphabet: inputs, outputs, then latches.
    pub fn decls(&self) -> Vec<VarDecl> {
        let mut d: Vec<VarDecl> = self.inputs.iter().map(|n| VarDecl::new(n, VarKind::Input)).collect();
        d.extend(self.outputs.iter().map(|n| VarDecl::new(n, VarKind::Output)));
        d.extend(self.latch_names.iter().map(|n| VarDecl::new(n, VarKind::Latch)));
        d
    }

    pub fn guard_text(&self, edge: &Edge) -> String {
        edge.guard.iter().map(|c| c.text(&self.inputs)).collect::<Vec<_>>().join(" | ")
    }

    pub fn to_dot(&self, highlight: Option<&Highlight>) -> String {
        let mut out = String::from("digraph moore {\n  rankdir=LR;\n  node [shape=circle];\n");
        out.push_str("  init [shape=point, label=\"\"];\n");
        let _ = writeln!(out, "  init -> S{};", self.initial());
        let mut states: Vec<&MooreState> = self.states.iter().collect();
        states.sort_by_key(|s| s.id);
        for s in states {
            let label: Vec<&str> = s.outputs.iter().map(String::as_str).collect();
            let _ = write!(out, "  S{} [label=\"S{}\\n{{{}}}\"", s.id, s.id, label.join(", "));
            if let Some(c) = highlight.and_then(|h| h.states.get(&s.id)) {
                let _ = write!(out, ", class=\"{}\"", join_classes(c));
            }
            out.push_str("];\n");
        }
        let mut edges: Vec<(StateId, String, StateId)> =
            self.edges.iter().map(|e| (e.src, self.guard_text(e), e.dst)).collect();
        edges.sort();
        for (src, guard, dst) in edges {
            let _ = write!(out, "  S{src} -> S{dst} [label=\"{guard}\"");
            if let Some(c) = highlight.and_then(|h| h.edges.get(&(src, dst))) {
                let _ = write!(out, ", class=\"{}\"", join_classes(c));
            }
            out.push_str("];\n");
        }
        out.push_str("}\n");
        out
    }
}

impl fmt::Display for MooreMachine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dot(None))
    }
}

fn join_classes(c: &BTreeSet<String>) -> String {
    c.iter().map(String::as_str).collect::<Vec<_>>().join(" ")
}

/// CSS classes attached to states and edges in DOT output.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Highlight {
    pub states: BTreeMap<StateId, BTreeSet<String>>,
    pub edges: BTreeMap<(StateId, StateId), BTreeSet<String>>,
}

impl Highlight {
    pub fn mark_state(&mut self, s: StateId, class: &str) {
        self.states.entry(s).or_default().insert(class.to_string());
    }

    pub fn mark_edge(&mut self, src: StateId, dst: StateId, class: &str) {
        self.edges.entry((src, dst)).or_default().insert(class.to_string());
    }
}

/// Explores latch valuations reachable from reset in breadth-first order,
/// visiting input valuations lexicographically. States are numbered in
/// discovery order.
pub fn extract_moore(c: &AigCircuit, max_states: usize) -> Result<MooreMachine, MachineError> {
    let width = c.inputs.len();
    if width > MAX_INPUTS {
        return Err(MachineError::TooManyInputs { count: width, max: MAX_INPUTS });
    }
    let mut ids: HashMap<Vec<bool>, StateId> = HashMap::new();
    let mut order: Vec<Vec<bool>> = Vec::new();
    let mut queue = VecDeque::new();
    let init = c.initial_state();
    ids.insert(init.clone(), 0);
    order.push(init.clone());
    queue.push_back(init);
    let mut states = Vec::new();
    let mut edges = Vec::new();
    while let Some(latches) = queue.pop_front() {
        let src = ids[&latches];
        let mut label: Option<Vec<bool>> = None;
        let mut targets: Vec<StateId> = Vec::with_capacity(1 << width);
        for v in 0..1usize << width {
            let (next, outs) = c.next_and_outputs(&latches, &valuation(v, width));
            match &label {
                None => label = Some(outs),
                Some(l) => {
                    if let Some(k) = l.iter().zip(&outs).position(|(a, b)| a != b) {
                        return Err(MachineError::OutputDependsOnInputs(c.outputs[k].name.clone()));
                    }
                }
            }
            let dst = match ids.get(&next) {
                Some(&d) => d,
                None => {
                    if order.len() >= max_states {
                        return Err(MachineError::StateBudgetExceeded(max_states));
                    }
                    let d = order.len() as StateId;
                    ids.insert(next.clone(), d);
                    order.push(next.clone());
                    queue.push_back(next);
                    d
                }
            };
            targets.push(dst);
        }
        let label = label.expect("at least one valuation");
        states.push(MooreState {
            id: src,
            outputs: c.outputs.iter().zip(&label).filter(|(_, b)| **b).map(|(o, _)| o.name.clone()).collect(),
            latches: c.latches.iter().zip(&latches).filter(|(_, b)| **b).map(|(l, _)| l.name.clone()).collect(),
        });
        let mut dsts: Vec<StateId> = targets.clone();
        dsts.sort();
        dsts.dedup();
        for dst in dsts {
            let member: Vec<bool> = targets.iter().map(|&t| t == dst).collect();
            for cube in cover(&member, width) {
                edges.push((src, dst, cube));
            }
        }
    }
    let names = |v: Vec<&str>| v.into_iter().map(str::to_string).collect::<Vec<_>>();
    let mut outputs = names(c.output_names());
    let mut seen = BTreeSet::new();
    outputs.retain(|o| seen.insert(o.clone()));
    MooreMachine::new(names(c.input_names()), outputs, names(c.latch_names()), states, 0, edges)
}
