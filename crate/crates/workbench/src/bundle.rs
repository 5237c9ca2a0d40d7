//! The counterexample bundle handed to the analyst views.

use std::collections::BTreeSet;

use hypercex_core::explain::{CauseSet, ExplanationStatement, Verdict, VerdictMap};
use hypercex_core::formula::{QuantifiedFormula, SpanEntry};
use hypercex_core::machine::{Highlight, MooreMachine, StateId};
use hypercex_core::trace::{TraceAssignment, VarDecl, VarKind};
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = include_str!("../schema/bundle.schema.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Bundle {
    pub formula: FormulaInfo,
    pub var_decls: Vec<VarDecl>,
    pub stem_len: usize,
    pub loop_len: usize,
    pub traces: Vec<TraceInfo>,
    pub state_sequences: Vec<StateSequence>,
    pub causes: Vec<CauseEntry>,
    pub statements: Vec<StatementInfo>,
    pub verdicts: Vec<VerdictEntry>,
    pub relevant: Relevant,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dot: Option<String>,
    /// Why the state graph is missing, when it is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dot_unavailable: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulaInfo {
    pub text: String,
    pub nodes: Vec<SpanEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceInfo {
    pub var: String,
    /// Present propositions per position, in declaration order.
    pub stem: Vec<Vec<String>>,
    #[serde(rename = "loop")]
    pub cycle: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSequence {
    pub var: String,
    pub states: Vec<StateId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CauseEntry {
    pub trace: String,
    pub atom: String,
    pub t: usize,
    pub subformulas: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementInfo {
    #[serde(flatten)]
    pub statement: ExplanationStatement,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictEntry {
    pub id: usize,
    pub verdict: Verdict,
    pub positions: Vec<usize>,
}

/// Filter metadata: variables with at least one cause triple, by kind, and
/// the positions those triples touch.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relevant {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub latches: Vec<String>,
    pub positions: Vec<usize>,
    pub subformulas: Vec<usize>,
}

impl Bundle {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn statement_count(&self) -> usize {
        self.statements.len()
    }
}

/// Everything the pipeline has computed for one counterexample.
pub struct Parts<'a> {
    pub formula: &'a QuantifiedFormula,
    pub assignment: &'a TraceAssignment,
    pub states: &'a [(String, Vec<StateId>)],
    pub causes: &'a CauseSet,
    pub verdicts: &'a VerdictMap,
    pub statements: Vec<ExplanationStatement>,
    pub machine: Option<&'a MooreMachine>,
    pub dot_unavailable: Option<String>,
}

fn present(a: &TraceAssignment, var: &str, positions: std::ops::Range<usize>) -> Vec<Vec<String>> {
    let trace = a.trace(var).expect("bound trace");
    positions
        .map(|pos| a.decls().iter().filter(|d| trace.contains(pos, &d.name)).map(|d| d.name.clone()).collect())
        .collect()
}

fn run_highlight(a: &TraceAssignment, states: &[(String, Vec<StateId>)]) -> Highlight {
    let mut h = Highlight::default();
    let n = a.position_count();
    for (var, seq) in states {
        let class = format!("trace-{var}");
        for (pos, &s) in seq.iter().enumerate() {
            h.mark_state(s, &class);
            if pos + 1 < n {
                h.mark_edge(s, seq[pos + 1], &class);
            }
        }
        if let (Some(&last), Some(&back)) = (seq.last(), seq.get(a.stem_len())) {
            h.mark_edge(last, back, &class);
        }
    }
    h
}

pub fn assemble(p: Parts<'_>) -> Bundle {
    let f = p.formula;
    let a = p.assignment;
    let (stem, cycle) = (a.stem_len(), a.loop_len());

    let traces = a
        .trace_vars()
        .into_iter()
        .map(|var| TraceInfo {
            var: var.to_string(),
            stem: present(a, var, 0..stem),
            cycle: present(a, var, stem..stem + cycle),
        })
        .collect();

    let state_sequences =
        p.states.iter().map(|(var, states)| StateSequence { var: var.clone(), states: states.clone() }).collect();

    let causes: Vec<CauseEntry> = p
        .causes
        .triples
        .iter()
        .map(|tr| CauseEntry {
            trace: tr.trace.clone(),
            atom: tr.atom.clone(),
            t: tr.t,
            subformulas: p.causes.supporting.get(tr).map(|s| s.iter().copied().collect()).unwrap_or_default(),
        })
        .collect();

    let verdicts = p
        .verdicts
        .iter()
        .map(|(id, verdict)| VerdictEntry {
            id: id.0,
            verdict,
            positions: p.verdicts.anchors(id).iter().copied().collect(),
        })
        .collect();

    let mut relevant = Relevant::default();
    let names: BTreeSet<&str> = p.causes.triples.iter().map(|t| t.atom.as_str()).collect();
    for d in a.decls() {
        if names.contains(d.name.as_str()) {
            match d.kind {
                VarKind::Input => relevant.inputs.push(d.name.clone()),
                VarKind::Output => relevant.outputs.push(d.name.clone()),
                VarKind::Latch => relevant.latches.push(d.name.clone()),
            }
        }
    }
    relevant.positions = p.causes.triples.iter().map(|t| t.t).collect::<BTreeSet<_>>().into_iter().collect();
    relevant.subformulas =
        p.causes.supporting.values().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();

    let summary = format!(
        "{} traces over {} positions (stem {stem}, loop {cycle}) violate the formula; {} observations across {} variables explain the violation",
        a.binding().len(),
        a.position_count(),
        p.causes.len(),
        names.len(),
    );

    let dot = p.machine.map(|m| m.to_dot(Some(&run_highlight(a, p.states))));
    let statements = p.statements.into_iter().map(|s| StatementInfo { text: s.text(), statement: s }).collect();

    Bundle {
        formula: FormulaInfo { text: f.text().to_string(), nodes: f.span_table() },
        var_decls: a.decls().to_vec(),
        stem_len: stem,
        loop_len: cycle,
        traces,
        state_sequences,
        causes,
        statements,
        verdicts,
        relevant,
        summary,
        dot_unavailable: if dot.is_none() { p.dot_unavailable } else { None },
        dot,
    }
}
