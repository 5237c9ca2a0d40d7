//! Cause sets, verdicts and explanation statements for a violated body.
//!
//! A cause set is a set of observations `(trace, atom, position)` that forces
//! the body to false under Kleene evaluation, whatever the other observations
//! are.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{EvalError, Grounding, Kleene, Mask, Table, Triple};
use crate::formula::{NodeId, Op, QuantifiedFormula};
use crate::trace::TraceAssignment;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExplainError {
    #[error("the body holds on this assignment; there is nothing to explain")]
    NotViolated,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseSet {
    pub triples: BTreeSet<Triple>,
    /// Formula nodes on the path from the root to the atom occurrence that
    /// contributed each triple.
    pub supporting: BTreeMap<Triple, BTreeSet<usize>>,
}

impl CauseSet {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    pub fn mask(&self) -> Mask {
        self.triples.clone()
    }

    fn retain(&mut self, keep: impl Fn(&Triple) -> bool) {
        self.triples.retain(&keep);
        self.supporting.retain(|t, _| keep(t));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfied,
    Violated,
    Irrelevant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictMap {
    verdicts: Vec<Verdict>,
    /// Positions at which each node was consulted.
    anchors: Vec<BTreeSet<usize>>,
}

impl VerdictMap {
    pub fn get(&self, id: NodeId) -> Verdict {
        self.verdicts[id.0]
    }

    pub fn anchors(&self, id: NodeId) -> &BTreeSet<usize> {
        &self.anchors[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, Verdict)> + '_ {
        self.verdicts.iter().enumerate().map(|(i, v)| (NodeId(i), *v))
    }

    /// Marks nodes that support none of the triples in `cs` as irrelevant.
    pub fn restrict(&mut self, cs: &CauseSet) {
        let live: BTreeSet<usize> = cs.supporting.values().flatten().copied().collect();
        for (i, v) in self.verdicts.iter_mut().enumerate() {
            if !live.contains(&i) {
                *v = Verdict::Irrelevant;
                self.anchors[i].clear();
            }
        }
    }
}

struct Marker<'a> {
    f: &'a QuantifiedFormula,
    g: &'a Grounding<'a>,
    table: Table<bool>,
    seen: HashSet<(usize, usize)>,
    anchors: Vec<BTreeSet<usize>>,
    cause: CauseSet,
}

impl Marker<'_> {
    fn val(&self, id: NodeId, i: usize) -> bool {
        self.table.get(id, i)
    }

    /// Explains the actual value of `id` at `i`.
    fn explain(&mut self, id: NodeId, i: usize) {
        if !self.seen.insert((id.0, i)) {
            return;
        }
        self.anchors[id.0].insert(i);
        let node = self.f.node(id);
        let v = self.val(id, i);
        let kids = node.children.clone();
        let c = self.g.carrier();
        match node.op {
            Op::Atom(_) => {
                let (t, x) = self.g.slot(id).expect("bound atom");
                let triple = self.g.triple(t, x, i);
                let path: BTreeSet<usize> = self.f.path_to(id).into_iter().map(|n| n.0).collect();
                self.cause.triples.insert(triple.clone());
                self.cause.supporting.entry(triple).or_default().extend(path);
            }
            Op::Not | Op::Iff => kids.iter().for_each(|&k| self.explain(k, i)),
            Op::And | Op::Or => {
                // The value is decided by one child exactly when it equals
                // the absorbing element of the connective.
                let absorbing = matches!(node.op, Op::Or);
                if v == absorbing {
                    let k = *kids.iter().find(|&&k| self.val(k, i) == absorbing).unwrap();
                    self.explain(k, i);
                } else {
                    kids.iter().for_each(|&k| self.explain(k, i));
                }
            }
            Op::Implies => {
                if !v {
                    kids.iter().for_each(|&k| self.explain(k, i));
                } else if !self.val(kids[0], i) {
                    self.explain(kids[0], i);
                } else {
                    self.explain(kids[1], i);
                }
            }
            Op::Next => self.explain(kids[0], c.succ(i)),
            Op::Globally | Op::Eventually => {
                let decisive = matches!(node.op, Op::Eventually);
                let path: Vec<usize> = c.path_from(i).collect();
                if v == decisive {
                    let j = *path.iter().find(|&&j| self.val(kids[0], j) == decisive).unwrap();
                    self.explain(kids[0], j);
                } else {
                    path.into_iter().for_each(|j| self.explain(kids[0], j));
                }
            }
            Op::Until | Op::Release => {
                // U true and R false are witnessed by an earliest position of
                // the right operand; the other two cases run along the path
                // until the left operand cuts them off.
                let witness = matches!(node.op, Op::Until);
                let (l, r) = (kids[0], kids[1]);
                let path: Vec<usize> = c.path_from(i).collect();
                if v == witness {
                    for j in path {
                        self.explain(r, j);
                        if self.val(r, j) == witness {
                            break;
                        }
                        self.explain(l, j);
                    }
                } else {
                    for j in path {
                        self.explain(r, j);
                        if self.val(l, j) != witness {
                            self.explain(l, j);
                            break;
                        }
                    }
                }
            }
        }
    }
}

/// Cause set and verdicts for a body that is false at position 0.
pub fn mark_relevant(f: &QuantifiedFormula, a: &TraceAssignment) -> Result<(CauseSet, VerdictMap), ExplainError> {
    let g = Grounding::new(f, a)?;
    let table = g.table();
    if table.get(NodeId(0), 0) {
        return Err(ExplainError::NotViolated);
    }
    let mut m = Marker {
        f,
        g: &g,
        table,
        seen: HashSet::new(),
        anchors: vec![BTreeSet::new(); f.len()],
        cause: CauseSet::default(),
    };
    m.explain(NodeId(0), 0);
    let verdicts = (0..f.len())
        .map(|id| {
            let anchors = &m.anchors[id];
            if anchors.is_empty() {
                Verdict::Irrelevant
            } else if anchors.iter().any(|&i| !m.table.get(NodeId(id), i)) {
                Verdict::Violated
            } else {
                Verdict::Satisfied
            }
        })
        .collect();
    Ok((m.cause, VerdictMap { verdicts, anchors: m.anchors }))
}

/// Greedily drops triples, latest positions first, while the body stays
/// false under Kleene evaluation.
pub fn minimize(cs: &CauseSet, f: &QuantifiedFormula, a: &TraceAssignment) -> Result<CauseSet, ExplainError> {
    let g = Grounding::new(f, a)?;
    let mut known = g.known_set(&cs.triples);
    let mut order: Vec<&Triple> = cs.triples.iter().collect();
    order.sort_by(|x, y| (y.t, &y.atom, &y.trace).cmp(&(x.t, &x.atom, &x.trace)));
    let mut dropped = BTreeSet::new();
    for triple in order {
        let Some((t, x, i)) = g.index_of(triple) else {
            dropped.insert(triple.clone());
            continue;
        };
        known.remove(t, x, i);
        if g.table3(&known).get(NodeId(0), 0) == Kleene::False {
            dropped.insert(triple.clone());
        } else {
            known.insert(t, x, i);
        }
    }
    let mut out = cs.clone();
    out.retain(|t| !dropped.contains(t));
    Ok(out)
}

/// Minimized cause set with verdicts restricted to it.
pub fn explain(f: &QuantifiedFormula, a: &TraceAssignment) -> Result<(CauseSet, VerdictMap), ExplainError> {
    let (cs, mut vm) = mark_relevant(f, a)?;
    let cs = minimize(&cs, f, a)?;
    vm.restrict(&cs);
    Ok((cs, vm))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceRelation {
    Equal,
    Unequal,
    SingleTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Constancy {
    AlwaysTrue,
    AlwaysFalse,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AtomFact {
    pub atom_name: String,
    pub positions: Vec<usize>,
    pub trace_relation: TraceRelation,
    pub constancy: Constancy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExplanationStatement {
    pub statement_id: usize,
    pub color_index: usize,
    pub subformula_id: usize,
    pub temporal_operator: String,
    pub verdict: Verdict,
    pub atom_facts: Vec<AtomFact>,
}

impl ExplanationStatement {
    pub fn text(&self) -> String {
        let facts: Vec<String> = self
            .atom_facts
            .iter()
            .map(|fact| {
                let at: Vec<String> = fact.positions.iter().map(|p| format!("T{p}")).collect();
                let value = match fact.constancy {
                    Constancy::AlwaysTrue => "was true",
                    Constancy::AlwaysFalse => "was false",
                    Constancy::Mixed => "changed value",
                };
                let relation = match fact.trace_relation {
                    TraceRelation::Equal => " and equal on both traces",
                    TraceRelation::Unequal => " and unequal on both traces",
                    TraceRelation::SingleTrace => "",
                };
                format!("{} {value}{relation} at {}", fact.atom_name, at.join(", "))
            })
            .collect();
        format!("{}: {}", self.temporal_operator, facts.join("; "))
    }
}

/// Topmost temporal node at depth at most 2 on the path to `id`.
fn owner(f: &QuantifiedFormula, id: NodeId) -> Option<NodeId> {
    f.path_to(id).into_iter().find(|&n| f.node(n).op.is_temporal()).filter(|&n| f.node(n).depth <= 2)
}

/// Fact label of an atom occurrence: a Boolean comparison of two atoms is
/// reported as one fact named after both.
fn group(f: &QuantifiedFormula, id: NodeId) -> (NodeId, String) {
    let node = f.node(id);
    let atom_name = node.atom().expect("atom").name.clone();
    if let Some(p) = node.parent {
        let parent = f.node(p);
        let binary = matches!(parent.op, Op::And | Op::Or | Op::Implies | Op::Iff);
        let atoms: Vec<&str> =
            parent.children.iter().filter_map(|&k| f.node(k).atom()).map(|a| a.name.as_str()).collect();
        if binary && atoms.len() == 2 {
            let mut names: Vec<&str> = Vec::new();
            for n in atoms {
                if !names.contains(&n) {
                    names.push(n);
                }
            }
            return (parent.children[0], names.join("/"));
        }
    }
    (id, atom_name)
}

/// One statement per temporal node at depth at most 2 that owns a cause
/// triple, in subformula order.
pub fn generate_statements(
    f: &QuantifiedFormula,
    a: &TraceAssignment,
    cs: &CauseSet,
    vm: &VerdictMap,
) -> Vec<ExplanationStatement> {
    // statement node -> fact label -> (first node, triples)
    let mut owned: BTreeMap<NodeId, BTreeMap<String, (NodeId, BTreeSet<&Triple>)>> = BTreeMap::new();
    for node in f.nodes() {
        let Some(atom) = node.atom() else { continue };
        let Some(stmt) = owner(f, node.id) else { continue };
        let (first, label) = group(f, node.id);
        for triple in &cs.triples {
            let supports = cs.supporting.get(triple).is_some_and(|s| s.contains(&node.id.0));
            if supports && triple.atom == atom.name && triple.trace == atom.trace {
                let entry = owned.entry(stmt).or_default().entry(label.clone()).or_insert((first, BTreeSet::new()));
                entry.0 = entry.0.min(first);
                entry.1.insert(triple);
            }
        }
    }
    owned
        .into_iter()
        .enumerate()
        .map(|(ordinal, (stmt, facts))| {
            let mut facts: Vec<(NodeId, String, BTreeSet<&Triple>)> =
                facts.into_iter().map(|(label, (first, ts))| (first, label, ts)).collect();
            facts.sort_by_key(|(first, label, _)| (*first, label.clone()));
            ExplanationStatement {
                statement_id: ordinal,
                color_index: ordinal,
                subformula_id: stmt.0,
                temporal_operator: f.node(stmt).op.name().to_string(),
                verdict: vm.get(stmt),
                atom_facts: facts.into_iter().map(|(_, label, ts)| fact(a, label, &ts)).collect(),
            }
        })
        .collect()
}

fn fact(a: &TraceAssignment, name: String, triples: &BTreeSet<&Triple>) -> AtomFact {
    let value = |t: &Triple| a.value(&t.trace, &t.atom, t.t).unwrap_or(false);
    let positions: BTreeSet<usize> = triples.iter().map(|t| t.t).collect();
    let traces: BTreeSet<&str> = triples.iter().map(|t| t.trace.as_str()).collect();
    let mut shared = false;
    let mut all_equal = true;
    for &pos in &positions {
        let at: Vec<&&Triple> = triples.iter().filter(|t| t.t == pos).collect();
        let on: BTreeSet<&str> = at.iter().map(|t| t.trace.as_str()).collect();
        if on.len() > 1 {
            shared = true;
            let vals: BTreeSet<bool> = at.iter().map(|t| value(t)).collect();
            all_equal &= vals.len() == 1;
        }
    }
    let trace_relation = if traces.len() < 2 || !shared {
        TraceRelation::SingleTrace
    } else if all_equal {
        TraceRelation::Equal
    } else {
        TraceRelation::Unequal
    };
    let vals: BTreeSet<bool> = triples.iter().map(|t| value(t)).collect();
    let constancy = match (vals.contains(&true), vals.contains(&false)) {
        (true, false) => Constancy::AlwaysTrue,
        (false, true) => Constancy::AlwaysFalse,
        _ => Constancy::Mixed,
    };
    AtomFact { atom_name: name, positions: positions.into_iter().collect(), trace_relation, constancy }
}
