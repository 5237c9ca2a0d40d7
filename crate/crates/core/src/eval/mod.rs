//! Evaluation of quantifier-free bodies on lasso trace assignments.
//!
//! Every node is evaluated at every carrier position. Boolean connectives
//! and `X` are a single pass; `F`/`U` are least fixpoints started from false
//! and `G`/`R` greatest fixpoints started from true, iterated backwards over
//! the carrier until stable. The same engine runs over `bool` and over
//! [`Kleene`] values for masked evaluation.

pub mod oracle;
mod truth;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Atom, NodeId, Op, QuantifiedFormula};
use crate::trace::{Carrier, TraceAssignment};

pub use oracle::oracle_eval;
pub use truth::{Kleene, Truth};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("atom {0} is not bound by the trace assignment")]
    UnboundAtom(Atom),
    #[error("position {position} is outside the carrier of {count} positions")]
    PositionOutOfRange { position: usize, count: usize },
}

/// One observed value: proposition `atom` on trace `trace` at position `t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub trace: String,
    pub atom: String,
    pub t: usize,
}

impl Triple {
    pub fn new(trace: impl Into<String>, atom: impl Into<String>, t: usize) -> Self {
        Triple { trace: trace.into(), atom: atom.into(), t }
    }
}

/// Observations whose concrete values are visible to [`eval3`].
pub type Mask = BTreeSet<Triple>;

/// Values for every (node, position) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table<V> {
    rows: Vec<Vec<V>>,
}

impl<V: Copy> Table<V> {
    pub fn get(&self, node: NodeId, pos: usize) -> V {
        self.rows[node.0][pos]
    }

    pub fn row(&self, node: NodeId) -> &[V] {
        &self.rows[node.0]
    }
}

fn fixpoint<V: Truth>(row: &mut [V], carrier: Carrier, init: V, step: impl Fn(usize, V) -> V) {
    row.fill(init);
    loop {
        let mut changed = false;
        for i in (0..row.len()).rev() {
            let next = step(i, row[carrier.succ(i)]);
            if next != row[i] {
                row[i] = next;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Core engine; `atom` supplies the value of an atom node at a position.
pub(crate) fn solve<V: Truth>(
    f: &QuantifiedFormula,
    carrier: Carrier,
    mut atom: impl FnMut(NodeId, usize) -> V,
) -> Table<V> {
    let n = carrier.position_count();
    let mut rows: Vec<Vec<V>> = vec![Vec::new(); f.len()];
    // Children have larger preorder ids than their parents.
    for node in f.nodes().iter().rev() {
        let mut row = vec![V::FALSE; n];
        let child = |k: usize| &rows[node.children[k].0];
        match node.op {
            Op::Atom(_) => {
                for (i, v) in row.iter_mut().enumerate() {
                    *v = atom(node.id, i);
                }
            }
            Op::Not => row.iter_mut().zip(child(0)).for_each(|(v, &a)| *v = a.not()),
            Op::And | Op::Or | Op::Implies | Op::Iff => {
                let (l, r) = (child(0), child(1));
                for i in 0..n {
                    row[i] = match node.op {
                        Op::And => l[i].and(r[i]),
                        Op::Or => l[i].or(r[i]),
                        Op::Implies => l[i].implies(r[i]),
                        _ => l[i].iff(r[i]),
                    };
                }
            }
            Op::Next => {
                let c = child(0);
                for (i, v) in row.iter_mut().enumerate() {
                    *v = c[carrier.succ(i)];
                }
            }
            Op::Globally => {
                let c = child(0);
                fixpoint(&mut row, carrier, V::TRUE, |i, later| c[i].and(later));
            }
            Op::Eventually => {
                let c = child(0);
                fixpoint(&mut row, carrier, V::FALSE, |i, later| c[i].or(later));
            }
            Op::Until => {
                let (l, r) = (child(0), child(1));
                fixpoint(&mut row, carrier, V::FALSE, |i, later| r[i].or(l[i].and(later)));
            }
            Op::Release => {
                let (l, r) = (child(0), child(1));
                fixpoint(&mut row, carrier, V::TRUE, |i, later| r[i].and(l[i].or(later)));
            }
        }
        rows[node.id.0] = row;
    }
    Table { rows }
}

/// Atoms of a formula resolved against an assignment: concrete values laid
/// out as `[trace][proposition][position]`.
#[derive(Debug, Clone)]
pub struct Grounding<'a> {
    formula: &'a QuantifiedFormula,
    carrier: Carrier,
    slots: Vec<Option<(usize, usize)>>,
    trace_vars: Vec<String>,
    names: Vec<String>,
    values: Vec<Vec<Vec<bool>>>,
}

impl<'a> Grounding<'a> {
    pub fn new(formula: &'a QuantifiedFormula, a: &TraceAssignment) -> Result<Self, EvalError> {
        let trace_vars: Vec<String> = a.trace_vars().into_iter().map(str::to_string).collect();
        let names: Vec<String> = a.decls().iter().map(|d| d.name.clone()).collect();
        let mut slots = vec![None; formula.len()];
        for node in formula.nodes() {
            if let Some(atom) = node.atom() {
                let t = trace_vars.iter().position(|v| *v == atom.trace);
                let x = names.iter().position(|n| *n == atom.name);
                match (t, x) {
                    (Some(t), Some(x)) => slots[node.id.0] = Some((t, x)),
                    _ => return Err(EvalError::UnboundAtom(atom.clone())),
                }
            }
        }
        let carrier = a.carrier();
        let values = a
            .binding()
            .iter()
            .map(|(_, trace)| {
                names
                    .iter()
                    .map(|name| (0..carrier.position_count()).map(|i| trace.contains(i, name)).collect())
                    .collect()
            })
            .collect();
        Ok(Grounding { formula, carrier, slots, trace_vars, names, values })
    }

    pub fn carrier(&self) -> Carrier {
        self.carrier
    }

    pub fn formula(&self) -> &'a QuantifiedFormula {
        self.formula
    }

    /// `(trace index, proposition index)` of an atom node.
    pub fn slot(&self, node: NodeId) -> Option<(usize, usize)> {
        self.slots[node.0]
    }

    pub fn trace_var(&self, t: usize) -> &str {
        &self.trace_vars[t]
    }

    pub fn name(&self, x: usize) -> &str {
        &self.names[x]
    }

    pub fn trace_count(&self) -> usize {
        self.trace_vars.len()
    }

    pub fn name_count(&self) -> usize {
        self.names.len()
    }

    pub fn value(&self, t: usize, x: usize, pos: usize) -> bool {
        self.values[t][x][pos]
    }

    pub fn index_of(&self, triple: &Triple) -> Option<(usize, usize, usize)> {
        let t = self.trace_vars.iter().position(|v| *v == triple.trace)?;
        let x = self.names.iter().position(|n| *n == triple.atom)?;
        (triple.t < self.carrier.position_count()).then_some((t, x, triple.t))
    }

    pub fn triple(&self, t: usize, x: usize, pos: usize) -> Triple {
        Triple::new(&self.trace_vars[t], &self.names[x], pos)
    }

    pub fn table(&self) -> Table<bool> {
        solve(self.formula, self.carrier, |id, i| {
            let (t, x) = self.slots[id.0].expect("atom slot");
            self.values[t][x][i]
        })
    }

    /// Kleene evaluation where only observations in `known` are visible.
    pub fn table3(&self, known: &KnownSet) -> Table<Kleene> {
        solve(self.formula, self.carrier, |id, i| {
            let (t, x) = self.slots[id.0].expect("atom slot");
            if known.contains(t, x, i) {
                Kleene::from(self.values[t][x][i])
            } else {
                Kleene::Unknown
            }
        })
    }

    pub fn known_set(&self, mask: &Mask) -> KnownSet {
        let mut k = KnownSet::new(self.trace_count(), self.name_count(), self.carrier.position_count());
        for triple in mask {
            if let Some((t, x, i)) = self.index_of(triple) {
                k.insert(t, x, i);
            }
        }
        k
    }
}

/// Dense membership set over `(trace, proposition, position)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnownSet {
    names: usize,
    positions: usize,
    bits: Vec<bool>,
}

impl KnownSet {
    pub fn new(traces: usize, names: usize, positions: usize) -> Self {
        KnownSet { names, positions, bits: vec![false; traces * names * positions] }
    }

    fn idx(&self, t: usize, x: usize, i: usize) -> usize {
        (t * self.names + x) * self.positions + i
    }

    pub fn contains(&self, t: usize, x: usize, i: usize) -> bool {
        self.bits[self.idx(t, x, i)]
    }

    pub fn insert(&mut self, t: usize, x: usize, i: usize) {
        let k = self.idx(t, x, i);
        self.bits[k] = true;
    }

    pub fn remove(&mut self, t: usize, x: usize, i: usize) {
        let k = self.idx(t, x, i);
        self.bits[k] = false;
    }
}

fn check_position(a: &TraceAssignment, i: usize) -> Result<(), EvalError> {
    if i < a.position_count() {
        Ok(())
    } else {
        Err(EvalError::PositionOutOfRange { position: i, count: a.position_count() })
    }
}

/// Truth of the body of `f` on the suffix of the assignment at position `i`.
pub fn eval(f: &QuantifiedFormula, a: &TraceAssignment, i: usize) -> Result<bool, EvalError> {
    check_position(a, i)?;
    Ok(Grounding::new(f, a)?.table().get(NodeId(0), i))
}

/// Two-valued values of every subformula at every position.
pub fn eval_table(f: &QuantifiedFormula, a: &TraceAssignment) -> Result<Table<bool>, EvalError> {
    Ok(Grounding::new(f, a)?.table())
}

/// Kleene value of the body at position 0 when only `mask` is observed.
pub fn eval3(f: &QuantifiedFormula, a: &TraceAssignment, mask: &Mask) -> Result<Kleene, EvalError> {
    let g = Grounding::new(f, a)?;
    Ok(g.table3(&g.known_set(mask)).get(NodeId(0), 0))
}

/// Every observation of every declared proposition on every bound trace.
pub fn full_mask(a: &TraceAssignment) -> Mask {
    let mut m = Mask::new();
    for var in a.trace_vars() {
        for d in a.decls() {
            for t in 0..a.position_count() {
                m.insert(Triple::new(var, &d.name, t));
            }
        }
    }
    m
}
