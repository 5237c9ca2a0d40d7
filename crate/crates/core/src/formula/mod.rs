//! HyperLTL formulas.
//!
//! A [`QuantifiedFormula`] is a quantifier prefix plus a body stored as a flat
//! arena of [`FormulaNode`]s numbered in preorder. Every node carries its span
//! in the canonical ASCII rendering, its depth below the body root and its
//! parent, so views can map text positions to subformulas without re-parsing.

mod parser;
mod render;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parser::parse_formula;
pub use render::{render_formula, to_polish};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("syntax error at {position}: expected {expected}")]
    Syntax { position: usize, expected: String },
    #[error("atom refers to unbound trace variable `{0}`")]
    UnboundTraceVar(String),
    #[error("trace variable `{0}` is quantified twice")]
    DuplicateTraceVar(String),
    #[error("formula has an empty quantifier prefix")]
    EmptyPrefix,
    #[error("no subformula with id {0}")]
    UnknownId(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantifier {
    Forall,
    Exists,
}

impl Quantifier {
    pub fn keyword(self) -> &'static str {
        match self {
            Quantifier::Forall => "forall",
            Quantifier::Exists => "exists",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Binder {
    pub quantifier: Quantifier,
    pub var: String,
}

impl Binder {
    pub fn forall(var: impl Into<String>) -> Self {
        Binder { quantifier: Quantifier::Forall, var: var.into() }
    }

    pub fn exists(var: impl Into<String>) -> Self {
        Binder { quantifier: Quantifier::Exists, var: var.into() }
    }
}

/// An atomic proposition indexed by a trace variable, `name[trace]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub name: String,
    pub trace: String,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.name, self.trace)
    }
}

/// Tree-shaped body used for construction; indexed into a [`QuantifiedFormula`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Atom(Atom),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Implies(Box<Expr>, Box<Expr>),
    Iff(Box<Expr>, Box<Expr>),
    Next(Box<Expr>),
    Globally(Box<Expr>),
    Eventually(Box<Expr>),
    Until(Box<Expr>, Box<Expr>),
    Release(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn atom(name: impl Into<String>, trace: impl Into<String>) -> Self {
        Expr::Atom(Atom { name: name.into(), trace: trace.into() })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Self {
        Expr::Not(Box::new(e))
    }

    pub fn and(l: Expr, r: Expr) -> Self {
        Expr::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Expr, r: Expr) -> Self {
        Expr::Or(Box::new(l), Box::new(r))
    }

    pub fn implies(l: Expr, r: Expr) -> Self {
        Expr::Implies(Box::new(l), Box::new(r))
    }

    pub fn iff(l: Expr, r: Expr) -> Self {
        Expr::Iff(Box::new(l), Box::new(r))
    }

    pub fn next(e: Expr) -> Self {
        Expr::Next(Box::new(e))
    }

    pub fn globally(e: Expr) -> Self {
        Expr::Globally(Box::new(e))
    }

    pub fn eventually(e: Expr) -> Self {
        Expr::Eventually(Box::new(e))
    }

    pub fn until(l: Expr, r: Expr) -> Self {
        Expr::Until(Box::new(l), Box::new(r))
    }

    pub fn release(l: Expr, r: Expr) -> Self {
        Expr::Release(Box::new(l), Box::new(r))
    }

    fn split(&self) -> (Op, Vec<&Expr>) {
        match self {
            Expr::Atom(a) => (Op::Atom(a.clone()), vec![]),
            Expr::Not(e) => (Op::Not, vec![e]),
            Expr::Next(e) => (Op::Next, vec![e]),
            Expr::Globally(e) => (Op::Globally, vec![e]),
            Expr::Eventually(e) => (Op::Eventually, vec![e]),
            Expr::And(l, r) => (Op::And, vec![l, r]),
            Expr::Or(l, r) => (Op::Or, vec![l, r]),
            Expr::Implies(l, r) => (Op::Implies, vec![l, r]),
            Expr::Iff(l, r) => (Op::Iff, vec![l, r]),
            Expr::Until(l, r) => (Op::Until, vec![l, r]),
            Expr::Release(l, r) => (Op::Release, vec![l, r]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Op {
    Atom(Atom),
    Not,
    And,
    Or,
    Implies,
    Iff,
    Next,
    Globally,
    Eventually,
    Until,
    Release,
}

impl Op {
    pub fn is_temporal(&self) -> bool {
        matches!(self, Op::Next | Op::Globally | Op::Eventually | Op::Until | Op::Release)
    }

    /// Operator name used in the bundle node table and in statements.
    pub fn name(&self) -> &'static str {
        match self {
            Op::Atom(_) => "atom",
            Op::Not => "not",
            Op::And => "and",
            Op::Or => "or",
            Op::Implies => "implies",
            Op::Iff => "iff",
            Op::Next => "X",
            Op::Globally => "G",
            Op::Eventually => "F",
            Op::Until => "U",
            Op::Release => "R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Half-open character range into the canonical rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FormulaNode {
    pub id: NodeId,
    pub op: Op,
    pub children: Vec<NodeId>,
    pub span: Span,
    pub depth: usize,
    pub parent: Option<NodeId>,
}

impl FormulaNode {
    pub fn atom(&self) -> Option<&Atom> {
        match &self.op {
            Op::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn child(&self, k: usize) -> NodeId {
        self.children[k]
    }
}

/// One row of the span table handed to the formula view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanEntry {
    pub id: usize,
    pub op: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    pub start: usize,
    pub end: usize,
    pub depth: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantifiedFormula {
    prefix: Vec<Binder>,
    nodes: Vec<FormulaNode>,
    text: String,
}

impl QuantifiedFormula {
    /// Validates the prefix and the body, numbers the body in preorder and
    /// computes spans against the canonical rendering.
    pub fn new(prefix: Vec<Binder>, body: Expr) -> Result<Self, FormulaError> {
        if prefix.is_empty() {
            return Err(FormulaError::EmptyPrefix);
        }
        let mut seen = BTreeSet::new();
        for b in &prefix {
            if !seen.insert(b.var.as_str()) {
                return Err(FormulaError::DuplicateTraceVar(b.var.clone()));
            }
        }

        let mut nodes = Vec::new();
        let mut stack = vec![(&body, None::<NodeId>, 0usize)];
        // Children are pushed in reverse so they pop left-to-right, which
        // keeps the numbering preorder.
        while let Some((expr, parent, depth)) = stack.pop() {
            let id = NodeId(nodes.len());
            let (op, kids) = expr.split();
            if let Op::Atom(a) = &op {
                if !seen.contains(a.trace.as_str()) {
                    return Err(FormulaError::UnboundTraceVar(a.trace.clone()));
                }
            }
            if let Some(p) = parent {
                let parent_node: &mut FormulaNode = &mut nodes[p.0];
                parent_node.children.push(id);
            }
            nodes.push(FormulaNode {
                id,
                op,
                children: Vec::with_capacity(kids.len()),
                span: Span::default(),
                depth,
                parent,
            });
            for k in kids.into_iter().rev() {
                stack.push((k, Some(id), depth + 1));
            }
        }
        let mut f = QuantifiedFormula { prefix, nodes, text: String::new() };
        let (text, spans) = render::render_with_spans(&f);
        for (node, span) in f.nodes.iter_mut().zip(spans) {
            node.span = span;
        }
        f.text = text;
        Ok(f)
    }

    pub fn prefix(&self) -> &[Binder] {
        &self.prefix
    }

    pub fn trace_vars(&self) -> Vec<&str> {
        self.prefix.iter().map(|b| b.var.as_str()).collect()
    }

    pub fn trace_index(&self, var: &str) -> Option<usize> {
        self.prefix.iter().position(|b| b.var == var)
    }

    pub fn is_universal(&self) -> bool {
        self.prefix.iter().all(|b| b.quantifier == Quantifier::Forall)
    }

    pub fn nodes(&self) -> &[FormulaNode] {
        &self.nodes
    }

    pub fn root(&self) -> &FormulaNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &FormulaNode {
        &self.nodes[id.0]
    }

    pub fn subformula_at(&self, id: usize) -> Result<&FormulaNode, FormulaError> {
        self.nodes.get(id).ok_or(FormulaError::UnknownId(id))
    }

    /// Canonical single-line ASCII rendering.
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn span_table(&self) -> Vec<SpanEntry> {
        self.nodes
            .iter()
            .map(|n| SpanEntry {
                id: n.id.0,
                op: n.op.name().to_string(),
                atom: n.atom().map(|a| a.name.clone()),
                trace: n.atom().map(|a| a.trace.clone()),
                start: n.span.start,
                end: n.span.end,
                depth: n.depth,
                parent: n.parent.map(|p| p.0),
            })
            .collect()
    }

    /// Rebuilds the tree form of the body rooted at `id`.
    pub fn to_expr(&self, id: NodeId) -> Expr {
        let n = self.node(id);
        let sub = |k: usize| Box::new(self.to_expr(n.children[k]));
        match &n.op {
            Op::Atom(a) => Expr::Atom(a.clone()),
            Op::Not => Expr::Not(sub(0)),
            Op::Next => Expr::Next(sub(0)),
            Op::Globally => Expr::Globally(sub(0)),
            Op::Eventually => Expr::Eventually(sub(0)),
            Op::And => Expr::And(sub(0), sub(1)),
            Op::Or => Expr::Or(sub(0), sub(1)),
            Op::Implies => Expr::Implies(sub(0), sub(1)),
            Op::Iff => Expr::Iff(sub(0), sub(1)),
            Op::Until => Expr::Until(sub(0), sub(1)),
            Op::Release => Expr::Release(sub(0), sub(1)),
        }
    }

    pub fn body_expr(&self) -> Expr {
        self.to_expr(NodeId(0))
    }

    /// Distinct atom names in order of first occurrence.
    pub fn atom_names(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for n in &self.nodes {
            if let Some(a) = n.atom() {
                if !out.contains(&a.name.as_str()) {
                    out.push(&a.name);
                }
            }
        }
        out
    }

    /// Ancestors of `id` from the root down to and including `id`.
    pub fn path_to(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = self.node(id).parent;
        while let Some(p) = cur {
            path.push(p);
            cur = self.node(p).parent;
        }
        path.reverse();
        path
    }
}

impl fmt::Display for QuantifiedFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl std::str::FromStr for QuantifiedFormula {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}
