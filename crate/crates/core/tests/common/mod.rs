#![allow(dead_code)]

use std::collections::BTreeSet;

use hypercex_core::eval::eval;
use hypercex_core::formula::{Binder, Expr, QuantifiedFormula};
use hypercex_core::machine::{valuation, Cube, MooreMachine, MooreState};
use hypercex_core::trace::{LassoTrace, Letter, TraceAssignment, VarDecl, VarKind};
use proptest::prelude::*;

pub const TRACES: [&str; 2] = ["p", "q"];

pub fn arb_expr(names: Vec<String>, traces: usize, depth: u32) -> BoxedStrategy<Expr> {
    let leaf = (prop::sample::select(names), 0..traces).prop_map(|(n, t)| Expr::atom(n, TRACES[t])).boxed();
    leaf.prop_recursive(depth, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::not),
            inner.clone().prop_map(Expr::next),
            inner.clone().prop_map(Expr::globally),
            inner.clone().prop_map(Expr::eventually),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::or(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::implies(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::iff(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::until(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::release(a, b)),
        ]
    })
    .boxed()
}

pub fn quantify(body: Expr, traces: usize) -> QuantifiedFormula {
    let prefix = TRACES[..traces].iter().map(|v| Binder::forall(*v)).collect();
    QuantifiedFormula::new(prefix, body).unwrap()
}

pub fn arb_formula(names: Vec<String>, traces: usize, depth: u32) -> impl Strategy<Value = QuantifiedFormula> {
    arb_expr(names, traces, depth).prop_map(move |e| quantify(e, traces))
}

/// Assignment over propositions `a0..` with the given shape.
pub fn arb_assignment(names: usize, traces: usize, max_positions: usize) -> impl Strategy<Value = TraceAssignment> {
    (0..max_positions, 1..=max_positions).prop_flat_map(move |(stem, lp)| {
        let stem = stem.min(max_positions - lp);
        let n = stem + lp;
        prop::collection::vec(prop::collection::vec(prop::collection::vec(any::<bool>(), names), n), traces)
            .prop_map(move |bits| assignment_from_bits(&bits, stem))
    })
}

pub fn prop_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("a{i}")).collect()
}

pub fn assignment_from_bits(bits: &[Vec<Vec<bool>>], stem: usize) -> TraceAssignment {
    let names = prop_names(bits[0][0].len());
    let decls = names.iter().map(|n| VarDecl::new(n, VarKind::Output)).collect();
    let binding = bits
        .iter()
        .enumerate()
        .map(|(t, rows)| {
            let mut letters: Vec<Letter> = rows
                .iter()
                .map(|row| names.iter().zip(row).filter(|(_, b)| **b).map(|(n, _)| n.clone()).collect())
                .collect();
            let cycle = letters.split_off(stem);
            (TRACES[t].to_string(), LassoTrace::new(letters, cycle).unwrap())
        })
        .collect();
    TraceAssignment::new(decls, binding).unwrap()
}

/// Machine with inputs `x0..`, outputs `y0..` and a full transition table.
pub fn arb_machine(max_states: usize, max_inputs: usize, max_outputs: usize) -> impl Strategy<Value = MooreMachine> {
    (1..=max_states, 1..=max_inputs, 1..=max_outputs).prop_flat_map(|(n, w, o)| {
        let labels = prop::collection::vec(prop::collection::vec(any::<bool>(), o), n);
        let delta = prop::collection::vec(prop::collection::vec(0..n, 1 << w), n);
        (labels, delta).prop_map(move |(labels, delta)| machine_from_table(w, o, &labels, &delta))
    })
}

pub fn machine_from_table(width: usize, outputs: usize, labels: &[Vec<bool>], delta: &[Vec<usize>]) -> MooreMachine {
    let inputs: Vec<String> = (0..width).map(|i| format!("x{i}")).collect();
    let outs: Vec<String> = (0..outputs).map(|i| format!("y{i}")).collect();
    let states = labels
        .iter()
        .enumerate()
        .map(|(id, l)| MooreState {
            id: id as u32,
            outputs: outs.iter().zip(l).filter(|(_, b)| **b).map(|(n, _)| n.clone()).collect(),
            latches: BTreeSet::new(),
        })
        .collect();
    let mut edges = Vec::new();
    for (src, row) in delta.iter().enumerate() {
        for (v, &dst) in row.iter().enumerate() {
            edges.push((src as u32, dst as u32, Cube(valuation(v, width).into_iter().map(Some).collect())));
        }
    }
    MooreMachine::new(inputs, outs, Vec::new(), states, 0, edges).unwrap()
}

/// First violating lasso in the documented order by exhaustive enumeration.
pub fn brute_force(m: &MooreMachine, f: &QuantifiedFormula, bound: usize) -> Option<TraceAssignment> {
    let k = f.prefix().len();
    let w = m.inputs().len();
    let joint = 1usize << (k * w);
    for n in 1..=bound {
        for s in 0..n {
            for seq in 0..joint.pow(n as u32) {
                let steps: Vec<usize> = (0..n).map(|t| (seq / joint.pow((n - 1 - t) as u32)) % joint).collect();
                if let Some(a) = lasso(m, f, &steps, s) {
                    if !eval(f, &a, 0).unwrap() {
                        return Some(a);
                    }
                }
            }
        }
    }
    None
}

fn lasso(m: &MooreMachine, f: &QuantifiedFormula, steps: &[usize], s: usize) -> Option<TraceAssignment> {
    let k = f.prefix().len();
    let w = m.inputs().len();
    let mut binding = Vec::new();
    for (j, var) in f.trace_vars().into_iter().enumerate() {
        let mut state = m.initial_index();
        let mut path = Vec::new();
        let mut letters: Vec<Letter> = Vec::new();
        for &joint in steps {
            let v = (joint >> ((k - 1 - j) * w)) & ((1 << w) - 1);
            let mut l = m.label(state);
            for (name, b) in m.inputs().iter().zip(valuation(v, w)) {
                if b {
                    l.insert(name.clone());
                }
            }
            letters.push(l);
            path.push(state);
            state = m.delta(state, v);
        }
        if state != path[s] {
            return None;
        }
        let cycle = letters.split_off(s);
        binding.push((var.to_string(), LassoTrace::new(letters, cycle).unwrap()));
    }
    Some(TraceAssignment::new(m.decls(), binding).unwrap())
}
