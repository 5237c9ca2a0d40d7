//! Reference evaluator kept independent of the production engine.
//!
//! `F` and `G` are rewritten through their `U`/`R` expansion laws and every
//! node is solved by Jacobi iteration: each sweep computes a fresh row from
//! the previous one over all positions at once. Nodes are solved children
//! first; a single simultaneous iteration over all nodes would let a
//! greatest-fixpoint child that has not settled yet seed a self-sustaining
//! value in an enclosing least fixpoint.

use crate::formula::{NodeId, Op, QuantifiedFormula};
use crate::trace::TraceAssignment;

use super::EvalError;

enum Law {
    Lfp,
    Gfp,
    Direct,
}

pub fn oracle_eval(f: &QuantifiedFormula, a: &TraceAssignment, i: usize) -> Result<bool, EvalError> {
    let n = a.position_count();
    if i >= n {
        return Err(EvalError::PositionOutOfRange { position: i, count: n });
    }
    let mut table: Vec<Vec<bool>> = vec![Vec::new(); f.len()];

    for id in (0..f.len()).rev() {
        let node = f.node(NodeId(id));
        let law = match node.op {
            Op::Eventually | Op::Until => Law::Lfp,
            Op::Globally | Op::Release => Law::Gfp,
            _ => Law::Direct,
        };
        let atom_row: Option<Vec<bool>> = match node.atom() {
            Some(atom) => {
                let row: Option<Vec<bool>> = (0..n).map(|t| a.value(&atom.trace, &atom.name, t)).collect();
                Some(row.ok_or_else(|| EvalError::UnboundAtom(atom.clone()))?)
            }
            None => None,
        };
        let kid = |k: usize| &table[node.children[k].0];
        let mut cur = vec![matches!(law, Law::Gfp); n];
        loop {
            let next: Vec<bool> = (0..n)
                .map(|t| {
                    let later = cur[a.succ(t)];
                    match node.op {
                        Op::Atom(_) => atom_row.as_ref().unwrap()[t],
                        Op::Not => !kid(0)[t],
                        Op::And => kid(0)[t] && kid(1)[t],
                        Op::Or => kid(0)[t] || kid(1)[t],
                        Op::Implies => !kid(0)[t] || kid(1)[t],
                        Op::Iff => kid(0)[t] == kid(1)[t],
                        Op::Next => kid(0)[a.succ(t)],
                        // F φ ≡ true U φ
                        Op::Eventually => kid(0)[t] || later,
                        // G φ ≡ false R φ
                        Op::Globally => kid(0)[t] && later,
                        // φ U ψ ≡ ψ ∨ (φ ∧ X(φ U ψ))
                        Op::Until => kid(1)[t] || (kid(0)[t] && later),
                        // φ R ψ ≡ ψ ∧ (φ ∨ X(φ R ψ))
                        Op::Release => kid(1)[t] && (kid(0)[t] || later),
                    }
                })
                .collect();
            if next == cur {
                break;
            }
            cur = next;
        }
        table[id] = cur;
    }
    Ok(table[0][i])
}
