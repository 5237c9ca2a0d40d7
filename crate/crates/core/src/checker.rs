//! Bounded counterexample search over the k-fold self-composition.
//!
//! Lassos are ordered by total length, then stem length, then the joint input
//! sequence read lexicographically (trace 0 most significant at each step).
//! The first violating lasso in that order is returned.
//!
//! The search never enumerates lassos one by one. It runs backwards over the
//! product graph, carrying the values of the subformulas that cross a step
//! (temporal operators and operands of `X`). At the loop-back position all of
//! these values are guessed; a guess closes the loop when the loop reproduces
//! it and every fixpoint it claims has a witness inside the loop. That pins
//! the guess to the true values, so the layers decide exactly which
//! `(stem, loop)` shapes admit a violation. The lexicographically least
//! witness is then read off the layers going forwards.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::aiger::AigCircuit;
use crate::formula::{Atom, NodeId, Op, QuantifiedFormula, Quantifier};
use crate::machine::{valuation, valuation_index, MooreMachine, StateId};
use crate::trace::{LassoTrace, Letter, TraceAssignment, TraceError};

pub const DEFAULT_BOUND: usize = 8;

/// Cap on `k * |inputs|`, the width of a joint input valuation.
pub const MAX_JOINT_INPUTS: usize = 20;

const MAX_CARRIED: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("quantifier `exists {0}` is not supported; only universal prefixes can be checked")]
    UnsupportedQuantifier(String),
    #[error("proposition `{}` is not declared by the machine", .0.name)]
    UnknownProposition(Atom),
    #[error("{count} joint input bits exceed the supported maximum of {max}")]
    TooManyInputs { count: usize, max: usize },
    #[error("{0} step-crossing subformulas exceed the search limit of {MAX_CARRIED}")]
    FormulaTooLarge(usize),
    #[error("trace `{var}` disagrees with the machine at position {position}")]
    InconsistentTrace { var: String, position: usize },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub assignment: TraceAssignment,
    /// Machine state ids per trace variable, one per carrier position.
    pub states: Vec<(String, Vec<StateId>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckResult {
    NoCexUpToBound(usize),
    Counterexample(Counterexample),
}

impl CheckResult {
    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            CheckResult::Counterexample(c) => Some(c),
            CheckResult::NoCexUpToBound(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Prop {
    Input(usize),
    Label(usize),
}

struct Class {
    joint: usize,
    atoms: u128,
    next: usize,
}

struct Product {
    components: Vec<Vec<usize>>,
    classes: Vec<Vec<Class>>,
    pred: Vec<Vec<(usize, usize)>>,
}

struct Compiled {
    /// Per node: the carried bit of the node, if any.
    carried: Vec<Option<u32>>,
    /// Per atom node: index into the atom-slot word.
    slot: Vec<Option<u32>>,
    /// Carried temporal nodes with their operator.
    fixpoints: Vec<(NodeId, u32)>,
    width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct LoopKey {
    p: u32,
    g: u128,
    q: u32,
    t: u128,
    w: u128,
    root: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct StemKey {
    q: u32,
    t: u128,
    root: bool,
}

struct Search<'a> {
    m: &'a MooreMachine,
    f: &'a QuantifiedFormula,
    k: usize,
    compiled: Compiled,
    product: Product,
}

fn compile(f: &QuantifiedFormula, slot_of: &HashMap<NodeId, usize>) -> Result<Compiled, CheckError> {
    let mut carried = vec![None; f.len()];
    let mut next_bit = 0u32;
    let mut fixpoints = Vec::new();
    for node in f.nodes() {
        let mut mark = |id: NodeId| {
            if carried[id.0].is_none() {
                carried[id.0] = Some(next_bit);
                next_bit += 1;
            }
            carried[id.0].unwrap()
        };
        match node.op {
            Op::Next => {
                mark(node.children[0]);
            }
            Op::Eventually | Op::Globally | Op::Until | Op::Release => {
                let b = mark(node.id);
                fixpoints.push((node.id, b));
            }
            _ => {}
        }
    }
    if next_bit as usize > MAX_CARRIED {
        return Err(CheckError::FormulaTooLarge(next_bit as usize));
    }
    let slot = f.nodes().iter().map(|n| slot_of.get(&n.id).map(|&s| s as u32)).collect();
    Ok(Compiled { carried, slot, fixpoints, width: next_bit as usize })
}

impl Compiled {
    /// Values at one position from the atom word there and the carried bits
    /// of the successor. Returns the carried bits here, the fixpoint witness
    /// bits contributed here, and the root value.
    fn step(&self, f: &QuantifiedFormula, atoms: u128, next: u128, vals: &mut Vec<bool>) -> (u128, u128, bool) {
        vals.clear();
        vals.resize(f.len(), false);
        let nxt = |id: NodeId| (next >> self.carried[id.0].unwrap()) & 1 == 1;
        for id in (0..f.len()).rev() {
            let node = f.node(NodeId(id));
            let c = |k: usize| vals[node.children[k].0];
            vals[id] = match node.op {
                Op::Atom(_) => (atoms >> self.slot[id].unwrap()) & 1 == 1,
                Op::Not => !c(0),
                Op::And => c(0) && c(1),
                Op::Or => c(0) || c(1),
                Op::Implies => !c(0) || c(1),
                Op::Iff => c(0) == c(1),
                Op::Next => nxt(node.children[0]),
                Op::Eventually => c(0) || nxt(node.id),
                Op::Globally => c(0) && nxt(node.id),
                Op::Until => c(1) || (c(0) && nxt(node.id)),
                Op::Release => c(1) && (c(0) || nxt(node.id)),
            };
        }
        let mut t = 0u128;
        for (id, b) in self.carried.iter().enumerate() {
            if let Some(b) = b {
                t |= (vals[id] as u128) << b;
            }
        }
        let mut w = 0u128;
        for &(id, b) in &self.fixpoints {
            let node = f.node(id);
            let hit = match node.op {
                Op::Eventually => vals[node.children[0].0],
                Op::Until => vals[node.children[1].0],
                Op::Globally => !vals[node.children[0].0],
                _ => !vals[node.children[1].0],
            };
            w |= (hit as u128) << b;
        }
        (t, w, vals[0])
    }

    fn closes(&self, f: &QuantifiedFormula, k: &LoopKey) -> Option<StemKey> {
        if k.q != k.p || k.t != k.g {
            return None;
        }
        for &(id, b) in &self.fixpoints {
            let claimed = (k.g >> b) & 1 == 1;
            let witnessed = (k.w >> b) & 1 == 1;
            let least = matches!(f.node(id).op, Op::Eventually | Op::Until);
            // A least fixpoint claimed true, or a greatest one claimed
            // false, needs a witness in the loop.
            if claimed == least && !witnessed {
                return None;
            }
        }
        Some(StemKey { q: k.q, t: k.t, root: k.root })
    }
}

fn build_product(m: &MooreMachine, k: usize, slots: &[(usize, Prop)]) -> Product {
    let width = m.inputs().len();
    let label_names: Vec<&String> = m.outputs().iter().chain(m.latch_names()).collect();
    let labels: Vec<Vec<bool>> = (0..m.states().len())
        .map(|s| {
            let l = m.label(s);
            label_names.iter().map(|n| l.contains(*n)).collect()
        })
        .collect();
    let mask = (1usize << width) - 1;
    let split = |joint: usize| -> Vec<usize> { (0..k).map(|j| (joint >> ((k - 1 - j) * width)) & mask).collect() };

    let start = vec![m.initial_index(); k];
    let mut index: HashMap<Vec<usize>, usize> = HashMap::from([(start.clone(), 0)]);
    let mut components = vec![start];
    let mut classes = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(q) = queue.pop_front() {
        let comps = components[q].clone();
        let mut seen: HashMap<(u128, usize), ()> = HashMap::new();
        let mut list = Vec::new();
        for joint in 0..1usize << (k * width) {
            let vals = split(joint);
            let next_comps: Vec<usize> = comps.iter().zip(&vals).map(|(&s, &v)| m.delta(s, v)).collect();
            let next = match index.get(&next_comps) {
                Some(&n) => n,
                None => {
                    let n = components.len();
                    index.insert(next_comps.clone(), n);
                    components.push(next_comps);
                    queue.push_back(n);
                    n
                }
            };
            let mut atoms = 0u128;
            for (bit, &(trace, prop)) in slots.iter().enumerate() {
                let v = match prop {
                    Prop::Input(x) => (vals[trace] >> (width - 1 - x)) & 1 == 1,
                    Prop::Label(x) => labels[comps[trace]][x],
                };
                atoms |= (v as u128) << bit;
            }
            if seen.insert((atoms, next), ()).is_none() {
                list.push(Class { joint, atoms, next });
            }
        }
        classes.push(list);
    }
    let mut pred = vec![Vec::new(); components.len()];
    for (q, list) in classes.iter().enumerate() {
        for (c, class) in list.iter().enumerate() {
            pred[class.next].push((q, c));
        }
    }
    Product { components, classes, pred }
}

impl<'a> Search<'a> {
    fn new(m: &'a MooreMachine, f: &'a QuantifiedFormula) -> Result<Self, CheckError> {
        if let Some(b) = f.prefix().iter().find(|b| b.quantifier == Quantifier::Exists) {
            return Err(CheckError::UnsupportedQuantifier(b.var.clone()));
        }
        let k = f.prefix().len();
        let width = m.inputs().len();
        if k * width > MAX_JOINT_INPUTS {
            return Err(CheckError::TooManyInputs { count: k * width, max: MAX_JOINT_INPUTS });
        }
        let label_names: Vec<&String> = m.outputs().iter().chain(m.latch_names()).collect();
        let mut slots: Vec<(usize, Prop)> = Vec::new();
        let mut slot_key: HashMap<(usize, String), usize> = HashMap::new();
        let mut slot_of = HashMap::new();
        for node in f.nodes() {
            let Some(atom) = node.atom() else { continue };
            let trace = f.trace_index(&atom.trace).expect("validated formula");
            let prop = if let Some(x) = m.inputs().iter().position(|n| *n == atom.name) {
                Prop::Input(x)
            } else if let Some(x) = label_names.iter().position(|n| **n == atom.name) {
                Prop::Label(x)
            } else {
                return Err(CheckError::UnknownProposition(atom.clone()));
            };
            let next = slots.len();
            let s = *slot_key.entry((trace, atom.name.clone())).or_insert(next);
            if s == next {
                slots.push((trace, prop));
            }
            slot_of.insert(node.id, s);
        }
        if slots.len() > 128 {
            return Err(CheckError::FormulaTooLarge(slots.len()));
        }
        let compiled = compile(f, &slot_of)?;
        let product = build_product(m, k, &slots);
        Ok(Search { m, f, k, compiled, product })
    }

    fn seeds(&self) -> HashSet<LoopKey> {
        let mut out = HashSet::new();
        for p in 0..self.product.components.len() as u32 {
            for g in 0..1u128 << self.compiled.width {
                out.insert(LoopKey { p, g, q: p, t: g, w: 0, root: false });
            }
        }
        out
    }

    fn step_loop(&self, key: &LoopKey, q: usize, class: &Class, vals: &mut Vec<bool>) -> LoopKey {
        let (t, w, root) = self.compiled.step(self.f, class.atoms, key.t, vals);
        LoopKey { p: key.p, g: key.g, q: q as u32, t, w: key.w | w, root }
    }

    fn step_stem(&self, key: &StemKey, class: &Class, vals: &mut Vec<bool>) -> (u128, bool) {
        let (t, _, root) = self.compiled.step(self.f, class.atoms, key.t, vals);
        (t, root)
    }

    fn back_loop(&self, layer: &HashSet<LoopKey>) -> HashSet<LoopKey> {
        let mut vals = Vec::new();
        let mut out = HashSet::new();
        for key in layer {
            for &(q, c) in &self.product.pred[key.q as usize] {
                out.insert(self.step_loop(key, q, &self.product.classes[q][c], &mut vals));
            }
        }
        out
    }

    fn back_stem(&self, layer: &HashSet<StemKey>) -> HashSet<StemKey> {
        let mut vals = Vec::new();
        let mut out = HashSet::new();
        for key in layer {
            for &(q, c) in &self.product.pred[key.q as usize] {
                let (t, root) = self.step_stem(key, &self.product.classes[q][c], &mut vals);
                out.insert(StemKey { q: q as u32, t, root });
            }
        }
        out
    }

    fn run(&self, bound: usize) -> Option<(usize, Vec<(usize, usize)>)> {
        let mut loops = vec![self.seeds()];
        // stems[l][j]: keys j steps before the start of a closed loop of length l.
        let mut stems: Vec<Vec<HashSet<StemKey>>> = vec![Vec::new()];
        for n in 1..=bound {
            loops.push(self.back_loop(&loops[n - 1]));
            stems.push(vec![loops[n].iter().filter_map(|k| self.compiled.closes(self.f, k)).collect()]);
            for s in 0..n {
                let l = n - s;
                while stems[l].len() <= s {
                    let last = stems[l].last().unwrap();
                    let next = self.back_stem(last);
                    stems[l].push(next);
                }
                if stems[l][s].iter().any(|k| k.q == 0 && !k.root) {
                    return Some((s, self.witness(n, s, &loops, &stems[l])));
                }
            }
        }
        None
    }

    /// Lexicographically least `(product state, class)` path of shape
    /// `(n, s)` that violates the body.
    fn witness(
        &self,
        n: usize,
        s: usize,
        loops: &[HashSet<LoopKey>],
        stems: &[HashSet<StemKey>],
    ) -> Vec<(usize, usize)> {
        let mut vals = Vec::new();
        let mut q = 0usize;
        let mut path = Vec::with_capacity(n);
        let mut allowed_stem: HashSet<StemKey> = stems[s].iter().filter(|k| k.q == 0 && !k.root).copied().collect();
        let mut allowed_loop: HashSet<LoopKey> = HashSet::new();
        for p in 0..n {
            if p == s {
                allowed_loop = loops[n - s]
                    .iter()
                    .filter(|k| self.compiled.closes(self.f, k).is_some_and(|sk| allowed_stem.contains(&sk)))
                    .copied()
                    .collect();
            }
            let mut chosen = None;
            for (ci, class) in self.product.classes[q].iter().enumerate() {
                if p < s {
                    let next: HashSet<StemKey> = stems[s - p - 1]
                        .iter()
                        .filter(|k| k.q as usize == class.next)
                        .filter(|k| {
                            let (t, root) = self.step_stem(k, class, &mut vals);
                            allowed_stem.contains(&StemKey { q: q as u32, t, root })
                        })
                        .copied()
                        .collect();
                    if !next.is_empty() {
                        allowed_stem = next;
                        chosen = Some(ci);
                        break;
                    }
                } else {
                    let next: HashSet<LoopKey> = loops[n - p - 1]
                        .iter()
                        .filter(|k| k.q as usize == class.next)
                        .filter(|k| allowed_loop.contains(&self.step_loop(k, q, class, &mut vals)))
                        .copied()
                        .collect();
                    if !next.is_empty() {
                        allowed_loop = next;
                        chosen = Some(ci);
                        break;
                    }
                }
            }
            let ci = chosen.expect("layers guarantee a continuation");
            path.push((q, ci));
            q = self.product.classes[q][ci].next;
        }
        path
    }

    fn counterexample(&self, s: usize, path: &[(usize, usize)]) -> Result<Counterexample, CheckError> {
        let width = self.m.inputs().len();
        let mask = (1usize << width) - 1;
        let mut letters: Vec<Vec<Letter>> = vec![Vec::with_capacity(path.len()); self.k];
        let mut states: Vec<Vec<StateId>> = vec![Vec::with_capacity(path.len()); self.k];
        for &(q, c) in path {
            let joint = self.product.classes[q][c].joint;
            for j in 0..self.k {
                let comp = self.product.components[q][j];
                let v = (joint >> ((self.k - 1 - j) * width)) & mask;
                let mut letter = self.m.label(comp);
                for (name, bit) in self.m.inputs().iter().zip(valuation(v, width)) {
                    if bit {
                        letter.insert(name.clone());
                    }
                }
                letters[j].push(letter);
                states[j].push(self.m.states()[comp].id);
            }
        }
        let vars = self.f.trace_vars();
        let binding = letters
            .into_iter()
            .zip(&vars)
            .map(|(mut l, v)| {
                let cycle = l.split_off(s);
                Ok((v.to_string(), LassoTrace::new(l, cycle)?))
            })
            .collect::<Result<Vec<_>, TraceError>>()?;
        let assignment = TraceAssignment::new(self.m.decls(), binding)?;
        let states = vars.iter().map(|v| v.to_string()).zip(states).collect();
        Ok(Counterexample { assignment, states })
    }
}

/// Searches lassos of the k-fold product with `stem + loop <= bound`.
pub fn find_counterexample(m: &MooreMachine, f: &QuantifiedFormula, bound: usize) -> Result<CheckResult, CheckError> {
    let search = Search::new(m, f)?;
    log::debug!("product has {} states, {} carried bits", search.product.components.len(), search.compiled.width);
    match search.run(bound) {
        None => Ok(CheckResult::NoCexUpToBound(bound)),
        Some((s, path)) => search.counterexample(s, &path).map(CheckResult::Counterexample),
    }
}

/// Follows the input projection of `trace` through `m`, checking that the
/// outputs agree with the state labels and that the loop closes.
pub fn replay(m: &MooreMachine, trace: &LassoTrace) -> Result<Vec<StateId>, usize> {
    let n = trace.carrier().position_count();
    let mut state = m.initial_index();
    let mut out = Vec::with_capacity(n);
    let mut at_stem = None;
    for pos in 0..n {
        if pos == trace.stem.len() {
            at_stem = Some(state);
        }
        let letter = trace.letter(pos);
        let s = &m.states()[state];
        if m.outputs().iter().any(|o| letter.contains(o) != s.outputs.contains(o)) {
            return Err(pos);
        }
        out.push(s.id);
        let bits: Vec<bool> = m.inputs().iter().map(|i| letter.contains(i)).collect();
        state = m.delta(state, valuation_index(&bits));
    }
    if Some(state) != at_stem {
        return Err(n - 1);
    }
    Ok(out)
}

/// Replays every trace of `a`; state ids per trace variable.
pub fn replay_assignment(m: &MooreMachine, a: &TraceAssignment) -> Result<Vec<(String, Vec<StateId>)>, CheckError> {
    a.binding()
        .iter()
        .map(|(var, t)| {
            replay(m, t)
                .map(|s| (var.clone(), s))
                .map_err(|position| CheckError::InconsistentTrace { var: var.clone(), position })
        })
        .collect()
}

/// Replays a trace directly on a circuit. States are numbered by first
/// appearance of their latch valuation in `numbering`, which may be shared
/// across traces.
pub fn replay_circuit(
    c: &AigCircuit,
    trace: &LassoTrace,
    numbering: &mut BTreeMap<Vec<bool>, StateId>,
) -> Result<Vec<StateId>, usize> {
    let n = trace.carrier().position_count();
    let mut latches = c.initial_state();
    let mut out = Vec::with_capacity(n);
    let mut at_stem = None;
    for pos in 0..n {
        if pos == trace.stem.len() {
            at_stem = Some(latches.clone());
        }
        let letter = trace.letter(pos);
        let inputs: Vec<bool> = c.inputs.iter().map(|i| letter.contains(&i.name)).collect();
        let (next, outs) = c.next_and_outputs(&latches, &inputs);
        if c.outputs.iter().zip(&outs).any(|(o, &v)| letter.contains(&o.name) != v) {
            return Err(pos);
        }
        let fresh = numbering.len() as StateId;
        out.push(*numbering.entry(latches.clone()).or_insert(fresh));
        latches = next;
    }
    if Some(latches) != at_stem {
        return Err(n - 1);
    }
    Ok(out)
}

/// Replays every trace of `a` on a circuit with one shared state numbering.
pub fn replay_assignment_circuit(
    c: &AigCircuit,
    a: &TraceAssignment,
) -> Result<Vec<(String, Vec<StateId>)>, CheckError> {
    let mut numbering = BTreeMap::new();
    a.binding()
        .iter()
        .map(|(var, t)| {
            replay_circuit(c, t, &mut numbering)
                .map(|s| (var.clone(), s))
                .map_err(|position| CheckError::InconsistentTrace { var: var.clone(), position })
        })
        .collect()
}
