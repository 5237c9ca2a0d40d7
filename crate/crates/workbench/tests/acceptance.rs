//! End-to-end acceptance checks, one PASS/FAIL line each.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use hypercex_core::aiger::{parse_aag, AigCircuit};
use hypercex_core::checker::{find_counterexample, replay_assignment, CheckResult};
use hypercex_core::eval::{eval, eval3, oracle_eval, Kleene, Triple};
use hypercex_core::explain::{explain, AtomFact, Constancy, TraceRelation, Verdict};
use hypercex_core::formula::{parse_formula, Binder, Expr, Op, QuantifiedFormula};
use hypercex_core::machine::{extract_moore, parse_machine_json, valuation, MooreMachine};
use hypercex_core::trace::{LassoTrace, Letter, TraceAssignment, VarDecl, VarKind};
use hypercex_workbench::pipeline::explain_sources;
use hypercex_workbench::store::Store;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Scenario = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn letter_of(names: &[&str]) -> Letter {
    names.iter().map(|s| s.to_string()).collect()
}

fn sticky_determinism() -> Outcome {
    let m = parse_machine_json(&fixture("sticky.json")).map_err(|e| e.to_string())?;
    let f = parse_formula(&fixture("od.hltl")).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let r = find_counterexample(&m, &f, 3).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), format!("search took {elapsed:?}"))?;
    let cex = r.counterexample().ok_or("no counterexample at bound 3")?;
    let a = &cex.assignment;
    let (p, q) = (a.trace("p").unwrap(), a.trace("q").unwrap());
    let outputs =
        |t: &LassoTrace, i: usize| -> Letter { t.letter(i).iter().filter(|n| n.starts_with('o')).cloned().collect() };
    for i in 0..a.position_count() {
        ensure(p.contains(i, "i") == q.contains(i, "i"), format!("i differs at {i}"))?;
        if i >= 1 {
            ensure(outputs(p, i) != outputs(q, i), format!("outputs agree at {i}"))?;
        }
    }
    let states = replay_assignment(&m, a).map_err(|e| e.to_string())?;
    let last: BTreeSet<Letter> =
        states.iter().map(|(_, s)| m.label(m.state_index(*s.last().unwrap()).unwrap())).collect();
    ensure(last == BTreeSet::from([letter_of(&["o1"]), letter_of(&["o2"])]), format!("final states {last:?}"))?;
    ensure(
        p.stem == vec![letter_of(&["i"])] && p.cycle == vec![letter_of(&["o1"])],
        format!("unexpected first trace {p:?}"),
    )?;
    ensure(
        q.stem == vec![letter_of(&["i", "s"])] && q.cycle == vec![letter_of(&["o2"])],
        format!("unexpected second trace {q:?}"),
    )?;
    Ok(format!("stem 1, loop 1, found in {elapsed:?}"))
}

fn arbiter_symmetry() -> Outcome {
    let m = parse_machine_json(&fixture("arbiter.json")).map_err(|e| e.to_string())?;
    let f = parse_formula(&fixture("symmetry.hltl")).map_err(|e| e.to_string())?;
    let CheckResult::Counterexample(cex) = find_counterexample(&m, &f, 8).map_err(|e| e.to_string())? else {
        return Err("no counterexample".into());
    };
    let a = &cex.assignment;
    ensure(a.value("p", "grant_0", 1) == Some(true), "grant_0 on p is not true at 1")?;
    ensure(a.value("q", "grant_1", 1) == Some(false), "grant_1 on q is not false at 1")?;
    let (_, vm) = explain(&f, a).map_err(|e| e.to_string())?;
    let target = f
        .nodes()
        .iter()
        .find(|n| {
            let kids: Vec<_> = n
                .children
                .iter()
                .filter_map(|&k| f.node(k).atom())
                .map(|x| (x.name.as_str(), x.trace.as_str()))
                .collect();
            n.op == Op::Iff && kids == [("grant_0", "p"), ("grant_1", "q")]
        })
        .ok_or("conclusion subformula not found")?;
    ensure(vm.get(target.id) == Verdict::Violated, format!("verdict {:?}", vm.get(target.id)))?;
    Ok(format!("stem {}, loop {}, node {} violated", a.stem_len(), a.loop_len(), target.id.0))
}

fn drone_explanation() -> Outcome {
    let b = explain_sources(&fixture("drone_v1.json"), &fixture("drone_v1.cex"), &fixture("drone.hltl"))
        .map_err(|e| e.to_string())?;
    let facts: Vec<&AtomFact> = b.statements.iter().flat_map(|s| &s.statement.atom_facts).collect();
    ensure(facts.len() == 2, format!("{} facts", facts.len()))?;
    let bound = facts.iter().find(|f| f.atom_name == "bound").ok_or("no bound fact")?;
    let emergency = facts.iter().find(|f| f.atom_name == "emergency").ok_or("no emergency fact")?;
    ensure(
        bound.positions == [2]
            && bound.trace_relation == TraceRelation::Equal
            && bound.constancy == Constancy::AlwaysTrue,
        format!("bound fact {bound:?}"),
    )?;
    ensure(
        emergency.positions == [3] && emergency.trace_relation == TraceRelation::Unequal,
        format!("emergency fact {emergency:?}"),
    )?;
    Ok(b.statements.iter().map(|s| s.text.clone()).collect::<Vec<_>>().join(" | "))
}

const NAMES: [&str; 3] = ["a", "b", "c"];

fn random_expr(rng: &mut StdRng, depth: u32) -> Expr {
    if depth == 0 || rng.random_bool(0.25) {
        return Expr::atom(NAMES[rng.random_range(0..3)], ["p", "q"][rng.random_range(0..2)]);
    }
    let d = depth - 1;
    match rng.random_range(0..10) {
        0 => Expr::not(random_expr(rng, d)),
        1 => Expr::and(random_expr(rng, d), random_expr(rng, d)),
        2 => Expr::or(random_expr(rng, d), random_expr(rng, d)),
        3 => Expr::implies(random_expr(rng, d), random_expr(rng, d)),
        4 => Expr::iff(random_expr(rng, d), random_expr(rng, d)),
        5 => Expr::next(random_expr(rng, d)),
        6 => Expr::globally(random_expr(rng, d)),
        7 => Expr::eventually(random_expr(rng, d)),
        8 => Expr::until(random_expr(rng, d), random_expr(rng, d)),
        _ => Expr::release(random_expr(rng, d), random_expr(rng, d)),
    }
}

fn random_formula(rng: &mut StdRng) -> QuantifiedFormula {
    QuantifiedFormula::new(vec![Binder::forall("p"), Binder::forall("q")], random_expr(rng, 4)).unwrap()
}

fn random_assignment(rng: &mut StdRng, max_positions: usize) -> TraceAssignment {
    let n = rng.random_range(1..=max_positions);
    let stem = rng.random_range(0..n);
    let decls: Vec<VarDecl> = NAMES.iter().map(|n| VarDecl::new(*n, VarKind::Input)).collect();
    let binding = ["p", "q"]
        .iter()
        .map(|v| {
            let mut letters: Vec<Letter> = (0..n)
                .map(|_| NAMES.iter().filter(|_| rng.random_bool(0.5)).map(|s| s.to_string()).collect())
                .collect();
            let cycle = letters.split_off(stem);
            (v.to_string(), LassoTrace::new(letters, cycle).unwrap())
        })
        .collect();
    TraceAssignment::new(decls, binding).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0004);
    let start = Instant::now();
    let mut compared = 0;
    for k in 0..500 {
        let f = random_formula(&mut rng);
        let a = random_assignment(&mut rng, 6);
        for i in 0..a.position_count() {
            let fast = eval(&f, &a, i).map_err(|e| e.to_string())?;
            let slow = oracle_eval(&f, &a, i).map_err(|e| e.to_string())?;
            ensure(fast == slow, format!("instance {k} position {i}: {} on {}", f.text(), a.to_counterexample_text()))?;
            compared += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!("500 instances, {compared} positions, {elapsed:?}"))
}

fn flipped(a: &TraceAssignment, set: &[(Triple, bool)]) -> TraceAssignment {
    let binding = a
        .binding()
        .iter()
        .map(|(var, t)| {
            let mut letters: Vec<Letter> = (0..a.position_count()).map(|i| t.letter(i).clone()).collect();
            for (tr, v) in set.iter().filter(|(tr, _)| tr.trace == *var) {
                if *v {
                    letters[tr.t].insert(tr.atom.clone());
                } else {
                    letters[tr.t].remove(&tr.atom);
                }
            }
            let cycle = letters.split_off(a.stem_len());
            (var.clone(), LassoTrace::new(letters, cycle).unwrap())
        })
        .collect();
    TraceAssignment::new(a.decls().to_vec(), binding).unwrap()
}

fn cause_correctness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0005);
    let (mut done, mut exhaustive) = (0, 0);
    while done < 200 {
        let f = random_formula(&mut rng);
        let a = random_assignment(&mut rng, 5);
        if eval(&f, &a, 0).unwrap() {
            continue;
        }
        done += 1;
        let (cs, _) = explain(&f, &a).map_err(|e| e.to_string())?;
        let ctx = || format!("{} on {}", f.text(), a.to_counterexample_text());
        ensure(eval3(&f, &a, &cs.triples).unwrap() == Kleene::False, format!("insufficient: {}", ctx()))?;
        for t in &cs.triples {
            let mut less = cs.triples.clone();
            less.remove(t);
            ensure(eval3(&f, &a, &less).unwrap() != Kleene::False, format!("{t:?} removable: {}", ctx()))?;
        }
        let mut universe = BTreeSet::new();
        for n in f.nodes() {
            if let Some(atom) = n.atom() {
                for t in 0..a.position_count() {
                    universe.insert(Triple::new(&atom.trace, &atom.name, t));
                }
            }
        }
        let free: Vec<Triple> = universe.difference(&cs.triples).cloned().collect();
        if free.len() <= 12 {
            exhaustive += 1;
            for bits in 0..1u32 << free.len() {
                let set: Vec<(Triple, bool)> =
                    free.iter().enumerate().map(|(k, t)| (t.clone(), (bits >> k) & 1 == 1)).collect();
                ensure(!eval(&f, &flipped(&a, &set), 0).unwrap(), format!("completion {bits} satisfies: {}", ctx()))?;
            }
        }
    }
    Ok(format!("200 instances sufficient and minimal, {exhaustive} completion-checked"))
}

/// A random `aag` with outputs over latches only, so that the Moore
/// extraction applies.
fn random_circuit(rng: &mut StdRng) -> String {
    let inputs = rng.random_range(0..=3usize);
    let latches = rng.random_range(1..=6usize);
    let gates = rng.random_range(0..=8usize);
    let outputs = rng.random_range(1..=3usize);
    let mut full: Vec<u32> = vec![0, 1];
    full.extend((1..=inputs as u32).map(|v| 2 * v));
    let mut latch_only: Vec<u32> = vec![0, 1];
    for v in inputs + 1..=inputs + latches {
        full.push(2 * v as u32);
        latch_only.push(2 * v as u32);
    }
    let pick = |rng: &mut StdRng, pool: &[u32]| {
        let lit = pool[rng.random_range(0..pool.len())];
        if lit > 1 && rng.random_bool(0.5) {
            lit ^ 1
        } else {
            lit
        }
    };
    let mut gate_lines = Vec::new();
    for g in 0..gates {
        let lhs = 2 * (inputs + latches + 1 + g) as u32;
        let only = rng.random_bool(0.5);
        let pool = if only { latch_only.clone() } else { full.clone() };
        let (x, y) = (pick(rng, &pool), pick(rng, &pool));
        gate_lines.push(format!("{lhs} {} {}", x.max(y), x.min(y)));
        full.push(lhs);
        if only {
            latch_only.push(lhs);
        }
    }
    let mut out = format!("aag {} {inputs} {latches} {outputs} {gates}\n", inputs + latches + gates);
    for v in 1..=inputs {
        out.push_str(&format!("{}\n", 2 * v));
    }
    for k in 0..latches {
        let next = pick(rng, &full);
        out.push_str(&format!("{} {next} {}\n", 2 * (inputs + 1 + k), rng.random_range(0..2)));
    }
    for _ in 0..outputs {
        out.push_str(&format!("{}\n", pick(rng, &latch_only)));
    }
    for g in gate_lines {
        out.push_str(&g);
        out.push('\n');
    }
    out
}

fn label_matches(c: &AigCircuit, m: &MooreMachine, latches: &[bool], state: usize) -> bool {
    let label = m.label(state);
    let outs = c.outputs_at(latches, &vec![false; c.inputs.len()]).unwrap();
    c.outputs.iter().zip(outs).all(|(o, v)| label.contains(&o.name) == v)
        && c.latches.iter().zip(latches).all(|(l, &v)| label.contains(&l.name) == v)
}

/// Compares machine and circuit along every input sequence of length at most
/// `depth`. Runs reaching the same (latches, state) pair have identical
/// futures, so each pair is expanded once per layer.
fn simulation_agrees(c: &AigCircuit, m: &MooreMachine, depth: usize) -> Result<usize, String> {
    let width = c.inputs.len();
    let mut layer: HashSet<(Vec<bool>, usize)> = HashSet::from([(c.initial_state(), m.initial_index())]);
    let mut sequences = 1usize;
    for d in 0..=depth {
        for (latches, state) in &layer {
            if !label_matches(c, m, latches, *state) {
                return Err(format!("label mismatch after {d} steps in state {state}"));
            }
        }
        if d == depth {
            break;
        }
        let mut next = HashSet::new();
        for (latches, state) in &layer {
            for v in 0..1usize << width {
                let (l2, _) = c.step(latches, &valuation(v, width)).unwrap();
                next.insert((l2, m.delta(*state, v)));
            }
        }
        layer = next;
        sequences *= 1 << width;
    }
    Ok(sequences)
}

fn machine_is_total_and_deterministic(m: &MooreMachine) -> Result<(), String> {
    let width = m.inputs().len();
    for (s, state) in m.states().iter().enumerate() {
        for v in 0..1usize << width {
            let bits = valuation(v, width);
            let enabled: Vec<_> =
                m.edges().iter().filter(|e| e.src == state.id && e.guard.iter().any(|g| g.matches(&bits))).collect();
            ensure(enabled.len() == 1, format!("state {} has {} edges for valuation {v}", state.id, enabled.len()))?;
            ensure(m.state_index(enabled[0].dst) == Some(m.delta(s, v)), "edge and transition table disagree")?;
        }
    }
    Ok(())
}

fn aiger_fidelity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0006);
    let mut total = 0usize;
    for k in 0..50 {
        let text = random_circuit(&mut rng);
        let c = parse_aag(&text).map_err(|e| format!("circuit {k}: {e}\n{text}"))?;
        let m = extract_moore(&c, 64).map_err(|e| format!("circuit {k}: {e}\n{text}"))?;
        machine_is_total_and_deterministic(&m).map_err(|e| format!("circuit {k}: {e}\n{text}"))?;
        ensure(
            extract_moore(&c, 64).unwrap().to_dot(None) == m.to_dot(None),
            format!("circuit {k}: extraction not reproducible"),
        )?;
        total += simulation_agrees(&c, &m, 6).map_err(|e| format!("circuit {k}: {e}\n{text}"))?;
    }
    Ok(format!("50 circuits, {total} length-6 input sequences covered"))
}

fn wide_bus() -> Outcome {
    let (aag, cex, formula) = (bus_circuit(), bus_counterexample(), bus_formula());
    let start = Instant::now();
    let b = explain_sources(&aag, &cex, &formula).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    ensure(b.var_decls.len() == 50, format!("{} variables", b.var_decls.len()))?;
    ensure(b.stem_len + b.loop_len == STEPS, "wrong length")?;
    let kinds: BTreeMap<&str, VarKind> = b.var_decls.iter().map(|d| (d.name.as_str(), d.kind)).collect();
    let output_times: BTreeSet<usize> =
        b.causes.iter().filter(|c| kinds[c.atom.as_str()] == VarKind::Output).map(|c| c.t).collect();
    ensure(output_times == BTreeSet::from([6]), format!("output triples at {output_times:?}"))?;
    ensure(b.relevant.outputs.len() == 1, format!("relevant outputs {:?}", b.relevant.outputs))?;
    Ok(format!("{} cause triples, relevant output {:?}, {elapsed:?}", b.causes.len(), b.relevant.outputs))
}

fn persistence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (cid, first) = {
        let store = Store::open(dir.path()).map_err(|e| e.to_string())?;
        let p = store.create_project("drone", &fixture("drone_v1.json")).map_err(|e| e.to_string())?;
        let c = store
            .add_check(&p.id, &p.versions[0].id, Some("bound"), &fixture("drone.hltl"))
            .map_err(|e| e.to_string())?;
        store.run_check(&c.id, 8).map_err(|e| e.to_string())?;
        (c.id.clone(), store.bundle(&c.id).map_err(|e| e.to_string())?)
    };
    let store = Store::open(dir.path()).map_err(|e| e.to_string())?;
    ensure(store.bundle(&cid).map_err(|e| e.to_string())? == first, "bundle changed across restart")?;
    let project = store.list_projects().remove(0);
    ensure(store.edit_formula(&cid, "forall p. forall q. G (bound[p] <->").is_err(), "malformed edit accepted")?;
    let after = store.list_projects().remove(0);
    ensure(after.versions == project.versions, "malformed edit created a version")?;
    let reopened = Store::open(dir.path()).map_err(|e| e.to_string())?;
    ensure(reopened.versions(&project.id).map_err(|e| e.to_string())?.len() == 1, "version on disk after failed edit")?;
    Ok(format!("{} byte bundle reloaded identically", first.len()))
}

fn main() -> ExitCode {
    let scenarios: [Scenario; 8] = [
        ("sticky machine observational determinism", sticky_determinism),
        ("arbiter symmetry", arbiter_symmetry),
        ("drone explanation facts", drone_explanation),
        ("evaluator matches oracle", oracle_equivalence),
        ("cause sets sufficient, minimal, sound", cause_correctness),
        ("aiger extraction fidelity", aiger_fidelity),
        ("wide bus circuit", wide_bus),
        ("pipeline persistence", persistence),
    ];
    let mut failed = 0;
    for (k, (name, run)) in scenarios.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
