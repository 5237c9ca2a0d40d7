//! Formula and machine in, bundle out.

use hypercex_core::aiger::{parse_aag, AigCircuit, AigerError};
use hypercex_core::checker::{
    find_counterexample, replay_assignment, replay_assignment_circuit, CheckError, CheckResult,
};
use hypercex_core::explain::{generate_statements, mark_relevant, minimize, ExplainError};
use hypercex_core::formula::{parse_formula, FormulaError, QuantifiedFormula};
use hypercex_core::machine::{extract_moore, parse_machine_json, MachineError, MooreMachine, StateId};
use hypercex_core::trace::{parse_counterexample, TraceAssignment, TraceError, VarDecl, VarKind};
use log::{debug, info};
use thiserror::Error;

use crate::bundle::{assemble, Bundle, Parts};

/// State budget for Moore extraction from a circuit.
pub const MAX_STATES: usize = 4096;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("formula: {0}")]
    Formula(#[from] FormulaError),
    #[error("machine: {0}")]
    Machine(#[from] MachineError),
    #[error("circuit: {0}")]
    Aiger(#[from] AigerError),
    #[error("counterexample: {0}")]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error("no state graph to search: {0}")]
    NoStateGraph(String),
}

impl PipelineError {
    /// Short machine-readable error class.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Formula(_)
            | PipelineError::Machine(_)
            | PipelineError::Aiger(_)
            | PipelineError::Trace(_) => "ParseError",
            PipelineError::Check(CheckError::UnsupportedQuantifier(_)) => "UnsupportedQuantifier",
            PipelineError::Check(CheckError::UnknownProposition(_)) => "UnknownProposition",
            PipelineError::Check(CheckError::InconsistentTrace { .. }) => "InconsistentTrace",
            PipelineError::Check(_) | PipelineError::NoStateGraph(_) => "LimitExceeded",
            PipelineError::Explain(ExplainError::NotViolated) => "NotViolated",
            PipelineError::Explain(_) => "EvalError",
        }
    }
}

/// A loaded machine source. Circuits keep their netlist so that traces can
/// be replayed when no state graph could be extracted.
#[derive(Debug, Clone)]
pub struct System {
    pub machine: Option<MooreMachine>,
    pub circuit: Option<AigCircuit>,
    pub unavailable: Option<String>,
}

impl System {
    pub fn decls(&self) -> Vec<VarDecl> {
        if let Some(m) = &self.machine {
            return m.decls();
        }
        let c = self.circuit.as_ref().expect("system has a machine or a circuit");
        let mut decls = Vec::new();
        for (names, kind) in
            [(c.input_names(), VarKind::Input), (c.output_names(), VarKind::Output), (c.latch_names(), VarKind::Latch)]
        {
            decls.extend(names.into_iter().map(|n| VarDecl::new(n, kind)));
        }
        decls
    }

    fn replay(&self, a: &TraceAssignment) -> Result<Vec<(String, Vec<StateId>)>, CheckError> {
        match (&self.machine, &self.circuit) {
            (Some(m), _) => replay_assignment(m, a),
            (None, Some(c)) => replay_assignment_circuit(c, a),
            (None, None) => unreachable!("system without machine or circuit"),
        }
    }
}

pub fn is_aiger(source: &str) -> bool {
    source.trim_start().starts_with("aag")
}

pub fn load_system(source: &str) -> Result<System, PipelineError> {
    if !is_aiger(source) {
        let m = parse_machine_json(source)?;
        return Ok(System { machine: Some(m), circuit: None, unavailable: None });
    }
    let c = parse_aag(source)?;
    match extract_moore(&c, MAX_STATES) {
        Ok(m) => Ok(System { machine: Some(m), circuit: Some(c), unavailable: None }),
        Err(
            e @ (MachineError::TooManyInputs { .. }
            | MachineError::StateBudgetExceeded(_)
            | MachineError::OutputDependsOnInputs(_)),
        ) => {
            info!("state graph not available: {e}");
            Ok(System { machine: None, circuit: Some(c), unavailable: Some(e.to_string()) })
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone)]
pub enum Outcome {
    PassBounded(usize),
    Fail(Box<Bundle>),
}

/// Explains a violating assignment whose trace variables already match the
/// formula prefix.
pub fn explain_assignment(sys: &System, f: &QuantifiedFormula, a: &TraceAssignment) -> Result<Bundle, PipelineError> {
    let states = sys.replay(a)?;
    let (cs, mut vm) = mark_relevant(f, a)?;
    debug!("{} relevant triples before minimization", cs.len());
    let cs = minimize(&cs, f, a)?;
    vm.restrict(&cs);
    let statements = generate_statements(f, a, &cs, &vm);
    Ok(assemble(Parts {
        formula: f,
        assignment: a,
        states: &states,
        causes: &cs,
        verdicts: &vm,
        statements,
        machine: sys.machine.as_ref(),
        dot_unavailable: sys.unavailable.clone(),
    }))
}

pub fn check(sys: &System, f: &QuantifiedFormula, bound: usize) -> Result<Outcome, PipelineError> {
    let m =
        sys.machine.as_ref().ok_or_else(|| PipelineError::NoStateGraph(sys.unavailable.clone().unwrap_or_default()))?;
    match find_counterexample(m, f, bound)? {
        CheckResult::NoCexUpToBound(b) => Ok(Outcome::PassBounded(b)),
        CheckResult::Counterexample(cex) => {
            explain_assignment(sys, f, &cex.assignment).map(|b| Outcome::Fail(Box::new(b)))
        }
    }
}

/// Parses both sources and runs the search.
pub fn check_sources(machine: &str, formula: &str, bound: usize) -> Result<Outcome, PipelineError> {
    let f = parse_formula(formula)?;
    let sys = load_system(machine)?;
    check(&sys, &f, bound)
}

/// Skips the search and explains an external counterexample. Its traces
/// are bound to the formula's trace variables in order.
pub fn explain_sources(machine: &str, cex: &str, formula: &str) -> Result<Bundle, PipelineError> {
    let f = parse_formula(formula)?;
    let sys = load_system(machine)?;
    let a = parse_counterexample(cex, &sys.decls())?.rebind(&f.trace_vars())?;
    explain_assignment(&sys, &f, &a)
}
