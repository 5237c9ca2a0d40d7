//! AIGER ASCII (`aag`) circuits: parsing and simulation.
//!
//! Literals follow the AIGER conventions: `var = lit / 2`, `lit ^ 1` is the
//! negation, literal 0 is constant false and 1 constant true.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use thiserror::Error;

pub type Lit = u32;

pub fn var(lit: Lit) -> u32 {
    lit >> 1
}

pub fn negate(lit: Lit) -> Lit {
    lit ^ 1
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AigerError {
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("line {line}: literal {lit} exceeds maximum variable index")]
    LiteralOutOfRange { line: usize, lit: Lit },
    #[error("line {line}: and-gate output must be even and larger than its inputs")]
    NonMonotoneAnd { line: usize },
    #[error("line {0}: malformed line")]
    MalformedLine(usize),
    #[error("line {line}: variable {var} defined twice")]
    Redefined { line: usize, var: u32 },
    #[error("literal {0} refers to an undefined variable")]
    UndefinedVariable(Lit),
    #[error("expected {expected} values, got {got}")]
    WidthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Input {
    pub lit: Lit,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Latch {
    pub lit: Lit,
    pub next: Lit,
    pub init: bool,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub lit: Lit,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AndGate {
    pub lhs: Lit,
    pub rhs0: Lit,
    pub rhs1: Lit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AigCircuit {
    pub max_var: u32,
    pub inputs: Vec<Input>,
    pub latches: Vec<Latch>,
    pub outputs: Vec<Output>,
    /// Sorted by `lhs`, which is a topological order since `lhs > rhs`.
    pub ands: Vec<AndGate>,
}

impl AigCircuit {
    pub fn input_names(&self) -> Vec<&str> {
        self.inputs.iter().map(|i| i.name.as_str()).collect()
    }

    pub fn latch_names(&self) -> Vec<&str> {
        self.latches.iter().map(|l| l.name.as_str()).collect()
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.outputs.iter().map(|o| o.name.as_str()).collect()
    }

    pub fn initial_state(&self) -> Vec<bool> {
        self.latches.iter().map(|l| l.init).collect()
    }

    /// Symbol table from literal to name for inputs, latches and outputs.
    pub fn symbol_table(&self) -> BTreeMap<Lit, String> {
        let mut t = BTreeMap::new();
        for i in &self.inputs {
            t.insert(i.lit, i.name.clone());
        }
        for l in &self.latches {
            t.insert(l.lit, l.name.clone());
        }
        for o in &self.outputs {
            t.entry(o.lit).or_insert_with(|| o.name.clone());
        }
        t
    }

    fn check_width(&self, latches: &[bool], inputs: &[bool]) -> Result<(), AigerError> {
        if latches.len() != self.latches.len() {
            return Err(AigerError::WidthMismatch { expected: self.latches.len(), got: latches.len() });
        }
        if inputs.len() != self.inputs.len() {
            return Err(AigerError::WidthMismatch { expected: self.inputs.len(), got: inputs.len() });
        }
        Ok(())
    }

    /// Values of all variables, indexed by variable.
    pub(crate) fn evaluate(&self, latches: &[bool], inputs: &[bool]) -> Vec<bool> {
        let mut v = vec![false; self.max_var as usize + 1];
        for (i, &b) in self.inputs.iter().zip(inputs) {
            v[var(i.lit) as usize] = b;
        }
        for (l, &b) in self.latches.iter().zip(latches) {
            v[var(l.lit) as usize] = b;
        }
        for g in &self.ands {
            v[var(g.lhs) as usize] = lit_value(&v, g.rhs0) && lit_value(&v, g.rhs1);
        }
        v
    }

    pub(crate) fn next_and_outputs(&self, latches: &[bool], inputs: &[bool]) -> (Vec<bool>, Vec<bool>) {
        let v = self.evaluate(latches, inputs);
        let next = self.latches.iter().map(|l| lit_value(&v, l.next)).collect();
        let outs = self.outputs.iter().map(|o| lit_value(&v, o.lit)).collect();
        (next, outs)
    }

    /// Output values under the given latch state and inputs.
    pub fn outputs_at(&self, latches: &[bool], inputs: &[bool]) -> Result<Vec<bool>, AigerError> {
        self.check_width(latches, inputs)?;
        Ok(self.next_and_outputs(latches, inputs).1)
    }

    /// Advances one clock cycle. The returned output set is the label of the
    /// successor state, evaluated under the same input valuation.
    pub fn step(&self, latches: &[bool], inputs: &[bool]) -> Result<(Vec<bool>, BTreeSet<String>), AigerError> {
        self.check_width(latches, inputs)?;
        let (next, _) = self.next_and_outputs(latches, inputs);
        let (_, outs) = self.next_and_outputs(&next, inputs);
        let names = self.outputs.iter().zip(outs).filter(|(_, b)| *b).map(|(o, _)| o.name.clone()).collect();
        Ok((next, names))
    }
}

pub(crate) fn lit_value(values: &[bool], lit: Lit) -> bool {
    values[var(lit) as usize] ^ (lit & 1 == 1)
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self, section: &str) -> Result<(usize, Vec<&'a str>), AigerError> {
        match self.inner.next() {
            Some((i, l)) => Ok((i + 1, l.split_whitespace().collect())),
            None => Err(AigerError::BadHeader(format!("file ends inside the {section} section"))),
        }
    }
}

fn parse_lit(s: &str, line: usize, max_var: u32) -> Result<Lit, AigerError> {
    let lit: Lit = s.parse().map_err(|_| AigerError::MalformedLine(line))?;
    if var(lit) > max_var {
        return Err(AigerError::LiteralOutOfRange { line, lit });
    }
    Ok(lit)
}

/// Parses the ASCII AIGER format. AIGER 1.9 bad/constraint/justice/fairness
/// sections are read and dropped.
pub fn parse_aag(text: &str) -> Result<AigCircuit, AigerError> {
    let mut lines = Lines { inner: text.lines().enumerate().peekable() };
    let (_, header) = lines.next_fields("header")?;
    if header.first() != Some(&"aag") {
        return Err(AigerError::BadHeader("expected `aag` tag".into()));
    }
    let counts: Vec<u32> = header[1..]
        .iter()
        .map(|s| s.parse().map_err(|_| AigerError::BadHeader(format!("bad count `{s}`"))))
        .collect::<Result<_, _>>()?;
    if !(counts.len() == 5 || (6..=9).contains(&counts.len())) {
        return Err(AigerError::BadHeader("expected `aag M I L O A [B C J F]`".into()));
    }
    let [max_var, n_in, n_latch, n_out, n_and] = counts[..5] else { unreachable!() };
    let extra = |k: usize| counts.get(5 + k).copied().unwrap_or(0);
    let (n_bad, n_constraint, n_justice, n_fair) = (extra(0), extra(1), extra(2), extra(3));

    let mut defined = vec![false; max_var as usize + 1];
    let mut define = |lit: Lit, line: usize| -> Result<(), AigerError> {
        let v = var(lit) as usize;
        if v == 0 || defined[v] {
            return Err(AigerError::Redefined { line, var: v as u32 });
        }
        defined[v] = true;
        Ok(())
    };

    let mut inputs = Vec::new();
    for k in 0..n_in {
        let (line, f) = lines.next_fields("input")?;
        let [s] = f[..] else { return Err(AigerError::MalformedLine(line)) };
        let lit = parse_lit(s, line, max_var)?;
        if lit & 1 == 1 {
            return Err(AigerError::MalformedLine(line));
        }
        define(lit, line)?;
        inputs.push(Input { lit, name: format!("i{k}") });
    }

    let mut latches = Vec::new();
    for k in 0..n_latch {
        let (line, f) = lines.next_fields("latch")?;
        let (lit, next, init) = match f[..] {
            [a, b] => (a, b, None),
            [a, b, c] => (a, b, Some(c)),
            _ => return Err(AigerError::MalformedLine(line)),
        };
        let lit = parse_lit(lit, line, max_var)?;
        if lit & 1 == 1 {
            return Err(AigerError::MalformedLine(line));
        }
        let next = parse_lit(next, line, max_var)?;
        let init = match init {
            None | Some("0") => false,
            Some("1") => true,
            Some(s) if s.parse::<Lit>().ok() == Some(lit) => {
                warn!("latch {lit} is uninitialized; assuming reset value 0");
                false
            }
            Some(_) => return Err(AigerError::MalformedLine(line)),
        };
        define(lit, line)?;
        latches.push(Latch { lit, next, init, name: format!("l{k}") });
    }

    let mut outputs = Vec::new();
    for k in 0..n_out {
        let (line, f) = lines.next_fields("output")?;
        let [s] = f[..] else { return Err(AigerError::MalformedLine(line)) };
        outputs.push(Output { lit: parse_lit(s, line, max_var)?, name: format!("o{k}") });
    }

    let mut property_lines = n_bad + n_constraint + n_fair;
    for _ in 0..n_justice {
        let (line, f) = lines.next_fields("justice")?;
        let [s] = f[..] else { return Err(AigerError::MalformedLine(line)) };
        property_lines += s.parse::<u32>().map_err(|_| AigerError::MalformedLine(line))?;
    }
    if property_lines + n_justice > 0 {
        warn!("ignoring AIGER bad/constraint/justice/fairness sections");
    }
    for _ in 0..property_lines {
        let (line, f) = lines.next_fields("property")?;
        let [s] = f[..] else { return Err(AigerError::MalformedLine(line)) };
        parse_lit(s, line, max_var)?;
    }

    let mut ands = Vec::new();
    for _ in 0..n_and {
        let (line, f) = lines.next_fields("and-gate")?;
        let [a, b, c] = f[..] else { return Err(AigerError::MalformedLine(line)) };
        let gate = AndGate {
            lhs: parse_lit(a, line, max_var)?,
            rhs0: parse_lit(b, line, max_var)?,
            rhs1: parse_lit(c, line, max_var)?,
        };
        if gate.lhs & 1 == 1 || gate.lhs <= gate.rhs0 || gate.lhs <= gate.rhs1 {
            return Err(AigerError::NonMonotoneAnd { line });
        }
        define(gate.lhs, line)?;
        ands.push(gate);
    }
    ands.sort_by_key(|g| g.lhs);

    let used = latches
        .iter()
        .map(|l| l.next)
        .chain(outputs.iter().map(|o| o.lit))
        .chain(ands.iter().flat_map(|g| [g.rhs0, g.rhs1]));
    for lit in used {
        if var(lit) != 0 && !defined[var(lit) as usize] {
            return Err(AigerError::UndefinedVariable(lit));
        }
    }

    for (i, raw) in lines.inner {
        let line = i + 1;
        let raw = raw.trim_end();
        if raw == "c" || raw.starts_with("c ") {
            break;
        }
        if raw.is_empty() {
            continue;
        }
        let (key, name) = raw.split_once(' ').ok_or(AigerError::MalformedLine(line))?;
        let (kind, pos) = key.split_at(1);
        let pos: usize = pos.parse().map_err(|_| AigerError::MalformedLine(line))?;
        let slot = match kind {
            "i" => inputs.get_mut(pos).map(|x| &mut x.name),
            "l" => latches.get_mut(pos).map(|x| &mut x.name),
            "o" => outputs.get_mut(pos).map(|x| &mut x.name),
            "b" | "c" | "j" | "f" => continue,
            _ => return Err(AigerError::MalformedLine(line)),
        };
        *slot.ok_or(AigerError::MalformedLine(line))? = name.to_string();
    }

    Ok(AigCircuit { max_var, inputs, latches, outputs, ands })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TOGGLER: &str = "aag 1 0 1 1 0\n2 3\n2\n";

    #[test]
    fn empty_circuit() {
        let c = parse_aag("aag 0 0 0 0 0\n").unwrap();
        assert!(c.inputs.is_empty() && c.latches.is_empty() && c.outputs.is_empty());
        assert_eq!(c.step(&[], &[]).unwrap(), (vec![], BTreeSet::new()));
    }

    #[test]
    fn toggler_alternates() {
        let c = parse_aag(TOGGLER).unwrap();
        assert_eq!(c.latch_names(), vec!["l0"]);
        assert_eq!(c.output_names(), vec!["o0"]);
        let mut state = c.initial_state();
        let mut seen = vec![state[0]];
        for _ in 0..6 {
            state = c.step(&state, &[]).unwrap().0;
            seen.push(state[0]);
        }
        assert_eq!(seen, vec![false, true, false, true, false, true, false]);
        let (next, outs) = c.step(&[false], &[]).unwrap();
        assert_eq!(next, vec![true]);
        assert_eq!(outs, BTreeSet::from(["o0".to_string()]));
    }

    #[test]
    fn constant_false_output() {
        let c = parse_aag("aag 1 1 0 1 0\n2\n0\n").unwrap();
        assert!(c.step(&[], &[false]).unwrap().1.is_empty());
        assert!(c.step(&[], &[true]).unwrap().1.is_empty());
    }

    #[test]
    fn width_mismatch() {
        let c = parse_aag(TOGGLER).unwrap();
        assert_eq!(c.step(&[], &[]), Err(AigerError::WidthMismatch { expected: 1, got: 0 }));
    }

    #[test]
    fn header_errors() {
        assert!(matches!(parse_aag("aag 1 2 0 0 0\n2\n"), Err(AigerError::BadHeader(_))));
        assert!(matches!(parse_aag("aig 0 0 0 0 0\n"), Err(AigerError::BadHeader(_))));
        assert!(matches!(parse_aag("aag 0 0 0\n"), Err(AigerError::BadHeader(_))));
        assert!(matches!(parse_aag(""), Err(AigerError::BadHeader(_))));
    }

    #[test]
    fn literal_and_gate_errors() {
        assert_eq!(parse_aag("aag 1 1 0 0 0\n4\n"), Err(AigerError::LiteralOutOfRange { line: 2, lit: 4 }));
        assert_eq!(parse_aag("aag 3 2 0 1 1\n2\n4\n6\n6 2 7\n"), Err(AigerError::NonMonotoneAnd { line: 5 }));
        assert_eq!(parse_aag("aag 3 2 0 1 1\n2\n4\n6\n7 2 4\n"), Err(AigerError::NonMonotoneAnd { line: 5 }));
        assert_eq!(parse_aag("aag 2 1 0 1 0\n2\n4\n"), Err(AigerError::UndefinedVariable(4)));
        assert_eq!(parse_aag("aag 1 2 0 0 0\n2\n2\n"), Err(AigerError::Redefined { line: 3, var: 1 }));
    }

    #[test]
    fn symbols_and_extensions() {
        let text = "aag 3 2 0 1 1 1\n2\n4\n6\n7\n6 2 4\ni0 req\ni1 ack\no0 both\nb0 never\nc\nfree text\n";
        let c = parse_aag(text).unwrap();
        assert_eq!(c.input_names(), vec!["req", "ack"]);
        assert_eq!(c.output_names(), vec!["both"]);
        assert_eq!(c.symbol_table().get(&2).map(String::as_str), Some("req"));
        assert!(c.outputs_at(&[], &[true, true]).unwrap()[0]);
        assert!(!c.outputs_at(&[], &[true, false]).unwrap()[0]);
    }

    #[test]
    fn justice_sections_are_skipped() {
        let text = "aag 1 1 0 0 0 0 0 1 1\n2\n2\n2\n3\n2\n";
        assert!(parse_aag(text).is_ok());
    }

    #[test]
    fn latch_reset_values() {
        let c = parse_aag("aag 2 0 2 0 0\n2 2 1\n4 4 4\n").unwrap();
        assert_eq!(c.initial_state(), vec![true, false]);
    }
}
