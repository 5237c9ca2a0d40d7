//! Bounded checking and counterexample explanation for ∀-quantified HyperLTL
//! on finite Moore machines and AIGER circuits.

pub mod aiger;
pub mod checker;
pub mod eval;
pub mod explain;
pub mod formula;
pub mod machine;
pub mod trace;
