#![allow(dead_code)]

use std::fmt::Write;
use std::path::PathBuf;

use hypercex_core::aiger::parse_aag;
use hypercex_workbench::bundle::SCHEMA;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

/// Schema violations of a serialized bundle, empty when it validates.
pub fn schema_errors(bundle_json: &str) -> Vec<String> {
    let schema: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
    let instance: serde_json::Value = serde_json::from_str(bundle_json).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    validator.iter_errors(&instance).map(|e| format!("{} at {}", e, e.instance_path())).collect()
}

pub const DATA_BITS: usize = 17;
pub const DELAY: usize = 6;
pub const CLOCKS: usize = 9;
pub const STEPS: usize = 30;

/// A bus-like circuit with 50 declared variables: a secret `addr` input runs
/// through a six-stage delay line to `sda`, while public data inputs
/// `d0..d16` feed registers `r0..r15` observed by `scl0..scl8`.
pub fn bus_circuit() -> String {
    let inputs = 1 + DATA_BITS;
    let latches = DELAY + 16;
    let in_lit = |k: usize| 2 * (k + 1);
    let a_lit = |k: usize| 2 * (inputs + 1 + k);
    let r_lit = |k: usize| 2 * (inputs + DELAY + 1 + k);
    let gate = 2 * (inputs + latches + 1);
    let mut out = format!("aag {} {inputs} {latches} {} 1\n", inputs + latches + 1, 1 + CLOCKS);
    for k in 0..inputs {
        let _ = writeln!(out, "{}", in_lit(k));
    }
    for k in 0..DELAY {
        let src = if k == 0 { in_lit(0) } else { a_lit(k - 1) };
        let _ = writeln!(out, "{} {src} 0", a_lit(k));
    }
    for k in 0..16 {
        let src = if k == 15 { gate } else { in_lit(1 + k) };
        let _ = writeln!(out, "{} {src} 0", r_lit(k));
    }
    let _ = writeln!(out, "{}", a_lit(DELAY - 1));
    for k in 0..CLOCKS {
        let _ = writeln!(out, "{}", r_lit(k));
    }
    let _ = writeln!(out, "{gate} {} {}", in_lit(DATA_BITS), in_lit(DATA_BITS - 1));
    out.push_str("i0 addr\n");
    for k in 0..DATA_BITS {
        let _ = writeln!(out, "i{} d{k}", k + 1);
    }
    for k in 0..DELAY {
        let _ = writeln!(out, "l{k} a{k}");
    }
    for k in 0..16 {
        let _ = writeln!(out, "l{} r{k}", DELAY + k);
    }
    out.push_str("o0 sda\n");
    for k in 0..CLOCKS {
        let _ = writeln!(out, "o{} scl{k}", k + 1);
    }
    out
}

/// Observational determinism over the public data inputs.
pub fn bus_formula() -> String {
    let eq = |n: &str| format!("({n}[p] <-> {n}[q])");
    let data: Vec<String> = (0..DATA_BITS).map(|k| eq(&format!("d{k}"))).collect();
    let mut outs = vec![eq("sda")];
    outs.extend((0..CLOCKS).map(|k| eq(&format!("scl{k}"))));
    format!("forall p. forall q. G ({}) -> G ({})", data.join(" & "), outs.join(" & "))
}

/// Two simulated runs of [`bus_circuit`] over shared data inputs; `addr`
/// differs only at position 0. The last position repeats the data of the one
/// before it, so the loop of length one closes.
pub fn bus_counterexample() -> String {
    let c = parse_aag(&bus_circuit()).unwrap();
    let mut data: Vec<Vec<bool>> =
        (0..STEPS).map(|t| (0..DATA_BITS).map(|k| (t * 7 + k * 3) % 5 < 2).collect()).collect();
    data[STEPS - 1] = data[STEPS - 2].clone();
    let mut out = format!("cex traces=2 stem={} loop=1\n", STEPS - 1);
    for trace in 0..2 {
        let mut latches = c.initial_state();
        for (t, d) in data.iter().enumerate() {
            let mut inputs = vec![trace == 0 && t == 0];
            inputs.extend(d);
            let outs = c.outputs_at(&latches, &inputs).unwrap();
            let names = c.inputs.iter().map(|i| &i.name).zip(&inputs);
            let names = names.chain(c.latches.iter().map(|l| &l.name).zip(&latches));
            let named: Vec<(&String, bool)> = names.map(|(n, &v)| (n, v)).collect();
            for (n, v) in named.into_iter().chain(c.outputs.iter().map(|o| &o.name).zip(outs)) {
                if v {
                    let _ = writeln!(out, "{trace} {t} {n} 1");
                }
            }
            latches = c.step(&latches, &inputs).unwrap().0;
        }
    }
    out
}
