//! Workloads shared by the benchmarks.

use qeqlog_core::{Eps, EpsGrid, FuzzySpace, GMetSpec, Judgment, Logic, Signature, Theory};

/// A saturation problem ready to run.
pub struct Workload {
    pub name: &'static str,
    pub logic: Logic,
    pub theory: Theory,
    pub target: FuzzySpace,
    pub depth: usize,
}

impl Workload {
    pub fn run(&self) -> usize {
        self.logic.saturate(&self.theory, &self.target, self.depth).expect("workload saturates").classes().len()
    }
}

fn eps(s: &str) -> Eps {
    s.parse().expect("grid value")
}

fn logic(ops: &[(&str, usize)], q: u32) -> Logic {
    let sig = Signature::new(ops.iter().copied()).expect("signature");
    Logic::new(sig, GMetSpec::met(), EpsGrid::new(q).expect("grid")).expect("logic")
}

fn point(name: &str) -> FuzzySpace {
    FuzzySpace::uniform(&[name], Eps::ZERO).expect("space")
}

/// `u(u(x)) = x` over one generator.
pub fn involution(depth: usize) -> Workload {
    let logic = logic(&[("u", 1)], 4);
    let j = Judgment::parse(&logic.signature, point("x"), "u(u(x))", "x", None).expect("judgment");
    Workload { name: "involution", theory: Theory::new("involution", vec![j]), logic, target: point("a"), depth }
}

/// `u(x) =_{1/4} x` over two generators at distance 1/2.
pub fn quarter_step(depth: usize) -> Workload {
    let logic = logic(&[("u", 1)], 4);
    let j = Judgment::parse(&logic.signature, point("x"), "u(x)", "x", Some(eps("1/4"))).expect("judgment");
    let target = FuzzySpace::uniform(&["a", "b"], eps("1/2")).expect("space");
    Workload { name: "quarter-step", theory: Theory::new("quarter", vec![j]), logic, target, depth }
}

/// Commutativity of a binary operation over three generators.
pub fn commutative(depth: usize) -> Workload {
    let logic = logic(&[("m", 2)], 4);
    let ctx = FuzzySpace::uniform(&["x", "y"], Eps::ONE).expect("space");
    let j = Judgment::parse(&logic.signature, ctx, "m(x,y)", "m(y,x)", None).expect("judgment");
    let target = FuzzySpace::uniform(&["a", "b", "c"], eps("1/2")).expect("space");
    Workload { name: "commutative", theory: Theory::new("comm", vec![j]), logic, target, depth }
}

/// Nonexpansiveness of a unary operation, one axiom per grid value.
pub fn nonexpansive(depth: usize) -> Workload {
    let logic = logic(&[("u", 1)], 4);
    let theory = logic.gen_nonexpansive_axioms("u").expect("axioms");
    let target = FuzzySpace::uniform(&["a", "b"], eps("1/4")).expect("space");
    Workload { name: "nonexpansive", theory, logic, target, depth }
}
