//! Derivation trees and an independent replay checker.
//!
//! A [`Derivation`] is a finite tree of rule instances. [`Derivation::check`]
//! re-verifies every node against the rule schemes using only the terms in
//! the tree, the theory and the GMet clauses; it never consults the
//! saturation state that produced the tree.

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::eps::Eps;
use crate::gmet::{Atom, EpsExpr, FuzzySpace};
use crate::logic::Logic;
use crate::qalg::Theory;
use crate::terms::{apply_subst, Substitution, Term};

/// A fact about the target context: `s = t` or `s =_ε t`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Fact {
    Eq(Term, Term),
    Dist(Term, Term, Eps),
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fact::Eq(s, t) => write!(f, "{s} = {t}"),
            Fact::Dist(s, t, e) => write!(f, "d({s},{t}) <= {e}"),
        }
    }
}

impl fmt::Debug for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Fact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    /// An axiom of the theory stated over the target context itself.
    Init { axiom: usize },
    Refl,
    Symm,
    Trans,
    Cong { op: String },
    Subst { axiom: usize, sigma: Vec<(String, Term)> },
    UseVar,
    Max,
    OneMax,
    Horn { clause: String, assignment: Vec<(String, Term)>, params: Vec<(String, Eps)> },
    LCong,
    RCong,
}

impl Rule {
    pub fn tag(&self) -> &'static str {
        match self {
            Rule::Init { .. } => "INIT",
            Rule::Refl => "REFL",
            Rule::Symm => "SYMM",
            Rule::Trans => "TRANS",
            Rule::Cong { .. } => "CONG",
            Rule::Subst { .. } => "SUBST",
            Rule::UseVar => "USEVAR",
            Rule::Max => "MAX",
            Rule::OneMax => "ONEMAX",
            Rule::Horn { .. } => "HORN",
            Rule::LCong => "LCONG",
            Rule::RCong => "RCONG",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub rule: Rule,
    pub conclusion: Fact,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    pub fn leaf(rule: Rule, conclusion: Fact) -> Derivation {
        Derivation { rule, conclusion, premises: Vec::new() }
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    /// Rule tags in pre-order.
    pub fn tags(&self) -> Vec<&'static str> {
        let mut out = vec![self.rule.tag()];
        for p in &self.premises {
            out.extend(p.tags());
        }
        out
    }

    /// Indented multi-line rendering, conclusion first.
    pub fn render(&self) -> String {
        fn go(d: &Derivation, indent: usize, out: &mut String) {
            out.push_str(&"  ".repeat(indent));
            out.push_str(&format!("{}  [{}", d.conclusion, d.rule.tag()));
            match &d.rule {
                Rule::Horn { clause, .. } => out.push_str(&format!(" {clause}")),
                Rule::Init { axiom } | Rule::Subst { axiom, .. } => out.push_str(&format!(" #{axiom}")),
                Rule::Cong { op } => out.push_str(&format!(" {op}")),
                _ => {}
            }
            out.push_str("]\n");
            for p in &d.premises {
                go(p, indent + 1, out);
            }
        }
        let mut out = String::new();
        go(self, 0, &mut out);
        out
    }

    /// Replays the whole tree against the rule schemes.
    pub fn check(&self, logic: &Logic, theory: &Theory, target: &FuzzySpace) -> Result<(), String> {
        for p in &self.premises {
            p.check(logic, theory, target)?;
        }
        self.check_node(logic, theory, target)
            .map_err(|msg| format!("{} at `{}`: {msg}", self.rule.tag(), self.conclusion))
    }

    fn premise_facts(&self) -> Vec<&Fact> {
        self.premises.iter().map(|p| &p.conclusion).collect()
    }

    fn check_node(&self, logic: &Logic, theory: &Theory, target: &FuzzySpace) -> Result<(), String> {
        let prem = self.premise_facts();
        let arity = |n: usize| {
            if prem.len() == n {
                Ok(())
            } else {
                Err(format!("expected {n} premise(s), found {}", prem.len()))
            }
        };
        let on_grid = |e: Eps| {
            if logic.grid.contains(e) {
                Ok(())
            } else {
                Err(format!("{e} is off the grid"))
            }
        };
        match (&self.rule, &self.conclusion) {
            (Rule::Init { axiom }, concl) => {
                arity(0)?;
                let j = theory.judgments.get(*axiom).ok_or("no such axiom")?;
                if !j.context.same_as(target) {
                    return Err("axiom context differs from the target".into());
                }
                let expected = match j.eps {
                    None => Fact::Eq(j.lhs.clone(), j.rhs.clone()),
                    Some(e) => Fact::Dist(j.lhs.clone(), j.rhs.clone(), e),
                };
                expect_eq(concl, &expected)
            }
            (Rule::Refl, Fact::Eq(s, t)) => {
                arity(0)?;
                (s == t).then_some(()).ok_or_else(|| "sides differ".into())
            }
            (Rule::Symm, Fact::Eq(s, t)) => {
                arity(1)?;
                expect_eq(prem[0], &Fact::Eq(t.clone(), s.clone()))
            }
            (Rule::Trans, Fact::Eq(s, t)) => {
                arity(2)?;
                match (prem[0], prem[1]) {
                    (Fact::Eq(a, b), Fact::Eq(c, d)) if a == s && b == c && d == t => Ok(()),
                    _ => Err("premises do not chain".into()),
                }
            }
            (Rule::Cong { op }, Fact::Eq(Term::App(f, xs), Term::App(g, ys))) => {
                if f != op || g != op || xs.len() != ys.len() {
                    return Err("conclusion is not an application of the operation".into());
                }
                arity(xs.len())?;
                for ((x, y), p) in xs.iter().zip(ys).zip(&prem) {
                    expect_eq(p, &Fact::Eq(x.clone(), y.clone()))?;
                }
                Ok(())
            }
            (Rule::Subst { axiom, sigma }, concl) => {
                let j = theory.judgments.get(*axiom).ok_or("no such axiom")?;
                let subst: Substitution = sigma.iter().cloned().collect();
                if !subst.covers(j.context.carrier()) || sigma.len() != j.context.len() {
                    return Err("substitution does not match the axiom context".into());
                }
                for (_, t) in sigma {
                    t.check(&logic.signature, target.carrier()).map_err(|e| e.to_string())?;
                }
                let lhs = apply_subst(&subst, &j.lhs).map_err(|e| e.to_string())?;
                let rhs = apply_subst(&subst, &j.rhs).map_err(|e| e.to_string())?;
                let expected = match j.eps {
                    None => Fact::Eq(lhs, rhs),
                    Some(e) => Fact::Dist(lhs, rhs, e),
                };
                expect_eq(concl, &expected)?;
                let ctx = &j.context;
                let mut psi = Vec::new();
                for i in 0..ctx.len() {
                    for k in 0..ctx.len() {
                        let s = subst.get(ctx.name(i)).expect("covered").clone();
                        let t = subst.get(ctx.name(k)).expect("covered").clone();
                        psi.push(Fact::Dist(s, t, ctx.d(i, k)));
                    }
                }
                arity(psi.len())?;
                for (p, q) in prem.iter().zip(&psi) {
                    expect_eq(p, q)?;
                }
                Ok(())
            }
            (Rule::UseVar, Fact::Dist(Term::Var(a), Term::Var(b), e)) => {
                arity(0)?;
                let d = target.d_by_name(a, b).ok_or("variables outside the target carrier")?;
                (d == *e).then_some(()).ok_or_else(|| format!("target distance is {d}"))
            }
            (Rule::Max, Fact::Dist(s, t, e)) => {
                arity(1)?;
                on_grid(*e)?;
                match prem[0] {
                    Fact::Dist(a, b, f) if a == s && b == t && f <= e => Ok(()),
                    _ => Err("premise is not a smaller bound on the same pair".into()),
                }
            }
            (Rule::OneMax, Fact::Dist(_, _, e)) => {
                arity(0)?;
                (*e == Eps::ONE).then_some(()).ok_or_else(|| "bound must be 1".into())
            }
            (Rule::LCong, Fact::Dist(s, u, e)) => {
                arity(2)?;
                match (prem[0], prem[1]) {
                    (Fact::Eq(a, t), Fact::Dist(b, c, f)) if a == s && b == t && c == u && f == e => Ok(()),
                    _ => Err("premises do not match left congruence".into()),
                }
            }
            (Rule::RCong, Fact::Dist(u, t, e)) => {
                arity(2)?;
                match (prem[0], prem[1]) {
                    (Fact::Eq(s, b), Fact::Dist(a, c, f)) if b == t && a == u && c == s && f == e => Ok(()),
                    _ => Err("premises do not match right congruence".into()),
                }
            }
            (Rule::Horn { clause, assignment, params }, concl) => {
                let c = logic.spec.clause(clause).ok_or("no such clause")?;
                let vars: BTreeMap<&str, &Term> = assignment.iter().map(|(v, t)| (v.as_str(), t)).collect();
                let env: BTreeMap<&str, Eps> = params.iter().map(|(p, e)| (p.as_str(), *e)).collect();
                if vars.len() != c.vars.len() || c.vars.iter().any(|v| !vars.contains_key(v.as_str())) {
                    return Err("assignment does not match the clause variables".into());
                }
                let names = c.params();
                if env.len() != names.len() || names.iter().any(|p| !env.contains_key(p.as_str())) {
                    return Err("parameters do not match the clause".into());
                }
                for e in env.values() {
                    on_grid(*e)?;
                }
                let inst = |a: &Atom| match a {
                    Atom::Eq(x, y) => Fact::Eq(vars[x.as_str()].clone(), vars[y.as_str()].clone()),
                    Atom::Dist(x, y, ex) => {
                        Fact::Dist(vars[x.as_str()].clone(), vars[y.as_str()].clone(), eval_expr(ex, &env))
                    }
                };
                arity(c.premises.len())?;
                for (p, a) in prem.iter().zip(&c.premises) {
                    expect_eq(p, &inst(a))?;
                }
                expect_eq(concl, &inst(&c.conclusion))
            }
            _ => Err("rule does not apply to this kind of fact".into()),
        }
    }
}

fn eval_expr(e: &EpsExpr, env: &BTreeMap<&str, Eps>) -> Eps {
    match e {
        EpsExpr::Const(c) => *c,
        EpsExpr::Param(p) => env[p.as_str()],
        EpsExpr::Add(a, b) => eval_expr(a, env).saturating_add(eval_expr(b, env)),
        EpsExpr::Min1(a) => eval_expr(a, env),
    }
}

fn expect_eq(got: &Fact, want: &Fact) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("expected `{want}`, found `{got}`"))
    }
}

impl Serialize for Derivation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pairs = |xs: &[(String, Term)]| -> BTreeMap<String, String> {
            xs.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()
        };
        let mut m = s.serialize_map(None)?;
        m.serialize_entry("rule", self.rule.tag())?;
        match &self.rule {
            Rule::Init { axiom } => m.serialize_entry("axiom", axiom)?,
            Rule::Cong { op } => m.serialize_entry("op", op)?,
            Rule::Subst { axiom, sigma } => {
                m.serialize_entry("axiom", axiom)?;
                m.serialize_entry("sigma", &pairs(sigma))?;
            }
            Rule::Horn { clause, assignment, params } => {
                m.serialize_entry("clause", clause)?;
                m.serialize_entry("assignment", &pairs(assignment))?;
                let ps: BTreeMap<&str, String> = params.iter().map(|(k, v)| (k.as_str(), v.to_string())).collect();
                m.serialize_entry("params", &ps)?;
            }
            _ => {}
        }
        m.serialize_entry("conclusion", &self.conclusion)?;
        if !self.premises.is_empty() {
            m.serialize_entry("premises", &self.premises)?;
        }
        m.end()
    }
}
