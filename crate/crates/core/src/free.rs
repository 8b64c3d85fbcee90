//! The depth-bounded free quantitative algebra over a theory.
//!
//! Classes are the `≡`-classes of the saturated universe, each named by its
//! canonically least member. Operation tables are partial: an entry whose
//! canonical application leaves the universe is [`Evaluated::Overflow`],
//! and every check over the algebra reports how many instances it skipped
//! for that reason.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::deduce::DerivationDB;
use crate::eps::Eps;
use crate::error::{Error, Result};
use crate::gmet::{for_each_nonexpansive, is_nonexpansive, FuzzySpace};
use crate::logic::{count_maps, Logic};
use crate::qalg::{eval_term, QuantAlgebra, Theory};
use crate::terms::Term;

/// A class index, or the marker for a result beyond the depth bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Evaluated {
    Class(usize),
    Overflow,
}

impl Evaluated {
    pub fn class(self) -> Option<usize> {
        match self {
            Evaluated::Class(c) => Some(c),
            Evaluated::Overflow => None,
        }
    }
}

impl From<Option<usize>> for Evaluated {
    fn from(v: Option<usize>) -> Evaluated {
        v.map_or(Evaluated::Overflow, Evaluated::Class)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreeOpTable {
    pub arity: usize,
    /// Mixed-radix over class indices, first argument most significant.
    pub entries: Vec<Evaluated>,
}

#[derive(Clone, Debug)]
pub struct FreeAlgebra {
    db: DerivationDB,
    classes: Vec<usize>,
    class_of: Vec<usize>,
    space: FuzzySpace,
    ops: BTreeMap<String, FreeOpTable>,
    unit: Vec<usize>,
}

/// Counts from checking a universally quantified property over the
/// non-Overflow instances of a bounded structure.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub checked: u64,
    pub skipped_overflow: u64,
    pub failed: u64,
    pub first_failure: Option<String>,
}

impl CheckReport {
    pub(crate) fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failed += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UmpReport {
    pub exists: bool,
    pub unique: bool,
    /// Maps `classes -> B` enumerated.
    pub candidates: u64,
    /// Candidates that are nonexpansive homomorphisms extending `f`.
    pub witnesses: u64,
}

impl Logic {
    /// `F(A, d_A)` truncated at `depth`.
    pub fn build_free(&self, theory: &Theory, a: &FuzzySpace, depth: usize) -> Result<FreeAlgebra> {
        FreeAlgebra::from_db(self.saturate(theory, a, depth)?)
    }
}

impl FreeAlgebra {
    pub fn from_db(db: DerivationDB) -> Result<FreeAlgebra> {
        let classes = db.classes();
        let mut class_of = vec![0; db.universe().len()];
        let pos: BTreeMap<usize, usize> = classes.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        for (id, slot) in class_of.iter_mut().enumerate() {
            *slot = pos[&db.representative(id)];
        }
        let names = classes.iter().map(|&r| format!("[{}]", db.term(r))).collect();
        let space = FuzzySpace::from_fn(names, |i, j| db.distance_ids(classes[i], classes[j]))?;
        let idx: Vec<usize> = (0..classes.len()).collect();
        let mut ops = BTreeMap::new();
        for (op, arity) in db.logic().signature.ops() {
            let entries = crate::terms::tuples(&idx, arity)
                .iter()
                .map(|args| {
                    let reps: Vec<usize> = args.iter().map(|&c| classes[c]).collect();
                    db.lookup_app(op, &reps).map(|id| class_of[id]).into()
                })
                .collect();
            ops.insert(op.to_string(), FreeOpTable { arity, entries });
        }
        let unit = (0..db.target().len()).map(|i| class_of[db.var_id(i)]).collect();
        Ok(FreeAlgebra { db, classes, class_of, space, ops, unit })
    }

    pub fn db(&self) -> &DerivationDB {
        &self.db
    }

    pub fn logic(&self) -> &Logic {
        self.db.logic()
    }

    pub fn theory(&self) -> &Theory {
        self.db.theory()
    }

    /// The generating space `(A, d_A)`.
    pub fn base(&self) -> &FuzzySpace {
        self.db.target()
    }

    pub fn depth(&self) -> usize {
        self.db.depth()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn representative(&self, c: usize) -> &Term {
        self.db.term(self.classes[c])
    }

    pub(crate) fn representative_id(&self, c: usize) -> usize {
        self.classes[c]
    }

    pub fn representatives(&self) -> Vec<&Term> {
        (0..self.len()).map(|c| self.representative(c)).collect()
    }

    pub(crate) fn class_of_id(&self, id: usize) -> usize {
        self.class_of[id]
    }

    pub fn class_of(&self, t: &Term) -> Result<usize> {
        Ok(self.class_of[self.db.term_id(t)?])
    }

    /// The carrier `Terms/≡` with `Δ`, elements named `[rep]`.
    pub fn space(&self) -> &FuzzySpace {
        &self.space
    }

    pub fn delta(&self, c: usize, d: usize) -> Eps {
        self.space.d(c, d)
    }

    pub fn op_table(&self, op: &str) -> Option<&FreeOpTable> {
        self.ops.get(op)
    }

    pub fn ops(&self) -> impl Iterator<Item = (&str, &FreeOpTable)> {
        self.ops.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn apply(&self, op: &str, args: &[usize]) -> Result<Evaluated> {
        let t = self.ops.get(op).ok_or_else(|| Error::UnknownOp(op.to_string()))?;
        if t.arity != args.len() {
            return Err(Error::ArityMismatch { op: op.to_string(), expected: t.arity, got: args.len() });
        }
        Ok(t.entries[args.iter().fold(0, |acc, &a| acc * self.len() + a)])
    }

    /// `a ↦ [a]`.
    pub fn unit(&self) -> &[usize] {
        &self.unit
    }

    /// The class of `t` with each variable replaced by the representative of
    /// its image under `tau`; Overflow when that term exceeds the depth.
    pub fn free_eval(&self, tau: &impl Fn(&str) -> Option<usize>, t: &Term) -> Result<Evaluated> {
        for v in t.vars() {
            if tau(v).is_none_or(|c| c >= self.len()) {
                return Err(Error::UnknownVariable(v.to_string()));
            }
        }
        let rep = |v: &str| self.classes[tau(v).expect("checked")];
        Ok(self.db.build(t, &rep).map(|id| self.class_of[id]).into())
    }

    /// Checks every judgment of the theory in `F` under every nonexpansive
    /// interpretation whose two sides stay inside the universe.
    pub fn check_is_model(&self) -> Result<CheckReport> {
        self.check_judgments(self.theory())
    }

    pub fn check_judgments(&self, theory: &Theory) -> Result<CheckReport> {
        let logic = self.logic();
        let mut report = CheckReport::default();
        for (ji, j) in theory.judgments.iter().enumerate() {
            let count = count_maps(self.len(), j.context.len());
            logic.require_budget("interpretations", count, logic.budget.interpretations)?;
            let mut err = None;
            for_each_nonexpansive(&j.context, &self.space, |tau| {
                let lookup = |v: &str| j.context.index_of(v).map(|i| tau[i]);
                let (l, r) = match (self.free_eval(&lookup, &j.lhs), self.free_eval(&lookup, &j.rhs)) {
                    (Ok(l), Ok(r)) => (l, r),
                    (Err(e), _) | (_, Err(e)) => {
                        err = Some(e);
                        return false;
                    }
                };
                match (l, r) {
                    (Evaluated::Class(l), Evaluated::Class(r)) => {
                        let ok = match j.eps {
                            None => l == r,
                            Some(e) => self.delta(l, r) <= e,
                        };
                        report.record(ok, || {
                            let shown: Vec<String> = tau
                                .iter()
                                .enumerate()
                                .map(|(i, &c)| format!("{}->{}", j.context.name(i), self.space.name(c)))
                                .collect();
                            format!("judgment #{ji} `{j}` fails at {}", shown.join(", "))
                        });
                    }
                    _ => report.skipped_overflow += 1,
                }
                true
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        Ok(report)
    }

    /// The homomorphic extension `f̂([s]) = ⟦s⟧_f` along the unit.
    pub fn extend_hom(&self, b: &QuantAlgebra, f: &[usize]) -> Result<Vec<usize>> {
        let report = self.logic().model_report(b, self.theory())?;
        if !report.is_model {
            return Err(Error::NotAModel(report.judgment.unwrap_or_default()));
        }
        if !is_nonexpansive(f, self.base(), b.space()) {
            return Err(Error::NotNonexpansive("generator map into the algebra".into()));
        }
        self.extension_unchecked(b, f)
    }

    fn extension_unchecked(&self, b: &QuantAlgebra, f: &[usize]) -> Result<Vec<usize>> {
        let base = self.base();
        let tau = |v: &str| base.index_of(v).map(|i| f[i]);
        (0..self.len()).map(|c| eval_term(b, &tau, self.representative(c))).collect()
    }

    /// `g` gives the same value as evaluating every universe term under `f`.
    pub fn respects_classes(&self, b: &QuantAlgebra, f: &[usize], g: &[usize]) -> Result<bool> {
        let base = self.base();
        let tau = |v: &str| base.index_of(v).map(|i| f[i]);
        for (id, t) in self.db.universe().iter().enumerate() {
            if eval_term(b, &tau, t)? != g[self.class_of[id]] {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `g: classes -> B` is nonexpansive for `Δ`, commutes with every
    /// non-Overflow table entry and restricts to `f` along the unit.
    pub fn is_free_hom(&self, b: &QuantAlgebra, f: &[usize], g: &[usize]) -> bool {
        if !is_nonexpansive(g, &self.space, b.space()) {
            return false;
        }
        if self.unit.iter().zip(f).any(|(&c, &x)| g[c] != x) {
            return false;
        }
        let idx: Vec<usize> = (0..self.len()).collect();
        self.ops.iter().all(|(op, table)| {
            crate::terms::tuples(&idx, table.arity).iter().zip(&table.entries).all(|(args, v)| match v {
                Evaluated::Overflow => true,
                Evaluated::Class(c) => {
                    let mapped: Vec<usize> = args.iter().map(|&a| g[a]).collect();
                    b.apply(op, &mapped).is_ok_and(|r| r == g[*c])
                }
            })
        })
    }

    /// Existence and uniqueness of the extension of `f`, uniqueness by
    /// enumerating every map `classes -> B`.
    pub fn check_ump(&self, b: &QuantAlgebra, f: &[usize]) -> Result<UmpReport> {
        let fhat = self.extend_hom(b, f)?;
        let exists = self.is_free_hom(b, f, &fhat);
        let logic = self.logic();
        let total = count_maps(b.len(), self.len());
        logic.require_budget("candidate maps", total, logic.budget.enumeration)?;
        let mut witnesses = 0;
        let mut candidates = 0;
        crate::gmet::for_each_tuple(b.len(), self.len(), |g| {
            candidates += 1;
            if self.is_free_hom(b, f, g) {
                witnesses += 1;
            }
        });
        Ok(UmpReport { exists, unique: witnesses == 1, candidates, witnesses })
    }
}

impl fmt::Display for FreeAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F(")?;
        for (i, name) in self.space.carrier().iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(name)?;
        }
        write!(f, ") at depth {}", self.depth())
    }
}

impl Serialize for FreeAlgebra {
    /// `{classes, delta, ops, unit}` with class names and overflow markers.
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let names = self.space.carrier();
        let idx: Vec<usize> = (0..self.len()).collect();
        let ops: BTreeMap<&str, BTreeMap<String, String>> = self
            .ops
            .iter()
            .map(|(op, t)| {
                let rows = crate::terms::tuples(&idx, t.arity)
                    .iter()
                    .zip(&t.entries)
                    .map(|(args, v)| {
                        let key: Vec<&str> = args.iter().map(|&a| names[a].as_str()).collect();
                        let val = match v {
                            Evaluated::Class(c) => names[*c].clone(),
                            Evaluated::Overflow => "overflow".to_string(),
                        };
                        (key.join(","), val)
                    })
                    .collect();
                (op.as_str(), rows)
            })
            .collect();
        let unit: BTreeMap<&str, &str> = self
            .base()
            .carrier()
            .iter()
            .zip(&self.unit)
            .map(|(a, &c)| (a.as_str(), names[c].as_str()))
            .collect();
        let classes: Vec<String> = self.representatives().iter().map(|t| t.to_string()).collect();
        let mut m = s.serialize_map(Some(4))?;
        m.serialize_entry("classes", &classes)?;
        m.serialize_entry("delta", self.space.table())?;
        m.serialize_entry("ops", &ops)?;
        m.serialize_entry("unit", &unit)?;
        m.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eps::EpsGrid;
    use crate::gmet::GMetSpec;
    use crate::qalg::Judgment;
    use crate::terms::Signature;

    fn e(s: &str) -> Eps {
        s.parse().unwrap()
    }

    fn logic(sig: Signature) -> Logic {
        Logic::new(sig, GMetSpec::met(), EpsGrid::new(4).unwrap()).unwrap()
    }

    fn ab() -> FuzzySpace {
        FuzzySpace::uniform(&["a", "b"], e("1/2")).unwrap()
    }

    fn swap(sig: &Signature) -> QuantAlgebra {
        let sp = FuzzySpace::uniform(&["p", "q"], e("1/2")).unwrap();
        QuantAlgebra::from_fn(sig, sp, |_, a| 1 - a[0]).unwrap()
    }

    #[test]
    fn collapse_has_one_class() {
        let l = logic(Signature::empty());
        let phi = Theory::new("phi1", vec![Judgment::parse(&l.signature, ab(), "a", "b", Some(Eps::ZERO)).unwrap()]);
        let f = l.build_free(&phi, &ab(), 1).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.unit(), [0, 0]);
    }

    #[test]
    fn generators_and_constants() {
        let sig = Signature::new([("u", 1), ("c", 0)]).unwrap();
        let l = logic(sig.clone());
        let a = FuzzySpace::uniform(&["a"], Eps::ZERO).unwrap();
        let f = l.build_free(&Theory::empty(), &a, 2).unwrap();
        let reps: Vec<String> = f.representatives().iter().map(|t| t.to_string()).collect();
        assert_eq!(reps, ["a", "c", "u(a)", "u(c)"]);
        assert_eq!(f.delta(0, 1), Eps::ONE);
        assert_eq!(f.apply("u", &[0]).unwrap(), Evaluated::Class(2));
        assert_eq!(f.apply("u", &[2]).unwrap(), Evaluated::Overflow);
        assert_eq!(f.space().carrier()[2], "[u(a)]");

        let l0 = logic(Signature::empty());
        let g = l0.build_free(&Theory::empty(), &ab(), 1).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.delta(0, 1), e("1/2"));
    }

    #[test]
    fn free_eval_examples() {
        let sig = Signature::new([("u", 1)]).unwrap();
        let l = logic(sig.clone());
        let f = l.build_free(&Theory::empty(), &ab(), 2).unwrap();
        let x = |s: &str| Term::parse(s, &sig).unwrap();
        let ua = f.class_of(&x("u(a)")).unwrap();
        let a = f.class_of(&x("a")).unwrap();
        assert_eq!(f.free_eval(&|_| Some(ua), &x("x")).unwrap(), Evaluated::Class(ua));
        assert_eq!(f.free_eval(&|_| Some(a), &x("u(x)")).unwrap(), Evaluated::Class(ua));
        assert_eq!(f.free_eval(&|_| Some(ua), &x("u(x)")).unwrap(), Evaluated::Overflow);
        assert!(f.free_eval(&|_| None, &x("u(x)")).is_err());
    }

    #[test]
    fn free_algebra_satisfies_theory_and_corruption_is_caught() {
        let sig = Signature::new([("u", 1)]).unwrap();
        let l = logic(sig.clone());
        let x = FuzzySpace::uniform(&["x"], Eps::ZERO).unwrap();
        let phi = Theory::new("phi", vec![Judgment::parse(&sig, x, "u(x)", "x", Some(e("1/4"))).unwrap()]);
        let mut f = l.build_free(&phi, &ab(), 3).unwrap();
        let report = f.check_is_model().unwrap();
        assert_eq!(report.failed, 0);
        assert!(report.checked > 0);
        assert!(report.skipped_overflow > 0);

        let n = f.len();
        let names = f.space.carrier().to_vec();
        let corrupted = FuzzySpace::from_fn(names, |i, j| if i == j { Eps::ZERO } else { Eps::ONE }).unwrap();
        assert!(n > 1);
        f.space = corrupted;
        let report = f.check_is_model().unwrap();
        assert!(report.failed > 0);
        assert!(report.first_failure.is_some());
    }

    #[test]
    fn extension_and_ump() {
        let sig = Signature::new([("u", 1)]).unwrap();
        let l = logic(sig.clone());
        let b = swap(&sig);
        let f = l.build_free(&Theory::empty(), &ab(), 2).unwrap();
        let fhat = f.extend_hom(&b, &[0, 1]).unwrap();
        let ua = f.class_of(&Term::parse("u(a)", &sig).unwrap()).unwrap();
        assert_eq!(fhat[ua], 1);
        assert_eq!(f.unit().iter().map(|&c| fhat[c]).collect::<Vec<_>>(), [0, 1]);
        assert!(f.respects_classes(&b, &[0, 1], &fhat).unwrap());
        let ump = f.check_ump(&b, &[0, 1]).unwrap();
        assert!(ump.exists && ump.unique);
        assert_eq!(ump.candidates, 16);

        let near = FuzzySpace::uniform(&["a", "b"], Eps::ZERO).unwrap();
        let pm = Logic::new(sig.clone(), GMetSpec::pmet(), EpsGrid::new(4).unwrap()).unwrap();
        let f0 = pm.build_free(&Theory::empty(), &near, 2).unwrap();
        assert!(matches!(f0.extend_hom(&b, &[0, 1]), Err(Error::NotNonexpansive(_))));
    }

    #[test]
    fn extension_requires_a_model() {
        let sig = Signature::new([("u", 1)]).unwrap();
        let l = logic(sig.clone());
        let phi = Theory::new("phi1", vec![Judgment::parse(&sig, ab(), "a", "b", Some(Eps::ZERO)).unwrap()]);
        let f = l.build_free(&phi, &ab(), 2).unwrap();
        assert!(matches!(f.extend_hom(&swap(&sig), &[0, 1]), Err(Error::NotAModel(_))));
    }
}
