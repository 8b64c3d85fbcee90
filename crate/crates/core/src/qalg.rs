//! Finite quantitative algebras and the satisfaction relation.
//!
//! Operations are arbitrary functions on the carrier; nothing forces them to
//! be nonexpansive. Judgments quantify over the nonexpansive interpretations
//! of their context space, which are enumerated exhaustively.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::eps::Eps;
use crate::error::{Error, Result};
use crate::gmet::{for_each_nonexpansive, is_nonexpansive, FuzzySpace};
use crate::logic::{count_maps, Logic};
use crate::terms::{check_nontrivial, Signature, Term};

/// A total operation table, indexed in mixed radix with the first argument
/// most significant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpTable {
    arity: usize,
    entries: Vec<usize>,
}

impl OpTable {
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    fn index(&self, args: &[usize], n: usize) -> usize {
        args.iter().fold(0, |acc, &a| acc * n + a)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantAlgebra {
    space: FuzzySpace,
    ops: BTreeMap<String, OpTable>,
}

impl QuantAlgebra {
    /// Builds the algebra whose `op` sends argument indices `args` to `f(op, args)`.
    pub fn from_fn(
        sig: &Signature,
        space: FuzzySpace,
        mut f: impl FnMut(&str, &[usize]) -> usize,
    ) -> Result<QuantAlgebra> {
        sig.check_carrier(space.carrier())?;
        let n = space.len();
        let idx: Vec<usize> = (0..n).collect();
        let mut ops = BTreeMap::new();
        for (op, arity) in sig.ops() {
            let mut entries = Vec::new();
            for args in crate::terms::tuples(&idx, arity) {
                let v = f(op, &args);
                if v >= n {
                    return Err(Error::Invalid(format!("operation `{op}` leaves the carrier")));
                }
                entries.push(v);
            }
            ops.insert(op.to_string(), OpTable { arity, entries });
        }
        Ok(QuantAlgebra { space, ops })
    }

    pub fn space(&self) -> &FuzzySpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn op(&self, name: &str) -> Option<&OpTable> {
        self.ops.get(name)
    }

    pub fn ops(&self) -> impl Iterator<Item = (&str, &OpTable)> {
        self.ops.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn apply(&self, op: &str, args: &[usize]) -> Result<usize> {
        let table = self.ops.get(op).ok_or_else(|| Error::UnknownOp(op.to_string()))?;
        if table.arity != args.len() {
            return Err(Error::ArityMismatch {
                op: op.to_string(),
                expected: table.arity,
                got: args.len(),
            });
        }
        Ok(table.entries[table.index(args, self.len())])
    }

    /// Same operation symbols with the same arities as `sig`.
    pub fn check_signature(&self, sig: &Signature) -> Result<()> {
        for (op, arity) in sig.ops() {
            match self.ops.get(op) {
                None => return Err(Error::Invalid(format!("algebra has no table for `{op}`"))),
                Some(t) if t.arity != arity => {
                    return Err(Error::ArityMismatch {
                        op: op.to_string(),
                        expected: arity,
                        got: t.arity,
                    })
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = self.ops.keys().find(|k| sig.arity(k).is_none()) {
            return Err(Error::UnknownOp(extra.clone()));
        }
        Ok(())
    }

    /// Resolves the JSON form against a signature.
    pub fn from_def(sig: &Signature, def: AlgebraDef) -> Result<QuantAlgebra> {
        let space = FuzzySpace::new(def.carrier, def.dist)?;
        sig.check_carrier(space.carrier())?;
        for op in def.ops.keys() {
            if sig.arity(op).is_none() {
                return Err(Error::UnknownOp(op.clone()));
            }
        }
        let mut tables = BTreeMap::new();
        for (op, arity) in sig.ops() {
            let raw = def
                .ops
                .get(op)
                .ok_or_else(|| Error::Invalid(format!("algebra has no table for `{op}`")))?;
            let mut entries = BTreeMap::new();
            match (arity, raw) {
                (0, TableDef::Constant(v)) => {
                    entries.insert(Vec::new(), v.clone());
                }
                (_, TableDef::Table(rows)) => {
                    for (key, v) in rows {
                        let args: Vec<&str> = if key.is_empty() { vec![] } else { key.split(',').collect() };
                        if args.len() != arity {
                            return Err(Error::ArityMismatch {
                                op: op.to_string(),
                                expected: arity,
                                got: args.len(),
                            });
                        }
                        let idx = args
                            .iter()
                            .map(|a| {
                                space
                                    .index_of(a.trim())
                                    .ok_or_else(|| Error::Invalid(format!("`{a}` is not in the carrier")))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        entries.insert(idx, v.clone());
                    }
                }
                (_, TableDef::Constant(_)) => {
                    return Err(Error::Invalid(format!("`{op}` has arity {arity} but a constant value")))
                }
            }
            let idx: Vec<usize> = (0..space.len()).collect();
            let mut table = Vec::new();
            for args in crate::terms::tuples(&idx, arity) {
                let name = entries.get(&args).ok_or_else(|| {
                    let shown: Vec<&str> = args.iter().map(|&i| space.name(i)).collect();
                    Error::Invalid(format!("table for `{op}` is missing ({})", shown.join(",")))
                })?;
                table.push(
                    space
                        .index_of(name)
                        .ok_or_else(|| Error::Invalid(format!("`{name}` is not in the carrier")))?,
                );
            }
            if entries.len() != table.len() {
                return Err(Error::Invalid(format!("table for `{op}` has duplicate rows")));
            }
            tables.insert(op.to_string(), OpTable { arity, entries: table });
        }
        Ok(QuantAlgebra { space, ops: tables })
    }

    pub fn to_def(&self) -> AlgebraDef {
        let idx: Vec<usize> = (0..self.len()).collect();
        let ops = self
            .ops
            .iter()
            .map(|(op, t)| {
                let def = if t.arity == 0 {
                    TableDef::Constant(self.space.name(t.entries[0]).to_string())
                } else {
                    TableDef::Table(
                        crate::terms::tuples(&idx, t.arity)
                            .iter()
                            .zip(&t.entries)
                            .map(|(args, &v)| {
                                let key: Vec<&str> = args.iter().map(|&i| self.space.name(i)).collect();
                                (key.join(","), self.space.name(v).to_string())
                            })
                            .collect(),
                    )
                };
                (op.clone(), def)
            })
            .collect();
        AlgebraDef {
            carrier: self.space.carrier().to_vec(),
            dist: self.space.table().to_vec(),
            ops,
        }
    }
}

impl Serialize for QuantAlgebra {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_def().serialize(s)
    }
}

/// JSON form of an algebra: the space fields plus `ops`. Unary and higher
/// tables are keyed by comma-joined argument names; constants map straight
/// to an element.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlgebraDef {
    pub carrier: Vec<String>,
    pub dist: Vec<Vec<Eps>>,
    #[serde(default)]
    pub ops: BTreeMap<String, TableDef>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableDef {
    Constant(String),
    Table(BTreeMap<String, String>),
}

/// Evaluates `t` under the interpretation `tau` of its variables.
pub fn eval_term(alg: &QuantAlgebra, tau: &impl Fn(&str) -> Option<usize>, t: &Term) -> Result<usize> {
    match t {
        Term::Var(v) => tau(v).ok_or_else(|| Error::UnknownVariable(v.clone())),
        Term::App(op, args) => {
            let vals = args.iter().map(|a| eval_term(alg, tau, a)).collect::<Result<Vec<_>>>()?;
            alg.apply(op, &vals)
        }
    }
}

/// `∀(A, d_A). lhs = rhs`, or `lhs =_eps rhs` when `eps` is present.
#[derive(Clone, PartialEq, Eq, Serialize)]
pub struct Judgment {
    pub context: FuzzySpace,
    pub lhs: Term,
    pub rhs: Term,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<Eps>,
}

impl Judgment {
    pub fn new(sig: &Signature, context: FuzzySpace, lhs: Term, rhs: Term, eps: Option<Eps>) -> Result<Judgment> {
        sig.check_carrier(context.carrier())?;
        if !check_nontrivial(sig, context.carrier()) {
            return Err(Error::TrivialPair);
        }
        lhs.check(sig, context.carrier())?;
        rhs.check(sig, context.carrier())?;
        Ok(Judgment { context, lhs, rhs, eps })
    }

    pub fn parse(sig: &Signature, context: FuzzySpace, lhs: &str, rhs: &str, eps: Option<Eps>) -> Result<Judgment> {
        let lhs = Term::parse(lhs, sig)?;
        let rhs = Term::parse(rhs, sig)?;
        Judgment::new(sig, context, lhs, rhs, eps)
    }

    pub fn from_def(sig: &Signature, def: JudgmentDef) -> Result<Judgment> {
        Judgment::parse(sig, def.context, &def.lhs, &def.rhs, def.eps)
    }

    pub fn is_quantitative(&self) -> bool {
        self.eps.is_some()
    }
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "forall{{{}}}. {} ", self.context.carrier().join(","), self.lhs)?;
        match self.eps {
            None => write!(f, "= {}", self.rhs),
            Some(e) => write!(f, "=[{e}] {}", self.rhs),
        }
    }
}

impl fmt::Debug for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JudgmentDef {
    pub context: FuzzySpace,
    pub lhs: String,
    pub rhs: String,
    #[serde(default)]
    pub eps: Option<Eps>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Theory {
    pub name: String,
    pub judgments: Vec<Judgment>,
}

impl Theory {
    pub fn new(name: &str, judgments: Vec<Judgment>) -> Theory {
        Theory { name: name.to_string(), judgments }
    }

    pub fn empty() -> Theory {
        Theory::new("empty", Vec::new())
    }

    pub fn from_def(sig: &Signature, def: TheoryDef) -> Result<Theory> {
        let judgments = def
            .judgments
            .into_iter()
            .map(|j| Judgment::from_def(sig, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(Theory::new(&def.name, judgments))
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TheoryDef {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub judgments: Vec<JudgmentDef>,
}

/// Outcome of checking one judgment against one algebra.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Satisfaction {
    pub holds: bool,
    /// Interpretations examined.
    pub checked: u64,
    /// First failing interpretation, context element to carrier element.
    pub counterexample: Option<BTreeMap<String, String>>,
}

/// Outcome of checking an algebra against a theory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ModelReport {
    pub is_model: bool,
    /// Index into the theory of the first judgment that fails.
    pub failing: Option<usize>,
    pub judgment: Option<String>,
    pub counterexample: Option<BTreeMap<String, String>>,
}

impl Logic {
    fn check_algebra(&self, alg: &QuantAlgebra) -> Result<()> {
        alg.check_signature(&self.signature)?;
        self.require_space(alg.space(), "algebra carrier")
    }

    fn check_judgment(&self, j: &Judgment) -> Result<()> {
        self.signature.check_carrier(j.context.carrier())?;
        j.lhs.check(&self.signature, j.context.carrier())?;
        j.rhs.check(&self.signature, j.context.carrier())?;
        if let Some(e) = j.eps {
            self.grid.steps_checked(e)?;
        }
        self.require_space(&j.context, "judgment context")
    }

    /// Checks `j` under every nonexpansive interpretation of its context
    /// into `alg`, in the order of [`crate::enumerate_nonexpansive`].
    pub fn satisfies(&self, alg: &QuantAlgebra, j: &Judgment) -> Result<Satisfaction> {
        self.check_algebra(alg)?;
        self.check_judgment(j)?;
        self.satisfies_unchecked(alg, j)
    }

    pub(crate) fn satisfies_unchecked(&self, alg: &QuantAlgebra, j: &Judgment) -> Result<Satisfaction> {
        let count = count_maps(alg.len(), j.context.len());
        self.require_budget("interpretations", count, self.budget.interpretations)?;
        let ctx = &j.context;
        let mut checked = 0;
        let mut failure: Option<Vec<usize>> = None;
        let mut error = None;
        for_each_nonexpansive(ctx, alg.space(), |tau| {
            checked += 1;
            let lookup = |v: &str| ctx.index_of(v).map(|i| tau[i]);
            let sides = eval_term(alg, &lookup, &j.lhs).and_then(|l| Ok((l, eval_term(alg, &lookup, &j.rhs)?)));
            let (l, r) = match sides {
                Ok(v) => v,
                Err(e) => {
                    error = Some(e);
                    return false;
                }
            };
            let ok = match j.eps {
                None => l == r,
                Some(e) => alg.space().d(l, r) <= e,
            };
            if !ok {
                failure = Some(tau.to_vec());
            }
            ok
        });
        if let Some(e) = error {
            return Err(e);
        }
        Ok(Satisfaction {
            holds: failure.is_none(),
            checked,
            counterexample: failure.map(|tau| {
                tau.iter()
                    .enumerate()
                    .map(|(i, &b)| (ctx.name(i).to_string(), alg.space().name(b).to_string()))
                    .collect()
            }),
        })
    }

    pub fn model_report(&self, alg: &QuantAlgebra, theory: &Theory) -> Result<ModelReport> {
        self.check_algebra(alg)?;
        for j in &theory.judgments {
            self.check_judgment(j)?;
        }
        for (i, j) in theory.judgments.iter().enumerate() {
            let s = self.satisfies_unchecked(alg, j)?;
            if !s.holds {
                return Ok(ModelReport {
                    is_model: false,
                    failing: Some(i),
                    judgment: Some(j.to_string()),
                    counterexample: s.counterexample,
                });
            }
        }
        Ok(ModelReport { is_model: true, failing: None, judgment: None, counterexample: None })
    }

    pub fn is_model(&self, alg: &QuantAlgebra, theory: &Theory) -> Result<bool> {
        Ok(self.model_report(alg, theory)?.is_model)
    }

    /// `j` holds in every catalog member that models `theory`.
    ///
    /// This only approximates semantic entailment from above: a finite
    /// catalog can miss the model that refutes `j`, so `true` here does not
    /// mean the theory entails `j`. A `false` answer is always a genuine
    /// refutation.
    pub fn entails_catalog(&self, catalog: &[QuantAlgebra], theory: &Theory, j: &Judgment) -> Result<bool> {
        for alg in catalog {
            if self.is_model(alg, theory)? && !self.satisfies(alg, j)?.holds {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `f` is nonexpansive and commutes with every operation.
pub fn is_homomorphism(f: &[usize], a: &QuantAlgebra, b: &QuantAlgebra) -> bool {
    if !is_nonexpansive(f, a.space(), b.space()) {
        return false;
    }
    let idx: Vec<usize> = (0..a.len()).collect();
    a.ops().all(|(op, table)| {
        let Some(tb) = b.op(op) else { return false };
        tb.arity == table.arity
            && crate::terms::tuples(&idx, table.arity).iter().zip(&table.entries).all(|(args, &v)| {
                let mapped: Vec<usize> = args.iter().map(|&x| f[x]).collect();
                f[v] == tb.entries[tb.index(&mapped, b.len())]
            })
    })
}
