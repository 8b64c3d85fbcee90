//! Finite fuzzy-relation spaces and the Horn clauses that carve GMet
//! categories out of them.
//!
//! A [`GMetSpec`] is a finite list of Horn clauses over atoms `x = y` and
//! `d(x, y) <= e`, where `e` is built from grid constants, clause parameters,
//! `+` and `min(1, ·)`. Parameters range over the grid. The presets
//! [`Preset::Frel`], [`Preset::Pmet`] and [`Preset::Met`] cover fuzzy
//! relations, pseudometrics and metrics.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::eps::{Eps, EpsGrid};
use crate::error::{Error, Result};

/// A finite carrier with a total distance table.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct FuzzySpace {
    carrier: Vec<String>,
    dist: Vec<Vec<Eps>>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    carrier: Vec<String>,
    dist: Vec<Vec<Eps>>,
}

impl TryFrom<RawSpace> for FuzzySpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<FuzzySpace> {
        FuzzySpace::new(raw.carrier, raw.dist)
    }
}

impl From<FuzzySpace> for RawSpace {
    fn from(sp: FuzzySpace) -> RawSpace {
        RawSpace { carrier: sp.carrier, dist: sp.dist }
    }
}

impl FuzzySpace {
    pub fn new(carrier: Vec<String>, dist: Vec<Vec<Eps>>) -> Result<FuzzySpace> {
        let n = carrier.len();
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::Invalid(format!(
                "distance table must be {n}x{n} for a carrier of size {n}"
            )));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, name) in carrier.iter().enumerate() {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::Invalid(format!("invalid carrier element name `{name}`")));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate carrier element `{name}`")));
            }
        }
        Ok(FuzzySpace { carrier, dist, index })
    }

    /// A space whose distances are given by `f(i, j)`.
    pub fn from_fn(carrier: Vec<String>, f: impl Fn(usize, usize) -> Eps) -> Result<FuzzySpace> {
        let n = carrier.len();
        let dist = (0..n).map(|i| (0..n).map(|j| f(i, j)).collect()).collect();
        FuzzySpace::new(carrier, dist)
    }

    /// Uniform space: self-distance 0, every other pair at `d`.
    pub fn uniform(names: &[&str], d: Eps) -> Result<FuzzySpace> {
        FuzzySpace::from_fn(names.iter().map(|s| s.to_string()).collect(), |i, j| {
            if i == j {
                Eps::ZERO
            } else {
                d
            }
        })
    }

    pub fn len(&self) -> usize {
        self.carrier.len()
    }

    pub fn is_empty(&self) -> bool {
        self.carrier.is_empty()
    }

    pub fn carrier(&self) -> &[String] {
        &self.carrier
    }

    pub fn name(&self, i: usize) -> &str {
        &self.carrier[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn d(&self, i: usize, j: usize) -> Eps {
        self.dist[i][j]
    }

    pub fn d_by_name(&self, a: &str, b: &str) -> Option<Eps> {
        Some(self.d(self.index_of(a)?, self.index_of(b)?))
    }

    pub fn table(&self) -> &[Vec<Eps>] {
        &self.dist
    }

    /// Same elements and the same distances, regardless of carrier order.
    pub fn same_as(&self, other: &FuzzySpace) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let perm: Option<Vec<usize>> = self.carrier.iter().map(|c| other.index_of(c)).collect();
        let Some(perm) = perm else { return false };
        (0..self.len()).all(|i| (0..self.len()).all(|j| self.d(i, j) == other.d(perm[i], perm[j])))
    }

    /// Distance table as grid steps; fails on off-grid entries.
    pub fn steps(&self, grid: &EpsGrid) -> Result<Vec<Vec<u32>>> {
        self.dist
            .iter()
            .map(|row| row.iter().map(|&e| grid.steps_checked(e)).collect())
            .collect()
    }
}

impl fmt::Debug for FuzzySpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FuzzySpace")
            .field("carrier", &self.carrier)
            .field("dist", &self.dist)
            .finish()
    }
}

/// An `ε`-expression: grid constants, parameters, `+` (clamped at 1) and `min(1, ·)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EpsExpr {
    Const(Eps),
    Param(String),
    Add(Box<EpsExpr>, Box<EpsExpr>),
    Min1(Box<EpsExpr>),
}

impl EpsExpr {
    pub fn param(name: &str) -> EpsExpr {
        EpsExpr::Param(name.to_string())
    }

    fn collect_params(&self, out: &mut BTreeSet<String>) {
        match self {
            EpsExpr::Const(_) => {}
            EpsExpr::Param(p) => {
                out.insert(p.clone());
            }
            EpsExpr::Add(a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
            EpsExpr::Min1(a) => a.collect_params(out),
        }
    }

    pub fn parse(text: &str) -> Result<EpsExpr> {
        let tokens = tokenize_expr(text)?;
        let mut pos = 0;
        let e = parse_sum(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(Error::Parse(format!("trailing input in expression `{text}`")));
        }
        Ok(e)
    }
}

impl fmt::Display for EpsExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsExpr::Const(e) => write!(f, "{e}"),
            EpsExpr::Param(p) => f.write_str(p),
            EpsExpr::Add(a, b) => write!(f, "{a}+{b}"),
            EpsExpr::Min1(a) => write!(f, "min(1,{a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Plus,
    Comma,
    Open,
    Close,
}

fn tokenize_expr(text: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ' ' | '\t' => {
                chars.next();
            }
            '+' => {
                chars.next();
                out.push(Tok::Plus);
            }
            ',' => {
                chars.next();
                out.push(Tok::Comma);
            }
            '(' => {
                chars.next();
                out.push(Tok::Open);
            }
            ')' => {
                chars.next();
                out.push(Tok::Close);
            }
            c if c.is_alphanumeric() || matches!(c, '_' | '.' | '/' | '\'') => {
                let mut w = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || matches!(c, '_' | '.' | '/' | '\'') {
                        w.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Tok::Word(w));
            }
            other => {
                return Err(Error::Parse(format!("unexpected `{other}` in expression `{text}`")))
            }
        }
    }
    Ok(out)
}

fn parse_sum(toks: &[Tok], pos: &mut usize) -> Result<EpsExpr> {
    let mut acc = parse_atom(toks, pos)?;
    while toks.get(*pos) == Some(&Tok::Plus) {
        *pos += 1;
        let rhs = parse_atom(toks, pos)?;
        acc = EpsExpr::Add(Box::new(acc), Box::new(rhs));
    }
    Ok(acc)
}

fn parse_atom(toks: &[Tok], pos: &mut usize) -> Result<EpsExpr> {
    let word = match toks.get(*pos) {
        Some(Tok::Word(w)) => w.clone(),
        Some(Tok::Open) => {
            *pos += 1;
            let e = parse_sum(toks, pos)?;
            if toks.get(*pos) != Some(&Tok::Close) {
                return Err(Error::Parse("expected `)`".into()));
            }
            *pos += 1;
            return Ok(e);
        }
        _ => return Err(Error::Parse("expected a constant, parameter or min(1, ...)".into())),
    };
    *pos += 1;
    if word == "min" && toks.get(*pos) == Some(&Tok::Open) {
        *pos += 1;
        let a = parse_sum(toks, pos)?;
        if toks.get(*pos) != Some(&Tok::Comma) {
            return Err(Error::Parse("min takes two arguments".into()));
        }
        *pos += 1;
        let b = parse_sum(toks, pos)?;
        if toks.get(*pos) != Some(&Tok::Close) {
            return Err(Error::Parse("expected `)` after min arguments".into()));
        }
        *pos += 1;
        return match (a, b) {
            (EpsExpr::Const(one), e) | (e, EpsExpr::Const(one)) if one == Eps::ONE => {
                Ok(EpsExpr::Min1(Box::new(e)))
            }
            _ => Err(Error::Parse("only min(1, e) is supported".into())),
        };
    }
    if word.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        Ok(EpsExpr::Const(word.parse()?))
    } else {
        Ok(EpsExpr::Param(word))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Atom {
    Eq(String, String),
    Dist(String, String, EpsExpr),
}

impl Atom {
    fn vars(&self) -> [&str; 2] {
        match self {
            Atom::Eq(x, y) | Atom::Dist(x, y, _) => [x, y],
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Eq(x, y) => write!(f, "{x}={y}"),
            Atom::Dist(x, y, e) => write!(f, "d({x},{y})<={e}"),
        }
    }
}

/// `∀ vars. premises ⇒ conclusion`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HornClause {
    pub name: String,
    pub vars: Vec<String>,
    pub premises: Vec<Atom>,
    pub conclusion: Atom,
}

impl HornClause {
    pub fn new(name: &str, vars: &[&str], premises: Vec<Atom>, conclusion: Atom) -> Result<HornClause> {
        let c = HornClause {
            name: name.to_string(),
            vars: vars.iter().map(|s| s.to_string()).collect(),
            premises,
            conclusion,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let declared: BTreeSet<&str> = self.vars.iter().map(String::as_str).collect();
        if declared.len() != self.vars.len() {
            return Err(Error::Invalid(format!("clause `{}` declares a variable twice", self.name)));
        }
        for atom in self.premises.iter().chain(std::iter::once(&self.conclusion)) {
            for v in atom.vars() {
                if !declared.contains(v) {
                    return Err(Error::Invalid(format!(
                        "clause `{}` uses undeclared variable `{v}`",
                        self.name
                    )));
                }
            }
        }
        if let Some(p) = self.params().iter().find(|p| declared.contains(p.as_str())) {
            return Err(Error::Invalid(format!(
                "clause `{}` uses `{p}` both as a variable and a parameter",
                self.name
            )));
        }
        Ok(())
    }

    /// Parameter names, sorted.
    pub fn params(&self) -> Vec<String> {
        let mut out = BTreeSet::new();
        for atom in self.premises.iter().chain(std::iter::once(&self.conclusion)) {
            if let Atom::Dist(_, _, e) = atom {
                e.collect_params(&mut out);
            }
        }
        out.into_iter().collect()
    }
}

impl fmt::Display for HornClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.name)?;
        for (i, p) in self.premises.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{p}")?;
        }
        if !self.premises.is_empty() {
            f.write_str(" => ")?;
        }
        write!(f, "{}", self.conclusion)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "FREL")]
    Frel,
    #[serde(rename = "PMET")]
    Pmet,
    #[serde(rename = "MET")]
    Met,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Frel => "FREL",
            Preset::Pmet => "PMET",
            Preset::Met => "MET",
        }
    }
}

pub const REFLEXIVITY: &str = "Reflexivity";
pub const SYMMETRY: &str = "Symmetry";
pub const TRIANGLE: &str = "Triangle inequality";
pub const DIST_ZERO_EQ: &str = "Distance zero implies equality";
pub const EQ_DIST_ZERO: &str = "Equality implies distance zero";

/// A GMet category given by Horn clauses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GMetSpec {
    pub name: String,
    pub clauses: Vec<HornClause>,
    preset: Option<Preset>,
}

impl GMetSpec {
    pub fn custom(name: &str, clauses: Vec<HornClause>) -> Result<GMetSpec> {
        for c in &clauses {
            c.validate()?;
        }
        Ok(GMetSpec { name: name.to_string(), clauses, preset: None })
    }

    pub fn preset(p: Preset) -> GMetSpec {
        let dist = |x: &str, y: &str, e: EpsExpr| Atom::Dist(x.into(), y.into(), e);
        let zero = || EpsExpr::Const(Eps::ZERO);
        let clause = |name, vars: &[&str], prem, concl| {
            HornClause::new(name, vars, prem, concl).expect("preset clauses are well formed")
        };
        let mut clauses = Vec::new();
        if matches!(p, Preset::Pmet | Preset::Met) {
            clauses.push(clause(REFLEXIVITY, &["x"], vec![], dist("x", "x", zero())));
            clauses.push(clause(
                SYMMETRY,
                &["x", "y"],
                vec![dist("x", "y", EpsExpr::param("e"))],
                dist("y", "x", EpsExpr::param("e")),
            ));
            clauses.push(clause(
                TRIANGLE,
                &["x", "y", "z"],
                vec![dist("x", "y", EpsExpr::param("e1")), dist("y", "z", EpsExpr::param("e2"))],
                dist(
                    "x",
                    "z",
                    EpsExpr::Min1(Box::new(EpsExpr::Add(
                        Box::new(EpsExpr::param("e1")),
                        Box::new(EpsExpr::param("e2")),
                    ))),
                ),
            ));
        }
        if p == Preset::Met {
            clauses.push(clause(
                DIST_ZERO_EQ,
                &["x", "y"],
                vec![dist("x", "y", zero())],
                Atom::Eq("x".into(), "y".into()),
            ));
            clauses.push(clause(
                EQ_DIST_ZERO,
                &["x", "y"],
                vec![Atom::Eq("x".into(), "y".into())],
                dist("x", "y", zero()),
            ));
        }
        GMetSpec { name: p.name().to_string(), clauses, preset: Some(p) }
    }

    pub fn frel() -> GMetSpec {
        GMetSpec::preset(Preset::Frel)
    }

    pub fn pmet() -> GMetSpec {
        GMetSpec::preset(Preset::Pmet)
    }

    pub fn met() -> GMetSpec {
        GMetSpec::preset(Preset::Met)
    }

    pub fn preset_kind(&self) -> Option<Preset> {
        self.preset
    }

    pub fn clause(&self, name: &str) -> Option<&HornClause> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub(crate) fn compile(&self, grid: &EpsGrid) -> Result<Vec<CompiledClause>> {
        self.clauses.iter().map(|c| CompiledClause::compile(c, grid)).collect()
    }
}

// JSON: {"preset": "MET"} or {"name": ..., "clauses": [...]}.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawSpec {
    Preset { preset: Preset },
    Clauses {
        #[serde(default = "default_spec_name")]
        name: String,
        clauses: Vec<RawClause>,
    },
}

fn default_spec_name() -> String {
    "custom".into()
}

#[derive(Serialize, Deserialize)]
struct RawClause {
    #[serde(default)]
    name: Option<String>,
    vars: Vec<String>,
    #[serde(default)]
    premises: Vec<RawAtom>,
    conclusion: RawAtom,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawAtom {
    Eq([String; 2]),
    Dist((String, String, serde_json::Value)),
}

impl RawAtom {
    fn into_atom(self) -> Result<Atom> {
        match self {
            RawAtom::Eq([x, y]) => Ok(Atom::Eq(x, y)),
            RawAtom::Dist((x, y, e)) => {
                let expr = match e {
                    serde_json::Value::String(s) => EpsExpr::parse(&s)?,
                    serde_json::Value::Number(n) => EpsExpr::Const(n.to_string().parse()?),
                    other => return Err(Error::Parse(format!("invalid epsilon expression {other}"))),
                };
                Ok(Atom::Dist(x, y, expr))
            }
        }
    }

    fn from_atom(a: &Atom) -> RawAtom {
        match a {
            Atom::Eq(x, y) => RawAtom::Eq([x.clone(), y.clone()]),
            Atom::Dist(x, y, e) => {
                RawAtom::Dist((x.clone(), y.clone(), serde_json::Value::String(e.to_string())))
            }
        }
    }
}

impl Serialize for GMetSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = match self.preset {
            Some(preset) => RawSpec::Preset { preset },
            None => RawSpec::Clauses {
                name: self.name.clone(),
                clauses: self
                    .clauses
                    .iter()
                    .map(|c| RawClause {
                        name: Some(c.name.clone()),
                        vars: c.vars.clone(),
                        premises: c.premises.iter().map(RawAtom::from_atom).collect(),
                        conclusion: RawAtom::from_atom(&c.conclusion),
                    })
                    .collect(),
            },
        };
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GMetSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<GMetSpec, D::Error> {
        use serde::de::Error as _;
        match RawSpec::deserialize(d)? {
            RawSpec::Preset { preset } => Ok(GMetSpec::preset(preset)),
            RawSpec::Clauses { name, clauses } => {
                let clauses = clauses
                    .into_iter()
                    .enumerate()
                    .map(|(i, c)| {
                        Ok(HornClause {
                            name: c.name.unwrap_or_else(|| format!("clause{i}")),
                            vars: c.vars,
                            premises: c
                                .premises
                                .into_iter()
                                .map(RawAtom::into_atom)
                                .collect::<Result<_>>()?,
                            conclusion: c.conclusion.into_atom()?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
                    .map_err(D::Error::custom)?;
                GMetSpec::custom(&name, clauses).map_err(D::Error::custom)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Clause evaluation on grid steps, shared by space checking and saturation.

#[derive(Clone, Debug)]
pub(crate) enum StepExpr {
    Const(u32),
    Param(usize),
    Add(Box<StepExpr>, Box<StepExpr>),
    Min1(Box<StepExpr>),
}

impl StepExpr {
    fn compile(e: &EpsExpr, params: &[String], grid: &EpsGrid) -> Result<StepExpr> {
        Ok(match e {
            EpsExpr::Const(v) => StepExpr::Const(grid.steps_checked(*v)?),
            EpsExpr::Param(p) => StepExpr::Param(
                params.iter().position(|x| x == p).expect("parameter collected"),
            ),
            EpsExpr::Add(a, b) => StepExpr::Add(
                Box::new(StepExpr::compile(a, params, grid)?),
                Box::new(StepExpr::compile(b, params, grid)?),
            ),
            EpsExpr::Min1(a) => StepExpr::Min1(Box::new(StepExpr::compile(a, params, grid)?)),
        })
    }

    pub(crate) fn eval(&self, params: &[u32], q: u32) -> u32 {
        match self {
            StepExpr::Const(k) => *k,
            StepExpr::Param(i) => params[*i],
            StepExpr::Add(a, b) => (a.eval(params, q) + b.eval(params, q)).min(q),
            StepExpr::Min1(a) => a.eval(params, q).min(q),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum StepAtom {
    Eq(usize, usize),
    Dist(usize, usize, StepExpr),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Conclusion {
    Eq(usize, usize),
    Dist(usize, usize, u32),
}

#[derive(Clone, Debug)]
pub(crate) struct Firing {
    pub params: Vec<u32>,
    pub conclusion: Conclusion,
}

#[derive(Clone, Debug)]
pub(crate) struct CompiledClause {
    pub name: String,
    pub vars: Vec<String>,
    pub params: Vec<String>,
    pub premises: Vec<StepAtom>,
    pub conclusion: StepAtom,
    /// For each parameter, the premises in which it is the whole bound.
    bare: Vec<Vec<(usize, usize)>>,
}

impl CompiledClause {
    fn compile(c: &HornClause, grid: &EpsGrid) -> Result<CompiledClause> {
        let params = c.params();
        let var = |v: &str| c.vars.iter().position(|x| x == v).expect("validated");
        let atom = |a: &Atom| -> Result<StepAtom> {
            Ok(match a {
                Atom::Eq(x, y) => StepAtom::Eq(var(x), var(y)),
                Atom::Dist(x, y, e) => StepAtom::Dist(var(x), var(y), StepExpr::compile(e, &params, grid)?),
            })
        };
        let premises = c.premises.iter().map(atom).collect::<Result<Vec<_>>>()?;
        let conclusion = atom(&c.conclusion)?;
        let mut bare = vec![Vec::new(); params.len()];
        for p in &premises {
            if let StepAtom::Dist(x, y, StepExpr::Param(i)) = p {
                bare[*i].push((*x, *y));
            }
        }
        Ok(CompiledClause {
            name: c.name.clone(),
            vars: c.vars.clone(),
            params,
            premises,
            conclusion,
            bare,
        })
    }

    fn premises_hold(
        &self,
        q: u32,
        assign: &[usize],
        params: &[u32],
        eq: &impl Fn(usize, usize) -> bool,
        dist: &impl Fn(usize, usize) -> u32,
    ) -> bool {
        self.premises.iter().all(|p| match p {
            StepAtom::Eq(x, y) => eq(assign[*x], assign[*y]),
            StepAtom::Dist(x, y, e) => dist(assign[*x], assign[*y]) <= e.eval(params, q),
        })
    }

    fn conclude(&self, q: u32, assign: &[usize], params: &[u32]) -> Conclusion {
        match &self.conclusion {
            StepAtom::Eq(x, y) => Conclusion::Eq(assign[*x], assign[*y]),
            StepAtom::Dist(x, y, e) => Conclusion::Dist(assign[*x], assign[*y], e.eval(params, q)),
        }
    }

    /// The strongest conclusion this clause yields under `assign`, over all
    /// grid parameter values whose premises hold.
    ///
    /// Bounds are monotone in the parameters, so the satisfying parameter
    /// vectors form an up-set and the conclusion bound is smallest at its
    /// minimal elements. Each parameter is at least the largest distance it
    /// bounds directly; when that lower-bound vector already satisfies every
    /// premise it is the unique minimum. Otherwise the remaining box is
    /// searched exhaustively.
    pub(crate) fn fire(
        &self,
        q: u32,
        assign: &[usize],
        eq: impl Fn(usize, usize) -> bool,
        dist: impl Fn(usize, usize) -> u32,
    ) -> Option<Firing> {
        for p in &self.premises {
            if let StepAtom::Eq(x, y) = p {
                if !eq(assign[*x], assign[*y]) {
                    return None;
                }
            }
        }
        let lower: Vec<u32> = self
            .bare
            .iter()
            .map(|uses| uses.iter().map(|&(x, y)| dist(assign[x], assign[y])).max().unwrap_or(0))
            .collect();
        if self.premises_hold(q, assign, &lower, &eq, &dist) {
            let conclusion = self.conclude(q, assign, &lower);
            return Some(Firing { params: lower, conclusion });
        }
        if self.params.is_empty() {
            return None;
        }
        let mut best: Option<Firing> = None;
        let mut cur = lower.clone();
        loop {
            if self.premises_hold(q, assign, &cur, &eq, &dist) {
                let conclusion = self.conclude(q, assign, &cur);
                let better = match (&best, conclusion) {
                    (None, _) => true,
                    (Some(b), Conclusion::Dist(_, _, v)) => {
                        matches!(b.conclusion, Conclusion::Dist(_, _, w) if v < w)
                    }
                    (Some(_), Conclusion::Eq(..)) => false,
                };
                if better {
                    best = Some(Firing { params: cur.clone(), conclusion });
                    if matches!(conclusion, Conclusion::Eq(..) | Conclusion::Dist(_, _, 0)) {
                        break;
                    }
                }
            }
            // odometer over [lower_i, q]
            let mut i = cur.len();
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if cur[i] < q {
                    cur[i] += 1;
                    break;
                }
                cur[i] = lower[i];
            }
        }
        best
    }
}

// ---------------------------------------------------------------------------

/// One failing clause instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub clause: String,
    pub assignment: Vec<(String, String)>,
    pub params: Vec<(String, Eps)>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "clause `{}` fails at", self.clause)?;
        for (v, e) in &self.assignment {
            write!(f, " {v}={e}")?;
        }
        for (p, e) in &self.params {
            write!(f, " {p}={e}")?;
        }
        Ok(())
    }
}

/// Every clause instance whose premises hold but whose conclusion fails.
pub fn check_space(spec: &GMetSpec, grid: &EpsGrid, sp: &FuzzySpace) -> Result<Vec<Violation>> {
    let steps = sp.steps(grid)?;
    let q = grid.q();
    let mut out = Vec::new();
    for clause in spec.compile(grid)? {
        let k = clause.vars.len();
        for_each_tuple(sp.len(), k, |assign| {
            let firing = clause.fire(q, assign, |a, b| a == b, |a, b| steps[a][b]);
            if let Some(f) = firing {
                let holds = match f.conclusion {
                    Conclusion::Eq(a, b) => a == b,
                    Conclusion::Dist(a, b, v) => steps[a][b] <= v,
                };
                if !holds {
                    out.push(Violation {
                        clause: clause.name.clone(),
                        assignment: clause
                            .vars
                            .iter()
                            .zip(assign)
                            .map(|(v, &i)| (v.clone(), sp.name(i).to_string()))
                            .collect(),
                        params: clause
                            .params
                            .iter()
                            .zip(&f.params)
                            .map(|(p, &k)| (p.clone(), grid.value(k)))
                            .collect(),
                    });
                }
            }
        });
    }
    Ok(out)
}

/// Calls `f` on every `k`-tuple over `0..n` in lexicographic order.
pub(crate) fn for_each_tuple(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k == 0 {
        f(&[]);
        return;
    }
    if n == 0 {
        return;
    }
    let mut cur = vec![0usize; k];
    loop {
        f(&cur);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < n {
                break;
            }
            cur[i] = 0;
        }
    }
}

/// `d_dst(f a, f a') <= d_src(a, a')` for all `a, a'`.
pub fn is_nonexpansive(f: &[usize], src: &FuzzySpace, dst: &FuzzySpace) -> bool {
    f.len() == src.len()
        && f.iter().all(|&b| b < dst.len())
        && (0..src.len()).all(|i| (0..src.len()).all(|j| dst.d(f[i], f[j]) <= src.d(i, j)))
}

/// Visits every nonexpansive map `src -> dst` in lexicographic order
/// (first carrier element varying slowest). The visitor returns `false` to
/// stop early.
pub fn for_each_nonexpansive(
    src: &FuzzySpace,
    dst: &FuzzySpace,
    mut visit: impl FnMut(&[usize]) -> bool,
) {
    fn go(
        i: usize,
        cur: &mut Vec<usize>,
        src: &FuzzySpace,
        dst: &FuzzySpace,
        visit: &mut impl FnMut(&[usize]) -> bool,
    ) -> bool {
        if i == src.len() {
            return visit(cur);
        }
        for b in 0..dst.len() {
            let ok = dst.d(b, b) <= src.d(i, i)
                && (0..i).all(|j| dst.d(cur[j], b) <= src.d(j, i) && dst.d(b, cur[j]) <= src.d(i, j));
            if ok {
                cur.push(b);
                let keep_going = go(i + 1, cur, src, dst, visit);
                cur.pop();
                if !keep_going {
                    return false;
                }
            }
        }
        true
    }
    let mut cur = Vec::with_capacity(src.len());
    go(0, &mut cur, src, dst, &mut visit);
}

pub fn enumerate_nonexpansive(src: &FuzzySpace, dst: &FuzzySpace) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_nonexpansive(src, dst, |m| {
        out.push(m.to_vec());
        true
    });
    out
}

/// The discrete lifting of the `n`-ary product for a preset category.
///
/// FREL puts every pair of tuples at distance 1; PMET and MET use 0 on the
/// diagonal and 1 elsewhere. In both cases every set function out of the
/// lifted power is nonexpansive into any space of the same category.
pub fn discrete_lift(spec: &GMetSpec, sp: &FuzzySpace, n: usize) -> Result<FuzzySpace> {
    let preset = spec
        .preset_kind()
        .ok_or_else(|| Error::UnsupportedPreset(spec.name.clone()))?;
    if n == 0 {
        return Err(Error::Invalid("lifting arity must be positive".into()));
    }
    let idx: Vec<usize> = (0..sp.len()).collect();
    let tuples = crate::terms::tuples(&idx, n);
    let names = tuples
        .iter()
        .map(|t| {
            let parts: Vec<&str> = t.iter().map(|&i| sp.name(i)).collect();
            format!("({})", parts.join(","))
        })
        .collect();
    FuzzySpace::from_fn(names, |i, j| match preset {
        Preset::Frel => Eps::ONE,
        Preset::Pmet | Preset::Met => {
            if i == j {
                Eps::ZERO
            } else {
                Eps::ONE
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> Eps {
        s.parse().unwrap()
    }

    fn space(names: &[&str], rows: &[&[&str]]) -> FuzzySpace {
        FuzzySpace::new(
            names.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.iter().map(|x| e(x)).collect()).collect(),
        )
        .unwrap()
    }

    fn grid() -> EpsGrid {
        EpsGrid::new(4).unwrap()
    }

    #[test]
    fn met_accepts_symmetric_metric() {
        let sp = space(&["a", "b"], &[&["0", "1/2"], &["1/2", "0"]]);
        assert!(check_space(&GMetSpec::met(), &grid(), &sp).unwrap().is_empty());
    }

    #[test]
    fn met_rejects_zero_distance_between_distinct_points() {
        let sp = space(&["a", "b"], &[&["0", "0"], &["0", "0"]]);
        let v = check_space(&GMetSpec::met(), &grid(), &sp).unwrap();
        assert!(v.iter().any(|v| v.clause == DIST_ZERO_EQ));
        assert!(v.iter().all(|v| v.clause == DIST_ZERO_EQ));
        // Fine as a pseudometric.
        assert!(check_space(&GMetSpec::pmet(), &grid(), &sp).unwrap().is_empty());
    }

    #[test]
    fn met_rejects_asymmetry() {
        let sp = space(&["a", "b"], &[&["0", "1/4"], &["1/2", "0"]]);
        let v = check_space(&GMetSpec::met(), &grid(), &sp).unwrap();
        let sym: Vec<_> = v.iter().filter(|v| v.clause == SYMMETRY).collect();
        assert_eq!(sym.len(), 1);
        assert_eq!(sym[0].assignment, vec![("x".into(), "a".into()), ("y".into(), "b".into())]);
        assert_eq!(sym[0].params, vec![("e".into(), e("1/4"))]);
    }

    #[test]
    fn triangle_violation_found() {
        let sp = space(
            &["a", "b", "c"],
            &[&["0", "1/4", "1"], &["1/4", "0", "1/4"], &["1", "1/4", "0"]],
        );
        let v = check_space(&GMetSpec::met(), &grid(), &sp).unwrap();
        assert!(v.iter().any(|v| v.clause == TRIANGLE));
    }

    #[test]
    fn off_grid_distance_is_rejected() {
        let sp = space(&["a", "b"], &[&["0", "1/3"], &["1/3", "0"]]);
        assert!(matches!(
            check_space(&GMetSpec::met(), &grid(), &sp),
            Err(Error::GridMismatch { .. })
        ));
    }

    /// Independent exhaustive check: every variable assignment and every grid
    /// parameter vector, straight from the clause syntax.
    fn brute_violations(spec: &GMetSpec, grid: &EpsGrid, sp: &FuzzySpace) -> usize {
        fn eval(e: &EpsExpr, env: &HashMap<String, Eps>) -> Eps {
            match e {
                EpsExpr::Const(c) => *c,
                EpsExpr::Param(p) => env[p],
                EpsExpr::Add(a, b) => eval(a, env).saturating_add(eval(b, env)),
                EpsExpr::Min1(a) => eval(a, env),
            }
        }
        let mut bad = BTreeSet::new();
        for c in &spec.clauses {
            let params = c.params();
            let mut assigns = vec![HashMap::new()];
            for v in &c.vars {
                let mut next = Vec::new();
                for a in &assigns {
                    for name in sp.carrier() {
                        let mut a2 = a.clone();
                        a2.insert(v.clone(), name.clone());
                        next.push(a2);
                    }
                }
                assigns = next;
            }
            let mut envs = vec![HashMap::new()];
            for p in &params {
                let mut next = Vec::new();
                for env in &envs {
                    for g in grid.values() {
                        let mut e2 = env.clone();
                        e2.insert(p.clone(), g);
                        next.push(e2);
                    }
                }
                envs = next;
            }
            for a in &assigns {
                for env in &envs {
                    let holds = |atom: &Atom| match atom {
                        Atom::Eq(x, y) => a[x] == a[y],
                        Atom::Dist(x, y, ex) => sp.d_by_name(&a[x], &a[y]).unwrap() <= eval(ex, env),
                    };
                    if c.premises.iter().all(holds) && !holds(&c.conclusion) {
                        let mut key: Vec<(String, String)> =
                            a.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
                        key.sort();
                        bad.insert((c.name.clone(), key));
                    }
                }
            }
        }
        bad.len()
    }

    #[test]
    fn check_space_agrees_with_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = grid();
        let custom = GMetSpec::custom(
            "weird",
            vec![HornClause::new(
                "shifted",
                &["x", "y", "z"],
                vec![Atom::Dist("x".into(), "y".into(), EpsExpr::parse("e+1/4").unwrap())],
                Atom::Dist("y".into(), "z".into(), EpsExpr::parse("min(1, e+e)").unwrap()),
            )
            .unwrap()],
        )
        .unwrap();
        for _ in 0..60 {
            let n = rng.gen_range(1..=3);
            let names: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
            let table: Vec<Vec<u32>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(0..=4)).collect()).collect();
            let sp = FuzzySpace::from_fn(names, |i, j| g.value(table[i][j])).unwrap();
            for spec in [GMetSpec::met(), GMetSpec::pmet(), GMetSpec::frel(), custom.clone()] {
                let got = check_space(&spec, &g, &sp).unwrap().len();
                assert_eq!(got, brute_violations(&spec, &g, &sp), "{spec:?} on {sp:?}");
            }
        }
    }

    #[test]
    fn nonexpansive_examples() {
        let met = space(&["p", "q"], &[&["0", "1/2"], &["1/2", "0"]]);
        assert!(is_nonexpansive(&[0, 1], &met, &met));
        let single = space(&["x"], &[&["0"]]);
        assert!(is_nonexpansive(&[1], &single, &met));
        let zero = space(&["a", "b"], &[&["0", "0"], &["0", "0"]]);
        assert!(!is_nonexpansive(&[0, 1], &zero, &met));
    }

    #[test]
    fn enumerate_nonexpansive_examples() {
        let met = space(&["p", "q"], &[&["0", "1/2"], &["1/2", "0"]]);
        let single = space(&["x"], &[&["0"]]);
        assert_eq!(enumerate_nonexpansive(&single, &met), vec![vec![0], vec![1]]);
        assert_eq!(enumerate_nonexpansive(&met, &met).len(), 4);
        let zero = space(&["a", "b"], &[&["0", "0"], &["0", "0"]]);
        assert_eq!(enumerate_nonexpansive(&zero, &met), vec![vec![0, 0], vec![1, 1]]);
    }

    #[test]
    fn lifting_values() {
        let sp = space(&["a", "b"], &[&["0", "1/2"], &["1/2", "0"]]);
        let frel = discrete_lift(&GMetSpec::frel(), &sp, 2).unwrap();
        assert_eq!(frel.len(), 4);
        assert!(frel.table().iter().flatten().all(|&d| d == Eps::ONE));
        let met = discrete_lift(&GMetSpec::met(), &sp, 2).unwrap();
        let ab = met.index_of("(a,b)").unwrap();
        let ba = met.index_of("(b,a)").unwrap();
        assert_eq!(met.d(ab, ab), Eps::ZERO);
        assert_eq!(met.d(ab, ba), Eps::ONE);
        let one = discrete_lift(&GMetSpec::met(), &sp, 1).unwrap();
        assert_eq!(one.carrier(), ["(a)", "(b)"]);
        assert_eq!(one.d(0, 1), Eps::ONE);
        let custom = GMetSpec::custom("none", vec![]).unwrap();
        assert!(matches!(discrete_lift(&custom, &sp, 2), Err(Error::UnsupportedPreset(_))));
    }

    #[test]
    fn spec_json_round_trip() {
        let met: GMetSpec = serde_json::from_str(r#"{"preset":"MET"}"#).unwrap();
        assert_eq!(met, GMetSpec::met());
        let custom: GMetSpec = serde_json::from_str(
            r#"{"clauses":[{"vars":["x","y"],"premises":[{"dist":["x","y","e"]}],"conclusion":{"dist":["y","x","e"]}}]}"#,
        )
        .unwrap();
        assert_eq!(custom.clauses.len(), 1);
        assert_eq!(custom.clauses[0].params(), vec!["e".to_string()]);
        let back: GMetSpec = serde_json::from_str(&serde_json::to_string(&custom).unwrap()).unwrap();
        assert_eq!(back.clauses, custom.clauses);
        let bad = serde_json::from_str::<GMetSpec>(
            r#"{"clauses":[{"vars":["x"],"premises":[],"conclusion":{"eq":["x","y"]}}]}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn space_json() {
        let sp: FuzzySpace =
            serde_json::from_str(r#"{"carrier":["a","b"],"dist":[[0,0.5],["1/2",0]]}"#).unwrap();
        assert_eq!(sp.d(0, 1), e("1/2"));
        assert_eq!(sp.d(1, 0), e("1/2"));
        assert!(serde_json::from_str::<FuzzySpace>(r#"{"carrier":["a","a"],"dist":[[0,0],[0,0]]}"#).is_err());
        assert!(serde_json::from_str::<FuzzySpace>(r#"{"carrier":["a"],"dist":[[0,0]]}"#).is_err());
    }

    #[test]
    fn expr_parsing() {
        assert_eq!(EpsExpr::parse("min(1, e1+e2)").unwrap().to_string(), "min(1,e1+e2)");
        assert_eq!(EpsExpr::parse("1/4 + e").unwrap().to_string(), "1/4+e");
        assert!(EpsExpr::parse("min(e, f)").is_err());
        assert!(EpsExpr::parse("e +").is_err());
    }
}
