//! Signatures, terms over a carrier, substitution and bounded term universes.
//!
//! Carrier elements double as variables: a term over `(A, d_A)` is built from
//! the names of `A` and the operation symbols of the signature.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Operation symbols with their arities.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    ops: BTreeMap<String, usize>,
}

impl Signature {
    pub fn new<I, S>(ops: I) -> Result<Signature>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (name, arity) in ops {
            let name = name.into();
            if !is_valid_name(&name) {
                return Err(Error::Invalid(format!("invalid operation symbol `{name}`")));
            }
            if map.insert(name.clone(), arity).is_some() {
                return Err(Error::Invalid(format!("duplicate operation symbol `{name}`")));
            }
        }
        Ok(Signature { ops: map })
    }

    pub fn empty() -> Signature {
        Signature::default()
    }

    pub fn arity(&self, op: &str) -> Option<usize> {
        self.ops.get(op).copied()
    }

    pub fn ops(&self) -> impl Iterator<Item = (&str, usize)> {
        self.ops.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn has_constant(&self) -> bool {
        self.ops.values().any(|&a| a == 0)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for name in self.ops.keys() {
            if !is_valid_name(name) {
                return Err(Error::Invalid(format!("invalid operation symbol `{name}`")));
            }
        }
        Ok(())
    }

    /// Rejects carriers that reuse an operation symbol as an element name.
    pub fn check_carrier(&self, carrier: &[String]) -> Result<()> {
        for name in carrier {
            if self.ops.contains_key(name) {
                return Err(Error::NameClash(name.clone()));
            }
        }
        Ok(())
    }
}

fn is_valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '\'' | '.' | '-'))
}

/// `(Σ, A)` is nontrivial iff terms over `A` exist at all.
pub fn check_nontrivial(sig: &Signature, carrier: &[String]) -> bool {
    !carrier.is_empty() || sig.has_constant()
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    App(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn app(op: impl Into<String>, args: Vec<Term>) -> Term {
        Term::App(op.into(), args)
    }

    pub fn constant(op: impl Into<String>) -> Term {
        Term::App(op.into(), Vec::new())
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
        }
    }

    fn head(&self) -> &str {
        match self {
            Term::Var(n) | Term::App(n, _) => n,
        }
    }

    /// Variables in order of first occurrence.
    pub fn vars(&self) -> Vec<&str> {
        fn go<'a>(t: &'a Term, out: &mut Vec<&'a str>) {
            match t {
                Term::Var(v) => {
                    if !out.contains(&v.as_str()) {
                        out.push(v);
                    }
                }
                Term::App(_, args) => args.iter().for_each(|a| go(a, out)),
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    /// Checks arities against `sig` and that every variable is in `carrier`.
    pub fn check(&self, sig: &Signature, carrier: &[String]) -> Result<()> {
        match self {
            Term::Var(v) => {
                if carrier.iter().any(|c| c == v) {
                    Ok(())
                } else {
                    Err(Error::UnknownVariable(v.clone()))
                }
            }
            Term::App(op, args) => {
                let expected = sig.arity(op).ok_or_else(|| Error::UnknownOp(op.clone()))?;
                if expected != args.len() {
                    return Err(Error::ArityMismatch {
                        op: op.clone(),
                        expected,
                        got: args.len(),
                    });
                }
                args.iter().try_for_each(|a| a.check(sig, carrier))
            }
        }
    }

    /// Parses prefix syntax such as `u(u(a))` or `f(a, c)`.
    ///
    /// A bare identifier is a constant when the signature declares it with
    /// arity 0 and a variable otherwise. Bracketed names like `[u(a)]` are
    /// read as single variables.
    pub fn parse(text: &str, sig: &Signature) -> Result<Term> {
        let mut p = Parser { src: text.as_bytes(), pos: 0, sig };
        let t = p.term()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(Error::Parse(format!("trailing input in term `{text}`")));
        }
        Ok(t)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    sig: &'a Signature,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!(
            "{msg} at offset {} in `{}`",
            self.pos,
            String::from_utf8_lossy(self.src)
        ))
    }

    fn name(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some(b'[') {
            let mut depth = 0usize;
            while let Some(c) = self.peek() {
                self.pos += 1;
                match c {
                    b'[' => depth += 1,
                    b']' => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
            }
            if depth != 0 {
                return Err(self.err("unbalanced brackets"));
            }
        } else {
            while let Some(c) = self.peek() {
                if c.is_ascii_alphanumeric() || matches!(c, b'_' | b'\'' | b'.' | b'-') || c >= 0x80 {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        if self.pos == start {
            return Err(self.err("expected a name"));
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn term(&mut self) -> Result<Term> {
        let name = self.name()?;
        self.skip_ws();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let mut args = Vec::new();
            self.skip_ws();
            if self.peek() == Some(b')') {
                self.pos += 1;
            } else {
                loop {
                    args.push(self.term()?);
                    self.skip_ws();
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.err("expected `,` or `)`")),
                    }
                }
            }
            let expected = self.sig.arity(&name).ok_or_else(|| Error::UnknownOp(name.clone()))?;
            if expected != args.len() {
                return Err(Error::ArityMismatch { op: name, expected, got: args.len() });
            }
            Ok(Term::App(name, args))
        } else {
            match self.sig.arity(&name) {
                Some(0) => Ok(Term::App(name, Vec::new())),
                Some(expected) => Err(Error::ArityMismatch { op: name, expected, got: 0 }),
                None => Ok(Term::Var(name)),
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::App(op, args) if args.is_empty() => f.write_str(op),
            Term::App(op, args) => {
                write!(f, "{op}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Canonical total order: smaller depth first, then head symbol, then
/// variables before applications, then arguments lexicographically.
pub fn canonical_cmp(a: &Term, b: &Term) -> Ordering {
    a.depth()
        .cmp(&b.depth())
        .then_with(|| a.head().cmp(b.head()))
        .then_with(|| match (a, b) {
            (Term::Var(_), Term::Var(_)) => Ordering::Equal,
            (Term::Var(_), Term::App(..)) => Ordering::Less,
            (Term::App(..), Term::Var(_)) => Ordering::Greater,
            (Term::App(_, xs), Term::App(_, ys)) => {
                for (x, y) in xs.iter().zip(ys) {
                    match canonical_cmp(x, y) {
                        Ordering::Equal => continue,
                        other => return other,
                    }
                }
                xs.len().cmp(&ys.len())
            }
        })
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        canonical_cmp(self, other)
    }
}

/// A total map from the elements of a source carrier to terms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    map: BTreeMap<String, Term>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn with(mut self, var: impl Into<String>, t: Term) -> Substitution {
        self.map.insert(var.into(), t);
        self
    }

    pub fn insert(&mut self, var: impl Into<String>, t: Term) {
        self.map.insert(var.into(), t);
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.map.get(var)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Term)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// True iff every element of `carrier` is mapped.
    pub fn covers(&self, carrier: &[String]) -> bool {
        carrier.iter().all(|c| self.map.contains_key(c))
    }
}

impl FromIterator<(String, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        Substitution { map: iter.into_iter().collect() }
    }
}

/// Simultaneous replacement of variables, extended homomorphically.
pub fn apply_subst(sigma: &Substitution, t: &Term) -> Result<Term> {
    match t {
        Term::Var(v) => sigma
            .get(v)
            .cloned()
            .ok_or_else(|| Error::UnknownVariable(v.clone())),
        Term::App(op, args) => Ok(Term::App(
            op.clone(),
            args.iter().map(|a| apply_subst(sigma, a)).collect::<Result<_>>()?,
        )),
    }
}

/// All terms of depth `<= depth` over `carrier`, in canonical order.
pub fn enumerate_universe(sig: &Signature, carrier: &[String], depth: usize) -> Result<Vec<Term>> {
    if !check_nontrivial(sig, carrier) {
        return Err(Error::TrivialPair);
    }
    if depth == 0 {
        return Err(Error::Invalid("universe depth must be positive".into()));
    }
    sig.check_carrier(carrier)?;

    let mut level: Vec<Term> = carrier.iter().map(|c| Term::Var(c.clone())).collect();
    for (op, arity) in sig.ops() {
        if arity == 0 {
            level.push(Term::constant(op));
        }
    }
    for _ in 1..depth {
        let mut next: BTreeSet<Term> = carrier.iter().map(|c| Term::Var(c.clone())).collect();
        for (op, arity) in sig.ops() {
            for args in tuples(&level, arity) {
                next.insert(Term::App(op.to_string(), args));
            }
        }
        level = next.into_iter().collect();
    }
    level.sort();
    Ok(level)
}

/// Every `n`-tuple over `items`, first position varying slowest.
pub(crate) fn tuples<T: Clone>(items: &[T], n: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::with_capacity(n)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * items.len());
        for prefix in &out {
            for it in items {
                let mut v = prefix.clone();
                v.push(it.clone());
                next.push(v);
            }
        }
        out = next;
    }
    out
}
