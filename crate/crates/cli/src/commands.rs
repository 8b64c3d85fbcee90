use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use qeqlog_core::{
    DerivationDB, Eps, Error, Fact, FuzzySpace, Judgment, MonadInstance, Term, Theory,
};
use serde_json::{json, Map, Value};

use crate::workspace::Workspace;

pub struct Report {
    pub positive: bool,
    pub body: Value,
}

pub struct Ctx<'a> {
    pub ws: &'a Workspace,
    pub trace: bool,
}

impl Ctx<'_> {
    fn header(&self, command: &str) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("command".into(), json!(command));
        m.insert("grid".into(), json!(self.ws.logic.grid.q()));
        m.insert("depth".into(), json!(self.ws.depth));
        m
    }

    fn report(&self, positive: bool, command: &str, fields: Value) -> Report {
        let mut body = self.header(command);
        if let Value::Object(extra) = fields {
            body.extend(extra);
        }
        Report { positive, body: Value::Object(body) }
    }

    fn term(&self, text: &str, space: &FuzzySpace) -> Result<Term> {
        let sig = &self.ws.logic.signature;
        let t = Term::parse(text, sig).with_context(|| format!("term `{text}`"))?;
        t.check(sig, space.carrier()).with_context(|| format!("term `{text}`"))?;
        Ok(t)
    }

    fn eps(&self, text: &str) -> Result<Eps> {
        let e: Eps = text.parse().with_context(|| format!("epsilon `{text}`"))?;
        self.ws.logic.grid.steps_checked(e)?;
        Ok(e)
    }

    fn saturate(&self, theory: &Theory, space: &FuzzySpace) -> Result<DerivationDB> {
        Ok(self.ws.logic.saturate(theory, space, self.ws.depth)?)
    }

    fn trace_value(&self, db: &DerivationDB, fact: Fact) -> Result<Value> {
        Ok(serde_json::to_value(db.trace(&fact)?)?)
    }

    pub fn check_model(&self, algebra: &str, theory: &str) -> Result<Report> {
        let alg = self.ws.algebra(algebra)?;
        let th = self.ws.theory(theory)?;
        let rep = self.ws.logic.model_report(alg, &th)?;
        Ok(self.report(
            rep.is_model,
            "check-model",
            json!({ "algebra": algebra, "theory": theory, "report": rep, "skipped_overflow": 0 }),
        ))
    }

    pub fn derive(&self, theory: &str, space: &str, lhs: &str, rhs: &str, eps: Option<&str>) -> Result<Report> {
        let th = self.ws.theory(theory)?;
        let sp = self.ws.space(space)?;
        let (s, t) = (self.term(lhs, sp)?, self.term(rhs, sp)?);
        let eps = eps.map(|e| self.eps(e)).transpose()?;
        let db = self.saturate(&th, sp)?;
        let j = Judgment::new(&self.ws.logic.signature, sp.clone(), s.clone(), t.clone(), eps)?;
        let derivable = db.derives(&j)?;
        let distance = db.distance(&s, &t)?;
        let mut fields = json!({
            "theory": theory,
            "space": space,
            "judgment": j.to_string(),
            "derivable": derivable,
            "distance": distance,
            "same_class": db.same_class(&s, &t)?,
            "skipped_overflow": 0,
        });
        if self.trace && derivable {
            let fact = match eps {
                None => Fact::Eq(s, t),
                Some(_) => Fact::Dist(s, t, distance),
            };
            fields["trace"] = self.trace_value(&db, fact)?;
        }
        Ok(self.report(derivable, "derive", fields))
    }

    pub fn distance(&self, theory: &str, space: &str, lhs: &str, rhs: &str) -> Result<Report> {
        let th = self.ws.theory(theory)?;
        let sp = self.ws.space(space)?;
        let (s, t) = (self.term(lhs, sp)?, self.term(rhs, sp)?);
        let db = self.saturate(&th, sp)?;
        let distance = db.distance(&s, &t)?;
        let mut fields = json!({
            "theory": theory,
            "space": space,
            "lhs": s.to_string(),
            "rhs": t.to_string(),
            "distance": distance,
            "same_class": db.same_class(&s, &t)?,
            "skipped_overflow": 0,
        });
        if self.trace {
            fields["trace"] = self.trace_value(&db, Fact::Dist(s, t, distance))?;
        }
        Ok(self.report(true, "distance", fields))
    }

    pub fn free(&self, theory: &str, space: &str) -> Result<Report> {
        let th = self.ws.theory(theory)?;
        let sp = self.ws.space(space)?;
        let f = self.ws.logic.build_free(&th, sp, self.ws.depth)?;
        let check = f.check_is_model()?;
        let positive = check.passed();
        Ok(self.report(
            positive,
            "free",
            json!({
                "theory": theory,
                "space": space,
                "algebra": f,
                "model_check": check,
                "skipped_overflow": check.skipped_overflow,
            }),
        ))
    }

    pub fn entail(
        &self,
        theory: &str,
        space: &str,
        lhs: &str,
        rhs: &str,
        eps: Option<&str>,
        catalog: &[String],
    ) -> Result<Report> {
        let th = self.ws.theory(theory)?;
        let sp = self.ws.space(space)?;
        let (s, t) = (self.term(lhs, sp)?, self.term(rhs, sp)?);
        let eps = eps.map(|e| self.eps(e)).transpose()?;
        let j = Judgment::new(&self.ws.logic.signature, sp.clone(), s, t, eps)?;
        let mut models = Vec::new();
        let mut refuted_by = None;
        for name in catalog {
            let alg = self.ws.algebra(name)?;
            if !self.ws.logic.is_model(alg, &th)? {
                continue;
            }
            models.push(name.clone());
            let sat = self.ws.logic.satisfies(alg, &j)?;
            if !sat.holds && refuted_by.is_none() {
                refuted_by = Some(json!({ "algebra": name, "counterexample": sat.counterexample }));
            }
        }
        let entailed = refuted_by.is_none();
        Ok(self.report(
            entailed,
            "entail",
            json!({
                "theory": theory,
                "judgment": j.to_string(),
                "catalog": catalog,
                "models": models,
                "entailed_by_catalog": entailed,
                "refuted_by": refuted_by,
                "skipped_overflow": 0,
            }),
        ))
    }

    fn monad(&self, theory: &str) -> Result<MonadInstance> {
        Ok(MonadInstance::new(self.ws.logic.clone(), self.ws.theory(theory)?, self.ws.depth))
    }

    pub fn monad_laws(&self, theory: &str, space: &str) -> Result<Report> {
        let m = self.monad(theory)?;
        let laws = m.check_monad_laws(self.ws.space(space)?)?;
        let positive = laws.iter().all(|l| l.report.failed == 0);
        let skipped: u64 = laws.iter().map(|l| l.report.skipped_overflow).sum();
        Ok(self.report(
            positive,
            "monad-laws",
            json!({ "theory": theory, "space": space, "laws": laws, "skipped_overflow": skipped }),
        ))
    }

    pub fn ump(&self, theory: &str, space: &str, algebra: &str, map: &str) -> Result<Report> {
        let th = self.ws.theory(theory)?;
        let sp = self.ws.space(space)?;
        let b = self.ws.algebra(algebra)?;
        let f = parse_map(map, sp, b.space())?;
        let free = self.ws.logic.build_free(&th, sp, self.ws.depth)?;
        let rep = free.check_ump(b, &f)?;
        let ext = free.extend_hom(b, &f)?;
        let extension: BTreeMap<&str, &str> =
            ext.iter().enumerate().map(|(c, &x)| (free.space().name(c), b.space().name(x))).collect();
        Ok(self.report(
            rep.exists && rep.unique,
            "ump",
            json!({
                "theory": theory,
                "space": space,
                "algebra": algebra,
                "exists": rep.exists,
                "unique": rep.unique,
                "candidates": rep.candidates,
                "witnesses": rep.witnesses,
                "extension": extension,
                "skipped_overflow": 0,
            }),
        ))
    }

    pub fn em_check(&self, theory: &str, algebra: &str) -> Result<Report> {
        let m = self.monad(theory)?;
        let b = self.ws.algebra(algebra)?;
        let cand = match m.em_from_model(b) {
            Ok(c) => c,
            Err(e @ (Error::NotAModel(_) | Error::EmLawViolation(_))) => {
                return Ok(self.report(
                    false,
                    "em-check",
                    json!({ "theory": theory, "algebra": algebra, "error": e.to_string() }),
                ));
            }
            Err(e) => return Err(e.into()),
        };
        let free = m.free(b.space())?;
        let h: BTreeMap<&str, &str> =
            cand.h.iter().enumerate().map(|(c, &x)| (free.space().name(c), b.space().name(x))).collect();
        let back = m.model_from_em(&cand)?;
        let same_tables = back.algebra == *b;
        let skipped = back.laws.unit.report.skipped_overflow + back.laws.mult.report.skipped_overflow;
        Ok(self.report(
            back.laws.passed() && back.is_model && back.round_trip && same_tables,
            "em-check",
            json!({
                "theory": theory,
                "algebra": algebra,
                "h": h,
                "laws": back.laws,
                "is_model": back.is_model,
                "round_trip": back.round_trip,
                "reproduces_tables": same_tables,
                "skipped_overflow": skipped,
            }),
        ))
    }
}

/// `a=p,b=q` as an index map from `src` to `dst`.
fn parse_map(text: &str, src: &FuzzySpace, dst: &FuzzySpace) -> Result<Vec<usize>> {
    let mut out: Vec<Option<usize>> = vec![None; src.len()];
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (from, to) = part.split_once('=').ok_or_else(|| anyhow!("map entry `{part}` is not `x=y`"))?;
        let i = src.index_of(from.trim()).ok_or_else(|| anyhow!("`{from}` is not a generator"))?;
        let j = dst.index_of(to.trim()).ok_or_else(|| anyhow!("`{to}` is not an element of the algebra"))?;
        if out[i].replace(j).is_some() {
            bail!("`{from}` is mapped twice");
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| anyhow!("generator `{}` is not mapped", src.name(i))))
        .collect()
}
