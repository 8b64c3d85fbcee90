//! The monad `M = U∘F` of quotiented terms, truncated at a fixed depth.
//!
//! `M(A)` is the space of classes of the free algebra over `A`, the unit is
//! `a ↦ [a]` and the multiplication flattens a term over classes by
//! substituting each class with its canonical representative. The outer
//! algebra over `M(A)` uses the same depth as the inner one, so flattening
//! can overflow; those points are skipped and counted.
//!
//! The structure map of an Eilenberg–Moore algebra is called `h`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::free::{CheckReport, Evaluated, FreeAlgebra};
use crate::gmet::{is_nonexpansive, FuzzySpace};
use crate::logic::Logic;
use crate::qalg::{eval_term, is_homomorphism, QuantAlgebra, Theory};
use crate::terms::Term;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LawReport {
    pub law: String,
    #[serde(flatten)]
    pub report: CheckReport,
}

impl LawReport {
    fn new(law: &str) -> LawReport {
        LawReport { law: law.to_string(), report: CheckReport::default() }
    }

    /// Points examined, whether checked or skipped for Overflow.
    pub fn total(&self) -> u64 {
        self.report.checked + self.report.skipped_overflow
    }
}

/// A space with a candidate structure map `h: M(space) -> space`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmCandidate {
    pub space: FuzzySpace,
    /// Indexed by the classes of `M(space)`.
    pub h: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EmReport {
    pub nonexpansive: bool,
    pub unit: LawReport,
    pub mult: LawReport,
}

impl EmReport {
    pub fn passed(&self) -> bool {
        self.nonexpansive && self.unit.report.passed() && self.mult.report.passed()
    }
}

/// The algebra induced by an EM candidate and the checks run on it.
#[derive(Clone, Debug)]
pub struct EmModel {
    pub algebra: QuantAlgebra,
    pub laws: EmReport,
    pub is_model: bool,
    /// Rebuilding `h` from the induced algebra gives the candidate back.
    pub round_trip: bool,
}

pub struct MonadInstance {
    logic: Logic,
    theory: Theory,
    depth: usize,
    cache: RwLock<HashMap<String, Arc<FreeAlgebra>>>,
}

impl MonadInstance {
    pub fn new(logic: Logic, theory: Theory, depth: usize) -> MonadInstance {
        MonadInstance { logic, theory, depth, cache: RwLock::new(HashMap::new()) }
    }

    pub fn logic(&self) -> &Logic {
        &self.logic
    }

    pub fn theory(&self) -> &Theory {
        &self.theory
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// The free algebra over `sp`, built once per distinct space.
    pub fn free(&self, sp: &FuzzySpace) -> Result<Arc<FreeAlgebra>> {
        let key = serde_json::to_string(sp).expect("spaces serialize");
        if let Some(f) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(f.clone());
        }
        let built = Arc::new(self.logic.build_free(&self.theory, sp, self.depth)?);
        let mut cache = self.cache.write().expect("cache lock");
        Ok(cache.entry(key).or_insert(built).clone())
    }

    pub fn m_object(&self, sp: &FuzzySpace) -> Result<FuzzySpace> {
        Ok(self.free(sp)?.space().clone())
    }

    pub fn m_unit(&self, sp: &FuzzySpace) -> Result<Vec<usize>> {
        Ok(self.free(sp)?.unit().to_vec())
    }

    /// `M(f)([t]) = [t{f(a)/a}]`.
    pub fn m_map(&self, f: &[usize], src: &FuzzySpace, dst: &FuzzySpace) -> Result<Vec<usize>> {
        if !is_nonexpansive(f, src, dst) {
            return Err(Error::NotNonexpansive("argument of the functor".into()));
        }
        let partial: Vec<Option<usize>> = f.iter().map(|&x| Some(x)).collect();
        let out = self.map_partial(&partial, &*self.free(src)?, &*self.free(dst)?);
        Ok(out.into_iter().map(|c| c.expect("renaming preserves depth")).collect())
    }

    /// Renames the variables of each representative along a partial map.
    /// Renaming never changes depth, so the only undefined points are those
    /// mentioning an undefined argument.
    fn map_partial(&self, f: &[Option<usize>], src: &FreeAlgebra, dst: &FreeAlgebra) -> Vec<Option<usize>> {
        let sb = src.base();
        (0..src.len())
            .map(|c| {
                let rep = src.representative(c);
                let mut ok = true;
                for v in rep.vars() {
                    ok &= f[sb.index_of(v).expect("base variable")].is_some();
                }
                if !ok {
                    return None;
                }
                let var = |v: &str| dst.db().var_id(f[sb.index_of(v).expect("base variable")].expect("defined"));
                let id = dst.db().build(rep, &var).expect("renaming preserves depth");
                Some(dst.class_of_id(id))
            })
            .collect()
    }

    /// `μ: M(M(sp)) -> M(sp)`, flattening through canonical representatives.
    pub fn m_mult(&self, sp: &FuzzySpace) -> Result<Vec<Evaluated>> {
        let inner = self.free(sp)?;
        let outer = self.free(inner.space())?;
        Ok(flatten(&inner, &outer))
    }

    pub fn check_monad_laws(&self, sp: &FuzzySpace) -> Result<Vec<LawReport>> {
        self.check_monad_laws_with(sp, |mu| mu)
    }

    fn check_monad_laws_with(
        &self,
        sp: &FuzzySpace,
        tamper: impl Fn(Vec<Evaluated>) -> Vec<Evaluated>,
    ) -> Result<Vec<LawReport>> {
        let m = self.free(sp)?;
        let mm = self.free(m.space())?;
        let mmm = self.free(mm.space())?;
        let mu = tamper(flatten(&m, &mm));
        let mu_m = flatten(&mm, &mmm);
        let name = |f: &FreeAlgebra, c: usize| f.space().name(c).to_string();

        let mut unit_left = LawReport::new("mu . eta_M = id");
        for c in 0..m.len() {
            match mu[mm.unit()[c]] {
                Evaluated::Class(r) => unit_left.report.record(r == c, || {
                    format!("{} flattens to {}", name(&m, c), name(&m, r))
                }),
                Evaluated::Overflow => unit_left.report.skipped_overflow += 1,
            }
        }

        let mut unit_right = LawReport::new("mu . M(eta) = id");
        let m_eta = self.m_map(m.unit(), sp, m.space())?;
        for c in 0..m.len() {
            match mu[m_eta[c]] {
                Evaluated::Class(r) => unit_right.report.record(r == c, || {
                    format!("{} flattens to {}", name(&m, c), name(&m, r))
                }),
                Evaluated::Overflow => unit_right.report.skipped_overflow += 1,
            }
        }

        let mut assoc = LawReport::new("mu . M(mu) = mu . mu_M");
        let mu_partial: Vec<Option<usize>> = mu.iter().map(|v| v.class()).collect();
        let m_mu = self.map_partial(&mu_partial, &mmm, &mm);
        for c in 0..mmm.len() {
            let left = m_mu[c].and_then(|x| mu[x].class());
            let right = mu_m[c].class().and_then(|x| mu[x].class());
            match (left, right) {
                (Some(l), Some(r)) => assoc.report.record(l == r, || {
                    format!("{}: {} vs {}", name(&mmm, c), name(&m, l), name(&m, r))
                }),
                _ => assoc.report.skipped_overflow += 1,
            }
        }
        Ok(vec![unit_left, unit_right, assoc])
    }

    /// `h([t]) = ⟦t⟧` with the identity interpretation.
    pub fn em_from_model(&self, b: &QuantAlgebra) -> Result<EmCandidate> {
        let report = self.logic.model_report(b, &self.theory)?;
        if !report.is_model {
            return Err(Error::NotAModel(report.judgment.unwrap_or_default()));
        }
        let f = self.free(b.space())?;
        let id: Vec<usize> = (0..b.len()).collect();
        let h = (0..f.len())
            .map(|c| eval_term(b, &|v: &str| b.space().index_of(v), f.representative(c)))
            .collect::<Result<Vec<_>>>()?;
        if !f.respects_classes(b, &id, &h)? {
            return Err(Error::EmLawViolation("evaluation does not respect the derived equality".into()));
        }
        let cand = EmCandidate { space: b.space().clone(), h };
        let laws = self.check_em_laws(&cand)?;
        if !laws.passed() {
            return Err(Error::EmLawViolation(describe(&laws)));
        }
        Ok(cand)
    }

    /// `h` nonexpansive, `h∘η = id` and `h∘M(h) = h∘μ` on non-Overflow classes.
    pub fn check_em_laws(&self, cand: &EmCandidate) -> Result<EmReport> {
        let m = self.free(&cand.space)?;
        if cand.h.len() != m.len() || cand.h.iter().any(|&x| x >= cand.space.len()) {
            return Err(Error::Invalid("structure map must be total on the classes".into()));
        }
        let mm = self.free(m.space())?;
        let h = &cand.h;
        let nonexpansive = is_nonexpansive(h, m.space(), &cand.space);

        let mut unit = LawReport::new("h . eta = id");
        for (a, &c) in m.unit().iter().enumerate() {
            unit.report.record(h[c] == a, || {
                format!("h({}) = {}", m.space().name(c), cand.space.name(h[c]))
            });
        }

        let mut mult = LawReport::new("h . M(h) = h . mu");
        let h_partial: Vec<Option<usize>> = h.iter().map(|&x| Some(x)).collect();
        let m_h = self.map_partial(&h_partial, &mm, &m);
        let mu = flatten(&m, &mm);
        for c in 0..mm.len() {
            let left = m_h[c].map(|x| h[x]);
            let right = mu[c].class().map(|x| h[x]);
            match (left, right) {
                (Some(l), Some(r)) => mult.report.record(l == r, || {
                    format!(
                        "{}: {} vs {}",
                        mm.space().name(c),
                        cand.space.name(l),
                        cand.space.name(r)
                    )
                }),
                _ => mult.report.skipped_overflow += 1,
            }
        }
        Ok(EmReport { nonexpansive, unit, mult })
    }

    /// `op(a⃗) = h([op(a⃗)])`.
    pub fn model_from_em(&self, cand: &EmCandidate) -> Result<EmModel> {
        let laws = self.check_em_laws(cand)?;
        if !laws.passed() {
            return Err(Error::EmLawViolation(describe(&laws)));
        }
        let m = self.free(&cand.space)?;
        let mut missing = None;
        let algebra = QuantAlgebra::from_fn(&self.logic.signature, cand.space.clone(), |op, args| {
            let ids: Vec<usize> = args.iter().map(|&a| m.db().var_id(a)).collect();
            match m.db().lookup_app(op, &ids) {
                Some(id) => cand.h[m.class_of_id(id)],
                None => {
                    missing = Some(op.to_string());
                    0
                }
            }
        })?;
        if let Some(op) = missing {
            return Err(Error::Invalid(format!(
                "depth {} is too small to read off `{op}` from the structure map",
                self.depth
            )));
        }
        let is_model = self.logic.is_model(&algebra, &self.theory)?;
        let round_trip = is_model && self.em_from_model(&algebra).is_ok_and(|back| back == *cand);
        Ok(EmModel { algebra, laws, is_model, round_trip })
    }
}

fn describe(r: &EmReport) -> String {
    if !r.nonexpansive {
        return "structure map is not nonexpansive".into();
    }
    for law in [&r.unit, &r.mult] {
        if let Some(f) = &law.report.first_failure {
            return format!("{}: {f}", law.law);
        }
    }
    "unknown".into()
}

/// `μ` as a table from the classes of `outer = F(M(sp))` to those of
/// `inner = F(sp)`.
fn flatten(inner: &FreeAlgebra, outer: &FreeAlgebra) -> Vec<Evaluated> {
    let carrier = outer.base();
    (0..outer.len())
        .map(|c| {
            let t: &Term = outer.representative(c);
            let var = |v: &str| inner.representative_id(carrier.index_of(v).expect("outer variable"));
            inner.db().build(t, &var).map(|id| inner.class_of_id(id)).into()
        })
        .collect()
}

impl Logic {
    /// The image of a model under a homomorphism with a nonexpansive right
    /// inverse is a model. Returns whether `b` models `theory` after checking
    /// the hypotheses.
    pub fn check_hom_image_model(
        &self,
        theory: &Theory,
        a: &QuantAlgebra,
        b: &QuantAlgebra,
        f: &[usize],
        g: &[usize],
    ) -> Result<bool> {
        let shapes_ok = f.len() == a.len()
            && g.len() == b.len()
            && f.iter().all(|&x| x < b.len())
            && g.iter().all(|&x| x < a.len());
        if !shapes_ok {
            return Err(Error::PreconditionViolation("maps do not fit the carriers".into()));
        }
        if !is_homomorphism(f, a, b) {
            return Err(Error::PreconditionViolation("f is not a homomorphism".into()));
        }
        if !is_nonexpansive(g, b.space(), a.space()) {
            return Err(Error::PreconditionViolation("g is not nonexpansive".into()));
        }
        if (0..b.len()).any(|y| f[g[y]] != y) {
            return Err(Error::PreconditionViolation("f . g is not the identity".into()));
        }
        if !self.is_model(a, theory)? {
            return Err(Error::PreconditionViolation("the source algebra is not a model".into()));
        }
        self.is_model(b, theory)
    }
}
