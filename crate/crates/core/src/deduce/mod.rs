//! Forward-chaining saturation for the quantitative deductive system over a
//! depth-bounded term universe.
//!
//! A [`DerivationDB`] holds, for one target context, the derived equality
//! (as a union-find whose roots are the canonically least class members)
//! and the least derived distance between every pair of classes. Every
//! change is logged as an event naming the rule instance and the facts it
//! used, so any stored fact can be unfolded into a [`Derivation`].
//!
//! Derivations are sound for the unbounded calculus but may be incomplete:
//! a rule instance fires only when every term it mentions lies inside the
//! universe. Raising the depth never removes a derivation.

mod proof;

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

pub use proof::{Derivation, Fact, Rule};

use crate::eps::{Eps, EpsGrid};
use crate::error::{Error, Result};
use crate::gmet::{check_space, for_each_tuple, CompiledClause, Conclusion, FuzzySpace, StepAtom};
use crate::logic::Logic;
use crate::qalg::{Judgment, Theory};
use crate::terms::{check_nontrivial, enumerate_universe, Signature, Term};

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
enum Node {
    Var,
    App(usize, Vec<usize>),
}

/// A `dmin` entry: grid steps and the event that set it (`NONE` = 1-Max).
#[derive(Clone, Copy, Debug)]
struct Cell {
    k: u32,
    via: u32,
}

#[derive(Clone, Debug)]
enum IFact {
    Eq(usize, usize),
    Dist(usize, usize, u32),
}

#[derive(Clone, Debug)]
enum IPremise {
    Eq(usize, usize),
    Dist { s: usize, t: usize, bound: u32, via: u32 },
}

#[derive(Clone, Debug)]
enum IRule {
    Init(usize),
    Cong(usize),
    Subst { axiom: usize, sigma: Vec<usize> },
    UseVar,
    Horn { clause: usize, assign: Vec<usize>, params: Vec<u32> },
}

#[derive(Clone, Debug)]
struct Event {
    rule: IRule,
    conclusion: IFact,
    premises: Vec<IPremise>,
}

/// An axiom of the theory compiled against the universe's symbol table.
#[derive(Clone, Debug)]
enum Pattern {
    Var(usize),
    App(usize, Vec<Pattern>),
}

#[derive(Clone, Debug)]
struct Axiom {
    ctx: Vec<Vec<u32>>,
    lhs: Pattern,
    rhs: Pattern,
    eps: Option<u32>,
    init: bool,
}

/// Counters from one saturation run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SaturationStats {
    pub rounds: u64,
    pub instances: u64,
    pub merges: u64,
    pub lowerings: u64,
}

#[derive(Clone, Debug)]
pub struct DerivationDB {
    logic: Logic,
    theory: Theory,
    target: FuzzySpace,
    depth: usize,
    universe: Vec<Term>,
    index: HashMap<Term, usize>,
    ops: Vec<String>,
    nodes: Vec<Node>,
    apps: HashMap<(usize, Vec<usize>), usize>,
    vars: Vec<usize>,
    parent: Vec<usize>,
    dmin: Vec<Cell>,
    events: Vec<Event>,
    edges: Vec<Vec<(usize, u32)>>,
    clauses: Vec<CompiledClause>,
    axioms: Vec<Axiom>,
    stats: SaturationStats,
}

/// `|U_depth|` by the level recurrence, saturating.
pub(crate) fn universe_size(sig: &Signature, carrier: usize, depth: usize) -> u64 {
    let mut level = carrier as u64 + sig.ops().filter(|(_, a)| *a == 0).count() as u64;
    for _ in 1..depth {
        let mut next = carrier as u64;
        for (_, arity) in sig.ops() {
            next = next.saturating_add(crate::logic::count_maps(level as usize, arity));
        }
        level = next;
    }
    level
}

impl Logic {
    /// Saturates `theory` over the universe of terms of depth `<= depth` on
    /// the carrier of `target`.
    pub fn saturate(&self, theory: &Theory, target: &FuzzySpace, depth: usize) -> Result<DerivationDB> {
        self.require_space(target, "target")?;
        self.signature.check_carrier(target.carrier())?;
        if !check_nontrivial(&self.signature, target.carrier()) {
            return Err(Error::TrivialPair);
        }
        for j in &theory.judgments {
            self.require_space(&j.context, "axiom context")?;
            self.signature.check_carrier(j.context.carrier())?;
            j.lhs.check(&self.signature, j.context.carrier())?;
            j.rhs.check(&self.signature, j.context.carrier())?;
            if let Some(e) = j.eps {
                self.grid.steps_checked(e)?;
            }
        }
        let size = universe_size(&self.signature, target.len(), depth.max(1));
        self.require_budget("universe size", size, self.budget.terms)?;
        let mut db = DerivationDB::new(self, theory, target, depth)?;
        db.run()?;
        Ok(db)
    }

    /// One judgment per grid value `ε`: `op(x1..xn) =_ε op(y1..yn)` over the
    /// context with `d(xi, yi) = ε`, self-distances 0 and everything else 1.
    /// A model of these judgments interprets `op` nonexpansively with respect
    /// to the discrete product distance. Contexts the spec rejects (such as
    /// `ε = 0` under MET) are left out.
    pub fn gen_nonexpansive_axioms(&self, op: &str) -> Result<Theory> {
        let n = self.signature.arity(op).ok_or_else(|| Error::UnknownOp(op.to_string()))?;
        if n == 0 {
            return Err(Error::Invalid(format!("`{op}` is a constant")));
        }
        let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).chain((1..=n).map(|i| format!("y{i}"))).collect();
        let lhs = Term::app(op, (1..=n).map(|i| Term::var(format!("x{i}"))).collect());
        let rhs = Term::app(op, (1..=n).map(|i| Term::var(format!("y{i}"))).collect());
        let mut judgments = Vec::new();
        for eps in self.grid.values() {
            let ctx = FuzzySpace::from_fn(names.clone(), |i, j| {
                if i == j {
                    Eps::ZERO
                } else if i.abs_diff(j) == n {
                    eps
                } else {
                    Eps::ONE
                }
            })?;
            if check_space(&self.spec, &self.grid, &ctx)?.is_empty() {
                judgments.push(Judgment::new(&self.signature, ctx, lhs.clone(), rhs.clone(), Some(eps))?);
            }
        }
        Ok(Theory::new(&format!("nonexpansive({op})"), judgments))
    }
}

impl DerivationDB {
    fn new(logic: &Logic, theory: &Theory, target: &FuzzySpace, depth: usize) -> Result<DerivationDB> {
        let universe = enumerate_universe(&logic.signature, target.carrier(), depth)?;
        let ops: Vec<String> = logic.signature.ops().map(|(o, _)| o.to_string()).collect();
        let op_idx: HashMap<&str, usize> = ops.iter().enumerate().map(|(i, o)| (o.as_str(), i)).collect();
        let index: HashMap<Term, usize> = universe.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        let mut nodes = Vec::with_capacity(universe.len());
        let mut apps = HashMap::new();
        for (id, t) in universe.iter().enumerate() {
            match t {
                Term::Var(_) => nodes.push(Node::Var),
                Term::App(op, args) => {
                    let arg_ids: Vec<usize> = args.iter().map(|a| index[a]).collect();
                    let o = op_idx[op.as_str()];
                    apps.insert((o, arg_ids.clone()), id);
                    nodes.push(Node::App(o, arg_ids));
                }
            }
        }
        let vars = target.carrier().iter().map(|c| index[&Term::Var(c.clone())]).collect();
        let steps = |sp: &FuzzySpace| sp.steps(&logic.grid);
        let compile = |t: &Term, ctx: &FuzzySpace| -> Pattern {
            fn go(t: &Term, ctx: &FuzzySpace, op_idx: &HashMap<&str, usize>) -> Pattern {
                match t {
                    Term::Var(v) => Pattern::Var(ctx.index_of(v).expect("checked judgment")),
                    Term::App(op, args) => {
                        Pattern::App(op_idx[op.as_str()], args.iter().map(|a| go(a, ctx, op_idx)).collect())
                    }
                }
            }
            go(t, ctx, &op_idx)
        };
        let axioms = theory
            .judgments
            .iter()
            .map(|j| {
                Ok(Axiom {
                    ctx: steps(&j.context)?,
                    lhs: compile(&j.lhs, &j.context),
                    rhs: compile(&j.rhs, &j.context),
                    eps: j.eps.map(|e| logic.grid.steps_checked(e)).transpose()?,
                    init: j.context.same_as(target),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = universe.len();
        let q = logic.grid.q();
        Ok(DerivationDB {
            logic: logic.clone(),
            theory: theory.clone(),
            target: target.clone(),
            depth,
            index,
            ops,
            nodes,
            apps,
            vars,
            parent: (0..n).collect(),
            dmin: vec![Cell { k: q, via: NONE }; n * n],
            events: Vec::new(),
            edges: vec![Vec::new(); n],
            clauses: logic.spec.compile(&logic.grid)?,
            axioms,
            universe,
            stats: SaturationStats::default(),
        })
    }

    // ---- saturation -------------------------------------------------------

    fn n(&self) -> usize {
        self.universe.len()
    }

    fn find(&self, x: usize) -> usize {
        self.parent[x]
    }

    fn cell(&self, a: usize, b: usize) -> Cell {
        let n = self.n();
        self.dmin[self.find(a) * n + self.find(b)]
    }

    fn roots(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.parent[i] == i).collect()
    }

    fn tick(&mut self) -> Result<()> {
        self.stats.instances += 1;
        if self.stats.instances > self.logic.budget.instances {
            return Err(Error::BudgetExceeded(format!(
                "saturation examined more than {} rule instances",
                self.logic.budget.instances
            )));
        }
        Ok(())
    }

    fn dist_premise(&self, s: usize, t: usize, bound: u32) -> IPremise {
        IPremise::Dist { s, t, bound, via: self.cell(s, t).via }
    }

    /// Records `s = t`; false if already known.
    fn merge(&mut self, s: usize, t: usize, rule: IRule, premises: Vec<IPremise>) -> bool {
        let (rs, rt) = (self.find(s), self.find(t));
        if rs == rt {
            return false;
        }
        let ev = self.events.len() as u32;
        self.events.push(Event { rule, conclusion: IFact::Eq(s, t), premises });
        self.edges[s].push((t, ev));
        self.edges[t].push((s, ev));
        let (root, child) = (rs.min(rt), rs.max(rt));
        for p in self.parent.iter_mut() {
            if *p == child {
                *p = root;
            }
        }
        let n = self.n();
        for u in 0..n {
            let c = self.dmin[child * n + u];
            if c.k < self.dmin[root * n + u].k {
                self.dmin[root * n + u] = c;
            }
        }
        for u in 0..n {
            let c = self.dmin[u * n + child];
            if c.k < self.dmin[u * n + root].k {
                self.dmin[u * n + root] = c;
            }
        }
        self.stats.merges += 1;
        true
    }

    /// Records `d(s, t) <= k`; false if not an improvement.
    fn lower(&mut self, s: usize, t: usize, k: u32, rule: IRule, premises: Vec<IPremise>) -> bool {
        let n = self.n();
        let slot = self.find(s) * n + self.find(t);
        if k >= self.dmin[slot].k {
            return false;
        }
        let ev = self.events.len() as u32;
        self.events.push(Event { rule, conclusion: IFact::Dist(s, t, k), premises });
        self.dmin[slot] = Cell { k, via: ev };
        self.stats.lowerings += 1;
        true
    }

    fn run(&mut self) -> Result<()> {
        self.init_step();
        let mut round = 0u64;
        loop {
            let mut changed = self.cong_step()?;
            changed |= self.horn_step()?;
            changed |= self.subst_step()?;
            if round == 0 {
                changed |= self.usevar_step();
            }
            round += 1;
            self.stats.rounds = round;
            if !changed {
                return Ok(());
            }
        }
    }

    fn instantiate(&self, p: &Pattern, sigma: &[usize]) -> Option<usize> {
        match p {
            Pattern::Var(i) => Some(sigma[*i]),
            Pattern::App(op, args) => {
                let ids = args.iter().map(|a| self.instantiate(a, sigma)).collect::<Option<Vec<_>>>()?;
                self.apps.get(&(*op, ids)).copied()
            }
        }
    }

    fn init_step(&mut self) {
        for ai in 0..self.axioms.len() {
            let ax = &self.axioms[ai];
            if !ax.init {
                continue;
            }
            let ctx = &self.theory.judgments[ai].context;
            let sigma: Vec<usize> = ctx
                .carrier()
                .iter()
                .map(|c| self.vars[self.target.index_of(c).expect("same carrier")])
                .collect();
            let (Some(s), Some(t)) = (self.instantiate(&ax.lhs, &sigma), self.instantiate(&ax.rhs, &sigma)) else {
                continue;
            };
            match ax.eps {
                None => self.merge(s, t, IRule::Init(ai), vec![]),
                Some(k) => self.lower(s, t, k, IRule::Init(ai), vec![]),
            };
        }
    }

    fn cong_step(&mut self) -> Result<bool> {
        let mut changed = false;
        let mut seen: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        for id in 0..self.n() {
            let Node::App(op, args) = &self.nodes[id] else { continue };
            let (op, args) = (*op, args.clone());
            let key = (op, args.iter().map(|&a| self.find(a)).collect());
            match seen.get(&key) {
                None => {
                    seen.insert(key, id);
                }
                Some(&other) => {
                    self.tick()?;
                    if self.find(other) != self.find(id) {
                        let Node::App(_, other_args) = &self.nodes[other] else { unreachable!() };
                        let premises =
                            other_args.iter().zip(&args).map(|(&a, &b)| IPremise::Eq(a, b)).collect();
                        changed |= self.merge(other, id, IRule::Cong(op), premises);
                    }
                }
            }
        }
        Ok(changed)
    }

    fn horn_step(&mut self) -> Result<bool> {
        let clauses = std::mem::take(&mut self.clauses);
        let result = self.horn_clauses(&clauses);
        self.clauses = clauses;
        result
    }

    fn horn_clauses(&mut self, clauses: &[CompiledClause]) -> Result<bool> {
        let q = self.logic.grid.q();
        let roots = self.roots();
        let mut changed = false;
        for (ci, clause) in clauses.iter().enumerate() {
            let mut err = None;
            for_each_tuple(roots.len(), clause.vars.len(), |pick| {
                if err.is_some() {
                    return;
                }
                if let Err(e) = self.tick() {
                    err = Some(e);
                    return;
                }
                let assign: Vec<usize> = pick.iter().map(|&i| roots[i]).collect();
                let firing = clause.fire(q, &assign, |a, b| self.find(a) == self.find(b), |a, b| self.cell(a, b).k);
                let Some(firing) = firing else { return };
                let premises = clause
                    .premises
                    .iter()
                    .map(|p| match p {
                        StepAtom::Eq(x, y) => IPremise::Eq(assign[*x], assign[*y]),
                        StepAtom::Dist(x, y, e) => {
                            self.dist_premise(assign[*x], assign[*y], e.eval(&firing.params, q))
                        }
                    })
                    .collect();
                let rule = IRule::Horn { clause: ci, assign: assign.clone(), params: firing.params.clone() };
                changed |= match firing.conclusion {
                    Conclusion::Eq(a, b) => self.merge(a, b, rule, premises),
                    Conclusion::Dist(a, b, k) => self.lower(a, b, k, rule, premises),
                };
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        Ok(changed)
    }

    fn subst_step(&mut self) -> Result<bool> {
        let roots = self.roots();
        let mut changed = false;
        let axioms = std::mem::take(&mut self.axioms);
        let mut result = Ok(());
        for (ai, ax) in axioms.iter().enumerate() {
            let mut sigma = Vec::with_capacity(ax.ctx.len());
            result = self.subst_search(ai, ax, &roots, &mut sigma, &mut changed);
            if result.is_err() {
                break;
            }
        }
        self.axioms = axioms;
        result.map(|_| changed)
    }

    /// Backtracking over substitutions into class representatives, pruning
    /// as soon as a premise of `Ψ` fails.
    fn subst_search(
        &mut self,
        ai: usize,
        ax: &Axiom,
        roots: &[usize],
        sigma: &mut Vec<usize>,
        changed: &mut bool,
    ) -> Result<()> {
        let i = sigma.len();
        if i == ax.ctx.len() {
            self.tick()?;
            let (Some(s), Some(t)) = (self.instantiate(&ax.lhs, sigma), self.instantiate(&ax.rhs, sigma)) else {
                return Ok(());
            };
            let premises = (0..i)
                .flat_map(|a| (0..i).map(move |b| (a, b)))
                .map(|(a, b)| self.dist_premise(sigma[a], sigma[b], ax.ctx[a][b]))
                .collect();
            let rule = IRule::Subst { axiom: ai, sigma: sigma.clone() };
            *changed |= match ax.eps {
                None => self.merge(s, t, rule, premises),
                Some(k) => self.lower(s, t, k, rule, premises),
            };
            return Ok(());
        }
        for &r in roots {
            let ok = self.cell(r, r).k <= ax.ctx[i][i]
                && (0..i).all(|j| self.cell(sigma[j], r).k <= ax.ctx[j][i] && self.cell(r, sigma[j]).k <= ax.ctx[i][j]);
            if ok {
                sigma.push(r);
                self.subst_search(ai, ax, roots, sigma, changed)?;
                sigma.pop();
            }
        }
        Ok(())
    }

    fn usevar_step(&mut self) -> bool {
        let steps = self.target.steps(&self.logic.grid).expect("target checked");
        let mut changed = false;
        for (i, row) in steps.iter().enumerate() {
            for (j, &k) in row.iter().enumerate() {
                changed |= self.lower(self.vars[i], self.vars[j], k, IRule::UseVar, vec![]);
            }
        }
        changed
    }

    // ---- queries ----------------------------------------------------------

    pub fn logic(&self) -> &Logic {
        &self.logic
    }

    pub fn theory(&self) -> &Theory {
        &self.theory
    }

    pub fn target(&self) -> &FuzzySpace {
        &self.target
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn grid(&self) -> EpsGrid {
        self.logic.grid
    }

    pub fn stats(&self) -> SaturationStats {
        self.stats
    }

    /// The bounded universe in canonical order; term ids index into it.
    pub fn universe(&self) -> &[Term] {
        &self.universe
    }

    pub fn term(&self, id: usize) -> &Term {
        &self.universe[id]
    }

    pub fn term_id(&self, t: &Term) -> Result<usize> {
        self.index.get(t).copied().ok_or_else(|| Error::OutOfUniverse(t.to_string()))
    }

    /// Id of the canonical representative of `id`'s class.
    pub fn representative(&self, id: usize) -> usize {
        self.find(id)
    }

    /// Class representatives in canonical order.
    pub fn classes(&self) -> Vec<usize> {
        self.roots()
    }

    /// Derived distance between the classes of two term ids.
    pub fn distance_ids(&self, a: usize, b: usize) -> Eps {
        self.logic.grid.value(self.cell(a, b).k)
    }

    pub fn same_class(&self, s: &Term, t: &Term) -> Result<bool> {
        Ok(self.find(self.term_id(s)?) == self.find(self.term_id(t)?))
    }

    /// The least grid `ε` with `s =_ε t` derived.
    pub fn distance(&self, s: &Term, t: &Term) -> Result<Eps> {
        Ok(self.distance_ids(self.term_id(s)?, self.term_id(t)?))
    }

    pub fn derives(&self, j: &Judgment) -> Result<bool> {
        if !j.context.same_as(&self.target) {
            return Err(Error::Invalid("judgment context differs from the saturated target".into()));
        }
        match j.eps {
            None => self.same_class(&j.lhs, &j.rhs),
            Some(e) => Ok(self.distance(&j.lhs, &j.rhs)? <= e),
        }
    }

    /// Id of `op(args)` if it lies in the universe.
    pub(crate) fn lookup_app(&self, op: &str, args: &[usize]) -> Option<usize> {
        let o = self.ops.iter().position(|x| x == op)?;
        self.apps.get(&(o, args.to_vec())).copied()
    }

    /// Id of the variable term for target element `i`.
    pub(crate) fn var_id(&self, i: usize) -> usize {
        self.vars[i]
    }

    /// Builds `t` with each variable replaced by a term id; `None` when a
    /// subterm falls outside the universe.
    pub(crate) fn build(&self, t: &Term, var: &impl Fn(&str) -> usize) -> Option<usize> {
        match t {
            Term::Var(v) => Some(var(v)),
            Term::App(op, args) => {
                let ids = args.iter().map(|a| self.build(a, var)).collect::<Option<Vec<_>>>()?;
                self.lookup_app(op, &ids)
            }
        }
    }

    // ---- traces -----------------------------------------------------------

    /// A derivation of `fact`, unfolded from the event log.
    pub fn trace(&self, fact: &Fact) -> Result<Derivation> {
        match fact {
            Fact::Eq(s, t) => {
                let (a, b) = (self.term_id(s)?, self.term_id(t)?);
                if self.find(a) != self.find(b) {
                    return Err(Error::UnknownFact(fact.to_string()));
                }
                Ok(self.explain_eq(a, b, u32::MAX))
            }
            Fact::Dist(s, t, e) => {
                let (a, b) = (self.term_id(s)?, self.term_id(t)?);
                let bound = self.logic.grid.steps_checked(*e)?;
                let cell = self.cell(a, b);
                if cell.k > bound {
                    return Err(Error::UnknownFact(fact.to_string()));
                }
                Ok(self.explain_dist(a, b, bound, cell.via, u32::MAX))
            }
        }
    }

    fn fact(&self, f: &IFact) -> Fact {
        let g = self.logic.grid;
        match *f {
            IFact::Eq(s, t) => Fact::Eq(self.term(s).clone(), self.term(t).clone()),
            IFact::Dist(s, t, k) => Fact::Dist(self.term(s).clone(), self.term(t).clone(), g.value(k)),
        }
    }

    fn explain_event(&self, ev: u32) -> Derivation {
        let event = &self.events[ev as usize];
        let premises = event
            .premises
            .iter()
            .map(|p| match *p {
                IPremise::Eq(s, t) => self.explain_eq(s, t, ev),
                IPremise::Dist { s, t, bound, via } => self.explain_dist(s, t, bound, via, ev),
            })
            .collect();
        let g = self.logic.grid;
        let named = |names: &[String], ids: &[usize]| -> Vec<(String, Term)> {
            names.iter().zip(ids).map(|(n, &i)| (n.clone(), self.term(i).clone())).collect()
        };
        let rule = match &event.rule {
            IRule::Init(a) => Rule::Init { axiom: *a },
            IRule::Cong(op) => Rule::Cong { op: self.ops[*op].clone() },
            IRule::UseVar => Rule::UseVar,
            IRule::Subst { axiom, sigma } => Rule::Subst {
                axiom: *axiom,
                sigma: named(self.theory.judgments[*axiom].context.carrier(), sigma),
            },
            IRule::Horn { clause, assign, params } => {
                let c = &self.clauses[*clause];
                Rule::Horn {
                    clause: c.name.clone(),
                    assignment: named(&c.vars, assign),
                    params: c.params.iter().zip(params).map(|(p, &k)| (p.clone(), g.value(k))).collect(),
                }
            }
        };
        Derivation { rule, conclusion: self.fact(&event.conclusion), premises }
    }

    /// `s = t` from union edges recorded before event `limit`.
    fn explain_eq(&self, s: usize, t: usize, limit: u32) -> Derivation {
        if s == t {
            return Derivation::leaf(Rule::Refl, Fact::Eq(self.term(s).clone(), self.term(t).clone()));
        }
        let mut prev: HashMap<usize, (usize, u32)> = HashMap::new();
        let mut queue = VecDeque::from([s]);
        prev.insert(s, (s, NONE));
        while let Some(x) = queue.pop_front() {
            if x == t {
                break;
            }
            for &(y, ev) in &self.edges[x] {
                if ev < limit && !prev.contains_key(&y) {
                    prev.insert(y, (x, ev));
                    queue.push_back(y);
                }
            }
        }
        let mut path = Vec::new();
        let mut cur = t;
        while cur != s {
            let &(p, ev) = prev.get(&cur).expect("classes were merged before this point");
            path.push((p, cur, ev));
            cur = p;
        }
        path.reverse();
        let mut acc: Option<Derivation> = None;
        for (x, y, ev) in path {
            let step = self.explain_event(ev);
            let step = match self.events[ev as usize].conclusion {
                IFact::Eq(a, _) if a == x => step,
                _ => Derivation {
                    rule: Rule::Symm,
                    conclusion: Fact::Eq(self.term(x).clone(), self.term(y).clone()),
                    premises: vec![step],
                },
            };
            acc = Some(match acc {
                None => step,
                Some(d) => Derivation {
                    rule: Rule::Trans,
                    conclusion: Fact::Eq(self.term(s).clone(), self.term(y).clone()),
                    premises: vec![d, step],
                },
            });
        }
        acc.expect("nonempty path")
    }

    /// `s =_bound t` from the cell value recorded as `via`, adjusted by
    /// left/right congruence and up-closure.
    fn explain_dist(&self, s: usize, t: usize, bound: u32, via: u32, limit: u32) -> Derivation {
        let g = self.logic.grid;
        let dist = |a: usize, b: usize, k: u32| Fact::Dist(self.term(a).clone(), self.term(b).clone(), g.value(k));
        if via == NONE {
            return Derivation::leaf(Rule::OneMax, dist(s, t, g.q()));
        }
        let IFact::Dist(s0, t0, k) = self.events[via as usize].conclusion else {
            unreachable!("distance cells point at distance events")
        };
        let mut d = self.explain_event(via);
        if s0 != s {
            d = Derivation { rule: Rule::LCong, conclusion: dist(s, t0, k), premises: vec![self.explain_eq(s, s0, limit), d] };
        }
        if t0 != t {
            d = Derivation { rule: Rule::RCong, conclusion: dist(s, t, k), premises: vec![self.explain_eq(t0, t, limit), d] };
        }
        if k < bound {
            d = Derivation { rule: Rule::Max, conclusion: dist(s, t, bound), premises: vec![d] };
        }
        d
    }
}
