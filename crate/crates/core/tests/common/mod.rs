//! Shared fixtures, seeded generators and brute-force oracles for the
//! integration tests.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{HashMap, HashSet};

use qeqlog_core::{
    apply_subst, eval_term, for_each_nonexpansive, Atom, DerivationDB, Eps, EpsExpr, EpsGrid, FuzzySpace, GMetSpec,
    Judgment, Logic, Preset, QuantAlgebra, Signature, Substitution, Term, Theory,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn eps(s: &str) -> Eps {
    s.parse().unwrap()
}

pub fn sig(ops: &[(&str, usize)]) -> Signature {
    Signature::new(ops.iter().copied()).unwrap()
}

pub fn logic(sig: &Signature, spec: GMetSpec, q: u32) -> Logic {
    Logic::new(sig.clone(), spec, EpsGrid::new(q).unwrap()).unwrap()
}

pub fn term(sig: &Signature, s: &str) -> Term {
    Term::parse(s, sig).unwrap()
}

pub const NAMES: [&str; 4] = ["a", "b", "c", "e"];

/// A random space over `names` whose distances lie on the grid and satisfy
/// the preset.
pub fn random_space(rng: &mut ChaCha8Rng, names: &[&str], preset: Preset, q: u32) -> FuzzySpace {
    let n = names.len();
    let mut k = vec![vec![0u32; n]; n];
    for i in 0..n {
        for j in 0..n {
            k[i][j] = match preset {
                Preset::Frel => rng.gen_range(0..=q),
                Preset::Pmet if i == j => 0,
                Preset::Pmet => rng.gen_range(0..=q),
                Preset::Met if i == j => 0,
                Preset::Met => rng.gen_range(1..=q),
            };
        }
    }
    if preset != Preset::Frel {
        for i in 0..n {
            for j in 0..i {
                k[i][j] = k[j][i];
            }
        }
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    k[i][j] = k[i][j].min((k[i][m] + k[m][j]).min(q));
                }
            }
        }
    }
    let grid = EpsGrid::new(q).unwrap();
    FuzzySpace::from_fn(names.iter().map(|s| s.to_string()).collect(), |i, j| grid.value(k[i][j])).unwrap()
}

pub fn random_term(rng: &mut ChaCha8Rng, sig: &Signature, vars: &[&str], depth: usize) -> Term {
    let ops: Vec<(&str, usize)> = sig.ops().filter(|(_, a)| depth > 1 || *a == 0).collect();
    let leaf_ok = !vars.is_empty();
    if ops.is_empty() || (leaf_ok && rng.gen_bool(0.35)) {
        return Term::var(*vars.choose(rng).expect("a variable or a constant"));
    }
    let (op, arity) = *ops.choose(rng).unwrap();
    Term::app(op, (0..arity).map(|_| random_term(rng, sig, vars, depth - 1)).collect())
}

pub fn random_algebra(rng: &mut ChaCha8Rng, sig: &Signature, space: FuzzySpace) -> QuantAlgebra {
    let n = space.len();
    let mut table: HashMap<(String, Vec<usize>), usize> = HashMap::new();
    QuantAlgebra::from_fn(sig, space, |op, args| {
        *table.entry((op.to_string(), args.to_vec())).or_insert_with(|| rng.gen_range(0..n))
    })
    .unwrap()
}

/// Judgments over small random contexts that `model` satisfies, each
/// quantitative one at its least grid bound.
pub fn theory_from_model(
    rng: &mut ChaCha8Rng,
    logic: &Logic,
    model: &QuantAlgebra,
    count: usize,
    term_depth: usize,
) -> Theory {
    let ctx_names = ["x", "y", "z"];
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < 200 {
        attempts += 1;
        let m = rng.gen_range(1..=2);
        let ctx = random_space(rng, &ctx_names[..m], Preset::Met, logic.grid.q());
        let vars: Vec<&str> = ctx_names[..m].to_vec();
        let lhs = random_term(rng, &logic.signature, &vars, term_depth);
        let rhs = random_term(rng, &logic.signature, &vars, term_depth);
        if lhs == rhs {
            continue;
        }
        let eq = Judgment::new(&logic.signature, ctx.clone(), lhs.clone(), rhs.clone(), None).unwrap();
        if logic.satisfies(model, &eq).unwrap().holds {
            out.push(eq);
            continue;
        }
        for e in logic.grid.values().filter(|e| *e < Eps::ONE) {
            let j = Judgment::new(&logic.signature, ctx.clone(), lhs.clone(), rhs.clone(), Some(e)).unwrap();
            if logic.satisfies(model, &j).unwrap().holds {
                out.push(j);
                break;
            }
        }
    }
    Theory::new("generated", out)
}

// ---- saturation oracle ------------------------------------------------------

/// Every term of depth `<= depth`, built level by level.
pub fn oracle_universe(sig: &Signature, carrier: &[String], depth: usize) -> Vec<Term> {
    let vars: Vec<Term> = carrier.iter().map(|c| Term::var(c.clone())).collect();
    let mut level: Vec<Term> = vars.clone();
    level.extend(sig.ops().filter(|(_, a)| *a == 0).map(|(o, _)| Term::constant(o)));
    for _ in 1..depth {
        let mut next = vars.clone();
        for (op, arity) in sig.ops() {
            let mut tuples: Vec<Vec<Term>> = vec![vec![]];
            for _ in 0..arity {
                tuples = tuples
                    .into_iter()
                    .flat_map(|t| {
                        level.iter().map(move |x| {
                            let mut t = t.clone();
                            t.push(x.clone());
                            t
                        })
                    })
                    .collect();
            }
            next.extend(tuples.into_iter().map(|args| Term::app(op, args)));
        }
        level = next;
    }
    let mut seen = HashSet::new();
    level.retain(|t| seen.insert(t.clone()));
    level
}

/// The least fixpoint of the rules, recomputed from scratch on every pass.
pub struct Oracle {
    pub terms: Vec<Term>,
    pub index: HashMap<Term, usize>,
    pub eq: Vec<Vec<bool>>,
    pub d: Vec<Vec<u32>>,
    pub q: u32,
}

fn eval_steps(e: &EpsExpr, params: &HashMap<&str, u32>, grid: &EpsGrid) -> u32 {
    let q = grid.q();
    match e {
        EpsExpr::Const(c) => grid.steps(*c).expect("oracle expects grid constants"),
        EpsExpr::Param(p) => params[p.as_str()],
        EpsExpr::Add(a, b) => (eval_steps(a, params, grid) + eval_steps(b, params, grid)).min(q),
        EpsExpr::Min1(a) => eval_steps(a, params, grid).min(q),
    }
}

fn odometer(len: usize, base: usize, mut f: impl FnMut(&[usize])) {
    let mut cur = vec![0usize; len];
    if base == 0 && len > 0 {
        return;
    }
    loop {
        f(&cur);
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < base {
                break;
            }
            cur[i] = 0;
        }
    }
}

impl Oracle {
    pub fn run(logic: &Logic, theory: &Theory, target: &FuzzySpace, depth: usize) -> Oracle {
        let grid = logic.grid;
        let q = grid.q();
        let terms = oracle_universe(&logic.signature, target.carrier(), depth);
        let index: HashMap<Term, usize> = terms.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        let n = terms.len();
        let mut o = Oracle { terms, index, eq: vec![vec![false; n]; n], d: vec![vec![q; n]; n], q };
        for i in 0..n {
            o.eq[i][i] = true;
        }
        let target_steps = target.steps(&grid).unwrap();
        loop {
            let before = (o.eq.clone(), o.d.clone());

            for j in &theory.judgments {
                if j.context.same_as(target) {
                    o.conclude(&j.lhs, &j.rhs, j.eps.map(|e| grid.steps(e).unwrap()));
                }
            }

            for i in 0..target.len() {
                for k in 0..target.len() {
                    let (a, b) = (o.index[&Term::var(target.name(i))], o.index[&Term::var(target.name(k))]);
                    o.d[a][b] = o.d[a][b].min(target_steps[i][k]);
                }
            }

            for j in &theory.judgments {
                let ctx = j.context.steps(&grid).unwrap();
                let m = j.context.len();
                let mut hits = Vec::new();
                odometer(m, n, |sigma| {
                    let ok = (0..m).all(|x| (0..m).all(|y| o.d[sigma[x]][sigma[y]] <= ctx[x][y]));
                    if ok {
                        let s: Substitution =
                            (0..m).map(|x| (j.context.name(x).to_string(), o.terms[sigma[x]].clone())).collect();
                        hits.push((apply_subst(&s, &j.lhs).unwrap(), apply_subst(&s, &j.rhs).unwrap()));
                    }
                });
                for (s, t) in hits {
                    o.conclude(&s, &t, j.eps.map(|e| grid.steps(e).unwrap()));
                }
            }

            for clause in &logic.spec.clauses {
                let names = clause.params();
                let k = clause.vars.len();
                let var_pos = |v: &str| clause.vars.iter().position(|x| x == v).unwrap();
                let mut updates: Vec<(usize, usize, Option<u32>)> = Vec::new();
                odometer(k, n, |assign| {
                    odometer(names.len(), q as usize + 1, |vals| {
                        let params: HashMap<&str, u32> =
                            names.iter().map(String::as_str).zip(vals.iter().map(|&v| v as u32)).collect();
                        let holds = clause.premises.iter().all(|p| match p {
                            Atom::Eq(x, y) => o.eq[assign[var_pos(x)]][assign[var_pos(y)]],
                            Atom::Dist(x, y, e) => o.d[assign[var_pos(x)]][assign[var_pos(y)]] <= eval_steps(e, &params, &grid),
                        });
                        if holds {
                            updates.push(match &clause.conclusion {
                                Atom::Eq(x, y) => (assign[var_pos(x)], assign[var_pos(y)], None),
                                Atom::Dist(x, y, e) => {
                                    (assign[var_pos(x)], assign[var_pos(y)], Some(eval_steps(e, &params, &grid)))
                                }
                            });
                        }
                    });
                });
                for (a, b, k) in updates {
                    o.set(a, b, k);
                }
            }

            for a in 0..n {
                for b in 0..n {
                    if let (Term::App(f, xs), Term::App(g, ys)) = (&o.terms[a], &o.terms[b]) {
                        if f == g && xs.iter().zip(ys).all(|(x, y)| o.eq[o.index[x]][o.index[y]]) {
                            o.set(a, b, None);
                        }
                    }
                }
            }

            o.close();
            if (o.eq.clone(), o.d.clone()) == before {
                return o;
            }
        }
    }

    fn conclude(&mut self, s: &Term, t: &Term, k: Option<u32>) {
        if let (Some(&a), Some(&b)) = (self.index.get(s), self.index.get(t)) {
            self.set(a, b, k);
        }
    }

    fn set(&mut self, a: usize, b: usize, k: Option<u32>) {
        match k {
            None => {
                self.eq[a][b] = true;
                self.eq[b][a] = true;
            }
            Some(k) => self.d[a][b] = self.d[a][b].min(k),
        }
    }

    fn close(&mut self) {
        let n = self.terms.len();
        for m in 0..n {
            for i in 0..n {
                if self.eq[i][m] {
                    for j in 0..n {
                        if self.eq[m][j] {
                            self.eq[i][j] = true;
                        }
                    }
                }
            }
        }
        let old = self.d.clone();
        for i in 0..n {
            for j in 0..n {
                let mut best = old[i][j];
                for i2 in (0..n).filter(|&x| self.eq[i][x]) {
                    for j2 in (0..n).filter(|&y| self.eq[j][y]) {
                        best = best.min(old[i2][j2]);
                    }
                }
                self.d[i][j] = best;
            }
        }
    }

    /// Describes the first disagreement with `db`, if any.
    pub fn compare(&self, db: &DerivationDB) -> Option<String> {
        if db.universe().len() != self.terms.len() {
            return Some(format!("universe sizes {} vs {}", db.universe().len(), self.terms.len()));
        }
        let grid = db.grid();
        for (i, s) in self.terms.iter().enumerate() {
            for (j, t) in self.terms.iter().enumerate() {
                let same = db.same_class(s, t).unwrap();
                if same != self.eq[i][j] {
                    return Some(format!("{s} = {t}: engine {same}, oracle {}", self.eq[i][j]));
                }
                let d = db.distance(s, t).unwrap();
                if d != grid.value(self.d[i][j]) {
                    return Some(format!("d({s},{t}): engine {d}, oracle {}", grid.value(self.d[i][j])));
                }
            }
        }
        None
    }
}

// ---- semantic checks ----------------------------------------------------------

/// Every derived equality and distance of `db`, checked directly against
/// `model` under every nonexpansive interpretation of the target.
/// Returns the first violation.
pub fn soundness_violation(db: &DerivationDB, model: &QuantAlgebra) -> Option<String> {
    let target = db.target();
    let terms = db.universe();
    let mut found = None;
    for_each_nonexpansive(target, model.space(), |tau| {
        let lookup = |v: &str| target.index_of(v).map(|i| tau[i]);
        let vals: Vec<usize> = terms.iter().map(|t| eval_term(model, &lookup, t).unwrap()).collect();
        for i in 0..terms.len() {
            for j in 0..terms.len() {
                let d = model.space().d(vals[i], vals[j]);
                if db.same_class(&terms[i], &terms[j]).unwrap() && vals[i] != vals[j] {
                    found = Some(format!("{} = {} fails under {tau:?}", terms[i], terms[j]));
                    return false;
                }
                let bound = db.distance_ids(i, j);
                if d > bound {
                    found = Some(format!("d({},{}) <= {bound} fails under {tau:?}", terms[i], terms[j]));
                    return false;
                }
            }
        }
        true
    });
    found
}

/// `d(s,s) = 0`, symmetry, the triangle inequality and `d = 0 ⇔ ≡` on the
/// class representatives.
pub fn met_violation(db: &DerivationDB) -> Option<String> {
    let reps = db.classes();
    let one = Eps::ONE;
    for &x in &reps {
        if db.distance_ids(x, x) != Eps::ZERO {
            return Some(format!("d({0},{0}) != 0", db.term(x)));
        }
        for &y in &reps {
            let dxy = db.distance_ids(x, y);
            if dxy != db.distance_ids(y, x) {
                return Some(format!("asymmetric at {}, {}", db.term(x), db.term(y)));
            }
            if (dxy == Eps::ZERO) != (x == y) {
                return Some(format!("d({},{}) = {dxy} across classes", db.term(x), db.term(y)));
            }
            for &z in &reps {
                let sum = dxy.saturating_add(db.distance_ids(y, z)).min(one);
                if db.distance_ids(x, z) > sum {
                    return Some(format!("triangle fails at {}, {}, {}", db.term(x), db.term(y), db.term(z)));
                }
            }
        }
    }
    None
}

/// A randomized MET saturation problem: signature, theory and target.
pub struct Problem {
    pub logic: Logic,
    pub theory: Theory,
    pub target: FuzzySpace,
    pub depth: usize,
    pub seed_model: QuantAlgebra,
}

pub const SIGNATURES: [&[(&str, usize)]; 4] = [&[("u", 1)], &[("u", 1), ("k", 0)], &[("m", 2)], &[("u", 1), ("v", 1)]];

/// Draws a problem whose universe stays below `max_terms`.
pub fn random_problem(rng: &mut ChaCha8Rng, preset: Preset, max_terms: usize, max_depth: usize) -> Problem {
    loop {
        let s = sig(SIGNATURES.choose(rng).unwrap());
        let q = rng.gen_range(2..=4);
        let l = logic(&s, GMetSpec::preset(preset), q);
        let model_size = rng.gen_range(1..=3);
        let model_space = random_space(rng, &["p", "r", "s"][..model_size], Preset::Met, q);
        let seed_model = random_algebra(rng, &s, model_space);
        let count = rng.gen_range(1..=3);
        let theory = theory_from_model(rng, &l, &seed_model, count, 2);
        let target_size = rng.gen_range(1..=3);
        let target = random_space(rng, &NAMES[..target_size], Preset::Met, q);
        let mut depth = rng.gen_range(max_depth.min(2)..=max_depth);
        while depth > 1 && oracle_universe(&s, target.carrier(), depth).len() > max_terms {
            depth -= 1;
        }
        if oracle_universe(&s, target.carrier(), depth).len() > max_terms {
            continue;
        }
        return Problem { logic: l, theory, target, depth, seed_model };
    }
}

/// Up to `size` models of the problem's theory, starting with its seed model.
pub fn catalog(rng: &mut ChaCha8Rng, problem: &Problem, size: usize) -> Vec<QuantAlgebra> {
    let mut out = vec![problem.seed_model.clone()];
    let q = problem.logic.grid.q();
    for _ in 0..60 {
        if out.len() >= size {
            break;
        }
        let n = rng.gen_range(1..=3);
        let sp = random_space(rng, &["p", "r", "s"][..n], Preset::Met, q);
        let alg = random_algebra(rng, &problem.logic.signature, sp);
        if problem.logic.is_model(&alg, &problem.theory).unwrap() {
            out.push(alg);
        }
    }
    out
}
