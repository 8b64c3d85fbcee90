//! Quantitative equational logic over generalized metric spaces.
//!
//! The crate covers the pieces needed to reason about quantitative algebras
//! on finite data: signatures and terms, fuzzy-relation spaces cut out by
//! Horn clauses, finite models and their satisfaction relation, a saturation
//! engine for the deductive system, the depth-bounded free algebra and the
//! monad it induces.
//!
//! All distances are exact rationals on a fixed grid `{0, 1/q, …, 1}`.

pub mod deduce;
pub mod eps;
pub mod error;
pub mod free;
pub mod gmet;
pub mod logic;
pub mod monad;
pub mod qalg;
pub mod terms;

pub use eps::{Eps, EpsGrid};
pub use error::{Error, Result};
pub use gmet::{
    check_space, discrete_lift, enumerate_nonexpansive, for_each_nonexpansive, is_nonexpansive, Atom,
    EpsExpr, FuzzySpace, GMetSpec, HornClause, Preset, Violation,
};
pub use terms::{apply_subst, canonical_cmp, check_nontrivial, enumerate_universe, Signature, Substitution, Term};
pub use logic::{Budget, Logic};
pub use qalg::{
    eval_term, is_homomorphism, AlgebraDef, Judgment, JudgmentDef, ModelReport, OpTable, QuantAlgebra, Satisfaction,
    TableDef, Theory, TheoryDef,
};
pub use deduce::{Derivation, DerivationDB, Fact, Rule, SaturationStats};
pub use free::{CheckReport, Evaluated, FreeAlgebra, FreeOpTable, UmpReport};
pub use monad::{EmCandidate, EmModel, EmReport, LawReport, MonadInstance};
