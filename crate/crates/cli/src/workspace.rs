//! Workspace files: one JSON document naming every space, theory and
//! algebra a command may refer to.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use qeqlog_core::{
    AlgebraDef, Budget, Eps, EpsGrid, FuzzySpace, GMetSpec, Judgment, Logic, QuantAlgebra, Signature, Theory,
};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceFile {
    #[serde(default)]
    pub signature: BTreeMap<String, usize>,
    #[serde(default)]
    pub grid: Option<u32>,
    pub spec: GMetSpec,
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default)]
    pub budgets: Option<Budget>,
    #[serde(default)]
    pub spaces: BTreeMap<String, FuzzySpace>,
    #[serde(default)]
    pub theories: BTreeMap<String, TheoryFile>,
    #[serde(default)]
    pub algebras: BTreeMap<String, AlgebraDef>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryFile {
    #[serde(default)]
    pub judgments: Vec<JudgmentFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgmentFile {
    pub context: SpaceRef,
    pub lhs: String,
    pub rhs: String,
    #[serde(default)]
    pub eps: Option<Eps>,
}

/// A space given inline or by name.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SpaceRef {
    Named(String),
    Inline(FuzzySpace),
}

pub const DEFAULT_GRID: u32 = 24;
pub const DEFAULT_DEPTH: usize = 2;

/// Command-line overrides applied on top of the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub grid: Option<u32>,
    pub depth: Option<usize>,
    pub budget_interps: Option<u64>,
    pub budget_instances: Option<u64>,
}

/// A loaded workspace with every cross-reference resolved.
pub struct Workspace {
    pub logic: Logic,
    pub depth: usize,
    pub spaces: BTreeMap<String, FuzzySpace>,
    pub theories: BTreeMap<String, Theory>,
    pub algebras: BTreeMap<String, QuantAlgebra>,
}

impl Workspace {
    pub fn load(path: &Path, ov: &Overrides) -> Result<Workspace> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: WorkspaceFile =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Workspace::from_file(file, ov)
    }

    pub fn from_file(file: WorkspaceFile, ov: &Overrides) -> Result<Workspace> {
        let signature = Signature::new(file.signature)?;
        let grid = EpsGrid::new(ov.grid.or(file.grid).unwrap_or(DEFAULT_GRID))?;
        let mut budget = file.budgets.unwrap_or_default();
        if let Some(n) = ov.budget_interps {
            budget.interpretations = n;
        }
        if let Some(n) = ov.budget_instances {
            budget.instances = n;
        }
        let logic = Logic::new(signature, file.spec, grid)?.with_budget(budget);
        let depth = ov.depth.or(file.depth).unwrap_or(DEFAULT_DEPTH);

        for (name, sp) in &file.spaces {
            sp.steps(&grid).with_context(|| format!("space `{name}`"))?;
        }
        let mut theories = BTreeMap::new();
        for (name, th) in file.theories {
            let mut judgments = Vec::new();
            for (i, j) in th.judgments.into_iter().enumerate() {
                let context = match j.context {
                    SpaceRef::Named(s) => file
                        .spaces
                        .get(&s)
                        .cloned()
                        .ok_or_else(|| anyhow!("theory `{name}` judgment {i}: unknown space `{s}`"))?,
                    SpaceRef::Inline(sp) => sp,
                };
                context.steps(&grid).with_context(|| format!("theory `{name}` judgment {i}"))?;
                if let Some(e) = j.eps {
                    grid.steps_checked(e).with_context(|| format!("theory `{name}` judgment {i}"))?;
                }
                let j = Judgment::parse(&logic.signature, context, &j.lhs, &j.rhs, j.eps)
                    .with_context(|| format!("theory `{name}` judgment {i}"))?;
                judgments.push(j);
            }
            theories.insert(name.clone(), Theory::new(&name, judgments));
        }
        let mut algebras = BTreeMap::new();
        for (name, def) in file.algebras {
            let alg = QuantAlgebra::from_def(&logic.signature, def).with_context(|| format!("algebra `{name}`"))?;
            alg.space().steps(&grid).with_context(|| format!("algebra `{name}`"))?;
            algebras.insert(name, alg);
        }
        Ok(Workspace { logic, depth, spaces: file.spaces, theories, algebras })
    }

    pub fn space(&self, name: &str) -> Result<&FuzzySpace> {
        self.spaces.get(name).ok_or_else(|| anyhow!("unknown space `{name}`"))
    }

    /// The named theory; the name `empty` always resolves.
    pub fn theory(&self, name: &str) -> Result<Theory> {
        match self.theories.get(name) {
            Some(t) => Ok(t.clone()),
            None if name == "empty" => Ok(Theory::empty()),
            None => bail!("unknown theory `{name}`"),
        }
    }

    pub fn algebra(&self, name: &str) -> Result<&QuantAlgebra> {
        self.algebras.get(name).ok_or_else(|| anyhow!("unknown algebra `{name}`"))
    }
}
