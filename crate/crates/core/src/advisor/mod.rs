//! Revision suggestions for detected issues.
//!
//! The catalog (primitive taxonomy, factor codes, problem types and their
//! suggestion texts) lives in `data/catalog.json` and is compiled in. A custom
//! catalog file with the same layout can be loaded with [`Catalog::from_json`].

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::detector::{trigger, Direction, Issue};
use crate::error::{Error, Result};
use crate::indicators::{Indicator, IndicatorClass};
use crate::ingest::CourseStructure;

const BUILTIN: &str = include_str!("../../data/catalog.json");

static CATALOG: LazyLock<Catalog> =
    LazyLock::new(|| Catalog::from_json(BUILTIN).expect("built-in catalog is valid"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveType {
    Restyling,
    Restructuring,
    Rewriting,
    Linking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Addition,
    Modification,
    Deletion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionPrimitive {
    pub verb: String,
    #[serde(rename = "type")]
    pub kind: PrimitiveType,
    pub effect: Effect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorLevel {
    Logical,
    Physical,
    Writing,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorCode {
    pub code: String,
    pub level: FactorLevel,
    pub group: String,
    pub title: String,
    /// Canonical verbs from the taxonomy.
    pub primitives: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    pub indicator: Indicator,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemType {
    pub name: String,
    pub class: IndicatorClass,
    pub factor_codes: Vec<String>,
    pub triggers: Vec<Trigger>,
    pub suggestion: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Catalog {
    pub template: String,
    pub primitives: Vec<RevisionPrimitive>,
    /// Alternate verb spellings mapped to canonical taxonomy verbs.
    pub aliases: BTreeMap<String, String>,
    pub factors: Vec<FactorCode>,
    pub problem_types: Vec<ProblemType>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub issue_id: String,
    pub problem_type: String,
    pub factor_codes: Vec<String>,
    pub primitives: Vec<RevisionPrimitive>,
    pub text: String,
}

/// The built-in catalog.
pub fn catalog() -> &'static Catalog {
    &CATALOG
}

impl Catalog {
    /// Parses and validates a catalog document.
    pub fn from_json(json: &str) -> Result<Self> {
        let catalog: Catalog =
            serde_json::from_str(json).map_err(|e| Error::Catalog(e.to_string()))?;
        catalog.validate()?;
        Ok(catalog)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Catalog(msg));
        let verbs: BTreeSet<&str> = self.primitives.iter().map(|p| p.verb.as_str()).collect();
        if verbs.len() != self.primitives.len() {
            return bad("duplicate primitive verb".into());
        }
        for (alias, target) in &self.aliases {
            if !verbs.contains(target.as_str()) {
                return bad(format!("alias {alias} points to unknown verb {target}"));
            }
        }
        let mut codes = BTreeSet::new();
        for f in &self.factors {
            if !codes.insert(f.code.as_str()) {
                return bad(format!("duplicate factor code {}", f.code));
            }
            if f.primitives.is_empty() {
                return bad(format!("factor {} has no primitives", f.code));
            }
            if let Some(v) = f.primitives.iter().find(|v| !verbs.contains(v.as_str())) {
                return bad(format!("factor {} uses unknown verb {v}", f.code));
            }
        }
        let mut names = BTreeSet::new();
        let mut mapped = BTreeMap::new();
        for p in &self.problem_types {
            if !names.insert(p.name.as_str()) {
                return bad(format!("duplicate problem type {}", p.name));
            }
            if p.factor_codes.is_empty() {
                return bad(format!("{} lists no factors", p.name));
            }
            if let Some(c) = p.factor_codes.iter().find(|c| !codes.contains(c.as_str())) {
                return bad(format!("{} references unknown factor {c}", p.name));
            }
            for t in &p.triggers {
                if trigger(t.indicator, t.direction).is_empty() {
                    return bad(format!(
                        "{} is triggered by {} {}, which is never flagged",
                        p.name, t.indicator, t.direction
                    ));
                }
                if let Some(other) = mapped.insert((t.indicator, t.direction), &p.name) {
                    return bad(format!(
                        "{} {} maps to both {other} and {}",
                        t.indicator, t.direction, p.name
                    ));
                }
            }
        }
        if !self.template.contains("{suggestion}") {
            return bad("template lacks {suggestion}".into());
        }
        Ok(())
    }

    pub fn problem_type(&self, name: &str) -> Option<&ProblemType> {
        self.problem_types.iter().find(|p| p.name == name)
    }

    pub fn factor(&self, code: &str) -> Option<&FactorCode> {
        self.factors.iter().find(|f| f.code == code)
    }

    /// Looks up a taxonomy primitive by canonical verb or alias.
    pub fn primitive(&self, verb: &str) -> Option<&RevisionPrimitive> {
        let canonical = self.aliases.get(verb).map_or(verb, String::as_str);
        self.primitives.iter().find(|p| p.verb == canonical)
    }

    /// The problem type a flagged (indicator, direction) pair belongs to.
    pub fn problem_for(&self, indicator: Indicator, direction: Direction) -> Result<&ProblemType> {
        self.problem_types
            .iter()
            .find(|p| {
                p.triggers
                    .iter()
                    .any(|t| t.indicator == indicator && t.direction == direction)
            })
            .ok_or_else(|| Error::UnmappedFlag {
                indicator: indicator.to_string(),
                direction: direction.to_string(),
            })
    }

    /// Distinct primitives reachable through a problem type's factors, in
    /// first-mention order.
    pub fn primitives_for(&self, problem: &ProblemType) -> Vec<RevisionPrimitive> {
        let mut seen = BTreeSet::new();
        problem
            .factor_codes
            .iter()
            .filter_map(|c| self.factor(c))
            .flat_map(|f| &f.primitives)
            .filter(|v| seen.insert(v.as_str()))
            .filter_map(|v| self.primitive(v).cloned())
            .collect()
    }

    /// Fills the suggestion template. Placeholders are substituted in one pass
    /// over the template, so braces inside the values are left alone.
    pub fn render(&self, problem: &ProblemType, element_title: &str) -> String {
        let mut out = String::with_capacity(self.template.len() + problem.suggestion.len());
        let mut rest = self.template.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let tail = &rest[open..];
            let (value, used) = if tail.starts_with("{element_title}") {
                (element_title, "{element_title}".len())
            } else if tail.starts_with("{suggestion}") {
                (problem.suggestion.as_str(), "{suggestion}".len())
            } else {
                ("{", 1)
            };
            out.push_str(value);
            rest = &tail[used..];
        }
        out.push_str(rest);
        out
    }

    /// One suggestion per distinct problem type among the issue's evidence.
    pub fn suggest(&self, issue: &Issue, course: &CourseStructure) -> Result<Vec<Suggestion>> {
        let title = course
            .element(&issue.element_id)
            .map_or(issue.element_id.as_str(), |e| e.title.as_str());
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for flag in &issue.evidence {
            let problem = self.problem_for(flag.indicator, flag.direction)?;
            if !seen.insert(problem.name.as_str()) {
                continue;
            }
            out.push(Suggestion {
                issue_id: issue.issue_id.clone(),
                problem_type: problem.name.clone(),
                factor_codes: problem.factor_codes.clone(),
                primitives: self.primitives_for(problem),
                text: self.render(problem, title),
            });
        }
        Ok(out)
    }
}

/// Suggestions for `issue` from the built-in catalog.
pub fn suggest(issue: &Issue, course: &CourseStructure) -> Result<Vec<Suggestion>> {
    catalog().suggest(issue, course)
}
