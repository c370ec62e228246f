//! A small world model: concepts, their kinds, and role constraints.
//!
//! The ontology file is JSON lines. Each line is either an atom (a non-concept
//! type used inside feature structures, such as a category symbol or a
//! feature value) or a concept:
//!
//! ```text
//! {"atom":"potential","parents":[]}
//! {"concept":"BUY","kind":"EVENT","parents":["TRANSFER-POSSESSION"],"roles":{"agent":"HUMAN","theme":"OBJECT"}}
//! ```
//!
//! Saving writes atoms then concepts, each sorted by name.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tfs::{TfsError, TypeHierarchy};

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid ontology: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Types(#[from] TfsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ConceptKind {
    Event,
    Object,
    Property,
}

impl ConceptKind {
    pub const ALL: [ConceptKind; 3] = [ConceptKind::Event, ConceptKind::Object, ConceptKind::Property];

    /// Name of the root concept of this kind's sublattice.
    pub fn root(self) -> &'static str {
        match self {
            ConceptKind::Event => "EVENT",
            ConceptKind::Object => "OBJECT",
            ConceptKind::Property => "PROPERTY",
        }
    }
}

impl fmt::Display for ConceptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.root())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    #[serde(rename = "concept")]
    pub name: String,
    pub kind: ConceptKind,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default)]
    pub roles: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "atom")]
    pub name: String,
    #[serde(default)]
    pub parents: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Record {
    Concept(Concept),
    Atom(Atom),
}

/// Read-only concept graph plus the derived feature-structure type hierarchy.
#[derive(Debug, Clone)]
pub struct Ontology {
    concepts: BTreeMap<String, Concept>,
    atoms: BTreeMap<String, Atom>,
    ancestors: BTreeMap<String, BTreeSet<String>>,
    hierarchy: TypeHierarchy,
}

impl Ontology {
    pub fn new(
        concepts: impl IntoIterator<Item = Concept>,
        atoms: impl IntoIterator<Item = Atom>,
    ) -> Result<Self, OntologyError> {
        let mut cmap = BTreeMap::new();
        for c in concepts {
            if cmap.insert(c.name.clone(), c.clone()).is_some() {
                return Err(OntologyError::Invalid(format!("duplicate concept `{}`", c.name)));
            }
        }
        let mut amap = BTreeMap::new();
        for a in atoms {
            if cmap.contains_key(&a.name) || amap.insert(a.name.clone(), a.clone()).is_some() {
                return Err(OntologyError::Invalid(format!("duplicate type `{}`", a.name)));
            }
        }

        for kind in ConceptKind::ALL {
            let roots: Vec<&str> = cmap
                .values()
                .filter(|c| c.kind == kind && c.parents.is_empty())
                .map(|c| c.name.as_str())
                .collect();
            if roots != [kind.root()] {
                return Err(OntologyError::Invalid(format!(
                    "kind {kind} must have exactly one root named {}, found {roots:?}",
                    kind.root()
                )));
            }
        }
        for c in cmap.values() {
            for p in &c.parents {
                let parent = cmap.get(p).ok_or_else(|| {
                    OntologyError::Invalid(format!("`{}` has unknown parent `{p}`", c.name))
                })?;
                if parent.kind != c.kind {
                    return Err(OntologyError::Invalid(format!(
                        "`{}` ({}) cannot inherit from `{p}` ({})",
                        c.name, c.kind, parent.kind
                    )));
                }
            }
            for (role, filler) in &c.roles {
                if !cmap.contains_key(filler) {
                    return Err(OntologyError::Invalid(format!(
                        "role `{role}` of `{}` names unknown concept `{filler}`",
                        c.name
                    )));
                }
            }
        }

        let hierarchy = TypeHierarchy::new(
            cmap.values()
                .map(|c| (c.name.clone(), c.parents.clone()))
                .chain(amap.values().map(|a| (a.name.clone(), a.parents.clone()))),
        )
        .map_err(|e| OntologyError::Invalid(e.to_string()))?;

        let ancestors = cmap
            .keys()
            .map(|name| {
                let mut seen = BTreeSet::new();
                let mut stack = vec![name.clone()];
                while let Some(n) = stack.pop() {
                    if seen.insert(n.clone()) {
                        stack.extend(cmap[&n].parents.iter().cloned());
                    }
                }
                (name.clone(), seen)
            })
            .collect();

        Ok(Ontology { concepts: cmap, atoms: amap, ancestors, hierarchy })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OntologyError> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), OntologyError> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }

    pub fn hierarchy(&self) -> &TypeHierarchy {
        &self.hierarchy
    }

    pub fn concept(&self, name: &str) -> Result<&Concept, OntologyError> {
        self.concepts.get(name).ok_or_else(|| OntologyError::UnknownConcept(name.to_string()))
    }

    pub fn is_concept(&self, name: &str) -> bool {
        self.concepts.contains_key(name)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.values()
    }

    /// Reflexive, transitive ancestor test over parent links.
    pub fn is_a(&self, concept: &str, ancestor: &str) -> Result<bool, OntologyError> {
        self.concept(ancestor)?;
        Ok(self.ancestors_of(concept)?.contains(ancestor))
    }

    fn ancestors_of(&self, concept: &str) -> Result<&BTreeSet<String>, OntologyError> {
        self.ancestors
            .get(concept)
            .ok_or_else(|| OntologyError::UnknownConcept(concept.to_string()))
    }

    /// Nearest filler constraint for `role`, searching breadth-first up the
    /// parent links (parents in declaration order).
    pub fn role_constraint(&self, concept: &str, role: &str) -> Result<Option<&str>, OntologyError> {
        self.concept(concept)?;
        let mut queue = VecDeque::from([concept]);
        let mut seen = BTreeSet::new();
        while let Some(name) = queue.pop_front() {
            if !seen.insert(name) {
                continue;
            }
            let c = &self.concepts[name];
            if let Some(f) = c.roles.get(role) {
                return Ok(Some(f.as_str()));
            }
            queue.extend(c.parents.iter().map(String::as_str));
        }
        Ok(None)
    }

    pub fn kind(&self, concept: &str) -> Result<ConceptKind, OntologyError> {
        Ok(self.concept(concept)?.kind)
    }
}

impl FromStr for Ontology {
    type Err = OntologyError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut concepts = Vec::new();
        let mut atoms = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(line)
                .map_err(|e| OntologyError::Parse { line: i + 1, msg: e.to_string() })?;
            match rec {
                Record::Concept(c) => concepts.push(c),
                Record::Atom(a) => atoms.push(a),
            }
        }
        Ontology::new(concepts, atoms)
    }
}

impl fmt::Display for Ontology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in self.atoms.values() {
            writeln!(f, "{}", serde_json::to_string(&Record::Atom(a.clone())).map_err(|_| fmt::Error)?)?;
        }
        for c in self.concepts.values() {
            writeln!(f, "{}", serde_json::to_string(&Record::Concept(c.clone())).map_err(|_| fmt::Error)?)?;
        }
        Ok(())
    }
}
