//! Dictionary and corpus checking of generated surface forms.
//!
//! Forms are compared after NFC normalization and a full lowercase fold.
//! Corpus text is tokenized by splitting on whitespace and trimming
//! non-alphanumeric characters from both ends of each token, so internal
//! hyphens survive.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::CandidateEntry;
use crate::text::fold;

#[derive(Debug, Error)]
pub enum ResourceError {
    #[error("duplicate dictionary name `{0}`")]
    DuplicateName(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    /// Found in at least one dictionary.
    Accepted,
    /// Absent from every dictionary but attested in the corpus.
    Deferred,
    Rejected,
}

impl FromStr for Status {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accepted" => Ok(Status::Accepted),
            "deferred" => Ok(Status::Deferred),
            "rejected" => Ok(Status::Rejected),
            _ => Err(format!("unknown validation status `{s}`")),
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Accepted => "accepted",
            Status::Deferred => "deferred",
            Status::Rejected => "rejected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub resource: String,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub evidence: Vec<Evidence>,
    pub corpus_count: u64,
}

impl Verdict {
    /// Compact evidence column: `name=1,other=0;corpus=N`.
    pub fn evidence_tsv(&self) -> String {
        let dicts: Vec<String> =
            self.evidence.iter().map(|e| format!("{}={}", e.resource, u8::from(e.hit))).collect();
        format!("{};corpus={}", dicts.join(","), self.corpus_count)
    }
}

#[derive(Debug, Clone)]
struct Dictionary {
    name: String,
    forms: HashSet<String>,
}

/// Word lists and corpus frequencies used to check generated forms.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    dictionaries: Vec<Dictionary>,
    corpus: HashMap<String, u64>,
}

/// Splits corpus text into folded tokens.
pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(fold)
}

impl Resources {
    pub fn new() -> Self {
        Resources::default()
    }

    /// Adds a dictionary from its text: one form per line, `#` starts a comment.
    pub fn add_dictionary(&mut self, name: &str, text: &str) -> Result<(), ResourceError> {
        if self.dictionaries.iter().any(|d| d.name == name) {
            return Err(ResourceError::DuplicateName(name.to_string()));
        }
        let forms = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(fold)
            .collect();
        self.dictionaries.push(Dictionary { name: name.to_string(), forms });
        Ok(())
    }

    /// Loads a dictionary file, naming it after the file stem.
    pub fn load_dictionary(&mut self, path: impl AsRef<Path>) -> Result<(), ResourceError> {
        let path = path.as_ref();
        let text = read(path)?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.add_dictionary(&name, &text)
    }

    pub fn add_corpus_text(&mut self, text: &str) {
        for t in tokens(text) {
            *self.corpus.entry(t).or_insert(0) += 1;
        }
    }

    pub fn load_corpus(&mut self, path: impl AsRef<Path>) -> Result<(), ResourceError> {
        let text = read(path.as_ref())?;
        self.add_corpus_text(&text);
        Ok(())
    }

    pub fn dictionary_names(&self) -> impl Iterator<Item = &str> {
        self.dictionaries.iter().map(|d| d.name.as_str())
    }

    pub fn corpus_tokens(&self) -> u64 {
        self.corpus.values().sum()
    }

    pub fn corpus_attestation(&self, surface: &str) -> u64 {
        self.corpus.get(&fold(surface)).copied().unwrap_or(0)
    }

    pub fn verdict(&self, surface: &str) -> Verdict {
        let key = fold(surface);
        let evidence: Vec<Evidence> = self
            .dictionaries
            .iter()
            .map(|d| Evidence { resource: d.name.clone(), hit: d.forms.contains(&key) })
            .collect();
        let corpus_count = self.corpus.get(&key).copied().unwrap_or(0);
        let status = if evidence.iter().any(|e| e.hit) {
            Status::Accepted
        } else if corpus_count > 0 {
            Status::Deferred
        } else {
            Status::Rejected
        };
        Verdict { status, evidence, corpus_count }
    }
}

fn read(path: &Path) -> Result<String, ResourceError> {
    std::fs::read_to_string(path).map_err(|source| ResourceError::Io { path: path.display().to_string(), source })
}

/// Candidates split by verdict, each class in input order.
#[derive(Debug, Clone, Default)]
pub struct Partition {
    pub accepted: Vec<(CandidateEntry, Verdict)>,
    pub deferred: Vec<(CandidateEntry, Verdict)>,
    pub rejected: Vec<(CandidateEntry, Verdict)>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.accepted.len() + self.deferred.len() + self.rejected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn validate(candidates: Vec<CandidateEntry>, res: &Resources) -> Partition {
    let mut p = Partition::default();
    for c in candidates {
        let v = res.verdict(&c.surface);
        match v.status {
            Status::Accepted => p.accepted.push((c, v)),
            Status::Deferred => p.deferred.push((c, v)),
            Status::Rejected => p.rejected.push((c, v)),
        }
    }
    p
}
