//! The rule bank file: alternation classes, affix rules, itemized compounds
//! and lexical rules for one language, in a single JSON document.
//!
//! ```json
//! {
//!   "language": "es",
//!   "base_categories": ["V"],
//!   "alternations": [{"class": "AR", "pattern": "ar", "slots": {"bare": ""}}],
//!   "affixes": [{"id": "a_event", "kind": "suffix", "affix": "a", "slots": ["bare"],
//!                "base": "V", "out_pos": "N", "lr_labels": ["lr2event8b"]}],
//!   "compounds": [],
//!   "rules": [{"id": "lr2event8b", "trigger": "[cat: V, sem: EVENT]", "out_cat": "N",
//!              "sem": [{"op": "preserve-head"}], "syn": "root-only"}]
//! }
//! ```
//!
//! Loading checks that every label emitted by an affix rule or compound
//! resolves to a lexical rule, so label errors surface here rather than
//! during expansion.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::Pos;
use crate::morphgen::{AffixRule, Compound, MorphBank, StemAlternation, FORM_SLOT};
use crate::ontology::Ontology;
use crate::rules::{LexicalRule, RuleBank, RuleSpec};

#[derive(Debug, Error)]
pub enum BankError {
    #[error("bank: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bank: {0}")]
    Invalid(String),
    #[error("bank: `{owner}` emits unknown label `{label}`")]
    UnknownLabel { owner: String, label: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BankFile {
    language: String,
    base_categories: Vec<Pos>,
    #[serde(default)]
    alternations: Vec<StemAlternation>,
    #[serde(default)]
    affixes: Vec<AffixRule>,
    #[serde(default)]
    compounds: Vec<Compound>,
    #[serde(default)]
    rules: Vec<RuleSpec>,
}

/// Morphology and lexical rules for one language.
#[derive(Debug, Clone)]
pub struct Bank {
    pub language: String,
    pub morph: MorphBank,
    pub rules: RuleBank,
}

impl Bank {
    pub fn load(path: impl AsRef<Path>, ontology: &Ontology) -> Result<Self, BankError> {
        Bank::parse(&std::fs::read_to_string(path)?, ontology)
    }

    pub fn parse(text: &str, ontology: &Ontology) -> Result<Self, BankError> {
        let f: BankFile = serde_json::from_str(text)?;
        let invalid = BankError::Invalid;

        let rules = f
            .rules
            .into_iter()
            .map(|s| LexicalRule::new(s, ontology))
            .collect::<Result<Vec<_>, _>>()
            .map_err(invalid)?;
        let rules = RuleBank::new(rules).map_err(invalid)?;

        let mut classes = HashSet::new();
        for c in &f.alternations {
            if !classes.insert(c.class_id.as_str()) {
                return Err(invalid(format!("duplicate alternation class `{}`", c.class_id)));
            }
        }
        let slots: HashSet<&str> = f.alternations.iter().flat_map(|c| c.slots.keys().map(String::as_str)).collect();

        let mut ids = HashSet::new();
        for r in &f.affixes {
            if !ids.insert(r.id.as_str()) {
                return Err(invalid(format!("duplicate affix rule `{}`", r.id)));
            }
        }
        for r in &f.affixes {
            if r.lr_labels.is_empty() {
                return Err(invalid(format!("affix rule `{}` emits no labels", r.id)));
            }
            if r.slots.is_empty() {
                return Err(invalid(format!("affix rule `{}` names no stem slot", r.id)));
            }
            if let Some(s) = r.slots.iter().find(|s| *s != FORM_SLOT && !slots.contains(s.as_str())) {
                return Err(invalid(format!("affix rule `{}` uses undefined slot `{s}`", r.id)));
            }
            if let Some(last) = r.allomorphs.last() {
                if !last.when.is_default() {
                    return Err(invalid(format!("affix rule `{}` lacks a default allomorph", r.id)));
                }
            }
            if let Some(f) = r.feeds.iter().find(|f| !ids.contains(f.as_str())) {
                return Err(invalid(format!("affix rule `{}` feeds unknown rule `{f}`", r.id)));
            }
            for c in r.when.class.iter().chain(r.allomorphs.iter().flat_map(|a| &a.when.class)) {
                if !classes.contains(c.as_str()) {
                    return Err(invalid(format!("affix rule `{}` names unknown class `{c}`", r.id)));
                }
            }
            check_labels(&r.id, &r.lr_labels, &rules)?;
        }
        for c in &f.compounds {
            check_labels(&c.id, &c.lr_labels, &rules)?;
        }

        Ok(Bank {
            language: f.language,
            morph: MorphBank {
                base_categories: f.base_categories,
                alternations: f.alternations,
                affixes: f.affixes,
                compounds: f.compounds,
            },
            rules,
        })
    }
}

fn check_labels(owner: &str, labels: &[String], rules: &RuleBank) -> Result<(), BankError> {
    match labels.iter().find(|l| rules.resolve(l).is_none()) {
        Some(l) => Err(BankError::UnknownLabel { owner: owner.to_string(), label: l.clone() }),
        None => Ok(()),
    }
}
