//! The review queue: generated candidates wait here for a lexicographer's
//! decision. Every decision is versioned (optimistic locking) and every
//! admission goes through the lexicon's single-writer commit.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Entry, Lexicon, LexiconError, LexiconHandle, Origin, Pos, Rejection, SenseId};
use crate::rules::CandidateEntry;
use crate::tfs::Fs;
use crate::validator::{Status, Verdict};

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("unknown candidate `{0}`")]
    UnknownCandidate(String),
    #[error("version conflict: expected {expected}, current {current}")]
    VersionConflict { expected: u64, current: u64 },
    #[error("candidate `{0}` is not pending")]
    NotPending(String),
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
    #[error("bad cursor `{0}`")]
    BadCursor(String),
    #[error(transparent)]
    Store(#[from] LexiconError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReviewStatus {
    Pending,
    Approved,
    Rejected,
    Modified,
}

impl FromStr for ReviewStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pending" => Ok(ReviewStatus::Pending),
            "approved" => Ok(ReviewStatus::Approved),
            "rejected" => Ok(ReviewStatus::Rejected),
            "modified" => Ok(ReviewStatus::Modified),
            _ => Err(format!("unknown review status `{s}`")),
        }
    }
}

impl fmt::Display for ReviewStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReviewStatus::Pending => "pending",
            ReviewStatus::Approved => "approved",
            ReviewStatus::Rejected => "rejected",
            ReviewStatus::Modified => "modified",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewItem {
    pub candidate_id: String,
    pub candidate: CandidateEntry,
    pub source: Entry,
    pub validation: Verdict,
    pub version: u64,
    pub review_status: ReviewStatus,
    seq: u64,
}

impl ReviewItem {
    /// Dictionary-attested candidates are fast-tracked.
    pub fn fast_track(&self) -> bool {
        self.validation.status == Status::Accepted
    }
}

/// Lexicographer edits; absent fields are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    #[serde(default)]
    pub dfn: Option<String>,
    #[serde(default)]
    pub ex: Option<String>,
    /// Replacement semantic zone in the feature-structure text syntax.
    #[serde(default)]
    pub sem: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Approve,
    Reject,
    Modify(Edit),
}

#[derive(Debug, Clone, Default)]
pub struct QueueFilter {
    pub status: Option<ReviewStatus>,
    pub validation: Option<Status>,
    pub pos: Option<Pos>,
    /// Matches when the rule occurs in the candidate's rule chain.
    pub rule: Option<String>,
}

impl QueueFilter {
    fn matches(&self, i: &ReviewItem) -> bool {
        self.status.is_none_or(|s| s == i.review_status)
            && self.validation.is_none_or(|v| v == i.validation.status)
            && self.pos.is_none_or(|p| p == i.candidate.cat())
            && self
                .rule
                .as_ref()
                .is_none_or(|r| i.candidate.rule_chain().iter().any(|c| c.eq_ignore_ascii_case(r)))
    }
}

#[derive(Debug, Clone)]
pub struct Page {
    pub items: Vec<ReviewItem>,
    /// Opaque cursor for the next page; `None` on the last page.
    pub next_cursor: Option<String>,
    /// Number of items matching the filter.
    pub total: usize,
}

/// True when `e` would duplicate an entry already in the lexicon: an
/// underived entry with the same citation, category and zones, or a derived
/// one with the same provenance.
pub fn duplicates(lex: &Lexicon, e: &Entry) -> bool {
    lex.lookup_form(e.citation()).iter().any(|x| {
        x.cat == e.cat
            && if x.is_derived() { x.lex_rul == e.lex_rul } else { x.zones.equiv(&e.zones) }
    })
}

/// Inserts `e` unless it duplicates a stored entry, re-allocating its sense
/// id if another writer took it meanwhile. Returns the id used.
pub fn admit(lex: &mut Lexicon, language: &str, mut e: Entry, origin: Origin) -> Result<Option<SenseId>, LexiconError> {
    if duplicates(lex, &e) {
        return Ok(None);
    }
    if lex.entry(&e.sense_id).is_some() {
        e.sense_id = lex.next_sense_id(e.citation(), e.cat);
    }
    e.origin = origin;
    let id = e.sense_id.clone();
    lex.insert_entry(language, e)?;
    Ok(Some(id))
}

#[derive(Debug)]
pub struct ReviewDesk {
    lexicon: Arc<LexiconHandle>,
    items: Mutex<Vec<ReviewItem>>,
}

impl ReviewDesk {
    pub fn new(lexicon: Arc<LexiconHandle>) -> Self {
        ReviewDesk { lexicon, items: Mutex::new(Vec::new()) }
    }

    pub fn lexicon(&self) -> &Arc<LexiconHandle> {
        &self.lexicon
    }

    /// Queues candidates in the given order. Candidates already queued (and
    /// not rejected) or already in the lexicon are skipped. Returns the
    /// number queued.
    pub fn enqueue(&self, batch: Vec<(CandidateEntry, Verdict, Entry)>) -> usize {
        let snapshot = self.lexicon.snapshot();
        let mut items = self.items.lock();
        let mut added = 0;
        for (candidate, validation, source) in batch {
            let key = candidate.key();
            let queued = items
                .iter()
                .any(|i| i.review_status != ReviewStatus::Rejected && i.candidate.key() == key);
            if queued || duplicates(&snapshot, &candidate.entry) {
                continue;
            }
            let seq = items.last().map_or(1, |i| i.seq + 1);
            items.push(ReviewItem {
                candidate_id: format!("c{seq}"),
                candidate,
                source,
                validation,
                version: 1,
                review_status: ReviewStatus::Pending,
                seq,
            });
            added += 1;
        }
        added
    }

    pub fn len(&self) -> usize {
        self.items.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pending(&self) -> usize {
        self.items.lock().iter().filter(|i| i.review_status == ReviewStatus::Pending).count()
    }

    pub fn get(&self, id: &str) -> Option<ReviewItem> {
        self.items.lock().iter().find(|i| i.candidate_id == id).cloned()
    }

    /// One page of matching items in generation order.
    pub fn list(&self, filter: &QueueFilter, cursor: Option<&str>, limit: usize) -> Result<Page, ReviewError> {
        let after = match cursor {
            None | Some("") => 0,
            Some(c) => c.parse::<u64>().map_err(|_| ReviewError::BadCursor(c.to_string()))?,
        };
        let items = self.items.lock();
        let matching: Vec<&ReviewItem> = items.iter().filter(|i| filter.matches(i)).collect();
        let limit = limit.max(1);
        let page: Vec<ReviewItem> = matching.iter().filter(|i| i.seq > after).take(limit).map(|i| (*i).clone()).collect();
        let next_cursor = match page.last() {
            Some(last) if matching.iter().any(|i| i.seq > last.seq) => Some(last.seq.to_string()),
            _ => None,
        };
        Ok(Page { items: page, next_cursor, total: matching.len() })
    }

    /// Applies a decision atomically: the queue lock is held across the
    /// lexicon commit, so observers see either the old or the new state.
    pub fn decide(&self, id: &str, decision: Decision, expected_version: u64) -> Result<ReviewItem, ReviewError> {
        let mut items = self.items.lock();
        let item = items
            .iter_mut()
            .find(|i| i.candidate_id == id)
            .ok_or_else(|| ReviewError::UnknownCandidate(id.to_string()))?;
        if item.version != expected_version {
            return Err(ReviewError::VersionConflict { expected: expected_version, current: item.version });
        }
        if item.review_status != ReviewStatus::Pending {
            return Err(ReviewError::NotPending(id.to_string()));
        }
        let language = item.candidate.language.clone();
        let (status, entry) = match decision {
            Decision::Reject => {
                let r = Rejection {
                    sense_id: item.candidate.source.clone(),
                    labels: item.candidate.labels.clone(),
                    surface: item.candidate.surface.clone(),
                };
                self.lexicon.commit(|lex| {
                    lex.add_rejection(r);
                    Ok::<_, LexiconError>(())
                })?;
                (ReviewStatus::Rejected, item.candidate.entry.clone())
            }
            Decision::Approve => {
                let id = self.commit_entry(&language, item.candidate.entry.clone())?;
                let mut e = item.candidate.entry.clone();
                e.sense_id = id;
                e.origin = Origin::Reviewed;
                (ReviewStatus::Approved, e)
            }
            Decision::Modify(edit) => {
                let mut e = item.candidate.entry.clone();
                if let Some(d) = edit.dfn {
                    e.dfn = d;
                }
                if let Some(x) = edit.ex {
                    e.ex = x;
                }
                if let Some(sem) = edit.sem {
                    let syn = e.syn_text();
                    e.zones = Fs::parse_zones(&[("syn", &syn), ("sem", &sem)])
                        .map_err(|err| ReviewError::InvalidEdit(err.to_string()))?;
                }
                e.validate(self.lexicon.snapshot().ontology())
                    .map_err(|err| ReviewError::InvalidEdit(err.to_string()))?;
                let id = self.commit_entry(&language, e.clone())?;
                e.sense_id = id;
                e.origin = Origin::Reviewed;
                (ReviewStatus::Modified, e)
            }
        };
        item.candidate.entry = entry;
        item.review_status = status;
        item.version += 1;
        Ok(item.clone())
    }

    fn commit_entry(&self, language: &str, e: Entry) -> Result<SenseId, ReviewError> {
        self.lexicon.commit(|lex| {
            let mut e = e;
            if lex.entry(&e.sense_id).is_some() {
                e.sense_id = lex.next_sense_id(e.citation(), e.cat);
            }
            e.origin = Origin::Reviewed;
            let id = e.sense_id.clone();
            lex.insert_entry(language, e).map_err(|err| match err {
                LexiconError::Invariant(m) => ReviewError::InvalidEdit(m),
                other => ReviewError::Store(other),
            })?;
            Ok(id)
        })
    }
}
