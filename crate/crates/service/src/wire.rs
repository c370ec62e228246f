//! JSON shapes exchanged with clients.

use lexforge::lexicon::{Admin, Entry, Origin, Pos};
use lexforge::review::{Edit, Page, ReviewItem, ReviewStatus};
use lexforge::rules::CandidateEntry;
use lexforge::validator::Verdict;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LexRulView {
    pub source: String,
    pub rule: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EntryView {
    pub sense_id: String,
    pub citation: String,
    pub cat: Pos,
    pub dfn: String,
    pub ex: String,
    pub admin: Admin,
    /// Syntactic zone in the feature-structure text syntax.
    pub syn: String,
    /// Semantic zone in the feature-structure text syntax.
    pub sem: String,
    pub lex_rul: Vec<LexRulView>,
    pub origin: Origin,
}

impl From<&Entry> for EntryView {
    fn from(e: &Entry) -> Self {
        let (syn, sem) = e.zone_texts();
        EntryView {
            sense_id: e.sense_id.to_string(),
            citation: e.citation().to_string(),
            cat: e.cat,
            dfn: e.dfn.clone(),
            ex: e.ex.clone(),
            admin: e.admin.clone(),
            syn,
            sem,
            lex_rul: e
                .lex_rul
                .iter()
                .map(|l| LexRulView { source: l.source.to_string(), rule: l.rule.clone() })
                .collect(),
            origin: e.origin,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CandidateView {
    pub surface: String,
    pub language: String,
    pub cat: Pos,
    /// Morphological labels as emitted by the generator.
    pub labels: Vec<String>,
    /// Affix or compound rule ids, in application order.
    pub derivation: Vec<String>,
    pub rule_chain: Vec<String>,
    pub source: String,
    pub entry: EntryView,
}

impl From<&CandidateEntry> for CandidateView {
    fn from(c: &CandidateEntry) -> Self {
        CandidateView {
            surface: c.surface.clone(),
            language: c.language.clone(),
            cat: c.cat(),
            labels: c.labels.clone(),
            derivation: c.derivation.clone(),
            rule_chain: c.rule_chain(),
            source: c.source.to_string(),
            entry: EntryView::from(&c.entry),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ItemView {
    pub candidate_id: String,
    pub version: u64,
    pub review_status: ReviewStatus,
    /// Dictionary-attested candidates.
    pub fast_track: bool,
    pub validation: Verdict,
    pub candidate: CandidateView,
    pub source: EntryView,
}

impl From<&ReviewItem> for ItemView {
    fn from(i: &ReviewItem) -> Self {
        ItemView {
            candidate_id: i.candidate_id.clone(),
            version: i.version,
            review_status: i.review_status,
            fast_track: i.fast_track(),
            validation: i.validation.clone(),
            candidate: CandidateView::from(&i.candidate),
            source: EntryView::from(&i.source),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QueuePage {
    pub items: Vec<ItemView>,
    pub next_cursor: Option<String>,
    pub total: usize,
}

impl From<&Page> for QueuePage {
    fn from(p: &Page) -> Self {
        QueuePage { items: p.items.iter().map(ItemView::from).collect(), next_cursor: p.next_cursor.clone(), total: p.total }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct QueueQuery {
    pub status: Option<String>,
    pub validation: Option<String>,
    pub pos: Option<String>,
    pub rule: Option<String>,
    pub cursor: Option<String>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum DecisionKind {
    Approve,
    Reject,
    Modify,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub decision: DecisionKind,
    pub expected_version: u64,
    #[serde(default)]
    pub edit: Option<Edit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreviewRequest {
    pub sense_id: String,
    pub rule_id: String,
    /// Surface form to check blocking against; derived from the source when absent.
    #[serde(default)]
    pub surface: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PreviewResponse {
    pub surface: String,
    pub entry: EntryView,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcquireRequest {
    pub verbs: Vec<String>,
    /// Overrides the server's auto-admit setting for this run.
    #[serde(default)]
    pub auto_admit: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}
