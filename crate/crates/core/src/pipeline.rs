//! Acquisition runs, load-time expansion and run-time fallback lookup.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::Bank;
use crate::lexicon::{Entry, Lexicon, LexiconError, LexiconHandle, Origin, SenseAllocator, SenseId, Superentry};
use crate::morphgen::{derive_forms, AffixKind, DerivedForm, MorphError};
use crate::review::{admit, ReviewDesk};
use crate::rules::{expand, expand_suppletive, CandidateEntry, LexicalRule, RuleError, TriggerMode};
use crate::text::{nfc, strip_acute};
use crate::validator::{validate, Resources, Status, Verdict};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Morph(#[from] MorphError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Store(#[from] LexiconError),
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub depth: usize,
    pub mode: TriggerMode,
    /// Admit dictionary-accepted candidates without review.
    pub auto_admit_accepted: bool,
    /// Fixed admin timestamp; the local clock is used when absent.
    pub timestamp: Option<String>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { depth: 2, mode: TriggerMode::Hybrid, auto_admit_accepted: false, timestamp: None }
    }
}

impl Settings {
    pub fn now(&self) -> String {
        self.timestamp
            .clone()
            .unwrap_or_else(|| chrono::Local::now().format("%d/%m %H:%M:%S").to_string())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionCounts {
    pub accepted: usize,
    pub deferred: usize,
    pub rejected: usize,
}

impl PartitionCounts {
    pub fn total(&self) -> usize {
        self.accepted + self.deferred + self.rejected
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionReport {
    pub verbs_processed: usize,
    pub senses_processed: usize,
    pub candidates_generated: usize,
    pub per_sense_mean: f64,
    pub partition_counts: PartitionCounts,
    pub pending_review: usize,
    /// Entries admitted without review (auto-admit runs only).
    pub admitted: usize,
    pub unresolved: Vec<String>,
}

impl AcquisitionReport {
    /// Checks the report's arithmetic.
    pub fn check(&self) -> Result<(), String> {
        if self.candidates_generated != self.partition_counts.total() {
            return Err(format!(
                "{} candidates but partition sums to {}",
                self.candidates_generated,
                self.partition_counts.total()
            ));
        }
        let mean = mean(self.candidates_generated, self.senses_processed);
        if (mean - self.per_sense_mean).abs() > 1e-9 {
            return Err(format!("per-sense mean {} should be {mean}", self.per_sense_mean));
        }
        if self.pending_review + self.admitted > self.partition_counts.accepted + self.partition_counts.deferred {
            return Err("more candidates queued or admitted than survived validation".into());
        }
        Ok(())
    }
}

fn mean(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

#[derive(Debug, Clone)]
pub struct ValidatedCandidate {
    pub candidate: CandidateEntry,
    pub verdict: Verdict,
}

/// Candidates of one run, before they are queued or admitted.
#[derive(Debug, Clone, Default)]
pub struct Generation {
    pub candidates: Vec<ValidatedCandidate>,
    /// Candidate count per processed source sense, in processing order.
    pub per_sense: Vec<(SenseId, usize)>,
    pub verbs_processed: usize,
    pub unresolved: Vec<String>,
}

impl Generation {
    pub fn counts(&self) -> PartitionCounts {
        let mut c = PartitionCounts::default();
        for v in &self.candidates {
            match v.verdict.status {
                Status::Accepted => c.accepted += 1,
                Status::Deferred => c.deferred += 1,
                Status::Rejected => c.rejected += 1,
            }
        }
        c
    }

    pub fn report(&self) -> AcquisitionReport {
        let senses = self.per_sense.len();
        AcquisitionReport {
            verbs_processed: self.verbs_processed,
            senses_processed: senses,
            candidates_generated: self.candidates.len(),
            per_sense_mean: mean(self.candidates.len(), senses),
            partition_counts: self.counts(),
            pending_review: 0,
            admitted: 0,
            unresolved: self.unresolved.clone(),
        }
    }
}

/// Candidates for one superentry (derived forms plus suppletive outputs),
/// allocating sense ids from `alloc`.
pub fn candidates_for(
    s: &Superentry,
    derived: &[DerivedForm],
    bank: &Bank,
    mode: TriggerMode,
    lexicon: &Lexicon,
    alloc: &mut SenseAllocator<'_>,
    at: &str,
) -> Result<Vec<CandidateEntry>, RuleError> {
    let mut out = expand(s, derived, &bank.rules, mode, lexicon, alloc, at)?;
    out.extend(expand_suppletive(s, &bank.rules, lexicon, alloc, at)?);
    Ok(out)
}

/// Derive, expand and validate for each citation. Pure with respect to the
/// lexicon; derivation runs in parallel, sense ids are allocated in input
/// order.
pub fn generate(
    verbs: &[String],
    lexicon: &Lexicon,
    bank: &Bank,
    res: &Resources,
    settings: &Settings,
) -> Result<Generation, PipelineError> {
    let at = settings.now();
    let mut g = Generation::default();
    let mut work: Vec<&Superentry> = Vec::new();
    for v in verbs {
        match lexicon.get_superentry(v, &bank.language) {
            Some(s) if s.entries.iter().any(|e| bank.morph.base_categories.contains(&e.cat)) => work.push(s),
            _ => g.unresolved.push(v.clone()),
        }
    }
    let derived: Vec<Vec<DerivedForm>> = work
        .par_iter()
        .map(|s| derive_forms(s, &bank.morph, settings.depth))
        .collect::<Result<_, _>>()?;

    let mut alloc = lexicon.allocator();
    let mut all = Vec::new();
    for (s, d) in work.iter().zip(&derived) {
        g.verbs_processed += 1;
        let cands = candidates_for(s, d, bank, settings.mode, lexicon, &mut alloc, &at)?;
        for e in s.entries.iter().filter(|e| bank.morph.base_categories.contains(&e.cat)) {
            g.per_sense.push((e.sense_id.clone(), cands.iter().filter(|c| c.source == e.sense_id).count()));
        }
        all.extend(cands);
    }
    g.candidates = all
        .into_iter()
        .map(|candidate| {
            let verdict = res.verdict(&candidate.surface);
            ValidatedCandidate { candidate, verdict }
        })
        .collect();
    Ok(g)
}

/// Surface produced by applying `rule` to the stored sense `source`: the
/// rule's suppletive form when it lists one, otherwise the first derived
/// form of that sense whose last label resolves to the rule.
pub fn rule_surface(
    lexicon: &Lexicon,
    bank: &Bank,
    source: &SenseId,
    rule: &LexicalRule,
    depth: usize,
) -> Result<Option<String>, MorphError> {
    let citation = source.citation();
    if let Some(s) = rule.spec.surfaces.get(citation) {
        return Ok(Some(s.clone()));
    }
    let language = lexicon.language_of(source).unwrap_or(&bank.language);
    let Some(s) = lexicon.get_superentry(citation, language) else { return Ok(None) };
    Ok(derive_forms(s, &bank.morph, depth)?
        .into_iter()
        .filter(|f| &f.source_sense == source)
        .find(|f| f.lr_labels.last().and_then(|l| bank.rules.resolve(l)).is_some_and(|r| r.id() == rule.id()))
        .map(|f| f.surface))
}

/// Acquisition, load-time expansion and run-time lookup over one shared
/// lexicon.
#[derive(Debug)]
pub struct Pipeline {
    lexicon: Arc<LexiconHandle>,
    bank: Arc<Bank>,
    resources: Arc<Resources>,
    desk: ReviewDesk,
    settings: Settings,
    cache: Mutex<HashMap<(u64, String), Vec<Entry>>>,
    derivations: AtomicUsize,
}

impl Pipeline {
    pub fn new(lexicon: Arc<LexiconHandle>, bank: Arc<Bank>, resources: Arc<Resources>, settings: Settings) -> Self {
        Pipeline {
            desk: ReviewDesk::new(lexicon.clone()),
            lexicon,
            bank,
            resources,
            settings,
            cache: Mutex::new(HashMap::new()),
            derivations: AtomicUsize::new(0),
        }
    }

    pub fn lexicon(&self) -> &Arc<LexiconHandle> {
        &self.lexicon
    }

    pub fn bank(&self) -> &Bank {
        &self.bank
    }

    pub fn resources(&self) -> &Resources {
        &self.resources
    }

    pub fn desk(&self) -> &ReviewDesk {
        &self.desk
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    /// Number of superentry derivations run by [`Pipeline::runtime_lookup`].
    pub fn derivations(&self) -> usize {
        self.derivations.load(Ordering::Relaxed)
    }

    /// Generates, validates and routes candidates: accepted and deferred go
    /// to the review queue (accepted ones are admitted directly when
    /// auto-admit is on); rejected ones stay in the returned generation.
    pub fn acquire(&self, verbs: &[String]) -> Result<(AcquisitionReport, Generation), PipelineError> {
        self.acquire_with(verbs, self.settings.auto_admit_accepted)
    }

    pub fn acquire_with(&self, verbs: &[String], auto_admit: bool) -> Result<(AcquisitionReport, Generation), PipelineError> {
        let snapshot = self.lexicon.snapshot();
        let g = generate(verbs, &snapshot, &self.bank, &self.resources, &self.settings)?;
        let mut report = g.report();
        let mut queue = Vec::new();
        let mut admitted = Vec::new();
        for v in &g.candidates {
            match v.verdict.status {
                Status::Accepted if auto_admit => admitted.push(v.candidate.clone()),
                Status::Accepted | Status::Deferred => {
                    let source = snapshot.entry(&v.candidate.source).cloned().expect("source sense is stored");
                    queue.push((v.candidate.clone(), v.verdict.clone(), source));
                }
                Status::Rejected => {}
            }
        }
        if !admitted.is_empty() {
            report.admitted = self.lexicon.commit(|lex| {
                let mut n = 0;
                for c in admitted {
                    n += usize::from(admit(lex, &c.language, c.entry, Origin::AutoAdmitted)?.is_some());
                }
                Ok::<_, LexiconError>(n)
            })?;
        }
        report.pending_review = self.desk.enqueue(queue);
        Ok((report, g))
    }

    /// Admits every dictionary-accepted candidate of every underived
    /// base-category sense, bypassing review. Returns the number of entries
    /// added; a second run adds none.
    pub fn load_time_expand(&self) -> Result<usize, PipelineError> {
        let snapshot = self.lexicon.snapshot();
        let bases = &self.bank.morph.base_categories;
        let mut work = Vec::new();
        for s in snapshot.superentries().filter(|s| s.language == self.bank.language) {
            let entries: Vec<Entry> =
                s.entries.iter().filter(|e| !e.is_derived() && bases.contains(&e.cat)).cloned().collect();
            if !entries.is_empty() {
                work.push(Superentry::new(&s.citation, &s.language, entries));
            }
        }
        let at = self.settings.now();
        let mut alloc = snapshot.allocator();
        let mut accepted = Vec::new();
        for s in &work {
            let d = derive_forms(s, &self.bank.morph, self.settings.depth)?;
            let c = candidates_for(s, &d, &self.bank, self.settings.mode, &snapshot, &mut alloc, &at)?;
            accepted.extend(validate(c, &self.resources).accepted.into_iter().map(|(c, _)| c));
        }
        Ok(self.lexicon.commit(|lex| {
            let mut n = 0;
            for c in accepted {
                n += usize::from(admit(lex, &c.language, c.entry, Origin::AutoAdmitted)?.is_some());
            }
            Ok::<_, LexiconError>(n)
        })?)
    }

    /// Direct lookup, falling back to reverse morphology: known prefixes
    /// are stripped (up to the depth limit), stored base forms whose root
    /// begins the remainder are re-derived, and derivations whose surface
    /// equals the query are returned as ephemeral entries.
    pub fn runtime_lookup(&self, surface: &str) -> Vec<Entry> {
        let surface = nfc(surface);
        let snapshot = self.lexicon.snapshot();
        let direct: Vec<Entry> = snapshot.lookup_form(&surface).into_iter().cloned().collect();
        if !direct.is_empty() {
            return direct;
        }
        let key = (snapshot.revision(), surface.clone());
        if let Some(hit) = self.cache.lock().get(&key) {
            return hit.clone();
        }
        let found = self.reverse_lookup(&surface, &snapshot);
        self.cache.lock().insert(key, found.clone());
        found
    }

    fn reverse_lookup(&self, surface: &str, lex: &Lexicon) -> Vec<Entry> {
        let bank = &self.bank;
        let bases = &bank.morph.base_categories;
        let mut roots: HashMap<String, BTreeSet<String>> = HashMap::new();
        for s in lex.superentries().filter(|s| s.language == bank.language) {
            if s.entries.iter().any(|e| bases.contains(&e.cat)) {
                for r in bank.morph.roots(&s.citation) {
                    for key in root_keys(&r) {
                        roots.entry(key).or_default().insert(s.citation.clone());
                    }
                }
            }
        }

        let mut remainders = vec![surface.to_string()];
        let mut frontier = remainders.clone();
        for _ in 0..self.settings.depth {
            let mut next = Vec::new();
            for r in &frontier {
                for rule in bank.morph.affixes.iter().filter(|a| a.kind != AffixKind::Suffix) {
                    let mut forms: Vec<&str> = rule.allomorphs.iter().map(|a| a.form.as_str()).collect();
                    forms.push(&rule.affix);
                    forms.sort_by_key(|f| std::cmp::Reverse(f.len()));
                    for f in forms {
                        if !f.is_empty() && r.len() > f.len() && r.starts_with(f) {
                            next.push(r[f.len()..].to_string());
                        }
                    }
                }
            }
            next.retain(|r| !remainders.contains(r));
            remainders.extend(next.iter().cloned());
            frontier = next;
        }

        let mut candidates: BTreeSet<String> = BTreeSet::new();
        for r in remainders.iter().map(|r| strip_acute(r)) {
            for (i, _) in r.char_indices().skip(1).chain(std::iter::once((r.len(), ' '))) {
                if let Some(c) = roots.get(&r[..i]) {
                    candidates.extend(c.iter().cloned());
                }
            }
        }
        for rule in bank.rules.rules() {
            for (citation, out) in &rule.spec.surfaces {
                if nfc(out) == surface {
                    candidates.insert(nfc(citation));
                }
            }
        }

        let at = self.settings.now();
        let mut alloc = lex.allocator();
        let mut out = Vec::new();
        for citation in candidates {
            let Some(s) = lex.get_superentry(&citation, &bank.language) else { continue };
            self.derivations.fetch_add(1, Ordering::Relaxed);
            let Ok(derived) = derive_forms(s, &bank.morph, self.settings.depth) else { continue };
            let derived: Vec<DerivedForm> = derived.into_iter().filter(|d| d.surface == surface).collect();
            let Ok(cands) = candidates_for(s, &derived, bank, self.settings.mode, lex, &mut alloc, &at) else {
                continue;
            };
            for c in cands.into_iter().filter(|c| c.surface == surface) {
                let mut e = c.entry;
                e.origin = Origin::Ephemeral;
                out.push(e);
            }
        }
        out
    }
}

/// Index keys for a root: the root itself and, for roots of three or more
/// characters, the root without its last character, so that seam repairs
/// (elision, c/qu, g/gu) still find the base. Accents are stripped.
fn root_keys(root: &str) -> Vec<String> {
    let root = strip_acute(root);
    let mut keys = vec![root.clone()];
    if root.chars().count() >= 3 {
        let mut short = root.clone();
        short.pop();
        keys.push(short);
    }
    keys
}
