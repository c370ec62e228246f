//! Superentries, entries and the persistent lexicon store.
//!
//! The on-disk format is JSON lines: a header record carrying the record
//! counts, one record per entry (grouped by superentry, superentries sorted
//! by citation then language, entries in stored order), then one record per
//! reviewer rejection. The syntactic and semantic zones of each entry are
//! written in the feature-structure text syntax and share one tag namespace.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::Ontology;
use crate::text::nfc;
use crate::tfs::{Fs, FsBuilder, NodeRef, TfsError, TypeHierarchy};

const FORMAT: &str = "lexforge-lexicon";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown sense `{0}`")]
    UnknownSense(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LexiconError {
    fn invariant(msg: impl Into<String>) -> Self {
        LexiconError::Invariant(msg.into())
    }
}

/// Part of speech of an entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pos {
    V,
    N,
    Adj,
    Adv,
}

impl Pos {
    pub fn symbol(self) -> &'static str {
        match self {
            Pos::V => "V",
            Pos::N => "N",
            Pos::Adj => "ADJ",
            Pos::Adv => "ADV",
        }
    }

    /// Lowercase label used in TSV output (`v`, `n`, `adj`, `adv`).
    pub fn short(self) -> &'static str {
        match self {
            Pos::V => "v",
            Pos::N => "n",
            Pos::Adj => "adj",
            Pos::Adv => "adv",
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Pos {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "V" => Ok(Pos::V),
            "N" => Ok(Pos::N),
            "ADJ" => Ok(Pos::Adj),
            "ADV" => Ok(Pos::Adv),
            _ => Err(format!("unknown part of speech `{s}`")),
        }
    }
}

/// Sense identifier of the shape `<citation>-<CAT><ordinal>`, e.g. `comprar-V1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SenseId {
    text: String,
    split: usize,
    cat: Pos,
    ordinal: u32,
}

impl SenseId {
    pub fn new(citation: &str, cat: Pos, ordinal: u32) -> Self {
        let citation = nfc(citation);
        SenseId {
            split: citation.len(),
            text: format!("{citation}-{}{ordinal}", cat.symbol()),
            cat,
            ordinal,
        }
    }

    pub fn citation(&self) -> &str {
        &self.text[..self.split]
    }

    pub fn cat(&self) -> Pos {
        self.cat
    }

    pub fn ordinal(&self) -> u32 {
        self.ordinal
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

impl FromStr for SenseId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("malformed sense id `{s}`");
        let dash = s.rfind('-').ok_or_else(bad)?;
        let (citation, tail) = (&s[..dash], &s[dash + 1..]);
        let digits = tail.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?;
        let cat: Pos = tail[..digits].parse().map_err(|_| bad())?;
        if tail[..digits] != *cat.symbol() {
            return Err(bad());
        }
        let ordinal: u32 = tail[digits..].parse().map_err(|_| bad())?;
        if citation.is_empty() || ordinal == 0 {
            return Err(bad());
        }
        Ok(SenseId::new(citation, cat, ordinal))
    }
}

impl TryFrom<String> for SenseId {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SenseId> for String {
    fn from(s: SenseId) -> String {
        s.text
    }
}

impl fmt::Display for SenseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Admin {
    /// Author initials or the id of the rule that generated the entry.
    pub by: String,
    pub at: String,
}

/// One step of derivational provenance: the rule applied and the sense it
/// was applied to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LexRul {
    pub source: SenseId,
    pub rule: String,
}

/// How an entry came to be in the lexicon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    #[default]
    Seed,
    /// Produced by a rule and not (yet) admitted.
    Generated,
    Reviewed,
    AutoAdmitted,
    /// Built on demand by run-time lookup; never persisted by default.
    Ephemeral,
}

/// A single word sense.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub sense_id: SenseId,
    pub cat: Pos,
    pub dfn: String,
    pub ex: String,
    pub admin: Admin,
    /// Root with two attributes, `syn` and `sem`, sharing one tag space.
    pub zones: Fs,
    pub lex_rul: Vec<LexRul>,
    /// Itemized rule ids applicable to this sense.
    pub items: Vec<String>,
    pub origin: Origin,
}

impl Entry {
    pub fn new(
        sense_id: SenseId,
        dfn: impl Into<String>,
        ex: impl Into<String>,
        admin: Admin,
        syn: &str,
        sem: &str,
    ) -> Result<Self, TfsError> {
        Ok(Entry {
            cat: sense_id.cat(),
            sense_id,
            dfn: dfn.into(),
            ex: ex.into(),
            admin,
            zones: Fs::parse_zones(&[("syn", syn), ("sem", sem)])?,
            lex_rul: Vec::new(),
            items: Vec::new(),
            origin: Origin::Seed,
        })
    }

    pub fn citation(&self) -> &str {
        self.sense_id.citation()
    }

    pub fn syn(&self) -> Option<NodeRef<'_>> {
        self.zones.root().get("syn")
    }

    pub fn sem(&self) -> Option<NodeRef<'_>> {
        self.zones.root().get("sem")
    }

    /// Type of the semantic root (the head concept).
    pub fn sem_head(&self) -> Option<&str> {
        self.sem().map(|n| n.ty())
    }

    pub fn is_derived(&self) -> bool {
        !self.lex_rul.is_empty()
    }

    /// Rule ids of the provenance chain, in application order.
    pub fn rule_chain(&self) -> Vec<String> {
        self.lex_rul.iter().map(|l| l.rule.clone()).collect()
    }

    /// The zones plus a `cat` attribute; the structure rule triggers match.
    pub fn view(&self) -> Fs {
        let mut b = FsBuilder::default();
        let root = b.import(&self.zones, 0);
        let cat = b.node(self.cat.symbol());
        b.set(root, "cat", cat);
        b.finish(root).expect("adding an atom keeps the structure acyclic")
    }

    pub fn syn_text(&self) -> String {
        self.zone_texts().0
    }

    pub fn sem_text(&self) -> String {
        self.zone_texts().1
    }

    /// Zone texts; shared bodies are written in `sem`.
    pub fn zone_texts(&self) -> (String, String) {
        let mut v = self.zones.render_zones(&["syn", "sem"], &["sem", "syn"]);
        let sem = v.pop().unwrap_or_default();
        let syn = v.pop().unwrap_or_default();
        (syn, sem)
    }

    /// Checks the entry-local invariants against the ontology.
    pub fn validate(&self, ontology: &Ontology) -> Result<(), LexiconError> {
        let id = &self.sense_id;
        if id.cat() != self.cat {
            return Err(LexiconError::invariant(format!(
                "{id}: category segment does not match cat {}",
                self.cat
            )));
        }
        ontology
            .hierarchy()
            .check(&self.zones)
            .map_err(|e| LexiconError::invariant(format!("{id}: {e}")))?;
        let (Some(syn), Some(sem)) = (self.syn(), self.sem()) else {
            return Err(LexiconError::invariant(format!("{id}: missing syn or sem zone")));
        };
        if !ontology.is_concept(sem.ty()) {
            return Err(LexiconError::invariant(format!(
                "{id}: sem head `{}` is not a registered concept",
                sem.ty()
            )));
        }
        let sem_nodes = self.zones.reachable(sem.id());
        for n in self.zones.reachable(syn.id()) {
            if let Some(target) = self.zones.node(n).get("sem") {
                if !sem_nodes.contains(&target.id()) {
                    return Err(LexiconError::invariant(format!(
                        "{id}: syn coindexation does not resolve inside sem"
                    )));
                }
            }
        }
        if self.lex_rul.iter().any(|l| l.source == *id) {
            return Err(LexiconError::invariant(format!("{id}: entry derives from itself")));
        }
        Ok(())
    }

    fn to_record(&self, language: &str) -> EntryRecord {
        let (syn, sem) = self.zone_texts();
        EntryRecord {
            citation: self.citation().to_string(),
            lang: language.to_string(),
            sense_id: self.sense_id.clone(),
            cat: self.cat,
            dfn: self.dfn.clone(),
            ex: self.ex.clone(),
            admin: self.admin.clone(),
            syn,
            sem,
            lex_rul: self.lex_rul.iter().map(|l| (l.source.clone(), l.rule.clone())).collect(),
            items: self.items.clone(),
            origin: self.origin,
        }
    }
}

impl fmt::Display for Entry {
    /// Lexicographer-facing rendering, one zone per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (syn, sem) = self.zone_texts();
        writeln!(f, "{}", self.sense_id)?;
        writeln!(f, "  cat:     {}", self.cat)?;
        writeln!(f, "  dfn:     {}", self.dfn)?;
        writeln!(f, "  ex:      {}", self.ex)?;
        writeln!(f, "  admin:   {} \"{}\"", self.admin.by, self.admin.at)?;
        writeln!(f, "  syn:     {syn}")?;
        writeln!(f, "  sem:     {sem}")?;
        for l in &self.lex_rul {
            writeln!(f, "  lex-rul: {} \"{}\"", l.source, l.rule)?;
        }
        Ok(())
    }
}

/// Wire and file form of an entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub citation: String,
    pub lang: String,
    pub sense_id: SenseId,
    pub cat: Pos,
    pub dfn: String,
    pub ex: String,
    pub admin: Admin,
    pub syn: String,
    pub sem: String,
    #[serde(default)]
    pub lex_rul: Vec<(SenseId, String)>,
    #[serde(default)]
    pub items: Vec<String>,
    #[serde(default)]
    pub origin: Origin,
}

impl EntryRecord {
    pub fn from_entry(e: &Entry, language: &str) -> Self {
        e.to_record(language)
    }

    pub fn into_entry(self) -> Result<(String, String, Entry), TfsError> {
        let zones = Fs::parse_zones(&[("syn", &self.syn), ("sem", &self.sem)])?;
        let entry = Entry {
            sense_id: self.sense_id,
            cat: self.cat,
            dfn: self.dfn,
            ex: self.ex,
            admin: self.admin,
            zones,
            lex_rul: self.lex_rul.into_iter().map(|(source, rule)| LexRul { source, rule }).collect(),
            items: self.items,
            origin: self.origin,
        };
        Ok((nfc(&self.citation), self.lang, entry))
    }
}

/// All senses of one citation form in one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Superentry {
    pub citation: String,
    pub language: String,
    pub entries: Vec<Entry>,
}

impl Superentry {
    pub fn new(citation: &str, language: &str, entries: Vec<Entry>) -> Self {
        Superentry { citation: nfc(citation), language: language.to_string(), entries }
    }

    pub fn senses_of(&self, cat: Pos) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(move |e| e.cat == cat)
    }
}

/// A reviewer's rejection of one generated candidate. Regeneration of the
/// same (source sense, label sequence, surface) is suppressed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rejection {
    pub sense_id: SenseId,
    pub labels: Vec<String>,
    pub surface: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    entries: usize,
    blocks: usize,
}

#[derive(Serialize, Deserialize)]
struct BlockRecord {
    block: Rejection,
}

type Key = (String, String);

/// In-memory lexicon with citation and sense indexes.
#[derive(Debug, Clone)]
pub struct Lexicon {
    ontology: Arc<Ontology>,
    superentries: BTreeMap<Key, Superentry>,
    senses: HashMap<SenseId, Key>,
    issued: HashMap<(String, Pos), u32>,
    rejections: BTreeSet<Rejection>,
    revision: u64,
}

impl Lexicon {
    pub fn new(ontology: Arc<Ontology>) -> Self {
        Lexicon {
            ontology,
            superentries: BTreeMap::new(),
            senses: HashMap::new(),
            issued: HashMap::new(),
            rejections: BTreeSet::new(),
            revision: 0,
        }
    }

    pub fn ontology(&self) -> &Arc<Ontology> {
        &self.ontology
    }

    pub fn hierarchy(&self) -> &TypeHierarchy {
        self.ontology.hierarchy()
    }

    /// Incremented on every successful mutation.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.senses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.senses.is_empty()
    }

    pub fn superentries(&self) -> impl Iterator<Item = &Superentry> {
        self.superentries.values()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Superentry, &Entry)> {
        self.superentries.values().flat_map(|s| s.entries.iter().map(move |e| (s, e)))
    }

    pub fn get_superentry(&self, citation: &str, language: &str) -> Option<&Superentry> {
        self.superentries.get(&(nfc(citation), language.to_string()))
    }

    /// Superentries for `citation` in every language.
    pub fn superentries_for(&self, citation: &str) -> impl Iterator<Item = &Superentry> {
        let c = nfc(citation);
        self.superentries
            .range((c.clone(), String::new())..)
            .take_while(move |((k, _), _)| *k == c)
            .map(|(_, s)| s)
    }

    /// All entries whose citation equals the NFC-normalized surface form.
    pub fn lookup_form(&self, surface: &str) -> Vec<&Entry> {
        self.superentries_for(surface).flat_map(|s| s.entries.iter()).collect()
    }

    pub fn entry(&self, sense_id: &SenseId) -> Option<&Entry> {
        let key = self.senses.get(sense_id)?;
        self.superentries[key].entries.iter().find(|e| e.sense_id == *sense_id)
    }

    pub fn language_of(&self, sense_id: &SenseId) -> Option<&str> {
        self.senses.get(sense_id).map(|(_, l)| l.as_str())
    }

    /// Inserts or replaces the superentry keyed by (citation, language).
    pub fn put_superentry(&mut self, s: Superentry) -> Result<(), LexiconError> {
        let s = Superentry::new(&s.citation, &s.language, s.entries);
        let key = (s.citation.clone(), s.language.clone());
        let mut seen = BTreeSet::new();
        for e in &s.entries {
            if e.citation() != s.citation {
                return Err(LexiconError::invariant(format!(
                    "{}: sense id does not share the citation `{}`",
                    e.sense_id, s.citation
                )));
            }
            if !seen.insert(e.sense_id.clone()) {
                return Err(LexiconError::invariant(format!("duplicate sense id {}", e.sense_id)));
            }
            if let Some(other) = self.senses.get(&e.sense_id) {
                if *other != key {
                    return Err(LexiconError::invariant(format!(
                        "sense id {} already used in language {}",
                        e.sense_id, other.1
                    )));
                }
            }
            e.validate(&self.ontology)?;
        }
        self.check_provenance(&s.entries, Some(&key))?;

        if let Some(old) = self.superentries.remove(&key) {
            for e in old.entries {
                self.senses.remove(&e.sense_id);
            }
        }
        for e in &s.entries {
            self.senses.insert(e.sense_id.clone(), key.clone());
        }
        self.superentries.insert(key, s);
        self.revision += 1;
        Ok(())
    }

    /// Appends one entry to its superentry, creating the superentry if needed.
    pub fn insert_entry(&mut self, language: &str, entry: Entry) -> Result<(), LexiconError> {
        let citation = entry.citation().to_string();
        let mut s = self
            .get_superentry(&citation, language)
            .cloned()
            .unwrap_or_else(|| Superentry::new(&citation, language, Vec::new()));
        s.entries.push(entry);
        self.put_superentry(s)
    }

    /// Replaces the stored entry with the same sense id.
    pub fn replace_entry(&mut self, entry: Entry) -> Result<(), LexiconError> {
        let key = self
            .senses
            .get(&entry.sense_id)
            .cloned()
            .ok_or_else(|| LexiconError::UnknownSense(entry.sense_id.to_string()))?;
        let mut s = self.superentries[&key].clone();
        for e in s.entries.iter_mut() {
            if e.sense_id == entry.sense_id {
                *e = entry.clone();
            }
        }
        self.put_superentry(s)
    }

    pub fn remove_entry(&mut self, sense_id: &SenseId) -> Result<Entry, LexiconError> {
        let key = self
            .senses
            .get(sense_id)
            .cloned()
            .ok_or_else(|| LexiconError::UnknownSense(sense_id.to_string()))?;
        let s = self.superentries.get_mut(&key).expect("index is consistent");
        let pos = s.entries.iter().position(|e| e.sense_id == *sense_id).expect("index is consistent");
        let removed = s.entries.remove(pos);
        if s.entries.is_empty() {
            self.superentries.remove(&key);
        }
        self.senses.remove(sense_id);
        self.revision += 1;
        Ok(removed)
    }

    fn check_provenance(&self, entries: &[Entry], replacing: Option<&Key>) -> Result<(), LexiconError> {
        let new: HashMap<&SenseId, &Entry> = entries.iter().map(|e| (&e.sense_id, e)).collect();
        let sources = |id: &SenseId| -> Vec<SenseId> {
            if let Some(e) = new.get(id) {
                return e.lex_rul.iter().map(|l| l.source.clone()).collect();
            }
            match self.senses.get(id) {
                Some(k) if Some(k) != replacing => self
                    .entry(id)
                    .map(|e| e.lex_rul.iter().map(|l| l.source.clone()).collect())
                    .unwrap_or_default(),
                _ => Vec::new(),
            }
        };
        for e in entries {
            let mut stack = sources(&e.sense_id);
            let mut seen = BTreeSet::new();
            while let Some(s) = stack.pop() {
                if s == e.sense_id {
                    return Err(LexiconError::invariant(format!(
                        "{}: provenance chain is cyclic",
                        e.sense_id
                    )));
                }
                if seen.insert(s.clone()) {
                    stack.extend(sources(&s));
                }
            }
        }
        Ok(())
    }

    /// Reserves the smallest ordinal for (citation, cat) that is unused in
    /// the store and above every ordinal issued earlier in this session.
    pub fn next_sense_id(&mut self, citation: &str, cat: Pos) -> SenseId {
        let citation = nfc(citation);
        let floor = self.issued.get(&(citation.clone(), cat)).copied().unwrap_or(0);
        let id = first_free(&citation, cat, floor, |id| self.senses.contains_key(id));
        self.issued.insert((citation, cat), id.ordinal());
        id
    }

    /// A sense-id allocator over this snapshot that does not mutate it.
    pub fn allocator(&self) -> SenseAllocator<'_> {
        SenseAllocator { lexicon: self, issued: HashMap::new() }
    }

    pub fn rejections(&self) -> &BTreeSet<Rejection> {
        &self.rejections
    }

    pub fn is_rejected(&self, sense_id: &SenseId, labels: &[String], surface: &str) -> bool {
        self.rejections.iter().any(|r| r.sense_id == *sense_id && r.labels == labels && r.surface == surface)
    }

    pub fn add_rejection(&mut self, r: Rejection) {
        if self.rejections.insert(r) {
            self.revision += 1;
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LexiconError> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, ontology: Arc<Ontology>) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path)?;
        Lexicon::parse(&text, ontology)
    }

    pub fn parse(text: &str, ontology: Arc<Ontology>) -> Result<Self, LexiconError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(LexiconError::Parse { line: 1, msg: "missing header".into() })?;
        let header: Header = serde_json::from_str(first)
            .map_err(|e| LexiconError::Parse { line: 1, msg: format!("bad header: {e}") })?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(LexiconError::Parse {
                line: 1,
                msg: format!("unsupported format {} v{}", header.format, header.version),
            });
        }

        let mut groups: Vec<(Key, Vec<Entry>)> = Vec::new();
        let mut blocks = Vec::new();
        let mut last_line = 1;
        for (i, line) in lines {
            last_line = i + 1;
            let perr = |msg: String| LexiconError::Parse { line: i + 1, msg };
            if line.trim_start().starts_with("{\"block\"") {
                let b: BlockRecord = serde_json::from_str(line).map_err(|e| perr(e.to_string()))?;
                blocks.push(b.block);
                continue;
            }
            if !blocks.is_empty() {
                return Err(perr("entry record after rejection records".into()));
            }
            let rec: EntryRecord = serde_json::from_str(line).map_err(|e| perr(e.to_string()))?;
            let (citation, lang, entry) = rec.into_entry().map_err(|e| perr(e.to_string()))?;
            let key = (citation, lang);
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push(entry),
                None => groups.push((key, vec![entry])),
            }
        }
        let n_entries: usize = groups.iter().map(|(_, v)| v.len()).sum();
        if n_entries != header.entries || blocks.len() != header.blocks {
            return Err(LexiconError::Parse {
                line: last_line,
                msg: format!(
                    "truncated or padded file: header announces {} entries and {} rejections, found {} and {}",
                    header.entries,
                    header.blocks,
                    n_entries,
                    blocks.len()
                ),
            });
        }

        let mut lex = Lexicon::new(ontology);
        // Provenance may point forward in file order, so validate entries
        // first and check acyclicity once everything is indexed.
        for ((citation, lang), entries) in groups {
            let s = Superentry::new(&citation, &lang, entries);
            for e in &s.entries {
                e.validate(&lex.ontology)?;
                if e.citation() != s.citation {
                    return Err(LexiconError::invariant(format!(
                        "{}: sense id does not share the citation `{}`",
                        e.sense_id, s.citation
                    )));
                }
                if lex.senses.insert(e.sense_id.clone(), (citation.clone(), lang.clone())).is_some() {
                    return Err(LexiconError::invariant(format!("duplicate sense id {}", e.sense_id)));
                }
            }
            lex.superentries.insert((s.citation.clone(), s.language.clone()), s);
        }
        let all: Vec<Entry> = lex.entries().map(|(_, e)| e.clone()).collect();
        lex.check_provenance(&all, None)?;
        lex.rejections = blocks.into_iter().collect();
        Ok(lex)
    }
}

impl fmt::Display for Lexicon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            entries: self.len(),
            blocks: self.rejections.len(),
        };
        let json = |v: &dyn erased::Json| v.json().map_err(|_| fmt::Error);
        writeln!(f, "{}", json(&header)?)?;
        for s in self.superentries.values() {
            for e in &s.entries {
                writeln!(f, "{}", json(&e.to_record(&s.language))?)?;
            }
        }
        for r in &self.rejections {
            writeln!(f, "{}", json(&BlockRecord { block: r.clone() })?)?;
        }
        Ok(())
    }
}

mod erased {
    pub trait Json {
        fn json(&self) -> serde_json::Result<String>;
    }
    impl<T: serde::Serialize> Json for T {
        fn json(&self) -> serde_json::Result<String> {
            serde_json::to_string(self)
        }
    }
}

fn first_free(citation: &str, cat: Pos, floor: u32, taken: impl Fn(&SenseId) -> bool) -> SenseId {
    (floor + 1..)
        .map(|n| SenseId::new(citation, cat, n))
        .find(|id| !taken(id))
        .expect("ordinal space is unbounded")
}

/// Allocates sense ids against a read-only lexicon snapshot.
#[derive(Debug)]
pub struct SenseAllocator<'a> {
    lexicon: &'a Lexicon,
    issued: HashMap<(String, Pos), u32>,
}

impl SenseAllocator<'_> {
    pub fn next(&mut self, citation: &str, cat: Pos) -> SenseId {
        let citation = nfc(citation);
        let floor = self.issued.get(&(citation.clone(), cat)).copied().unwrap_or(0);
        let id = first_free(&citation, cat, floor, |id| self.lexicon.senses.contains_key(id));
        self.issued.insert((citation, cat), id.ordinal());
        id
    }
}

/// Shared lexicon with snapshot reads and a single-writer commit point.
///
/// Readers get an `Arc` snapshot that never changes underneath them; a
/// commit clones the current state, applies the mutation, and publishes the
/// result only if the mutation succeeded.
#[derive(Debug)]
pub struct LexiconHandle {
    current: RwLock<Arc<Lexicon>>,
    writer: Mutex<()>,
}

impl LexiconHandle {
    pub fn new(lexicon: Lexicon) -> Self {
        LexiconHandle { current: RwLock::new(Arc::new(lexicon)), writer: Mutex::new(()) }
    }

    pub fn snapshot(&self) -> Arc<Lexicon> {
        self.current.read().clone()
    }

    pub fn commit<T, E>(&self, f: impl FnOnce(&mut Lexicon) -> Result<T, E>) -> Result<T, E> {
        let _w = self.writer.lock();
        let mut next = (**self.current.read()).clone();
        let out = f(&mut next)?;
        *self.current.write() = Arc::new(next);
        Ok(out)
    }
}
