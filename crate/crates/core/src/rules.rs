//! Lexical rules: triggering, entry transformation, chaining and blocking.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Admin, Entry, LexRul, Lexicon, Origin, Pos, SenseAllocator, SenseId, Superentry};
use crate::morphgen::DerivedForm;
use crate::ontology::Ontology;
use crate::text::nfc;
use crate::tfs::{subsumes, Fs, FsBuilder, TfsError, TypeHierarchy, TOP};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("rule `{rule}` is blocked for {source_sense}: {verdict}")]
    Blocked { rule: String, source_sense: String, verdict: BlockVerdict },
    #[error("rule `{rule}` is not triggered by {source_sense}")]
    NotTriggered { rule: String, source_sense: String },
    #[error("rule `{rule}`: {msg}")]
    SemTransform { rule: String, msg: String },
    #[error(transparent)]
    Types(#[from] TfsError),
}

/// One step of a semantic transformation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum SemOp {
    /// Keeps the head concept (transcategorial derivation).
    PreserveHead,
    /// Adds `role` filled by `concept`, or by the ontology's constraint for
    /// the head concept when `concept` is absent.
    AddRoleFiller {
        role: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        concept: Option<String>,
    },
    /// Sets `feature` on the head to the atom `value`, overwriting.
    AddFeature { feature: String, value: String },
    /// The filler of `role` becomes the new head; the old head hangs off it
    /// under `<role>-of` without the role.
    ReifyRole { role: String },
}

/// How the syntactic zone of the output is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SynTemplate {
    /// Keep the source zone unchanged.
    #[default]
    Copy,
    /// Keep only the root, typed with the output category and linked to the
    /// semantic head; argument coindexations are dropped.
    RootOnly,
}

/// File form of a lexical rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    pub trigger: String,
    pub out_cat: Pos,
    pub sem: Vec<SemOp>,
    #[serde(default)]
    pub syn: SynTemplate,
    /// Citation forms or sense ids the rule never applies to.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub block: Vec<String>,
    /// Suppress output when an underived homograph of the same category exists.
    #[serde(default)]
    pub preempt: bool,
    /// Suppletive outputs keyed by source citation. A rule with surfaces
    /// applies only to the listed citations.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub surfaces: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct LexicalRule {
    pub spec: RuleSpec,
    pub trigger: Fs,
}

impl LexicalRule {
    pub fn new(spec: RuleSpec, ontology: &Ontology) -> Result<Self, String> {
        let h = ontology.hierarchy();
        let trigger = Fs::parse(&spec.trigger).map_err(|e| format!("rule `{}` trigger: {e}", spec.id))?;
        h.check(&trigger).map_err(|e| format!("rule `{}` trigger: {e}", spec.id))?;
        for op in &spec.sem {
            let ty = match op {
                SemOp::AddRoleFiller { concept: Some(c), .. } => Some(c),
                SemOp::AddFeature { value, .. } => Some(value),
                _ => None,
            };
            if let Some(ty) = ty {
                if !h.contains(ty) {
                    return Err(format!("rule `{}` names unknown type `{ty}`", spec.id));
                }
            }
        }
        if spec.sem.first() == Some(&SemOp::PreserveHead)
            && spec.sem.iter().any(|op| matches!(op, SemOp::ReifyRole { .. }))
        {
            return Err(format!("rule `{}` both preserves and replaces the head", spec.id));
        }
        Ok(LexicalRule { spec, trigger })
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn out_cat(&self) -> Pos {
        self.spec.out_cat
    }

    pub fn preserves_head(&self) -> bool {
        self.spec.sem.first() == Some(&SemOp::PreserveHead)
    }

    pub fn is_suppletive(&self) -> bool {
        !self.spec.surfaces.is_empty()
    }

    pub fn matches(&self, e: &Entry, h: &TypeHierarchy) -> bool {
        subsumes(&self.trigger, &e.view(), h).unwrap_or(false)
    }

    fn lists(&self, source: &Entry) -> bool {
        self.spec
            .block
            .iter()
            .any(|b| nfc(b) == source.citation() || b == source.sense_id.as_str())
    }
}

/// Rules indexed by id and alias (case-insensitively).
#[derive(Debug, Clone, Default)]
pub struct RuleBank {
    rules: Vec<LexicalRule>,
    names: HashMap<String, usize>,
}

impl RuleBank {
    pub fn new(rules: Vec<LexicalRule>) -> Result<Self, String> {
        let mut names = HashMap::new();
        for (i, r) in rules.iter().enumerate() {
            for name in std::iter::once(&r.spec.id).chain(&r.spec.aliases) {
                if names.insert(name.to_lowercase(), i).is_some() {
                    return Err(format!("rule name `{name}` is declared twice"));
                }
            }
        }
        Ok(RuleBank { rules, names })
    }

    pub fn rules(&self) -> &[LexicalRule] {
        &self.rules
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Resolves a rule id or alias, ignoring case.
    pub fn resolve(&self, label: &str) -> Option<&LexicalRule> {
        self.names.get(&label.to_lowercase()).map(|&i| &self.rules[i])
    }

    fn resolve_all(&self, labels: &[String]) -> Result<Vec<&LexicalRule>, RuleError> {
        labels
            .iter()
            .map(|l| self.resolve(l).ok_or_else(|| RuleError::UnknownRule(l.clone())))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TriggerMode {
    /// Only rules listed in the entry's itemization apply.
    Itemized,
    /// Rules whose trigger subsumes the entry apply.
    Lhs,
    /// Either.
    #[default]
    Hybrid,
}

impl FromStr for TriggerMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "itemized" => Ok(TriggerMode::Itemized),
            "lhs" | "lhs-constraint" => Ok(TriggerMode::Lhs),
            "hybrid" => Ok(TriggerMode::Hybrid),
            _ => Err(format!("unknown trigger mode `{s}` (itemized, lhs, hybrid)")),
        }
    }
}

impl fmt::Display for TriggerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TriggerMode::Itemized => "itemized",
            TriggerMode::Lhs => "lhs",
            TriggerMode::Hybrid => "hybrid",
        })
    }
}

/// Rules applicable to `e`: itemized ones in listed order, then (in lhs and
/// hybrid modes) rules whose trigger subsumes the entry, in bank order.
pub fn trigger_rules<'b>(
    e: &Entry,
    bank: &'b RuleBank,
    mode: TriggerMode,
    h: &TypeHierarchy,
) -> Result<Vec<&'b LexicalRule>, RuleError> {
    let mut out: Vec<&LexicalRule> = Vec::new();
    if mode != TriggerMode::Lhs {
        for id in &e.items {
            out.push(bank.resolve(id).ok_or_else(|| RuleError::UnknownRule(id.clone()))?);
        }
    }
    if mode != TriggerMode::Itemized {
        for r in &bank.rules {
            if !out.iter().any(|o| o.id() == r.id()) && r.matches(e, h) {
                out.push(r);
            }
        }
    }
    Ok(out)
}

fn itemizes(e: &Entry, rule: &LexicalRule, bank: &RuleBank) -> bool {
    e.items.iter().any(|i| bank.resolve(i).is_some_and(|r| r.id() == rule.id()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockVerdict {
    No,
    /// The source citation or sense is on the rule's block list.
    Listed,
    /// An underived entry with the same surface and category exists.
    Preempted,
}

impl fmt::Display for BlockVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockVerdict::No => "not blocked",
            BlockVerdict::Listed => "listed",
            BlockVerdict::Preempted => "preempted",
        })
    }
}

pub fn is_blocked(rule: &LexicalRule, source: &Entry, surface: &str, lexicon: &Lexicon) -> BlockVerdict {
    if rule.lists(source) {
        return BlockVerdict::Listed;
    }
    if rule.spec.preempt
        && lexicon
            .lookup_form(surface)
            .iter()
            .any(|e| e.cat == rule.out_cat() && !e.is_derived())
    {
        return BlockVerdict::Preempted;
    }
    BlockVerdict::No
}

/// A generated entry awaiting validation and review.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateEntry {
    pub entry: Entry,
    pub language: String,
    pub surface: String,
    pub labels: Vec<String>,
    /// Morphological derivation (affix and compound rule ids); empty for
    /// suppletive outputs.
    pub derivation: Vec<String>,
    pub source: SenseId,
}

impl CandidateEntry {
    pub fn cat(&self) -> Pos {
        self.entry.cat
    }

    pub fn rule_chain(&self) -> Vec<String> {
        self.entry.rule_chain()
    }

    /// Identity of a candidate for de-duplication.
    pub fn key(&self) -> (String, Pos, SenseId, Vec<String>) {
        (self.surface.clone(), self.cat(), self.source.clone(), self.rule_chain())
    }
}

/// Rewrites the zones of an entry according to one rule.
fn transform(rule: &LexicalRule, zones: &Fs, ontology: &Ontology) -> Result<Fs, RuleError> {
    let fail = |msg: String| RuleError::SemTransform { rule: rule.id().to_string(), msg };
    let h = ontology.hierarchy();
    let mut b = FsBuilder::default();
    let root = b.import(zones, 0);
    let syn = b.get(root, "syn");
    let mut sem = b.get(root, "sem").ok_or_else(|| fail("source has no sem zone".into()))?;

    for op in &rule.spec.sem {
        match op {
            SemOp::PreserveHead => {}
            SemOp::AddFeature { feature, value } => {
                let v = b.node(value.clone());
                b.set(sem, feature.clone(), v);
            }
            SemOp::AddRoleFiller { role, concept } => {
                let filler = match concept {
                    Some(c) => c.clone(),
                    None => constraint(ontology, b.ty(sem), role).ok_or_else(|| {
                        fail(format!("no constraint for role `{role}` of `{}`", b.ty(sem)))
                    })?,
                };
                match b.get(sem, role) {
                    Some(n) => {
                        let ty = h.meet(b.ty(n), &filler).map_err(|e| fail(e.to_string()))?;
                        b.set_ty(n, ty);
                    }
                    None => {
                        let n = b.node(filler);
                        b.set(sem, role.clone(), n);
                    }
                }
            }
            SemOp::ReifyRole { role } => {
                let head = b.ty(sem).to_string();
                let head_node = match b.remove(sem, role) {
                    Some(n) if b.ty(n) != TOP => n,
                    existing => {
                        let ty = constraint(ontology, &head, role)
                            .ok_or_else(|| fail(format!("`{head}` has no `{role}` filler")))?;
                        match existing {
                            Some(n) => {
                                b.set_ty(n, ty);
                                n
                            }
                            None => b.node(ty),
                        }
                    }
                };
                b.set(head_node, format!("{role}-of"), sem);
                sem = head_node;
            }
        }
    }

    let out_cat = rule.out_cat().symbol();
    let new_syn = match rule.spec.syn {
        SynTemplate::Copy => match syn {
            Some(s) => {
                if let Some(r) = b.get(s, "root") {
                    if b.get(r, "cat").is_some() {
                        let c = b.node(out_cat);
                        b.set(r, "cat", c);
                    }
                }
                s
            }
            None => b.node(TOP),
        },
        SynTemplate::RootOnly => {
            let s = b.node(TOP);
            let r = match syn.and_then(|s| b.get(s, "root")) {
                Some(r) => r,
                None => {
                    let tag = b.max_tag().map_or(0, |t| t + 1);
                    b.tagged(TOP, tag)
                }
            };
            let c = b.node(out_cat);
            b.set(r, "cat", c);
            b.set(s, "root", r);
            b.set(s, "sem", sem);
            s
        }
    };
    let z = b.node(TOP);
    b.set(z, "syn", new_syn);
    b.set(z, "sem", sem);
    let fs = b.finish(z)?;
    h.check(&fs)?;
    if !ontology.is_concept(fs.root().get("sem").map_or(TOP, |n| n.ty())) {
        return Err(fail("result head is not a concept".into()));
    }
    Ok(fs)
}

fn constraint(ontology: &Ontology, head: &str, role: &str) -> Option<String> {
    ontology.role_constraint(head, role).ok().flatten().map(str::to_string)
}

/// The entry one rule makes of `current`, before sense id and provenance
/// are settled. Used for intermediate steps of a chain.
fn step(rule: &LexicalRule, current: &Entry, ontology: &Ontology) -> Result<Entry, RuleError> {
    let zones = transform(rule, &current.zones, ontology)?;
    Ok(Entry {
        sense_id: SenseId::new(current.citation(), rule.out_cat(), 1),
        cat: rule.out_cat(),
        dfn: current.dfn.clone(),
        ex: String::new(),
        admin: current.admin.clone(),
        zones,
        lex_rul: Vec::new(),
        items: Vec::new(),
        origin: Origin::Generated,
    })
}

/// Applies `rules` in order to `source`. Trigger and blocking checks are the
/// caller's business; see [`expand`].
pub fn apply_chain(
    rules: &[&LexicalRule],
    source: &Entry,
    sense_id: SenseId,
    at: &str,
    ontology: &Ontology,
) -> Result<Entry, RuleError> {
    let last = rules.last().ok_or_else(|| RuleError::UnknownRule(String::new()))?;
    let mut cur = source.clone();
    for r in rules {
        cur = step(r, &cur, ontology)?;
    }
    let mut lex_rul = source.lex_rul.clone();
    lex_rul.extend(rules.iter().map(|r| LexRul { source: source.sense_id.clone(), rule: r.id().to_string() }));
    Ok(Entry {
        cat: sense_id.cat(),
        sense_id,
        dfn: source.dfn.clone(),
        ex: String::new(),
        admin: Admin { by: last.id().to_string(), at: at.to_string() },
        zones: cur.zones,
        lex_rul,
        items: Vec::new(),
        origin: Origin::Generated,
    })
}

/// Applies a single rule, checking trigger (any mode) and blocking.
pub fn apply_rule(
    rule: &LexicalRule,
    source: &Entry,
    surface: &str,
    lexicon: &Lexicon,
    alloc: &mut SenseAllocator<'_>,
    at: &str,
) -> Result<Entry, RuleError> {
    let blocked = is_blocked(rule, source, surface, lexicon);
    if blocked != BlockVerdict::No {
        return Err(RuleError::Blocked {
            rule: rule.id().to_string(),
            source_sense: source.sense_id.to_string(),
            verdict: blocked,
        });
    }
    let h = lexicon.hierarchy();
    if !rule.matches(source, h) && !source.items.iter().any(|i| i.eq_ignore_ascii_case(rule.id())) {
        return Err(RuleError::NotTriggered {
            rule: rule.id().to_string(),
            source_sense: source.sense_id.to_string(),
        });
    }
    let id = alloc.next(surface, rule.out_cat());
    apply_chain(&[rule], source, id, at, lexicon.ontology())
}

/// Whether each rule of the chain fires on the entry produced so far.
fn chain_fires(rules: &[&LexicalRule], source: &Entry, bank: &RuleBank, mode: TriggerMode, ontology: &Ontology) -> bool {
    let h = ontology.hierarchy();
    let mut cur = source.clone();
    for r in rules {
        let listed = itemizes(source, r, bank);
        let fires = match mode {
            TriggerMode::Itemized => listed,
            TriggerMode::Lhs => r.matches(&cur, h),
            TriggerMode::Hybrid => listed || r.matches(&cur, h),
        };
        if !fires {
            return false;
        }
        match step(r, &cur, ontology) {
            Ok(next) => cur = next,
            Err(_) => return false,
        }
    }
    true
}

/// Turns derived forms of `s` into candidate entries, one per surviving
/// (form, source sense, label sequence).
pub fn expand(
    s: &Superentry,
    derived: &[DerivedForm],
    bank: &RuleBank,
    mode: TriggerMode,
    lexicon: &Lexicon,
    alloc: &mut SenseAllocator<'_>,
    at: &str,
) -> Result<Vec<CandidateEntry>, RuleError> {
    let ontology = lexicon.ontology();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for d in derived {
        let Some(source) = s.entries.iter().find(|e| e.sense_id == d.source_sense) else { continue };
        let rules = bank.resolve_all(&d.lr_labels)?;
        if rules.is_empty() || rules.iter().any(|r| r.is_suppletive()) {
            continue;
        }
        if !chain_fires(&rules, source, bank, mode, ontology) {
            continue;
        }
        let final_cat = rules.last().map(|r| r.out_cat()).unwrap_or(d.pos);
        if rules.iter().any(|r| is_blocked(r, source, &d.surface, lexicon) != BlockVerdict::No) {
            continue;
        }
        if lexicon.is_rejected(&source.sense_id, &d.lr_labels, &d.surface) {
            continue;
        }
        let chain: Vec<String> = rules.iter().map(|r| r.id().to_string()).collect();
        if !seen.insert((d.surface.clone(), final_cat, source.sense_id.clone(), chain)) {
            continue;
        }
        let id = alloc.next(&d.surface, final_cat);
        let entry = match apply_chain(&rules, source, id, at, ontology) {
            Ok(e) => e,
            Err(RuleError::SemTransform { .. }) => continue,
            Err(e) => return Err(e),
        };
        out.push(CandidateEntry {
            entry,
            language: s.language.clone(),
            surface: d.surface.clone(),
            labels: d.lr_labels.clone(),
            derivation: d.derivation.clone(),
            source: source.sense_id.clone(),
        });
    }
    Ok(out)
}

/// Candidates from suppletive rules (explicit surface per citation). A
/// suppletive rule fires for a sense that itemizes it or whose entry its
/// trigger subsumes, whatever the trigger mode.
pub fn expand_suppletive(
    s: &Superentry,
    bank: &RuleBank,
    lexicon: &Lexicon,
    alloc: &mut SenseAllocator<'_>,
    at: &str,
) -> Result<Vec<CandidateEntry>, RuleError> {
    let ontology = lexicon.ontology();
    let h = ontology.hierarchy();
    let mut out = Vec::new();
    for source in &s.entries {
        for rule in bank.rules().iter().filter(|r| r.is_suppletive()) {
            let Some(surface) = rule.spec.surfaces.get(&s.citation) else { continue };
            let surface = nfc(surface);
            if !itemizes(source, rule, bank) && !rule.matches(source, h) {
                continue;
            }
            if is_blocked(rule, source, &surface, lexicon) != BlockVerdict::No {
                continue;
            }
            let labels = vec![rule.id().to_string()];
            if lexicon.is_rejected(&source.sense_id, &labels, &surface) {
                continue;
            }
            let id = alloc.next(&surface, rule.out_cat());
            let entry = apply_chain(&[rule], source, id, at, ontology)?;
            out.push(CandidateEntry {
                entry,
                language: s.language.clone(),
                surface,
                labels,
                derivation: Vec::new(),
                source: source.sense_id.clone(),
            });
        }
    }
    Ok(out)
}

/// Rebuilds a candidate from its provenance: the trailing lex-rul pairs that
/// share the last source are re-applied to that source.
pub fn replay(candidate: &Entry, lexicon: &Lexicon, bank: &RuleBank) -> Result<Entry, RuleError> {
    let last = candidate.lex_rul.last().ok_or_else(|| RuleError::UnknownRule("<empty lex-rul>".into()))?;
    let source = lexicon
        .entry(&last.source)
        .ok_or_else(|| RuleError::UnknownRule(last.source.to_string()))?;
    let steps: Vec<&LexRul> = candidate.lex_rul[source.lex_rul.len()..].iter().collect();
    let rules: Vec<&LexicalRule> = steps
        .iter()
        .map(|l| bank.resolve(&l.rule).ok_or_else(|| RuleError::UnknownRule(l.rule.clone())))
        .collect::<Result<_, _>>()?;
    apply_chain(&rules, source, candidate.sense_id.clone(), &candidate.admin.at, lexicon.ontology())
}
