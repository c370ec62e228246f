//! Constructive derivational morphology.
//!
//! A [`MorphBank`] holds stem-alternation classes, affix rules and itemized
//! compounds. [`derive_forms`] walks the affix rules depth-first from each
//! base-category sense of a superentry and returns every derivable surface
//! form together with its part of speech and semantic rule labels.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Pos, SenseId, Superentry};
use crate::text::{has_acute, is_vowel, nfc, strip_acute};

/// Slot name that selects the current form itself rather than an alternant.
pub const FORM_SLOT: &str = "form";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MorphError {
    #[error("no alternation class matches `{0}`")]
    NoMatchingClass(String),
    #[error("superentry `{0}` has no sense of a derivable category")]
    NoVerbSense(String),
    #[error("unknown affix rule `{0}`")]
    UnknownRule(String),
    #[error("rule `{rule}` cannot evaluate its conditions on `{base}`")]
    ConditionUnevaluable { rule: String, base: String },
    #[error("rule `{rule}` does not apply to `{base}`")]
    Inapplicable { rule: String, base: String },
}

/// A stem-alternation class: citations ending in `pattern` lose it and each
/// slot appends its string to what remains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StemAlternation {
    #[serde(rename = "class")]
    pub class_id: String,
    pub pattern: String,
    pub slots: BTreeMap<String, String>,
}

impl StemAlternation {
    pub fn matches(&self, citation: &str) -> bool {
        citation.ends_with(&self.pattern) && citation.len() > self.pattern.len()
    }

    /// The citation with the class pattern removed.
    pub fn root<'a>(&self, citation: &'a str) -> &'a str {
        &citation[..citation.len() - self.pattern.len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AffixKind {
    Prefix,
    Suffix,
    /// Prefix and suffix attached together (`affix` before, `suffix` after).
    Parasynthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Attachment {
    #[default]
    Concatenation,
    /// The longest overlap between the end of the base and the start of the
    /// affix is written once (`comunica` + `ación` = `comunicación`).
    Unification,
    /// Concatenation followed by the rule's orthographic repairs.
    OutputRewrite,
}

/// Orthographic repairs applied at the seam of a suffix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Repair {
    /// Drop a base-final vowel before a vowel-initial affix.
    VowelElision,
    /// `c` becomes `qu` before `e`/`i`.
    CQu,
    /// `g` becomes `gu` before `e`/`i`.
    GGu,
    /// Remove acute accents from the base when the affix carries one.
    Accent,
    /// Double a final consonant after a single short vowel (big, bigger).
    ConsonantDoubling,
}

/// Conjunction of shape conditions. An empty condition always holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Condition {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ends_with: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub starts_with: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub class: Vec<String>,
}

impl Condition {
    pub fn is_default(&self) -> bool {
        self.ends_with.is_empty() && self.starts_with.is_empty() && self.class.is_empty()
    }

    pub fn holds(&self, stem: &str, class: Option<&str>) -> bool {
        (self.ends_with.is_empty() || self.ends_with.iter().any(|s| stem.ends_with(s.as_str())))
            && (self.starts_with.is_empty() || self.starts_with.iter().any(|s| stem.starts_with(s.as_str())))
            && (self.class.is_empty() || class.is_some_and(|c| self.class.iter().any(|k| k == c)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allomorph {
    #[serde(flatten)]
    pub when: Condition,
    pub form: String,
}

/// How a rule's labels combine with those of the form it attaches to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Compose {
    /// The result carries only this rule's labels.
    #[default]
    Replace,
    /// The result carries the base's labels followed by this rule's.
    Append,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffixRule {
    pub id: String,
    pub kind: AffixKind,
    /// Default surface of the affix (the prefix part for parasynthetics).
    #[serde(default)]
    pub affix: String,
    /// Suffix part of a parasynthetic rule.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub suffix: String,
    #[serde(default)]
    pub attachment: Attachment,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub repairs: Vec<Repair>,
    /// Stem slots in order of preference; the first one the base's
    /// alternation class defines is used. [`FORM_SLOT`] is always defined.
    #[serde(default = "form_slot")]
    pub slots: Vec<String>,
    pub base: Pos,
    pub out_pos: Pos,
    /// Ordered allomorph choices; the first whose condition holds wins and
    /// the last one must be unconditional.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub allomorphs: Vec<Allomorph>,
    /// Applicability condition evaluated on the selected stem.
    #[serde(default)]
    pub when: Condition,
    pub lr_labels: Vec<String>,
    #[serde(default)]
    pub compose: Compose,
    #[serde(default)]
    pub chainable: bool,
    /// Rules this one may feed. Empty means any rule whose base category
    /// matches this rule's output.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feeds: Vec<String>,
    /// Produces the base form itself (an identity derivation).
    #[serde(default)]
    pub identity: bool,
}

fn form_slot() -> Vec<String> {
    vec![FORM_SLOT.to_string()]
}

impl AffixRule {
    /// The allomorph selected for `stem`.
    pub fn allomorph(&self, stem: &str, class: Option<&str>) -> &str {
        self.allomorphs
            .iter()
            .find(|a| a.when.holds(stem, class))
            .map(|a| a.form.as_str())
            .unwrap_or(&self.affix)
    }

    pub fn feeds_rule(&self, next: &AffixRule) -> bool {
        if !self.chainable {
            return false;
        }
        if self.feeds.is_empty() {
            next.base == self.out_pos
        } else {
            self.feeds.contains(&next.id)
        }
    }
}

/// An itemized compound attached to one citation form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compound {
    pub id: String,
    pub citation: String,
    pub surface: String,
    pub pos: Pos,
    pub lr_labels: Vec<String>,
}

/// The generator's rule inventory.
#[derive(Debug, Clone, Default)]
pub struct MorphBank {
    pub base_categories: Vec<Pos>,
    pub alternations: Vec<StemAlternation>,
    pub affixes: Vec<AffixRule>,
    pub compounds: Vec<Compound>,
}

/// One derived surface form with its labels and provenance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DerivedForm {
    pub surface: String,
    pub pos: Pos,
    pub lr_labels: Vec<String>,
    /// Affix or compound rule ids in application order.
    pub derivation: Vec<String>,
    pub source_sense: SenseId,
}

impl DerivedForm {
    /// `form<TAB>pos<TAB>labels` with labels separated by single spaces.
    pub fn tsv(&self) -> String {
        format!("{}\t{}\t{}", self.surface, self.pos.short(), self.lr_labels.join(" "))
    }
}

impl MorphBank {
    pub fn affix(&self, id: &str) -> Option<&AffixRule> {
        self.affixes.iter().find(|r| r.id == id)
    }

    /// The most specific (longest-pattern) class matching `citation`.
    pub fn class_of(&self, citation: &str) -> Option<&StemAlternation> {
        self.alternations
            .iter()
            .filter(|c| c.matches(citation) || c.pattern.is_empty())
            .max_by_key(|c| c.pattern.len())
    }

    /// Every stem slot defined by the class of `citation`.
    pub fn alternants(&self, citation: &str) -> Result<BTreeMap<String, String>, MorphError> {
        let class = self.class_of(citation).ok_or_else(|| MorphError::NoMatchingClass(citation.to_string()))?;
        Ok(stems(class, citation))
    }

    /// Attaches `rule` to `base` using the given stem slots. `class` is the
    /// alternation class consulted for slots and conditions.
    pub fn attach(&self, rule: &AffixRule, base: &str, class: Option<&StemAlternation>) -> Result<String, MorphError> {
        let base = nfc(base);
        let slots = class.map(|c| stems(c, &base)).unwrap_or_default();
        let stem = rule
            .slots
            .iter()
            .find_map(|s| if s == FORM_SLOT { Some(base.clone()) } else { slots.get(s).cloned() })
            .ok_or_else(|| MorphError::Inapplicable { rule: rule.id.clone(), base: base.clone() })?;
        let class_id = class.map(|c| c.class_id.as_str());
        if !rule.when.holds(&stem, class_id) {
            return Err(MorphError::Inapplicable { rule: rule.id.clone(), base });
        }
        if rule.identity {
            return Ok(base);
        }
        let affix = rule.allomorph(&stem, class_id).to_string();
        let out = match rule.kind {
            AffixKind::Prefix => format!("{affix}{stem}"),
            AffixKind::Suffix => join_suffix(&stem, &affix, rule.attachment, &rule.repairs),
            AffixKind::Parasynthetic => {
                format!("{affix}{}", join_suffix(&stem, &rule.suffix, rule.attachment, &rule.repairs))
            }
        };
        if out.is_empty() {
            return Err(MorphError::ConditionUnevaluable { rule: rule.id.clone(), base });
        }
        Ok(nfc(&out))
    }

    /// Attaches by rule id, selecting the class of `base` (or `fallback`
    /// when `base` matches none).
    pub fn attach_id(&self, rule_id: &str, base: &str, fallback: Option<&str>) -> Result<String, MorphError> {
        let rule = self.affix(rule_id).ok_or_else(|| MorphError::UnknownRule(rule_id.to_string()))?;
        let class = self.class_for(base, fallback);
        self.attach(rule, base, class)
    }

    fn class_for(&self, form: &str, fallback: Option<&str>) -> Option<&StemAlternation> {
        let own = self.class_of(form).filter(|c| !c.pattern.is_empty());
        own.or_else(|| fallback.and_then(|f| self.alternations.iter().find(|c| c.class_id == f)))
            .or_else(|| self.class_of(form))
    }

    /// Re-applies a derivation to a citation form.
    pub fn replay(&self, citation: &str, derivation: &[String]) -> Result<String, MorphError> {
        let root_class = self.class_of(citation).map(|c| c.class_id.clone());
        let mut form = nfc(citation);
        for id in derivation {
            if let Some(c) = self.compounds.iter().find(|c| c.id == *id) {
                form = c.surface.clone();
                continue;
            }
            form = self.attach_id(id, &form, root_class.as_deref())?;
        }
        Ok(form)
    }

    /// Roots of `citation` under every class it matches, used to index base
    /// forms for reverse lookup.
    pub fn roots(&self, citation: &str) -> Vec<String> {
        let mut out: Vec<String> = self
            .alternations
            .iter()
            .filter(|c| c.matches(citation))
            .map(|c| c.root(citation).to_string())
            .collect();
        if out.is_empty() {
            out.push(citation.to_string());
        }
        out.sort();
        out.dedup();
        out
    }
}

fn stems(class: &StemAlternation, citation: &str) -> BTreeMap<String, String> {
    let root = if citation.ends_with(&class.pattern) { class.root(citation) } else { citation };
    class.slots.iter().map(|(k, v)| (k.clone(), format!("{root}{v}"))).collect()
}

fn join_suffix(stem: &str, affix: &str, attachment: Attachment, repairs: &[Repair]) -> String {
    match attachment {
        Attachment::Concatenation => format!("{stem}{affix}"),
        Attachment::Unification => {
            let overlap = (1..=affix.len().min(stem.len()))
                .rev()
                .filter(|&k| affix.is_char_boundary(k) && stem.is_char_boundary(stem.len() - k))
                .find(|&k| stem.ends_with(&affix[..k]))
                .unwrap_or(0);
            format!("{stem}{}", &affix[overlap..])
        }
        Attachment::OutputRewrite => {
            let (stem, affix) = repair(stem, affix, repairs);
            format!("{stem}{affix}")
        }
    }
}

fn repair(stem: &str, affix: &str, repairs: &[Repair]) -> (String, String) {
    let mut stem = stem.to_string();
    let first = affix.chars().next();
    let front = matches!(first, Some('e' | 'i' | 'é' | 'í'));
    for r in repairs {
        match r {
            Repair::VowelElision => {
                if first.is_some_and(is_vowel) && stem.chars().last().is_some_and(is_vowel) && stem.chars().count() > 1 {
                    stem.pop();
                }
            }
            Repair::CQu => {
                if front && stem.ends_with('c') {
                    stem.pop();
                    stem.push_str("qu");
                }
            }
            Repair::GGu => {
                if front && stem.ends_with('g') {
                    stem.pop();
                    stem.push_str("gu");
                }
            }
            Repair::Accent => {
                if has_acute(affix) {
                    stem = strip_acute(&stem);
                }
            }
            Repair::ConsonantDoubling => {
                let cs: Vec<char> = stem.chars().collect();
                let n = cs.len();
                if n >= 3
                    && first.is_some_and(is_vowel)
                    && !is_vowel(cs[n - 1])
                    && !matches!(cs[n - 1], 'w' | 'x' | 'y')
                    && is_vowel(cs[n - 2])
                    && !is_vowel(cs[n - 3])
                {
                    stem.push(cs[n - 1]);
                }
            }
        }
    }
    (stem, affix.to_string())
}

/// All derivations of the base-category senses of `s`, depth-first in bank
/// order, followed by the itemized compounds of the citation form.
pub fn derive_forms(s: &Superentry, bank: &MorphBank, depth_limit: usize) -> Result<Vec<DerivedForm>, MorphError> {
    let senses: Vec<_> = s.entries.iter().filter(|e| bank.base_categories.contains(&e.cat)).collect();
    if senses.is_empty() {
        return Err(MorphError::NoVerbSense(s.citation.clone()));
    }
    let root_class = bank
        .class_of(&s.citation)
        .ok_or_else(|| MorphError::NoMatchingClass(s.citation.clone()))?
        .class_id
        .clone();

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for sense in senses {
        let mut walk = Walk {
            bank,
            root_class: &root_class,
            depth_limit: depth_limit.max(1),
            source: &sense.sense_id,
            out: &mut out,
            seen: &mut seen,
        };
        walk.visit(&s.citation, sense.cat, None, &[], &[], 0);
        for c in bank.compounds.iter().filter(|c| c.citation == s.citation) {
            walk.emit(DerivedForm {
                surface: nfc(&c.surface),
                pos: c.pos,
                lr_labels: c.lr_labels.clone(),
                derivation: vec![c.id.clone()],
                source_sense: sense.sense_id.clone(),
            });
        }
    }
    Ok(out)
}

struct Walk<'a> {
    bank: &'a MorphBank,
    root_class: &'a str,
    depth_limit: usize,
    source: &'a SenseId,
    out: &'a mut Vec<DerivedForm>,
    seen: &'a mut HashSet<(String, Pos, Vec<String>, SenseId)>,
}

impl Walk<'_> {
    fn emit(&mut self, f: DerivedForm) {
        let key = (f.surface.clone(), f.pos, f.lr_labels.clone(), f.source_sense.clone());
        if self.seen.insert(key) {
            self.out.push(f);
        }
    }

    fn visit(
        &mut self,
        form: &str,
        pos: Pos,
        parent: Option<&AffixRule>,
        labels: &[String],
        derivation: &[String],
        depth: usize,
    ) {
        if depth >= self.depth_limit {
            return;
        }
        let class = self.bank.class_for(form, Some(self.root_class));
        for rule in &self.bank.affixes {
            let eligible = match parent {
                None => rule.base == pos,
                Some(p) => !rule.identity && rule.base == pos && p.feeds_rule(rule),
            };
            if !eligible {
                continue;
            }
            let Ok(surface) = self.bank.attach(rule, form, class) else { continue };
            let lr_labels = match rule.compose {
                Compose::Replace => rule.lr_labels.clone(),
                Compose::Append => labels.iter().chain(&rule.lr_labels).cloned().collect(),
            };
            let mut chain = derivation.to_vec();
            chain.push(rule.id.clone());
            self.emit(DerivedForm {
                surface: surface.clone(),
                pos: rule.out_pos,
                lr_labels: lr_labels.clone(),
                derivation: chain.clone(),
                source_sense: self.source.clone(),
            });
            if rule.chainable && !rule.identity {
                self.visit(&surface, rule.out_pos, Some(rule), &lr_labels, &chain, depth + 1);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shipped;

    fn es() -> MorphBank {
        shipped::bank_es().morph
    }

    #[test]
    fn beber_alternants() {
        let a = es().alternants("beber").unwrap();
        assert_eq!(a["theme-e"], "bebe");
        assert_eq!(a["theme-i"], "bebi");
        assert_eq!(a["bare"], "beb");
    }

    #[test]
    fn volver_participle_is_irregular() {
        let a = es().alternants("volver").unwrap();
        assert_eq!(a["participle"], "vuelto");
        assert_eq!(a["bare"], "volv");
    }

    #[test]
    fn comprar_alternants() {
        let a = es().alternants("comprar").unwrap();
        assert_eq!(a["theme-a"], "compra");
        assert_eq!(a["bare"], "compr");
        assert_eq!(a["participle"], "comprado");
    }

    #[test]
    fn no_matching_class() {
        assert_eq!(es().alternants("xyz"), Err(MorphError::NoMatchingClass("xyz".into())));
    }

    #[test]
    fn attach_desk_cases() {
        let b = es();
        assert_eq!(b.attach_id("able", "comprar", None).unwrap(), "comprable");
        assert_eq!(b.attach_id("in_neg", "controlable", Some("AR")).unwrap(), "incontrolable");
        assert_eq!(b.attach_id("in_neg", "tratable", Some("AR")).unwrap(), "intratable");
        assert_eq!(b.attach_id("tele", "comunicación", Some("AR")).unwrap(), "telecomunicación");
        assert!(b.attach_id("in_neg", "comprable", Some("AR")).is_err());
    }

    #[test]
    fn attachment_modes() {
        let rule = |attachment, repairs: Vec<Repair>, affix: &str| AffixRule {
            id: "t".into(),
            kind: AffixKind::Suffix,
            affix: affix.into(),
            suffix: String::new(),
            attachment,
            repairs,
            slots: form_slot(),
            base: Pos::V,
            out_pos: Pos::N,
            allomorphs: vec![],
            when: Condition::default(),
            lr_labels: vec!["x".into()],
            compose: Compose::Replace,
            chainable: false,
            feeds: vec![],
            identity: false,
        };
        let b = MorphBank::default();
        let r = rule(Attachment::Unification, vec![], "ación");
        assert_eq!(b.attach(&r, "comunica", None).unwrap(), "comunicación");
        let r = rule(Attachment::OutputRewrite, vec![Repair::CQu], "e");
        assert_eq!(b.attach(&r, "sac", None).unwrap(), "saque");
        let r = rule(Attachment::OutputRewrite, vec![Repair::GGu], "é");
        assert_eq!(b.attach(&r, "lleg", None).unwrap(), "llegué");
        let r = rule(Attachment::OutputRewrite, vec![Repair::Accent], "ísimo");
        assert_eq!(b.attach(&r, "fácil", None).unwrap(), "facilísimo");
        let r = rule(Attachment::OutputRewrite, vec![Repair::ConsonantDoubling], "er");
        assert_eq!(b.attach(&r, "big", None).unwrap(), "bigger");
        assert_eq!(b.attach(&r, "great", None).unwrap(), "greater");
        let r = rule(Attachment::OutputRewrite, vec![Repair::VowelElision], "ive");
        assert_eq!(b.attach(&r, "abuse", None).unwrap(), "abusive");
        let mut p = rule(Attachment::Concatenation, vec![], "a");
        p.kind = AffixKind::Parasynthetic;
        p.suffix = "ar".into();
        assert_eq!(b.attach(&p, "noche", None).unwrap(), "anochear");
    }

    #[test]
    fn comprar_golden() {
        let lex = shipped::seed_lexicon();
        let s = lex.get_superentry("comprar", "es").unwrap();
        let rows: Vec<String> = derive_forms(s, &es(), 2).unwrap().iter().map(|f| f.tsv()).collect();
        let golden: Vec<&str> = shipped::GOLDEN_COMPRAR.lines().collect();
        assert_eq!(rows, golden);
    }

    #[test]
    fn derivations_replay() {
        let lex = shipped::seed_lexicon();
        let b = es();
        for c in ["comprar", "beber", "volver", "comunicar", "controlar"] {
            let s = lex.get_superentry(c, "es").unwrap();
            for f in derive_forms(s, &b, 2).unwrap() {
                assert_eq!(b.replay(c, &f.derivation).unwrap(), f.surface, "{c} {:?}", f.derivation);
                assert!(f.derivation.len() <= 2);
                if f.surface == c {
                    assert!(b.affix(&f.derivation[0]).unwrap().identity);
                }
            }
        }
    }

    #[test]
    fn deterministic_and_limited() {
        let lex = shipped::seed_lexicon();
        let s = lex.get_superentry("comprar", "es").unwrap();
        let a = derive_forms(s, &es(), 2).unwrap();
        assert_eq!(a, derive_forms(s, &es(), 2).unwrap());
        let shallow = derive_forms(s, &es(), 1).unwrap();
        assert!(shallow.iter().all(|f| f.derivation.len() == 1));
        assert!(shallow.len() < a.len());
    }

    #[test]
    fn no_verb_sense() {
        let s = Superentry::new("nada", "es", vec![]);
        assert_eq!(derive_forms(&s, &es(), 2), Err(MorphError::NoVerbSense("nada".into())));
    }
}
