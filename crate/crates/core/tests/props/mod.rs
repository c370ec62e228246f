//! Property checks shared by the `properties` and `acceptance` targets.
//! Each check runs a deterministic proptest runner and reports the first
//! counterexample as an error string.

#![allow(clippy::needless_range_loop)]

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use lexforge::bank::Bank;
use lexforge::lexicon::{Lexicon, Pos};
use lexforge::ontology::{Atom, Concept, ConceptKind, Ontology};
use lexforge::pipeline::{generate, Settings};
use lexforge::rules::{replay, CandidateEntry};
use lexforge::shipped;
use lexforge::tfs::{subsumes, unify, Fs, FsBuilder, TypeHierarchy, TOP};
use lexforge::validator::{validate, Resources, Status};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};

pub const TYPES: [&str; 7] = [TOP, "A", "B", "AB", "C", "D", "E"];
const ATTRS: [&str; 3] = ["f", "g", "h"];

pub fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    let mut runner = TestRunner::new_with_rng(config, rng);
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// A small multiple-inheritance hierarchy: AB has no meet with C or D.
pub fn hierarchy() -> TypeHierarchy {
    let none: Vec<&str> = vec![];
    TypeHierarchy::new([
        ("A", none.clone()),
        ("B", none.clone()),
        ("AB", vec!["A", "B"]),
        ("C", vec!["A"]),
        ("D", vec!["C"]),
        ("E", none),
    ])
    .unwrap()
}

/// Acyclic structures of up to five nodes with sharing; TOP is over-weighted.
pub fn fs_strategy() -> impl Strategy<Value = Fs> {
    (
        1usize..=5,
        prop::collection::vec(0usize..10, 5),
        prop::collection::vec((0usize..5, 0usize..ATTRS.len(), 0usize..5), 0..8),
    )
        .prop_map(|(n, tys, edges)| {
            let mut b = FsBuilder::default();
            let ids: Vec<usize> = (0..n).map(|i| b.node(*TYPES.get(tys[i]).unwrap_or(&TOP))).collect();
            for (from, attr, to) in edges {
                let (from, to) = (from % n, to % n);
                if to > from && b.get(ids[from], ATTRS[attr]).is_none() {
                    b.set(ids[from], ATTRS[attr], ids[to]);
                }
            }
            b.finish(ids[0]).unwrap()
        })
}

/// Unification computed as the least congruence over both node sets by
/// fixpoint iteration on a relation matrix. `None` means failure.
pub fn oracle_unify(a: &Fs, b: &Fs, h: &TypeHierarchy) -> Option<Fs> {
    let na = a.node_count();
    let n = na + b.node_count();
    let node = |i: usize| if i < na { a.node(i) } else { b.node(i - na) };
    let succ = |i: usize, k: &str| node(i).get(k).map(|c| if i < na { c.id() } else { c.id() + na });

    let mut rel = vec![vec![false; n]; n];
    for (i, row) in rel.iter_mut().enumerate() {
        row[i] = true;
    }
    rel[0][na] = true;
    for i in 0..na {
        for j in na..n {
            if a.node(i).tag().is_some() && a.node(i).tag() == node(j).tag() {
                rel[i][j] = true;
            }
        }
    }
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if !rel[i][j] {
                    continue;
                }
                let mut add = vec![(j, i)];
                for k in 0..n {
                    if rel[j][k] {
                        add.push((i, k));
                    }
                }
                for (attr, _) in node(i).attrs() {
                    if let (Some(x), Some(y)) = (succ(i, attr), succ(j, attr)) {
                        add.push((x, y));
                    }
                }
                for (x, y) in add {
                    if !rel[x][y] {
                        rel[x][y] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    let class: Vec<usize> = (0..n).map(|i| (0..n).find(|&j| rel[i][j]).unwrap()).collect();
    let mut types: BTreeMap<usize, String> = BTreeMap::new();
    for i in 0..n {
        let t = types.entry(class[i]).or_insert_with(|| TOP.to_string());
        *t = h.meet(t, node(i).ty()).ok()?;
    }
    let mut fb = FsBuilder::default();
    let ids: BTreeMap<usize, usize> = types.iter().map(|(&c, t)| (c, fb.node(t.clone()))).collect();
    for i in 0..n {
        for (attr, _) in node(i).attrs() {
            let c = succ(i, attr).unwrap();
            fb.set(ids[&class[i]], attr, ids[&class[c]]);
        }
    }
    fb.finish(ids[&class[0]]).ok()
}

pub fn unify_idempotent(cases: u32) -> Result<(), String> {
    let h = hierarchy();
    run(cases, fs_strategy(), |a| {
        let u = unify(&a, &a, &h).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(u.equiv(&a), "{a} unified with itself gave {u}");
        let t = unify(&Fs::top(), &a, &h).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(t.equiv(&a));
        Ok(())
    })
}

pub fn unify_commutative(cases: u32) -> Result<(), String> {
    let h = hierarchy();
    run(cases, (fs_strategy(), fs_strategy()), |(a, b)| {
        match (unify(&a, &b, &h), unify(&b, &a, &h)) {
            (Ok(x), Ok(y)) => prop_assert!(x.equiv(&y), "{a} + {b}: {x} vs {y}"),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{a} + {b}: {x:?} vs {y:?}"),
        }
        Ok(())
    })
}

/// Absorption plus coherence: `a` subsumes `b` exactly when unifying them
/// gives `b` back, and a unifier is subsumed by both inputs.
pub fn subsumption_coherent(cases: u32) -> Result<(), String> {
    let h = hierarchy();
    run(cases, (fs_strategy(), fs_strategy()), |(a, b)| {
        let sub = subsumes(&a, &b, &h).unwrap();
        let u = unify(&a, &b, &h);
        if sub {
            let u = u.as_ref().map_err(|e| TestCaseError::fail(format!("{a} subsumes {b} but unify failed: {e}")))?;
            prop_assert!(u.equiv(&b), "{a} subsumes {b} but unify gave {u}");
        }
        if let Ok(u) = &u {
            prop_assert!(subsumes(&a, u, &h).unwrap(), "{a} does not subsume unifier {u}");
            prop_assert!(subsumes(&b, u, &h).unwrap(), "{b} does not subsume unifier {u}");
        }
        prop_assert!(subsumes(&a, &a, &h).unwrap());
        prop_assert!(subsumes(&Fs::top(), &a, &h).unwrap());
        Ok(())
    })
}

pub fn unify_matches_oracle(cases: u32) -> Result<(), String> {
    let h = hierarchy();
    run(cases, (fs_strategy(), fs_strategy()), |(a, b)| {
        match (unify(&a, &b, &h), oracle_unify(&a, &b, &h)) {
            (Ok(x), Some(y)) => prop_assert!(x.equiv(&y), "{a} + {b}: {x} vs oracle {y}"),
            (Err(_), None) => {}
            (x, y) => prop_assert!(false, "{a} + {b}: {x:?} vs oracle {y:?}"),
        }
        Ok(())
    })
}

/// `is_a` against a Floyd–Warshall closure over a random 30-concept DAG.
pub fn is_a_matches_closure(cases: u32) -> Result<(), String> {
    let parents = prop::collection::vec(prop::collection::vec(any::<prop::sample::Index>(), 0..3), 30);
    run(cases, parents, |picks| {
        let n = picks.len();
        let name = |i: usize| format!("C{i}");
        let mut edge = vec![vec![false; n]; n];
        let mut concepts = vec![
            Concept { name: "EVENT".into(), kind: ConceptKind::Event, parents: vec![], roles: BTreeMap::new() },
            Concept { name: "PROPERTY".into(), kind: ConceptKind::Property, parents: vec![], roles: BTreeMap::new() },
            Concept { name: "OBJECT".into(), kind: ConceptKind::Object, parents: vec![], roles: BTreeMap::new() },
        ];
        for (i, ps) in picks.iter().enumerate() {
            let mut names = BTreeSet::new();
            if i > 0 {
                for p in ps {
                    let j = p.index(i);
                    edge[i][j] = true;
                    names.insert(name(j));
                }
            }
            if names.is_empty() {
                names.insert("OBJECT".into());
            }
            concepts.push(Concept {
                name: name(i),
                kind: ConceptKind::Object,
                parents: names.into_iter().collect(),
                roles: BTreeMap::new(),
            });
        }
        let o = Ontology::new(concepts, Vec::<Atom>::new()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let mut reach = edge.clone();
        for (i, row) in reach.iter_mut().enumerate() {
            row[i] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if reach[i][k] && reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        for i in 0..n {
            prop_assert!(o.is_a(&name(i), "OBJECT").unwrap());
            prop_assert!(!o.is_a(&name(i), "EVENT").unwrap());
            for (j, &r) in reach[i].iter().enumerate() {
                prop_assert_eq!(o.is_a(&name(i), &name(j)).unwrap(), r, "C{} is-a C{}", i, j);
            }
        }
        Ok(())
    })
}

/// Candidates for the shipped sample verbs, computed once per process.
pub struct Fixture {
    pub lexicon: Lexicon,
    pub bank: Bank,
    pub candidates: Vec<CandidateEntry>,
}

pub fn fixture() -> Arc<Fixture> {
    static F: std::sync::OnceLock<Arc<Fixture>> = std::sync::OnceLock::new();
    F.get_or_init(|| {
        let lexicon = shipped::seed_lexicon();
        let bank = shipped::bank_es();
        let verbs: Vec<String> = shipped::sample_verbs().into_iter().map(String::from).collect();
        let settings = Settings { timestamp: Some("01/01 00:00:00".into()), ..Settings::default() };
        let g = generate(&verbs, &lexicon, &bank, &Resources::new(), &settings).unwrap();
        let candidates = g.candidates.into_iter().map(|v| v.candidate).collect();
        Arc::new(Fixture { lexicon, bank, candidates })
    })
    .clone()
}

fn rank(s: Status) -> u8 {
    match s {
        Status::Rejected => 0,
        Status::Deferred => 1,
        Status::Accepted => 2,
    }
}

/// Every candidate lands in exactly one class, classes keep input order, and
/// growing the resources never lowers a verdict.
pub fn validator_partition(cases: u32) -> Result<(), String> {
    let f = fixture();
    let surfaces: Vec<String> = f.candidates.iter().map(|c| c.surface.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let words = prop::collection::vec(prop::sample::select(surfaces.clone()), 0..12);
    run(cases, (words.clone(), words.clone(), words), |(dict, corpus, extra)| {
        let mut small = Resources::new();
        small.add_dictionary("d", &dict.join("\n")).unwrap();
        small.add_corpus_text(&corpus.join(" "));
        let mut big = small.clone();
        big.add_dictionary("more", &extra.join("\n")).unwrap();
        big.add_corpus_text(&extra.join(" "));

        let p = validate(f.candidates.clone(), &small);
        prop_assert_eq!(p.len(), f.candidates.len());
        let mut seen = BTreeMap::new();
        for (class, items) in [(Status::Accepted, &p.accepted), (Status::Deferred, &p.deferred), (Status::Rejected, &p.rejected)] {
            let mut last = None;
            for (c, v) in items.iter() {
                prop_assert_eq!(v.status, class);
                let pos = f.candidates.iter().position(|x| x.key() == c.key()).unwrap();
                prop_assert!(last.is_none_or(|l| l < pos), "order not preserved");
                last = Some(pos);
                prop_assert!(seen.insert(c.key(), class).is_none(), "candidate in two classes");
            }
        }
        for s in &surfaces {
            prop_assert!(rank(big.verdict(s).status) >= rank(small.verdict(s).status), "{} lost status", s);
        }
        Ok(())
    })
}

/// Every candidate is rebuilt exactly from its lex-rul chain and its
/// morphological derivation.
pub fn provenance_replays() -> Result<(), String> {
    let f = fixture();
    for c in &f.candidates {
        let again = replay(&c.entry, &f.lexicon, &f.bank.rules).map_err(|e| format!("{}: {e}", c.surface))?;
        if !again.zones.equiv(&c.entry.zones) || again.cat != c.entry.cat || again.lex_rul != c.entry.lex_rul {
            return Err(format!("{} ({}) does not replay", c.surface, c.entry.sense_id));
        }
        if !c.derivation.is_empty() {
            let form = f.bank.morph.replay(c.source.citation(), &c.derivation).map_err(|e| e.to_string())?;
            if form != c.surface {
                return Err(format!("{:?} replays to {form}, not {}", c.derivation, c.surface));
            }
        }
    }
    Ok(())
}

fn english_candidates(bank_json: &serde_json::Value, lexicon: &Lexicon) -> BTreeSet<(String, Pos, String)> {
    let bank = Bank::parse(&bank_json.to_string(), lexicon.ontology()).unwrap();
    let verbs: Vec<String> = lexicon
        .superentries()
        .filter(|s| s.language == "en")
        .map(|s| s.citation.clone())
        .collect();
    let settings = Settings { timestamp: Some("01/01 00:00:00".into()), ..Settings::default() };
    let g = generate(&verbs, lexicon, &bank, &Resources::new(), &settings).unwrap();
    g.candidates
        .into_iter()
        .map(|v| (v.candidate.surface, v.candidate.entry.cat, v.candidate.source.to_string()))
        .collect()
}

/// Adding block-list items or preempting homographs never adds candidates.
pub fn blocking_monotone(cases: u32) -> Result<(), String> {
    let base: serde_json::Value = serde_json::from_str(shipped::BANK_EN).unwrap();
    let lexicon = shipped::seed_lexicon();
    let before = english_candidates(&base, &lexicon);
    let citations: Vec<String> =
        lexicon.superentries().filter(|s| s.language == "en").map(|s| s.citation.clone()).collect();
    let picks = prop::collection::vec((prop::sample::select(citations), 0usize..8), 1..4);
    run(cases, picks, |picks| {
        let mut bank = base.clone();
        let rules = bank["rules"].as_array_mut().unwrap();
        for (citation, r) in &picks {
            let n = rules.len();
            let rule = rules[r % n].as_object_mut().unwrap();
            let block = rule.entry("block").or_insert_with(|| serde_json::json!([]));
            block.as_array_mut().unwrap().push(citation.clone().into());
        }
        let after = english_candidates(&bank, &lexicon);
        prop_assert!(after.is_subset(&before), "blocking added {:?}", after.difference(&before).collect::<Vec<_>>());
        Ok(())
    })
}

/// A store holding seeds plus a random subset of generated entries
/// serializes to a fixpoint, and any truncation of the file is rejected.
pub fn store_round_trip(cases: u32) -> Result<(), String> {
    let f = fixture();
    let n = f.candidates.len();
    run(cases, (prop::collection::vec(0..n, 0..20), any::<prop::sample::Index>()), |(picks, cut)| {
        let mut lex = f.lexicon.clone();
        for i in picks {
            let c = &f.candidates[i];
            if lex.entry(&c.entry.sense_id).is_none() {
                lex.insert_entry(&c.language, c.entry.clone()).map_err(|e| TestCaseError::fail(e.to_string()))?;
            }
        }
        let text = lex.to_string();
        let back = Lexicon::parse(&text, lex.ontology().clone()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back.to_string(), text.clone());
        prop_assert_eq!(back.len(), lex.len());

        let mut at = cut.index(text.len());
        while !text.is_char_boundary(at) {
            at -= 1;
        }
        let head = &text[..at];
        if head.trim_end() != text.trim_end() {
            prop_assert!(Lexicon::parse(head, lex.ontology().clone()).is_err(), "truncation at {} accepted", at);
        }
        Ok(())
    })
}
