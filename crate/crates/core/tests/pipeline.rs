use std::sync::Arc;

use lexforge::lexicon::{LexiconHandle, Origin, Pos};
use lexforge::pipeline::{Pipeline, Settings};
use lexforge::review::{Decision, Edit, QueueFilter, ReviewError, ReviewStatus};
use lexforge::shipped;
use lexforge::validator::Status;

fn pipeline() -> Pipeline {
    Pipeline::new(
        Arc::new(LexiconHandle::new(shipped::seed_lexicon())),
        Arc::new(shipped::bank_es()),
        Arc::new(shipped::resources_es()),
        Settings { timestamp: Some("02/02 10:00:00".into()), ..Settings::default() },
    )
}

fn verbs(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn acquire_routes_candidates_to_the_queue() {
    let p = pipeline();
    let (report, g) = p.acquire(&verbs(&["comprar", "nosuchverb"])).unwrap();
    report.check().unwrap();
    assert_eq!(report.unresolved, ["nosuchverb"]);
    assert_eq!(report.verbs_processed, 1);
    assert_eq!(report.candidates_generated, 39);
    assert_eq!(g.per_sense, vec![("comprar-V1".parse().unwrap(), 39)]);
    let c = report.partition_counts;
    assert_eq!(c.accepted, 18);
    // The identity candidate duplicates the seed entry and is not queued.
    assert_eq!(report.pending_review, c.accepted + c.deferred - 1);
    assert_eq!(p.desk().pending(), report.pending_review);

    let again = p.acquire(&verbs(&["comprar"])).unwrap().0;
    assert_eq!(again.pending_review, 0, "re-running does not duplicate queue items");
}

#[test]
fn auto_admit_skips_review_for_accepted_forms() {
    let p = pipeline();
    let before = p.lexicon().snapshot().len();
    let (report, _) = p.acquire_with(&verbs(&["comprar"]), true).unwrap();
    report.check().unwrap();
    assert_eq!(report.admitted, 17);
    assert_eq!(report.pending_review, report.partition_counts.deferred);
    let snap = p.lexicon().snapshot();
    assert_eq!(snap.len(), before + 17);
    assert!(snap.lookup_form("compraventa").iter().all(|e| e.origin == Origin::AutoAdmitted));
}

#[test]
fn load_time_expansion_is_idempotent() {
    let p = pipeline();
    let first = p.load_time_expand().unwrap();
    assert!(first > 0);
    assert_eq!(p.load_time_expand().unwrap(), 0);
    let snap = p.lexicon().snapshot();
    for (_, e) in snap.entries().filter(|(_, e)| e.is_derived()) {
        assert_eq!(p.resources().verdict(e.citation()).status, Status::Accepted);
        e.validate(snap.ontology()).unwrap();
    }
}

#[test]
fn runtime_lookup_caches_per_revision() {
    let p = pipeline();
    assert_eq!(p.runtime_lookup("comprar").len(), 1);
    assert_eq!(p.derivations(), 0, "direct hits do not derive");

    let hits = p.runtime_lookup("supercompra");
    assert_eq!(hits.len(), 2);
    assert!(hits.iter().all(|e| e.origin == Origin::Ephemeral && e.cat == Pos::N));
    let n = p.derivations();
    assert!(n > 0);
    p.runtime_lookup("supercompra");
    assert_eq!(p.derivations(), n, "second lookup is served from the cache");
    assert!(p.lexicon().snapshot().lookup_form("supercompra").is_empty(), "lookup never writes");

    p.load_time_expand().unwrap();
    p.runtime_lookup("supercompra");
    assert!(p.derivations() > n, "a new revision invalidates the cache");

    assert!(p.runtime_lookup("zzzz").is_empty());
    assert_eq!(p.runtime_lookup("recompra").len(), 2);
    assert!(!p.runtime_lookup("incontrolable").is_empty());
}

#[test]
fn review_decisions_are_versioned() {
    let p = pipeline();
    p.acquire(&verbs(&["comprar"])).unwrap();
    let desk = p.desk();
    let filter = QueueFilter { validation: Some(Status::Accepted), ..QueueFilter::default() };
    let page = desk.list(&filter, None, 100).unwrap();
    assert_eq!(page.total, 17);
    let item = page.items.iter().find(|i| i.candidate.surface == "compra").unwrap().clone();
    assert_eq!(item.version, 1);

    let done = desk.decide(&item.candidate_id, Decision::Approve, 1).unwrap();
    assert_eq!((done.review_status, done.version), (ReviewStatus::Approved, 2));
    let stored = p.lexicon().snapshot().entry(&done.candidate.entry.sense_id).cloned().unwrap();
    assert_eq!(stored.origin, Origin::Reviewed);
    assert_eq!(stored.citation(), "compra");

    assert!(matches!(
        desk.decide(&item.candidate_id, Decision::Reject, 1),
        Err(ReviewError::VersionConflict { expected: 1, current: 2 })
    ));
    assert!(matches!(desk.decide(&item.candidate_id, Decision::Reject, 2), Err(ReviewError::NotPending(_))));
    assert!(matches!(desk.decide("c9999", Decision::Approve, 1), Err(ReviewError::UnknownCandidate(_))));
}

#[test]
fn rejection_suppresses_regeneration() {
    let p = pipeline();
    p.acquire(&verbs(&["comprar"])).unwrap();
    let desk = p.desk();
    let page = desk.list(&QueueFilter::default(), None, 100).unwrap();
    let item = page.items.iter().find(|i| i.candidate.surface == "supercompra").unwrap();
    desk.decide(&item.candidate_id, Decision::Reject, 1).unwrap();
    let (_, g) = p.acquire(&verbs(&["comprar"])).unwrap();
    assert!(!g.candidates.iter().any(|v| v.candidate.key() == item.candidate.key()));
    assert_eq!(g.candidates.len(), 38);
}

#[test]
fn modify_edits_and_validates() {
    let p = pipeline();
    p.acquire(&verbs(&["comprar"])).unwrap();
    let desk = p.desk();
    let id = desk.list(&QueueFilter::default(), None, 1).unwrap().items[0].candidate_id.clone();

    let bad = Edit { sem: Some("NOT-A-CONCEPT".into()), ..Edit::default() };
    assert!(matches!(desk.decide(&id, Decision::Modify(bad), 1), Err(ReviewError::InvalidEdit(_))));
    assert_eq!(desk.get(&id).unwrap().version, 1, "a failed edit changes nothing");

    let edit = Edit { dfn: Some("edited".into()), ex: Some("un ejemplo".into()), sem: None };
    let done = desk.decide(&id, Decision::Modify(edit), 1).unwrap();
    assert_eq!(done.review_status, ReviewStatus::Modified);
    let stored = p.lexicon().snapshot().entry(&done.candidate.entry.sense_id).cloned().unwrap();
    assert_eq!((stored.dfn.as_str(), stored.ex.as_str()), ("edited", "un ejemplo"));
}

#[test]
fn queue_pages_with_cursor() {
    let p = pipeline();
    p.acquire(&verbs(&["comprar", "beber"])).unwrap();
    let desk = p.desk();
    let all = desk.list(&QueueFilter::default(), None, 1000).unwrap();
    let mut seen = Vec::new();
    let mut cursor = None;
    loop {
        let page = desk.list(&QueueFilter::default(), cursor.as_deref(), 7).unwrap();
        assert_eq!(page.total, all.total);
        seen.extend(page.items.into_iter().map(|i| i.candidate_id));
        match page.next_cursor {
            Some(c) => cursor = Some(c),
            None => break,
        }
    }
    let ids: Vec<String> = all.items.into_iter().map(|i| i.candidate_id).collect();
    assert_eq!(seen, ids);
    assert!(matches!(desk.list(&QueueFilter::default(), Some("x"), 5), Err(ReviewError::BadCursor(_))));

    let adj = QueueFilter { pos: Some(Pos::Adj), rule: Some("LR3EVENT_TELIC1A".into()), ..QueueFilter::default() };
    let page = desk.list(&adj, None, 100).unwrap();
    assert!(page.total > 0);
    assert!(page.items.iter().all(|i| i.candidate.cat() == Pos::Adj));
}
