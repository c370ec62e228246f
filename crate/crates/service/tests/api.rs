use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lexforge::lexicon::LexiconHandle;
use lexforge::pipeline::{Pipeline, Settings};
use lexforge::shipped;
use lexforge_service::router;
use lexforge_service::wire::{EntryView, ErrorBody, ItemView, PreviewResponse, QueuePage};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tower::ServiceExt;

fn pipeline() -> Arc<Pipeline> {
    Arc::new(Pipeline::new(
        Arc::new(LexiconHandle::new(shipped::seed_lexicon())),
        Arc::new(shipped::bank_es()),
        Arc::new(shipped::resources_es()),
        Settings { timestamp: Some("02/02 10:00:00".into()), ..Settings::default() },
    ))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get_json<T: DeserializeOwned>(app: &Router, uri: &str) -> (StatusCode, T) {
    let (s, b) = call(app, Method::GET, uri, None).await;
    (s, serde_json::from_slice(&b).unwrap_or_else(|e| panic!("{uri}: {e}: {}", String::from_utf8_lossy(&b))))
}

async fn post_json<T: DeserializeOwned>(app: &Router, uri: &str, body: Value) -> (StatusCode, T) {
    let (s, b) = call(app, Method::POST, uri, Some(body)).await;
    (s, serde_json::from_slice(&b).unwrap_or_else(|e| panic!("{uri}: {e}: {}", String::from_utf8_lossy(&b))))
}

async fn acquired() -> (Arc<Pipeline>, Router) {
    let p = pipeline();
    let app = router(p.clone(), None);
    let (s, report): (_, Value) = post_json(&app, "/acquire", json!({"verbs": ["comprar"]})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(report["candidates_generated"], 39);
    (p, app)
}

#[tokio::test]
async fn empty_queue() {
    let app = router(pipeline(), None);
    let (s, page): (_, QueuePage) = get_json(&app, "/queue").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((page.items.len(), page.total, page.next_cursor), (0, 0, None));
}

#[tokio::test]
async fn acquire_reports_counts_and_fills_queue() {
    let (p, app) = acquired().await;
    let (_, page): (_, QueuePage) = get_json(&app, "/queue?limit=500").await;
    assert_eq!(page.total, p.desk().pending());
    assert!(page.items.iter().all(|i| i.source.sense_id == "comprar-V1"));

    let (_, empty): (_, Value) = post_json(&app, "/acquire", json!({"verbs": []})).await;
    assert_eq!(empty["candidates_generated"], 0);
    assert_eq!(empty["per_sense_mean"], 0.0);
}

#[tokio::test]
async fn queue_filters_and_pages() {
    let (_, app) = acquired().await;
    let (_, accepted): (_, QueuePage) = get_json(&app, "/queue?validation=accepted&limit=500").await;
    assert_eq!(accepted.total, 17);
    assert!(accepted.items.iter().all(|i| i.fast_track));

    let (_, adj): (_, QueuePage) = get_json(&app, "/queue?pos=ADJ&limit=500").await;
    assert!(adj.total > 0 && adj.items.iter().all(|i| i.candidate.cat == lexforge::lexicon::Pos::Adj));

    let (_, all): (_, QueuePage) = get_json(&app, "/queue?limit=500").await;
    let mut seen = Vec::new();
    let mut uri = "/queue?limit=4".to_string();
    loop {
        let (_, page): (_, QueuePage) = get_json(&app, &uri).await;
        assert!(page.items.len() <= 4);
        seen.extend(page.items.into_iter().map(|i| i.candidate_id));
        match page.next_cursor {
            Some(c) => uri = format!("/queue?limit=4&cursor={c}"),
            None => break,
        }
    }
    assert_eq!(seen, all.items.iter().map(|i| i.candidate_id.clone()).collect::<Vec<_>>());

    for bad in ["/queue?cursor=nope", "/queue?status=maybe", "/queue?pos=XYZ", "/queue?limit=0"] {
        let (s, e): (_, ErrorBody) = get_json(&app, bad).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{bad}");
        assert!(!e.message.is_empty());
    }
}

#[tokio::test]
async fn approve_then_stale_version_conflicts() {
    let (_, app) = acquired().await;
    let (_, page): (_, QueuePage) = get_json(&app, "/queue?limit=500").await;
    let item = page.items.iter().find(|i| i.candidate.surface == "compra").unwrap();
    let uri = format!("/candidates/{}/decision", item.candidate_id);

    let (s, done): (_, ItemView) =
        post_json(&app, &uri, json!({"decision": "approve", "expected_version": item.version})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(done.version, item.version + 1);
    assert_eq!(serde_json::to_value(done.review_status).unwrap(), "approved");

    let (s, stored): (_, EntryView) = get_json(&app, &format!("/entries/{}", done.candidate.entry.sense_id)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(stored.citation, "compra");
    assert_eq!(serde_json::to_value(stored.origin).unwrap(), "reviewed");
    assert_eq!(stored.lex_rul.last().unwrap().source, "comprar-V1");

    let (_, by_form): (_, Vec<EntryView>) = get_json(&app, "/entries?form=compra").await;
    assert!(by_form.iter().any(|e| e.sense_id == stored.sense_id));

    let (s, e): (_, ErrorBody) =
        post_json(&app, &uri, json!({"decision": "reject", "expected_version": item.version})).await;
    assert_eq!((s, e.error.as_str()), (StatusCode::CONFLICT, "version_conflict"));
    let (s, e): (_, ErrorBody) =
        post_json(&app, &uri, json!({"decision": "reject", "expected_version": done.version})).await;
    assert_eq!((s, e.error.as_str()), (StatusCode::CONFLICT, "not_pending"));

    let (s, _): (_, ErrorBody) =
        post_json(&app, "/candidates/c9999/decision", json!({"decision": "approve", "expected_version": 1})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn modify_validates_edit() {
    let (_, app) = acquired().await;
    let (_, page): (_, QueuePage) = get_json(&app, "/queue?limit=1").await;
    let id = &page.items[0].candidate_id;
    let uri = format!("/candidates/{id}/decision");

    let (s, e): (_, ErrorBody) = post_json(
        &app,
        &uri,
        json!({"decision": "modify", "expected_version": 1, "edit": {"sem": "NOT-A-CONCEPT"}}),
    )
    .await;
    assert_eq!((s, e.error.as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "invalid_edit"));
    let (s, _): (_, ErrorBody) = post_json(&app, &uri, json!({"decision": "modify", "expected_version": 1})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let (s, done): (_, ItemView) = post_json(
        &app,
        &uri,
        json!({"decision": "modify", "expected_version": 1, "edit": {"dfn": "edited"}}),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let (_, stored): (_, EntryView) = get_json(&app, &format!("/entries/{}", done.candidate.entry.sense_id)).await;
    assert_eq!(stored.dfn, "edited");
}

#[tokio::test]
async fn preview_does_not_persist() {
    let p = pipeline();
    let app = router(p.clone(), None);
    let revision = p.lexicon().snapshot().revision();
    let (s, prev): (_, PreviewResponse) =
        post_json(&app, "/preview", json!({"sense_id": "comprar-V1", "rule_id": "lr2event8b"})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(prev.surface, "compra");
    assert_eq!(prev.entry.citation, "compra");
    assert_eq!(serde_json::to_value(prev.entry.cat).unwrap(), "N");
    assert_eq!(prev.entry.lex_rul.len(), 1);
    assert_eq!(p.lexicon().snapshot().revision(), revision);
    let (_, none): (_, Vec<EntryView>) = get_json(&app, "/entries?form=compra").await;
    assert!(none.is_empty());

    let (s, e): (_, ErrorBody) =
        post_json(&app, "/preview", json!({"sense_id": "comprar-V1", "rule_id": "no_such_rule"})).await;
    assert_eq!((s, e.error.as_str()), (StatusCode::NOT_FOUND, "unknown_rule"));
    let (s, _): (_, ErrorBody) =
        post_json(&app, "/preview", json!({"sense_id": "zzz-V1", "rule_id": "lr2event8b"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn lookup_falls_back_to_derivation() {
    let app = router(pipeline(), None);
    let (s, hits): (_, Vec<EntryView>) = get_json(&app, "/lookup/supercompra").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(hits.len(), 2);
    assert!(hits.iter().all(|e| serde_json::to_value(e.origin).unwrap() == "ephemeral"));
    let (s, e): (_, ErrorBody) = get_json(&app, "/entries/not-a-sense").await;
    assert_eq!((s, e.error.as_str()), (StatusCode::BAD_REQUEST, "bad_request"));
    let (s, _): (_, ErrorBody) = get_json(&app, "/entries/zzz-V1").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn serves_static_assets() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>desk</p>").unwrap();
    let app = router(pipeline(), Some(dir.path().to_path_buf()));
    let (s, body) = call(&app, Method::GET, "/index.html", None).await;
    assert_eq!((s, body.as_slice()), (StatusCode::OK, b"<p>desk</p>".as_slice()));
    let (s, _) = call(&app, Method::GET, "/queue", None).await;
    assert_eq!(s, StatusCode::OK);
}
