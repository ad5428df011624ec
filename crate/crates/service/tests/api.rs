use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sp_core::DiagnosisConfig;
use sp_service::{http, Service};
use tower::ServiceExt;

const SMALL_KB: &str = "name=cold ids=1@1\n< cold <dname> Cold </dname> <nose> runny </nose> \
                        <cough> yes </cough> <treatment> rest </treatment> > (10)\n\n\
                        name=hay ids=1@1\n< hay <dname> Hay_Fever </dname> <nose> runny </nose> \
                        <eyes> itchy </eyes> > (3)";

fn fixture(name: &str) -> String {
    let path = format!(
        "{}/../core/tests/fixtures/{name}",
        env!("CARGO_MANIFEST_DIR")
    );
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn app(dir: &Path) -> Router {
    let svc = Service::open(dir, DiagnosisConfig::default()).unwrap();
    http::router(Arc::new(svc))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let builder = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => builder
            .header("content-type", "application/json")
            .body(Body::from(v.to_string())),
        None => builder.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes)
}

async fn json_call(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    let v = if b.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&b).unwrap()
    };
    (s, v)
}

async fn upload(app: &Router, text: &str) -> String {
    let req = Request::post("/kb")
        .body(Body::from(text.to_owned()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::CREATED);
    let b = resp.into_body().collect().await.unwrap().to_bytes();
    let v: Value = serde_json::from_slice(&b).unwrap();
    v["id"].as_str().unwrap().to_owned()
}

async fn new_session(app: &Router, kb: &str) -> String {
    let (s, v) = json_call(app, "POST", "/sessions", Some(json!({ "kb_id": kb }))).await;
    assert_eq!(s, StatusCode::CREATED);
    v["id"].as_str().unwrap().to_owned()
}

async fn add(app: &Router, session: &str, text: &str) -> Value {
    let (s, v) = json_call(
        app,
        "POST",
        &format!("/sessions/{session}/findings"),
        Some(json!({ "text": text })),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    v
}

fn names_in(values: &Value, key: &str) -> Vec<String> {
    values[key]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["value"].as_str().unwrap().to_owned())
        .collect()
}

#[tokio::test]
async fn diagnostic_cycle_with_explaining_away() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let kb = upload(&app, &fixture("diseases.sp")).await;
    let sid = new_session(&app, &kb).await;

    let (_, empty) = json_call(&app, "GET", &format!("/sessions/{sid}/report"), None).await;
    assert!(empty["groups"].as_array().unwrap().is_empty());

    let out = add(&app, &sid, &fixture("john_smith.sp")).await;
    let top = &out["report"]["groups"][0]["hypotheses"][0];
    assert_eq!(top["name"], "Influenza");
    assert!(top["p_rel"].as_f64().unwrap() > 0.99);
    let predicted = names_in(top, "predicted_symptoms");
    let treatments = names_in(top, "treatments");
    assert!(predicted.iter().any(|v| v == "yes"));
    let fields: Vec<&str> = top["predicted_symptoms"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["field"].as_str().unwrap())
        .collect();
    assert!(fields.contains(&"cough") && fields.contains(&"headache"));
    assert_eq!(treatments, ["flu_treatment"]);

    let report_uri = format!("/sessions/{sid}/report");
    let (_, a) = call(&app, "GET", &report_uri, None).await;
    let (_, b) = call(&app, "GET", &report_uri, None).await;
    assert_eq!(a, b);

    let (s, view) = json_call(&app, "GET", &format!("/sessions/{sid}/alignments/0"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(view["rotated"].as_str().unwrap().contains("flu"));
    assert!(!view["document"]["rows"].as_array().unwrap().is_empty());

    let out = add(&app, &sid, "<skin> rash_with_blisters </skin>").await;
    let top = &out["report"]["groups"][0]["hypotheses"][0];
    assert_eq!(top["name"], "Smallpox");
    assert_eq!(top["p_rel"].as_f64().unwrap(), 1.0);
    assert_eq!(out["revision"], 2);
}

#[tokio::test]
async fn problems_carry_codes() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());

    let (s, v) = json_call(&app, "POST", "/sessions", Some(json!({ "kb_id": "nope" }))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "kb_not_found");
    assert_eq!(v["status"], 404);

    let (s, v) = json_call(&app, "GET", "/sessions/missing/report", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "session_not_found");

    let (s, v) = json_call(&app, "GET", "/kb/missing", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "kb_not_found");

    let (s, v) = json_call(&app, "GET", "/nowhere", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "route_not_found");

    let req = Request::post("/kb").body(Body::from("   ")).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(
        resp.headers()["content-type"].to_str().unwrap(),
        "application/problem+json"
    );

    let kb = upload(&app, SMALL_KB).await;
    let sid = new_session(&app, &kb).await;
    let (s, v) = call(
        &app,
        "POST",
        &format!("/sessions/{sid}/findings"),
        Some(json!({ "txt": 1 })),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_slice(&v).unwrap();
    assert_eq!(v["code"], "malformed_request");

    let (s, v) = json_call(
        &app,
        "POST",
        &format!("/sessions/{sid}/findings"),
        Some(json!({ "text": "" })),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "invalid_findings");

    let (s, v) = json_call(&app, "GET", &format!("/sessions/{sid}/alignments/3"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "alignment_not_found");

    let (s, v) = json_call(&app, "GET", &format!("/sessions/{sid}/alignments/x"), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "malformed_path");
}

#[tokio::test]
async fn session_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let kb = upload(&app, SMALL_KB).await;
    assert_eq!(upload(&app, SMALL_KB).await, kb);

    let (s, doc) = json_call(&app, "GET", &format!("/kb/{kb}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(doc["patterns"], 2);
    assert_eq!(doc["text"], SMALL_KB);

    let a = new_session(&app, &kb).await;
    let b = new_session(&app, &kb).await;
    assert_ne!(a, b);
    let (_, list) = json_call(&app, "GET", "/sessions", None).await;
    assert_eq!(list.as_array().unwrap().len(), 2);

    let (s, _) = call(&app, "DELETE", &format!("/sessions/{a}"), None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, _) = call(&app, "DELETE", &format!("/sessions/{a}"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "GET", &format!("/sessions/{a}/report"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (_, list) = json_call(&app, "GET", "/sessions", None).await;
    assert_eq!(list[0]["id"], b.as_str());
    assert!(!dir
        .path()
        .join("sessions")
        .join(format!("{a}.json"))
        .exists());
}

#[tokio::test]
async fn unexplained_finding_is_flagged_and_changes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let kb = upload(&app, SMALL_KB).await;
    let sid = new_session(&app, &kb).await;
    let before = add(&app, &sid, "<nose> runny </nose>\n\n<cough> yes </cough>").await;
    let after = add(&app, &sid, "zzz qqq").await;
    assert_eq!(before["report"]["groups"], after["report"]["groups"]);
    let findings = after["report"]["findings"].as_array().unwrap();
    let odd = findings.iter().find(|f| f["text"] == "zzz qqq").unwrap();
    assert_eq!(odd["explained"], false);

    let dup = add(&app, &sid, "zzz qqq").await;
    assert_eq!(dup["revision"], 2);
    assert_eq!(dup["warnings"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn restart_and_reordering_reproduce_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let batches = [
        "<nose> runny </nose>",
        "<eyes> itchy </eyes>\n\n<cough> yes </cough>",
        "<dname> Cold </dname>",
    ];
    let (sid, kb, report) = {
        let app = app(dir.path());
        let kb = upload(&app, SMALL_KB).await;
        let sid = new_session(&app, &kb).await;
        for b in batches {
            add(&app, &sid, b).await;
        }
        let (_, r) = call(&app, "GET", &format!("/sessions/{sid}/report"), None).await;
        (sid, kb, r)
    };

    // A fresh process over the same files replays the revision log.
    let app = app(dir.path());
    let (s, replayed) = call(&app, "GET", &format!("/sessions/{sid}/report"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(replayed, report);
    let (_, revs) = json_call(&app, "GET", &format!("/sessions/{sid}/revisions"), None).await;
    assert_eq!(revs.as_array().unwrap().len(), 3);

    // Same findings, other order and batching.
    let other = new_session(&app, &kb).await;
    add(
        &app,
        &other,
        "<dname> Cold </dname>\n\n<cough> yes </cough>",
    )
    .await;
    add(&app, &other, "<eyes> itchy </eyes>\n\n<nose> runny </nose>").await;
    let (_, permuted) = call(&app, "GET", &format!("/sessions/{other}/report"), None).await;
    assert_eq!(permuted, report);
}

#[test]
fn mutations_on_one_session_queue() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Arc::new(Service::open(dir.path(), DiagnosisConfig::default()).unwrap());
    let kb = svc.add_kb(SMALL_KB.into()).unwrap();
    let sid = svc.create_session(&kb.id).unwrap().id;
    let texts = [
        "<nose> runny </nose>",
        "<cough> yes </cough>",
        "<eyes> itchy </eyes>",
        "x1",
        "x2",
        "x3",
    ];
    std::thread::scope(|scope| {
        for t in texts {
            let svc = svc.clone();
            let sid = sid.clone();
            scope.spawn(move || svc.add_findings(&sid, t).unwrap());
        }
    });
    let revisions = svc.revisions(&sid).unwrap();
    assert_eq!(revisions.len(), texts.len());
    let numbers: Vec<u64> = revisions.iter().map(|r| r.number).collect();
    assert_eq!(numbers, [1, 2, 3, 4, 5, 6]);
    assert_eq!(svc.session(&sid).unwrap().findings.len(), texts.len());

    let fresh = DiagnosisConfig::default();
    let again = Service::open(dir.path(), fresh).unwrap();
    assert_eq!(again.report(&sid).unwrap(), svc.report(&sid).unwrap());
}
