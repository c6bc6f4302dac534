mod common;

use axum::http::StatusCode;
use common::{app, call, log_len, outcomes_for, store};
use serde_json::{json, Value};

async fn create(app: &axum::Router, body: Value, key: Option<&str>) -> (StatusCode, Value) {
    let headers: Vec<(&str, &str)> = key.map(|k| vec![("idempotency-key", k)]).unwrap_or_default();
    call(app, "POST", "/v1/trials", Some(body), &headers).await
}

fn id_of(v: &Value) -> String {
    v["trial"]["trial_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn create_with_trial_preset() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(store(dir.path()), None);
    let (code, v) = create(&app, json!({ "preset": "trial", "seed": 1 }), None).await;
    assert_eq!(code, StatusCode::CREATED);
    let alloc = v["allocation"].as_array().unwrap();
    assert_eq!(alloc.len(), 4);
    assert!(alloc.iter().all(|a| a["dose"] == json!({ "i": 1, "j": 1 })));
    let t = &v["trial"];
    assert_eq!((t["rows"].clone(), t["cols"].clone()), (json!(2), json!(3)));
    assert_eq!(t["design"]["theta"], json!(0.33));
    assert_eq!(t["design"]["n_max"], json!(36));
    assert_eq!(t["design"]["gamma"], json!(0.1));
    assert_eq!(t["design"]["epsilon"], json!(0.8));
    assert_eq!(t["status"], json!("running"));
}

#[tokio::test]
async fn invalid_configs_get_field_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(store(dir.path()), None);
    let (code, v) = create(&app, json!({ "preset": "trial", "design": { "theta": 0.0 } }), None).await;
    assert_eq!(code, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["fields"][0]["field"], json!("design.theta"));

    let (code, v) = create(&app, json!({ "rows": 2, "cols": 2, "prior": { "alpha": [1, 1, 1], "beta": [1, 1, 1, 1] } }), None).await;
    assert_eq!(code, StatusCode::UNPROCESSABLE_ENTITY);
    let fields: Vec<&str> = v["fields"].as_array().unwrap().iter().map(|f| f["field"].as_str().unwrap()).collect();
    assert!(fields.contains(&"design.theta") && fields.contains(&"design.n_max") && fields.contains(&"prior.alpha"));

    let (code, _) = create(&app, json!({ "preset": "trial", "design": { "later_cohort_size": 3 } }), None).await;
    assert_eq!(code, StatusCode::UNPROCESSABLE_ENTITY);
    let (code, _) = create(&app, json!({ "preset": "trial", "bogus": 1 }), None).await;
    assert_eq!(code, StatusCode::UNPROCESSABLE_ENTITY);
    let (code, _) = call(&app, "POST", "/v1/trials", None, &[]).await;
    assert!(code.is_client_error());
    let (_, list) = call(&app, "GET", "/v1/trials", None, &[]).await;
    assert_eq!(list, json!([]));
}

#[tokio::test]
async fn custom_trial_without_preset() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(store(dir.path()), None);
    let body = json!({
        "rows": 2, "cols": 2,
        "design": { "theta": 0.25, "n_max": 12, "n_samples": 500, "burn_in": 50 },
        "prior": { "alpha": [1, 1, 1, 1], "beta": [1, 1, 1, 1] },
        "label": "pilot"
    });
    let (code, v) = create(&app, body, None).await;
    assert_eq!(code, StatusCode::CREATED);
    assert_eq!(v["trial"]["label"], json!("pilot"));
    assert_eq!(v["trial"]["design"]["gibbs"]["n_samples"], json!(500));
}

#[tokio::test]
async fn duplicate_idempotency_key_returns_same_trial() {
    let dir = tempfile::tempdir().unwrap();
    let st = store(dir.path());
    let app = app(st.clone(), None);
    let (c1, a) = create(&app, json!({ "preset": "trial" }), Some("k1")).await;
    let (c2, b) = create(&app, json!({ "preset": "trial" }), Some("k1")).await;
    assert_eq!((c1, c2), (StatusCode::CREATED, StatusCode::OK));
    assert_eq!(id_of(&a), id_of(&b));
    assert_eq!(st.list().len(), 1);
    // survives a restart
    let app2 = common::app(store(dir.path()), None);
    let (c3, c) = create(&app2, json!({ "preset": "trial" }), Some("k1")).await;
    assert_eq!(c3, StatusCode::OK);
    assert_eq!(id_of(&a), id_of(&c));
}

#[tokio::test]
async fn cohort_flow_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let st = store(dir.path());
    let app = app(st.clone(), None);
    let (_, v) = create(&app, json!({ "preset": "trial", "seed": 3 }), None).await;
    let id = id_of(&v);
    let base = format!("/v1/trials/{id}");

    let (code, _) = call(&app, "GET", "/v1/trials/nope", None, &[]).await;
    assert_eq!(code, StatusCode::NOT_FOUND);
    let (code, _) = call(&app, "GET", "/v1/trials/nope/posterior", None, &[]).await;
    assert_eq!(code, StatusCode::NOT_FOUND);

    // wrong doses → 409 with the expected allocation
    let bad = json!({ "outcomes": [{ "i": 2, "j": 2, "dlt": false }] });
    let (code, err) = call(&app, "POST", &format!("{base}/cohorts"), Some(bad), &[]).await;
    assert_eq!(code, StatusCode::CONFLICT);
    assert_eq!(err["details"]["expected"].as_array().unwrap().len(), 4);

    let (code, r) = call(&app, "POST", &format!("{base}/cohorts"), Some(outcomes_for(&v["allocation"], |_| false)), &[]).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(r["status"], json!("running"));
    let next = r["next_allocation"].as_array().unwrap();
    assert_eq!(next.len(), 4);
    // second cohort: row dose then column dose, both starting from (1,1)
    assert_eq!(next[0]["dose"]["i"], json!(1));
    assert_eq!(next[3]["dose"]["j"], json!(1));
    assert!(r["posterior"]["omega"].as_f64().unwrap() > 1.0);

    let (_, t) = call(&app, "GET", &base, None, &[]).await;
    assert_eq!(t["enrolled"], json!(4));
    assert_eq!(t["pending"], r["next_allocation"]);
    let (_, ev) = call(&app, "GET", &format!("{base}/events"), None, &[]).await;
    assert_eq!(ev["events"].as_array().unwrap().len() as u64, t["version"].as_u64().unwrap());
}

#[tokio::test]
async fn toxic_outcomes_stop_the_trial() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(store(dir.path()), None);
    let (_, v) = create(&app, json!({ "preset": "trial", "seed": 5 }), None).await;
    let id = id_of(&v);
    let base = format!("/v1/trials/{id}");
    let mut pending = v["allocation"].clone();
    let mut last = Value::Null;
    for _ in 0..20 {
        let (code, r) = call(&app, "POST", &format!("{base}/cohorts"), Some(outcomes_for(&pending, |_| true)), &[]).await;
        assert_eq!(code, StatusCode::OK);
        pending = r["next_allocation"].clone();
        last = r;
        if last["status"] != json!("running") {
            break;
        }
    }
    assert_eq!(last["status"], json!("stopped_for_toxicity"));
    assert!(last["stop_check"]["tail"].as_f64().unwrap() > 0.8);
    assert_eq!(last["recommendation"]["doses"], json!([]));
    assert_eq!(last["recommendation"]["final"], json!(true));
    let (_, rec) = call(&app, "GET", &format!("{base}/recommendation"), None, &[]).await;
    assert_eq!(rec["doses"], json!([]));
    let again = json!({ "outcomes": [{ "i": 1, "j": 1, "dlt": true }] });
    let (code, _) = call(&app, "POST", &format!("{base}/cohorts"), Some(again.clone()), &[]).await;
    assert_eq!(code, StatusCode::GONE);
    let (code, _) = call(&app, "POST", &format!("{base}/what-if"), Some(again), &[]).await;
    assert_eq!(code, StatusCode::GONE);
}

#[tokio::test]
async fn submissions_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let st = store(dir.path());
    let app = app(st.clone(), None);
    let (_, v) = create(&app, json!({ "preset": "trial", "seed": 8 }), None).await;
    let id = id_of(&v);
    let url = format!("/v1/trials/{id}/cohorts");
    let body = outcomes_for(&v["allocation"], |n| n == 0);
    let h = [("idempotency-key", "c1")];
    let (c1, r1) = call(&app, "POST", &url, Some(body.clone()), &h).await;
    let version = st.snapshot(&id).unwrap().state.version();
    let (c2, r2) = call(&app, "POST", &url, Some(body.clone()), &h).await;
    assert_eq!((c1, c2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(r1, r2);
    assert_eq!(st.snapshot(&id).unwrap().state.version(), version);
    // same key, different payload
    let other = outcomes_for(&v["allocation"], |_| true);
    let (c3, _) = call(&app, "POST", &url, Some(other), &h).await;
    assert_eq!(c3, StatusCode::CONFLICT);
    // replay still works after a restart
    let app2 = common::app(store(dir.path()), None);
    let (c4, r4) = call(&app2, "POST", &url, Some(body), &h).await;
    assert_eq!(c4, StatusCode::OK);
    assert_eq!(r1, r4);
}

fn monotone(grid: &Value) -> bool {
    let g: Vec<Vec<f64>> = serde_json::from_value(grid.clone()).unwrap();
    (0..g.len()).all(|i| {
        (0..g[i].len()).all(|j| (j + 1 >= g[i].len() || g[i][j] <= g[i][j + 1]) && (i + 1 >= g.len() || g[i][j] <= g[i + 1][j]))
    })
}

#[tokio::test]
async fn posterior_payloads() {
    let dir = tempfile::tempdir().unwrap();
    let st = store(dir.path());
    let app = app(st.clone(), None);
    let (_, v) = create(&app, json!({ "preset": "trial", "seed": 2 }), None).await;
    let id = id_of(&v);
    let url = format!("/v1/trials/{id}/posterior");
    let before = log_len(&st, &id);
    let (code, p1) = call(&app, "GET", &url, None, &[]).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(p1["omega"], Value::Null);
    assert_eq!(p1["cohorts_observed"], json!(0));
    let (_, p2) = call(&app, "GET", &url, None, &[]).await;
    assert_eq!(p1, p2);
    for path in ["", "/events", "/recommendation", "/posterior"] {
        let (code, _) = call(&app, "GET", &format!("/v1/trials/{id}{path}"), None, &[]).await;
        assert_eq!(code, StatusCode::OK);
    }
    assert_eq!(log_len(&st, &id), before, "reads must not write");

    call(&app, "POST", &format!("/v1/trials/{id}/cohorts"), Some(outcomes_for(&v["allocation"], |n| n < 2)), &[]).await;
    let (_, p3) = call(&app, "GET", &url, None, &[]).await;
    assert!(p3["omega"].as_f64().is_some());
    assert_eq!(p3["cohorts_observed"], json!(1));
    assert!(monotone(&p3["median"]));
    let lo: Vec<Vec<f64>> = serde_json::from_value(p3["lower_95"].clone()).unwrap();
    let hi: Vec<Vec<f64>> = serde_json::from_value(p3["upper_95"].clone()).unwrap();
    let med: Vec<Vec<f64>> = serde_json::from_value(p3["median"].clone()).unwrap();
    for i in 0..2 {
        for j in 0..3 {
            assert!(lo[i][j] <= med[i][j] && med[i][j] <= hi[i][j]);
        }
    }
    // same payload after a restart (recomputed from the log)
    let app2 = common::app(store(dir.path()), None);
    let (_, p4) = call(&app2, "GET", &url, None, &[]).await;
    assert_eq!(p3, p4);
}

#[tokio::test]
async fn what_if_previews_without_side_effects() {
    let dir = tempfile::tempdir().unwrap();
    let st = store(dir.path());
    let app = app(st.clone(), None);
    let (_, v) = create(&app, json!({ "preset": "trial", "seed": 4 }), None).await;
    let id = id_of(&v);
    let base = format!("/v1/trials/{id}");
    let before = log_len(&st, &id);

    let (code, empty) = call(&app, "POST", &format!("{base}/what-if"), Some(json!({ "outcomes": [] })), &[]).await;
    assert_eq!(code, StatusCode::OK);
    let (_, current) = call(&app, "GET", &format!("{base}/posterior"), None, &[]).await;
    assert_eq!(empty["hypothetical"], json!(true));
    let mut cur = current.clone();
    cur["hypothetical"] = json!(true);
    assert_eq!(empty["posterior"], cur);

    let partial = json!({ "outcomes": [{ "i": 1, "j": 1, "dlt": true }] });
    let (code, part) = call(&app, "POST", &format!("{base}/what-if"), Some(partial), &[]).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(part["next_allocation"], json!([]));

    let body = outcomes_for(&v["allocation"], |n| n == 3);
    let (_, w1) = call(&app, "POST", &format!("{base}/what-if"), Some(body.clone()), &[]).await;
    let (_, w2) = call(&app, "POST", &format!("{base}/what-if"), Some(body.clone()), &[]).await;
    assert_eq!(w1, w2);
    assert_eq!(log_len(&st, &id), before);
    assert_eq!(st.snapshot(&id).unwrap().state.enrolled, 0);

    let (_, real) = call(&app, "POST", &format!("{base}/cohorts"), Some(body), &[]).await;
    let mut preview = w1.clone();
    preview["hypothetical"] = json!(false);
    preview["posterior"]["hypothetical"] = json!(false);
    assert_eq!(preview, real);
}

#[tokio::test]
async fn bearer_token_guards_v1() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(store(dir.path()), Some("s3cret"));
    let (code, _) = call(&app, "GET", "/v1/trials", None, &[]).await;
    assert_eq!(code, StatusCode::UNAUTHORIZED);
    let (code, _) = call(&app, "GET", "/v1/trials", None, &[("authorization", "Bearer wrong")]).await;
    assert_eq!(code, StatusCode::UNAUTHORIZED);
    let (code, _) = call(&app, "GET", "/v1/trials", None, &[("authorization", "Bearer s3cret")]).await;
    assert_eq!(code, StatusCode::OK);
    let (code, _) = call(&app, "GET", "/healthz", None, &[]).await;
    assert_eq!(code, StatusCode::OK);
}

#[tokio::test]
async fn presets_listed() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(store(dir.path()), None);
    let (code, v) = call(&app, "GET", "/v1/presets", None, &[]).await;
    assert_eq!(code, StatusCode::OK);
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["study1", "study2", "trial"]);
}
