use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use emal::corpus::{BlockingConfig, Record, RecordTable, SchemaAlignment};
use emal::learners::{ForestParams, LearnerConfig, RuleParams};
use emal::oracle::OracleConfig;
use emal::selectors::SelectorKind;
use emal::session::{IterationLog, Session, SessionConfig, Termination};
use emal::{Label, MatchingTask};
use emal_service::types::{ModelSummary, PendingBatch, SessionState, Status, SubmitResponse};
use emal_service::{router, AppState, Created};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn task() -> Arc<MatchingTask> {
    let names = ["apple", "banana", "cherry", "grape", "lemon", "mango", "melon", "peach", "pear", "plum"];
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut gold = Vec::new();
    for i in 0..30 {
        let n = names[i % names.len()];
        left.push(Record {
            id: format!("l{i}"),
            values: vec![Some(format!("{n} juice {i}")), Some(format!("{}", 1.5 + i as f64))],
        });
        right.push(Record {
            id: format!("r{i}"),
            values: vec![Some(format!("{n} Juice no {i}")), if i % 7 == 0 { None } else { Some(format!("{}", 1.5 + i as f64)) }],
        });
        gold.push((format!("l{i}"), format!("r{i}")));
    }
    let attrs = vec!["name".to_string(), "price".to_string()];
    let l = RecordTable::new("left", attrs.clone(), left).unwrap();
    let r = RecordTable::new("right", attrs, right).unwrap();
    let t = MatchingTask::from_tables(
        "fruit",
        l,
        r,
        &SchemaAlignment::identity(&["name", "price"]),
        &gold,
        &BlockingConfig::new(0.0).unwrap(),
    )
    .unwrap();
    Arc::new(t)
}

fn app_with(task: Arc<MatchingTask>, checkpoints: Option<std::path::PathBuf>) -> (Arc<AppState>, Router) {
    let state = Arc::new(AppState::new(HashMap::from([("fruit".to_string(), task)]), checkpoints));
    (state.clone(), router(state))
}

fn human(learner: LearnerConfig, selector: SelectorKind) -> SessionConfig {
    SessionConfig {
        oracle: OracleConfig::human(),
        master_seed: 5,
        ..SessionConfig::new(learner, selector)
    }
}

fn forest() -> SessionConfig {
    human(LearnerConfig::Forest(ForestParams { n_trees: 5 }), SelectorKind::ForestQbc)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn create(app: &Router, config: &SessionConfig) -> Created {
    let (status, body) = call(app, "POST", "/sessions", Some(json!({ "dataset": "fruit", "config": config }))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    serde_json::from_value(body).unwrap()
}

fn gold_answers(task: &MatchingTask, ids: impl IntoIterator<Item = usize>) -> BTreeMap<usize, Label> {
    ids.into_iter().map(|id| (id, task.pairs[id].gold_label.unwrap())).collect()
}

async fn submit(app: &Router, id: &str, labels: &BTreeMap<usize, Label>) -> (StatusCode, Value) {
    call(app, "POST", &format!("/sessions/{id}/labels"), Some(json!({ "labels": labels }))).await
}

fn same_metrics(a: &IterationLog, b: &IterationLog) {
    assert_eq!(
        (a.iteration, a.labels_used, a.labeled, a.pool, a.tp, a.fp, a.fn_),
        (b.iteration, b.labels_used, b.labeled, b.pool, b.tp, b.fp, b.fn_)
    );
    assert_eq!((a.precision, a.recall, a.f1), (b.precision, b.recall, b.f1));
    assert_eq!((a.n_atoms, a.depth), (b.n_atoms, b.depth));
}

#[tokio::test]
async fn human_loop_matches_the_library() {
    let task = task();
    let (_, app) = app_with(task.clone(), None);
    let cfg = forest();
    let created = create(&app, &cfg).await;
    assert_eq!(created.state.status, Status::AwaitingLabels);
    let seed = created.batch.unwrap();
    assert_eq!(seed.items.len(), 30);
    assert_eq!(seed.items[0].attributes, vec!["name", "price"]);
    assert!(seed.items.iter().all(|i| i.left_values[0].as_deref().is_some_and(|v| v.contains("juice"))));
    assert!(seed.items.iter().all(|i| i.similarities.len() == 2));

    let mut lib = Session::new(cfg, task.clone()).unwrap();
    let mut batch = seed;
    for _ in 0..3 {
        let labels = gold_answers(&task, batch.items.iter().map(|i| i.pair_id));
        let (status, body) = submit(&app, &created.session_id, &labels).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let resp: SubmitResponse = serde_json::from_value(body).unwrap();
        assert!(resp.advanced);

        let expected_ids = lib.pending().unwrap().pair_ids.clone();
        assert_eq!(batch.items.iter().map(|i| i.pair_id).collect::<Vec<_>>(), expected_ids);
        assert!(lib.submit(&labels.into_iter().collect::<Vec<_>>()).unwrap());
        same_metrics(resp.log.as_ref().unwrap(), lib.logs().last().unwrap());
        assert_eq!(resp.log.as_ref().unwrap().f1, lib.evaluate().unwrap().f1);

        batch = resp.batch.unwrap();
        assert_eq!(batch.items.len(), 10);
        assert_eq!(batch.iteration, lib.pending().unwrap().iteration);
        assert_eq!(resp.state.labels_used, lib.labels_used());
    }

    let (status, body) = call(&app, "GET", &format!("/sessions/{}/metrics", created.session_id), None).await;
    assert_eq!(status, StatusCode::OK);
    let iterations: Vec<IterationLog> = serde_json::from_value(body["iterations"].clone()).unwrap();
    assert_eq!(iterations.len(), 3);
    for (a, b) in iterations.iter().zip(lib.logs()) {
        same_metrics(a, b);
    }
}

#[tokio::test]
async fn gold_seed_starts_with_a_selected_batch() {
    let task = task();
    let (_, app) = app_with(task, None);
    let cfg = SessionConfig {
        seed_from_gold: true,
        ..forest()
    };
    let created = create(&app, &cfg).await;
    let batch = created.batch.unwrap();
    assert_eq!(batch.items.len(), 10);
    assert_eq!(batch.iteration, 1);
    assert_eq!(created.state.labels_used, 30);
}

#[tokio::test]
async fn partial_submissions_persist_and_list_the_rest() {
    let task = task();
    let (_, app) = app_with(task.clone(), None);
    let created = create(&app, &SessionConfig { seed_size: 10, ..forest() }).await;
    let ids: Vec<usize> = created.batch.unwrap().items.iter().map(|i| i.pair_id).collect();
    let (status, body) = submit(&app, &created.session_id, &gold_answers(&task, ids[..4].iter().copied())).await;
    assert_eq!(status, StatusCode::OK);
    let resp: SubmitResponse = serde_json::from_value(body).unwrap();
    assert!(!resp.advanced);
    assert!(resp.log.is_none());
    assert_eq!(resp.state.remaining, ids[4..].to_vec());

    let (_, body) = call(&app, "GET", &format!("/sessions/{}/state", created.session_id), None).await;
    let state: SessionState = serde_json::from_value(body.clone()).unwrap();
    assert_eq!(state.status, Status::AwaitingLabels);
    assert_eq!(state.remaining.len(), 6);
    for key in ["created_at", "updated_at"] {
        let text = body[key].as_str().unwrap();
        assert!(chrono::DateTime::parse_from_rfc3339(text).is_ok(), "{text}");
    }
    let (_, body) = call(&app, "GET", &format!("/sessions/{}/batch", created.session_id), None).await;
    let batch: PendingBatch = serde_json::from_value(body).unwrap();
    assert_eq!(batch.answered.len(), 4);
}

#[tokio::test]
async fn contradictory_resubmission_conflicts_and_the_first_answer_stands() {
    let task = task();
    let (_, app) = app_with(task, None);
    let created = create(&app, &forest()).await;
    let id = created.batch.unwrap().items[0].pair_id;

    let (status, _) = submit(&app, &created.session_id, &BTreeMap::from([(id, 1)])).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = submit(&app, &created.session_id, &BTreeMap::from([(id, 1)])).await;
    assert_eq!(status, StatusCode::OK, "repeating the same answer is harmless");
    let (status, body) = submit(&app, &created.session_id, &BTreeMap::from([(id, 0)])).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["pair_id"], json!(id));
    assert_eq!(body["existing"], json!(1));

    let (_, body) = call(&app, "GET", &format!("/sessions/{}/batch", created.session_id), None).await;
    let batch: PendingBatch = serde_json::from_value(body).unwrap();
    assert_eq!(batch.answered.get(&id), Some(&1));
}

#[tokio::test]
async fn a_request_with_a_foreign_id_is_rejected_whole() {
    let task = task();
    let (_, app) = app_with(task.clone(), None);
    let created = create(&app, &forest()).await;
    let ids: Vec<usize> = created.batch.unwrap().items.iter().map(|i| i.pair_id).collect();
    let outside = (0..task.len()).find(|i| !ids.contains(i)).unwrap();

    let labels = BTreeMap::from([(ids[0], 1), (outside, 0)]);
    let (status, _) = submit(&app, &created.session_id, &labels).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = submit(&app, &created.session_id, &BTreeMap::from([(ids[0], 2)])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, body) = call(&app, "GET", &format!("/sessions/{}/batch", created.session_id), None).await;
    let batch: PendingBatch = serde_json::from_value(body).unwrap();
    assert!(batch.answered.is_empty());
}

#[tokio::test]
async fn stale_ids_from_an_earlier_batch_are_rejected() {
    let task = task();
    let (_, app) = app_with(task.clone(), None);
    let created = create(&app, &forest()).await;
    let seed: Vec<usize> = created.batch.unwrap().items.iter().map(|i| i.pair_id).collect();
    let (status, _) = submit(&app, &created.session_id, &gold_answers(&task, seed.iter().copied())).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = submit(&app, &created.session_id, &gold_answers(&task, [seed[0]])).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn bad_creations_and_unknown_sessions() {
    let (_, app) = app_with(task(), None);
    let perfect = SessionConfig {
        oracle: OracleConfig::perfect(),
        ..forest()
    };
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "dataset": "fruit", "config": perfect }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "dataset": "nope", "config": forest() }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let margin_forest = SessionConfig {
        selector: SelectorKind::Margin,
        ..forest()
    };
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "dataset": "fruit", "config": margin_forest }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "GET", "/sessions/s99/state", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn model_view_shows_rules_and_termination_closes_the_batch() {
    let task = task();
    let (_, app) = app_with(task.clone(), None);
    let cfg = SessionConfig {
        termination: Termination {
            f1_target: None,
            label_budget: Some(50),
            max_iterations: None,
        },
        ensemble_tau: Some(0.85),
        ..human(LearnerConfig::Rules(RuleParams::default()), SelectorKind::LfpLfn)
    };
    let created = create(&app, &cfg).await;
    let (_, body) = call(&app, "GET", &format!("/sessions/{}/model", created.session_id), None).await;
    let model: ModelSummary = serde_json::from_value(body).unwrap();
    assert!(!model.trained);

    let mut batch = created.batch;
    let mut state = created.state;
    while let Some(b) = batch {
        let (status, body) = submit(&app, &created.session_id, &gold_answers(&task, b.items.iter().map(|i| i.pair_id))).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let resp: SubmitResponse = serde_json::from_value(body).unwrap();
        batch = resp.batch;
        state = resp.state;
    }
    assert_eq!(state.status, Status::Terminated);
    assert!(state.termination.is_some());
    assert!(state.labels_used <= 50);

    let (_, body) = call(&app, "GET", &format!("/sessions/{}/model", created.session_id), None).await;
    let model: ModelSummary = serde_json::from_value(body).unwrap();
    assert!(model.trained);
    assert_eq!(model.learner, "rules");
    assert!(model.n_atoms.is_some());
    let members: Vec<&String> = model.ensemble.iter().flat_map(|m| &m.rules).collect();
    assert!(!model.rules.is_empty() || !members.is_empty(), "{model:?}");
    assert!(model.ensemble.iter().all(|m| m.precision >= 0.85));
    let (status, _) = call(&app, "GET", &format!("/sessions/{}/batch", created.session_id), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = submit(&app, &created.session_id, &BTreeMap::from([(0, 1)])).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn checkpoints_restore_sessions_with_partial_answers() {
    let task = task();
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app_with(task.clone(), Some(dir.path().to_path_buf()));
    let created = create(&app, &forest()).await;
    let seed: Vec<usize> = created.batch.unwrap().items.iter().map(|i| i.pair_id).collect();
    submit(&app, &created.session_id, &gold_answers(&task, seed)).await;
    let (_, body) = call(&app, "GET", &format!("/sessions/{}/batch", created.session_id), None).await;
    let batch: PendingBatch = serde_json::from_value(body).unwrap();
    let first3: Vec<usize> = batch.items.iter().take(3).map(|i| i.pair_id).collect();
    submit(&app, &created.session_id, &gold_answers(&task, first3)).await;
    let (_, before) = call(&app, "GET", &format!("/sessions/{}/batch", created.session_id), None).await;
    let (_, metrics_before) = call(&app, "GET", &format!("/sessions/{}/metrics", created.session_id), None).await;

    let (state, app2) = app_with(task, Some(dir.path().to_path_buf()));
    assert_eq!(state.restore().unwrap(), 1);
    let (_, after) = call(&app2, "GET", &format!("/sessions/{}/batch", created.session_id), None).await;
    assert_eq!(before, after);
    let (_, metrics_after) = call(&app2, "GET", &format!("/sessions/{}/metrics", created.session_id), None).await;
    let a: Vec<IterationLog> = serde_json::from_value(metrics_before["iterations"].clone()).unwrap();
    let b: Vec<IterationLog> = serde_json::from_value(metrics_after["iterations"].clone()).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        same_metrics(x, y);
    }
    let next = create(&app2, &forest()).await;
    assert_ne!(next.session_id, created.session_id);
}
