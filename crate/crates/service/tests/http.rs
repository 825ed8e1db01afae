use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use trustcal_core::docs::{ModelDoc, PolicyDoc, Provenance};
use trustcal_core::simulation::{run_closed_loop, ClosedLoopConfig, Scenario};
use trustcal_core::solver::{value_iteration, SolverConfig};
use trustcal_core::*;
use trustcal_service::{router, AppState, BatchResponse, TraceResponse};

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn docs(model: &TrustWorkloadModel) -> (ModelDoc, PolicyDoc) {
    let policy = value_iteration(model, &RewardSpec::default(), &SolverConfig::default()).unwrap();
    (ModelDoc::from_model(model, Provenance::new("test")), PolicyDoc::from_policy(&policy, Provenance::new("test")))
}

fn create_body(model: &TrustWorkloadModel, carry: bool) -> Value {
    let (m, p) = docs(model);
    json!({ "model": m, "policy": p, "carry_belief": carry })
}

fn random_model(seed: u64) -> TrustWorkloadModel {
    TrustWorkloadModel::random(ActionStructure::paper(), &mut ChaCha8Rng::seed_from_u64(seed))
}

fn step_json(context: Context, o: ObservationTuple, new_episode: bool) -> Value {
    json!({ "context": context, "observation": o, "new_episode": new_episode })
}

async fn new_session(app: &axum::Router, body: Value) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn healthz_and_unknown_session() {
    let app = router(AppState::new());
    assert_eq!(call(&app, "GET", "/healthz", None).await, (StatusCode::OK, json!({"status": "ok"})));
    let (status, v) = call(&app, "GET", "/sessions/nope/trace", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "UnknownSession");
}

#[tokio::test]
async fn creation_starts_at_priors_with_distinct_ids() {
    let app = router(AppState::new());
    let st = ActionStructure::paper();
    let mut t = ModelTables::uniform(&st);
    t.prior_trust = [0.0, 1.0];
    t.prior_workload = [0.5833, 0.4167];
    let m = TrustWorkloadModel::new(st, t).unwrap();
    let (s1, a) = call(&app, "POST", "/sessions", Some(create_body(&m, false))).await;
    let (s2, b) = call(&app, "POST", "/sessions", Some(create_body(&m, false))).await;
    assert_eq!((s1, s2), (StatusCode::CREATED, StatusCode::CREATED));
    assert_ne!(a["id"], b["id"]);
    assert_eq!(a["p_trust_high"], 1.0);
    assert_eq!(a["belief"], json!([0.0, 0.0, 0.5833, 0.4167]));
    let (_, trace) = call(&app, "GET", &format!("/sessions/{}/trace", a["id"].as_str().unwrap()), None).await;
    assert_eq!(trace["steps"], json!([]));
}

#[tokio::test]
async fn mismatched_documents_are_rejected() {
    let app = router(AppState::new());
    let mut body = create_body(&random_model(1), false);
    body["policy"]["categories"]["gaze"] = json!(["G_road", "G_vehi"]);
    let (status, v) = call(&app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "SchemaMismatch");

    let mut body = create_body(&random_model(1), false);
    body["model"]["schema"] = json!("twmodel/9");
    let (status, v) = call(&app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "SchemaMismatch");
}

#[tokio::test]
async fn low_reliability_with_certain_high_trust_costs_one() {
    let app = router(AppState::new());
    let st = ActionStructure::paper();
    let mut t = ModelTables::uniform(&st);
    t.prior_trust = [0.0, 1.0];
    let m = TrustWorkloadModel::new(st, t).unwrap();
    let id = new_session(&app, create_body(&m, false)).await;
    let u = Context::new(Reliability::Low, Traffic::Low, Pedestrians::Absent);
    let o = ObservationTuple::new(Reliance::Plus, Gaze::Road);
    let (status, rec) = call(&app, "POST", &format!("/sessions/{id}/step"), Some(step_json(u, o, false))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rec["reward"], -1.0);
    assert_eq!(rec["step"], 0);
}

#[tokio::test]
async fn deterministic_emissions_give_point_mass_and_zero_likelihood_resets() {
    let app = router(AppState::new());
    let st = ActionStructure::paper();
    let mut t = ModelTables::uniform(&st);
    t.emit_trust = [[1.0, 0.0], [0.0, 1.0]];
    t.emit_workload = [[1.0, 0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0, 1.0]];
    let m = TrustWorkloadModel::new(st, t).unwrap();
    let id = new_session(&app, create_body(&m, false)).await;
    let u = Context::from_index(4).unwrap();
    let o = ObservationTuple::new(Reliance::Plus, Gaze::Other);
    let (_, rec) = call(&app, "POST", &format!("/sessions/{id}/step"), Some(step_json(u, o, false))).await;
    assert_eq!(rec["belief"], json!([0.0, 0.0, 0.0, 1.0]));
    assert_eq!(rec["reset"], false);

    let impossible = ObservationTuple::new(Reliance::Minus, Gaze::Vehicle);
    let (status, rec) = call(&app, "POST", &format!("/sessions/{id}/step"), Some(step_json(u, impossible, false))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rec["reset"], true);
    assert_eq!(rec["belief"], json!([0.25, 0.25, 0.25, 0.25]));
}

#[tokio::test]
async fn sessions_are_isolated_and_batch_equals_single_steps() {
    let app = router(AppState::new());
    let m = random_model(3);
    let a = new_session(&app, create_body(&m, false)).await;
    let b = new_session(&app, create_body(&m, false)).await;
    let inputs: Vec<Value> = (0..40)
        .map(|i| {
            let u = Context::from_index(i % 12).unwrap();
            let o = ObservationTuple::from_index((i * 7) % 10).unwrap();
            step_json(u, o, i % 10 == 0)
        })
        .collect();
    for s in &inputs {
        call(&app, "POST", &format!("/sessions/{a}/step"), Some(s.clone())).await;
    }
    let (_, before) = call(&app, "GET", &format!("/sessions/{b}/trace"), None).await;
    assert_eq!(before["steps"], json!([]));
    let (_, batch) = call(&app, "POST", &format!("/sessions/{b}/steps"), Some(json!({ "steps": inputs }))).await;
    let (_, trace_a) = call(&app, "GET", &format!("/sessions/{a}/trace"), None).await;
    assert_eq!(trace_a["steps"].as_array().unwrap().len(), 40);
    assert_eq!(batch["results"], trace_a["steps"]);
}

#[tokio::test]
async fn replaying_a_simulated_trace_reproduces_its_beliefs() {
    let truth = random_model(4);
    let belief_model = random_model(5);
    let policy = value_iteration(&belief_model, &RewardSpec::default(), &SolverConfig::default()).unwrap();
    let scenario = Scenario::random(12, 30, &[1.0 / 12.0; 12], 6).unwrap();
    for carry in [false, true] {
        let cfg = ClosedLoopConfig {
            episode_mode: if carry { EpisodeMode::Carry } else { EpisodeMode::Reset },
            ..ClosedLoopConfig::default()
        };
        let (_, trace) = run_closed_loop(&truth, &belief_model, &policy, &RewardSpec::default(), &scenario, 7, &cfg).unwrap();

        let app = router(AppState::new());
        let id = new_session(&app, create_body(&belief_model, carry)).await;
        let steps: Vec<Value> = trace.iter().map(|r| step_json(r.context, r.observation, r.new_episode)).collect();
        let (status, v) = call(&app, "POST", &format!("/sessions/{id}/steps"), Some(json!({ "steps": steps }))).await;
        assert_eq!(status, StatusCode::OK);
        let resp: BatchResponse = serde_json::from_value(v).unwrap();
        assert_eq!(resp.results.len(), trace.len());
        for (rec, row) in resp.results.iter().zip(&trace) {
            assert_eq!(&rec.belief, row.belief.probs());
            assert_eq!(rec.action, row.action);
            assert_eq!(rec.reset, row.reset);
        }
    }
}

#[tokio::test]
async fn events_stream_step_results() {
    let app = router(AppState::new());
    let id = new_session(&app, create_body(&random_model(8), false)).await;
    let req = Request::get(format!("/sessions/{id}/events")).body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let mut body = resp.into_body();

    let u = Context::from_index(2).unwrap();
    let o = ObservationTuple::from_index(3).unwrap();
    let (_, rec) = call(&app, "POST", &format!("/sessions/{id}/step"), Some(step_json(u, o, false))).await;

    let frame = body.frame().await.unwrap().unwrap();
    let text = String::from_utf8(frame.into_data().unwrap().to_vec()).unwrap();
    assert!(text.starts_with("event: step\n"), "{text}");
    let data = text.lines().find_map(|l| l.strip_prefix("data: ")).unwrap();
    let streamed: Value = serde_json::from_str(data).unwrap();
    assert_eq!(streamed, rec);
}

#[tokio::test]
async fn journal_recovery_restores_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::with_journal(dir.path()).unwrap();
    let app = router(state);
    let id = new_session(&app, create_body(&random_model(9), false)).await;
    let steps: Vec<Value> = (0..25)
        .map(|i| step_json(Context::from_index(i % 12).unwrap(), ObservationTuple::from_index(i % 10).unwrap(), false))
        .collect();
    call(&app, "POST", &format!("/sessions/{id}/steps"), Some(json!({ "steps": steps }))).await;
    let (_, original) = call(&app, "GET", &format!("/sessions/{id}/trace"), None).await;

    let restored = AppState::with_journal(dir.path()).unwrap();
    assert_eq!(restored.recover().unwrap(), vec![id.clone()]);
    let app2 = router(restored);
    let (_, recovered) = call(&app2, "GET", &format!("/sessions/{id}/trace"), None).await;
    let a: TraceResponse = serde_json::from_value(original).unwrap();
    let b: TraceResponse = serde_json::from_value(recovered).unwrap();
    assert_eq!(a.steps, b.steps);
    let next = new_session(&app2, create_body(&random_model(9), false)).await;
    assert_ne!(next, id);
}
