use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;
use xnet_core::actions::{aspect_of, build_move_xnet};
use xnet_core::petri::Marking;
use xnet_core::solver::{LiveSolver, LogRecord};
use xnet_core::world::WorldDefinition;
use xnet_service::http::{router, AppState, CommandReply};
use xnet_service::{build_solver, parser_for};

fn app(pace: f64) -> AppState {
    let world = WorldDefinition::load(&fixture("worlds/demo.toml")).unwrap();
    let solver = build_solver(&world, None).unwrap();
    AppState::new(LiveSolver::spawn(solver, Some(pace)), parser_for(&world))
}

fn fixture(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

async fn json_body(resp: axum::response::Response) -> Value {
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    serde_json::from_slice(&bytes).unwrap()
}

fn post_command(text: &str) -> Request<Body> {
    Request::post("/command")
        .header("content-type", "application/json")
        .body(Body::from(serde_json::json!({ "text": text }).to_string()))
        .unwrap()
}

#[tokio::test]
async fn state_is_consistent_snapshot() {
    let state = app(200.0);
    let resp = router(state.clone()).oneshot(Request::get("/state").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let snap = json_body(resp).await;
    assert_eq!(snap["aspect"], "inactive");
    assert_eq!(snap["world"]["robot"]["name"], "Robot1");

    router(state.clone()).oneshot(post_command("Robot1, move to the blue box!")).await.unwrap();
    let (net, places, _) = build_move_xnet();
    for _ in 0..20 {
        tokio::time::sleep(Duration::from_millis(10)).await;
        let resp = router(state.clone()).oneshot(Request::get("/state").body(Body::empty()).unwrap()).await.unwrap();
        let snap = json_body(resp).await;
        let counts: Vec<(String, u64)> =
            snap["marking"].as_object().unwrap().iter().map(|(k, v)| (k.clone(), v.as_u64().unwrap())).collect();
        if counts.is_empty() {
            continue;
        }
        let m = Marking::from_counts(&net, counts.iter().map(|(k, v)| (k.as_str(), *v))).unwrap();
        assert_eq!(serde_json::to_value(aspect_of(&places.standard, &m)).unwrap(), snap["aspect"]);
    }
}

#[tokio::test]
async fn command_accepts_and_rejects() {
    let state = app(50.0);
    let resp = router(state.clone()).oneshot(post_command("Robot1, dash to the green box")).await.unwrap();
    assert_eq!(resp.status(), StatusCode::ACCEPTED);
    let reply: CommandReply = serde_json::from_value(json_body(resp).await).unwrap();
    let CommandReply::Accepted { actspec } = reply else { panic!("{reply:?}") };
    assert_eq!(actspec.agent, "Robot1");

    let resp = router(state.clone()).oneshot(post_command("Robot1, fly to the moon")).await.unwrap();
    assert_eq!(resp.status(), StatusCode::UNPROCESSABLE_ENTITY);
    let reply: CommandReply = serde_json::from_value(json_body(resp).await).unwrap();
    let CommandReply::Rejected { error, hint } = reply else { panic!("{reply:?}") };
    assert!(error.contains("fly to the moon"));
    assert!(hint.is_some());

    let resp = router(state.clone()).oneshot(post_command("Robot1, move to the purple box")).await.unwrap();
    assert_eq!(resp.status(), StatusCode::UNPROCESSABLE_ENTITY);

    let log = state.live().snapshot(100).log;
    assert_eq!(log.iter().filter(|r| r.field("text").is_some_and(|t| t.contains("moon"))).count(), 1);
}

#[tokio::test]
async fn malformed_body_is_a_client_error() {
    let state = app(50.0);
    let req = Request::post("/command").header("content-type", "application/json").body(Body::from("{}")).unwrap();
    let resp = router(state).oneshot(req).await.unwrap();
    assert!(resp.status().is_client_error());
}

#[tokio::test]
async fn events_stream_log_records() {
    let state = app(100.0);
    let resp = router(state.clone()).oneshot(Request::get("/events").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    router(state.clone()).oneshot(post_command("Robot1, move to the blue box")).await.unwrap();

    let mut body = resp.into_body();
    let mut text = String::new();
    let mut records = Vec::new();
    while records.len() < 3 {
        let frame = tokio::time::timeout(Duration::from_secs(5), body.frame()).await.expect("event in time");
        let frame = frame.unwrap().unwrap();
        let Some(data) = frame.data_ref() else { continue };
        text.push_str(std::str::from_utf8(data).unwrap());
        while let Some(end) = text.find("\n\n") {
            let event: String = text.drain(..end + 2).collect();
            let data = event.lines().find_map(|l| l.strip_prefix("data: ")).unwrap();
            let name = event.lines().find_map(|l| l.strip_prefix("event: ")).unwrap();
            let r: LogRecord = serde_json::from_str(data).unwrap();
            assert_eq!(serde_json::to_value(r.kind).unwrap(), name);
            records.push(r);
        }
    }
    assert_eq!(records[0].field("agent"), Some("Robot1"));
    assert_eq!(serde_json::to_value(records[0].kind).unwrap(), "actspec-received");
}
