//! HTTP surface for the browser console.
//!
//! | route            | body                   | reply                                  |
//! |------------------|------------------------|----------------------------------------|
//! | `GET /state`     | –                      | [`SystemSnapshot`]                     |
//! | `POST /command`  | `{"text": "..."}`      | [`CommandReply`], 202 or 422           |
//! | `GET /events`    | –                      | server-sent events, one per log record |
//!
//! Handlers only read snapshots and enqueue requests; the solver threads do
//! all the work.

use std::convert::Infallible;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;
use xnet_core::actspec::ActSpec;
use xnet_core::command::CommandParser;
use xnet_core::solver::{LiveSolver, SystemSnapshot};

use crate::ServiceError;

/// Log lines included in each `/state` snapshot.
pub const SNAPSHOT_LOG_LINES: usize = 50;

#[derive(Clone)]
pub struct AppState {
    live: Arc<LiveSolver>,
    parser: Arc<CommandParser>,
}

impl AppState {
    pub fn new(live: LiveSolver, parser: CommandParser) -> Self {
        AppState { live: Arc::new(live), parser: Arc::new(parser) }
    }

    pub fn live(&self) -> &LiveSolver {
        &self.live
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct CommandRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CommandReply {
    Accepted { actspec: ActSpec },
    Rejected { error: String, hint: Option<String> },
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/state", get(get_state))
        .route("/command", post(post_command))
        .route("/events", get(get_events))
        .with_state(state)
}

async fn get_state(State(app): State<AppState>) -> Json<SystemSnapshot> {
    Json(app.live.snapshot(SNAPSHOT_LOG_LINES))
}

async fn post_command(
    State(app): State<AppState>,
    Json(req): Json<CommandRequest>,
) -> (StatusCode, Json<CommandReply>) {
    match app.parser.parse(&req.text) {
        Ok(actspec) => {
            app.live.submit(actspec.clone());
            (StatusCode::ACCEPTED, Json(CommandReply::Accepted { actspec }))
        }
        Err(e) => {
            let error = e.to_string();
            app.live.with_solver(|s| s.note_parse_error(&req.text, &error));
            (
                StatusCode::UNPROCESSABLE_ENTITY,
                Json(CommandReply::Rejected { error, hint: e.hint().map(str::to_owned) }),
            )
        }
    }
}

async fn get_events(State(app): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let records = app.live.subscribe_log();
    let (tx, rx) = mpsc::unbounded_channel();
    // The log hands out blocking receivers; a small thread forwards them.
    // It exits on the first record after the client goes away.
    thread::spawn(move || {
        for r in records {
            if tx.send(r).is_err() {
                break;
            }
        }
    });
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        let r = rx.recv().await?;
        let data = serde_json::to_string(&r).expect("log records serialize");
        let kind = serde_json::to_value(r.kind).ok()?.as_str()?.to_owned();
        Some((Ok(Event::default().event(kind).data(data)), rx))
    });
    Sse::new(stream).keep_alive(KeepAlive::new().interval(Duration::from_secs(15)))
}

/// Serves the API on `addr` until the process ends.
pub async fn serve(state: AppState, addr: &str) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr: addr.to_owned(), source })?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
