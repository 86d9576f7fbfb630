//! HTTP surface of a running session.
//!
//! - `GET /session`: current [`SessionSnapshot`].
//! - `POST /session/operator-action`: queue an operator action for the next
//!   wait point. Answers 200 with the resulting event once the session
//!   consumes it, or 202 if it is still queued when the reply window closes.
//! - `GET /session/events`: server-sent events, one `step` event per
//!   [`StepRecord`] (history first, then live) and a final `finished` event.

use std::convert::Infallible;
use std::sync::mpsc;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use assist_core::catalog::ComponentId;
use assist_core::orchestrator::{
    ConsoleRequest, SessionEvent, SessionObserver, SessionStatus, SessionView, StepRecord,
};
use assist_core::workcell::{OperatorChoice, OperatorEvent};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

/// How long a POST waits for the session to consume the action.
pub const DEFAULT_REPLY_WINDOW: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    /// Bumped on every observer notification.
    pub version: u64,
    #[serde(flatten)]
    pub view: SessionView,
    pub steps: Vec<StepRecord>,
}

/// Body of `POST /session/operator-action`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorAction {
    // Braces so that unknown fields are rejected.
    AssembleDelivered {},
    TakeFromMagazine { component: ComponentId },
}

impl From<OperatorAction> for OperatorChoice {
    fn from(a: OperatorAction) -> Self {
        match a {
            OperatorAction::AssembleDelivered {} => OperatorChoice::AssembleDelivered,
            OperatorAction::TakeFromMagazine { component } => OperatorChoice::TakeFromMagazine { component },
        }
    }
}

#[derive(Debug, Clone)]
enum StreamItem {
    Step(Box<StepRecord>),
    Finished(Box<SessionView>),
}

struct Inner {
    snapshot: RwLock<SessionSnapshot>,
    events: broadcast::Sender<StreamItem>,
    console: Mutex<mpsc::Sender<ConsoleRequest>>,
}

/// Shared between the HTTP handlers and the session observer.
#[derive(Clone)]
pub struct Gateway {
    inner: Arc<Inner>,
    reply_window: Duration,
}

impl Gateway {
    /// `console` feeds the session's `ConsoleOperator`.
    pub fn new(initial: SessionView, console: mpsc::Sender<ConsoleRequest>) -> Self {
        let (events, _) = broadcast::channel(256);
        Self {
            inner: Arc::new(Inner {
                snapshot: RwLock::new(SessionSnapshot {
                    version: 0,
                    view: initial,
                    steps: Vec::new(),
                }),
                events,
                console: Mutex::new(console),
            }),
            reply_window: DEFAULT_REPLY_WINDOW,
        }
    }

    pub fn with_reply_window(mut self, window: Duration) -> Self {
        self.reply_window = window;
        self
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        self.inner.snapshot.read().expect("snapshot lock").clone()
    }

    /// Observer to hand to the session hooks.
    pub fn observer(&self) -> GatewayObserver {
        GatewayObserver { gw: self.clone() }
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/session", get(get_session))
            .route("/session/operator-action", post(post_action))
            .route("/session/events", get(get_events))
            .with_state(self.clone())
    }
}

pub struct GatewayObserver {
    gw: Gateway,
}

impl SessionObserver for GatewayObserver {
    fn notify(&mut self, view: &SessionView, event: SessionEvent<'_>) {
        let inner = &self.gw.inner;
        // Publish while holding the lock so subscribers see history and live
        // events without gaps or duplicates.
        let mut snap = inner.snapshot.write().expect("snapshot lock");
        snap.version += 1;
        snap.view = view.clone();
        match event {
            SessionEvent::Waiting => {}
            SessionEvent::Step(step) => {
                snap.steps.push(step.clone());
                let _ = inner.events.send(StreamItem::Step(Box::new(step.clone())));
            }
            SessionEvent::Finished(_) => {
                let _ = inner.events.send(StreamItem::Finished(Box::new(view.clone())));
            }
        }
    }
}

async fn get_session(State(gw): State<Gateway>) -> Json<SessionSnapshot> {
    Json(gw.snapshot())
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: msg.into() })).into_response()
}

async fn post_action(State(gw): State<Gateway>, body: Result<Json<OperatorAction>, axum::extract::rejection::JsonRejection>) -> Response {
    let Json(action) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e.body_text()),
    };
    if gw.snapshot().view.status == SessionStatus::Finished {
        return error(StatusCode::CONFLICT, "session finished");
    }
    let (reply_tx, reply_rx) = mpsc::channel::<OperatorEvent>();
    let sent = gw
        .inner
        .console
        .lock()
        .expect("console lock")
        .send(ConsoleRequest {
            choice: action.into(),
            reply: Some(reply_tx),
        });
    if sent.is_err() {
        return error(StatusCode::CONFLICT, "session is not accepting operator actions");
    }
    let window = gw.reply_window;
    let reply = tokio::task::spawn_blocking(move || reply_rx.recv_timeout(window))
        .await
        .expect("reply waiter");
    match reply {
        Ok(event) => (StatusCode::OK, Json(event)).into_response(),
        Err(_) => (StatusCode::ACCEPTED, Json(serde_json::json!({ "status": "queued" }))).into_response(),
    }
}

fn to_event(item: &StreamItem) -> Event {
    match item {
        StreamItem::Step(s) => Event::default()
            .event("step")
            .id(s.iteration.to_string())
            .data(serde_json::to_string(s).expect("step serializes")),
        StreamItem::Finished(v) => Event::default()
            .event("finished")
            .data(serde_json::to_string(v).expect("view serializes")),
    }
}

async fn get_events(State(gw): State<Gateway>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let (history, finished, rx) = {
        let snap = gw.inner.snapshot.read().expect("snapshot lock");
        let rx = gw.inner.events.subscribe();
        let finished = (snap.view.status == SessionStatus::Finished).then(|| snap.view.clone());
        (snap.steps.clone(), finished, rx)
    };
    let mut past: Vec<StreamItem> = history.into_iter().map(|s| StreamItem::Step(Box::new(s))).collect();
    let done = finished.is_some();
    if let Some(v) = finished {
        past.push(StreamItem::Finished(Box::new(v)));
    }
    let live = stream::unfold((rx, done), |(mut rx, done)| async move {
        if done {
            return None;
        }
        loop {
            match rx.recv().await {
                Ok(item) => {
                    let end = matches!(item, StreamItem::Finished(_));
                    return Some((item, (rx, end)));
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(n, "event subscriber lagged; client should refetch /session");
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    let all = stream::iter(past).chain(live).map(|item| Ok(to_event(&item)));
    Sse::new(all).keep_alive(KeepAlive::default())
}

/// Serves the gateway on `listener` until the future is dropped.
pub async fn serve(listener: tokio::net::TcpListener, gw: Gateway) -> std::io::Result<()> {
    axum::serve(listener, gw.router()).await
}
