//! Local HTTP service over a live scene.
//!
//! One actor task owns the scene. Handlers send it commands over a bounded
//! queue and await the reply, so mutations are applied one at a time in
//! arrival order. After each mutation the actor publishes an immutable
//! frame snapshot on a watch channel; `GET /v1/frame` and `GET /v1/events`
//! read snapshots without going through the queue.

use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, Request, State};
use axum::http::{HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use phreact_core::chemistry::{default_reservoirs, ChemistryError, PhValue, Solution, SpeciesDb};
use phreact_core::controller::{deposit, run_to_setpoint, ControllerConfig, ControllerError, ControllerTrace};
use phreact_core::materials::{CalibrationSet, MaterialError};
use phreact_core::scene::{load_scenario, Scene, SceneError};
use serde::Deserialize;
use tokio::sync::{mpsc, oneshot, watch};
use tokio_stream::wrappers::IntervalStream;

use crate::wire::{
    DepositRequest, DepositResponse, ErrorBody, ErrorDetail, FrameResponse, IterationEvent, SceneResponse,
    SetpointRequest, SetpointSummary, StepRequest, CLOCK_HEADER,
};

pub const DEFAULT_EVENT_RATE: f64 = 10.0;
const MAX_EVENT_RATE: f64 = 1000.0;
const QUEUE_DEPTH: usize = 64;

/// Everything needed to (re)build the scene.
#[derive(Clone)]
pub struct ServiceConfig {
    pub scenario_text: String,
    pub species: SpeciesDb,
    pub calibration: CalibrationSet,
    pub seed: Option<u64>,
    pub acid: Solution,
    pub base: Solution,
    /// Controller defaults; requests override setpoint and a few knobs.
    pub controller: ControllerConfig,
}

impl ServiceConfig {
    /// Built-in species, default calibration and default reservoirs.
    pub fn with_defaults(scenario_text: &str, seed: Option<u64>) -> Result<Self, ChemistryError> {
        let species = SpeciesDb::builtin();
        let (acid, base) = default_reservoirs(&species)?;
        Ok(Self {
            scenario_text: scenario_text.to_string(),
            species,
            calibration: CalibrationSet::default_synthetic(),
            seed,
            acid,
            base,
            controller: ControllerConfig::default(),
        })
    }

    fn build_scene(&self) -> Result<Scene, ApiError> {
        load_scenario(&self.scenario_text, &self.species, &self.calibration, self.seed)
            .map(|(scene, _)| scene)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_scenario", e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    details: Option<serde_json::Value>,
    clock: f64,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: None,
            clock: 0.0,
        }
    }

    fn at(mut self, clock: f64) -> Self {
        self.clock = clock;
        self
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }

    pub fn code(&self) -> &str {
        self.code
    }

    fn bad_request(rejection: JsonRejection) -> Self {
        let code = match rejection {
            JsonRejection::JsonSyntaxError(_) => "malformed_json",
            JsonRejection::MissingJsonContentType(_) => "unsupported_media_type",
            _ => "invalid_request",
        };
        Self::new(rejection.status(), code, rejection.body_text())
    }

    fn from_chemistry(e: &ChemistryError) -> Self {
        let mut err = Self::new(StatusCode::CONFLICT, "chemistry_error", e.to_string());
        if let ChemistryError::UnreachableSetpoint { target, min, max } = e {
            err.code = "unreachable_setpoint";
            err.details = Some(serde_json::json!({ "target": target, "min": min, "max": max }));
        }
        err
    }

    fn from_controller(e: &ControllerError) -> Self {
        match e {
            ControllerError::Chemistry(c) => Self::from_chemistry(c),
            ControllerError::Config(m) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", m.clone()),
            ControllerError::NotConverged => Self::new(StatusCode::CONFLICT, "not_converged", e.to_string()),
            ControllerError::Target(m) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_target", m.clone()),
        }
    }

    fn from_scene(e: &SceneError) -> Self {
        match e {
            SceneError::Material(m @ MaterialError::OutOfCalibration { ph, min, max }) => {
                let mut err = Self::new(StatusCode::CONFLICT, "out_of_calibration", m.to_string());
                err.details = Some(serde_json::json!({ "ph": ph, "min": min, "max": max }));
                err
            }
            SceneError::Chemistry(c) => Self::from_chemistry(c),
            SceneError::InvalidStep(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_step", e.to_string()),
            SceneError::Event(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_target", e.to_string()),
            _ => Self::new(StatusCode::CONFLICT, "scene_error", e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            clock: self.clock,
            error: ErrorDetail {
                code: self.code.to_string(),
                message: self.message,
                details: self.details,
            },
        };
        let mut resp = (self.status, Json(body)).into_response();
        set_clock(&mut resp, self.clock);
        resp
    }
}

/// JSON body whose clock is also sent as the clock header.
pub struct Clocked<T>(pub f64, pub T);

impl<T: serde::Serialize> IntoResponse for Clocked<T> {
    fn into_response(self) -> Response {
        let mut resp = Json(self.1).into_response();
        set_clock(&mut resp, self.0);
        resp
    }
}

type Reply<T> = oneshot::Sender<Result<T, ApiError>>;

enum Command {
    Describe(Reply<SceneResponse>),
    Setpoint(SetpointRequest, Reply<(ControllerTrace, f64)>),
    Deposit(DepositRequest, Reply<DepositResponse>),
    Step(Option<f64>, Reply<FrameResponse>),
    Reset(Reply<SceneResponse>),
    Tick,
}

struct Actor {
    config: ServiceConfig,
    scene: Scene,
    trace: Option<ControllerTrace>,
    frames: watch::Sender<Arc<FrameResponse>>,
}

impl Actor {
    fn publish(&self) -> FrameResponse {
        let frame = FrameResponse {
            clock: self.scene.clock(),
            frame: self.scene.render_frame(),
        };
        self.frames.send_replace(Arc::new(frame.clone()));
        frame
    }

    fn clock(&self) -> f64 {
        self.scene.clock()
    }

    fn describe(&self) -> SceneResponse {
        SceneResponse {
            clock: self.clock(),
            scene: self.scene.describe(),
        }
    }

    fn setpoint(&mut self, req: SetpointRequest) -> Result<(ControllerTrace, f64), ApiError> {
        let setpoint = PhValue::new(req.target)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", e.to_string()))?;
        let d = &self.config.controller;
        let cfg = ControllerConfig {
            setpoint,
            tolerance: req.tolerance.unwrap_or(d.tolerance),
            sensor_noise_sigma: req.sensor_noise_sigma.unwrap_or(d.sensor_noise_sigma),
            rng_seed: req.seed.unwrap_or(d.rng_seed),
            max_iterations: req.max_iterations.unwrap_or(d.max_iterations),
            ..d.clone()
        };
        // a failed setpoint leaves nothing to deposit
        self.trace = None;
        let trace = run_to_setpoint(&cfg, &self.config.acid, &self.config.base)
            .map_err(|e| ApiError::from_controller(&e))?;
        self.trace = Some(trace.clone());
        Ok((trace, self.clock()))
    }

    fn deposit(&mut self, req: DepositRequest) -> Result<DepositResponse, ApiError> {
        let targets = req
            .targets()
            .map_err(|m| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_target", m))?;
        let trace = self.trace.as_ref().ok_or_else(|| {
            ApiError::new(StatusCode::CONFLICT, "no_setpoint", "no setpoint has been run; POST /v1/setpoint first")
        })?;
        let time = self.clock();
        let event = deposit(trace, targets, time, req.force).map_err(|e| ApiError::from_controller(&e))?;
        let forced = event.forced;
        self.scene.enqueue(event).map_err(|e| ApiError::from_scene(&e))?;
        Ok(DepositResponse {
            clock: time,
            event_time: time,
            mode: req.mode,
            forced,
            pending_events: self.scene.pending_events(),
        })
    }

    fn step(&mut self, dt: Option<f64>) -> Result<FrameResponse, ApiError> {
        let dt = dt.unwrap_or(self.scene.default_dt());
        self.scene.step(dt).map_err(|e| ApiError::from_scene(&e))?;
        Ok(self.publish())
    }

    fn reset(&mut self) -> Result<SceneResponse, ApiError> {
        self.scene = self.config.build_scene()?;
        self.trace = None;
        self.publish();
        Ok(self.describe())
    }

    fn handle(&mut self, cmd: Command) {
        // reply errors only mean the requester went away
        match cmd {
            Command::Describe(tx) => {
                let _ = tx.send(Ok(self.describe()));
            }
            Command::Setpoint(req, tx) => {
                let r = self.setpoint(req).map_err(|e| e.at(self.clock()));
                let _ = tx.send(r);
            }
            Command::Deposit(req, tx) => {
                let r = self.deposit(req).map_err(|e| e.at(self.clock()));
                let _ = tx.send(r);
            }
            Command::Step(dt, tx) => {
                let r = self.step(dt).map_err(|e| e.at(self.clock()));
                let _ = tx.send(r);
            }
            Command::Reset(tx) => {
                let r = self.reset().map_err(|e| e.at(self.clock()));
                let _ = tx.send(r);
            }
            Command::Tick => {
                if let Err(e) = self.step(None) {
                    eprintln!("phreact serve: step failed at t = {}: {}", self.clock(), e.message);
                }
            }
        }
    }
}

/// Cloneable handle to the scene actor.
#[derive(Clone)]
pub struct SceneHandle {
    commands: mpsc::Sender<Command>,
    frames: watch::Receiver<Arc<FrameResponse>>,
}

impl SceneHandle {
    /// Build the scene and start its actor on the current runtime.
    pub fn spawn(config: ServiceConfig) -> Result<Self, ApiError> {
        let scene = config.build_scene()?;
        let initial = FrameResponse {
            clock: scene.clock(),
            frame: scene.render_frame(),
        };
        let (frames_tx, frames_rx) = watch::channel(Arc::new(initial));
        let (tx, mut rx) = mpsc::channel(QUEUE_DEPTH);
        let mut actor = Actor {
            config,
            scene,
            trace: None,
            frames: frames_tx,
        };
        tokio::spawn(async move {
            while let Some(cmd) = rx.recv().await {
                actor.handle(cmd);
            }
        });
        Ok(Self {
            commands: tx,
            frames: frames_rx,
        })
    }

    pub fn latest(&self) -> Arc<FrameResponse> {
        self.frames.borrow().clone()
    }

    fn clock(&self) -> f64 {
        self.frames.borrow().clock
    }

    async fn call<T>(&self, make: impl FnOnce(Reply<T>) -> Command) -> Result<T, ApiError> {
        let gone = || ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "scene_unavailable", "scene actor stopped");
        let (tx, rx) = oneshot::channel();
        self.commands.send(make(tx)).await.map_err(|_| gone())?;
        rx.await.map_err(|_| gone())?
    }

    /// Advance the scene in real time: one default step per `period`.
    pub fn drive(&self, period: Duration) -> tokio::task::JoinHandle<()> {
        let commands = self.commands.clone();
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(period);
            interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            interval.tick().await;
            loop {
                interval.tick().await;
                if commands.send(Command::Tick).await.is_err() {
                    break;
                }
            }
        })
    }
}

fn parse<T>(handle: &SceneHandle, body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(v)| v)
        .map_err(|r| ApiError::bad_request(r).at(handle.clock()))
}

async fn get_scene(State(h): State<SceneHandle>) -> Result<Clocked<SceneResponse>, ApiError> {
    h.call(Command::Describe).await.map(|r| Clocked(r.clock, r))
}

async fn get_frame(State(h): State<SceneHandle>) -> Clocked<FrameResponse> {
    let f = h.latest();
    Clocked(f.clock, f.as_ref().clone())
}

async fn post_setpoint(
    State(h): State<SceneHandle>,
    body: Result<Json<SetpointRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = parse(&h, body)?;
    let (trace, clock) = h.call(|tx| Command::Setpoint(req, tx)).await?;
    let summary = SetpointSummary {
        clock,
        setpoint: trace.setpoint.value(),
        tolerance: trace.tolerance,
        converged: trace.converged,
        iterations: trace.iterations.len(),
        final_ratio: trace.final_ratio(),
        final_ph: trace.final_true_ph(),
    };
    let iterations = trace.iterations.into_iter().map(move |iteration| {
        let data = serde_json::to_string(&IterationEvent { clock, iteration }).expect("serializable");
        Ok::<_, Infallible>(Event::default().event("iteration").data(data))
    });
    let done = Event::default()
        .event("done")
        .data(serde_json::to_string(&summary).expect("serializable"));
    let events = stream::iter(iterations).chain(stream::once(async move { Ok(done) }));
    let mut resp = Sse::new(events).into_response();
    set_clock(&mut resp, clock);
    Ok(resp)
}

async fn post_deposit(
    State(h): State<SceneHandle>,
    body: Result<Json<DepositRequest>, JsonRejection>,
) -> Result<Clocked<DepositResponse>, ApiError> {
    let req = parse(&h, body)?;
    h.call(|tx| Command::Deposit(req, tx)).await.map(|r| Clocked(r.clock, r))
}

async fn post_step(
    State(h): State<SceneHandle>,
    body: Result<Option<Json<StepRequest>>, JsonRejection>,
) -> Result<Clocked<FrameResponse>, ApiError> {
    let body = body.map_err(|r| ApiError::bad_request(r).at(h.clock()))?;
    let dt = body.and_then(|Json(b)| b.dt);
    h.call(|tx| Command::Step(dt, tx)).await.map(|r| Clocked(r.clock, r))
}

async fn post_reset(State(h): State<SceneHandle>) -> Result<Clocked<SceneResponse>, ApiError> {
    h.call(Command::Reset).await.map(|r| Clocked(r.clock, r))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventsQuery {
    /// Frames per second.
    rate: Option<f64>,
}

async fn get_events(
    State(h): State<SceneHandle>,
    query: Result<Query<EventsQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let Query(q) = query.map_err(|r| ApiError::new(r.status(), "invalid_request", r.body_text()).at(h.clock()))?;
    let rate = q.rate.unwrap_or(DEFAULT_EVENT_RATE);
    if !(rate > 0.0 && rate <= MAX_EVENT_RATE) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_request",
            format!("rate must be in (0, {MAX_EVENT_RATE}] frames/s, got {rate}"),
        )
        .at(h.clock()));
    }
    let interval = tokio::time::interval(Duration::from_secs_f64(1.0 / rate));
    let stream = IntervalStream::new(interval).map(move |_| {
        let frame = h.latest();
        let data = serde_json::to_string(frame.as_ref()).expect("serializable");
        Ok(Event::default().event("frame").data(data))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

fn set_clock(resp: &mut Response, clock: f64) {
    if let Ok(v) = HeaderValue::from_str(&clock.to_string()) {
        resp.headers_mut().insert(CLOCK_HEADER, v);
    }
}

/// Stamp responses that do not already carry a clock with the latest one.
async fn stamp_clock(State(h): State<SceneHandle>, req: Request, next: Next) -> Response {
    let mut resp = next.run(req).await;
    if !resp.headers().contains_key(CLOCK_HEADER) {
        set_clock(&mut resp, h.clock());
    }
    resp
}

pub fn router(handle: SceneHandle) -> Router {
    Router::new()
        .route("/v1/scene", get(get_scene))
        .route("/v1/frame", get(get_frame))
        .route("/v1/setpoint", post(post_setpoint))
        .route("/v1/deposit", post(post_deposit))
        .route("/v1/step", post(post_step))
        .route("/v1/reset", post(post_reset))
        .route("/v1/events", get(get_events))
        .layer(middleware::from_fn_with_state(handle.clone(), stamp_clock))
        .with_state(handle)
}
