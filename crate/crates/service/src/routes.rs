use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};

use covbal_api::{
    AllocateRequest, AllocateResponse, CreateTrialRequest, CreateTrialResponse, DatasetPayload, EnrollRequest,
    EnrollmentEvent, EventLogView, HealthResponse, MetricsRequest, SimulateRequest, SimulateResponse, TrialSummary,
    TrialView, SCHEMA_VERSION,
};
use covbal_core::metrics::MetricReport;
use covbal_core::simulator::{allocate_dataset, simulate, Dataset, SimulationPlan, SummaryDocument};
use covbal_core::trial_core::CovariateMatrix;
use covbal_core::Error as CoreError;

use crate::config::SeedPolicy;
use crate::error::{Result, ServiceError};
use crate::store::Store;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub seed_policy: SeedPolicy,
}

type Body<T> = std::result::Result<Json<T>, JsonRejection>;

fn body<T>(payload: Body<T>) -> Result<T> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::BadRequest(e.body_text()))
}

async fn blocking<T, F>(f: F) -> Result<T>
where
    F: FnOnce() -> Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Storage(format!("worker failed: {e}")))?
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/trials", post(create_trial).get(list_trials))
        .route("/trials/{id}", get(get_trial))
        .route("/trials/{id}/enroll", post(enroll))
        .route("/trials/{id}/events", get(get_events))
        .route("/allocate", post(allocate))
        .route("/metrics", post(metrics))
        .route("/simulate", post(run_simulation))
        .with_state(state)
}

async fn health() -> Json<HealthResponse> {
    Json(HealthResponse {
        status: "ok".into(),
        schema_version: SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn create_trial(
    State(app): State<AppState>,
    payload: Body<CreateTrialRequest>,
) -> Result<(StatusCode, Json<CreateTrialResponse>)> {
    let req = body(payload)?;
    let seed = req.seed.unwrap_or_else(|| app.seed_policy.next_seed());
    let header = blocking(move || app.store.create(req, seed)).await?;
    tracing::info!(trial = %header.id, method = %header.config.method, "trial created");
    Ok((
        StatusCode::CREATED,
        Json(CreateTrialResponse {
            schema_version: SCHEMA_VERSION,
            id: header.id,
        }),
    ))
}

async fn list_trials(State(app): State<AppState>) -> Result<Json<Vec<TrialSummary>>> {
    Ok(Json(blocking(move || Ok(app.store.list())).await?))
}

async fn get_trial(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<TrialView>> {
    Ok(Json(blocking(move || app.store.view(&id)).await?))
}

async fn enroll(
    State(app): State<AppState>,
    Path(id): Path<String>,
    payload: Body<EnrollRequest>,
) -> Result<Json<EnrollmentEvent>> {
    let req = body(payload)?;
    Ok(Json(blocking(move || app.store.enroll(&id, req)).await?))
}

async fn get_events(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<EventLogView>> {
    let events = {
        let id = id.clone();
        blocking(move || app.store.events(&id)).await?
    };
    Ok(Json(EventLogView {
        schema_version: SCHEMA_VERSION,
        id,
        events,
    }))
}

fn dataset(payload: DatasetPayload) -> Result<Dataset> {
    let matrix = CovariateMatrix::new(payload.names, payload.rows)?;
    if let Some(ids) = &payload.ids {
        if ids.len() != matrix.n_rows() {
            return Err(CoreError::DimensionMismatch {
                expected: matrix.n_rows(),
                found: ids.len(),
            }
            .into());
        }
    }
    Ok(Dataset {
        ids: payload.ids,
        matrix,
    })
}

async fn allocate(payload: Body<AllocateRequest>) -> Result<Json<AllocateResponse>> {
    let req = body(payload)?;
    let records = blocking(move || Ok(allocate_dataset(&dataset(req.dataset)?, &req.config, req.seed)?)).await?;
    Ok(Json(AllocateResponse {
        schema_version: SCHEMA_VERSION,
        records,
    }))
}

async fn metrics(payload: Body<MetricsRequest>) -> Result<Json<MetricReport>> {
    let req = body(payload)?;
    let report = blocking(move || {
        let data = dataset(req.dataset)?;
        Ok(MetricReport::for_dataset(
            &data.matrix,
            &req.groups,
            req.n0,
            req.permutations,
            req.seed,
            req.raw_scale,
        )?)
    })
    .await?;
    Ok(Json(report))
}

async fn run_simulation(payload: Body<SimulateRequest>) -> Result<Json<SimulateResponse>> {
    let req = body(payload)?;
    let (records, summary) = blocking(move || {
        let mut plan = SimulationPlan::new(dataset(req.dataset)?, req.methods, req.replicates, req.seed);
        plan.shuffle_arrivals = req.shuffle_arrivals;
        plan.jobs = req.jobs;
        let records = simulate(&plan)?;
        let summary = SummaryDocument::build(&plan, &records);
        Ok((records, summary))
    })
    .await?;
    Ok(Json(SimulateResponse {
        schema_version: SCHEMA_VERSION,
        records,
        summary,
    }))
}
