//! Async client for the covbal allocation service. One method per endpoint;
//! non-2xx responses surface as [`ClientError::Api`] with the decoded error body.

use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;

use covbal_api::{
    AllocateRequest, AllocateResponse, ApiError, CreateTrialRequest, CreateTrialResponse, EnrollRequest,
    EnrollmentEvent, EventLogView, HealthResponse, MetricsRequest, SimulateRequest, SimulateResponse, TrialSummary,
    TrialView,
};
use covbal_core::metrics::MetricReport;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("{}: {} (HTTP {status})", body.code, body.message)]
    Api { status: StatusCode, body: ApiError },

    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
}

impl ClientError {
    /// The service's error code, if the service answered.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { body, .. } => Some(&body.code),
            ClientError::Transport(_) => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8077`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn call<B: Serialize + ?Sized, T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<&B>,
    ) -> Result<T> {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        let body = serde_json::from_str(&text).unwrap_or_else(|_| ApiError {
            code: "http_error".into(),
            message: if text.is_empty() { status.to_string() } else { text },
            detail: serde_json::Value::Null,
        });
        Err(ClientError::Api { status, body })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        self.call::<(), T>(Method::GET, path, None).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        self.call(Method::POST, path, Some(body)).await
    }

    pub async fn health(&self) -> Result<HealthResponse> {
        self.get("/healthz").await
    }

    pub async fn create_trial(&self, req: &CreateTrialRequest) -> Result<CreateTrialResponse> {
        self.post("/trials", req).await
    }

    pub async fn list_trials(&self) -> Result<Vec<TrialSummary>> {
        self.get("/trials").await
    }

    pub async fn enroll(&self, id: &str, req: &EnrollRequest) -> Result<EnrollmentEvent> {
        self.post(&format!("/trials/{id}/enroll"), req).await
    }

    pub async fn trial(&self, id: &str) -> Result<TrialView> {
        self.get(&format!("/trials/{id}")).await
    }

    pub async fn events(&self, id: &str) -> Result<EventLogView> {
        self.get(&format!("/trials/{id}/events")).await
    }

    pub async fn allocate(&self, req: &AllocateRequest) -> Result<AllocateResponse> {
        self.post("/allocate", req).await
    }

    pub async fn metrics(&self, req: &MetricsRequest) -> Result<MetricReport> {
        self.post("/metrics", req).await
    }

    pub async fn simulate(&self, req: &SimulateRequest) -> Result<SimulateResponse> {
        self.post("/simulate", req).await
    }
}
