//! HTTP service for live covariate-adaptive trials.
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | GET | `/healthz` | | `HealthResponse` |
//! | POST | `/trials` | `CreateTrialRequest` | 201 `CreateTrialResponse` |
//! | GET | `/trials` | | `[TrialSummary]` |
//! | POST | `/trials/{id}/enroll` | `EnrollRequest` | `EnrollmentEvent` |
//! | GET | `/trials/{id}` | | `TrialView` |
//! | GET | `/trials/{id}/events` | | `EventLogView` |
//! | POST | `/allocate` | `AllocateRequest` | `AllocateResponse` |
//! | POST | `/metrics` | `MetricsRequest` | `MetricReport` |
//! | POST | `/simulate` | `SimulateRequest` | `SimulateResponse` |
//!
//! Errors carry an `ApiError` body. Status codes: 400 malformed JSON, 404
//! unknown trial, 409 full trial or constant column, 422 any other domain
//! error, 500 storage failure or corrupt log.

pub mod config;
pub mod error;
pub mod live;
pub mod routes;
pub mod store;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::Router;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

pub use config::{SeedPolicy, ServiceConfig};
pub use error::{Result, ServiceError};
pub use live::LiveTrial;
pub use routes::AppState;
pub use store::Store;

/// The full application: API routes plus the optional static console.
pub fn app(store: Arc<Store>, config: &ServiceConfig) -> Router {
    let api = routes::router(AppState {
        store,
        seed_policy: config.seed_policy,
    });
    match &config.console_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// A bound, not yet running server.
pub struct Server {
    listener: TcpListener,
    router: Router,
}

impl Server {
    /// Open the store (replaying every log) and bind the listen address.
    pub async fn bind(config: &ServiceConfig) -> Result<Self> {
        let data_dir = config.data_dir.clone();
        let store = tokio::task::spawn_blocking(move || Store::open(data_dir))
            .await
            .map_err(|e| ServiceError::Storage(e.to_string()))??;
        let listener = TcpListener::bind(config.listen).await?;
        Ok(Self {
            listener,
            router: app(Arc::new(store), config),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<()> {
        axum::serve(self.listener, self.router)
            .with_graceful_shutdown(shutdown)
            .await?;
        Ok(())
    }
}
