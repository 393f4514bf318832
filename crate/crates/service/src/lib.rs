//! HTTP service for the listening experiment: hands out sessions of tasks,
//! streams stimuli, and appends every answer to a durable log that scores
//! are recomputed from.

use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

pub mod api;
pub mod config;
pub mod session;
pub mod store;

pub use api::{router, AnswerAck, AppState, SessionSummary, TaskAssignment};
pub use config::{ServiceConfig, TASKS_PER_SESSION};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] latentscope_core::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Config(String),
}

impl ServiceError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ServiceError::Io { path: path.to_path_buf(), source }
    }
}

/// A bound server, not yet accepting.
pub struct Server {
    listener: tokio::net::TcpListener,
    state: AppState,
}

impl Server {
    pub async fn bind(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let state = AppState::open(config)?;
        let listener = tokio::net::TcpListener::bind(config.addr)
            .await
            .map_err(|e| ServiceError::Config(format!("cannot bind {}: {e}", config.addr)))?;
        Ok(Server { listener, state })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
        axum::serve(self.listener, router(self.state))
            .with_graceful_shutdown(shutdown)
            .await
    }
}
