//! HTTP service: case upload, solving and asynchronous explanation jobs.

pub mod decode;
pub mod error;
pub mod model;
pub mod routes;
pub mod state;

use std::net::SocketAddr;
use std::sync::Arc;

pub use routes::router;
pub use state::{AppState, ServiceConfig};

/// Binds `0.0.0.0:port` and serves until the process ends.
pub async fn serve(state: Arc<AppState>, port: u16) -> std::io::Result<()> {
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
