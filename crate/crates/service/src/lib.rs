//! HTTP boundary for litnav: session lifecycle, data endpoints for the UI
//! and corpus upload, plus the adapters for remote model providers.

pub mod app;
pub mod config;
pub mod payload;
pub mod remote;
pub mod store;

use std::net::SocketAddr;
use std::sync::Arc;

use litnav_core::agent::{Assets, LlmProvider, ScriptError, ScriptedProvider, StubProvider, SystemClock};
use litnav_core::embed::{EmbeddingProvider, StubEmbedder};
use litnav_core::mining::MiningParams;

pub use app::{router, ApiError, AppState, MessagesReply, Parts, StartupError, UploadReply};
pub use config::{ConfigError, ProviderKind, ServiceConfig};
pub use payload::{Landscape, LandscapePoint, LandscapeTopic, TopicBundle};

/// Providers named by the configuration, with the system clock.
pub fn parts_from_config(config: &ServiceConfig) -> Result<Parts, ScriptError> {
    let provider: Arc<dyn LlmProvider> = match &config.provider {
        ProviderKind::Stub => Arc::new(StubProvider),
        ProviderKind::Scripted { script } => Arc::new(ScriptedProvider::from_file(script)?),
        ProviderKind::Remote { endpoint, key } => Arc::new(remote::RemoteLlm::new(endpoint, key.clone())),
    };
    let embedder: Arc<dyn EmbeddingProvider> = match &config.embed_endpoint {
        Some(url) => Arc::new(remote::RemoteEmbedder::new(url, config.provider_key().map(String::from))),
        None => Arc::new(StubEmbedder),
    };
    Ok(Parts {
        provider,
        embedder,
        clock: Arc::new(SystemClock),
        assets: Arc::new(Assets::builtin()),
        params: MiningParams::default(),
    })
}

/// Serves until ctrl-c.
pub async fn serve(app: Arc<AppState>) -> std::io::Result<()> {
    let addr = SocketAddr::from(([0, 0, 0, 0], app.config().port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
