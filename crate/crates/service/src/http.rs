//! axum front end over [`ApiService::handle`].

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::http::{header, HeaderMap, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use tokio::net::TcpListener;

use crate::api::{ApiService, WireResponse};
use crate::wire::CONTENT_TYPE;

/// Largest accepted request body.
pub const MAX_BODY_BYTES: usize = 64 * 1024;

pub fn router(service: Arc<ApiService>) -> Router {
    Router::new()
        .fallback(move |method: Method, uri: Uri, headers: HeaderMap, body: Bytes| {
            let service = service.clone();
            async move { dispatch(service, method, uri, headers, body).await }
        })
        .layer(axum::extract::DefaultBodyLimit::max(MAX_BODY_BYTES))
}

async fn dispatch(service: Arc<ApiService>, method: Method, uri: Uri, headers: HeaderMap, body: Bytes) -> Response {
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned);
    let path = uri.path().to_owned();
    // Store access blocks; keep it off the async workers.
    let out = tokio::task::spawn_blocking(move || {
        service.handle(method.as_str(), &path, content_type.as_deref(), &body)
    })
    .await
    .unwrap_or_else(|e| WireResponse {
        status: 500,
        body: format!(
            "{{\"protocol_version\":\"{}\",\"error_code\":\"internal_error\",\"message\":{}}}",
            crate::wire::PROTOCOL_VERSION,
            serde_json::Value::String(e.to_string())
        ),
    });
    let status = StatusCode::from_u16(out.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, [(header::CONTENT_TYPE, CONTENT_TYPE)], out.body).into_response()
}

/// Serves until `shutdown` resolves, sweeping expired pop-ups every
/// `sweep_every`. In-flight requests finish before this returns.
pub async fn serve(
    listener: TcpListener,
    service: Arc<ApiService>,
    sweep_every: Duration,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let sweeper = {
        let service = service.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(sweep_every.max(Duration::from_millis(10)));
            loop {
                tick.tick().await;
                let s = service.clone();
                match tokio::task::spawn_blocking(move || s.sweep()).await {
                    Ok(Ok((expired, sessions))) if expired + sessions > 0 => {
                        tracing::debug!(expired, sessions, "sweep");
                    }
                    Ok(Err(e)) => tracing::warn!(error = %e, "sweep failed"),
                    _ => {}
                }
            }
        })
    };
    let result = axum::serve(listener, router(service.clone())).with_graceful_shutdown(shutdown).await;
    sweeper.abort();
    // One last sweep so the store reflects the shutdown time.
    let _ = tokio::task::spawn_blocking(move || service.sweep()).await;
    result
}

/// Runs a server on a background thread with its own runtime. Returns the
/// bound address and a handle that stops the server when dropped.
pub fn spawn_background(service: Arc<ApiService>, bind: &str) -> std::io::Result<BackgroundServer> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let listener = runtime.block_on(TcpListener::bind(bind))?;
    let addr = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let handle = std::thread::spawn(move || {
        runtime.block_on(serve(listener, service, Duration::from_secs(60), async {
            let _ = rx.await;
        }))
    });
    Ok(BackgroundServer { addr, stop: Some(tx), handle: Some(handle) })
}

pub struct BackgroundServer {
    pub addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    handle: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl BackgroundServer {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.handle.take() {
            Some(h) => h.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}
