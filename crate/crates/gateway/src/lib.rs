//! HTTP service and command-line driver around `leafdx-core`.

pub mod cli;
pub mod config;
pub mod http;

use config::PipelineConfig;

/// Loads every referenced file and serves until the process is stopped.
pub fn serve(cfg: PipelineConfig) -> anyhow::Result<()> {
    let app = http::app(&cfg)?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(cfg.listen).await?;
        log::info!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app).await?;
        Ok(())
    })
}
