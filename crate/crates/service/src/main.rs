use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use clap::Parser;
use nbcd_core::GibbsConfig;
use nbcd_service::{router, AppState, Store};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "nbcd-service", version, about = "Live dual-agent dose-finding trial service")]
struct Args {
    /// Directory holding the per-trial logs.
    #[arg(long, env = "NBCD_DATA_DIR", default_value = "./nbcd-data")]
    data_dir: PathBuf,
    #[arg(long, env = "NBCD_BIND", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Shared bearer token required on /v1 when set.
    #[arg(long, env = "NBCD_TOKEN", hide_env_values = true)]
    token: Option<String>,
    /// Built UI assets served at the root.
    #[arg(long, env = "NBCD_STATIC_DIR")]
    static_dir: Option<PathBuf>,
    /// Default kept draws per posterior chain for new trials.
    #[arg(long, env = "NBCD_SAMPLES", default_value_t = 10_000)]
    samples: usize,
    #[arg(long, env = "NBCD_BURN_IN", default_value_t = 1_000)]
    burn_in: usize,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into())).init();
    let args = Args::parse();
    let gibbs = GibbsConfig { n_samples: args.samples, burn_in: args.burn_in, seed: 0 };
    gibbs.validate()?;
    let store = Store::open(&args.data_dir, gibbs).with_context(|| format!("opening {}", args.data_dir.display()))?;
    let app = AppState { store: Arc::new(store), token: args.token.map(Into::into) };
    let listener = tokio::net::TcpListener::bind(args.bind).await.with_context(|| format!("binding {}", args.bind))?;
    tracing::info!("listening on {}", args.bind);
    axum::serve(listener, router(app, args.static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
