use clap::Parser;
use holoforge_gateway::{start, Cli, GatewayConfig};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let cli = Cli::parse();
    let config = GatewayConfig::from_cli(&cli)?;
    let running = start(config).await?;
    println!("holoforge listening on http://{}", running.addr);
    tokio::signal::ctrl_c().await?;
    running.stop().await?;
    Ok(())
}
