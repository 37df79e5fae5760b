use std::io::IsTerminal;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use phylodb_core::domain::Role;
use phylodb_server::auth::HmacTokens;
use phylodb_server::config::Config;

#[derive(Parser)]
#[command(name = "phylodb", version, about = "Phylogenetic typing data server")]
struct Cli {
    /// TOML configuration file. PHYLODB_* variables override its values.
    #[arg(short, long, global = true, env = "PHYLODB_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    User,
    Admin,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP server.
    Serve {
        /// Listen address, e.g. 127.0.0.1:8080.
        #[arg(long)]
        listen: Option<std::net::SocketAddr>,
        /// Store directory.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Print a bearer token signed with the configured secret.
    Token {
        #[arg(long)]
        sub: String,
        #[arg(long, value_enum, default_value = "user")]
        role: RoleArg,
        /// Lifetime in seconds.
        #[arg(long, default_value_t = 3600)]
        ttl: i64,
    },
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Serve { listen, store } => {
            tracing_subscriber::fmt()
                .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
                .with_ansi(std::io::stdout().is_terminal())
                .init();
            if let Some(l) = listen {
                config.listen = l;
            }
            if let Some(s) = store {
                config.store = s;
            }
            let (state, worker) = tokio::task::block_in_place(|| phylodb_server::open(&config))?;
            let listener = tokio::net::TcpListener::bind(config.listen)
                .await
                .with_context(|| format!("binding {}", config.listen))?;
            tracing::info!("listening on {}", config.listen);
            axum::serve(listener, phylodb_server::router(state))
                .with_graceful_shutdown(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
            tokio::task::spawn_blocking(move || worker.stop()).await?;
        }
        Command::Token { sub, role, ttl } => {
            config.validate()?;
            let role = match role {
                RoleArg::User => Role::User,
                RoleArg::Admin => Role::Admin,
            };
            println!("{}", HmacTokens::new(&config.token_secret).mint(&sub, role, ttl));
        }
    }
    Ok(())
}
