use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use serde::Deserialize;

/// Server settings from an optional TOML file, overridden by `PHYLODB_*`
/// environment variables.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: SocketAddr,
    pub store: PathBuf,
    /// Secret for the local HMAC token provider.
    pub token_secret: String,
    /// Page size when a request gives no `limit`.
    pub page_limit: usize,
    /// Idle wait of the job worker, in milliseconds.
    pub poll_ms: u64,
    /// fsync the commit log on every commit.
    pub sync: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: ([127, 0, 0, 1], 8080).into(),
            store: PathBuf::from("phylodb-data"),
            token_secret: String::new(),
            page_limit: 20,
            poll_ms: 200,
            sync: true,
        }
    }
}

impl Config {
    pub fn load(file: Option<&Path>) -> anyhow::Result<Self> {
        let mut config = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => Config::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> anyhow::Result<()> {
        if let Some(v) = var("PHYLODB_LISTEN") {
            self.listen = v.parse().context("PHYLODB_LISTEN")?;
        }
        if let Some(v) = var("PHYLODB_STORE") {
            self.store = v.into();
        }
        if let Some(v) = var("PHYLODB_TOKEN_SECRET") {
            self.token_secret = v;
        }
        if let Some(v) = var("PHYLODB_PAGE_LIMIT") {
            self.page_limit = v.parse().context("PHYLODB_PAGE_LIMIT")?;
        }
        if let Some(v) = var("PHYLODB_POLL_MS") {
            self.poll_ms = v.parse().context("PHYLODB_POLL_MS")?;
        }
        if let Some(v) = var("PHYLODB_SYNC") {
            self.sync = v.parse().context("PHYLODB_SYNC")?;
        }
        Ok(())
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.token_secret.len() < 16 {
            bail!("token_secret must be at least 16 bytes");
        }
        if !(1..=crate::routes::MAX_LIMIT).contains(&self.page_limit) {
            bail!("page_limit must be between 1 and {}", crate::routes::MAX_LIMIT);
        }
        Ok(())
    }

    pub fn poll_interval(&self) -> Duration {
        Duration::from_millis(self.poll_ms.max(1))
    }
}
