use std::net::SocketAddr;
use std::path::PathBuf;

/// Sessions hold this many tasks unless configured otherwise.
pub const TASKS_PER_SESSION: u32 = 15;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    /// Stimulus manifest; must carry the grid geometry.
    pub manifest_path: PathBuf,
    /// Append-only session and answer log.
    pub log_path: PathBuf,
    pub admin_key: String,
    /// Seeds the generator that hands each new session its own seed.
    pub seed: u64,
    pub tasks_per_session: u32,
    /// Served under `/` when set (participant front end).
    pub static_dir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(
        addr: SocketAddr,
        manifest_path: impl Into<PathBuf>,
        log_path: impl Into<PathBuf>,
        admin_key: impl Into<String>,
    ) -> Self {
        ServiceConfig {
            addr,
            manifest_path: manifest_path.into(),
            log_path: log_path.into(),
            admin_key: admin_key.into(),
            seed: 2013,
            tasks_per_session: TASKS_PER_SESSION,
            static_dir: None,
        }
    }
}
