//! Output files. Every file embeds the run configuration and is written
//! atomically through a temporary sibling and a rename.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sps_core::Result;

use crate::config::RunConfig;

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// `{"command", "config", "result"}` as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, command: &str, config: &RunConfig, result: &T) -> Result<()> {
    let value = json!({
        "command": command,
        "config": config,
        "result": result,
    });
    let text = serde_json::to_string_pretty(&value).map_err(|e| sps_core::Error::Parse(e.to_string()))?;
    write_atomic(path, &(text + "\n"))
}

/// A `# config: {...}` line with the configuration as JSON, then `body`.
pub fn with_config_header(config: &RunConfig, body: &str) -> String {
    let json = serde_json::to_string(config).expect("config serialises");
    format!("# config: {json}\n{body}")
}

pub fn write_csv(path: &Path, config: &RunConfig, body: &str) -> Result<()> {
    write_atomic(path, &with_config_header(config, body))
}

/// `1.4e-2` becomes `1p4e-2`, safe in file names.
pub fn eps_tag(eps: f64) -> String {
    format!("{eps:e}").replace('.', "p")
}
