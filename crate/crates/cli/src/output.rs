//! Writing results and the metadata block that accompanies every run.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliResult;

pub const SCHEMA_VERSION: u32 = 1;

pub fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Tool, version and the fully resolved configuration of a run.
pub fn metadata<C: Serialize>(command: &str, config: &C) -> Value {
    json!({
        "tool": "msupport",
        "version": env!("CARGO_PKG_VERSION"),
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
    })
}

pub fn json_text<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(err)?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or to stdout when it is `None`.
pub fn write_out(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(err)
        }
    }
}

/// Next to a file output as `<path>.meta.json`; on stderr for stdout output.
pub fn write_sidecar_metadata(path: Option<&Path>, meta: &Value) -> CliResult<()> {
    let text = json_text(meta)?;
    match path {
        Some(p) => {
            let mut name = p.as_os_str().to_owned();
            name.push(".meta.json");
            let side = PathBuf::from(name);
            std::fs::write(&side, text).map_err(|e| format!("cannot write {}: {e}", side.display()))
        }
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x}")
    }
}
