//! File emission: atomic writes and the provenance header.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use firstloss::config::RunConfig;

/// Writes `contents` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// `#`-prefixed copy of the effective config.
pub fn csv_header(cfg: &RunConfig) -> String {
    let mut out = format!("# firstloss {}\n", env!("CARGO_PKG_VERSION"));
    for line in cfg.to_toml().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// A CSV document: header block, column row, data rows.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(cfg: &RunConfig, columns: &[&str]) -> Self {
        let mut text = csv_header(cfg);
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Shortest decimal that round-trips.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// `result` fields with the effective config attached under `config`.
pub fn json_doc(cfg: &RunConfig, result: Value) -> String {
    let mut map = match result {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    map.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("json serializes");
    s.push('\n');
    s
}
