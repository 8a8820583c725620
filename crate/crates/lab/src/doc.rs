//! Versioned JSON documents for environment and class files.

use anyhow::{bail, Context as _, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// Version written by this build. Loading rejects any other value.
pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize)]
struct Versioned<'a, T> {
    format_version: u64,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with a `format_version` field next to the body's own fields.
pub fn to_versioned<T: Serialize>(body: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Versioned { format_version: FORMAT_VERSION, body }).expect("documents always serialize");
    s.push('\n');
    s
}

pub fn from_versioned<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut value: Value = serde_json::from_str(text)?;
    let Some(map) = value.as_object_mut() else { bail!("expected a JSON object") };
    match map.remove("format_version") {
        None => bail!("missing format_version"),
        Some(v) if v.as_u64() == Some(FORMAT_VERSION) => {}
        Some(v) => bail!("unsupported format_version {v} (this build reads {FORMAT_VERSION})"),
    }
    serde_json::from_value(value).context("document body")
}
