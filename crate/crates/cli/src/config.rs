//! Provenance attached to every artifact.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{Map, Value};

/// Version of the JSON layout documented in `docs/schemas.md`.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeSource {
    File(String),
    Generator {
        kind: &'static str,
        #[serde(skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        h: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
    },
}

impl TreeSource {
    pub fn file(p: &Path) -> Self {
        TreeSource::File(p.display().to_string())
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitSource {
    File(String),
    Uniform { seed: u64 },
}

impl InitSource {
    pub fn file(p: &Path) -> Self {
        InitSource::File(p.display().to_string())
    }
}

/// Everything needed to rerun a command. The worker count is left out on
/// purpose: outputs do not depend on it.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub tree: Option<TreeSource>,
    pub init: Option<InitSource>,
    pub trials: Option<u64>,
    pub budget: Option<u128>,
    pub format: &'static str,
    pub output: Option<String>,
    /// Command-specific settings.
    pub params: Map<String, Value>,
}

impl RunConfig {
    pub fn new(command: &'static str, output: Option<&Path>) -> Self {
        RunConfig {
            command,
            tree: None,
            init: None,
            trials: None,
            budget: None,
            format: "json",
            output: output.map(|p| p.display().to_string()),
            params: Map::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("plain values serialise");
        self.params.insert(key.to_string(), v);
    }
}

/// The JSON envelope. `generated_at` is the only field that changes
/// between identical runs.
#[derive(Serialize)]
pub struct Artifact<'a, T> {
    pub generated_at: u64,
    pub tool: &'static str,
    pub version: &'static str,
    pub schema: u32,
    pub config: &'a RunConfig,
    pub seed: Option<u64>,
    pub result: T,
}

impl<'a, T> Artifact<'a, T> {
    pub fn new(config: &'a RunConfig, seed: Option<u64>, result: T) -> Self {
        Artifact {
            generated_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            tool: "majlab",
            version: env!("CARGO_PKG_VERSION"),
            schema: SCHEMA_VERSION,
            config,
            seed,
            result,
        }
    }
}
