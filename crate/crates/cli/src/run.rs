//! Output directory bookkeeping and the manifest every report embeds.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use confgauge_core::{bundled, MetricSpec};
use serde::Serialize;
use serde_json::Value;

/// Input rejected before any computation; maps to exit code 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Carries no timestamps, so two runs with the same inputs write identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub spec: Option<String>,
    pub overrides: BTreeMap<String, Value>,
    pub version: String,
    pub seed: u64,
    pub outputs: Vec<String>,
}

pub struct Run {
    dir: PathBuf,
    pub manifest: RunManifest,
}

impl Run {
    pub fn new(command: &str, spec: Option<&str>, seed: u64, out: &Path) -> Result<Run> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Run {
            dir: out.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                spec: spec.map(str::to_string),
                overrides: BTreeMap::new(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed,
                outputs: Vec::new(),
            },
        })
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("plain data serializes");
        self.manifest.overrides.insert(key.to_string(), v);
    }

    fn register(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.manifest.outputs.push(path.display().to_string());
        path
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.register(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `{"manifest": .., ..body}` last, so the manifest lists every output.
    pub fn report(&mut self, name: &str, body: Value) -> Result<Value> {
        let path = self.register(name);
        let mut map = serde_json::Map::new();
        map.insert("manifest".into(), serde_json::to_value(&self.manifest)?);
        match body {
            Value::Object(m) => map.extend(m),
            other => {
                map.insert("result".into(), other);
            }
        }
        let doc = Value::Object(map);
        fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(doc)
    }
}

/// A path that exists is read as a file; anything else is looked up among the bundled specs.
pub fn load_spec(arg: Option<&str>) -> Result<MetricSpec> {
    let arg = arg.ok_or_else(|| usage("this command needs --spec"))?;
    let path = Path::new(arg);
    if path.exists() {
        return Ok(MetricSpec::from_path(path)?);
    }
    if bundled::source(arg).is_some() {
        return Ok(bundled::bundled(arg)?);
    }
    Err(usage(format!("spec `{arg}` is neither a file nor a bundled spec ({})", bundled::names().join(", "))))
}

pub fn num(v: f64) -> String {
    v.to_string()
}
