//! Run configuration: a TOML file, then `key.path=value` overrides, then
//! dedicated flags. Unknown keys are rejected at every layer.

use std::path::Path;

use headsplat::io::SyntheticConfig;
use headsplat::optim::OptimConfig;
use headsplat::psm::SamplingConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemplateConfig {
    pub rings: usize,
    pub segments: usize,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        let p = headsplat::morphable::BlockheadParams::default();
        TemplateConfig {
            rings: p.rings,
            segments: p.segments,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Every n-th frame is held out from training; 0 trains on all frames.
    pub holdout_every: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { holdout_every: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServeSection {
    pub host: String,
    pub port: u16,
    pub width: u32,
    pub height: u32,
    /// Fixed frame rate; 0 pushes frames only on change.
    pub fps: f64,
    pub credit_window: u32,
    pub bench_frames: usize,
    pub bench_gaussians: usize,
}

impl Default for ServeSection {
    fn default() -> Self {
        ServeSection {
            host: "127.0.0.1".into(),
            port: 8080,
            width: 256,
            height: 256,
            fps: 0.0,
            credit_window: headsplat_server::service::DEFAULT_CREDIT_WINDOW,
            bench_frames: 60,
            bench_gaussians: 20_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seeds every random stage; `optim.seed` always mirrors it.
    pub seed: u64,
    pub template: TemplateConfig,
    pub synthetic: SyntheticConfig,
    pub sampling: SamplingConfig,
    pub optim: OptimConfig,
    pub eval: EvalConfig,
    pub serve: ServeSection,
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(text: &str) -> Value {
    match format!("v = {text}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("single key"),
        Err(_) => Value::String(text.to_string()),
    }
}

pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::usage(format!("bad override key {key:?}")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::usage(format!("override {key:?}: {p} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

/// Integer literals are accepted where floats are expected.
fn widen_integers(value: &mut Value, template: &Value) {
    if let (Value::Integer(i), Value::Float(_)) = (&*value, template) {
        *value = Value::Float(*i as f64);
        return;
    }
    match (value, template) {
        (Value::Table(t), Value::Table(d)) => {
            for (k, v) in t.iter_mut() {
                if let Some(dv) = d.get(k) {
                    widen_integers(v, dv);
                }
            }
        }
        (Value::Array(a), Value::Array(d)) => {
            if let Some(dv) = d.first() {
                for v in a.iter_mut() {
                    widen_integers(v, dv);
                }
            }
        }
        _ => {}
    }
}

pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut table = match file {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| CliError::usage(format!("config {}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| CliError::usage(format!("config {}: {}", p.display(), e.message())))?
        }
        None => Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let mut value = Value::Table(table);
    let defaults = Value::try_from(RunConfig::default()).expect("defaults serialize");
    widen_integers(&mut value, &defaults);
    let explicit_optim_seed = value.get("optim").and_then(|o| o.get("seed")).is_some();
    let mut cfg: RunConfig = value
        .try_into()
        .map_err(|e: toml::de::Error| CliError::usage(format!("config: {}", e.message())))?;
    if explicit_optim_seed && cfg.optim.seed != cfg.seed {
        return Err(CliError::usage("set the top-level seed instead of optim.seed"));
    }
    cfg.optim.seed = cfg.seed;
    cfg.optim
        .validate()
        .map_err(|e| CliError::usage(format!("config: {e}")))?;
    Ok(cfg)
}
