//! TOML experiment configuration: a preset base, an optional file merged on
//! top, then `key=value` overrides.
//!
//! Every key must already exist in the preset, so typos are reported with
//! their full dotted path. Integers are accepted wherever a float is expected.

use std::fmt::Write as _;

use serde::Deserialize;
use toml::{Table, Value};

use crate::decoder::DecoderWeights;
use crate::device::{CoherentErrorModel, DeviceParams, RawDevice};
use crate::error::{Error, Result};
use crate::protocol::{CorrectionModel, ExperimentConfig, ProtocolKind};
use crate::qubit::DataBits;

pub const DEFAULT_PRESET: &str = "table-s1";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    device: RawDevice,
    experiment: RawExperiment,
    decoder: RawDecoder,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    protocol: String,
    n_cycles: usize,
    n_trajectories: u64,
    master_seed: u64,
    initial_state: String,
    error_model: String,
    noisy_dec_correction: bool,
    correction_model: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecoder {
    w_data: f64,
    w_meas: f64,
}

fn config_error(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// Annotated TOML for a full configuration.
pub fn to_annotated_toml(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[experiment]");
    let _ = writeln!(s, "protocol = \"{}\"", cfg.protocol);
    let _ = writeln!(s, "n_cycles = {}", cfg.n_cycles);
    let _ = writeln!(s, "n_trajectories = {}", cfg.n_trajectories);
    let _ = writeln!(s, "master_seed = {}", cfg.master_seed);
    let _ = writeln!(s, "initial_state = \"{}\"", cfg.initial_state);
    let _ = writeln!(s, "error_model = \"{}\"", cfg.error_model);
    let _ = writeln!(s, "noisy_dec_correction = {}", cfg.noisy_dec_correction);
    let _ = writeln!(s, "correction_model = \"{}\"", cfg.correction_model);
    let _ = writeln!(s, "\n[decoder]");
    let _ = writeln!(s, "w_data = {:?}", cfg.weights.w_data());
    let _ = writeln!(s, "w_meas = {:?}", cfg.weights.w_meas());
    let _ = writeln!(s);
    s.push_str(&cfg.params.to_annotated_toml());
    s
}

/// Default experiment on a named device preset.
pub fn preset_config(name: &str) -> Result<ExperimentConfig> {
    let params = DeviceParams::preset(name)
        .ok_or_else(|| config_error("preset", format!("unknown preset `{name}`")))?;
    let mut cfg = ExperimentConfig::new(ProtocolKind::Dec, 3, params);
    cfg.n_trajectories = 10_000;
    Ok(cfg)
}

/// Builds a configuration from a preset, optional file contents and
/// `key=value` overrides, in that order. A top-level `preset` key in the file
/// replaces `preset`.
pub fn load(preset: &str, file: Option<&str>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut file_table = match file {
        Some(text) => text
            .parse::<Table>()
            .map_err(|e| Error::Parse(format!("config file: {e}")))?,
        None => Table::new(),
    };
    let preset = match file_table.remove("preset") {
        Some(Value::String(name)) => name,
        Some(_) => return Err(config_error("preset", "expected a string")),
        None => preset.to_string(),
    };
    let mut base = to_annotated_toml(&preset_config(&preset)?)
        .parse::<Table>()
        .expect("generated config is valid TOML");
    merge(&mut base, file_table, "")?;
    for o in overrides {
        apply_override(&mut base, o)?;
    }
    from_table(base)
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Replaces `slot` by `value`, coercing integers where a float is expected.
fn assign(slot: &mut Value, value: Value, path: &str) -> Result<()> {
    let value = match (&*slot, value) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (Value::Table(_), _) => return Err(config_error(path, "is a section, not a value")),
        (_, v) => v,
    };
    if slot.type_str() != value.type_str() {
        return Err(config_error(
            path,
            format!("expected {}, found {}", slot.type_str(), value.type_str()),
        ));
    }
    *slot = value;
    Ok(())
}

fn merge(base: &mut Table, overlay: Table, prefix: &str) -> Result<()> {
    for (key, value) in overlay {
        let path = join(prefix, &key);
        let slot = base
            .get_mut(&key)
            .ok_or_else(|| config_error(&path, "unknown key"))?;
        match (slot, value) {
            (Value::Table(b), Value::Table(o)) => merge(b, o, &path)?,
            (slot, value) => assign(slot, value, &path)?,
        }
    }
    Ok(())
}

/// Applies one `dotted.key=value` override. Values are TOML literals; bare
/// words are taken as strings.
pub fn apply_override(base: &mut Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("override `{spec}` is not key=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let mut parts = path.split('.').peekable();
    let mut table = base;
    while let Some(part) = parts.next() {
        let part = part.trim_matches('"');
        let slot = table
            .get_mut(part)
            .ok_or_else(|| config_error(path, "unknown key"))?;
        if parts.peek().is_none() {
            return assign(slot, value, path);
        }
        table = match slot {
            Value::Table(t) => t,
            _ => return Err(config_error(path, "unknown key")),
        };
    }
    Err(config_error(path, "empty key"))
}

fn from_table(table: Table) -> Result<ExperimentConfig> {
    let raw: RawConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Parse(format!("config: {e}")))?;
    let e = raw.experiment;
    let protocol = e.protocol.parse::<ProtocolKind>().map_err(|_| {
        config_error(
            "experiment.protocol",
            format!("unknown protocol `{}`", e.protocol),
        )
    })?;
    let initial_state = e
        .initial_state
        .parse::<DataBits>()
        .map_err(|_| config_error("experiment.initial_state", "expected three binary digits"))?;
    let error_model = e
        .error_model
        .parse::<CoherentErrorModel>()
        .map_err(|_| config_error("experiment.error_model", "expected `e1` or `e2`"))?;
    let correction_model = e.correction_model.parse::<CorrectionModel>().map_err(|_| {
        config_error(
            "experiment.correction_model",
            "expected `incoherent` or `coherent-zz`",
        )
    })?;
    let weights = DecoderWeights::new(raw.decoder.w_data, raw.decoder.w_meas)
        .map_err(|_| config_error("decoder", "weights must be finite and positive"))?;
    let cfg = ExperimentConfig {
        protocol,
        n_cycles: e.n_cycles,
        n_trajectories: e.n_trajectories,
        master_seed: e.master_seed,
        initial_state,
        error_model,
        weights,
        params: DeviceParams::from_raw(&raw.device)?,
        noisy_dec_correction: e.noisy_dec_correction,
        correction_model,
    };
    if !(1..=crate::decoder::MAX_ROUNDS).contains(&cfg.n_cycles) {
        return Err(config_error(
            "experiment.n_cycles",
            Error::RoundsOutOfRange(cfg.n_cycles).to_string(),
        ));
    }
    cfg.validate()?;
    Ok(cfg)
}
