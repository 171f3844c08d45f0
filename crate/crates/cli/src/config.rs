//! Run configuration, scenario presets and flag overrides.

use std::path::{Path, PathBuf};

use franson_core::inequalities::ModelClass;
use franson_core::setups::SetupVariant;
use franson_core::spacetime::StationGeometry;
use franson_core::strategyopt::Budget;
use franson_core::timing::InterferometerTiming;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

pub const SCENARIOS: [&str; 7] =
    ["custom", "table1", "aklz-demo", "chained6", "cross-coupled", "etr-search", "geometry-demo"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Quantum,
    /// The local delay model that reproduces the coincident correlation.
    Aklz,
}

/// Strategy-search settings; unset fields take the library defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertex_limit: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: String,
    pub source: SourceKind,
    /// When set, `simulate` runs this interferometer layout instead of `source`.
    pub variant: Option<SetupVariant>,
    pub terms: usize,
    /// Term counts tabulated by `bounds`.
    pub terms_list: Vec<usize>,
    pub visibility: f64,
    /// Visibilities scanned by `visibility`.
    pub visibility_sweep: Vec<f64>,
    /// Trials per setting pair.
    pub trials: u64,
    pub seed: u64,
    pub model_class: Option<String>,
    pub eta: Option<f64>,
    /// When set, coincidences are found from timestamps with this window.
    pub timing: Option<InterferometerTiming>,
    pub geometry: Option<StationGeometry>,
    pub search: SearchConfig,
    /// Output directory; left out of reports so they depend only on the run.
    #[serde(skip_serializing)]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: "custom".into(),
            source: SourceKind::Quantum,
            variant: None,
            terms: 4,
            terms_list: vec![4, 6, 8, 10, 12],
            visibility: 1.0,
            visibility_sweep: vec![0.9, 0.91, 0.92, 0.93, 0.94, 0.95, 0.96, 0.97, 0.98, 0.99, 1.0],
            trials: 100_000,
            seed: 0,
            model_class: None,
            eta: None,
            timing: None,
            geometry: None,
            search: SearchConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

/// Command-line overrides, applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub terms: Option<usize>,
    pub visibility: Option<f64>,
    pub variant: Option<String>,
    pub model_class: Option<String>,
    pub eta: Option<f64>,
    pub out: Option<PathBuf>,
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let mut c = RunConfig { scenario: name.to_string(), ..RunConfig::default() };
    match name {
        "custom" | "table1" => {}
        "aklz-demo" => {
            c.source = SourceKind::Aklz;
            c.trials = 250_000;
            c.timing = Some(InterferometerTiming::default());
            c.model_class = Some("outcomes-only".into());
        }
        "chained6" => {
            c.terms = 6;
            c.visibility = 0.97;
            c.trials = 1_000_000;
            c.model_class = Some("emission-time-realism".into());
            c.visibility_sweep = vec![0.95, 0.96, 0.97, 0.98, 0.99, 1.0];
        }
        "cross-coupled" => {
            c.variant = Some(SetupVariant::CrossCoupled);
            c.trials = 250_000;
        }
        "etr-search" => {
            c.model_class = Some("emission-time-realism".into());
            c.search.restarts = Some(16);
        }
        "geometry-demo" => {
            c.geometry = Some(StationGeometry::new(100.0, 20.0, 50.0)?);
        }
        other => {
            return Err(CliError::Config(format!("unknown scenario '{other}', expected one of {}", SCENARIOS.join(", "))))
        }
    }
    Ok(c)
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

impl RunConfig {
    /// Builds the effective configuration: scenario preset, then the fields
    /// present in the config file, then command-line flags.
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let text = match file {
            Some(p) => Some(
                std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
            ),
            None => None,
        };
        let patch: Value = match &text {
            Some(t) => serde_json::from_str(t).map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?,
            None => Value::Object(Default::default()),
        };
        if !patch.is_object() {
            return Err(CliError::Config("config must be a JSON object".into()));
        }
        let scenario = flags
            .scenario
            .clone()
            .or_else(|| patch.get("scenario").and_then(Value::as_str).map(String::from))
            .unwrap_or_else(|| "custom".into());
        let mut value = serde_json::to_value(preset(&scenario)?).expect("config serializes");
        merge(&mut value, patch);
        value["scenario"] = Value::String(scenario);
        let mut c: RunConfig = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(v) = flags.seed {
            c.seed = v;
        }
        if let Some(v) = flags.trials {
            c.trials = v;
        }
        if let Some(v) = flags.terms {
            c.terms = v;
        }
        if let Some(v) = flags.visibility {
            c.visibility = v;
        }
        if let Some(v) = &flags.variant {
            c.variant = Some(SetupVariant::parse(v)?);
        }
        if let Some(v) = &flags.model_class {
            c.model_class = Some(v.clone());
        }
        if let Some(v) = flags.eta {
            c.eta = Some(v);
        }
        if let Some(v) = &flags.out {
            c.out = v.clone();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !SCENARIOS.contains(&self.scenario.as_str()) {
            return bad(format!("unknown scenario '{}'", self.scenario));
        }
        if self.terms < 4 || !self.terms.is_multiple_of(2) {
            return bad(format!("terms must be even and >= 4, got {}", self.terms));
        }
        if let Some(t) = self.terms_list.iter().find(|t| **t < 4 || **t % 2 != 0) {
            return bad(format!("terms_list entries must be even and >= 4, got {t}"));
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        for v in std::iter::once(&self.visibility).chain(&self.visibility_sweep) {
            if !(0.0..=1.0).contains(v) {
                return bad(format!("visibility must lie in [0, 1], got {v}"));
            }
        }
        if let Some(t) = &self.timing {
            t.validate()?;
        }
        if let Some(g) = &self.geometry {
            g.validate()?;
        }
        self.model_class()?;
        Ok(())
    }

    pub fn model_class(&self) -> Result<Option<ModelClass>> {
        match &self.model_class {
            Some(name) => Ok(Some(ModelClass::parse(name, self.eta)?)),
            None => Ok(None),
        }
    }

    pub fn budget(&self) -> Budget {
        let d = Budget::default();
        let s = &self.search;
        Budget {
            restarts: s.restarts.unwrap_or(d.restarts),
            iterations: s.iterations.unwrap_or(d.iterations),
            rounds: s.rounds.unwrap_or(d.rounds),
            support: s.support.unwrap_or(d.support),
            seed: self.seed,
            vertex_limit: s.vertex_limit.map_or(d.vertex_limit, u128::from),
            ..d
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for s in SCENARIOS {
            preset(s).unwrap().validate().unwrap();
        }
        assert!(preset("table2").is_err());
    }

    #[test]
    fn file_fields_override_preset_and_flags_override_file() {
        let dir = std::env::temp_dir().join(format!("franson-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        std::fs::write(&path, r#"{"scenario": "chained6", "trials": 10, "search": {"restarts": 3}}"#).unwrap();
        let c = RunConfig::resolve(Some(&path), &Overrides::default()).unwrap();
        assert_eq!((c.terms, c.trials, c.visibility), (6, 10, 0.97));
        assert_eq!(c.search.restarts, Some(3));
        let flags = Overrides { visibility: Some(0.95), ..Overrides::default() };
        let c = RunConfig::resolve(Some(&path), &flags).unwrap();
        assert_eq!(c.visibility, 0.95);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn rejects_bad_fields() {
        let flags = Overrides { terms: Some(5), ..Overrides::default() };
        assert!(matches!(RunConfig::resolve(None, &flags), Err(CliError::Config(_))));
        let flags = Overrides { model_class: Some("delays".into()), ..Overrides::default() };
        assert!(RunConfig::resolve(None, &flags).is_err());
        let v: std::result::Result<RunConfig, _> = serde_json::from_str(r#"{"trails": 5}"#);
        assert!(v.is_err());
    }
}
