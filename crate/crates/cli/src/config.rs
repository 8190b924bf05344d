//! `key = value` run configuration.
//!
//! Every key overrides one field of the experiment preset. Unknown keys,
//! duplicates and unparsable values are errors that name the key and line.

use std::collections::BTreeMap;
use std::path::Path;

use bean_limit_core::data::{Radial, Stream};
use bean_limit_core::lab::{Experiment, ExperimentSpec, PlacedRadial, StreamData};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`: {reason}")]
    Invalid { line: usize, key: String, value: String, reason: String },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("config describes experiment `{found}` but `{expected}` was requested")]
    WrongExperiment { expected: String, found: String },
    #[error("invalid JSON config: {0}")]
    Json(String),
    #[error("invalid configuration: {0}")]
    Spec(String),
}

const SCALAR_KEYS: &[&str] = &[
    "experiment",
    "name",
    "grid.L",
    "grid.n",
    "grid.refinements",
    "exponent",
    "schedule",
    "horizon",
    "dt",
    "snapshots",
    "solver.newton_tol",
    "solver.psor_relaxation",
    "solver.psor_tol",
    "vi.fields",
    "vi.seed",
    "barenblatt.t0",
    "barenblatt.mass",
    "check_monotonicity",
    "output.dir",
];

const RADIAL_SLOTS: &[&str] = &["f", "f2", "g"];
const RADIAL_PARAMS: &[&str] = &["kind", "height", "radius", "inner", "outer", "center"];
const STREAM_SLOTS: &[&str] = &["h0", "forcing"];
const STREAM_PARAMS: &[&str] = &["kind", "amplitude", "radius", "sigma", "cutoff", "curl_max"];

fn is_known(key: &str) -> bool {
    if SCALAR_KEYS.contains(&key) {
        return true;
    }
    let mut parts = key.splitn(3, '.');
    match (parts.next(), parts.next(), parts.next()) {
        (Some("data"), Some(slot), Some(param)) => {
            (RADIAL_SLOTS.contains(&slot) && RADIAL_PARAMS.contains(&param))
                || (STREAM_SLOTS.contains(&slot) && STREAM_PARAMS.contains(&param))
        }
        _ => false,
    }
}

/// Parsed `key = value` pairs with their line numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError::Syntax { line, text: raw.trim().to_string() });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line, text: raw.trim().to_string() });
            }
            if !is_known(key) {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            }
            if entries.insert(key.to_string(), (line, value.to_string())).is_some() {
                return Err(ConfigError::Duplicate { line, key: key.to_string() });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn invalid(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        let (line, value) = self.entries.get(key).cloned().unwrap_or_default();
        ConfigError::Invalid { line, key: key.to_string(), value, reason: reason.into() }
    }

    fn num(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key)
            .map(|v| {
                let x: f64 = v.parse().map_err(|_| self.invalid(key, "not a number"))?;
                if x.is_finite() { Ok(x) } else { Err(self.invalid(key, "must be finite")) }
            })
            .transpose()
    }

    fn int<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| self.invalid(key, "not a nonnegative integer")))
            .transpose()
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        self.get(key)
            .map(|v| {
                if v.is_empty() {
                    return Ok(Vec::new());
                }
                v.split(',').map(|s| s.trim().parse().map_err(|_| self.invalid(key, "bad list entry"))).collect()
            })
            .transpose()
    }

    fn positive(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.num(key)? {
            Some(x) if x <= 0.0 => Err(self.invalid(key, "must be positive")),
            other => Ok(other),
        }
    }

    /// Starts from the preset of `kind` and applies every key.
    pub fn to_spec(&self, kind: Experiment) -> Result<ExperimentSpec, ConfigError> {
        if let Some(name) = self.get("experiment") {
            if name != kind.name() {
                return Err(ConfigError::WrongExperiment { expected: kind.name().into(), found: name.into() });
            }
        }
        let mut spec = ExperimentSpec::preset(kind);
        if let Some(v) = self.get("name") {
            spec.name = v.to_string();
        }
        if let Some(v) = self.positive("grid.L")? {
            spec.half_width = v;
        }
        if let Some(v) = self.int("grid.n")? {
            spec.n = v;
        }
        if let Some(v) = self.list("grid.refinements")? {
            spec.refinements = v;
        }
        match (self.num("exponent")?, self.list::<f64>("schedule")?) {
            (Some(_), Some(_)) => return Err(self.invalid("schedule", "give either `exponent` or `schedule`")),
            (Some(e), None) => spec.schedule = vec![e],
            (None, Some(s)) => spec.schedule = s,
            (None, None) => {}
        }
        if let Some(v) = self.positive("horizon")? {
            spec.horizon = v;
        }
        if let Some(v) = self.get("dt") {
            spec.dt = if v == "auto" { None } else { self.positive("dt")? };
        }
        if let Some(v) = self.list("snapshots")? {
            spec.snapshot_times = v;
        }
        if let Some(v) = self.positive("solver.newton_tol")? {
            spec.newton_tol = v;
        }
        if let Some(v) = self.get("solver.psor_relaxation") {
            spec.psor_relaxation = if v == "auto" { None } else { self.num("solver.psor_relaxation")? };
        }
        if let Some(v) = self.positive("solver.psor_tol")? {
            spec.psor_tol = v;
        }
        if let Some(v) = self.int("vi.fields")? {
            spec.vi_fields = v;
        }
        if let Some(v) = self.int("vi.seed")? {
            spec.vi_seed = v;
        }
        if let Some(v) = self.positive("barenblatt.t0")? {
            spec.barenblatt_t0 = v;
        }
        if let Some(v) = self.positive("barenblatt.mass")? {
            spec.barenblatt_mass = v;
        }
        if let Some(v) = self.get("check_monotonicity") {
            spec.check_monotonicity = v.parse().map_err(|_| self.invalid("check_monotonicity", "expected true or false"))?;
        }
        if let Some(v) = self.get("output.dir") {
            spec.output_dir = Some(v.to_string());
        }
        spec.f = self.radial("f", spec.f)?;
        spec.f2 = self.radial("f2", spec.f2)?;
        spec.g = self.radial("g", spec.g)?;
        spec.h0 = self.stream("h0", spec.h0)?;
        spec.forcing = self.stream("forcing", spec.forcing)?;
        spec.validate(kind).map_err(|e| ConfigError::Spec(e.to_string()))?;
        Ok(spec)
    }

    fn radial(&self, slot: &str, preset: PlacedRadial) -> Result<PlacedRadial, ConfigError> {
        let key = |p: &str| format!("data.{slot}.{p}");
        let (mut height, mut radius, mut inner, mut outer) = (None, None, None, None);
        let mut kind = match preset.profile {
            Radial::Zero => "zero",
            Radial::Bump { height: h, radius: r } => {
                (height, radius) = (Some(h), Some(r));
                "bump"
            }
            Radial::FlatTop { height: h, inner: a, outer: b } => {
                (height, inner, outer) = (Some(h), Some(a), Some(b));
                "flat_top"
            }
            Radial::Disk { height: h, radius: r } => {
                (height, radius) = (Some(h), Some(r));
                "disk"
            }
        }
        .to_string();
        if let Some(k) = self.get(&key("kind")) {
            kind = k.to_string();
        }
        height = self.num(&key("height"))?.or(height);
        radius = self.positive(&key("radius"))?.or(radius);
        inner = self.num(&key("inner"))?.or(inner);
        outer = self.positive(&key("outer"))?.or(outer);
        let need = |v: Option<f64>, p: &str| v.ok_or_else(|| ConfigError::Missing(key(p)));
        let profile = match kind.as_str() {
            "zero" => Radial::Zero,
            "bump" => Radial::Bump { height: need(height, "height")?, radius: need(radius, "radius")? },
            "disk" => Radial::Disk { height: need(height, "height")?, radius: need(radius, "radius")? },
            "flat_top" => {
                let (a, b) = (need(inner, "inner")?, need(outer, "outer")?);
                if !(a >= 0.0 && a < b) {
                    return Err(self.invalid(&key("outer"), "need 0 <= inner < outer"));
                }
                Radial::FlatTop { height: need(height, "height")?, inner: a, outer: b }
            }
            _ => return Err(self.invalid(&key("kind"), "expected zero, bump, flat_top or disk")),
        };
        let center = match self.list::<f64>(&key("center"))? {
            None => preset.center,
            Some(c) if c.len() == 2 && c.iter().all(|x| x.is_finite()) => [c[0], c[1]],
            Some(_) => return Err(self.invalid(&key("center"), "expected `x, y`")),
        };
        Ok(PlacedRadial { profile, center })
    }

    fn stream(&self, slot: &str, preset: StreamData) -> Result<StreamData, ConfigError> {
        let key = |p: &str| format!("data.{slot}.{p}");
        let (mut amplitude, mut radius, mut sigma, mut cutoff) = (None, None, None, None);
        let mut kind = match preset.stream {
            Stream::Zero => "zero",
            Stream::Bump { amplitude: a, radius: r } => {
                (amplitude, radius) = (Some(a), Some(r));
                "bump"
            }
            Stream::Gaussian { amplitude: a, sigma: s, cutoff: c } => {
                (amplitude, sigma, cutoff) = (Some(a), Some(s), Some(c));
                "gaussian"
            }
        }
        .to_string();
        if let Some(k) = self.get(&key("kind")) {
            kind = k.to_string();
        }
        amplitude = self.num(&key("amplitude"))?.or(amplitude);
        radius = self.positive(&key("radius"))?.or(radius);
        sigma = self.positive(&key("sigma"))?.or(sigma);
        cutoff = self.positive(&key("cutoff"))?.or(cutoff);
        let need = |v: Option<f64>, p: &str| v.ok_or_else(|| ConfigError::Missing(key(p)));
        let stream = match kind.as_str() {
            "zero" => Stream::Zero,
            "bump" => Stream::Bump { amplitude: need(amplitude, "amplitude")?, radius: need(radius, "radius")? },
            "gaussian" => Stream::Gaussian {
                amplitude: need(amplitude, "amplitude")?,
                sigma: need(sigma, "sigma")?,
                cutoff: need(cutoff, "cutoff")?,
            },
            _ => return Err(self.invalid(&key("kind"), "expected zero, bump or gaussian")),
        };
        let curl_max = match self.get(&key("curl_max")) {
            None => preset.curl_max,
            Some("none") => None,
            Some(_) => self.positive(&key("curl_max"))?,
        };
        Ok(StreamData { stream, curl_max })
    }
}

/// Reads a run configuration: a `key = value` file, or JSON holding either an
/// experiment spec or a previous `report.json` (whose config echo is used).
pub fn load_spec(path: &Path, kind: Experiment) -> Result<ExperimentSpec, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    if text.trim_start().starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| ConfigError::Json(e.to_string()))?;
        if let Some(name) = value.get("experiment").and_then(|v| v.as_str()) {
            if name != kind.name() {
                return Err(ConfigError::WrongExperiment { expected: kind.name().into(), found: name.into() });
            }
        }
        let spec_value = value.get("config").cloned().unwrap_or(value);
        let spec: ExperimentSpec = serde_json::from_value(spec_value).map_err(|e| ConfigError::Json(e.to_string()))?;
        spec.validate(kind).map_err(|e| ConfigError::Spec(e.to_string()))?;
        return Ok(spec);
    }
    RunConfig::parse(&text)?.to_spec(kind)
}
