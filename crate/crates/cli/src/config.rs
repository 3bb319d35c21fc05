use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use vrd_core::montecarlo::{figures, EpochClock, SweepConfig};
use vrd_core::svard::{ThresholdPolicy, TraceKind, DEFAULT_EXTRA_DEMOTION_FRACTION, DEFAULT_PARA_EPSILON};
use vrd_core::{DeviceSpec, ModelParams};

pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_HORIZON: u64 = 2_000_000;
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_CENSUS_REPETITIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Profile,
    Census,
    Model,
    Mttue,
    Sweep,
    Svard,
    Mitigate,
    Report,
    Validate,
}

impl Command {
    pub const RUNNABLE: [&'static str; 8] = [
        "profile", "census", "model", "mttue", "sweep", "svard", "mitigate", "report",
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Profile => "profile",
            Command::Census => "census",
            Command::Model => "model",
            Command::Mttue => "mttue",
            Command::Sweep => "sweep",
            Command::Svard => "svard",
            Command::Mitigate => "mitigate",
            Command::Report => "report",
            Command::Validate => "validate",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(Value::String(s.into())).ok()
    }

    pub fn needs_device(self) -> bool {
        matches!(
            self,
            Command::Profile | Command::Census | Command::Svard | Command::Mitigate
        )
    }

    pub fn needs_model(self) -> bool {
        matches!(self, Command::Model | Command::Mttue)
    }
}

/// A device spec or model given either inline or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(PathBuf),
    Inline(T),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvardSection {
    #[serde(default = "default_policy")]
    pub policy: ThresholdPolicy,
    #[serde(default = "default_extra")]
    pub extra_demotion_fraction: f64,
    /// Halve the threshold of every row the weak-row census reports.
    #[serde(default)]
    pub demote_weak_rows: bool,
}

fn default_policy() -> ThresholdPolicy {
    ThresholdPolicy::SvardTwoBin
}
fn default_extra() -> f64 {
    DEFAULT_EXTRA_DEMOTION_FRACTION
}
fn default_epsilon() -> f64 {
    DEFAULT_PARA_EPSILON
}
fn default_trace() -> TraceKind {
    TraceKind::Uniform
}
fn default_length() -> u64 {
    100_000
}

impl Default for SvardSection {
    fn default() -> Self {
        Self {
            policy: default_policy(),
            extra_demotion_fraction: default_extra(),
            demote_weak_rows: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigateSection {
    #[serde(default = "default_trace")]
    pub trace: TraceKind,
    #[serde(default = "default_length")]
    pub length: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_extra")]
    pub extra_demotion_fraction: f64,
}

impl Default for MitigateSection {
    fn default() -> Self {
        Self {
            trace: default_trace(),
            length: default_length(),
            epsilon: default_epsilon(),
            extra_demotion_fraction: default_extra(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensusSection {
    /// Defaults to the profile's RDT_90%.
    #[serde(default)]
    pub hammer_count: Option<u64>,
    #[serde(default)]
    pub repetitions: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<Source<DeviceSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Source<ModelParams>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock: Option<EpochClock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svard: Option<SvardSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mitigate: Option<MitigateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub census: Option<CensusSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepConfig>>,
}

/// Flag values that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub horizon: Option<u64>,
    pub out: Option<PathBuf>,
    pub figure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Configuration problems; every diagnostic is reported, not just the first.
#[derive(Debug)]
pub struct ConfigError(pub Vec<Diagnostic>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "invalid configuration:\n  {}", lines.join("\n  "))
    }
}

impl std::error::Error for ConfigError {}

fn diag(path: impl Into<String>, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        path: path.into(),
        message: message.into(),
    }
}

/// Reads a config file. A run manifest is accepted too: its embedded
/// resolved config is used.
pub fn read_config_value(path: &Path) -> Result<Value, ConfigError> {
    let text =
        fs::read_to_string(path).map_err(|e| ConfigError(vec![diag("config", format!("{}: {e}", path.display()))]))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| ConfigError(vec![diag("config", format!("{}: {e}", path.display()))]))?;
    if value.get("tool").and_then(Value::as_str) == Some(crate::manifest::TOOL) {
        if let Some(cfg) = value.get("config") {
            return Ok(cfg.clone());
        }
    }
    Ok(value)
}

/// Builds the config value for a run: file contents (if any) with flag
/// overrides applied. A run command given on the command line replaces the
/// file's; `None` (validation) leaves it as written. `--out` is applied by
/// the caller since it is relative to the working directory, not the config.
pub fn merge(file: Option<Value>, command: Option<Command>, o: &Overrides) -> Value {
    let mut v = file.unwrap_or_else(|| Value::Object(Default::default()));
    if let Value::Object(map) = &mut v {
        if let Some(c) = command {
            map.insert("command".into(), Value::String(c.name().into()));
        }
        if let Some(s) = o.seed {
            map.insert("seed".into(), s.into());
        }
        if let Some(t) = o.trials {
            map.insert("trials".into(), t.into());
        }
        if let Some(h) = o.horizon {
            map.insert("horizon".into(), h.into());
        }
        if let Some(f) = &o.figure {
            map.insert("figure".into(), Value::String(f.clone()));
        }
    }
    v
}

fn is_positive_int(v: &Value) -> bool {
    v.as_u64().is_some_and(|x| x > 0)
}

fn check_positive(obj: &serde_json::Map<String, Value>, key: &str, prefix: &str, out: &mut Vec<Diagnostic>) {
    if let Some(v) = obj.get(key) {
        if !is_positive_int(v) {
            out.push(diag(
                format!("{prefix}{key}"),
                format!("must be a positive integer, got {v}"),
            ));
        }
    }
}

fn check_fraction(obj: &serde_json::Map<String, Value>, key: &str, prefix: &str, out: &mut Vec<Diagnostic>) {
    if let Some(v) = obj.get(key) {
        if !v.as_f64().is_some_and(|x| (0.0..=1.0).contains(&x)) {
            out.push(diag(
                format!("{prefix}{key}"),
                format!("must be a number in [0, 1], got {v}"),
            ));
        }
    }
}

fn check_unknown(obj: &serde_json::Map<String, Value>, allowed: &[&str], prefix: &str, out: &mut Vec<Diagnostic>) {
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            out.push(diag(format!("{prefix}{k}"), "unknown field"));
        }
    }
}

const MODEL_FIELDS: [&str; 9] = [
    "delta_l",
    "n",
    "growth_period",
    "scrub_interval",
    "flip_space_bits",
    "codeword_data_bits",
    "codeword_total_bits",
    "removal_enabled",
    "immediate_removal",
];

fn check_model(v: &Value, prefix: &str, out: &mut Vec<Diagnostic>) {
    let before = out.len();
    let Some(obj) = v.as_object() else {
        out.push(diag(prefix.trim_end_matches('.'), "must be an object or a path"));
        return;
    };
    check_unknown(obj, &MODEL_FIELDS, prefix, out);
    for key in ["delta_l", "n"] {
        match obj.get(key) {
            None => out.push(diag(format!("{prefix}{key}"), "missing required field")),
            Some(_) => check_positive(obj, key, prefix, out),
        }
    }
    for key in [
        "growth_period",
        "scrub_interval",
        "flip_space_bits",
        "codeword_data_bits",
        "codeword_total_bits",
    ] {
        check_positive(obj, key, prefix, out);
    }
    // field-level problems already named; skip the coarser whole-object error
    if before == out.len() {
        match serde_json::from_value::<ModelParams>(v.clone()) {
            Ok(p) => {
                if let Err(e) = p.validate() {
                    out.push(diag(prefix.trim_end_matches('.'), e.to_string()));
                }
            }
            Err(e) => out.push(diag(prefix.trim_end_matches('.'), e.to_string())),
        }
    }
}

fn check_device(v: &Value, prefix: &str, out: &mut Vec<Diagnostic>) {
    let before = out.len();
    let Some(obj) = v.as_object() else {
        out.push(diag(prefix.trim_end_matches('.'), "must be an object or a path"));
        return;
    };
    check_unknown(obj, &["geometry", "distribution", "preset", "seed"], prefix, out);
    match obj.get("geometry").and_then(Value::as_object) {
        None => out.push(diag(format!("{prefix}geometry"), "missing required object")),
        Some(g) => {
            let gp = format!("{prefix}geometry.");
            for key in ["banks", "rows_per_bank", "bits_per_row"] {
                match g.get(key) {
                    None => out.push(diag(format!("{gp}{key}"), "missing required field")),
                    Some(_) => check_positive(g, key, &gp, out),
                }
            }
        }
    }
    // field-level problems already named; skip the coarser whole-object error
    if before == out.len() {
        match serde_json::from_value::<DeviceSpec>(v.clone()) {
            Ok(spec) => {
                let checks = spec.geometry.validate().and_then(|_| spec.distribution.validate());
                if let Err(e) = checks {
                    out.push(diag(prefix.trim_end_matches('.'), e.to_string()));
                }
            }
            Err(e) => out.push(diag(prefix.trim_end_matches('.'), e.to_string())),
        }
    }
}

/// Loads a `Source` field: a path relative to `base` or an inline object.
fn load_source(v: &Value, base: &Path, key: &str, out: &mut Vec<Diagnostic>) -> Option<Value> {
    match v {
        Value::String(p) => {
            let path = base.join(p);
            match fs::read_to_string(&path) {
                Err(e) => {
                    out.push(diag(key, format!("cannot read {}: {e}", path.display())));
                    None
                }
                Ok(text) => match serde_json::from_str(&text) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        out.push(diag(key, format!("{}: {e}", path.display())));
                        None
                    }
                },
            }
        }
        other => Some(other.clone()),
    }
}

const TOP_FIELDS: [&str; 14] = [
    "command",
    "seed",
    "device",
    "model",
    "trials",
    "horizon",
    "out",
    "iterations",
    "figure",
    "clock",
    "svard",
    "mitigate",
    "census",
    "sweep",
];

/// Schema and semantic checks over a raw config value. Paths inside the
/// config resolve against `base`.
pub fn diagnose(v: &Value, base: &Path) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let Some(obj) = v.as_object() else {
        return vec![diag("config", "must be a JSON object")];
    };
    check_unknown(obj, &TOP_FIELDS, "", &mut out);

    let command = match obj.get("command") {
        None => {
            out.push(diag("command", "missing required field"));
            None
        }
        Some(Value::String(s)) => match Command::parse(s).filter(|c| *c != Command::Validate) {
            Some(c) => Some(c),
            None => {
                out.push(diag(
                    "command",
                    format!("unknown command {s:?}; expected one of {:?}", Command::RUNNABLE),
                ));
                None
            }
        },
        Some(other) => {
            out.push(diag("command", format!("must be a string, got {other}")));
            None
        }
    };

    match obj.get("seed") {
        None if command.is_some() => out.push(diag(
            "seed",
            "missing: every run command is stochastic and needs an explicit seed",
        )),
        Some(s) if s.as_u64().is_none() => out.push(diag("seed", format!("must be a non-negative integer, got {s}"))),
        _ => {}
    }
    for key in ["trials", "horizon", "iterations"] {
        check_positive(obj, key, "", &mut out);
    }
    if let Some(o) = obj.get("out") {
        if !o.is_string() {
            out.push(diag("out", "must be a path string"));
        }
    }

    match obj.get("device") {
        Some(d) => {
            if let Some(d) = load_source(d, base, "device", &mut out) {
                check_device(&d, "device.", &mut out);
            }
        }
        None if command.is_some_and(Command::needs_device) => {
            out.push(diag("device", "missing: this command needs a device spec"))
        }
        None => {}
    }
    match obj.get("model") {
        Some(m) => {
            if let Some(m) = load_source(m, base, "model", &mut out) {
                check_model(&m, "model.", &mut out);
            }
        }
        None if command.is_some_and(Command::needs_model) => {
            out.push(diag("model", "missing: this command needs model parameters"))
        }
        None => {}
    }

    match obj.get("figure") {
        Some(Value::String(f)) if !figures::NAMES.contains(&f.as_str()) => out.push(diag(
            "figure",
            format!("unknown figure {f:?}; expected one of {:?}", figures::NAMES),
        )),
        Some(Value::String(_)) => {}
        Some(other) => out.push(diag("figure", format!("must be a string, got {other}"))),
        None if command == Some(Command::Report) => out.push(diag("figure", "missing: report needs --figure")),
        None => {}
    }

    if let Some(c) = obj.get("clock") {
        if let Err(e) = serde_json::from_value::<EpochClock>(c.clone()) {
            out.push(diag("clock", e.to_string()));
        }
    }

    if let Some(s) = obj.get("svard") {
        match s.as_object() {
            None => out.push(diag("svard", "must be an object")),
            Some(so) => {
                check_unknown(
                    so,
                    &["policy", "extra_demotion_fraction", "demote_weak_rows"],
                    "svard.",
                    &mut out,
                );
                check_fraction(so, "extra_demotion_fraction", "svard.", &mut out);
                if let Some(p) = so.get("policy") {
                    if serde_json::from_value::<ThresholdPolicy>(p.clone()).is_err() {
                        out.push(diag(
                            "svard.policy",
                            format!("expected \"one-size-fits-all\" or \"svard-two-bin\", got {p}"),
                        ));
                    }
                }
            }
        }
    }

    if let Some(m) = obj.get("mitigate") {
        match m.as_object() {
            None => out.push(diag("mitigate", "must be an object")),
            Some(mo) => {
                check_unknown(
                    mo,
                    &["trace", "length", "epsilon", "extra_demotion_fraction"],
                    "mitigate.",
                    &mut out,
                );
                check_fraction(mo, "extra_demotion_fraction", "mitigate.", &mut out);
                if let Some(l) = mo.get("length") {
                    if l.as_u64().is_none() {
                        out.push(diag(
                            "mitigate.length",
                            format!("must be a non-negative integer, got {l}"),
                        ));
                    }
                }
                if let Some(e) = mo.get("epsilon") {
                    if !e.as_f64().is_some_and(|x| x > 0.0 && x < 1.0) {
                        out.push(diag("mitigate.epsilon", format!("must lie in (0, 1), got {e}")));
                    }
                }
                if let Some(t) = mo.get("trace") {
                    if let Err(e) = serde_json::from_value::<TraceKind>(t.clone()) {
                        out.push(diag(
                            "mitigate.trace",
                            format!("{e}; kinds: uniform, single-row-hammer, double-sided, zipf"),
                        ));
                    }
                }
            }
        }
    }

    if let Some(c) = obj.get("census") {
        match c.as_object() {
            None => out.push(diag("census", "must be an object")),
            Some(co) => {
                check_unknown(co, &["hammer_count", "repetitions"], "census.", &mut out);
                check_positive(co, "hammer_count", "census.", &mut out);
                check_positive(co, "repetitions", "census.", &mut out);
            }
        }
    }

    match obj.get("sweep") {
        Some(Value::Array(items)) => {
            if items.is_empty() {
                out.push(diag("sweep", "must list at least one configuration"));
            }
            let mut labels = std::collections::BTreeSet::new();
            for (i, item) in items.iter().enumerate() {
                let p = format!("sweep[{i}]");
                let Some(io) = item.as_object() else {
                    out.push(diag(p, "must be an object"));
                    continue;
                };
                check_unknown(io, &["label", "params", "clock", "horizon"], &format!("{p}."), &mut out);
                match io.get("label").and_then(Value::as_str) {
                    None => out.push(diag(format!("{p}.label"), "missing string label")),
                    Some(l) if !labels.insert(l.to_string()) => {
                        out.push(diag(format!("{p}.label"), format!("duplicate label {l:?}")))
                    }
                    Some(_) => {}
                }
                match io.get("params") {
                    None => out.push(diag(format!("{p}.params"), "missing required field")),
                    Some(m) => check_model(m, &format!("{p}.params."), &mut out),
                }
                check_positive(io, "horizon", &format!("{p}."), &mut out);
            }
        }
        Some(_) => out.push(diag("sweep", "must be an array")),
        None if command == Some(Command::Sweep) => {
            out.push(diag("sweep", "missing: sweep needs a list of configurations"))
        }
        None => {}
    }

    out
}

/// Validates and resolves a raw config: file references are inlined and
/// defaults filled, so the result alone reproduces the run.
pub fn resolve(v: &Value, base: &Path) -> Result<RunConfig, ConfigError> {
    let diags = diagnose(v, base);
    if !diags.is_empty() {
        return Err(ConfigError(diags));
    }
    let mut cfg: RunConfig =
        serde_json::from_value(v.clone()).map_err(|e| ConfigError(vec![diag("config", e.to_string())]))?;
    let mut errs = Vec::new();
    if let Some(Source::Path(p)) = &cfg.device {
        let value = load_source(&Value::String(p.display().to_string()), base, "device", &mut errs);
        cfg.device = value.and_then(|v| serde_json::from_value(v).ok()).map(Source::Inline);
    }
    if let Some(Source::Path(p)) = &cfg.model {
        let value = load_source(&Value::String(p.display().to_string()), base, "model", &mut errs);
        cfg.model = value.and_then(|v| serde_json::from_value(v).ok()).map(Source::Inline);
    }
    if !errs.is_empty() {
        return Err(ConfigError(errs));
    }
    if let Some(out) = &cfg.out {
        if out.is_relative() {
            cfg.out = Some(base.join(out));
        }
    }

    let c = cfg.command;
    let stochastic_mc = matches!(c, Command::Model | Command::Mttue | Command::Sweep | Command::Report);
    if stochastic_mc {
        cfg.trials.get_or_insert(DEFAULT_TRIALS);
        if c != Command::Report {
            cfg.horizon.get_or_insert(DEFAULT_HORIZON);
        }
        if c != Command::Report {
            cfg.clock.get_or_insert_with(EpochClock::default);
        }
    }
    if c.needs_device() {
        cfg.iterations.get_or_insert(DEFAULT_ITERATIONS);
    }
    match c {
        Command::Svard => {
            cfg.svard.get_or_insert_with(SvardSection::default);
        }
        Command::Mitigate => {
            cfg.mitigate.get_or_insert_with(MitigateSection::default);
        }
        Command::Census => {
            let s = cfg.census.get_or_insert(CensusSection {
                hammer_count: None,
                repetitions: None,
            });
            s.repetitions.get_or_insert(DEFAULT_CENSUS_REPETITIONS);
        }
        _ => {}
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn device_spec(&self) -> Option<&DeviceSpec> {
        match &self.device {
            Some(Source::Inline(d)) => Some(d),
            _ => None,
        }
    }

    pub fn model_params(&self) -> Option<&ModelParams> {
        match &self.model {
            Some(Source::Inline(m)) => Some(m),
            _ => None,
        }
    }

    /// The config as recorded in manifests: output location dropped.
    pub fn recorded(&self) -> RunConfig {
        RunConfig {
            out: None,
            ..self.clone()
        }
    }

    /// SHA-256 of the recorded config's canonical JSON.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.recorded()).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn paths(v: Value) -> Vec<String> {
        diagnose(&v, Path::new(".")).into_iter().map(|d| d.path).collect()
    }

    #[test]
    fn missing_seed_is_named() {
        assert_eq!(
            paths(json!({"command": "mttue", "model": {"delta_l": 12, "n": 5}})),
            vec!["seed"]
        );
    }

    #[test]
    fn negative_delta_l_is_named() {
        let p = paths(json!({"command": "mttue", "seed": 1, "model": {"delta_l": -3, "n": 5}}));
        assert_eq!(p, vec!["model.delta_l"]);
    }

    #[test]
    fn diagnostics_are_aggregated() {
        let p = paths(json!({
            "command": "sweep", "trials": 0, "colour": 1,
            "sweep": [{"label": "a", "params": {"n": 1}}, {"label": "a", "params": {"delta_l": 1, "n": 1}}]
        }));
        for want in ["colour", "seed", "trials", "sweep[0].params.delta_l", "sweep[1].label"] {
            assert!(p.iter().any(|x| x == want), "{want} not in {p:?}");
        }
    }

    #[test]
    fn unknown_command_and_figure() {
        let p = paths(json!({"command": "plot", "seed": 1, "figure": "nope"}));
        assert_eq!(p, vec!["command", "figure"]);
    }

    #[test]
    fn hash_ignores_output_dir() {
        let v = json!({"command": "mttue", "seed": 1, "model": {"delta_l": 12, "n": 5}});
        let a = resolve(&v, Path::new(".")).unwrap();
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.seed = Some(2);
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn flags_override_file() {
        let file = json!({"command": "mttue", "seed": 1, "trials": 5});
        let o = Overrides {
            seed: Some(9),
            ..Default::default()
        };
        let v = merge(Some(file), Some(Command::Mttue), &o);
        assert_eq!(v["seed"], 9);
        assert_eq!(v["trials"], 5);
    }
}
