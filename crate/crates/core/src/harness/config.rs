//! Experiment configuration documents (TOML).
//!
//! The schema is documented in `configs/SCHEMA.md`. Parsing walks the whole
//! document and reports every violation at once; unknown keys are errors.

use std::fmt;
use std::path::PathBuf;

use toml::{Table, Value};

use crate::clipping::{
    preset_bi2clip, preset_rmsprop_tailclip, PresetCoefficients, PresetKind, Schedule, SchedulePreset,
};
use crate::engine::{BatchSize, ClipKind, InnerSpec, OuterKind, OuterSpec, ParticipationMode, ParticipationSpec};
use crate::noise::{NoiseFamily, NoiseSpec, DEFAULT_TAIL};
use crate::problems::NoiseMode;

/// Every problem found in a configuration document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Gaussian,
    SynToken,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub rows: usize,
    pub dims: usize,
    pub common_fraction: f64,
    pub noise: NoiseSpec,
    pub noise_mode: NoiseMode,
    /// Seed for data generation; the experiment seed when absent.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    /// Record elapsed milliseconds in `wall_ms`. Off by default so that
    /// reruns produce identical files.
    pub wall_clock: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub metrics_every: u64,
    pub problem: ProblemConfig,
    pub inner: InnerSpec<f64>,
    pub outer: OuterSpec<f64>,
    /// Preset the schedules were derived from, if any.
    pub preset: Option<SchedulePreset>,
    pub nodes: usize,
    pub rounds: u64,
    pub participation: ParticipationSpec,
    pub output: OutputConfig,
    source: Table,
}

impl ExperimentConfig {
    /// The parsed document, used to derive variants.
    pub fn source(&self) -> &Table {
        &self.source
    }

    /// Re-parses the document with dotted-key overrides applied.
    pub fn with_overrides(&self, overrides: &[(String, Value)]) -> Result<Self, ConfigError> {
        let mut table = self.source.clone();
        let mut errors = Vec::new();
        for (key, value) in overrides {
            if let Err(e) = set_dotted(&mut table, key, value.clone()) {
                errors.push(e);
            }
        }
        if !errors.is_empty() {
            return Err(ConfigError { violations: errors });
        }
        parse_table(table)
    }
}

/// Writes `value` at a dotted path, creating intermediate tables.
pub(crate) fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<(), String> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("malformed key `{key}`"));
    }
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cursor = match entry {
            Value::Table(t) => t,
            _ => return Err(format!("`{key}`: `{part}` is not a section")),
        };
    }
    cursor.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
        violations: vec![format!("syntax: {}", e.message())],
    })?;
    parse_table(table)
}

/// Reads keys out of one section, recording errors and leftovers.
struct Section<'e> {
    path: String,
    table: Table,
    errors: &'e mut Vec<String>,
}

impl<'e> Section<'e> {
    fn field(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn error(&mut self, key: &str, message: impl fmt::Display) {
        let field = self.field(key);
        self.errors.push(format!("{field}: {message}"));
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.table.remove(key)
    }

    fn float(&mut self, key: &str, default: f64) -> f64 {
        match self.take(key) {
            None => default,
            Some(Value::Float(v)) => v,
            Some(Value::Integer(v)) => v as f64,
            Some(other) => {
                self.error(key, format!("expected a number, found {}", other.type_str()));
                default
            }
        }
    }

    fn opt_float(&mut self, key: &str) -> Option<f64> {
        self.table.contains_key(key).then(|| self.float(key, f64::NAN))
    }

    fn int(&mut self, key: &str, default: u64) -> u64 {
        match self.take(key) {
            None => default,
            Some(Value::Integer(v)) if v >= 0 => v as u64,
            Some(other) => {
                self.error(key, format!("expected a nonnegative integer, found {other}"));
                default
            }
        }
    }

    fn opt_int(&mut self, key: &str) -> Option<u64> {
        self.table.contains_key(key).then(|| self.int(key, 0))
    }

    fn boolean(&mut self, key: &str, default: bool) -> bool {
        match self.take(key) {
            None => default,
            Some(Value::Boolean(b)) => b,
            Some(other) => {
                self.error(key, format!("expected a boolean, found {}", other.type_str()));
                default
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.take(key) {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(other) => {
                self.error(key, format!("expected a string, found {}", other.type_str()));
                None
            }
        }
    }

    /// Parses a string key with `FromStr`, falling back to `default`.
    fn choice<C: std::str::FromStr<Err = String>>(&mut self, key: &str, default: C) -> C {
        match self.string(key) {
            None => default,
            Some(s) => s.parse().unwrap_or_else(|e| {
                self.error(key, e);
                default
            }),
        }
    }

    fn section(&mut self, key: &str) -> Section<'_> {
        let path = self.field(key);
        let table = match self.table.remove(key) {
            None => Table::new(),
            Some(Value::Table(t)) => t,
            Some(other) => {
                self.errors
                    .push(format!("{path}: expected a section, found {}", other.type_str()));
                Table::new()
            }
        };
        Section {
            path,
            table,
            errors: self.errors,
        }
    }

    fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    fn schedule(&mut self, key: &str, default: Schedule<f64>) -> Schedule<f64> {
        match self.take(key) {
            None => default,
            Some(Value::Float(v)) => self.constant(key, v, default),
            Some(Value::Integer(v)) => self.constant(key, v as f64, default),
            Some(Value::Table(t)) => {
                let mut sub = Section {
                    path: self.field(key),
                    table: t,
                    errors: self.errors,
                };
                let s = sub.schedule_table(default);
                sub.finish();
                s
            }
            Some(other) => {
                self.error(
                    key,
                    format!("expected a number or a schedule table, found {}", other.type_str()),
                );
                default
            }
        }
    }

    fn constant(&mut self, key: &str, value: f64, default: Schedule<f64>) -> Schedule<f64> {
        Schedule::constant(value).unwrap_or_else(|e| {
            self.error(key, e);
            default
        })
    }

    fn schedule_table(&mut self, default: Schedule<f64>) -> Schedule<f64> {
        let kind = self.string("kind").unwrap_or_else(|| "constant".into());
        let built = match kind.as_str() {
            "constant" => Schedule::constant(self.float("value", f64::NAN)),
            "power-law" => {
                let (c, e) = (self.float("coefficient", 1.0), self.float("exponent", f64::NAN));
                Schedule::power_law(c, e)
            }
            "scaled-power" => {
                let (c, e) = (self.float("coefficient", 1.0), self.float("exponent", f64::NAN));
                Schedule::scaled_power(c, e)
            }
            "harmonic" => Schedule::harmonic(self.float("r", f64::NAN)),
            other => {
                self.error(
                    "kind",
                    format!("unknown schedule kind `{other}` (expected constant, power-law, harmonic, scaled-power)"),
                );
                return default;
            }
        };
        built.unwrap_or_else(|e| {
            let path = self.path.clone();
            self.errors.push(format!("{path}: {e}"));
            default
        })
    }

    fn finish(self) {
        for key in self.table.keys() {
            let field = if self.path.is_empty() {
                key.clone()
            } else {
                format!("{}.{key}", self.path)
            };
            self.errors.push(format!("{field}: unknown key"));
        }
    }
}

fn parse_table(table: Table) -> Result<ExperimentConfig, ConfigError> {
    let source = table.clone();
    let mut errors = Vec::new();
    let mut root = Section {
        path: String::new(),
        table,
        errors: &mut errors,
    };

    let seed = root.int("seed", 0);
    let metrics_every = root.int("metrics_every", 1);
    if metrics_every == 0 {
        root.error("metrics_every", "must be at least 1");
    }

    let problem = parse_problem(root.section("problem"));
    let (nodes, local_steps, rounds, participation) = parse_topology(root.section("topology"));
    let output = parse_output(root.section("output"));
    let (inner, outer, preset) = parse_algorithm(root.section("algorithm"), local_steps);
    root.finish();

    if nodes > problem.rows {
        errors.push(format!(
            "topology.nodes: {nodes} nodes exceed {} data rows",
            problem.rows
        ));
    }
    if inner.clip != ClipKind::None {
        if let Err(e) = check_ordering(&inner.lower, &inner.upper, rounds) {
            errors.push(format!("algorithm.inner: {e}"));
        }
    }
    if outer.kind == OuterKind::BiClip {
        if let Err(e) = check_ordering(&outer.lower, &outer.upper, rounds) {
            errors.push(format!("algorithm.outer: {e}"));
        }
    }

    if !errors.is_empty() {
        return Err(ConfigError { violations: errors });
    }
    Ok(ExperimentConfig {
        seed,
        metrics_every,
        problem,
        inner,
        outer,
        preset,
        nodes,
        rounds,
        participation,
        output,
        source,
    })
}

fn check_ordering(lower: &Schedule<f64>, upper: &Schedule<f64>, rounds: u64) -> Result<(), String> {
    for t in 1..=rounds.max(1) {
        let (d, u) = (lower.eval(t), upper.eval(t));
        if !(d <= u) {
            return Err(format!(
                "threshold ordering lower <= upper violated at round {t} (lower {d}, upper {u})"
            ));
        }
    }
    Ok(())
}

fn parse_problem(mut s: Section<'_>) -> ProblemConfig {
    let kind = match s.string("kind").as_deref() {
        None | Some("gaussian") => ProblemKind::Gaussian,
        Some("syntoken") => ProblemKind::SynToken,
        Some(other) => {
            s.error(
                "kind",
                format!("unknown problem kind `{other}` (expected gaussian, syntoken)"),
            );
            ProblemKind::Gaussian
        }
    };
    let rows = s.int("rows", 200) as usize;
    let dims = s.int("dims", 20) as usize;
    let common_fraction = s.float("common_fraction", 0.1);
    let seed = s.opt_int("seed");
    let noise_mode = match s.string("noise_mode").as_deref() {
        None | Some("label") => NoiseMode::LabelContamination,
        Some("additive") => NoiseMode::AdditiveGradient,
        Some(other) => {
            s.error(
                "noise_mode",
                format!("unknown noise mode `{other}` (expected label, additive)"),
            );
            NoiseMode::LabelContamination
        }
    };
    if dims == 0 {
        s.error("dims", "must be at least 1");
    }
    if rows == 0 {
        s.error("rows", "must be at least 1");
    }
    if kind == ProblemKind::Gaussian && rows < dims {
        s.error(
            "rows",
            format!("gaussian problems need rows >= dims, got {rows} < {dims}"),
        );
    }
    if kind == ProblemKind::SynToken && !(common_fraction > 0.0 && common_fraction < 1.0) {
        s.error("common_fraction", format!("must lie in (0, 1), got {common_fraction}"));
    }

    let noise = {
        let mut n = s.section("noise");
        let family = n.choice("family", NoiseFamily::None);
        let scale = n.float("scale", 1.0);
        let tail = n.float("tail", DEFAULT_TAIL);
        let spec = NoiseSpec::new(family, scale, tail).unwrap_or_else(|e| {
            let path = n.path.clone();
            n.errors.push(format!("{path}: {e}"));
            NoiseSpec::none()
        });
        n.finish();
        spec
    };
    s.finish();
    ProblemConfig {
        kind,
        rows,
        dims,
        common_fraction,
        noise,
        noise_mode,
        seed,
    }
}

fn parse_topology(mut s: Section<'_>) -> (usize, usize, u64, ParticipationSpec) {
    let nodes = s.int("nodes", 1) as usize;
    let local_steps = s.int("local_steps", 1) as usize;
    let rounds = s.int("rounds", 100);
    for (key, value) in [
        ("nodes", nodes as u64),
        ("local_steps", local_steps as u64),
        ("rounds", rounds),
    ] {
        if value == 0 {
            s.error(key, "must be at least 1");
        }
    }
    let participation = {
        let mut p = s.section("participation");
        let mode = match p.string("mode").as_deref() {
            None | Some("full") => ParticipationMode::Full,
            Some("uniform") => ParticipationMode::UniformSubsample,
            Some(other) => {
                p.error(
                    "mode",
                    format!("unknown participation mode `{other}` (expected full, uniform)"),
                );
                ParticipationMode::Full
            }
        };
        let rate = p.float("rate", 1.0);
        let renormalize = p.boolean("renormalize", true);
        if !(rate > 0.0 && rate <= 1.0) {
            p.error("rate", format!("must lie in (0, 1], got {rate}"));
        } else if mode == ParticipationMode::Full && rate != 1.0 {
            p.error("rate", "full participation requires rate = 1 (use mode = \"uniform\")");
        }
        p.finish();
        ParticipationSpec {
            rate,
            mode,
            renormalize,
        }
    };
    s.finish();
    (nodes.max(1), local_steps.max(1), rounds.max(1), participation)
}

fn parse_output(mut s: Section<'_>) -> OutputConfig {
    let path = s.string("path").map(PathBuf::from);
    let wall_clock = s.boolean("wall_clock", false);
    s.finish();
    OutputConfig { path, wall_clock }
}

fn parse_algorithm(mut s: Section<'_>, local_steps: usize) -> (InnerSpec<f64>, OuterSpec<f64>, Option<SchedulePreset>) {
    let preset = s.has("preset").then(|| parse_preset(s.section("preset")));
    let preset_schedules = preset
        .as_ref()
        .map(|(p, c)| p.schedules(c).expect("preset coefficients validated positive"));
    let preset = preset.map(|(p, _)| p);

    let mut i = s.section("inner");
    let inner = {
        let default_clip = if preset.is_some() {
            ClipKind::BiClipCoordinate
        } else {
            ClipKind::None
        };
        let clip = i.choice("clip", default_clip);
        let batch = match i.take("batch") {
            None => BatchSize::Full,
            Some(Value::String(s)) if s == "full" => BatchSize::Full,
            Some(Value::Integer(n)) if n >= 1 => BatchSize::Rows(n as usize),
            Some(other) => {
                i.error(
                    "batch",
                    format!("expected \"full\" or a positive integer, found {other}"),
                );
                BatchSize::Full
            }
        };
        let mut schedules = [
            ("lr", Schedule::Constant(0.01)),
            ("upper", Schedule::Constant(f64::INFINITY)),
            ("lower", Schedule::Constant(0.0)),
        ];
        if let Some(ps) = &preset_schedules {
            schedules[0].1 = ps.inner_lr;
            schedules[1].1 = ps.inner_upper;
            schedules[2].1 = ps.inner_lower;
        }
        let [lr, upper, lower] = schedules.map(|(key, default)| {
            if preset.is_some() && i.has(key) {
                i.error(key, "conflicts with algorithm.preset, which sets this schedule");
            }
            i.schedule(key, default)
        });
        if preset.is_some() && clip == ClipKind::None {
            i.error("clip", "presets require a clipping inner optimizer");
        }
        InnerSpec {
            clip,
            lr,
            upper,
            lower,
            local_steps,
            batch,
        }
    };
    i.finish();

    let mut o = s.section("outer");
    let outer = {
        let default_kind = match preset.map(|p| p.kind) {
            Some(PresetKind::Bi2Clip) => OuterKind::BiClip,
            Some(PresetKind::RmspropTailClip) => OuterKind::Rmsprop,
            None => OuterKind::Avg,
        };
        let kind = o.choice("kind", default_kind);
        if preset.is_some() && kind != default_kind {
            o.error(
                "kind",
                format!("the preset requires outer kind `{}`", default_kind.name()),
            );
        }
        let mut schedules = [
            ("lr", Schedule::Constant(1.0)),
            ("upper", Schedule::Constant(f64::INFINITY)),
            ("lower", Schedule::Constant(0.0)),
        ];
        if let Some(ps) = &preset_schedules {
            schedules[0].1 = ps.outer_lr;
            if kind == OuterKind::BiClip {
                schedules[1].1 = ps.outer_upper;
                schedules[2].1 = ps.outer_lower;
            }
        }
        let [lr, upper, lower] = schedules.map(|(key, default)| {
            if preset.is_some() && o.has(key) {
                o.error(key, "conflicts with algorithm.preset, which sets this schedule");
            }
            o.schedule(key, default)
        });
        let beta1 = o.float("beta1", 0.9);
        let beta2 = o.float("beta2", 0.99);
        let tau = o.float("tau", 1e-3);
        let projection = o.opt_float("projection");
        for (key, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&b) {
                o.error(key, format!("must lie in [0, 1), got {b}"));
            }
        }
        if !(tau > 0.0 && tau.is_finite()) {
            o.error("tau", format!("must be positive and finite, got {tau}"));
        }
        if let Some(r) = projection {
            if !(r > 0.0) {
                o.error("projection", format!("radius must be positive, got {r}"));
            }
        }
        OuterSpec {
            kind,
            lr,
            upper,
            lower,
            beta1,
            beta2,
            tau,
            projection,
        }
    };
    o.finish();
    s.finish();
    (inner, outer, preset)
}

fn parse_preset(mut s: Section<'_>) -> (SchedulePreset, PresetCoefficients<f64>) {
    let alpha = s.float("alpha", 1.5);
    let kind = s.string("kind");
    let built = match kind.as_deref() {
        Some("bi2clip") => preset_bi2clip(alpha),
        Some("rmsprop-tailclip") => preset_rmsprop_tailclip(alpha),
        Some(other) => {
            s.error(
                "kind",
                format!("unknown preset `{other}` (expected bi2clip, rmsprop-tailclip)"),
            );
            preset_bi2clip(1.5)
        }
        None => {
            s.error("kind", "missing (expected bi2clip or rmsprop-tailclip)");
            preset_bi2clip(1.5)
        }
    };
    let mut preset = built.unwrap_or_else(|e| {
        s.error("alpha", e);
        preset_bi2clip(1.5).expect("default preset is feasible")
    });
    let gamma = s.float("gamma", preset.gamma);
    let gamma_tilde = s.float("gamma_tilde", preset.gamma_tilde);
    let zeta_tilde = s.float("zeta_tilde", preset.zeta_tilde);
    match preset.with_free_exponents(gamma, gamma_tilde, zeta_tilde) {
        Ok(p) => preset = p,
        Err(e) => s.error("gamma", e),
    }
    let coefficients = {
        let mut c = s.section("coefficients");
        let mut read = |key: &str| {
            let v = c.float(key, 1.0);
            if !(v > 0.0 && v.is_finite()) {
                c.error(key, format!("must be positive and finite, got {v}"));
                1.0
            } else {
                v
            }
        };
        let coefficients = PresetCoefficients {
            inner_lr: read("inner_lr"),
            inner_upper: read("inner_upper"),
            inner_lower: read("inner_lower"),
            outer_lr: read("outer_lr"),
            outer_upper: read("outer_upper"),
            outer_lower: read("outer_lower"),
        };
        c.finish();
        coefficients
    };
    s.finish();
    (preset, coefficients)
}
