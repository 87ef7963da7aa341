use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::engine::{ConfigError, TransferModel};
use crate::model::{Capacity, NodeId, SampleClock, SECONDS_PER_DAY};
use crate::protocols::{Protocol, ProtocolKind};
use crate::report::Interval;
use crate::social::{CommunityParams, ImportanceParams, DEFAULT_WINDOW};
use crate::traces::SyntheticConfig;

/// A complete experiment: one scenario template, the sweep axes and how
/// many seeds to run per sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub nodes: usize,
    /// Defaults to the synthetic trace's days, or the last contact end of a
    /// trace file.
    #[serde(default)]
    pub duration_s: Option<f64>,
    pub trace: TraceSource,
    #[serde(default)]
    pub buffer: BufferSpec,
    #[serde(default)]
    pub message_size: SizeRange,
    #[serde(default = "instantaneous")]
    pub transfer: TransferModel,
    #[serde(default = "hourly")]
    pub samples_per_day: usize,
    #[serde(default)]
    pub protocol_params: ProtocolParams,
    pub workload: Workload,
    pub sweep: Sweep,
    #[serde(default = "one")]
    pub seeds: u32,
    /// Fixes interest assignment across every run of the experiment.
    #[serde(default)]
    pub layout_seed: u64,
    #[serde(default)]
    pub interval: Interval,
}

fn instantaneous() -> TransferModel {
    TransferModel::Instantaneous
}

fn hourly() -> usize {
    24
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceSource {
    /// Path to a trace file, relative to the spec file.
    File(PathBuf),
    /// Generated per run; the run seed is added to the config's seed.
    Synthetic(SyntheticConfig),
}

/// A byte count or the word `"unlimited"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CapacitySpec {
    Bytes(u64),
    Word(String),
}

impl CapacitySpec {
    pub fn resolve(&self, field: &str) -> Result<Capacity, ConfigError> {
        match self {
            CapacitySpec::Bytes(b) => Ok(Capacity::Limited(*b)),
            CapacitySpec::Word(w) if w == "unlimited" => Ok(Capacity::Unlimited),
            CapacitySpec::Word(w) => Err(ConfigError::new(field, format!("expected bytes or \"unlimited\", got {w:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BufferSpec {
    pub bytes: CapacitySpec,
    pub overrides: BTreeMap<u32, CapacitySpec>,
}

impl Default for BufferSpec {
    fn default() -> Self {
        BufferSpec {
            bytes: CapacitySpec::Bytes(2_000_000),
            overrides: BTreeMap::new(),
        }
    }
}

/// Message sizes are drawn uniformly from `[min, max]` bytes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SizeRange {
    pub min: u64,
    pub max: u64,
}

impl Default for SizeRange {
    fn default() -> Self {
        SizeRange {
            min: 1000,
            max: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BubbleParams {
    pub k: usize,
    pub familiar_threshold_s: f64,
    pub window_s: f64,
}

impl Default for BubbleParams {
    fn default() -> Self {
        let c = CommunityParams::default();
        BubbleParams {
            k: c.k,
            familiar_threshold_s: c.familiar_threshold,
            window_s: DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SprayParams {
    pub copies: u32,
}

impl Default for SprayParams {
    fn default() -> Self {
        SprayParams { copies: 10 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    pub dlife: ImportanceParams,
    pub bubble_rap: BubbleParams,
    pub spray_and_wait: SprayParams,
}

impl ProtocolParams {
    pub fn protocol(&self, kind: ProtocolKind) -> Protocol {
        match kind {
            ProtocolKind::Scorp => Protocol::Scorp,
            ProtocolKind::Dlife => Protocol::Dlife(self.dlife),
            ProtocolKind::BubbleRap => Protocol::BubbleRap {
                community: CommunityParams {
                    k: self.bubble_rap.k,
                    familiar_threshold: self.bubble_rap.familiar_threshold_s,
                },
                window: self.bubble_rap.window_s,
            },
            ProtocolKind::SprayAndWait => Protocol::SprayAndWait {
                copies: self.spray_and_wait.copies,
            },
        }
    }
}

/// Creation rate for source-driven traffic, chosen by load: the first step
/// whose `up_to_load` is at least the sweep's msg/int value applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateStep {
    pub up_to_load: u32,
    pub per_day: f64,
}

fn default_rates() -> Vec<RateStep> {
    vec![
        RateStep {
            up_to_load: 10,
            per_day: 35.0,
        },
        RateStep {
            up_to_load: 20,
            per_day: 70.0,
        },
        RateStep {
            up_to_load: 35,
            per_day: 140.0,
        },
    ]
}

fn default_types() -> u32 {
    35
}

fn default_rate() -> f64 {
    35.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeInterests {
    pub node: u32,
    pub types: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitMessage {
    pub source: u32,
    #[serde(default)]
    pub destination: Option<u32>,
    #[serde(default)]
    pub content_type: Option<u32>,
    #[serde(default)]
    pub created_at_s: f64,
    /// Drawn from `message_size` when absent.
    #[serde(default)]
    pub size: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Workload {
    /// One source, every other node a receiver. With msg/int `n`, SCORP
    /// receivers each hold `n` of `types` content types; source-driven
    /// protocols send `n` messages to every receiver instead.
    OneToMany {
        #[serde(default)]
        source: u32,
        #[serde(default = "default_types")]
        types: u32,
        #[serde(default)]
        created_at_s: f64,
        #[serde(default = "default_rates")]
        rates: Vec<RateStep>,
    },
    /// Members of each group share one random interest set. Source-driven
    /// protocols get one addressed message per (type, interested node).
    Groups {
        #[serde(default)]
        source: u32,
        types: u32,
        groups: Vec<Vec<u32>>,
        #[serde(default)]
        interests_per_group: Option<u32>,
        /// Solve for per-group interest counts reaching this many expected
        /// deliveries.
        #[serde(default)]
        target_expected: Option<u64>,
        #[serde(default)]
        created_at_s: f64,
        #[serde(default = "default_rate")]
        rate_per_day: f64,
    },
    Explicit {
        #[serde(default)]
        interests: Vec<NodeInterests>,
        messages: Vec<ExplicitMessage>,
    },
}

impl Workload {
    pub fn kind(&self) -> &'static str {
        match self {
            Workload::OneToMany { .. } => "one_to_many",
            Workload::Groups { .. } => "groups",
            Workload::Explicit { .. } => "explicit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub protocols: Vec<ProtocolKind>,
    pub ttl_s: Vec<f64>,
    #[serde(default)]
    pub msg_int: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{level}: {}: {}", self.field, self.message)
    }
}

impl From<ConfigError> for Diagnostic {
    fn from(e: ConfigError) -> Self {
        Diagnostic {
            severity: Severity::Error,
            field: e.field,
            message: e.reason,
        }
    }
}

/// Parses a spec, reporting JSON errors with their line and column.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec, ConfigError> {
    serde_json::from_str(text).map_err(|e| {
        ConfigError::new(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })
}

impl ExperimentSpec {
    pub fn clock(&self) -> Result<SampleClock, ConfigError> {
        SampleClock::per_day(self.samples_per_day)
            .map_err(|e| ConfigError::new("samples_per_day", e.to_string()))
    }

    pub fn capacity(&self) -> Result<Capacity, ConfigError> {
        self.buffer.bytes.resolve("buffer.bytes")
    }

    /// Sweep points in output order: protocol, then TTL, then msg/int.
    pub fn points(&self) -> Vec<(ProtocolKind, f64, Option<u32>)> {
        let loads: Vec<Option<u32>> = if self.sweep.msg_int.is_empty() {
            vec![None]
        } else {
            self.sweep.msg_int.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for &p in &self.sweep.protocols {
            for &ttl in &self.sweep.ttl_s {
                for &m in &loads {
                    out.push((p, ttl, m));
                }
            }
        }
        out
    }

    /// Every problem found without running anything.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out: Vec<Diagnostic> = Vec::new();
        let mut error = |field: &str, message: String| {
            out.push(Diagnostic {
                severity: Severity::Error,
                field: field.to_string(),
                message,
            })
        };
        if self.name.is_empty() {
            error("name", "must not be empty".into());
        }
        if self.nodes < 2 {
            error("nodes", "need at least two nodes".into());
        }
        if let Some(d) = self.duration_s {
            if !(d > 0.0 && d.is_finite()) {
                error("duration_s", "must be positive and finite".into());
            }
        }
        if let Err(e) = self.clock() {
            error(&e.field, e.reason);
        }
        if let Err(e) = self.capacity() {
            error(&e.field, e.reason);
        }
        for (node, cap) in &self.buffer.overrides {
            let field = format!("buffer.overrides.{node}");
            if let Err(e) = cap.resolve(&field) {
                error(&e.field, e.reason);
            }
            if *node as usize >= self.nodes {
                error(&field, format!("node {node} outside 0..{}", self.nodes));
            }
        }
        if self.message_size.min == 0 || self.message_size.min > self.message_size.max {
            error(
                "message_size",
                format!("need 0 < min ({}) <= max ({})", self.message_size.min, self.message_size.max),
            );
        }
        if self.seeds == 0 {
            error("seeds", "must be at least 1".into());
        }
        if self.sweep.protocols.is_empty() {
            error("sweep.protocols", "at least one protocol".into());
        }
        if self.sweep.ttl_s.is_empty() {
            error("sweep.ttl_s", "at least one TTL".into());
        }
        for (i, ttl) in self.sweep.ttl_s.iter().enumerate() {
            if !(*ttl > 0.0) {
                error(&format!("sweep.ttl_s[{i}]"), format!("TTL {ttl} must be > 0"));
            }
        }
        let distinct: BTreeSet<ProtocolKind> = self.sweep.protocols.iter().copied().collect();
        if distinct.len() != self.sweep.protocols.len() {
            error("sweep.protocols", "listed twice".into());
        }
        match &self.trace {
            TraceSource::File(path) if path.as_os_str().is_empty() => error("trace.file", "empty path".into()),
            TraceSource::File(_) => {}
            TraceSource::Synthetic(cfg) => {
                if let Err(e) = cfg.validate() {
                    error(&format!("trace.synthetic.{}", e.field), e.reason);
                }
                if let Some(n) = cfg.nodes().iter().find(|n| n.0 as usize >= self.nodes) {
                    error("trace.synthetic.groups", format!("node {n} outside 0..{}", self.nodes));
                }
                if let Some(d) = self.duration_s {
                    if d < f64::from(cfg.days) * SECONDS_PER_DAY {
                        error("duration_s", format!("shorter than the {} generated days", cfg.days));
                    }
                }
            }
        }
        self.workload_diagnostics(&mut out);
        out.extend(self.size_warnings());
        out
    }

    fn workload_diagnostics(&self, out: &mut Vec<Diagnostic>) {
        let mut error = |field: String, message: String| {
            out.push(Diagnostic {
                severity: Severity::Error,
                field,
                message,
            })
        };
        let node_ok = |n: u32| (n as usize) < self.nodes;
        match &self.workload {
            Workload::OneToMany {
                source, types, rates, ..
            } => {
                if !node_ok(*source) {
                    error("workload.source".into(), format!("node {source} outside 0..{}", self.nodes));
                }
                if self.sweep.msg_int.is_empty() {
                    error("sweep.msg_int".into(), "one_to_many needs at least one load".into());
                }
                let scorp = self.sweep.protocols.contains(&ProtocolKind::Scorp);
                let source_driven = self.sweep.protocols.iter().any(|p| !p.is_receiver_driven());
                for &m in &self.sweep.msg_int {
                    if m == 0 {
                        error("sweep.msg_int".into(), "loads must be >= 1".into());
                    }
                    if scorp && m > *types {
                        error("sweep.msg_int".into(), format!("load {m} exceeds the {types} content types"));
                    }
                    if source_driven && !rates.iter().any(|r| r.up_to_load >= m) {
                        error("workload.rates".into(), format!("no rate step covers load {m}"));
                    }
                }
                for (i, r) in rates.iter().enumerate() {
                    if !(r.per_day > 0.0) {
                        error(format!("workload.rates[{i}].per_day"), "must be > 0".into());
                    }
                }
            }
            Workload::Groups {
                source,
                types,
                groups,
                interests_per_group,
                target_expected,
                rate_per_day,
                ..
            } => {
                if !node_ok(*source) {
                    error("workload.source".into(), format!("node {source} outside 0..{}", self.nodes));
                }
                let mut seen = BTreeSet::new();
                for (g, members) in groups.iter().enumerate() {
                    for &m in members {
                        if !node_ok(m) || m == *source || !seen.insert(m) {
                            error(
                                format!("workload.groups[{g}]"),
                                format!("member {m} is out of range, the source, or repeated"),
                            );
                        }
                    }
                }
                let sources = [
                    !self.sweep.msg_int.is_empty(),
                    interests_per_group.is_some(),
                    target_expected.is_some(),
                ];
                if sources.iter().filter(|&&b| b).count() != 1 {
                    error(
                        "workload".into(),
                        "give exactly one of sweep.msg_int, interests_per_group, target_expected".into(),
                    );
                }
                for m in self.sweep.msg_int.iter().chain(interests_per_group.iter()) {
                    if m > types {
                        error("workload".into(), format!("{m} interests exceed the {types} content types"));
                    }
                }
                if !(*rate_per_day > 0.0) {
                    error("workload.rate_per_day".into(), "must be > 0".into());
                }
            }
            Workload::Explicit { interests, messages } => {
                if !self.sweep.msg_int.is_empty() {
                    error("sweep.msg_int".into(), "not used by explicit workloads".into());
                }
                for (i, entry) in interests.iter().enumerate() {
                    if !node_ok(entry.node) {
                        error(format!("workload.interests[{i}]"), format!("node {} outside 0..{}", entry.node, self.nodes));
                    }
                }
                let scorp = self.sweep.protocols.contains(&ProtocolKind::Scorp);
                let source_driven: Vec<ProtocolKind> =
                    self.sweep.protocols.iter().copied().filter(|p| !p.is_receiver_driven()).collect();
                let mut skipped = 0;
                for (i, m) in messages.iter().enumerate() {
                    let field = format!("workload.messages[{i}]");
                    if !node_ok(m.source) {
                        error(field.clone(), format!("source {} outside 0..{}", m.source, self.nodes));
                    }
                    match (m.destination, m.content_type) {
                        (Some(d), None) => {
                            if !node_ok(d) || d == m.source {
                                error(field, format!("invalid destination {d}"));
                            } else if scorp {
                                error(field, "scorp needs content-addressed traffic, not a destination".into());
                            }
                        }
                        (None, Some(_)) => skipped += 1,
                        _ => error(field, "give exactly one of destination, content_type".into()),
                    }
                }
                if skipped > 0 && !source_driven.is_empty() {
                    let names: Vec<&str> = source_driven.iter().map(|p| p.name()).collect();
                    out.push(Diagnostic {
                        severity: Severity::Warning,
                        field: "workload.messages".into(),
                        message: format!(
                            "{skipped} content-addressed messages have no destination and are skipped for {}",
                            names.join(", ")
                        ),
                    });
                }
            }
        }
    }

    fn size_warnings(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut check = |field: String, cap: Capacity| {
            let Capacity::Limited(bytes) = cap else {
                return;
            };
            let SizeRange { min, max } = self.message_size;
            let message = if min > bytes {
                format!("every message ({min}..{max} B) exceeds the {bytes} B buffer and will be dropped as no-fit")
            } else if max > bytes {
                format!("messages above {bytes} B (sizes reach {max} B) do not fit and will be dropped")
            } else {
                return;
            };
            out.push(Diagnostic {
                severity: Severity::Warning,
                field,
                message,
            });
        };
        if let Ok(cap) = self.capacity() {
            check("buffer.bytes".into(), cap);
        }
        for (node, spec) in &self.buffer.overrides {
            let field = format!("buffer.overrides.{node}");
            if let Ok(cap) = spec.resolve(&field) {
                check(field, cap);
            }
        }
        out
    }

    /// First error from [`ExperimentSpec::diagnostics`].
    pub fn check(&self) -> Result<(), ConfigError> {
        match self.diagnostics().into_iter().find(|d| d.severity == Severity::Error) {
            Some(d) => Err(ConfigError::new(d.field, d.message)),
            None => Ok(()),
        }
    }

    /// Node capacity overrides as engine values.
    pub fn overrides(&self) -> Result<BTreeMap<NodeId, Capacity>, ConfigError> {
        self.buffer
            .overrides
            .iter()
            .map(|(n, c)| Ok((NodeId(*n), c.resolve(&format!("buffer.overrides.{n}"))?)))
            .collect()
    }
}
