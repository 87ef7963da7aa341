//! Sweeps over protocols, TTLs and msg/int loads, several seeds each, and
//! aggregates every sweep point into one CSV row.

mod spec;
mod workload;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

pub use spec::{
    parse_spec, BubbleParams, BufferSpec, CapacitySpec, Diagnostic, ExperimentSpec, ExplicitMessage, NodeInterests, ProtocolParams,
    RateStep, Severity, SizeRange, SprayParams, Sweep, TraceSource, Workload,
};
pub use workload::{describe_layout, drafts, finalize, layout, solve_group_interests, Draft, Layout};

use crate::engine::{self, expected_deliveries, ConfigError, EngineError, RunResult, Scenario};
use crate::model::Contact;
use crate::protocols::ProtocolKind;
use crate::report::{self, fmt_g, metadata_text, render_csv, ReportError, SweepRow};
use crate::traces::{self, generate_synthetic};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("trace error: {0}")]
    Trace(String),
}

impl From<EngineError> for ExperimentError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(c) => ExperimentError::Config(c),
            EngineError::Trace(t) => ExperimentError::Trace(t.to_string()),
        }
    }
}

/// Receives one line per finished run.
pub type Progress = Box<dyn Fn(&str) + Send + Sync>;

#[derive(Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
    /// Run `i` of every sweep point uses seed `seed_base + i`.
    pub seed_base: u64,
    /// Called once per finished run with a one-line summary.
    pub progress: Option<Progress>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<SweepRow>,
    pub csv: String,
    pub metadata: String,
    pub runs: usize,
}

/// Loads or generates the trace for every seed. A file trace is shared.
pub fn load_traces(
    spec: &ExperimentSpec,
    base_dir: &Path,
    seeds: &[u64],
) -> Result<Vec<Arc<Vec<Contact>>>, ExperimentError> {
    match &spec.trace {
        TraceSource::File(path) => {
            let full = base_dir.join(path);
            let file = File::open(&full).map_err(|e| ExperimentError::Trace(format!("{}: {e}", full.display())))?;
            let trace = traces::parse_trace(BufReader::new(file))
                .map_err(|e| ExperimentError::Trace(format!("{}: {e}", full.display())))?;
            let shared = Arc::new(trace);
            Ok(seeds.iter().map(|_| Arc::clone(&shared)).collect())
        }
        TraceSource::Synthetic(cfg) => seeds
            .iter()
            .map(|&s| {
                let mut cfg = cfg.clone();
                cfg.seed = cfg.seed.wrapping_add(s);
                generate_synthetic(&cfg)
                    .map(Arc::new)
                    .map_err(|e| ExperimentError::Config(ConfigError::new(format!("trace.synthetic.{}", e.field), e.reason)))
            })
            .collect(),
    }
}

fn duration(spec: &ExperimentSpec, traces: &[Arc<Vec<Contact>>]) -> f64 {
    if let Some(d) = spec.duration_s {
        return d;
    }
    match &spec.trace {
        TraceSource::Synthetic(cfg) => f64::from(cfg.days) * crate::model::SECONDS_PER_DAY,
        TraceSource::File(_) => traces
            .iter()
            .flat_map(|t| t.iter().map(|c| c.end().secs()))
            .fold(0.0, f64::max)
            .ceil()
            .max(1.0),
    }
}

/// The engine scenario for one sweep point and seed.
pub fn scenario_for(
    spec: &ExperimentSpec,
    protocol: ProtocolKind,
    ttl: f64,
    load: Option<u32>,
    layout: &Layout,
    run_seed: u64,
    duration: f64,
) -> Result<Scenario, ConfigError> {
    let mut s = Scenario::new(spec.nodes, spec.protocol_params.protocol(protocol), duration);
    s.interests = layout.interests.clone();
    s.buffer = spec.capacity()?;
    s.buffer_overrides = spec.overrides()?;
    s.transfer = spec.transfer;
    s.clock = spec.clock()?;
    let drafts = drafts(spec, protocol, load, layout)?;
    if let Some(late) = drafts.iter().find(|d| d.created_at >= duration) {
        return Err(ConfigError::new(
            "workload",
            format!(
                "{} messages for {protocol} need creation times up to {}s but the run ends at {duration}s",
                drafts.len(),
                late.created_at
            ),
        ));
    }
    s.messages = finalize(spec, &drafts, ttl, run_seed);
    Ok(s)
}

struct Job {
    point: usize,
    seed_index: usize,
}

pub fn run_experiment(spec: &ExperimentSpec, base_dir: &Path, options: &RunOptions) -> Result<ExperimentOutput, ExperimentError> {
    spec.check()?;
    let seeds: Vec<u64> = (0..u64::from(spec.seeds)).map(|i| options.seed_base.wrapping_add(i)).collect();
    let traces = load_traces(spec, base_dir, &seeds)?;
    let duration = duration(spec, &traces);
    let points = spec.points();

    let mut layouts: BTreeMap<Option<u32>, Layout> = BTreeMap::new();
    for &(_, _, load) in &points {
        if let std::collections::btree_map::Entry::Vacant(e) = layouts.entry(load) {
            e.insert(layout(spec, load)?);
        }
    }
    // materialize seed 0 of every point up front so config errors surface
    // before any simulation starts
    let mut expected = Vec::with_capacity(points.len());
    for &(protocol, ttl, load) in &points {
        let s = scenario_for(spec, protocol, ttl, load, &layouts[&load], seeds[0], duration)?;
        s.validate()?;
        let e = expected_deliveries(&s);
        if e == 0 {
            return Err(ConfigError::new(
                "workload",
                format!("no deliveries expected for {protocol} at msg/int {load:?}"),
            )
            .into());
        }
        expected.push(e);
    }

    let jobs: Vec<Job> = (0..points.len())
        .flat_map(|point| (0..seeds.len()).map(move |seed_index| Job { point, seed_index }))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.unwrap_or(0))
        .build()
        .map_err(|e| ExperimentError::Config(ConfigError::new("jobs", e.to_string())))?;
    let results: Vec<RunResult> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let (protocol, ttl, load) = points[job.point];
                let seed = seeds[job.seed_index];
                let s = scenario_for(spec, protocol, ttl, load, &layouts[&load], seed, duration)?;
                let r = engine::run(&s, &traces[job.seed_index], seed)?;
                if let Some(progress) = &options.progress {
                    progress(&format!(
                        "run done: {protocol} ttl={} msg_int={} seed={seed} delivered={}/{}",
                        fmt_g(ttl),
                        load.map(|l| l.to_string()).unwrap_or_else(|| "-".into()),
                        r.deliveries.len(),
                        r.expected_deliveries
                    ));
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>, ExperimentError>>()
    })?;

    let mut rows = Vec::with_capacity(points.len());
    for (i, &(protocol, ttl, load)) in points.iter().enumerate() {
        let runs = &results[i * seeds.len()..(i + 1) * seeds.len()];
        let summary = report::summarize_with(runs, expected[i], spec.interval).map_err(|e| match e {
            ReportError::NothingExpected => ExperimentError::Config(ConfigError::new("workload", e.to_string())),
            other => ExperimentError::Config(ConfigError::new("results", other.to_string())),
        })?;
        rows.push(SweepRow {
            scenario: spec.name.clone(),
            protocol: protocol.name().to_string(),
            ttl,
            msg_int: load,
            summary,
        });
    }
    let metadata = metadata_text(&metadata(spec, options, duration, &layouts));
    Ok(ExperimentOutput {
        csv: render_csv(&rows),
        rows,
        metadata,
        runs: results.len(),
    })
}

/// Every parameter of the experiment plus the defaults that stand in for
/// unspecified modelling choices.
pub fn metadata(
    spec: &ExperimentSpec,
    options: &RunOptions,
    duration: f64,
    layouts: &BTreeMap<Option<u32>, Layout>,
) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("scenario", spec.name.clone());
    put("nodes", spec.nodes.to_string());
    put("duration_s", duration.to_string());
    put(
        "trace",
        match &spec.trace {
            TraceSource::File(p) => format!("file {}", p.display()),
            TraceSource::Synthetic(cfg) => format!("synthetic {}", serde_json::to_string(cfg).expect("plain data")),
        },
    );
    put("buffer.bytes", serde_json::to_string(&spec.buffer.bytes).expect("plain data"));
    for (node, cap) in &spec.buffer.overrides {
        put(&format!("buffer.overrides.{node}"), serde_json::to_string(cap).expect("plain data"));
    }
    put("buffer.eviction", "fifo_by_reception".into());
    put(
        "message_size_bytes",
        format!("uniform {}..={}", spec.message_size.min, spec.message_size.max),
    );
    put("transfer", serde_json::to_string(&spec.transfer).expect("plain data"));
    put("samples_per_day", spec.samples_per_day.to_string());
    put("seeds", spec.seeds.to_string());
    put("seed_base", options.seed_base.to_string());
    put("layout_seed", spec.layout_seed.to_string());
    put("workload", serde_json::to_string(&spec.workload).expect("plain data"));
    put("sweep.protocols", spec.sweep.protocols.iter().map(|p| p.name()).collect::<Vec<_>>().join(" "));
    put("sweep.ttl_s", spec.sweep.ttl_s.iter().map(|t| fmt_g(*t)).collect::<Vec<_>>().join(" "));
    put("sweep.msg_int", spec.sweep.msg_int.iter().map(u32::to_string).collect::<Vec<_>>().join(" "));
    for &kind in &spec.sweep.protocols {
        for (k, v) in spec.protocol_params.protocol(kind).describe() {
            if k != "protocol" {
                put(&k, v);
            }
        }
    }
    for (load, layout) in layouts {
        let tag = load.map(|l| l.to_string()).unwrap_or_else(|| "fixed".into());
        for (k, v) in describe_layout(layout) {
            put(&format!("layout.msg_int_{tag}.{k}"), v);
        }
    }
    put("ci", spec.interval.name().into());
    put("ci.level", "0.95".into());
    put("cost", "successful transfers (deliveries included) per delivered message".into());
    put("latency", "mean over delivered messages only".into());
    put("zero_delivery_runs", "dp=0, excluded from cost and latency".into());
    put("drops", "mean per run".into());
    put("contact_views", "social views captured at contact start".into());
    put("tie_order", "contact_down sample_boundary create_message contact_up transfer_complete".into());
    put("source_driven_schedule", "evenly spaced at the workload's daily rate".into());
    m
}
