//! Pipeline stages over a [`Store`]. Each stage hashes its configuration
//! together with its predecessor's hash and skips work when the manifest
//! already holds that hash.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::{info, warn};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::alignment::{align_chain, AlignConfig, AlignmentRelation};
use crate::embedding::{embed_topology_from, EmbedConfig, EmbedMethod, EmbeddingSpace, Trained};
use crate::error::{Error, Result};
use crate::ingest::{
    build_timestamp_graphs_with, default_rules, group_snapshots, parse_events, parse_status, write_events, IngestConfig, InteractionEvent, LogFormat, PlayerId,
    Snapshot, TimestampGraph, DEFAULT_WEEK_ANCHOR_SECS,
};
use crate::metrics::{compute_node_metrics, compute_overview, NodeMetricRow, Topology};
use crate::roles::{
    assign_roles, assign_roles_per_timestamp, compute_flows, evaluate_clustering, match_role_identities, mean_time_entropy, time_distribution_report, EvaluationReport,
    InstanceTable, RoleConfig, SnapshotRoles, TimeDistributionRow, TransitionFlow,
};
use crate::seed::stage_seed;
use crate::store::{config_hash, sha256_hex, Store};

pub const STAGES: [&str; 6] = ["ingest", "metrics", "embed", "align", "roles", "eval"];
pub const PRIMARY_METHOD: EmbedMethod = EmbedMethod::Struc2vec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub window_hours: f64,
    pub week_anchor_secs: i64,
    pub snapshot_size: usize,
    pub dims: usize,
    pub tau: f64,
    /// Embedding methods to run; the first struc2vec run feeds the views.
    pub methods: Vec<EmbedMethod>,
    pub embed: EmbedConfig,
    pub align: AlignConfig,
    pub roles: RoleConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            window_hours: 6.0,
            week_anchor_secs: DEFAULT_WEEK_ANCHOR_SECS,
            snapshot_size: 3,
            dims: 128,
            tau: 0.3,
            methods: vec![EmbedMethod::Struc2vec, EmbedMethod::Deepwalk],
            embed: EmbedConfig::default(),
            align: AlignConfig::default(),
            roles: RoleConfig::default(),
        }
    }
}

impl PipelineConfig {
    fn embed_config(&self, method: EmbedMethod) -> EmbedConfig {
        let mut c = self.embed;
        c.method = method;
        c.skipgram.dims = self.dims;
        c
    }

    fn role_config(&self) -> RoleConfig {
        RoleConfig {
            tau: self.tau,
            seed: stage_seed(self.seed, "roles", 0),
            ..self.roles
        }
    }
}

/// Directory holding a method's embeddings, alignment and roles. The primary
/// method lives at the store root.
pub fn method_dir(method: EmbedMethod) -> String {
    if method == PRIMARY_METHOD {
        String::new()
    } else {
        format!("baseline/{}/", method.as_str())
    }
}

/// Label used in evaluation reports.
pub fn method_label(method: EmbedMethod) -> String {
    format!("{}_align", method.as_str())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub hash: String,
    pub cached: bool,
}

fn finish(store: &Store, stage: &'static str, hash: String, outputs: Vec<String>) -> Result<StageOutcome> {
    let pos = STAGES.iter().position(|s| *s == stage).expect("known stage");
    store.record_stage(stage, hash.clone(), outputs, &STAGES[pos + 1..])?;
    info!("stage {stage} done");
    Ok(StageOutcome { stage, hash, cached: false })
}

fn cached(store: &Store, stage: &'static str, hash: &str) -> Result<Option<StageOutcome>> {
    if store.is_fresh(stage, hash)? {
        info!("stage {stage} is up to date");
        return Ok(Some(StageOutcome {
            stage,
            hash: hash.to_owned(),
            cached: true,
        }));
    }
    if store.manifest()?.stages.contains_key(stage) {
        warn!("stage {stage}: configuration or inputs changed, recomputing");
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct IngestReport {
    pub total_records: usize,
    pub event_count: usize,
    pub player_count: usize,
    pub timestamp_count: usize,
    pub snapshot_count: usize,
    pub window_hours: f64,
    pub snapshot_size: usize,
    pub skipped: Vec<SkippedLine>,
}

pub fn timestamp_path(t: usize) -> String {
    format!("timestamps/{t}.json")
}

/// Parses the log (CSV when the file ends in `.csv`), builds the timestamp
/// graphs and groups them into snapshots.
pub fn run_ingest(store: &Store, events_path: &Path, status_path: Option<&Path>, cfg: &PipelineConfig) -> Result<StageOutcome> {
    let events_bytes = fs::read(events_path)?;
    let status_bytes = status_path.map(fs::read).transpose()?;
    let ingest_cfg = IngestConfig {
        window_hours: cfg.window_hours,
        week_anchor_secs: cfg.week_anchor_secs,
        rules: default_rules(),
    };
    let inputs = (sha256_hex(&events_bytes), status_bytes.as_deref().map(sha256_hex), &ingest_cfg, cfg.snapshot_size);
    let hash = config_hash("ingest", "", &inputs)?;
    if let Some(o) = cached(store, "ingest", &hash)? {
        return Ok(o);
    }
    let format = match events_path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => LogFormat::Csv,
        _ => LogFormat::Jsonl,
    };
    let log = parse_events(&events_bytes[..], format)?;
    for s in &log.skipped {
        warn!("skipped record {}: {}", s.line, s.reason);
    }
    let status = match &status_bytes {
        Some(b) => parse_status(&b[..])?,
        None => Vec::new(),
    };
    let out = build_timestamp_graphs_with(&log.events, &status, &ingest_cfg)?;
    let snapshots = group_snapshots(out.graphs.len(), cfg.snapshot_size)?;

    let mut outputs = Vec::new();
    for g in &out.graphs {
        let p = timestamp_path(g.index);
        store.write_json(&p, g)?;
        outputs.push(p);
    }
    store.write_json("snapshots.json", &snapshots)?;
    let mut buf = Vec::new();
    write_events(&mut buf, &log.events)?;
    store.write_bytes("log/events.jsonl", &buf)?;
    let players: std::collections::BTreeSet<&str> = log
        .events
        .iter()
        .flat_map(|e| std::iter::once(e.actor.as_str()).chain(e.target.as_deref()))
        .collect();
    let report = IngestReport {
        total_records: log.total_records,
        event_count: log.events.len(),
        player_count: players.len(),
        timestamp_count: out.graphs.len(),
        snapshot_count: snapshots.len(),
        window_hours: cfg.window_hours,
        snapshot_size: cfg.snapshot_size,
        skipped: log.skipped.iter().map(|s| SkippedLine { line: s.line, reason: s.reason.clone() }).collect(),
    };
    store.write_json("ingest_report.json", &report)?;
    outputs.extend(["snapshots.json".into(), "log/events.jsonl".into(), "ingest_report.json".into()]);
    store.set_summary("ingest", serde_json::to_value(&report)?)?;
    store.set_summary("config", serde_json::to_value(cfg)?)?;
    finish(store, "ingest", hash, outputs)
}

pub fn load_graphs(store: &Store) -> Result<Vec<TimestampGraph>> {
    store.stage_hash("ingest")?;
    let report: IngestReport = store.read_json("ingest_report.json")?;
    (0..report.timestamp_count).map(|t| store.read_json(&timestamp_path(t))).collect()
}

pub fn load_snapshots(store: &Store) -> Result<Vec<Snapshot>> {
    store.stage_hash("ingest")?;
    store.read_json("snapshots.json")
}

pub fn load_events(store: &Store) -> Result<Vec<InteractionEvent>> {
    store.stage_hash("ingest")?;
    let f = fs::File::open(store.path("log/events.jsonl"))?;
    Ok(parse_events(f, LogFormat::Jsonl)?.events)
}

pub fn metrics_path(t: usize) -> String {
    format!("metrics/{t}.json")
}

pub fn run_metrics(store: &Store, cfg: &PipelineConfig) -> Result<StageOutcome> {
    let parent = store.stage_hash("ingest")?;
    let hash = config_hash("metrics", &parent, &cfg.seed)?;
    if let Some(o) = cached(store, "metrics", &hash)? {
        return Ok(o);
    }
    let graphs = load_graphs(store)?;
    let mut outputs = Vec::new();
    for g in &graphs {
        let rows = compute_node_metrics(g, stage_seed(cfg.seed, "metrics", g.index as u64));
        let p = metrics_path(g.index);
        store.write_json(&p, &rows)?;
        outputs.push(p);
    }
    finish(store, "metrics", hash, outputs)
}

pub fn load_metric_rows(store: &Store) -> Result<Vec<NodeMetricRow>> {
    store.stage_hash("metrics")?;
    let report: IngestReport = store.read_json("ingest_report.json")?;
    let mut rows = Vec::new();
    for t in 0..report.timestamp_count {
        rows.extend(store.read_json::<Vec<NodeMetricRow>>(&metrics_path(t))?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub method: EmbedMethod,
    pub dims: usize,
    pub seed: u64,
    pub config: EmbedConfig,
    pub timestamps: usize,
}

pub fn run_embed(store: &Store, cfg: &PipelineConfig) -> Result<StageOutcome> {
    let parent = store.stage_hash("ingest")?;
    let methods: Vec<EmbedConfig> = cfg.methods.iter().map(|&m| cfg.embed_config(m)).collect();
    let hash = config_hash("embed", &parent, &(cfg.seed, &methods))?;
    if let Some(o) = cached(store, "embed", &hash)? {
        return Ok(o);
    }
    let graphs = load_graphs(store)?;
    let mut outputs = Vec::new();
    for ec in &methods {
        let dir = method_dir(ec.method);
        let mut prev: Option<Trained> = None;
        for g in &graphs {
            let topo = Topology::from_graph(g);
            let warm = if ec.warm_start { prev.as_ref() } else { None };
            let trained = embed_topology_from(&topo, g.index, &ec.seeded(cfg.seed, g.index), warm)?;
            let space = &trained.space;
            let stem = format!("{dir}embeddings/{}", g.index);
            store.write_embedding(&stem, space)?;
            outputs.extend([format!("{stem}.bin"), format!("{stem}.json")]);
            info!("embedded timestamp {} with {} ({} nodes)", g.index, ec.method.as_str(), topo.len());
            if !trained.space.is_empty() {
                prev = Some(trained);
            }
        }
        let meta = EmbeddingMeta {
            method: ec.method,
            dims: cfg.dims,
            seed: cfg.seed,
            config: *ec,
            timestamps: graphs.len(),
        };
        let p = format!("{dir}embeddings/meta.json");
        store.write_json(&p, &meta)?;
        outputs.push(p);
    }
    finish(store, "embed", hash, outputs)
}

fn require_method(store: &Store, method: EmbedMethod) -> Result<()> {
    let p = format!("{}embeddings/meta.json", method_dir(method));
    if !store.exists(&p) {
        return Err(Error::invalid(format!("method {} was not embedded; add it to the embed stage", method.as_str())));
    }
    Ok(())
}

pub fn load_embeddings(store: &Store, method: EmbedMethod) -> Result<Vec<EmbeddingSpace>> {
    store.stage_hash("embed")?;
    require_method(store, method)?;
    let meta: EmbeddingMeta = store.read_json(&format!("{}embeddings/meta.json", method_dir(method)))?;
    (0..meta.timestamps).map(|t| store.read_embedding(&format!("{}embeddings/{t}", method_dir(method)))).collect()
}

pub fn relation_path(method: EmbedMethod, from: usize, to: usize) -> String {
    format!("{}alignment/{from}_{to}.json", method_dir(method))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AlignmentSummary {
    pub relations: usize,
    pub segments: Vec<Vec<usize>>,
}

pub fn run_align(store: &Store, cfg: &PipelineConfig) -> Result<StageOutcome> {
    let parent = store.stage_hash("embed")?;
    let acfg = AlignConfig {
        seed: stage_seed(cfg.seed, "align", 0),
        ..cfg.align
    };
    let hash = config_hash("align", &parent, &(&cfg.methods, &acfg))?;
    if let Some(o) = cached(store, "align", &hash)? {
        return Ok(o);
    }
    let mut outputs = Vec::new();
    for &m in &cfg.methods {
        let spaces = load_embeddings(store, m)?;
        let chain = align_chain(&spaces, &acfg)?;
        for rel in &chain.relations {
            let p = relation_path(m, rel.from_t, rel.to_t);
            store.write_json(&p, rel)?;
            outputs.push(p);
        }
        for s in &chain.spaces {
            let stem = format!("{}alignment/aligned/{}", method_dir(m), s.timestamp);
            store.write_embedding(&stem, s)?;
            outputs.extend([format!("{stem}.bin"), format!("{stem}.json")]);
        }
        let p = format!("{}alignment/summary.json", method_dir(m));
        store.write_json(
            &p,
            &AlignmentSummary {
                relations: chain.relations.len(),
                segments: chain.segments.clone(),
            },
        )?;
        outputs.push(p);
    }
    finish(store, "align", hash, outputs)
}

pub fn load_aligned(store: &Store, method: EmbedMethod) -> Result<Vec<EmbeddingSpace>> {
    store.stage_hash("align")?;
    require_method(store, method)?;
    let summary: AlignmentSummary = store.read_json(&format!("{}alignment/summary.json", method_dir(method)))?;
    let n = summary.segments.iter().map(Vec::len).sum::<usize>();
    (0..n).map(|t| store.read_embedding(&format!("{}alignment/aligned/{t}", method_dir(method)))).collect()
}

pub fn load_relations(store: &Store, method: EmbedMethod) -> Result<Vec<AlignmentRelation>> {
    let spaces = load_aligned(store, method)?.len();
    (1..spaces).map(|t| store.read_json(&relation_path(method, t - 1, t))).collect()
}

pub fn roles_path(method: EmbedMethod, snapshot: usize) -> String {
    format!("{}roles/{snapshot}.json", method_dir(method))
}

pub fn flows_path(method: EmbedMethod) -> String {
    format!("{}flows.json", method_dir(method))
}

/// Projects, clusters, colors and links the roles of every snapshot.
pub fn compute_roles(aligned: &[EmbeddingSpace], snapshots: &[Snapshot], table: &InstanceTable, rcfg: &RoleConfig) -> Result<(Vec<SnapshotRoles>, Vec<TransitionFlow>)> {
    let mut all = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        let spaces: Vec<&EmbeddingSpace> = s.timestamp_indices.iter().filter_map(|&t| aligned.get(t)).collect();
        all.push(assign_roles(s, &spaces, table, rcfg)?);
    }
    match_role_identities(&mut all, rcfg.tau)?;
    let flows = compute_flows(&all);
    Ok((all, flows))
}

pub fn run_roles(store: &Store, cfg: &PipelineConfig) -> Result<StageOutcome> {
    let parent = format!("{}{}", store.stage_hash("align")?, store.stage_hash("metrics")?);
    let rcfg = cfg.role_config();
    let hash = config_hash("roles", &parent, &(&cfg.methods, &rcfg))?;
    if let Some(o) = cached(store, "roles", &hash)? {
        return Ok(o);
    }
    let graphs = load_graphs(store)?;
    let snapshots = load_snapshots(store)?;
    let rows = load_metric_rows(store)?;
    let table = InstanceTable::new(&rows, &graphs);
    let mut outputs = Vec::new();
    for &m in &cfg.methods {
        let aligned = load_aligned(store, m)?;
        let (roles, flows) = compute_roles(&aligned, &snapshots, &table, &rcfg)?;
        for r in &roles {
            let p = roles_path(m, r.snapshot);
            store.write_json(&p, r)?;
            outputs.push(p);
        }
        store.write_json(&flows_path(m), &flows)?;
        outputs.push(flows_path(m));
        if m == PRIMARY_METHOD {
            let labels: BTreeMap<(PlayerId, usize), u32> = roles
                .iter()
                .flat_map(|s| s.points.iter().map(move |p| ((p.player.clone(), p.timestamp), s.clusters[p.cluster as usize].color_id)))
                .collect();
            store.write_json("overview.json", &compute_overview(&graphs, &rows, &labels))?;
            outputs.push("overview.json".into());
        }
    }
    finish(store, "roles", hash, outputs)
}

pub fn load_roles(store: &Store, method: EmbedMethod) -> Result<Vec<SnapshotRoles>> {
    store.stage_hash("roles")?;
    let snapshots = load_snapshots(store)?;
    if !store.exists(&flows_path(method)) {
        return Err(Error::invalid(format!("roles were not computed for {}", method.as_str())));
    }
    snapshots.iter().map(|s| store.read_json(&roles_path(method, s.index))).collect()
}

pub fn load_flows(store: &Store, method: EmbedMethod) -> Result<Vec<TransitionFlow>> {
    store.stage_hash("roles")?;
    store.read_json(&flows_path(method))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TemporalDiversity {
    /// Mean member-timestamp entropy of the aligned clusters.
    pub aligned: f64,
    /// Same, when every timestamp is clustered on its own.
    pub per_timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Evaluation {
    pub reports: Vec<EvaluationReport>,
    pub temporal_diversity: TemporalDiversity,
    pub time_distribution: Vec<TimeDistributionRow>,
}

/// Metric rows and global cluster labels of every clustered instance.
pub fn labelled_rows(roles: &[SnapshotRoles], table: &InstanceTable) -> (Vec<[f64; 6]>, Vec<u32>) {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut offset = 0u32;
    for s in roles {
        for c in &s.clusters {
            for m in &c.members {
                rows.push(table.metrics.get(m).copied().unwrap_or([0.0; 6]));
                labels.push(offset + c.cluster_id);
            }
        }
        offset += s.clusters.len() as u32;
    }
    (rows, labels)
}

pub fn run_eval(store: &Store, cfg: &PipelineConfig) -> Result<StageOutcome> {
    let parent = store.stage_hash("roles")?;
    let rcfg = cfg.role_config();
    let hash = config_hash("eval", &parent, &(&cfg.methods, &rcfg))?;
    if let Some(o) = cached(store, "eval", &hash)? {
        return Ok(o);
    }
    let graphs = load_graphs(store)?;
    let rows = load_metric_rows(store)?;
    let table = InstanceTable::new(&rows, &graphs);
    let snapshots = load_snapshots(store)?;
    let mut reports = Vec::new();
    for &m in &cfg.methods {
        let roles = load_roles(store, m)?;
        let (r, l) = labelled_rows(&roles, &table);
        reports.push(evaluate_clustering(&method_label(m), &r, &l)?);
    }
    let primary = load_roles(store, PRIMARY_METHOD)?;
    let clusters: Vec<_> = primary.iter().flat_map(|s| s.clusters.iter().cloned()).collect();
    let aligned = load_aligned(store, PRIMARY_METHOD)?;
    let mut baseline = Vec::new();
    for s in &snapshots {
        let spaces: Vec<&EmbeddingSpace> = s.timestamp_indices.iter().filter_map(|&t| aligned.get(t)).collect();
        baseline.extend(assign_roles_per_timestamp(s, &spaces, &table, &rcfg)?);
    }
    let eval = Evaluation {
        reports,
        temporal_diversity: TemporalDiversity {
            aligned: mean_time_entropy(&clusters),
            per_timestamp: mean_time_entropy(&baseline),
        },
        time_distribution: time_distribution_report(&clusters),
    };
    store.write_json("evaluation.json", &eval)?;
    finish(store, "eval", hash, vec!["evaluation.json".into()])
}

/// Runs every stage after ingest.
pub fn run_all(store: &Store, events_path: &Path, status_path: Option<&Path>, cfg: &PipelineConfig) -> Result<Vec<StageOutcome>> {
    Ok(vec![
        run_ingest(store, events_path, status_path, cfg)?,
        run_metrics(store, cfg)?,
        run_embed(store, cfg)?,
        run_align(store, cfg)?,
        run_roles(store, cfg)?,
        run_eval(store, cfg)?,
    ])
}

/// Configuration the store was last ingested with, if any.
pub fn stored_config(store: &Store) -> Result<Option<PipelineConfig>> {
    Ok(match store.manifest()?.summary.get("config") {
        Some(v) => Some(serde_json::from_value(v.clone())?),
        None => None,
    })
}
