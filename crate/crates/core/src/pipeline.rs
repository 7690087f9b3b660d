//! Dataset ingestion, multi-lead runs, buffer construction and reporting.
//!
//! Dataset rows are JSON lines `{"smiles": "...", "property": "qed", "reference": "..."}`
//! with `reference` optional. Results are JSON lines too: one campaign
//! record per row, in input order, or `{"lead", "property_id", "error"}` when
//! a lead could not be run.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffer::{BufferError, BufferHandle, StepOutcome, ToolAction, TrajectoryRecord};
use crate::evaluate::{Direction, ExternalEvaluator, PropertySpec, BUILTIN_PROPERTIES};
use crate::fingerprint::FingerprintParams;
use crate::metrics::{MetricReport, MetricsError};
use crate::molgraph::{parse_smiles, MolGraph};
use crate::orchestrate::{run_campaign, CampaignResult, Mode, OrchestrateError, RunConfig};
use crate::tools::{ToolKind, ToolProfile, ToolSpec, DEFAULT_DAMPING, DEFAULT_P_FAIL, DEFAULT_TEMPLATES};
use crate::transport::{Endpoint, TransportError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset {0} has no usable rows")]
    EmptyDataset(String),
    #[error(transparent)]
    Config(#[from] OrchestrateError),
    #[error("config file {path}: {msg}")]
    ConfigFile { path: String, msg: String },
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error("schema error in {path} line {line}: {msg}")]
    Schema { path: String, line: usize, msg: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub smiles: String,
    pub property: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

#[derive(Debug, Clone)]
pub struct IngestedRow {
    pub line: usize,
    pub entry: DatasetEntry,
    pub mol: MolGraph,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Skipped {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub rows: Vec<IngestedRow>,
    pub skipped: Vec<Skipped>,
    pub total: usize,
}

/// Property ids available to a run, with their evaluator bindings.
#[derive(Debug, Clone)]
pub struct PropertyRegistry {
    specs: BTreeMap<String, PropertySpec>,
}

impl Default for PropertyRegistry {
    fn default() -> Self {
        PropertyRegistry::builtin()
    }
}

impl PropertyRegistry {
    pub fn builtin() -> Self {
        let specs = BUILTIN_PROPERTIES
            .iter()
            .map(|id| (id.to_string(), PropertySpec::builtin(id).expect("builtin id")))
            .collect();
        PropertyRegistry { specs }
    }

    pub fn get(&self, id: &str) -> Option<&PropertySpec> {
        self.specs.get(id)
    }

    pub fn insert(&mut self, spec: PropertySpec) {
        self.specs.insert(spec.id.clone(), spec);
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.specs.keys().map(String::as_str)
    }
}

/// Read a dataset. Rows that fail to parse, hold an invalid molecule, name an
/// unknown property, or (when `only` is set) target another property are
/// skipped with a diagnostic.
pub fn ingest(path: &Path, registry: &PropertyRegistry, only: Option<&str>) -> Result<Ingested, PipelineError> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut out = Ingested {
        rows: Vec::new(),
        skipped: Vec::new(),
        total: 0,
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.total += 1;
        let lineno = i + 1;
        let mut skip = |reason: String| {
            warn!("{}:{lineno}: skipped: {reason}", path.display());
            out.skipped.push(Skipped { line: lineno, reason });
        };
        let entry: DatasetEntry = match serde_json::from_str(&line) {
            Ok(e) => e,
            Err(e) => {
                skip(format!("malformed row: {e}"));
                continue;
            }
        };
        if registry.get(&entry.property).is_none() {
            skip(format!("unknown property {:?}", entry.property));
            continue;
        }
        if only.is_some_and(|p| p != entry.property) {
            skip(format!("property {:?} not selected", entry.property));
            continue;
        }
        match parse_smiles(&entry.smiles) {
            Ok(mol) => out.rows.push(IngestedRow {
                line: lineno,
                entry,
                mol,
            }),
            Err(e) => skip(format!("bad smiles {:?}: {e}", entry.smiles)),
        }
    }
    if out.rows.is_empty() {
        return Err(PipelineError::EmptyDataset(path.display().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadFailure {
    pub lead: String,
    pub property_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResultLine {
    Failed(LeadFailure),
    Campaign(Box<CampaignResult>),
}

fn config_for(base: &RunConfig, registry: &PropertyRegistry, property: &str) -> RunConfig {
    let mut c = base.clone();
    c.property = registry.get(property).expect("ingest checked the property").clone();
    c
}

fn run_row(base: &RunConfig, registry: &PropertyRegistry, row: &IngestedRow) -> ResultLine {
    let config = config_for(base, registry, &row.entry.property);
    match run_campaign(&config, &row.mol) {
        Ok(r) => ResultLine::Campaign(Box::new(r)),
        Err(e) => ResultLine::Failed(LeadFailure {
            lead: row.entry.smiles.clone(),
            property_id: row.entry.property.clone(),
            error: e.to_string(),
        }),
    }
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
}

/// Run every row, `jobs` leads at a time, streaming results to `out` in input order.
pub fn run_rows(
    base: &RunConfig,
    registry: &PropertyRegistry,
    rows: &[IngestedRow],
    jobs: usize,
    out: &mut dyn Write,
) -> Result<Vec<ResultLine>, PipelineError> {
    base.validate()?;
    let jobs = jobs.max(1);
    let pool = pool(jobs);
    let mut all = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(jobs * 4) {
        let lines: Vec<ResultLine> = pool.install(|| chunk.par_iter().map(|r| run_row(base, registry, r)).collect());
        for line in &lines {
            let text = serde_json::to_string(line).expect("serializable result");
            writeln!(out, "{text}").map_err(io_err(Path::new("<output>")))?;
        }
        out.flush().map_err(io_err(Path::new("<output>")))?;
        all.extend(lines);
    }
    Ok(all)
}

pub fn run_to_file(
    base: &RunConfig,
    registry: &PropertyRegistry,
    rows: &[IngestedRow],
    jobs: usize,
    path: &Path,
) -> Result<Vec<ResultLine>, PipelineError> {
    base.validate()?;
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    run_rows(base, registry, rows, jobs, &mut w)
}

/// The trajectory a successful campaign contributes to the buffer.
///
/// Each step's action is the tool-action that produced its chosen candidate.
/// A stagnant step records the action whose best valid candidate came
/// closest to passing (else the first planned action) and the molecule that
/// was carried forward.
pub fn record_from_campaign(r: &CampaignResult, params: FingerprintParams, run_id: &str) -> Option<TrajectoryRecord> {
    let best = r.best_seen.as_ref()?;
    let final_ri = best.relative_improvement?;
    let mut carried = StepOutcome {
        smiles: r.lead.clone(),
        value: r.lead_value,
        sim: 1.0,
    };
    let mut actions = Vec::with_capacity(r.steps.len());
    let mut outcomes = Vec::with_capacity(r.steps.len());
    for step in &r.steps {
        match &step.chosen {
            Some(c) => {
                actions.push(c.action.clone());
                carried = StepOutcome {
                    smiles: c.smiles.clone(),
                    value: c.value,
                    sim: c.sim,
                };
            }
            None => {
                let closest = step
                    .attempts
                    .iter()
                    .flat_map(|a| a.checks.iter().map(move |c| (a, c)))
                    .filter(|(_, c)| c.valid)
                    .max_by(|(_, x), (_, y)| {
                        let key = |c: &crate::orchestrate::CandidateCheck| {
                            (c.sim_to_lead.unwrap_or(0.0), c.improvement_vs_lead.unwrap_or(f64::NEG_INFINITY))
                        };
                        key(x).partial_cmp(&key(y)).expect("finite values").reverse()
                    })
                    .map(|(a, _)| a.action.clone());
                let action: ToolAction = closest.or_else(|| step.plan.tool_calls.first().cloned())?;
                actions.push(action);
            }
        }
        outcomes.push(carried.clone());
    }
    let lead = parse_smiles(&r.lead).ok()?;
    TrajectoryRecord::new(&lead, params, &r.property_id, actions, outcomes, final_ri, run_id).ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BuildSummary {
    pub campaigns: usize,
    pub records: usize,
    pub failures: usize,
}

/// Parallel-mode campaigns over training rows; every successful campaign
/// becomes one buffer record.
pub fn build_buffer(
    base: &RunConfig,
    registry: &PropertyRegistry,
    rows: &[IngestedRow],
    jobs: usize,
) -> Result<(BufferHandle, BuildSummary), PipelineError> {
    if base.mode != Mode::Parallel {
        return Err(OrchestrateError::Config("buffers are built from parallel-mode runs".into()).into());
    }
    let lines = run_rows(base, registry, rows, jobs, &mut std::io::sink())?;
    let mut buffer = BufferHandle::new(base.fp_params);
    let mut summary = BuildSummary {
        campaigns: lines.len(),
        records: 0,
        failures: 0,
    };
    for (row, line) in rows.iter().zip(&lines) {
        match line {
            ResultLine::Failed(_) => summary.failures += 1,
            ResultLine::Campaign(r) => {
                let run_id = format!("seed{}-line{}", base.seed, row.line);
                if let Some(rec) = record_from_campaign(r, base.fp_params, &run_id) {
                    buffer.insert(rec)?;
                    summary.records += 1;
                }
            }
        }
    }
    Ok((buffer, summary))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultLine>, PipelineError> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ResultLine = serde_json::from_str(&line).map_err(|e| PipelineError::Schema {
            path: path.display().to_string(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(parsed);
    }
    Ok(out)
}

/// Metric report over campaign lines, grouped by property (and overall when
/// several properties are present). Failed leads count as unsuccessful samples.
pub fn report(lines: &[ResultLine]) -> Result<Vec<(String, MetricReport)>, PipelineError> {
    let mut by_prop: BTreeMap<String, Vec<CampaignResult>> = BTreeMap::new();
    let mut failed: BTreeMap<String, usize> = BTreeMap::new();
    for line in lines {
        match line {
            ResultLine::Campaign(r) => by_prop.entry(r.property_id.clone()).or_default().push((**r).clone()),
            ResultLine::Failed(f) => *failed.entry(f.property_id.clone()).or_default() += 1,
        }
    }
    let mut out = Vec::new();
    for (prop, results) in &by_prop {
        let mut rep = MetricReport::compute(results)?;
        let extra = failed.get(prop).copied().unwrap_or(0);
        if extra > 0 {
            rep.samples += extra;
            rep.sr = 100.0 * rep.succeeded as f64 / rep.samples as f64;
        }
        out.push((prop.clone(), rep));
    }
    if out.is_empty() {
        return Err(MetricsError::EmptyInput.into());
    }
    Ok(out)
}

impl FromStr for Endpoint {
    type Err = String;

    /// `tcp:HOST:PORT` or `exec:COMMAND ARGS...` (whitespace separated).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(addr) = s.strip_prefix("tcp:") {
            return Ok(Endpoint::Tcp(addr.to_string()));
        }
        if let Some(cmd) = s.strip_prefix("exec:") {
            let parts: Vec<String> = cmd.split_whitespace().map(String::from).collect();
            if parts.is_empty() {
                return Err("empty exec command".into());
            }
            return Ok(Endpoint::Process(parts));
        }
        Err(format!("endpoint {s:?} must start with tcp: or exec:"))
    }
}

/// Tool set file: a JSON array of tool entries.
///
/// ```text
/// [{"tool_id": "ToolA", "profile": "substituent_swap"},
///  {"tool_id": "ToolD", "profile": "unreliable", "p_fail": 0.5, "damping": 0.5},
///  {"tool_id": "EditorX", "description": "...", "endpoint": {"tcp": "127.0.0.1:9000"},
///   "prompt_templates": ["...", "...", "...", "...", "...", "..."]}]
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolEntry {
    pub tool_id: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default)]
    pub p_fail: Option<f64>,
    #[serde(default)]
    pub damping: Option<f64>,
    #[serde(default)]
    pub endpoint: Option<Endpoint>,
    #[serde(default)]
    pub prompt_templates: Option<Vec<String>>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::ConfigFile {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

pub fn load_tools(path: &Path) -> Result<Vec<ToolSpec>, PipelineError> {
    let entries: Vec<ToolEntry> = read_json(path)?;
    let bad = |msg: String| PipelineError::ConfigFile {
        path: path.display().to_string(),
        msg,
    };
    let mut tools = Vec::new();
    for e in entries {
        let kind = match (&e.profile, &e.endpoint) {
            (Some(p), None) => ToolKind::Builtin(match p.as_str() {
                "substituent_swap" => ToolProfile::SubstituentSwap,
                "atom_mutation" => ToolProfile::AtomMutation,
                "ring_edit" => ToolProfile::RingEdit,
                "unreliable" => ToolProfile::Unreliable {
                    p_fail: e.p_fail.unwrap_or(DEFAULT_P_FAIL),
                    damping: e.damping.unwrap_or(DEFAULT_DAMPING),
                },
                other => return Err(bad(format!("unknown profile {other:?}"))),
            }),
            (None, Some(ep)) => ToolKind::External(crate::tools::ExternalTool {
                endpoint: ep.clone(),
                transport: ep.connect()?,
            }),
            _ => return Err(bad(format!("tool {}: give exactly one of profile or endpoint", e.tool_id))),
        };
        let templates = e
            .prompt_templates
            .clone()
            .unwrap_or_else(|| DEFAULT_TEMPLATES.iter().map(|s| s.to_string()).collect());
        let description = e.description.clone().unwrap_or_else(|| match &kind {
            ToolKind::Builtin(p) => ToolSpec::builtin(&e.tool_id, *p).description,
            ToolKind::External(_) => String::new(),
        });
        tools.push(ToolSpec::new(&e.tool_id, &description, templates, kind).map_err(|err| bad(err.to_string()))?);
    }
    Ok(tools)
}

/// Evaluator file: `[{"property_id": "bbbp", "direction": "maximize", "endpoint": {"process": ["python3", "eval.py"]}}]`.
/// `direction` may be omitted for builtin property ids.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorEntry {
    pub property_id: String,
    #[serde(default)]
    pub direction: Option<Direction>,
    pub endpoint: Endpoint,
}

pub fn load_evaluators(path: &Path, registry: &mut PropertyRegistry) -> Result<(), PipelineError> {
    let entries: Vec<EvaluatorEntry> = read_json(path)?;
    for e in entries {
        let ext = ExternalEvaluator::connect(&e.endpoint)?;
        let spec = PropertySpec::external(&e.property_id, e.direction, ext).map_err(|err| PipelineError::ConfigFile {
            path: path.display().to_string(),
            msg: err.to_string(),
        })?;
        registry.insert(spec);
    }
    Ok(())
}

/// Synthetic dataset rows from the seeded lead families.
pub fn synth_dataset(seed: u64, n_train: usize, n_test: usize, property: &str) -> (Vec<DatasetEntry>, Vec<DatasetEntry>) {
    let (train, test) = crate::testbed::lead_split(seed, n_train, n_test);
    let rows = |v: Vec<String>| {
        v.into_iter()
            .map(|smiles| DatasetEntry {
                smiles,
                property: property.to_string(),
                reference: None,
            })
            .collect()
    };
    (rows(train), rows(test))
}

pub fn write_dataset(path: &Path, rows: &[DatasetEntry]) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for r in rows {
        writeln!(w, "{}", serde_json::to_string(r).expect("serializable row")).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Rows built in memory (line numbers are 1-based positions).
pub fn rows_from_smiles(smiles: &[String], property: &str) -> Vec<IngestedRow> {
    smiles
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            Some(IngestedRow {
                line: i + 1,
                entry: DatasetEntry {
                    smiles: s.clone(),
                    property: property.to_string(),
                    reference: None,
                },
                mol: parse_smiles(s).ok()?,
            })
        })
        .collect()
}

/// Shared handle for a loaded buffer.
pub fn load_buffer(path: &Path, params: FingerprintParams) -> Result<Arc<BufferHandle>, PipelineError> {
    Ok(Arc::new(BufferHandle::load(path, params)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tools::default_tools;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn ingest_counts_and_skips() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "d.jsonl",
            concat!(
                "{\"smiles\":\"CCO\",\"property\":\"qed\"}\n",
                "{\"smiles\":\"C1CC\",\"property\":\"qed\"}\n",
                "{\"smiles\":\"CCN\",\"property\":\"solubility\"}\n",
                "not json\n",
                "{\"smiles\":\"c1ccccc1O\",\"property\":\"bbbp\",\"reference\":\"c1ccccc1N\"}\n",
            ),
        );
        let reg = PropertyRegistry::builtin();
        let ing = ingest(&p, &reg, None).unwrap();
        assert_eq!(ing.rows.len(), 2);
        assert_eq!(ing.skipped.len(), 3);
        assert_eq!(ing.rows.len() + ing.skipped.len(), ing.total);
        assert_eq!(ing.rows[1].entry.reference.as_deref(), Some("c1ccccc1N"));
        let only = ingest(&p, &reg, Some("bbbp")).unwrap();
        assert_eq!(only.rows.len(), 1);
        let empty = write(dir.path(), "e.jsonl", "\n");
        assert!(matches!(ingest(&empty, &reg, None), Err(PipelineError::EmptyDataset(_))));
        assert!(matches!(ingest(&dir.path().join("missing"), &reg, None), Err(PipelineError::Io { .. })));
    }

    #[test]
    fn run_is_ordered_and_deterministic() {
        let reg = PropertyRegistry::builtin();
        let leads = crate::testbed::leads(1, 10);
        let rows = rows_from_smiles(&leads, "plogp");
        let mut base = RunConfig::new(Mode::Online, default_tools(), PropertySpec::builtin("plogp").unwrap());
        base.seed = 42;
        let mut a = Vec::new();
        let lines = run_rows(&base, &reg, &rows, 4, &mut a).unwrap();
        let mut b = Vec::new();
        run_rows(&base, &reg, &rows, 1, &mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(lines.len(), 10);
        for (row, line) in rows.iter().zip(&lines) {
            let ResultLine::Campaign(r) = line else { panic!("failed lead") };
            assert_eq!(r.lead, crate::molgraph::canonical_form(&row.mol));
        }
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().count(), 10);
    }

    #[test]
    fn buffer_from_training_runs() {
        let reg = PropertyRegistry::builtin();
        let rows = rows_from_smiles(&crate::testbed::leads(2, 6), "plogp");
        let mut base = RunConfig::new(Mode::Parallel, default_tools(), PropertySpec::builtin("plogp").unwrap());
        base.seed = 7;
        let (buffer, summary) = build_buffer(&base, &reg, &rows, 2).unwrap();
        assert_eq!(summary.records, buffer.len());
        assert!(buffer.entries().iter().all(|r| r.actions.len() == base.steps));
        let (again, _) = build_buffer(&base, &reg, &rows, 3).unwrap();
        assert_eq!(again, buffer);
        let online = RunConfig::new(Mode::Online, default_tools(), PropertySpec::builtin("plogp").unwrap());
        assert!(build_buffer(&online, &reg, &rows, 1).is_err());
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let reg = PropertyRegistry::builtin();
        let rows = rows_from_smiles(&crate::testbed::leads(4, 5), "qed");
        let base = RunConfig::new(Mode::Online, default_tools(), PropertySpec::builtin("qed").unwrap());
        let path = dir.path().join("r.jsonl");
        run_to_file(&base, &reg, &rows, 2, &path).unwrap();
        let lines = read_results(&path).unwrap();
        assert_eq!(lines.len(), 5);
        let rep = report(&lines).unwrap();
        assert_eq!(rep[0].0, "qed");
        assert_eq!(rep[0].1.samples, 5);
        let bad = write(dir.path(), "bad.jsonl", "{\"nope\":1}\n");
        assert!(matches!(read_results(&bad), Err(PipelineError::Schema { .. })));
    }

    #[test]
    fn config_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "tools.json",
            r#"[{"tool_id":"A","profile":"substituent_swap"},{"tool_id":"D","profile":"unreliable","p_fail":0.5}]"#,
        );
        let tools = load_tools(&p).unwrap();
        assert_eq!(tools.len(), 2);
        assert!(matches!(tools[1].kind, ToolKind::Builtin(ToolProfile::Unreliable { p_fail, .. }) if p_fail == 0.5));
        let bad = write(dir.path(), "bad.json", r#"[{"tool_id":"A"}]"#);
        assert!(matches!(load_tools(&bad), Err(PipelineError::ConfigFile { .. })));
        assert_eq!("tcp:127.0.0.1:9".parse::<Endpoint>().unwrap(), Endpoint::Tcp("127.0.0.1:9".into()));
        assert_eq!(
            "exec:python3 eval.py".parse::<Endpoint>().unwrap(),
            Endpoint::Process(vec!["python3".into(), "eval.py".into()])
        );
        assert!("http://x".parse::<Endpoint>().is_err());
    }
}
