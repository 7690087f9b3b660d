//! Offline trajectory buffer: persistence, top-1 similarity retrieval and
//! template extraction.
//!
//! On disk the buffer is JSON lines, one record per line:
//!
//! ```text
//! {"lead":"CCO","lead_fp_hex":"...","fp_radius":2,"fp_nbits":2048,"property_id":"qed",
//!  "actions":[{"tool_id":"ToolA","prompt_index":0}],
//!  "step_outcomes":[{"smiles":"CCN","value":0.41,"sim":0.6}],"final_ri":0.12,"run_id":"train-3"}
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{morgan_fp_with, tanimoto, Fingerprint, FingerprintParams, Similarity};
use crate::molgraph::{canonical_form, parse_smiles, MolGraph};
use crate::tools::TEMPLATE_COUNT;

#[derive(Debug, Error)]
pub enum BufferError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("buffer i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("fingerprint parameters differ: buffer {buffer:?}, query {query:?}")]
    ParamMismatch {
        buffer: FingerprintParams,
        query: FingerprintParams,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ToolAction {
    pub tool_id: String,
    pub prompt_index: usize,
}

impl ToolAction {
    pub fn new(tool_id: &str, prompt_index: usize) -> Self {
        ToolAction {
            tool_id: tool_id.to_string(),
            prompt_index,
        }
    }
}

impl std::fmt::Display for ToolAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}#{}", self.tool_id, self.prompt_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub smiles: String,
    pub value: f64,
    pub sim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub lead: String,
    pub lead_fp: Fingerprint,
    pub property_id: String,
    pub actions: Vec<ToolAction>,
    pub step_outcomes: Vec<StepOutcome>,
    pub final_ri: f64,
    pub run_id: String,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    lead: String,
    lead_fp_hex: String,
    fp_radius: u32,
    fp_nbits: usize,
    property_id: String,
    actions: Vec<ToolAction>,
    step_outcomes: Vec<StepOutcome>,
    final_ri: f64,
    run_id: String,
}

impl TrajectoryRecord {
    pub fn new(
        lead: &MolGraph,
        params: FingerprintParams,
        property_id: &str,
        actions: Vec<ToolAction>,
        step_outcomes: Vec<StepOutcome>,
        final_ri: f64,
        run_id: &str,
    ) -> Result<Self, BufferError> {
        let lead_fp = morgan_fp_with(lead, params).map_err(|e| BufferError::Schema(e.to_string()))?;
        let record = TrajectoryRecord {
            lead: canonical_form(lead),
            lead_fp,
            property_id: property_id.to_string(),
            actions,
            step_outcomes,
            final_ri,
            run_id: run_id.to_string(),
        };
        record.check()?;
        Ok(record)
    }

    fn check(&self) -> Result<(), BufferError> {
        let bad = |m: String| Err(BufferError::Schema(m));
        if self.actions.is_empty() {
            return bad("record has no actions".into());
        }
        if self.step_outcomes.len() != self.actions.len() {
            return bad(format!(
                "{} actions but {} step outcomes",
                self.actions.len(),
                self.step_outcomes.len()
            ));
        }
        if let Some(a) = self.actions.iter().find(|a| a.prompt_index >= TEMPLATE_COUNT) {
            return bad(format!("prompt index {} out of range", a.prompt_index));
        }
        if !(self.final_ri.is_finite() && self.final_ri >= 0.0) {
            return bad(format!("final_ri {} must be finite and non-negative", self.final_ri));
        }
        if self.property_id.is_empty() {
            return bad("empty property id".into());
        }
        Ok(())
    }

    fn to_line(&self) -> String {
        serde_json::to_string(&RecordLine {
            lead: self.lead.clone(),
            lead_fp_hex: self.lead_fp.to_hex(),
            fp_radius: self.lead_fp.radius(),
            fp_nbits: self.lead_fp.nbits(),
            property_id: self.property_id.clone(),
            actions: self.actions.clone(),
            step_outcomes: self.step_outcomes.clone(),
            final_ri: self.final_ri,
            run_id: self.run_id.clone(),
        })
        .expect("serializable record")
    }

    fn from_line(line: &str) -> Result<Self, BufferError> {
        let raw: RecordLine = serde_json::from_str(line).map_err(|e| BufferError::Schema(e.to_string()))?;
        let lead_fp = Fingerprint::from_hex(&raw.lead_fp_hex, raw.fp_nbits, raw.fp_radius)
            .map_err(|e| BufferError::Schema(e.to_string()))?;
        let record = TrajectoryRecord {
            lead: raw.lead,
            lead_fp,
            property_id: raw.property_id,
            actions: raw.actions,
            step_outcomes: raw.step_outcomes,
            final_ri: raw.final_ri,
            run_id: raw.run_id,
        };
        record.check()?;
        Ok(record)
    }
}

/// Records in insertion order, indexed by property.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferHandle {
    params: FingerprintParams,
    entries: Vec<TrajectoryRecord>,
    by_property: BTreeMap<String, Vec<usize>>,
}

impl BufferHandle {
    pub fn new(params: FingerprintParams) -> Self {
        BufferHandle {
            params,
            entries: Vec::new(),
            by_property: BTreeMap::new(),
        }
    }

    pub fn params(&self) -> FingerprintParams {
        self.params
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TrajectoryRecord] {
        &self.entries
    }

    pub fn partition(&self, property_id: &str) -> impl Iterator<Item = &TrajectoryRecord> {
        self.by_property
            .get(property_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.entries[i])
    }

    /// Validates the record, including that its fingerprint matches its lead.
    pub fn insert(&mut self, record: TrajectoryRecord) -> Result<(), BufferError> {
        record.check()?;
        if record.lead_fp.params() != self.params {
            return Err(BufferError::ParamMismatch {
                buffer: self.params,
                query: record.lead_fp.params(),
            });
        }
        let lead = parse_smiles(&record.lead).map_err(|e| BufferError::Schema(format!("lead: {e}")))?;
        let fp = morgan_fp_with(&lead, self.params).map_err(|e| BufferError::Schema(e.to_string()))?;
        if fp != record.lead_fp {
            return Err(BufferError::Schema(format!("fingerprint does not match lead {}", record.lead)));
        }
        self.by_property
            .entry(record.property_id.clone())
            .or_default()
            .push(self.entries.len());
        self.entries.push(record);
        Ok(())
    }

    pub fn top1_similar(&self, mol: &MolGraph, property_id: &str) -> Option<(&TrajectoryRecord, Similarity)> {
        let fp = morgan_fp_with(mol, self.params).ok()?;
        self.top1_similar_fp(&fp, property_id).expect("same parameters")
    }

    /// Ties on similarity go to the higher `final_ri`, then the smaller lead.
    pub fn top1_similar_fp(
        &self,
        fp: &Fingerprint,
        property_id: &str,
    ) -> Result<Option<(&TrajectoryRecord, Similarity)>, BufferError> {
        if fp.params() != self.params {
            return Err(BufferError::ParamMismatch {
                buffer: self.params,
                query: fp.params(),
            });
        }
        let mut best: Option<(&TrajectoryRecord, Similarity)> = None;
        for rec in self.partition(property_id) {
            let sim = tanimoto(fp, &rec.lead_fp).expect("checked parameters");
            let better = match best {
                None => true,
                Some((b, bs)) => {
                    sim > bs
                        || (sim == bs
                            && (rec.final_ri > b.final_ri || (rec.final_ri == b.final_ri && rec.lead < b.lead)))
                }
            };
            if better {
                best = Some((rec, sim));
            }
        }
        Ok(best)
    }

    /// Atomic write: a temporary file in the same directory is renamed over `path`.
    pub fn flush(&self, path: &Path) -> Result<(), BufferError> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let tmp = tempfile::NamedTempFile::new_in(dir)?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            for rec in &self.entries {
                writeln!(w, "{}", rec.to_line())?;
            }
            w.flush()?;
        }
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| BufferError::Io(e.error))?;
        Ok(())
    }

    pub fn load(path: &Path, params: FingerprintParams) -> Result<Self, BufferError> {
        let mut buffer = BufferHandle::new(params);
        let reader = BufReader::new(File::open(path)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record = TrajectoryRecord::from_line(&line)
                .map_err(|e| BufferError::Schema(format!("line {}: {e}", i + 1)))?;
            buffer
                .insert(record)
                .map_err(|e| BufferError::Schema(format!("line {}: {e}", i + 1)))?;
        }
        Ok(buffer)
    }
}

pub fn template(record: &TrajectoryRecord) -> Vec<ToolAction> {
    record.actions.clone()
}

/// True iff both records have at least `k` actions and the first `k` agree.
pub fn prefix_match(a: &TrajectoryRecord, b: &TrajectoryRecord, k: usize) -> bool {
    prefix_match_actions(&a.actions, &b.actions, k)
}

pub fn prefix_match_actions(a: &[ToolAction], b: &[ToolAction], k: usize) -> bool {
    k >= 1 && a.len() >= k && b.len() >= k && a[..k] == b[..k]
}
