//! Budget-gated planning and execution of optimization campaigns.
//!
//! A campaign runs `T` steps from a lead. Each step plans one tool call
//! (online, retrieve) or one call per tool (parallel), executes the calls,
//! checks every candidate against the lead (validity, similarity, then
//! improvement), retries a tool-action once with its failures embedded in the
//! instruction when all of its candidates fail, and moves to the best passing
//! candidate. Similarity and improvement are always measured against the lead.
//!
//! External planners receive one JSON context line and must answer with
//! exactly `{"tool_calls":[{"tool_name": "...", "prompt_index": 0}, ...]}`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffer::{template, BufferHandle, ToolAction, TrajectoryRecord};
use crate::evaluate::{evaluate, evaluate_many, improvement, improves, Direction, PropertySpec};
use crate::fingerprint::{
    morgan_fp_with, tanimoto, Fingerprint, FingerprintParams, Similarity, DEFAULT_TAU,
};
use crate::hashing::{hash_str, hash_values};
use crate::molgraph::{canonical_form, parse_smiles, validate, MolGraph};
use crate::tools::{build_instruction, invoke, FailedCase, FailureKind, ToolResult, ToolSpec, TEMPLATE_COUNT};
use crate::transport::{Endpoint, Transport, TransportError};

pub const DEFAULT_STEPS: usize = 3;
/// Weight of the newest outcome in the planner's success estimate.
pub const PLANNER_WEIGHT: f64 = 0.7;
pub const PLANNER_PRIOR: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrchestrateError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid lead: {0}")]
    InvalidLead(String),
    #[error("lead could not be evaluated: {0}")]
    LeadEvaluation(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("planner transport: {0}")]
    Transport(#[from] TransportError),
    #[error("planner protocol: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Online,
    Retrieve,
    Parallel,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Online => "online",
            Mode::Retrieve => "retrieve",
            Mode::Parallel => "parallel",
        })
    }
}

impl FromStr for Mode {
    type Err = OrchestrateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "online" => Ok(Mode::Online),
            "retrieve" => Ok(Mode::Retrieve),
            "parallel" => Ok(Mode::Parallel),
            other => Err(OrchestrateError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone)]
pub struct ExternalPlanner {
    pub endpoint: Endpoint,
    pub transport: Arc<dyn Transport>,
}

impl fmt::Debug for ExternalPlanner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExternalPlanner({})", self.endpoint)
    }
}

#[derive(Debug, Clone, Default)]
pub enum PlannerBinding {
    #[default]
    Builtin,
    External(ExternalPlanner),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub steps: usize,
    pub tau: Similarity,
    /// Planned tool calls per step: 1, or the tool count in parallel mode.
    pub budget: usize,
    pub seed: u64,
    pub tools: Vec<ToolSpec>,
    pub property: PropertySpec,
    pub buffer: Option<Arc<BufferHandle>>,
    pub planner: PlannerBinding,
    /// Single-retry self-correction; disable only for ablations.
    pub retry: bool,
    pub fp_params: FingerprintParams,
}

impl RunConfig {
    /// Defaults: 3 steps, τ = 0.5, budget matching the mode, retry on.
    pub fn new(mode: Mode, tools: Vec<ToolSpec>, property: PropertySpec) -> RunConfig {
        let budget = if mode == Mode::Parallel { tools.len() } else { 1 };
        RunConfig {
            mode,
            steps: DEFAULT_STEPS,
            tau: Similarity::new(DEFAULT_TAU).expect("in range"),
            budget,
            seed: 0,
            tools,
            property,
            buffer: None,
            planner: PlannerBinding::Builtin,
            retry: true,
            fp_params: FingerprintParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), OrchestrateError> {
        let err = |m: String| Err(OrchestrateError::Config(m));
        if self.tools.is_empty() {
            return err("tool set is empty".into());
        }
        let ids: BTreeSet<&str> = self.tools.iter().map(|t| t.tool_id.as_str()).collect();
        if ids.len() != self.tools.len() {
            return err("duplicate tool ids".into());
        }
        if self.steps == 0 {
            return err("steps must be positive".into());
        }
        let expected = if self.mode == Mode::Parallel { self.tools.len() } else { 1 };
        if self.budget != expected {
            return err(format!(
                "{} mode requires budget {expected}, got {}",
                self.mode, self.budget
            ));
        }
        match (&self.buffer, self.mode) {
            (None, Mode::Retrieve) => return err("retrieve mode requires a buffer".into()),
            (Some(b), _) if b.params() != self.fp_params => {
                return err(format!(
                    "buffer fingerprint parameters {:?} differ from run parameters {:?}",
                    b.params(),
                    self.fp_params
                ))
            }
            _ => {}
        }
        Ok(())
    }

    fn tool(&self, id: &str) -> Option<&ToolSpec> {
        self.tools.iter().find(|t| t.tool_id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanCommand {
    pub tool_calls: Vec<ToolAction>,
}

/// Where a step's plan came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    Planner,
    External,
    /// Replayed from a retrieved trajectory.
    Template,
    /// External planner reply rejected; builtin plan used instead.
    Fallback,
}

/// One tool-action outcome as seen by the planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    pub action: ToolAction,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateCheck {
    /// The string returned by the tool.
    pub smiles: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub canonical: Option<String>,
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sim_to_lead: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value: Option<f64>,
    /// Signed so that positive means better than the lead.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub improvement_vs_lead: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<FailureKind>,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub message: String,
}

impl CandidateCheck {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub action: ToolAction,
    pub retry: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub result: Option<ToolResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tool_error: Option<String>,
    pub checks: Vec<CandidateCheck>,
}

impl Attempt {
    pub fn passed(&self) -> bool {
        self.checks.iter().any(CandidateCheck::passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chosen {
    pub smiles: String,
    pub value: f64,
    pub sim: f64,
    pub improvement: f64,
    pub action: ToolAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_index: usize,
    pub start_molecule: String,
    pub plan: PlanCommand,
    pub plan_source: PlanSource,
    pub attempts: Vec<Attempt>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chosen: Option<Chosen>,
    pub rescued: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSeen {
    pub smiles: String,
    pub value: f64,
    pub sim: f64,
    pub improvement: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub relative_improvement: Option<f64>,
    pub zero_reference: bool,
    pub step_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub lead: String,
    pub lead_value: f64,
    pub property_id: String,
    pub direction: Direction,
    pub mode: Mode,
    pub tau: f64,
    pub tool_count: usize,
    pub steps: Vec<StepRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub best_seen: Option<BestSeen>,
    pub invocation_count: usize,
}

/// Everything fixed about the lead for the whole campaign.
#[derive(Debug, Clone)]
pub struct LeadContext {
    pub mol: MolGraph,
    pub canonical: String,
    pub fp: Fingerprint,
    pub value: f64,
    pub seed: u64,
}

impl LeadContext {
    pub fn new(config: &RunConfig, lead: &MolGraph) -> Result<LeadContext, OrchestrateError> {
        let report = validate(lead);
        if !report.valid {
            return Err(OrchestrateError::InvalidLead(format!("{:?}", report.violations)));
        }
        let canonical = canonical_form(lead);
        let fp = morgan_fp_with(lead, config.fp_params).map_err(|e| OrchestrateError::Config(e.to_string()))?;
        let value = evaluate(&config.property, lead)
            .map_err(|e| OrchestrateError::LeadEvaluation(e.to_string()))?
            .value;
        Ok(LeadContext {
            seed: lead_seed(config.seed, &canonical),
            mol: lead.clone(),
            canonical,
            fp,
            value,
        })
    }
}

/// Per-lead seed, independent of scheduling order.
pub fn lead_seed(master: u64, canonical: &str) -> u64 {
    hash_values(&[master, hash_str(canonical)])
}

fn invocation_seed(lead_seed: u64, step: usize, action: &ToolAction, attempt: usize) -> u64 {
    hash_values(&[
        lead_seed,
        step as u64,
        hash_str(&action.tool_id),
        action.prompt_index as u64,
        attempt as u64,
    ])
}

/// Mutable campaign state carried between steps.
#[derive(Debug, Clone)]
pub struct CampaignState {
    pub mol: MolGraph,
    /// Remaining actions of the adopted trajectory.
    pub cursor: Vec<ToolAction>,
    pub adopted: Option<TrajectoryRecord>,
    pub history: Vec<HistoryEntry>,
}

impl CampaignState {
    pub fn start(lead: &LeadContext) -> CampaignState {
        CampaignState {
            mol: lead.mol.clone(),
            cursor: Vec::new(),
            adopted: None,
            history: Vec::new(),
        }
    }
}

/// Rule-based planner: exponentially weighted success per tool, ties broken
/// round-robin from `step mod n`; template index `step mod 6`.
pub fn builtin_plan(tools: &[ToolSpec], mode: Mode, step: usize, history: &[HistoryEntry]) -> PlanCommand {
    let prompt_index = step % TEMPLATE_COUNT;
    if mode == Mode::Parallel {
        return PlanCommand {
            tool_calls: tools.iter().map(|t| ToolAction::new(&t.tool_id, prompt_index)).collect(),
        };
    }
    let n = tools.len();
    let scores: Vec<f64> = tools
        .iter()
        .map(|t| {
            history
                .iter()
                .filter(|h| h.action.tool_id == t.tool_id)
                .fold(PLANNER_PRIOR, |s, h| {
                    PLANNER_WEIGHT * if h.passed { 1.0 } else { 0.0 } + (1.0 - PLANNER_WEIGHT) * s
                })
        })
        .collect();
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pick = (0..n)
        .map(|k| (step + k) % n)
        .find(|&i| scores[i] == best)
        .expect("nonempty tool set");
    PlanCommand {
        tool_calls: vec![ToolAction::new(&tools[pick].tool_id, prompt_index)],
    }
}

#[derive(Serialize)]
struct PlannerTool<'a> {
    tool_name: &'a str,
    description: &'a str,
    prompt_templates: &'a [String],
}

#[derive(Serialize)]
struct RetrievalHint<'a> {
    smiles: &'a str,
    similarity: f64,
    actions: &'a [ToolAction],
}

#[derive(Serialize)]
struct PlannerContext<'a> {
    input_smiles: &'a str,
    target_property: &'a str,
    direction: Direction,
    mode: Mode,
    step: usize,
    budget: usize,
    retrieval_hint: Option<RetrievalHint<'a>>,
    tools: Vec<PlannerTool<'a>>,
    history: &'a [HistoryEntry],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlannerCall {
    tool_name: String,
    prompt_index: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlannerReply {
    tool_calls: Vec<PlannerCall>,
}

/// Parse and validate a planner reply against the tool set and mode.
pub fn parse_plan_reply(reply: &str, tools: &[ToolSpec], mode: Mode) -> Result<PlanCommand, PlannerError> {
    let bad = |m: String| Err(PlannerError::Protocol(m));
    let parsed: PlannerReply =
        serde_json::from_str(reply.trim()).map_err(|e| PlannerError::Protocol(format!("unparseable reply: {e}")))?;
    let mut calls = Vec::new();
    for c in parsed.tool_calls {
        if !tools.iter().any(|t| t.tool_id == c.tool_name) {
            return bad(format!("unknown tool {:?}", c.tool_name));
        }
        if c.prompt_index >= TEMPLATE_COUNT {
            return bad(format!("prompt index {} out of range", c.prompt_index));
        }
        calls.push(ToolAction::new(&c.tool_name, c.prompt_index));
    }
    match mode {
        Mode::Parallel => {
            let named: BTreeSet<&str> = calls.iter().map(|c| c.tool_id.as_str()).collect();
            if calls.len() != tools.len() || named.len() != tools.len() {
                return bad(format!("parallel plan must call each of the {} tools once", tools.len()));
            }
        }
        Mode::Online | Mode::Retrieve => {
            if calls.len() != 1 {
                return bad(format!("expected exactly 1 tool call, got {}", calls.len()));
            }
        }
    }
    Ok(PlanCommand { tool_calls: calls })
}

fn external_plan(
    planner: &ExternalPlanner,
    config: &RunConfig,
    mol_smiles: &str,
    mode: Mode,
    step: usize,
    history: &[HistoryEntry],
    hint: Option<(&TrajectoryRecord, Similarity)>,
) -> Result<PlanCommand, PlannerError> {
    let ctx = PlannerContext {
        input_smiles: mol_smiles,
        target_property: &config.property.id,
        direction: config.property.direction,
        mode,
        step,
        budget: config.budget,
        retrieval_hint: hint.map(|(r, s)| RetrievalHint {
            smiles: &r.lead,
            similarity: s.value(),
            actions: &r.actions,
        }),
        tools: config
            .tools
            .iter()
            .map(|t| PlannerTool {
                tool_name: &t.tool_id,
                description: &t.description,
                prompt_templates: t.prompt_templates(),
            })
            .collect(),
        history,
    };
    let request = serde_json::to_string(&ctx).expect("serializable context");
    let reply = planner.transport.exchange(&request)?;
    parse_plan_reply(&reply, &config.tools, mode)
}

/// Plan one step with the configured planner, falling back to the builtin
/// rule on any external failure.
pub fn plan(
    config: &RunConfig,
    mol: &MolGraph,
    mode: Mode,
    step: usize,
    history: &[HistoryEntry],
    hint: Option<(&TrajectoryRecord, Similarity)>,
) -> (PlanCommand, PlanSource) {
    match &config.planner {
        PlannerBinding::Builtin => (builtin_plan(&config.tools, mode, step, history), PlanSource::Planner),
        PlannerBinding::External(ext) => {
            match external_plan(ext, config, &canonical_form(mol), mode, step, history, hint) {
                Ok(p) => (p, PlanSource::External),
                Err(e) => {
                    warn!("planner {}: {e}; using builtin plan", ext.endpoint);
                    (builtin_plan(&config.tools, mode, step, history), PlanSource::Fallback)
                }
            }
        }
    }
}

fn check_candidates(config: &RunConfig, lead: &LeadContext, raw: &[String]) -> Vec<CandidateCheck> {
    let mut checks: Vec<CandidateCheck> = Vec::with_capacity(raw.len());
    let mut parsed: Vec<Option<MolGraph>> = Vec::with_capacity(raw.len());
    for smi in raw {
        let mut check = CandidateCheck {
            smiles: smi.clone(),
            canonical: None,
            valid: false,
            sim_to_lead: None,
            value: None,
            improvement_vs_lead: None,
            failure: None,
            message: String::new(),
        };
        match parse_smiles(smi) {
            Err(e) => {
                check.failure = Some(FailureKind::InvalidStructure);
                check.message = e.to_string();
                parsed.push(None);
            }
            Ok(mol) => {
                check.valid = true;
                check.canonical = Some(canonical_form(&mol));
                let fp = morgan_fp_with(&mol, config.fp_params).expect("validated parameters");
                let sim = tanimoto(&fp, &lead.fp).expect("same parameters");
                check.sim_to_lead = Some(sim.value());
                if sim < config.tau {
                    check.failure = Some(FailureKind::SimilarityViolation);
                    parsed.push(None);
                } else {
                    parsed.push(Some(mol));
                }
            }
        }
        checks.push(check);
    }
    let pending: Vec<(usize, &MolGraph)> = parsed
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.as_ref().map(|m| (i, m)))
        .collect();
    let mols: Vec<&MolGraph> = pending.iter().map(|&(_, m)| m).collect();
    let values = evaluate_many(&config.property, &mols);
    for ((i, _), value) in pending.into_iter().zip(values) {
        let check = &mut checks[i];
        match value {
            Err(e) => {
                check.failure = Some(FailureKind::EvaluatorError);
                check.message = e.to_string();
            }
            Ok(v) => {
                check.value = Some(v.value);
                check.improvement_vs_lead = Some(config.property.direction.sign() * (v.value - lead.value));
                if !improves(config.property.direction, v.value, lead.value) {
                    check.failure = Some(FailureKind::NoImprovement);
                }
            }
        }
    }
    checks
}

fn run_attempt(
    config: &RunConfig,
    lead: &LeadContext,
    mol: &MolGraph,
    step: usize,
    action: &ToolAction,
    failed: &[FailedCase],
) -> Attempt {
    let retry = !failed.is_empty() as usize;
    let mut attempt = Attempt {
        action: action.clone(),
        retry: retry == 1,
        result: None,
        tool_error: None,
        checks: Vec::new(),
    };
    let Some(spec) = config.tool(&action.tool_id) else {
        attempt.tool_error = Some(format!("unknown tool {}", action.tool_id));
        return attempt;
    };
    let instruction = match build_instruction(spec, action.prompt_index, &config.property, failed) {
        Ok(i) => i,
        Err(e) => {
            attempt.tool_error = Some(e.to_string());
            return attempt;
        }
    };
    match invoke(spec, &instruction, mol, invocation_seed(lead.seed, step, action, retry)) {
        Ok(result) => {
            attempt.checks = check_candidates(config, lead, &result.candidates);
            attempt.result = Some(result);
        }
        Err(e) => attempt.tool_error = Some(e.to_string()),
    }
    attempt
}

/// Failed cases from one attempt, most recent first.
fn failed_cases(attempt: &Attempt) -> Vec<FailedCase> {
    attempt
        .checks
        .iter()
        .rev()
        .filter_map(|c| {
            c.failure.map(|kind| FailedCase {
                smiles: c.smiles.clone(),
                kind,
                message: c.message.clone(),
            })
        })
        .collect()
}

/// First attempt plus at most one retry for one planned tool-action.
fn run_action(config: &RunConfig, lead: &LeadContext, mol: &MolGraph, step: usize, action: &ToolAction) -> Vec<Attempt> {
    let first = run_attempt(config, lead, mol, step, action, &[]);
    if first.passed() || !config.retry {
        return vec![first];
    }
    let mut cases = failed_cases(&first);
    if cases.is_empty() {
        // Nothing came back at all; retry with a generic note.
        cases.push(FailedCase {
            smiles: String::new(),
            kind: FailureKind::InvalidStructure,
            message: first.tool_error.clone().unwrap_or_else(|| "no candidate returned".into()),
        });
    }
    let second = run_attempt(config, lead, mol, step, action, &cases);
    vec![first, second]
}

fn select(attempts: &[Attempt]) -> Option<Chosen> {
    let mut best: Option<Chosen> = None;
    for a in attempts {
        for c in a.checks.iter().filter(|c| c.passed()) {
            let cand = Chosen {
                smiles: c.canonical.clone().expect("passing candidates parsed"),
                value: c.value.expect("passing candidates evaluated"),
                sim: c.sim_to_lead.expect("passing candidates compared"),
                improvement: c.improvement_vs_lead.expect("passing candidates compared"),
                action: a.action.clone(),
            };
            let better = match &best {
                None => true,
                Some(b) => cand.improvement > b.improvement || (cand.improvement == b.improvement && cand.smiles < b.smiles),
            };
            if better {
                best = Some(cand);
            }
        }
    }
    best
}

fn next_template_action(config: &RunConfig, state: &mut CampaignState) -> Option<ToolAction> {
    while !state.cursor.is_empty() {
        let action = state.cursor.remove(0);
        if config.tool(&action.tool_id).is_some() {
            return Some(action);
        }
        warn!("retrieved action {action} names a tool that is not configured; skipped");
    }
    None
}

/// Execute one step: plan, run every planned tool-action (with retry), pick
/// the best passing candidate and advance the state.
pub fn run_step(config: &RunConfig, lead: &LeadContext, state: &mut CampaignState, step: usize) -> StepRecord {
    let start_molecule = canonical_form(&state.mol);
    let (plan_cmd, source) = match config.mode {
        Mode::Online | Mode::Parallel => plan(config, &state.mol, config.mode, step, &state.history, None),
        Mode::Retrieve => {
            let buffer = config.buffer.as_ref().expect("validated config");
            let hit = buffer.top1_similar(&state.mol, &config.property.id);
            if let Some((rec, sim)) = hit {
                if sim >= config.tau && state.adopted.as_ref() != Some(rec) {
                    debug!("step {step}: adopting trajectory of {} at similarity {sim}", rec.lead);
                    state.cursor = template(rec);
                    state.adopted = Some(rec.clone());
                }
            }
            match next_template_action(config, state) {
                Some(action) => (PlanCommand { tool_calls: vec![action] }, PlanSource::Template),
                None => plan(config, &state.mol, Mode::Retrieve, step, &state.history, hit),
            }
        }
    };

    let mol = state.mol.clone();
    let run = |action: &ToolAction| run_action(config, lead, &mol, step, action);
    let per_action: Vec<Vec<Attempt>> = if config.mode == Mode::Parallel && plan_cmd.tool_calls.len() > 1 {
        plan_cmd.tool_calls.par_iter().map(run).collect()
    } else {
        plan_cmd.tool_calls.iter().map(run).collect()
    };

    let rescued = per_action
        .iter()
        .any(|attempts| attempts.len() == 2 && !attempts[0].passed() && attempts[1].passed());
    for attempts in &per_action {
        state.history.push(HistoryEntry {
            step,
            action: attempts[0].action.clone(),
            passed: attempts.iter().any(Attempt::passed),
        });
    }
    let attempts: Vec<Attempt> = per_action.into_iter().flatten().collect();
    let chosen = select(&attempts);
    if let Some(c) = &chosen {
        state.mol = parse_smiles(&c.smiles).expect("chosen candidate parsed before");
    }
    StepRecord {
        step_index: step,
        start_molecule,
        plan: plan_cmd,
        plan_source: source,
        attempts,
        chosen,
        rescued,
    }
}

/// Argmax of improvement over every step's chosen candidate; ties keep the earliest step.
pub fn best_seen(steps: &[StepRecord], direction: Direction, lead_value: f64) -> Option<BestSeen> {
    let mut best: Option<BestSeen> = None;
    for s in steps {
        let Some(c) = &s.chosen else { continue };
        if best.as_ref().is_none_or(|b| c.improvement > b.improvement) {
            let imp = improvement(direction, lead_value, c.value);
            best = Some(BestSeen {
                smiles: c.smiles.clone(),
                value: c.value,
                sim: c.sim,
                improvement: c.improvement,
                relative_improvement: imp.relative,
                zero_reference: imp.zero_reference,
                step_index: s.step_index,
            });
        }
    }
    best
}

pub fn run_campaign(config: &RunConfig, lead: &MolGraph) -> Result<CampaignResult, OrchestrateError> {
    config.validate()?;
    let ctx = LeadContext::new(config, lead)?;
    let mut state = CampaignState::start(&ctx);
    let steps: Vec<StepRecord> = (0..config.steps).map(|t| run_step(config, &ctx, &mut state, t)).collect();
    let invocation_count = steps.iter().map(|s| s.attempts.len()).sum();
    Ok(CampaignResult {
        best_seen: best_seen(&steps, config.property.direction, ctx.value),
        lead: ctx.canonical,
        lead_value: ctx.value,
        property_id: config.property.id.clone(),
        direction: config.property.direction,
        mode: config.mode,
        tau: config.tau.value(),
        tool_count: config.tools.len(),
        steps,
        invocation_count,
    })
}

/// Planned calls per step match the mode's budget, every tool-action has at
/// most one retry, and the invocation count adds up.
pub fn invocation_budget_check(result: &CampaignResult, config: &RunConfig) -> bool {
    let mut total = 0;
    for step in &result.steps {
        let planned = &step.plan.tool_calls;
        match config.mode {
            Mode::Online | Mode::Retrieve => {
                if planned.len() != 1 {
                    return false;
                }
            }
            Mode::Parallel => {
                let named: BTreeSet<&str> = planned.iter().map(|a| a.tool_id.as_str()).collect();
                if planned.len() != config.tools.len() || named.len() != config.tools.len() {
                    return false;
                }
            }
        }
        let firsts = step.attempts.iter().filter(|a| !a.retry).count();
        let retries = step.attempts.len() - firsts;
        if firsts != planned.len() || retries > planned.len() {
            return false;
        }
        for action in planned {
            let n = step.attempts.iter().filter(|a| &a.action == action).count();
            let same = planned.iter().filter(|p| *p == action).count();
            if n > 2 * same {
                return false;
            }
        }
        total += step.attempts.len();
    }
    if total != result.invocation_count {
        return false;
    }
    match config.mode {
        Mode::Online | Mode::Retrieve => result.invocation_count <= 2 * config.steps,
        Mode::Parallel => true,
    }
}
