//! Optimizer tools: instruction construction, the simulated editors and the
//! external tool adapter.
//!
//! External tools receive one JSON line per invocation
//!
//! ```text
//! {"tool_id": "...", "smiles": "...", "property_id": "qed", "direction": "maximize", "instruction_text": "..."}
//! ```
//!
//! and reply with one line of free text (or a JSON object with a `text`
//! field). Candidates are the contents of its `<SMILES>...</SMILES>` spans.

pub mod edits;

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::{Direction, PropertySpec, Surrogate};
use crate::molgraph::{canonical_form, MolGraph};
use crate::transport::{Endpoint, Transport, TransportError};
use edits::Edit;

pub const TEMPLATE_COUNT: usize = 6;

/// Cap on failed cases embedded in one instruction.
pub const MAX_FAILED_CASES: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("prompt index {0} out of range 0..6")]
    IndexOutOfRange(usize),
    #[error("tool {tool} unavailable: {msg}")]
    ToolUnavailable { tool: String, msg: String },
    #[error("tool spec {0}: expected exactly 6 prompt templates")]
    BadTemplates(String),
}

/// Edit style addressed by each template index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditStyle {
    Substitute,
    Add,
    Remove,
    Rearrange,
    Conservative,
    Aggressive,
}

impl EditStyle {
    pub const ALL: [EditStyle; TEMPLATE_COUNT] = [
        EditStyle::Substitute,
        EditStyle::Add,
        EditStyle::Remove,
        EditStyle::Rearrange,
        EditStyle::Conservative,
        EditStyle::Aggressive,
    ];

    pub fn from_index(i: usize) -> Result<EditStyle, ToolError> {
        EditStyle::ALL.get(i).copied().ok_or(ToolError::IndexOutOfRange(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    InvalidStructure,
    SimilarityViolation,
    NoImprovement,
    EvaluatorError,
}

impl FailureKind {
    pub fn label(self) -> &'static str {
        match self {
            FailureKind::InvalidStructure => "invalid SMILES",
            FailureKind::SimilarityViolation => "too dissimilar from the lead",
            FailureKind::NoImprovement => "no property improvement over the lead",
            FailureKind::EvaluatorError => "could not be evaluated",
        }
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCase {
    pub smiles: String,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Objective {
    pub property_id: String,
    pub direction: Direction,
}

impl Objective {
    pub fn of(spec: &PropertySpec) -> Objective {
        Objective {
            property_id: spec.id.clone(),
            direction: spec.direction,
        }
    }

    fn verb(&self) -> &'static str {
        match self.direction {
            Direction::Maximize => "increase",
            Direction::Minimize => "decrease",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub template_index: usize,
    pub objective: Objective,
    pub base_text: String,
    pub failed_cases: Vec<FailedCase>,
}

impl Instruction {
    /// Full text sent to a tool, including the avoid-list when present.
    pub fn text(&self) -> String {
        let mut out = self.base_text.clone();
        if !self.failed_cases.is_empty() {
            out.push_str("\n\nEarlier answers for this molecule were rejected. Do not return any of these:\n");
            for case in &self.failed_cases {
                out.push_str(&format!("- {}: {}", case.smiles, case.kind.label()));
                if !case.message.is_empty() {
                    out.push_str(&format!(" ({})", case.message));
                }
                out.push('\n');
            }
            out.push_str("Check validity, closeness to the lead, and the property change before answering.");
        }
        out.push_str("\nReply with one molecule inside <SMILES></SMILES> tags.");
        out
    }
}

/// Behavior of a simulated editor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum ToolProfile {
    /// Terminal substituent swaps and small additions/removals.
    SubstituentSwap,
    /// One element change anywhere in the molecule.
    AtomMutation,
    /// Ring append, contraction and expansion.
    RingEdit,
    /// Substituent swaps whose output is corrupted with probability
    /// `p_fail * damping^n`, `n` = failed cases in the instruction,
    /// floored at `min(p_fail, 0.05)`.
    Unreliable { p_fail: f64, damping: f64 },
}

pub const DEFAULT_P_FAIL: f64 = 0.3;
pub const DEFAULT_DAMPING: f64 = 0.5;
pub const FAIL_FLOOR: f64 = 0.05;

impl ToolProfile {
    pub fn effective_failure(self, failed_cases: usize) -> f64 {
        match self {
            ToolProfile::Unreliable { p_fail, damping } => {
                let damped = p_fail * damping.powi(failed_cases as i32);
                damped.max(p_fail.min(FAIL_FLOOR))
            }
            _ => 0.0,
        }
    }
}

#[derive(Clone)]
pub struct ExternalTool {
    pub endpoint: Endpoint,
    pub transport: Arc<dyn Transport>,
}

impl fmt::Debug for ExternalTool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExternalTool({})", self.endpoint)
    }
}

#[derive(Debug, Clone)]
pub enum ToolKind {
    Builtin(ToolProfile),
    External(ExternalTool),
}

#[derive(Debug, Clone)]
pub struct ToolSpec {
    pub tool_id: String,
    pub description: String,
    prompt_templates: Vec<String>,
    pub kind: ToolKind,
}

/// Template texts; `{verb}` and `{property}` are filled from the objective.
pub const DEFAULT_TEMPLATES: [&str; TEMPLATE_COUNT] = [
    "Substitute one group of the molecule to {verb} its {property}.",
    "Add a small group to the molecule to {verb} its {property}.",
    "Remove a group from the molecule to {verb} its {property}.",
    "Rearrange the molecule's groups to {verb} its {property}.",
    "Make the smallest possible change to {verb} the molecule's {property}.",
    "Make a bold structural change to {verb} the molecule's {property}.",
];

impl ToolSpec {
    pub fn new(tool_id: &str, description: &str, prompt_templates: Vec<String>, kind: ToolKind) -> Result<ToolSpec, ToolError> {
        if prompt_templates.len() != TEMPLATE_COUNT {
            return Err(ToolError::BadTemplates(tool_id.to_string()));
        }
        Ok(ToolSpec {
            tool_id: tool_id.to_string(),
            description: description.to_string(),
            prompt_templates,
            kind,
        })
    }

    pub fn builtin(tool_id: &str, profile: ToolProfile) -> ToolSpec {
        let description = match profile {
            ToolProfile::SubstituentSwap => "swaps, adds or removes terminal substituents",
            ToolProfile::AtomMutation => "changes the element of a single atom",
            ToolProfile::RingEdit => "appends, contracts or expands rings",
            ToolProfile::Unreliable { .. } => "swaps terminal substituents; output is sometimes malformed",
        };
        ToolSpec::new(
            tool_id,
            description,
            DEFAULT_TEMPLATES.iter().map(|s| s.to_string()).collect(),
            ToolKind::Builtin(profile),
        )
        .expect("six default templates")
    }

    pub fn external(tool_id: &str, description: &str, endpoint: Endpoint) -> Result<ToolSpec, TransportError> {
        let transport = endpoint.connect()?;
        Ok(ToolSpec::new(
            tool_id,
            description,
            DEFAULT_TEMPLATES.iter().map(|s| s.to_string()).collect(),
            ToolKind::External(ExternalTool { endpoint, transport }),
        )
        .expect("six default templates"))
    }

    pub fn prompt_templates(&self) -> &[String] {
        &self.prompt_templates
    }
}

/// The four simulated editors: ToolA (substituent swap), ToolB (atom
/// mutation), ToolC (ring edit) and ToolD (unreliable substituent swap).
pub fn default_tools() -> Vec<ToolSpec> {
    default_tools_with(DEFAULT_P_FAIL, DEFAULT_DAMPING)
}

pub fn default_tools_with(p_fail: f64, damping: f64) -> Vec<ToolSpec> {
    vec![
        ToolSpec::builtin("ToolA", ToolProfile::SubstituentSwap),
        ToolSpec::builtin("ToolB", ToolProfile::AtomMutation),
        ToolSpec::builtin("ToolC", ToolProfile::RingEdit),
        ToolSpec::builtin("ToolD", ToolProfile::Unreliable { p_fail, damping }),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolResult {
    pub tool_id: String,
    pub candidates: Vec<String>,
    #[serde(skip)]
    pub latency: Duration,
    pub raw_payload: String,
}

impl PartialEq for ToolResult {
    /// Latency is wall-clock noise and is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.tool_id == other.tool_id && self.candidates == other.candidates && self.raw_payload == other.raw_payload
    }
}

/// `failed_cases` should be ordered most recent first; only the first
/// [`MAX_FAILED_CASES`] are kept.
pub fn build_instruction(
    spec: &ToolSpec,
    template_index: usize,
    objective: &PropertySpec,
    failed_cases: &[FailedCase],
) -> Result<Instruction, ToolError> {
    let template = spec
        .prompt_templates
        .get(template_index)
        .ok_or(ToolError::IndexOutOfRange(template_index))?;
    let objective = Objective::of(objective);
    let base_text = template
        .replace("{verb}", objective.verb())
        .replace("{property}", &objective.property_id);
    Ok(Instruction {
        template_index,
        objective,
        base_text,
        failed_cases: failed_cases.iter().take(MAX_FAILED_CASES).cloned().collect(),
    })
}

/// Output of one simulated edit.
#[derive(Debug, Clone, PartialEq)]
pub enum SimOutput {
    Molecule(MolGraph, String),
    Raw(String, String),
}

impl SimOutput {
    pub fn smiles(&self) -> String {
        match self {
            SimOutput::Molecule(m, _) => canonical_form(m),
            SimOutput::Raw(s, _) => s.clone(),
        }
    }

    pub fn note(&self) -> &str {
        match self {
            SimOutput::Molecule(_, n) | SimOutput::Raw(_, n) => n,
        }
    }
}

fn scorer(objective: &Objective) -> Option<(Surrogate, f64)> {
    let spec = PropertySpec::builtin(&objective.property_id).ok()?;
    Some((spec.surrogate()?, objective.direction.sign()))
}

fn edit_pool(profile: ToolProfile, style: EditStyle, mol: &MolGraph, cautious: bool) -> Vec<Edit> {
    use edits::*;
    let all_subs = |_: crate::molgraph::Element| SUBSTITUENTS.to_vec();
    let close = |e: crate::molgraph::Element| partners(e).to_vec();
    match profile {
        ToolProfile::SubstituentSwap | ToolProfile::Unreliable { .. } => {
            let pool = match style {
                EditStyle::Substitute => terminal_substitutions(mol, all_subs),
                EditStyle::Add => appends(mol, &APPENDABLE),
                EditStyle::Remove => deletions(mol),
                EditStyle::Rearrange => moves(mol),
                EditStyle::Conservative => terminal_substitutions(mol, close),
                EditStyle::Aggressive if cautious => terminal_substitutions(mol, all_subs),
                EditStyle::Aggressive => {
                    let singles = terminal_substitutions(mol, all_subs);
                    let mut pairs = Vec::new();
                    for (i, x) in singles.iter().enumerate() {
                        for y in &singles[i + 1..] {
                            if edit_site(x) != edit_site(y) {
                                pairs.push(Edit::Pair(Box::new(x.clone()), Box::new(y.clone())));
                            }
                        }
                    }
                    pairs
                }
            };
            if pool.is_empty() {
                // Every molecule has somewhere to add or swap.
                terminal_substitutions(mol, all_subs)
                    .into_iter()
                    .chain(appends(mol, &APPENDABLE))
                    .collect()
            } else {
                pool
            }
        }
        ToolProfile::AtomMutation => {
            use crate::molgraph::Element::C;
            let ring = crate::molgraph::rings::atom_ring_flags(mol);
            // Backbone atoms only, unless retrying after a similarity failure.
            let core = |i: usize| cautious || mol.degree(i) >= 2;
            let pool = match style {
                EditStyle::Substitute => mutations(mol, |i, _, _| core(i)),
                EditStyle::Add => mutations(mol, |i, from, _| core(i) && from == C),
                EditStyle::Remove => mutations(mol, |i, from, to| core(i) && from != C && to == C),
                EditStyle::Rearrange => mutations(mol, |i, _, _| ring[i]),
                EditStyle::Conservative => mutations(mol, |i, from, to| core(i) && partners(from).contains(&to)),
                EditStyle::Aggressive => mutations(mol, |i, _, _| core(i) && mol.degree(i) >= 3),
            };
            if pool.is_empty() {
                mutations(mol, |_, _, _| true)
            } else {
                pool
            }
        }
        ToolProfile::RingEdit => {
            let small = [RingKind::Cyclopropyl];
            let pool = match style {
                _ if cautious => contractions(mol)
                    .into_iter()
                    .chain(expansions(mol))
                    .chain(ring_attachments(mol, &small, false))
                    .collect(),
                EditStyle::Substitute => contractions(mol).into_iter().chain(expansions(mol)).collect(),
                EditStyle::Add => ring_attachments(mol, &RingKind::ALL, false),
                EditStyle::Remove => contractions(mol),
                EditStyle::Rearrange => expansions(mol),
                EditStyle::Conservative => ring_attachments(mol, &small, false),
                EditStyle::Aggressive => ring_attachments(mol, &RingKind::AROMATIC, false),
            };
            if pool.is_empty() {
                ring_attachments(mol, &RingKind::ALL, false)
            } else {
                pool
            }
        }
    }
}

fn edit_site(e: &Edit) -> usize {
    match *e {
        Edit::SetElement { atom, .. } => atom,
        Edit::Append { at, .. } => at,
        _ => usize::MAX,
    }
}

/// Proposals sampled per invocation, before greedy selection.
fn sample_size(style: EditStyle, retry_without_gain: bool) -> usize {
    let base = match style {
        EditStyle::Conservative => 2,
        _ => 4,
    };
    if retry_without_gain {
        base * 2
    } else {
        base
    }
}

/// One seeded edit by a simulated editor.
///
/// The editor samples a few valid edits in the style selected by the
/// instruction's template, skips anything listed as a failed case, and keeps
/// the proposal scoring best on the builtin surrogate for the objective (the
/// first sampled one when the property has no surrogate). A similarity
/// failure in the instruction makes the editor cautious; a missing
/// improvement makes it sample more.
pub fn simulated_tool_step(profile: ToolProfile, mol: &MolGraph, instruction: &Instruction, seed: u64) -> SimOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let style = EditStyle::from_index(instruction.template_index).unwrap_or(EditStyle::Substitute);
    let cautious = instruction
        .failed_cases
        .iter()
        .any(|c| c.kind == FailureKind::SimilarityViolation);
    let want_more = instruction
        .failed_cases
        .iter()
        .any(|c| c.kind == FailureKind::NoImprovement);
    let avoid: Vec<&str> = instruction.failed_cases.iter().map(|c| c.smiles.as_str()).collect();
    let original = canonical_form(mol);

    let mut pool = edit_pool(profile, style, mol, cautious);
    pool.shuffle(&mut rng);
    let k = sample_size(style, want_more);
    let mut proposals: Vec<(MolGraph, String, Edit)> = Vec::new();
    for edit in pool {
        if proposals.len() >= k {
            break;
        }
        let Some(out) = edit.apply(mol) else { continue };
        let smi = canonical_form(&out);
        if smi == original || avoid.contains(&smi.as_str()) || proposals.iter().any(|p| p.1 == smi) {
            continue;
        }
        proposals.push((out, smi, edit));
    }

    let picked = match scorer(&instruction.objective) {
        Some((surrogate, sign)) => {
            let mut best: Option<(f64, usize)> = None;
            for (i, (m, _, _)) in proposals.iter().enumerate() {
                let s = sign * surrogate.score(m);
                if best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, i));
                }
            }
            best.map(|(_, i)| i)
        }
        None => (!proposals.is_empty()).then_some(0),
    };
    let output = match picked {
        Some(i) => {
            let (m, _, edit) = proposals.swap_remove(i);
            SimOutput::Molecule(m, edit.to_string())
        }
        None => SimOutput::Molecule(mol.clone(), "no applicable edit".to_string()),
    };

    let p = profile.effective_failure(instruction.failed_cases.len());
    if p > 0.0 && rng.gen::<f64>() < p {
        let smi = output.smiles();
        // An unclosed ring bond or branch never parses.
        let broken = if rng.gen::<bool>() { format!("{smi}9") } else { format!("{smi}(") };
        return SimOutput::Raw(broken, format!("{}; corrupted", output.note()));
    }
    output
}

/// Contents of every `<SMILES>...</SMILES>` span, trimmed; empty spans are skipped.
pub fn extract_smiles_spans(text: &str) -> Vec<String> {
    const OPEN: &str = "<SMILES>";
    const CLOSE: &str = "</SMILES>";
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find(OPEN) {
        let after = &rest[start + OPEN.len()..];
        let Some(end) = after.find(CLOSE) else { break };
        let span = after[..end].trim();
        if !span.is_empty() {
            out.push(span.to_string());
        }
        rest = &after[end + CLOSE.len()..];
    }
    out
}

#[derive(Serialize)]
struct ToolRequest<'a> {
    tool_id: &'a str,
    smiles: &'a str,
    property_id: &'a str,
    direction: Direction,
    instruction_text: &'a str,
}

pub fn invoke(spec: &ToolSpec, instruction: &Instruction, mol: &MolGraph, seed: u64) -> Result<ToolResult, ToolError> {
    let started = Instant::now();
    match &spec.kind {
        ToolKind::Builtin(profile) => {
            let out = simulated_tool_step(*profile, mol, instruction, seed);
            Ok(ToolResult {
                tool_id: spec.tool_id.clone(),
                candidates: vec![out.smiles()],
                latency: started.elapsed(),
                raw_payload: out.note().to_string(),
            })
        }
        ToolKind::External(ext) => {
            let smiles = canonical_form(mol);
            let text = instruction.text();
            let req = serde_json::to_string(&ToolRequest {
                tool_id: &spec.tool_id,
                smiles: &smiles,
                property_id: &instruction.objective.property_id,
                direction: instruction.objective.direction,
                instruction_text: &text,
            })
            .expect("serializable request");
            let reply = ext.transport.exchange(&req).map_err(|e| ToolError::ToolUnavailable {
                tool: spec.tool_id.clone(),
                msg: e.to_string(),
            })?;
            let body = match serde_json::from_str::<serde_json::Value>(&reply) {
                Ok(serde_json::Value::Object(obj)) => match obj.get("text") {
                    Some(serde_json::Value::String(t)) => t.clone(),
                    _ => reply.clone(),
                },
                _ => reply.clone(),
            };
            Ok(ToolResult {
                tool_id: spec.tool_id.clone(),
                candidates: extract_smiles_spans(&body),
                latency: started.elapsed(),
                raw_payload: reply,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::{morgan_fp, tanimoto};
    use crate::molgraph::rings::smallest_rings;
    use crate::molgraph::{parse_smiles, validate};
    use crate::transport::FnTransport;

    fn qed() -> PropertySpec {
        PropertySpec::builtin("qed").unwrap()
    }

    fn case(smiles: &str, kind: FailureKind) -> FailedCase {
        FailedCase {
            smiles: smiles.into(),
            kind,
            message: String::new(),
        }
    }

    #[test]
    fn instruction_avoid_list() {
        let tool = ToolSpec::builtin("ToolA", ToolProfile::SubstituentSwap);
        let plain = build_instruction(&tool, 0, &qed(), &[]).unwrap();
        assert!(!plain.text().contains("rejected"));
        assert!(plain.text().contains("increase its qed"));

        let one = build_instruction(&tool, 1, &qed(), &[case("C1CC", FailureKind::InvalidStructure)]).unwrap();
        assert!(one.text().contains("C1CC: invalid SMILES"));

        let two = build_instruction(
            &tool,
            2,
            &qed(),
            &[case("CCN", FailureKind::NoImprovement), case("CCS", FailureKind::SimilarityViolation)],
        )
        .unwrap();
        let text = two.text();
        assert_eq!(two.failed_cases.len(), 2);
        assert!(text.find("CCN").unwrap() < text.find("CCS").unwrap());

        let three = [
            case("A", FailureKind::NoImprovement),
            case("B", FailureKind::NoImprovement),
            case("C", FailureKind::NoImprovement),
        ];
        let capped = build_instruction(&tool, 0, &qed(), &three).unwrap();
        assert_eq!(capped.failed_cases.iter().map(|c| c.smiles.as_str()).collect::<Vec<_>>(), ["A", "B"]);

        assert_eq!(build_instruction(&tool, 6, &qed(), &[]), Err(ToolError::IndexOutOfRange(6)));
    }

    #[test]
    fn tool_a_single_candidate_small_diff() {
        let tool = ToolSpec::builtin("ToolA", ToolProfile::SubstituentSwap);
        let mol = parse_smiles("CCO").unwrap();
        for t in 0..TEMPLATE_COUNT {
            let ins = build_instruction(&tool, t, &qed(), &[]).unwrap();
            let r = invoke(&tool, &ins, &mol, 7).unwrap();
            assert_eq!(r.candidates.len(), 1);
            let out = parse_smiles(&r.candidates[0]).unwrap();
            assert!(validate(&out).valid);
            assert!((out.len() as isize - 3).abs() <= 2, "{} from template {t}", r.candidates[0]);
        }
    }

    #[test]
    fn tool_b_changes_one_element() {
        let tool = ToolSpec::builtin("ToolB", ToolProfile::AtomMutation);
        let mol = parse_smiles("CCO").unwrap();
        let ins = build_instruction(&tool, 0, &qed(), &[]).unwrap();
        for seed in 0..20 {
            let r = invoke(&tool, &ins, &mol, seed).unwrap();
            let out = parse_smiles(&r.candidates[0]).unwrap();
            assert!(validate(&out).valid);
            assert_eq!(out.len(), 3);
            let mut before: Vec<_> = mol.atoms().iter().map(|a| a.element).collect();
            let mut after: Vec<_> = out.atoms().iter().map(|a| a.element).collect();
            before.sort();
            after.sort();
            let same = before.iter().zip(&after).filter(|(a, b)| a == b).count();
            assert!(same >= 1 && before != after);
        }
    }

    #[test]
    fn tool_c_adds_ring_to_hexane() {
        let tool = ToolSpec::builtin("ToolC", ToolProfile::RingEdit);
        let hexane = parse_smiles("CCCCCC").unwrap();
        for t in 0..TEMPLATE_COUNT {
            let ins = build_instruction(&tool, t, &qed(), &[]).unwrap();
            let r = invoke(&tool, &ins, &hexane, 3).unwrap();
            let out = parse_smiles(&r.candidates[0]).unwrap();
            assert_eq!(smallest_rings(&out).len(), 1, "template {t}");
        }
    }

    #[test]
    fn tool_d_forced_failure_and_damping() {
        let forced = ToolProfile::Unreliable { p_fail: 1.0, damping: 0.5 };
        let tool = ToolSpec::builtin("ToolD", forced);
        let mol = parse_smiles("CCO").unwrap();
        let ins = build_instruction(&tool, 0, &qed(), &[]).unwrap();
        for seed in 0..10 {
            let r = invoke(&tool, &ins, &mol, seed).unwrap();
            assert!(parse_smiles(&r.candidates[0]).is_err());
        }
        let p = ToolProfile::Unreliable { p_fail: 0.5, damping: 0.5 };
        assert!((p.effective_failure(1) - 0.25).abs() < 1e-12);
        assert!((p.effective_failure(10) - 0.05).abs() < 1e-12);
        let tiny = ToolProfile::Unreliable { p_fail: 0.01, damping: 0.5 };
        assert!((tiny.effective_failure(2) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn builtin_is_seed_deterministic() {
        let mol = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        for tool in default_tools() {
            for t in 0..TEMPLATE_COUNT {
                let ins = build_instruction(&tool, t, &qed(), &[]).unwrap();
                assert_eq!(invoke(&tool, &ins, &mol, 11).unwrap(), invoke(&tool, &ins, &mol, 11).unwrap());
            }
        }
    }

    #[test]
    fn failed_cases_are_avoided() {
        let tool = ToolSpec::builtin("ToolA", ToolProfile::SubstituentSwap);
        let mol = parse_smiles("CCO").unwrap();
        let ins = build_instruction(&tool, 0, &qed(), &[]).unwrap();
        let first = invoke(&tool, &ins, &mol, 5).unwrap().candidates[0].clone();
        let retry = build_instruction(&tool, 0, &qed(), &[case(&first, FailureKind::NoImprovement)]).unwrap();
        assert_ne!(invoke(&tool, &retry, &mol, 5).unwrap().candidates[0], first);
    }

    #[test]
    fn span_extraction() {
        assert_eq!(extract_smiles_spans("ok <SMILES>CCN</SMILES>"), ["CCN"]);
        assert_eq!(extract_smiles_spans("<SMILES> C </SMILES> and <SMILES>O</SMILES>"), ["C", "O"]);
        assert!(extract_smiles_spans("<SMILES>unterminated").is_empty());
        assert!(extract_smiles_spans("nothing here").is_empty());
        assert!(extract_smiles_spans("</SMILES><SMILES></SMILES>").is_empty());
    }

    #[test]
    fn external_tool_round_trip() {
        let transport = Arc::new(FnTransport(|req: &str| {
            let v: serde_json::Value = serde_json::from_str(req).unwrap();
            assert_eq!(v["direction"], "maximize");
            assert!(v["instruction_text"].as_str().unwrap().contains("qed"));
            Ok(format!("sure <SMILES>{}N</SMILES>", v["smiles"].as_str().unwrap()))
        }));
        let spec = ToolSpec::new(
            "Ext",
            "external",
            DEFAULT_TEMPLATES.iter().map(|s| s.to_string()).collect(),
            ToolKind::External(ExternalTool {
                endpoint: Endpoint::Tcp("127.0.0.1:1".into()),
                transport,
            }),
        )
        .unwrap();
        let ins = build_instruction(&spec, 0, &qed(), &[]).unwrap();
        let r = invoke(&spec, &ins, &parse_smiles("CC").unwrap(), 0).unwrap();
        assert_eq!(r.candidates, ["CCN"]);

        let down = ToolSpec::new(
            "Down",
            "",
            DEFAULT_TEMPLATES.iter().map(|s| s.to_string()).collect(),
            ToolKind::External(ExternalTool {
                endpoint: Endpoint::Tcp("127.0.0.1:1".into()),
                transport: Arc::new(FnTransport(|_: &str| Err(TransportError::Closed("x".into())))),
            }),
        )
        .unwrap();
        assert!(matches!(
            invoke(&down, &ins, &parse_smiles("CC").unwrap(), 0),
            Err(ToolError::ToolUnavailable { .. })
        ));
    }

    #[test]
    fn similarity_ordering_of_tools() {
        let leads = ["CC(=O)Nc1ccc(O)cc1", "CCOC(=O)c1ccccc1N", "CC(C)Cc1ccc(C(C)C(=O)O)cc1", "OCC1CCCCC1NC(=O)C"];
        let mut means = Vec::new();
        for tool in default_tools().into_iter().take(3) {
            let (mut total, mut n) = (0.0, 0);
            for smi in leads {
                let mol = parse_smiles(smi).unwrap();
                let fp0 = morgan_fp(&mol, 2, 2048).unwrap();
                for seed in 0..30u64 {
                    let t = (seed % 6) as usize;
                    let ins = build_instruction(&tool, t, &qed(), &[]).unwrap();
                    let r = invoke(&tool, &ins, &mol, seed).unwrap();
                    let out = parse_smiles(&r.candidates[0]).unwrap();
                    total += tanimoto(&fp0, &morgan_fp(&out, 2, 2048).unwrap()).unwrap().value();
                    n += 1;
                }
            }
            means.push(total / n as f64);
        }
        assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
    }
}
