//! Direction-aware property evaluation.
//!
//! Builtin properties are deterministic surrogates computed from the heavy
//! atom graph. They stand in for the learned predictors used in practice and
//! keep every run reproducible. External properties are served over the
//! evaluator protocol:
//!
//! ```text
//! request:  {"request_id": 7, "property_id": "bbbp", "smiles_list": ["CCO", ...]}
//! response: {"request_id": 7, "values": [0.41, null, ...], "errors": [[1, "bad input"]]}
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molgraph::rings::{aromatic_ring_count, largest_ring_size};
use crate::molgraph::{canonical_form, validate, Element, MolGraph};
use crate::transport::{Endpoint, Transport, TransportError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("evaluator for {property} unavailable: {msg}")]
    EvaluatorUnavailable { property: String, msg: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("property mismatch: {expected} vs {found}")]
    PropertyMismatch { expected: String, found: String },
    #[error("unknown property {0:?}")]
    UnknownProperty(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// +1 for maximize, -1 for minimize.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Maximize => 1.0,
            Direction::Minimize => -1.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Maximize => "maximize",
            Direction::Minimize => "minimize",
        })
    }
}

/// Builtin surrogate scoring functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surrogate {
    Logp,
    Plogp,
    DrugLikeness,
    Bbbp,
    Hia,
    Mutagenicity,
}

/// Per-atom additive lipophilicity contributions.
///
/// | atom          | contribution |
/// |---------------|-------------:|
/// | aromatic C    | +0.29 |
/// | aliphatic C   | +0.14 |
/// | N             | -0.60 |
/// | O             | -0.64 |
/// | S             | +0.26 |
/// | P             | +0.12 |
/// | F             | +0.21 |
/// | Cl            | +0.65 |
/// | Br            | +0.86 |
/// | I             | +1.12 |
/// | B             | +0.05 |
pub fn logp_contribution(element: Element, aromatic: bool) -> f64 {
    match element {
        Element::C if aromatic => 0.29,
        Element::C => 0.14,
        Element::N => -0.60,
        Element::O => -0.64,
        Element::S => 0.26,
        Element::P => 0.12,
        Element::F => 0.21,
        Element::Cl => 0.65,
        Element::Br => 0.86,
        Element::I => 1.12,
        Element::B => 0.05,
    }
}

/// Graph descriptors feeding the surrogates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptors {
    pub logp: f64,
    pub heavy_atoms: usize,
    pub hetero_fraction: f64,
    pub largest_ring: usize,
    pub aromatic_rings: usize,
}

impl Descriptors {
    pub fn of(mol: &MolGraph) -> Descriptors {
        // Count first so the sum does not depend on atom numbering.
        let mut counts: BTreeMap<(Element, bool), usize> = BTreeMap::new();
        for a in mol.atoms() {
            *counts.entry((a.element, a.aromatic && a.element == Element::C)).or_default() += 1;
        }
        let logp = counts
            .iter()
            .map(|(&(e, arom), &k)| k as f64 * logp_contribution(e, arom))
            .sum();
        let heavy_atoms = mol.len();
        let hetero = mol.atoms().iter().filter(|a| a.element != Element::C).count();
        Descriptors {
            logp,
            heavy_atoms,
            hetero_fraction: if heavy_atoms == 0 {
                0.0
            } else {
                hetero as f64 / heavy_atoms as f64
            },
            largest_ring: largest_ring_size(mol),
            aromatic_rings: aromatic_ring_count(mol),
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Surrogate {
    /// Score a valid molecule.
    ///
    /// * `plogp = logp - max(0, largest_ring - 6)`
    /// * `drug_likeness = exp(-((HAC-25)/15)^2) * exp(-((hf-0.3)/0.3)^2)`
    /// * `bbbp = σ(0.8·logp − 5·(hf − 0.2))`
    /// * `hia = σ(0.6·logp − 4·(hf − 0.3) + 0.5)`
    /// * `mutagenicity = σ(0.9·aromatic_rings − 0.3·logp + 2·(hf − 0.3) − 1)`
    ///
    /// where `hf` is the non-carbon fraction of heavy atoms and σ the logistic function.
    pub fn score(self, mol: &MolGraph) -> f64 {
        self.score_descriptors(&Descriptors::of(mol))
    }

    pub fn score_descriptors(self, d: &Descriptors) -> f64 {
        let hf = d.hetero_fraction;
        match self {
            Surrogate::Logp => d.logp,
            Surrogate::Plogp => d.logp - (d.largest_ring as f64 - 6.0).max(0.0),
            Surrogate::DrugLikeness => {
                let size = (d.heavy_atoms as f64 - 25.0) / 15.0;
                let polar = (hf - 0.3) / 0.3;
                (-size * size).exp() * (-polar * polar).exp()
            }
            Surrogate::Bbbp => logistic(0.8 * d.logp - 5.0 * (hf - 0.2)),
            Surrogate::Hia => logistic(0.6 * d.logp - 4.0 * (hf - 0.3) + 0.5),
            Surrogate::Mutagenicity => {
                logistic(0.9 * d.aromatic_rings as f64 - 0.3 * d.logp + 2.0 * (hf - 0.3) - 1.0)
            }
        }
    }
}

/// Where a property's values come from.
#[derive(Debug, Clone)]
pub enum EvaluatorBinding {
    Builtin(Surrogate),
    External(ExternalEvaluator),
}

#[derive(Debug, Clone)]
pub struct PropertySpec {
    pub id: String,
    pub direction: Direction,
    pub evaluator: EvaluatorBinding,
}

/// Property ids with builtin surrogates. Mutagenicity is the only one minimized.
pub const BUILTIN_PROPERTIES: [&str; 5] = ["plogp", "qed", "bbbp", "hia", "mutagenicity"];

impl PropertySpec {
    pub fn builtin(id: &str) -> Result<PropertySpec, EvalError> {
        let (surrogate, direction) = match id {
            "plogp" => (Surrogate::Plogp, Direction::Maximize),
            "qed" => (Surrogate::DrugLikeness, Direction::Maximize),
            "bbbp" => (Surrogate::Bbbp, Direction::Maximize),
            "hia" => (Surrogate::Hia, Direction::Maximize),
            "mutagenicity" => (Surrogate::Mutagenicity, Direction::Minimize),
            "logp" => (Surrogate::Logp, Direction::Maximize),
            other => return Err(EvalError::UnknownProperty(other.to_string())),
        };
        Ok(PropertySpec {
            id: id.to_string(),
            direction,
            evaluator: EvaluatorBinding::Builtin(surrogate),
        })
    }

    /// Bind a property to an external evaluator. Known ids keep their direction.
    pub fn external(id: &str, direction: Option<Direction>, evaluator: ExternalEvaluator) -> Result<PropertySpec, EvalError> {
        let direction = match (PropertySpec::builtin(id), direction) {
            (Ok(spec), _) => spec.direction,
            (Err(_), Some(d)) => d,
            (Err(e), None) => return Err(e),
        };
        Ok(PropertySpec {
            id: id.to_string(),
            direction,
            evaluator: EvaluatorBinding::External(evaluator),
        })
    }

    pub fn surrogate(&self) -> Option<Surrogate> {
        match self.evaluator {
            EvaluatorBinding::Builtin(s) => Some(s),
            EvaluatorBinding::External(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyValue {
    pub value: f64,
}

impl PropertyValue {
    pub fn new(value: f64) -> Result<Self, EvalError> {
        if value.is_finite() {
            Ok(PropertyValue { value })
        } else {
            Err(EvalError::InvalidInput(format!("non-finite value {value}")))
        }
    }
}

/// A property value tagged with the property it measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedValue {
    pub property_id: String,
    pub value: f64,
}

/// Change from a reference value, signed so that positive means "better".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub absolute: f64,
    /// `|Δ| / |initial|`, present only for improvements with a nonzero reference.
    pub relative: Option<f64>,
    pub improved: bool,
    /// The reference value was zero, so `relative` is undefined.
    pub zero_reference: bool,
}

pub fn evaluate(spec: &PropertySpec, mol: &MolGraph) -> Result<TaggedValue, EvalError> {
    let report = validate(mol);
    if !report.valid {
        return Err(EvalError::InvalidInput(format!("{:?}", report.violations)));
    }
    let value = match &spec.evaluator {
        EvaluatorBinding::Builtin(s) => s.score(mol),
        EvaluatorBinding::External(ext) => {
            let smiles = canonical_form(mol);
            match ext.evaluate_batch(&spec.id, &[smiles])?.pop() {
                Some(Ok(v)) => v,
                Some(Err(msg)) => {
                    return Err(EvalError::EvaluatorUnavailable {
                        property: spec.id.clone(),
                        msg,
                    })
                }
                None => unreachable!("batch of one"),
            }
        }
    };
    PropertyValue::new(value)?;
    Ok(TaggedValue {
        property_id: spec.id.clone(),
        value,
    })
}

/// Evaluate many molecules at once; external evaluators receive one request.
pub fn evaluate_many(spec: &PropertySpec, mols: &[&MolGraph]) -> Vec<Result<TaggedValue, EvalError>> {
    match &spec.evaluator {
        EvaluatorBinding::Builtin(_) => mols.iter().map(|m| evaluate(spec, m)).collect(),
        EvaluatorBinding::External(ext) => {
            if mols.is_empty() {
                return Vec::new();
            }
            let smiles: Vec<String> = mols.iter().map(|m| canonical_form(m)).collect();
            match ext.evaluate_batch(&spec.id, &smiles) {
                Err(e) => mols.iter().map(|_| Err(e.clone())).collect(),
                Ok(values) => values
                    .into_iter()
                    .map(|r| match r {
                        Ok(v) => PropertyValue::new(v).map(|_| TaggedValue {
                            property_id: spec.id.clone(),
                            value: v,
                        }),
                        Err(msg) => Err(EvalError::EvaluatorUnavailable {
                            property: spec.id.clone(),
                            msg,
                        }),
                    })
                    .collect(),
            }
        }
    }
}

fn check_same(spec: &PropertySpec, a: &TaggedValue, b: &TaggedValue) -> Result<(), EvalError> {
    for v in [a, b] {
        if v.property_id != spec.id {
            return Err(EvalError::PropertyMismatch {
                expected: spec.id.clone(),
                found: v.property_id.clone(),
            });
        }
    }
    Ok(())
}

/// Strict improvement in the property's preferred direction.
pub fn is_improvement(spec: &PropertySpec, new: &TaggedValue, reference: &TaggedValue) -> Result<bool, EvalError> {
    check_same(spec, new, reference)?;
    Ok(improves(spec.direction, new.value, reference.value))
}

pub fn improves(direction: Direction, new: f64, reference: f64) -> bool {
    match direction {
        Direction::Maximize => new > reference,
        Direction::Minimize => new < reference,
    }
}

pub fn relative_improvement(spec: &PropertySpec, initial: &TaggedValue, final_: &TaggedValue) -> Result<Improvement, EvalError> {
    check_same(spec, initial, final_)?;
    Ok(improvement(spec.direction, initial.value, final_.value))
}

pub fn improvement(direction: Direction, initial: f64, final_: f64) -> Improvement {
    let improved = improves(direction, final_, initial);
    let zero_reference = initial == 0.0;
    let relative = (improved && !zero_reference).then(|| (final_ - initial).abs() / initial.abs());
    Improvement {
        absolute: direction.sign() * (final_ - initial),
        relative,
        improved,
        zero_reference,
    }
}

#[derive(Serialize)]
struct EvalRequest<'a> {
    request_id: u64,
    property_id: &'a str,
    smiles_list: &'a [String],
}

#[derive(Deserialize)]
struct EvalResponse {
    #[serde(default)]
    request_id: Option<u64>,
    values: Vec<Option<f64>>,
    #[serde(default)]
    errors: Vec<(usize, String)>,
}

/// Client for the external evaluator protocol.
#[derive(Debug, Clone)]
pub struct ExternalEvaluator {
    transport: Arc<dyn Transport>,
    next_id: Arc<AtomicU64>,
}

impl ExternalEvaluator {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        ExternalEvaluator {
            transport,
            next_id: Arc::new(AtomicU64::new(1)),
        }
    }

    pub fn connect(endpoint: &Endpoint) -> Result<Self, TransportError> {
        Ok(ExternalEvaluator::new(endpoint.connect()?))
    }

    /// One value or error message per input string, in input order.
    pub fn evaluate_batch(&self, property_id: &str, smiles: &[String]) -> Result<Vec<Result<f64, String>>, EvalError> {
        let unavailable = |msg: String| EvalError::EvaluatorUnavailable {
            property: property_id.to_string(),
            msg,
        };
        let request_id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let req = serde_json::to_string(&EvalRequest {
            request_id,
            property_id,
            smiles_list: smiles,
        })
        .expect("serializable request");
        let line = self
            .transport
            .exchange(&req)
            .map_err(|e| unavailable(e.to_string()))?;
        let resp: EvalResponse =
            serde_json::from_str(&line).map_err(|e| unavailable(format!("malformed response: {e}")))?;
        if let Some(id) = resp.request_id {
            if id != request_id {
                return Err(unavailable(format!("response id {id} does not match request {request_id}")));
            }
        }
        if resp.values.len() != smiles.len() {
            return Err(unavailable(format!(
                "expected {} values, got {}",
                smiles.len(),
                resp.values.len()
            )));
        }
        let errors: BTreeMap<usize, String> = resp.errors.into_iter().collect();
        Ok(resp
            .values
            .into_iter()
            .enumerate()
            .map(|(i, v)| match (errors.get(&i), v) {
                (Some(msg), _) => Err(msg.clone()),
                (None, Some(v)) if v.is_finite() => Ok(v),
                (None, _) => Err("missing or non-finite value".to_string()),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;
    use crate::transport::FnTransport;

    fn tv(id: &str, v: f64) -> TaggedValue {
        TaggedValue {
            property_id: id.into(),
            value: v,
        }
    }

    #[test]
    fn surrogate_hand_sums() {
        let ethane = parse_smiles("CC").unwrap();
        assert!((Surrogate::Logp.score(&ethane) - 0.28).abs() < 1e-12);
        let benzene = parse_smiles("c1ccccc1").unwrap();
        assert!((Surrogate::Plogp.score(&benzene) - 1.74).abs() < 1e-12);
        let cyclooctane = parse_smiles("C1CCCCCCC1").unwrap();
        assert!((Surrogate::Plogp.score(&cyclooctane) - (8.0 * 0.14 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn drug_likeness_formula() {
        let chain = parse_smiles(&"C".repeat(25)).unwrap();
        assert!((Surrogate::DrugLikeness.score(&chain) - (-1.0f64).exp()).abs() < 1e-12);
        let small = parse_smiles("CCO").unwrap();
        assert!(Surrogate::DrugLikeness.score(&small) < Surrogate::DrugLikeness.score(&chain));
    }

    #[test]
    fn directions() {
        assert_eq!(PropertySpec::builtin("mutagenicity").unwrap().direction, Direction::Minimize);
        for id in ["plogp", "qed", "bbbp", "hia"] {
            assert_eq!(PropertySpec::builtin(id).unwrap().direction, Direction::Maximize);
        }
        assert!(matches!(PropertySpec::builtin("solubility"), Err(EvalError::UnknownProperty(_))));
    }

    #[test]
    fn improvement_examples() {
        let qed = PropertySpec::builtin("qed").unwrap();
        assert!(is_improvement(&qed, &tv("qed", 0.55), &tv("qed", 0.50)).unwrap());
        let mutag = PropertySpec::builtin("mutagenicity").unwrap();
        assert!(is_improvement(&mutag, &tv("mutagenicity", 0.60), &tv("mutagenicity", 0.80)).unwrap());
        assert!(!is_improvement(&qed, &tv("qed", 0.5), &tv("qed", 0.5)).unwrap());
        assert!(!is_improvement(&mutag, &tv("mutagenicity", 0.5), &tv("mutagenicity", 0.5)).unwrap());
        assert!(matches!(
            is_improvement(&qed, &tv("bbbp", 0.5), &tv("qed", 0.5)),
            Err(EvalError::PropertyMismatch { .. })
        ));
    }

    #[test]
    fn relative_improvement_examples() {
        let qed = PropertySpec::builtin("qed").unwrap();
        let r = relative_improvement(&qed, &tv("qed", 0.40), &tv("qed", 0.50)).unwrap();
        assert!((r.relative.unwrap() - 0.25).abs() < 1e-12);
        let mutag = PropertySpec::builtin("mutagenicity").unwrap();
        let r = relative_improvement(&mutag, &tv("mutagenicity", 0.80), &tv("mutagenicity", 0.60)).unwrap();
        assert!((r.relative.unwrap() - 0.25).abs() < 1e-12);
        assert!(r.absolute > 0.0);
        let plogp = PropertySpec::builtin("plogp").unwrap();
        let r = relative_improvement(&plogp, &tv("plogp", 0.0), &tv("plogp", 1.0)).unwrap();
        assert!(r.improved && r.zero_reference && r.relative.is_none());
        let r = relative_improvement(&plogp, &tv("plogp", 1.0), &tv("plogp", 0.5)).unwrap();
        assert!(!r.improved && r.relative.is_none() && r.absolute < 0.0);
    }

    #[test]
    fn evaluation_is_deterministic_across_relabelings() {
        let mol = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        let n = mol.len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let other = mol.permuted(&perm);
        for id in BUILTIN_PROPERTIES {
            let spec = PropertySpec::builtin(id).unwrap();
            let a = evaluate(&spec, &mol).unwrap();
            assert_eq!(a, evaluate(&spec, &mol).unwrap());
            assert_eq!(a, evaluate(&spec, &other).unwrap());
        }
    }

    #[test]
    fn external_protocol() {
        let transport = Arc::new(FnTransport(|req: &str| {
            let v: serde_json::Value = serde_json::from_str(req).unwrap();
            let id = v["request_id"].as_u64().unwrap();
            let n = v["smiles_list"].as_array().unwrap().len();
            let values: Vec<serde_json::Value> = (0..n)
                .map(|i| if i == 1 { serde_json::Value::Null } else { serde_json::json!(i as f64 + 0.5) })
                .collect();
            Ok(serde_json::json!({"request_id": id, "values": values, "errors": [[1, "cannot score"]]}).to_string())
        }));
        let ext = ExternalEvaluator::new(transport);
        let spec = PropertySpec::external("bbbp", None, ext).unwrap();
        assert_eq!(spec.direction, Direction::Maximize);
        let a = parse_smiles("CCO").unwrap();
        let b = parse_smiles("CCN").unwrap();
        let c = parse_smiles("CCC").unwrap();
        let out = evaluate_many(&spec, &[&a, &b, &c]);
        assert_eq!(out[0].as_ref().unwrap().value, 0.5);
        assert!(matches!(out[1], Err(EvalError::EvaluatorUnavailable { .. })));
        assert_eq!(out[2].as_ref().unwrap().value, 2.5);
    }

    #[test]
    fn external_failure_is_unavailable() {
        let transport = Arc::new(FnTransport(|_: &str| {
            Err(TransportError::Closed("test".into()))
        }));
        let spec = PropertySpec::external("custom", Some(Direction::Minimize), ExternalEvaluator::new(transport)).unwrap();
        let mol = parse_smiles("CCO").unwrap();
        assert!(matches!(evaluate(&spec, &mol), Err(EvalError::EvaluatorUnavailable { .. })));
        let garbage = Arc::new(FnTransport(|_: &str| Ok("not json".to_string())));
        let spec = PropertySpec::external("qed", None, ExternalEvaluator::new(garbage)).unwrap();
        assert!(matches!(evaluate(&spec, &mol), Err(EvalError::EvaluatorUnavailable { .. })));
    }
}
