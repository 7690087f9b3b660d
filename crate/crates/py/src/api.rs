//! Plain-Rust layer under the bindings; errors are display strings.

use std::sync::Arc;

use leadopt::buffer::BufferHandle;
use leadopt::evaluate::{evaluate, PropertySpec};
use leadopt::fingerprint::{morgan_fp_with, tanimoto, FingerprintParams, Similarity};
use leadopt::metrics::MetricReport;
use leadopt::molgraph::{canonical_form, parse_smiles, validate, MolGraph};
use leadopt::orchestrate::{run_campaign, CampaignResult, Mode, RunConfig};
use leadopt::pipeline::{build_buffer as build, rows_from_smiles, PropertyRegistry};
use leadopt::tools::default_tools;

fn mol(smiles: &str) -> Result<MolGraph, String> {
    parse_smiles(smiles).map_err(|e| format!("{smiles:?}: {e}"))
}

pub fn canonical(smiles: &str) -> Result<String, String> {
    Ok(canonical_form(&mol(smiles)?))
}

/// Parse failures (syntax, valence, rings) are reported as violations.
pub fn validity(smiles: &str) -> (bool, Vec<String>) {
    match parse_smiles(smiles) {
        Ok(m) => {
            let report = validate(&m);
            (report.valid, report.violations.iter().map(|v| v.message.clone()).collect())
        }
        Err(e) => (false, vec![e.to_string()]),
    }
}

pub fn similarity(a: &str, b: &str) -> Result<f64, String> {
    let params = FingerprintParams::default();
    let fa = morgan_fp_with(&mol(a)?, params).map_err(|e| e.to_string())?;
    let fb = morgan_fp_with(&mol(b)?, params).map_err(|e| e.to_string())?;
    Ok(tanimoto(&fa, &fb).map_err(|e| e.to_string())?.value())
}

pub fn property_value(property: &str, smiles: &str) -> Result<f64, String> {
    let spec = PropertySpec::builtin(property).map_err(|e| e.to_string())?;
    Ok(evaluate(&spec, &mol(smiles)?).map_err(|e| e.to_string())?.value)
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub mode: String,
    pub property: String,
    pub steps: usize,
    pub tau: f64,
    pub seed: u64,
    pub retry: bool,
}

pub fn config(s: &Settings, buffer: Option<Arc<BufferHandle>>) -> Result<RunConfig, String> {
    let mode: Mode = s.mode.parse().map_err(|e: leadopt::orchestrate::OrchestrateError| e.to_string())?;
    let spec = PropertySpec::builtin(&s.property).map_err(|e| e.to_string())?;
    let mut c = RunConfig::new(mode, default_tools(), spec);
    c.steps = s.steps;
    c.tau = Similarity::new(s.tau).ok_or_else(|| format!("tau {} outside [0, 1]", s.tau))?;
    c.seed = s.seed;
    c.retry = s.retry;
    c.buffer = buffer;
    c.validate().map_err(|e| e.to_string())?;
    Ok(c)
}

pub fn campaign(config: &RunConfig, lead: &str) -> Result<CampaignResult, String> {
    run_campaign(config, &mol(lead)?).map_err(|e| e.to_string())
}

pub fn campaign_json(config: &RunConfig, lead: &str) -> Result<String, String> {
    serde_json::to_string(&campaign(config, lead)?).map_err(|e| e.to_string())
}

pub fn build_buffer(leads: &[String], property: &str, seed: u64, steps: usize) -> Result<BufferHandle, String> {
    let settings = Settings {
        mode: "parallel".into(),
        property: property.into(),
        steps,
        tau: leadopt::fingerprint::DEFAULT_TAU,
        seed,
        retry: true,
    };
    let c = config(&settings, None)?;
    let rows = rows_from_smiles(leads, property);
    if rows.len() != leads.len() {
        return Err("some leads do not parse".into());
    }
    build(&c, &PropertyRegistry::builtin(), &rows, 1)
        .map(|(b, _)| b)
        .map_err(|e| e.to_string())
}

/// `(lead, similarity, [(tool_id, prompt_index)])` of a buffer hit.
pub type Hit = (String, f64, Vec<(String, usize)>);

pub fn top1(buffer: &BufferHandle, smiles: &str, property: &str) -> Result<Option<Hit>, String> {
    let m = mol(smiles)?;
    Ok(buffer.top1_similar(&m, property).map(|(rec, sim)| {
        let actions = rec.actions.iter().map(|a| (a.tool_id.clone(), a.prompt_index)).collect();
        (rec.lead.clone(), sim.value(), actions)
    }))
}

pub fn report_table(results: &[String]) -> Result<String, String> {
    let parsed: Vec<CampaignResult> = results
        .iter()
        .map(|r| serde_json::from_str(r).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let rep = MetricReport::compute(&parsed).map_err(|e| e.to_string())?;
    let label = parsed.first().map_or("run", |r| r.property_id.as_str());
    Ok(format!("{}{}", rep.table(label), rep.series_csv()))
}
