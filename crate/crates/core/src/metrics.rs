//! Campaign metrics: SR, SIM, RI, VR and the per-step BestFrom, Novelty,
//! Error Rate and Rescue Rate series.
//!
//! All rates are percentages. Per-step series pool counts across samples
//! before dividing.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::{evaluate, improves, PropertySpec};
use crate::molgraph::parse_smiles;
use crate::orchestrate::CampaignResult;

/// Similarity a success needs to count toward RI.
pub const RI_SIM_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no samples")]
    EmptyInput,
    #[error("no successful samples")]
    NoSuccesses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    /// Canonical form when valid, raw tool output otherwise.
    pub smiles: String,
    pub valid: bool,
    pub step: usize,
    pub passed: bool,
}

/// First attempt of a planned tool-action and whether its retry recovered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub step: usize,
    pub first_failed: bool,
    pub rescued: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub lead: String,
    pub succeeded: bool,
    pub sim: Option<f64>,
    pub ri: Option<f64>,
    /// Success whose lead value was zero, so RI is undefined.
    pub ri_zero_reference: bool,
    pub best_step: Option<usize>,
    pub steps: usize,
    pub generated: Vec<Generated>,
    pub actions: Vec<ActionOutcome>,
}

impl SampleOutcome {
    pub fn from_result(r: &CampaignResult) -> SampleOutcome {
        let mut generated = Vec::new();
        let mut actions = Vec::new();
        for step in &r.steps {
            let mut i = 0;
            while i < step.attempts.len() {
                let first = &step.attempts[i];
                let retry = step.attempts.get(i + 1).filter(|a| a.retry && a.action == first.action);
                let first_failed = !first.passed();
                actions.push(ActionOutcome {
                    step: step.step_index,
                    first_failed,
                    rescued: first_failed && retry.is_some_and(|a| a.passed()),
                });
                i += 1 + usize::from(retry.is_some());
            }
            for a in &step.attempts {
                for c in &a.checks {
                    generated.push(Generated {
                        smiles: c.canonical.clone().unwrap_or_else(|| c.smiles.clone()),
                        valid: c.valid,
                        step: step.step_index,
                        passed: c.passed(),
                    });
                }
            }
        }
        let best = r.best_seen.as_ref();
        SampleOutcome {
            lead: r.lead.clone(),
            succeeded: best.is_some(),
            sim: best.map(|b| b.sim),
            ri: best.and_then(|b| b.relative_improvement),
            ri_zero_reference: best.is_some_and(|b| b.zero_reference),
            best_step: best.map(|b| b.step_index),
            steps: r.steps.len(),
            generated,
            actions,
        }
    }
}

pub fn outcomes(results: &[CampaignResult]) -> Vec<SampleOutcome> {
    results.iter().map(SampleOutcome::from_result).collect()
}

fn pct(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

pub fn success_rate(outcomes: &[SampleOutcome]) -> Result<f64, MetricsError> {
    let n = outcomes.iter().filter(|o| o.succeeded).count();
    pct(n, outcomes.len()).ok_or(MetricsError::EmptyInput)
}

pub fn similarity_avg(outcomes: &[SampleOutcome]) -> Result<f64, MetricsError> {
    let sims: Vec<f64> = outcomes.iter().filter(|o| o.succeeded).filter_map(|o| o.sim).collect();
    if sims.is_empty() {
        return Err(MetricsError::NoSuccesses);
    }
    Ok(100.0 * sims.iter().sum::<f64>() / sims.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiSummary {
    pub value: Option<f64>,
    pub eligible: usize,
    pub excluded_zero_reference: usize,
    pub excluded_low_similarity: usize,
}

pub fn relative_improvement_avg(outcomes: &[SampleOutcome]) -> RiSummary {
    let mut s = RiSummary {
        value: None,
        eligible: 0,
        excluded_zero_reference: 0,
        excluded_low_similarity: 0,
    };
    let mut total = 0.0;
    for o in outcomes.iter().filter(|o| o.succeeded) {
        if o.sim.is_none_or(|x| x < RI_SIM_THRESHOLD) {
            s.excluded_low_similarity += 1;
        } else if o.ri_zero_reference {
            s.excluded_zero_reference += 1;
        } else if let Some(ri) = o.ri {
            total += ri;
            s.eligible += 1;
        }
    }
    if s.eligible > 0 {
        s.value = Some(100.0 * total / s.eligible as f64);
    }
    s
}

pub fn validity_rate(outcomes: &[SampleOutcome]) -> Result<f64, MetricsError> {
    let all = outcomes.iter().map(|o| o.generated.len()).sum();
    let valid = outcomes.iter().flat_map(|o| &o.generated).filter(|g| g.valid).count();
    pct(valid, all).ok_or(MetricsError::EmptyInput)
}

fn step_count(outcomes: &[SampleOutcome]) -> usize {
    outcomes.iter().map(|o| o.steps).max().unwrap_or(0)
}

pub fn best_from(outcomes: &[SampleOutcome]) -> Result<Vec<f64>, MetricsError> {
    let steps = step_count(outcomes);
    let mut counts = vec![0usize; steps];
    let mut n = 0;
    for o in outcomes.iter().filter(|o| o.succeeded) {
        if let Some(s) = o.best_step {
            counts[s] += 1;
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::NoSuccesses);
    }
    Ok(counts.iter().map(|&c| 100.0 * c as f64 / n as f64).collect())
}

/// Per-step `(novel, passing)` counts.
pub fn novelty_counts(outcomes: &[SampleOutcome]) -> Vec<(usize, usize)> {
    let steps = step_count(outcomes);
    let mut counts = vec![(0usize, 0usize); steps];
    for o in outcomes {
        for (s, slot) in counts.iter_mut().enumerate() {
            let earlier: BTreeSet<&str> = o
                .generated
                .iter()
                .filter(|g| g.step < s && g.valid)
                .map(|g| g.smiles.as_str())
                .collect();
            for g in o.generated.iter().filter(|g| g.step == s && g.passed) {
                slot.1 += 1;
                if !earlier.contains(g.smiles.as_str()) {
                    slot.0 += 1;
                }
            }
        }
    }
    counts
}

/// Absent for steps without passing candidates.
pub fn novelty(outcomes: &[SampleOutcome]) -> Vec<Option<f64>> {
    novelty_counts(outcomes).into_iter().map(|(n, d)| pct(n, d)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepErrors {
    pub generated: usize,
    pub failed: usize,
    pub failing_actions: usize,
    pub rescued_actions: usize,
}

impl StepErrors {
    pub fn error_rate(&self) -> Option<f64> {
        pct(self.failed, self.generated)
    }

    /// Absent when no tool-action failed its first attempt.
    pub fn rescue_rate(&self) -> Option<f64> {
        pct(self.rescued_actions, self.failing_actions)
    }
}

pub fn error_counts(outcomes: &[SampleOutcome]) -> Vec<StepErrors> {
    let steps = step_count(outcomes);
    let mut out = vec![
        StepErrors {
            generated: 0,
            failed: 0,
            failing_actions: 0,
            rescued_actions: 0
        };
        steps
    ];
    for o in outcomes {
        for g in &o.generated {
            out[g.step].generated += 1;
            out[g.step].failed += usize::from(!g.passed);
        }
        for a in &o.actions {
            out[a.step].failing_actions += usize::from(a.first_failed);
            out[a.step].rescued_actions += usize::from(a.rescued);
        }
    }
    out
}

pub fn error_and_rescue(outcomes: &[SampleOutcome]) -> Vec<(Option<f64>, Option<f64>)> {
    error_counts(outcomes)
        .iter()
        .map(|e| (e.error_rate(), e.rescue_rate()))
        .collect()
}

/// SR with the similarity gate removed: a sample succeeds if any valid
/// candidate improves on the lead. Candidates rejected for similarity were
/// never evaluated during the run, so they are evaluated here.
pub fn success_rate_without_similarity(results: &[CampaignResult], spec: &PropertySpec) -> Result<f64, MetricsError> {
    let ok = results
        .iter()
        .filter(|r| {
            r.best_seen.is_some()
                || r.steps.iter().flat_map(|s| &s.attempts).flat_map(|a| &a.checks).any(|c| {
                    let value = c.value.or_else(|| {
                        let mol = parse_smiles(c.canonical.as_deref()?).ok()?;
                        evaluate(spec, &mol).ok().map(|v| v.value)
                    });
                    value.is_some_and(|v| improves(r.direction, v, r.lead_value))
                })
        })
        .count();
    pct(ok, results.len()).ok_or(MetricsError::EmptyInput)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub samples: usize,
    pub succeeded: usize,
    pub sr: f64,
    pub sim: Option<f64>,
    pub ri: RiSummary,
    pub generated: usize,
    pub valid: usize,
    pub vr: Option<f64>,
    pub steps: usize,
    pub best_from: Option<Vec<f64>>,
    pub novelty: Vec<Option<f64>>,
    pub novelty_counts: Vec<(usize, usize)>,
    pub step_errors: Vec<StepErrors>,
    pub error_rate: Vec<Option<f64>>,
    pub rescue_rate: Vec<Option<f64>>,
    pub planned_invocations: usize,
    pub invocations: usize,
}

impl MetricReport {
    pub fn compute(results: &[CampaignResult]) -> Result<MetricReport, MetricsError> {
        let outs = outcomes(results);
        let step_errors = error_counts(&outs);
        Ok(MetricReport {
            samples: outs.len(),
            succeeded: outs.iter().filter(|o| o.succeeded).count(),
            sr: success_rate(&outs)?,
            sim: similarity_avg(&outs).ok(),
            ri: relative_improvement_avg(&outs),
            generated: outs.iter().map(|o| o.generated.len()).sum(),
            valid: outs.iter().flat_map(|o| &o.generated).filter(|g| g.valid).count(),
            vr: validity_rate(&outs).ok(),
            steps: step_count(&outs),
            best_from: best_from(&outs).ok(),
            novelty: novelty(&outs),
            novelty_counts: novelty_counts(&outs),
            error_rate: step_errors.iter().map(StepErrors::error_rate).collect(),
            rescue_rate: step_errors.iter().map(StepErrors::rescue_rate).collect(),
            step_errors,
            planned_invocations: results
                .iter()
                .flat_map(|r| &r.steps)
                .map(|s| s.plan.tool_calls.len())
                .sum(),
            invocations: results.iter().map(|r| r.invocation_count).sum(),
        })
    }

    pub fn table_header() -> String {
        format!("{:<16} {:>6} {:>8} {:>8} {:>8} {:>8}", "run", "n", "SR", "SIM", "RI", "VR")
    }

    /// One aligned row in SR / SIM / RI / VR order; absent values print as `-`.
    pub fn table_row(&self, label: &str) -> String {
        format!(
            "{:<16} {:>6} {:>8} {:>8} {:>8} {:>8}",
            label,
            self.samples,
            fmt2(Some(self.sr)),
            fmt2(self.sim),
            fmt2(self.ri.value),
            fmt2(self.vr)
        )
    }

    pub fn table(&self, label: &str) -> String {
        format!("{}\n{}\n", MetricReport::table_header(), self.table_row(label))
    }

    /// Per-step series: `step,error_rate,rescue_rate,best_from,novelty`.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("step,error_rate,rescue_rate,best_from,novelty\n");
        for s in 0..self.steps {
            let bf = self.best_from.as_ref().map(|b| b[s]);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s + 1,
                csv2(self.error_rate[s]),
                csv2(self.rescue_rate[s]),
                csv2(bf),
                csv2(self.novelty[s])
            );
        }
        out
    }
}

fn fmt2(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

fn csv2(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.2}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(succeeded: bool, sim: f64, ri: Option<f64>, best_step: usize) -> SampleOutcome {
        SampleOutcome {
            lead: "C".into(),
            succeeded,
            sim: succeeded.then_some(sim),
            ri: if succeeded { ri } else { None },
            ri_zero_reference: succeeded && ri.is_none(),
            best_step: succeeded.then_some(best_step),
            steps: 3,
            generated: vec![],
            actions: vec![],
        }
    }

    fn g(smiles: &str, valid: bool, step: usize, passed: bool) -> Generated {
        Generated {
            smiles: smiles.into(),
            valid,
            step,
            passed,
        }
    }

    #[test]
    fn success_rate_examples() {
        let s = |k: usize, n: usize| (0..n).map(|i| sample(i < k, 0.6, Some(0.1), 0)).collect::<Vec<_>>();
        assert_eq!(success_rate(&s(3, 4)).unwrap(), 75.0);
        assert_eq!(success_rate(&s(0, 4)).unwrap(), 0.0);
        assert_eq!(success_rate(&s(4, 4)).unwrap(), 100.0);
        assert_eq!(success_rate(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn similarity_examples() {
        let outs = vec![sample(true, 0.6, Some(0.1), 0), sample(true, 0.8, Some(0.1), 0), sample(false, 0.1, None, 0)];
        assert!((similarity_avg(&outs).unwrap() - 70.0).abs() < 1e-9);
        assert!((similarity_avg(&[sample(true, 0.55, Some(0.1), 0)]).unwrap() - 55.0).abs() < 1e-9);
        assert_eq!(similarity_avg(&[sample(false, 0.0, None, 0)]), Err(MetricsError::NoSuccesses));
    }

    #[test]
    fn ri_examples() {
        let outs = vec![sample(true, 0.6, Some(0.25), 0), sample(true, 0.7, Some(0.75), 0)];
        assert!((relative_improvement_avg(&outs).value.unwrap() - 50.0).abs() < 1e-9);
        let low = vec![sample(true, 0.45, Some(0.5), 0)];
        let r = relative_improvement_avg(&low);
        assert_eq!(r.value, None);
        assert_eq!(r.excluded_low_similarity, 1);
        let big = vec![sample(true, 0.6, Some(1.6305), 0)];
        assert!((relative_improvement_avg(&big).value.unwrap() - 163.05).abs() < 1e-9);
        let zero = vec![sample(true, 0.6, None, 0)];
        assert_eq!(relative_improvement_avg(&zero).excluded_zero_reference, 1);
    }

    #[test]
    fn validity_examples() {
        let mut o = sample(true, 0.6, Some(0.1), 0);
        o.generated = (0..10).map(|i| g("C", i != 0, 0, false)).collect();
        assert_eq!(validity_rate(&[o]).unwrap(), 90.0);
        assert_eq!(validity_rate(&[sample(false, 0.0, None, 0)]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn best_from_examples() {
        let outs: Vec<_> = [0, 2, 2, 2].iter().map(|&s| sample(true, 0.6, Some(0.1), s)).collect();
        assert_eq!(best_from(&outs).unwrap(), vec![25.0, 0.0, 75.0]);
        let all3: Vec<_> = (0..3).map(|_| sample(true, 0.6, Some(0.1), 2)).collect();
        assert_eq!(best_from(&all3).unwrap(), vec![0.0, 0.0, 100.0]);
    }

    #[test]
    fn novelty_examples() {
        let mut o = sample(true, 0.6, Some(0.1), 0);
        o.generated = vec![
            g("CCO", true, 0, true),
            g("CCN", true, 0, false),
            g("CCO", true, 1, true),
            g("CCS", true, 1, true),
            g("CCN", true, 1, true),
            g("CCF", true, 1, true),
        ];
        let n = novelty(&[o]);
        assert_eq!(n[0], Some(100.0));
        assert_eq!(n[1], Some(50.0));
        assert_eq!(n[2], None);
    }

    #[test]
    fn error_and_rescue_examples() {
        let mut o = sample(true, 0.6, Some(0.1), 0);
        o.generated = (0..10).map(|i| g("C", true, 1, i >= 4)).collect();
        o.actions = vec![
            ActionOutcome { step: 1, first_failed: true, rescued: true },
            ActionOutcome { step: 1, first_failed: true, rescued: false },
            ActionOutcome { step: 1, first_failed: true, rescued: false },
            ActionOutcome { step: 0, first_failed: false, rescued: false },
        ];
        let er = error_and_rescue(&[o]);
        assert_eq!(er[1].0, Some(40.0));
        assert!((er[1].1.unwrap() - 100.0 / 3.0).abs() < 1e-9);
        assert_eq!(er[0], (None, None));
    }

    #[test]
    fn formatting() {
        assert_eq!(fmt2(Some(75.0)), "75.00");
        assert_eq!(fmt2(None), "-");
        assert_eq!(csv2(None), "");
    }
}
